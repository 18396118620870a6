"""State propagation ``psi -> exp(-iHt) psi`` and expectation values.

Two independent routes: dense scaling-and-squaring (scipy) as ground truth for
small dimensions, and a Lanczos/Krylov propagator with adaptive substeps for
larger ones.  ``auto`` picks dense up to ``DENSE_MAX_DIM``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as la

from .errors import InvalidArgument, NumericalFailure
from .fock import SparseOperator

DENSE_MAX_DIM = 512


@dataclass(frozen=True)
class EvolutionConfig:
    method: str = "auto"
    tolerance: float = 1e-10
    krylov_dim: int = 30
    max_substep: float = math.inf

    def __post_init__(self):
        if self.method not in ("auto", "dense", "krylov"):
            raise InvalidArgument(f"unknown method {self.method!r}")
        if not self.tolerance > 0:
            raise InvalidArgument("tolerance must be positive")
        if self.krylov_dim < 2:
            raise InvalidArgument("krylov_dim must be >= 2")
        if not self.max_substep > 0:
            raise InvalidArgument("max_substep must be positive")


DEFAULT = EvolutionConfig()


def _matrix(H):
    return H.matrix if isinstance(H, SparseOperator) else H


def evolve(H, psi: np.ndarray, t: float, cfg: EvolutionConfig = DEFAULT) -> np.ndarray:
    """``exp(-iHt) psi``.

    ``H`` is a ``SparseOperator`` or a sequence of ``(SparseOperator, duration)``
    pieces applied in order; in the latter case ``t`` must equal the summed
    durations (pass ``None`` to skip the check).
    """
    if isinstance(H, (list, tuple)):
        total = sum(d for _, d in H)
        if t is not None and not math.isclose(total, t, rel_tol=1e-12, abs_tol=1e-14):
            raise InvalidArgument(f"schedule covers {total}, requested {t}")
        out = psi
        for piece, duration in H:
            out = evolve(piece, out, duration, cfg)
        return out

    if isinstance(H, SparseOperator) and H.hermitian is False:
        raise InvalidArgument("evolve needs a hermitian generator")
    m = _matrix(H)
    psi = np.asarray(psi, dtype=np.complex128)
    if m.shape[0] != psi.shape[0]:
        raise InvalidArgument(f"operator dim {m.shape[0]} != state dim {psi.shape[0]}")
    if t == 0:
        return psi.copy()
    method = cfg.method
    if method == "auto":
        method = "dense" if m.shape[0] <= DENSE_MAX_DIM else "krylov"
    if method == "dense":
        return expm_dense(m, t) @ psi
    return krylov_evolve(m, psi, t, cfg)


def expm_dense(m, t: float) -> np.ndarray:
    """Dense propagator ``exp(-i t H)``."""
    dense = m.toarray() if hasattr(m, "toarray") else np.asarray(m)
    return la.expm(-1j * t * dense)


def _lanczos(m, v: np.ndarray, kdim: int):
    """Orthonormal Krylov basis (rows), tridiagonal coefficients and the next beta.

    A zero next-beta flags an invariant subspace (exact result)."""
    n = v.shape[0]
    kdim = min(kdim, n)
    beta0 = np.linalg.norm(v)
    V = np.zeros((kdim + 1, n), dtype=np.complex128)
    alpha = np.zeros(kdim)
    beta = np.zeros(kdim)
    V[0] = v / beta0
    scale = 0.0
    for j in range(kdim):
        w = m @ V[j]
        alpha[j] = np.vdot(V[j], w).real
        w = w - alpha[j] * V[j]
        if j > 0:
            w -= beta[j - 1] * V[j - 1]
        # full reorthogonalisation; kdim is small
        w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
        b = np.linalg.norm(w)
        scale = max(scale, abs(alpha[j]), b)
        beta[j] = b
        if b <= 1e-13 * max(scale, 1.0):
            return V[: j + 1], alpha[: j + 1], beta[:j], 0.0
        V[j + 1] = w / b
    return V[:kdim], alpha, beta[: kdim - 1], beta[kdim - 1]


def _krylov_step(alpha, beta, beta_next, h):
    """Small-space exponential of the tridiagonal part and the residual error estimate."""
    k = len(alpha)
    T = np.diag(alpha) + np.diag(beta, 1) + np.diag(beta, -1)
    A = np.zeros((k + 1, k + 1), dtype=np.complex128)
    A[:k, :k] = -1j * h * T
    A[k, k - 1] = h * beta_next
    E = la.expm(A)
    return E[:k, 0], abs(E[k, 0])


def krylov_evolve(m, psi: np.ndarray, t: float, cfg: EvolutionConfig = DEFAULT) -> np.ndarray:
    """Adaptive-substep Lanczos propagation of ``exp(-iHt) psi``.

    Each substep is halved until the residual estimate (last subdiagonal times the
    corner of the phi_1 block) drops below ``tolerance * h / |t|``.
    """
    m = _matrix(m)
    sign = 1.0 if t >= 0 else -1.0
    T_total = abs(t)
    norm_h = abs(m).sum(axis=1).max() if m.nnz else 0.0
    kdim = cfg.krylov_dim
    h = min(T_total, cfg.max_substep, kdim / (2.0 * norm_h) if norm_h > 0 else T_total)
    h_min = T_total * 1e-12
    done = 0.0
    out = np.asarray(psi, dtype=np.complex128).copy()
    while done < T_total:
        beta0 = np.linalg.norm(out)
        if beta0 == 0:
            return out
        V, alpha, beta, beta_next = _lanczos(m, out, kdim)
        h = min(h, T_total - done, cfg.max_substep)
        while True:
            coeffs, err = _krylov_step(alpha, beta, beta_next, sign * h)
            err *= beta0
            allowed = cfg.tolerance * h / T_total
            if err <= allowed or beta_next == 0.0:
                break
            h *= 0.5
            if h < h_min:
                raise NumericalFailure(
                    "Krylov propagation did not converge",
                    time_done=done, substep=h, error_estimate=err, krylov_dim=kdim,
                )
        out = beta0 * (V.T @ coeffs)
        done += h
        if err < 0.01 * allowed:
            h *= 2.0
    return out


class SpectralPropagator:
    """Eigendecomposition of a small hermitian H for repeated ``exp(-iHt) psi`` at many t."""

    def __init__(self, H):
        m = _matrix(H)
        dense = m.toarray() if hasattr(m, "toarray") else np.asarray(m)
        self.energies, self.vectors = np.linalg.eigh(dense)

    def evolve(self, psi: np.ndarray, t: float) -> np.ndarray:
        c = self.vectors.conj().T @ psi
        return self.vectors @ (np.exp(-1j * self.energies * t) * c)

    def trajectory(self, psi: np.ndarray, times: Sequence[float]) -> np.ndarray:
        """Rows are ``exp(-iH t_k) psi``."""
        c = self.vectors.conj().T @ psi
        phases = np.exp(-1j * np.outer(times, self.energies))
        return (phases * c) @ self.vectors.T


def expectation(psi: np.ndarray, O) -> complex:
    return complex(np.vdot(psi, _matrix(O) @ psi))


def pure_state_trace_distance(applied: np.ndarray) -> float:
    """Trace norm of ``A|psi><psi|`` for normalised psi, given ``A|psi>``."""
    return float(np.linalg.norm(applied))
