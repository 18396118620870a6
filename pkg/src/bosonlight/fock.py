"""Truncated occupation-number bases and sparse bosonic operators.

States are enumerated in ascending lexicographic order of the occupation
vector (site 0 most significant).  Each state carries its mixed-radix code, so
ranking is a binary search on a sorted integer array in both the full and the
fixed-number case.  Creation beyond a site cap maps to zero: operators built
here are the projected operators, never an error.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, ResourceLimitError, Unsupported

DEFAULT_DIM_LIMIT = 2**22
HERMITIAN_TOL = 1e-12


def dim_limit() -> int:
    raw = os.environ.get("BOSONLIGHT_DIM_LIMIT")
    return int(raw) if raw else DEFAULT_DIM_LIMIT


def count_states(caps: Sequence[int], sector: int | None = None) -> int:
    """Basis dimension without enumerating it."""
    caps = [int(q) for q in caps]
    if sector is None:
        out = 1
        for q in caps:
            out *= q + 1
        return out
    ways = [1] + [0] * sector
    for q in caps:
        new = [0] * (sector + 1)
        for total, w in enumerate(ways):
            if w:
                for n in range(min(q, sector - total) + 1):
                    new[total + n] += w
        ways = new
    return ways[sector]


@dataclass(frozen=True, eq=False)
class FockBasis:
    caps: tuple[int, ...]
    sector: int | None
    states: np.ndarray = field(repr=False)
    codes: np.ndarray = field(repr=False)
    radix: np.ndarray = field(repr=False)

    @property
    def n_sites(self) -> int:
        return len(self.caps)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def is_exact(self) -> bool:
        """True when no cap can bind, i.e. the basis is the untruncated sector."""
        return self.sector is not None and min(self.caps) >= self.sector

    def encode(self, occupations: np.ndarray) -> np.ndarray:
        return np.asarray(occupations, dtype=np.int64) @ self.radix

    def index(self, occupation: Sequence[int]) -> int:
        """Rank of one occupation vector; raises if it is not in the basis."""
        occ = np.asarray(occupation, dtype=np.int64)
        if occ.shape != (self.n_sites,) or np.any(occ < 0) or np.any(occ > np.array(self.caps)):
            raise InvalidArgument(f"occupation {tuple(occ)} not representable with caps {self.caps}")
        k = int(np.searchsorted(self.codes, int(occ @ self.radix)))
        if k >= self.dim or not np.array_equal(self.states[k], occ):
            raise InvalidArgument(f"occupation {tuple(occ)} not in basis (sector {self.sector})")
        return k

    def lookup(self, occupations: np.ndarray) -> np.ndarray:
        """Vectorised rank; ``-1`` for rows not in the basis."""
        occ = np.asarray(occupations, dtype=np.int64)
        inside = np.all((occ >= 0) & (occ <= np.array(self.caps)), axis=1)
        codes = np.where(inside, occ @ self.radix, -1)
        k = np.searchsorted(self.codes, codes)
        k = np.minimum(k, self.dim - 1)
        found = inside & (self.codes[k] == codes)
        return np.where(found, k, -1)

    def unrank(self, k: int) -> tuple[int, ...]:
        return tuple(int(n) for n in self.states[k])

    def occupation(self, sites: Iterable[int]) -> np.ndarray:
        """Total occupation of a set of sites for every basis state."""
        idx = sorted(int(i) for i in sites)
        if not idx:
            return np.zeros(self.dim, dtype=np.int64)
        return self.states[:, idx].sum(axis=1)


def build_basis(n_sites_or_lattice, caps: int | Sequence[int], sector: int | None = None) -> FockBasis:
    """Enumerate ``0 <= n_i <= caps[i]`` (and ``sum n_i == sector`` if given).

    The first argument is a site count or anything with an ``n_sites`` attribute.
    """
    n = getattr(n_sites_or_lattice, "n_sites", n_sites_or_lattice)
    n = int(n)
    if isinstance(caps, (int, np.integer)):
        caps = (int(caps),) * n
    caps = tuple(int(q) for q in caps)
    if len(caps) != n:
        raise InvalidArgument(f"{len(caps)} caps given for {n} sites")
    if any(q < 0 for q in caps):
        raise InvalidArgument("caps must be non-negative")
    if sector is not None:
        sector = int(sector)
        if not 0 <= sector <= sum(caps):
            raise InvalidArgument(f"sector N={sector} outside [0, {sum(caps)}]")
    dim = count_states(caps, sector)
    limit = dim_limit()
    if dim > limit:
        raise ResourceLimitError(f"basis dimension {dim} exceeds limit {limit}")

    radix = np.ones(n, dtype=np.int64)
    for i in range(n - 2, -1, -1):
        radix[i] = radix[i + 1] * (caps[i + 1] + 1)

    # prefix-major extension keeps the lexicographic order
    states = np.zeros((1, 0), dtype=np.int64)
    totals = np.zeros(1, dtype=np.int64)
    remaining = np.cumsum(caps[::-1])[::-1].tolist() + [0]
    for i, q in enumerate(caps):
        occ = np.arange(q + 1, dtype=np.int64)
        states = np.hstack([np.repeat(states, q + 1, axis=0), np.tile(occ, len(states))[:, None]])
        totals = np.repeat(totals, q + 1) + np.tile(occ, len(totals))
        if sector is not None:
            keep = (totals <= sector) & (totals + remaining[i + 1] >= sector)
            states, totals = states[keep], totals[keep]
    codes = states @ radix
    return FockBasis(caps, sector, states, codes, radix)


@dataclass(frozen=True, eq=False)
class SparseOperator:
    """CSR matrix plus a hermiticity flag (``None`` means not checked)."""

    matrix: sp.csr_matrix
    hermitian: bool | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            return SparseOperator(_canonical(self.matrix @ other.matrix))
        return self.matrix @ other

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        herm = True if (self.hermitian and other.hermitian) else None
        return SparseOperator(_canonical(self.matrix + other.matrix), herm)

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        herm = True if (self.hermitian and other.hermitian) else None
        return SparseOperator(_canonical(self.matrix - other.matrix), herm)

    def scaled(self, c: complex) -> "SparseOperator":
        herm = self.hermitian if np.isreal(c) else None
        return SparseOperator(_canonical(self.matrix * c), herm)

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    @property
    def is_diagonal(self) -> bool:
        coo = self.matrix.tocoo()
        return bool(np.all(coo.row == coo.col))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_error(self) -> float:
        diff = self.matrix - self.matrix.conj().transpose()
        return float(abs(diff).max()) if diff.nnz else 0.0

    def checked(self, tol: float = HERMITIAN_TOL) -> "SparseOperator":
        return SparseOperator(self.matrix, self.hermiticity_error() <= tol)

    def triplets(self):
        coo = self.matrix.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))


def _canonical(m) -> sp.csr_matrix:
    m = sp.csr_matrix(m, dtype=np.complex128)
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


def diagonal_operator(values: np.ndarray, hermitian: bool | None = None) -> SparseOperator:
    values = np.asarray(values)
    if hermitian is None:
        hermitian = bool(np.all(np.abs(np.imag(values)) <= HERMITIAN_TOL))
    return SparseOperator(_canonical(sp.diags(values.astype(np.complex128))), hermitian)


def identity(basis: FockBasis) -> SparseOperator:
    return diagonal_operator(np.ones(basis.dim), True)


def hopping_triplets(basis: FockBasis, i: int, j: int):
    """(rows, cols, amplitudes) of ``b_i b_j^dagger`` restricted to the basis."""
    ni = basis.states[:, i]
    nj = basis.states[:, j]
    src = np.flatnonzero((ni >= 1) & (nj < basis.caps[j]))
    target = basis.states[src].copy()
    target[:, i] -= 1
    target[:, j] += 1
    rows = basis.lookup(target)
    ok = rows >= 0
    src, rows = src[ok], rows[ok]
    amp = np.sqrt(ni[src] * (nj[src] + 1.0))
    return rows, src, amp


def op_hopping(basis: FockBasis, i: int, j: int, J: complex = 1.0) -> SparseOperator:
    """``J b_i b_j^dagger + conj(J) b_j b_i^dagger``; transitions past a cap are dropped."""
    i, j = int(i), int(j)
    if i == j:
        raise InvalidArgument("hopping needs two distinct sites")
    for s in (i, j):
        if not 0 <= s < basis.n_sites:
            raise InvalidArgument(f"site {s} outside basis")
    rows, cols, amp = hopping_triplets(basis, i, j)
    a = sp.csr_matrix((J * amp, (rows, cols)), shape=(basis.dim, basis.dim), dtype=np.complex128)
    op = SparseOperator(_canonical(a + a.conj().transpose()))
    return op.checked()


def op_annihilation(basis: FockBasis, i: int) -> SparseOperator:
    """``b_i`` on a basis without a number sector."""
    if basis.sector is not None:
        raise Unsupported("b_i changes the boson number; use a basis without sector")
    n = basis.states[:, i]
    src = np.flatnonzero(n >= 1)
    target = basis.states[src].copy()
    target[:, i] -= 1
    rows = basis.lookup(target)
    a = sp.csr_matrix((np.sqrt(n[src].astype(float)), (rows, src)), shape=(basis.dim, basis.dim))
    return SparseOperator(_canonical(a), False)


def op_number(basis: FockBasis, X: Iterable[int], power: int = 1) -> SparseOperator:
    """Diagonal ``(sum_{i in X} n_i)^power``."""
    if power < 1:
        raise InvalidArgument("power must be >= 1")
    return diagonal_operator(basis.occupation(X).astype(float) ** power, True)


def projector_number(basis: FockBasis, X: Iterable[int], lo: int = 0, hi: int | None = None) -> SparseOperator:
    """Diagonal 0/1 projector onto ``lo <= n_X <= hi`` (``hi=None`` means no upper limit)."""
    nX = basis.occupation(X)
    sel = nX >= lo
    if hi is not None:
        sel &= nX <= hi
    return diagonal_operator(sel.astype(float), True)


def projector_caps(basis: FockBasis, qbar: int, sites: Iterable[int] | None = None) -> SparseOperator:
    """Product over ``sites`` of the single-site projectors ``n_i <= qbar``."""
    idx = range(basis.n_sites) if sites is None else sorted(sites)
    sel = np.all(basis.states[:, list(idx)] <= qbar, axis=1)
    return diagonal_operator(sel.astype(float), True)


def weighted_number(basis: FockBasis, weights: Sequence[float]) -> SparseOperator:
    """Diagonal ``sum_j w_j n_j``."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (basis.n_sites,):
        raise InvalidArgument(f"need {basis.n_sites} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidArgument("weights must be finite and non-negative")
    return diagonal_operator(basis.states @ w, True)


# -- states ------------------------------------------------------------------

def basis_state(basis: FockBasis, occupation: Sequence[int]) -> np.ndarray:
    psi = np.zeros(basis.dim, dtype=np.complex128)
    psi[basis.index(occupation)] = 1.0
    return psi


def mott_state(basis: FockBasis, filling: int = 1) -> np.ndarray:
    if filling > min(basis.caps):
        raise InvalidArgument(f"Mott filling {filling} exceeds a site cap {min(basis.caps)}")
    return basis_state(basis, [filling] * basis.n_sites)


def random_state(basis: FockBasis, rng: np.random.Generator, mask: np.ndarray | None = None) -> np.ndarray:
    """Normalised complex Gaussian amplitudes, optionally supported on ``mask`` only."""
    psi = rng.standard_normal(basis.dim) + 1j * rng.standard_normal(basis.dim)
    if mask is not None:
        psi = np.where(mask, psi, 0.0)
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise InvalidArgument("empty support for random state")
    return psi / nrm


def custom_state(basis: FockBasis, amplitudes: dict) -> np.ndarray:
    """State from ``{occupation tuple: amplitude}``, normalised."""
    psi = np.zeros(basis.dim, dtype=np.complex128)
    for occ, amp in amplitudes.items():
        psi[basis.index(occ)] += amp
    nrm = np.linalg.norm(psi)
    if nrm == 0:
        raise InvalidArgument("custom state has zero norm")
    return psi / nrm


def embed(psi: np.ndarray, source: FockBasis, target: FockBasis) -> np.ndarray:
    """Copy amplitudes into a larger basis; states missing from ``target`` must carry no weight."""
    if source.n_sites != target.n_sites:
        raise InvalidArgument("bases live on different site counts")
    idx = target.lookup(source.states)
    lost = idx < 0
    if np.any(np.abs(psi[lost]) > 0):
        raise InvalidArgument("state has weight outside the target basis")
    out = np.zeros(target.dim, dtype=np.complex128)
    out[idx[~lost]] = psi[~lost]
    return out


def truncation_leakage(basis: FockBasis, psi: np.ndarray) -> float:
    """Weight on cap-saturated states; identically zero for an exact sector basis."""
    if basis.is_exact:
        return 0.0
    at_cap = np.any(basis.states == np.array(basis.caps), axis=1)
    return float(np.sum(np.abs(psi[at_cap]) ** 2))
