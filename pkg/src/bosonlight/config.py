"""TOML experiment configs: loading, validation and object construction.

Schema (blocks needed per experiment are listed in ``REQUIRED``)::

    experiment = "transport"          # optional; must match the CLI subcommand
    seed = 7                          # drives every random draw

    [lattice]       dims = [8], periodic = false, gamma = 3.0 (optional override)
    [hamiltonian]   model = "bose_hubbard", J, U, mu
                    or model = "custom", hoppings = [[i, j, J], ...],
                    potential = [{sites = [..], monomials = [[[exps], coeff], ...]}], g
    [basis]         sector (default: from the state), caps (default: sector)
    [state]         kind = "mott" (filling) | "product" (occupations)
                    | "random" (max_occupation optional)
    [evolution]     method, tolerance, krylov_dim
    [output]        dir, stem

plus one parameter block named after the experiment; see ``configs/`` for
complete examples.
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .evolve import EvolutionConfig
from .fock import FockBasis, basis_state, build_basis, count_states, mott_state, random_state
from .hamiltonian import HamiltonianSpec, PotentialTerm, System, bose_hubbard_spec
from .lattice import LatticeGraph, build_lattice

EXPERIMENTS = ("constants", "transport", "lr", "hhkl", "protocol")
REQUIRED = {
    "constants": ("constants",),
    "transport": ("lattice", "hamiltonian", "state", "transport"),
    "lr": ("lattice", "hamiltonian", "state", "lr"),
    "hhkl": ("lattice", "hamiltonian", "state", "hhkl"),
    "protocol": ("protocol",),
}


@dataclass
class ExperimentConfig:
    experiment: str
    raw: dict
    seed: int
    source: str = "<memory>"

    def block(self, name: str) -> dict:
        return self.raw.get(name, {})

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    def lattice(self) -> LatticeGraph:
        lat = self.block("lattice")
        dims = require(lat, "dims", "lattice")
        if not isinstance(dims, list) or not dims or not all(isinstance(d, int) and d > 0 for d in dims):
            raise ConfigError(f"lattice.dims must be a list of positive integers, got {dims!r}")
        return build_lattice(dims, lat.get("periodic", False))

    def hamiltonian(self, lattice: LatticeGraph) -> HamiltonianSpec:
        h = self.block("hamiltonian")
        model = h.get("model", "bose_hubbard")
        if model == "bose_hubbard":
            return bose_hubbard_spec(lattice, float(h.get("J", 1.0)), float(h.get("U", 0.0)),
                                     float(h.get("mu", 0.0)))
        if model == "custom":
            hops = tuple((int(i), int(j), complex(J)) for i, j, J in require(h, "hoppings", "hamiltonian"))
            pot = tuple(
                PotentialTerm(tuple(p["sites"]), tuple((tuple(e), float(c)) for e, c in p["monomials"]))
                for p in h.get("potential", [])
            )
            g = h.get("g")
            return HamiltonianSpec(lattice, hops, pot, g=None if g is None else float(g))
        raise ConfigError(f"hamiltonian.model must be 'bose_hubbard' or 'custom', got {model!r}")

    def sector(self, n_sites: int) -> int:
        b, s = self.block("basis"), self.block("state")
        if "sector" in b:
            return int(b["sector"])
        kind = s.get("kind", "mott")
        if kind == "mott":
            return int(s.get("filling", 1)) * n_sites
        if kind == "product":
            return int(sum(require(s, "occupations", "state")))
        raise ConfigError("basis.sector is required for random states")

    def caps(self, n_sites: int):
        return self.block("basis").get("caps", self.sector(n_sites))

    def estimated_dim(self) -> int:
        lat = self.lattice()
        caps = self.caps(lat.n_sites)
        caps = [caps] * lat.n_sites if isinstance(caps, int) else caps
        return count_states(caps, self.sector(lat.n_sites))

    def system(self) -> System:
        lat = self.lattice()
        spec = self.hamiltonian(lat)
        basis = build_basis(lat, self.caps(lat.n_sites), self.sector(lat.n_sites))
        gamma = self.block("lattice").get("gamma")
        return System(spec, basis, None if gamma is None else float(gamma))

    def state(self, basis: FockBasis, stream: int = 0) -> np.ndarray:
        s = self.block("state")
        kind = s.get("kind", "mott")
        if kind == "mott":
            return mott_state(basis, int(s.get("filling", 1)))
        if kind == "product":
            return basis_state(basis, require(s, "occupations", "state"))
        if kind == "random":
            mask = None
            if "max_occupation" in s:
                mask = basis.states.max(axis=1) <= int(s["max_occupation"])
            return random_state(basis, self.rng(stream), mask)
        raise ConfigError(f"state.kind must be mott, product or random, got {kind!r}")

    def evolution(self) -> EvolutionConfig:
        e = self.block("evolution")
        return EvolutionConfig(
            method=e.get("method", "auto"),
            tolerance=float(e.get("tolerance", 1e-10)),
            krylov_dim=int(e.get("krylov_dim", 30)),
        )


def require(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing required field '{where}.{key}'")
    return block[key]


def config_hash(raw: dict) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def parse(raw: dict, experiment: str | None = None, seed: int | None = None,
          source: str = "<memory>") -> ExperimentConfig:
    """Check the block structure and build an ``ExperimentConfig``.

    A CLI seed overrides the file's seed and is written back so the hash covers it.
    """
    raw = dict(raw)
    declared = raw.get("experiment")
    if experiment is None:
        experiment = declared
    if experiment is None:
        raise ConfigError("missing required field 'experiment'")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    if declared is not None and declared != experiment:
        raise ConfigError(f"config declares experiment {declared!r}, command asked for {experiment!r}")
    raw["experiment"] = experiment
    for name in REQUIRED[experiment]:
        if name not in raw:
            raise ConfigError(f"missing required block '[{name}]' for experiment {experiment!r}")
        if not isinstance(raw[name], dict):
            raise ConfigError(f"'{name}' must be a table")
    if seed is not None:
        raw["seed"] = int(seed)
    s = raw.get("seed", 0)
    if not isinstance(s, int) or s < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {s!r}")
    return ExperimentConfig(experiment, raw, s, source)


def load(path: str | Path, experiment: str | None = None, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse(raw, experiment, seed, str(path))


def times(block: dict, key: str, tau_max: float) -> list[float]:
    """Times given literally (``key``) or as multiples of ``tau_max`` (``key_tau``)."""
    if key in block:
        return [float(x) for x in _as_list(block[key])]
    if f"{key}_tau" in block:
        return [float(m) * tau_max for m in _as_list(block[f"{key}_tau"])]
    raise ConfigError(f"one of '{key}' or '{key}_tau' is required")


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]
