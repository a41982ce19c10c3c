"""Glue between a validated config and the numerical modules."""

from __future__ import annotations

import numpy as np

from .config import FiniteConfig, InitSpec, RunConfig
from .errors import ConfigError, SolverError
from .finite import FiniteModelC
from .model import TruncatedModel, truncate
from .secular import Spectrum, spectrum_of


def build_model(cfg: RunConfig) -> TruncatedModel:
    if cfg.level_spec is None:
        raise ConfigError("config has no model section")
    return truncate(cfg.level_spec, cfg.n)


def solve(cfg: RunConfig, model: TruncatedModel) -> Spectrum:
    """Solve the spectrum with the configured solver settings.

    Raises ``SolverError`` when any root misses ``solver.residual_tol``.
    """
    s = cfg.solver
    spectrum = spectrum_of(model, workers=s.workers, bisect_fraction=s.bisect_tol,
                           newton_max_iter=s.newton_max_iter)
    for rec in spectrum.records:
        if rec.secular_residual > s.residual_tol:
            err = SolverError(f"k={rec.k}: secular residual {rec.secular_residual!r} exceeds {s.residual_tol!r}")
            err.k = rec.k
            raise err
    return spectrum


def initial_vector(init: InitSpec, model, system=None) -> np.ndarray:
    n = model.n
    if init.kind == "gibbs":
        return np.array(model.gibbs().components)
    if init.kind == "basis_state":
        p = np.zeros(n)
        p[init.index - 1] = 1.0
        return p
    if init.kind == "file":
        return np.array(init.values)
    if init.kind == "gibbs_plus_mode":
        if system is None:
            raise ValueError("gibbs_plus_mode needs the eigenvector system")
        p = system.rights[0] + init.eps * system.rights[init.index - 1]
        if p.min() < -1e-12:
            raise ConfigError(f"{init.text}: eps too large, component {float(p.min())!r} is negative")
        return p
    raise ConfigError(f"unknown initial condition {init.text!r}")


def sample_taus(tau_max: float, samples: int) -> np.ndarray:
    return np.linspace(0.0, tau_max, samples)


def finite_model(fin: FiniteConfig) -> FiniteModelC:
    return FiniteModelC(np.array(fin.levels), fin.rho)
