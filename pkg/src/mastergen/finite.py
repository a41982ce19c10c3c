"""Finite master system with decreasing levels and alpha-free rates.

Levels satisfy ``lam_1 > lam_2 > ... > lam_N`` and the rates are
``r[m, n] = exp(-(lam_m - lam_n) / 2)``.  Column sums are
``b_m = Z_{1/2} exp(lam_m / 2)``, again strictly decreasing, so the secular
machinery applies with unit weights.  The Perron shift ``B = A + rho I`` has
``rho`` as its dominant eigenvalue, with the Gibbs vector as eigenvector.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .basis import build_system
from .errors import DomainError
from .evolution import modal_states, spectral_propagate
from .model import ProbabilityVector, _frozen, gibbs_vector, neumaier_sum, reverse_sum
from .secular import SecularContext, Spectrum, solve_spectrum

RHO_FACTOR = 1.125
POWER_MAX_ITER = 100_000


class SpectralGapWarning(RuntimeWarning):
    """Power iteration did not settle; the Perron gap is tiny."""


@dataclass(frozen=True, eq=False)
class FiniteModelC:
    lambdas: np.ndarray
    rho: float | None = None
    rates: np.ndarray = field(init=False, repr=False)
    b: np.ndarray = field(init=False, repr=False)
    generator: np.ndarray = field(init=False, repr=False)
    gain_profile: np.ndarray = field(init=False, repr=False)
    loss_profile: np.ndarray = field(init=False, repr=False)
    z_half: float = field(init=False)

    def __post_init__(self):
        lam = _frozen(self.lambdas)
        if lam.ndim != 1 or lam.size < 2:
            raise DomainError("need at least two levels")
        if np.any(np.diff(lam) >= 0.0):
            raise DomainError("levels must be strictly decreasing")
        object.__setattr__(self, "lambdas", lam)
        gain = np.exp(-lam / 2.0)
        loss = np.exp(lam / 2.0)
        rates = np.exp(-(lam[:, None] - lam[None, :]) / 2.0)
        n = lam.size
        b = np.array([reverse_sum(rates[:, m]) for m in range(n)])
        gen = rates.copy()
        for m in range(n):
            gen[m, m] = -reverse_sum(np.delete(rates[:, m], m))
        outflow = -np.diag(gen)
        rho = RHO_FACTOR * float(outflow.max()) if self.rho is None else float(self.rho)
        if not rho > float(outflow.max()):
            raise DomainError(f"rho={rho!r} must exceed the largest outflow {outflow.max()!r}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "rates", _frozen(rates))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "generator", _frozen(gen))
        object.__setattr__(self, "gain_profile", _frozen(gain))
        object.__setattr__(self, "loss_profile", _frozen(loss))
        object.__setattr__(self, "z_half", reverse_sum(gain))

    @property
    def n(self) -> int:
        return self.lambdas.size

    @property
    def shifted(self) -> np.ndarray:
        """``B = A + rho I``."""
        return self.generator + self.rho * np.eye(self.n)

    def gibbs(self, beta: float = 1.0) -> ProbabilityVector:
        return gibbs_vector(self, beta)


def finite_spectrum(model: FiniteModelC, **kwargs) -> Spectrum:
    """Roots of ``sum_m 1/(nu + b_m) = 1`` plus ``nu_1 = 0``."""
    ctx = SecularContext(np.ones(model.n), model.b, model.gain_profile, model.loss_profile)
    return solve_spectrum(ctx, trace=reverse_sum(np.diag(model.generator)), **kwargs)


@dataclass(frozen=True, eq=False)
class PerronResult:
    radius: float
    vector: np.ndarray
    iterations: int
    converged: bool

    def __iter__(self):
        yield self.radius
        yield self.vector


def perron_radius(model: FiniteModelC, tol: float = 1e-12, max_iter: int = POWER_MAX_ITER) -> PerronResult:
    """Power iteration on ``B`` from the uniform vector.

    The returned vector is scaled to unit sum.  Non-convergence emits a
    ``SpectralGapWarning`` and returns the last iterate.
    """
    if not tol > 0.0:
        raise DomainError("tol must be positive")
    x0 = np.full(model.n, 1.0 / model.n)
    rq, x, it = kernels.power_iterate(np.ascontiguousarray(model.shifted), x0, float(tol), int(max_iter))
    x = np.asarray(x)
    converged = it <= max_iter
    if not converged:
        warnings.warn(f"power iteration unsettled after {max_iter} steps", SpectralGapWarning, stacklevel=2)
    vec = x / neumaier_sum(x)
    return PerronResult(float(rq), _frozen(vec), min(it, max_iter), converged)


def dominance_margin(model: FiniteModelC, spectrum: Spectrum) -> float:
    """``rho - max_{k >= 2} |nu_k + rho|``; positive when rho dominates."""
    return model.rho - max(abs(r.nu + model.rho) for r in spectrum.records[1:])


def shifted_column_defect(model: FiniteModelC) -> float:
    """Largest ``|sum_m B[m, n] - rho|`` over columns (exact sums)."""
    import math

    cols = model.shifted
    return max(abs(math.fsum(cols[:, n]) - model.rho) for n in range(model.n))


@dataclass(frozen=True)
class FiniteDecayReport:
    passed: bool
    constant: float
    rate: float
    worst_ratio: float
    gamma_sum: float
    gamma_fit: float


def finite_decay_check(model: FiniteModelC, p0, taus, spectrum: Spectrum | None = None) -> FiniteDecayReport:
    """``|p_m(tau) - gamma p_Gibbs,m| <= c exp(-|nu_N| tau)`` for all m and taus.

    ``c = sum_{k >= 2} |c_k| max_m |p_k,m|``.  ``gamma_sum`` is the
    conserved total of ``p0``; ``gamma_fit`` projects the final state onto
    the Gibbs vector.
    """
    spectrum = finite_spectrum(model) if spectrum is None else spectrum
    system = build_system(model, spectrum, gram=False)
    traj = spectral_propagate(system, spectrum, p0, taus)
    c = traj.coefficients
    const = neumaier_sum(np.abs(c[1:]) * np.max(np.abs(system.rights[1:]), axis=1))
    rate = abs(spectrum.dominant().nu)
    g = system.rights[0]
    dev = np.max(np.abs(modal_states(system, traj.nus, c, traj.taus, first=2)), axis=1)
    bound = const * np.exp(-rate * traj.taus)
    ratio = np.where(bound > 0.0, dev / np.where(bound > 0.0, bound, 1.0), np.where(dev > 0.0, np.inf, 0.0))
    worst = float(np.max(ratio))
    gamma_fit = float(traj.final @ g / (g @ g))
    return FiniteDecayReport(bool(worst <= 1.0 + 1e-12), const, rate, worst, float(c[0]), gamma_fit)
