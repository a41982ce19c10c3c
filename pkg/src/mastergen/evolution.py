"""Semigroup evolution: spectral propagation, an RK4 oracle and decay checks.

Spectral propagation evaluates ``p(tau) = sum_k c_k exp(tau nu_k) p_k`` with
``c_k = (p0, q_k)``.  The RK4 integrator works on the generator matrix alone
and shares nothing with the spectral path except the model, so agreement
between the two is an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .basis import BiorthogonalSystem
from .errors import DomainError, StiffnessError
from .model import ProbabilityVector, _frozen, neumaier_sum
from .secular import Spectrum

CONVERGED_FLOOR = 1e-14
SUM_TOL = 1e-9
NEG_TOL = 1e-12


def _vector(p) -> np.ndarray:
    if isinstance(p, ProbabilityVector):
        return np.array(p.components)
    return np.array(p, dtype=float).ravel()


def _taus(taus) -> np.ndarray:
    t = np.array(taus, dtype=float).ravel()
    if t.size == 0 or np.any(t < 0.0) or not np.all(np.isfinite(t)):
        raise DomainError("taus must be finite and nonnegative")
    if np.any(np.diff(t) <= 0.0):
        raise DomainError("taus must be strictly increasing")
    return t


@dataclass(frozen=True, eq=False)
class Trajectory:
    taus: np.ndarray
    states: np.ndarray
    method: str
    coefficients: np.ndarray | None = None
    nus: np.ndarray | None = None

    def __len__(self):
        return self.taus.size

    def state(self, i: int) -> ProbabilityVector:
        row = self.states[i]
        return ProbabilityVector(row, neumaier_sum(row))

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def modal_states(system: BiorthogonalSystem, nus, coefficients, taus, first: int = 1) -> np.ndarray:
    """``sum_{k >= first} c_k exp(tau nu_k) p_k`` for every tau (rows)."""
    c = np.asarray(coefficients, dtype=float)[first - 1:]
    nu = np.asarray(nus, dtype=float)[first - 1:]
    rights = system.rights[first - 1:]
    growth = np.exp(np.outer(taus, nu))
    return np.einsum("tk,km->tm", growth * c[None, :], rights)


def spectral_propagate(system: BiorthogonalSystem, spectrum: Spectrum, p0, taus) -> Trajectory:
    t = _taus(taus)
    p = _vector(p0)
    if p.size != system.n:
        raise DomainError(f"initial vector has {p.size} entries, model has {system.n}")
    c = system.coefficients(p)
    nus = spectrum.nus
    states = modal_states(system, nus, c, t)
    return Trajectory(_frozen(t), _frozen(states), "spectral", _frozen(c), _frozen(nus))


def ode_propagate(model, p0, taus, tol: float = 1e-10, h0: float | None = None) -> Trajectory:
    """Classical RK4 with step halving.

    A step of size ``h`` is compared against two steps of ``h/2``; it is
    accepted when the difference per unit time is at most ``tol``, and the
    halved result is kept.  Steps are clipped to land exactly on samples.
    States are never renormalized.
    """
    if not tol > 0.0:
        raise DomainError("tol must be positive")
    t_out = _taus(taus)
    a = np.ascontiguousarray(model.generator)
    y = _vector(p0)
    if y.size != a.shape[0]:
        raise DomainError(f"initial vector has {y.size} entries, model has {a.shape[0]}")
    tau_max = float(t_out[-1])
    h_min = 1e-14 * max(tau_max, 1.0)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    h = h0 if h0 is not None else (0.5 / scale if scale > 0.0 else max(tau_max, 1.0))
    t = 0.0
    states = []
    for target in t_out:
        while t < target:
            step = min(h, target - t)
            full = kernels.rk4_step(a, y, step)
            half = kernels.rk4_step(a, kernels.rk4_step(a, y, 0.5 * step), 0.5 * step)
            err = float(np.max(np.abs(half - full))) / step
            if err <= tol:
                y = np.asarray(half)
                t = target if step == target - t else t + step
                if err < tol / 32.0 and step == h:
                    h *= 2.0
            else:
                h = 0.5 * step
                if h < h_min:
                    raise StiffnessError("RK4 step size underflow", t)
        states.append(np.array(y))
    return Trajectory(_frozen(t_out), _frozen(states), "ode")


def trajectory_distance(first: Trajectory, second: Trajectory) -> np.ndarray:
    """l2 distance between two trajectories sampled on the same taus."""
    if not np.array_equal(first.taus, second.taus):
        raise DomainError("trajectories use different sample times")
    return np.linalg.norm(first.states - second.states, axis=1)


def cross_validate(model, system, spectrum, p0, taus, tol: float = 1e-10) -> float:
    """Sup over samples of the spectral vs RK4 l2 distance."""
    spec = spectral_propagate(system, spectrum, p0, taus)
    ode = ode_propagate(model, p0, taus, tol)
    return float(np.max(trajectory_distance(spec, ode)))


@dataclass(frozen=True)
class DecayReport:
    """Fitted decay rate against the slowest nonzero eigenvalue.

    ``solver_index`` is the position in the increasing spectrum
    (``N`` for the slowest mode); ``magnitude_index`` orders by ``|nu|``
    with ``nu = 0`` first, so the slowest nonzero mode is always 2.
    """

    fitted_rate: float | None
    expected_rate: float
    relative_gap: float | None
    solver_index: int
    magnitude_index: int
    converged: bool
    window: tuple[float, float]


def significant_modes(trajectory: Trajectory, system: BiorthogonalSystem,
                      floor: float = CONVERGED_FLOOR) -> np.ndarray:
    """Mask of coefficients ``c_k`` (k >= 2) that rise above rounding noise.

    The noise scale of ``c_k = (p0, q_k)`` is ``sum_m |q_km p0_m|``; a
    coefficient within ``floor`` of that scale is indistinguishable from 0.
    The mask for ``k = 1`` is always False.
    """
    p0 = trajectory.states[0]
    scale = np.einsum("km,m->k", np.abs(system.lefts), np.abs(p0))
    mask = np.abs(trajectory.coefficients) > floor * scale
    mask[0] = False
    return mask


def deviation_norms(trajectory: Trajectory, system: BiorthogonalSystem) -> np.ndarray:
    """``||p(tau) - c_1 p_Gibbs||`` per sample.

    With spectral coefficients available the deviation is summed mode by
    mode over the significant modes, which avoids the rounding floor of a
    subtraction.
    """
    if trajectory.coefficients is not None:
        c = np.where(significant_modes(trajectory, system), trajectory.coefficients, 0.0)
        dev = modal_states(system, trajectory.nus, c, trajectory.taus, first=2)
        return np.linalg.norm(dev, axis=1)
    c1 = neumaier_sum(trajectory.states[0])
    return np.linalg.norm(trajectory.states - c1 * system.rights[0][None, :], axis=1)


def decay_fit(trajectory: Trajectory, system: BiorthogonalSystem, spectrum: Spectrum) -> DecayReport:
    """Least-squares slope of ``ln ||p - c_1 p_Gibbs||`` over the last half of samples.

    The converged marker replaces the fit when the deviation is rounding
    noise: no significant mode for a spectral trajectory, or a tail
    distance below ``1e-14`` for a sampled (ODE) trajectory.
    """
    if len(trajectory) < 8:
        raise DomainError("decay fit needs at least 8 samples")
    dom = spectrum.dominant()
    if trajectory.taus[-1] < 5.0 / abs(dom.nu):
        raise DomainError("tau_max must reach 5/|nu| of the slowest mode")
    half = len(trajectory) // 2
    window = (float(trajectory.taus[half]), float(trajectory.taus[-1]))
    if trajectory.coefficients is not None and not significant_modes(trajectory, system).any():
        return DecayReport(None, dom.nu, None, dom.k, 2, True, window)
    tail = deviation_norms(trajectory, system)[half:]
    floor = 0.0 if trajectory.coefficients is not None else CONVERGED_FLOOR
    if np.any(tail <= floor):
        return DecayReport(None, dom.nu, None, dom.k, 2, True, window)
    slope = float(np.polyfit(trajectory.taus[half:], np.log(tail), 1)[0])
    gap = abs(slope - dom.nu) / abs(dom.nu)
    return DecayReport(slope, dom.nu, gap, dom.k, 2, False, window)


@dataclass(frozen=True)
class PositivityReport:
    passed: bool
    max_sum_drift: float
    min_component: float
    violations: tuple[tuple[float, str, float], ...]


def positivity_conservation_check(trajectory: Trajectory, sum_tol: float = SUM_TOL,
                                  neg_tol: float = NEG_TOL) -> PositivityReport:
    """Every sample must sum to 1 within ``sum_tol`` and stay above ``-neg_tol``."""
    violations = []
    drift = 0.0
    low = math.inf
    for tau, row in zip(trajectory.taus, trajectory.states):
        s = neumaier_sum(row) - 1.0
        lo = float(row.min())
        drift = max(drift, abs(s))
        low = min(low, lo)
        if abs(s) > sum_tol:
            violations.append((float(tau), "sum", s))
        if lo < -neg_tol:
            violations.append((float(tau), "negative", lo))
    return PositivityReport(not violations, drift, low, tuple(violations))


@dataclass(frozen=True)
class LyapunovReport:
    exponent: float
    trend: tuple[float, ...]
    taus: tuple[float, ...]


def lyapunov_estimate(spectrum: Spectrum, system: BiorthogonalSystem | None = None,
                      taus=(1.0, 10.0, 100.0)) -> LyapunovReport:
    """Largest eigenvalue, plus ``ln ||exp(tau A) g|| / tau`` for the unit-norm Gibbs ``g``."""
    exponent = float(max(spectrum.nus))
    trend = ()
    if system is not None:
        g = system.rights[0] / np.linalg.norm(system.rights[0])
        traj = spectral_propagate(system, spectrum, g, taus)
        trend = tuple(float(math.log(np.linalg.norm(row)) / tau)
                      for tau, row in zip(traj.taus, traj.states))
    return LyapunovReport(exponent, trend, tuple(float(t) for t in taus))


def semigroup_defect(system: BiorthogonalSystem, spectrum: Spectrum, p0, tau1: float, tau2: float) -> float:
    """l2 gap between one step of ``tau1 + tau2`` and two re-expanded steps."""
    direct = spectral_propagate(system, spectrum, p0, [tau1 + tau2]).final
    mid = spectral_propagate(system, spectrum, p0, [tau1]).final
    two = spectral_propagate(system, spectrum, mid, [tau2]).final
    return float(np.linalg.norm(direct - two))


@dataclass(frozen=True)
class EnvelopeReport:
    passed: bool
    constant: float
    rate: float
    worst_ratio: float
    outside_span: float


def envelope_check(trajectory: Trajectory, system: BiorthogonalSystem, spectrum: Spectrum,
                   upto: int, span_tol: float = 1e-8) -> EnvelopeReport:
    """``||p(tau) - c_1 p_Gibbs|| <= (sum_{2..K} |c_k| ||p_k||) exp(-|nu_K| tau)``.

    ``p0`` must lie in the span of the first ``K = upto`` right vectors,
    checked as ``|c_k| <= span_tol`` for ``k > K``.
    """
    if trajectory.coefficients is None:
        raise DomainError("envelope check needs a spectral trajectory")
    if not 2 <= upto <= system.n:
        raise DomainError(f"upto={upto} outside 2..{system.n}")
    c = trajectory.coefficients
    outside = float(np.max(np.abs(c[upto:]))) if upto < system.n else 0.0
    norms = np.linalg.norm(system.rights[1:upto], axis=1)
    const = neumaier_sum(np.abs(c[1:upto]) * norms)
    rate = abs(float(spectrum.record(upto).nu))
    d = deviation_norms(trajectory, system)
    bound = const * np.exp(-rate * trajectory.taus)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0.0, d / bound, np.where(d > 0.0, np.inf, 0.0))
    worst = float(np.max(ratio))
    # one part in 1e12 of slack absorbs rounding in the modal sum
    return EnvelopeReport(bool(worst <= 1.0 + 1e-12 and outside <= span_tol), const, rate, worst, outside)


def stationarity_defect(system: BiorthogonalSystem, spectrum: Spectrum, taus=(0.1, 1.0, 10.0)) -> float:
    """Max over taus of ``||exp(tau A) p_Gibbs - p_Gibbs||``."""
    g = system.rights[0]
    traj = spectral_propagate(system, spectrum, g, taus)
    return float(np.max(np.linalg.norm(traj.states - g[None, :], axis=1)))


def single_mode_start(system: BiorthogonalSystem, k: int, floor: float = 1e-3):
    """``p_Gibbs + eps p_k`` with the largest eps keeping every component at
    least ``floor`` times its Gibbs value.  Returns ``(p0, eps)``."""
    if not 2 <= k <= system.n:
        raise DomainError(f"k={k} outside 2..{system.n}")
    g = system.rights[0]
    p = system.rights[k - 1]
    neg = p < 0.0
    eps = (1.0 - floor) * float(np.min(g[neg] / -p[neg]))
    return g + eps * p, eps


def decay_grid(spectrum: Spectrum, span: float = 20.0, samples: int = 81) -> np.ndarray:
    """Uniform grid from 0 to ``span / |nu|`` of the slowest mode."""
    return np.linspace(0.0, span / abs(spectrum.dominant().nu), samples)
