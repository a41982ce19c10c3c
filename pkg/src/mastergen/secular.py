"""Secular function and the bracketed eigenvalue solver.

Every nonzero eigenvalue of a rank-one-plus-diagonal generator solves

    f(nu) = sum_m w_m / (nu + b_m) = 1

and the k-th one sits strictly between the poles ``-b[k-1]`` and ``-b[k]``.
For large ``k`` the root crowds the right pole far below double-precision
resolution of ``b[k]``, so a root is stored as an anchor pole plus an
offset (``PolePoint``) and every denominator ``nu + b_m`` is rebuilt as
``(b_m - b_anchor) + offset``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import ConditioningError, DomainError, PoleError, SolverError
from .model import TruncatedModel, _frozen, reverse_sum

BISECT_FRACTION = 1e-3
RESIDUAL_TOL = 1e-11
NEWTON_MAX_ITER = 100


class PolePoint(NamedTuple):
    """The real number ``-b[anchor] + offset`` (0-based anchor)."""

    anchor: int
    offset: float


@dataclass(frozen=True, eq=False)
class SecularContext:
    """Weights and strictly decreasing poles of a secular function.

    ``right_num``/``left_num`` are the eigenvector numerators; their
    product is ``weights``.
    """

    weights: np.ndarray
    poles: np.ndarray
    right_num: np.ndarray | None = None
    left_num: np.ndarray | None = None

    def __post_init__(self):
        w = _frozen(self.weights)
        b = _frozen(self.poles)
        if w.shape != b.shape or w.ndim != 1:
            raise DomainError("weights and poles must be 1-D and the same length")
        if np.any(w <= 0.0):
            raise DomainError("weights must be strictly positive")
        if np.any(b <= 0.0):
            raise DomainError("poles must be strictly positive")
        if np.any(np.diff(b) >= 0.0):
            raise DomainError("poles must be strictly decreasing (levels strictly increasing)")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "poles", b)
        for name in ("right_num", "left_num"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen(val))

    @classmethod
    def from_model(cls, model: TruncatedModel) -> "SecularContext":
        w = np.exp(-model.alpha * model.lambdas)
        return cls(w, model.b, model.gain_profile, model.loss_profile)

    @property
    def n(self) -> int:
        return self.poles.size

    @property
    def deflated_weights(self) -> np.ndarray:
        return self.weights / self.poles

    def nu(self, point) -> float:
        if isinstance(point, PolePoint):
            return point.offset - float(self.poles[point.anchor])
        return float(point)

    def denominators(self, point) -> np.ndarray:
        """``nu + b_m`` for every ``m``, exact in the pole-adjacent entry."""
        if isinstance(point, PolePoint):
            return (self.poles - self.poles[point.anchor]) + point.offset
        return self.poles + float(point)

    def trace(self) -> float:
        """Trace of the generator: ``sum_m (w_m - b_m)``."""
        return reverse_sum(self.weights) - reverse_sum(self.poles)


def _sums(ctx: SecularContext, point):
    if isinstance(point, PolePoint):
        anchor, offset = point.anchor, float(point.offset)
    else:
        anchor, offset = kernels.NO_POLE, float(point)
    f, fp, pole = kernels.secular_sums(ctx.weights, ctx.poles, anchor, offset)
    if pole != kernels.NO_POLE:
        raise PoleError(pole + 1, ctx.nu(point))
    return f, fp


def secular_eval(ctx: SecularContext, nu) -> float:
    """``f(nu)``; ``nu`` is a float or a ``PolePoint``."""
    return _sums(ctx, nu)[0]


def secular_derivative(ctx: SecularContext, nu) -> float:
    """``f'(nu) = -sum_m w_m / (nu + b_m)**2`` (always negative)."""
    return _sums(ctx, nu)[1]


@dataclass(frozen=True)
class EigenvalueRecord:
    k: int
    nu: float
    point: PolePoint | None
    bracket: tuple[float, float]
    secular_residual: float
    fprime: float | None
    alt_residual: float | None
    newton_iterations: int = 0
    bisection_fallback: bool = False
    margins: tuple[float, float] | None = None

    @property
    def interior(self) -> bool:
        """Strictly inside the bracket, judged on exact pole offsets."""
        return self.margins is not None and self.margins[0] > 0.0 > self.margins[1]


@dataclass(frozen=True, eq=False)
class Spectrum:
    records: tuple[EigenvalueRecord, ...]
    trace_check: float
    context: SecularContext

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def nus(self) -> np.ndarray:
        return np.array([r.nu for r in self.records])

    def record(self, k: int) -> EigenvalueRecord:
        return self.records[k - 1]

    def denominators(self, k: int) -> np.ndarray:
        """``nu_k + b_m`` for all ``m`` (``b`` itself for ``k = 1``)."""
        rec = self.record(k)
        if rec.point is None:
            return self.context.poles.copy()
        return self.context.denominators(rec.point)

    def bracket_margins(self, k: int) -> tuple[float, float]:
        """``(nu_k + b_{k-1}, nu_k + b_k)``: positive then negative when interior."""
        d = self.denominators(k)
        return float(d[k - 2]), float(d[k - 1])

    def dominant(self) -> EigenvalueRecord:
        """Nonzero eigenvalue closest to zero (the slowest mode)."""
        if self.n < 2:
            raise DomainError("a one-level spectrum has no nonzero eigenvalue")
        return self.records[-1]


def alt_characterization_residual(ctx: SecularContext, rec: EigenvalueRecord) -> float:
    """Normalized ``|sum_m u_m / (nu_k + b_m)|`` with ``u`` the right numerators.

    Vanishes at every nonzero eigenvalue; undefined at ``nu_1 = 0``.
    """
    if rec.k < 2:
        raise DomainError("the alternative characterization does not hold at nu_1 = 0")
    num = ctx.right_num if ctx.right_num is not None else ctx.deflated_weights
    terms = num / ctx.denominators(rec.point if rec.point is not None else rec.nu)
    return abs(reverse_sum(terms)) / reverse_sum(np.abs(terms))


def _record_from_root(ctx, k, anchor, offset, iterations, fallback):
    point = PolePoint(int(anchor), float(offset))
    f, fp = _sums(ctx, point)
    dens = ctx.denominators(point)
    bracket = (-float(ctx.poles[k - 2]), -float(ctx.poles[k - 1]))
    rec = EigenvalueRecord(k, ctx.nu(point), point, bracket, abs(f - 1.0), fp, None,
                           iterations, fallback, (float(dens[k - 2]), float(dens[k - 1])))
    return replace(rec, alt_residual=alt_characterization_residual(ctx, rec))


def solve_eigenvalue(ctx: SecularContext, k: int, *, bisect_fraction=BISECT_FRACTION,
                     newton_max_iter=NEWTON_MAX_ITER) -> EigenvalueRecord:
    """The unique eigenvalue in ``(-b[k-1], -b[k])`` for ``2 <= k <= N``.

    The root is located by bisection down to ``bisect_fraction`` of the
    bracket, then by safeguarded Newton on the pole-cleared function.  The
    equation actually solved is ``sum_m (w_m/b_m)/(nu + b_m) = 0``, which
    equals ``(1 - f(nu))/nu`` because ``f(0) = 1``; unlike ``f - 1`` it
    pins the distance to the nearest pole to full relative precision.
    """
    if not 2 <= k <= ctx.n:
        raise DomainError(f"k={k} outside 2..{ctx.n}")
    anchor, offset, iterations, status = kernels.deflated_solve(
        ctx.deflated_weights, ctx.poles, k, float(bisect_fraction), int(newton_max_iter))
    if status == 2:
        raise ConditioningError(
            f"bracket for k={k} narrower than 64 ulp: b={ctx.poles[k - 2]!r}, {ctx.poles[k - 1]!r}")
    return _record_from_root(ctx, k, anchor, offset, iterations, status == 1)


def solve_spectrum(ctx: SecularContext, *, trace: float | None = None, workers: int = 1,
                   bisect_fraction=BISECT_FRACTION, newton_max_iter=NEWTON_MAX_ITER) -> Spectrum:
    """All ``N`` eigenvalues; ``nu_1 = 0`` is pinned, the rest solved independently.

    ``trace`` defaults to ``sum_m (w_m - b_m)``, the generator trace.
    """
    first = EigenvalueRecord(1, 0.0, None, (0.0, 0.0), abs(secular_eval(ctx, 0.0) - 1.0),
                             secular_derivative(ctx, 0.0), None)

    def one(k):
        try:
            return solve_eigenvalue(ctx, k, bisect_fraction=bisect_fraction,
                                    newton_max_iter=newton_max_iter)
        except SolverError as exc:
            exc.k = k
            raise

    ks = range(2, ctx.n + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rest = list(pool.map(one, ks))
    else:
        rest = [one(k) for k in ks]
    records = (first, *rest)
    if trace is None:
        trace = ctx.trace()
    total = reverse_sum([r.nu for r in records])
    return Spectrum(records, total - trace, ctx)


def spectrum_of(model: TruncatedModel, **kwargs) -> Spectrum:
    """Solve the spectrum of a truncated model against its matrix trace."""
    ctx = SecularContext.from_model(model)
    return solve_spectrum(ctx, trace=reverse_sum(np.diag(model.generator)), **kwargs)


def monotonicity_probe(ctx: SecularContext, k: int, rel: float = 1e-6) -> bool:
    """Sample ``f`` near both ends and at the middle of bracket ``k``.

    Checks ``f(lo + d) > f(mid) > f(hi - d)`` with ``d = rel * width`` and
    that ``f`` crosses 1 between the ends, using exact pole offsets.
    """
    width = float(ctx.poles[k - 2] - ctx.poles[k - 1])
    d = rel * width
    near_left = secular_eval(ctx, PolePoint(k - 2, d))
    mid = secular_eval(ctx, PolePoint(k - 1, -0.5 * width))
    near_right = secular_eval(ctx, PolePoint(k - 1, -d))
    return near_left > mid > near_right and near_left > 1.0


def pole_spacing_check(model: TruncatedModel, theta: float, gap_constant: float):
    """Pole-spacing lower bound with the explicit constant.

    Returns ``(passed, worst_ratio)`` where the ratio is
    ``(b_m - b_{m+1}) / (c_alpha * exp(-((alpha-1)/2 + theta) lam_m))`` and
    ``c_alpha = Z_{(alpha+1)/2} / (1 + 2/(c (alpha - 1)))``.
    """
    a = model.alpha
    c_alpha = model.z[(a + 1.0) / 2.0] / (1.0 + 2.0 / (gap_constant * (a - 1.0)))
    b = model.b
    lam = model.lambdas
    if model.n < 2:
        return True, math.inf
    spacing = b[:-1] - b[1:]
    bound = c_alpha * np.exp(-((a - 1.0) / 2.0 + theta) * lam[:-1])
    ratio = spacing / bound
    return bool(np.all(ratio >= 1.0)), float(ratio.min())


def root_gap_supremum(spectrum: Spectrum, lambdas: np.ndarray, alpha: float):
    """``max_k |nu_k + b_k| * exp((alpha+1) lam_k / 2)`` over ``k >= 2``.

    Returns ``(supremum, argmax_k)``.
    """
    best, arg = 0.0, None
    for k in range(2, spectrum.n + 1):
        gap = abs(spectrum.bracket_margins(k)[1])
        val = gap * math.exp((alpha + 1.0) / 2.0 * lambdas[k - 1])
        if val > best:
            best, arg = val, k
    return best, arg


def root_distance_check(spectrum: Spectrum, model: TruncatedModel, theta: float, gap_constant: float):
    """``|nu_k + b_m| >= c_alpha exp(-((alpha-1)/2 + theta) lam_m)`` for ``m != k``.

    Same ``c_alpha`` as :func:`pole_spacing_check`.  Returns ``(passed, worst_ratio)``.
    """
    a = model.alpha
    c_alpha = model.z[(a + 1.0) / 2.0] / (1.0 + 2.0 / (gap_constant * (a - 1.0)))
    bound = c_alpha * np.exp(-((a - 1.0) / 2.0 + theta) * model.lambdas)
    worst = math.inf
    for k in range(2, spectrum.n + 1):
        ratio = np.abs(spectrum.denominators(k)) / bound
        ratio[k - 1] = math.inf
        worst = min(worst, float(ratio.min()))
    return worst >= 1.0, worst
