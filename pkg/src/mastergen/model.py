"""Level sequences, partition sums and the truncated rate generator.

The rates couple level ``n`` to level ``m`` through

    r[m, n] = exp(-(alpha + 1) * lam[m] / 2 - (alpha - 1) * lam[n] / 2)

which is detailed-balanced with respect to the Gibbs vector at unit inverse
temperature.  A truncation keeps the first ``n`` levels and recomputes every
column sum from those levels only, so all finite identities hold exactly in
the truncated system; distance to the infinite model is tracked separately
by a geometric tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError
from .kernels import neumaier_sum

BASIS_HYPOTHESES = "outside the Riesz-basis hypotheses: need 1 < alpha < 3 and 0 < theta < (3 - alpha)/2"

STRICT_SUM_TOL = 1e-9
STRICT_NEG_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def reverse_sum(terms) -> float:
    """Compensated sum accumulated from the last term to the first."""
    return neumaier_sum(np.asarray(terms, dtype=float)[::-1])


@dataclass(frozen=True)
class LevelSpec:
    """Definition of the level sequence and the rate parameters."""

    kind: str
    alpha: float
    theta: float
    gap_constant: float
    omega: float | None = None
    offset: float = 0.0
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("affine", "explicit"):
            raise DomainError(f"unknown level kind {self.kind!r}")
        if not self.alpha > 1.0:
            raise DomainError("alpha must exceed 1")
        if not self.theta >= 0.0:
            raise DomainError("theta must be nonnegative")
        if not self.gap_constant > 0.0:
            raise DomainError("gap_constant must be positive")
        if self.kind == "affine":
            if self.omega is None or not self.omega > 0.0:
                raise DomainError("affine levels need omega > 0")
        else:
            if not self.values:
                raise DomainError("explicit levels need at least one value")
            vals = tuple(float(v) for v in self.values)
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise DomainError("explicit levels must be strictly increasing")
            object.__setattr__(self, "values", vals)

    @classmethod
    def affine(cls, omega, alpha, theta=0.0, gap_constant=1.0, offset=0.0):
        return cls("affine", alpha, theta, gap_constant, omega=omega, offset=offset)

    @classmethod
    def explicit(cls, values, alpha, theta=0.0, gap_constant=1.0):
        return cls("explicit", alpha, theta, gap_constant, values=tuple(values))

    @property
    def max_levels(self) -> int | None:
        return None if self.kind == "affine" else len(self.values)

    def level(self, m: int) -> float:
        """lambda_m for a 1-based index ``m``."""
        if m < 1:
            raise IndexError(m)
        if self.kind == "affine":
            return self.offset + self.omega * m
        return self.values[m - 1]

    def levels(self, n: int) -> np.ndarray:
        if self.max_levels is not None and n > self.max_levels:
            raise DomainError(f"only {self.max_levels} explicit levels, asked for {n}")
        return np.array([self.level(m) for m in range(1, n + 1)])

    def within_basis_hypotheses(self) -> bool:
        return 1.0 < self.alpha < 3.0 and 0.0 < self.theta < (3.0 - self.alpha) / 2.0


class TailBound(NamedTuple):
    value: float
    finite_model: bool


def tail_bound(spec: LevelSpec, n: int, beta: float) -> TailBound:
    """Upper bound on the neglected partition-sum tail beyond level ``n``.

    Affine levels give the geometric bound
    ``exp(-beta*lam_{n+1}) / (1 - exp(-beta*omega))``; an explicit sequence
    has no tail, reported as exactly 0 with ``finite_model`` set.
    """
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    if spec.kind == "explicit":
        return TailBound(0.0, True)
    head = math.exp(-beta * spec.level(n + 1))
    return TailBound(head / -math.expm1(-beta * spec.omega), False)


@dataclass(frozen=True)
class ProbabilityVector:
    components: np.ndarray
    total: float

    @classmethod
    def from_values(cls, values, strict: bool = True) -> "ProbabilityVector":
        """Build from raw values.

        Strict mode rejects a vector whose sum is off by more than 1e-9 or
        that has a component below -1e-12.  Otherwise the values are
        rescaled to unit sum; negative entries are kept so downstream
        checks can report them.
        """
        x = np.array(values, dtype=float).ravel()
        if x.size == 0:
            raise DomainError("empty probability vector")
        total = neumaier_sum(x)
        if strict:
            if abs(total - 1.0) > STRICT_SUM_TOL:
                raise DomainError(f"components sum to {total!r}, not 1")
            if x.min() < -STRICT_NEG_TOL:
                raise DomainError(f"negative component {x.min()!r}")
        else:
            if not total > 0.0:
                raise DomainError("cannot normalize a vector with nonpositive sum")
            x = x / total
            total = neumaier_sum(x)
        return cls(_frozen(x), total)

    def __len__(self):
        return self.components.size

    def __array__(self, dtype=None, copy=None):
        return np.array(self.components, dtype=dtype)


@dataclass(frozen=True, eq=False)
class TruncatedModel:
    """Self-consistent ``n``-level truncation of the rate model."""

    lambdas: np.ndarray
    alpha: float
    spec: LevelSpec | None = None
    rates: np.ndarray = field(init=False, repr=False)
    b: np.ndarray = field(init=False, repr=False)
    generator: np.ndarray = field(init=False, repr=False)
    gain_profile: np.ndarray = field(init=False, repr=False)
    loss_profile: np.ndarray = field(init=False, repr=False)
    z: dict = field(init=False, repr=False)
    tail_bound: float = field(init=False)

    def __post_init__(self):
        lam = _frozen(self.lambdas)
        if lam.ndim != 1 or lam.size < 1:
            raise DomainError("need at least one level")
        if not self.alpha > 1.0:
            raise DomainError("alpha must exceed 1")
        a = self.alpha
        object.__setattr__(self, "lambdas", lam)
        gain = _frozen(np.exp(-(a + 1.0) * lam / 2.0))
        loss = _frozen(np.exp(-(a - 1.0) * lam / 2.0))
        rates = np.exp(-(a + 1.0) * lam[:, None] / 2.0 - (a - 1.0) * lam[None, :] / 2.0)
        n = lam.size
        b = np.array([reverse_sum(rates[:, m]) for m in range(n)])
        gen = rates.copy()
        for m in range(n):
            gen[m, m] = -reverse_sum(np.delete(rates[:, m], m))
        object.__setattr__(self, "rates", _frozen(rates))
        object.__setattr__(self, "b", _frozen(b))
        object.__setattr__(self, "generator", _frozen(gen))
        object.__setattr__(self, "gain_profile", gain)
        object.__setattr__(self, "loss_profile", loss)
        betas = {1.0, a, (a - 1.0) / 2.0, (a + 1.0) / 2.0}
        object.__setattr__(self, "z", {beta: self.partition_sum(beta) for beta in sorted(betas)})
        if self.spec is None:
            tb = 0.0
        else:
            tb = tail_bound(self.spec, n, min(betas)).value
        object.__setattr__(self, "tail_bound", tb)

    @property
    def n(self) -> int:
        return self.lambdas.size

    def partition_sum(self, beta: float) -> float:
        return partition_sum(self, beta)

    def gibbs(self, beta: float = 1.0) -> "ProbabilityVector":
        return gibbs_vector(self, beta)


def truncate(spec: LevelSpec, n: int) -> TruncatedModel:
    """Keep the first ``n`` levels of ``spec``."""
    if n < 1:
        raise DomainError("truncation dimension must be positive")
    return TruncatedModel(spec.levels(n), spec.alpha, spec)


def partition_sum(model: TruncatedModel, beta: float) -> float:
    """Truncated partition sum ``sum_m exp(-beta*lam_m)``, smallest terms first."""
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    return reverse_sum(np.exp(-beta * model.lambdas))


def gibbs_vector(model: TruncatedModel, beta: float = 1.0) -> ProbabilityVector:
    if not beta > 0.0:
        raise DomainError("beta must be positive")
    # shifting by the lowest level changes nothing but the underflow point
    weights = np.exp(-beta * (model.lambdas - model.lambdas.min()))
    p = weights / reverse_sum(weights)
    return ProbabilityVector(_frozen(p), neumaier_sum(p))


def rate(model: TruncatedModel, m: int, n: int) -> float:
    """Transition rate from level ``n`` to level ``m`` (1-based indices)."""
    if not (1 <= m <= model.n and 1 <= n <= model.n):
        raise IndexError(f"rate index ({m}, {n}) outside 1..{model.n}")
    a = model.alpha
    return math.exp(-(a + 1.0) * model.lambdas[m - 1] / 2.0 - (a - 1.0) * model.lambdas[n - 1] / 2.0)


def assemble_generator(model: TruncatedModel) -> np.ndarray:
    """The generator matrix; columns sum to zero up to rounding of the diagonal."""
    return model.generator


def trace_identity_residual(model: TruncatedModel) -> float:
    """Matrix trace minus ``Z_alpha - Z_{(alpha-1)/2} Z_{(alpha+1)/2}``."""
    a = model.alpha
    tr = reverse_sum(np.diag(model.generator))
    closed = model.z[a] - model.z[(a - 1.0) / 2.0] * model.z[(a + 1.0) / 2.0]
    return tr - closed


def detailed_balance_residual(model: TruncatedModel) -> float:
    """Largest relative mismatch of pairwise equilibrium fluxes."""
    if model.n < 2:
        return 0.0
    p = model.gibbs(1.0).components
    forward = model.rates * p[None, :]
    backward = model.rates.T * p[:, None]
    iu = np.triu_indices(model.n, k=1)
    return float(np.max(np.abs(forward[iu] - backward[iu]) / forward[iu]))


@dataclass(frozen=True)
class GapReport:
    passed: bool
    first_violation: int | None
    violations: tuple[int, ...]
    within_hypotheses: bool
    warning: str | None


def gap_condition_check(spec: LevelSpec, upto: int) -> GapReport:
    """Check ``lam_{m+1} - lam_m >= c * exp(-theta * lam_m)`` for ``m < upto``.

    Violations are report content, not errors.  Indices are 1-based.
    """
    if upto < 2:
        raise DomainError("upto must be at least 2")
    lam = spec.levels(upto)
    bad = tuple(
        m + 1
        for m in range(upto - 1)
        if lam[m + 1] - lam[m] < spec.gap_constant * math.exp(-spec.theta * lam[m])
    )
    inside = spec.within_basis_hypotheses()
    return GapReport(
        passed=not bad,
        first_violation=bad[0] if bad else None,
        violations=bad,
        within_hypotheses=inside,
        warning=None if inside else BASIS_HYPOTHESES,
    )
