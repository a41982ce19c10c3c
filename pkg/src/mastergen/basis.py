"""Closed-form right/left eigenvectors and their biorthogonal normalization.

Right vectors keep the raw closed form ``u_m / (nu_k + b_m)``; all scaling
is pushed into the left vectors ``v_m / ((nu_k + b_m) d_k)`` with
``d_k = -f'(nu_k)``, which makes ``(p_k, q_k) = 1``.  For ``k = 1`` the right
vector is the Gibbs vector and the left vector is all ones.

The model argument only needs ``generator``, ``b``, ``gain_profile``,
``loss_profile`` and ``gibbs()``, so the finite decreasing-level model reuses
everything here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DegenerateBasisError, DomainError
from .model import _frozen, reverse_sum
from .secular import Spectrum, secular_derivative

EIGEN_RESIDUAL_TOL = 1e-9
EIGEN_RESIDUAL_HARD = 1e-6


def inner_products(x, y) -> np.ndarray:
    """Matrix of ``(x_i, y_j)``; einsum's own loop keeps it reproducible."""
    return np.einsum("im,jm->ij", np.atleast_2d(x), np.atleast_2d(y))


def _residual(matrix, vec, nu):
    r = matrix @ vec - nu * vec
    return float(np.linalg.norm(r) / np.linalg.norm(vec))


@dataclass(frozen=True)
class RightEigenvector:
    k: int
    components: np.ndarray
    residual: float


@dataclass(frozen=True)
class LeftEigenvector:
    k: int
    components: np.ndarray
    unscaled: np.ndarray
    scale: float
    residual: float


def _check(kind, k, res):
    if res > EIGEN_RESIDUAL_HARD:
        raise ConsistencyError(f"{kind} eigenvector k={k}: residual {res:.3e} exceeds {EIGEN_RESIDUAL_HARD}")


def right_eigenvector(model, spectrum: Spectrum, k: int) -> RightEigenvector:
    if not 1 <= k <= spectrum.n:
        raise DomainError(f"k={k} outside 1..{spectrum.n}")
    if k == 1:
        vec = np.array(model.gibbs().components)
    else:
        vec = model.gain_profile / spectrum.denominators(k)
    res = _residual(model.generator, vec, spectrum.record(k).nu)
    _check("right", k, res)
    return RightEigenvector(k, _frozen(vec), res)


def left_eigenvector(model, spectrum: Spectrum, k: int) -> LeftEigenvector:
    if not 1 <= k <= spectrum.n:
        raise DomainError(f"k={k} outside 1..{spectrum.n}")
    if k == 1:
        raw = np.ones(spectrum.n)
        scale = 1.0
    else:
        raw = model.loss_profile / spectrum.denominators(k)
        scale = -secular_derivative(spectrum.context, spectrum.record(k).point)
    vec = raw / scale
    res = _residual(model.generator.T, vec, spectrum.record(k).nu)
    _check("left", k, res)
    return LeftEigenvector(k, _frozen(vec), _frozen(raw), scale, res)


@dataclass(frozen=True, eq=False)
class GramReport:
    """Off-diagonal squared Gram sums of the normalized shifted vectors.

    ``values[s - 2]`` is the sum over ``j != k`` with ``j, k >= s``.
    """

    values: np.ndarray
    first_below_one: int | None
    nonincreasing: bool
    gibbs_scaling: str

    def at(self, n_star: int) -> float:
        return float(self.values[n_star - 2])


@dataclass(frozen=True, eq=False)
class BiorthogonalSystem:
    rights: np.ndarray
    lefts: np.ndarray
    right_residuals: np.ndarray
    left_residuals: np.ndarray
    scales: np.ndarray
    factorization_residual: float
    gram_report: GramReport | None = None

    @property
    def n(self) -> int:
        return self.rights.shape[0]

    def coefficients(self, p) -> np.ndarray:
        """Expansion coefficients ``(p, q_k)`` for every ``k``."""
        return inner_products(self.lefts, np.asarray(p, dtype=float))[:, 0]

    def expand(self, coefficients) -> np.ndarray:
        return np.einsum("k,km->m", np.asarray(coefficients, dtype=float), self.rights)


def build_system(model, spectrum: Spectrum, *, gram: bool = True) -> BiorthogonalSystem:
    rights = [right_eigenvector(model, spectrum, k) for k in range(1, spectrum.n + 1)]
    lefts = [left_eigenvector(model, spectrum, k) for k in range(1, spectrum.n + 1)]
    report = gram_diagnostic(model, spectrum) if gram and spectrum.n >= 2 else None
    return BiorthogonalSystem(
        rights=_frozen([r.components for r in rights]),
        lefts=_frozen([q.components for q in lefts]),
        right_residuals=_frozen([r.residual for r in rights]),
        left_residuals=_frozen([q.residual for q in lefts]),
        scales=_frozen([q.scale for q in lefts]),
        factorization_residual=factorization_residual(model),
        gram_report=report,
    )


def biorthogonality_defect(system: BiorthogonalSystem, upto: int | None = None) -> float:
    """``max |(p_j, q_k) - delta_jk|`` over ``j, k <= upto``."""
    kk = system.n if upto is None else min(upto, system.n)
    g = inner_products(system.rights[:kk], system.lefts[:kk])
    return float(np.max(np.abs(g - np.eye(kk))))


def pairing_defect(model, spectrum: Spectrum) -> float:
    """Largest relative gap between ``(p_k, q_k unscaled)`` and ``-f'(nu_k)``."""
    worst = 0.0
    for k in range(2, spectrum.n + 1):
        dens = spectrum.denominators(k)
        pairing = reverse_sum((model.gain_profile / dens) * (model.loss_profile / dens))
        d = -secular_derivative(spectrum.context, spectrum.record(k).point)
        worst = max(worst, abs(pairing - d) / d)
    return worst


def projection_crosscheck(system: BiorthogonalSystem, j: int) -> float:
    """Rebuild ``q_j`` by projecting ``p_j`` off the span of the other ``p_k``.

    Returns ``||t_j - q_j|| / ||q_j||``.
    """
    if not 1 <= j <= system.n:
        raise DomainError(f"j={j} outside 1..{system.n}")
    p = system.rights[j - 1]
    others = np.delete(system.rights, j - 1, axis=0)
    if others.shape[0] == 0:
        qp = p.copy()
    else:
        basis, _ = np.linalg.qr(others.T)
        qp = p - basis @ (basis.T @ p)
    norm = np.linalg.norm(qp)
    if norm < 1e-12 * np.linalg.norm(p):
        raise DegenerateBasisError(f"projection of p_{j} off the other eigenvectors vanishes")
    t = qp / norm**2
    q = system.lefts[j - 1]
    return float(np.linalg.norm(t - q) / np.linalg.norm(q))


def factorization_residual(model) -> float:
    """Max-entry defect of ``A = H (I + S)`` with ``H = -diag(b)``, ``S = -r/b``."""
    b = model.b
    rates = getattr(model, "rates", None)
    if rates is None:
        rates = rates_with_diagonal(model)
    s = -rates / b[:, None]
    product = -b[:, None] * (np.eye(b.size) + s)
    return float(np.max(np.abs(model.generator - product)))


def rates_with_diagonal(model) -> np.ndarray:
    return np.outer(model.gain_profile, model.loss_profile)


def gram_diagnostic(model, spectrum: Spectrum, gibbs_scaling: str = "unit") -> GramReport:
    """Off-diagonal Gram sums of ``r_k = p_k - p_Gibbs`` (``k >= 2``), normalized.

    ``gibbs_scaling="unit"`` subtracts the unit-norm Gibbs vector;
    ``"kernel"`` subtracts the closed form evaluated at ``nu = 0``
    (``u_m / b_m``), for which ``r_k`` has the closed form
    ``-nu_k exp(-lam_m) / (Z (nu_k + b_m))``.
    """
    n = spectrum.n
    if n < 2:
        raise DomainError("need at least two levels")
    if gibbs_scaling == "unit":
        g = np.array(model.gibbs().components)
        g = g / np.linalg.norm(g)
    elif gibbs_scaling == "kernel":
        g = model.gain_profile / model.b
    else:
        raise DomainError(f"unknown gibbs_scaling {gibbs_scaling!r}")
    shifted = np.array([model.gain_profile / spectrum.denominators(k) - g for k in range(2, n + 1)])
    shifted /= np.linalg.norm(shifted, axis=1)[:, None]
    sq = inner_products(shifted, shifted) ** 2
    np.fill_diagonal(sq, 0.0)
    size = n - 1
    values = np.zeros(size)
    # G(s) = G(s+1) + 2 * sum_{t > s} sq[s, t]
    acc = 0.0
    for i in range(size - 1, -1, -1):
        acc += 2.0 * reverse_sum(sq[i, i + 1:]) if i + 1 < size else 0.0
        values[i] = acc
    below = np.nonzero(values < 1.0)[0]
    first = int(below[0]) + 2 if below.size else None
    return GramReport(_frozen(values), first, bool(np.all(np.diff(values) <= 0.0)), gibbs_scaling)


def reconstruction_defect(system: BiorthogonalSystem, vectors) -> float:
    """Largest ``||p - sum_k (p, q_k) p_k|| / ||p||`` over the given vectors."""
    worst = 0.0
    for p in np.atleast_2d(vectors):
        back = system.expand(system.coefficients(p))
        worst = max(worst, float(np.linalg.norm(p - back) / np.linalg.norm(p)))
    return worst


def sign_pattern_ok(system: BiorthogonalSystem) -> bool:
    """``p_k`` (k >= 2) is positive before index ``k`` and negative from it on."""
    for k in range(2, system.n + 1):
        p = system.rights[k - 1]
        if not (np.all(p[: k - 1] > 0.0) and np.all(p[k - 1:] < 0.0)):
            return False
    return True


def kernel_residual(model) -> float:
    """``||A p_Gibbs|| / ||p_Gibbs||``."""
    g = np.array(model.gibbs().components)
    return float(np.linalg.norm(model.generator @ g) / np.linalg.norm(g))
