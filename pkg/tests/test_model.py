import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mastergen.errors import DomainError
from mastergen.model import (BASIS_HYPOTHESES, LevelSpec, ProbabilityVector, TruncatedModel,
                             assemble_generator, detailed_balance_residual, gap_condition_check,
                             gibbs_vector, partition_sum, rate, reverse_sum, tail_bound,
                             trace_identity_residual, truncate)

from conftest import reference_spec
from oracles import generator_matrix


def test_partition_sum_geometric_limit():
    m = truncate(reference_spec(), 60)
    assert partition_sum(m, 1.0) == pytest.approx(1.0 / (math.e - 1.0), rel=1e-15)


def test_partition_sum_small_cases():
    assert partition_sum(TruncatedModel(np.array([0.0]), 2.0), 3.7) == 1.0
    m = truncate(reference_spec(), 2)
    assert partition_sum(m, 2.0) == pytest.approx(math.exp(-2) + math.exp(-4), rel=1e-15)
    assert partition_sum(m, 2.0) == pytest.approx(0.1536509, abs=5e-8)


@pytest.mark.parametrize("beta", [0.0, -1.0])
def test_partition_sum_rejects_nonpositive_beta(beta):
    with pytest.raises(DomainError):
        partition_sum(truncate(reference_spec(), 3), beta)


def test_tail_bound_values():
    assert tail_bound(reference_spec(), 10, 1.0).value == pytest.approx(math.exp(-11) / (1 - math.exp(-1)), rel=1e-14)
    assert tail_bound(reference_spec(), 10, 1.0).value == pytest.approx(2.64217e-5, rel=1e-5)
    assert tail_bound(reference_spec(), 64, 3.0).value <= 1e-80
    tb = tail_bound(LevelSpec.explicit([0.0, 1.0], 2.0), 2, 1.0)
    assert tb.value == 0.0 and tb.finite_model


def test_tail_bound_dominates_true_tail():
    spec = LevelSpec.affine(0.7, 2.5, 0.3, 1.0, offset=0.2)
    for n in (3, 10, 25):
        for beta in (0.5, 1.0, 2.0):
            true_tail = math.fsum(math.exp(-beta * spec.level(m)) for m in range(n + 1, n + 400))
            # the bound is the exact geometric tail, so equality holds up to rounding
            assert true_tail <= tail_bound(spec, n, beta).value * (1 + 1e-13)


def test_gibbs_two_level():
    g = gibbs_vector(truncate(reference_spec(), 2), 1.0).components
    assert g == pytest.approx([1 / (1 + math.exp(-1)), math.exp(-1) / (1 + math.exp(-1))], rel=1e-15)
    assert g == pytest.approx([0.731059, 0.268941], abs=5e-7)


def test_gibbs_geometric_and_single():
    g = gibbs_vector(truncate(reference_spec(), 60), 1.0).components
    expected = (1 - math.exp(-1)) * np.exp(-np.arange(60.0))
    assert np.allclose(g[:20], expected[:20], rtol=1e-14, atol=0)
    assert list(gibbs_vector(TruncatedModel(np.array([3.0]), 2.0), 1.0).components) == [1.0]


@pytest.mark.parametrize("beta", [0.3, 1.0, 2.5])
def test_gibbs_positive_decreasing(beta):
    g = gibbs_vector(truncate(reference_spec(), 40), beta).components
    assert np.all(g > 0) and np.all(np.diff(g) < 0)
    assert abs(math.fsum(g) - 1.0) <= 4e-16


def test_rate_values():
    m = truncate(reference_spec(), 3)
    assert rate(m, 1, 2) == pytest.approx(math.exp(-2.5), rel=1e-15)
    assert rate(m, 2, 1) == pytest.approx(math.exp(-3.5), rel=1e-15)
    assert rate(m, 1, 2) == pytest.approx(0.0820850, abs=5e-8)
    assert rate(m, 2, 1) == pytest.approx(0.0301974, abs=5e-8)
    flat = TruncatedModel(np.zeros(3), 2.0)
    assert np.all(flat.rates == 1.0)


@pytest.mark.parametrize("idx", [(0, 1), (1, 4), (4, 4), (-1, 2)])
def test_rate_index_errors(idx):
    with pytest.raises(IndexError):
        rate(truncate(reference_spec(), 3), *idx)


def test_generator_two_level():
    a = assemble_generator(truncate(reference_spec(), 2))
    r12, r21 = math.exp(-2.5), math.exp(-3.5)
    assert np.allclose(a, [[-r21, r12], [r21, -r12]], rtol=1e-15, atol=0)
    assert np.allclose(a, [[-0.0301974, 0.0820850], [0.0301974, -0.0820850]], atol=5e-8)
    flat = assemble_generator(TruncatedModel(np.zeros(2), 2.0))
    assert np.array_equal(flat, [[-1.0, 1.0], [1.0, -1.0]])


def test_generator_matches_independent_build():
    m = truncate(reference_spec(), 30)
    assert np.allclose(m.generator, generator_matrix(m.lambdas, 2.0), rtol=1e-14, atol=1e-300)


@pytest.mark.parametrize("n", [2, 7, 64])
def test_column_sums_vanish(n):
    a = truncate(reference_spec(), n).generator
    for col in range(n):
        # exact sum of the stored column: at most one rounding of the diagonal
        assert abs(math.fsum(a[:, col])) <= math.ulp(a[col, col])


@pytest.mark.parametrize("n", [2, 7, 64])
def test_column_sums_exactly_zero_in_construction_order(n):
    a = truncate(reference_spec(), n).generator
    for col in range(n):
        assert reverse_sum(np.delete(a[:, col], col)) + a[col, col] == 0.0


@pytest.mark.parametrize("n", [2, 16, 64])
def test_b_column_sums_and_order(n):
    m = truncate(reference_spec(), n)
    for col in range(n):
        assert m.b[col] == pytest.approx(math.fsum(m.rates[:, col]), rel=2e-16)
    assert np.all(np.diff(m.b) < 0)
    z = m.z[1.5]
    assert np.allclose(m.b, z * np.exp(-0.5 * m.lambdas), rtol=1e-15, atol=0)


def test_rank_one_structure():
    r = truncate(reference_spec(), 20).rates
    rng = np.random.default_rng(3)
    for _ in range(200):
        m, n, i, j = rng.integers(0, 20, size=4)
        lhs = r[m, n] * r[j, i]
        rhs = r[m, i] * r[j, n]
        assert abs(lhs - rhs) <= 1e-14 * rhs
    assert np.all(r > 0)


def test_trace_identity():
    m2 = truncate(reference_spec(), 2)
    tr = float(np.trace(m2.generator))
    assert tr == pytest.approx(-(math.exp(-2.5) + math.exp(-3.5)), rel=1e-15)
    assert tr == pytest.approx(-0.1122824, abs=5e-8)
    for n in (2, 16, 64):
        m = truncate(reference_spec(), n)
        assert abs(trace_identity_residual(m)) <= 1e-12 * abs(np.trace(m.generator))
    assert trace_identity_residual(TruncatedModel(np.array([0.0]), 2.0)) == 0.0


def test_trace_infinite_limit():
    m = truncate(reference_spec(), 80)
    closed = 1 / (math.e**2 - 1) - 1 / (math.e**0.5 - 1) / (math.e**1.5 - 1)
    assert float(np.trace(m.generator)) == pytest.approx(closed, rel=1e-14)
    assert closed == pytest.approx(-0.2862255, abs=5e-8)


def test_detailed_balance():
    for n in (2, 16, 64):
        assert detailed_balance_residual(truncate(reference_spec(), n)) <= 1e-15
    m = truncate(reference_spec(), 5)
    g = m.gibbs().components
    common = math.exp(-4.5) / m.z[1.0]
    assert m.rates[0, 1] * g[1] == pytest.approx(common, rel=1e-15)
    assert m.rates[1, 0] * g[0] == pytest.approx(common, rel=1e-15)
    flat = TruncatedModel(np.zeros(4), 2.0)
    assert np.allclose(flat.gibbs().components, 0.25) and detailed_balance_residual(flat) == 0.0


def test_gap_condition_reference_passes():
    rep = gap_condition_check(reference_spec(), 64)
    assert rep.passed and rep.first_violation is None and rep.within_hypotheses and rep.warning is None


def test_gap_condition_violation():
    spec = LevelSpec.explicit([0.0, 0.5, 0.6], 2.0, theta=0.1, gap_constant=1.0)
    rep = gap_condition_check(spec, 3)
    # m=2: 0.1 < exp(-0.05); m=1 fails too: 0.5 < exp(0) = 1
    assert 2 in rep.violations
    assert rep.violations == (1, 2) and rep.first_violation == 1


def test_gap_condition_flags_hypotheses():
    rep = gap_condition_check(reference_spec(theta=0.6), 10)
    assert rep.passed and not rep.within_hypotheses and rep.warning == BASIS_HYPOTHESES
    assert not LevelSpec.affine(1.0, 3.5, 0.1).within_basis_hypotheses()
    with pytest.raises(DomainError):
        gap_condition_check(reference_spec(), 1)


@pytest.mark.parametrize("kwargs", [
    dict(kind="affine", alpha=1.0, theta=0.1, gap_constant=1.0, omega=1.0),
    dict(kind="affine", alpha=2.0, theta=-0.1, gap_constant=1.0, omega=1.0),
    dict(kind="affine", alpha=2.0, theta=0.1, gap_constant=0.0, omega=1.0),
    dict(kind="affine", alpha=2.0, theta=0.1, gap_constant=1.0, omega=0.0),
    dict(kind="explicit", alpha=2.0, theta=0.1, gap_constant=1.0, values=(0.0, 0.0)),
    dict(kind="explicit", alpha=2.0, theta=0.1, gap_constant=1.0, values=(1.0, 0.5)),
    dict(kind="other", alpha=2.0, theta=0.1, gap_constant=1.0),
])
def test_levelspec_validation(kwargs):
    with pytest.raises(DomainError):
        LevelSpec(**kwargs)


def test_alpha_message():
    with pytest.raises(DomainError, match="alpha must exceed 1"):
        LevelSpec.affine(1.0, 0.9)


def test_explicit_truncation_limit():
    spec = LevelSpec.explicit([0.0, 1.0, 3.0], 2.0)
    assert truncate(spec, 3).n == 3
    with pytest.raises(DomainError):
        truncate(spec, 4)
    with pytest.raises(DomainError):
        truncate(spec, 0)


def test_probability_vector_modes():
    p = ProbabilityVector.from_values([0.25, 0.75])
    assert p.total == 1.0 and len(p) == 2
    with pytest.raises(DomainError):
        ProbabilityVector.from_values([0.5, 0.6])
    with pytest.raises(DomainError):
        ProbabilityVector.from_values([1.1, -0.1])
    q = ProbabilityVector.from_values([2.0, 6.0], strict=False)
    assert list(q.components) == [0.25, 0.75]
    r = ProbabilityVector.from_values([1.5, -0.5], strict=False)
    assert r.components.min() < 0
    with pytest.raises(DomainError):
        ProbabilityVector.from_values([-1.0, 0.5], strict=False)
    with pytest.raises(ValueError):
        p.components[0] = 1.0


levels_strategy = st.lists(st.floats(0.05, 2.0), min_size=1, max_size=24).map(
    lambda gaps: np.cumsum(gaps) - 0.3)


@settings(max_examples=60, deadline=None)
@given(lam=levels_strategy, alpha=st.floats(1.05, 4.0))
def test_properties_random_models(lam, alpha):
    m = TruncatedModel(lam, alpha)
    tr = float(np.trace(m.generator))
    assert abs(trace_identity_residual(m)) <= 1e-12 * max(abs(tr), 1e-300) or tr == 0.0
    # each flux carries the rounding of its exponent, which grows with |lambda|
    eps = np.finfo(float).eps
    assert detailed_balance_residual(m) <= 16 * eps * (1.0 + (alpha + 1.0) * float(np.abs(lam).max()))
    assert np.all(np.diff(m.b) < 0)
    for col in range(m.n):
        assert abs(math.fsum(m.generator[:, col])) <= math.ulp(m.generator[col, col])
    g = m.gibbs().components
    assert np.all(g > 0) and np.all(np.diff(g) < 0)
