import math
import warnings

import numpy as np
import pytest
import scipy.linalg

from mastergen.errors import DomainError
from mastergen.finite import (RHO_FACTOR, FiniteModelC, PerronResult, SpectralGapWarning,
                              dominance_margin, finite_decay_check, finite_spectrum, perron_radius,
                              shifted_column_defect)

from conftest import basis_state


def two_level():
    return FiniteModelC(np.array([1.0, 0.0]))


def test_two_level_rates_and_rho():
    model = two_level()
    # rates exp(-(lam_m - lam_n)/2): uphill to level 1 is slow, downhill fast
    assert model.rates[0, 1] == pytest.approx(math.exp(-0.5), rel=1e-15)
    assert model.rates[1, 0] == pytest.approx(math.exp(0.5), rel=1e-15)
    assert model.rho == pytest.approx(RHO_FACTOR * math.exp(0.5), rel=1e-15)
    assert model.n == 2
    assert model.z_half == pytest.approx(math.exp(-0.5) + 1.0, rel=1e-15)


def test_two_level_eigenvalue(backend):
    spectrum = finite_spectrum(two_level())
    assert spectrum.records[0].nu == 0.0
    nu = spectrum.records[1].nu
    assert nu == pytest.approx(-(math.exp(-0.5) + math.exp(0.5)), rel=1e-15)
    assert abs(nu - (-2.255252)) <= 1e-6
    assert abs(spectrum.trace_check) <= 1e-15


def test_dense_spectrum_agrees():
    model = FiniteModelC(np.array([3.0, 1.7, 1.0, 0.2, -0.5]))
    spectrum = finite_spectrum(model)
    dense = np.sort(np.linalg.eigvals(model.generator).real)
    assert np.max(np.abs(np.sort(spectrum.nus) - dense)) <= 1e-13 * np.abs(model.generator).max()
    assert all(r.interior for r in spectrum.records[1:])


def test_gibbs_and_perron_two_level(backend):
    model = two_level()
    res = perron_radius(model, tol=1e-12)
    assert isinstance(res, PerronResult) and res.converged
    radius, vector = res
    assert abs(radius - model.rho) <= 1e-10
    assert np.max(np.abs(vector - [0.268941, 0.731059])) <= 1e-6
    g = np.array(model.gibbs().components)
    assert np.linalg.norm(vector - g) <= 1e-12


def test_perron_tolerance_scaling(backend):
    model = FiniteModelC(np.linspace(4.0, 0.0, 9))
    for tol in (1e-6, 1e-9, 1e-12):
        res = perron_radius(model, tol=tol)
        assert res.converged
        assert abs(res.radius - model.rho) <= 10 * tol


def test_perron_matches_dense_eigenpair():
    model = FiniteModelC(np.array([2.0, 1.5, 0.25, 0.0]))
    vals, vecs = scipy.linalg.eig(model.shifted)
    j = int(np.argmax(vals.real))
    v = vecs[:, j].real
    v /= v.sum()
    res = perron_radius(model)
    assert vals[j].real == pytest.approx(model.rho, rel=1e-14)
    assert np.allclose(res.vector, v, rtol=0, atol=1e-9)


def test_perron_nonconvergence_warns():
    model = FiniteModelC(np.linspace(4.0, 0.0, 9))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = perron_radius(model, tol=1e-15, max_iter=3)
    assert not res.converged and res.iterations == 3
    assert any(issubclass(w.category, SpectralGapWarning) for w in caught)


def test_perron_validation():
    with pytest.raises(DomainError):
        perron_radius(two_level(), tol=0.0)


def test_dominance_and_shifted_columns():
    for lam in ([1.0, 0.0], [3.0, 1.7, 1.0, 0.2, -0.5]):
        model = FiniteModelC(np.array(lam))
        assert dominance_margin(model, finite_spectrum(model)) > 0.0
        assert shifted_column_defect(model) <= 8 * math.ulp(model.rho)
    model = two_level()
    assert dominance_margin(model, finite_spectrum(model)) == pytest.approx(1.4543709286625273, rel=1e-13)


def test_explicit_rho():
    model = FiniteModelC(np.array([1.0, 0.0]), rho=5.0)
    assert model.rho == 5.0
    assert np.allclose(model.shifted, model.generator + 5.0 * np.eye(2))
    with pytest.raises(DomainError):
        FiniteModelC(np.array([1.0, 0.0]), rho=1.0)


@pytest.mark.parametrize("lam", [[0.0], [0.0, 1.0], [1.0, 1.0], [[1.0, 0.0]]])
def test_model_validation(lam):
    with pytest.raises(DomainError):
        FiniteModelC(np.array(lam))


def test_decay_check_two_level(backend):
    model = two_level()
    rep = finite_decay_check(model, basis_state(2), np.linspace(0.0, 20.0, 41))
    assert rep.passed
    assert rep.worst_ratio <= 1.0 + 1e-12
    assert rep.gamma_sum == pytest.approx(1.0, abs=1e-15)
    assert abs(rep.gamma_fit - 1.0) <= 1e-8
    assert rep.rate == pytest.approx(math.exp(-0.5) + math.exp(0.5), rel=1e-15)
    assert rep.constant == pytest.approx(0.7310585786300048, rel=1e-14)


def test_decay_check_scaled_mass():
    model = FiniteModelC(np.array([2.0, 1.0, 0.0]))
    p0 = np.array([0.0, 0.0, 3.0])
    rep = finite_decay_check(model, p0, np.linspace(0.0, 30.0, 31))
    assert rep.passed
    assert rep.gamma_sum == pytest.approx(3.0, rel=1e-15)
    assert rep.gamma_fit == pytest.approx(3.0, rel=1e-8)


def test_decay_matches_expm():
    model = FiniteModelC(np.array([2.0, 1.0, 0.0]))
    p0 = np.array([1.0, 0.0, 0.0])
    from mastergen.basis import build_system
    from mastergen.evolution import spectral_propagate
    spectrum = finite_spectrum(model)
    system = build_system(model, spectrum, gram=False)
    traj = spectral_propagate(system, spectrum, p0, [0.0, 2.0])
    expected = scipy.linalg.expm(2.0 * model.generator) @ p0
    assert np.linalg.norm(traj.final - expected) <= 1e-13
