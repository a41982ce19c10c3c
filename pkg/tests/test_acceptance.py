"""Acceptance criteria at their stated tolerances.

Each test records one PASS/FAIL line; the lines are printed in the
terminal summary (and immediately with ``-s``).  Reference configuration:
lam_m = m, alpha = 2, theta = 0.4, c = 1, N = 64 unless noted.
"""

import math
import subprocess
import sys

import numpy as np
import pytest

from mastergen.basis import biorthogonality_defect, reconstruction_defect
from mastergen.evolution import (decay_fit, decay_grid, ode_propagate, positivity_conservation_check,
                                 single_mode_start, spectral_propagate, stationarity_defect)
from mastergen.finite import FiniteModelC, finite_decay_check, finite_spectrum, perron_radius
from mastergen.model import detailed_balance_residual, reverse_sum
from mastergen.secular import pole_spacing_check, root_gap_supremum, secular_derivative, secular_eval

from conftest import ACCEPTANCE, CONFIGS, basis_state, reference


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"\ncriterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
    return bool(ok)


def test_criterion_01_trace_identity():
    model, spectrum, _ = reference(64)
    closed = model.z[2.0] - model.z[0.5] * model.z[1.5]
    tr = reverse_sum(np.diag(model.generator))
    gap = abs(reverse_sum(spectrum.nus) - closed)
    tr2 = float(np.trace(reference(2)[0].generator))
    ok = gap <= 1e-10 * abs(tr) and abs(tr2 - (-0.1122824)) <= 5e-8
    assert record("1", ok, f"|sum nu - closed form| = {gap:.3e} <= {1e-10 * abs(tr):.3e}; N=2 trace {tr2:.7f}")


def test_criterion_02_interlacing():
    _, spectrum, _ = reference(64)
    bad = [r.k for r in spectrum.records[1:] if not r.interior]
    assert record("2", not bad, f"{len(bad)} violations over k = 2..64")


def test_criterion_03_secular_pin():
    _, spectrum, _ = reference(64)
    pin = abs(secular_eval(spectrum.context, 0.0) - 1.0)
    worst = max(r.secular_residual for r in spectrum.records[1:])
    assert record("3", pin <= 1e-12 and worst <= 1e-11, f"|f(0)-1| = {pin:.3e}, max |f(nu_k)-1| = {worst:.3e}")


def test_criterion_04_detailed_balance():
    model, _, _ = reference(64)
    res = detailed_balance_residual(model)
    assert record("4", res <= 1e-15, f"max relative residual {res:.3e} <= 1e-15")


def test_criterion_05_eigen_residuals():
    _, _, system = reference(64)
    r, q = float(system.right_residuals.max()), float(system.left_residuals.max())
    assert record("5", r <= 1e-9 and q <= 1e-9, f"right {r:.3e}, left {q:.3e} <= 1e-9")


def test_criterion_06_biorthogonality_and_pairing():
    _, _, system = reference(64)
    defect = biorthogonality_defect(system, 40)
    worst = 0.0
    for n in (2, 64):
        model, spectrum, _ = reference(n)
        for k in range(2, n + 1):
            dens = spectrum.denominators(k)
            pairing = math.fsum((model.gain_profile / dens) * (model.loss_profile / dens))
            d = -secular_derivative(spectrum.context, spectrum.record(k).point)
            worst = max(worst, abs(pairing - d) / d)
    model, spectrum, _ = reference(2)
    d2 = -spectrum.records[1].fprime
    ok = defect <= 1e-6 and worst <= 1e-8
    assert record("6", ok, f"defect {defect:.3e} <= 1e-6 (j,k <= 40); pairing rel {worst:.3e} <= 1e-8; "
                           f"N=2 -f' = {d2:.4f}")


def test_criterion_07_sum_zero():
    _, _, system = reference(64)
    worst = max(abs(math.fsum(p)) / np.abs(p).sum() for p in system.rights[1:])
    assert record("7", worst <= 1e-10, f"max |sum p_k| / ||p_k||_1 = {worst:.3e} <= 1e-10")


def test_criterion_08_factorization():
    _, _, system = reference(64)
    res = system.factorization_residual
    assert record("8", res <= 1e-14, f"max-entry |A - H(I+S)| = {res:.3e} <= 1e-14")


def test_criterion_09_reconstruction():
    _, _, system = reference(64)
    rng = np.random.default_rng(20240611)
    res = reconstruction_defect(system, rng.standard_normal((100, 64)))
    assert record("9", res <= 1e-6, f"worst relative defect over 100 seeded vectors {res:.3e} <= 1e-6")


def test_criterion_10_oracle_agreement():
    model, spectrum, system = reference(32)
    taus = np.linspace(0.0, 10.0, 41)
    spec = spectral_propagate(system, spectrum, basis_state(32), taus)
    ode = ode_propagate(model, basis_state(32), taus)
    diff = float(np.max(np.linalg.norm(spec.states - ode.states, axis=1)))
    assert record("10", diff <= 1e-6, f"sup l2 distance (N=32, tau <= 10) {diff:.3e} <= 1e-6")


def test_criterion_11_conservation_positivity():
    parts = []
    ok = True
    for n in (32, 64):
        model, spectrum, system = reference(n)
        taus = np.linspace(0.0, 10.0, 41)
        for traj in (spectral_propagate(system, spectrum, basis_state(n), taus),
                     ode_propagate(model, basis_state(n), taus)):
            rep = positivity_conservation_check(traj)
            ok &= rep.max_sum_drift <= 1e-9 and rep.min_component >= -1e-12
            parts.append(f"N={n} {traj.method}: drift {rep.max_sum_drift:.1e}, min {rep.min_component:.1e}")
    assert record("11", ok, "; ".join(parts))


def test_criterion_12_gibbs_stationarity():
    _, spectrum, system = reference(64)
    res = stationarity_defect(system, spectrum, (0.1, 1.0, 10.0))
    assert record("12", res <= 1e-12, f"max ||exp(tau A) g - g|| = {res:.3e} <= 1e-12")


def test_criterion_13_decay_rate():
    _, spectrum, system = reference(64)
    grid = decay_grid(spectrum)
    # slowest mode, started with every component at least 1e-3 of its Gibbs value
    p0, _ = single_mode_start(system, 64)
    single = decay_fit(spectral_propagate(system, spectrum, p0, grid), system, spectrum)
    basis = decay_fit(spectral_propagate(system, spectrum, basis_state(64), grid), system, spectrum)
    # absolute floor min p0 >= 1e-3, feasible only where the Gibbs tail stays above it
    model6, spectrum6, system6 = reference(6)
    g, p = system6.rights[0], system6.rights[5]
    neg = p < 0.0
    eps = float(np.min((g[neg] - 1e-3) / -p[neg]))
    start = g + eps * p
    small = decay_fit(spectral_propagate(system6, spectrum6, start, decay_grid(spectrum6)), system6, spectrum6)
    ok = (single.relative_gap <= 0.01 and basis.relative_gap <= 0.05
          and start.min() >= 1e-3 * (1 - 1e-12) and small.relative_gap <= 0.01)
    assert record("13", ok, f"single mode gap {single.relative_gap:.1e} <= 1%; basis state gap "
                            f"{basis.relative_gap:.2e} <= 5%; N=6 absolute floor gap {small.relative_gap:.1e}")


SUPREMA = {}


def _suprema():
    if not SUPREMA:
        for n in (16, 32, 64):
            model, spectrum, _ = reference(n)
            SUPREMA[n] = root_gap_supremum(spectrum, model.lambdas, model.alpha)[0]
    return SUPREMA


def test_criterion_14_spacing_bound_and_bounded_supremum():
    worst = math.inf
    for n in (16, 32, 64):
        ok, ratio = pole_spacing_check(reference(n)[0], 0.4, 1.0)
        worst = min(worst, ratio)
    s = _suprema()
    bounded = all(math.isfinite(v) and v < 1.0 for v in s.values())
    settling = abs(s[64] - s[32]) < abs(s[32] - s[16])
    ok = worst >= 1.0 and bounded and settling
    assert record("14", ok, f"spacing bound ratio {worst:.3f} >= 1 for all m < N; supremum "
                            f"{s[16]:.6f}, {s[32]:.10f}, {s[64]:.10f} bounded and settling")


@pytest.mark.xfail(strict=True, reason="the supremum rises slightly with N towards its limit")
def test_criterion_14_supremum_nonincreasing_trend():
    s = _suprema()
    trend = s[16] >= s[32] >= s[64]
    record("14t", trend, f"nonincreasing trend across N = 16, 32, 64: {s[16]!r}, {s[32]!r}, {s[64]!r}")
    assert trend


def test_criterion_15_gram_diagnostic():
    _, _, system = reference(64)
    first = system.gram_report.first_below_one
    ok = first is not None and first <= 64
    assert record("15", ok, f"first n_star with off-diagonal sum < 1: {first} (G = {system.gram_report.at(first):.3f})")


def test_criterion_16_decreasing_levels():
    model = FiniteModelC(np.array([1.0, 0.0]))
    spectrum = finite_spectrum(model)
    nu = spectrum.records[1].nu
    perron = perron_radius(model, tol=1e-12)
    vec_err = float(np.max(np.abs(perron.vector - np.array([0.268941, 0.731059]))))
    decay = finite_decay_check(model, basis_state(2), np.linspace(0.0, 20.0, 41), spectrum)
    ok = (abs(nu + 2.255252) <= 1e-6 and abs(perron.radius - model.rho) <= 1e-8
          and vec_err <= 1e-6 and decay.passed and abs(decay.gamma_fit - 1.0) <= 1e-8)
    assert record("16", ok, f"nu_2 = {nu:.7f}; |radius - rho| = {abs(perron.radius - model.rho):.1e}; "
                            f"vector err {vec_err:.1e}; decay ratio {decay.worst_ratio:.6f}, "
                            f"gamma {decay.gamma_fit!r}")


def test_criterion_17_determinism(tmp_path):
    reports = []
    for run in ("a", "b"):
        out = tmp_path / run
        proc = subprocess.run([sys.executable, "-m", "mastergen", "verify", "--config",
                               str(CONFIGS / "demo.toml"), "--out", str(out)], capture_output=True)
        assert proc.returncode == 0, proc.stderr
        reports.append((out / "verify_report.json").read_bytes())
    same = reports[0] == reports[1]
    assert record("17", same, f"two verify runs, {len(reports[0])} bytes each, byte-identical: {same}")
