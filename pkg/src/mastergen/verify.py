"""Ordered invariant suite behind the ``verify`` command.

Each check yields a measured value, a threshold and a relation.  Hard
numerical failures abort the suite and name the check that was running.
Checks are run in a fixed order with fixed seeds so the report is
byte-identical from run to run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .basis import (biorthogonality_defect, build_system, pairing_defect, projection_crosscheck,
                    reconstruction_defect, kernel_residual)
from .config import InitSpec, RunConfig
from .errors import SolverError
from .evolution import (decay_fit, decay_grid, envelope_check, lyapunov_estimate,
                        ode_propagate, positivity_conservation_check, semigroup_defect,
                        single_mode_start, spectral_propagate, stationarity_defect)
from .finite import (dominance_margin, finite_decay_check, finite_spectrum, perron_radius,
                     shifted_column_defect)
from .model import detailed_balance_residual, gap_condition_check, reverse_sum, trace_identity_residual
from .runs import build_model, finite_model, initial_vector, sample_taus, solve
from .secular import (pole_spacing_check, root_distance_check, root_gap_supremum, secular_eval)

RELATIONS = {
    "<=": lambda m, t: m <= t,
    "<": lambda m, t: m < t,
    ">=": lambda m, t: m >= t,
    ">": lambda m, t: m > t,
    "==": lambda m, t: m == t,
    "finite": lambda m, t: math.isfinite(m),
}

RECONSTRUCTION_SEED = 20240611
SEMIGROUP_SEED = 20240612


@dataclass(frozen=True)
class Check:
    name: str
    measured: float | int | None
    threshold: float | int | None
    relation: str
    status: str
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "fail"


@dataclass
class VerifyReport:
    source: str
    backend: str
    checks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    strict: bool = False

    @property
    def passed(self) -> bool:
        if self.strict and self.warnings:
            return False
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        from .serialize import _num

        def val(x):
            return x if isinstance(x, int) or x is None else _num(x)

        return {
            "source": self.source,
            "backend": self.backend,
            "strict": self.strict,
            "checks": [
                {"name": c.name, "measured": val(c.measured), "threshold": val(c.threshold),
                 "relation": c.relation, "pass": c.status == "pass", "status": c.status, "note": c.note}
                for c in self.checks
            ],
            "warnings": list(self.warnings),
            "passed": self.passed,
        }


class VerificationAbort(Exception):
    """A check raised a hard error; ``check`` names it."""

    def __init__(self, check: str, error: Exception):
        self.check = check
        self.error = error
        super().__init__(f"check '{check}' aborted: {error}")


class _Suite:
    def __init__(self, report: VerifyReport):
        self.report = report

    def add(self, name, measured, threshold, relation, note=""):
        if measured is None or (isinstance(measured, float) and math.isnan(measured)):
            status = "fail"
        else:
            status = "pass" if RELATIONS[relation](measured, threshold) else "fail"
        self.report.checks.append(Check(name, measured, threshold, relation, status, note))

    def skip(self, name, note):
        self.report.checks.append(Check(name, None, None, "", "skip", note))

    def run(self, name, fn):
        try:
            return fn()
        except SolverError as exc:
            raise VerificationAbort(name, exc) from exc


def _rel(x, scale):
    return abs(x) / abs(scale) if scale != 0.0 else abs(x)


def run_verification(cfg: RunConfig, strict: bool = False) -> VerifyReport:
    report = VerifyReport(cfg.source, kernels.BACKEND, strict=strict)
    suite = _Suite(report)
    if cfg.level_spec is not None:
        _model_checks(cfg, suite)
    if cfg.finite is not None:
        _finite_checks(cfg, suite)
    else:
        suite.skip("finite_model", "no [finite] section")
    return report


def _model_checks(cfg: RunConfig, suite: _Suite):
    spec = cfg.level_spec
    model = suite.run("model", lambda: build_model(cfg))
    n = model.n
    tr = reverse_sum(np.diag(model.generator))

    suite.add("trace_identity", _rel(trace_identity_residual(model), tr), 1e-12, "<=")
    suite.add("detailed_balance", detailed_balance_residual(model), 1e-15, "<=")
    if n >= 2:
        gap = gap_condition_check(spec, n)
        suite.add("gap_condition", len(gap.violations), 0, "==",
                  f"first violation m={gap.first_violation}" if gap.violations else "")
        if gap.warning:
            suite.report.warnings.append(gap.warning)

    spectrum = suite.run("secular_solve", lambda: solve(cfg, model))
    ctx = spectrum.context
    suite.add("eigenvalue_trace", _rel(spectrum.trace_check, tr), 1e-10, "<=")
    bad = sum(1 for r in spectrum.records[1:] if not r.interior)
    suite.add("interlacing", bad, 0, "==")
    suite.add("secular_pin", abs(secular_eval(ctx, 0.0) - 1.0), 1e-12, "<=")
    if n < 2:
        for name in ("secular_residual", "fprime_negative", "alt_characterization"):
            suite.skip(name, "one-level model")
    else:
        suite.add("secular_residual", max(r.secular_residual for r in spectrum.records[1:]),
                  cfg.solver.residual_tol, "<=")
        suite.add("fprime_negative", max(r.fprime for r in spectrum.records[1:]), 0.0, "<")
        suite.add("alt_characterization", max(r.alt_residual for r in spectrum.records[1:]), 1e-9, "<=")

    system = suite.run("eigenvectors", lambda: build_system(model, spectrum, gram=n >= 2))
    suite.add("eigen_residuals", float(max(system.right_residuals.max(), system.left_residuals.max())),
              1e-9, "<=")
    suite.add("kernel", kernel_residual(model), 1e-14, "<=")
    suite.add("biorthogonality", biorthogonality_defect(system, 40), 1e-6, "<=", f"j,k <= {min(40, n)}")
    if n >= 2:
        suite.add("pairing_identity", pairing_defect(model, spectrum), 1e-8, "<=")
        sums = max(abs(reverse_sum(p)) / float(np.abs(p).sum()) for p in system.rights[1:])
        suite.add("sum_zero", sums, 1e-10, "<=")
    rng = np.random.default_rng(RECONSTRUCTION_SEED)
    suite.add("reconstruction", reconstruction_defect(system, rng.standard_normal((100, n))), 1e-6, "<=")
    proj = suite.run("projection_crosscheck",
                     lambda: max(projection_crosscheck(system, j) for j in range(1, n + 1)))
    suite.add("projection_crosscheck", proj, 1e-6, "<=")
    suite.add("factorization", system.factorization_residual, 1e-14, "<=")
    if system.gram_report is not None:
        first = system.gram_report.first_below_one
        suite.add("gram_diagnostic", first if first is not None else n + 1, n, "<=", "smallest n_star with G < 1")
        suite.add("gram_monotone", int(system.gram_report.nonincreasing), 1, "==")

    if n >= 2:
        ok1, worst1 = pole_spacing_check(model, spec.theta, spec.gap_constant)
        suite.add("pole_spacing", worst1, 1.0, ">=", "ratio to explicit lower bound")
        ok2, worst2 = root_distance_check(spectrum, model, spec.theta, spec.gap_constant)
        suite.add("root_distance", worst2, 1.0, ">=", "ratio to explicit lower bound, m != k")
        sup, argk = root_gap_supremum(spectrum, model.lambdas, model.alpha)
        suite.add("root_gap_supremum", sup, None, "finite", f"attained at k={argk}")

    _evolution_checks(cfg, suite, model, spectrum, system)


def _evolution_checks(cfg, suite, model, spectrum, system):
    n = model.n
    ev = cfg.evolve
    init = ev.init if ev is not None else InitSpec("basis_state", index=1, text="basis_state:1")
    tau_max = ev.tau_max if ev is not None else 10.0
    samples = ev.samples if ev is not None else 41
    ode_tol = ev.ode_tol if ev is not None else 1e-10
    p0 = initial_vector(init, model, system)
    taus = sample_taus(tau_max, samples)

    spec_traj = spectral_propagate(system, spectrum, p0, taus)
    ode_traj = suite.run("ode_propagate", lambda: ode_propagate(model, p0, taus, ode_tol))
    for label, traj in (("spectral", spec_traj), ("ode", ode_traj)):
        rep = positivity_conservation_check(traj)
        suite.add(f"conservation_{label}", rep.max_sum_drift, 1e-9, "<=")
        suite.add(f"positivity_{label}", rep.min_component, -1e-12, ">=")
    diff = float(np.max(np.linalg.norm(spec_traj.states - ode_traj.states, axis=1)))
    suite.add("oracle_agreement", diff, 1e-6, "<=", f"init {init.text}, tau <= {tau_max!r}")

    suite.add("gibbs_stationarity", stationarity_defect(system, spectrum), 1e-12, "<=")
    lyap = lyapunov_estimate(spectrum, system)
    suite.add("lyapunov_exponent", lyap.exponent, 0.0, "==")
    suite.add("lyapunov_trend", max(abs(t) for t in lyap.trend), 1e-12, "<=")

    rng = np.random.default_rng(SEMIGROUP_SEED)
    pairs = rng.uniform(0.0, 10.0, size=(20, 2))
    suite.add("semigroup", max(semigroup_defect(system, spectrum, p0, a, b) for a, b in pairs), 1e-8, "<=")

    if n < 2:
        suite.skip("decay_basis_state", "one-level model")
        suite.skip("decay_single_mode", "one-level model")
        return
    grid = decay_grid(spectrum)
    e1 = np.zeros(n)
    e1[0] = 1.0
    rep = decay_fit(spectral_propagate(system, spectrum, e1, grid), system, spectrum)
    suite.add("decay_basis_state", rep.relative_gap, 0.05, "<=", f"slowest mode k={rep.solver_index}")
    start, eps = single_mode_start(system, n)
    traj = spectral_propagate(system, spectrum, start, grid)
    rep = decay_fit(traj, system, spectrum)
    suite.add("decay_single_mode", rep.relative_gap, 0.01, "<=", f"eps={eps!r}")
    env = envelope_check(traj, system, spectrum, n)
    suite.add("decay_envelope", env.worst_ratio, 1.0 + 1e-12, "<=")


def _finite_checks(cfg: RunConfig, suite: _Suite):
    fin = cfg.finite
    model = finite_model(fin)
    spectrum = suite.run("finite_spectrum", lambda: finite_spectrum(model))
    tr = reverse_sum(np.diag(model.generator))
    suite.add("finite_trace", _rel(spectrum.trace_check, tr), 1e-12, "<=")
    bad = sum(1 for r in spectrum.records[1:] if not r.interior)
    suite.add("finite_interlacing", bad, 0, "==")
    suite.add("finite_dominance", dominance_margin(model, spectrum), 0.0, ">")
    suite.add("finite_shifted_columns", shifted_column_defect(model), 8.0 * math.ulp(model.rho), "<=")
    perron = perron_radius(model, fin.power_tol, fin.power_max_iter)
    suite.add("perron_radius", abs(perron.radius - model.rho), 10.0 * fin.power_tol, "<=")
    gibbs = np.array(model.gibbs().components)
    suite.add("perron_vector", float(np.linalg.norm(perron.vector - gibbs)), 1e-6, "<=")
    if fin.init is not None:
        p0 = initial_vector(fin.init, model)
    else:
        p0 = np.zeros(model.n)
        p0[0] = 1.0
    tau_max = fin.tau_max if fin.tau_max is not None else 40.0 / abs(spectrum.dominant().nu)
    rep = finite_decay_check(model, p0, sample_taus(tau_max, fin.samples), spectrum)
    suite.add("finite_decay", rep.worst_ratio, 1.0 + 1e-12, "<=")
    suite.add("finite_gamma", abs(rep.gamma_fit - 1.0), 1e-8, "<=")
