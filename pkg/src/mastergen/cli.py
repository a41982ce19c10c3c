"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 solver error,
3 verification failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .basis import build_system
from .config import RunConfig, load_config
from .errors import ConfigError, DomainError, SolverError, StiffnessError
from .evolution import ode_propagate, spectral_propagate, trajectory_distance
from .finite import finite_decay_check, finite_spectrum, perron_radius
from .runs import build_model, finite_model, initial_vector, sample_taus, solve
from .serialize import (divergence_csv, dumps, fmt, spectrum_csv, spectrum_document, trajectory_csv,
                        write_text)
from .verify import VerificationAbort, run_verification

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    return Path(override if override is not None else cfg.output.dir)


def cmd_spectrum(cfg: RunConfig, out: str | None = None) -> list[Path]:
    model = build_model(cfg)
    spectrum = solve(cfg, model)
    d = _out_dir(cfg, out)
    written = []
    if "json" in cfg.output.formats:
        doc = spectrum_document(spectrum, cfg.model_echo(), model.tail_bound)
        written.append(write_text(d / "spectrum.json", dumps(doc)))
    if "csv" in cfg.output.formats:
        written.append(write_text(d / "spectrum.csv", spectrum_csv(spectrum)))
    return written


def cmd_evolve(cfg: RunConfig, out: str | None = None) -> list[Path]:
    if cfg.evolve is None:
        raise ConfigError("missing required section 'evolve'")
    ev = cfg.evolve
    model = build_model(cfg)
    taus = sample_taus(ev.tau_max, ev.samples)
    d = _out_dir(cfg, out)
    system = spectrum = None
    if ev.method in ("spectral", "both") or ev.init.kind == "gibbs_plus_mode":
        spectrum = solve(cfg, model)
        system = build_system(model, spectrum, gram=False)
    p0 = initial_vector(ev.init, model, system)
    written = []
    spec = ode = None
    if ev.method in ("spectral", "both"):
        spec = spectral_propagate(system, spectrum, p0, taus)
        written.append(write_text(d / "trajectory.csv", trajectory_csv(spec.taus, spec.states)))
    if ev.method in ("ode", "both"):
        ode = ode_propagate(model, p0, taus, ev.ode_tol)
        name = "trajectory.csv" if ev.method == "ode" else "trajectory_ode.csv"
        written.append(write_text(d / name, trajectory_csv(ode.taus, ode.states)))
    if ev.method == "both":
        diffs = trajectory_distance(spec, ode)
        written.append(write_text(d / "divergence.csv", divergence_csv(taus, diffs)))
    return written


def cmd_verify(cfg: RunConfig, strict: bool = False, out: str | None = None):
    report = run_verification(cfg, strict=strict)
    path = write_text(_out_dir(cfg, out) / "verify_report.json", dumps(report.to_dict()))
    return report, path


def cmd_finite(cfg: RunConfig, out: str | None = None) -> list[Path]:
    if cfg.finite is None:
        raise ConfigError("missing required section 'finite'")
    fin = cfg.finite
    model = finite_model(fin)
    spectrum = finite_spectrum(model)
    perron = perron_radius(model, fin.power_tol, fin.power_max_iter)
    p0 = initial_vector(fin.init, model) if fin.init is not None else np.eye(model.n)[0]
    tau_max = fin.tau_max if fin.tau_max is not None else 40.0 / abs(spectrum.dominant().nu)
    decay = finite_decay_check(model, p0, sample_taus(tau_max, fin.samples), spectrum)
    doc = spectrum_document(spectrum, cfg.model_echo(), 0.0)
    doc["rho"] = model.rho
    doc["perron"] = {
        "radius": perron.radius,
        "vector": [float(v) for v in perron.vector],
        "iterations": perron.iterations,
        "converged": perron.converged,
    }
    doc["decay"] = {
        "passed": decay.passed,
        "constant": decay.constant,
        "rate": decay.rate,
        "worst_ratio": decay.worst_ratio,
        "gamma_sum": decay.gamma_sum,
        "gamma_fit": decay.gamma_fit,
    }
    return [write_text(_out_dir(cfg, out) / "finite.json", dumps(doc))]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mastergen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("spectrum", help="solve the eigenvalues and write them out")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p = sub.add_parser("evolve", help="propagate an initial condition and write CSV trajectories")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p = sub.add_parser("verify", help="run the invariant suite")
    p.add_argument("--config", required=True)
    p.add_argument("--strict", action="store_true", help="treat warnings as failures")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p = sub.add_parser("finite", help="decreasing-level finite model with the Perron check")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides output.dir)")
    return parser


def _err(msg: str):
    print(f"mastergen: {msg}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "verify":
            report, path = cmd_verify(cfg, args.strict, args.out)
            for c in report.checks:
                measured = "-" if c.measured is None else (str(c.measured) if isinstance(c.measured, int)
                                                            else fmt(c.measured))
                threshold = "" if c.threshold is None else (str(c.threshold) if isinstance(c.threshold, int)
                                                             else fmt(c.threshold))
                print(f"{c.status.upper():4} {c.name}: {measured} {c.relation} {threshold}".rstrip())
            for w in report.warnings:
                print(f"WARN {w}")
            print(f"report: {path}")
            return EXIT_OK if report.passed else EXIT_VERIFY
        handler = {"spectrum": cmd_spectrum, "evolve": cmd_evolve, "finite": cmd_finite}[args.command]
        for path in handler(cfg, args.out):
            print(path)
        return EXIT_OK
    except (ConfigError, DomainError) as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    except VerificationAbort as exc:
        _err(str(exc))
        return EXIT_SOLVER
    except StiffnessError as exc:
        _err(str(exc))
        return EXIT_SOLVER
    except SolverError as exc:
        k = getattr(exc, "k", None)
        _err(f"{exc}" + (f" (k={k})" if k is not None else ""))
        return EXIT_SOLVER
    except OSError as exc:
        _err(f"{exc.filename or ''}: {exc.strerror or exc}")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
