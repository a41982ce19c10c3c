"""Bit-stable text output.

Floats are written as the shortest decimal that round-trips (never more
than 17 significant digits), zero as ``0``.  Key order and row order are
fixed, so the same inputs always give byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .secular import EigenvalueRecord, PolePoint, Spectrum


def fmt(x) -> str:
    """Shortest round-trip decimal; zero prints as ``0``."""
    x = float(x)
    if x == 0.0:
        return "0"
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize {x!r}")
    return repr(x)


def _num(x):
    # json.dumps writes floats with repr already; only zero is special-cased
    if x is None:
        return None
    x = float(x)
    return 0 if x == 0.0 else x


def record_to_dict(rec: EigenvalueRecord) -> dict:
    return {
        "k": rec.k,
        "nu": _num(rec.nu),
        "bracket": [_num(rec.bracket[0]), _num(rec.bracket[1])],
        "pole": None if rec.point is None else {"anchor": rec.point.anchor + 1, "offset": _num(rec.point.offset)},
        "secular_residual": _num(rec.secular_residual),
        "fprime": _num(rec.fprime),
        "alt_residual": _num(rec.alt_residual),
        "newton_iterations": rec.newton_iterations,
        "bisection_fallback": rec.bisection_fallback,
    }


def spectrum_document(spectrum: Spectrum, model_echo: dict, tail_bound: float) -> dict:
    return {
        "model_echo": model_echo,
        "eigenvalues": [record_to_dict(r) for r in spectrum.records],
        "trace_check": _num(spectrum.trace_check),
        "tail_bound": _num(tail_bound),
    }


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return path


@dataclass(frozen=True)
class SpectrumFile:
    model_echo: dict
    records: tuple[EigenvalueRecord, ...]
    trace_check: float
    tail_bound: float


def _float(x):
    return None if x is None else float(x)


def parse_spectrum(text: str) -> SpectrumFile:
    doc = json.loads(text)
    records = []
    for r in doc["eigenvalues"]:
        pole = r["pole"]
        point = None if pole is None else PolePoint(pole["anchor"] - 1, float(pole["offset"]))
        records.append(EigenvalueRecord(
            k=r["k"], nu=float(r["nu"]), point=point,
            bracket=(float(r["bracket"][0]), float(r["bracket"][1])),
            secular_residual=float(r["secular_residual"]), fprime=_float(r["fprime"]),
            alt_residual=_float(r["alt_residual"]), newton_iterations=r["newton_iterations"],
            bisection_fallback=r["bisection_fallback"],
        ))
    return SpectrumFile(doc["model_echo"], tuple(records), float(doc["trace_check"]), float(doc["tail_bound"]))


def spectrum_csv(spectrum: Spectrum) -> str:
    lines = ["k,nu,bracket_lo,bracket_hi,secular_residual,fprime,alt_residual"]
    for r in spectrum.records:
        alt = "" if r.alt_residual is None else fmt(r.alt_residual)
        lines.append(",".join([str(r.k), fmt(r.nu), fmt(r.bracket[0]), fmt(r.bracket[1]),
                               fmt(r.secular_residual), fmt(r.fprime), alt]))
    return "\n".join(lines) + "\n"


def trajectory_csv(taus, states) -> str:
    n = len(states[0])
    lines = ["tau," + ",".join(f"p_{m}" for m in range(1, n + 1))]
    for tau, row in zip(taus, states):
        lines.append(",".join([fmt(tau)] + [fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


def divergence_csv(taus, diffs) -> str:
    lines = ["tau,l2_diff"]
    lines.extend(f"{fmt(t)},{fmt(d)}" for t, d in zip(taus, diffs))
    return "\n".join(lines) + "\n"


def parse_csv(text: str):
    """Header list and rows of floats; an empty cell reads as None."""
    rows = text.rstrip("\n").split("\n")
    header = rows[0].split(",")
    return header, [[float(v) if v else None for v in row.split(",")] for row in rows[1:]]
