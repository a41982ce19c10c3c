import functools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mastergen import kernels  # noqa: E402
from mastergen.basis import build_system  # noqa: E402
from mastergen.model import LevelSpec, truncate  # noqa: E402
from mastergen.secular import spectrum_of  # noqa: E402

import oracles  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"

KERNEL_NAMES = ("neumaier_sum", "secular_sums", "deflated_solve", "rk4_step", "power_iterate")


@pytest.fixture(params=sorted(kernels.backends()))
def backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    mod = kernels.backends()[request.param]
    for name in KERNEL_NAMES:
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return request.param


def reference_spec(theta=0.4):
    return LevelSpec.affine(1.0, 2.0, theta, 1.0)


@functools.lru_cache(maxsize=None)
def reference(n):
    """Model, spectrum and biorthogonal system of the reference family at size ``n``."""
    model = truncate(reference_spec(), n)
    spectrum = spectrum_of(model)
    return model, spectrum, build_system(model, spectrum)


@functools.lru_cache(maxsize=None)
def mp_reference_roots(n):
    b, w = oracles.mp_poles_weights(oracles.affine_lambdas(n), 2.0)
    return oracles.mp_secular_roots(b, w)


@pytest.fixture
def ref2():
    return reference(2)


@pytest.fixture
def ref32():
    return reference(32)


@pytest.fixture
def ref64():
    return reference(64)


def basis_state(n, m=1):
    p = np.zeros(n)
    p[m - 1] = 1.0
    return p


# acceptance lines, printed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda s: (int("".join(c for c in s if c.isdigit())), s)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>4}: {'PASS' if ok else 'FAIL'}  {detail}")
