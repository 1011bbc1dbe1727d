import numpy as np
import pytest

from pucci.grid import GridFunction
from pucci.kernel_model import KernelSpec, ScalingFunction

# criterion id -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


def spec_for(alpha, family="power", cls="A3", lam=1.0, Lam=2.0, beta=None):
    beta = alpha / 2 if beta is None else beta
    return KernelSpec(lam, Lam, alpha, ScalingFunction(family, beta), cls)


def grid_fn(fn, dim=1, R=2.0, N=256, exterior="zero"):
    return GridFunction.from_function(fn, dim, R, N, exterior=exterior)


def random_bump(rng, dim=1, terms=3):
    """Sum of signed C^2 bumps a (1 - |x-c|^2/s^2)^3_+ supported in |x| < 1.5."""
    a = rng.uniform(-1, 1, terms)
    s = rng.uniform(0.3, 0.7, terms)
    c = rng.uniform(-0.7, 0.7, (terms, dim))

    def fn(p):
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1])
        for k in range(terms):
            t = np.sum((p - c[k]) ** 2, axis=-1) / s[k] ** 2
            out += a[k] * np.where(t < 1, (1 - t) ** 3, 0.0)
        return out
    return fn


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
