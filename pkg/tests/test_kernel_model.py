import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pucci.errors import DivergenceError, InvalidSpecError, SingularPointError
from pucci.kernel_model import (KernelFunction, KernelSpec, ScalingFunction, check_kernel_bounds,
                                check_upper_scaling, dini_integral, kernel_eval, scaled_phi,
                                sector_index)


@pytest.mark.parametrize("beta", [0.1, 0.3, 0.75, 1.2, 1.9])
def test_dini_power_closed_form(beta):
    # ∫_0^1 y^{β-1} dy = 1/β
    assert dini_integral(ScalingFunction.power(beta)) == pytest.approx(1.0 / beta, rel=1e-10)


def test_dini_logpower_matches_series():
    # ∫_0^1 log(1+y^β)/y dy = (1/β)·π²/12
    beta = 0.6
    assert dini_integral(ScalingFunction.logpower(beta)) == pytest.approx(np.pi**2 / 12 / beta, rel=1e-9)


@pytest.mark.parametrize("fam", ["power", "logpower"])
def test_upper_scaling_shipped_families(fam):
    rep = check_upper_scaling(ScalingFunction(fam, 0.7))
    assert rep.passed and rep.max_violation <= 1e-12


def test_upper_scaling_detects_misdeclared_beta():
    # t^1.2 declared with beta 0.5 grows faster than allowed
    phi = ScalingFunction.tabulated([1e-8, 1e8], [1e-8**1.2, 1e8**1.2], 0.5)
    rep = check_upper_scaling(phi)
    assert not rep.passed and rep.max_violation > 1.0
    assert rep.worst_s > 1.0


def test_tabulated_reproduces_power():
    t = np.logspace(-3, 3, 7)
    phi = ScalingFunction.tabulated(t, t**0.8, 0.8)
    s = np.logspace(-5, 5, 31)
    np.testing.assert_allclose(phi(s), s**0.8, rtol=1e-12)


def test_scaled_phi_factor():
    phi = ScalingFunction.power(0.5, kappa0=2.0)
    p3 = scaled_phi(phi, 3, 1.5)
    assert p3(4.0) == pytest.approx(2.0 * 2.0 ** (-3.0) * 2.0)


def test_spec_validation():
    phi = ScalingFunction.power(0.5)
    with pytest.raises(InvalidSpecError, match=r"alpha must lie in \(beta, 2\)"):
        KernelSpec(1, 2, 0.4, phi)
    with pytest.raises(InvalidSpecError):
        KernelSpec(2, 1, 1.0, phi)
    dec = ScalingFunction.tabulated([1.0, 2.0], [2.0, 1.0], 0.5)
    with pytest.raises(InvalidSpecError, match="non-decreasing"):
        KernelSpec(1, 2, 1.0, dec, "A4")
    with pytest.raises(InvalidSpecError):
        ScalingFunction("cubic", 0.5)
    with pytest.raises(InvalidSpecError):
        ScalingFunction.power(0.5, kappa0=0.5)


def test_kernel_closed_form_1d():
    spec = KernelSpec(1, 2, 1.2, ScalingFunction.power(0.4))
    k = KernelFunction(spec, 1, (1.5, 1.5), (0.5, 0.5))
    y = np.array([0.3, -2.0])
    expect = 1.5 * 0.8 * np.abs(y) ** -1.2 + 0.5 * np.abs(y) ** -0.4
    np.testing.assert_allclose(kernel_eval(k, y), expect, rtol=1e-14)
    with pytest.raises(SingularPointError):
        kernel_eval(k, [0.0])


def test_kernel_sectors_2d():
    spec = KernelSpec(1, 2, 1.0, ScalingFunction.power(0.5))
    cs = tuple([1.0 + 0.05 * k for k in range(8)] * 2)
    k = KernelFunction(spec, 2, cs, (0.0,))
    th = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    y = np.stack([np.cos(th), np.sin(th)], 1)
    assert np.allclose(k(y), k(-y))
    np.testing.assert_array_equal(sector_index(y, 2) % 8, sector_index(-y, 2) % 8)
    with pytest.raises(InvalidSpecError, match="antipodally"):
        KernelFunction(spec, 2, tuple(range(1, 17)), (0.0,))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 1.9), st.floats(0.1, 0.9), st.sampled_from(["A3", "A4"]), st.integers(0, 2**31 - 1))
def test_extreme_kernels_inside_class(alpha, frac, cls, seed):
    spec = KernelSpec(1, 2, alpha, ScalingFunction.logpower(frac * alpha), cls)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((100, 2)) * np.exp(rng.uniform(-6, 6, (100, 1)))
    lo_phi = 1.0 if cls == "A4" else 0.0
    for cs, cp in ((1.0, lo_phi), (2.0, 2.0), (1.5, 1.0)):
        assert check_kernel_bounds(KernelFunction.constant(spec, 2, cs, cp), y) <= 1e-12


def test_kernel_bounds_detects_escape():
    spec = KernelSpec(1, 2, 1.0, ScalingFunction.power(0.5), "A4")
    k = KernelFunction.constant(spec, 1, 1.0, 1.0)
    # the same coefficients judged against a larger lambda fall below the lower bound
    tight = KernelSpec(1.2, 2, 1.0, ScalingFunction.power(0.5), "A4")
    k2 = KernelFunction.__new__(KernelFunction)
    object.__setattr__(k2, "spec", tight)
    for f in ("dim", "c_stable", "c_phi", "phi_cutoff"):
        object.__setattr__(k2, f, getattr(k, f))
    assert check_kernel_bounds(k2, np.array([[0.5], [3.0]])) > 0


def test_dini_divergence():
    phi = ScalingFunction.tabulated([1e-3, 1.0], [1.0, 1.0], 0.5)  # flat near 0: not Dini
    with pytest.raises(DivergenceError):
        dini_integral(phi)


def test_spec_roundtrip():
    spec = KernelSpec(1, 3, 1.4, ScalingFunction.logpower(0.6, 1.5), "A4")
    assert KernelSpec.from_dict(spec.to_dict()) == spec
