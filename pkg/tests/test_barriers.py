import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from pucci.barriers import (BarrierParams, annulus_radii, barrier_eval, barrier_grid, build_bump,
                            cp_constant, elementary_slacks, operator_terms, search_barrier_params,
                            verify_barrier)
from pucci.errors import PreconditionError, ResolutionError
from pucci.extremal_ops import OperatorKind
from pucci.panel import levy_radial_checked

from conftest import spec_for


def test_cp_constant_closed_form():
    assert cp_constant(2.0) == pytest.approx(26.0)
    assert cp_constant(3.0) == pytest.approx(3 * (1 + 17.5))
    with pytest.raises(PreconditionError):
        cp_constant(0.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.0, 0.99), st.floats(0.1, 8.0))
def test_elementary_inequalities(a, frac, q):
    s1, s2 = elementary_slacks(a, frac * a, q)
    scale = a ** (-q)
    assert s1 >= -1e-12 * scale and s2 >= -1e-12 * scale


def test_barrier_shape():
    p = BarrierParams(3.0, 1 / 32, 1.0, 1)
    x = np.array([1e-4, 0.01, 0.5, 1.0, 2.5, 10.0])
    expect = np.minimum(32.0**3, np.maximum(np.abs(x) ** -3.0, 2.0**-3))
    np.testing.assert_allclose(barrier_eval(p, x), expect)
    g = barrier_grid(p, p.delta / 8)
    assert g.values.max() == pytest.approx(32.0**3)


def mminus_oracle_1d(params, spec, s):
    """M₀⁻ of the 1-d barrier at x = s, by adaptive quadrature on the closed form."""
    f = lambda x: float(np.squeeze(barrier_eval(params, x)))
    lam, Lam, a, b = spec.lam, spec.Lam, spec.alpha, spec.phi.beta

    q = params.p

    def g(r):
        if r < 0.01 * s:  # Taylor series on the power branch avoids cancellation
            d = q * (q + 1) * s ** (-q - 2) * r * r + q * (q + 1) * (q + 2) * (q + 3) / 12 * s ** (-q - 4) * r**4
        else:
            d = f(s + r) + f(s - r) - 2 * f(s)
        ks = (2 - a) * r**-a
        return (lam * ks * max(d, 0) - Lam * (ks + r**-b) * max(-d, 0)) / r
    kinks = sorted({0.01 * s} | {abs(s - c) for c in (params.delta, -params.delta, 2.0, -2.0, 0.0)})
    edges = [0.0] + kinks + [np.inf]
    return 2 * sum(integrate.quad(g, lo, hi, epsabs=1e-10, epsrel=1e-10, limit=500)[0]
                   for lo, hi in zip(edges[:-1], edges[1:]))


@pytest.mark.parametrize("alpha", [0.6, 1.5])
def test_panel_value_matches_quad_oracle(alpha):
    spec = spec_for(alpha, "power")
    params = BarrierParams(2.0, 1 / 32, 1.0, 1, (alpha, alpha))
    terms = operator_terms(OperatorKind.mminus(0), spec)
    for s in (1.02, 1.4, 1.9):
        res = levy_radial_checked(params_profile(params), 1, s, terms, params.delta / 16)
        ref = mminus_oracle_1d(params, spec, s)
        assert res.parts["fine"] == pytest.approx(ref, rel=1e-6, abs=1e-6)


def params_profile(params):
    from pucci.barriers import barrier_profile
    return barrier_profile(params)


def test_verify_and_search_1d():
    spec = spec_for(1.0, "logpower")
    params = search_barrier_params(1.0, spec)
    assert params.p > 1 and params.delta < 1 / 16
    cert = verify_barrier(params, spec, params.delta / 16)
    assert cert.passed and cert.grid_min >= -cert.tolerance
    again = verify_barrier(params, spec, params.delta / 16)
    np.testing.assert_array_equal(cert.values, again.values)
    assert cert.values.shape == (1, len(annulus_radii(params)))


def test_degenerate_constant_barrier():
    # delta = 2√n makes f constant, so M⁻f vanishes identically
    spec = spec_for(1.2)
    p = BarrierParams(2.0, 2.0, 1.0, 1, strict=False)
    cert = verify_barrier(p, spec, p.delta / 16)
    assert np.max(np.abs(cert.values)) <= 1e-12
    with pytest.raises(PreconditionError):
        BarrierParams(2.0, 2.0, 1.0, 1)


def test_precondition_errors():
    with pytest.raises(PreconditionError):
        BarrierParams(2.0, 1 / 8, 1.0, 1)  # delta >= r/16
    with pytest.raises(PreconditionError):
        BarrierParams(1.0, 1 / 32, 1.0, 1)  # p <= n
    with pytest.raises(PreconditionError):
        BarrierParams(3.0, 1 / 32, 1.5, 1)
    p = BarrierParams(2.0, 1 / 32, 1.0, 1)
    with pytest.raises(ResolutionError):
        verify_barrier(p, spec_for(1.0), p.delta / 4)
    with pytest.raises(PreconditionError):
        build_bump(p, spec_for(1.0))


def test_build_bump_1d():
    spec = spec_for(1.2, "power")
    params = search_barrier_params(0.25, spec)
    bump = build_bump(params, spec)
    assert bump.q3_min > 2.0
    for i, cert in bump.certificates.items():
        assert cert.passed, (i, cert.grid_min, cert.tolerance)
    assert bump(np.array([[3.0]]))[0] == 0.0
    assert bump.grid.values.max() == pytest.approx(bump(np.zeros((1, 1)))[0])
