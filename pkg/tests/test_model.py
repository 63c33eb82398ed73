import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vixsabr import (
    CapSpec,
    SabrParams,
    capped_vol_diffusion,
    capped_vol_drift,
    drift_polynomial_coefficients,
    vol_diffusion,
    vol_drift,
    vol_variance,
)

any_params = st.builds(
    SabrParams,
    beta=st.floats(0.0, 0.95),
    rho=st.floats(-0.95, 0.95),
    omega=st.floats(0.05, 5.0),
    v0=st.floats(0.01, 2.0),
)

negative_rho_params = st.builds(
    SabrParams,
    beta=st.floats(0.0, 0.95),
    rho=st.floats(-0.95, -0.01),
    omega=st.floats(0.05, 5.0),
    v0=st.floats(0.01, 2.0),
)


# ---------------------------------------------------------------------------
# parameter validation
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "kwargs",
    [
        dict(beta=-0.1, rho=-0.7, omega=1.0, v0=0.1),
        dict(beta=1.0, rho=-0.7, omega=1.0, v0=0.1),
        dict(beta=0.5, rho=-1.0, omega=1.0, v0=0.1),
        dict(beta=0.5, rho=1.0, omega=1.0, v0=0.1),
        dict(beta=0.5, rho=-0.7, omega=0.0, v0=0.1),
        dict(beta=0.5, rho=-0.7, omega=-1.0, v0=0.1),
        dict(beta=0.5, rho=-0.7, omega=1.0, v0=0.0),
        dict(beta=0.5, rho=-0.7, omega=1.0, v0=-0.1),
    ],
)
def test_params_validation_rejects_out_of_range(kwargs):
    with pytest.raises(ValueError):
        SabrParams(**kwargs)


def test_negative_correlation_flag(params):
    assert params.negative_correlation
    flipped = SabrParams(beta=0.5, rho=0.3, omega=1.0, v0=0.1)
    assert not flipped.negative_correlation


def test_rho_perp(params):
    assert math.isclose(params.rho_perp, math.sqrt(1.0 - 0.49), rel_tol=1e-15)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(vol_cap=0.5, drift_cap=1.0),   # cap below omega
        dict(vol_cap=1.0, drift_cap=1.0),   # cap equal to omega
        dict(vol_cap=2.0, drift_cap=0.0),
        dict(vol_cap=2.0, drift_cap=-1.0),
    ],
)
def test_cap_spec_validation(params, kwargs):
    with pytest.raises(ValueError):
        CapSpec.from_params(params, **kwargs)


# ---------------------------------------------------------------------------
# pinned values for the effective-volatility coefficients
# ---------------------------------------------------------------------------

def test_vol_diffusion_pinned(params):
    assert math.isclose(vol_diffusion(0.1, params), 1.035615758860399, rel_tol=1e-14)


def test_vol_diffusion_at_zero_is_omega():
    for omega in (0.3, 1.0, 2.5):
        p = SabrParams(beta=0.6, rho=-0.4, omega=omega, v0=0.1)
        assert math.isclose(vol_diffusion(0.0, p), omega, rel_tol=1e-15)


def test_vol_drift_pinned(params):
    assert math.isclose(vol_drift(0.1, params), 0.03875, rel_tol=1e-14)
    zero_rho = SabrParams(beta=0.5, rho=0.0, omega=1.0, v0=0.1)
    assert math.isclose(vol_drift(1.0, zero_rho), 0.375, rel_tol=1e-14)


def test_drift_polynomial_pinned(params):
    cubic, quadratic = drift_polynomial_coefficients(params)
    assert math.isclose(cubic, 0.375, rel_tol=1e-14)
    assert math.isclose(quadratic, 0.35, rel_tol=1e-14)

    other = SabrParams(beta=0.0, rho=-0.5, omega=2.0, v0=0.1)
    cubic, quadratic = drift_polynomial_coefficients(other)
    assert math.isclose(cubic, 1.0, rel_tol=1e-14)
    assert math.isclose(quadratic, 1.0, rel_tol=1e-14)


def test_binding_level_pinned_values():
    expected = {
        -0.7: 2.336308338453881,
        0.0: 3.4641016151377544,
        0.7: 5.136308338453881,
    }
    for rho, level in expected.items():
        p = SabrParams(beta=0.5, rho=rho, omega=1.0, v0=0.1)
        spec = CapSpec.from_params(p, vol_cap=2.0, drift_cap=1.0)
        assert math.isclose(spec.binding_level, level, rel_tol=1e-12)


def test_diffusion_equals_cap_at_binding_level(params, caps):
    assert abs(vol_diffusion(caps.binding_level, params) - caps.vol_cap) < 1e-12


def test_degenerate_caps_binding_level(params):
    tight = CapSpec.from_params(params, vol_cap=1.0 + 1e-9, drift_cap=1e-12)
    assert math.isclose(tight.binding_level, 2.8571431887058907e-9, rel_tol=1e-6)
    assert abs(vol_diffusion(tight.binding_level, params) - tight.vol_cap) < 1e-12


# ---------------------------------------------------------------------------
# capped coefficients
# ---------------------------------------------------------------------------

def test_capped_drift_saturates(params, caps):
    assert capped_vol_drift(100.0, params, caps) == 1.0
    strong = SabrParams(beta=0.5, rho=0.9, omega=3.0, v0=0.1)
    strong_caps = CapSpec.from_params(strong, vol_cap=4.0, drift_cap=0.3)
    assert capped_vol_drift(0.5, strong, strong_caps) == -0.3


def test_capped_diffusion_saturates(params, caps):
    big = caps.binding_level * 10.0
    assert capped_vol_diffusion(big, params, caps) == caps.vol_cap
    small = caps.binding_level / 10.0
    assert capped_vol_diffusion(small, params, caps) == vol_diffusion(small, params)


def test_capped_diffusion_continuous_at_binding_level(params, caps):
    v = caps.binding_level
    below = capped_vol_diffusion(v * (1.0 - 1e-12), params, caps)
    above = capped_vol_diffusion(v * (1.0 + 1e-12), params, caps)
    assert abs(below - caps.vol_cap) < 1e-9
    assert abs(above - caps.vol_cap) < 1e-9


def test_vectorized_coefficients_match_scalar(params, caps):
    v = np.array([0.0, 0.05, 0.1, 1.0, 2.336308338453881, 10.0])
    sig = capped_vol_diffusion(v, params, caps)
    mu = capped_vol_drift(v, params, caps)
    assert sig.shape == v.shape and mu.shape == v.shape
    for i, x in enumerate(v):
        assert sig[i] == capped_vol_diffusion(float(x), params, caps)
        assert mu[i] == capped_vol_drift(float(x), params, caps)


# ---------------------------------------------------------------------------
# property tests
# ---------------------------------------------------------------------------

@given(any_params)
@settings(max_examples=200, deadline=None)
def test_drift_diffusion_polynomial_identity(p):
    # v * drift(v) must equal cubic*v^3 + quadratic*v^2 for all levels.
    cubic, quadratic = drift_polynomial_coefficients(p)
    v = np.linspace(0.0, 10.0, 41)
    lhs = v * vol_drift(v, p)
    rhs = cubic * v**3 + quadratic * v**2
    scale = np.maximum(np.abs(rhs), 1e-30)
    assert np.all(np.abs(lhs - rhs) <= 1e-12 * scale + 1e-15)


@given(any_params)
@settings(max_examples=200, deadline=None)
def test_diffusion_squared_equals_variance(p):
    v = np.linspace(0.0, 20.0, 37)
    sig = vol_diffusion(v, p)
    var = vol_variance(v, p)
    assert np.all(var > 0.0)
    assert np.allclose(sig**2, var, rtol=1e-13, atol=0.0)


@given(negative_rho_params)
@settings(max_examples=200, deadline=None)
def test_diffusion_monotone_for_negative_correlation(p):
    v = np.linspace(0.0, 30.0, 61)
    sig = vol_diffusion(v, p)
    assert np.all(np.diff(sig) >= -1e-12)


@given(any_params, st.floats(1e-6, 3.0), st.floats(1e-6, 5.0))
@settings(max_examples=200, deadline=None)
def test_caps_bound_the_coefficients(p, extra, drift_cap):
    spec = CapSpec.from_params(p, vol_cap=p.omega + extra, drift_cap=drift_cap)
    v = np.linspace(0.0, 50.0, 101)
    sig = capped_vol_diffusion(v, p, spec)
    mu = capped_vol_drift(v, p, spec)
    assert np.all(sig <= spec.vol_cap + 1e-15)
    assert np.all(sig <= vol_diffusion(v, p) + 1e-15)
    assert np.all(np.abs(mu) <= spec.drift_cap + 1e-15)
    below = v < spec.binding_level
    assert np.allclose(sig[below], vol_diffusion(v[below], p), rtol=1e-13)
