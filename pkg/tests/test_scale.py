import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad as scipy_quad

from vixsabr import (
    BoundaryClass,
    NumericalError,
    QuadratureConfig,
    SabrParams,
    auxiliary_scale_exponent,
    check_scale_density_envelope,
    classify_boundary,
    envelope_constant,
    explosion_verdict,
    feller_origin_diverges,
    feller_test_function,
    martingale_diagnostic,
    natural_scale_volatility,
    scale_exponent,
    scale_function,
    scale_function_inverse,
    scale_function_limit,
    vol_variance,
)

negative_rho_params = st.builds(
    SabrParams,
    beta=st.floats(0.0, 0.95),
    rho=st.floats(-0.95, -0.01),
    omega=st.floats(0.05, 5.0),
    v0=st.floats(0.01, 2.0),
)


def exponent_oracle(x, p):
    """Direct quadrature of the log-derivative of the scale density."""

    def integrand(y):
        return (p.beta - 1.0) * (0.5 * (p.beta - 2.0) * y + p.rho * p.omega) / vol_variance(y, p)

    val, err = scipy_quad(integrand, 0.0, x, epsabs=1e-13, epsrel=1e-12, limit=500)
    assert err < 1e-9
    return val


def auxiliary_oracle(x, p):
    """Direct quadrature of the log-derivative of the auxiliary density."""

    def integrand(y):
        return p.beta * ((1.0 - p.beta) * y - 2.0 * p.rho) / vol_variance(y, p)

    val, err = scipy_quad(integrand, 0.0, x, epsabs=1e-13, epsrel=1e-12, limit=500)
    assert err < 1e-9
    return val


# ---------------------------------------------------------------------------
# scale exponent (closed form)
# ---------------------------------------------------------------------------

def test_scale_exponent_pinned(params):
    assert math.isclose(scale_exponent(1.0, params), 0.37414443955361726, rel_tol=1e-13)
    assert math.isclose(scale_exponent(0.5, params), 0.185118083578244, rel_tol=1e-13)
    assert math.isclose(scale_exponent(10.0, params), 2.293642486609558, rel_tol=1e-13)
    assert scale_exponent(0.0, params) == 0.0


@pytest.mark.parametrize(
    "beta,rho,omega,expected",
    [
        (0.0, -0.5, 1.3, 0.7951607201061107),
        (0.25, -0.9, 1.3, 0.7821234653423779),
        (0.75, -0.1, 1.3, 0.20029747521402325),
        (0.9, -0.7, 1.3, 0.1533821479203049),
        (0.5, 0.6, 1.3, 0.017604200531927353),
    ],
)
def test_scale_exponent_pinned_across_parameters(beta, rho, omega, expected):
    p = SabrParams(beta=beta, rho=rho, omega=omega, v0=0.1)
    assert math.isclose(scale_exponent(2.0, p), expected, rel_tol=1e-12)


def test_scale_exponent_zero_rho_pinned():
    p = SabrParams(beta=0.5, rho=0.0, omega=1.0, v0=0.1)
    assert math.isclose(scale_exponent(3.0, p), 0.8839912472562346, rel_tol=1e-13)


@pytest.mark.parametrize(
    "beta,rho,omega",
    [
        (0.5, -0.7, 1.0),
        (0.25, -0.9, 1.3),
        (0.75, -0.1, 1.3),
        (0.9, -0.7, 1.3),
        (0.5, 0.6, 1.3),
    ],
)
def test_scale_exponent_matches_quadrature(beta, rho, omega):
    p = SabrParams(beta=beta, rho=rho, omega=omega, v0=0.1)
    for x in (0.5, 2.0, 10.0, 50.0):
        closed = scale_exponent(x, p)
        direct = exponent_oracle(x, p)
        assert math.isclose(closed, direct, rel_tol=1e-10, abs_tol=1e-12)


def test_scale_exponent_beta_zero_reduces_to_log_variance():
    p = SabrParams(beta=0.0, rho=-0.6, omega=1.5, v0=0.1)
    for x in (0.3, 1.0, 4.0, 25.0):
        expected = 0.5 * math.log(vol_variance(x, p) / p.omega**2)
        assert math.isclose(scale_exponent(x, p), expected, rel_tol=1e-13)


def test_scale_exponent_vectorized(params):
    x = np.array([0.0, 0.5, 1.0, 10.0])
    vals = scale_exponent(x, params)
    assert vals.shape == x.shape
    for i, xi in enumerate(x):
        assert vals[i] == scale_exponent(float(xi), params)


# ---------------------------------------------------------------------------
# envelope of the scale density
# ---------------------------------------------------------------------------

def test_envelope_constant_pinned(params):
    assert math.isclose(envelope_constant(params), 4.663136865285509, rel_tol=1e-12)


def test_envelope_constant_is_one_for_beta_zero():
    p = SabrParams(beta=0.0, rho=-0.7, omega=1.0, v0=0.1)
    assert envelope_constant(p) == 1.0


def test_envelope_holds_on_grid(params):
    grid = np.arange(0.0, 100.0 + 1e-9, 0.1)
    report = check_scale_density_envelope(grid, params)
    assert report.holds
    assert bool(report)
    assert report.max_violation == 0.0


def test_envelope_equality_for_beta_zero():
    p = SabrParams(beta=0.0, rho=-0.3, omega=2.0, v0=0.1)
    grid = np.linspace(0.0, 50.0, 501)
    report = check_scale_density_envelope(grid, p)
    assert report.holds
    # with a unit envelope constant both bounds coincide
    assert report.max_violation <= 1e-12


def test_envelope_requires_negative_correlation():
    p = SabrParams(beta=0.5, rho=0.2, omega=1.0, v0=0.1)
    with pytest.raises(ValueError):
        check_scale_density_envelope(np.linspace(0.0, 10.0, 11), p)


@given(negative_rho_params)
@settings(max_examples=100, deadline=None)
def test_envelope_holds_for_random_parameters(p):
    grid = np.linspace(0.0, 30.0, 301)
    assert check_scale_density_envelope(grid, p).holds


# ---------------------------------------------------------------------------
# scale function and its limit
# ---------------------------------------------------------------------------

def test_scale_function_at_zero(params):
    assert scale_function(0.0, params) == 0.0


def test_scale_function_pinned(params):
    assert math.isclose(scale_function(100.0, params), 1.5605633372733272, rel_tol=1e-10)


def test_scale_function_monotone(params):
    xs = np.array([0.01, 0.1, 0.5, 1.0, 5.0, 20.0, 100.0])
    vals = scale_function(xs, params)
    assert np.all(np.diff(vals) > 0.0)


def test_scale_function_vector_matches_scalar(params):
    xs = np.array([0.5, 1.0, 10.0])
    vec = scale_function(xs, params)
    for i, x in enumerate(xs):
        assert math.isclose(vec[i], scale_function(float(x), params), rel_tol=1e-12)


def test_scale_function_rejects_negative(params):
    with pytest.raises(ValueError):
        scale_function(-1.0, params)


def test_scale_function_between_envelope_bounds(params):
    # integrating the envelope density brackets the scale function
    c2 = (2.0 - params.beta) / (2.0 * (1.0 - params.beta))
    kappa = envelope_constant(params)

    def envelope_density(y):
        return (params.omega**2 / vol_variance(y, params)) ** c2

    for x in (1.0, 10.0, 100.0):
        base, err = scipy_quad(envelope_density, 0.0, x, epsabs=1e-13, epsrel=1e-12, limit=500)
        assert err < 1e-9
        p_val = scale_function(x, params)
        assert base * (1.0 - 1e-9) <= p_val <= kappa * base * (1.0 + 1e-9)


def test_scale_function_anchored_translation(params):
    # integrating the density anchored at c equals exp(2F(c)) * (p(x) - p(c))
    c = 0.5
    f_c = scale_exponent(c, params)

    def anchored_density(y):
        return math.exp(-2.0 * (scale_exponent(y, params) - f_c))

    for x in (2.0, 10.0):
        direct, err = scipy_quad(anchored_density, c, x, epsabs=1e-13, epsrel=1e-11, limit=500)
        assert err < 1e-8
        via_scale = math.exp(2.0 * f_c) * (scale_function(x, params) - scale_function(c, params))
        assert math.isclose(direct, via_scale, rel_tol=1e-9)


def test_scale_function_limit_pinned(params):
    fit = scale_function_limit(params)
    assert math.isclose(fit.limit, 1.561403804710474, rel_tol=1e-10)
    assert math.isclose(fit.coefficient, 8.719507184863925, rel_tol=1e-6)
    assert fit.coefficient > 0.0
    assert fit.residual < 1e-6


def test_scale_function_nearly_flat_in_far_tail(params):
    gap = scale_function(1e6, params) - scale_function(1e5, params)
    assert 0.0 < gap < 1e-7


def test_scale_function_tail_decay_exponent(params):
    # the gap to the limit decays like x^(-1/(1-beta))
    fit = scale_function_limit(params)
    xs = np.array([1e2, 1e3, 1e4])
    gaps = fit.limit - scale_function(xs, params)
    assert np.all(gaps > 0.0)
    slope = np.polyfit(np.log(xs), np.log(gaps), 1)[0]
    assert abs(slope + 1.0 / (1.0 - params.beta)) < 0.05


def test_scale_function_limit_requires_negative_correlation():
    p = SabrParams(beta=0.5, rho=0.1, omega=1.0, v0=0.1)
    with pytest.raises(ValueError):
        scale_function_limit(p)


def test_scale_function_cancel_hook(params):
    with pytest.raises(NumericalError):
        scale_function(100.0, params, cancel=lambda: True)


# ---------------------------------------------------------------------------
# inverse scale function and natural-scale volatility
# ---------------------------------------------------------------------------

def test_inverse_at_zero(params):
    assert scale_function_inverse(0.0, params) == 0.0


def test_inverse_round_trip(params):
    for x in (0.1, 1.0, 10.0):
        y = scale_function(x, params)
        back = scale_function_inverse(y, params)
        assert math.isclose(back, x, rel_tol=1e-8)


def test_inverse_rejects_out_of_range(params):
    fit = scale_function_limit(params)
    with pytest.raises(ValueError):
        scale_function_inverse(-0.1, params)
    with pytest.raises(ValueError):
        scale_function_inverse(fit.limit, params)
    with pytest.raises(ValueError):
        scale_function_inverse(fit.limit * 1.5, params)


def test_inverse_tail_growth_exponent(params):
    # approaching the limit, the inverse grows like eps^-(1-beta) per decade
    fit = scale_function_limit(params)
    xs = [scale_function_inverse(fit.limit * (1.0 - 10.0**-k), params) for k in range(2, 7)]
    slopes = np.diff(np.log10(xs))
    target = 1.0 - params.beta
    errs = np.abs(slopes - target)
    assert np.all(np.diff(errs) < 0.0)
    assert errs[-1] < 1e-3


def test_natural_scale_volatility_near_origin(params):
    y = 1e-4
    sig = natural_scale_volatility(y, params)
    assert math.isclose(sig / y, params.omega, rel_tol=1e-6)


def test_natural_scale_volatility_tail_exponent(params):
    # approaching the limit, log sigma / log(limit - y) tends to beta
    fit = scale_function_limit(params)
    ys = [fit.limit * (1.0 - 10.0**-k) for k in range(3, 7)]
    sigs = [natural_scale_volatility(y, params) for y in ys]
    slopes = [math.log10(sigs[i] / sigs[i + 1]) for i in range(len(sigs) - 1)]
    assert all(slopes[i] < slopes[i + 1] for i in range(len(slopes) - 1))
    assert abs(slopes[-1] - params.beta) < 0.01


def test_natural_scale_volatility_outside_domain(params):
    fit = scale_function_limit(params)
    assert natural_scale_volatility(0.0, params) == 0.0
    assert natural_scale_volatility(-1.0, params) == 0.0
    assert natural_scale_volatility(fit.limit * 1.01, params) == 0.0


# ---------------------------------------------------------------------------
# second-kind test function and explosion verdict
# ---------------------------------------------------------------------------

def test_feller_function_nondecreasing(params):
    xs = np.array([0.05, 0.1, 1.0, 10.0, 100.0])
    vals = feller_test_function(xs, params)
    assert np.all(np.isfinite(vals))
    assert np.all(np.diff(vals) > 0.0)


def test_feller_function_pinned_tail(params):
    val = feller_test_function(1e6, params)
    assert math.isclose(val, 3107.93278315, rel_tol=1e-9)


def test_feller_function_tail_stabilizes(params):
    vals = feller_test_function(np.array([1e4, 1e5, 1e6]), params)
    inc1 = vals[1] - vals[0]
    inc2 = vals[2] - vals[1]
    assert abs(inc1) < 1e-4 * vals[1]
    assert abs(inc2) < 1e-4 * vals[2]


def test_feller_origin_diverges(params):
    assert feller_origin_diverges(params)
    assert feller_origin_diverges(SabrParams(beta=0.25, rho=-0.9, omega=1.3, v0=0.1))
    assert feller_origin_diverges(SabrParams(beta=0.9, rho=-0.7, omega=1.3, v0=0.1))


@pytest.mark.parametrize("beta", [0.4, 0.5, 0.6])
def test_explosion_verdict_across_boundary_classes(beta):
    p = SabrParams(beta=beta, rho=-0.7, omega=1.0, v0=0.1)
    report = explosion_verdict(p)
    assert report.explosion_flag
    assert report.feller_tail_value > 0.0
    assert math.isfinite(report.scale_limit)


def test_explosion_verdict_report_fields(params):
    report = explosion_verdict(params)
    assert report.explosion_flag
    assert report.boundary_class is BoundaryClass.EXIT
    assert math.isclose(report.scale_limit, 1.561403804710474, rel_tol=1e-10)
    assert math.isclose(report.envelope_constant, 4.663136865285509, rel_tol=1e-12)
    payload = report.to_dict()
    text = json.dumps(payload)
    decoded = json.loads(text)
    assert decoded["boundary_class"] == "exit"
    assert decoded["explosion_flag"] is True


def test_explosion_verdict_requires_negative_correlation():
    p = SabrParams(beta=0.5, rho=0.3, omega=1.0, v0=0.1)
    with pytest.raises(ValueError):
        explosion_verdict(p)


def test_classify_boundary_cases():
    def make(beta):
        return SabrParams(beta=beta, rho=-0.7, omega=1.0, v0=0.1)

    assert classify_boundary(make(0.0)) is BoundaryClass.UNCLASSIFIED
    assert classify_boundary(make(0.3)) is BoundaryClass.REGULAR
    assert classify_boundary(make(0.4)) is BoundaryClass.REGULAR
    assert classify_boundary(make(0.5)) is BoundaryClass.EXIT
    assert classify_boundary(make(0.6)) is BoundaryClass.EXIT
    assert classify_boundary(make(0.9)) is BoundaryClass.EXIT
    assert classify_boundary(make(0.5), endpoint="origin") is BoundaryClass.NATURAL
    with pytest.raises(ValueError):
        classify_boundary(make(0.5), endpoint="middle")


# ---------------------------------------------------------------------------
# auxiliary exponent and martingale diagnostic
# ---------------------------------------------------------------------------

def test_auxiliary_exponent_pinned(params):
    assert math.isclose(auxiliary_scale_exponent(5.0, params), 1.7518764623932581, rel_tol=1e-12)
    assert math.isclose(auxiliary_scale_exponent(-5.0, params), -1.2686338480096246, rel_tol=1e-12)
    p1 = SabrParams(beta=0.9, rho=0.5, omega=1.3, v0=0.1)
    assert math.isclose(auxiliary_scale_exponent(3.0, p1), -1.5010821429224106, rel_tol=1e-12)
    p2 = SabrParams(beta=0.25, rho=0.1, omega=1.0, v0=0.1)
    assert math.isclose(auxiliary_scale_exponent(-2.0, p2), 0.24178765398741803, rel_tol=1e-12)


@pytest.mark.parametrize(
    "beta,rho,omega",
    [(0.5, -0.7, 1.0), (0.9, 0.5, 1.3), (0.25, 0.1, 1.0), (0.75, -0.3, 0.7)],
)
def test_auxiliary_exponent_matches_quadrature(beta, rho, omega):
    p = SabrParams(beta=beta, rho=rho, omega=omega, v0=0.1)
    for x in (-5.0, -1.0, 2.0, 8.0):
        closed = auxiliary_scale_exponent(x, p)
        direct = auxiliary_oracle(x, p)
        assert math.isclose(closed, direct, rel_tol=1e-10, abs_tol=1e-12)


def test_auxiliary_exponent_vanishes_for_beta_zero():
    p = SabrParams(beta=0.0, rho=-0.5, omega=1.2, v0=0.1)
    for x in (-5.0, -1.0, 1.0, 5.0):
        assert auxiliary_scale_exponent(x, p) == pytest.approx(0.0, abs=1e-15)


def test_martingale_diagnostic_true_cases(params):
    assert martingale_diagnostic(params)
    assert martingale_diagnostic(SabrParams(beta=0.0, rho=-0.5, omega=1.2, v0=0.1))
    assert martingale_diagnostic(SabrParams(beta=0.9, rho=0.7, omega=1.0, v0=0.1))


# ---------------------------------------------------------------------------
# quadrature configuration
# ---------------------------------------------------------------------------

@pytest.mark.parametrize(
    "kwargs",
    [
        dict(abs_tol=0.0),
        dict(abs_tol=-1e-12),
        dict(rel_tol=0.0),
        dict(max_subdivisions=0),
        dict(large_x=0.0),
    ],
)
def test_quadrature_config_validation(kwargs):
    with pytest.raises(ValueError):
        QuadratureConfig(**kwargs)


def test_quadrature_config_defaults(quad):
    assert quad.abs_tol == 1e-12
    assert quad.rel_tol == 1e-10
    assert quad.large_x == 1e6
