import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from momentlyap import build_model, project_linear_2d
from momentlyap.analysis import (NonConvexInput, first_derivative_at_zero, lambda_as, legendre,
                                 poisson_residual, second_derivative_at_zero, stationary_density,
                                 stencil, variance_identity)
from momentlyap.fields import PolyField
from momentlyap.fkmc import clt_sample
from momentlyap.pathsim import simulate_batch
from momentlyap.rng import RngPolicy
from momentlyap.spectral import GridSpec, default_weight, refine_and_validate, solve

LINE_SPECS = [
    {"model": "ou_quadratic"},
    {"model": "ou_linear_degenerate"},
    {"model": "pitchfork_q2", "a": 0.0},
    {"model": "pitchfork_q4", "a": 0.5},
    {"model": "pitchfork_corr", "a": 0.0, "rho": 0.5},
]


def test_ou_density_is_gaussian(ou):
    d = stationary_density(ou)
    assert np.max(np.abs(d.density - stats.norm.pdf(d.x, scale=math.sqrt(0.5)))) < 1e-6
    assert d.normalization_residual < 1e-8
    assert np.all(d.density >= 0)
    assert abs(d.cdf()[-1] - 1) < 1e-8


@pytest.mark.parametrize("spec", LINE_SPECS, ids=lambda s: s["model"])
def test_symmetric_density_is_even(spec):
    d = stationary_density(build_model(spec))
    assert np.max(np.abs(d.density - d.density[::-1])) < 1e-10


def test_pitchfork_density_matches_long_run_histogram(pitchfork):
    d = stationary_density(pitchfork)
    b = simulate_batch(pitchfork, 0.0, 10.0, 2000, 100_000, RngPolicy(3), scheme="heun")
    cdf = d.cdf()
    ks = stats.kstest(b.x_final, lambda v: np.interp(v, d.x, cdf)).statistic
    assert ks < 0.02


def test_not_normalizable():
    m = build_model({"model": "custom", "drift_coeffs": "0 1", "noise_coeffs": "1"})
    from momentlyap.analysis import NotNormalizable
    with pytest.raises(NotNormalizable):
        stationary_density(m)


def test_lambda_as(ou, degenerate):
    assert lambda_as(ou) == pytest.approx(0.5, abs=1e-8)
    assert abs(lambda_as(degenerate)) < 1e-10


def test_spectral_derivative_matches_lambda_as(ou):
    lam = [solve(ou, p, GridSpec.interval(6.0, 1200)).lam for p in (-0.01, 0.01)]
    d = first_derivative_at_zero([-0.01, 0.01], lam)
    assert abs(d - lambda_as(ou)) <= 1e-3


def _richardson_stencil(model, h, grid):
    st_ = stencil(h)
    return st_, [refine_and_validate(model, p, None, grid)[1].richardson for p in st_]


def test_second_derivative_ou(ou):
    ps, lams = _richardson_stencil(ou, 0.05, GridSpec.interval(6.0, 599))
    assert second_derivative_at_zero(ps, lams) == pytest.approx(0.5, abs=1e-3)
    assert first_derivative_at_zero(ps, lams) == pytest.approx(0.5, abs=1e-4)


def test_second_derivative_degenerate(degenerate):
    ps, lams = _richardson_stencil(degenerate, 0.25, GridSpec.interval(8.0, 799))
    assert abs(second_derivative_at_zero(ps, lams)) <= 1e-6


def test_second_derivative_isotropic():
    s = 0.9
    m = project_linear_2d(np.zeros((2, 2)), [s * np.eye(2)])
    ps = stencil(0.1)
    lams = [solve(m, p, GridSpec.circle(32)).lam for p in ps]
    assert second_derivative_at_zero(ps, lams) == pytest.approx(s * s, abs=1e-8)


def test_stencil_validation():
    with pytest.raises(ValueError):
        second_derivative_at_zero([-0.2, -0.1, 0.0, 0.1, 0.3], np.zeros(5))
    with pytest.raises(ValueError):
        second_derivative_at_zero([-0.1, 0.0, 0.1], np.zeros(3))


@given(st.floats(0.1, 3), st.floats(-1, 1), st.floats(-2, 2))
def test_derivatives_of_exact_quadratic(c2, c1, c0):
    ps = stencil(0.1)
    f = c0 + c1 * ps + 0.5 * c2 * ps ** 2
    assert second_derivative_at_zero(ps, f) == pytest.approx(c2, abs=1e-8)
    assert first_derivative_at_zero(ps, f) == pytest.approx(c1, abs=1e-10)


def ou_lambda(p):
    return 0.5 * (1 - np.sqrt(1 - 2 * p))


def test_legendre_ou_closed_form():
    ps = np.linspace(-1.0, 0.45, 59)
    tab = legendre(ps, ou_lambda(ps), [0.5, 1.0, 3.0])
    assert tab.at(1.0) == pytest.approx(0.125, abs=2e-3)
    assert tab.argmax_p[1] == pytest.approx(0.375, abs=0.03)
    assert abs(tab.I[0]) <= 1e-4
    assert tab.boundary_limited[2] and not tab.boundary_limited[1]
    assert list(tab.trusted) == [True, True, False]
    assert len(next(tab.rows())) == 4


def test_legendre_touches_zero_at_mean():
    ps = np.linspace(-1.0, 0.45, 59)
    s = np.array([0.5 - 1e-3, 0.5, 0.5 + 1e-3])
    tab = legendre(ps, ou_lambda(ps), s)
    assert tab.I[1] <= 1e-4
    # flat at the minimum: one-sided slopes vanish with the step
    assert abs(tab.I[2] - tab.I[0]) / 2e-3 < 1e-2


def test_legendre_degenerate_linear():
    ps = np.linspace(-1, 1, 21)
    tab = legendre(ps, 0.0 * ps, [-0.5, 0.0, 0.5])
    assert tab.I[1] == 0.0
    assert tab.boundary_limited[0] and tab.boundary_limited[2]


def test_legendre_rejects_nonconvex():
    ps = np.linspace(-1, 1, 9)
    with pytest.raises(NonConvexInput):
        legendre(ps, -ps ** 2, [0.0])


@given(st.floats(0.2, 3), st.floats(-1, 1), st.lists(st.floats(-2, 2), min_size=3, max_size=12,
                                                       unique=True))
def test_rate_function_nonnegative_and_convex(c, m, s_vals):
    ps = np.linspace(-2, 2, 81)
    lam = m * ps + 0.5 * c * ps ** 2
    s = np.sort(np.array(s_vals))
    tab = legendre(ps, lam, s)
    assert np.all(tab.I >= 0)
    ok = tab.trusted
    if ok.sum() >= 3:
        si, Ii = s[ok], tab.I[ok]
        from momentlyap.fkmc import convexity_violation
        assert convexity_violation(si, Ii) <= 1e-3 * (1 + Ii.max())
        # exact transform of a parabola
        assert np.allclose(Ii, (si - m) ** 2 / (2 * c), atol=2e-3 * (1 + Ii.max()))


@pytest.mark.parametrize("spec", LINE_SPECS, ids=lambda s: s["model"])
def test_gartner_ellis_loop(spec):
    m = build_model(spec)
    lam_as = lambda_as(m)
    ps = np.linspace(-0.4, 0.4, 33)
    g = GridSpec.interval(6.0, 1200)
    w = default_weight(m, ps[-1])
    lams = [solve(m, p, g, w).lam for p in ps]
    tab = legendre(ps, lams, [lam_as], slack=1e-6)
    assert abs(tab.I[0]) <= 1e-4


def test_clt_loop(ou):
    ps, lams = _richardson_stencil(ou, 0.05, GridSpec.interval(6.0, 599))
    d2 = second_derivative_at_zero(ps, lams)
    s = clt_sample(ou, 50.0, 0.0, 10_000, 5000, RngPolicy(20240101), 0.5, s2=d2)
    assert s.variance == pytest.approx(d2, rel=0.1)


def test_poisson_degenerate(degenerate):
    rep = poisson_residual(degenerate, PolyField.x(), 0.0)
    assert rep.residual == 0.0 and rep.channel_residuals == (0.0,)


def test_poisson_ou(ou):
    x = PolyField.x()
    phi = 0.5 * x * x + (-0.3)
    assert poisson_residual(ou, phi, 0.5).residual < 1e-12
    grid = np.linspace(-3, 3, 61)
    rep0 = poisson_residual(ou, PolyField([0.0]), 0.5, grid)
    assert rep0.residual == pytest.approx(np.max(np.abs(grid ** 2 - 0.5)))


def test_variance_identity(ou, degenerate):
    x = PolyField.x()
    assert variance_identity(degenerate, x) == pytest.approx(0.0, abs=1e-12)
    assert variance_identity(ou, 0.5 * x * x) == pytest.approx(0.5, abs=1e-4)
