import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momentlyap import build_model, project_linear_2d
from momentlyap.bounds import LyapunovWeight
from momentlyap.fkmc import convexity_violation
from momentlyap.spectral import (EigenSolveError, GridSpec, InadmissibleWeight, SPECTRAL_CSV_FIELDS,
                                 assemble, default_weight, principal_eigpair, refine_and_validate,
                                 solve)

OU_GRID = GridSpec.interval(6.0, 1200)
HALF = LyapunovWeight("exp_quadratic", 0.5)


def ou_exact(p, a=1.0, s=1.0):
    return 0.5 * (a - math.sqrt(a * a - 2 * p * s * s))


def test_grid_spec():
    g = GridSpec.interval(6.0, 1199)
    assert g.nodes.size == 1199 and g.spacing == pytest.approx(12 / 1200)
    assert g.refined(1).n == 2399
    assert np.allclose(g.refined(1).nodes[1::2], g.nodes)
    c = GridSpec.circle(64)
    assert c.periodic and c.nodes.size == 64
    with pytest.raises(ValueError):
        GridSpec.interval(6.0, 8)


@pytest.mark.parametrize("p", [-1.0, 0.0, 0.2, 0.375, 0.45])
def test_ou_closed_form(ou, p):
    r = solve(ou, p, OU_GRID, HALF)
    assert r.lam == pytest.approx(ou_exact(p), abs=1e-4)
    assert r.min_eigvec > 0
    assert r.residual <= 1e-9


def test_ou_eigvec_shape(ou):
    r = solve(ou, 0.375, OU_GRID, HALF)
    m = np.abs(r.x) <= 3
    h = r.eigvec / r.eigvec[np.argmin(np.abs(r.x))]
    assert np.max(np.abs(h[m] - np.exp(-0.25 * r.x[m] ** 2))) < 1e-4
    assert len(r.csv_row()) == len(SPECTRAL_CSV_FIELDS)


def test_ou_potential_identity(ou):
    # H_p applied to a constant is a/2 + (p - a^2/(2 sigma^2)) x^2 for gamma = a/(2 sigma^2)
    op = assemble(ou, 0.375, OU_GRID, HALF)
    rows = op.row_sums()[1:-1]
    assert np.allclose(rows, 0.5 + (0.375 - 0.5) * op.x[1:-1] ** 2, atol=1e-9)
    assert np.allclose(op.potential, 0.375 * op.x ** 2)


def test_offdiagonals_nonnegative_and_upwinding(pitchfork):
    op = assemble(pitchfork, 2.0, GridSpec.interval(6.0, 200), LyapunovWeight("exp_quadratic", 1.0))
    assert op.min_offdiag >= 0
    assert op.upwinded.any()
    # rows flagged are exactly where the cell Peclet number exceeds 2
    up = op.upwinded
    assert np.all(np.abs(op.x[up]) > np.abs(op.x[~up]).min())


def test_inadmissible_weight_refused(ou):
    with pytest.raises(InadmissibleWeight):
        assemble(ou, 0.6, OU_GRID, HALF)


def test_conjugation_invariance(ou):
    r1 = solve(ou, 0.3, OU_GRID, LyapunovWeight("exp_quadratic", 0.45))
    r2 = solve(ou, 0.3, OU_GRID, HALF)
    assert abs(r1.lam - r2.lam) <= 10 * max(r1.residual, r2.residual) + 2e-5


@pytest.mark.parametrize("p", [0.5, 1.0, 2.0])
def test_isotropic_circle(p):
    s = 1.3
    m = project_linear_2d(np.zeros((2, 2)), [s * np.eye(2)])
    r = solve(m, p, GridSpec.circle(64))
    assert r.lam == pytest.approx(p * p * s * s / 2, abs=1e-8)


@settings(max_examples=10)
@given(st.lists(st.floats(-1.5, 1.5), min_size=8, max_size=8))
def test_circle_p_zero_constant_kernel(vals):
    m = project_linear_2d(np.reshape(vals[:4], (2, 2)), [np.eye(2) + np.reshape(vals[4:], (2, 2))])
    op = assemble(m, 0.0, GridSpec.circle(128))
    assert np.max(op.row_sums()) <= 1e-12
    r = principal_eigpair(op, tol=1e-12)
    assert abs(r.lam) <= 1e-8
    assert r.eigvec.max() / r.eigvec.min() - 1 <= 1e-6


@settings(max_examples=4)
@given(st.sampled_from(["ou_quadratic", "pitchfork_q2", "pitchfork_q4", "pitchfork_corr"]),
       st.floats(-1.0, 0.4))
def test_positivity_and_convexity(name, p0):
    m = build_model({"model": name, "a": 1.0, "b": 1.0, "sigma": 1.0, "rho": 0.5})
    ps = p0 + np.linspace(0, 0.05, 9)
    g = GridSpec.interval(5.0, 400)
    w = default_weight(m, ps[-1])
    res = [solve(m, p, g, w) for p in ps]
    assert min(r.min_eigvec for r in res) > 0
    assert convexity_violation(ps, [r.lam for r in res]) <= 1e-6


def test_inverse_and_power_agree(ou):
    op = assemble(ou, 0.2, GridSpec.interval(6.0, 150), HALF)
    a = principal_eigpair(op, tol=1e-10)
    b = principal_eigpair(op, tol=1e-10, method="power")
    assert a.lam == pytest.approx(b.lam, abs=1e-7)
    dense = np.linalg.eigvals(op.dense())
    assert a.lam == pytest.approx(dense.real.max(), abs=1e-8)


def test_nonconvergence_raises(ou):
    op = assemble(ou, 0.2, GridSpec.interval(6.0, 150), HALF)
    with pytest.raises(EigenSolveError):
        principal_eigpair(op, tol=1e-14, max_iter=2, method="power")


def test_refine_and_validate_ou(ou):
    res, rep = refine_and_validate(ou, 0.375, HALF, GridSpec.interval(6.0, 300))
    assert 1.5 <= rep.observed_order <= 2.5
    assert rep.domain_sensitivity < 1e-5 or rep.domain_sensitivity < abs(rep.lambdas[0] - rep.lambdas[1])
    assert rep.richardson == pytest.approx(0.25, abs=1e-6)
    assert rep.monotone


def test_refine_and_validate_circle():
    m = project_linear_2d(np.diag([0.5, -0.5]), [np.eye(2)])
    _, rep = refine_and_validate(m, 1.0, None, GridSpec.circle(32))
    assert rep.domain_sensitivity is None and rep.domain_sensitivity_text == "n/a"


def test_default_weight_ou(ou):
    assert default_weight(ou, 0.375).param == pytest.approx(0.5)
    w = default_weight(ou, 0.49)
    assert w.family == "exp_quadratic"
