import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from momentlyap import build_model, make_model, project_linear_2d
from momentlyap.fields import PolyField
from momentlyap.model import twisted_coefficients

from conftest import CATALOG_SPECS

X = np.linspace(-2, 2, 41)
TH = np.linspace(0, 2 * math.pi, 41)


def _grid(model):
    return TH if model.state_space == "circle" else X


@pytest.mark.parametrize("spec", CATALOG_SPECS, ids=lambda s: s["model"])
def test_ito_conversion_against_finite_differences(spec):
    m = build_model(spec)
    x = _grid(m)
    h = 1e-5
    drift = m.drift_strat(x) + sum(0.5 * g(x) * (g(x + h) - g(x - h)) / (2 * h) for g in m.noise)
    Q = m.q0(x) + sum(0.5 * g(x) * (q(x + h) - q(x - h)) / (2 * h) for g, q in zip(m.noise, m.q))
    assert np.allclose(np.broadcast_to(m.ito_drift(x), x.shape), drift, atol=1e-8)
    assert np.allclose(np.broadcast_to(m.Q_ito(x), x.shape), Q, atol=1e-8)


@pytest.mark.parametrize("spec", CATALOG_SPECS, ids=lambda s: s["model"])
def test_twisted_coefficients_at_zero(spec):
    m = build_model(spec)
    tc = twisted_coefficients(m, 0.0)
    x = _grid(m)
    assert np.all(np.broadcast_to(tc.potential(x), x.shape) == 0)
    assert np.allclose(tc.b_drift(x), m.ito_drift(x))
    assert np.all(np.broadcast_to(m.R(x), x.shape) >= 0)


def test_ou_twisted():
    m = build_model({"model": "ou_quadratic", "a": 2.0, "sigma": 1.0})
    tc = twisted_coefficients(m, 0.3)
    assert np.allclose(tc.potential(X), 0.3 * X ** 2)
    assert np.allclose(tc.b_drift(X), -2.0 * X)


def test_pitchfork_corr_twisted():
    a, b, s, rho, p = 0.5, 1.0, 0.8, 0.6, 1.5
    m = build_model({"model": "pitchfork_corr", "a": a, "b": b, "sigma": s, "rho": rho})
    assert np.allclose(m.Y(X), rho * s * X)
    assert np.allclose(m.R(X), X ** 2)
    tc = twisted_coefficients(m, p)
    assert np.allclose(tc.b_drift(X), a * X - b * X ** 3 + p * rho * s * X)
    # the functional is the Ito integral int x dW, so Q_ito carries no drift term
    assert np.allclose(np.broadcast_to(m.Q_ito(X), X.shape), 0.0)


coefs = st.lists(st.floats(-2, 2), min_size=1, max_size=3)


@given(st.lists(st.tuples(coefs, coefs), min_size=2, max_size=3), st.randoms())
def test_channel_reordering_invariance(chans, r):
    drift = PolyField([0.0, -1.0])
    noise = [PolyField(g) for g, _ in chans]
    q = [PolyField(c) for _, c in chans]
    m1 = make_model(drift, noise, PolyField([0.3]), q)
    idx = list(range(len(chans)))
    r.shuffle(idx)
    m2 = make_model(drift, [noise[i] for i in idx], PolyField([0.3]), [q[i] for i in idx])
    assert np.allclose(m1.ito_drift(X), m2.ito_drift(X))
    assert np.allclose(m1.Q_ito(X), m2.Q_ito(X))


def test_projection_isotropic():
    s = 0.7
    m = project_linear_2d(np.zeros((2, 2)), [s * np.eye(2)])
    assert np.allclose(np.broadcast_to(m.drift_strat(TH), TH.shape), 0)
    assert np.allclose(np.broadcast_to(m.noise[0](TH), TH.shape), 0)
    assert np.allclose(np.broadcast_to(m.q[0](TH), TH.shape), s)
    assert np.allclose(np.broadcast_to(m.q0(TH), TH.shape), 0)


def test_projection_hyperbolic():
    mu = 0.8
    m = project_linear_2d(np.diag([mu, -mu]), [])
    assert np.allclose(m.q0(TH), mu * np.cos(2 * TH))
    assert np.allclose(m.drift_strat(TH), -mu * np.sin(2 * TH))


def test_projection_frozen_langevin_block():
    m = project_linear_2d(np.array([[0.0, 1.0], [0.0, 0.0]]), [])
    assert np.allclose(m.q0(TH), np.sin(TH) * np.cos(TH))


@given(st.lists(st.floats(-2, 2), min_size=8, max_size=8))
def test_projection_fields_periodic(vals):
    m = project_linear_2d(np.reshape(vals[:4], (2, 2)), [np.reshape(vals[4:], (2, 2))])
    for f in (m.ito_drift, m.Q_ito, m.drift_strat, m.noise[0], m.q[0], m.q0):
        assert abs(f(0.0) - f(2 * math.pi)) <= 1e-12


def test_build_model_errors():
    with pytest.raises(ValueError):
        build_model({"model": "nope"})
    with pytest.raises(ValueError):
        build_model({"model": "pitchfork_corr", "rho": 2})
    with pytest.raises(ValueError):
        build_model({"model": "custom", "noise_coeffs": "1", "drift_coeffs": " ".join(["1"] * 10)})


def test_custom_model_matches_catalog():
    c = build_model({"model": "custom", "drift_coeffs": "0 -1", "noise_coeffs": "1",
                     "q0_coeffs": "0 0 1"})
    ou = build_model({"model": "ou_quadratic"})
    assert np.allclose(c.ito_drift(X), ou.ito_drift(X))
    assert np.allclose(c.Q_ito(X), ou.Q_ito(X))


def test_langevin_is_3d():
    m = build_model({"model": "langevin", "a": 1, "b": 1, "beta": 1, "sigma": 1})
    assert m.dim == 3
    with pytest.raises(ValueError):
        m.a_diff
