"""Diffusion models with an additive functional.

A model is the Stratonovich SDE

    dx = X_0(x) dt + sum_j X_j(x) o dW^j

together with the functional ``A_t = int q_0(x) ds + sum_j int q_j(x) o dW^j``.
Everything downstream works with the Ito form, which is derived once at
construction time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .fields import MAX_USER_DEGREE, PolyField, ScalarField, TrigField, as_field

CATALOG = (
    "ou_quadratic",
    "ou_linear_degenerate",
    "pitchfork_q2",
    "pitchfork_q4",
    "pitchfork_corr",
    "linear2d_projected",
    "langevin",
)


@dataclass(frozen=True)
class SdeModel:
    """Immutable model description.

    For ``state_space == "langevin"`` the coefficient fields are ``None`` and
    the dynamics are hard-coded in :mod:`momentlyap.pathsim` from ``params``.
    """

    state_space: str
    dim: int
    m: int
    drift_strat: Optional[ScalarField]
    noise: tuple
    q0: Optional[ScalarField]
    q: tuple
    ito_drift: Optional[ScalarField]
    Q_ito: Optional[ScalarField]
    label: str
    params: Mapping = field(default_factory=dict)
    scale: float = 10.0

    @property
    def is_1d(self) -> bool:
        return self.dim == 1

    @property
    def a_diff(self) -> ScalarField:
        """Diffusion coefficient ``sum_j X_j^2`` of the generator."""
        self._require_1d()
        out = self._zero()
        for g in self.noise:
            out = out + g * g
        return out

    @property
    def Y(self) -> ScalarField:
        """Coefficient of the vector field ``Y = sum_j q_j X_j``."""
        self._require_1d()
        out = self._zero()
        for g, qj in zip(self.noise, self.q):
            out = out + qj * g
        return out

    @property
    def R(self) -> ScalarField:
        self._require_1d()
        out = self._zero()
        for qj in self.q:
            out = out + qj * qj
        return out

    def generator(self, g: ScalarField) -> ScalarField:
        """Apply ``L = 1/2 a_diff d^2 + ito_drift d`` to an exact field."""
        self._require_1d()
        return 0.5 * self.a_diff * g.deriv(2) + self.ito_drift * g.deriv()

    def _zero(self) -> ScalarField:
        return TrigField([0.0]) if self.state_space == "circle" else PolyField([0.0])

    def _require_1d(self):
        if self.dim != 1:
            raise ValueError(f"model {self.label!r} has dimension {self.dim}; a 1D model is required")


@dataclass(frozen=True)
class TwistedCoefficients:
    """Coefficients of ``L_p = L + pY + pQ + p^2/2 R`` in 1D."""

    p: float
    a_diff: ScalarField
    b_drift: ScalarField
    potential: ScalarField


def make_model(drift, noise: Sequence, q0, q: Optional[Sequence] = None, *,
               state_space: str = "line", label: str = "custom",
               params: Optional[Mapping] = None, scale: float = 10.0) -> SdeModel:
    """Build a 1D model from Stratonovich data and derive its Ito form."""
    if state_space not in ("line", "circle"):
        raise ValueError(f"unknown state space {state_space!r}")
    circle = state_space == "circle"
    drift = as_field(drift, circle)
    noise = tuple(as_field(g, circle) for g in noise)
    m = len(noise)
    if q is None or len(q) == 0:
        q = [0.0] * m
    if len(q) != m:
        raise ValueError(f"{len(q)} functional coefficients q_j for {m} noise channels")
    q = tuple(as_field(qj, circle) for qj in q)
    q0 = as_field(q0, circle)

    ito = drift
    Q = q0
    for g, qj in zip(noise, q):
        ito = ito + 0.5 * g * g.deriv()
        Q = Q + 0.5 * g * qj.deriv()
    return SdeModel(state_space=state_space, dim=1, m=m, drift_strat=drift, noise=noise,
                    q0=q0, q=q, ito_drift=ito, Q_ito=Q, label=label,
                    params=dict(params or {}), scale=scale)


def twisted_coefficients(model: SdeModel, p: float) -> TwistedCoefficients:
    if model.dim != 1:
        raise ValueError("twisted coefficients are only defined for 1D models")
    p = float(p)
    return TwistedCoefficients(
        p=p,
        a_diff=model.a_diff,
        b_drift=model.ito_drift + p * model.Y,
        potential=p * model.Q_ito + (0.5 * p * p) * model.R,
    )


# ---------------------------------------------------------------------------
# Khas'minskii projection of 2D linear SDEs


def _angle_fields(B) -> tuple[TrigField, TrigField]:
    """Tangential drift <B th, e_th> and radial rate <B th, th> as trig fields."""
    B = np.asarray(B, dtype=float)
    (b11, b12), (b21, b22) = B
    tangential =TrigField([(b21 - b12) / 2, 0.0, (b21 + b12) / 2], [0.0, 0.0, (b22 - b11) / 2])
    radial = TrigField([(b11 + b22) / 2, 0.0, (b11 - b22) / 2], [0.0, 0.0, (b12 + b21) / 2])
    return tangential, radial


def project_linear_2d(B0, B: Sequence, label: str = "linear2d_projected") -> SdeModel:
    """Angle diffusion and log-norm functional of ``dv = B0 v dt + sum B_j v o dW^j``.

    The state is the angle ``theta`` with ``v/|v| = (cos theta, sin theta)``.
    """
    B0 = np.asarray(B0, dtype=float)
    mats = [np.asarray(b, dtype=float) for b in B]
    for mat in [B0, *mats]:
        if mat.shape != (2, 2):
            raise ValueError(f"expected 2x2 matrices, got shape {mat.shape}")
    drift, q0 = _angle_fields(B0)
    noise, q = [], []
    for mat in mats:
        g, qj = _angle_fields(mat)
        noise.append(g)
        q.append(qj)
    params = {"B0": B0.tolist(), "B": [mat.tolist() for mat in mats]}
    return make_model(drift, noise, q0, q, state_space="circle", label=label, params=params,
                      scale=2 * math.pi)


# ---------------------------------------------------------------------------
# catalog


def _langevin(a: float, b: float, beta: float, sigma: float) -> SdeModel:
    if b <= 0 or beta <= 0 or sigma == 0:
        raise ValueError("langevin model needs b > 0, beta > 0, sigma != 0")
    return SdeModel(state_space="langevin", dim=3, m=1, drift_strat=None, noise=(),
                    q0=None, q=(), ito_drift=None, Q_ito=None, label="langevin",
                    params={"a": a, "b": b, "beta": beta, "sigma": sigma}, scale=10.0)


def _matrix(value) -> np.ndarray:
    if isinstance(value, str):
        value = [float(v) for v in value.replace(",", " ").split()]
    arr = np.asarray(value, dtype=float)
    if arr.size != 4:
        raise ValueError(f"2x2 matrix needs 4 entries, got {arr.size}")
    return arr.reshape(2, 2)


def _coeff_list(value) -> list:
    """Parse ``"1 0 -1"`` or ``"1; 0 2"`` style coefficient strings."""
    if isinstance(value, str):
        return [[float(v) for v in part.replace(",", " ").split()] for part in value.split(";")]
    value = list(value)
    if value and np.isscalar(value[0]):
        return [list(map(float, value))]
    return [list(map(float, v)) for v in value]


def build_model(spec: Mapping) -> SdeModel:
    """Build a catalog or custom 1D polynomial model from a flat mapping.

    ``spec["model"]`` names a catalog entry, or is ``"custom"`` with
    ``drift_coeffs``, ``noise_coeffs``, ``q0_coeffs`` and optional ``q_coeffs``.
    """
    name = str(spec.get("model", "")).strip()

    def num(key, default):
        return float(spec.get(key, default))

    a = num("a", 1.0)
    b = num("b", 1.0)
    sigma = num("sigma", 1.0)
    x = PolyField.x()

    if name == "ou_quadratic":
        if a <= 0:
            raise ValueError("ou_quadratic needs a > 0")
        return make_model(-a * x, [sigma], x * x, label=name,
                          params={"family": "ou", "a": a, "sigma": sigma})
    if name == "ou_linear_degenerate":
        if a <= 0:
            raise ValueError("ou_linear_degenerate needs a > 0")
        return make_model(-a * x, [sigma], a * x, [-sigma], label=name,
                          params={"family": "ou_degenerate", "a": a, "sigma": sigma})
    if name in ("pitchfork_q2", "pitchfork_q4"):
        if b <= 0:
            raise ValueError("pitchfork models need b > 0")
        Q = x * x if name == "pitchfork_q2" else x ** 4
        return make_model(a * x - b * x ** 3, [sigma], Q, label=name,
                          params={"family": name[-2:], "a": a, "b": b, "sigma": sigma})
    if name == "pitchfork_corr":
        rho = num("rho", 1.0)
        if not -1.0 <= rho <= 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {rho}")
        if b <= 0:
            raise ValueError("pitchfork models need b > 0")
        # the functional is an Ito integral, so the Stratonovich q0 cancels the correction
        return make_model(a * x - b * x ** 3, [sigma, 0.0], -0.5 * rho * sigma,
                          [rho * x, math.sqrt(max(0.0, 1.0 - rho * rho)) * x], label=name,
                          params={"family": "corr", "a": a, "b": b, "sigma": sigma, "rho": rho})
    if name == "linear2d_projected":
        if "b0" in spec or "b1" in spec:
            B0 = _matrix(spec.get("b0", "0 0 0 0"))
            mats = []
            j = 1
            while f"b{j}" in spec:
                mats.append(_matrix(spec[f"b{j}"]))
                j += 1
        else:
            B0 = np.zeros((2, 2))
            mats = [sigma * np.eye(2)]
        return project_linear_2d(B0, mats)
    if name == "langevin":
        return _langevin(a, b, num("beta", 1.0), sigma)
    if name == "custom":
        state_space = str(spec.get("state_space", "line"))
        drift = _coeff_list(spec.get("drift_coeffs", "0"))[0]
        noise = _coeff_list(spec["noise_coeffs"])
        q0 = _coeff_list(spec.get("q0_coeffs", "0"))[0]
        q = _coeff_list(spec["q_coeffs"]) if "q_coeffs" in spec else None
        for arr in [drift, q0, *noise, *(q or [])]:
            if len(arr) - 1 > MAX_USER_DEGREE:
                raise ValueError(f"polynomial degree {len(arr) - 1} exceeds {MAX_USER_DEGREE}")
        return make_model(drift, noise, q0, q, state_space=state_space, label="custom")
    raise ValueError(f"unknown catalog model {name!r}; choose from {', '.join(CATALOG)} or custom")
