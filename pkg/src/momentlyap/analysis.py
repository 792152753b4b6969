"""Quantities derived from Lambda(p) and from the stationary law.

The stationary density of a 1D line diffusion is ``exp(int 2 b/a) / a`` up to
normalization; it gives the almost-sure exponent as a quadrature.  The rest
of the module turns tables of Lambda samples into derivatives at zero and a
rate function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .fields import PolyField, ScalarField
from .model import SdeModel


class NotNormalizable(ValueError):
    pass


class NonConvexInput(ValueError):
    pass


@dataclass(frozen=True)
class StationaryDensity1D:
    x: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    normalization_residual: float

    def expect(self, f) -> float:
        vals = f(self.x) if callable(f) else np.asarray(f)
        return float(trapezoid(np.broadcast_to(vals, self.x.shape) * self.density, self.x))

    def cdf(self) -> np.ndarray:
        return cumulative_trapezoid(self.density, self.x, initial=0.0)


def _log_density(model: SdeModel, x: np.ndarray) -> np.ndarray:
    a = model.a_diff
    b = model.ito_drift
    if isinstance(a, PolyField) and a.degree == 0:
        # constant diffusion: the exponent is an exact polynomial
        return (2.0 / a.coeffs[0]) * b.integ()(x) - math.log(a.coeffs[0])
    av = a(x)
    s = cumulative_trapezoid(2 * b(x) / av, x, initial=0.0)
    s -= np.interp(0.0, x, s)
    return s - np.log(av)


def stationary_density(model: SdeModel, n: int = 20001, x_max: Optional[float] = None,
                       drop: float = 60.0) -> StationaryDensity1D:
    """Normalized stationary density on a symmetric grid wide enough to hold its mass.

    The half-width doubles until the log-density at both ends lies ``drop``
    below its peak.
    """
    if model.dim != 1 or model.state_space != "line":
        raise ValueError("stationary_density needs a 1D line model")
    a = model.a_diff
    L = float(x_max) if x_max else 1.0
    while True:
        x = np.linspace(-L, L, n)
        av = a(x)
        if np.any(np.broadcast_to(av, x.shape) <= 0):
            raise ValueError("diffusion coefficient vanishes on the grid")
        ld = _log_density(model, x)
        top = ld.max()
        if x_max is not None or (ld[0] < top - drop and ld[-1] < top - drop):
            break
        L *= 2
        if L > 1e4:
            raise NotNormalizable(f"stationary density of {model.label!r} is not normalizable")
    dens = np.exp(ld - top)
    z = trapezoid(dens, x)
    dens /= z
    return StationaryDensity1D(x, dens, abs(trapezoid(dens, x) - 1.0))


def lambda_as(model: SdeModel, density: Optional[StationaryDensity1D] = None) -> float:
    """Almost-sure exponent: the stationary mean of ``Q_ito``."""
    density = density or stationary_density(model)
    return density.expect(model.Q_ito)


# ---------------------------------------------------------------------------
# derivatives at zero from symmetric stencils


def _check_stencil(ps: np.ndarray, k: int) -> float:
    if ps.size != k:
        raise ValueError(f"expected a {k}-point stencil, got {ps.size} points")
    h = ps[1] - ps[0]
    want = h * (np.arange(k) - (k - 1) / 2)
    if not h > 0 or np.max(np.abs(ps - want)) > 1e-12 * max(1.0, abs(h)):
        raise ValueError("stencil must be equally spaced and symmetric about 0")
    return float(h)


def stencil(h: float, k: int = 5) -> np.ndarray:
    return h * (np.arange(k) - (k - 1) / 2)


def second_derivative_at_zero(ps: Sequence[float], lams: Sequence[float]) -> float:
    """Fourth-order centered second difference on ``(-2h, -h, 0, h, 2h)``."""
    ps = np.asarray(ps, dtype=float)
    f = np.asarray(lams, dtype=float)
    h = _check_stencil(ps, 5)
    return float((-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h))


def first_derivative_at_zero(ps: Sequence[float], lams: Sequence[float]) -> float:
    """Centered difference on ``(-h, h)`` or fourth-order on a five-point stencil."""
    ps = np.asarray(ps, dtype=float)
    f = np.asarray(lams, dtype=float)
    if ps.size == 2:
        if not abs(ps[0] + ps[1]) <= 1e-12 * abs(ps[1]) or not ps[1] > 0:
            raise ValueError("stencil must be symmetric about 0")
        return float((f[1] - f[0]) / (ps[1] - ps[0]))
    h = _check_stencil(ps, 5)
    return float((f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h))


# ---------------------------------------------------------------------------
# rate function


@dataclass(frozen=True)
class RateFunctionTable:
    s: np.ndarray
    I: np.ndarray
    argmax_p: np.ndarray
    boundary_limited: np.ndarray
    p: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)

    def at(self, s: float) -> float:
        return float(np.interp(s, self.s, self.I))

    @property
    def trusted(self) -> np.ndarray:
        return ~self.boundary_limited

    def rows(self):
        for i in range(self.s.size):
            yield [self.s[i], self.I[i], self.argmax_p[i], bool(self.boundary_limited[i])]


RATE_CSV_FIELDS = ("s", "I", "argmax_p", "boundary_limited")


def convexity_defect(ps, lams) -> float:
    from .fkmc import convexity_violation

    return convexity_violation(ps, lams)


def legendre(ps: Sequence[float], lams: Sequence[float], s_grid: Sequence[float],
             slack: float = 1e-8) -> RateFunctionTable:
    """Discrete Legendre transform with a parabolic refinement around each argmax.

    Values whose argmax falls on the end of the p grid are flagged as
    boundary-limited (the true rate there can only be larger).
    """
    ps = np.asarray(ps, dtype=float)
    lam = np.asarray(lams, dtype=float)
    if ps.size < 3 or np.any(np.diff(ps) <= 0):
        raise ValueError("need at least three strictly increasing p samples")
    viol = convexity_defect(ps, lam)
    if viol > slack:
        raise NonConvexInput(f"Lambda samples are not convex (violation {viol:.3e})")
    s_grid = np.atleast_1d(np.asarray(s_grid, dtype=float))
    I = np.empty(s_grid.size)
    arg = np.empty(s_grid.size)
    edge = np.zeros(s_grid.size, dtype=bool)
    for k, s in enumerate(s_grid):
        v = s * ps - lam
        i = int(np.argmax(v))
        if i == 0 or i == ps.size - 1:
            I[k], arg[k], edge[k] = v[i], ps[i], True
            continue
        x0, x1, x2 = ps[i - 1], ps[i], ps[i + 1]
        y0, y1, y2 = v[i - 1], v[i], v[i + 1]
        d0 = (y1 - y0) / (x1 - x0)
        d1 = (y2 - y1) / (x2 - x1)
        c2 = (d1 - d0) / (x2 - x0)
        if c2 < 0:
            # vertex of the parabola through the three samples
            xs = 0.5 * (x0 + x1) - d0 / (2 * c2)
            xs = min(max(xs, x0), x2)
            ys = _parabola(x0, x1, x2, y0, y1, y2, xs)
            I[k], arg[k] = max(ys, y1), xs
        else:
            I[k], arg[k] = y1, x1
    return RateFunctionTable(s_grid, np.maximum(I, 0.0), arg, edge, ps, lam)


def _parabola(x0, x1, x2, y0, y1, y2, x):
    """Lagrange interpolant through three points."""
    return (y0 * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1)))


# ---------------------------------------------------------------------------
# Poisson equation checks


@dataclass(frozen=True)
class PoissonReport:
    residual: float
    channel_residuals: tuple
    lambda_ref: float


def poisson_residual(model: SdeModel, phi1: ScalarField, lambda_ref: float,
                     grid: Optional[np.ndarray] = None) -> PoissonReport:
    """Sup-norm defects of ``Q + L phi1 - lambda_ref`` and of ``q_j + X_j phi1'``."""
    if model.dim != 1:
        raise ValueError("poisson_residual needs a 1D model")
    if grid is None:
        grid = (np.linspace(0, 2 * math.pi, 513) if model.state_space == "circle"
                else np.linspace(-model.scale / 2, model.scale / 2, 1001))
    defect = model.Q_ito + model.generator(phi1) + (-float(lambda_ref))
    d1 = phi1.deriv()
    chans = tuple(float(np.max(np.abs(np.broadcast_to((qj + g * d1)(grid), grid.shape))))
                  for g, qj in zip(model.noise, model.q))
    res = float(np.max(np.abs(np.broadcast_to(defect(grid), grid.shape))))
    return PoissonReport(res, chans, float(lambda_ref))


def variance_identity(model: SdeModel, phi1: ScalarField,
                      density: Optional[StationaryDensity1D] = None) -> float:
    """Stationary mean of ``sum_j (q_j + X_j phi1')^2``, which equals ``Lambda''(0)``."""
    density = density or stationary_density(model)
    d1 = phi1.deriv()
    total = PolyField([0.0])
    for g, qj in zip(model.noise, model.q):
        term = qj + g * d1
        total = total + term * term
    return density.expect(total)
