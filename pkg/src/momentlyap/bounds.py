"""Lyapunov weights, the growth-condition checker and two-sided bounds on Lambda(p).

For a weight ``V = e^U`` the twisted generator satisfies

    L_p V / V = 1/2 a (U'' + U'^2) + b U' + pot

with ``a`` the diffusion coefficient, ``b`` the twisted drift and ``pot`` the
twisted potential.  For the catalog weights this is a polynomial (or a
rational function for ``(1+x^2)^alpha``), so tails and suprema are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq, minimize_scalar

from .fields import PolyField
from .model import SdeModel, build_model, twisted_coefficients

FAMILIES = ("exp_quadratic", "exp_quartic", "poly")
BETA_MENU = (2.0, 1.5, 1.25, 1.1, 1.05, 1.01, 1.001)


@dataclass(frozen=True)
class RationalField:
    """``num/den`` with ``den > 0`` on the real line."""

    num: PolyField
    den: PolyField

    def __call__(self, x):
        return self.num(x) / self.den(x)

    def tail(self, side: int) -> float:
        """Limit as ``x -> side * inf`` (``side`` is +1 or -1)."""
        excess = self.num.degree - self.den.degree
        lead = self.num.leading / self.den.leading
        if self.num.is_zero():
            return 0.0
        if excess < 0:
            return 0.0
        if excess == 0:
            return lead
        return math.copysign(math.inf, lead * side ** excess)

    def critical_points(self) -> np.ndarray:
        d = P.polysub(P.polymul(self.num.deriv().coeffs, self.den.coeffs),
                      P.polymul(self.num.coeffs, self.den.deriv().coeffs))
        d = P.polytrim(d, 0.0) if np.any(d != 0) else np.zeros(1)
        if d.size < 2:
            return np.empty(0)
        r = P.polyroots(d)
        return np.real(r[np.abs(np.imag(r)) <= 1e-9 * (1 + np.abs(r))])

    def sup(self) -> float:
        tails = [self.tail(1), self.tail(-1)]
        if max(tails) == math.inf:
            return math.inf
        cands = [t for t in tails if math.isfinite(t)]
        crit = self.critical_points()
        if crit.size:
            cands.extend(self(crit).tolist())
        cands.append(float(self(0.0)))
        return float(max(cands))


@dataclass(frozen=True)
class LyapunovWeight:
    """``V = e^{gamma x^2}``, ``e^{gamma x^4}``, ``(1+x^2)^alpha`` or the unit weight."""

    family: str
    param: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES + ("unit",):
            raise ValueError(f"unknown weight family {self.family!r}")
        if self.family != "unit" and not self.param > 0:
            raise ValueError(f"weight parameter must be positive, got {self.param}")

    @classmethod
    def unit(cls) -> "LyapunovWeight":
        return cls("unit", 0.0)

    @property
    def is_unit(self) -> bool:
        return self.family == "unit"

    def scaled(self, beta: float) -> "LyapunovWeight":
        """The weight ``V^beta``."""
        return self if self.is_unit else LyapunovWeight(self.family, self.param * beta)

    def U(self, x):
        x = np.asarray(x, dtype=float)
        c = self.param
        if self.family == "exp_quadratic":
            return c * x * x
        if self.family == "exp_quartic":
            return c * x ** 4
        if self.family == "poly":
            return c * np.log1p(x * x)
        return np.zeros_like(x)

    def dU(self, x):
        x = np.asarray(x, dtype=float)
        c = self.param
        if self.family == "exp_quadratic":
            return 2 * c * x
        if self.family == "exp_quartic":
            return 4 * c * x ** 3
        if self.family == "poly":
            return 2 * c * x / (1 + x * x)
        return np.zeros_like(x)

    def d2U(self, x):
        x = np.asarray(x, dtype=float)
        c = self.param
        if self.family == "exp_quadratic":
            return np.full_like(x, 2 * c)
        if self.family == "exp_quartic":
            return 12 * c * x * x
        if self.family == "poly":
            return 2 * c * (1 - x * x) / (1 + x * x) ** 2
        return np.zeros_like(x)

    def V(self, x):
        return np.exp(self.U(x))

    def ratio(self, model: SdeModel, p: float) -> RationalField:
        """``L_p V / V`` in closed form."""
        _require_line(model)
        tc = twisted_coefficients(model, p)
        a, b, pot = tc.a_diff, tc.b_drift, tc.potential
        x = PolyField.x()
        c = self.param
        if self.family == "unit":
            return RationalField(pot, PolyField([1.0]))
        if self.family == "poly":
            s = 1.0 + x * x
            num = (0.5 * a * (2 * c * (1.0 - x * x) + 4 * c * c * x * x)
                   + (2 * c) * x * s * b + pot * s * s)
            return RationalField(num, s * s)
        u = x * x if self.family == "exp_quadratic" else x ** 4
        du, d2u = c * u.deriv(), c * u.deriv(2)
        return RationalField(0.5 * a * (d2u + du * du) + b * du + pot, PolyField([1.0]))

    def describe(self) -> str:
        return "unit" if self.is_unit else f"{self.family}({self.param:.6g})"


def _require_line(model: SdeModel):
    if model.dim != 1 or model.state_space != "line":
        raise ValueError(f"model {model.label!r} is not a 1D line model")


@dataclass(frozen=True)
class GrowthReport:
    p: float
    weight: LyapunovWeight
    gamma_sup: float
    tail_trend: float
    cond0_sup: float
    cond2_sup: float
    cond3_sup: float
    beta2: Optional[float]
    beta3: Optional[float]
    verdicts: dict = field(default_factory=dict)

    @property
    def tail_ok(self) -> bool:
        return self.verdicts.get("1", False)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


def default_scan(model: SdeModel, n: int = 401) -> np.ndarray:
    return np.linspace(-model.scale, model.scale, n)


def _tail_trend(x: np.ndarray, v: np.ndarray) -> float:
    """Least negative slope of ``v`` against ``|x|`` over the outer fifth on either side."""
    r = np.abs(x)
    cut = 0.8 * r.max()
    slopes = []
    for side in (x > 0, x < 0):
        m = side & (r >= cut)
        if m.sum() >= 2 and np.all(np.isfinite(v[m])):
            slopes.append(np.polyfit(r[m], v[m], 1)[0])
    return float(max(slopes)) if slopes else float("nan")


def _first_beta(make_ratio) -> tuple[Optional[float], float]:
    for beta in BETA_MENU:
        s = make_ratio(beta).sup()
        if s < math.inf:
            return beta, s
    return None, math.inf


def check_growth(model: SdeModel, weight: LyapunovWeight, p: float,
                 scan: Optional[np.ndarray] = None) -> GrowthReport:
    """Audit conditions (0)-(3) of the growth assumption for one weight and one p.

    Conditions (2) and (3) report the largest passing ``beta`` from the menu.
    """
    _require_line(model)
    scan = default_scan(model) if scan is None else np.asarray(scan, dtype=float)
    r = weight.ratio(model, p)
    vals = r(scan)
    gamma_sup = max(r.sup(), float(np.max(vals)))
    cond0 = weight.ratio(model, 0.0).sup()
    cond1 = r.tail(1) == -math.inf and r.tail(-1) == -math.inf
    beta2, s2 = _first_beta(lambda b: weight.ratio(model, b * p))
    beta3, s3 = _first_beta(lambda b: weight.scaled(b).ratio(model, p))
    verdicts = {"0": cond0 < math.inf, "1": bool(cond1), "2": beta2 is not None,
                "3": beta3 is not None}
    return GrowthReport(float(p), weight, float(gamma_sup), _tail_trend(scan, vals), float(cond0),
                        float(s2), float(s3), beta2, beta3, verdicts)


def param_grid(p: float, n: int = 400) -> np.ndarray:
    return np.geomspace(1e-4, 1e3 * max(1.0, abs(p)), n)


def find_admissible(model: SdeModel, p: float, family: str = "exp_quadratic",
                    params: Optional[Sequence[float]] = None) -> list:
    """Weights of ``family`` (over a log-spaced parameter grid) passing every condition."""
    params = param_grid(p) if params is None else params
    out = []
    for c in params:
        w = LyapunovWeight(family, float(c))
        rep = check_growth(model, w, p, scan=np.linspace(-1.0, 1.0, 3))
        if rep.passed:
            out.append(rep)
    return out


class NoAdmissibleWeight(ValueError):
    pass


def upper_bound(model: SdeModel, p: float, family: str = "exp_quadratic",
                params: Optional[Sequence[float]] = None) -> tuple[float, LyapunovWeight]:
    """Smallest ``sup L_pV/V`` over admissible weights of one family."""
    reps = find_admissible(model, p, family, params)
    if not reps:
        raise NoAdmissibleWeight(f"no admissible {family} weight for p = {p}")
    vals = np.array([r.gamma_sup for r in reps])
    cs = np.array([r.weight.param for r in reps])
    i = int(np.argmin(vals))
    best, best_c = float(vals[i]), float(cs[i])
    lo = math.log(cs[max(i - 1, 0)])
    hi = math.log(cs[min(i + 1, cs.size - 1)])
    if hi > lo:
        def obj(lc):
            w = LyapunovWeight(family, math.exp(lc))
            r = w.ratio(model, p)
            if not (r.tail(1) == -math.inf and r.tail(-1) == -math.inf):
                return math.inf
            return r.sup()

        res = minimize_scalar(obj, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        if res.fun < best:
            best, best_c = float(res.fun), float(math.exp(res.x))
    return best, LyapunovWeight(family, best_c)


# ---------------------------------------------------------------------------
# lower bounds from the test functions g = (x^2)^A on the pitchfork families


def lower_q2(A, p, a=0.0, b=1.0, sigma=1.0):
    """``inf_x L_p g / g`` for ``Q = x^2``; finite only when ``2Ab < p``."""
    A = np.asarray(A, dtype=float)
    k = p - 2 * A * b
    with np.errstate(invalid="ignore"):
        val = 2 * A * a + 2 * np.sqrt(k) * np.sqrt(sigma ** 2 * A * (2 * A - 1))
    return np.where(k > 0, val, -np.inf)


def lower_corr(A, p, a=0.0, b=1.0, sigma=1.0, rho=1.0):
    """Same for the Ito functional ``int x dB`` with noise correlation ``rho``; needs ``4Ab < p^2``."""
    A = np.asarray(A, dtype=float)
    k = 0.5 * p * p - 2 * A * b
    with np.errstate(invalid="ignore"):
        val = 2 * A * (a + rho * p * sigma) + 2 * np.sqrt(k) * np.sqrt(sigma ** 2 * A * (2 * A - 1))
    return np.where(k > 0, val, -np.inf)


def lower_q4(A, p, a=0.0, b=1.0, sigma=1.0):
    """``inf_{y>0} 2Aa - 2Aby + s^2 A(2A-1)/y + p y^2`` for ``Q = x^4`` (``y = x^2``)."""
    out = []
    for Ai in np.atleast_1d(np.asarray(A, dtype=float)):
        c = sigma ** 2 * Ai * (2 * Ai - 1)
        if p <= 0:
            out.append(-np.inf)
            continue
        # the stationarity cubic 2p y^3 - 2Ab y^2 - c = 0 has one positive root
        roots = np.roots([2 * p, -2 * Ai * b, 0.0, -c])
        y = max(r.real for r in roots if abs(r.imag) <= 1e-9 * (1 + abs(r)))
        if y <= 0:
            out.append(2 * Ai * a)
            continue
        out.append(2 * Ai * a - 2 * Ai * b * y + c / y + p * y * y)
    return np.array(out) if np.ndim(A) else out[0]


def _lower_family(model: SdeModel):
    pr = model.params
    fam = pr.get("family")
    if fam not in ("q2", "q4", "corr"):
        raise ValueError(f"lower bounds are implemented for the pitchfork family only, "
                         f"not {model.label!r}")
    kw = dict(a=pr["a"], b=pr["b"], sigma=pr["sigma"])
    if fam == "corr":
        kw["rho"] = pr["rho"]
    return fam, kw


def _lower_fn(fam):
    return {"q2": lower_q2, "q4": lower_q4, "corr": lower_corr}[fam]


def _a_max(fam, p, b, sigma):
    if fam == "q2":
        return p / (2 * b)
    if fam == "corr":
        return p * p / (4 * b)
    return max(10.0, 4.0 * (8 * sigma ** 2 / (9 * b ** 3)) * p * p)


def lower_bound(model: SdeModel, p: float,
                A_grid: Optional[Sequence[float]] = None) -> tuple[float, float]:
    """Largest certified ``inf L_p g/g`` over test exponents ``A > 1``.

    Returns ``(-inf, nan)`` when no test exponent is admissible.
    """
    fam, kw = _lower_family(model)
    fn = _lower_fn(fam)
    if A_grid is not None:
        A = np.asarray([x for x in A_grid if x > 1.0], dtype=float)
        if A.size == 0:
            return -math.inf, math.nan
        v = np.asarray(fn(A, p, **kw), dtype=float)
        i = int(np.argmax(v))
        return float(v[i]), float(A[i]) if np.isfinite(v[i]) else math.nan
    hi = _a_max(fam, p, kw["b"], kw["sigma"])
    if hi <= 1.0:
        return -math.inf, math.nan
    # the optimum sits near the top of the range for Q = x^2 but can be close
    # to A = 1 for the correlated case, so use both spacings
    A = np.union1d(1.0 + (hi - 1.0) * np.linspace(0.0, 1.0, 401)[1:-1],
                   np.geomspace(1.0 + 1e-9, hi, 401)[:-1])
    v = np.asarray(fn(A, p, **kw), dtype=float)
    i = int(np.argmax(v))
    best, best_A = float(v[i]), float(A[i])
    lo_b, hi_b = A[max(i - 1, 0)], A[min(i + 1, A.size - 1)]
    res = minimize_scalar(lambda x: -float(fn(x, p, **kw)), bounds=(lo_b, hi_b),
                          method="bounded", options={"xatol": 1e-10 * max(1.0, hi_b)})
    if -res.fun > best and res.x > 1.0:
        best, best_A = float(-res.fun), float(res.x)
    return best, best_A


@dataclass(frozen=True)
class BoundsReport:
    p: float
    upper: float
    upper_argmin: Optional[LyapunovWeight]
    lower: float
    lower_argmax: float

    @property
    def sandwich_ok(self) -> bool:
        if math.isfinite(self.upper) and math.isfinite(self.lower):
            return self.lower <= self.upper
        return True

    def contains(self, value: float, slack: float = 1e-6) -> bool:
        return self.lower - slack <= value <= self.upper + slack


def bounds_report(model: SdeModel, p: float, family: str = "exp_quadratic",
                  A_grid: Optional[Sequence[float]] = None) -> BoundsReport:
    try:
        up, w = upper_bound(model, p, family)
    except NoAdmissibleWeight:
        up, w = math.inf, None
    try:
        lo, A = lower_bound(model, p, A_grid)
    except ValueError:
        lo, A = -math.inf, math.nan
    return BoundsReport(float(p), up, w, lo, A)


# ---------------------------------------------------------------------------
# large-p constants


def corr_constant(rho: float, b: float = 1.0, sigma: float = 1.0) -> float:
    s = math.sqrt(3 + rho * rho)
    return (s + 2 * rho) ** 2 * (s - rho) * sigma / (27 * b)


def limit_constant(scenario: str, a=0.0, b=1.0, sigma=1.0, rho=1.0):
    """Exponent and limit constant of ``Lambda(p)/p^k`` as ``p -> inf``.

    For ``ito_x`` with ``rho = -1`` the constant is an interval.
    """
    if scenario == "q2":
        return 1.5, (2.0 / 3.0) ** 1.5 * sigma / b
    if scenario == "q4":
        return 3.0, 16 * sigma ** 4 / (27 * b ** 4)
    if scenario == "ito_x":
        if not -1.0 <= rho <= 1.0:
            raise ValueError(f"rho must lie in [-1, 1], got {rho}")
        if rho == -1.0:
            mid = max(a, 0.0) ** 2 / (4 * b * sigma)
            return 1.0, (mid - sigma / 2, mid + sigma / 2)
        return 3.0, corr_constant(rho, b, sigma)
    raise ValueError(f"unknown scenario {scenario!r}; choose q2, q4 or ito_x")


@dataclass
class AsymptoticReport:
    scenario: str
    exponent: float
    limit_constant: object
    p_ladder: np.ndarray
    upper: np.ndarray
    lower: np.ndarray

    @property
    def constant_upper(self) -> float:
        return float(self.upper[-1] / self.p_ladder[-1] ** self.exponent)

    @property
    def constant_lower(self) -> float:
        return float(self.lower[-1] / self.p_ladder[-1] ** self.exponent)

    @property
    def scaled_gap(self) -> np.ndarray:
        return (self.upper - self.lower) / self.p_ladder ** self.exponent

    @property
    def gap_shrinking(self) -> bool:
        g = self.scaled_gap
        return bool(np.all(np.diff(g) < 0))

    def as_dict(self) -> dict:
        return {"exponent": self.exponent, "constant_upper": self.constant_upper,
                "constant_lower": self.constant_lower, "limit_constant": self.limit_constant}


def asymptotic_constants(scenario: str, params: Optional[dict] = None,
                         p_ladder: Sequence[float] = (10.0, 30.0, 100.0, 300.0)) -> AsymptoticReport:
    """Bracket ``Lambda(p)/p^k`` by sweeping both bounds along a p ladder."""
    params = dict(params or {})
    a = float(params.get("a", 0.0))
    b = float(params.get("b", 1.0))
    sigma = float(params.get("sigma", 1.0))
    rho = float(params.get("rho", 1.0))
    k, const = limit_constant(scenario, a, b, sigma, rho)
    name = {"q2": "pitchfork_q2", "q4": "pitchfork_q4", "ito_x": "pitchfork_corr"}[scenario]
    model = build_model({"model": name, "a": a, "b": b, "sigma": sigma, "rho": rho})
    ladder = np.asarray(p_ladder, dtype=float)
    ups, los = [], []
    for p in ladder:
        ups.append(upper_bound(model, p)[0])
        los.append(lower_bound(model, p)[0])
    return AsymptoticReport(scenario, k, const, ladder, np.array(ups), np.array(los))


def q2_upper_formula(gamma, p, a=0.0, b=1.0, sigma=1.0):
    """Closed-form ``sup_x L_pV/V`` for ``V = e^{gamma x^2}`` and ``Q = x^2``."""
    c = 2 * gamma * a + 2 * gamma ** 2 * sigma ** 2 + p
    return np.where(c >= 0, c * c / (8 * b * gamma), 0.0) + gamma * sigma ** 2


def q2_lower_stationary_A(p, a=0.0, b=1.0, sigma=1.0) -> float:
    """Maximizer of :func:`lower_q2` in ``A`` (root of its derivative)."""
    f = lambda A: float(lower_q2(A, p, a, b, sigma))  # noqa: E731
    hi = p / (2 * b)
    xs = np.linspace(0.5, hi, 2001)[1:-1]
    i = int(np.argmax([f(x) for x in xs]))
    h = 1e-7 * hi
    g = lambda A: (f(A + h) - f(A - h)) / (2 * h)  # noqa: E731
    return brentq(g, xs[max(i - 1, 0)], xs[min(i + 1, xs.size - 1)])
