"""Principal eigenpair of the twisted generator on a 1D grid.

The operator is conjugated by a Lyapunov weight, ``H_p h = V^{-1} L_p (V h)``,
so that the unknown ``h = phi_p / V`` decays and a Dirichlet truncation of the
line is harmless.  After upwinding, ``H_p`` has nonnegative off-diagonals, so
``(mu I - H_p)^{-1}`` is a nonnegative matrix for every ``mu`` above the
principal eigenvalue.  Shifted inverse iteration then converges to the
positive eigenvector; the shift is tightened with the Collatz-Wielandt bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from .bounds import LyapunovWeight, NoAdmissibleWeight, find_admissible, upper_bound
from .model import SdeModel, twisted_coefficients


class InadmissibleWeight(ValueError):
    pass


class EigenSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    domain: str
    n: int
    x_min: float = 0.0
    x_max: float = 2 * math.pi

    def __post_init__(self):
        if self.domain not in ("interval", "circle"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.n < 16:
            raise ValueError(f"grid needs n >= 16 nodes, got {self.n}")
        if self.domain == "interval" and not self.x_max > self.x_min:
            raise ValueError("empty interval")

    @classmethod
    def interval(cls, x_max: float, n: int, x_min: Optional[float] = None) -> "GridSpec":
        return cls("interval", int(n), -x_max if x_min is None else x_min, x_max)

    @classmethod
    def circle(cls, n: int) -> "GridSpec":
        return cls("circle", int(n), 0.0, 2 * math.pi)

    @property
    def periodic(self) -> bool:
        return self.domain == "circle"

    @property
    def spacing(self) -> float:
        if self.periodic:
            return 2 * math.pi / self.n
        return (self.x_max - self.x_min) / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        d = self.spacing
        if self.periodic:
            return d * np.arange(self.n)
        return self.x_min + d * np.arange(1, self.n + 1)

    def refined(self, level: int = 1) -> "GridSpec":
        """Same domain with the spacing halved ``level`` times."""
        k = 2 ** level
        n = self.n * k if self.periodic else (self.n + 1) * k - 1
        return GridSpec(self.domain, n, self.x_min, self.x_max)

    def widened(self, factor: float) -> "GridSpec":
        """Interval scaled by ``factor`` about the origin at (nearly) the same spacing."""
        if self.periodic:
            raise ValueError("a circle grid cannot be widened")
        lo, hi = self.x_min * factor, self.x_max * factor
        n = int(round((hi - lo) / self.spacing)) - 1
        return GridSpec("interval", n, lo, hi)


@dataclass
class ConjugatedOperator:
    """Tridiagonal (or periodic tridiagonal) matrix of ``H_p`` on the grid.

    Row ``i`` reads ``lower[i] h[i-1] + diag[i] h[i] + upper[i] h[i+1]``; on an
    interval the couplings to the Dirichlet boundary are dropped.
    """

    p: float
    grid: GridSpec
    weight: LyapunovWeight
    x: np.ndarray
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    upwinded: np.ndarray
    potential: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.x.size

    def matvec(self, h: np.ndarray) -> np.ndarray:
        out = self.diag * h
        if self.grid.periodic:
            out += self.lower * np.roll(h, 1) + self.upper * np.roll(h, -1)
        else:
            out[1:] += self.lower[1:] * h[:-1]
            out[:-1] += self.upper[:-1] * h[1:]
        return out

    def row_sums(self) -> np.ndarray:
        if self.grid.periodic:
            return self.diag + self.lower + self.upper
        s = self.diag.copy()
        s[1:] += self.lower[1:]
        s[:-1] += self.upper[:-1]
        return s

    def to_sparse(self) -> sp.csc_matrix:
        n = self.n
        m = sp.diags([self.lower[1:], self.diag, self.upper[:-1]], [-1, 0, 1], shape=(n, n),
                     format="lil")
        if self.grid.periodic:
            m[0, n - 1] = self.lower[0]
            m[n - 1, 0] = self.upper[n - 1]
        return m.tocsc()

    def dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    @property
    def min_offdiag(self) -> float:
        if self.grid.periodic:
            return float(min(self.lower.min(), self.upper.min()))
        return float(min(self.lower[1:].min(), self.upper[:-1].min()))


def default_weight(model: SdeModel, p: float) -> LyapunovWeight:
    """An admissible weight: ``e^{a x^2/(2 sigma^2)}`` for OU, else the bound minimizer."""
    if model.state_space == "circle":
        return LyapunovWeight.unit()
    pr = model.params
    if pr.get("family") in ("ou", "ou_degenerate"):
        w = LyapunovWeight("exp_quadratic", pr["a"] / (2 * pr["sigma"] ** 2))
        reps = find_admissible(model, p, "exp_quadratic", [w.param])
        if reps:
            return w
    try:
        return upper_bound(model, p, "exp_quadratic")[1]
    except NoAdmissibleWeight:
        raise InadmissibleWeight(f"no admissible e^(gamma x^2) weight for {model.label} at p = {p}")


def assemble(model: SdeModel, p: float, grid: GridSpec,
             weight: Optional[LyapunovWeight] = None) -> ConjugatedOperator:
    if model.dim != 1:
        raise ValueError(f"model {model.label!r} has dimension {model.dim}; spectral solves are 1D")
    circle = model.state_space == "circle"
    if circle != grid.periodic:
        raise ValueError("circle models need a circle grid and line models an interval grid")
    if weight is None:
        weight = default_weight(model, p)
    x = grid.nodes
    tc = twisted_coefficients(model, p)
    # a_diff is a sum of squares; clip the rounding noise of trig products at its zeros
    a = np.maximum(np.broadcast_to(tc.a_diff(x), x.shape).astype(float), 0.0)
    b = np.broadcast_to(tc.b_drift(x), x.shape).astype(float)
    pot = np.broadcast_to(tc.potential(x), x.shape).astype(float)
    if circle:
        if not weight.is_unit:
            raise ValueError("circle models use the unit weight")
        c, d = b, pot
    else:
        r = weight.ratio(model, p)
        if not (r.tail(1) == -math.inf and r.tail(-1) == -math.inf):
            raise InadmissibleWeight(
                f"weight {weight.describe()} fails the tail test at p = {p}: L_pV/V does not "
                f"tend to -inf, so the truncated problem may select a spurious eigenfunction")
        c = b + a * weight.dU(x)
        d = np.broadcast_to(r(x), x.shape).astype(float)

    h = grid.spacing
    diff = 0.5 * a / (h * h)
    conv = c / (2 * h)
    lower = diff - conv
    upper = diff + conv
    diag = d - 2 * diff
    up = (lower < 0) | (upper < 0)
    if up.any():
        # first-order upwinding keeps both couplings nonnegative
        cu = c[up] / h
        lower[up] = diff[up] + np.maximum(-cu, 0.0)
        upper[up] = diff[up] + np.maximum(cu, 0.0)
        diag[up] = d[up] - 2 * diff[up] - np.abs(cu)
    return ConjugatedOperator(float(p), grid, weight, x, lower, diag, upper, up, pot)


@dataclass
class SpectralResult:
    p: float
    lam: float
    x: np.ndarray = field(repr=False)
    eigvec: np.ndarray = field(repr=False)
    residual: float
    gap_estimate: float
    iterations: int
    grid: GridSpec
    weight: LyapunovWeight
    n_upwinded: int = 0

    @property
    def eigenvalue(self) -> float:
        return self.lam

    @property
    def min_eigvec(self) -> float:
        return float(self.eigvec.min())

    def phi(self, normalize_at: Optional[float] = 0.0) -> np.ndarray:
        """``h V`` on the grid, optionally scaled to 1 at a point (by interpolation)."""
        lv = self.weight.U(self.x) + np.log(np.maximum(self.eigvec, 1e-300))
        if normalize_at is not None:
            lv = lv - np.interp(normalize_at, self.x, lv)
        return np.exp(lv)

    def csv_row(self) -> list:
        return [self.p, self.lam, self.residual, self.gap_estimate, self.grid.n, self.grid.x_max,
                self.weight.describe()]


SPECTRAL_CSV_FIELDS = ("p", "lambda", "residual", "gap_estimate", "n", "x_max", "weight_params")


class _Solver:
    def __init__(self, op: ConjugatedOperator):
        self.op = op
        self._mu = None
        self._lu = None

    def solve(self, mu: float, rhs: np.ndarray) -> np.ndarray:
        op = self.op
        if not op.grid.periodic:
            ab = np.empty((3, op.n))
            ab[0, 1:] = -op.upper[:-1]
            ab[0, 0] = 0.0
            ab[1] = mu - op.diag
            ab[2, :-1] = -op.lower[1:]
            ab[2, -1] = 0.0
            return solve_banded((1, 1), ab, rhs, check_finite=False)
        if mu != self._mu:
            m = sp.identity(op.n, format="csc") * mu - op.to_sparse()
            self._lu = splu(m.tocsc())
            self._mu = mu
        return self._lu.solve(rhs)


def _rayleigh(op: ConjugatedOperator, h: np.ndarray) -> tuple[float, float]:
    hh = op.matvec(h)
    lam = float(h @ hh / (h @ h))
    res = float(np.max(np.abs(hh - lam * h)) / np.max(np.abs(h)))
    return lam, res


def principal_eigpair(op: ConjugatedOperator, tol: float = 1e-9, max_iter: Optional[int] = None,
                      method: str = "inverse") -> SpectralResult:
    """Positive eigenvector and principal eigenvalue of ``op``.

    ``method="inverse"`` runs shifted inverse iteration (fast, the default);
    ``method="power"`` runs plain power iteration on ``sI + H`` and is only
    practical on small grids.
    """
    if op.min_offdiag < 0:
        raise EigenSolveError("operator has a negative off-diagonal entry")
    scale = 1.0 + float(np.max(np.abs(op.diag)))
    thresh = tol * max(1.0, scale * 1e-6)
    if max_iter is None:
        max_iter = 500 if method == "inverse" else 200_000
    h = np.ones(op.n)
    gap = math.nan
    it = 0
    if method == "power":
        s = scale
        prev_step = None
        for it in range(1, max_iter + 1):
            hn = op.matvec(h) + s * h
            hn /= hn.max()
            step = np.max(np.abs(hn - h))
            if prev_step:
                gap = step / prev_step
            prev_step = step
            h = hn
            if it % 20 == 0 or it == max_iter:
                lam, res = _rayleigh(op, h)
                if res < thresh:
                    break
    elif method == "inverse":
        solver = _Solver(op)
        mu0 = float(op.row_sums().max()) + 1e-8 * scale
        prev_step = None
        # a few steps at the fixed Gershgorin shift also yield the contraction ratio
        for it in range(1, 21):
            hn = solver.solve(mu0, h)
            hn /= hn.max()
            step = np.max(np.abs(hn - h))
            if prev_step:
                gap = step / prev_step
            prev_step = step
            h = hn
            if step < 1e-14:
                break
        for it in range(it + 1, max_iter + 1):
            hh = op.matvec(h)
            keep = h > 1e-10
            ratios = hh[keep] / h[keep]
            mu = float(ratios.max())
            mu += 1e-10 * (1.0 + abs(mu))
            lam, res = _rayleigh(op, h)
            if res < thresh:
                break
            hn = solver.solve(mu, h)
            if not np.all(np.isfinite(hn)) or hn.min() < -1e-12 * np.abs(hn).max():
                hn = solver.solve(mu0, h)
            hn /= hn.max()
            h = hn
    else:
        raise ValueError(f"unknown method {method!r}")
    lam, res = _rayleigh(op, h)
    if not res < thresh * 10:
        raise EigenSolveError(f"no convergence after {it} iterations (residual {res:.3e})")
    if h.min() < -1e-10:
        raise EigenSolveError("eigenvector changes sign; the assembled operator is not Perron")
    h = np.maximum(h, 0.0)
    return SpectralResult(op.p, lam, op.x, h / h.max(), res, float(gap), it, op.grid, op.weight,
                          int(op.upwinded.sum()))


def solve(model: SdeModel, p: float, grid: GridSpec, weight: Optional[LyapunovWeight] = None,
          tol: float = 1e-9, method: str = "inverse") -> SpectralResult:
    return principal_eigpair(assemble(model, p, grid, weight), tol=tol, method=method)


def default_grid(model: SdeModel, n: Optional[int] = None, x_max: Optional[float] = None) -> GridSpec:
    if model.state_space == "circle":
        return GridSpec.circle(n or 256)
    return GridSpec.interval(x_max or 6.0, n or 1200)


@dataclass
class ConvergenceReport:
    n: list
    lambdas: list
    richardson: float
    observed_order: float
    domain_sensitivity: Optional[float]
    monotone: bool

    @property
    def domain_sensitivity_text(self) -> str:
        return "n/a" if self.domain_sensitivity is None else f"{self.domain_sensitivity:.3e}"


def refine_and_validate(model: SdeModel, p: float, weight: Optional[LyapunovWeight],
                        base_grid: GridSpec, tol: float = 1e-10) -> tuple[SpectralResult, ConvergenceReport]:
    """Solve at three nested grids (and a widened interval) and measure convergence."""
    if weight is None:
        weight = default_weight(model, p)
    grids = [base_grid, base_grid.refined(1), base_grid.refined(2)]
    res = [solve(model, p, g, weight, tol) for g in grids]
    lam = [r.lam for r in res]
    d1, d2 = lam[1] - lam[0], lam[2] - lam[1]
    if d2 == 0 or d1 == 0:
        order = math.inf
        rich = lam[2]
    else:
        order = math.log2(abs(d1 / d2))
        q = order if 0.5 <= order <= 4 else 2.0
        rich = lam[2] + d2 / (2 ** q - 1)
    monotone = d1 * d2 >= 0
    sens = None
    if not base_grid.periodic:
        wide = solve(model, p, base_grid.widened(1.5), weight, tol)
        sens = abs(wide.lam - lam[0])
    return res[-1], ConvergenceReport([g.n for g in grids], lam, rich, order, sens, monotone)
