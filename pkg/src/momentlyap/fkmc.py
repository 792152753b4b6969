"""Monte Carlo estimates of the finite-time log moment generating function.

For a batch of functionals ``A_t`` the estimate is

    Lambda_t(p) = (1/t) log mean exp(p A_t)

computed with a max shift, together with the weighted-ratio forms of its
first two p-derivatives.  Standard errors come from batch means and the
delta method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .model import SdeModel
from .pathsim import PathBatch, simulate_batch
from .rng import RngPolicy

MIN_ESS = 30.0
MC_CSV_FIELDS = ("p", "t", "lambda_t", "se", "dlambda_t", "d2lambda_t", "ess", "n_blowups")


class AllPathsBlownUp(RuntimeError):
    pass


@dataclass(frozen=True)
class McLambdaEstimate:
    p: float
    t: float
    x0: float
    lambda_t: float
    dlambda_t: float
    d2lambda_t: float
    se_lambda: float
    se_dlambda: float
    n_paths: int
    n_blowups: int
    ess: float
    near_critical: bool = False

    @property
    def low_confidence(self) -> bool:
        return self.ess < MIN_ESS

    def csv_row(self) -> list:
        return [self.p, self.t, self.lambda_t, self.se_lambda, self.dlambda_t,
                self.d2lambda_t, self.ess, self.n_blowups]


def critical_p(model: SdeModel) -> Optional[float]:
    """Blow-up threshold of the OU quadratic model, ``None`` for other models."""
    pr = model.params
    if pr.get("family") == "ou":
        return pr["a"] ** 2 / (2.0 * pr["sigma"] ** 2)
    return None


def _near_critical(model: SdeModel, p: float) -> bool:
    pc = critical_p(model)
    return pc is not None and bool(p >= 0.9 * pc)


def _batches(n: int) -> int:
    return max(2, int(math.isqrt(n)))


def weighted_moments(a: np.ndarray, p: float, t: float, x0=0.0, n_blowups: int = 0,
                     near_critical: bool = False) -> McLambdaEstimate:
    """Estimate from an array of valid functionals (blown-up paths already dropped)."""
    a = np.asarray(a, dtype=float)
    n = a.size
    if n < 2:
        raise ValueError("need at least two valid paths")
    p = float(p)
    s = p * a
    shift = s.max()
    w = np.exp(s - shift)
    sw = w.sum()
    mean_w = sw / n
    lam = (math.log(mean_w) + shift) / t
    # center A before forming second moments to avoid cancellation
    c = a.mean()
    d = a - c
    m1 = (w * d).sum() / sw
    m2 = (w * d * d).sum() / sw
    dlam = (m1 + c) / t
    d2lam = max(m2 - m1 * m1, 0.0) / t
    ess = sw * sw / (w * w).sum()

    nb = _batches(n)
    edges = np.linspace(0, n, nb + 1).astype(int)
    bw = np.add.reduceat(w, edges[:-1]) / np.diff(edges)
    bwd = np.add.reduceat(w * d, edges[:-1]) / np.diff(edges)
    se_lam = float(np.std(bw, ddof=1) / math.sqrt(nb) / mean_w / t)
    # ratio estimator sum(w d)/sum(w): linearize around the pooled ratio
    resid = (bwd - m1 * bw) / mean_w
    se_dlam = float(np.std(resid, ddof=1) / math.sqrt(nb) / t)
    if p == 0.0:
        lam = 0.0
        se_lam = 0.0
    return McLambdaEstimate(p=p, t=float(t), x0=x0, lambda_t=float(lam), dlambda_t=float(dlam),
                            d2lambda_t=float(d2lam), se_lambda=se_lam, se_dlambda=se_dlam,
                            n_paths=n + n_blowups, n_blowups=n_blowups, ess=float(ess),
                            near_critical=near_critical)


def _valid(batch: PathBatch) -> np.ndarray:
    a = batch.a_final[batch.valid]
    if a.size == 0:
        raise AllPathsBlownUp(f"all {len(batch)} paths blew up; reduce the time step")
    return a


def _x0_scalar(x0):
    arr = np.atleast_1d(np.asarray(x0, dtype=float))
    return float(arr[0]) if arr.size == 1 else tuple(arr.tolist())


def estimate_from_batch(model: SdeModel, batch: PathBatch, p: float, x0=0.0) -> McLambdaEstimate:
    return weighted_moments(_valid(batch), p, batch.t, _x0_scalar(x0), batch.n_blowups,
                            _near_critical(model, p))


def estimate_lambda(model: SdeModel, p: float, t: float, x0, n_paths: int, n_steps: int,
                    policy: RngPolicy, threads: int = 1, scheme: str = "euler") -> McLambdaEstimate:
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    batch = simulate_batch(model, x0, t, n_steps, n_paths, policy, threads=threads, scheme=scheme)
    return estimate_from_batch(model, batch, p, x0)


def convexity_violation(ps: Sequence[float], values: Sequence[float]) -> float:
    """Largest amount by which an interior sample lies above its neighbours' chord."""
    ps = np.asarray(ps, dtype=float)
    v = np.asarray(values, dtype=float)
    worst = 0.0
    for i in range(1, ps.size - 1):
        h0 = ps[i] - ps[i - 1]
        h1 = ps[i + 1] - ps[i]
        chord = (h1 * v[i - 1] + h0 * v[i + 1]) / (h0 + h1)
        worst = max(worst, v[i] - chord)
    return float(worst)


@dataclass
class LambdaCurve:
    """Estimates on a p grid, all from the same batch of paths."""

    estimates: list
    convexity_violation: float
    batch: Optional[PathBatch] = field(default=None, repr=False)

    def __len__(self):
        return len(self.estimates)

    def __getitem__(self, i) -> McLambdaEstimate:
        return self.estimates[i]

    def __iter__(self):
        return iter(self.estimates)

    @property
    def p(self) -> np.ndarray:
        return np.array([e.p for e in self.estimates])

    @property
    def lambda_t(self) -> np.ndarray:
        return np.array([e.lambda_t for e in self.estimates])

    @property
    def pooled_se(self) -> float:
        se = np.array([e.se_lambda for e in self.estimates])
        return float(np.sqrt(np.mean(se ** 2))) if se.size else 0.0


def curve_from_batch(model: SdeModel, batch: PathBatch, p_grid, x0=0.0) -> LambdaCurve:
    p_grid = np.asarray(p_grid, dtype=float)
    if np.any(np.diff(p_grid) < 0):
        raise ValueError("p_grid must be sorted")
    a = _valid(batch)
    ests = [weighted_moments(a, p, batch.t, _x0_scalar(x0), batch.n_blowups,
                             _near_critical(model, p)) for p in p_grid]
    return LambdaCurve(ests, convexity_violation(p_grid, [e.lambda_t for e in ests]), batch)


def lambda_curve(model: SdeModel, p_grid, t: float, x0, n_paths: int, n_steps: int,
                 policy: RngPolicy, threads: int = 1, scheme: str = "euler") -> LambdaCurve:
    batch = simulate_batch(model, x0, t, n_steps, n_paths, policy, threads=threads, scheme=scheme)
    return curve_from_batch(model, batch, p_grid, x0)


@dataclass(frozen=True)
class CltSummary:
    z: np.ndarray = field(repr=False)
    variance: float
    se_variance: float
    ks: float
    ks_pvalue: float
    s2: Optional[float]
    n_blowups: int


def clt_sample(model: SdeModel, t: float, x0, n_paths: int, n_steps: int, policy: RngPolicy,
               lambda_ref: float, s2: Optional[float] = None, threads: int = 1,
               scheme: str = "euler") -> CltSummary:
    """Standardized functionals ``(A_t - t lambda_ref)/sqrt(t)`` and a KS distance to N(0, s2)."""
    batch = simulate_batch(model, x0, t, n_steps, n_paths, policy, threads=threads, scheme=scheme)
    z = (_valid(batch) - t * lambda_ref) / math.sqrt(t)
    var = float(np.var(z, ddof=1))
    # normal-theory se, inflated by the sample kurtosis
    k = float(stats.kurtosis(z, fisher=False)) if z.size > 3 else 3.0
    se = var * math.sqrt(max(k - 1.0, 0.0) / z.size)
    if s2 is not None and s2 > 0:
        res = stats.kstest(z, "norm", args=(0.0, math.sqrt(s2)))
        ks, pv = float(res.statistic), float(res.pvalue)
    else:
        ks, pv = float("nan"), float("nan")
    return CltSummary(z, var, se, ks, pv, s2, batch.n_blowups)


@dataclass(frozen=True)
class MdpEstimate:
    value: float
    p: float
    t: float
    a_t: float
    b_t: float
    ess: float
    n_paths: int
    n_blowups: int

    @property
    def low_confidence(self) -> bool:
        return self.ess < MIN_ESS

    def __float__(self):
        return self.value


def mdp_from_batch(batch: PathBatch, beta_exp: float, p: float, lambda_ref: float) -> MdpEstimate:
    t = batch.t
    b_t = t ** beta_exp
    a_t = b_t * b_t / t
    a = _valid(batch)
    s = p * a_t * (a - t * lambda_ref) / b_t
    shift = s.max()
    w = np.exp(s - shift)
    value = (math.log(w.mean()) + shift) / a_t if p != 0 else 0.0
    ess = w.sum() ** 2 / (w * w).sum()
    return MdpEstimate(float(value), float(p), float(t), a_t, b_t, float(ess), len(batch),
                       batch.n_blowups)


def mdp_lmgf(model: SdeModel, t: float, x0, beta_exp: float, p: float, n_paths: int,
             n_steps: int, policy: RngPolicy, lambda_ref: float, threads: int = 1,
             scheme: str = "euler") -> MdpEstimate:
    """Scaled log-mgf ``(1/a_t) log E exp(p a_t (A_t - t lambda_ref)/b_t)``, ``b_t = t^beta_exp``.

    Its limit is ``p^2 Lambda''(0)/2``.
    """
    if not 0.5 < beta_exp < 1.0:
        raise ValueError(f"beta_exp must lie in (1/2, 1), got {beta_exp}")
    batch = simulate_batch(model, x0, t, n_steps, n_paths, policy, threads=threads, scheme=scheme)
    return mdp_from_batch(batch, beta_exp, p, lambda_ref)


@dataclass(frozen=True)
class ErgodicProfile:
    x0: np.ndarray
    values: np.ndarray
    se: np.ndarray
    ess: np.ndarray

    def normalized(self, at: float = 0.0) -> np.ndarray:
        """Profile divided by its (interpolated) value at ``at``."""
        return self.values / np.interp(at, self.x0, self.values)


def mult_ergodic_profile(model: SdeModel, p: float, t: float, x0_grid, n_paths: int,
                         n_steps: int, policy: RngPolicy, lambda_ref: float, threads: int = 1,
                         scheme: str = "euler") -> ErgodicProfile:
    """``exp(-t lambda_ref) mean exp(p A_t)`` for each starting point.

    Every starting point reuses the same path indices (common random numbers),
    which makes the profile shape much smoother than its absolute level.
    """
    x0_grid = np.asarray(x0_grid, dtype=float)
    vals, ses, esss = [], [], []
    for x0 in x0_grid:
        batch = simulate_batch(model, x0, t, n_steps, n_paths, policy, threads=threads,
                               scheme=scheme)
        a = _valid(batch)
        s = p * a - t * lambda_ref
        w = np.exp(s)
        vals.append(w.mean())
        ses.append(w.std(ddof=1) / math.sqrt(w.size))
        esss.append(w.sum() ** 2 / (w * w).sum() if w.any() else 0.0)
    return ErgodicProfile(x0_grid, np.array(vals), np.array(ses), np.array(esss))
