"""Path simulation of the state together with the running functional ``A_t``.

The hot loops are numba kernels that draw their Gaussian increments from the
counter-based stream of :mod:`momentlyap.rng`; path ``i`` always sees the
same increments no matter how the batch is split across threads.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .fields import PolyField, TrigField
from .model import SdeModel
from .rng import PathStream, RngPolicy, normal_quad, split_seed

SCHEMES = {"euler": 0, "heun": 1}
_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PathSample:
    x_final: np.ndarray
    a_final: float
    t: float
    n_steps: int
    blowup: bool

    @property
    def dt(self) -> float:
        return self.t / self.n_steps


@dataclass
class PathBatch:
    """Final states and functionals of a batch; indexable as a list of PathSample."""

    x_final: np.ndarray
    a_final: np.ndarray
    blowup: np.ndarray
    t: float
    n_steps: int
    wall_time: float = 0.0

    def __len__(self):
        return self.a_final.size

    def __getitem__(self, i) -> PathSample:
        return PathSample(np.atleast_1d(self.x_final[i]), float(self.a_final[i]), self.t,
                          self.n_steps, bool(self.blowup[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def n_blowups(self) -> int:
        return int(self.blowup.sum())

    @property
    def valid(self) -> np.ndarray:
        return ~self.blowup


# ---------------------------------------------------------------------------
# coefficient tables for the kernels


def _field_row(f, kind: int, width: int) -> np.ndarray:
    row = np.zeros(width)
    if kind == 0:
        row[: f.coeffs.size] = f.coeffs
    else:
        half = width // 2
        row[: f.cos.size] = f.cos
        row[half: half + f.sin.size] = f.sin
    return row


def coefficient_table(model: SdeModel) -> tuple[int, np.ndarray, np.ndarray]:
    """Pack the model fields into the row layout used by the 1D kernel.

    Rows: ito drift, Stratonovich drift, Q_ito, q0, noise_1..m, q_1..m.
    """
    fields = [model.ito_drift, model.drift_strat, model.Q_ito, model.q0,
              *model.noise, *model.q]
    if model.state_space == "circle":
        kind = 1
        fields = [TrigField._coerce(f) for f in fields]
        width = 2 * (max(f.degree for f in fields) + 1)
    else:
        kind = 0
        fields = [f if isinstance(f, PolyField) else None for f in fields]
        if any(f is None for f in fields):
            raise ValueError("line model with non-polynomial field")
        width = max(f.degree for f in fields) + 1
    degs = np.array([f.degree for f in fields], dtype=np.int64)
    return kind, np.vstack([_field_row(f, kind, width) for f in fields]), degs


@numba.njit(cache=True, nogil=True, inline="always")
def _ev_poly(coef, degs, row, x):
    deg = degs[row]
    s = coef[row, deg]
    for k in range(deg - 1, -1, -1):
        s = s * x + coef[row, k]
    return s


@numba.njit(cache=True, nogil=True, inline="always")
def _ev_trig(coef, degs, row, x):
    half = coef.shape[1] // 2
    s = coef[row, 0]
    for k in range(1, degs[row] + 1):
        ck = coef[row, k]
        sk = coef[row, half + k]
        if ck != 0.0:
            s += ck * math.cos(k * x)
        if sk != 0.0:
            s += sk * math.sin(k * x)
    return s


def _make_kernel_1d(ev, circle: bool, heun: bool):
    # kind and scheme are baked in at compile time; a runtime branch costs ~2x
    @numba.njit(nogil=True)
    def kernel(coef, degs, m, x0, dt, n_steps, k0, k1, paths, guard, out_x, out_a, out_blow):
        sq = math.sqrt(dt)
        dw = np.empty(m)
        buf = np.empty(4)
        for i in range(paths.size):
            path = paths[i]
            x = x0
            if circle:
                x = x - _TWO_PI * math.floor(x / _TWO_PI)
            a = 0.0
            blown = False
            jn = 0
            for k in range(n_steps):
                for c in range(m):
                    r = jn & 3
                    if r == 0:
                        z = normal_quad(k0, k1, path, jn >> 2)
                        buf[0] = z[0]
                        buf[1] = z[1]
                        buf[2] = z[2]
                        buf[3] = z[3]
                    dw[c] = buf[r] * sq
                    jn += 1
                if not heun:
                    dx = ev(coef, degs, 0, x) * dt
                    da = ev(coef, degs, 2, x) * dt
                    for c in range(m):
                        dx += ev(coef, degs, 4 + c, x) * dw[c]
                        da += ev(coef, degs, 4 + m + c, x) * dw[c]
                else:
                    f = ev(coef, degs, 1, x)
                    xb = x + f * dt
                    for c in range(m):
                        xb += ev(coef, degs, 4 + c, x) * dw[c]
                    dx = 0.5 * (f + ev(coef, degs, 1, xb)) * dt
                    da = 0.5 * (ev(coef, degs, 3, x) + ev(coef, degs, 3, xb)) * dt
                    for c in range(m):
                        dx += 0.5 * (ev(coef, degs, 4 + c, x) + ev(coef, degs, 4 + c, xb)) * dw[c]
                        da += 0.5 * (ev(coef, degs, 4 + m + c, x)
                                     + ev(coef, degs, 4 + m + c, xb)) * dw[c]
                x += dx
                a += da
                if circle:
                    x = x - _TWO_PI * math.floor(x / _TWO_PI)
                elif not abs(x) <= guard:
                    blown = True
                    break
            out_blow[i] = blown
            if blown:
                out_x[i] = np.nan
                out_a[i] = np.nan
            else:
                out_x[i] = x
                out_a[i] = a

    return kernel


_KERNELS: dict = {}


def _kernel_1d(circle: bool, heun: bool):
    key = (circle, heun)
    if key not in _KERNELS:
        _KERNELS[key] = _make_kernel_1d(_ev_trig if circle else _ev_poly, circle, heun)
    return _KERNELS[key]


@numba.njit(cache=True, nogil=True)
def _langevin_rates(pa, pb, beta, x, y, th):
    s = math.sin(th)
    c = math.cos(th)
    lin = pa - 3.0 * pb * x * x
    fy = pa * x - pb * x * x * x - beta * y
    fth = -s * s + lin * c * c - beta * s * c
    q = (1.0 + lin) * s * c - beta * s * s
    return fy, fth, q


@numba.njit(cache=True, nogil=True)
def _kernel_langevin(scheme, pa, pb, beta, sigma, x0, y0, th0, dt, n_steps, k0, k1, paths,
                     guard, out_x, out_a, out_blow):
    sq = math.sqrt(dt)
    buf = np.empty(4)
    for i in range(paths.size):
        path = paths[i]
        x = x0
        y = y0
        th = th0
        a = 0.0
        blown = False
        for k in range(n_steps):
            r = k & 3
            if r == 0:
                z = normal_quad(k0, k1, path, k >> 2)
                buf[0] = z[0]
                buf[1] = z[1]
                buf[2] = z[2]
                buf[3] = z[3]
            dw = buf[r] * sq
            fy, fth, q = _langevin_rates(pa, pb, beta, x, y, th)
            if scheme == 0:
                xn = x + y * dt
                yn = y + fy * dt + sigma * dw
                thn = th + fth * dt
                a += q * dt
            else:
                xb = x + y * dt
                yb = y + fy * dt + sigma * dw
                thb = th + fth * dt
                fyb, fthb, qb = _langevin_rates(pa, pb, beta, xb, yb, thb)
                xn = x + 0.5 * (y + yb) * dt
                yn = y + 0.5 * (fy + fyb) * dt + sigma * dw
                thn = th + 0.5 * (fth + fthb) * dt
                a += 0.5 * (q + qb) * dt
            x = xn
            y = yn
            th = thn - _TWO_PI * math.floor(thn / _TWO_PI)
            if not (abs(x) <= guard and abs(y) <= guard):
                blown = True
                break
        out_blow[i] = blown
        if blown:
            out_x[i, 0] = np.nan
            out_x[i, 1] = np.nan
            out_x[i, 2] = np.nan
            out_a[i] = np.nan
        else:
            out_x[i, 0] = x
            out_x[i, 1] = y
            out_x[i, 2] = th
            out_a[i] = a


# ---------------------------------------------------------------------------
# public API


def _check_args(t, n_steps, scheme):
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {sorted(SCHEMES)}")


def _run(model: SdeModel, x0, t, n_steps, paths: np.ndarray, key, scheme, guard,
         out_x, out_a, out_blow):
    dt = t / n_steps
    k0, k1 = key
    if model.state_space == "langevin":
        pr = model.params
        x0 = np.broadcast_to(np.asarray(x0, dtype=float), (3,))
        _kernel_langevin(SCHEMES[scheme], pr["a"], pr["b"], pr["beta"], pr["sigma"],
                         float(x0[0]), float(x0[1]), float(x0[2]), dt, int(n_steps), k0, k1,
                         paths, guard, out_x, out_a, out_blow)
    else:
        kind, coef, degs = coefficient_table(model)
        _kernel_1d(kind == 1, scheme == "heun")(coef, degs, model.m, float(np.asarray(x0).ravel()[0]), dt,
                   int(n_steps), k0, k1, paths, guard, out_x, out_a, out_blow)


def _alloc(model: SdeModel, n: int):
    shape = (n, model.dim) if model.dim > 1 else (n,)
    return np.empty(shape), np.empty(n), np.zeros(n, dtype=np.bool_)


def simulate_path(model: SdeModel, x0, t: float, n_steps: int, stream: PathStream,
                  scheme: str = "euler", guard: Optional[float] = None) -> PathSample:
    """Simulate one path using the increments of ``stream``."""
    _check_args(t, n_steps, scheme)
    guard = 10.0 * model.scale if guard is None else float(guard)
    out_x, out_a, out_b = _alloc(model, 1)
    _run(model, x0, float(t), n_steps, np.array([stream.index], dtype=np.int64),
         split_seed(stream.seed), scheme, guard, out_x, out_a, out_b)
    return PathSample(np.atleast_1d(out_x[0]), float(out_a[0]), float(t), int(n_steps),
                      bool(out_b[0]))


def simulate_batch(model: SdeModel, x0, t: float, n_steps: int, n_paths: int,
                   policy: RngPolicy, threads: int = 1, scheme: str = "euler",
                   guard: Optional[float] = None, first_path: int = 0) -> PathBatch:
    """Simulate paths ``first_path .. first_path + n_paths - 1``.

    Path ``i`` uses ``policy.stream_for(i)``; the result is bitwise identical
    for every value of ``threads``.
    """
    _check_args(t, n_steps, scheme)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    guard = 10.0 * model.scale if guard is None else float(guard)
    paths = np.arange(first_path, first_path + n_paths, dtype=np.int64)
    out_x, out_a, out_b = _alloc(model, n_paths)
    start = time.perf_counter()
    threads = max(1, min(int(threads), n_paths))
    if threads == 1:
        _run(model, x0, float(t), n_steps, paths, policy.key, scheme, guard, out_x, out_a, out_b)
    else:
        bounds = np.linspace(0, n_paths, threads + 1).astype(int)

        def work(j):
            sl = slice(bounds[j], bounds[j + 1])
            _run(model, x0, float(t), n_steps, paths[sl], policy.key, scheme, guard,
                 out_x[sl], out_a[sl], out_b[sl])

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, range(threads)))
    return PathBatch(out_x, out_a, out_b, float(t), int(n_steps), time.perf_counter() - start)


# ---------------------------------------------------------------------------
# reference integrators driven by explicit increments (used for cross-checks)


def integrate_increments(model: SdeModel, x0: float, dW: np.ndarray, dt: float,
                         scheme: str = "euler") -> tuple[np.ndarray, np.ndarray]:
    """Plain-numpy integration of a 1D model along given Brownian increments.

    ``dW`` has shape ``(n_steps, m)``.  Returns the state and functional
    trajectories, each of length ``n_steps + 1``.
    """
    dW = np.asarray(dW, dtype=float).reshape(len(dW), model.m)
    xs = np.empty(len(dW) + 1)
    As = np.zeros(len(dW) + 1)
    x = float(x0)
    xs[0] = x
    for k, inc in enumerate(dW):
        if scheme == "euler":
            dx = model.ito_drift(x) * dt + sum(g(x) * w for g, w in zip(model.noise, inc))
            da = model.Q_ito(x) * dt + sum(q(x) * w for q, w in zip(model.q, inc))
        elif scheme == "heun":
            f = model.drift_strat(x)
            xb = x + f * dt + sum(g(x) * w for g, w in zip(model.noise, inc))
            dx = 0.5 * (f + model.drift_strat(xb)) * dt + sum(
                0.5 * (g(x) + g(xb)) * w for g, w in zip(model.noise, inc))
            da = 0.5 * (model.q0(x) + model.q0(xb)) * dt + sum(
                0.5 * (q(x) + q(xb)) * w for q, w in zip(model.q, inc))
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        x = float(x + dx)
        if model.state_space == "circle":
            x = x % _TWO_PI
        xs[k + 1] = x
        As[k + 1] = As[k] + da
    return xs, As


def integrate_linear_2d(B0, B, v0, dW: np.ndarray, dt: float) -> np.ndarray:
    """Heun (Stratonovich) integration of ``dv = B0 v dt + sum_j B_j v o dW^j``."""
    B0 = np.asarray(B0, dtype=float)
    mats = [np.asarray(b, dtype=float) for b in B]
    dW = np.asarray(dW, dtype=float).reshape(len(dW), len(mats))
    v = np.asarray(v0, dtype=float).copy()
    out = np.empty((len(dW) + 1, 2))
    out[0] = v
    for k, inc in enumerate(dW):
        step = B0 * dt + sum(bm * w for bm, w in zip(mats, inc))
        vb = v + step @ v
        v = v + 0.5 * (step @ v + step @ vb)
        out[k + 1] = v
    return out
