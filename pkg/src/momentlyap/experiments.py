"""Named acceptance experiments.

Each experiment returns a list of :class:`Check` records (one per pass/fail
condition).  The CLI ``repro`` subcommand and the acceptance tests both run
these functions.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import analysis, bounds, fkmc, spectral
from .bounds import LyapunovWeight
from .model import build_model, project_linear_2d
from .pathsim import integrate_increments, integrate_linear_2d
from .rng import RngPolicy
from .spectral import GridSpec

SEED = 20240101


@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.criterion:>2} {self.name}: {self.detail}"


def ou_lambda(p, a=1.0, sigma=1.0):
    """Closed-form OU quadratic exponent (infinite past the critical p)."""
    disc = a * a - 2 * p * sigma ** 2
    return 0.5 * (a - math.sqrt(disc)) if disc >= 0 else math.inf


def _ou():
    return build_model({"model": "ou_quadratic", "a": 1.0, "sigma": 1.0})


OU_GRID = GridSpec.interval(6.0, 1200)
OU_WEIGHT = LyapunovWeight("exp_quadratic", 0.5)


def ou_closed_form(threads: int = 1) -> list:
    model = _ou()
    start = time.perf_counter()
    out = []
    for p in (-1.0, 0.2, 0.375):
        lam = spectral.solve(model, p, OU_GRID, OU_WEIGHT).lam
        err = abs(lam - ou_lambda(p))
        out.append(Check(1, f"ou spectral p={p:g}", err <= 1e-3,
                         f"lambda_spec={lam:.6f} oracle={ou_lambda(p):.6f} err={err:.2e} (tol 1e-3)"))
    wall = time.perf_counter() - start
    out.append(Check(1, "ou spectral runtime", wall < 5.0, f"{wall:.2f}s (limit 5s)"))
    return out


def ou_eigenfunction(threads: int = 1) -> list:
    res = spectral.solve(_ou(), 0.375, OU_GRID, OU_WEIGHT)
    m = np.abs(res.x) <= 2.0
    phi = res.phi(normalize_at=0.0)
    rel = float(np.max(np.abs(phi[m] / np.exp(0.25 * res.x[m] ** 2) - 1.0)))
    return [Check(2, "ou eigenfunction on [-2,2]", rel <= 0.01,
                  f"max relative error {rel:.2e} vs exp(0.25 x^2) (tol 1e-2)")]


MC_VS_SPECTRAL = (
    # model spec, p, n_paths, n_steps
    ({"model": "ou_quadratic", "a": 1.0, "sigma": 1.0}, 0.375, 100_000, 3000),
    ({"model": "pitchfork_q2", "a": 0.0, "b": 1.0, "sigma": 1.0}, 1.0, 100_000, 3000),
)


def mc_vs_spectral(threads: int = 1) -> list:
    out = []
    start = time.perf_counter()
    for spec, p, n_paths, n_steps in MC_VS_SPECTRAL:
        model = build_model(spec)
        est = fkmc.estimate_lambda(model, p, 30.0, 0.0, n_paths, n_steps, RngPolicy(SEED),
                                   threads=threads)
        lam = spectral.solve(model, p, spectral.default_grid(model)).lam
        tol = 3 * est.se_lambda + 0.03
        diff = abs(est.lambda_t - lam)
        out.append(Check(3, f"{spec['model']} p={p:g} t=30", diff <= tol,
                         f"mc={est.lambda_t:.5f} se={est.se_lambda:.5f} ess={est.ess:.0f} "
                         f"spec={lam:.5f} |diff|={diff:.4f} (tol {tol:.4f})"))
    wall = time.perf_counter() - start
    out.append(Check(3, "mc vs spectral runtime", wall < 120.0, f"{wall:.1f}s (limit 120s)"))
    return out


def sandwich(threads: int = 1) -> list:
    model = build_model({"model": "pitchfork_q2", "a": 0.0, "b": 1.0, "sigma": 1.0})
    p = 10.0
    lam = spectral.solve(model, p, GridSpec.interval(6.0, 1600)).lam
    lo_formula = float(bounds.lower_q2(10.0 / 3.0, p))
    up_formula = float(bounds.q2_upper_formula(math.sqrt(p / 6.0), p))
    lo, A = bounds.lower_bound(model, p)
    up, w = bounds.upper_bound(model, p)
    out = [
        Check(4, "lower formula at A=10/3", abs(lo_formula - 15.87) <= 0.005,
              f"{lo_formula:.4f} vs 15.87"),
        Check(4, "upper formula at gamma=sqrt(10/6)", abs(up_formula - 18.50) <= 0.005,
              f"{up_formula:.4f} vs 18.50"),
        Check(4, "sandwich p=10", lo_formula <= lam <= up_formula and lo <= lam <= up,
              f"{lo_formula:.2f} <= {lo:.4f} (A={A:.3f}) <= lambda_spec={lam:.4f} <= "
              f"{up:.4f} ({w.describe()}) <= {up_formula:.2f}"),
    ]
    rep = bounds.asymptotic_constants("q2", {"a": 0.0, "b": 1.0, "sigma": 1.0})
    c = rep.limit_constant
    cu, cl = rep.constant_upper, rep.constant_lower
    out.append(Check(4, "ladder constants at p=300",
                     abs(cu / c - 1) <= 0.15 and abs(cl / c - 1) <= 0.15,
                     f"upper/p^1.5={cu:.4f} lower/p^1.5={cl:.4f} limit={c:.4f} (tol 15%)"))
    out.append(Check(4, "ladder gap shrinking", rep.gap_shrinking,
                     "scaled gaps " + ", ".join(f"{g:.2e}" for g in rep.scaled_gap)))
    return out


def growth_flip(threads: int = 1) -> list:
    model = _ou()
    below = bounds.find_admissible(model, 0.49, "exp_quadratic")
    above = bounds.find_admissible(model, 0.51, "exp_quadratic")
    g = [r.weight.param for r in below]
    return [
        Check(5, "growth passes at p=0.49", len(below) > 0,
              f"{len(below)} admissible gamma in [{min(g, default=math.nan):.3f}, "
              f"{max(g, default=math.nan):.3f}]"),
        Check(5, "growth fails at p=0.51", len(above) == 0,
              f"{len(above)} admissible gamma"),
    ]


def lambda_prime(threads: int = 1) -> list:
    model = _ou()
    lam_as = analysis.lambda_as(model)
    h = 0.01
    d = (spectral.solve(model, h, OU_GRID, OU_WEIGHT).lam
         - spectral.solve(model, -h, OU_GRID, OU_WEIGHT).lam) / (2 * h)
    return [
        Check(6, "quadrature lambda", abs(lam_as - 0.5) <= 1e-6, f"{lam_as:.8f} vs 0.5"),
        Check(6, "spectral Lambda'(0)", abs(d - lam_as) <= 1e-3,
              f"centered difference {d:.6f} vs {lam_as:.6f} (tol 1e-3)"),
    ]


def clt(threads: int = 1) -> list:
    start = time.perf_counter()
    summ = fkmc.clt_sample(_ou(), 50.0, 0.0, 10_000, 5000, RngPolicy(SEED), 0.5, s2=0.5,
                           threads=threads)
    wall = time.perf_counter() - start
    return [
        Check(7, "clt variance", 0.45 <= summ.variance <= 0.55,
              f"var={summ.variance:.4f} se={summ.se_variance:.4f} (range [0.45, 0.55])"),
        Check(7, "clt ks distance", summ.ks < 0.02, f"ks={summ.ks:.4f} to N(0, 0.5) (limit 0.02)"),
        Check(7, "clt runtime", wall < 60.0, f"{wall:.1f}s (limit 60s)"),
    ]


def degenerate(threads: int = 1) -> list:
    model = build_model({"model": "ou_linear_degenerate", "a": 1.0, "sigma": 1.0})
    t, n_steps = 50.0, 5000
    dt = t / n_steps
    ps = np.linspace(-1.0, 1.0, 9)
    curve = fkmc.lambda_curve(model, ps, t, 0.0, 10_000, n_steps, RngPolicy(SEED), threads=threads)
    b = curve.batch
    tele = float(np.max(np.abs(b.a_final - (0.0 - b.x_final)))) / t
    mc = curve.lambda_t
    grid = GridSpec.interval(8.0, 1600)
    spec = np.array([spectral.solve(model, p, grid).lam for p in ps])
    # Richardson-extrapolated stencil values remove the O(dx^2) grid error
    st = analysis.stencil(0.25)
    d2 = analysis.second_derivative_at_zero(
        st, [spectral.refine_and_validate(model, p, None, GridSpec.interval(8.0, 799))[1].richardson
             for p in st])
    resid = mc - np.polyval(np.polyfit(ps, mc, 1), ps)
    return [
        Check(8, "telescoping identity", tele <= 5 * dt,
              f"max |A_t - (x0 - x_t)|/t = {tele:.2e} (tol {5 * dt:.2e})"),
        Check(8, "mc Lambda_t small and linear", np.max(np.abs(mc)) <= 0.01 and
              np.max(np.abs(resid)) <= 0.01,
              f"t={t:g}: max|Lambda_t|={np.max(np.abs(mc)):.4f}, max deviation from line "
              f"{np.max(np.abs(resid)):.4f} (tol 0.01)"),
        Check(8, "spectral Lambda small", np.max(np.abs(spec)) <= 0.01,
              f"max|lambda_spec|={np.max(np.abs(spec)):.2e}"),
        Check(8, "spectral Lambda''(0)", abs(d2) <= 1e-4, f"{d2:.2e} (tol 1e-4)"),
    ]


RATE_P_GRID = np.linspace(-1.0, 0.45, 59)


def rate_function(threads: int = 1) -> list:
    model = _ou()
    lams = [spectral.solve(model, p, OU_GRID, OU_WEIGHT).lam for p in RATE_P_GRID]
    tab = analysis.legendre(RATE_P_GRID, lams, [0.5, 1.0])
    i_half, i_one = tab.I
    return [
        Check(9, "I(1)", abs(i_one - 0.125) <= 2e-3 and not tab.boundary_limited[1],
              f"{i_one:.6f} at p={tab.argmax_p[1]:.4f} vs 0.125 (tol 2e-3)"),
        Check(9, "I(0.5)", abs(i_half) <= 1e-4, f"{i_half:.2e} (tol 1e-4)"),
    ]


def mdp(threads: int = 1) -> list:
    # Heun keeps the time-discretization bias of the mean well below the signal
    est = fkmc.mdp_lmgf(_ou(), 400.0, 0.0, 0.75, 0.5, 100_000, 8000, RngPolicy(SEED), 0.5,
                        threads=threads, scheme="heun")
    rel = abs(est.value / 0.0625 - 1)
    return [Check(10, "moderate deviations", rel <= 0.25,
                  f"value={est.value:.5f} target=0.0625 rel.err={rel:.1%} ess={est.ess:.0f} "
                  f"(tol 25%)")]


def khasminskii(threads: int = 1) -> list:
    sigma = 1.0
    iso = build_model({"model": "linear2d_projected", "sigma": sigma})
    out = []
    for p in (1.0, 2.0):
        lam = spectral.solve(iso, p, GridSpec.circle(128)).lam
        err = abs(lam - p * p * sigma ** 2 / 2)
        out.append(Check(11, f"isotropic circle p={p:g}", err <= 1e-4,
                         f"lambda_spec={lam:.8f} vs {p * p * sigma ** 2 / 2:g} (tol 1e-4)"))
    # The integrator tolerance is estimated from the same Brownian path refined
    # fourfold: the coarse-vs-fine change of both integrators bounds their error.
    t, n = 1.0, 1000
    dt = t / n
    v0 = np.array([1.0, 0.5])
    for seed in (1, 2, 3):
        rng = np.random.default_rng(seed)
        B0, B1 = rng.normal(size=(2, 2, 2))
        dW_fine = rng.normal(size=(4 * n, 1)) * math.sqrt(dt / 4)
        dW = dW_fine.reshape(n, 4, 1).sum(axis=1)
        lv, A = _pathwise(B0, B1, v0, dW, dt)
        lv_f, A_f = _pathwise(B0, B1, v0, dW_fine, dt / 4)
        disc = float(np.max(np.abs(lv - A)))
        tol = 2.0 * float(np.max(np.abs(lv - lv_f[::4]) + np.abs(A - A_f[::4])))
        out.append(Check(11, f"pathwise log|v_t| vs A_t (seed {seed})", disc <= tol,
                         f"max error {disc:.2e} at dt={dt:g} (integrator tolerance {tol:.2e})"))
    return out


def _pathwise(B0, B1, v0, dW, dt):
    v = integrate_linear_2d(B0, [B1], v0, dW, dt)
    _, A = integrate_increments(project_linear_2d(B0, [B1]), math.atan2(v0[1], v0[0]), dW, dt,
                                scheme="heun")
    return np.log(np.linalg.norm(v, axis=1) / np.linalg.norm(v0)), A


def reproducibility(threads: int = 8) -> list:
    from .cli import main

    out = []
    with tempfile.TemporaryDirectory() as tmp:
        for spec, p, n_paths, n_steps in MC_VS_SPECTRAL:
            blobs = []
            for th in (1, max(2, threads)):
                d = Path(tmp) / f"{spec['model']}_{th}"
                args = ["lambda-mc", spec["model"], f"p={p}", "t=30", f"n_paths={n_paths}",
                        f"n_steps={n_steps}", "--out", str(d), "--threads", str(th),
                        "--seed", str(SEED)]
                args += [f"{k}={v}" for k, v in spec.items() if k != "model"]
                if main(args) != 0:
                    raise RuntimeError(f"lambda-mc failed for {spec['model']}")
                blobs.append((d / "lambda_mc.csv").read_bytes())
            out.append(Check(12, f"{spec['model']} threads 1 vs {max(2, threads)}",
                             blobs[0] == blobs[1], f"{len(blobs[0])} bytes, identical="
                             f"{blobs[0] == blobs[1]}"))
    return out


def langevin(threads: int = 1) -> list:
    model = build_model({"model": "langevin", "a": 1.0, "b": 1.0, "beta": 1.0, "sigma": 1.0})
    curve = fkmc.lambda_curve(model, [-0.5, 0.0, 0.5], 20.0, [0.0, 0.0, 0.0], 2000, 20_000,
                              RngPolicy(SEED), threads=threads)
    lam = curve.lambda_t
    d = np.diff(lam)
    return [
        Check(13, "langevin finite", bool(np.all(np.isfinite(lam))),
              "Lambda_t = " + ", ".join(f"{v:.4f}" for v in lam)),
        Check(13, "langevin monotone", bool(np.all(d > 0) or np.all(d < 0)),
              "differences " + ", ".join(f"{v:.4f}" for v in d)),
        Check(13, "langevin no blowups", curve.batch.n_blowups == 0,
              f"{curve.batch.n_blowups} blowups at dt=1e-3"),
    ]


EXPERIMENTS: dict[str, Callable] = {
    "ou-closed-form": ou_closed_form,
    "ou-eigenfunction": ou_eigenfunction,
    "mc-vs-spectral": mc_vs_spectral,
    "sandwich": sandwich,
    "growth-flip": growth_flip,
    "lambda-prime": lambda_prime,
    "clt": clt,
    "degenerate": degenerate,
    "rate-function": rate_function,
    "mdp": mdp,
    "khasminskii": khasminskii,
    "reproducibility": reproducibility,
    "langevin": langevin,
}


def run(name: str, threads: int = 1) -> list:
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    fn = EXPERIMENTS[name]
    return fn(threads=max(threads, 8)) if name == "reproducibility" else fn(threads=threads)
