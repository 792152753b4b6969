"""Command-line entry point: ``momentlyap <command> [model|experiment] [key=value ...]``.

Exit codes: 0 success, 1 a ``repro`` check failed, 2 configuration error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import platform
import sys
import time
from pathlib import Path

import numba
import numpy as np
import scipy

from . import __version__, analysis, bounds, experiments, fkmc, spectral
from .bounds import LyapunovWeight
from .config import ConfigError, ExperimentConfig, apply_overrides, load_config
from .model import build_model
from .rng import RngPolicy
from .spectral import EigenSolveError, GridSpec, InadmissibleWeight
from .svg import line_plot

log = logging.getLogger("momentlyap")

COMMANDS = ("lambda-mc", "lambda-spectral", "bounds", "growth-check", "rate-function", "clt",
            "mdp", "asymptotics", "crosscheck", "repro")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


class Run:
    """Output directory bookkeeping shared by the subcommands."""

    def __init__(self, cfg: ExperimentConfig, command: str, out: Path, args):
        self.cfg = cfg
        self.command = command
        self.out = out
        self.args = args
        self.files = []
        self.start = time.perf_counter()
        out.mkdir(parents=True, exist_ok=True)

    def csv(self, name, header, rows):
        if "csv" in self.cfg.output.formats:
            write_csv(self.out / name, header, rows)
            self.files.append(name)

    def plot(self, name, series, **kw):
        if "svg" in self.cfg.output.formats:
            line_plot(self.out / name, series, **kw)
            self.files.append(name)

    def manifest(self, extra=None):
        data = {
            "command": self.command,
            "config_source": self.cfg.source,
            "config": self.cfg.resolved(),
            "seed": self.cfg.mc.seed,
            "threads": self.args.threads,
            "versions": {"momentlyap": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__,
                         "numba": numba.__version__},
            "wall_time": time.perf_counter() - self.start,
            "files": self.files,
        }
        if extra:
            data.update(extra)
        (self.out / "manifest.json").write_text(json.dumps(data, indent=2, default=_fmt) + "\n")


def _policy(cfg):
    return RngPolicy(master_seed=int(cfg.mc.seed))


def _x0(model, cfg):
    x0 = list(cfg.mc.x0)
    if model.state_space == "langevin":
        return (x0 + [0.0, 0.0, 0.0])[:3]
    return x0[0] if x0 else 0.0


def _weight(model, cfg, ps):
    """Configured weight, or one automatic weight shared by the whole p grid.

    The automatic weight is chosen at the largest p, where the tail test is
    hardest to pass; one weight for all p also keeps the curve smooth.
    """
    name = cfg.spectral.weight
    if name != "auto":
        return LyapunovWeight(name, float(cfg.spectral.weight_param))
    if model.state_space == "circle":
        return None
    return spectral.default_weight(model, float(np.max(ps)))


def _grid(model, cfg):
    if model.state_space == "circle":
        return GridSpec.circle(cfg.spectral.n)
    return GridSpec.interval(cfg.spectral.x_max, cfg.spectral.n)


def _spectral_ps(cfg):
    return cfg.spectral.p_grid if cfg.spectral.p_grid is not None else cfg.mc.p_grid


def cmd_lambda_mc(run: Run, model):
    cfg = run.cfg.mc
    curve = fkmc.lambda_curve(model, cfg.p_grid, cfg.t, _x0(model, run.cfg), cfg.n_paths,
                              cfg.n_steps, _policy(run.cfg), threads=run.args.threads,
                              scheme=cfg.scheme)
    run.csv("lambda_mc.csv", fkmc.MC_CSV_FIELDS, [e.csv_row() for e in curve])
    run.plot("lambda_mc.svg", [("Lambda_t (MC)", curve.p, curve.lambda_t)], xlabel="p",
             ylabel="Lambda_t(p)", title=model.label)
    for e in curve:
        flag = "  low-confidence" if e.low_confidence else ""
        print(f"p={e.p:g} lambda_t={e.lambda_t:.6f} se={e.se_lambda:.6f} ess={e.ess:.0f}"
              f" blowups={e.n_blowups}{flag}")
    if curve.convexity_violation > 0:
        print(f"warning: convexity violation {curve.convexity_violation:.3e}")
    run.manifest({"convexity_violation": curve.convexity_violation,
                  "n_blowups": curve.batch.n_blowups, "wall_time": curve.batch.wall_time})


def cmd_lambda_spectral(run: Run, model):
    grid = _grid(model, run.cfg)
    ps = _spectral_ps(run.cfg)
    w = _weight(model, run.cfg, ps)
    results = []
    for p in ps:
        res = spectral.solve(model, p, grid, w, tol=run.cfg.spectral.tol)
        results.append(res)
        print(f"p={p:g} lambda={res.lam:.10f} residual={res.residual:.2e} "
              f"gap~{res.gap_estimate:.3f} weight={res.weight.describe()}")
        if run.cfg.spectral.dump_eigenfunction:
            V = res.weight.V(res.x)
            run.csv(f"eigenfunction_p{p:g}.csv", ("x", "h", "V", "phi"),
                    zip(res.x, res.eigvec, V, res.eigvec * V))
    run.csv("lambda_spectral.csv", spectral.SPECTRAL_CSV_FIELDS, [r.csv_row() for r in results])
    run.plot("lambda_spectral.svg", [("Lambda (spectral)", [r.p for r in results],
                                      [r.lam for r in results])],
             xlabel="p", ylabel="Lambda(p)", title=model.label)
    run.manifest()


BOUNDS_CSV_FIELDS = ("p", "gamma_sup", "tail_verdict", "upper", "lower", "spectral_lambda")


def cmd_bounds(run: Run, model):
    rows = []
    grid = _grid(model, run.cfg)
    for p in run.cfg.bounds.p_ladder:
        rep = bounds.bounds_report(model, p, run.cfg.bounds.family, run.cfg.bounds.A_grid)
        w = rep.upper_argmin
        if w is not None:
            g = bounds.check_growth(model, w, p)
            gamma_sup, tail = g.gamma_sup, g.tail_ok
            lam = spectral.solve(model, p, grid, w, tol=run.cfg.spectral.tol).lam
        else:
            gamma_sup, tail, lam = math.inf, False, math.nan
        rows.append([rep.p, gamma_sup, tail, rep.upper, rep.lower, lam])
        desc = w.describe() if w is not None else "none"
        print(f"p={p:g} lower={rep.lower:.6f} (A={rep.lower_argmax:.4f}) spectral={lam:.6f} "
              f"upper={rep.upper:.6f} ({desc})")
    run.csv("bounds.csv", BOUNDS_CSV_FIELDS, rows)
    ps = [r[0] for r in rows]
    run.plot("bounds.svg", [("upper", ps, [r[3] for r in rows]), ("spectral", ps, [r[5] for r in rows]),
                            ("lower", ps, [r[4] for r in rows])],
             xlabel="p", ylabel="Lambda(p)", title=model.label)
    run.manifest()


def cmd_growth_check(run: Run, model):
    rows = []
    for p in _spectral_ps(run.cfg):
        w = (LyapunovWeight(run.cfg.spectral.weight, float(run.cfg.spectral.weight_param))
             if run.cfg.spectral.weight != "auto" else spectral.default_weight(model, p))
        r = bounds.check_growth(model, w, p)
        v = r.verdicts
        rows.append([p, w.describe(), r.gamma_sup, v["0"], v["1"], v["2"], v["3"], r.passed])
        print(f"p={p:g} weight={w.describe()} gamma_sup={r.gamma_sup:.4g} "
              f"cond0={v['0']} cond1={v['1']} cond2={v['2']} cond3={v['3']} "
              f"{'PASS' if r.passed else 'FAIL'}")
    run.csv("growth.csv", ("p", "weight", "gamma_sup", "cond0", "cond1", "cond2", "cond3", "passed"),
            rows)
    run.manifest()


def _spectral_curve(model, cfg, ps):
    grid = _grid(model, cfg)
    w = _weight(model, cfg, ps)
    return np.array([spectral.solve(model, p, grid, w, tol=cfg.spectral.tol).lam for p in ps])


def cmd_rate_function(run: Run, model):
    ps = np.asarray(run.cfg.analysis.p_grid, dtype=float)
    lams = _spectral_curve(model, run.cfg, ps)
    tab = analysis.legendre(ps, lams, run.cfg.analysis.s_grid)
    run.csv("rate_function.csv", analysis.RATE_CSV_FIELDS, tab.rows())
    run.csv("lambda_spectral.csv", ("p", "lambda"), zip(ps, lams))
    run.plot("rate_function.svg", [("I(s)", tab.s, tab.I)], xlabel="s", ylabel="I(s)",
             title=model.label)
    for row in tab.rows():
        print(f"s={row[0]:g} I={row[1]:.6f} argmax_p={row[2]:.4f}"
              + ("  boundary-limited" if row[3] else ""))
    run.manifest()


def _reference(model, cfg):
    """Almost-sure exponent and asymptotic variance (spectral stencil derivatives)."""
    st = analysis.stencil(0.01)
    lams = _spectral_curve(model, cfg, st)
    return (analysis.first_derivative_at_zero(st, lams),
            analysis.second_derivative_at_zero(st, lams))


def cmd_clt(run: Run, model):
    cfg = run.cfg.mc
    lam, s2 = _reference(model, run.cfg)
    summ = fkmc.clt_sample(model, cfg.t, _x0(model, run.cfg), cfg.n_paths, cfg.n_steps,
                           _policy(run.cfg), lam, s2=s2, threads=run.args.threads,
                           scheme=cfg.scheme)
    run.csv("clt.csv", ("lambda_ref", "s2", "variance", "se_variance", "ks", "ks_pvalue",
                        "n_blowups"),
            [[lam, s2, summ.variance, summ.se_variance, summ.ks, summ.ks_pvalue, summ.n_blowups]])
    run.csv("clt_samples.csv", ("z",), ([z] for z in summ.z))
    print(f"lambda={lam:.6f} s2={s2:.6f} variance={summ.variance:.5f}+-{summ.se_variance:.5f} "
          f"ks={summ.ks:.4f} (p={summ.ks_pvalue:.3g})")
    run.manifest()


def cmd_mdp(run: Run, model):
    cfg = run.cfg.mc
    lam, _ = _reference(model, run.cfg)
    rows = []
    for p in cfg.p_grid:
        est = fkmc.mdp_lmgf(model, cfg.t, _x0(model, run.cfg), cfg.beta_exp, p, cfg.n_paths,
                            cfg.n_steps, _policy(run.cfg), lam, threads=run.args.threads,
                            scheme=cfg.scheme)
        rows.append([p, cfg.t, cfg.beta_exp, est.value, est.ess, est.n_blowups])
        print(f"p={p:g} value={est.value:.6f} ess={est.ess:.0f}")
    run.csv("mdp.csv", ("p", "t", "beta_exp", "value", "ess", "n_blowups"), rows)
    run.manifest({"lambda_ref": lam})


_SCENARIOS = {"q2": "q2", "q4": "q4", "corr": "ito_x"}


def cmd_asymptotics(run: Run, model):
    fam = model.params.get("family")
    if fam not in _SCENARIOS:
        raise ConfigError(f"asymptotics needs a pitchfork model, got {model.label!r}")
    rep = bounds.asymptotic_constants(_SCENARIOS[fam], model.params, run.cfg.bounds.p_ladder)
    rows = [[p, u, lo, u / p ** rep.exponent, lo / p ** rep.exponent, g]
            for p, u, lo, g in zip(rep.p_ladder, rep.upper, rep.lower, rep.scaled_gap)]
    run.csv("asymptotics.csv", ("p", "upper", "lower", "upper_scaled", "lower_scaled",
                                "scaled_gap"), rows)
    for r in rows:
        print(f"p={r[0]:g} upper/p^k={r[3]:.5f} lower/p^k={r[4]:.5f} gap={r[5]:.3e}")
    print(f"exponent={rep.exponent:g} limit={rep.limit_constant} shrinking={rep.gap_shrinking}")
    run.manifest({"exponent": rep.exponent, "limit_constant": rep.limit_constant})


def cmd_crosscheck(run: Run, model):
    cfg = run.cfg
    rows = []
    ok_all = True
    for p in cfg.mc.p_grid:
        lam = spectral.solve(model, p, _grid(model, cfg), _weight(model, cfg, [p]),
                             tol=cfg.spectral.tol).lam
        est = fkmc.estimate_lambda(model, p, cfg.mc.t, _x0(model, cfg), cfg.mc.n_paths,
                                   cfg.mc.n_steps, _policy(cfg), threads=run.args.threads,
                                   scheme=cfg.mc.scheme)
        if model.state_space == "line" and model.params.get("family") in ("q2", "q4", "corr"):
            rep = bounds.bounds_report(model, p, cfg.bounds.family, cfg.bounds.A_grid)
            lo, up = rep.lower, rep.upper
        else:
            lo, up = -math.inf, math.inf
        ok = lo <= lam <= up
        ok_all &= ok
        rows.append([p, lo, lam, est.lambda_t, est.se_lambda, up, ok])
        print(f"p={p:g}: lower={lo:.6f} <= spectral={lam:.6f} <= upper={up:.6f} "
              f"[{'ok' if ok else 'VIOLATED'}]  mc={est.lambda_t:.6f}+-{est.se_lambda:.6f} "
              f"(t={cfg.mc.t:g}, ess={est.ess:.0f}{', low-confidence' if est.low_confidence else ''})")
    run.csv("crosscheck.csv", ("p", "lower", "lambda_spectral", "lambda_mc", "se_mc", "upper",
                               "sandwich_ok"), rows)
    run.manifest()
    return 0 if ok_all else 1


def cmd_repro(args) -> int:
    names = list(experiments.EXPERIMENTS) if args.target in (None, "all") else [args.target]
    out = Path(args.out) if args.out else None
    failed = 0
    rows = []
    for name in names:
        start = time.perf_counter()
        checks = experiments.run(name, threads=args.threads)
        for c in checks:
            print(c.line(), flush=True)
            failed += not c.passed
            rows.append([name, c.criterion, c.name, c.passed, c.detail])
        log.info("%s took %.1fs", name, time.perf_counter() - start)
    if out:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "repro.csv", ("experiment", "criterion", "check", "passed", "detail"), rows)
    return 1 if failed else 0


HANDLERS = {
    "lambda-mc": cmd_lambda_mc,
    "lambda-spectral": cmd_lambda_spectral,
    "bounds": cmd_bounds,
    "growth-check": cmd_growth_check,
    "rate-function": cmd_rate_function,
    "clt": cmd_clt,
    "mdp": cmd_mdp,
    "asymptotics": cmd_asymptotics,
    "crosscheck": cmd_crosscheck,
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="momentlyap", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("target", nargs="?", help="catalog model name, or experiment name for repro")
    ap.add_argument("overrides", nargs="*", help="key=value or section.key=value")
    ap.add_argument("--config", help="INI config file")
    ap.add_argument("--out", help="output directory (default: [output] directory)")
    ap.add_argument("--seed", type=int, help="master seed")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _build_config(args) -> ExperimentConfig:
    target = args.target
    overrides = list(args.overrides)
    if target and "=" in target:
        overrides.insert(0, target)
        target = None
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = ExperimentConfig(model={})
    if target:
        cfg.model["model"] = target
    if args.seed is not None:
        overrides.append(f"mc.seed={args.seed}")
    if not cfg.model.get("model"):
        raise ConfigError("no model given: pass a catalog name or --config with a [model] section")
    return apply_overrides(cfg, overrides)


def main(argv=None) -> int:
    args = make_parser().parse_intermixed_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        if args.command == "repro":
            return cmd_repro(args)
        cfg = _build_config(args)
        try:
            model = build_model(cfg.model)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"{cfg.source}: [model]: {exc}") from None
        out = Path(args.out or cfg.output.directory)
        rc = HANDLERS[args.command](Run(cfg, args.command, out, args), model)
        return int(rc or 0)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except (EigenSolveError, fkmc.AllPathsBlownUp, InadmissibleWeight, bounds.NoAdmissibleWeight,
            analysis.NonConvexInput, analysis.NotNormalizable) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
