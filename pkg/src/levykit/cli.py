"""Command-line experiment harness: one verb per pipeline stage.

Every run writes CSV artifacts plus a manifest carrying the config hash, the
seed ladder root, package versions, and wall-clock time; exit status is zero
iff every check declared in the config passed.
"""

import argparse
import os
import sys
import time

import numpy as np

from . import __version__
from .config import load_config, ConfigError
from .grids import gridfunction_to_csv, grid_function
from .kernels import validate_assumptions
from .symbols import compute_symbol, sector_and_ellipticity, symbol_to_csv
from .operators import LDirectPlan
from .resolvent import generator_bound_scan
from .probes import probe_basket
from .cauchy import CauchyProblem, solve_cauchy, regularity_report
from .jumps import (build_scheme, simulate_paths, observable_tables,
                    martingale_residual, mc_vs_pde)


def _manifest(cfg, out_dir, artifacts, t0, extra=None):
    lines = [
        f"config_hash={cfg.config_hash}",
        f"seed_root={cfg.seed}",
        f"levykit_version={__version__}",
        f"numpy_version={np.__version__}",
        f"wallclock_s={time.time() - t0:.3f}",
    ]
    if extra:
        lines += [f"{k}={v}" for k, v in extra.items()]
    for a in artifacts:
        lines.append(f"artifact={a}")
    with open(os.path.join(out_dir, "manifest.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _maybe_plot(cfg, csv_path, xcol, ycol, out_png):
    if not cfg.make_plots:
        return None
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    fig, ax = plt.subplots()
    ax.loglog(np.abs(data[xcol]), np.abs(data[ycol]), "o-")
    ax.set_xlabel(xcol)
    ax.set_ylabel(ycol)
    fig.savefig(out_png, dpi=120)
    return out_png


def stage_validate(cfg, out_dir):
    rep = validate_assumptions(cfg.spec)
    path = os.path.join(out_dir, "validation.csv")
    with open(path, "w") as fh:
        fh.write("check,passed,margin,detail\n")
        for c in rep.checks:
            fh.write(f"{c.name},{int(c.passed)},{float(c.margin)!r},\"{c.detail}\"\n")
    return rep.all_passed, [path]


def stage_symbol(cfg, out_dir):
    p = compute_symbol(cfg.spec, cfg.grid, rel_tol=cfg.symbol_tol)
    rep = sector_and_ellipticity(p, alpha=cfg.spec.alpha)
    sym_csv = os.path.join(out_dir, "symbol.csv")
    symbol_to_csv(p, sym_csv)
    sector_txt = os.path.join(out_dir, "sector.txt")
    with open(sector_txt, "w") as fh:
        fh.write(rep.to_text() + "\n")
    ok = rep.c_ell > 0 and rep.delta > np.pi / 2
    return ok, [sym_csv, sector_txt], p, rep


def stage_resolvent(cfg, out_dir, p=None, rep=None):
    if p is None:
        _, _, p, rep = stage_symbol(cfg, out_dir)
    probes = probe_basket(cfg.grid, s=cfg.s)
    lams = rep.R * np.asarray(cfg.lam_factors)
    grep = generator_bound_scan(p, cfg.spec, lams, probes, cfg.alpha_primes,
                                s=cfg.s, tol=cfg.resolvent_tol, report=rep,
                                threads=cfg.threads)
    path = os.path.join(out_dir, "generator_scan.csv")
    grep.to_csv(path)
    _maybe_plot(cfg, path, "lam_abs", "norm", os.path.join(out_dir, "generator_scan.png"))
    alpha = cfg.spec.alpha
    ok = True
    if "generator_slope" in cfg.checks:
        for ap in cfg.alpha_primes:
            want = -(alpha - ap) / alpha
            ok = ok and abs(grep.slopes[ap] - want) <= 0.15
    return ok, [path], grep


def stage_cauchy(cfg, out_dir):
    prob = CauchyProblem(spec=cfg.spec, grid=cfg.grid, forcing=cfg.forcing(),
                         horizon=cfg.horizon, dt=cfg.dt, s=cfg.s, theta=cfg.theta)
    traj = solve_cauchy(prob, tol=cfg.resolvent_tol, defect_stride=8)
    reg = regularity_report(traj, cfg.s, cfg.spec.alpha, theta=cfg.theta)
    path = os.path.join(out_dir, "trajectory_norms.csv")
    with open(path, "w") as fh:
        fh.write("t,sup,cs,cs_alpha\n")
        sups = traj.sup_series()
        for i, t in enumerate(traj.times):
            fh.write(f"{float(t)!r},{float(sups[i])!r},{float(reg['cs_series'][i])!r},{float(reg['cs_alpha_series'][i])!r}\n")
    final_csv = os.path.join(out_dir, "final_state.csv")
    gridfunction_to_csv(traj.final, final_csv)
    man = os.path.join(out_dir, "cauchy_manifest.txt")
    with open(man, "w") as fh:
        fh.write(f"dt={cfg.dt!r}\nmax_defect={float(max(traj.step_defects)) if traj.step_defects else 0.0!r}\n"
                 f"min_value={float(traj.min_value)!r}\nmax_cs_alpha={float(reg['max_cs_alpha'])!r}\n"
                 f"time_holder_quotient={reg['time_holder_quotient']!r}\n")
    ok = True
    if cfg.checks.get("positivity", "false").lower() == "true" and traj.forcing_nonneg:
        ok = traj.min_value >= -1e-10 * max(traj.sup_series().max(), 1e-300)
    return ok, [path, final_csv, man], traj


def stage_simulate(cfg, out_dir):
    scheme = build_scheme(cfg.spec, cfg.eps, dt_drift=cfg.dt_drift)
    ens = simulate_paths(cfg.spec, cfg.initial, cfg.sim_horizon, scheme,
                         cfg.n_paths, cfg.seed, checkpoints=cfg.checkpoints)
    path = os.path.join(out_dir, "ensemble_summary.csv")
    ens.summary_to_csv(path)
    ok = ens.delivered == cfg.n_paths
    return ok, [path], ens, scheme


def stage_verify(cfg, out_dir):
    if cfg.spec.n != 1:
        raise ConfigError("martingale verification is 1-D")
    fine = type(cfg.grid)(1, cfg.grid.half_period, 2048)
    table = observable_tables(fine, lambda x: np.exp(-x ** 2 / 2.0), cfg.spec)
    scheme = build_scheme(cfg.spec, cfg.eps, dt_drift=cfg.dt_drift)
    ens = simulate_paths(cfg.spec, cfg.initial, cfg.sim_horizon, scheme,
                         cfg.n_paths, cfg.seed, checkpoints=cfg.checkpoints,
                         observable=table)
    rep = martingale_residual(ens, table)
    path = os.path.join(out_dir, "martingale_report.csv")
    with open(path, "w") as fh:
        fh.write("statistic,value,se,ok\n")
        for t, m, s in zip(rep.checkpoints, rep.means, rep.ses):
            fh.write(f"E[M_{t:g}],{float(m)!r},{float(s)!r},{int(abs(m) <= 3 * s)}\n")
        for name, v, s in rep.orth_stats:
            fh.write(f"\"{name}\",{v!r},{s!r},{int(abs(v) <= 3 * s)}\n")
    return rep.passed, [path], rep


def stage_crosscheck(cfg, out_dir):
    g = cfg.grid
    psi = grid_function(g, lambda *m: np.exp(-sum(x ** 2 for x in m) / (2 * 1.5 ** 2)))
    p = compute_symbol(cfg.spec, g, rel_tol=cfg.symbol_tol)
    rep = sector_and_ellipticity(p, alpha=cfg.spec.alpha)
    t_star = cfg.sim_horizon
    prob = CauchyProblem(spec=cfg.spec, grid=g, forcing=None,
                         horizon=t_star, dt=cfg.dt, u0=psi)
    traj = solve_cauchy(prob, p=p, report=rep, defect_stride=0,
                        tol=cfg.resolvent_tol)
    scheme = build_scheme(cfg.spec, cfg.eps, dt_drift=cfg.dt_drift)
    probes = [-2.0, -1.0, 0.0, 1.0, 2.0]
    per = max(cfg.n_paths // len(probes), 100)
    ens_by_start = []
    for i, x0 in enumerate(probes):
        ens = simulate_paths(cfg.spec, x0, t_star, scheme, per,
                             cfg.seed + i, checkpoints=[t_star])
        ens_by_start.append((x0, ens))
    rows = mc_vs_pde(ens_by_start, psi, t_star, traj)
    path = os.path.join(out_dir, "crosscheck.csv")
    with open(path, "w") as fh:
        fh.write("x,mc,pde,abs_err,se,tol\n")
        for r in rows:
            fh.write(f"{r['x']!r},{r['mc']!r},{r['pde']!r},{r['abs_err']!r},"
                     f"{r['se']!r},{r['tol']!r}\n")
    tol = float(cfg.checks.get("crosscheck_tol", "0.05"))
    ok = max(r["abs_err"] for r in rows) <= tol
    return ok, [path], rows


def stage_bench(cfg, out_dir):
    rows = []
    g = cfg.grid
    t0 = time.time()
    p = compute_symbol(cfg.spec, g, rel_tol=cfg.symbol_tol)
    rows.append(("symbol_s", time.time() - t0))
    f = grid_function(g, lambda *m: np.exp(-sum(x ** 2 for x in m)))
    plan = LDirectPlan(cfg.spec, g)
    t0 = time.time()
    for _ in range(5):
        plan.apply(f)
    rows.append(("L_direct_apply_s", (time.time() - t0) / 5))
    from .operators import apply_yform
    from .symbols import resolvent_symbol
    rep = sector_and_ellipticity(p, alpha=cfg.spec.alpha)
    q = resolvent_symbol(p, 2 * rep.R, report=rep)
    t0 = time.time()
    for _ in range(5):
        apply_yform(q, f)
    rows.append(("yform_apply_s", (time.time() - t0) / 5))
    if cfg.spec.cutoff:
        scheme = build_scheme(cfg.spec, cfg.eps, dt_drift=cfg.dt_drift)
        ens = simulate_paths(cfg.spec, 0.0, 0.05, scheme, 2000, cfg.seed)
        t0 = time.time()
        ens = simulate_paths(cfg.spec, 0.0, 0.05, scheme, 2000, cfg.seed)
        dt = time.time() - t0
        rows.append(("engine_events_per_s", float(ens.n_proposals.sum()) / dt))
    path = os.path.join(out_dir, "bench.csv")
    with open(path, "w") as fh:
        fh.write("metric,value\n")
        for k, v in rows:
            fh.write(f"{k},{float(v)!r}\n")
    return True, [path]


def run_experiment(cfg):
    """Execute the configured pipeline; returns (exit_status, artifact_dir)."""
    t0 = time.time()
    out_dir = cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    artifacts = []
    all_ok = True
    sym_cache = None
    for stage in cfg.pipeline:
        try:
            if stage == "validate":
                ok, arts = stage_validate(cfg, out_dir)
            elif stage == "symbol":
                ok, arts, p, rep = stage_symbol(cfg, out_dir)
                sym_cache = (p, rep)
            elif stage == "resolvent":
                if sym_cache:
                    ok, arts, _ = stage_resolvent(cfg, out_dir, *sym_cache)
                else:
                    ok, arts, _ = stage_resolvent(cfg, out_dir)
            elif stage == "cauchy":
                ok, arts, _ = stage_cauchy(cfg, out_dir)
            elif stage == "simulate":
                ok, arts, _, _ = stage_simulate(cfg, out_dir)
            elif stage == "verify":
                ok, arts, _ = stage_verify(cfg, out_dir)
            elif stage == "crosscheck":
                ok, arts, _ = stage_crosscheck(cfg, out_dir)
            elif stage == "bench":
                ok, arts = stage_bench(cfg, out_dir)
            else:
                raise ConfigError(f"unknown stage {stage!r}")
        except Exception as exc:
            raise RuntimeError(f"pipeline stage {stage!r} failed: {exc}") from exc
        artifacts += arts
        all_ok = all_ok and ok
    _manifest(cfg, out_dir, artifacts, t0, extra={"status": "ok" if all_ok else "check_failed"})
    return (0 if all_ok else 1), out_dir


def main(argv=None):
    ap = argparse.ArgumentParser(prog="levykit",
                                 description="Spectral + Monte Carlo toolkit for "
                                             "Levy-type jump operators")
    ap.add_argument("--config", required=True, help="INI experiment config")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--out", default=None, help="override the output directory")
    ap.add_argument("--threads", type=int, default=1, help="worker budget for scans")
    ap.add_argument("--no-plots", action="store_true", help="skip plot emission")
    ap.add_argument("command", choices=["validate", "symbol", "resolvent", "cauchy",
                                        "simulate", "verify", "crosscheck", "bench",
                                        "run"],
                    help="stage to execute ('run' uses the config pipeline)")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed,
                          out_override=args.out, threads=args.threads,
                          make_plots=not args.no_plots)
    except (ConfigError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command != "run":
        cfg.pipeline = [args.command]
    status, out_dir = run_experiment(cfg)
    print(f"artifacts in {out_dir} (status {status})")
    return status


if __name__ == "__main__":
    sys.exit(main())
