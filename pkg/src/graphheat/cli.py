"""Command-line front end.

Exit codes: 0 = requested checks passed, 2 = a scientific check failed
(kernel validation threshold breached, certificate refuted, solver failure,
report failure), 1 = usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .analysis import (
    lemma2_blowup_time_bound,
    phi_ode_check,
    phi_series,
    theorem1_criterion,
    theorem2_certificate,
)
from .errors import GraphHeatError, NoBoundInHorizonError
from .experiments import ScenarioConfig, SweepRow, build_datum, build_domain, fmt, report
from .graphs import FamilySpec, load_graph, save_graph
from .heat import heat_kernel_column, validate_kernel
from .solver import BLOWUP, COMPLETED, FAILURE, Problem, solve
from .spectral import lambda1, lambda1_exhaustion


def _add_common(p):
    p.add_argument("--out", help="output directory for artifacts")
    p.add_argument("--seed", type=int, default=None, help="seed for randomized probes")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for sweeps")


def _domain_from_args(args):
    if args.graph:
        return load_graph(args.graph)
    if args.family:
        fam = FamilySpec.parse(args.family)
        return fam.instantiate(args.radius)
    raise GraphHeatError("need --graph FILE or --family SPEC")


def _floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="graphheat",
        description="Heat semigroups, spectral bottoms, and semilinear blow-up "
        "on weighted graphs via Dirichlet truncations.",
    )
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen-graph", help="generate a domain and save it")
    p.add_argument("--family", required=True, help="e.g. tree:d=3,mu=unit | lattice:dim=1 | cycle:n=8")
    p.add_argument("--radius", type=int, default=None)
    p.add_argument("--out", required=True, help="output graph file")

    p = sub.add_parser("lambda1", help="spectral bottom, optionally over an exhaustion")
    p.add_argument("--graph", help="graph file")
    p.add_argument("--family", help="generator family spec")
    p.add_argument("--radius", type=int, default=None)
    p.add_argument("--radii", help="comma list for an exhaustion sweep")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out")

    p = sub.add_parser("kernel", help="kernel column and property validation")
    p.add_argument("--graph", help="graph file")
    p.add_argument("--family")
    p.add_argument("--radius", type=int, default=None)
    p.add_argument("--source", type=int, default=None, help="source vertex id (default origin)")
    p.add_argument("--times", default="0.1,0.5,1.0,2.0")
    p.add_argument("--validate", action="store_true")
    p.add_argument("--out")

    for name, helptext in [
        ("solve", "run the slab solver on a config"),
        ("bound-check", "datum-based blow-up time bound and functional series"),
        ("certify", "search a global-existence certificate"),
        ("criterion", "source-growth divergence criterion"),
        ("dichotomy", "sweep an alpha grid and classify each run"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True)
        _add_common(p)

    p = sub.add_parser("report", help="summarize artifacts from a run directory")
    p.add_argument("--in", dest="indir", required=True)
    p.add_argument("--out")

    args = ap.parse_args(argv)
    try:
        return _dispatch(args)
    except GraphHeatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args):
    if args.cmd == "gen-graph":
        fam = FamilySpec.parse(args.family)
        dom = fam.instantiate(args.radius)
        save_graph(dom, args.out)
        print(f"wrote {args.out}: n={dom.n}, origin={dom.origin}")
        return 0

    if args.cmd == "lambda1":
        return _cmd_lambda1(args)
    if args.cmd == "kernel":
        return _cmd_kernel(args)
    if args.cmd == "report":
        return _cmd_report(args)

    cfg = ScenarioConfig.from_ini(args.config)
    if args.cmd == "solve":
        return _cmd_solve(cfg, args)
    if args.cmd == "bound-check":
        return _cmd_bound_check(cfg, args)
    if args.cmd == "certify":
        return _cmd_certify(cfg, args)
    if args.cmd == "criterion":
        return _cmd_criterion(cfg, args)
    if args.cmd == "dichotomy":
        return _cmd_dichotomy(cfg, args)
    raise GraphHeatError(f"unknown command {args.cmd!r}")


def _cmd_lambda1(args):
    if args.radii:
        if not args.family:
            raise GraphHeatError("--radii requires --family")
        fam = FamilySpec.parse(args.family)
        radii = [int(x) for x in args.radii.replace(",", " ").split()]
        ex = lambda1_exhaustion(fam, radii, tol=args.tol)
        text = experiments._lambda1_csv(ex)
    else:
        dom = _domain_from_args(args)
        est = lambda1(dom, tol=args.tol)
        text = "radius,lambda1,residual,iterations\n"
        text += f"{'' if est.radius is None else est.radius},{fmt(est.lambda1)},{fmt(est.residual)},{est.iterations}\n"
    _emit(text, args.out, "lambda1.csv")
    return 0


def _cmd_kernel(args):
    dom = _domain_from_args(args)
    y0 = dom.origin if args.source is None else args.source
    times = _floats(args.times)
    col = heat_kernel_column(dom, y0, times)
    lines = ["t,vertex,p,mass"]
    for k, t in enumerate(times):
        for x in range(dom.n):
            lines.append(f"{fmt(t)},{x},{fmt(col.values[k, x])},{fmt(col.mass[k])}")
    _emit("\n".join(lines) + "\n", args.out, "kernel.csv")
    if not args.validate:
        return 0
    kr = validate_kernel(dom, [y0, dom.n // 2], times)
    print("\n".join(kr.lines()))
    rep = report([SweepRow(alpha=None, lambda1=None)], kernel_report=kr)
    print(rep.text, end="")
    return 0 if rep.ok else 2


def _cmd_solve(cfg, args):
    res = experiments.run_scenario(cfg, out_dir=args.out, seed=args.seed, jobs=args.jobs)
    if isinstance(res, tuple):  # config carried a sweep grid
        rows, summary, _ = res
        for r in rows:
            print(",".join(r.csv_values()))
        return 0 if all(not r.error for r in rows) else 2
    print(experiments._verdict_text(res), end="")
    if res.trajectory is not None and res.trajectory.verdict == FAILURE:
        return 2
    return 0


def _cmd_bound_check(cfg, args):
    dom = build_domain(cfg)
    u0 = build_datum(cfg, dom)
    rng = np.random.default_rng(cfg.seed if args.seed is None else args.seed)
    probes = experiments._probe_vertices(cfg, dom, rng)
    cap = max(10.0 * (cfg.horizon or 40.0), 400.0)
    try:
        T_upper = lemma2_blowup_time_bound(u0, dom, probes, cfg.q, cfg.source, search_cap=cap)
        print(f"T_upper={fmt(T_upper)}")
    except NoBoundInHorizonError:
        T_upper = None
        print(f"T_upper=inf search_cap={fmt(cap)}")

    horizon = cfg.horizon
    if horizon is None and T_upper is not None:
        horizon = 0.5 * T_upper
    if horizon is not None:
        rec = cfg.record_dt or horizon / 200.0
        prob = Problem(
            domain=dom, q=cfg.q, h=cfg.source, u0=u0, horizon=horizon,
            tol=cfg.tol, dt_max=cfg.dt_max, nodes_per_slab=cfg.nodes_per_slab,
            record_dt=rec,
        )
        traj = solve(prob)
        print(f"verdict={traj.verdict}")
        if traj.verdict == COMPLETED:
            ps = phi_series(traj, dom, probes[0], horizon, h=cfg.source)
            grid = ps.times
            uniform = np.allclose(np.diff(grid), grid[1] - grid[0], rtol=1e-9)
            if uniform:
                viol = phi_ode_check(ps, cfg.source, cfg.q)
                print(f"phi_max_violation={fmt(viol)}")
            mono = bool(np.all(np.diff(ps.values) >= -1e-9 * np.maximum(ps.values[:-1], 1e-300)))
            print(f"phi_monotone={'true' if mono else 'false'}")
            body = "t,phi,H\n" + "\n".join(
                f"{fmt(t)},{fmt(v)},{fmt(H)}"
                for t, v, H in zip(ps.times, ps.values, ps.H_values)
            )
            _emit(body + "\n", args.out, "phi.csv", quiet=True)
        if traj.verdict == BLOWUP and T_upper is not None:
            ok = traj.bracket[0] <= 1.01 * T_upper
            print(f"bracket=({fmt(traj.bracket[0])}, {fmt(traj.bracket[1])})")
            print(f"bound_respected={'true' if ok else 'false'}")
            return 0 if ok else 2
    return 0


def _cmd_certify(cfg, args):
    dom = build_domain(cfg)
    u0 = build_datum(cfg, dom)
    lam, _ = experiments._resolve_lambda1(cfg, dom)
    cert = theorem2_certificate(
        dom, u0, cfg.q, cfg.source, gamma=cfg.gamma,
        y0=cfg.y0 if cfg.y0 is not None else dom.origin, lam=lam,
    )
    print(f"granted={'true' if cert.granted else 'false'}")
    for key in ("delta", "M", "epsilon", "gamma", "Htilde", "lambda1", "envelope_const"):
        print(f"{key}={fmt(getattr(cert, key))}")
    for name, ok, detail in cert.checks:
        print(f"check.{name}={'pass' if ok else 'FAIL'} ({detail})")
    if cert.first_failing:
        print(f"first_failing={cert.first_failing}")
    return 0 if cert.granted else 2


def _cmd_criterion(cfg, args):
    dom = build_domain(cfg)
    lam, _ = experiments._resolve_lambda1(cfg, dom)
    res = theorem1_criterion(cfg.source, cfg.q, lam)
    print(f"verdict={res.verdict}")
    print(f"lambda1={fmt(res.lambda1_used)}")
    print(f"growth_rate={fmt(res.growth_rate)}")
    if res.eps is not None:
        print(f"witness_eps={fmt(res.eps)}")
    return 0


def _cmd_dichotomy(cfg, args):
    rows, summary, _ = experiments.dichotomy_sweep(
        cfg, out_dir=args.out, seed=args.seed, jobs=args.jobs
    )
    print(",".join(experiments.SWEEP_COLUMNS))
    for r in rows:
        print(",".join(r.csv_values()))
    print(
        f"# threshold={fmt(summary['threshold'])} "
        f"transition=({fmt(summary['transition_low'])}, {fmt(summary['transition_high'])})"
    )
    rep = report(rows)
    print(rep.text, end="")
    return 0 if rep.ok else 2


def _cmd_report(args):
    indir = Path(args.indir)
    sweep = indir / "sweep.csv"
    if not sweep.exists():
        raise GraphHeatError(f"no sweep.csv under {indir}")
    rows = _rows_from_csv(sweep.read_text())
    kr = None
    krfile = indir / "kernel_report.txt"
    if krfile.exists():
        from .heat import KernelReport

        vals = {}
        for line in krfile.read_text().splitlines():
            if "=" in line:
                k, _, v = line.partition("=")
                vals[k.strip()] = float(v)
        kr = KernelReport(**vals)
    rep = report(rows, kernel_report=kr)
    print(rep.text, end="")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "report.csv").write_text(rep.csv_text)
        (Path(args.out) / "report.txt").write_text(rep.text)
    return 0 if rep.ok else 2


def _rows_from_csv(text):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    rows = []
    for ln in lines[1:]:
        vals = dict(zip(header, ln.split(",")))
        num = lambda k: float(vals[k]) if vals.get(k) else None
        rows.append(
            SweepRow(
                alpha=num("alpha"),
                lambda1=num("lambda1"),
                criterion=vals.get("criterion", ""),
                criterion_eps=num("criterion_eps"),
                certificate=vals.get("certificate", ""),
                certificate_detail=vals.get("certificate_detail", ""),
                verdict=vals.get("verdict", ""),
                t_lo=num("t_lo"),
                t_hi=num("t_hi"),
                final_supnorm=num("final_supnorm"),
                T_upper=num("T_upper"),
                envelope_ok=vals.get("envelope_ok", ""),
                error=vals.get("error", ""),
            )
        )
    return rows


def _emit(text, out, name, quiet=False):
    if out:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text)
        if not quiet:
            print(f"wrote {path / name}")
    else:
        print(text, end="")


if __name__ == "__main__":
    sys.exit(main())
