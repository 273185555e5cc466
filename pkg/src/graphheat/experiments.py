"""Configuration-driven experiment runner: scenarios, sweeps, reports.

Configs are flat INI files ([graph], [source], [problem], [analysis],
[lambda1], [kernel], [sweep], [output]).  A scenario builds a domain and
datum, optionally validates the kernel, measures the spectral bottom (single
radius or exhaustion), runs the slab solver with the analysis battery
(criterion, certificate, blow-up time bound, kernel envelope monitor,
reference cross-check), and writes CSV/text artifacts plus a manifest with
content hashes.  CSV bytes are deterministic for a fixed (config, seed);
timings live only in the manifest.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .analysis import (
    lemma2_blowup_time_bound,
    theorem1_criterion,
    theorem2_certificate,
)
from .errors import ConfigError, GraphHeatError, NoBoundInHorizonError
from .graphs import FamilySpec, load_graph
from .heat import heat_kernel_column, validate_kernel
from .solver import BLOWUP, COMPLETED, Problem, global_bound_monitor, mol_reference_solve, solve
from .sources import SourceSpec
from .spectral import lambda1 as spectral_lambda1
from .spectral import lambda1_exhaustion

__all__ = [
    "ScenarioConfig",
    "SweepRow",
    "ScenarioResult",
    "Report",
    "run_scenario",
    "dichotomy_sweep",
    "report",
    "fmt",
]

SWEEP_COLUMNS = [
    "alpha",
    "lambda1",
    "criterion",
    "criterion_eps",
    "certificate",
    "certificate_detail",
    "verdict",
    "t_lo",
    "t_hi",
    "final_supnorm",
    "T_upper",
    "envelope_ok",
    "error",
]


def fmt(x):
    """Fixed CSV float format: scientific, 17 significant digits."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


@dataclass
class ScenarioConfig:
    family: FamilySpec | None = None
    radius: int | None = None
    graph_file: str | None = None

    source: SourceSpec = field(default_factory=lambda: SourceSpec.constant(1.0))

    q: float = 2.0
    u0_kind: str = "constant"  # constant | kernel | point | file
    u0_value: float = 1.0
    u0_eps: float = 0.01
    u0_gamma: float = 1.0
    u0_file: str | None = None
    horizon: float | None = None
    tol: float = 1e-10
    blowup_threshold: float = 1e12
    dt_min: float = 1e-10
    dt_max: float = 0.25
    nodes_per_slab: int = 16
    record_dt: float | None = None

    gamma: float = 1.0
    y0: int | None = None
    probes: str = "origin,mid"
    run_criterion: bool = True
    run_certificate: bool = True
    run_bound: bool = True
    run_monitor: bool = True
    mol_check: bool = False

    lambda1_radii: list | None = None
    lambda1_value: float | None = None
    lambda1_tol: float = 1e-10

    kernel_validate: bool = False
    kernel_vertices: str = "origin,mid"
    kernel_times: tuple = (0.1, 0.5, 1.0, 2.0)

    alphas: list | None = None
    seed: int = 0
    output_dir: str | None = None
    fields_at: tuple = ()

    @classmethod
    def from_ini(cls, path):
        cp = configparser.ConfigParser(interpolation=None)
        read = cp.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        cfg = cls()

        def get(section, key, conv, default):
            if not cp.has_option(section, key):
                return default
            raw = cp.get(section, key)
            try:
                return conv(raw)
            except (ValueError, GraphHeatError) as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from exc

        floats = lambda raw: [float(x) for x in raw.replace(",", " ").split()]
        ints = lambda raw: [int(x) for x in raw.replace(",", " ").split()]
        boolean = lambda raw: raw.strip().lower() in ("1", "true", "yes", "on")

        cfg.family = get("graph", "family", FamilySpec.parse, None)
        cfg.radius = get("graph", "radius", int, None)
        cfg.graph_file = get("graph", "file", str, None)
        if cfg.family is None and cfg.graph_file is None:
            raise ConfigError("[graph] family or file: one of the two is required")
        if cfg.graph_file and not Path(cfg.graph_file).exists():
            raise ConfigError(f"[graph] file: {cfg.graph_file} does not exist")

        kind = get("source", "kind", str, "constant")
        if kind == "constant":
            cfg.source = SourceSpec.constant(get("source", "h0", float, 1.0))
        elif kind == "exponential":
            cfg.source = SourceSpec.exponential(get("source", "alpha", float, 0.0))
        elif kind == "power":
            cfg.source = SourceSpec.power(get("source", "beta", float, 1.0))
        elif kind == "table":
            tt = get("source", "table_t", floats, None)
            th = get("source", "table_h", floats, None)
            if tt is None or th is None:
                raise ConfigError("[source] table_t/table_h: required for kind=table")
            cfg.source = SourceSpec.table(tt, th)
        else:
            raise ConfigError(f"[source] kind: unknown kind {kind!r}")

        cfg.q = get("problem", "q", float, cfg.q)
        if cfg.q <= 1:
            raise ConfigError(f"[problem] q: exponent must exceed 1, got {cfg.q}")
        u0 = get("problem", "u0", str, "constant:1.0")
        cfg._parse_u0(u0)
        cfg.horizon = get("problem", "horizon", float, None)
        cfg.tol = get("problem", "tol", float, cfg.tol)
        cfg.blowup_threshold = get("problem", "blowup_threshold", float, cfg.blowup_threshold)
        cfg.dt_min = get("problem", "dt_min", float, cfg.dt_min)
        cfg.dt_max = get("problem", "dt_max", float, cfg.dt_max)
        cfg.nodes_per_slab = get("problem", "nodes_per_slab", int, cfg.nodes_per_slab)
        cfg.record_dt = get("problem", "record_dt", float, cfg.record_dt)

        cfg.gamma = get("analysis", "gamma", float, cfg.gamma)
        cfg.y0 = get("analysis", "y0", int, None)
        cfg.probes = get("analysis", "probes", str, cfg.probes)
        cfg.run_criterion = get("analysis", "criterion", boolean, cfg.run_criterion)
        cfg.run_certificate = get("analysis", "certificate", boolean, cfg.run_certificate)
        cfg.run_bound = get("analysis", "bound", boolean, cfg.run_bound)
        cfg.run_monitor = get("analysis", "monitor", boolean, cfg.run_monitor)
        cfg.mol_check = get("analysis", "mol_check", boolean, cfg.mol_check)

        cfg.lambda1_radii = get("lambda1", "radii", ints, None)
        cfg.lambda1_value = get("lambda1", "value", float, None)
        cfg.lambda1_tol = get("lambda1", "tol", float, cfg.lambda1_tol)

        cfg.kernel_validate = get("kernel", "validate", boolean, cfg.kernel_validate)
        cfg.kernel_vertices = get("kernel", "vertices", str, cfg.kernel_vertices)
        cfg.kernel_times = tuple(get("kernel", "times", floats, list(cfg.kernel_times)))

        alphas = get("sweep", "alphas", floats, None)
        if cp.has_section("sweep") and cp.has_option("sweep", "alphas") and not alphas:
            raise ConfigError("[sweep] alphas: grid must be nonempty")
        cfg.alphas = alphas

        cfg.seed = get("output", "seed", int, cfg.seed)
        cfg.output_dir = get("output", "dir", str, None)
        cfg.fields_at = tuple(get("output", "fields_at", floats, []))

        if cfg.u0_kind == "file" and not Path(cfg.u0_file).exists():
            raise ConfigError(f"[problem] u0: file {cfg.u0_file} does not exist")
        return cfg

    def _parse_u0(self, text):
        head, _, tail = text.partition(":")
        head = head.strip()
        kv = {}
        if tail and "=" in tail:
            for item in tail.split(","):
                k, _, v = item.partition("=")
                kv[k.strip()] = v.strip()
        try:
            if head == "constant":
                self.u0_kind = "constant"
                self.u0_value = float(kv.get("value", tail or 1.0))
            elif head == "kernel":
                self.u0_kind = "kernel"
                self.u0_eps = float(kv.get("eps", 0.01))
                self.u0_gamma = float(kv.get("gamma", 1.0))
            elif head == "point":
                self.u0_kind = "point"
                self.u0_value = float(kv.get("value", tail or 1.0))
            elif head == "file":
                self.u0_kind = "file"
                self.u0_file = tail
            else:
                raise ValueError(f"unknown datum kind {head!r}")
        except ValueError as exc:
            raise ConfigError(f"[problem] u0: {exc}") from exc


def build_domain(cfg):
    if cfg.graph_file:
        return load_graph(cfg.graph_file)
    return cfg.family.instantiate(cfg.radius)


def build_datum(cfg, domain, tol=1e-12):
    y0 = cfg.y0 if cfg.y0 is not None else domain.origin
    if cfg.u0_kind == "constant":
        return np.full(domain.n, cfg.u0_value)
    if cfg.u0_kind == "kernel":
        col = heat_kernel_column(domain, y0, [cfg.u0_gamma], tol)
        return cfg.u0_eps * col.values[0]
    if cfg.u0_kind == "point":
        u0 = np.zeros(domain.n)
        u0[y0] = cfg.u0_value
        return u0
    data = {}
    with open(cfg.u0_file, encoding="ascii") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                vid, val = line.split()
                data[int(vid)] = float(val)
    u0 = np.zeros(domain.n)
    for vid, val in data.items():
        u0[vid] = val
    return u0


def _probe_vertices(cfg, domain, rng):
    out = []
    for token in cfg.probes.replace(",", " ").split():
        if token == "origin":
            out.append(domain.origin)
        elif token == "mid":
            # a vertex roughly half way out: id midpoint works for BFS-ordered balls
            out.append(domain.n // 2)
        elif token.startswith("random"):
            _, _, k = token.partition(":")
            out.extend(int(v) for v in rng.integers(0, domain.n, size=int(k or 1)))
        else:
            out.append(int(token))
    seen = []
    for v in out:
        if v not in seen:
            seen.append(v)
    return seen


@dataclass
class SweepRow:
    alpha: float | None
    lambda1: float | None
    criterion: str = ""
    criterion_eps: float | None = None
    certificate: str = ""
    certificate_detail: str = ""
    verdict: str = ""
    t_lo: float | None = None
    t_hi: float | None = None
    final_supnorm: float | None = None
    T_upper: float | None = None
    envelope_ok: str = ""
    error: str = ""

    def csv_values(self):
        return [
            fmt(self.alpha),
            fmt(self.lambda1),
            self.criterion,
            fmt(self.criterion_eps),
            self.certificate,
            self.certificate_detail,
            self.verdict,
            fmt(self.t_lo),
            fmt(self.t_hi),
            fmt(self.final_supnorm),
            fmt(self.T_upper),
            self.envelope_ok,
            self.error.replace(",", ";"),
        ]


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    domain: object
    lambda1_used: float | None
    exhaustion: object | None
    kernel_report: object | None
    trajectory: object | None
    reference: object | None
    certificate: object | None
    criterion: object | None
    monitor: object | None
    T_upper: float | None
    row: SweepRow
    files: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)


def _resolve_lambda1(cfg, domain):
    """(value, exhaustion result or None); extrapolated limit when radii given."""
    if cfg.lambda1_value is not None:
        return float(cfg.lambda1_value), None
    if cfg.lambda1_radii and cfg.family is not None:
        ex = lambda1_exhaustion(cfg.family, cfg.lambda1_radii, tol=cfg.lambda1_tol)
        return float(ex.limit), ex
    return float(spectral_lambda1(domain, tol=cfg.lambda1_tol).lambda1), None


def run_scenario(cfg, out_dir=None, seed=None, jobs=1):
    """Execute one scenario (graph + source + datum) with its analysis battery.

    Writes artifacts and a manifest when an output directory is configured;
    returns a ScenarioResult either way.  Module errors inside the analysis
    battery are recorded on the row, not raised.
    """
    t_start = time.perf_counter()
    seed = cfg.seed if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    timings = {}

    if cfg.alphas:
        return dichotomy_sweep(cfg, out_dir=out_dir, seed=seed, jobs=jobs)

    domain = build_domain(cfg)
    lam, exhaustion = (None, None)
    result = ScenarioResult(
        config=cfg,
        domain=domain,
        lambda1_used=None,
        exhaustion=None,
        kernel_report=None,
        trajectory=None,
        reference=None,
        certificate=None,
        criterion=None,
        monitor=None,
        T_upper=None,
        row=SweepRow(alpha=getattr(cfg.source, "alpha", None), lambda1=None),
        timings=timings,
    )

    t0 = time.perf_counter()
    lam, exhaustion = _resolve_lambda1(cfg, domain)
    timings["lambda1"] = time.perf_counter() - t0
    result.lambda1_used = lam
    result.exhaustion = exhaustion
    result.row.lambda1 = lam

    if cfg.kernel_validate:
        t0 = time.perf_counter()
        verts = _probe_vertices(replace(cfg, probes=cfg.kernel_vertices), domain, rng)
        result.kernel_report = validate_kernel(domain, verts, cfg.kernel_times, tol=1e-12)
        timings["kernel"] = time.perf_counter() - t0

    if cfg.horizon is not None:
        _run_solve_stage(cfg, domain, lam, result, rng)

    timings["total"] = time.perf_counter() - t_start
    if out_dir or cfg.output_dir:
        _write_artifacts(result, Path(out_dir or cfg.output_dir), seed)
    return result


def _run_solve_stage(cfg, domain, lam, result, rng):
    row = result.row
    u0 = build_datum(cfg, domain)
    problem = Problem(
        domain=domain,
        q=cfg.q,
        h=cfg.source,
        u0=u0,
        horizon=cfg.horizon,
        tol=cfg.tol,
        blowup_threshold=cfg.blowup_threshold,
        dt_min=cfg.dt_min,
        dt_max=cfg.dt_max,
        nodes_per_slab=cfg.nodes_per_slab,
        record_dt=cfg.record_dt,
    )
    y0 = cfg.y0 if cfg.y0 is not None else domain.origin
    timings = result.timings

    t0 = time.perf_counter()
    traj = solve(problem)
    timings["solve"] = time.perf_counter() - t0
    result.trajectory = traj
    row.verdict = traj.verdict
    if traj.bracket:
        row.t_lo, row.t_hi = traj.bracket
    row.final_supnorm = float(traj.supnorm[-1])

    if cfg.run_criterion and lam is not None and lam > 0:
        try:
            crit = theorem1_criterion(cfg.source, cfg.q, lam)
            result.criterion = crit
            row.criterion = crit.verdict
            row.criterion_eps = crit.eps
        except GraphHeatError as exc:
            row.error += f"criterion: {exc}; "

    if cfg.run_certificate and lam is not None and lam > 0:
        try:
            t0 = time.perf_counter()
            cert = theorem2_certificate(
                domain, u0, cfg.q, cfg.source, gamma=cfg.gamma, y0=y0, lam=lam
            )
            timings["certificate"] = time.perf_counter() - t0
            result.certificate = cert
            row.certificate = "granted" if cert.granted else "refuted"
            row.certificate_detail = (
                f"M={fmt(cert.M)}" if cert.granted else cert.first_failing or ""
            )
        except GraphHeatError as exc:
            row.error += f"certificate: {exc}; "

    if cfg.run_bound and np.any(u0 > 0):
        try:
            t0 = time.perf_counter()
            probes = _probe_vertices(cfg, domain, rng)
            cap = max(10.0 * cfg.horizon, 400.0)
            row.T_upper = lemma2_blowup_time_bound(
                u0, domain, probes, cfg.q, cfg.source, search_cap=cap
            )
            result.T_upper = row.T_upper
            timings["bound"] = time.perf_counter() - t0
        except NoBoundInHorizonError:
            row.T_upper = math.inf
        except GraphHeatError as exc:
            row.error += f"bound: {exc}; "

    cert = result.certificate
    if cfg.run_monitor and cert is not None and cert.granted and traj.verdict == COMPLETED:
        try:
            t0 = time.perf_counter()
            mon = global_bound_monitor(traj, domain, y0, cert.gamma, cert.M)
            timings["monitor"] = time.perf_counter() - t0
            result.monitor = mon
            row.envelope_ok = "true" if mon.ok else "false"
        except GraphHeatError as exc:
            row.error += f"monitor: {exc}; "

    if cfg.mol_check:
        t0 = time.perf_counter()
        result.reference = mol_reference_solve(problem)
        timings["reference"] = time.perf_counter() - t0


def dichotomy_sweep(cfg, out_dir=None, seed=None, jobs=1):
    """Run the scenario across an alpha grid of exponential sources.

    Returns (rows, summary).  The spectral bottom is resolved once and shared;
    each sweep point runs independently (errors isolate to their row) and
    rows are emitted in grid order regardless of completion order.
    """
    if not cfg.alphas:
        raise ConfigError("[sweep] alphas: grid must be nonempty for a dichotomy sweep")
    seed = cfg.seed if seed is None else int(seed)
    base_domain = build_domain(cfg)
    lam, exhaustion = _resolve_lambda1(cfg, base_domain)

    results = [None] * len(cfg.alphas)

    def one(k):
        alpha = float(cfg.alphas[k])
        point = replace(
            cfg,
            source=SourceSpec.exponential(alpha),
            alphas=None,
            lambda1_value=lam,
            lambda1_radii=None,
            output_dir=None,
            kernel_validate=False,
        )
        try:
            return run_scenario(point, out_dir=None, seed=seed)
        except GraphHeatError as exc:
            row = SweepRow(alpha=alpha, lambda1=lam)
            row.error = f"{type(exc).__name__}: {exc}"
            return ScenarioResult(
                config=point,
                domain=base_domain,
                lambda1_used=lam,
                exhaustion=None,
                kernel_report=None,
                trajectory=None,
                reference=None,
                certificate=None,
                criterion=None,
                monitor=None,
                T_upper=None,
                row=row,
            )

    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for k, res in enumerate(pool.map(one, range(len(cfg.alphas)))):
                results[k] = res
    else:
        for k in range(len(cfg.alphas)):
            results[k] = one(k)

    rows = [r.row for r in results]
    blow = [float(r.alpha) for r in rows if r.verdict == BLOWUP]
    done = [float(r.alpha) for r in rows if r.verdict == COMPLETED]
    summary = {
        "lambda1": lam,
        "threshold": (cfg.q - 1.0) * lam,
        "transition_low": max(done) if done else None,
        "transition_high": min(blow) if blow else None,
        "exhaustion_fit_residual": exhaustion.fit_residual if exhaustion else None,
    }
    if out_dir or cfg.output_dir:
        _write_sweep(cfg, results, rows, summary, Path(out_dir or cfg.output_dir), seed, exhaustion)
    return rows, summary, results


# -- artifact writing ---------------------------------------------------------


def _trajectory_csv(result):
    traj = result.trajectory
    lines = ["t,supnorm,mass,ratio_to_kernel"]
    mass = traj.mass(result.domain)
    ratios = {}
    if result.monitor is not None:
        ratios = {float(t): r for t, r in zip(result.monitor.times, result.monitor.ratios)}
    for k, t in enumerate(traj.times):
        r = ratios.get(float(t))
        lines.append(f"{fmt(t)},{fmt(traj.supnorm[k])},{fmt(mass[k])},{fmt(r)}")
    return "\n".join(lines) + "\n"


def _verdict_text(result):
    row = result.row
    lines = [f"verdict={row.verdict} t_lo={fmt(row.t_lo)} t_hi={fmt(row.t_hi)}"]
    for key, val in [
        ("lambda1", row.lambda1),
        ("criterion", row.criterion or None),
        ("criterion_eps", row.criterion_eps),
        ("certificate", row.certificate or None),
        ("certificate_detail", row.certificate_detail or None),
        ("T_upper", row.T_upper),
        ("envelope_ok", row.envelope_ok or None),
        ("final_supnorm", row.final_supnorm),
        ("error", row.error or None),
    ]:
        if val is not None:
            lines.append(f"{key}={val if isinstance(val, str) else fmt(val)}")
    return "\n".join(lines) + "\n"


def _lambda1_csv(exhaustion):
    lines = ["radius,lambda1,residual,iterations"]
    for est in exhaustion.estimates:
        lines.append(
            f"{est.radius},{fmt(est.lambda1)},{fmt(est.residual)},{est.iterations}"
        )
    lines.append(f"# extrapolated_limit={fmt(exhaustion.limit)}")
    lines.append(f"# fit_residual={fmt(exhaustion.fit_residual)}")
    return "\n".join(lines) + "\n"


def _write_file(path, text, files):
    path.parent.mkdir(parents=True, exist_ok=True)
    data = text.encode()
    path.write_bytes(data)
    files[path.name] = hashlib.sha256(data).hexdigest()


def _manifest(out, files, seed, timings):
    payload = {
        "created": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "files": [{"name": k, "sha256": v} for k, v in sorted(files.items())],
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
    }
    (out / "manifest.json").write_text(json.dumps(payload, indent=2) + "\n")


def _write_artifacts(result, out, seed):
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    if result.trajectory is not None:
        _write_file(out / "trajectory.csv", _trajectory_csv(result), files)
        _write_file(out / "verdict.txt", _verdict_text(result), files)
        for t in result.config.fields_at:
            traj = result.trajectory
            k = int(np.argmin(np.abs(traj.times - t)))
            body = "vertex,u\n" + "\n".join(
                f"{x},{fmt(v)}" for x, v in enumerate(traj.fields[k])
            )
            _write_file(out / f"fields_t{t:g}.csv", body + "\n", files)
    if result.kernel_report is not None:
        _write_file(out / "kernel_report.txt", "\n".join(result.kernel_report.lines()) + "\n", files)
    if result.exhaustion is not None:
        _write_file(out / "lambda1.csv", _lambda1_csv(result.exhaustion), files)
    result.files = files
    _manifest(out, files, seed, result.timings)


def _write_sweep(cfg, results, rows, summary, out, seed, exhaustion):
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    body = ",".join(SWEEP_COLUMNS) + "\n"
    body += "\n".join(",".join(r.csv_values()) for r in rows) + "\n"
    _write_file(out / "sweep.csv", body, files)
    for res in results:
        if res.trajectory is not None:
            _write_file(
                out / f"trajectory_alpha={res.row.alpha:g}.csv", _trajectory_csv(res), files
            )
    if exhaustion is not None:
        _write_file(out / "lambda1.csv", _lambda1_csv(exhaustion), files)
    txt = [
        f"lambda1={fmt(summary['lambda1'])}",
        f"threshold=(q-1)*lambda1={fmt(summary['threshold'])}",
        f"transition_interval=({fmt(summary['transition_low'])}, {fmt(summary['transition_high'])})",
    ]
    _write_file(out / "summary.txt", "\n".join(txt) + "\n", files)
    timings = {}
    for res in results:
        for k, v in res.timings.items():
            timings[f"alpha={res.row.alpha:g}/{k}"] = v
    _manifest(out, files, seed, timings)


# -- report -------------------------------------------------------------------


@dataclass
class Report:
    text: str
    csv_text: str
    ok: bool


def report(rows, kernel_report=None, tol=1e-8):
    """Human-readable pass/fail summary plus the machine CSV for sweep rows.

    Named checks: kernel_mass_bound, semigroup_identity, kernel_symmetry,
    kernel_positivity, kernel_decay_consistency (when a kernel report is
    given); blowup_time_bound, kernel_envelope, dichotomy_consistency
    (from the rows).
    """
    if not rows:
        raise ConfigError("report: need at least one row")
    checks = []

    if kernel_report is not None:
        kr = kernel_report
        checks.append(("kernel_symmetry", kr.symmetry_residual <= 1e-8,
                       f"residual={fmt(kr.symmetry_residual)}"))
        checks.append(("kernel_mass_bound", kr.mass_max <= 1.0 + 1e-10,
                       f"max_mass={fmt(kr.mass_max)}"))
        checks.append(("semigroup_identity", kr.semigroup_residual <= 1e-6,
                       f"residual={fmt(kr.semigroup_residual)}"))
        checks.append(("kernel_positivity", kr.positivity_min > 0.0,
                       f"min={fmt(kr.positivity_min)}"))
        rel = abs(kr.decay_slope - kr.decay_slope_target) / max(abs(kr.decay_slope_target), 1e-10)
        checks.append(("kernel_decay_consistency", rel <= 0.02, f"rel_err={fmt(rel)}"))

    bound_ok, env_ok, dicho_ok = True, True, True
    details_b, details_e, details_d = [], [], []
    for r in rows:
        if r.error:
            dicho_ok = False
            details_d.append(f"alpha={r.alpha}: error {r.error}")
            continue
        if r.verdict == BLOWUP and r.T_upper is not None and math.isfinite(r.T_upper):
            if not r.t_lo <= 1.01 * r.T_upper:
                bound_ok = False
                details_b.append(f"alpha={r.alpha}: t_lo={fmt(r.t_lo)} > 1.01*T_upper={fmt(r.T_upper)}")
        if r.certificate == "granted":
            if r.verdict != COMPLETED or r.envelope_ok == "false":
                env_ok = False
                details_e.append(f"alpha={r.alpha}: verdict={r.verdict} envelope={r.envelope_ok}")
        if r.criterion == "Diverges" and r.verdict not in (BLOWUP, ""):
            dicho_ok = False
            details_d.append(f"alpha={r.alpha}: Diverges but verdict {r.verdict}")
    checks.append(("blowup_time_bound", bound_ok, "; ".join(details_b) or "all brackets below bound"))
    checks.append(("kernel_envelope", env_ok, "; ".join(details_e) or "all granted envelopes held"))
    checks.append(("dichotomy_consistency", dicho_ok, "; ".join(details_d) or "verdicts consistent"))

    lines = []
    ok_all = True
    for name, ok, detail in checks:
        ok_all &= bool(ok)
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    lines.append("ALL CHECKS PASSED" if ok_all else "CHECKS FAILED")
    csv_text = ",".join(SWEEP_COLUMNS) + "\n" + "\n".join(
        ",".join(r.csv_values()) for r in rows
    ) + "\n"
    return Report(text="\n".join(lines) + "\n", csv_text=csv_text, ok=ok_all)
