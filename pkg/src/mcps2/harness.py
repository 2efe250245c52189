"""Seeded Monte Carlo experiments: certificate rates and support recovery.

Every trial draws its instance from a seed derived from
``(master_seed, m, trial)``, and all methods in a trial share that instance.
Results are folded in ``(m, trial)`` order, so the output does not depend on
how work is scheduled across processes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import Hyperparams, RankDeficientError, lambda_feasible_range
from .metrics import ROW_FIELDS, TIMING_FIELDS, default_tau, score
from .problem import GeneratorConfig, generate_instance
from .solvers import admm_lasso, admm_mcps2, global_minimize_bruteforce

log = logging.getLogger(__name__)

CONDITION_METHODS = ("lasso", "mcps2")
RECOVERY_METHODS = ("lasso_admm", "mcps2_admm", "oracle")

DEFAULT_CERT_GRID = tuple(float(v) for v in np.logspace(-6, 0, 61))
DEFAULT_RECOVERY_GRID = (1e-3, 2e-3, 5e-3, 1e-2, 2e-2, 5e-2, 1e-1)

ASSUMPTIONS = {
    "signs": "nonzero signs drawn by a fair coin",
    "noise": "uniform[-1,1] entries rescaled to the exact inf-norm bound",
    "recovery_setup": "n=100, k=5, d=1, magnitudes [0.5, 1] unless overridden",
    "c3_verdict": "epsilon -> 0 limit (q > 0) unless strict",
    "support_threshold": "|x_i| > tau, tau = 1e-3*d unless overridden",
    "lambda_selection": "per-method fixed lambda, best mean VSC on held-out pilot seeds",
}


def derive_seed(master_seed: int, m: int, trial: int, stream: int = 0) -> int:
    """64-bit trial seed from (master_seed, m, trial); stream 1 is the pilot."""
    ss = np.random.SeedSequence([int(master_seed), int(m), int(trial), int(stream)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class ExperimentConfig:
    base: GeneratorConfig
    m_grid: tuple
    trials_per_m: int
    methods: tuple
    lambda_grid: tuple = ()
    master_seed: int = 0
    output_dir: str | None = None
    emit_charts: bool = False
    noise_levels: tuple | None = None
    epsilon: float = 1e-3
    alpha: float = 3.0
    strict_c3: bool = False
    lambdas: dict | None = None
    pilot_trials: int = 20
    rho: float | None = None
    max_iters: int = 10_000
    tau: float | None = None
    oracle_grid_step: float | None = None
    workers: int = 1

    def __post_init__(self):
        self.m_grid = tuple(int(m) for m in self.m_grid)
        self.methods = tuple(self.methods)
        self.lambda_grid = tuple(float(v) for v in self.lambda_grid)
        if not self.m_grid:
            raise ValueError("m_grid must be nonempty")
        if self.trials_per_m < 1:
            raise ValueError("trials_per_m must be positive")
        if not self.methods:
            raise ValueError("no methods configured")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["base"] = asdict(self.base)
        return d


@dataclass
class Row:
    method: str
    m: int
    trial: int
    seed: int
    vsc: int
    fp: float = math.nan
    fn: float = math.nan
    l2: float = math.nan
    status: str = "ok"
    runtime: float = math.nan


@dataclass
class ExperimentReport:
    kind: str
    rows: list
    summary: list
    config: dict = field(default_factory=dict)
    version: str = __version__

    def rate(self, method: str, m: int) -> float:
        for s in self.summary:
            if s["method"] == method and s["m"] == m:
                return s["rate"]
        raise KeyError((method, m))


def _nanmean(vals):
    vals = [v for v in vals if not math.isnan(v)]
    return math.fsum(vals) / len(vals) if vals else math.nan


def aggregate(rows) -> list:
    """Per (method, m) means, in first-seen order of methods and m."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.method, r.m), []).append(r)
    out = []
    for (method, m), rs in groups.items():
        rt = [r.runtime for r in rs if not math.isnan(r.runtime)]
        out.append(
            {
                "method": method,
                "m": m,
                "trials": len(rs),
                "rate": math.fsum(r.vsc for r in rs) / len(rs),
                "fp_rate": _nanmean([r.fp for r in rs]),
                "fn_rate": _nanmean([r.fn for r in rs]),
                "mean_l2": _nanmean([r.l2 for r in rs]),
                "mean_runtime": math.fsum(rt) / len(rt) if rt else math.nan,
                "median_runtime": statistics.median(rt) if rt else math.nan,
            }
        )
    return out


def _run(fn, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [fn(t) for t in tasks]


def _noise_label(method, noise, noise_levels):
    return method if len(noise_levels) == 1 else f"{method}[eta={noise:g}]"


def _condition_trial(task):
    base, m, trial, seed, methods, noise_levels, grid, eps, alpha, strict = task
    out = []
    for noise in noise_levels:
        cfg = base.replace(m=m, rng_seed=seed, noise_inf_bound=noise)
        inst = generate_instance(cfg)
        for method in methods:
            t0 = time.perf_counter()
            status = "ok"
            try:
                passes = lambda_feasible_range(inst, method, grid, eps, alpha, strict)
                ok = any(p for _, p in passes)
            except RankDeficientError as exc:
                ok, status = False, f"error: {exc}"
            out.append(
                Row(
                    method=_noise_label(method, noise, noise_levels),
                    m=m,
                    trial=trial,
                    seed=seed,
                    vsc=int(ok),
                    status=status,
                    runtime=time.perf_counter() - t0,
                )
            )
    return out


def run_condition_rate_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Fraction of instances for which some grid lambda certifies support recovery."""
    bad = set(cfg.methods) - set(CONDITION_METHODS)
    if bad:
        raise ValueError(f"condition-rate methods must be in {CONDITION_METHODS}, got {sorted(bad)}")
    grid = cfg.lambda_grid or DEFAULT_CERT_GRID
    noise_levels = tuple(cfg.noise_levels) if cfg.noise_levels else (cfg.base.noise_inf_bound,)
    tasks = [
        (cfg.base, m, t, derive_seed(cfg.master_seed, m, t), cfg.methods, noise_levels,
         grid, cfg.epsilon, cfg.alpha, cfg.strict_c3)
        for m in cfg.m_grid
        for t in range(cfg.trials_per_m)
    ]
    rows = [r for chunk in _run(_condition_trial, tasks, cfg.workers) for r in chunk]
    # regroup so each (method, m) block is contiguous
    order = {lab: i for i, lab in enumerate(dict.fromkeys(r.method for r in rows))}
    rows.sort(key=lambda r: (order[r.method], r.m, r.trial))
    echo = cfg.to_dict()
    echo.update(lambda_grid=list(grid), noise_levels=list(noise_levels),
                assumptions=ASSUMPTIONS, seed_rule="SeedSequence([master_seed, m, trial, 0])")
    return ExperimentReport("condition_rate", rows, aggregate(rows), echo)


def _solve(method, inst, lam, cfg):
    if method == "oracle":
        return global_minimize_bruteforce(inst, lam, cfg.oracle_grid_step)
    hp = Hyperparams(lam=lam, rho=cfg.rho, max_iters=cfg.max_iters)
    if method == "lasso_admm":
        return admm_lasso(inst, hp)
    return admm_mcps2(inst, hp)


def _recovery_trial(task):
    cfg, m, trial, seed, lambdas = task
    inst = generate_instance(cfg.base.replace(m=m, rng_seed=seed))
    tau = cfg.tau if cfg.tau is not None else default_tau(inst.d)
    out = []
    for method in cfg.methods:
        try:
            res = _solve(method, inst, lambdas[method], cfg)
        except Exception as exc:  # recorded per row, the sweep goes on
            out.append(Row(method, m, trial, seed, 0, status=f"error: {exc}"))
            continue
        sc = score(res.x_hat, inst, tau)
        status = "ok" if res.converged else "not_converged"
        out.append(
            Row(method, m, trial, seed, int(sc.vsc), sc.false_positive_rate,
                sc.false_negative_rate, sc.l2_error, status, res.runtime_seconds)
        )
    return out


def select_lambdas(cfg: ExperimentConfig):
    """Pick one lambda per method by mean VSC over held-out pilot seeds.

    Returns ``(lambdas, table)`` where ``table`` lists every pilot score.
    Ties go to the earlier grid entry.
    """
    fixed = dict(cfg.lambdas or {})
    share = "oracle" in cfg.methods and "oracle" not in fixed and "mcps2_admm" in cfg.methods
    todo = [mth for mth in cfg.methods if mth not in fixed and not (share and mth == "oracle")]
    table = []
    if not todo:
        if share:
            fixed["oracle"] = fixed["mcps2_admm"]
        return fixed, table
    grid = cfg.lambda_grid or DEFAULT_RECOVERY_GRID
    seeds = [(m, t, derive_seed(cfg.master_seed, m, t, stream=1))
             for m in cfg.m_grid for t in range(cfg.pilot_trials)]
    scores = {mth: [] for mth in todo}
    for lam in grid:
        sub = ExperimentConfig(**{**cfg.__dict__, "methods": tuple(todo)})
        tasks = [(sub, m, t, s, {mth: lam for mth in todo}) for m, t, s in seeds]
        rows = [r for chunk in _run(_recovery_trial, tasks, cfg.workers) for r in chunk]
        for mth in todo:
            v = [r.vsc for r in rows if r.method == mth]
            rate = math.fsum(v) / len(v)
            scores[mth].append(rate)
            table.append({"method": mth, "lambda": lam, "pilot_vsc": rate})
    for mth in todo:
        fixed[mth] = grid[int(np.argmax(scores[mth]))]
    if share:
        # the oracle solves the same objective, so it uses the ADMM lambda
        fixed["oracle"] = fixed["mcps2_admm"]
    return fixed, table


def run_recovery_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Solve, threshold and score each method on paired random instances."""
    bad = set(cfg.methods) - set(RECOVERY_METHODS)
    if bad:
        raise ValueError(f"recovery methods must be in {RECOVERY_METHODS}, got {sorted(bad)}")
    lambdas, pilot = select_lambdas(cfg)
    log.info("recovery lambdas: %s", lambdas)
    tasks = [
        (cfg, m, t, derive_seed(cfg.master_seed, m, t), lambdas)
        for m in cfg.m_grid
        for t in range(cfg.trials_per_m)
    ]
    rows = [r for chunk in _run(_recovery_trial, tasks, cfg.workers) for r in chunk]
    order = {mth: i for i, mth in enumerate(cfg.methods)}
    rows.sort(key=lambda r: (order[r.method], r.m, r.trial))
    echo = cfg.to_dict()
    echo.update(
        lambdas_used=lambdas,
        pilot=pilot,
        tau=cfg.tau if cfg.tau is not None else default_tau(cfg.base.d),
        assumptions=ASSUMPTIONS,
        seed_rule="SeedSequence([master_seed, m, trial, 0]); pilot stream 1",
    )
    return ExperimentReport("recovery", rows, aggregate(rows), echo)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path, header, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for rec in records:
            w.writerow([_fmt(rec[h]) for h in header])


SUMMARY_FIELDS = ("method", "m", "trials", "rate", "fp_rate", "fn_rate", "mean_l2",
                  "mean_runtime", "median_runtime")


def emit_report(report: ExperimentReport, out_dir, emit_charts: bool = False) -> list:
    """Write rows.csv, timings.csv, summary.csv, config.echo and optional SVG charts.

    Wall-clock times live in timings.csv so that rows.csv is reproducible
    byte for byte.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [asdict(r) for r in report.rows]
    _write_csv(out / "rows.csv", ROW_FIELDS, rows)
    _write_csv(out / "timings.csv", TIMING_FIELDS, rows)
    _write_csv(out / "summary.csv", SUMMARY_FIELDS, report.summary)
    echo = {"kind": report.kind, "version": report.version, "config": report.config}
    (out / "config.echo").write_text(json.dumps(echo, indent=1, sort_keys=True, default=str) + "\n")
    files = [out / "rows.csv", out / "timings.csv", out / "summary.csv", out / "config.echo"]
    if emit_charts and report.summary:
        files += _charts(report, out)
    return files


def _charts(report, out):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if report.kind == "condition_rate":
        panels = [("condition_rate.svg", "rate", "certificate rate")]
    else:
        panels = [
            ("vsc.svg", "rate", "VSC rate"),
            ("fp.svg", "fp_rate", "false positive rate"),
            ("fn.svg", "fn_rate", "false negative rate"),
            ("runtime.svg", "mean_runtime", "mean runtime [s]"),
        ]
    methods = list(dict.fromkeys(s["method"] for s in report.summary))
    files = []
    for name, key, label in panels:
        with plt.rc_context({"svg.hashsalt": "mcps2"}):
            files.append(_panel(plt, report, methods, out / name, key, label))
    return files


def _panel(plt, report, methods, path, key, label):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for mth in methods:
        pts = sorted((s["m"], s[key]) for s in report.summary if s["method"] == mth)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=mth)
    ax.set_xlabel("m")
    ax.set_ylabel(label)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def read_rows(path) -> list:
    """Rows from rows.csv (and timings.csv next to it, when present)."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(Row(rec["method"], int(rec["m"]), int(rec["trial"]), int(rec["seed"]),
                            int(rec["vsc"]), float(rec["fp"]), float(rec["fn"]),
                            float(rec["l2"]), rec["status"]))
    tpath = path.with_name("timings.csv")
    if tpath.exists():
        with open(tpath, newline="") as fh:
            for r, rec in zip(rows, csv.DictReader(fh)):
                r.runtime = float(rec["runtime"])
    return rows


def read_summary(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rec = dict(rec)
            rec["m"] = int(rec["m"])
            rec["trials"] = int(rec["trials"])
            for k in SUMMARY_FIELDS[3:]:
                rec[k] = float(rec[k])
            out.append(rec)
    return out
