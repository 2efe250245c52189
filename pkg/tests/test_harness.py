import math

import numpy as np
import pytest

from mcps2.conditions import lambda_feasible_range
from mcps2.harness import (
    ExperimentConfig,
    aggregate,
    derive_seed,
    emit_report,
    read_rows,
    read_summary,
    run_condition_rate_experiment,
    run_recovery_experiment,
    select_lambdas,
)
from mcps2.problem import GeneratorConfig, generate_instance


BASE = GeneratorConfig(n=30, m=10, k=3)


def test_derive_seed_distinct_and_stable():
    seeds = {derive_seed(0, m, t) for m in (10, 20) for t in range(50)}
    assert len(seeds) == 100
    assert derive_seed(0, 10, 3) == derive_seed(0, 10, 3)
    assert derive_seed(0, 10, 3) != derive_seed(0, 10, 3, stream=1)
    assert derive_seed(0, 10, 3) != derive_seed(1, 10, 3)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(base=BASE, m_grid=(), trials_per_m=1, methods=("lasso",))
    with pytest.raises(ValueError):
        ExperimentConfig(base=BASE, m_grid=(10,), trials_per_m=0, methods=("lasso",))
    cfg = ExperimentConfig(base=BASE, m_grid=(10,), trials_per_m=1, methods=("ridge",))
    with pytest.raises(ValueError):
        run_condition_rate_experiment(cfg)
    with pytest.raises(ValueError):
        run_recovery_experiment(cfg)


def test_condition_rates_match_direct_computation():
    grid = (1e-4, 1e-3, 1e-2)
    cfg = ExperimentConfig(base=BASE, m_grid=(15, 25), trials_per_m=6,
                           methods=("lasso", "mcps2"), lambda_grid=grid, master_seed=3)
    rep = run_condition_rate_experiment(cfg)
    assert len(rep.rows) == 2 * 2 * 6
    for method in ("lasso", "mcps2"):
        for m in (15, 25):
            hits = 0
            for t in range(6):
                inst = generate_instance(BASE.replace(m=m, rng_seed=derive_seed(3, m, t)))
                hits += any(ok for _, ok in lambda_feasible_range(inst, method, grid))
            assert rep.rate(method, m) == pytest.approx(hits / 6)
    for r in rep.rows:
        assert math.isnan(r.fp) and r.status == "ok"


def test_condition_noise_levels_share_instances():
    cfg = ExperimentConfig(base=BASE, m_grid=(20,), trials_per_m=4, methods=("mcps2",),
                           lambda_grid=(1e-3,), noise_levels=(0.0, 1e-3))
    rep = run_condition_rate_experiment(cfg)
    labels = [r.method for r in rep.rows]
    assert labels == ["mcps2[eta=0]"] * 4 + ["mcps2[eta=0.001]"] * 4
    assert [r.seed for r in rep.rows[:4]] == [r.seed for r in rep.rows[4:]]


def test_aggregate():
    from mcps2.harness import Row
    rows = [Row("a", 10, 0, 1, 1, 0.0, 0.0, 1.0, runtime=1.0),
            Row("a", 10, 1, 2, 0, 0.5, 0.5, 3.0, runtime=3.0)]
    (s,) = aggregate(rows)
    assert s["rate"] == 0.5 and s["mean_l2"] == 2.0 and s["trials"] == 2
    assert s["fp_rate"] == 0.25 and s["mean_runtime"] == 2.0


def test_select_lambdas_prefers_pilot_best_and_shares_oracle():
    base = GeneratorConfig(n=8, m=6, k=2)
    cfg = ExperimentConfig(base=base, m_grid=(6,), trials_per_m=1,
                           methods=("mcps2_admm", "oracle"), lambda_grid=(1e-2, 5e-2),
                           pilot_trials=3)
    lams, table = select_lambdas(cfg)
    assert lams["oracle"] == lams["mcps2_admm"]
    rates = [r["pilot_vsc"] for r in table if r["method"] == "mcps2_admm"]
    assert lams["mcps2_admm"] == (1e-2, 5e-2)[rates.index(max(rates))]
    fixed = ExperimentConfig(base=base, m_grid=(6,), trials_per_m=1, methods=("lasso_admm",),
                             lambdas={"lasso_admm": 0.3})
    assert select_lambdas(fixed) == ({"lasso_admm": 0.3}, [])


def test_recovery_paired_and_written(tmp_path):
    base = GeneratorConfig(n=8, m=6, k=2)
    cfg = ExperimentConfig(base=base, m_grid=(5, 6), trials_per_m=3,
                           methods=("lasso_admm", "mcps2_admm", "oracle"),
                           lambdas={"lasso_admm": 0.01, "mcps2_admm": 0.01})
    rep = run_recovery_experiment(cfg)
    assert rep.config["lambdas_used"]["oracle"] == 0.01
    by = {}
    for r in rep.rows:
        by.setdefault((r.m, r.trial), set()).add(r.seed)
    assert all(len(s) == 1 for s in by.values())
    files = emit_report(rep, tmp_path, emit_charts=True)
    names = {f.name for f in files}
    assert {"rows.csv", "timings.csv", "summary.csv", "config.echo", "vsc.svg"} <= names
    header = (tmp_path / "rows.csv").read_text().splitlines()[0]
    assert header == "method,m,trial,seed,vsc,fp,fn,l2,status"
    back = read_rows(tmp_path / "rows.csv")
    assert [(r.method, r.m, r.trial, r.vsc, r.l2) for r in back] == \
        [(r.method, r.m, r.trial, r.vsc, r.l2) for r in rep.rows]
    summ = read_summary(tmp_path / "summary.csv")
    assert [s["rate"] for s in summ] == [s["rate"] for s in rep.summary]


def test_solver_errors_recorded_not_raised():
    base = GeneratorConfig(n=30, m=6, k=2)
    cfg = ExperimentConfig(base=base, m_grid=(6,), trials_per_m=2, methods=("oracle",),
                           lambdas={"oracle": 0.01})
    rep = run_recovery_experiment(cfg)
    assert all(r.status.startswith("error") and r.vsc == 0 for r in rep.rows)


def test_charts_are_reproducible(tmp_path):
    cfg = ExperimentConfig(base=BASE, m_grid=(15, 20), trials_per_m=3, methods=("lasso", "mcps2"),
                           lambda_grid=(1e-3,))
    rep = run_condition_rate_experiment(cfg)
    emit_report(rep, tmp_path / "a", emit_charts=True)
    emit_report(rep, tmp_path / "b", emit_charts=True)
    for name in ("rows.csv", "summary.csv", "condition_rate.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
