"""Acceptance criteria, each checked at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the
pytest terminal summary under "acceptance criteria".
"""

import math

import numpy as np
import pytest

from conftest import record
from mcps2.conditions import (
    Hyperparams,
    candidate_minimizer,
    certify,
    corollary1_certificate,
    kkt_check_lasso,
    lemma1_check,
    mcps2_local_certificate,
    re_estimate,
)
from mcps2.harness import (
    ExperimentConfig,
    derive_seed,
    emit_report,
    run_condition_rate_experiment,
    run_recovery_experiment,
)
from mcps2.problem import GeneratorConfig, generate_instance, objective_mcps2
from mcps2.solvers import (
    admm_lasso,
    admm_mcps2,
    global_minimize_bruteforce,
    project_box,
    soft_threshold,
    warm_start,
)
from oracles import project_scalar, prox_l1_scalar

pytestmark = pytest.mark.acceptance

M_GRID = tuple(range(10, 101, 10))
FIG_BASE = GeneratorConfig(n=100, m=40, k=5, d=1.0, magnitude_range=(0.5, 1.0))
TOL = 0.07


def _verdict(n, ok, detail):
    record(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return ok


@pytest.fixture(scope="module")
def cond_rate():
    cfg = ExperimentConfig(base=FIG_BASE, m_grid=M_GRID, trials_per_m=200,
                           methods=("lasso", "mcps2"), noise_levels=(0.0, 1e-3), master_seed=0)
    return run_condition_rate_experiment(cfg)


def _dominance(rep, suffix):
    worst = min(rep.rate(f"mcps2{suffix}", m) - rep.rate(f"lasso{suffix}", m) for m in M_GRID)
    return worst


def test_1_condition_rate_noise_free(cond_rate):
    s = "[eta=0]"
    worst = _dominance(cond_rate, s)
    mc, la = cond_rate.rate(f"mcps2{s}", 40), cond_rate.rate(f"lasso{s}", 40)
    ok = worst >= -TOL and mc >= 0.9 - TOL and la < 0.9 + TOL
    strict = worst >= 0 and mc >= 0.9 and la < 0.9
    rates = " ".join(f"{m}:{cond_rate.rate(f'mcps2{s}', m):.2f}/{cond_rate.rate(f'lasso{s}', m):.2f}"
                     for m in M_GRID)
    assert _verdict(1, ok, f"min(mcps2-lasso)={worst:+.3f}, m=40 mcps2={mc:.3f} lasso={la:.3f}, "
                           f"strict={'pass' if strict else 'fail'}; mcps2/lasso by m {rates}")


def test_2_condition_rate_noisy(cond_rate):
    s = "[eta=0.001]"
    worst = _dominance(cond_rate, s)
    rates = " ".join(f"{m}:{cond_rate.rate(f'mcps2{s}', m):.2f}/{cond_rate.rate(f'lasso{s}', m):.2f}"
                     for m in M_GRID)
    assert _verdict(2, worst >= -TOL,
                    f"min(mcps2-lasso)={worst:+.3f} (strict {'pass' if worst >= 0 else 'fail'}); "
                    f"mcps2/lasso by m {rates}")


def _recovery(noise):
    cfg = ExperimentConfig(base=FIG_BASE.replace(noise_inf_bound=noise), m_grid=(30,),
                           trials_per_m=200, methods=("lasso_admm", "mcps2_admm"),
                           master_seed=0, pilot_trials=20)
    return run_recovery_experiment(cfg)


def test_3_recovery_gap_at_m30():
    rep = _recovery(1e-3)
    la, mc = rep.rate("lasso_admm", 30), rep.rate("mcps2_admm", 30)
    lams = rep.config["lambdas_used"]
    free = _recovery(0.0)
    info = (f"noise-free preset (information only): lasso={free.rate('lasso_admm', 30):.3f} "
            f"mcps2={free.rate('mcps2_admm', 30):.3f}")
    ok = 0.45 <= la <= 0.75 and mc >= la + 0.15
    assert _verdict(3, ok, f"noise 1e-3: lasso={la:.3f} (lam={lams['lasso_admm']:g}) "
                           f"mcps2={mc:.3f} (lam={lams['mcps2_admm']:g}) gap={mc - la:+.3f}; {info}")


def _corollary_instances(n, m, k, count, lam, max_tries):
    base = GeneratorConfig(n=n, m=m, k=k, d=1.0, magnitude_range=(1.0, 1.0))
    certified, tried = [], 0
    for t in range(max_tries):
        inst = generate_instance(base.replace(rng_seed=derive_seed(4, m, t)))
        tried += 1
        phi = re_estimate(inst.A, inst.support, alpha=2.0, samples=20_000, rng_seed=t)
        if corollary1_certificate(inst, lam, phi):
            certified.append(inst)
            if len(certified) == count:
                break
    return certified, tried


def test_4_corollary1_exactness():
    lam = 1e-3
    big, tried = _corollary_instances(20, 12, 3, 100, lam, 1000)
    dev = max(np.max(np.abs(candidate_minimizer(i, lam).x_star - i.x_true)) for i in big)
    small, tried_s = _corollary_instances(8, 6, 2, 1000, lam, 100)
    step = 0.1
    miss = 0
    odev = 0.0
    for inst in small:
        res = global_minimize_bruteforce(inst, lam, grid_step=step)
        e = float(np.max(np.abs(res.x_hat - inst.x_true)))
        odev = max(odev, e)
        miss += e > step
    ok = len(big) == 100 and dev <= 1e-12 and len(small) > 0 and miss == 0
    assert _verdict(4, ok, f"{len(big)} certified of {tried} (n=20): max|x*-x~|={dev:.1e}; "
                           f"oracle on {len(small)} certified of {tried_s} (n=8): "
                           f"{miss} outside grid step {step}, max dev {odev:.1e}")


def test_5_oracle_equivalence():
    base = GeneratorConfig(n=8, m=5, k=2, d=1.0, magnitude_range=(0.5, 1.0))
    lam = 0.01
    cert = agree = 0
    gaps = []
    for t in range(50):
        inst = generate_instance(base.replace(rng_seed=derive_seed(5, 5, t)))
        try:
            rep = mcps2_local_certificate(inst, lam)
        except ValueError:
            continue
        if not rep.verdicts["c3"]:
            continue
        cert += 1
        x = candidate_minimizer(inst, lam).x_star
        res = admm_mcps2(inst, Hyperparams(lam=lam), init=warm_start(inst, x, lam))
        orc = global_minimize_bruteforce(inst, lam)
        gap = abs(res.objective - orc.objective)
        gaps.append(gap)
        agree += gap <= 1e-6
    frac = agree / cert if cert else 0.0
    assert _verdict(5, cert > 0 and frac >= 0.95,
                    f"{agree}/{cert} certified instances within 1e-6 of the oracle ({frac:.1%}); "
                    f"worst gap {max(gaps, default=math.nan):.2e}")


def test_6_lemma1_soundness():
    rng = np.random.default_rng(6)
    holds = exceptions = t = 0
    while holds < 1000:
        m = int(rng.choice([10, 15, 20, 30, 40]))
        cfg = GeneratorConfig(n=50, m=m, k=int(rng.integers(1, 6)), d=float(rng.choice([1.0, 2.0])),
                              magnitude_range=(float(rng.choice([0.1, 0.5, 1.0])), 1.0),
                              noise_inf_bound=float(rng.choice([0.0, 1e-3, 1e-2])),
                              rng_seed=derive_seed(6, m, t))
        cfg = cfg.replace(magnitude_range=tuple(v * cfg.d for v in cfg.magnitude_range))
        t += 1
        inst = generate_instance(cfg)
        lam = float(10 ** rng.uniform(-4, -1))
        try:
            if not lemma1_check(inst, lam):
                continue
        except ValueError:
            continue
        holds += 1
        exceptions += not candidate_minimizer(inst, lam).sign_consistent
    assert _verdict(6, exceptions == 0,
                    f"{holds} instances with the sign condition (of {t} drawn): {exceptions} exceptions")


def test_7_local_minimality():
    rng = np.random.default_rng(7)
    base = GeneratorConfig(n=40, m=20, k=3, noise_inf_bound=1e-3)
    lam, eps, alpha = 1e-2, 1e-3, 3.0
    done = violations = t = 0
    worst = math.inf
    while done < 100:
        inst = generate_instance(base.replace(rng_seed=derive_seed(7, 20, t)))
        t += 1
        phi = re_estimate(inst.A, inst.support, alpha=alpha, samples=2000, rng_seed=t)
        rep = certify(inst, lam, epsilon=eps, alpha=alpha, phi=phi)
        if not (rep.verdicts["c3_strict"] and phi > lam):
            continue
        done += 1
        x = candidate_minimizer(inst, lam).x_star
        eps_eff = min(eps, 0.5 * float(np.min(np.abs(x[inst.support]))))
        f0 = objective_mcps2(x, inst, lam)
        H = rng.uniform(-eps_eff, eps_eff, (1000, inst.n))
        Z = np.clip(x + H, -inst.d, inst.d)
        R = inst.y[None, :] - Z @ inst.A.T
        F = 0.5 * np.sum(R * R, axis=1) + lam * (inst.d * np.abs(Z).sum(1) - 0.5 * (Z * Z).sum(1))
        violations += int(np.sum(F <= f0))
        worst = min(worst, float(np.min(F - f0)))
    assert _verdict(7, violations == 0,
                    f"100 certified instances (of {t} drawn) x 1000 perturbations: "
                    f"{violations} violations, smallest increase {worst:.2e}")


def test_8_solver_correctness():
    rng = np.random.default_rng(8)
    fails = 0
    for t in range(100):
        m = int(rng.choice([20, 30, 60]))
        cfg = GeneratorConfig(n=40, m=m, k=4, noise_inf_bound=1e-3, rng_seed=derive_seed(8, m, t))
        inst = generate_instance(cfg)
        lam = float(10 ** rng.uniform(-2, -0.5))
        res = admm_lasso(inst, Hyperparams(lam=lam))
        fails += not kkt_check_lasso(res.x_hat, inst, lam, tol=1e-6)
    v = rng.normal(scale=3.0, size=10_000)
    a = rng.uniform(0.0, 3.0, size=10_000)
    dd = rng.uniform(0.01, 3.0, size=10_000)
    st = np.array([soft_threshold(np.array([vi]), ai)[0] for vi, ai in zip(v, a)])
    pb = np.array([project_box(np.array([vi]), di)[0] for vi, di in zip(v, dd)])
    e_st = max(abs(s - prox_l1_scalar(vi, ai)) for s, vi, ai in zip(st, v, a))
    e_pb = max(abs(p - project_scalar(vi, di)) for p, vi, di in zip(pb, v, dd))
    ok = fails == 0 and e_st <= 1e-10 and e_pb <= 1e-10
    assert _verdict(8, ok, f"KKT failures {fails}/100; soft-threshold max err {e_st:.1e}, "
                           f"box projection max err {e_pb:.1e} over 1e4 scalars")


def test_9_determinism(tmp_path):
    cond = ExperimentConfig(base=FIG_BASE, m_grid=M_GRID, trials_per_m=50,
                            methods=("lasso", "mcps2"), master_seed=11)
    rec = ExperimentConfig(base=GeneratorConfig(n=40, m=20, k=3, noise_inf_bound=1e-3),
                           m_grid=(15, 20), trials_per_m=10, methods=("lasso_admm", "mcps2_admm"),
                           lambda_grid=(2e-3, 1e-2), pilot_trials=5, master_seed=11)
    same = True
    for name, cfg, run in (("cond", cond, run_condition_rate_experiment),
                           ("rec", rec, run_recovery_experiment)):
        outs = []
        for i, workers in enumerate((1, 1, 2)):
            cfg.workers = workers
            d = tmp_path / f"{name}{i}"
            emit_report(run(cfg), d)
            outs.append((d / "rows.csv").read_bytes())
        same &= outs[0] == outs[1] == outs[2]
    assert _verdict(9, same, "rows.csv byte-identical over two serial runs and a 2-worker run, "
                             "for both experiment kinds")
