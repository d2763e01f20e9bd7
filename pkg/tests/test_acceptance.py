"""Full-scale acceptance gate: one test per headline claim of the package.

Each test re-checks a contract the per-module suites cover at reduced scale,
here at the advertised draw counts, probe counts, and time budgets, and
appends one PASS/FAIL line to acceptance_report.txt at the repo root. The
experiment-level tests run the shipped configs end to end, so this module is
the slow part of the suite (about 20 minutes on one core).
"""

import copy
import math
import os
import time

import numpy as np
import pytest
import yaml

from commopt import compressors as cp
from commopt.algorithms import (
    BASELINES,
    NeolithicHyper,
    build_multistage_plan,
    gradient_descent_reference,
    run_baseline,
    run_multistage,
    run_neolithic,
)
from commopt.core import StreamContext, derive_stream
from commopt.hard_instances import (
    adversarial_sparsifier,
    bernoulli_oracle,
    build_bernoulli_pair,
    build_chain,
    gc_truncated_min,
    h_grad,
    h_value,
    prog,
    progress_bound_frequency,
)
from commopt.harness import (
    aggregate,
    run_experiment,
    sweep_R,
    to_db,
    validate_config,
)
from commopt.msc import msc_batched
from commopt.problems import (
    OracleConfig,
    gen_least_squares,
    gen_logistic,
)

from helpers import bits_equal, fd_gradient, rel_err

CONFIG_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "configs")
REPORT_PATH = os.path.join(os.path.dirname(__file__), os.pardir, "acceptance_report.txt")

_VERDICTS = []


@pytest.fixture(scope="module", autouse=True)
def _write_report():
    """Collect the verdict lines and persist them after the module runs."""
    yield
    with open(REPORT_PATH, "w", encoding="utf-8") as fh:
        fh.writelines(line + "\n" for line in _VERDICTS)


def _verdict(criterion: str, ok: bool, detail: str):
    line = f"ACCEPTANCE {'PASS' if ok else 'FAIL'} {criterion}: {detail}"
    _VERDICTS.append(line)
    print(line, flush=True)
    assert ok, line


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def _load_config(name: str) -> dict:
    with open(os.path.join(CONFIG_DIR, name), encoding="utf-8") as fh:
        return yaml.safe_load(fh)


def _final_db(log, statistic: str) -> dict:
    """Final-round f_gap per algorithm in dB of the trial statistic."""
    agg = aggregate(log, statistic)
    out = {}
    for (alg, metric), (_rounds, values) in agg.series.items():
        if metric == "f_gap":
            out[alg] = to_db(float(values[-1]))
    return out


# -- compressor contracts --------------------------------------------------------


def test_compressor_contracts():
    """Every zoo member's claimed omega/delta is confirmed by 1e5 draws per dimension."""
    with _Timer() as t:
        ctx = StreamContext(7, 0, "acceptance-compressors")
        failures = []
        checked = 0
        for d in (2, 10, 50):
            for spec in cp.default_zoo(d):
                stream = ctx.child(f"{spec.label()}-d{d}").worker(0, "compress")
                est = cp.estimate_class(spec, 100_000, d, stream)
                if not (est.claim_ok() and est.per_sample_ok()):
                    failures.append(f"{spec.label()}@d={d}")
                checked += 1
    ok = not failures and t.elapsed < 60.0
    _verdict(
        "compressor-contracts",
        ok,
        f"{checked} (member, dim) claims at 1e5 draws each, "
        f"failures={failures or 'none'}, {t.elapsed:.1f}s (budget 60s)",
    )


# -- multi-step compression error bounds ------------------------------------------


def test_msc_error_bounds():
    """Greedy Top-1 error contracts per sample; uniform Rand-1 stays unbiased."""
    with _Timer() as t:
        rng = np.random.default_rng(31)
        X = rng.normal(size=(1000, 4))
        sq = np.einsum("ij,ij->i", X, X)
        streams = [derive_stream(900, (0, i, 0, "msc")) for i in range(1000)]
        violations = 0
        for R in range(1, 11):
            out, _ = msc_batched(X, cp.top_k(1), R, streams)
            err = np.einsum("ij,ij->i", X - out, X - out)
            violations += int(np.sum(err > 0.75**R * sq * (1 + 1e-12)))

        # URandK k=1 at d=4 has omega=3; after R rounds the error variance is
        # at most (1+omega)(omega/(1+omega))^R per unit input norm
        N = 100_000
        x = np.array([1.0, -0.5, 0.25, 2.0])
        X2 = np.tile(x, (N, 1))
        mean_ok = True
        var_ok = True
        for R in (1, 2, 5, 10):
            streams2 = [derive_stream(7000 + R, (0, i, 0, "msc")) for i in range(N)]
            out, _ = msc_batched(X2, cp.urand_k(1), R, streams2)
            errs = out - x[None, :]
            se = errs.std(axis=0, ddof=1) / math.sqrt(N)
            mean_ok &= bool(np.all(np.abs(errs.mean(axis=0)) <= 3 * se + 1e-12))
            sq2 = np.einsum("ij,ij->i", errs, errs)
            bound = 4.0 * 0.75**R * float(np.dot(x, x))
            var_ok &= bool(sq2.mean() <= bound + 3 * sq2.std(ddof=1) / math.sqrt(N))
    ok = violations == 0 and mean_ok and var_ok and t.elapsed < 120.0
    _verdict(
        "msc-error-bounds",
        ok,
        f"Top-1 per-sample violations={violations}/10000, URandK mean_ok={mean_ok}, "
        f"var_ok={var_ok}, {t.elapsed:.1f}s (budget 120s)",
    )


# -- lossless reductions -----------------------------------------------------------


def test_identity_reductions():
    """With identity compression and exact oracles every method is the plain GD loop."""
    T = 1000
    problems = {
        "least_squares": gen_least_squares(n=6, M=20, d=5, cond=50.0, het_scale=0.5, noise_b=0.1, seed=3),
        "logistic": gen_logistic(n=4, M=15, d=4, het_scale=0.3, seed=7, cond=20.0),
    }
    exact = OracleConfig(sigma=0.0)
    with _Timer() as t:
        mismatches = []
        for fam, problem in problems.items():
            lr = lambda k, L=problem.L: min(1.0 / L, 2.0 / (L * math.sqrt(k + 1)))
            ref = gradient_descent_reference(problem, lr, T)

            xs = [np.zeros(problem.d)]
            hook = lambda k, x, xs=xs: xs.append(x.copy())
            hyper = NeolithicHyper(eta=lr, p=1.0, gamma=1.0, R=1, K=T)
            run_neolithic(
                problem, exact, cp.identity(), hyper,
                StreamContext(11, 0, "acceptance-reduce"), on_round=hook,
            )
            if not bits_equal(np.asarray(xs), ref):
                mismatches.append(f"NEOLITHIC@{fam}")

            for name in BASELINES:
                xs = [np.zeros(problem.d)]
                hook = lambda k, x, xs=xs: xs.append(x.copy())
                run_baseline(
                    name, problem, exact, cp.identity(), lr, T,
                    StreamContext(11, 0, "acceptance-reduce"), on_round=hook,
                )
                if not bits_equal(np.asarray(xs), ref):
                    mismatches.append(f"{name}@{fam}")
    ok = not mismatches
    _verdict(
        "identity-reductions",
        ok,
        f"{len(problems) * (1 + len(BASELINES))} bitwise paths over {T} iterations, "
        f"mismatches={mismatches or 'none'}, {t.elapsed:.1f}s",
    )


# -- strongly convex multistage schedule -------------------------------------------


def test_multistage_strongly_convex():
    """Restarted schedule halves the gap every stage and reaches a 1e-6 target."""
    with _Timer() as t:
        prob = gen_least_squares(n=30, M=100, d=10, cond=1e3, het_scale=0.1, noise_b=0.1, seed=1)
        gap0 = prob.gap(np.zeros(prob.d))
        target = 1e-6 * gap0
        delta = 2.0 / prob.d  # Top-2 contraction factor
        g0 = gap0 + (25.0 / 81.0) * prob.mu * prob.Delta_x
        plan = build_multistage_plan(
            prob.L, prob.mu, delta, 0.0, prob.n, prob.G_star, g0, target, prob.Delta_x
        )
        traj = run_multistage(
            prob, OracleConfig(sigma=0.0), cp.top_k(2), plan,
            StreamContext(2024, 0, "acceptance-multistage"), target=target,
        )
        gaps = [gap0] + list(traj.info["stage_final_gaps"])
        ratios = [gaps[i + 1] / gaps[i] for i in range(len(gaps) - 1)]
        final = prob.gap(traj.x_final)
    ok = (
        not traj.diverged
        and bool(traj.info["reached_target"])
        and final <= target
        and all(r <= 0.5 for r in ratios)
        and t.elapsed < 300.0
    )
    _verdict(
        "sc-multistage",
        ok,
        f"stages={traj.info['stages_run']}/{plan.S}, final/gap0={final / gap0:.3g} "
        f"(target 1e-6), worst stage ratio={max(ratios):.3g} (cap 0.5), "
        f"{t.elapsed:.1f}s (budget 300s)",
    )


# -- least-squares comparison: final-precision ordering ----------------------------

LS_PANELS = (
    ("ls_top2_small.yaml", "small"),
    ("ls_urand2_small.yaml", "small"),
    ("ls_top2_large.yaml", "large"),
    ("ls_urand2_large.yaml", "large"),
)


def test_least_squares_ordering():
    """NEOLITHIC's mean final gap beats every baseline under small noise and stays within 1 dB under large noise."""
    with _Timer() as t:
        details = []
        ok = True
        for fname, noise in LS_PANELS:
            cfg = validate_config(_load_config(fname))
            log = run_experiment(cfg, write=False)
            mean_db = _final_db(log, "mean")
            median_db = _final_db(log, "median")
            others = sorted(a for a in mean_db if a != "NEOLITHIC")
            if noise == "small":
                panel_ok = all(mean_db["NEOLITHIC"] < mean_db[b] for b in others)
                # the small-noise ordering also holds for the trial median
                panel_ok &= all(median_db["NEOLITHIC"] < median_db[b] for b in others)
            else:
                panel_ok = all(mean_db["NEOLITHIC"] <= mean_db[b] + 1.0 for b in others)
            panel_ok &= not log.diverged_cells()
            ok &= panel_ok
            ranks = " ".join(f"{b}={mean_db[b]:.1f}" for b in others)
            details.append(
                f"{cfg.exp_id}[{'ok' if panel_ok else 'FAIL'}] "
                f"NEOLITHIC={mean_db['NEOLITHIC']:.1f} vs {ranks}"
            )
    ok &= t.elapsed < 1800.0
    _verdict(
        "least-squares-ordering",
        ok,
        "mean final dB per panel: " + "; ".join(details) + f"; {t.elapsed:.0f}s (budget 1800s)",
    )


# -- compression-length sweep -------------------------------------------------------


def test_rounds_sweep_margin():
    """Best compression-length R beats both R=1 and R=50 by at least 3 dB."""
    with _Timer() as t:
        cfg = validate_config(_load_config("sweep_rounds.yaml"), require_R=False)
        R_values = [1, 2, 5, 10, 20, 50]
        log = sweep_R(cfg, R_values, write=False)
        by_R = {}
        for rec in log.rows:
            R = int(rec.algorithm.split("_R")[1].split("_")[0])
            by_R.setdefault(R, []).append(rec.value)
        mean_db = {R: to_db(float(np.mean(v))) for R, v in by_R.items()}
        best_R = min(mean_db, key=mean_db.get)
        margin_1 = mean_db[1] - mean_db[best_R]
        margin_50 = mean_db[50] - mean_db[best_R]
    ok = (
        sorted(by_R) == R_values
        and all(len(v) == cfg.trials for v in by_R.values())
        and not log.diverged_cells()
        and margin_1 >= 3.0
        and margin_50 >= 3.0
    )
    curve = " ".join(f"R{R}={mean_db[R]:.1f}" for R in R_values)
    _verdict(
        "rounds-sweep",
        ok,
        f"mean best-gap dB: {curve}; best R={best_R} beats R=1 by {margin_1:.1f} dB "
        f"and R=50 by {margin_50:.1f} dB (need 3.0), {t.elapsed:.0f}s",
    )


# -- adversarial constructions -------------------------------------------------------


def test_hard_instance_suite():
    """Chain splits, closed-form optima, and the compressed-progress bound all hold."""
    with _Timer() as t:
        rng = np.random.default_rng(101)
        d = 12
        bad_split = 0
        bad_parity = 0
        # 1e3 probes at every progress level of the chain
        for j in range(d - 1):
            for _ in range(1000):
                x = np.zeros(d)
                if j:
                    x[:j] = rng.normal(size=j)
                    x[j - 1] = rng.normal() or 1.0
                p1 = prog(h_grad(x, 1))
                p2 = prog(h_grad(x, 2))
                if p1 > j + 1 or p2 > j + 1 or prog(h_grad(x, 0)) > j + 1:
                    bad_parity += 1
                elif j % 2 == 1 and p1 > j:
                    bad_parity += 1
                elif j % 2 == 0 and j > 0 and p2 > j:
                    bad_parity += 1
        for _ in range(1000):
            x = rng.normal(size=9) * rng.choice([0.3, 1.0, 3.0])
            half = 0.5 * (h_value(x, 1) + h_value(x, 2))
            if abs(half - h_value(x, 0)) > 1e-12:
                bad_split += 1

        # geometric optimum of the strongly convex chain solves its recursion
        sc = build_chain("SC_Chain", n=4, L=4.0, mu=1.0, Delta_x=2.0)
        coef = 2.0 * (4.0 + 1.0) / (4.0 - 1.0)
        res = -sc.x_star[:-2] + coef * sc.x_star[1:-1] - sc.x_star[2:]
        sc_resid = float(np.max(np.abs(res)))

        # truncated minima of the generic convex chain match a dense solve
        gc = build_chain("GC_Nesterov", n=2, L=3.0, d=12, Delta_x=2.0)
        lam = gc.data["lam"]
        gc_err = 0.0
        for k in (1, 3, 7, 11):
            closed = gc_truncated_min(gc, k)
            Mk = 2.0 * np.eye(k)
            off = np.arange(k - 1)
            Mk[off, off + 1] = Mk[off + 1, off] = -1.0
            rhs = np.zeros(k)
            rhs[0] = lam
            x_full = np.zeros(gc.d)
            x_full[:k] = np.linalg.solve(Mk, rhs)
            gc_err = max(gc_err, abs(gc.value(x_full) - closed) / abs(closed))

        # adversarial sparsifier: progress beats e*T/(1+omega) rarely
        T = 100
        chain = build_chain("GC_Nesterov", n=2, L=1.0, d=T + 2, Delta_x=1.0)
        freq = progress_bound_frequency(chain, adversarial_sparsifier(4.0), 0.5, T, 1000, 2024)
    ok = (
        bad_parity == 0
        and bad_split == 0
        and sc_resid <= 1e-10
        and gc_err <= 1e-8
        and freq <= math.exp(-1.0) + 0.05
        and t.elapsed < 300.0
    )
    _verdict(
        "hard-instances",
        ok,
        f"parity violations={bad_parity}, split violations={bad_split}, "
        f"sc recursion residual={sc_resid:.2g} (cap 1e-10), gc truncated rel err="
        f"{gc_err:.2g} (cap 1e-8), progress-bound freq={freq:.3f} "
        f"(cap {math.exp(-1.0) + 0.05:.3f}), {t.elapsed:.1f}s (budget 300s)",
    )


# -- gradient oracles ------------------------------------------------------------


def test_gradient_oracles():
    """Analytic gradients match central differences; the +/-sigma oracle has the right moments."""
    with _Timer() as t:
        rng = np.random.default_rng(977)
        families = {
            "least_squares": gen_least_squares(n=6, M=20, d=5, cond=50.0, het_scale=0.5, noise_b=0.1, seed=3),
            "logistic": gen_logistic(n=4, M=15, d=4, het_scale=0.3, seed=7, cond=20.0),
            "sc_chain": build_chain("SC_Chain", n=4, L=4.0, mu=1.0, Delta_x=1.0, d=8),
            "gc_chain": build_chain("GC_Nesterov", n=2, L=3.0, d=10, Delta_x=2.0),
            "nc_chain": build_chain("NC_PsiPhi", n=2, L=2.0, d=6, Delta_f=3.0),
        }
        plus, minus = build_bernoulli_pair(1.0, 1.0, 2.0, 0.25)
        families["two_point_plus"] = plus
        families["two_point_minus"] = minus

        worst = {}
        for fam, problem in families.items():
            bad = 0.0
            for _ in range(100):
                x = rng.normal(size=problem.d)
                bad = max(bad, rel_err(problem.grad(x), fd_gradient(problem.value, x)))
                i = int(rng.integers(problem.n))
                bad = max(
                    bad,
                    rel_err(
                        problem.worker_grad(i, x),
                        fd_gradient(lambda z, i=i: problem.worker_value(i, z), x),
                    ),
                )
            worst[fam] = bad
        fd_ok = all(v <= 1e-6 for v in worst.values())

        # two-valued oracle: mean = grad, variance = sigma^2 - grad^2
        sigma = 2.0
        stream = StreamContext(13, 0, "acceptance-bernoulli").worker(0, "oracle")
        moments_ok = True
        for xv in (0.0, 0.7, 1.0):
            x = np.array([xv])
            g = plus.worker_grad(0, x)[0]
            draws = np.array([bernoulli_oracle(plus, x, stream) for _ in range(100_000)])
            se = draws.std(ddof=1) / math.sqrt(draws.size)
            moments_ok &= abs(draws.mean() - g) <= 3.0 * se
            dev2 = (draws - g) ** 2
            se_var = dev2.std(ddof=1) / math.sqrt(draws.size)
            moments_ok &= abs(dev2.mean() - (sigma * sigma - g * g)) <= 3.0 * se_var
    worst_fam = max(worst, key=worst.get)
    ok = fd_ok and moments_ok
    _verdict(
        "gradient-oracles",
        ok,
        f"worst FD rel err={worst[worst_fam]:.2g} ({worst_fam}, cap 1e-6) over "
        f"100 probes x {len(families)} families, oracle moments within 3 SE: "
        f"{moments_ok}, {t.elapsed:.1f}s",
    )


# -- determinism -------------------------------------------------------------------


def _determinism_config(out_path: str) -> dict:
    return {
        "id": "determinism-probe",
        "problem": {
            "generator": "least_squares",
            "params": {"n": 4, "M": 6, "d": 8, "cond": 10.0, "het_scale": 0.2, "noise_b": 0.1},
            "seed": 5,
        },
        "oracle": {"sigma": 0.01},
        "budget_T": 250,
        "trials": 2,
        "master_seed": 9,
        "algorithms": [
            {
                "name": "NEOLITHIC",
                "compressor": {"kind": "URandK", "k": 2},
                "hyper": {"R": 5, "eta": {"c1": 2.0, "eta0": 3.0, "c2": 0.5}, "p": 2.0, "gamma": {"g0": 1.0, "c2": 0.5}},
            },
            {"name": "QSGD", "compressor": {"kind": "RandomQuant", "s": 4}, "hyper": {"lr": {"c1": 1.0, "eta0": 3.0, "c2": 0.5}}},
            {"name": "MEM_SGD", "compressor": {"kind": "TopK", "k": 2}, "hyper": {"lr": 0.05}},
            {"name": "DOUBLE_SQUEEZE", "compressor": {"kind": "TopK", "k": 2}, "hyper": {"lr": 0.05}},
            {"name": "EF21_SGD", "compressor": {"kind": "RandK", "k": 2}, "hyper": {"lr": 0.05}},
        ],
        "output": out_path,
    }


def test_rerun_determinism(tmp_path):
    """Re-running an experiment with the same config and seed is byte-identical."""
    with _Timer() as t:
        raw = _determinism_config(str(tmp_path / "first.csv"))
        second = copy.deepcopy(raw)
        second["output"] = str(tmp_path / "second.csv")
        run_experiment(validate_config(raw))
        run_experiment(validate_config(second))
        first_bytes = (tmp_path / "first.csv").read_bytes()
        second_bytes = (tmp_path / "second.csv").read_bytes()
    ok = first_bytes == second_bytes and len(first_bytes) > 0
    _verdict(
        "determinism",
        ok,
        f"two runs, {len(first_bytes)} CSV bytes, byte-identical={first_bytes == second_bytes}, "
        f"{t.elapsed:.1f}s",
    )
