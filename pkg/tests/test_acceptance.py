"""Acceptance criteria, one test per criterion.

Each test records a single ``C<k> PASS|FAIL|WARN ...`` line which the
conftest hook prints at the end of the session.  Criterion 4 runs two long
fits under a shared 30-minute budget.
"""

import time
import warnings

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from oracles import brute_log_likelihood
from smartmc.cli import run_benchmark
from smartmc.data_io import SimConfig, reduce_sequence, simulate_dataset
from smartmc.model import (
    CoefficientMatrix,
    CountMatrix,
    Dataset,
    count_matrix,
    coefficient_mad,
    empirical_matrix,
    fit,
    log_likelihood,
    nonrare_mask,
    patient_transition_matrices,
    plugin_log_likelihood,
)
from smartmc.model import NegLogLikelihood
from smartmc.mscor import MscorConfig, optimize
from smartmc.sphere import block_candidates, random_point

FUNCTIONS = ("neg_sum_squares", "griewank", "ackley", "rastrigin")


def record(key, ok, detail, warn_only=False):
    status = "PASS" if ok else ("WARN" if warn_only else "FAIL")
    ACCEPTANCE_LINES[key] = f"{key} {status}: {detail}"
    print(ACCEPTANCE_LINES[key])


def unit(v):
    return v / np.linalg.norm(v)


def random_coeffs(mask, n_coef, rng):
    N = mask.mask.shape[1]
    return CoefficientMatrix(N, n_coef, {e: unit(rng.standard_normal(n_coef)) for e in mask.entries()})


@pytest.fixture(scope="module")
def benchmark_runs():
    return {name: run_benchmark(name, 5, 5, 20, seed=0) for name in FUNCTIONS}


def test_c1_benchmark_optima(benchmark_runs):
    parts, ok = [], True
    for name in FUNCTIONS:
        values = np.array(benchmark_runs[name][0])
        best = values.min()
        good = best <= 1e-8
        if name == "rastrigin":
            good = good or np.mean(values <= 1e-6) >= 0.5
        ok &= bool(good)
        parts.append(f"{name} best={best:.3g}")
    record("C1", ok, "; ".join(parts) + " (threshold 1e-8, 20 starts at (5,5))")
    assert ok


def test_c2_convexity_early_exit(benchmark_runs):
    runs = list(benchmark_runs["neg_sum_squares"][2])
    # a second shape, since the criterion holds for any shape
    runs += run_benchmark("neg_sum_squares", 3, 4, 20, seed=1)[2]
    ok = all(r == 2 for r in runs)
    record("C2", ok, f"neg_sum_squares runs_completed over 40 starts: {sorted(set(runs))} (need all 2)")
    assert ok


def test_c3_nonconvexity_detected(benchmark_runs):
    runs = benchmark_runs["rastrigin"][2]
    ok = max(runs) > 2
    record("C3", ok, f"rastrigin max runs_completed={max(runs)}, starts with >2 runs: "
                     f"{sum(r > 2 for r in runs)}/20")
    assert ok


def test_c4_simulation_mad():
    # 30 minutes shared by the two fits; the smaller problem converges well
    # inside its share, the larger one may stop on its budget.
    budgets = {(1000, 20): 600.0, (3000, 60): 1100.0}
    mads, notes = {}, []
    for (K, T), budget in budgets.items():
        sim = simulate_dataset(SimConfig(n_subjects=K, seq_length=T, seed=1))
        t0 = time.perf_counter()
        res = fit(sim.dataset, 6, MscorConfig(max_runs=20, time_budget_seconds=budget))
        elapsed = time.perf_counter() - t0
        mads[(K, T)] = coefficient_mad(res.coefficients, sim.truth, count_matrix(sim.dataset), 10)
        notes.append(f"({K},{T}) MAD={mads[(K, T)]:.4f} runs={res.optimizer.runs} "
                     f"stop={res.terminated_by} {elapsed:.0f}s")
    small, large = mads[(1000, 20)], mads[(3000, 60)]
    ok = small <= 0.05 and large < small
    record("C4", ok, "; ".join(notes) + " (need MAD<=0.05 then strictly smaller)")
    assert small <= 0.05
    assert large < small


def test_c5_property_suite():
    rng = np.random.default_rng(2024)
    checks = {}

    # unit norm of every feasible candidate
    worst = 0.0
    for _ in range(300):
        n = int(rng.integers(2, 9))
        x = unit(rng.standard_normal(n))
        x[rng.random(n) < 0.2] = 0.0
        if not x.any():
            x[0] = 1.0
        x = unit(x)
        cands, feasible = block_candidates(x, float(rng.uniform(1e-6, 1.5)), 2.0, 1e-9,
                                           float(rng.choice([0.0, 1e-3, 0.2])))
        if feasible.any():
            worst = max(worst, np.abs(np.linalg.norm(cands[feasible], axis=1) - 1).max())
    checks["unit-norm"] = worst <= 1e-12

    # row-stochastic, rare-exact and structural zeros
    stoch = rare = zeros = True
    for trial in range(60):
        N = int(rng.integers(2, 8))
        p = int(rng.integers(1, 5))
        counts = rng.integers(0, 15, size=(N + 1, N))
        counts[rng.random((N + 1, N)) < 0.3] = 0
        cm = CountMatrix(counts)
        e = empirical_matrix(cm)
        mask = nonrare_mask(cm, p + 1 + int(rng.integers(0, 5)), p)
        co = random_coeffs(mask, p + 1, rng)
        X = rng.standard_normal((30, p)) * 3
        P = patient_transition_matrices(co, mask, e, X)
        act = e.active_rows
        stoch &= bool(np.abs(P[:, act].sum(axis=2) - 1).max() <= 1e-12)
        r = (counts > 0) & ~mask.mask
        rare &= all(np.array_equal(P[k][r], e.probs[r]) for k in range(30))
        z = np.zeros_like(r)
        z[act] = counts[act] == 0
        zeros &= bool(np.all(P[:, z] == 0.0))
    checks["row-stochastic"] = stoch
    checks["rare-exact"] = rare
    checks["structural-zero"] = zeros

    # plug-in reduction and relabeling invariance
    plug = relabel = True
    for seed in range(8):
        sim = simulate_dataset(SimConfig(n_states=int(rng.integers(2, 6)), n_subjects=60,
                                         seq_length=8, n_covariates=2, seed=seed))
        d = sim.dataset
        counts = count_matrix(d)
        e = empirical_matrix(counts)
        N = d.n_states
        none = nonrare_mask(counts, int(counts.counts.max()) + 1, 2)
        ll0 = log_likelihood(CoefficientMatrix(N, 3), d, none, e)
        plug &= abs(ll0 - plugin_log_likelihood(d, e)) <= 1e-10
        mask = nonrare_mask(counts, 3, 2)
        co = random_coeffs(mask, 3, rng)
        ll = log_likelihood(co, d, mask, e)
        perm = rng.permutation(N) + 1
        d2 = Dataset(N, [perm[s - 1] for s in d.sequences], d.covariates)
        c2 = count_matrix(d2)
        co2 = CoefficientMatrix(N, 3, {((0 if u == 0 else int(perm[u - 1])), int(perm[v - 1])): vec
                                       for (u, v), vec in co.items()})
        relabel &= log_likelihood(co2, d2, nonrare_mask(c2, 3, 2), empirical_matrix(c2)) == ll
    checks["plug-in"] = plug
    checks["relabeling"] = relabel

    # serial versus threaded optimizer, and end-to-end seed determinism
    sim = simulate_dataset(SimConfig(n_states=5, n_subjects=200, seq_length=8, n_covariates=2, seed=9))
    counts = count_matrix(sim.dataset)
    mask = nonrare_mask(counts, 3, 2)
    obj = NegLogLikelihood(sim.dataset, mask, empirical_matrix(counts))
    init = random_point(obj.shape, 0)
    cfg = MscorConfig(phi=1e-4, tau1=1e-6, max_runs=3)
    a = optimize(obj, init, cfg)
    b = optimize(obj, init, cfg.replace(threads=4))
    checks["threads"] = a == b
    again = simulate_dataset(SimConfig(n_states=5, n_subjects=200, seq_length=8, n_covariates=2, seed=9))
    f1 = fit(sim.dataset, 3, cfg.replace(seed=4))
    f2 = fit(again.dataset, 3, cfg.replace(seed=4))
    checks["seed-determinism"] = f1 == f2

    ok = all(checks.values())
    record("C5", ok, ", ".join(f"{k}={'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok


def test_c6_oracle_equivalence():
    seqs = [[1, 1, 1, 2], [1, 1, 3], [2, 1, 1], [3, 3, 2], [1, 2, 3]]
    X = np.array([[0.3], [-1.2], [2.0], [0.0], [0.7]])
    d = Dataset(3, seqs, X)
    counts = count_matrix(d)
    mask = nonrare_mask(counts, 4, 1)
    assert mask.entries() == [(1, 1)]
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(20):
        co = random_coeffs(mask, 2, rng)
        ll = log_likelihood(co, d, mask, empirical_matrix(counts))
        ref = brute_log_likelihood(seqs, X.tolist(), 3, 4, {k: list(v) for k, v in co.items()})
        worst = max(worst, abs(ll - ref))
    ok = worst <= 1e-10
    record("C6", ok, f"max |log-likelihood - brute force| = {worst:.2e} over 20 draws (need <=1e-10)")
    assert ok


def test_c7_parallel_speedup():
    sim = simulate_dataset(SimConfig(n_states=12, n_subjects=400, seq_length=10, n_covariates=8, seed=3))
    counts = count_matrix(sim.dataset)
    mask = nonrare_mask(counts, 9, 8)
    obj = NegLogLikelihood(sim.dataset, mask, empirical_matrix(counts))
    init = random_point(obj.shape, 0)
    cfg = MscorConfig(phi=1e-3, tau1=1e-4, max_runs=1)
    times = {}
    for threads in (1, 8):
        t0 = time.perf_counter()
        optimize(obj, init, cfg.replace(threads=threads))
        times[threads] = time.perf_counter() - t0
    speedup = times[1] / times[8]
    ok = speedup >= 2.0
    record("C7", ok, f"threads=8 speedup {speedup:.2f}x (soft target 2x)", warn_only=True)
    if not ok:
        warnings.warn(f"parallel speedup {speedup:.2f}x below 2x on this machine")


def test_c8_sequence_reduction():
    import datetime as dt
    day = dt.date(2020, 1, 1)

    def daily(labels):
        return [(day + dt.timedelta(days=k), s) for k, s in enumerate(labels)]

    a = reduce_sequence(daily("AAA"))
    b = reduce_sequence(daily("AABBACC"))
    ok = a == ["A"] and b == ["A", "B", "A", "C"]
    record("C8", ok, f"AAA -> {''.join(a)}, AABBACC -> {''.join(b)}")
    assert ok
