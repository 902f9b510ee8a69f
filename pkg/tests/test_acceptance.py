"""Acceptance criteria, one test each; a summary line per criterion is printed at the end of the run."""

import math
import time

import numpy as np
import pytest
from scipy.spatial import cKDTree

from distimator import bellvec as bv
from distimator import estimator as est
from distimator import oracle
from distimator.bellvec import NoiseModel
from distimator.experiment import ExperimentConfig, ExperimentLog, expected_statistic, run_experiment
from distimator.protocols import PROTOCOLS, distilled_state, family_vector, noiseless_success, noisy_success

from conftest import random_bell, random_model

WERNER_NOISE = NoiseModel.symmetric(y=0.01, eta_z=0.99)  # T = 1 on all memory channels
BELL_NOISE = NoiseModel.symmetric(y=0.01, m=0.01, eta_z=0.99, eta_x=0.99)


@pytest.fixture
def detail(record_property):
    def put(text):
        record_property("detail", text)

    return put


def test_criterion_1_closed_form_equivalence(detail):
    rng = np.random.default_rng(1)
    qs = random_bell(rng, 1000)
    model = NoiseModel.noiseless()
    start = time.perf_counter()
    pipeline = [noisy_success(p, qs, model, 0.0) for p in PROTOCOLS]
    elapsed = time.perf_counter() - start
    q1, q2, q3, q4 = qs.T
    closed = [
        ((q1 + q2) ** 2 + (q3 + q4) ** 2) / 2,
        ((q1 + q3) ** 2 + (q2 + q4) ** 2) / 2,
        ((q1 + q4) ** 2 + (q2 + q3) ** 2) / 2,
    ]
    err = max(float(np.max(np.abs(a - b))) for a, b in zip(pipeline, closed))
    detail(f"max |diff| = {err:.2e} over 1000 vectors x 3 protocols, {elapsed * 1e3:.1f} ms")
    assert err < 1e-12
    assert elapsed < 1.0


def test_criterion_2_oracle_equivalence(detail):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst_p = worst_q = 0.0
    for _ in range(1000):
        model = random_model(rng)
        dt = rng.exponential(0.3)
        qc, qt = random_bell(rng), random_bell(rng)
        rc, rt = oracle.bell_vector_to_density(qc), oracle.bell_vector_to_density(qt)
        for p in PROTOCOLS:
            p_dense, state = oracle.run_protocol_dense(p, rc, rt, model, dt)
            q_fast, p_fast = distilled_state(p, qc, model, dt, q_target=qt)
            worst_p = max(worst_p, abs(p_dense - float(p_fast)))
            worst_q = max(worst_q, float(np.max(np.abs(oracle.bell_diagonal_part(state) - q_fast))))
    elapsed = time.perf_counter() - start
    detail(f"max |dp| = {worst_p:.1e}, max |dq| = {worst_q:.1e}, {elapsed:.1f} s")
    assert worst_p < 1e-10 and worst_q < 1e-10
    assert elapsed < 60


def werner_run(w, n, seed):
    cfg = ExperimentConfig("A", n, p_g=0.2, delay_scale=100, model=WERNER_NOISE, seed=seed)
    log = run_experiment(bv.werner_vector(w), cfg)
    return log, est.estimate_werner(log, 0.01)


def test_criterion_3_werner_noisy_experiment(detail):
    start = time.perf_counter()
    ws = np.round(np.arange(0, 0.61, 0.1), 10)
    big = [werner_run(w, 10**6, seed=11)[1] for w in ws]
    errors = [abs(r.w_hat - w) for r, w in zip(big, ws)]
    deltas = [r.delta for r in big]
    # N = 1e5: the bound reported at the true statistics, and in simulation
    small_expected, small_sim = [], []
    for w in ws:
        log, rep = werner_run(w, 10**5, seed=11)
        small_sim.append(rep.delta)
        small_expected.append(est.estimate_werner(log, 0.01, p_hat=float(expected_statistic(log, w))).delta)
    elapsed = time.perf_counter() - start
    detail(
        f"N=1e6: max|w_hat-w| = {max(errors):.4f}, max delta = {max(deltas):.1e}; "
        f"N=1e5: min delta at truth = {min(small_expected):.3f}, simulated delta > 1e-2 at "
        f"{sum(d > 1e-2 for d in small_sim)}/{len(ws)} points; {elapsed:.0f} s"
    )
    assert max(errors) <= 0.01
    assert max(deltas) <= 1e-2
    assert deltas[0] < 1e-10  # vanishes towards w = 0
    assert min(small_expected) > 1e-2  # 1e5 rounds cannot guarantee 1e-2 anywhere on the sweep
    assert all(d > 1e-2 for d, w in zip(small_sim, ws) if w > 0)
    assert elapsed < 300


def bell_grid():
    pts = []
    for q1 in (0.6, 0.7, 0.8, 0.9, 0.95):
        for frac in (0.1, 0.3, 0.5, 0.7, 0.9):
            q2 = frac * (1 - q1)
            r = (1 - q1 - q2) / 2
            pts.append(np.array([q1, q2, r, r]))
    return pts


def test_criterion_4_bell_noisy_experiment(detail):
    start = time.perf_counter()
    per_seed, failures, worst_td = [], [], 0.0
    for seed in (1, 2, 3):
        ok = 0
        for i, q in enumerate(bell_grid()):
            logs = [
                run_experiment(q, ExperimentConfig(p, 2 * 10**5, model=BELL_NOISE, seed=1000 * seed + i))
                for p in PROTOCOLS
            ]
            rep = est.estimate_bell(logs, (0.01,) * 3)
            td = rep.trace_distance_to(q)
            worst_td = max(worst_td, td)
            good = rep.delta <= 1e-2 and td <= 0.03
            ok += good
            if not good:
                failures.append((seed, round(float(q[0]), 3), round(float(q[1]), 3), round(rep.delta, 4), round(td, 4)))
        per_seed.append(ok)
    elapsed = time.perf_counter() - start
    failing_q1 = sorted({f[1] for f in failures})
    detail(
        f"points passing per seed {per_seed}/25 (need >= 24); failing q1 values {failing_q1}; "
        f"max trace distance {worst_td:.4f}; {elapsed:.0f} s"
    )
    assert min(per_seed) >= 24, f"failures (seed, q1, q2, delta, trace distance): {failures}"
    assert elapsed < 600


def test_criterion_5_sample_complexity(detail):
    n_bound = est.werner_sample_bound(1e-2, 1e-2)
    n_tom = est.tomography_werner_rounds(1e-2, 1e-2)
    exact = 8 * math.log(2 / 1e-2) / (1e-4 * (2 / 3 - 1e-2) ** 2)
    cross = est.werner_crossover(1e-2, 1e-2)
    wins = [est.werner_consumed(w, 1e-2, 1e-2) < n_tom for w in np.linspace(0, 0.05, 11)]
    detail(f"worst-case N = {n_bound} (formula {exact:.3f}), N_tom = {n_tom}, crossover w = {cross:.4f}")
    assert n_bound == math.ceil(exact) == 982_965
    assert n_tom == 423_866
    assert all(wins)
    assert cross is not None and 0.05 < cross < 2 / 3
    assert est.werner_consumed(cross + 1e-3, 1e-2, 1e-2) >= n_tom


def test_criterion_6_statistical_soundness(detail):
    start = time.perf_counter()
    w, eps, runs = 0.3, 0.02, 500
    misses, deltas = 0, []
    for seed in range(runs):
        log = run_experiment(bv.werner_vector(w), ExperimentConfig("A", 10**4, seed=seed))
        rep = est.estimate_werner(log, eps)
        misses += abs(rep.w_hat - w) > eps
        deltas.append(rep.delta)
    freq = misses / runs
    delta = float(np.mean(deltas))
    margin = 3 * math.sqrt(delta * (1 - delta) / runs)
    elapsed = time.perf_counter() - start
    detail(f"miss frequency {freq:.3f} <= mean delta {delta:.3f} + 3 sigma {margin:.3f}; {elapsed:.0f} s")
    assert freq <= delta + margin
    assert elapsed < 120


def test_criterion_7_monotonicity_uniqueness(detail):
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    xs = np.linspace(0.5, 1, 51)
    g = np.linspace(0.5, 1, 21)
    X = np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)
    X = X[X.sum(axis=1) > 2]  # q1 > 1/2
    worst_margin, worst_sep = np.inf, np.inf
    for _ in range(100):
        model = random_model(rng)
        dt = rng.exponential(0.2)
        for p in PROTOCOLS:
            vals = noisy_success(p, family_vector(p, xs), model, dt)
            f = 4 * (vals[-1] - vals[0])
            worst_margin = min(worst_margin, float(np.min(np.diff(vals)) / (1e-14 * f)))
        P = np.stack([noisy_success(p, family_vector(p, X[:, i]), model, dt) for i, p in enumerate(PROTOCOLS)], -1)
        d, _ = cKDTree(P).query(P, k=2, p=np.inf)
        worst_sep = min(worst_sep, float(d[:, 1].min()))
    elapsed = time.perf_counter() - start
    detail(f"min step / (1e-14 f) = {worst_margin:.2e}; min triple separation {worst_sep:.2e}; {elapsed:.1f} s")
    assert worst_margin > 1
    assert worst_sep > 3 * 0.01**3
    assert elapsed < 60


def test_criterion_8_exact_statistics_roundtrip(detail):
    rng = np.random.default_rng(8)
    eps = 0.01
    worst_w = worst_x = worst_q = 0.0
    for _ in range(100):
        model = random_model(rng)
        delays = rng.geometric(0.2, size=500) / 100
        w = rng.uniform(0, 2 / 3)
        log = ExperimentLog("A", len(delays), 0, delays, model)
        rep = est.estimate_werner(log, eps, p_hat=float(expected_statistic(log, w)))
        worst_w = max(worst_w, abs(rep.w_hat - w))

        q1 = rng.uniform(0.5, 1)
        q = np.r_[q1, (1 - q1) * rng.dirichlet(np.ones(3))]
        logs = [ExperimentLog(p, len(delays), 0, delays, model) for p in PROTOCOLS]
        x = bv.x_values(q)
        p_hats = [float(expected_statistic(l, xi, "bell")) for l, xi in zip(logs, x)]
        rep = est.estimate_bell(logs, (eps,) * 3, p_hats=p_hats)
        worst_x = max(worst_x, float(np.max(np.abs(np.array(rep.x_hat) - x))))
        worst_q = max(worst_q, float(np.max(np.abs(np.array(rep.q_hat) - q))))
    detail(f"max |w_hat-w| = {worst_w:.1e}, max |x_hat-x| = {worst_x:.1e}, max |q_hat-q| = {worst_q:.1e} (eps^3 = 1e-6)")
    assert worst_w <= eps**3
    assert worst_x <= eps**3
    assert worst_q <= 1.5 * eps**3
