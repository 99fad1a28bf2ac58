"""Acceptance criteria 1-11.

Each test prints one ``criterion N: PASS/FAIL`` line (repeated in the pytest
terminal summary) and then asserts the criterion at its stated tolerance and
runtime budget.
"""
import time

import numpy as np
import pytest

from ntklab.datagen import sample_sphere
from ntklab.harness.config import resolve
from ntklab.harness.experiments import _trend_grid, run
from ntklab.network import NetConfig, init_weights
from ntklab.ntk import kappa0, kappa1, limiting_ntk, ntk_2layer_closed
from ntklab.numerics import RngStream
from ntklab.spectrum import hermite_mu1, segment_trends_match, trend_table

from _helpers import finite_difference_check, relu_pair_expectations
from conftest import ACCEPTANCE_LINES, MNIST_IMAGES, MNIST_LABELS


def record(number, ok, detail, elapsed, budget):
    ok = bool(ok) and elapsed < budget
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f}s / {budget}s]"
    print(line)
    ACCEPTANCE_LINES[number] = line
    assert ok, line


def experiment(tmp_path_factory, subcommand, seed=0, **overrides):
    cfg = resolve(subcommand, overrides=list(overrides.items()), seed=seed)
    return run(cfg, tmp_path_factory.mktemp(f"{subcommand}-{seed}"))


def test_criterion_01_closed_form_oracle():
    t0 = time.perf_counter()
    X = sample_sphere(64, 16, RngStream(1))
    K = limiting_ntk(X, 2).gram
    closed = np.array([[ntk_2layer_closed(a, b) for b in X] for a in X])
    err = float(np.max(np.abs(K - closed)))
    record(1, err <= 1e-12, f"max |K - closed form| = {err:.2e}", time.perf_counter() - t0, 1)


def test_criterion_02_ntk_convergence(tmp_path_factory):
    t0 = time.perf_counter()
    rep = experiment(tmp_path_factory, "ntk-converge")
    med = rep.metrics["median_deviation"]
    rel = rep.metrics["median_rel_deviation"][-1]
    ok = rep.metrics["strictly_decreasing"] and rel <= 0.05
    record(2, ok, f"median deviation {['%.4f' % v for v in med]}, relative at m=8192 {rel:.3f}",
           time.perf_counter() - t0, 120)


def test_criterion_03_min_eigenvalue_bound(tmp_path_factory):
    t0 = time.perf_counter()
    rep = experiment(tmp_path_factory, "min-eig-sweep")
    holds, inter = rep.metrics["holds_rate"], rep.metrics["intermediate_rate"]
    cells = ", ".join(f"{k}: {v['holds']}/{v['runs']}" for k, v in rep.metrics["cells"].items())
    record(3, holds == 1.0 and inter == 1.0,
           f"bound holds {holds:.0%} ({cells}); intermediate holds {inter:.0%}",
           time.perf_counter() - t0, 180)


def test_criterion_04_table_trends():
    t0 = time.perf_counter()
    table = trend_table(100, _trend_grid(100, 50))
    checked = sum(r["observed"] is not None for r in table["rows"])
    record(4, segment_trends_match(table), f"{checked} consecutive differences checked",
           time.perf_counter() - t0, 1)


@pytest.fixture(scope="module")
def benign_runs(tmp_path_factory):
    runs = []
    for seed in range(10):
        t0 = time.perf_counter()
        rep = experiment(tmp_path_factory, "benign-class", seed=seed)
        runs.append((rep.metrics, time.perf_counter() - t0))
    return runs


def test_criterion_05_benign_overfitting(benign_runs):
    first = benign_runs[:5]
    elapsed = sum(t for _, t in first)
    train_ok = all(m["train_error"] <= 0.01 for m, _ in first)
    good = sum(m["clean_test_error"] <= 0.05 and m["noisy_test_error"] <= m["eta"] + 0.08
               for m, _ in first)
    detail = "; ".join(f"train {m['train_error']:.3f} clean {m['clean_test_error']:.3f} "
                       f"noisy {m['noisy_test_error']:.3f}" for m, _ in first)
    record(5, train_ok and good >= 4, f"{good}/5 seeds within test limits ({detail})", elapsed, 600)


def test_criterion_06_margin_growth(benign_runs):
    slopes = [m["margin_slope"] for m, _ in benign_runs]
    positive = sum(s > 0 for s in slopes)
    record(6, positive >= 9, f"positive margin slope in {positive}/10 seeds", 0.0, 1)


def test_criterion_07_assumption_gap(tmp_path_factory):
    t0 = time.perf_counter()
    gaps = [experiment(tmp_path_factory, "assumption-check", seed=s).metrics["gap"]
            for s in range(10)]
    mnist = experiment(tmp_path_factory, "assumption-check", source="idx",
                       images=str(MNIST_IMAGES), labels=str(MNIST_LABELS), per_class=100)
    dom = mnist.metrics["diagonal_dominance"]
    positive = sum(g > 0 for g in gaps)
    record(7, positive == 10 and dom >= 8,
           f"synthetic gap > 0 in {positive}/10 seeds; MNIST diagonal dominance {dom}/10",
           time.perf_counter() - t0, 180)


def test_criterion_08_hermite_and_arc_cosine():
    t0 = time.perf_counter()
    mu1 = hermite_mu1()
    worst = 0.0
    for rho in (-0.9, 0.0, 0.5, 0.99):
        k0, k1 = relu_pair_expectations(rho)
        worst = max(worst, abs(k0 - kappa0(rho)), abs(k1 - kappa1(rho)))
    record(8, abs(mu1 - 0.5) <= 1e-8 and worst <= 1e-6,
           f"mu1 = {mu1:.12f}; max quadrature deviation {worst:.1e}", time.perf_counter() - t0, 5)


def test_criterion_09_gradient_check():
    t0 = time.perf_counter()
    gen = RngStream(9).generator()
    worst = 0.0
    for _ in range(5):
        W = init_weights(NetConfig(3, 32, 6), gen)
        worst = max(worst, finite_difference_check(W, gen.standard_normal(6), 50, gen).max())
    record(9, worst <= 1e-5, f"max relative error {worst:.1e} over 250 coordinates",
           time.perf_counter() - t0, 10)


def test_criterion_10_nn_equivalence(tmp_path_factory):
    t0 = time.perf_counter()
    rep = experiment(tmp_path_factory, "nn-equivalence")
    gaps = rep.metrics["median_max_gap"]
    interp = rep.metrics["interpolation_error"]
    ok = interp <= 1e-6 and all(b < a for a, b in zip(gaps, gaps[1:]))
    record(10, ok, f"interpolation error {interp:.1e}; median max gap {['%.4f' % g for g in gaps]}",
           time.perf_counter() - t0, 300)


def test_criterion_11_excess_risk_peak(tmp_path_factory):
    t0 = time.perf_counter()
    rep = experiment(tmp_path_factory, "excess-risk-sweep")
    med = rep.metrics["median_risk"]
    peak = rep.metrics["peak_n"]
    record(11, peak in (32, 64, 128),
           f"median risk {['%.4f' % v for v in med]}, peak at n = {peak}",
           time.perf_counter() - t0, 300)
