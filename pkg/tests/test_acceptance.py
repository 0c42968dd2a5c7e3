"""Acceptance criteria 1-9, each at its stated tolerance and trial count.

Each test records one PASS/FAIL line, printed in the terminal summary.
"""
import time

import numpy as np
import pytest

import oracles as O
from conftest import ACCEPTANCE_LINES
from dyadic_bloom import (DyadicGrid, ExperimentConfig, ShiftComplexity, ap_characteristic,
                          apply_paraproduct, bmo_little_norm, bmo_product_norm,
                          bmo_rectangular_norm, cascade_weight, make_shift, maximal_dyadic,
                          mixed_square_maximal, random_cancellative_shift, random_function,
                          remainder_cancellative, remainder_full_mixed, remainder_full_standard,
                          run_suite, shifted_square_function, square_function)
from dyadic_bloom.experiments import (_complexities, decomposition_residual,
                                      haar_algebra_residuals)
from dyadic_bloom.paraproducts import MODES
from dyadic_bloom.shifts import partial_operator, random_partial_symbol

THREADS = 4


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def show_failures(report):
    return "; ".join(f"{a.name} ({a.detail})" for a in report.assertions if not a.passed)


def test_criterion_1_exact_haar_algebra():
    start = time.perf_counter()
    worst, by = 0.0, {}
    grids = [DyadicGrid((4, 4), (1, 1)), DyadicGrid((3, 4), (2, 1)), DyadicGrid((3, 3), (2, 2))]
    for grid in grids:
        for trial in range(100):
            res = haar_algebra_residuals(grid, np.random.default_rng([1, trial, *grid.axis_dims]))
            for k, v in res.items():
                by[k] = max(by.get(k, 0.0), v)
    worst = max(by.values())
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 10
    assert record(1, ok, f"max residual {worst:.2e} <= 1e-12 over {len(by)} checks x 300 trials, "
                         f"{elapsed:.1f}s < 10s")


def test_criterion_2_product_decomposition():
    start = time.perf_counter()
    worst = 0.0
    for grid in (DyadicGrid((4, 4), (1, 1)), DyadicGrid((3, 4), (2, 1))):
        for trial in range(100):
            rng = np.random.default_rng([2, trial, *grid.axis_dims])
            worst = max(worst, decomposition_residual(grid, rng))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 30
    assert record(2, ok, f"16-term residual {worst:.2e} <= 1e-12 on 200 pairs, {elapsed:.1f}s < 30s")


def test_criterion_3_remainder_identities():
    start = time.perf_counter()
    grid = DyadicGrid((3, 3))
    worst = {"cancellative": 0.0, "full-standard": 0.0, "full-mixed": 0.0}
    cs = _complexities(grid, 3)
    for c in cs:
        for trial in range(50):
            rng = np.random.default_rng([3, trial, *c.i, *c.j])
            s = random_cancellative_shift(grid, c, trial)
            b = random_function(grid, rng, cancellative=True)
            f = random_function(grid, rng, cancellative=True)
            worst["cancellative"] = max(worst["cancellative"], remainder_cancellative(b, s, f).residual)
    for trial in range(50):
        rng = np.random.default_rng([3, trial])
        b, a, f = (random_function(grid, rng, cancellative=True) for _ in range(3))
        worst["full-standard"] = max(worst["full-standard"], remainder_full_standard(b, a, f).residual)
        for orientation in ((0, 1), (1, 0)):
            worst["full-mixed"] = max(worst["full-mixed"],
                                      remainder_full_mixed(b, a, orientation, f).residual)
    elapsed = time.perf_counter() - start
    ok = max(worst.values()) <= 1e-10 and elapsed < 120
    detail = ", ".join(f"{k} {v:.2e}" for k, v in worst.items())
    assert record(3, ok, f"{len(cs)} complexities; {detail} <= 1e-10; {elapsed:.1f}s < 120s")


def _oracle_cases(grid, rng, trial):
    """(name, library value, oracle value) triples for one random draw."""
    b, f = random_function(grid, rng), random_function(grid, rng)
    w = cascade_weight(grid, 0.8, trial, 0.7)
    out = []
    for kind, modes in MODES.items():
        out.append((f"paraproduct {kind}", apply_paraproduct(kind, b, f), O.paraproduct(modes, b, f)))
    cs = _complexities(grid, 3)
    c = cs[trial % len(cs)]
    s = random_cancellative_shift(grid, c, trial, "adversarial" if trial % 2 else "uniform")
    out.append(("cancellative shift", s.operator()(f), O.cancellative_shift(s, f)))
    for orientation in (1, 2):
        sym = random_partial_symbol(grid, (trial % 3, (trial // 3) % 3), trial, orientation)
        out.append((f"partial paraproduct {orientation}", partial_operator(sym)(f),
                    O.partial_paraproduct(sym, f)))
    fs = make_shift(grid, "full-standard", ShiftComplexity(), trial)
    out.append(("full standard", fs.operator()(f), O.paraproduct(("A", "A"), fs.payload.function, f)))
    fm = make_shift(grid, "full-mixed", ShiftComplexity(), trial, orientation=(0, 1))
    out.append(("full mixed", fm.operator()(f), O.paraproduct(("B", "A"), fm.payload.function, f)))
    out.append(("S_D", square_function(f), O.square_function(f)))
    out.append(("S_D1", square_function(f, 1), O.square_function(f, 1)))
    out.append(("S_D2", square_function(f, 2), O.square_function(f, 2)))
    out.append(("M_S", maximal_dyadic(f), O.strong_maximal(f)))
    out.append(("M_D1", maximal_dyadic(f, 1), O.parameter_maximal(f, 1)))
    out.append(("M_D2", maximal_dyadic(f, 2), O.parameter_maximal(f, 2)))
    out.append(("shifted S", shifted_square_function(f, c), O.shifted_square_function(f, c)))
    out.append(("[SM]", mixed_square_maximal(f, "SM"), O.mixed_square_maximal(f)))
    out.append(("[MS]", mixed_square_maximal(f, "MS").transpose(), O.mixed_square_maximal(f.transpose())))
    p = (1.5, 2.0, 3.0)[trial % 3]
    out.append(("A_p", ap_characteristic(w, p), O.ap_characteristic(w, p)))
    out.append(("little bmo", bmo_little_norm(b, w), O.little_bmo(b, w)))
    out.append(("rectangular BMO", bmo_rectangular_norm(b, w), O.rectangular_bmo(b, w)))
    val, witness = bmo_product_norm(b, w)
    out.append(("product BMO witness", val, O.product_bmo_on(b, w, witness.mask)))
    tiny = DyadicGrid((2, 2))
    bt, wt = random_function(tiny, rng), cascade_weight(tiny, 0.8, trial)
    out.append(("product BMO exhaustive", bmo_product_norm(bt, wt)[0], O.product_bmo_exhaustive(bt, wt)))
    return out


def _gap(a, b):
    if hasattr(a, "values"):
        a, b = a.values, b.values
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def test_criterion_4_oracle_equivalence():
    grid = DyadicGrid((3, 3))
    worst = {}
    for trial in range(20):
        rng = np.random.default_rng([4, trial])
        for name, lib, ref in _oracle_cases(grid, rng, trial):
            worst[name] = max(worst.get(name, 0.0), _gap(lib, ref))
    top = max(worst, key=worst.get)
    ok = worst[top] <= 1e-10
    assert record(4, ok, f"{len(worst)} operators x 20 trials; worst {top} {worst[top]:.2e} <= 1e-10")


def test_criterion_5_one_weight_shift_bound():
    cfg = ExperimentConfig.from_dict({
        "suite": "shift-one-weight", "sweep": [4, 5, 6], "trials": 30, "p": [2.0],
        "weights": {"w": {"kind": "cascade", "delta": 1.0, "decay": 0.7, "seed": 11}},
        "caps": {"total": 3, "cap": [1, 1]}, "thresholds": {"factor": 3.0, "drift": 0.25, "a_max": 8.0}})
    rep = run_suite(cfg, threads=THREADS)
    a2 = rep.rows[0]["A2"]
    nuni = sum(a.name.startswith("uniform") for a in rep.assertions)
    detail = (f"[w]_A2 {a2:.3f}; {len(rep.rows)} norms; {nuni} kind/K checks within x3; "
              f"drift <= 25%; {rep.runtime:.0f}s")
    assert record(5, rep.passed, detail if rep.passed else show_failures(rep))


def test_criterion_6_upper_bound():
    cfg = ExperimentConfig.from_dict({
        "suite": "upper-bound", "sweep": [4, 5, 6], "trials": 50, "p": [2.0, 3.0],
        "symbol": {"kind": "series", "smoothness": 0.5},
        "weights": {"mu": {"kind": "cascade", "delta": 0.6, "decay": 0.5},
                    "lam": {"kind": "cascade", "delta": 0.6, "decay": 0.5}},
        "caps": {"total": 3, "cap": [1, 1]}})
    rep = run_suite(cfg, threads=THREADS)
    maxima = {}
    for r in rep.rows:
        key = (r["p"], r["K1"])
        maxima[key] = max(maxima.get(key, 0.0), r["ratio"])
    desc = "; ".join(f"p={p:g}: " + ", ".join(f"{maxima[(p, K)]:.3f}" for K in (4, 5, 6))
                     for p in (2.0, 3.0))
    ok = rep.passed and rep.runtime < 900
    assert record(6, ok, f"ensemble maxima K=4,5,6 {desc}; drift <= 25%; {rep.runtime:.0f}s < 900s"
                  if ok else show_failures(rep))


def test_criterion_7_lower_bound():
    cfg = ExperimentConfig.from_dict({
        "suite": "lower-bound", "sweep": [4, 5, 6], "trials": 50, "p": [2.0],
        "symbol": {"kind": "series", "smoothness": 0.5},
        "weights": {"mu": {"kind": "cascade", "delta": 0.6, "decay": 0.5},
                    "lam": {"kind": "cascade", "delta": 0.6, "decay": 0.5}}})
    rep = run_suite(cfg, threads=THREADS)
    maxima = {}
    for r in rep.rows:
        maxima[r["K1"]] = max(maxima.get(r["K1"], 0.0), r["ratio"])
    desc = ", ".join(f"{maxima[K]:.3f}" for K in (4, 5, 6))
    assert record(7, rep.passed, f"ensemble maxima K=4,5,6 {desc}; drift <= 25%"
                  if rep.passed else show_failures(rep))


def test_criterion_8_duality_and_john_nirenberg():
    common = {"grid": {"n1": 1, "n2": 1, "K1": 3, "K2": 3}, "trials": 500, "p": [2.0, 3.0],
              "weights": {"w": {"kind": "cascade", "delta": 1.0, "decay": 0.7},
                          "mu": {"kind": "cascade", "delta": 0.6, "decay": 0.5},
                          "lam": {"kind": "cascade", "delta": 0.6, "decay": 0.5}}}
    dual = run_suite(ExperimentConfig.from_dict(dict(common, suite="duality")), threads=THREADS)
    jn = run_suite(ExperimentConfig.from_dict(dict(common, suite="jn-equivalence")), threads=THREADS)
    dmax = max(r["ratio"] for r in dual.rows if r["quantity"].startswith("duality"))
    viol = sum(r.get("violations", 0.0) for r in dual.rows)
    jvals = [r[k] for r in jn.rows for k in ("ratio", "ratio_dual")]
    ok = dual.passed and jn.passed
    detail = (f"duality max {dmax:.3f}; JN ratios in [{min(jvals):.3f}, {max(jvals):.3f}]; "
              f"{int(viol)} violations of the averaged-weight and A_p >= 1 bounds")
    assert record(8, ok, detail if ok else show_failures(dual) + show_failures(jn))


@pytest.mark.parametrize("suite", ["identities", "upper-bound", "shift-one-weight", "duality"])
def test_criterion_9_determinism(suite):
    d = {"suite": suite, "grid": {"n1": 1, "n2": 1, "K1": 3, "K2": 3}, "trials": 3,
         "p": [2.0, 3.0] if suite == "upper-bound" else [2.0], "seed": 17}
    cfg = ExperimentConfig.from_dict(d)
    first = run_suite(cfg, threads=1).to_csv()
    again = run_suite(ExperimentConfig.from_json(cfg.to_json()), threads=THREADS).to_csv()
    ok = first == again and first.count("\n") > 1
    assert record(9, ok, f"{suite}: rerun with the same config and seed gives identical CSV "
                         f"({first.count(chr(10)) - 1} rows, threads 1 vs {THREADS})")
