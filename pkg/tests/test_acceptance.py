"""Exit criteria for the package, one test per criterion.

Each test records a PASS/FAIL line that is echoed in the pytest terminal
summary. Tolerances are fixed here and never tuned after the fact.
"""

import math
import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from charf.baselines import KnnParams, knn_impute, mode_impute
from charf.evaluation import (
    DEFAULT_DELTAS,
    DEFAULT_NUS,
    accuracy,
    bench_scaling,
    grid_search,
    make_method,
    markov_genotypes,
    power_law_exponent,
    run_benchmark,
)
from charf.forest import FitParams, fit, predict
from charf.genotype import MISSING, GenotypeMatrix, complete_rows, load_matrix, one_hot_encode
from charf.imputer import CharfParams, charf_impute, step_seeds, suggest_window_size, training_size_curve
from charf.missing import corrupt_like, make_trials

from test_baselines import brute_knn, brute_mode

# window sizes for (training share, missing fraction), copied from the published table
TABLE_1 = {
    0.20: {0.01: 160, 0.05: 31, 0.10: 15, 0.20: 7, 0.30: 4},
    0.30: {0.01: 120, 0.05: 23, 0.10: 11, 0.20: 5, 0.30: 3},
    0.50: {0.01: 69, 0.05: 14, 0.10: 7, 0.20: 3, 0.30: 2},
}


def test_ac1_window_size_table(criterion):
    mismatches = []
    for tau, row in TABLE_1.items():
        for f, expected in row.items():
            got = suggest_window_size(f, tau)
            if got != expected:
                raw = math.log(tau) / math.log(1 - f)
                mismatches.append(f"f={f} tau={tau}: got {got}, table {expected} (raw {raw:.4f})")
    ok = criterion("AC1 window-size table (15 cells, exact)", not mismatches, "; ".join(mismatches) or "15/15")
    assert ok, mismatches


def test_ac2_training_size_law(criterion):
    worst = 0.0
    for f in (0.05, 0.1, 0.2):
        curve = training_size_curve(f, [3, 5, 10, 15], n_rows=1000, trials=20, seed=0)
        for delta, frac in curve.items():
            worst = max(worst, abs(frac - (1 - f) ** delta))
    ok = criterion("AC2 complete-row fraction vs (1-f)^delta (tol 0.05)", worst <= 0.05, f"max abs err {worst:.4f}")
    assert ok


def test_ac3_imputation_contract(criterion):
    rng = np.random.default_rng(3)
    failures = []
    for i in range(50):
        n = int(rng.integers(5, 201))
        p = int(rng.integers(1, 101))
        f = float(rng.uniform(0, 0.3))
        arr = rng.integers(0, 3, size=(n, p)).astype(np.int8)
        arr[rng.random(arr.shape) < f] = MISSING
        m = GenotypeMatrix(arr)
        params = CharfParams(
            delta=int(rng.integers(1, 21)),
            nu=int(rng.integers(0, 5)),
            n_chains=int(rng.integers(1, 6)),
            seed=int(rng.integers(0, 10_000)),
        )
        out, tally = charf_impute(m, params)
        again, tally2 = charf_impute(m, params)
        checks = {
            "no MISSING": out.n_missing == 0,
            "observed unchanged": np.array_equal(out.values[~m.missing], arr[~m.missing]),
            "tallies sum to K": bool((tally.counts.sum(axis=1) == params.n_chains).all()),
            "tally covers missing": len(tally) == m.n_missing,
            "deterministic": out == again and tally == tally2,
        }
        failures += [f"matrix {i}: {name}" for name, ok in checks.items() if not ok]
    ok = criterion("AC3 imputation contract on 50 random matrices", not failures, "; ".join(failures) or "50/50")
    assert ok, failures


def test_ac4_baseline_oracles(criterion):
    rng = np.random.default_rng(4)
    bad = 0
    for _ in range(20):
        arr = rng.integers(0, 3, size=(30, 8)).astype(np.int8)
        arr[rng.random(arr.shape) < float(rng.uniform(0.05, 0.4))] = MISSING
        m = GenotypeMatrix(arr)
        bad += mode_impute(m).values.tolist() != brute_mode(arr.tolist())
        bad += knn_impute(m, KnnParams(k=3, weighting="uniform")).values.tolist() != brute_knn(arr.tolist(), 3, False)
    ok = criterion("AC4 mode/kNN vs brute force (20 matrices, cell-for-cell)", bad == 0, f"{bad} mismatching matrices")
    assert ok


def test_ac5_signal_recovery(criterion):
    complete = markov_genotypes(200, 500, stay_prob=0.9, seed=7)
    charf = make_method("charf", delta=5, nu=1, chains=5, trees=10)
    charf_rep, mode_rep = run_benchmark(complete, [charf, "mode"], [0.1], n_trials=5, seed=42)
    diffs = np.array(charf_rep.trials) - np.array(mode_rep.trials)
    gain = float(diffs.mean())
    ok = criterion(
        "AC5 ChARF beats mode by >= 0.03 (paired, 5 trials)",
        gain >= 0.03,
        f"charf {charf_rep.mean_accuracy:.4f} vs mode {mode_rep.mean_accuracy:.4f}, paired gain {gain:.4f}",
    )
    assert ok


def test_ac6_grid_trend(criterion):
    votes = []
    details = []
    for s in range(3):
        complete = markov_genotypes(200, 150, stay_prob=0.9, seed=s)
        best = {}
        for f in (0.01, 0.3):
            _, cell = grid_search(complete, DEFAULT_DELTAS, DEFAULT_NUS, f, n_trials=2, seed=100 * s, first_cols=150)
            best[f] = cell.delta
        votes.append(best[0.3] <= best[0.01])
        details.append(f"seed {s}: best delta {best[0.01]} at 1%, {best[0.3]} at 30%")
    ok = criterion("AC6 best delta at 30% <= best delta at 1% (2 of 3 seeds)", sum(votes) >= 2, "; ".join(details))
    assert ok


def test_ac7_linear_scaling(criterion):
    complete = markov_genotypes(200, 1000, stay_prob=0.9, seed=7)
    points = bench_scaling(complete, [125, 250, 500, 1000], "charf", f=0.1, seed=0, repeats=2)
    alpha = power_law_exponent(points)
    timing = ", ".join(f"{p.n_cols}:{p.seconds:.2f}s" for p in points)
    ok = criterion("AC7 wall time ~ p^alpha with alpha <= 1.3", alpha <= 1.3, f"alpha {alpha:.3f} ({timing})")
    assert ok


def single_forest(m: GenotypeMatrix, forest: FitParams, seed: int) -> np.ndarray:
    """Whole-matrix autoreplicative forest built directly from the primitives."""
    arr = m.values
    train = complete_rows(m)
    f = m.n_missing / arr.size
    corrupt_seed, forest_seed = step_seeds(seed, 0)
    model = fit(one_hot_encode(corrupt_like(arr[train], f, corrupt_seed)), arr[train], replace(forest, seed=forest_seed))
    test = np.flatnonzero(m.missing.any(axis=1))
    out = arr.copy()
    out[test] = np.where(arr[test] == MISSING, predict(model, one_hot_encode(arr[test])), arr[test])
    return out


def test_ac8_degenerate_equivalence(criterion):
    rng = np.random.default_rng(8)
    mismatches = 0
    for trial in range(5):
        p = int(rng.integers(3, 10))
        complete = markov_genotypes(150, p, seed=trial)
        m, _ = make_trials(complete, 0.04, 1, seed=trial)[0]
        assert complete_rows(m).size >= 5
        seed = int(rng.integers(0, 1000))
        params = CharfParams(delta=p + int(rng.integers(0, 3)), nu=0, n_chains=1, seed=seed)
        out, _ = charf_impute(m, params)
        mismatches += int((out.values != single_forest(m, params.forest, seed)).sum())
    ok = criterion("AC8 K=1, nu=0, delta>=p equals one whole-matrix forest", mismatches == 0, f"{mismatches} differing cells")
    assert ok


MAIZE = os.environ.get("CHARF_MAIZE_PATH")


@pytest.mark.skipif(not MAIZE or not Path(MAIZE).exists(), reason="set CHARF_MAIZE_PATH to the Maize genotype matrix")
def test_ac9_maize_reference(criterion):
    m = load_matrix(MAIZE, missing_token=os.environ.get("CHARF_MAIZE_TOKEN", "NA"))
    _, best = grid_search(m, f=0.1, n_trials=1, seed=0, first_cols=1000, exclude_missing=m.n_missing > 0)
    rep = run_benchmark(
        m, [make_method("charf", delta=best.delta, nu=best.nu)], [0.1], n_trials=5, seed=0,
        exclude_missing=m.n_missing > 0,
    )[0]
    # reported, not gated
    criterion("AC9 Maize at 10% within 0.05 of 0.916 (informational)", abs(rep.mean_accuracy - 0.916) <= 0.05,
              f"accuracy {rep.mean_accuracy:.4f} with delta={best.delta} nu={best.nu}")
