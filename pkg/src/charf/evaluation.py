"""Masked-trial evaluation: accuracy, benchmarks, grid search and timing."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .baselines import KnnParams, knn_impute, mode_impute
from .forest import FitParams
from .genotype import MISSING, GenotypeMatrix
from .imputer import CharfParams, charf_impute
from .missing import MissingMask, make_trials, mask_mcar

DEFAULT_FRACTIONS = (0.01, 0.05, 0.1, 0.2, 0.3)
DEFAULT_DELTAS = (3, 5, 8, 10, 15)
DEFAULT_NUS = (0, 1, 3, 5, 10)


def markov_genotypes(n_rows: int, n_cols: int, stay_prob: float = 0.9, seed: int = 7) -> GenotypeMatrix:
    """Synthetic complete genotypes with correlation between neighbouring columns.

    Column ``j`` has an allele frequency ``q_j ~ U(0.05, 0.5)`` and
    Hardy-Weinberg class probabilities ``((1-q)^2, 2q(1-q), q^2)``. The first
    column is drawn from its marginal; every later cell copies its left
    neighbour with probability ``stay_prob`` and is otherwise redrawn from its
    own column's marginal.
    """
    if not 0 <= stay_prob <= 1:
        raise ValueError("stay_prob must be in [0, 1]")
    rng = np.random.default_rng(seed)
    q = rng.uniform(0.05, 0.5, size=n_cols)
    cdf = np.cumsum(np.stack([(1 - q) ** 2, 2 * q * (1 - q), q * q], axis=1), axis=1)
    fresh = (rng.random((n_rows, n_cols))[:, :, None] > cdf[None, :, :2]).sum(axis=2).astype(np.int8)
    stay = rng.random((n_rows, n_cols)) < stay_prob
    out = np.empty((n_rows, n_cols), dtype=np.int8)
    out[:, 0] = fresh[:, 0]
    for j in range(1, n_cols):
        out[:, j] = np.where(stay[:, j], out[:, j - 1], fresh[:, j])
    return GenotypeMatrix(out)


def accuracy(mask: MissingMask, imputed: GenotypeMatrix) -> float:
    """Fraction of masked cells whose imputed class equals the hidden one."""
    if imputed.shape != (mask.n_rows, mask.n_cols):
        raise ValueError(f"imputed shape {imputed.shape} does not match mask {(mask.n_rows, mask.n_cols)}")
    if len(mask) == 0:
        raise ValueError("empty mask")
    got = imputed.values[mask.rows, mask.cols]
    if (got == MISSING).any():
        raise ValueError("imputed matrix still has MISSING cells at masked positions")
    return float((got == mask.hidden).mean())


@dataclass
class MethodSpec:
    """A named imputer ``fn(corrupted, seed) -> imputed`` plus its parameter record."""

    name: str
    fn: Callable[[GenotypeMatrix, int], GenotypeMatrix]
    params: dict = field(default_factory=dict)

    def __call__(self, m: GenotypeMatrix, seed: int) -> GenotypeMatrix:
        return self.fn(m, seed)


def _run_charf(m: GenotypeMatrix, seed: int, **params) -> GenotypeMatrix:
    return charf_impute(m, charf_params(seed=seed, **params))[0]


def _run_mode(m: GenotypeMatrix, seed: int) -> GenotypeMatrix:
    return mode_impute(m)


def _run_knn(m: GenotypeMatrix, seed: int, k: int = 10, weighting: str = "inverse-distance") -> GenotypeMatrix:
    return knn_impute(m, KnnParams(k=k, weighting=weighting))


class _Bound:
    # picklable partial so specs can cross process boundaries
    def __init__(self, fn, params):
        self.fn = fn
        self.params = params

    def __call__(self, m, seed):
        return self.fn(m, seed, **self.params)


def charf_params(
    delta: int = 5,
    nu: int = 1,
    chains: int = 5,
    trees: int = 10,
    seed: int = 0,
    **forest_kwargs,
) -> CharfParams:
    forest = FitParams(n_trees=trees, seed=seed, **forest_kwargs)
    return CharfParams(delta=delta, nu=nu, n_chains=chains, forest=forest, seed=seed)


def make_method(name: str, **params) -> MethodSpec:
    """Build a built-in method spec: ``charf``, ``mode`` or ``knn``."""
    runners = {"charf": _run_charf, "mode": _run_mode, "knn": _run_knn}
    if name not in runners:
        raise ValueError(f"unknown method {name!r}; choose from {sorted(runners)}")
    return MethodSpec(name, _Bound(runners[name], params), dict(params))


@dataclass
class EvalReport:
    dataset_id: str
    method: str
    fraction: float
    trials: list[float]
    mean_accuracy: float
    params: dict = field(default_factory=dict)
    wall_time_s: list[float] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "EvalReport":
        return cls(**json.loads(line))


def write_reports(reports: Iterable[EvalReport], path: str | Path) -> None:
    Path(path).write_text("".join(r.to_json() + "\n" for r in reports), encoding="utf-8")


def read_reports(path: str | Path) -> list[EvalReport]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [EvalReport.from_json(line) for line in lines if line.strip()]


def summary_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dataset_id", "method", "fraction", "n_trials", "mean_accuracy", "mean_wall_time_s"])
    for r in reports:
        mean_t = float(np.mean(r.wall_time_s)) if r.wall_time_s else float("nan")
        writer.writerow([r.dataset_id, r.method, r.fraction, len(r.trials), f"{r.mean_accuracy:.6f}", f"{mean_t:.4f}"])
    return buf.getvalue()


def _evaluate_trial(method: MethodSpec, corrupted: GenotypeMatrix, mask: MissingMask, seed: int) -> tuple[float, float]:
    start = time.perf_counter()
    imputed = method(corrupted, seed)
    elapsed = time.perf_counter() - start
    return accuracy(mask, imputed), elapsed


def _trial_job(args):
    method, complete, f, trial_seed, exclude_missing = args
    corrupted, mask = mask_mcar(complete, f, trial_seed, exclude_missing=exclude_missing)
    return _evaluate_trial(method, corrupted, mask, trial_seed)


def _as_spec(method: str | MethodSpec) -> MethodSpec:
    return make_method(method) if isinstance(method, str) else method


def run_benchmark(
    complete: GenotypeMatrix,
    methods: Sequence[str | MethodSpec],
    fractions: Sequence[float] = DEFAULT_FRACTIONS,
    n_trials: int = 5,
    seed: int = 0,
    dataset_id: str = "dataset",
    jobs: int = 1,
    exclude_missing: bool = False,
) -> list[EvalReport]:
    """Mask, impute and score every (method, fraction) over ``n_trials`` trials.

    Trial ``i`` masks with seed ``seed + i`` and every method sees the same
    masks. Methods receive the trial seed as their own seed. A matrix with
    native MISSING cells is only accepted with ``exclude_missing``; those
    cells are imputed but never scored.
    """
    if complete.n_missing and not exclude_missing:
        raise ValueError("benchmarking needs a complete matrix (or exclude_missing=True)")
    specs = [_as_spec(m) for m in methods]
    keys = [(mi, fi, t) for mi in range(len(specs)) for fi in range(len(fractions)) for t in range(n_trials)]
    if jobs > 1:
        job_args = [(specs[mi], complete, fractions[fi], seed + t, exclude_missing) for mi, fi, t in keys]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(zip(keys, pool.map(_trial_job, job_args)))
    else:
        results = {}
        for fi, f in enumerate(fractions):
            trials = make_trials(complete, f, n_trials, seed, exclude_missing=exclude_missing)
            for mi, spec in enumerate(specs):
                for t, (corrupted, mask) in enumerate(trials):
                    results[(mi, fi, t)] = _evaluate_trial(spec, corrupted, mask, trials.seeds[t])

    reports = []
    for mi, spec in enumerate(specs):
        for fi, f in enumerate(fractions):
            accs = [results[(mi, fi, t)][0] for t in range(n_trials)]
            times = [results[(mi, fi, t)][1] for t in range(n_trials)]
            reports.append(
                EvalReport(
                    dataset_id=dataset_id,
                    method=spec.name,
                    fraction=float(f),
                    trials=accs,
                    mean_accuracy=float(np.mean(accs)),
                    params=dict(spec.params),
                    wall_time_s=times,
                )
            )
    return reports


@dataclass(frozen=True)
class GridCell:
    delta: int
    nu: int
    mean_accuracy: float


def grid_search(
    complete: GenotypeMatrix,
    deltas: Sequence[int] = DEFAULT_DELTAS,
    nus: Sequence[int] = DEFAULT_NUS,
    f: float = 0.1,
    n_trials: int = 5,
    seed: int = 0,
    first_cols: int | None = 1000,
    chains: int = 5,
    trees: int = 10,
    jobs: int = 1,
    exclude_missing: bool = False,
) -> tuple[list[GridCell], GridCell]:
    """Evaluate ChARF for every (delta, nu) on the first ``first_cols`` columns.

    All cells share the same trial masks. The best cell is the highest mean
    accuracy; ties keep the earliest cell in (delta, nu) grid order.
    """
    if not deltas or not nus:
        raise ValueError("grid must be non-empty")
    if first_cols is not None:
        complete = complete.columns(slice(0, min(first_cols, complete.n_cols)))
    methods = [make_method("charf", delta=d, nu=v, chains=chains, trees=trees) for d in deltas for v in nus]
    reports = run_benchmark(complete, methods, [f], n_trials, seed, jobs=jobs, exclude_missing=exclude_missing)
    cells = [GridCell(r.params["delta"], r.params["nu"], r.mean_accuracy) for r in reports]
    best = max(cells, key=lambda c: c.mean_accuracy)
    return cells, best


@dataclass(frozen=True)
class ScalingPoint:
    n_cols: int
    seconds: float
    ratio: float


def bench_scaling(
    complete: GenotypeMatrix,
    col_counts: Sequence[int],
    method: str | MethodSpec = "charf",
    f: float = 0.1,
    seed: int = 0,
    repeats: int = 1,
) -> list[ScalingPoint]:
    """Time one imputation on the first ``p_s`` columns for each ``p_s``.

    A small warm-up run precedes timing so JIT compilation is not counted.
    Reported seconds are the minimum over ``repeats``.
    """
    col_counts = [int(c) for c in col_counts]
    if any(c > complete.n_cols for c in col_counts) or col_counts != sorted(col_counts):
        raise ValueError("column counts must be ascending and at most the matrix width")
    spec = _as_spec(method)
    warm, _ = mask_mcar(complete.columns(slice(0, min(20, complete.n_cols))), f, seed)
    spec(warm, seed)

    points = []
    for p_s in col_counts:
        corrupted, _ = mask_mcar(complete.columns(slice(0, p_s)), f, seed)
        best = float("inf")
        for _ in range(repeats):
            start = time.perf_counter()
            spec(corrupted, seed)
            best = min(best, time.perf_counter() - start)
        points.append(ScalingPoint(p_s, best, 0.0))
    base = points[0].seconds
    return [replace(p, ratio=p.seconds / base) for p in points]


def power_law_exponent(points: Sequence[ScalingPoint]) -> float:
    """Least-squares slope of log(seconds) against log(columns)."""
    x = np.log([p.n_cols for p in points])
    y = np.log([p.seconds for p in points])
    return float(np.polyfit(x, y, 1)[0])
