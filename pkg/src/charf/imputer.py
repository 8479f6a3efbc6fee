"""Chains of autoreplicative random forests.

Features are split into contiguous windows. Each chain visits the windows in
some order; for every window a forest learns to reproduce the window's
classes from a corrupted copy of itself plus the (already imputed) windows
visited just before it, and then fills the window's missing cells. Several
chains run independently on the same input and their per-cell predictions
are combined by majority vote.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .forest import FitParams, fit, predict
from .genotype import MISSING, N_CLASSES, GenotypeMatrix, column_modes, one_hot_encode
from .missing import corrupt_like, n_masked

logger = logging.getLogger(__name__)

MAX_DEFAULT_CHAINS = 5


def suggest_window_size(f: float, tau: float, rule: str = "nearest") -> int:
    """Window width whose expected complete-row ratio is about ``tau``.

    With MCAR missingness at rate ``f`` a row is complete over ``delta``
    columns with probability ``(1 - f) ** delta``; solving for ``delta`` gives
    ``ln(tau) / ln(1 - f)``. ``rule`` picks the integer: ``"nearest"`` rounds
    half up, ``"floor"`` keeps the ratio at or above ``tau``. Never below 1.
    """
    if not 0 < f < 1:
        raise ValueError(f"missing fraction must be in (0, 1), got {f}")
    if not 0 < tau < 1:
        raise ValueError(f"tau must be in (0, 1), got {tau}")
    x = math.log(tau) / math.log1p(-f)
    if rule == "nearest":
        delta = math.floor(x + 0.5)
    elif rule == "floor":
        delta = math.floor(x)
    else:
        raise ValueError(f"unknown rounding rule {rule!r}")
    return max(1, delta)


@dataclass(frozen=True)
class WindowPlan:
    p: int
    delta: int
    windows: tuple[range, ...]

    @property
    def n_windows(self) -> int:
        return len(self.windows)


def plan_windows(p: int, delta: int) -> WindowPlan:
    if p < 1 or delta < 1:
        raise ValueError("p and delta must be >= 1")
    windows = tuple(range(a, min(a + delta, p)) for a in range(0, p, delta))
    return WindowPlan(p=p, delta=delta, windows=windows)


@dataclass(frozen=True)
class ChainPlan:
    order: tuple[int, ...]
    nu: int = 0
    kind: str = "forward"

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("chain order must be a permutation of the window indices")
        if self.nu < 0:
            raise ValueError("nu must be >= 0")


def make_chains(n_windows: int, k: int = 5, seed: int = 0, nu: int = 0, allow_any_k: bool = False) -> list[ChainPlan]:
    """Forward chain, backward chain, then ``k - 2`` seeded random orders."""
    if n_windows < 1:
        raise ValueError("n_windows must be >= 1")
    if k < 1 or (k > MAX_DEFAULT_CHAINS and not allow_any_k):
        raise ValueError(f"number of chains must be in [1, {MAX_DEFAULT_CHAINS}], got {k}")
    forward = tuple(range(n_windows))
    chains = [ChainPlan(forward, nu, "forward")]
    if k >= 2:
        chains.append(ChainPlan(forward[::-1], nu, "backward"))
    rng = np.random.default_rng(seed)
    for _ in range(2, k):
        chains.append(ChainPlan(tuple(int(i) for i in rng.permutation(n_windows)), nu, "random"))
    return chains


@dataclass(frozen=True)
class CharfParams:
    delta: int = 5
    nu: int = 1
    n_chains: int = 5
    forest: FitParams = field(default_factory=FitParams)
    seed: int = 0
    min_train_rows: int = 5
    allow_any_k: bool = False

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.nu < 0:
            raise ValueError("nu must be >= 0")
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True, eq=False)
class VoteTally:
    """Per originally-missing cell, class counts over the K chains.

    Cells are listed in row-major order.
    """

    rows: np.ndarray
    cols: np.ndarray
    counts: np.ndarray
    n_chains: int

    def __len__(self) -> int:
        return int(self.rows.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VoteTally):
            return NotImplemented
        return (
            self.n_chains == other.n_chains
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.counts, other.counts)
        )

    def to_csv(self) -> str:
        lines = ["row,col,votes_0,votes_1,votes_2\n"]
        lines += [f"{r},{c},{a},{b},{d}\n" for r, c, (a, b, d) in zip(self.rows, self.cols, self.counts)]
        return "".join(lines)


def step_seeds(seed: int, step: int) -> tuple[int, int]:
    """(corruption seed, forest seed) for the ``step``-th window of a chain."""
    a, b = np.random.SeedSequence([seed, step]).generate_state(2)
    return int(a), int(b)


def _fill_window(
    work: np.ndarray,
    target: Sequence[int],
    stacked: Sequence[Sequence[int]],
    forest_params: FitParams,
    seed: int,
    step: int,
    min_train_rows: int,
    fallback_modes: np.ndarray,
) -> str:
    """Impute MISSING cells of ``work[:, target]`` in place.

    Returns how the window was handled: ``"skip"``, ``"forest"`` or ``"mode"``.
    """
    target = np.asarray(target, dtype=np.intp)
    block = work[:, target]
    miss = block == MISSING
    test_rows = np.flatnonzero(miss.any(axis=1))
    if test_rows.size == 0:
        return "skip"

    f_w = miss.sum() / miss.size
    # drop the oldest stacked windows first until enough complete rows remain
    for n_stack in range(len(stacked), -1, -1):
        ext = np.concatenate([target, *[np.asarray(w, dtype=np.intp) for w in stacked[:n_stack]]])
        ext_block = work[:, ext]
        train_rows = np.flatnonzero((ext_block != MISSING).all(axis=1))
        if train_rows.size >= max(min_train_rows, 1):
            break
    else:
        fill = np.broadcast_to(fallback_modes[target], block.shape)
        work[:, target] = np.where(miss, fill, block)
        return "mode"

    corrupt_seed, forest_seed = step_seeds(seed, step)
    train = ext_block[train_rows]
    X_train = one_hot_encode(corrupt_like(train, f_w, corrupt_seed))
    Y_train = train[:, : target.size]
    model = fit(X_train, Y_train, replace(forest_params, seed=forest_seed))
    pred = predict(model, one_hot_encode(ext_block[test_rows]))
    sub = block[test_rows]
    block[test_rows] = np.where(sub == MISSING, pred, sub)
    work[:, target] = block
    return "forest"


def _run_chain(
    values: np.ndarray,
    plan: WindowPlan,
    chain: ChainPlan,
    forest_params: FitParams,
    seed: int,
    min_train_rows: int,
    fallback_modes: np.ndarray,
) -> np.ndarray:
    work = values.copy()
    if len(chain.order) != plan.n_windows:
        raise ValueError("chain order length does not match the window plan")
    handled = {"skip": 0, "forest": 0, "mode": 0}
    for step, w in enumerate(chain.order):
        previous = chain.order[max(0, step - chain.nu):step][::-1]
        stacked = [plan.windows[v] for v in previous]
        how = _fill_window(work, plan.windows[w], stacked, forest_params, seed, step, min_train_rows, fallback_modes)
        handled[how] += 1
    logger.debug("chain %s: %s", chain.kind, handled)
    return work


def impute_chain(
    m: GenotypeMatrix,
    plan: WindowPlan,
    chain: ChainPlan,
    forest_params: FitParams | None = None,
    seed: int = 0,
    min_train_rows: int = 5,
) -> GenotypeMatrix:
    """Impute every MISSING cell by visiting windows in ``chain.order``.

    Window ``chain.order[i]`` gets the ``chain.nu`` windows visited right
    before it as extra inputs (fewer near the start of the chain). Windows
    with too few complete training rows fall back to per-column modes.
    """
    forest_params = forest_params or FitParams()
    if plan.p != m.n_cols:
        raise ValueError(f"window plan covers {plan.p} columns, matrix has {m.n_cols}")
    out = _run_chain(m.values, plan, chain, forest_params, seed, min_train_rows, column_modes(m))
    return GenotypeMatrix(out)


def autoreplicate(m: GenotypeMatrix, forest_params: FitParams | None = None, seed: int = 0, min_train_rows: int = 5) -> GenotypeMatrix:
    """One autoreplicative forest over all columns at once."""
    forest_params = forest_params or FitParams()
    work = m.copy_values()
    _fill_window(work, range(m.n_cols), [], forest_params, seed, 0, min_train_rows, column_modes(m))
    return GenotypeMatrix(work)


def resolve_votes(counts: np.ndarray, preferred: np.ndarray) -> np.ndarray:
    """Argmax per row; ties go to ``preferred`` if it is tied, else the smallest class."""
    counts = np.asarray(counts)
    top = counts.max(axis=1, keepdims=True)
    tied = counts == top
    winner = tied.argmax(axis=1)
    pref_ok = tied[np.arange(counts.shape[0]), preferred]
    return np.where(pref_ok, preferred, winner).astype(np.int8)


def charf_impute(
    m: GenotypeMatrix,
    params: CharfParams | None = None,
    n_jobs: int = 1,
) -> tuple[GenotypeMatrix, VoteTally]:
    """Run ``params.n_chains`` independent chains and majority-vote the results.

    Chain ``c`` uses seed ``params.seed + c``; random window orders come from
    ``params.seed``. Vote ties go to the column's observed mode, then to the
    smallest class.
    """
    params = params or CharfParams()
    plan = plan_windows(m.n_cols, params.delta)
    chains = make_chains(plan.n_windows, params.n_chains, params.seed, params.nu, params.allow_any_k)
    modes = column_modes(m)
    values = m.values

    def run(c: int) -> np.ndarray:
        return _run_chain(values, plan, chains[c], params.forest, params.seed + c, params.min_train_rows, modes)

    if n_jobs > 1 and len(chains) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outputs = list(pool.map(run, range(len(chains))))
    else:
        outputs = [run(c) for c in range(len(chains))]

    rows, cols = np.nonzero(values == MISSING)
    counts = np.zeros((rows.size, N_CLASSES), dtype=np.int64)
    for out in outputs:
        counts[np.arange(rows.size), out[rows, cols]] += 1

    result = values.copy()
    result[rows, cols] = resolve_votes(counts, modes[cols])
    return GenotypeMatrix(result), VoteTally(rows, cols, counts, len(chains))


def training_size_curve(
    f: float,
    deltas: Sequence[int],
    n_rows: int = 1000,
    trials: int = 20,
    seed: int = 0,
    n_cols: int | None = None,
) -> dict[int, float]:
    """Mean fraction of complete rows per window of width delta under MCAR masking.

    Each trial masks ``round(f * n_rows * n_cols)`` cells of an
    ``n_rows x n_cols`` grid and averages the complete-row fraction over all
    full-width windows.
    """
    if not 0 <= f < 1:
        raise ValueError("f must be in [0, 1)")
    deltas = [int(d) for d in deltas]
    if n_cols is None:
        n_cols = 10 * max(deltas)
    if any(d < 1 or d > n_cols for d in deltas):
        raise ValueError("every delta must be in [1, n_cols]")
    totals = {d: 0.0 for d in deltas}
    n_cells = n_rows * n_cols
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        miss = np.zeros(n_cells, dtype=bool)
        miss[rng.choice(n_cells, size=n_masked(n_cells, f), replace=False)] = True
        miss = miss.reshape(n_rows, n_cols)
        for d in deltas:
            n_win = n_cols // d
            per_window = miss[:, : n_win * d].reshape(n_rows, n_win, d).any(axis=2)
            totals[d] += 1.0 - per_window.mean()
    return {d: totals[d] / trials for d in deltas}
