"""MCAR masking of complete matrices, with the hidden truth kept for scoring."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .genotype import MISSING, GenotypeMatrix, _as_array


@dataclass(frozen=True, eq=False)
class MissingMask:
    """Coordinates of masked cells and the classes they hide.

    ``rows``, ``cols`` and ``hidden`` are parallel arrays sorted in row-major
    order of the masked coordinates.
    """

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    hidden: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.intp)
        cols = np.asarray(self.cols, dtype=np.intp)
        hidden = np.asarray(self.hidden, dtype=np.int8)
        if not (rows.shape == cols.shape == hidden.shape) or rows.ndim != 1:
            raise ValueError("rows, cols and hidden must be 1-D arrays of equal length")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.n_rows or cols.min() < 0 or cols.max() >= self.n_cols:
                raise ValueError("masked coordinate out of range")
            if (hidden < 0).any() or (hidden > 2).any():
                raise ValueError("hidden values must be classes 0, 1 or 2")
        flat = rows * self.n_cols + cols
        order = np.argsort(flat, kind="stable")
        if np.unique(flat).size != flat.size:
            raise ValueError("duplicate masked coordinate")
        for name, arr in (("rows", rows), ("cols", cols), ("hidden", hidden)):
            arr = arr[order]
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return int(self.rows.size)

    @property
    def fraction(self) -> float:
        return len(self) / (self.n_rows * self.n_cols)

    def as_bool(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols), dtype=bool)
        out[self.rows, self.cols] = True
        return out

    def restore(self, corrupted: GenotypeMatrix) -> GenotypeMatrix:
        """Write the hidden classes back into ``corrupted``."""
        arr = corrupted.copy_values()
        arr[self.rows, self.cols] = self.hidden
        return GenotypeMatrix(arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MissingMask):
            return NotImplemented
        return (
            (self.n_rows, self.n_cols) == (other.n_rows, other.n_cols)
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.hidden, other.hidden)
        )


@dataclass
class TrialSet:
    trials: list[tuple[GenotypeMatrix, MissingMask]]
    seed: int
    fraction: float
    seeds: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    def __getitem__(self, i):
        return self.trials[i]


def n_masked(n_cells: int, f: float) -> int:
    """Number of cells masked at fraction ``f``, rounded half to even."""
    return int(round(f * n_cells))


def _pick_cells(shape: tuple[int, int], f: float, seed: int) -> np.ndarray:
    n_cells = shape[0] * shape[1]
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_cells, size=n_masked(n_cells, f), replace=False))


def mask_mcar(
    m: GenotypeMatrix,
    f: float,
    seed: int,
    exclude_missing: bool = False,
) -> tuple[GenotypeMatrix, MissingMask]:
    """Hide exactly ``round(f * N * p)`` uniformly chosen cells of a complete matrix.

    With ``exclude_missing`` the matrix may already contain MISSING cells;
    ``round(f * n_observed)`` cells are then drawn from the observed ones and
    the native gaps are never part of the mask.
    """
    if not 0 < f < 1:
        raise ValueError(f"missing fraction must be in (0, 1), got {f}")
    arr = _as_array(m)
    native = arr == MISSING
    if native.any() and not exclude_missing:
        raise ValueError("MCAR masking requires a complete matrix (no MISSING cells)")
    if exclude_missing:
        candidates = np.flatnonzero(~native.ravel())
        rng = np.random.default_rng(seed)
        flat = np.sort(rng.choice(candidates, size=n_masked(candidates.size, f), replace=False))
    else:
        flat = _pick_cells(arr.shape, f, seed)
    rows, cols = np.divmod(flat, arr.shape[1])
    corrupted = arr.copy()
    corrupted[rows, cols] = MISSING
    mask = MissingMask(arr.shape[0], arr.shape[1], rows, cols, arr[rows, cols])
    return GenotypeMatrix(corrupted), mask


def make_trials(
    m: GenotypeMatrix,
    f: float,
    n_trials: int = 5,
    seed: int = 0,
    exclude_missing: bool = False,
) -> TrialSet:
    """Independent masks; trial ``i`` uses seed ``seed + i``."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    seeds = [seed + i for i in range(n_trials)]
    trials = [mask_mcar(m, f, s, exclude_missing=exclude_missing) for s in seeds]
    return TrialSet(trials, seed=seed, fraction=f, seeds=seeds)


def corrupt_like(m_train: GenotypeMatrix | np.ndarray, f: float, seed: int) -> np.ndarray:
    """Training-time corruption: same sampling as :func:`mask_mcar`, array out.

    ``f == 0`` returns an unchanged copy.
    """
    if not 0 <= f < 1:
        raise ValueError(f"corruption fraction must be in [0, 1), got {f}")
    arr = np.array(_as_array(m_train), dtype=np.int8, copy=True)
    if (arr == MISSING).any():
        raise ValueError("training matrix must be complete")
    if f == 0 or arr.size == 0:
        return arr
    flat = _pick_cells(arr.shape, f, seed)
    arr.reshape(-1)[flat] = MISSING
    return arr


def write_mask(mask: MissingMask, path: str | Path) -> None:
    """Write ``row,col,true_value`` lines."""
    lines = [f"{r},{c},{v}\n" for r, c, v in zip(mask.rows, mask.cols, mask.hidden)]
    Path(path).write_text("".join(lines), encoding="utf-8")


def load_mask(path: str | Path, n_rows: int, n_cols: int) -> MissingMask:
    data = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    if data.size == 0:
        data = np.empty((0, 3), dtype=np.int64)
    return MissingMask(n_rows, n_cols, data[:, 0], data[:, 1], data[:, 2])
