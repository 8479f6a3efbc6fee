"""Categorical genotype matrices with explicit missing cells.

Cells hold the SNP dosage classes 0, 1, 2 or ``MISSING`` (stored as -1 in an
``int8`` array). Matrices are immutable: the backing array is flagged
read-only and every transformation returns a new matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MISSING = -1
N_CLASSES = 3
CLASSES = (0, 1, 2)


class MatrixParseError(ValueError):
    """Raised when a matrix file contains a malformed token or ragged rows."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {col})" if col is not None else ")")
        super().__init__(message + loc)
        self.row = row
        self.col = col


@dataclass(frozen=True, eq=False)
class GenotypeMatrix:
    """N x p matrix over {0, 1, 2, MISSING}."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.int8, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
        bad = (arr < MISSING) | (arr > 2)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ValueError(f"cell ({r}, {c}) = {arr[r, c]} is not in {{0, 1, 2, MISSING}}")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def missing(self) -> np.ndarray:
        """Boolean mask of MISSING cells."""
        return self.values == MISSING

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())

    def copy_values(self) -> np.ndarray:
        """Writable copy of the cell array."""
        return self.values.copy()

    def columns(self, cols: Sequence[int] | slice) -> "GenotypeMatrix":
        return GenotypeMatrix(self.values[:, cols])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GenotypeMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.values, other.values))

    def __repr__(self) -> str:
        return f"GenotypeMatrix(n_rows={self.n_rows}, n_cols={self.n_cols}, n_missing={self.n_missing})"


def _as_array(m: GenotypeMatrix | np.ndarray) -> np.ndarray:
    return m.values if isinstance(m, GenotypeMatrix) else np.asarray(m)


def _check_cols(cols: Iterable[int] | slice | range, n_cols: int) -> np.ndarray:
    if isinstance(cols, slice):
        return np.arange(n_cols)[cols]
    idx = np.asarray(list(cols) if not isinstance(cols, np.ndarray) else cols, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= n_cols):
        raise IndexError(f"column index out of range [0, {n_cols})")
    return idx


def parse_matrix(
    text: str,
    missing_token: str = "NA",
    delimiter: str = ",",
    header: bool = False,
) -> GenotypeMatrix:
    """Parse delimited text into a :class:`GenotypeMatrix`.

    Row and column numbers in error messages are 1-based and count file lines,
    so the skipped header line is line 1 when ``header`` is set.
    """
    lines = text.splitlines()
    start = 1 if header else 0
    rows: list[list[int]] = []
    width = None
    lookup = {"0": 0, "1": 1, "2": 2, missing_token: MISSING}
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        tokens = [t.strip() for t in line.split(delimiter)]
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise MatrixParseError(f"expected {width} fields, found {len(tokens)}", row=lineno)
        row = []
        for colno, tok in enumerate(tokens, start=1):
            try:
                row.append(lookup[tok])
            except KeyError:
                raise MatrixParseError(f"invalid token {tok!r}", row=lineno, col=colno) from None
        rows.append(row)
    if not rows:
        raise MatrixParseError("empty matrix file")
    return GenotypeMatrix(np.array(rows, dtype=np.int8))


def load_matrix(
    path: str | Path,
    missing_token: str = "NA",
    delimiter: str = ",",
    header: bool = False,
) -> GenotypeMatrix:
    """Read a delimited text matrix (rows = samples, columns = features)."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_matrix(text, missing_token=missing_token, delimiter=delimiter, header=header)


def format_matrix(m: GenotypeMatrix | np.ndarray, missing_token: str = "NA", delimiter: str = ",") -> str:
    arr = _as_array(m)
    tokens = np.array(["0", "1", "2", missing_token], dtype=object)
    # MISSING (-1) indexes the last entry
    return "".join(delimiter.join(row) + "\n" for row in tokens[arr.astype(np.intp)])


def write_matrix(
    m: GenotypeMatrix | np.ndarray,
    path: str | Path,
    missing_token: str = "NA",
    delimiter: str = ",",
) -> None:
    Path(path).write_text(format_matrix(m, missing_token, delimiter), encoding="utf-8")


def one_hot_encode(m: GenotypeMatrix | np.ndarray, cols: Iterable[int] | slice | None = None) -> np.ndarray:
    """One-hot encode the selected columns into a ``uint8`` block.

    Column ``j`` of the selection occupies output columns ``3*j .. 3*j+2``.
    MISSING cells encode as three zeros.
    """
    arr = _as_array(m)
    if cols is not None:
        arr = arr[:, _check_cols(cols, arr.shape[1])]
    n, k = arr.shape
    out = np.zeros((n, k, N_CLASSES), dtype=np.uint8)
    for c in CLASSES:
        out[:, :, c] = arr == c
    return out.reshape(n, k * N_CLASSES)


def one_hot_decode(bits: np.ndarray) -> np.ndarray:
    """Inverse of :func:`one_hot_encode`; all-zero groups decode to MISSING."""
    bits = np.asarray(bits)
    n, w = bits.shape
    if w % N_CLASSES:
        raise ValueError(f"one-hot width {w} is not a multiple of {N_CLASSES}")
    groups = bits.reshape(n, w // N_CLASSES, N_CLASSES)
    out = groups.argmax(axis=2).astype(np.int8)
    out[groups.sum(axis=2) == 0] = MISSING
    return out


def complete_rows(m: GenotypeMatrix | np.ndarray, cols: Iterable[int] | slice | None = None) -> np.ndarray:
    """Sorted indices of rows with no MISSING cell in ``cols``."""
    arr = _as_array(m)
    if cols is not None:
        arr = arr[:, _check_cols(cols, arr.shape[1])]
    return np.flatnonzero((arr != MISSING).all(axis=1))


def column_modes(m: GenotypeMatrix | np.ndarray) -> np.ndarray:
    """Per-column modal observed class, ties toward the smaller class.

    Columns with no observed cell get the matrix-wide mode (0 if the whole
    matrix is missing).
    """
    arr = _as_array(m)
    counts = np.stack([(arr == c).sum(axis=0) for c in CLASSES], axis=1)
    modes = counts.argmax(axis=1).astype(np.int8)
    empty = counts.sum(axis=1) == 0
    if empty.any():
        modes[empty] = int(counts.sum(axis=0).argmax())
    return modes
