"""Reference-free baseline imputers: per-column mode and categorical kNN."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .genotype import MISSING, N_CLASSES, GenotypeMatrix, column_modes, one_hot_encode

KNN_EPS = 1e-6


@dataclass(frozen=True)
class KnnParams:
    k: int = 10
    weighting: str = "inverse-distance"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.weighting not in ("uniform", "inverse-distance"):
            raise ValueError(f"unknown weighting {self.weighting!r}")


def mode_impute(m: GenotypeMatrix) -> GenotypeMatrix:
    """Fill each MISSING cell with its column's most frequent observed class."""
    arr = m.copy_values()
    modes = column_modes(arr)
    rows, cols = np.nonzero(arr == MISSING)
    arr[rows, cols] = modes[cols]
    return GenotypeMatrix(arr)


def hamming_distances(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise mismatch rate over co-observed columns.

    Returns ``(dist, shared)`` where ``shared[r, s]`` counts columns observed
    in both rows and ``dist`` is NaN wherever ``shared`` is zero.
    """
    oh = one_hot_encode(arr).astype(np.float64)
    obs = (arr != MISSING).astype(np.float64)
    matches = oh @ oh.T
    shared = obs @ obs.T
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.where(shared > 0, (shared - matches) / shared, np.nan)
    return dist, shared.astype(np.int64)


def knn_impute(m: GenotypeMatrix, params: KnnParams | None = None) -> GenotypeMatrix:
    """Impute each MISSING cell from the k nearest rows observed in that column.

    Distance is the fraction of mismatching classes among columns observed in
    both rows; rows sharing no observed column are never neighbours. Among
    equally distant candidates the lower row index wins. Votes are uniform or
    weighted by ``1 / (d + 1e-6)``; vote ties go to the smaller class. Cells
    without any eligible neighbour get the column mode.
    """
    params = params or KnnParams()
    arr = m.values
    if arr.shape[0] < 2:
        raise ValueError("kNN imputation needs at least two rows")
    out = arr.copy()
    modes = column_modes(arr)
    dist, _ = hamming_distances(arr)
    np.fill_diagonal(dist, np.nan)
    observed = arr != MISSING

    for r in np.flatnonzero((~observed).any(axis=1)):
        d_r = dist[r]
        # nearest first, ties by row index; unusable rows (NaN) sort last
        order = np.lexsort((np.arange(d_r.size), np.where(np.isnan(d_r), np.inf, d_r)))
        order = order[~np.isnan(d_r[order])]
        for c in np.flatnonzero(~observed[r]):
            donors = order[observed[order, c]][: params.k]
            if donors.size == 0:
                out[r, c] = modes[c]
                continue
            if params.weighting == "uniform":
                w = np.ones(donors.size)
            else:
                w = 1.0 / (d_r[donors] + KNN_EPS)
            votes = np.bincount(arr[donors, c], weights=w, minlength=N_CLASSES)
            out[r, c] = int(np.argmax(votes))
    return GenotypeMatrix(out)
