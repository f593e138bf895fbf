"""The spots x genes expression matrix container."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError


@dataclass(frozen=True)
class ExpressionMatrix:
    """Non-negative ``n x p`` matrix with spot and gene identifiers."""

    values: np.ndarray
    spot_ids: tuple
    gene_ids: tuple

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ConfigurationError("expression values must be a 2-D array")
        bad = ~np.isfinite(values) | (values < 0)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise DataError(f"invalid value {values[i, j]!r} at (row {i}, column {j})")
        spot_ids = tuple(str(s) for s in self.spot_ids)
        gene_ids = tuple(str(g) for g in self.gene_ids)
        if len(spot_ids) != values.shape[0] or len(gene_ids) != values.shape[1]:
            raise ConfigurationError("identifier lists do not match the matrix shape")
        if len(set(spot_ids)) != len(spot_ids):
            raise DataError("spot identifiers are not unique")
        if len(set(gene_ids)) != len(gene_ids):
            raise DataError("gene identifiers are not unique")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "spot_ids", spot_ids)
        object.__setattr__(self, "gene_ids", gene_ids)

    @classmethod
    def from_array(cls, values, spot_ids=None, gene_ids=None):
        values = np.asarray(values, dtype=float)
        n, p = values.shape
        if spot_ids is None:
            spot_ids = [f"spot{i}" for i in range(n)]
        if gene_ids is None:
            gene_ids = [f"gene{j}" for j in range(p)]
        return cls(values, tuple(spot_ids), tuple(gene_ids))

    @property
    def n_spots(self):
        return self.values.shape[0]

    @property
    def n_genes(self):
        return self.values.shape[1]

    def select_genes(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        return ExpressionMatrix(
            self.values[:, idx], self.spot_ids, tuple(self.gene_ids[j] for j in idx)
        )

    def drop_all_zero(self):
        """Return ``(matrix without all-zero genes, number dropped)``."""
        keep = np.flatnonzero(self.values.sum(axis=0) > 0)
        return self.select_genes(keep), self.n_genes - keep.size


def as_array(X):
    """Values of an ``ExpressionMatrix`` or a plain 2-D array."""
    if isinstance(X, ExpressionMatrix):
        return X.values
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise ConfigurationError("expected a 2-D expression matrix")
    return arr
