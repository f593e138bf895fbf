"""Auxiliary distances, exact nearest-neighbour lists and the working dispersion."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse

from .errors import ConfigurationError, DataError, DispersionError
from .qlik import MU_FLOOR

DEFAULT_BETA = 0.9
DEFAULT_M_PHI = 0.01

# relative gap (to the largest distance in a row) below which two distances are a tie
TIE_RTOL = 1e-9


class SpaceMode(enum.Enum):
    COORDINATES_2D = "coordinates-2d"
    COORDINATES_3D = "coordinates-3d"
    EXPLICIT_MATRIX = "explicit-matrix"


@dataclass(frozen=True)
class AuxiliarySpace:
    """Spot coordinates (2D/3D) or an explicit pairwise distance matrix."""

    mode: SpaceMode
    coords: Optional[np.ndarray] = None
    dist: Optional[np.ndarray] = None

    @classmethod
    def from_coordinates(cls, coords):
        coords = np.array(coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] not in (2, 3):
            raise ConfigurationError("coordinates must be an n x 2 or n x 3 array")
        if not np.all(np.isfinite(coords)):
            raise DataError("coordinates contain non-finite values")
        if coords.shape[0] < 2:
            raise ConfigurationError("need at least two spots")
        coords.setflags(write=False)
        mode = SpaceMode.COORDINATES_2D if coords.shape[1] == 2 else SpaceMode.COORDINATES_3D
        return cls(mode, coords=coords)

    @classmethod
    def from_distances(cls, dist, atol=1e-12):
        dist = np.array(dist, dtype=float)
        if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
            raise ConfigurationError("distance matrix must be square")
        if dist.shape[0] < 2:
            raise ConfigurationError("need at least two spots")
        if not np.all(np.isfinite(dist)) or np.any(dist < 0):
            raise DataError("distances must be finite and non-negative")
        if np.any(np.diag(dist) != 0):
            raise DataError("distance matrix must have a zero diagonal")
        scale = max(float(dist.max()), 1.0)
        if not np.allclose(dist, dist.T, rtol=0, atol=atol * scale):
            raise DataError("distance matrix must be symmetric")
        dist.setflags(write=False)
        return cls(SpaceMode.EXPLICIT_MATRIX, dist=dist)

    @property
    def n(self):
        return (self.coords if self.coords is not None else self.dist).shape[0]

    def distance_row(self, i):
        if self.dist is not None:
            return self.dist[i]
        diff = self.coords - self.coords[i]
        return np.sqrt(np.sum(diff * diff, axis=1))


@dataclass(frozen=True)
class NeighborIndex:
    """Neighbour lists of size ``r_n``; row ``i`` starts with ``i`` itself."""

    r_n: int
    lists: np.ndarray
    _avg: sparse.csr_matrix = field(repr=False, compare=False, default=None)

    @property
    def n(self):
        return self.lists.shape[0]

    @property
    def averaging_matrix(self):
        """Sparse ``n x n`` matrix whose row ``i`` averages the i-th neighbourhood."""
        return self._avg


def neighborhood_size(n, beta=DEFAULT_BETA):
    """``r_n = min(floor(n ** beta), n - 1)``, at least 1."""
    if not 0 < beta < 1:
        raise ConfigurationError("beta must lie in (0, 1)")
    # guard floor() against 900 ** 0.9 style round-off just below an integer
    r = int(np.floor(n**beta * (1 + 1e-12)))
    return max(1, min(r, n - 1))


def build_neighbors(space, beta=DEFAULT_BETA, r_n=None):
    """Exact neighbour lists under the auxiliary distance.

    Each list holds the spot itself followed by its ``r_n - 1`` nearest other
    spots.  Distances equal up to ``TIE_RTOL`` (relative to the row maximum)
    count as ties and are ordered by ascending spot index, which keeps the
    lists stable under rotations of grid coordinates.
    """
    n = space.n
    if n < 2:
        raise ConfigurationError("need at least two spots")
    if r_n is None:
        r_n = neighborhood_size(n, beta)
    elif not 1 <= r_n <= n:
        raise ConfigurationError("r_n must lie in [1, n]")
    lists = np.empty((n, r_n), dtype=np.intp)
    need = r_n - 1
    for i in range(n):
        d = np.array(space.distance_row(i), dtype=float)
        d[i] = -np.inf
        tol = TIE_RTOL * float(np.max(d))
        if need == 0:
            lists[i, 0] = i
            continue
        kth = np.partition(d, need)[need]
        cand = np.flatnonzero(d <= kth + tol)
        cand = cand[cand != i]
        cd = d[cand]
        order = np.argsort(cd, kind="stable")
        cand, cd = cand[order], cd[order]
        group = np.concatenate(([0], np.cumsum(np.diff(cd) > tol)))
        cand = cand[np.lexsort((cand, group))]
        lists[i, 0] = i
        lists[i, 1:] = cand[:need]
    lists.setflags(write=False)
    avg = sparse.csr_matrix(
        (np.full(n * r_n, 1.0 / r_n), lists.ravel(), np.arange(0, n * r_n + 1, r_n)),
        shape=(n, n),
    )
    return NeighborIndex(r_n, lists, avg)


def local_means(x, nbr):
    """Mean of ``x`` over each neighbourhood; ``x`` may be ``n`` or ``n x p``."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != nbr.n:
        raise ConfigurationError(f"expected {nbr.n} spots, got {x.shape[0]}")
    return nbr.averaging_matrix @ x


@dataclass(frozen=True)
class DispersionEstimate:
    phi_hat: float
    phi0_hat: float
    local_signal: float
    m_phi: float


def dispersion_batch(X, nbr, model, m_phi=DEFAULT_M_PHI):
    """Working dispersion for every column of ``X`` (``n x p``).

    Returns ``(phi_hat, phi0_hat, local_signal, degenerate)``; degenerate
    columns (all zero) get ``phi_hat = m_phi`` and must be skipped by callers.
    """
    if m_phi <= 0:
        raise ConfigurationError("m_phi must be positive")
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    # work feature-major so every reduction runs along a contiguous row:
    # a column's result then does not depend on which columns share the batch
    XT = np.ascontiguousarray(X.T)
    xbar = XT.mean(axis=1)
    degenerate = ~(xbar > 0)
    xbar_c = np.maximum(xbar, MU_FLOOR)
    tau0 = np.mean((XT - xbar[:, None]) ** 2, axis=1)
    v2 = model.v2(xbar_c)
    phi0 = (tau0 - model.v1(xbar_c)) / v2
    mu_loc = np.ascontiguousarray(local_means(X, nbr).T)
    signal = np.sqrt(nbr.r_n) * np.sum((xbar[:, None] - mu_loc) ** 2, axis=1) / n / v2
    phi = np.maximum(phi0 - signal, m_phi)
    phi = np.where(degenerate, m_phi, phi)
    return phi, phi0, signal, degenerate


def working_dispersion(x, nbr, model, m_phi=DEFAULT_M_PHI):
    """Working dispersion of a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ConfigurationError("expected a single feature vector")
    phi, phi0, signal, degenerate = dispersion_batch(x[:, None], nbr, model, m_phi)
    if degenerate[0]:
        raise DispersionError("all-zero feature; feature must be pre-filtered")
    return DispersionEstimate(float(phi[0]), float(phi0[0]), float(signal[0]), m_phi)
