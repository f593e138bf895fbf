"""Synthetic spatial count data on a square grid and screening metrics.

Geometry
    ``n`` spots on a ``side x side`` unit grid (``side = sqrt(n)``), enumerated
    column-major: spot ``i`` sits at ``(i // side, i % side)``.  The grid is
    cut into ``K`` vertical bands of equal width; the band index is the
    domain label.

Expression
    Irrelevant features have mean ``base_mean`` at every spot.  Relevant
    feature ``j < s`` has mean ``base_mean * fold**delta[k]`` in domain ``k``
    with ``delta`` in ``{-1, 0, +1}`` taken from a cycle of four patterns.
    The base pattern alternates ``-1, 0, -1, 0, ...`` along the band order
    and ends in ``+1`` on the last domain; the second pattern also sets
    every domain past the midpoint to ``+1``.  Cycle position ``j % 4``:
    0 is the second pattern, 1 is its mirror image, 2 is the base pattern,
    3 is its mirror image.  For ``K = 5``::

        j % 4 == 0   -1  0 -1 +1 +1
        j % 4 == 1   +1 +1 -1  0 -1
        j % 4 == 2   -1  0 -1  0 +1
        j % 4 == 3   +1  0 -1  0 -1

    Every pattern contrasts the two ends of the grid, and together they
    separate each pair of neighbouring domains.  With one domain there is
    no contrast and ``delta`` is zero.

    Counts are negative binomial with shape ``nb_size`` or Poisson
    log-normal with log-scale SD ``pln_sigma``; afterwards every entry is
    zeroed with probability ``zero_rate``.

Randomness
    Feature ``j`` draws everything (counts, then the zero mask) from PCG64
    seeded with ``SeedSequence([seed, 3, j])``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from ._streams import stream, thread_map
from .errors import ConfigurationError
from .expression import ExpressionMatrix


class LayoutKind(enum.Enum):
    SQUARE_GRID = "square"
    FROM_FILE = "file"


@dataclass(frozen=True)
class LayoutSpec:
    kind: LayoutKind = LayoutKind.SQUARE_GRID
    n: int = 900
    K: int = 5
    path: Optional[str] = None


@dataclass(frozen=True)
class Layout:
    coords: np.ndarray
    labels: np.ndarray
    spot_ids: tuple

    @property
    def n(self):
        return self.labels.size

    @property
    def K(self):
        return int(np.unique(self.labels).size)


def gen_layout(spec=LayoutSpec()):
    """Coordinates and domain labels for a layout specification."""
    if spec.kind is LayoutKind.FROM_FILE:
        from .io import load_layout

        return load_layout(spec.path)
    n, K = int(spec.n), int(spec.K)
    side = int(round(np.sqrt(n)))
    if side * side != n:
        raise ConfigurationError(f"n={n} is not a perfect square")
    if K < 1 or side % K:
        raise ConfigurationError(f"a {side}x{side} grid cannot be cut into {K} equal bands")
    i = np.arange(n)
    col, row = i // side, i % side
    coords = np.column_stack([col, row]).astype(float)
    labels = col // (side // K)
    return Layout(coords, labels, tuple(f"spot{k}" for k in range(n)))


class CountDist(enum.Enum):
    NEG_BINOMIAL = "nb"
    POISSON_LOGNORMAL = "pln"


class Signal(enum.Enum):
    HIGH = "high"
    LOW = "low"


@dataclass(frozen=True)
class GenSpec:
    p: int = 3000
    s: int = 100
    dist: CountDist = CountDist.NEG_BINOMIAL
    signal: Signal = Signal.HIGH
    zero_rate: float = 0.30
    base_mean: float = 5.0
    nb_size: float = 2.0
    pln_sigma: float = 0.5
    fold_high: float = 3.0
    fold_low: float = 1.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "dist", CountDist(self.dist))
        object.__setattr__(self, "signal", Signal(self.signal))
        if not 0 <= self.s <= self.p:
            raise ConfigurationError("require 0 <= s <= p")
        if not 0 <= self.zero_rate <= 1:
            raise ConfigurationError("zero_rate must lie in [0, 1]")
        for name in ("base_mean", "nb_size", "pln_sigma", "fold_high", "fold_low"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")

    @property
    def fold(self):
        return self.fold_high if self.signal is Signal.HIGH else self.fold_low

    def as_dict(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.value if isinstance(v, enum.Enum) else v
        return out


def feature_means(labels, spec, j):
    """Per-spot mean of feature ``j`` before zero inflation."""
    means = np.full(labels.size, float(spec.base_mean))
    if j < spec.s:
        means *= spec.fold ** fold_exponents(int(labels.max()) + 1, j)[labels]
    return means


def fold_exponents(K, j):
    """Exponents ``delta`` over the ``K`` domains for relevant feature ``j``."""
    k = np.arange(K)
    if K == 1:
        return np.zeros(1)
    delta = np.where(k % 2 == 0, -1.0, 0.0)
    delta[-1] = 1.0
    if j % 4 < 2:
        delta[k > K / 2] = 1.0
    return delta[::-1].copy() if j % 2 else delta


def draw_counts(rng, means, spec):
    if spec.dist is CountDist.NEG_BINOMIAL:
        size = spec.nb_size
        x = rng.negative_binomial(size, size / (size + means))
    else:
        sig = spec.pln_sigma
        rate = np.exp(rng.normal(np.log(means) - 0.5 * sig * sig, sig))
        x = rng.poisson(rate)
    zero = rng.random(means.size) < spec.zero_rate
    return np.where(zero, 0, x).astype(float)


def gen_expression(layout, spec, threads=None):
    """Simulate an ``n x p`` count matrix; returns ``(matrix, relevant indices)``."""
    labels = np.asarray(layout.labels)

    def one(j):
        return draw_counts(stream(spec.seed, "simulate", j), feature_means(labels, spec, j), spec)

    cols = thread_map(one, range(spec.p), threads)
    values = np.column_stack(cols) if cols else np.zeros((labels.size, 0))
    X = ExpressionMatrix(values, layout.spot_ids, tuple(f"gene{j}" for j in range(spec.p)))
    return X, np.arange(spec.s)


# metrics -----------------------------------------------------------------------


def _ranking(stats):
    stats = np.asarray(stats, dtype=float)
    return np.lexsort((np.arange(stats.size), -stats))


def auprc(stats, truth):
    """Area under the step precision-recall curve of a ranking (average precision).

    Features are ranked by decreasing statistic, ties by ascending index.
    """
    truth = np.asarray(sorted(set(int(t) for t in truth)), dtype=np.intp)
    if truth.size == 0:
        raise ConfigurationError("empty truth set")
    order = _ranking(stats)
    hit = np.zeros(len(stats), dtype=bool)
    hit[truth] = True
    hits = hit[order]
    ranks = np.arange(1, hits.size + 1)
    precision = np.cumsum(hits) / ranks
    return float(precision[hits].sum() / truth.size)


def screening_metrics(truth, stats=None, selected=None):
    """Power, FDR and AUPRC against a set of truly relevant features."""
    truth = set(int(t) for t in truth)
    if not truth:
        raise ConfigurationError("empty truth set: power undefined")
    out = {}
    if selected is not None:
        sel = set(int(j) for j in selected)
        out["power"] = len(sel & truth) / len(truth)
        out["fdr"] = len(sel - truth) / max(len(sel), 1)
    if stats is not None:
        if max(truth) >= len(stats):
            raise ConfigurationError("truth index outside the feature range")
        out["auprc"] = auprc(stats, truth)
    return out
