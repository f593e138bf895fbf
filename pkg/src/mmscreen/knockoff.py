"""Bootstrap knockoffs and the knockoff threshold for FDR control."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._streams import stream, thread_map
from .errors import ConfigurationError
from .expression import ExpressionMatrix, as_array
from .mmtest import MMConfig, ScreenResult, _resolve_neighbors, screen_all


@dataclass
class KnockoffRun:
    q0: float
    seed: int
    orig_stats: np.ndarray
    knock_stats_raw: np.ndarray
    knock_stats_scaled: np.ndarray
    threshold: float
    selected: np.ndarray
    orig: Optional[ScreenResult] = None
    knock: Optional[ScreenResult] = None

    @property
    def n_selected(self):
        return int(self.selected.size)


def generate_knockoffs(X, seed=0, threads=None):
    """Resample every column with replacement from its own values.

    Column ``j`` uses the stream ``(seed, "knockoff", j)``.  Returns the same
    container type as the input.
    """
    values = as_array(X)
    n, p = values.shape

    def one(j):
        idx = stream(seed, "knockoff", j).integers(0, n, size=n)
        return values[idx, j]

    cols = thread_map(one, range(p), threads)
    knock = np.column_stack(cols) if cols else np.zeros((n, 0))
    if isinstance(X, ExpressionMatrix):
        return ExpressionMatrix(knock, X.spot_ids, tuple(f"{g}~knockoff" for g in X.gene_ids))
    return knock


def scaled_knockoff_stats(knock_raw, n):
    """Multiply raw knockoff statistics by ``1 + 1/ln(n)``."""
    if n < 3:
        raise ConfigurationError("scaling needs n >= 3")
    return np.asarray(knock_raw, dtype=float) * (1.0 + 1.0 / math.log(n))


def exceedance_ratio(orig, knock_scaled, h):
    orig = np.asarray(orig, dtype=float)
    knock_scaled = np.asarray(knock_scaled, dtype=float)
    return np.count_nonzero(knock_scaled >= h) / max(np.count_nonzero(orig >= h), 1)


def knockoff_threshold(orig, knock_scaled, q0):
    """Smallest candidate ``h`` whose knockoff exceedance ratio is ``<= q0``.

    Candidates are the distinct nonzero ``|orig|`` values; returns ``inf``
    when none qualifies.
    """
    if not 0 < q0 < 1:
        raise ConfigurationError("q0 must lie in (0, 1)")
    orig = np.asarray(orig, dtype=float)
    knock = np.sort(np.asarray(knock_scaled, dtype=float))
    cand = np.unique(np.abs(orig))
    cand = cand[cand != 0]
    if cand.size == 0:
        return math.inf
    so = np.sort(orig)
    n_knock = knock.size - np.searchsorted(knock, cand, side="left")
    n_orig = so.size - np.searchsorted(so, cand, side="left")
    ok = n_knock / np.maximum(n_orig, 1) <= q0
    if not ok.any():
        return math.inf
    return float(cand[np.argmax(ok)])


def select(orig, threshold):
    orig = np.asarray(orig, dtype=float)
    if math.isinf(threshold):
        return np.zeros(0, dtype=np.intp)
    return np.flatnonzero(orig >= threshold)


def run_knockoff_filter(X, space, cfg=None, q0=0.05, seed=None, *, threads=None, knockoffs=None):
    """Screen ``[X, knockoffs]`` with one shared neighbour index and threshold at ``q0``.

    Knockoff columns get their own working dispersion and their own
    initialisation streams, so adding them leaves the original statistics
    untouched.
    """
    cfg = cfg or MMConfig()
    seed = cfg.seed if seed is None else seed
    values = as_array(X)
    n = values.shape[0]
    nbr = _resolve_neighbors(space, n, cfg)
    if knockoffs is None:
        knockoffs = generate_knockoffs(X, seed, threads)
    orig = screen_all(X, nbr, cfg, threads=threads)
    knock = screen_all(knockoffs, nbr, cfg, threads=threads, stream_purpose="init-knockoff")
    scaled = scaled_knockoff_stats(knock.mm_stat, n)
    h = knockoff_threshold(orig.mm_stat, scaled, q0)
    return KnockoffRun(q0, seed, orig.mm_stat, knock.mm_stat, scaled, h, select(orig.mm_stat, h), orig, knock)
