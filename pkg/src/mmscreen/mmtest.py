"""MM iterations for the quasi-likelihood mixture and the MM-test statistic.

For one feature with working dispersion ``phi`` the heterogeneous model is
the mixture ``sum_k alpha_k exp(Q(x; mu_k, phi))``.  Each MM update sets
responsibilities from the current mixture, then proportions to the mean
responsibility and means to responsibility-weighted averages of ``x``.
The statistic is twice the gap between the fitted mixture quasi-log-likelihood
and the homogeneous one with every mean at the sample mean.

All features are fitted together in fixed-size chunks.  Inside a chunk the
arrays are laid out feature-major with spots on the last axis, and every
reduction runs along that axis, so a feature's numbers never depend on its
chunk neighbours, the chunk size or the thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import qlik
from ._streams import stream, thread_map
from .errors import ConfigurationError, DispersionError, NumericalError
from .expression import ExpressionMatrix, as_array
from .neighborhood import (
    DEFAULT_BETA,
    DEFAULT_M_PHI,
    AuxiliarySpace,
    NeighborIndex,
    build_neighbors,
    dispersion_batch,
)

MASS_EPS = 1e-12
CHUNK = 64


@dataclass(frozen=True)
class MMConfig:
    k_components: int = 2
    max_iters: int = 100
    rel_tol: float = 1e-8
    seed: int = 0
    model: qlik.VarianceModel = qlik.QUASI_NEGBINOMIAL
    beta: float = DEFAULT_BETA
    m_phi: float = DEFAULT_M_PHI
    mu_floor: float = qlik.MU_FLOOR
    jitter: float = 0.05

    def __post_init__(self):
        if self.k_components < 2:
            raise ConfigurationError("k_components must be >= 2")
        if self.max_iters < 1:
            raise ConfigurationError("max_iters must be >= 1")
        if self.rel_tol < 0:
            raise ConfigurationError("rel_tol must be non-negative")
        if not 0 < self.beta < 1:
            raise ConfigurationError("beta must lie in (0, 1)")
        if self.m_phi <= 0 or self.mu_floor <= 0:
            raise ConfigurationError("m_phi and mu_floor must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")


@dataclass
class MMFitState:
    alpha: np.ndarray
    mu: np.ndarray
    resp: Optional[np.ndarray] = None
    loglik_trace: List[float] = field(default_factory=list)


@dataclass(frozen=True)
class FeatureStatistic:
    feature_id: str
    mm_stat: float
    phi_hat: float
    l1: float
    l0: float
    iters_used: int
    degenerate: bool = False


# initialisation --------------------------------------------------------------


def init_params(x, K, seed=0, *, rng=None, jitter=0.05, mu_floor=qlik.MU_FLOOR, index=0):
    """Starting proportions and means for one feature.

    Means start at the type-7 quantiles of the clamped data at levels
    ``(k - 0.5) / K``, each scaled by ``1 + u`` with ``u ~ U[-jitter, jitter]``.
    When the data hold fewer than ``K`` distinct values the number of
    components is reduced to that count.
    """
    x = np.maximum(np.asarray(x, dtype=float), mu_floor)
    distinct = np.unique(x).size
    K_eff = min(int(K), distinct)
    if K_eff <= 1:
        return np.ones(1), np.array([max(float(np.mean(x)), mu_floor)])
    if rng is None:
        rng = stream(seed, "init", index)
    levels = (np.arange(1, K_eff + 1) - 0.5) / K_eff
    base = np.quantile(x, levels, method="linear")
    mu = base
    for _ in range(100):
        u = rng.uniform(-jitter, jitter, size=K_eff) if jitter > 0 else np.zeros(K_eff)
        mu = np.maximum(base * (1.0 + u), mu_floor)
        if np.unique(mu).size == K_eff or jitter == 0:
            break
    return np.full(K_eff, 1.0 / K_eff), mu


# kernel ----------------------------------------------------------------------


def _component_terms(model, XT, mu, phi, log_alpha, cself):
    """``log alpha_k + Q(x_i; mu_k, phi)`` as an ``F x K x n`` array."""
    if model.has_closed_form:
        th = model.theta(mu, phi[:, None])
        kb = model.kappa(mu, phi[:, None])
        L = XT[:, None, :] * th[:, :, None] - kb[:, :, None] - cself[:, None, :]
    else:
        L = qlik.quasi_loglik(model, XT[:, None, :], mu[:, :, None], phi[:, None, None])
    return L + log_alpha[:, :, None]


def _logsumexp_k(L):
    m = L[:, 0]
    for k in range(1, L.shape[1]):
        m = np.maximum(m, L[:, k])
    s = np.exp(L[:, 0] - m)
    for k in range(1, L.shape[1]):
        s = s + np.exp(L[:, k] - m)
    return m + np.log(s)


def _self_terms(model, XT, phi):
    if model.has_closed_form:
        return qlik.self_term(model, XT, phi[:, None])
    return np.zeros_like(XT)


def _log_alpha(alpha):
    with np.errstate(divide="ignore"):
        return np.log(alpha)


def _update(XT, alpha, mu, L, lse, mu_floor):
    """One MM step from the component terms ``L`` of the current parameters."""
    n = XT.shape[1]
    resp = np.exp(L - lse[:, None, :])
    mass = resp.sum(axis=2)
    alpha_new = mass / n
    wsum = (resp * XT[:, None, :]).sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu_new = np.where(mass >= MASS_EPS, wsum / mass, mu)
    mu_new = np.maximum(mu_new, mu_floor)
    return resp, alpha_new, mu_new


def _fit_block(XT, phi, alpha, mu, model, max_iters, rel_tol, mu_floor, ids):
    """Run MM on a block of features.

    Returns ``(alpha, mu, l1, iters, trace, resp)`` where ``trace`` is
    ``(max_iters + 1) x F`` with NaN after a feature stopped.
    """
    F = XT.shape[0]
    cself = _self_terms(model, XT, phi)
    L = _component_terms(model, XT, mu, phi, _log_alpha(alpha), cself)
    lse = _logsumexp_k(L)
    ll = lse.sum(axis=1)
    _check_finite(ll, ids)
    trace = np.full((max_iters + 1, F), np.nan)
    trace[0] = ll
    iters = np.zeros(F, dtype=np.int64)
    active = np.ones(F, dtype=bool)
    resp = None
    for t in range(1, max_iters + 1):
        resp, a_new, m_new = _update(XT, alpha, mu, L, lse, mu_floor)
        alpha = np.where(active[:, None], a_new, alpha)
        mu = np.where(active[:, None], m_new, mu)
        L = _component_terms(model, XT, mu, phi, _log_alpha(alpha), cself)
        lse = _logsumexp_k(L)
        ll_new = lse.sum(axis=1)
        _check_finite(ll_new, ids)
        ll_new = np.where(active, ll_new, ll)
        trace[t] = np.where(active, ll_new, np.nan)
        iters += active
        gain = ll_new - ll
        stop = gain <= rel_tol * np.abs(ll)
        ll = ll_new
        active &= ~stop
        if not active.any():
            break
    return alpha, mu, ll, iters, trace, resp


def _check_finite(ll, ids):
    bad = ~np.isfinite(ll)
    if bad.any():
        raise NumericalError("non-finite quasi-log-likelihood", ids[int(np.argmax(bad))])


def _null_loglik(model, XT, phi, mu_floor):
    xbar = np.maximum(XT.mean(axis=1), mu_floor)
    cself = _self_terms(model, XT, phi)
    L = _component_terms(
        model, XT, xbar[:, None], phi, np.zeros((XT.shape[0], 1)), cself
    )
    return L[:, 0].sum(axis=1)


@dataclass
class ScreenResult:
    """Per-feature MM-test results for a batch of features."""

    feature_ids: tuple
    mm_stat: np.ndarray
    phi_hat: np.ndarray
    phi0_hat: np.ndarray
    l1: np.ndarray
    l0: np.ndarray
    iters_used: np.ndarray
    degenerate: np.ndarray
    traces: Optional[list] = None

    def __len__(self):
        return len(self.feature_ids)

    def __getitem__(self, j):
        return FeatureStatistic(
            self.feature_ids[j],
            float(self.mm_stat[j]),
            float(self.phi_hat[j]),
            float(self.l1[j]),
            float(self.l0[j]),
            int(self.iters_used[j]),
            bool(self.degenerate[j]),
        )

    def __iter__(self):
        return (self[j] for j in range(len(self)))

    def selected(self, t):
        """Indices with ``mm_stat >= t``."""
        return np.flatnonzero(self.mm_stat >= t)


def _resolve_neighbors(space, n, cfg):
    if isinstance(space, NeighborIndex):
        nbr = space
    elif isinstance(space, AuxiliarySpace):
        nbr = build_neighbors(space, cfg.beta)
    else:
        raise ConfigurationError("space must be an AuxiliarySpace or NeighborIndex")
    if nbr.n != n:
        raise ConfigurationError(f"matrix has {n} spots but the space has {nbr.n}")
    return nbr


def screen_all(
    X,
    space,
    cfg=None,
    *,
    threads=None,
    stream_purpose="init",
    stream_offset=0,
    keep_traces=False,
    feature_ids=None,
):
    """MM-test statistic for every column of ``X``.

    ``space`` is an :class:`AuxiliarySpace` or a prebuilt
    :class:`NeighborIndex`.  Column ``j`` initialises from the random stream
    ``(cfg.seed, stream_purpose, stream_offset + j)``.
    """
    cfg = cfg or MMConfig()
    if feature_ids is None:
        feature_ids = (
            X.gene_ids if isinstance(X, ExpressionMatrix) else tuple(str(j) for j in range(np.shape(X)[1]))
        )
    values = as_array(X)
    n, p = values.shape
    if p < 1:
        raise ConfigurationError("matrix has no features")
    nbr = _resolve_neighbors(space, n, cfg)

    starts = list(range(0, p, CHUNK))

    def run(start):
        cols = slice(start, min(start + CHUNK, p))
        return _screen_chunk(
            values[:, cols], nbr, cfg, feature_ids[cols], stream_purpose, stream_offset + start, keep_traces
        )

    parts = thread_map(run, starts, threads)
    cat = {key: np.concatenate([part[key] for part in parts]) for key in parts[0] if key != "traces"}
    traces = None
    if keep_traces:
        traces = [tr for part in parts for tr in part["traces"]]
    return ScreenResult(
        tuple(feature_ids),
        cat["mm_stat"],
        cat["phi_hat"],
        cat["phi0_hat"],
        cat["l1"],
        cat["l0"],
        cat["iters"],
        cat["degenerate"],
        traces,
    )


def _screen_chunk(Xc, nbr, cfg, ids, purpose, offset, keep_traces):
    F = Xc.shape[1]
    phi, phi0, _, degenerate = dispersion_batch(Xc, nbr, cfg.model, cfg.m_phi)
    XT = np.ascontiguousarray(Xc.T)
    K = cfg.k_components
    alpha = np.zeros((F, K))
    mu = np.ones((F, K))
    for f in range(F):
        if degenerate[f]:
            alpha[f, 0] = 1.0
            continue
        a0, m0 = init_params(
            XT[f], K, rng=stream(cfg.seed, purpose, offset + f), jitter=cfg.jitter, mu_floor=cfg.mu_floor
        )
        k = a0.size
        alpha[f, :k] = a0
        mu[f, :k] = m0
        mu[f, k:] = m0[0]
    live = np.flatnonzero(~degenerate)
    out = {
        "mm_stat": np.zeros(F),
        "phi_hat": phi,
        "phi0_hat": phi0,
        "l1": np.zeros(F),
        "l0": np.zeros(F),
        "iters": np.zeros(F, dtype=np.int64),
        "degenerate": degenerate,
    }
    traces = [np.zeros(0) for _ in range(F)]
    if live.size:
        sub_ids = [ids[f] for f in live]
        XL, phiL = XT[live], phi[live]
        # features reduced to a single component are already at the null fit
        _, _, l1, iters, trace, _ = _fit_block(
            XL, phiL, alpha[live], mu[live], cfg.model, cfg.max_iters, cfg.rel_tol, cfg.mu_floor, sub_ids
        )
        l0 = _null_loglik(cfg.model, XL, phiL, cfg.mu_floor)
        single = np.count_nonzero(alpha[live] > 0, axis=1) == 1
        l1 = np.where(single, l0, l1)
        iters = np.where(single, 0, iters)
        out["l1"][live] = l1
        out["l0"][live] = l0
        out["mm_stat"][live] = 2.0 * (l1 - l0)
        out["iters"][live] = iters
        if keep_traces:
            for pos, f in enumerate(live):
                traces[f] = trace[: iters[pos] + 1, pos].copy()
    out["traces"] = traces
    return out


def mm_statistic(x, space, cfg=None, *, feature_id="0", index=0, purpose="init"):
    """MM-test statistic of a single feature vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ConfigurationError("expected a single feature vector")
    if not np.any(x > 0):
        return FeatureStatistic(str(feature_id), 0.0, (cfg or MMConfig()).m_phi, 0.0, 0.0, 0, True)
    res = screen_all(
        x[:, None], space, cfg, threads=1, stream_purpose=purpose, stream_offset=index, feature_ids=(str(feature_id),)
    )
    return res[0]


# single-feature API ------------------------------------------------------------


def quasi_mixture_loglik(x, alpha, mu, phi, model=qlik.QUASI_NEGBINOMIAL):
    """``l_n = sum_i log sum_k alpha_k f(x_i; mu_k, phi)`` for one feature."""
    XT = np.asarray(x, dtype=float)[None, :]
    phi_a = np.array([float(phi)])
    alpha = np.asarray(alpha, dtype=float)[None, :]
    mu = np.asarray(mu, dtype=float)[None, :]
    L = _component_terms(model, XT, mu, phi_a, _log_alpha(alpha), _self_terms(model, XT, phi_a))
    return float(_logsumexp_k(L).sum())


def fit_feature(x, phi_hat, cfg=None, *, index=0):
    """Fit one feature at a fixed dispersion and return the final :class:`MMFitState`."""
    cfg = cfg or MMConfig()
    x = np.asarray(x, dtype=float)
    if not np.any(x > 0):
        raise DispersionError("all-zero feature; feature must be pre-filtered")
    a0, m0 = init_params(x, cfg.k_components, cfg.seed, jitter=cfg.jitter, mu_floor=cfg.mu_floor, index=index)
    state = MMFitState(a0, m0)
    state.loglik_trace.append(quasi_mixture_loglik(x, a0, m0, phi_hat, cfg.model))
    for _ in range(cfg.max_iters):
        prev = state.loglik_trace[-1]
        state = mm_update(state, x, phi_hat, cfg.model, cfg.mu_floor)
        if state.loglik_trace[-1] - prev <= cfg.rel_tol * abs(prev):
            break
    return state


def mm_update(state, x, phi_hat, model=qlik.QUASI_NEGBINOMIAL, mu_floor=qlik.MU_FLOOR, feature_id=None):
    """One MM update (responsibilities, proportions, means) of a single feature."""
    XT = np.asarray(x, dtype=float)[None, :]
    phi = np.array([float(phi_hat)])
    alpha = np.asarray(state.alpha, dtype=float)[None, :]
    mu = np.asarray(state.mu, dtype=float)[None, :]
    cself = _self_terms(model, XT, phi)
    L = _component_terms(model, XT, mu, phi, _log_alpha(alpha), cself)
    lse = _logsumexp_k(L)
    resp, a_new, m_new = _update(XT, alpha, mu, L, lse, mu_floor)
    L = _component_terms(model, XT, m_new, phi, _log_alpha(a_new), cself)
    ll = float(_logsumexp_k(L).sum())
    if not np.isfinite(ll):
        raise NumericalError("non-finite quasi-log-likelihood", feature_id)
    trace = list(state.loglik_trace) + [ll]
    return MMFitState(a_new[0], m_new[0], resp[0].T.copy(), trace)
