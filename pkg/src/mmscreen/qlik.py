"""Variance models and quasi-likelihood evaluation.

A variance model is the pair ``(v1, v2)`` in the mean-variance law
``V(mu; phi) = v1(mu) + phi * v2(mu)``.  The quasi-log-likelihood of an
observation ``x`` at mean ``mu`` is

    Q(x; mu, phi) = integral_x^mu (x - t) / V(t; phi) dt

and the quasi-density is ``exp(Q)``.  The two built-in models use exact
closed forms.  For the mixture iterations the same quantity is written in
canonical form ``Q = x * theta(mu) - kappa(mu) - self_term(x)``, where
``theta' = 1/V`` and ``kappa' = mu/V``; this avoids any logarithm of the
data inside the inner loop.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.special import xlogy

from .errors import DomainError

MU_FLOOR = 1e-8


class ModelKind(enum.Enum):
    QUASI_POISSON = "quasi-poisson"
    QUASI_NEGBINOMIAL = "quasi-negbinomial"
    CUSTOM = "custom"


@dataclass(frozen=True)
class VarianceModel:
    """Mean-variance law ``V(mu; phi) = v1(mu) + phi * v2(mu)``.

    ``theta`` and ``kappa`` are optional canonical antiderivatives with
    signature ``f(mu, phi)``.  Custom models that omit them are evaluated by
    numerical quadrature, which is correct but slow.  Custom ``v1``/``v2``
    are trusted to be smooth (three times continuously differentiable)
    and to satisfy ``v2 > 0``; nothing here checks that.
    """

    kind: ModelKind
    v1: Callable
    v2: Callable
    theta: Optional[Callable] = None
    kappa: Optional[Callable] = None

    @property
    def has_closed_form(self):
        return self.theta is not None and self.kappa is not None

    def __repr__(self):
        return f"VarianceModel({self.kind.value})"


def _zero(mu):
    return np.zeros_like(np.asarray(mu, dtype=float))


def _identity(mu):
    return np.asarray(mu, dtype=float)


def _square(mu):
    return np.asarray(mu, dtype=float) ** 2


def _qp_theta(mu, phi):
    return np.log(mu) / phi


def _qp_kappa(mu, phi):
    return mu / phi


def _qnb_theta(mu, phi):
    return np.log(mu) - np.log1p(phi * mu)


def _qnb_kappa(mu, phi):
    return np.log1p(phi * mu) / phi


QUASI_POISSON = VarianceModel(ModelKind.QUASI_POISSON, _zero, _identity, _qp_theta, _qp_kappa)
QUASI_NEGBINOMIAL = VarianceModel(
    ModelKind.QUASI_NEGBINOMIAL, _identity, _square, _qnb_theta, _qnb_kappa
)


def custom_model(v1, v2, theta=None, kappa=None):
    """Build a user-defined variance model from ``v1`` and ``v2`` callables."""
    return VarianceModel(ModelKind.CUSTOM, v1, v2, theta, kappa)


def get_model(name):
    """Look up a built-in model by name (``"quasi-poisson"``, ``"quasi-negbinomial"``)."""
    key = str(name).lower().replace("_", "-")
    aliases = {
        "quasi-poisson": QUASI_POISSON,
        "qp": QUASI_POISSON,
        "poisson": QUASI_POISSON,
        "quasi-negbinomial": QUASI_NEGBINOMIAL,
        "quasi-nb": QUASI_NEGBINOMIAL,
        "qnb": QUASI_NEGBINOMIAL,
        "nb": QUASI_NEGBINOMIAL,
    }
    try:
        return aliases[key]
    except KeyError:
        raise DomainError(f"unknown variance model {name!r}") from None


def _check_positive(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{name} must be finite and positive")
    return arr


def _check_obs(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError("x must be finite and non-negative")
    return arr


def variance(model, mu, phi):
    """Return ``V(mu; phi) = v1(mu) + phi * v2(mu)``."""
    mu = _check_positive("mu", mu)
    phi = _check_positive("phi", phi)
    out = model.v1(mu) + phi * model.v2(mu)
    if np.ndim(out) == 0:
        return float(out)
    return out


def quasi_loglik(model, x, mu, phi, mu_floor=MU_FLOOR):
    """Quasi-log-likelihood ``Q(x; mu, phi)``; broadcasts over array inputs.

    ``mu`` is clamped to ``mu_floor`` from below.  ``x = 0`` uses the
    analytic limit, so no pseudocount is ever added.
    """
    x = _check_obs(x)
    mu = np.maximum(_check_positive("mu", mu), mu_floor)
    phi = _check_positive("phi", phi)
    kind = model.kind
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind is ModelKind.QUASI_POISSON:
            # (1/phi) [x ln(mu/x) - (mu - x)]
            out = (xlogy(x, mu) - xlogy(x, x) - (mu - x)) / phi
        elif kind is ModelKind.QUASI_NEGBINOMIAL:
            # x ln(mu/x) - (x + 1/phi) ln((1 + phi mu)/(1 + phi x))
            log_ratio = np.log1p(phi * (mu - x) / (1.0 + phi * x))
            out = xlogy(x, mu) - xlogy(x, x) - (x + 1.0 / phi) * log_ratio
        elif model.has_closed_form:
            out = x * (model.theta(mu, phi) - _theta_at(model, x, phi)) - (
                model.kappa(mu, phi) - model.kappa(x, phi)
            )
        else:
            out = np.vectorize(lambda a, b, c: quadrature_oracle(model, a, b, c, 1e-12))(
                x, mu, phi
            )
    out = np.where(x == mu, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def _theta_at(model, x, phi):
    # x * theta(x) -> 0 as x -> 0 for the models we support
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, model.theta(safe, phi), 0.0)


def quasi_density(model, x, mu, phi, mu_floor=MU_FLOOR):
    """Quasi-density ``exp(Q)``.  May underflow to 0 far from the mean."""
    return np.exp(quasi_loglik(model, x, mu, phi, mu_floor))


def quadrature_oracle(model, x, mu, phi, tol=1e-12):
    """Integrate ``(x - t) / V(t; phi)`` from ``x`` to ``mu`` numerically.

    Independent of the closed forms above; used to validate them.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    x = float(x)
    mu = float(mu)
    phi = float(phi)
    if x < 0 or mu <= 0 or phi <= 0:
        raise DomainError("require x >= 0, mu > 0, phi > 0")
    if x == mu:
        return 0.0
    lo, hi = min(x, mu), max(x, mu)

    def integrand(t):
        return (x - t) / (model.v1(t) + phi * model.v2(t))

    if lo == 0.0 and _diverges_at_zero(integrand, hi):
        raise DomainError("integrand singular at t = 0")
    # split the range geometrically so the log-like behaviour near 0 is resolved
    points = _breakpoints(lo, hi)
    total = 0.0
    for a, b in zip(points[:-1], points[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=tol / len(points), epsrel=1e-13, limit=200)
        total += val
    return total if mu > x else -total


def _diverges_at_zero(integrand, hi):
    with np.errstate(all="ignore"):
        a = abs(float(integrand(1e-200 * hi)))
        b = abs(float(integrand(1e-100 * hi)))
    return not np.isfinite(a) or a > 10.0 * max(b, 1.0)


def _breakpoints(lo, hi):
    if lo > 0 and hi / lo < 10:
        return [lo, hi]
    start = lo if lo > 0 else min(hi, 1e-6)
    pts = [lo]
    if lo == 0:
        pts.append(start)
    pts.extend(np.geomspace(start, hi, num=max(2, int(np.log10(hi / start)) + 2))[1:])
    return sorted(set(pts))


# canonical pieces for the mixture iterations -------------------------------


def canonical_terms(model, mu, phi):
    """Return ``(theta(mu), kappa(mu))`` for a closed-form model."""
    return model.theta(mu, phi), model.kappa(mu, phi)


def self_term(model, x, phi):
    """``x * theta(x) - kappa(x)``, the value that makes ``Q(x; x) = 0``."""
    kind = model.kind
    if kind is ModelKind.QUASI_POISSON:
        return (xlogy(x, x) - x) / phi
    if kind is ModelKind.QUASI_NEGBINOMIAL:
        lp = np.log1p(phi * x)
        return xlogy(x, x) - x * lp - lp / phi
    return x * _theta_at(model, x, phi) - model.kappa(x, phi)
