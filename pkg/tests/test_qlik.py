import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmscreen import qlik
from mmscreen.errors import DomainError
from mmscreen.qlik import QUASI_NEGBINOMIAL, QUASI_POISSON

MODELS = [QUASI_POISSON, QUASI_NEGBINOMIAL]
GRID = list(itertools.product([0.0, 0.5, 1.0, 5.0, 50.0], [0.1, 1.0, 10.0], [0.01, 0.5, 2.0]))


def test_variance_examples():
    assert qlik.variance(QUASI_POISSON, 2.0, 1.5) == 3.0
    assert qlik.variance(QUASI_NEGBINOMIAL, 2.0, 0.5) == 4.0
    assert qlik.variance(QUASI_NEGBINOMIAL, 1.0, 1e-15) == pytest.approx(1.0)


def test_hand_values():
    assert qlik.quasi_loglik(QUASI_POISSON, 3, 3, 0.7) == 0.0
    assert qlik.quasi_loglik(QUASI_NEGBINOMIAL, 3, 3, 0.7) == 0.0
    assert qlik.quasi_loglik(QUASI_POISSON, 0, 2, 1) == pytest.approx(-2.0, rel=1e-15)
    assert qlik.quasi_loglik(QUASI_POISSON, 4, 1, 2) == pytest.approx(0.5 * (4 * math.log(0.25) + 3), rel=1e-14)
    assert qlik.quasi_loglik(QUASI_NEGBINOMIAL, 0, 3, 0.5) == pytest.approx(-2 * math.log(2.5), rel=1e-14)


def test_nb_value_against_quadrature():
    q = qlik.quasi_loglik(QUASI_NEGBINOMIAL, 5, 2, 0.3)
    oracle = qlik.quadrature_oracle(QUASI_NEGBINOMIAL, 5, 2, 0.3)
    assert q == pytest.approx(oracle, rel=1e-8)
    # frozen oracle value
    assert oracle == pytest.approx(-0.86239447080061, rel=1e-12)


@pytest.mark.parametrize("model", MODELS, ids=["poisson", "negbin"])
def test_closed_form_matches_quadrature_on_grid(model):
    for x, mu, phi in GRID:
        q = qlik.quasi_loglik(model, x, mu, phi)
        ref = qlik.quadrature_oracle(model, x, mu, phi)
        if abs(ref) < 1:
            assert abs(q - ref) <= 1e-10, (x, mu, phi)
        else:
            assert abs(q - ref) <= 1e-8 * abs(ref), (x, mu, phi)


def test_quasi_density():
    assert qlik.quasi_density(QUASI_NEGBINOMIAL, 4, 4, 1.0) == 1.0
    assert qlik.quasi_density(QUASI_POISSON, 0, 2, 1) == pytest.approx(math.exp(-2))
    q = qlik.quadrature_oracle(QUASI_NEGBINOMIAL, 5, 2, 0.3)
    assert qlik.quasi_density(QUASI_NEGBINOMIAL, 5, 2, 0.3) == pytest.approx(math.exp(q), rel=1e-10)


def test_domain_errors():
    with pytest.raises(DomainError):
        qlik.quasi_loglik(QUASI_NEGBINOMIAL, 1, 1, 0)
    with pytest.raises(DomainError):
        qlik.quasi_loglik(QUASI_NEGBINOMIAL, 1, -1, 1)
    with pytest.raises(DomainError):
        qlik.quasi_loglik(QUASI_POISSON, -1, 1, 1)
    assert qlik.quadrature_oracle(QUASI_POISSON, 2, 2, 1) == 0.0


def test_mu_floor_clamp():
    a = qlik.quasi_loglik(QUASI_POISSON, 0, 1e-12, 1, mu_floor=1e-8)
    assert a == pytest.approx(-1e-8)


def test_vectorised_matches_scalar():
    x = np.array([0.0, 1.0, 3.0, 7.0])
    mu = np.array([0.5, 2.0, 3.0, 1.0])
    vec = qlik.quasi_loglik(QUASI_NEGBINOMIAL, x, mu, 0.4)
    for i in range(4):
        assert vec[i] == qlik.quasi_loglik(QUASI_NEGBINOMIAL, x[i], mu[i], 0.4)


@pytest.mark.parametrize("model", MODELS, ids=["poisson", "negbin"])
def test_maximised_at_mu_equal_x(model):
    mus = np.geomspace(0.01, 100, 2001)
    for x in [0.5, 3.0, 40.0]:
        q = qlik.quasi_loglik(model, x, mus, 0.7)
        assert np.all(q <= 0)
        best = mus[np.argmax(q)]
        assert abs(best - x) / x < 0.01


@pytest.mark.parametrize("model", MODELS, ids=["poisson", "negbin"])
def test_derivative_in_mu(model):
    for x, mu, phi in [(2.0, 5.0, 0.3), (0.0, 1.5, 1.2), (10.0, 3.0, 0.05)]:
        h = 1e-5 * mu
        num = (qlik.quasi_loglik(model, x, mu + h, phi) - qlik.quasi_loglik(model, x, mu - h, phi)) / (2 * h)
        exact = (x - mu) / qlik.variance(model, mu, phi)
        assert num == pytest.approx(exact, rel=1e-6)


def test_nb_flatter_with_larger_phi():
    phis = [0.01, 0.1, 0.5, 1, 2, 5]
    for x, mu in [(5, 2), (0, 3), (1, 10)]:
        vals = [abs(qlik.quasi_loglik(QUASI_NEGBINOMIAL, x, mu, p)) for p in phis]
        assert all(a > b for a, b in zip(vals, vals[1:]))


def test_custom_model_quadrature_and_canonical():
    # Poisson-like variance written as a custom model: falls back to quadrature
    m = qlik.custom_model(lambda mu: 0.0 * mu, lambda mu: mu)
    assert qlik.quasi_loglik(m, 4.0, 1.0, 2.0) == pytest.approx(
        qlik.quasi_loglik(QUASI_POISSON, 4.0, 1.0, 2.0), rel=1e-9
    )
    # same model with supplied canonical terms
    m2 = qlik.custom_model(
        lambda mu: 0.0 * mu, lambda mu: mu, theta=lambda mu, phi: np.log(mu) / phi, kappa=lambda mu, phi: mu / phi
    )
    assert m2.has_closed_form
    assert qlik.quasi_loglik(m2, 4.0, 1.0, 2.0) == pytest.approx(
        qlik.quasi_loglik(QUASI_POISSON, 4.0, 1.0, 2.0), rel=1e-12
    )


def test_get_model_names():
    assert qlik.get_model("quasi-poisson") is QUASI_POISSON
    assert qlik.get_model("quasi-negbinomial") is QUASI_NEGBINOMIAL
    with pytest.raises(Exception):
        qlik.get_model("gamma")


def test_canonical_decomposition():
    x = np.array([0.0, 2.0, 9.0])
    for model in MODELS:
        theta, kappa = qlik.canonical_terms(model, 3.0, 0.6)
        q = x * theta - kappa - qlik.self_term(model, x, 0.6)
        np.testing.assert_allclose(q, qlik.quasi_loglik(model, x, 3.0, 0.6), rtol=1e-12, atol=1e-13)


@settings(max_examples=200, deadline=None)
@given(
    x=st.floats(0, 200),
    mu=st.floats(1e-3, 200),
    phi=st.floats(1e-3, 10),
    kind=st.sampled_from(MODELS),
)
def test_nonpositive_property(x, mu, phi, kind):
    q = qlik.quasi_loglik(kind, x, mu, phi)
    assert np.isfinite(q)
    assert q <= 1e-12 * max(1.0, x)
