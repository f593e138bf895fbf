import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmscreen.errors import ConfigurationError, DataError, DispersionError
from mmscreen.neighborhood import (
    AuxiliarySpace,
    build_neighbors,
    dispersion_batch,
    local_means,
    neighborhood_size,
    working_dispersion,
)
from mmscreen.qlik import QUASI_NEGBINOMIAL, QUASI_POISSON


def brute_lists(D, r):
    """Self first, then others by (distance, index) from a full sort."""
    n = D.shape[0]
    out = []
    for i in range(n):
        others = sorted((D[i, j], j) for j in range(n) if j != i)
        out.append([i] + [j for _, j in others[: r - 1]])
    return np.array(out)


def test_neighborhood_size():
    # 900 ** 0.9 = 455.85...
    assert neighborhood_size(900, 0.9) == 455
    assert neighborhood_size(100, 0.9) == 63
    assert neighborhood_size(2, 0.9) == 1
    assert neighborhood_size(4, 0.99) == 3
    with pytest.raises(ConfigurationError):
        neighborhood_size(10, 1.0)


def test_collinear_tie_break():
    space = AuxiliarySpace.from_coordinates([[0, 0], [1, 0], [2, 0]])
    nbr = build_neighbors(space, r_n=2)
    assert nbr.lists.tolist() == [[0, 1], [1, 0], [2, 1]]


def test_random_3d_matches_brute_force():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(50, 3))
    space = AuxiliarySpace.from_coordinates(pts)
    nbr = build_neighbors(space)
    D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    np.testing.assert_array_equal(nbr.lists, brute_lists(D, nbr.r_n))


def test_explicit_matrix_matches_coordinates():
    rng = np.random.default_rng(4)
    pts = rng.uniform(size=(40, 2))
    D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    a = build_neighbors(AuxiliarySpace.from_coordinates(pts))
    b = build_neighbors(AuxiliarySpace.from_distances(D))
    np.testing.assert_array_equal(a.lists, b.lists)


def test_grid_ties_by_index():
    side = 6
    pts = np.array([(i // side, i % side) for i in range(side * side)], dtype=float)
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(pts))
    D = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
    np.testing.assert_array_equal(nbr.lists, brute_lists(D, nbr.r_n))


def test_list_invariants():
    rng = np.random.default_rng(5)
    pts = rng.uniform(size=(60, 2))
    space = AuxiliarySpace.from_coordinates(pts)
    nbr = build_neighbors(space)
    for i, row in enumerate(nbr.lists):
        assert row[0] == i
        assert len(set(row.tolist())) == nbr.r_n
        d = space.distance_row(i)[row]
        assert np.all(np.diff(d) >= 0)


def test_duplicate_spots_are_legal():
    pts = [[0, 0], [0, 0], [1, 0], [0, 0]]
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(pts), r_n=3)
    assert nbr.lists.tolist()[2] == [2, 0, 1]
    assert nbr.lists.tolist()[0] == [0, 1, 3]


def test_space_validation():
    with pytest.raises(ConfigurationError):
        AuxiliarySpace.from_coordinates([[0, 0]])
    with pytest.raises(ConfigurationError):
        AuxiliarySpace.from_coordinates([[0], [1]])
    with pytest.raises(DataError):
        AuxiliarySpace.from_coordinates([[0, 0], [np.nan, 1]])
    with pytest.raises(DataError):
        AuxiliarySpace.from_distances([[0, 1], [2, 0]])
    with pytest.raises(DataError):
        AuxiliarySpace.from_distances([[1, 1], [1, 0]])


def test_rigid_motion_and_scale():
    rng = np.random.default_rng(6)
    pts = rng.uniform(0, 10, size=(80, 2))
    base = build_neighbors(AuxiliarySpace.from_coordinates(pts)).lists
    t = 0.83
    R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    moved = pts @ R.T + np.array([12.5, -3.0])
    np.testing.assert_array_equal(build_neighbors(AuxiliarySpace.from_coordinates(moved)).lists, base)
    np.testing.assert_array_equal(build_neighbors(AuxiliarySpace.from_coordinates(pts * 7.3)).lists, base)


def test_local_means():
    pts = np.array([[0, 0], [1, 0], [10, 0], [11, 0]], dtype=float)
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(pts), r_n=2)
    np.testing.assert_array_equal(local_means(np.array([0, 0, 10, 10.0]), nbr), [0, 0, 10, 10])
    np.testing.assert_array_equal(local_means(np.full(4, 3.5), nbr), np.full(4, 3.5))


def test_local_means_recompute():
    rng = np.random.default_rng(7)
    pts = rng.uniform(size=(30, 2))
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(pts))
    x = rng.gamma(2.0, size=30)
    expect = np.array([x[row].mean() for row in nbr.lists])
    np.testing.assert_allclose(local_means(x, nbr), expect, rtol=1e-14)


def test_constant_vector_hits_floor():
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(np.arange(20.0).reshape(10, 2)))
    est = working_dispersion(np.full(10, 4.0), nbr, QUASI_NEGBINOMIAL, 0.01)
    assert est.phi0_hat == pytest.approx(-0.25)
    assert est.local_signal == pytest.approx(0.0, abs=1e-12)
    assert est.phi_hat == 0.01


def test_two_block_vector():
    # two far-apart clusters of 10 spots, r_n = 5 keeps neighbourhoods inside a block
    pts = np.vstack([np.column_stack([np.arange(10.0), np.zeros(10)]),
                     np.column_stack([np.arange(10.0) + 1000, np.zeros(10)])])
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(pts), r_n=5)
    x = np.r_[np.zeros(10), np.full(10, 10.0)]
    est = working_dispersion(x, nbr, QUASI_NEGBINOMIAL, 0.01)
    assert est.phi0_hat == pytest.approx(0.8)
    assert est.local_signal == pytest.approx(math.sqrt(5))
    assert est.phi_hat == 0.01


def test_mixed_labels_give_no_local_signal():
    # every neighbourhood (whole space) has mean xbar
    pts = np.arange(8.0)[:, None] * np.array([[1.0, 0.0]])
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(pts), r_n=8)
    x = np.array([0, 5, 1, 7, 2, 2, 9, 4.0])
    est = working_dispersion(x, nbr, QUASI_POISSON, 0.01)
    assert est.local_signal == pytest.approx(0.0, abs=1e-14)
    tau0 = np.mean((x - x.mean()) ** 2)
    assert est.phi0_hat == pytest.approx(tau0 / x.mean())
    assert est.phi_hat == pytest.approx(max(est.phi0_hat, 0.01))


def test_direct_formula():
    rng = np.random.default_rng(8)
    pts = rng.uniform(size=(50, 2))
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(pts))
    x = rng.negative_binomial(2, 0.3, size=50).astype(float)
    xbar = x.mean()
    tau0 = ((x - xbar) ** 2).sum() / 50
    mu_i = np.array([x[r].mean() for r in nbr.lists])
    phi0 = (tau0 - xbar) / xbar**2
    sig = math.sqrt(nbr.r_n) * ((xbar - mu_i) ** 2).mean() / xbar**2
    est = working_dispersion(x, nbr, QUASI_NEGBINOMIAL, 0.01)
    assert est.phi0_hat == pytest.approx(phi0, rel=1e-12)
    assert est.local_signal == pytest.approx(sig, rel=1e-10)
    assert est.phi_hat == pytest.approx(max(phi0 - sig, 0.01), rel=1e-10)


def test_all_zero_feature_raises():
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(np.eye(3)[:, :2] + [[0, 0], [1, 1], [2, 2]]))
    with pytest.raises(DispersionError):
        working_dispersion(np.zeros(3), nbr, QUASI_NEGBINOMIAL)


def test_batch_is_column_independent():
    rng = np.random.default_rng(9)
    pts = rng.uniform(size=(40, 2))
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(pts))
    X = rng.poisson(3.0, size=(40, 17)).astype(float)
    full = dispersion_batch(X, nbr, QUASI_NEGBINOMIAL)[0]
    for j in range(17):
        one = dispersion_batch(X[:, j : j + 1], nbr, QUASI_NEGBINOMIAL)[0]
        assert one[0] == full[j]


def test_shuffled_homogeneous_feature_concentrates_near_pooled():
    side = 30
    pts = np.array([(i // side, i % side) for i in range(900)], dtype=float)
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(pts))
    rng = np.random.default_rng(10)
    x = rng.poisson(6.0, size=900).astype(float)
    X = np.column_stack([rng.permutation(x) for _ in range(100)])
    phi, phi0, _, _ = dispersion_batch(X, nbr, QUASI_POISSON)
    assert abs(np.median(phi) - phi0[0]) <= 0.2 * abs(phi0[0])


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    m_phi=st.floats(1e-4, 1.0),
)
def test_floor_and_cap_property(seed, m_phi):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(25, 2))
    nbr = build_neighbors(AuxiliarySpace.from_coordinates(pts))
    X = rng.negative_binomial(1.5, 0.4, size=(25, 5)).astype(float)
    X[0] += 1.0
    phi, phi0, sig, _ = dispersion_batch(X, nbr, QUASI_NEGBINOMIAL, m_phi)
    assert np.all(phi >= m_phi)
    assert np.all(sig >= 0)
    assert np.all(phi <= np.maximum(phi0, m_phi))
