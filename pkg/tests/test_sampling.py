"""Tests for random grids, Monte Carlo draws, and leverage-score sampling."""

from __future__ import annotations

import numpy as np
import pytest

from hdpoly.multi_index import IndexSet, MultiIndex, total_degree_set
from hdpoly.poly_basis import BasisFamily, basis_matrix
from hdpoly.sampling import (
    GRID_MAGIC,
    DegenerateGridError,
    Grid,
    christoffel_discrete,
    christoffel_distribution,
    draw_grid,
    draw_mc,
    draw_near_optimal,
    load_grid,
    near_optimal_distribution,
    save_grid,
)


# ---------------------------------------------------------------- grid draws


def test_grid_shape_range_and_metadata():
    g = draw_grid(3, 200, BasisFamily.LEGENDRE, seed=7)
    assert g.points.shape == (200, 3)
    assert g.K == 200 and g.d == 3
    assert g.measure is BasisFamily.LEGENDRE
    assert g.seed == 7
    assert np.all(g.points >= -1.0) and np.all(g.points <= 1.0)


@pytest.mark.parametrize("family", list(BasisFamily))
def test_grid_points_inside_cube(family):
    g = draw_grid(2, 5000, family, seed=11)
    assert np.all(np.abs(g.points) <= 1.0)


def test_grid_seeded_replay_is_identical():
    a = draw_grid(2, 1000, BasisFamily.CHEBYSHEV2, seed=42)
    b = draw_grid(2, 1000, BasisFamily.CHEBYSHEV2, seed=42)
    assert np.array_equal(a.points, b.points)
    c = draw_grid(2, 1000, BasisFamily.CHEBYSHEV2, seed=43)
    assert not np.array_equal(a.points, c.points)


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        draw_grid(0, 10, BasisFamily.LEGENDRE, seed=0)
    with pytest.raises(ValueError):
        draw_grid(1, 0, BasisFamily.LEGENDRE, seed=0)


def test_uniform_grid_moment_bands():
    K = 100_000
    y = draw_grid(1, K, BasisFamily.LEGENDRE, seed=123).points[:, 0]
    # mean 0, per-point std 1/sqrt(3); 3-sigma band on the sample mean
    assert abs(y.mean()) <= 3.0 * (1.0 / np.sqrt(3.0)) / np.sqrt(K)
    # second moment 1/3, Var(y^2) = 1/5 - 1/9 = 4/45
    assert abs((y**2).mean() - 1.0 / 3.0) <= 3.0 * np.sqrt(4.0 / 45.0) / np.sqrt(K)


def test_arcsine_grid_cdf_and_moment():
    K = 100_000
    y = draw_grid(1, K, BasisFamily.CHEBYSHEV1, seed=5).points[:, 0]
    # arcsine law is symmetric: P(y <= 0) = 1/2
    assert abs(np.mean(y <= 0.0) - 0.5) <= 0.01
    # second moment 1/2, Var(y^2) = 3/8 - 1/4 = 1/8
    assert abs((y**2).mean() - 0.5) <= 3.0 * np.sqrt(1.0 / 8.0) / np.sqrt(K)


def test_semicircle_grid_cdf_and_moment():
    K = 100_000
    y = draw_grid(1, K, BasisFamily.CHEBYSHEV2, seed=9).points[:, 0]
    assert abs(np.mean(y <= 0.0) - 0.5) <= 0.01
    # second moment 1/4, Var(y^2) = 1/8 - 1/16 = 1/16
    assert abs((y**2).mean() - 0.25) <= 3.0 * np.sqrt(1.0 / 16.0) / np.sqrt(K)


# ---------------------------------------------------------------- persistence


def test_grid_save_load_round_trip(tmp_path):
    g = draw_grid(3, 257, BasisFamily.CHEBYSHEV1, seed=314)
    path = tmp_path / "grid.bin"
    save_grid(g, path)
    back = load_grid(path)
    assert np.array_equal(back.points, g.points)
    assert back.measure is g.measure
    assert back.seed == g.seed


def test_grid_file_starts_with_magic(tmp_path):
    g = draw_grid(1, 4, BasisFamily.LEGENDRE, seed=0)
    path = tmp_path / "grid.bin"
    save_grid(g, path)
    assert path.read_bytes()[: len(GRID_MAGIC)] == b"HPGRID1"


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"NOTAGRID" + b"\x00" * 64)
    with pytest.raises(ValueError):
        load_grid(path)


# ---------------------------------------------------------------- Monte Carlo


def test_mc_draw_basics():
    g = draw_grid(2, 100, BasisFamily.LEGENDRE, seed=1)
    s = draw_mc(g, 37, np.random.default_rng(0))
    assert s.m == 37
    assert s.strategy == "mc"
    assert np.all(s.weights == 1.0)
    assert np.all((0 <= s.indices) & (s.indices < g.K))
    assert np.array_equal(s.points, g.points[s.indices])
    with pytest.raises(ValueError):
        draw_mc(g, 0, np.random.default_rng(0))


def test_mc_draw_seeded_replay():
    g = draw_grid(1, 500, BasisFamily.LEGENDRE, seed=2)
    a = draw_mc(g, 100, np.random.default_rng(77))
    b = draw_mc(g, 100, np.random.default_rng(77))
    assert np.array_equal(a.indices, b.indices)


def test_mc_draw_frequencies_are_multinomial():
    K, m = 100, 1_000_000
    g = draw_grid(1, K, BasisFamily.LEGENDRE, seed=3)
    s = draw_mc(g, m, np.random.default_rng(4))
    counts = np.bincount(s.indices, minlength=K)
    # per-cell 5-sigma band for Multinomial(m, 1/K)
    sigma = np.sqrt(m * (1.0 / K) * (1.0 - 1.0 / K))
    assert np.max(np.abs(counts - m / K)) <= 5.0 * sigma


# ------------------------------------------------- leverage-score distribution


def test_constant_column_gives_uniform_distribution():
    g = draw_grid(2, 300, BasisFamily.LEGENDRE, seed=6)
    pi, w = near_optimal_distribution(g, BasisFamily.LEGENDRE, IndexSet([MultiIndex.zero()]))
    np.testing.assert_allclose(pi, 1.0 / g.K, atol=1e-14)
    np.testing.assert_allclose(w, 1.0, atol=1e-12)


@pytest.mark.parametrize("family", list(BasisFamily))
def test_distribution_is_a_probability(family):
    g = draw_grid(4, 2000, family, seed=8)
    S = total_degree_set(2, 4)
    pi, w = near_optimal_distribution(g, family, S)
    assert pi.shape == (g.K,) and w.shape == (g.K,)
    assert np.all(pi >= 0.0) and np.all(w > 0.0)
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)


def test_weight_times_christoffel_identity():
    """w_i * K_S(z_i) / n = 1 pointwise links the weights to the Christoffel function."""
    g = draw_grid(4, 1500, BasisFamily.LEGENDRE, seed=12)
    S = total_degree_set(2, 4)
    _, w = near_optimal_distribution(g, BasisFamily.LEGENDRE, S)
    kappa_disc = christoffel_discrete(g, BasisFamily.LEGENDRE, S)
    np.testing.assert_allclose(w * kappa_disc / len(S), 1.0, atol=1e-10)


def test_grid_mean_of_discrete_christoffel_is_set_size():
    g = draw_grid(3, 900, BasisFamily.CHEBYSHEV1, seed=13)
    S = total_degree_set(3, 3)
    kappa_disc = christoffel_discrete(g, BasisFamily.CHEBYSHEV1, S)
    assert kappa_disc.mean() == pytest.approx(len(S), abs=1e-10)
    assert np.all(kappa_disc >= 0.0)


def test_probability_weighted_full_grid_gram_is_identity():
    """Expected weighted Gram over the grid measure equals the identity.

    Each grid point contributes pi_i (draw probability) times w_i (attached
    weight) times the outer product of its grid-orthonormalized basis row;
    the total must be the n x n identity.
    """
    g = draw_grid(2, 800, BasisFamily.LEGENDRE, seed=14)
    S = total_degree_set(4, 2)
    pi, w = near_optimal_distribution(g, BasisFamily.LEGENDRE, S)
    # independent orthonormalization route for the grid basis
    Q, _ = np.linalg.qr(basis_matrix(BasisFamily.LEGENDRE, S, g.points) / np.sqrt(g.K))
    tilde = np.sqrt(g.K) * Q
    gram = np.einsum("i,ij,ik->jk", pi * w, tilde, tilde)
    np.testing.assert_allclose(gram, np.eye(len(S)), atol=1e-10)


def test_distribution_rejects_grid_smaller_than_set():
    g = draw_grid(1, 3, BasisFamily.LEGENDRE, seed=15)
    S = total_degree_set(5, 1)  # 6 columns > 3 points
    with pytest.raises(ValueError):
        near_optimal_distribution(g, BasisFamily.LEGENDRE, S)


def test_degenerate_grid_is_detected():
    # a constant grid kills every non-constant column
    g = Grid(points=np.zeros((50, 1)), measure=BasisFamily.LEGENDRE, seed=0)
    S = IndexSet([MultiIndex.zero(), MultiIndex.unit(1)])
    with pytest.raises(DegenerateGridError):
        near_optimal_distribution(g, BasisFamily.LEGENDRE, S)
    with pytest.raises(DegenerateGridError):
        christoffel_discrete(g, BasisFamily.LEGENDRE, S)


# ---------------------------------------------- Christoffel-proportional draws


def test_christoffel_distribution_matches_unchunked_route():
    g = draw_grid(3, 500, BasisFamily.LEGENDRE, seed=16)
    S = total_degree_set(3, 3)
    pi, w = christoffel_distribution(g, BasisFamily.LEGENDRE, S, chunk=7)
    B = basis_matrix(BasisFamily.LEGENDRE, S, g.points)
    dens = np.einsum("ij,ij->i", B, B)
    np.testing.assert_allclose(pi, dens / dens.sum(), rtol=1e-13)
    assert pi.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(w * g.K * pi, 1.0, atol=1e-12)


def test_christoffel_distribution_constant_set_is_uniform():
    g = draw_grid(2, 64, BasisFamily.CHEBYSHEV2, seed=17)
    pi, w = christoffel_distribution(g, BasisFamily.CHEBYSHEV2, IndexSet([MultiIndex.zero()]))
    np.testing.assert_allclose(pi, 1.0 / g.K, atol=1e-14)
    np.testing.assert_allclose(w, 1.0, atol=1e-12)


# ------------------------------------------------------------- sample drawing


def test_point_mass_draws_only_that_point():
    g = draw_grid(1, 10, BasisFamily.LEGENDRE, seed=18)
    pi = np.zeros(10)
    pi[4] = 1.0
    w = np.arange(1.0, 11.0)
    s = draw_near_optimal(g, pi, w, 25, np.random.default_rng(0))
    assert np.all(s.indices == 4)
    assert np.all(s.weights == w[4])
    assert s.strategy == "optimal"


def test_draw_frequencies_follow_pi():
    K, m = 50, 200_000
    g = draw_grid(1, K, BasisFamily.LEGENDRE, seed=19)
    pi = np.arange(1.0, K + 1.0)
    pi /= pi.sum()
    w = 1.0 / (K * pi)
    s = draw_near_optimal(g, pi, w, m, np.random.default_rng(20))
    counts = np.bincount(s.indices, minlength=K)
    sigma = np.sqrt(m * pi * (1.0 - pi))
    assert np.all(np.abs(counts - m * pi) <= 5.0 * sigma)


def test_draw_weight_contract_and_replay():
    g = draw_grid(2, 400, BasisFamily.LEGENDRE, seed=21)
    S = total_degree_set(3, 2)
    pi, w = near_optimal_distribution(g, BasisFamily.LEGENDRE, S)
    a = draw_near_optimal(g, pi, w, 120, np.random.default_rng(22))
    b = draw_near_optimal(g, pi, w, 120, np.random.default_rng(22))
    assert np.array_equal(a.indices, b.indices)
    assert np.array_equal(a.weights, w[a.indices])
    assert a.points.shape == (120, 2)
    with pytest.raises(ValueError):
        draw_near_optimal(g, pi, w, 0, np.random.default_rng(0))
