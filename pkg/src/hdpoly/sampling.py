"""Random grids, Monte Carlo draws, and near-optimal discrete sampling.

All experiments operate on a large finite grid of i.i.d. draws from the base
measure; the grid doubles as the quadrature used for error reporting.  The
near-optimal strategy orthonormalizes the basis *on the grid* by a tall-skinny
QR and samples grid points proportionally to their leverage scores, attaching
the inverse-probability weights that keep the weighted least-squares problem
well conditioned at log-linear oversampling.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .multi_index import IndexSet
from .poly_basis import BasisFamily, basis_matrix

GRID_MAGIC = b"HPGRID1"
PI_FLOOR = 1e-300
RANK_TOL = 1e-10

_MEASURE_CODE = {BasisFamily.LEGENDRE: 0, BasisFamily.CHEBYSHEV1: 1, BasisFamily.CHEBYSHEV2: 2}
_CODE_MEASURE = {v: k for k, v in _MEASURE_CODE.items()}


class DegenerateGridError(ValueError):
    """Grid/index-set pairing whose on-grid basis matrix is rank deficient."""


@dataclass(frozen=True)
class Grid:
    """K i.i.d. points from a base measure on [-1,1]^d."""

    points: np.ndarray  # (K, d)
    measure: BasisFamily
    seed: int

    @property
    def K(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class SampleSet:
    """Sample locations given as grid indices, with their LS weights."""

    grid: Grid
    indices: np.ndarray  # (m,) ints into the grid, repeats allowed
    weights: np.ndarray  # (m,) strictly positive
    strategy: str  # "mc" | "optimal"

    @property
    def m(self) -> int:
        return self.indices.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self.grid.points[self.indices]


def _semicircle_theta(u: np.ndarray) -> np.ndarray:
    # invert the semicircle CDF (theta - sin(theta)cos(theta)) / pi = u by
    # bisection; 60 halvings of [0, pi] land below one ulp of the result
    lo = np.zeros_like(u)
    hi = np.full_like(u, np.pi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = (mid - np.sin(mid) * np.cos(mid)) / np.pi < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def draw_grid(d: int, K: int, measure: BasisFamily, seed: int) -> Grid:
    """Draw a K x d grid i.i.d. from the tagged base measure."""
    if d < 1 or K < 1:
        raise ValueError("need d >= 1 and K >= 1")
    rng = np.random.default_rng(seed)
    if measure is BasisFamily.LEGENDRE:
        pts = rng.uniform(-1.0, 1.0, size=(K, d))
    elif measure is BasisFamily.CHEBYSHEV1:
        pts = np.cos(np.pi * rng.random(size=(K, d)))
    elif measure is BasisFamily.CHEBYSHEV2:
        pts = np.cos(_semicircle_theta(rng.random(size=(K, d))))
    else:  # pragma: no cover
        raise ValueError(f"unhandled measure {measure}")
    return Grid(points=pts, measure=measure, seed=int(seed))


def save_grid(grid: Grid, path) -> None:
    """Binary persistence: magic, d, K, measure tag, seed, then LE float64 points."""
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<qqqq", grid.d, grid.K, _MEASURE_CODE[grid.measure], grid.seed))
        fh.write(grid.points.astype("<f8").tobytes(order="C"))


def load_grid(path) -> Grid:
    with open(path, "rb") as fh:
        magic = fh.read(len(GRID_MAGIC))
        if magic != GRID_MAGIC:
            raise ValueError(f"not a grid file (magic {magic!r})")
        d, K, code, seed = struct.unpack("<qqqq", fh.read(32))
        data = np.frombuffer(fh.read(8 * K * d), dtype="<f8").reshape(K, d)
    return Grid(points=np.ascontiguousarray(data, dtype=float), measure=_CODE_MEASURE[code], seed=seed)


def draw_mc(grid: Grid, m: int, rng: np.random.Generator) -> SampleSet:
    """m uniform grid indices with replacement; Monte Carlo weights are all 1."""
    if m < 1:
        raise ValueError("need m >= 1")
    idx = rng.integers(0, grid.K, size=m)
    return SampleSet(grid=grid, indices=idx, weights=np.ones(m), strategy="mc")


def _grid_qr(grid: Grid, family: BasisFamily, S: IndexSet):
    B = basis_matrix(family, S, grid.points) / np.sqrt(grid.K)
    Q, R = scipy.linalg.qr(B, mode="economic")
    return Q, R


def _check_rank(R: np.ndarray) -> None:
    sv = scipy.linalg.svdvals(R)
    if sv[0] == 0 or sv[-1] < RANK_TOL * sv[0]:
        raise DegenerateGridError(
            "degenerate grid/set pairing: on-grid basis matrix is rank deficient "
            f"(sigma_min/sigma_max = {sv[-1] / sv[0] if sv[0] else 0:.3e})"
        )


def leverage_distribution(Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sampling probabilities and weights from an on-grid orthonormal factor.

    pi_i = (1/n) * ||row_i(Q)||^2 sums to 1 by column orthonormality;
    w_i = 1/(K pi_i) with pi floored to avoid weight blowup at numerically
    dead grid points (floored points can never be drawn).
    """
    K, n = Q.shape
    pi = np.einsum("ij,ij->i", Q, Q) / n
    w = 1.0 / (K * np.maximum(pi, PI_FLOOR))
    return pi, w


def near_optimal_distribution(
    grid: Grid, family: BasisFamily, S: IndexSet
) -> tuple[np.ndarray, np.ndarray]:
    """Leverage-score distribution pi and weights w for sampling S on the grid.

    Factorizes the (1/sqrt(K))-scaled on-grid basis matrix by blocked
    Householder QR; raises DegenerateGridError on rank deficiency.
    """
    if grid.K < len(S):
        raise ValueError(f"grid of size {grid.K} cannot support n = {len(S)} columns")
    Q, R = _grid_qr(grid, family, S)
    _check_rank(R)
    return leverage_distribution(Q)


def christoffel_discrete(grid: Grid, family: BasisFamily, S: IndexSet) -> np.ndarray:
    """Grid-measure Christoffel function K * sum_j q_ij^2 of the orthonormalized basis."""
    Q, R = _grid_qr(grid, family, S)
    _check_rank(R)
    return grid.K * np.einsum("ij,ij->i", Q, Q)


def christoffel_distribution(
    grid: Grid, family: BasisFamily, S: IndexSet, chunk: int = 2048
) -> tuple[np.ndarray, np.ndarray]:
    """Sampling distribution proportional to the plain-basis Christoffel function.

    pi_i propto sum_{nu in S} Psi_nu(z_i)^2 with the measure-orthonormal (not
    grid-orthonormalized) basis, normalized over the grid; w_i = 1/(K pi_i).
    This is the candidate-set-proportional measure used by the sparse
    regression variant; it needs no QR, so it stays cheap for very wide sets.
    Row chunking keeps memory at chunk x |S|.
    """
    K = grid.K
    dens = np.empty(K)
    for lo in range(0, K, chunk):
        hi = min(lo + chunk, K)
        B = basis_matrix(family, S, grid.points[lo:hi])
        dens[lo:hi] = np.einsum("ij,ij->i", B, B)
    total = float(dens.sum())
    if total <= 0:
        raise ValueError("Christoffel function vanished on the entire grid")
    pi = dens / total
    w = 1.0 / (K * np.maximum(pi, PI_FLOOR))
    return pi, w


def draw_near_optimal(
    grid: Grid, pi: np.ndarray, w: np.ndarray, m: int, rng: np.random.Generator
) -> SampleSet:
    """m i.i.d. draws from pi by inverse CDF over cumulative sums."""
    if m < 1:
        raise ValueError("need m >= 1")
    cum = np.cumsum(pi)
    cum /= cum[-1]
    idx = np.searchsorted(cum, rng.random(m), side="right")
    idx = np.minimum(idx, grid.K - 1)
    return SampleSet(grid=grid, indices=idx, weights=w[idx], strategy="optimal")
