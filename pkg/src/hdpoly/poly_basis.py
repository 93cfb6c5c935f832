"""Orthonormal polynomial bases on [-1,1] and tensor products thereof.

Three families, each orthonormal w.r.t. a probability measure on [-1,1]:

* LEGENDRE    -- uniform measure dy/2;            psi_k = sqrt(2k+1) P_k
* CHEBYSHEV1  -- arcsine measure dy/(pi sqrt(1-y^2)); psi_0 = 1, psi_k = sqrt(2) T_k
* CHEBYSHEV2  -- semicircle measure (2/pi) sqrt(1-y^2) dy; psi_k = U_k

All three attain their maximum absolute value at y = +-1, which makes the
sup-based stability constant computable by a point evaluation at 1.
Evaluation is by the orthonormal three-term recurrence throughout; monomial
forms lose orthogonality catastrophically past degree ~20.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .multi_index import IndexSet, MultiIndex

CLAMP_BAND = 1e-12


class BasisFamily(enum.Enum):
    LEGENDRE = "legendre"
    CHEBYSHEV1 = "cheb1"
    CHEBYSHEV2 = "cheb2"

    @staticmethod
    def from_tag(tag: str) -> "BasisFamily":
        for fam in BasisFamily:
            if fam.value == tag:
                return fam
        raise ValueError(f"unknown basis family tag {tag!r}")


@dataclass(frozen=True)
class DesignMatrix:
    """Row-weighted sample/basis matrix with entries sqrt(w_i/m) Psi_j(y_i)."""

    values: np.ndarray  # (m, n)
    row_weights: np.ndarray  # (m,)
    column_order: IndexSet

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


def _clamp(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y) > 1.0 + CLAMP_BAND) or np.any(np.isnan(y)):
        bad = float(np.nanmax(np.abs(y))) if not np.all(np.isnan(y)) else float("nan")
        raise ValueError(f"evaluation points must lie in [-1,1] (max |y| = {bad})")
    return np.clip(y, -1.0, 1.0)


@lru_cache(maxsize=8)
def _legendre_recurrence(max_degree: int) -> np.ndarray:
    # y p_k = b_{k+1} p_{k+1} + b_k p_{k-1} with b_k = k / sqrt(4k^2 - 1)
    k = np.arange(max_degree + 2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = k / np.sqrt(4.0 * k * k - 1.0)
    b[0] = 0.0
    return b


def eval_univariate_all(family: BasisFamily, max_degree: int, y) -> np.ndarray:
    """All orthonormal values psi_0..psi_max_degree at y.

    Returns an array of shape (max_degree + 1,) + y.shape.
    """
    y = _clamp(y)
    out = np.empty((max_degree + 1,) + y.shape, dtype=float)
    out[0] = 1.0
    if max_degree == 0:
        return out
    if family is BasisFamily.LEGENDRE:
        b = _legendre_recurrence(max_degree)
        out[1] = y / b[1]
        for k in range(1, max_degree):
            out[k + 1] = (y * out[k] - b[k] * out[k - 1]) / b[k + 1]
    elif family is BasisFamily.CHEBYSHEV1:
        # T recurrence, then scale: psi_k = sqrt(2) T_k for k >= 1
        tm1, t = np.ones_like(y), y
        out[1] = np.sqrt(2.0) * t
        for k in range(1, max_degree):
            tm1, t = t, 2.0 * y * t - tm1
            out[k + 1] = np.sqrt(2.0) * t
        return out
    elif family is BasisFamily.CHEBYSHEV2:
        out[1] = 2.0 * y
        for k in range(1, max_degree):
            out[k + 1] = 2.0 * y * out[k] - out[k - 1]
    else:  # pragma: no cover
        raise ValueError(f"unhandled family {family}")
    return out


def eval_univariate(family: BasisFamily, degree: int, y):
    """Orthonormal psi_degree at y (scalar in -> scalar out)."""
    if degree < 0:
        raise ValueError("degree must be >= 0")
    arr = np.asarray(y, dtype=float)
    vals = eval_univariate_all(family, degree, arr)[degree]
    return float(vals) if np.isscalar(y) or arr.ndim == 0 else vals


def _per_dim_tables(family: BasisFamily, S: IndexSet, points: np.ndarray):
    """Univariate value tables {dim: (max_deg+1, m) array} for S's active dims."""
    max_deg: dict[int, int] = {}
    for nu in S:
        for dim, deg in nu.items():
            if deg > max_deg.get(dim, 0):
                max_deg[dim] = deg
    return {
        dim: eval_univariate_all(family, deg, points[:, dim - 1])
        for dim, deg in max_deg.items()
    }


def basis_matrix(family: BasisFamily, S: IndexSet, points) -> np.ndarray:
    """Plain tensor-basis values Psi_nu_j(y_i), shape (m, n), columns in canonical order."""
    points = _clamp(np.atleast_2d(points))
    m = points.shape[0]
    if S.max_dim > points.shape[1]:
        raise ValueError(
            f"index set uses dimension {S.max_dim} but points have {points.shape[1]}"
        )
    tables = _per_dim_tables(family, S, points)
    out = np.empty((m, len(S)), dtype=float)
    for j, nu in enumerate(S):
        col = None
        for dim, deg in nu.items():
            vals = tables[dim][deg]
            col = vals.copy() if col is None else col * vals
        out[:, j] = 1.0 if col is None else col
    if np.any(np.isnan(out)):
        raise ValueError("NaN encountered in basis evaluation")
    return out


def eval_expansion(family: BasisFamily, coef, points, chunk: int = 512) -> np.ndarray:
    """Evaluate sum_nu c_nu Psi_nu at many points without a full (m, n) matrix.

    Restricts to the nonzero coefficients and processes the points in row
    chunks, so large candidate sets with sparse solutions stay cheap.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    nonzero = [(nu, v) for nu, v in zip(coef.index_set, coef.values) if v != 0.0]
    out = np.zeros(points.shape[0])
    if not nonzero:
        return out
    support = IndexSet([nu for nu, _ in nonzero])
    by_index = dict(nonzero)
    vals = np.array([by_index[nu] for nu in support])
    for start in range(0, points.shape[0], chunk):
        block = points[start : start + chunk]
        out[start : start + block.shape[0]] = basis_matrix(family, support, block) @ vals
    return out


def eval_tensor(family: BasisFamily, nu: MultiIndex, y):
    """Tensor-product value Psi_nu(y); product over supp(nu) only.

    Accepts a single point (d,) or a batch (m, d).
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    pts = _clamp(np.atleast_2d(y))
    if nu.max_dim > pts.shape[1]:
        raise ValueError(f"index uses dimension {nu.max_dim} but point has {pts.shape[1]}")
    out = np.ones(pts.shape[0])
    for dim, deg in nu.items():
        out *= eval_univariate_all(family, deg, pts[:, dim - 1])[deg]
    return float(out[0]) if single else out


def intrinsic_weight_sq(family: BasisFamily, nu: MultiIndex) -> float:
    """u_nu^2, kept in product form so integer-valued cases stay exact."""
    if family is BasisFamily.LEGENDRE:
        prod = 1.0
        for _, deg in nu.items():
            prod *= 2 * deg + 1
        return float(prod)
    if family is BasisFamily.CHEBYSHEV1:
        return float(2.0 ** len(nu.support))
    if family is BasisFamily.CHEBYSHEV2:
        prod = 1.0
        for _, deg in nu.items():
            prod *= (deg + 1) ** 2
        return float(prod)
    raise ValueError(f"unhandled family {family}")  # pragma: no cover


def intrinsic_weight(family: BasisFamily, nu: MultiIndex) -> float:
    """u_nu = sup over the cube of |Psi_nu| (attained at y = 1)."""
    return float(np.sqrt(intrinsic_weight_sq(family, nu)))


def christoffel(family: BasisFamily, S: IndexSet, points) -> np.ndarray | float:
    """Subspace Christoffel function: sum over S of Psi_nu(y)^2."""
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    B = basis_matrix(family, S, np.atleast_2d(pts))
    vals = np.einsum("ij,ij->i", B, B)
    return float(vals[0]) if single else vals


def kappa(family: BasisFamily, S: IndexSet) -> float:
    """Worst-case stability constant sup_y K(P_S)(y) = sum_S u_nu^2.

    The sup sits at y = 1 for all three families, so no numerical
    maximization is needed.
    """
    return float(sum(intrinsic_weight_sq(family, nu) for nu in S))


def build_design_matrix(family: BasisFamily, S: IndexSet, points, weights) -> DesignMatrix:
    """Assemble the row-weighted least-squares matrix.

    Entry (i, j) is sqrt(w(y_i)/m) * Psi_nu_j(y_i) with columns following S's
    canonical order.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.asarray(weights, dtype=float)
    m = points.shape[0]
    if weights.shape != (m,):
        raise ValueError(f"weights shape {weights.shape} does not match m = {m}")
    if np.any(weights <= 0) or np.any(~np.isfinite(weights)):
        raise ValueError("all weights must be positive and finite")
    B = basis_matrix(family, S, points)
    scale = np.sqrt(weights / m)
    return DesignMatrix(values=scale[:, None] * B, row_weights=weights, column_order=S)


# ---------------------------------------------------------------------------
# quadrature matched to each family's measure (used by oracles and tests)


def quadrature(family: BasisFamily, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes/weights integrating against the family's probability measure."""
    if n_nodes < 1:
        raise ValueError("need at least one node")
    if family is BasisFamily.LEGENDRE:
        x, w = np.polynomial.legendre.leggauss(n_nodes)
        return x, w / 2.0
    if family is BasisFamily.CHEBYSHEV1:
        i = np.arange(1, n_nodes + 1)
        x = np.cos((2 * i - 1) * np.pi / (2 * n_nodes))
        return x, np.full(n_nodes, 1.0 / n_nodes)
    if family is BasisFamily.CHEBYSHEV2:
        i = np.arange(1, n_nodes + 1)
        theta = i * np.pi / (n_nodes + 1)
        x = np.cos(theta)
        w = 2.0 / (n_nodes + 1) * np.sin(theta) ** 2
        return x, w
    raise ValueError(f"unhandled family {family}")  # pragma: no cover
