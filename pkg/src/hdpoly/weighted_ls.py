"""Weighted least squares with stability diagnostics, and the adaptive loop.

The adaptive scheme grows a lower index set from {0} by bulk chasing: at each
step it solves a weighted LS problem on fresh samples, scores every
reduced-margin index by the squared discrete correlation of the residual with
that basis function, and adds the smallest group of top-scoring indices
capturing a beta-fraction of the total score.

The solver is deliberately the honest floating-point QR solve: the divergence
phenomenology under Monte Carlo sampling in low dimension *is* round-off
amplification, so ill-conditioned systems are solved, flagged, and returned --
never regularized or refused.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .multi_index import CoefVector, IndexSet, MultiIndex, reduced_margin
from .poly_basis import (
    BasisFamily,
    DesignMatrix,
    basis_matrix,
    build_design_matrix,
    kappa,
)
from .sampling import (
    Grid,
    DegenerateGridError,
    RANK_TOL,
    leverage_distribution,
)

SINGULAR_TOL = 1e-13


@dataclass(frozen=True)
class LSResult:
    """Solution of one weighted LS problem with its stability diagnostics."""

    coefficients: CoefVector
    condition_number: float
    alpha_w: float  # smallest singular value of the design matrix
    beta_w: float  # largest singular value
    residual_norm: float
    numerically_singular: bool


@dataclass(frozen=True)
class AlsStep:
    index_set: IndexSet
    n: int
    m: int
    result: LSResult
    error_l2: float
    error_linf: float
    kappa_value: float
    wall_time_ms: float


@dataclass(frozen=True)
class AlsTrace:
    steps: tuple[AlsStep, ...]


def solve_wls(A: DesignMatrix, samples, noise=None) -> LSResult:
    """Solve min_z ||A z - b||_2 with b_i = sqrt(w_i/m) (f(y_i) + e_i).

    Singular values come from the triangular factor (bidiagonal SVD of the
    n x n R), so the reported condition number reflects the assembled matrix,
    not a regularized surrogate.  alpha_w < 1e-13 * beta_w flags the result
    numerically singular; coefficients are still returned.
    """
    samples = np.asarray(samples, dtype=float)
    m, n = A.values.shape
    if samples.shape != (m,):
        raise ValueError(f"samples shape {samples.shape} does not match m = {m}")
    if m < n:
        raise ValueError(f"underdetermined system: m = {m} < n = {n}")
    if noise is not None:
        samples = samples + np.asarray(noise, dtype=float)
    b = np.sqrt(A.row_weights / m) * samples
    Q, R = scipy.linalg.qr(A.values, mode="economic")
    sv = scipy.linalg.svdvals(R)
    beta_w = float(sv[0])
    alpha_w = float(sv[-1])
    singular = alpha_w < SINGULAR_TOL * beta_w
    cond = float("inf") if alpha_w == 0.0 else beta_w / alpha_w
    rhs = Q.T @ b
    with np.errstate(all="ignore"):
        if np.any(np.diag(R) == 0.0):
            coef = np.full(n, np.inf)
        else:
            coef = scipy.linalg.solve_triangular(R, rhs, check_finite=False)
        residual = float(np.linalg.norm(A.values @ coef - b))
    return LSResult(
        coefficients=CoefVector(index_set=A.column_order, values=coef),
        condition_number=cond,
        alpha_w=alpha_w,
        beta_w=beta_w,
        residual_norm=residual,
        numerically_singular=bool(singular),
    )


def discrete_inner(f_vals, g_vals, weights, m: int | None = None) -> float:
    """Weighted discrete inner product (1/m) sum_i w_i f_i g_i."""
    f_vals = np.asarray(f_vals, dtype=float)
    g_vals = np.asarray(g_vals, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if not (f_vals.shape == g_vals.shape == weights.shape):
        raise ValueError("mismatched lengths in discrete inner product")
    if m is None:
        m = f_vals.shape[0]
    return float(np.sum(weights * f_vals * g_vals) / m)


def estimator_residual_route(margin_design: DesignMatrix, residual: np.ndarray) -> np.ndarray:
    """Squared correlations (D^T r)^2 of the scaled residual with margin columns.

    Algebraically identical to the squared weighted discrete inner product of
    the sample residual with each margin basis function (the definition-level
    route kept separately in the tests).
    """
    return (margin_design.values.T @ residual) ** 2


def bulk(candidates: IndexSet, scores: dict[MultiIndex, float], beta: float) -> IndexSet:
    """Smallest top-score group capturing a beta-fraction of the total score.

    Candidates are sorted by score descending (ties: canonical order) and the
    shortest prefix with sum >= beta * total is returned; at least one index
    is always returned, and an all-zero score map falls back to the
    canonically first candidate so the adaptive loop always makes progress.
    """
    if len(candidates) == 0:
        raise ValueError("bulk selection needs a nonempty candidate set")
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    members = candidates.members
    total = sum(scores[nu] for nu in members)
    if total <= 0.0:
        return IndexSet([members[0]])
    order = sorted(members, key=lambda nu: (-scores[nu], nu.canonical_key()))
    acc = 0.0
    chosen = []
    for nu in order:
        chosen.append(nu)
        acc += scores[nu]
        if acc >= beta * total:
            break
    return IndexSet(chosen)


def m_from_scaling(rule: str, n: int) -> int:
    """Sample count for a step with n basis functions.

    loglinear: max(n+1, ceil(n ln n)); linear15: ceil(1.5 n); linear2: 2 n.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    if rule == "loglinear":
        return max(n + 1, math.ceil(n * math.log(n)))
    if rule == "linear15":
        return math.ceil(1.5 * n)
    if rule == "linear2":
        return 2 * n
    raise ValueError(f"unknown scaling rule {rule!r}")


class _IncrementalGridQR:
    """Column-append QR of the (1/sqrt(K))-scaled on-grid basis matrix.

    Used by the adaptive loop, whose index sets are nested: appending the new
    columns (classical Gram-Schmidt with one reorthogonalization pass) keeps
    the leverage scores identical to a fresh factorization up to roundoff at a
    fraction of the cost.
    """

    def __init__(self, K: int):
        self.K = K
        self.Q = np.empty((K, 0))
        self.R = np.empty((0, 0))
        self.columns: list[MultiIndex] = []

    def append(self, nu: MultiIndex, col: np.ndarray) -> None:
        v = col / math.sqrt(self.K)
        k = self.Q.shape[1]
        if k == 0:
            r = float(np.linalg.norm(v))
            self.Q = (v / r if r > 0 else v)[:, None]
            self.R = np.array([[r]])
        else:
            h1 = self.Q.T @ v
            v1 = v - self.Q @ h1
            h2 = self.Q.T @ v1  # second pass restores orthogonality
            v1 -= self.Q @ h2
            r = float(np.linalg.norm(v1))
            self.Q = np.hstack([self.Q, (v1 / r if r > 0 else v1)[:, None]])
            newR = np.zeros((k + 1, k + 1))
            newR[:k, :k] = self.R
            newR[:k, k] = h1 + h2
            newR[k, k] = r
            self.R = newR
        self.columns.append(nu)

    def check_rank(self) -> None:
        sv = scipy.linalg.svdvals(self.R)
        if sv[0] == 0 or sv[-1] < RANK_TOL * sv[0]:
            raise DegenerateGridError(
                "degenerate grid/set pairing during adaptive growth"
            )


def als_run(
    target_grid_values: np.ndarray,
    family: BasisFamily,
    strategy: str,
    scaling: str,
    grid: Grid,
    rng: np.random.Generator,
    *,
    beta: float = 0.5,
    max_m: int | None = None,
    max_steps: int | None = None,
    noise=None,
) -> AlsTrace:
    """Adaptive weighted LS approximation driven by bulk chasing.

    Starting from S = {0}: each step draws fresh samples (with the
    leverage-score distribution recomputed for the current set when
    strategy="optimal"), solves the weighted LS problem, scores the reduced
    margin by the squared residual correlations, and grows the set by the
    bulk rule.  Per-step errors are measured against the target on the full
    grid.  Stops before any step whose scheduled m would exceed max_m, or
    after max_steps steps.

    noise, when given, is a callable (rng, m) -> length-m perturbation added
    to the sampled values.
    """
    if strategy not in ("mc", "optimal"):
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    if max_m is None and max_steps is None:
        raise ValueError("need a stopping rule: max_m and/or max_steps")
    target_grid_values = np.asarray(target_grid_values, dtype=float)
    if target_grid_values.shape != (grid.K,):
        raise ValueError("target values must be evaluated on the full grid")
    target_l2 = float(np.linalg.norm(target_grid_values))
    target_linf = float(np.max(np.abs(target_grid_values)))
    if target_l2 == 0.0 or target_linf == 0.0:
        raise ValueError("target is identically zero on the grid")

    d = grid.d
    S = IndexSet([MultiIndex.zero()])
    grid_cols: dict[MultiIndex, np.ndarray] = {}
    qr = _IncrementalGridQR(grid.K) if strategy == "optimal" else None

    def ensure_columns(indices):
        for nu in indices:
            if nu not in grid_cols:
                col = basis_matrix(family, IndexSet([nu]), grid.points)[:, 0]
                grid_cols[nu] = col
                if qr is not None:
                    qr.append(nu, col)

    steps: list[AlsStep] = []
    while True:
        n = len(S)
        m = m_from_scaling(scaling, n)
        if max_m is not None and m > max_m:
            break
        t0 = time.perf_counter()
        ensure_columns(S)

        if strategy == "optimal":
            qr.check_rank()
            pi, w_grid = leverage_distribution(qr.Q)
            cum = np.cumsum(pi)
            cum /= cum[-1]
            idx = np.searchsorted(cum, rng.random(m), side="right")
            idx = np.minimum(idx, grid.K - 1)
            weights = w_grid[idx]
        else:
            idx = rng.integers(0, grid.K, size=m)
            weights = np.ones(m)

        pts = grid.points[idx]
        B_samp = np.column_stack([grid_cols[nu][idx] for nu in S])
        scale = np.sqrt(weights / m)
        A = DesignMatrix(values=scale[:, None] * B_samp, row_weights=weights, column_order=S)
        samples = target_grid_values[idx]
        e = noise(rng, m) if noise is not None else None
        result = solve_wls(A, samples, noise=e)
        coef = result.coefficients.values

        # metrics against the full grid
        approx_grid = np.column_stack([grid_cols[nu] for nu in S]) @ coef
        with np.errstate(all="ignore"):
            diff = target_grid_values - approx_grid
            err_l2 = float(np.linalg.norm(diff) / target_l2)
            err_linf = float(np.max(np.abs(diff)) / target_linf)

        # score the reduced margin by squared residual correlations
        rm = reduced_margin(S, ambient_dim=d)
        if len(rm) == 0:
            raise RuntimeError("reduced margin is empty; cannot grow further")
        D = build_design_matrix(family, rm, pts, weights)
        b = scale * (samples if e is None else samples + e)
        with np.errstate(all="ignore"):
            residual = b - A.values @ coef
            raw = estimator_residual_route(D, residual)
        raw = np.where(np.isfinite(raw), raw, 0.0)  # singular-solve steps score nothing
        scores = {nu: float(raw[j]) for j, nu in enumerate(rm)}

        wall_ms = (time.perf_counter() - t0) * 1e3
        steps.append(
            AlsStep(
                index_set=S,
                n=n,
                m=m,
                result=result,
                error_l2=err_l2,
                error_linf=err_linf,
                kappa_value=kappa(family, S),
                wall_time_ms=wall_ms,
            )
        )
        if max_steps is not None and len(steps) >= max_steps:
            break
        S = S.union(bulk(rm, scores, beta))
    return AlsTrace(steps=tuple(steps))
