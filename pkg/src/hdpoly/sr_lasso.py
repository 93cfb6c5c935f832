"""Sparse polynomial approximation via the weighted square-root LASSO.

The estimator minimizes G(z) = lambda ||z||_{1,u} + ||A z - f||_2 over a
large anchored hyperbolic-cross candidate set.  The solver is a primal-dual
(Chambolle-Pock type) iteration wrapped in a restart scheme: each restart
rescales the problem by a geometrically shrinking factor, which turns the
sublinear inner iteration into linear overall convergence down to a set
tolerance.  Because the data-fit term is not squared, the scheme needs no
noise-level estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .multi_index import CoefVector, IndexSet, MultiIndex, hyperbolic_cross_anchored
from .poly_basis import BasisFamily, basis_matrix, intrinsic_weight
from .sampling import Grid, christoffel_distribution, draw_mc, draw_near_optimal

DEFAULT_BUDGET = 10_000


def operator_norm_estimate(A: np.ndarray, iters: int = 100, seed: int = 0, rtol: float = 1e-6) -> float:
    """Spectral norm ||A||_2 by power iteration on A^T A with a fixed seed."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = A.T @ (A @ v)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        new_est = math.sqrt(norm_w)
        v = w / norm_w
        if est > 0 and abs(new_est - est) <= rtol * new_est:
            return new_est
        est = new_est
    return est


@dataclass(frozen=True)
class SrLassoConfig:
    """Solver parameters; defaults follow the standard table for m samples."""

    lam: float
    tau: float
    sigma: float
    t_inner: int
    r_max: int
    zeta_prime: float
    r: float
    s: float
    operator_norm: float
    lam_rule: str = "experiment"

    def __post_init__(self):
        if self.tau * self.sigma * self.operator_norm**2 > 1.0 + 1e-9:
            raise ValueError("step sizes violate tau*sigma*||A||^2 <= 1")
        if not 0 < self.r < 1:
            raise ValueError("scale factor r must lie in (0,1)")

    @staticmethod
    def from_matrix(
        A: np.ndarray,
        m: int,
        *,
        lam_rule: str = "experiment",
        epsilon: float = 0.1,
        r_max: int = 100,
        zeta_prime: float = 1e-15,
    ) -> "SrLassoConfig":
        """Defaults: lam = (5 sqrt(m))^-1, tau = sigma = 1/||A||,
        T = ceil(4 ||A|| / r), r = 1/e, s = T / (2 ||A||), R = 100, zeta' = 1e-15.

        lam_rule="theorem" uses (4 sqrt(m / L))^-1 with
        L = log(m) (log^3(m) + log(1/epsilon)) instead.
        """
        op = operator_norm_estimate(A)
        if op == 0.0:
            raise ValueError("zero operator norm; empty problem")
        if lam_rule == "experiment":
            lam = 1.0 / (5.0 * math.sqrt(m))
        elif lam_rule == "theorem":
            L = math.log(m) * (math.log(m) ** 3 + math.log(1.0 / epsilon))
            lam = 1.0 / (4.0 * math.sqrt(m / L))
        else:
            raise ValueError(f"unknown lam_rule {lam_rule!r}")
        r = math.exp(-1.0)
        t_inner = math.ceil(4.0 * op / r)
        return SrLassoConfig(
            lam=lam,
            tau=1.0 / op,
            sigma=1.0 / op,
            t_inner=t_inner,
            r_max=r_max,
            zeta_prime=zeta_prime,
            r=r,
            s=t_inner / (2.0 * op),
            operator_norm=op,
            lam_rule=lam_rule,
        )


@dataclass(frozen=True)
class CsResult:
    coefficients: CoefVector
    restarts_used: int
    objective_trace: tuple[float, ...]
    config: SrLassoConfig
    extracted: tuple[IndexSet, CoefVector] | None = None
    condition_number: float = math.nan


def gram_condition(A: np.ndarray, rel_tol: float = 1e-12) -> float:
    """Generalized 2-norm condition of an underdetermined sampling matrix.

    sqrt of (largest eigenvalue of A A^T) / (smallest eigenvalue above
    rel_tol * largest); inf when the Gram matrix is numerically rank zero.
    """
    gram = A @ A.T
    ev = scipy.linalg.eigvalsh(gram)
    top = float(ev[-1])
    if top <= 0.0:
        return float("inf")
    kept = ev[ev > rel_tol * top]
    return math.sqrt(top / float(kept[0]))


def objective(z: np.ndarray, A: np.ndarray, f: np.ndarray, u: np.ndarray, lam: float) -> float:
    """G(z) = lam * sum_nu u_nu |z_nu| + ||A z - f||_2."""
    return float(lam * np.sum(u * np.abs(z)) + np.linalg.norm(A @ z - f))


def primal_dual(
    A: np.ndarray,
    f: np.ndarray,
    u: np.ndarray,
    lam: float,
    tau: float,
    sigma: float,
    T: int,
    c0: np.ndarray,
    xi0: np.ndarray,
) -> np.ndarray:
    """T primal-dual steps on the square-root LASSO saddle problem.

    Primal update is weighted soft thresholding with level tau*lam*u_i (and
    sign(0) = 0); dual update projects onto the unit euclidean ball.  Aborts
    on NaN with the iteration number in the message.
    """
    if np.linalg.norm(xi0) > 1.0 + 1e-12:
        raise ValueError("dual start must lie in the unit ball")
    c = np.asarray(c0, dtype=float).copy()
    xi = np.asarray(xi0, dtype=float).copy()
    thresh = tau * lam * u
    for t in range(T):
        p = c - tau * (A.T @ xi)
        c_new = np.maximum(np.abs(p) - thresh, 0.0) * np.sign(p)
        q = xi + sigma * (A @ (2.0 * c_new - c)) - sigma * f
        nq = float(np.linalg.norm(q))
        xi = q if nq <= 1.0 else q / nq
        c = c_new
        if np.any(np.isnan(c)) or np.any(np.isnan(xi)):
            raise RuntimeError(f"primal-dual iteration produced NaN at step {t + 1}")
    return c


def restarted(
    A: np.ndarray,
    f: np.ndarray,
    u: np.ndarray,
    config: SrLassoConfig,
    columns: IndexSet,
) -> CsResult:
    """Restarted primal-dual iteration with geometrically shrinking scale.

    eps_0 = ||f||_2; each restart l runs the inner iteration on the problem
    rescaled by a_l = s * eps_{l+1}, eps_{l+1} = r (eps_l + zeta'), warm
    started from the previous solution.  Stops at r_max restarts or once
    consecutive iterates differ by <= 10 * zeta'; aborts as divergent if the
    objective sits above 1.5x the best value seen for three consecutive
    restarts (converging runs may creep up toward the limit from a slight
    undershoot, so consecutive rises alone do not indicate divergence).
    """
    if A.shape[1] != len(columns):
        raise ValueError("column labels do not match the matrix")
    c = np.zeros(A.shape[1])
    eps = float(np.linalg.norm(f))
    trace: list[float] = []
    g_min = math.inf
    rises = 0
    restarts = 0
    for _ in range(config.r_max):
        eps = config.r * (eps + config.zeta_prime)
        a = config.s * eps
        if a == 0.0:
            break
        c_next = a * primal_dual(
            A, f / a, u, config.lam, config.tau, config.sigma,
            config.t_inner, c / a, np.zeros(A.shape[0]),
        )
        restarts += 1
        g = objective(c_next, A, f, u, config.lam)
        if trace and g > 1.5 * g_min + 1e-12:
            rises += 1
            if rises >= 3:
                raise RuntimeError(
                    f"objective diverged over {rises} consecutive restarts (G = {g:.6e})"
                )
        else:
            rises = 0
        trace.append(g)
        g_min = min(g_min, g)
        delta = float(np.linalg.norm(c_next - c))
        c = c_next
        if delta <= 10.0 * config.zeta_prime:
            break
    return CsResult(
        coefficients=CoefVector(index_set=columns, values=c),
        restarts_used=restarts,
        objective_trace=tuple(trace),
        config=config,
    )


def candidate_set(d: int, budget: int = DEFAULT_BUDGET) -> IndexSet:
    """Largest anchored hyperbolic cross (dimensions capped at d) within the budget."""
    if budget < 1:
        raise ValueError("need budget >= 1")
    best = hyperbolic_cross_anchored(1, max_dim=d)
    n = 2
    while True:
        nxt = hyperbolic_cross_anchored(n, max_dim=d)
        if len(nxt) > budget:
            return best
        best = nxt
        n += 1


def intrinsic_weights_vector(family: BasisFamily, S: IndexSet) -> np.ndarray:
    return np.array([intrinsic_weight(family, nu) for nu in S])


def cs_approximate(
    target_grid_values: np.ndarray,
    family: BasisFamily,
    d: int,
    m: int,
    grid: Grid,
    rng: np.random.Generator,
    *,
    strategy: str = "mc",
    budget: int = DEFAULT_BUDGET,
    lam_rule: str = "experiment",
    noise=None,
    extract_n: int | None = None,
    want_condition: bool = False,
) -> CsResult:
    """Sparse-regression approximation over the hyperbolic-cross candidate set.

    Draws m samples from the grid (uniformly, or from the leverage-score
    distribution of the candidate set when strategy="christoffel"), assembles
    the 1/sqrt(m)-scaled sampling matrix (with sqrt(w) row scaling under the
    non-uniform measure), and runs the restarted solver.
    """
    if m < 1:
        raise ValueError("need m >= 1")
    target_grid_values = np.asarray(target_grid_values, dtype=float)
    if target_grid_values.shape != (grid.K,):
        raise ValueError("target values must be evaluated on the full grid")
    Lam = candidate_set(d, budget)
    if strategy == "mc":
        samples = draw_mc(grid, m, rng)
    elif strategy == "christoffel":
        pi, w = christoffel_distribution(grid, family, Lam)
        samples = draw_near_optimal(grid, pi, w, m, rng)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    B = basis_matrix(family, Lam, samples.points)
    scale = np.sqrt(samples.weights / m)
    A = scale[:, None] * B
    vals = target_grid_values[samples.indices]
    if noise is not None:
        vals = vals + noise(rng, m)
    f = scale * vals
    config = SrLassoConfig.from_matrix(A, m, lam_rule=lam_rule)
    u = intrinsic_weights_vector(family, Lam)
    result = restarted(A, f, u, config, Lam)
    if extract_n is not None:
        result = replace(result, extracted=extract_top_n(result.coefficients, extract_n))
    if want_condition:
        result = replace(result, condition_number=gram_condition(A))
    return result


def extract_top_n(c: CoefVector, n: int) -> tuple[IndexSet, CoefVector]:
    """Indices of the min(n, #nonzero) largest |c_nu| with their values.

    Ties break in canonical index order.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    pairs = [
        (nu, float(v))
        for nu, v in zip(c.index_set, c.values)
        if v != 0.0
    ]
    pairs.sort(key=lambda t: (-abs(t[1]), t[0].canonical_key()))
    top = pairs[: min(n, len(pairs))]
    S = IndexSet(nu for nu, _ in top)
    by_index = dict(top)
    return S, CoefVector(index_set=S, values=np.array([by_index[nu] for nu in S]))
