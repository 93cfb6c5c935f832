"""Independent oracles: brute-force and closed-form reference quantities.

Everything here is deliberately implemented by a different route than the
production code paths it is used to check: tail sums instead of solver
output, exhaustive enumeration instead of greedy growth, quadrature instead
of regression.  Tests compare the two routes; neither is ever collapsed into
the other.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .multi_index import IndexSet, MultiIndex, reduced_margin
from .poly_basis import BasisFamily, eval_univariate_all, kappa, quadrature


@dataclass(frozen=True)
class SortedCoefSeq:
    """Nonincreasing rearrangement c* of an absolute-value coefficient sequence."""

    values: np.ndarray

    @staticmethod
    def from_values(values) -> "SortedCoefSeq":
        v = np.abs(np.asarray(values, dtype=float).ravel())
        return SortedCoefSeq(values=np.sort(v)[::-1])

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size and (np.any(v < 0) or np.any(np.diff(v) > 0)):
            raise ValueError("sequence must be nonnegative and nonincreasing")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)


def _as_sorted(c) -> np.ndarray:
    if isinstance(c, SortedCoefSeq):
        return c.values
    return SortedCoefSeq.from_values(c).values


def sigma_n(c, n: int, q: float) -> float:
    """Best n-term q-norm error: tail norm (sum_{j>n} (c*_j)^q)^(1/q)."""
    if q <= 0:
        raise ValueError("need q > 0")
    if n < 0:
        raise ValueError("need n >= 0")
    tail = _as_sorted(c)[n:]
    if tail.size == 0:
        return 0.0
    return float(np.sum(tail**q) ** (1.0 / q))


def lp_norm(c, p: float) -> float:
    if p <= 0:
        raise ValueError("need p > 0")
    v = _as_sorted(c)
    return float(np.sum(v**p) ** (1.0 / p))


def weak_lp_norm(c, p: float) -> float:
    """sup_i i^(1/p) c*_i over the nonincreasing rearrangement (1-based i)."""
    if p <= 0:
        raise ValueError("need p > 0")
    v = _as_sorted(c)
    if v.size == 0:
        return 0.0
    i = np.arange(1, v.size + 1, dtype=float)
    return float(np.max(i ** (1.0 / p) * v))


def stechkin_bound(c, n: int, p: float, q: float) -> tuple[float, float]:
    """(sigma_n(c)_q, ||c||_p (n+1)^(1/q - 1/p)); valid for 0 < p <= q, n >= 0."""
    if not 0 < p <= q:
        raise ValueError("need 0 < p <= q")
    lhs = sigma_n(c, n, q)
    rhs = lp_norm(c, p) * (n + 1) ** (1.0 / q - 1.0 / p)
    return lhs, rhs


def weak_stechkin_bound(c, n: int, p: float, q: float) -> tuple[float, float]:
    """(sigma_n(c)_q, ||c||_{p,inf} / (q/p - 1)^(1/q) * n^(1/q - 1/p)); needs p < q, n >= 1."""
    if not 0 < p < q:
        raise ValueError("need 0 < p < q strictly")
    if n < 1:
        raise ValueError("need n >= 1")
    lhs = sigma_n(c, n, q)
    rhs = weak_lp_norm(c, p) / (q / p - 1.0) ** (1.0 / q) * n ** (1.0 / q - 1.0 / p)
    return lhs, rhs


def weak_lp_converse_bound(c, p: float, q: float) -> tuple[float, float]:
    """(||c||_{p,inf}, 2^(1/p+1/q) sup_{n>=1} n^(1/p-1/q) sigma_n(c)_q)."""
    if not 0 < p < q:
        raise ValueError("need 0 < p < q strictly")
    v = _as_sorted(c)
    best = 0.0
    for n in range(1, v.size + 1):
        best = max(best, n ** (1.0 / p - 1.0 / q) * sigma_n(v, n, q))
    return weak_lp_norm(c, p), 2.0 ** (1.0 / p + 1.0 / q) * best


# ---------------------------------------------------------------------------
# weighted sparsity


def weighted_lq_norm(values, u_weights, q: float) -> float:
    """(sum_nu u_nu^(2-q) |c_nu|^q)^(1/q) for 0 < q <= 2."""
    if not 0 < q <= 2:
        raise ValueError("need 0 < q <= 2")
    v = np.abs(np.asarray(values, dtype=float))
    u = np.asarray(u_weights, dtype=float)
    if np.any(u < 1):
        raise ValueError("intrinsic weights are always >= 1")
    return float(np.sum(u ** (2.0 - q) * v**q) ** (1.0 / q))


def weighted_sigma_upper(values, u_weights, k: float, q: float) -> float:
    """Greedy upper bound on the weighted best-k-term error sigma_k(c)_{q,u}.

    Keeps indices by |c_nu|/u_nu descending while the weighted cardinality
    budget sum u_nu^2 <= k allows; returns the weighted q-norm of the rest.
    A feasible point, hence an upper bound; exact weighted best-k-term
    selection is a knapsack problem and deliberately out of scope.
    """
    if k < 0:
        raise ValueError("need k >= 0")
    v = np.abs(np.asarray(values, dtype=float))
    u = np.asarray(u_weights, dtype=float)
    order = np.argsort(-(v / u), kind="stable")
    budget = 0.0
    kept = np.zeros(v.size, dtype=bool)
    for i in order:
        if budget + u[i] ** 2 <= k:
            kept[i] = True
            budget += u[i] ** 2
    return weighted_lq_norm(v[~kept], u[~kept], q) if np.any(~kept) else 0.0


def weighted_stechkin_bound(values, u_weights, k: float, p: float, q: float) -> tuple[float, float]:
    """(greedy upper bound on sigma_k(c)_{q,u}, ||c||_{p,u} k^(1/q - 1/p)); 0 < p <= q <= 2, k > 0."""
    if not 0 < p <= q <= 2:
        raise ValueError("need 0 < p <= q <= 2")
    if k <= 0:
        raise ValueError("need k > 0")
    lhs = weighted_sigma_upper(values, u_weights, k, q)
    rhs = weighted_lq_norm(values, u_weights, p) * k ** (1.0 / q - 1.0 / p)
    return lhs, rhs


# ---------------------------------------------------------------------------
# univariate expansion coefficients by quadrature


def univariate_coeffs(g, family: BasisFamily, max_degree: int) -> tuple[np.ndarray, float, bool]:
    """Expansion coefficients d_nu = integral of g * psi_nu against the measure.

    Gauss quadrature matched to the family with max_degree + 17 nodes,
    convergence-checked by node doubling: returns (coefficients at the doubled
    node count, tail estimate = max |d| over the top two degrees, converged
    flag).  converged is False when doubling moved any coefficient by more
    than 1e-12.
    """
    if max_degree < 0:
        raise ValueError("need max_degree >= 0")

    def compute(n_nodes: int) -> np.ndarray:
        x, w = quadrature(family, n_nodes)
        gx = np.asarray([g(xi) for xi in x], dtype=float)
        psi = eval_univariate_all(family, max_degree, x)
        return psi @ (w * gx)

    base_nodes = max_degree + 1 + 16
    coarse = compute(base_nodes)
    fine = compute(2 * base_nodes)
    converged = bool(np.max(np.abs(fine - coarse)) <= 1e-12)
    tail = float(np.max(np.abs(fine[-2:]))) if max_degree >= 1 else float(abs(fine[-1]))
    return fine, tail, converged


# ---------------------------------------------------------------------------
# best n-term selection for product / additive structures


TRUNC_REL = 1e-18


def best_n_term_product(coeff_lists, n: int) -> tuple[IndexSet, float]:
    """Top-n product coefficients over the lattice |c_nu| = prod_i |d^(i)_{nu_i}|.

    Best-first search with a max-heap.  Per-dimension magnitudes are
    pre-sorted descending so the product is monotone along every lattice axis
    (the heap invariant "no unvisited point beats the frontier" needs this),
    then the selected points are mapped back to the original degrees.  The
    reported error is sqrt(||c||_2^2 - sum of selected c^2) with the total
    energy taken from the closed product form.

    Returns (IndexSet of selected indices in original degrees, l2 tail error).
    """
    if n < 0:
        raise ValueError("need n >= 0")
    mags, perms = [], []
    for lst in coeff_lists:
        a = np.abs(np.asarray(lst, dtype=float))
        if a.size == 0:
            raise ValueError("each dimension needs at least one coefficient")
        keep = a >= TRUNC_REL * np.max(a)
        # degrees surviving truncation, sorted by magnitude descending;
        # ties by degree ascending for determinism
        degs = np.nonzero(keep)[0]
        order = degs[np.lexsort((degs, -a[degs]))]
        mags.append(a[order])
        perms.append(order)
    d = len(mags)
    total_energy = math.prod(float(np.sum(a**2)) for a in (np.abs(np.asarray(l)) for l in coeff_lists))

    def original_index(pos: tuple[int, ...]) -> MultiIndex:
        return MultiIndex(
            (dim + 1, int(perms[dim][k])) for dim, k in enumerate(pos) if perms[dim][k] != 0
        )

    def value(pos) -> float:
        return math.prod(mags[dim][k] for dim, k in enumerate(pos))

    origin = (0,) * d
    # heap entries: (-|c|, canonical tie key, sorted-lattice position)
    heap = [(-value(origin), original_index(origin).canonical_key(), origin)]
    seen = {origin}
    selected = []
    picked_energy = 0.0
    while len(selected) < n:
        if not heap:
            raise ValueError(
                f"product lattice exhausted after {len(selected)} of {n} terms; "
                "supply longer per-dimension coefficient lists"
            )
        negv, _, pos = heapq.heappop(heap)
        selected.append(original_index(pos))
        picked_energy += negv * negv
        for dim in range(d):
            if pos[dim] + 1 < len(mags[dim]):
                succ = pos[:dim] + (pos[dim] + 1,) + pos[dim + 1 :]
                if succ not in seen:
                    seen.add(succ)
                    heapq.heappush(
                        heap, (-value(succ), original_index(succ).canonical_key(), succ)
                    )
    error = math.sqrt(max(0.0, total_energy - picked_energy))
    return IndexSet(selected), error


def best_n_term_additive(d0: float, higher: np.ndarray, d: int, n: int) -> tuple[IndexSet, float]:
    """Top-n coefficients of an additively separable target sum_j g(y_j).

    The expansion has constant coefficient d*d0 and axis coefficients d_k on
    every k e_j; nothing else.  Selection is by magnitude with canonical
    tie-breaking; error is the l2 norm of what remains.
    """
    higher = np.abs(np.asarray(higher, dtype=float))
    candidates = [(abs(d * d0), MultiIndex.zero())]
    for j in range(1, d + 1):
        for k, mag in enumerate(higher, start=1):
            candidates.append((float(mag), MultiIndex(((j, k),))))
    candidates.sort(key=lambda t: (-t[0], t[1].canonical_key()))
    chosen = candidates[:n]
    total_energy = (d * d0) ** 2 + d * float(np.sum(higher**2))
    picked = sum(v * v for v, _ in chosen)
    return IndexSet(nu for _, nu in chosen), math.sqrt(max(0.0, total_energy - picked))


# ---------------------------------------------------------------------------
# exhaustive kappa maximization over small lower sets

KAPPA_MAX_D = 3
KAPPA_MAX_N = 10


def kappa_max_lower(family: BasisFamily, d: int, n: int) -> float:
    """max kappa(P_S) over all lower sets S of size <= n in d dimensions.

    Exhaustive: every lower set is reachable from {0} by repeatedly adding a
    reduced-margin element, so a breadth-first walk with dedup enumerates the
    whole family.  Guarded to d <= 3, n <= 10.
    """
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    if d > KAPPA_MAX_D or n > KAPPA_MAX_N:
        raise ValueError(
            f"exhaustive enumeration budget exceeded (d <= {KAPPA_MAX_D}, n <= {KAPPA_MAX_N})"
        )
    start = IndexSet([MultiIndex.zero()])
    best = kappa(family, start)
    frontier = {start}
    for _ in range(n - 1):
        nxt = set()
        for S in frontier:
            for nu in reduced_margin(S, ambient_dim=d):
                grown = S.union([nu])
                if grown not in nxt:
                    nxt.add(grown)
        frontier = nxt
        if frontier:
            best = max(best, max(kappa(family, S) for S in frontier))
    return float(best)
