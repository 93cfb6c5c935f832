"""Sparse multi-indices and downward-closed index sets.

Multi-indices are stored sparsely as {dimension -> degree} maps with 1-based
dimensions and strictly positive stored degrees, so that dimension counts in
the tens (or nominally infinite) cost nothing.  Index sets iterate in a fixed
canonical order (total degree ascending, ties by lexicographic comparison of
dense degree tuples), which makes every downstream tie-break and regression
test deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MAX_DEGREE = 1 << 20
MAX_DIMENSION = 1 << 16

# guard for explicit set constructors; (l+1)^d and C(l+d,d) past this are
# assumed to be mistakes rather than genuine requests
MAX_SET_SIZE = 1 << 24


class MultiIndex:
    """A finitely-supported multi-index nu = (nu_1, nu_2, ...).

    Parameters
    ----------
    entries : mapping or iterable of (dim, degree) pairs
        Dimensions are 1-based.  Zero degrees are dropped; negative degrees,
        nonpositive dimensions, or values beyond the degree/dimension
        ceilings are rejected.
    """

    __slots__ = ("_pairs", "_hash", "_key")

    def __init__(self, entries=()):
        if isinstance(entries, MultiIndex):
            pairs = entries._pairs
        else:
            items = entries.items() if hasattr(entries, "items") else entries
            cleaned = {}
            for dim, deg in items:
                dim = int(dim)
                deg = int(deg)
                if dim < 1:
                    raise ValueError(f"dimension index must be >= 1, got {dim}")
                if dim > MAX_DIMENSION:
                    raise ValueError(f"dimension index {dim} exceeds ceiling {MAX_DIMENSION}")
                if deg < 0:
                    raise ValueError(f"degree must be >= 0, got {deg}")
                if deg > MAX_DEGREE:
                    raise ValueError(f"degree {deg} exceeds ceiling {MAX_DEGREE}")
                if deg == 0:
                    continue
                if dim in cleaned:
                    raise ValueError(f"duplicate dimension {dim}")
                cleaned[dim] = deg
            pairs = tuple(sorted(cleaned.items()))
        object.__setattr__(self, "_pairs", pairs)
        object.__setattr__(self, "_hash", hash(pairs))
        object.__setattr__(self, "_key", None)

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero() -> "MultiIndex":
        return _ZERO

    @staticmethod
    def unit(dim: int) -> "MultiIndex":
        """Canonical index e_dim."""
        return MultiIndex(((dim, 1),))

    @staticmethod
    def from_dense(degrees) -> "MultiIndex":
        return MultiIndex(
            ((i + 1, int(d)) for i, d in enumerate(degrees) if int(d) != 0)
        )

    # -- basic queries ------------------------------------------------------

    @property
    def support(self) -> tuple[int, ...]:
        """Dimensions with nonzero degree, ascending; len() is the l0 norm."""
        return tuple(d for d, _ in self._pairs)

    def degree(self, dim: int) -> int:
        for d, g in self._pairs:
            if d == dim:
                return g
        return 0

    @property
    def total_degree(self) -> int:
        return sum(g for _, g in self._pairs)

    @property
    def max_dim(self) -> int:
        """Largest supported dimension (0 for the zero index)."""
        return self._pairs[-1][0] if self._pairs else 0

    def is_zero(self) -> bool:
        return not self._pairs

    def items(self):
        return iter(self._pairs)

    def to_dense(self, d: int) -> np.ndarray:
        if self.max_dim > d:
            raise ValueError(f"index supported on dim {self.max_dim} > requested length {d}")
        out = np.zeros(d, dtype=np.int64)
        for dim, deg in self._pairs:
            out[dim - 1] = deg
        return out

    # -- lattice arithmetic -------------------------------------------------

    def plus_unit(self, dim: int) -> "MultiIndex":
        d = dict(self._pairs)
        d[dim] = d.get(dim, 0) + 1
        return MultiIndex(d)

    def minus_unit(self, dim: int) -> "MultiIndex | None":
        """nu - e_dim, or None when nu_dim = 0 (leaving the lattice)."""
        d = dict(self._pairs)
        if d.get(dim, 0) == 0:
            return None
        d[dim] -= 1
        return MultiIndex(d)

    def dominates(self, other: "MultiIndex") -> bool:
        """True iff other <= self componentwise."""
        mine = dict(self._pairs)
        return all(mine.get(dim, 0) >= deg for dim, deg in other._pairs)

    # -- ordering / identity ------------------------------------------------

    def canonical_key(self):
        """Sort key: (total degree, dense degree tuple without trailing zeros)."""
        key = self._key
        if key is None:
            dense = tuple(self.to_dense(self.max_dim)) if self._pairs else ()
            key = (self.total_degree, dense)
            object.__setattr__(self, "_key", key)
        return key

    def __eq__(self, other):
        return isinstance(other, MultiIndex) and self._pairs == other._pairs

    def __hash__(self):
        return self._hash

    def __lt__(self, other):
        return self.canonical_key() < other.canonical_key()

    def __repr__(self):
        return f"MultiIndex({self.serialize()!r})"

    # -- serialization ------------------------------------------------------

    def serialize(self) -> str:
        """"dim:degree" pairs comma-separated sorted by dimension; "0" for zero."""
        if not self._pairs:
            return "0"
        return ",".join(f"{d}:{g}" for d, g in self._pairs)

    @staticmethod
    def deserialize(text: str) -> "MultiIndex":
        text = text.strip()
        if text == "0":
            return _ZERO
        pairs = []
        for tok in text.split(","):
            dim, _, deg = tok.partition(":")
            pairs.append((int(dim), int(deg)))
        return MultiIndex(pairs)


_ZERO = MultiIndex(())


class IndexSet:
    """An immutable set of multi-indices with deterministic iteration order.

    Members iterate in canonical order: total degree ascending, ties broken by
    ascending lexicographic comparison of dense degree tuples.  Lower/anchored
    flags are computed lazily and cached.
    """

    __slots__ = ("_members", "_member_set", "_lower", "_anchored")

    def __init__(self, members):
        uniq = {}
        for nu in members:
            if not isinstance(nu, MultiIndex):
                nu = MultiIndex(nu)
            uniq[nu] = None
        ordered = tuple(sorted(uniq, key=MultiIndex.canonical_key))
        object.__setattr__(self, "_members", ordered)
        object.__setattr__(self, "_member_set", frozenset(ordered))
        object.__setattr__(self, "_lower", None)
        object.__setattr__(self, "_anchored", None)

    def __len__(self):
        return len(self._members)

    def __iter__(self):
        return iter(self._members)

    def __contains__(self, nu):
        return nu in self._member_set

    def __eq__(self, other):
        return isinstance(other, IndexSet) and self._member_set == other._member_set

    def __hash__(self):
        return hash(self._member_set)

    def __repr__(self):
        inner = ", ".join(nu.serialize() for nu in self._members[:6])
        if len(self._members) > 6:
            inner += f", ... ({len(self._members)} total)"
        return f"IndexSet[{inner}]"

    @property
    def members(self) -> tuple[MultiIndex, ...]:
        return self._members

    @property
    def max_dim(self) -> int:
        return max((nu.max_dim for nu in self._members), default=0)

    def union(self, other) -> "IndexSet":
        other_members = other.members if isinstance(other, IndexSet) else tuple(other)
        return IndexSet(self._members + tuple(other_members))

    # -- structural predicates ----------------------------------------------

    def is_lower(self) -> bool:
        """Downward closed: nu in S and j in supp(nu) imply nu - e_j in S."""
        if self._lower is None:
            ok = all(
                nu.minus_unit(j) in self._member_set
                for nu in self._members
                for j in nu.support
            )
            object.__setattr__(self, "_lower", ok)
        return self._lower

    def is_anchored(self) -> bool:
        """Lower, and e_j in S implies {e_1, ..., e_j} subset of S."""
        if self._anchored is None:
            ok = self.is_lower()
            if ok:
                unit_dims = [
                    nu.support[0]
                    for nu in self._members
                    if nu.total_degree == 1
                ]
                if unit_dims:
                    jmax = max(unit_dims)
                    ok = all(MultiIndex.unit(j) in self._member_set for j in range(1, jmax + 1))
            object.__setattr__(self, "_anchored", ok)
        return self._anchored

    # -- serialization ------------------------------------------------------

    def serialize(self) -> str:
        """One index per line in canonical order."""
        return "\n".join(nu.serialize() for nu in self._members)

    @staticmethod
    def deserialize(text: str) -> "IndexSet":
        lines = [ln for ln in (l.strip() for l in text.splitlines()) if ln]
        return IndexSet(MultiIndex.deserialize(ln) for ln in lines)


@dataclass(frozen=True)
class CoefVector:
    """Coefficients aligned with an IndexSet's canonical enumeration."""

    index_set: IndexSet
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(self.index_set),):
            raise ValueError(
                f"values shape {vals.shape} does not match set size {len(self.index_set)}"
            )
        object.__setattr__(self, "values", vals)

    def get(self, nu: MultiIndex) -> float:
        for i, member in enumerate(self.index_set):
            if member == nu:
                return float(self.values[i])
        return 0.0

    def as_dict(self) -> dict[MultiIndex, float]:
        return {nu: float(v) for nu, v in zip(self.index_set, self.values)}

    def norm2(self) -> float:
        return float(np.linalg.norm(self.values))


# ---------------------------------------------------------------------------
# margins


def margin(S: IndexSet, ambient_dim: int | None = None) -> IndexSet:
    """Forward neighbors of S outside S.

    Returns {nu not in S : nu - e_j in S for some j}.  Dimensions considered
    are 1..ambient_dim when given, otherwise the active dimensions of S plus
    one fresh dimension (anchored growth never needs more than one new
    dimension per step).
    """
    if len(S) == 0:
        raise ValueError("margin of an empty set is undefined")
    if ambient_dim is None:
        ambient_dim = S.max_dim + 1
    dims = range(1, ambient_dim + 1)
    out = set()
    for nu in S:
        for j in dims:
            cand = nu.plus_unit(j)
            if cand not in S:
                out.add(cand)
    return IndexSet(out)


def reduced_margin(S: IndexSet, ambient_dim: int | None = None) -> IndexSet:
    """Margin elements whose every backward neighbor lies in S.

    For each returned nu, S union {nu} is again lower.  Rejects non-lower S.
    """
    if not S.is_lower():
        raise ValueError("reduced margin requires a lower set")
    full = margin(S, ambient_dim)
    keep = [
        nu
        for nu in full
        if all(nu.minus_unit(j) in S for j in nu.support)
    ]
    return IndexSet(keep)


# ---------------------------------------------------------------------------
# classical sets


def tensor_set(order: int, d: int) -> IndexSet:
    """Full tensor-product set: all nu with max_j nu_j <= order; size (order+1)^d."""
    if order < 0 or d < 1:
        raise ValueError("need order >= 0 and d >= 1")
    size = (order + 1) ** d
    if size > MAX_SET_SIZE:
        raise ValueError(f"tensor set of size {size} exceeds guard {MAX_SET_SIZE}")
    members = []
    stack = [(1, {})]
    while stack:
        dim, partial = stack.pop()
        if dim > d:
            members.append(MultiIndex(partial))
            continue
        for deg in range(order + 1):
            nxt = dict(partial)
            if deg:
                nxt[dim] = deg
            stack.append((dim + 1, nxt))
    return IndexSet(members)


def total_degree_set(order: int, d: int) -> IndexSet:
    """All nu with |nu|_1 <= order; size C(order+d, d)."""
    if order < 0 or d < 1:
        raise ValueError("need order >= 0 and d >= 1")
    size = math.comb(order + d, d)
    if size > MAX_SET_SIZE:
        raise ValueError(f"total-degree set of size {size} exceeds guard {MAX_SET_SIZE}")
    members = []
    stack = [(1, {}, 0)]
    while stack:
        dim, partial, used = stack.pop()
        if dim > d:
            members.append(MultiIndex(partial))
            continue
        for deg in range(order - used + 1):
            nxt = dict(partial)
            if deg:
                nxt[dim] = deg
            stack.append((dim + 1, nxt, used + deg))
    return IndexSet(members)


@lru_cache(maxsize=128)
def hyperbolic_cross_anchored(n: int, max_dim: int | None = None) -> IndexSet:
    """Anchored hyperbolic-cross set of order n.

    All nu supported on dimensions 1..min(n-1, max_dim) with
    prod_k (nu_k + 1) <= n.  Contains every anchored set of cardinality <= n.
    """
    if n < 1:
        raise ValueError("need n >= 1")
    dmax = n - 1 if max_dim is None else min(n - 1, max_dim)
    members = [_ZERO]
    # DFS over dimensions with the running product as budget
    stack = [(1, {}, 1)]
    while stack:
        dim, partial, prod = stack.pop()
        if dim > dmax:
            continue
        # keep dim at zero and move on
        stack.append((dim + 1, partial, prod))
        deg = 1
        while prod * (deg + 1) <= n:
            nxt = dict(partial)
            nxt[dim] = deg
            members.append(MultiIndex(nxt))
            stack.append((dim + 1, nxt, prod * (deg + 1)))
            deg += 1
    return IndexSet(members)


def weighted_cardinality(S: IndexSet, family) -> float:
    """|S|_u = sum over S of u_nu^2; always >= |S| since u_nu >= 1."""
    from .poly_basis import intrinsic_weight_sq  # deferred: poly_basis imports this module

    return float(sum(intrinsic_weight_sq(family, nu) for nu in S))
