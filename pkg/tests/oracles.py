"""Independent oracles backing the expected values in this test suite.

Every routine recomputes a quantity from first principles with a
deliberately different algorithm (and usually different data structures)
than the library under test: breadth-first flood fill instead of
union-find component labeling, subset enumeration with union-find
instead of max-flow duality, breadth-first search over vertex-set space
instead of rooted forbidden-prefix extension, exact rational arithmetic
instead of floating-point geometry, and Monte Carlo rejection sampling
instead of exact fan decomposition.  Tests compare library output
against these so regressions surface as honest disagreements between
two unrelated computations.

All functions here take plain containers (lists, dicts, numpy arrays)
rather than library objects; the test modules do the gluing.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

# ---------------------------------------------------------------------------
# graph oracles
# ---------------------------------------------------------------------------


def adjacency_from_pairs(n_vertices: int, pairs) -> list[list[int]]:
    """Adjacency lists from an iterable of undirected (u, v) pairs."""
    adj: list[list[int]] = [[] for _ in range(n_vertices)]
    for u, v in pairs:
        adj[int(u)].append(int(v))
        adj[int(v)].append(int(u))
    return adj


def flood_fill_roots(n_vertices: int, pairs) -> np.ndarray:
    """Per-vertex smallest component member, by iterative BFS flood fill."""
    adj = adjacency_from_pairs(n_vertices, pairs)
    roots = np.full(n_vertices, -1, dtype=np.int64)
    for start in range(n_vertices):
        if roots[start] >= 0:
            continue
        frontier = [start]
        roots[start] = start
        while frontier:
            nxt = []
            for u in frontier:
                for w in adj[u]:
                    if roots[w] < 0:
                        roots[w] = start
                        nxt.append(w)
            frontier = nxt
    return roots


def bfs_reachable(n_vertices: int, pairs, sources) -> np.ndarray:
    """Boolean mask of vertices reachable from ``sources`` along ``pairs``."""
    adj = adjacency_from_pairs(n_vertices, pairs)
    seen = np.zeros(n_vertices, dtype=bool)
    frontier = [int(s) for s in sources]
    seen[frontier] = True
    while frontier:
        nxt = []
        for u in frontier:
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    nxt.append(w)
        frontier = nxt
    return seen


def separates(n_vertices: int, pairs, removed, side1, side2) -> bool:
    """True when deleting the ``removed`` edge indices cuts side1 from side2."""
    removed = set(int(i) for i in removed)
    kept = [pair for i, pair in enumerate(pairs) if i not in removed]
    side1 = [int(s) for s in side1]
    side2 = [int(s) for s in side2]
    if not side1 or not side2:
        return True
    seen = bfs_reachable(n_vertices, kept, side1)
    return not bool(seen[side2].any())


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def min_cut_enumeration(n_vertices: int, pairs, side1, side2):
    """Smallest edge set separating two terminal groups, by subset search.

    Enumerates removal subsets in increasing size and tests separation
    with a union-find over the kept edges (terminals contracted into two
    super-nodes), so the first separating subset found is minimal.
    Intended for networks with at most ~20 edges.  Returns ``(size,
    witness_indices)``; a network whose terminals are already separated
    returns ``(0, ())``.
    """
    pairs = [(int(u), int(v)) for u, v in pairs]
    m = len(pairs)
    s, t = n_vertices, n_vertices + 1
    base = _UnionFind(n_vertices + 2)
    for v in side1:
        base.union(s, int(v))
    for v in side2:
        base.union(t, int(v))
    if base.find(s) == base.find(t):
        raise ValueError("terminal groups overlap; no edge cut can separate")
    base_parent = base.parent
    for size in range(m + 1):
        for removed in itertools.combinations(range(m), size):
            uf = _UnionFind(0)
            uf.parent = base_parent.copy()
            drop = set(removed)
            for i, (u, v) in enumerate(pairs):
                if i not in drop:
                    uf.union(u, v)
            if uf.find(s) != uf.find(t):
                return size, removed
    raise AssertionError("removing every edge must separate the terminals")


# ---------------------------------------------------------------------------
# anchored-ratio oracle
# ---------------------------------------------------------------------------


def enumerate_anchored_minimum(
    n_vertices: int,
    open_pairs,
    anchor: int,
    vol_cap: int,
    allowed=None,
):
    """Exact anchored boundary/volume minimum by set-growth search.

    Explores every open-connected vertex set containing ``anchor`` with
    at most ``vol_cap`` members (optionally restricted to the ``allowed``
    vertex mask) by growing sets one neighbor at a time from a stack and
    deduplicating on an integer bitmask of the membership — a traversal
    unrelated to rooted forbidden-prefix extension.  Returns
    ``(boundary, volume, vertices)`` under the tie rule: smallest exact
    ratio, then largest volume, then lexicographically smallest sorted
    vertex tuple.
    """
    adj = adjacency_from_pairs(n_vertices, open_pairs)
    anchor = int(anchor)
    if allowed is not None and not bool(allowed[anchor]):
        raise ValueError("anchor must be allowed")

    def boundary_of(members: frozenset) -> int:
        count = 0
        for u in members:
            for w in adj[u]:
                if w not in members:
                    count += 1
        return count

    def candidate_neighbors(members: frozenset):
        for u in members:
            for w in adj[u]:
                if w in members:
                    continue
                if allowed is not None and not bool(allowed[w]):
                    continue
                yield w

    start = frozenset([anchor])
    seen = {1 << anchor}
    queue = [start]
    best = (boundary_of(start), 1, (anchor,))
    while queue:
        members = queue.pop()
        if len(members) >= vol_cap:
            continue
        for w in set(candidate_neighbors(members)):
            grown = members | {w}
            key = 0
            for u in grown:
                key |= 1 << u
            if key in seen:
                continue
            seen.add(key)
            cand = (boundary_of(grown), len(grown), tuple(sorted(grown)))
            if _ratio_prefer(cand, best):
                best = cand
            queue.append(grown)
    return best


def _ratio_prefer(a, b) -> bool:
    """Tie rule shared with the library: ratio, then volume, then lex order."""
    lhs = a[0] * b[1]
    rhs = b[0] * a[1]
    if lhs != rhs:
        return lhs < rhs
    if a[1] != b[1]:
        return a[1] > b[1]
    return a[2] < b[2]


def boundary_count_direct(open_pairs, member_mask) -> int:
    """Open edges with exactly one endpoint in the set, by direct scan."""
    count = 0
    for u, v in open_pairs:
        if bool(member_mask[int(u)]) != bool(member_mask[int(v)]):
            count += 1
    return count


# ---------------------------------------------------------------------------
# exact planar geometry
# ---------------------------------------------------------------------------


def halfplane_vertices_exact(normals, offsets):
    """Vertices of a 2-d halfplane intersection, in exact rationals.

    Solves every pair of boundary lines with Fraction arithmetic, keeps
    the points feasible for all halfplanes, deduplicates, and orders
    them by angle around the centroid.  Inputs must be rational
    (ints/Fractions); returns a list of (Fraction, Fraction).
    """
    normals = [(Fraction(a), Fraction(b)) for a, b in normals]
    offsets = [Fraction(c) for c in offsets]
    points: list[tuple[Fraction, Fraction]] = []
    for (a1, b1), c1 in zip(normals, offsets):
        for (a2, b2), c2 in zip(normals, offsets):
            det = a1 * b2 - a2 * b1
            if det == 0:
                continue
            x = (c1 * b2 - c2 * b1) / det
            y = (a1 * c2 - a2 * c1) / det
            if all(a * x + b * y <= c for (a, b), c in zip(normals, offsets)):
                if (x, y) not in points:
                    points.append((x, y))
    if not points:
        return []
    cx = sum(p[0] for p in points) / len(points)
    cy = sum(p[1] for p in points) / len(points)
    points.sort(key=lambda p: math.atan2(float(p[1] - cy), float(p[0] - cx)))
    return points


def shoelace_area(points) -> Fraction:
    """Exact polygon area from ordered rational vertices."""
    total = Fraction(0)
    for (x1, y1), (x2, y2) in zip(points, points[1:] + points[:1]):
        total += Fraction(x1) * Fraction(y2) - Fraction(x2) * Fraction(y1)
    return abs(total) / 2


def polygon_perimeter(points) -> float:
    """Edge-length sum of an ordered polygon (floats are fine here)."""
    total = 0.0
    for (x1, y1), (x2, y2) in zip(points, points[1:] + points[:1]):
        total += math.hypot(float(x2 - x1), float(y2 - y1))
    return total


def monte_carlo_volume(contains, lo, hi, n_points: int, seed: int):
    """Rejection-sampling volume with its 3-sigma radius.

    ``contains`` maps an (m, d) array to a boolean mask; ``lo``/``hi``
    bound the sampling box.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(n_points, lo.size))
    frac = float(np.asarray(contains(pts), dtype=bool).mean())
    box = float(np.prod(hi - lo))
    sigma = box * math.sqrt(max(frac * (1.0 - frac), 1e-12) / n_points)
    return frac * box, 3.0 * sigma


# ---------------------------------------------------------------------------
# lattice-and-shape counting oracles
# ---------------------------------------------------------------------------


def box_edge_count(d: int, side: int) -> int:
    """Edges of the side-``side`` grid graph: per axis, side^(d-1)(side-1)."""
    return d * side ** (d - 1) * (side - 1)


def square_cylinder_membership(center, normal, side: float, height, points):
    """Point-in-cylinder test for a square-base cylinder in the plane.

    The base frame is the 90-degree rotation of the unit normal, which
    is unique up to sign in d=2, so membership needs no shared frame
    convention with the library: |axial| <= height and |transverse| <=
    side/2, with a 1e-9 snap.
    """
    c = np.asarray(center, dtype=float)
    v = np.asarray(normal, dtype=float)
    w = np.array([-v[1], v[0]])
    rel = np.asarray(points, dtype=float) - c
    t = rel @ v
    s = rel @ w
    return (np.abs(t) <= float(height) + 1e-9) & (np.abs(s) <= side / 2 + 1e-9)


def count_box_raster(n: int, shift, lo, hi) -> int:
    """Exact tie-inclusive lattice count for an axis-aligned box raster.

    Counts integer points z with lo_i <= z_i/n - shift_i <= hi_i per
    axis (boundary ties included) in exact rationals, then multiplies
    the per-axis counts.  ``shift`` must be rational.
    """
    total = 1
    for s, a, b in zip(shift, lo, hi):
        low = Fraction(n) * (Fraction(a) + Fraction(s))
        high = Fraction(n) * (Fraction(b) + Fraction(s))
        total *= math.floor(high) - math.ceil(low) + 1
    return total


def perimeter_by_rolling(mask: np.ndarray) -> int:
    """Exposed unit faces of a voxel mask, via shifted comparisons.

    For each axis and orientation, a cell contributes a face when its
    neighbor in that direction is outside the array or unoccupied.
    """
    mask = np.asarray(mask, dtype=bool)
    total = 0
    for axis in range(mask.ndim):
        for sign in (-1, 1):
            shifted = np.roll(mask, sign, axis=axis)
            # Rolling wraps around; the wrapped slab must read as empty.
            edge = [slice(None)] * mask.ndim
            edge[axis] = 0 if sign == 1 else -1
            shifted[tuple(edge)] = False
            total += int((mask & ~shifted).sum())
    return total


def binomial_sd(n_trials: int, p: float) -> float:
    """Standard deviation of a frequency of ``n_trials`` Bernoulli(p)."""
    return math.sqrt(p * (1.0 - p) / n_trials)
