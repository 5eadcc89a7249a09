"""Anchored boundary-to-volume optimization on sampled bond configurations.

Four solvers for the same objective — minimize ``|open edge boundary| /
|vertex count|`` over open-connected vertex sets that contain the origin
and respect a volume cap — plus a geometric certificate:

* :func:`brute_force_phi` enumerates every candidate set (small caps only)
  and is the exactness oracle for everything else.
* :func:`parametric_phi` sweeps a Lagrangian relaxation with exact
  rational breakpoints, solving each relaxed problem as an integer
  max-flow / min-cut.
* :func:`local_search_refine` polishes any candidate by deterministic
  simulated annealing over add/remove moves.
* :func:`construct_polytope_candidate` builds an enclosing cutset from
  per-face cylinder min-cuts bridged near face junctions, harvests the
  enclosed origin component, and certifies its boundary against the open
  edges of the cutset.
* :func:`phi_pipeline` runs the solvers together and reports the best
  candidate with full provenance.

All ratio comparisons cross-multiply integers; no float round-off enters
any optimality decision.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, maximum_flow

from .clusters import (
    infinite_cluster_proxy,
    label_clusters,
    open_adjacency,
    open_edge_boundary,
)
from .errors import (
    CapacityError,
    ConditioningError,
    ConfigError,
    ConstructionFailedError,
    GeometryError,
)
from .flows import CylinderSpec, _orthonormal_frame, tau
from .geometry import Polytope
from .lattice import BondConfiguration
from .rng import mix_seed, uniforms_at
from .subgraphs import AnchoredSubgraph, RatioResult, make_anchored_subgraph

__all__ = [
    "ENUMERATION_BUDGET",
    "AnnealSchedule",
    "SweepPoint",
    "ParametricSolution",
    "LocalSearchResult",
    "CutsetConstruction",
    "PipelineResult",
    "brute_force_phi",
    "parametric_phi",
    "local_search_refine",
    "construct_polytope_candidate",
    "phi_pipeline",
]

# Hard cap on enumerated sets before brute force refuses to continue.
ENUMERATION_BUDGET = 5_000_000

# Upper bound on sweep slopes: growing a set by one vertex changes the
# boundary by at most the vertex degree, so no breakpoint exceeds 2d.
def _lambda_ceiling(d: int) -> Fraction:
    return Fraction(2 * d + 1)


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _candidate_region(config: BondConfiguration) -> np.ndarray:
    """Vertices eligible for anchored sets: origin cluster ∩ analysis region.

    The spanning proxy keeps boundary counts meaningful (the cluster
    continues past the analysis region, so every candidate keeps at least
    one outgoing open edge) and the analysis restriction keeps those
    counts exact.  An origin that fails the proxy test is a rejected
    sample, signalled as a conditioning failure.
    """
    box = config.box
    proxy = infinite_cluster_proxy(label_clusters(config), box)
    if not proxy[box.origin_rank]:
        raise ConditioningError(
            "origin is not attached to the spanning-cluster proxy; "
            "sample rejected"
        )
    return proxy & box.analysis_mask


def _boundary_of_mask(config: BondConfiguration, mask: np.ndarray) -> int:
    """|∂°H| without the analysis-region precondition check (internal)."""
    tails, heads, _, _ = config.box.edge_arrays
    return int((config.open_ & (mask[tails] != mask[heads])).sum())


def _prefer(a: tuple, b: tuple) -> bool:
    """True when candidate ``a = (boundary, volume, ranks)`` beats ``b``.

    Smaller exact ratio wins; ties prefer larger volume, then the
    lexicographically smallest sorted vertex tuple.
    """
    lhs = a[0] * b[1]
    rhs = b[0] * a[1]
    if lhs != rhs:
        return lhs < rhs
    if a[1] != b[1]:
        return a[1] > b[1]
    return a[2] < b[2]


def _move_prefer(a: tuple, b: tuple) -> bool:
    """True when move outcome ``a = (boundary, volume, removing, vertex)``
    beats ``b``: smaller ratio, then larger volume, then adds before
    removes, then smaller vertex rank."""
    lhs = a[0] * b[1]
    rhs = b[0] * a[1]
    if lhs != rhs:
        return lhs < rhs
    if a[1] != b[1]:
        return a[1] > b[1]
    return (a[2], a[3]) < (b[2], b[3])


# ---------------------------------------------------------------------------
# exhaustive enumeration
# ---------------------------------------------------------------------------


def brute_force_phi(
    config: BondConfiguration,
    n: int,
    vol_cap: int,
    *,
    budget: int = ENUMERATION_BUDGET,
) -> RatioResult:
    """Exact minimum ratio over all anchored connected sets up to ``vol_cap``.

    Enumerates every open-connected vertex set containing the origin with
    at most ``vol_cap`` vertices, exactly once each, by rooted extension
    with a forbidden-prefix rule (each recursion level may only extend
    with candidates not offered to an earlier sibling).  Boundary counts
    are maintained incrementally and the winner is re-verified against an
    independent recount.
    """
    if vol_cap < 1:
        raise ConfigError(f"vol_cap must be at least 1, got {vol_cap}")
    if vol_cap > 12:
        raise CapacityError(
            f"exhaustive enumeration is budgeted for vol_cap <= 12, got {vol_cap}"
        )
    box = config.box
    region = _candidate_region(config)
    origin = box.origin_rank
    adj = open_adjacency(config)
    deg_open = np.diff(adj.indptr)

    nbr_cache: dict[int, list[int]] = {}

    def region_neighbors(v: int) -> list[int]:
        got = nbr_cache.get(v)
        if got is None:
            lo, hi = adj.indptr[v], adj.indptr[v + 1]
            got = [int(w) for w in adj.indices[lo:hi] if region[w]]
            nbr_cache[v] = got
        return got

    S: set[int] = {origin}
    best: tuple | None = None
    visited = 0

    def report(b: int) -> None:
        nonlocal best, visited
        visited += 1
        if visited > budget:
            raise CapacityError(
                f"enumeration budget of {budget} candidate sets exhausted"
            )
        cand = (b, len(S), tuple(sorted(S)))
        if best is None or _prefer(cand, best):
            best = cand

    def extend(ext: list[int], seen: set[int], b: int) -> None:
        for idx, v in enumerate(ext):
            k_in = sum(1 for u in region_neighbors(v) if u in S)
            b2 = b + int(deg_open[v]) - 2 * k_in
            S.add(v)
            report(b2)
            if len(S) < vol_cap:
                fresh = [w for w in region_neighbors(v) if w not in seen]
                seen.update(fresh)
                extend(ext[idx + 1 :] + fresh, seen, b2)
                seen.difference_update(fresh)
            S.discard(v)

    b0 = int(deg_open[origin])
    report(b0)
    if vol_cap > 1:
        ext0 = sorted(region_neighbors(origin))
        extend(ext0, {origin, *ext0}, b0)

    assert best is not None
    mask = np.zeros(box.n_vertices, dtype=bool)
    mask[list(best[2])] = True
    recount = open_edge_boundary(mask, config)
    if recount != best[0]:
        raise GeometryError(
            f"incremental boundary {best[0]} disagrees with recount {recount}"
        )
    return RatioResult(boundary=best[0], volume=best[1], kind="exact-oracle", n=n)


# ---------------------------------------------------------------------------
# parametric sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    """One relaxed solve: objective ``g(λ) = min |∂°H| − λ|H|`` and extremes."""

    lam: Fraction
    objective: Fraction
    min_volume: int
    min_boundary: int
    max_volume: int
    max_boundary: int


@dataclass(frozen=True)
class ParametricSolution:
    """Best candidate of the sweep plus every solve and repair performed."""

    result: RatioResult
    subgraph: AnchoredSubgraph
    sweep: tuple[SweepPoint, ...]
    candidates: tuple[RatioResult, ...]
    repairs: tuple[dict, ...]
    solve_count: int
    truncated: bool


class _RelaxedNetwork:
    """Flow network for ``min over anchored H of |∂°H| − λ|H|``.

    Writing the objective as ``|∂°H| + λ|candidates ∖ H|`` (up to the
    constant ``λ·M``) makes every term a cut capacity: source→vertex arcs
    of weight λ pay for exclusion, vertex→sink arcs carry the open edges
    leaving the candidate region, and internal open edges carry weight 1.
    Rational ``λ = num/den`` is handled exactly by scaling all capacities
    by ``den``.
    """

    def __init__(self, config: BondConfiguration, region: np.ndarray) -> None:
        box = config.box
        self.config = config
        self.box = box
        self.ranks = np.flatnonzero(region)
        self.m_total = int(self.ranks.size)
        local = np.full(box.n_vertices, -1, dtype=np.int64)
        local[self.ranks] = np.arange(self.m_total)
        self.local = local
        self.origin_local = int(local[box.origin_rank])

        tails, heads, _, _ = box.edge_arrays
        in_region_t = region[tails]
        in_region_h = region[heads]
        internal = config.open_ & in_region_t & in_region_h
        it = local[tails[internal]]
        ih = local[heads[internal]]

        crossing = config.open_ & (in_region_t ^ in_region_h)
        bout = np.zeros(self.m_total, dtype=np.int64)
        ct = tails[crossing]
        ch = heads[crossing]
        t_side = region[ct]
        np.add.at(bout, local[ct[t_side]], 1)
        np.add.at(bout, local[ch[~t_side]], 1)
        self.bout = bout
        self.bout_total = int(bout.sum())

        src = self.m_total
        snk = self.m_total + 1
        self.src, self.snk = src, snk
        lam_targets = np.array(
            [v for v in range(self.m_total) if v != self.origin_local],
            dtype=np.int64,
        )
        sink_sources = np.flatnonzero(bout > 0)

        rows = [it, ih, np.full(lam_targets.size, src, dtype=np.int64), sink_sources]
        cols = [ih, it, lam_targets, np.full(sink_sources.size, snk, dtype=np.int64)]
        self.rows = np.concatenate(
            rows + [np.array([src], dtype=np.int64)]
        )
        self.cols = np.concatenate(
            cols + [np.array([self.origin_local], dtype=np.int64)]
        )
        den_part = np.concatenate(
            [
                np.ones(it.size, dtype=np.int64),
                np.ones(ih.size, dtype=np.int64),
                np.zeros(lam_targets.size, dtype=np.int64),
                bout[sink_sources],
                np.zeros(1, dtype=np.int64),
            ]
        )
        num_part = np.concatenate(
            [
                np.zeros(2 * it.size, dtype=np.int64),
                np.ones(lam_targets.size, dtype=np.int64),
                np.zeros(sink_sources.size, dtype=np.int64),
                np.zeros(1, dtype=np.int64),
            ]
        )
        self.den_part = den_part
        self.num_part = num_part
        self.anchor_index = self.rows.size - 1

    def solve(self, lam: Fraction) -> SweepPoint:
        num, den = lam.numerator, lam.denominator
        big = den * self.bout_total + num * self.m_total + 1
        if big >= 2**30:
            raise CapacityError(
                "parametric capacities exceed the 32-bit solver range; "
                "shrink the box or the volume cap"
            )
        caps = den * self.den_part + num * self.num_part
        caps[self.anchor_index] = big
        graph = csr_matrix(
            (caps.astype(np.int32), (self.rows, self.cols)),
            shape=(self.m_total + 2, self.m_total + 2),
        )
        res = maximum_flow(graph, self.src, self.snk, method="dinic")
        residual = graph - res.flow

        fwd = breadth_first_order(
            (residual > 0), self.src, directed=True, return_predecessors=False
        )
        min_local = fwd[fwd < self.m_total]
        bwd = breadth_first_order(
            (residual.T > 0), self.snk, directed=True, return_predecessors=False
        )
        to_sink = np.zeros(self.m_total + 2, dtype=bool)
        to_sink[bwd] = True
        max_local = np.flatnonzero(~to_sink[: self.m_total])

        point = {}
        for tag, sel in (("min", min_local), ("max", max_local)):
            mask = np.zeros(self.box.n_vertices, dtype=bool)
            mask[self.ranks[sel]] = True
            m = int(sel.size)
            b = _boundary_of_mask(self.config, mask)
            expect = den * b + num * (self.m_total - m)
            if expect != int(res.flow_value):
                raise GeometryError(
                    "parametric flow/cut duality broken: cut value "
                    f"{res.flow_value} vs recount {expect} at lam={lam}"
                )
            point[tag] = (m, b, mask)
        g = Fraction(int(res.flow_value) - num * self.m_total, den)
        self._last_masks = (point["min"][2], point["max"][2])
        return SweepPoint(
            lam=lam,
            objective=g,
            min_volume=point["min"][0],
            min_boundary=point["min"][1],
            max_volume=point["max"][0],
            max_boundary=point["max"][1],
        )


def _greedy_completion(
    config: BondConfiguration,
    region: np.ndarray,
    vol_cap: int,
    adj,
    deg_open: np.ndarray,
) -> tuple[int, int, np.ndarray]:
    """Best prefix of the exact-ratio greedy growth from the singleton.

    Grows an anchored set one vertex at a time, always adding the
    frontier vertex with the fewest new boundary edges (ties prefer more
    shared edges implicitly, then smaller Chebyshev distance from the
    origin to keep the blob compact, then smaller rank).  Returns
    ``(boundary, volume, mask)`` of the prefix with the best exact ratio.
    The sweep's convex-hull view cannot see volume scales in concave
    stretches of the boundary-vs-volume curve; this completion supplies
    candidates at every volume up to the cap.
    """
    box = config.box
    origin = box.origin_rank
    cheb = np.abs(box.vertex_coords(np.arange(box.n_vertices))).max(axis=1)

    def neighbors(v: int) -> np.ndarray:
        return adj.indices[adj.indptr[v] : adj.indptr[v + 1]]

    S = {origin}
    cnt: dict[int, int] = {}
    for w in neighbors(origin):
        wi = int(w)
        if region[wi]:
            cnt[wi] = 1
    b = int(deg_open[origin])
    m = 1
    order = [origin]
    best = (b, m)
    best_len = 1
    while m < vol_cap and cnt:
        pick = min(
            cnt,
            key=lambda w: (int(deg_open[w]) - 2 * cnt[w], int(cheb[w]), w),
        )
        b += int(deg_open[pick]) - 2 * cnt[pick]
        m += 1
        S.add(pick)
        order.append(pick)
        del cnt[pick]
        for w in neighbors(pick):
            wi = int(w)
            if wi not in S and region[wi]:
                cnt[wi] = cnt.get(wi, 0) + 1
        if b * best[1] < best[0] * m or (b * best[1] == best[0] * m and m > best[1]):
            best = (b, m)
            best_len = m
    mask = np.zeros(box.n_vertices, dtype=bool)
    mask[order[:best_len]] = True
    return best[0], best[1], mask


def parametric_phi(
    config: BondConfiguration,
    n: int,
    vol_cap: int,
    *,
    max_solves: int = 80,
) -> ParametricSolution:
    """Lagrangian sweep for the anchored ratio with exact breakpoints.

    Recursively bisects the slope interval: two solved multipliers whose
    extreme minimizers disagree in volume get a probe at the exact
    rational crossing slope of their objective lines, until every facet
    of the lower objective envelope is certified.  Every minimizer met
    along the way (volume-minimal and volume-maximal at each multiplier)
    becomes a candidate; candidates are repaired to the origin's open
    component, filtered by ``vol_cap``, and ranked exactly.  The
    singleton origin set always participates as the fallback, and a
    deterministic greedy completion contributes one candidate per run so
    volume scales inside concave stretches of the boundary-vs-volume
    curve (invisible to any convex sweep) are still represented.
    """
    if vol_cap < 1:
        raise ConfigError(f"vol_cap must be at least 1, got {vol_cap}")
    box = config.box
    region = _candidate_region(config)
    net = _RelaxedNetwork(config, region)

    sweep: list[SweepPoint] = []
    pool: dict[bytes, tuple[int, int, np.ndarray]] = {}
    state = {"solves": 0, "truncated": False}

    def solve(lam: Fraction) -> SweepPoint:
        state["solves"] += 1
        pt = net.solve(lam)
        sweep.append(pt)
        for mask, m, b in (
            (net._last_masks[0], pt.min_volume, pt.min_boundary),
            (net._last_masks[1], pt.max_volume, pt.max_boundary),
        ):
            key = np.packbits(mask).tobytes()
            if key not in pool:
                pool[key] = (b, m, mask)
        return pt

    lo = solve(Fraction(0))
    hi = solve(_lambda_ceiling(box.d))

    def recurse(la: Fraction, ma: int, ba: int, lb: Fraction, mb: int, bb: int) -> None:
        if mb <= ma:
            return
        if state["solves"] >= max_solves:
            state["truncated"] = True
            return
        lam = Fraction(bb - ba, mb - ma)
        if not (la < lam < lb):
            return
        pt = solve(lam)
        g_line = Fraction(ba) - lam * ma
        if pt.objective == g_line:
            return
        recurse(la, ma, ba, lam, pt.min_volume, pt.min_boundary)
        recurse(lam, pt.max_volume, pt.max_boundary, lb, mb, bb)

    recurse(
        lo.lam,
        lo.max_volume,
        lo.max_boundary,
        hi.lam,
        hi.min_volume,
        hi.min_boundary,
    )

    # Repair each pooled set to the origin's open component and filter.
    adj = open_adjacency(config)
    origin = box.origin_rank
    repairs: list[dict] = []
    candidates: list[tuple[tuple, np.ndarray]] = []
    seen_repaired: set[bytes] = set()

    def add_candidate(mask: np.ndarray) -> None:
        key = np.packbits(mask).tobytes()
        if key in seen_repaired:
            return
        seen_repaired.add(key)
        m = int(mask.sum())
        if m > vol_cap:
            return
        b = _boundary_of_mask(config, mask)
        ranks = tuple(int(r) for r in np.flatnonzero(mask))
        candidates.append(((b, m, ranks), mask))

    for b_raw, m_raw, mask in pool.values():
        if not mask[origin]:
            continue  # relaxation may return the empty side at λ=0
        idx = np.flatnonzero(mask)
        sub = adj[idx][:, idx]
        _, comp = connected_components(sub, directed=False)
        origin_pos = int(np.searchsorted(idx, origin))
        keep = idx[comp == comp[origin_pos]]
        repaired = np.zeros(box.n_vertices, dtype=bool)
        repaired[keep] = True
        if keep.size < idx.size:
            repairs.append(
                {
                    "volume_before": m_raw,
                    "boundary_before": b_raw,
                    "volume_after": int(keep.size),
                    "boundary_after": _boundary_of_mask(config, repaired),
                }
            )
        add_candidate(repaired)

    singleton = np.zeros(box.n_vertices, dtype=bool)
    singleton[origin] = True
    add_candidate(singleton)

    deg_open = np.diff(adj.indptr)
    _, _, greedy_mask = _greedy_completion(config, region, vol_cap, adj, deg_open)
    add_candidate(greedy_mask)

    best_key, best_mask = None, None
    for key, mask in candidates:
        if best_key is None or _prefer(key, best_key):
            best_key, best_mask = key, mask
    assert best_key is not None and best_mask is not None

    subgraph = make_anchored_subgraph(config, best_mask)
    result = RatioResult.from_subgraph(subgraph, kind="parametric", n=n)
    if result.boundary != best_key[0]:
        raise GeometryError("boundary recount mismatch in parametric winner")
    ratio_results = tuple(
        RatioResult(boundary=k[0], volume=k[1], kind="parametric", n=n)
        for k, _ in candidates
    )
    return ParametricSolution(
        result=result,
        subgraph=subgraph,
        sweep=tuple(sorted(sweep, key=lambda pt: pt.lam)),
        candidates=ratio_results,
        repairs=tuple(repairs),
        solve_count=state["solves"],
        truncated=state["truncated"],
    )


# ---------------------------------------------------------------------------
# local search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnnealSchedule:
    """Deterministic annealing plan: step count, temperature ramp, seed."""

    steps: int = 400
    t_start: float = 1.0
    t_end: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ConfigError(f"steps must be nonnegative, got {self.steps}")
        if self.t_start <= 0 or self.t_end <= 0:
            raise ConfigError("temperatures must be positive")

    def temperature(self, step: int) -> float:
        if self.steps <= 1:
            return self.t_start
        frac = step / (self.steps - 1)
        return float(self.t_start * (self.t_end / self.t_start) ** frac)


@dataclass(frozen=True)
class LocalSearchResult:
    """Refined candidate plus acceptance accounting."""

    result: RatioResult
    subgraph: AnchoredSubgraph
    proposed: int
    accepted: int
    improved: bool


def local_search_refine(
    candidate: AnchoredSubgraph,
    config: BondConfiguration,
    vol_cap: int,
    schedule: AnnealSchedule | None = None,
    *,
    n: int,
) -> LocalSearchResult:
    """Anneal add/remove moves around ``candidate``; never worse than input.

    Moves either add a vertex that is open-adjacent to the current set
    (inside the candidate region, respecting ``vol_cap``) or remove a
    non-anchor vertex whose removal keeps the set open-connected.
    Downhill-or-equal moves are always accepted, uphill moves pass a
    Metropolis test at the scheduled temperature.  After the scheduled
    steps a zero-temperature tail applies the single best improving move
    (same move set) repeatedly until none exists, and the best set ever
    visited (including the input) is returned.  All randomness comes from
    the schedule seed via the counter-based generator, so reruns are
    bit-identical.
    """
    if schedule is None:
        schedule = AnnealSchedule()
    if candidate.config is not config and candidate.config_id != config.content_hash():
        raise ConfigError("candidate belongs to a different configuration")
    if candidate.volume > vol_cap:
        raise ConfigError(
            f"candidate volume {candidate.volume} exceeds vol_cap {vol_cap}"
        )
    box = config.box
    region = _candidate_region(config)
    origin = box.origin_rank
    adj = open_adjacency(config)
    deg_open = np.diff(adj.indptr)

    def neighbors(v: int) -> np.ndarray:
        return adj.indices[adj.indptr[v] : adj.indptr[v + 1]]

    S = {int(v) for v in candidate.vertices}
    m = candidate.volume
    b = candidate.boundary
    frontier: set[int] = set()
    for v in S:
        for w in neighbors(v):
            wi = int(w)
            if wi not in S and region[wi]:
                frontier.add(wi)

    best = (b, m, tuple(sorted(S)))
    key = mix_seed(schedule.seed, "anneal")
    proposed = accepted = 0

    def consider(b: int, m: int, S: set[int]) -> None:
        """Fold (b, m, S) into ``best``, sorting S only when it can win."""
        nonlocal best
        lhs, rhs = b * best[1], best[0] * m
        if lhs > rhs or (lhs == rhs and m < best[1]):
            return
        if lhs == rhs and m == best[1]:
            ranks = tuple(sorted(S))
            if ranks < best[2]:
                best = (b, m, ranks)
            return
        best = (b, m, tuple(sorted(S)))

    def connected_without(v: int) -> bool:
        if m <= 1:
            return False
        start = origin
        stack = [start]
        seen = {start, v}
        reached = 1
        while stack:
            u = stack.pop()
            for w in neighbors(u):
                wi = int(w)
                if wi in S and wi not in seen:
                    seen.add(wi)
                    reached += 1
                    stack.append(wi)
        return reached == m - 1

    for step in range(schedule.steps):
        adds = sorted(frontier) if m < vol_cap else []
        rems = sorted(S - {origin})
        total = len(adds) + len(rems)
        if total == 0:
            break
        u_move = uniforms_at(key, np.array([2 * step], dtype=np.uint64))[0]
        idx = min(int(u_move * total), total - 1)
        proposed += 1
        if idx < len(adds):
            v = adds[idx]
            k_in = sum(1 for w in neighbors(v) if int(w) in S)
            b2 = b + int(deg_open[v]) - 2 * k_in
            m2 = m + 1
            removing = False
        else:
            v = rems[idx - len(adds)]
            if not connected_without(v):
                continue  # articulation vertex: move is a deterministic no-op
            k_in = sum(1 for w in neighbors(v) if int(w) in S)
            b2 = b + 2 * k_in - int(deg_open[v])
            m2 = m - 1
            removing = True

        if b2 * m <= b * m2:
            take = True
        else:
            t_cur = schedule.temperature(step)
            delta = b2 / m2 - b / m
            u_acc = uniforms_at(key, np.array([2 * step + 1], dtype=np.uint64))[0]
            take = bool(u_acc < np.exp(-delta / t_cur))
        if not take:
            continue
        accepted += 1
        if removing:
            S.discard(v)
            if any(int(w) in S for w in neighbors(v)):
                frontier.add(v)
            for w in neighbors(v):
                wi = int(w)
                if wi in frontier and not any(int(u) in S for u in neighbors(wi)):
                    frontier.discard(wi)
        else:
            S.add(v)
            frontier.discard(v)
            for w in neighbors(v):
                wi = int(w)
                if wi not in S and region[wi]:
                    frontier.add(wi)
        b, m = b2, m2
        consider(b, m, S)

    # Zero-temperature tail, iterated to a fixpoint of three deterministic
    # passes over the same move set: (1) steepest single-move descent,
    # (2) a greedy growth path up to the volume cap, (3) a greedy shrink
    # path down to the anchor; every visited set updates ``best``.
    s_ind = np.zeros(box.n_vertices, dtype=np.int32)

    def restore() -> tuple[set[int], int, int, set[int]]:
        S = set(best[2])
        s_ind[:] = 0
        s_ind[list(S)] = 1
        fr: set[int] = set()
        for v in S:
            for w in neighbors(v):
                wi = int(w)
                if wi not in S and region[wi]:
                    fr.add(wi)
        return S, best[0], best[1], fr

    def apply_move(
        S: set[int], frontier: set[int], v: int, removing: bool
    ) -> None:
        s_ind[v] = 0 if removing else 1
        if removing:
            S.discard(v)
            if any(int(w) in S for w in neighbors(v)):
                frontier.add(v)
            for w in neighbors(v):
                wi = int(w)
                if wi in frontier and not any(int(u) in S for u in neighbors(wi)):
                    frontier.discard(wi)
        else:
            S.add(v)
            frontier.discard(v)
            for w in neighbors(v):
                wi = int(w)
                if wi not in S and region[wi]:
                    frontier.add(wi)

    def add_outcomes(frontier: set[int]) -> tuple[np.ndarray, np.ndarray]:
        """Sorted frontier vertices and each one's boundary after adding."""
        arr = np.fromiter(sorted(frontier), dtype=np.int64, count=len(frontier))
        k_in = adj[arr].dot(s_ind)
        return arr, deg_open[arr].astype(np.int64) - 2 * k_in

    def remove_outcomes(S: set[int]) -> tuple[np.ndarray, np.ndarray]:
        """Sorted non-anchor members and each one's boundary after removal."""
        arr = np.fromiter(sorted(S - {origin}), dtype=np.int64, count=len(S) - 1)
        k_in = adj[arr].dot(s_ind)
        return arr, 2 * k_in - deg_open[arr].astype(np.int64)

    for _ in range(8):
        before = best

        # (1) steepest descent to single-move optimality
        S, b, m, frontier = restore()
        for _ in range(max(64, 4 * vol_cap)):
            best_move: tuple[int, int, bool, int] | None = None
            if m < vol_cap and frontier:
                arr, delta = add_outcomes(frontier)
                i = int(np.lexsort((arr, delta))[0])
                best_move = (b + int(delta[i]), m + 1, False, int(arr[i]))
            if m > 1:
                arr, delta = remove_outcomes(S)
                order = np.lexsort((arr, delta))
                for i in order:
                    cand_m = (b + int(delta[i]), m - 1, True, int(arr[i]))
                    if best_move is not None and not _move_prefer(cand_m, best_move):
                        break  # sorted scan: no later removal can do better
                    if connected_without(int(arr[i])):
                        best_move = cand_m
                        break
            if best_move is None or best_move[0] * m >= b * best_move[1]:
                break  # no strictly better neighbor: local optimum
            b2, m2, removing, v = best_move
            proposed += 1
            accepted += 1
            apply_move(S, frontier, v, removing)
            b, m = b2, m2
            consider(b, m, S)

        # (2) greedy growth path: cheapest boundary increment first
        S, b, m, frontier = restore()
        while m < vol_cap and frontier:
            arr, delta = add_outcomes(frontier)
            i = int(np.lexsort((arr, delta))[0])
            b += int(delta[i])
            apply_move(S, frontier, int(arr[i]), removing=False)
            m += 1
            consider(b, m, S)

        # (3) greedy shrink path: cheapest boundary decrement first
        S, b, m, frontier = restore()
        while m > 1:
            arr, delta = remove_outcomes(S)
            picked = -1
            for i in np.lexsort((arr, delta)):
                if connected_without(int(arr[i])):
                    picked = int(i)
                    break
            if picked < 0:
                break
            b += int(delta[picked])
            apply_move(S, frontier, int(arr[picked]), removing=True)
            m -= 1
            consider(b, m, S)

        if best == before:
            break

    mask = np.zeros(box.n_vertices, dtype=bool)
    mask[list(best[2])] = True
    subgraph = make_anchored_subgraph(config, mask)
    result = RatioResult.from_subgraph(subgraph, kind="local-search", n=n)
    if result.boundary != best[0] or result.volume != best[1]:
        raise GeometryError("annealing bookkeeping disagrees with recount")
    improved = _prefer(
        (result.boundary, result.volume, best[2]),
        (candidate.boundary, candidate.volume, tuple(int(v) for v in candidate.vertices)),
    )
    return LocalSearchResult(
        result=result,
        subgraph=subgraph,
        proposed=proposed,
        accepted=accepted,
        improved=improved,
    )


# ---------------------------------------------------------------------------
# cutset construction around a convex shape
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CutsetConstruction:
    """Assembled enclosing cutset and the harvested origin component.

    ``face_cutsets`` holds the open min-cut edge positions of each
    retained face cylinder; ``bridge_edges`` the (face_i, face_j,
    positions) shells near face junctions; ``gamma_positions`` their
    deduplicated union.  ``subgraph`` is the origin's open component
    after deleting the cutset, and ``gamma_open_count`` bounds its open
    edge boundary from above (verified at construction).
    """

    polytope: Polytope
    delta: float
    n: int
    zeta: int
    face_indices: tuple[int, ...]
    face_cutsets: tuple[np.ndarray, ...] = field(repr=False)
    bridge_edges: tuple[tuple[int, int, np.ndarray], ...] = field(repr=False)
    gamma_positions: np.ndarray = field(repr=False)
    gamma_open_count: int
    subgraph: AnchoredSubgraph
    separation_verified: bool
    stats: dict = field(repr=False)

    def gamma_edge_table(self, config: BondConfiguration) -> str:
        """CSV edge list of the cutset for plotting (one row per source)."""
        box = config.box
        tails, heads, axes, _ = box.edge_arrays
        cols = ["source", "position", "axis"]
        cols += [f"tail{i}" for i in range(box.d)]
        cols += [f"head{i}" for i in range(box.d)]
        cols += ["open"]
        lines = [",".join(cols)]

        def emit(source: str, positions: np.ndarray) -> None:
            for pos in positions:
                t = box.vertex_coords(np.array([tails[pos]]))[0]
                h = box.vertex_coords(np.array([heads[pos]]))[0]
                row = [source, str(int(pos)), str(int(axes[pos]))]
                row += [str(int(x)) for x in t]
                row += [str(int(x)) for x in h]
                row += ["1" if config.open_[pos] else "0"]
                lines.append(",".join(row))

        for i, cut in zip(self.face_indices, self.face_cutsets):
            emit(f"face:{i}", cut)
        for i, j, positions in self.bridge_edges:
            emit(f"bridge:{i}-{j}", positions)
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "format": "percoshape-cutset-v1",
            "delta": self.delta,
            "n": self.n,
            "zeta": self.zeta,
            "polytope": json.loads(self.polytope.to_json()),
            "face_indices": list(self.face_indices),
            "face_cut_sizes": [int(c.size) for c in self.face_cutsets],
            "bridge_sizes": [
                {"faces": [i, j], "edges": int(e.size)}
                for i, j, e in self.bridge_edges
            ],
            "gamma_edges": int(self.gamma_positions.size),
            "gamma_open_edges": self.gamma_open_count,
            "harvest_volume": self.subgraph.volume,
            "harvest_boundary": self.subgraph.boundary,
            "separation_verified": self.separation_verified,
            "stats": {
                k: v for k, v in self.stats.items() if isinstance(v, (int, float, str))
            },
        }
        return json.dumps(payload, sort_keys=True)


def _face_cylinder(face, delta: float, n: int, d: int) -> CylinderSpec:
    """Probe cylinder over one face, pushed outward by ``delta``.

    The spec's normal points *inward* so the flow source sits on the half
    toward the anchor: the recovered min cut then hugs the shape, which
    keeps the harvested component tight.
    """
    v = np.asarray(face.normal, dtype=float)
    centroid = np.asarray(face.centroid, dtype=float)
    center = (centroid + delta * v) * n
    inward = -v
    if d == 2:
        return CylinderSpec(
            d=2,
            base_center=tuple(center),
            base_sides=(float(face.measure * n),),
            normal=tuple(inward),
            height=float(delta * n),
            n=n,
        )
    frame = _orthonormal_frame(inward)
    verts = (np.asarray(face.vertices, dtype=float) + delta * v) * n
    poly = (verts - center) @ frame.T
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    return CylinderSpec(
        d=3,
        base_center=tuple(center),
        base_sides=tuple(float(s) for s in (hi - lo)),
        normal=tuple(inward),
        height=float(delta * n),
        n=n,
        base_polygon=tuple(tuple(float(x) for x in row) for row in poly),
    )


def _shared_face_geometry(
    fa, fb, d: int, tol: float
) -> np.ndarray | None:
    """Common vertices of two faces: junction point (d=2) or segment (d=3)."""
    va = np.asarray(fa.vertices, dtype=float)
    vb = np.asarray(fb.vertices, dtype=float)
    dist = np.linalg.norm(va[:, None, :] - vb[None, :, :], axis=2)
    shared = va[(dist < tol).any(axis=1)]
    if d == 2:
        return shared[:1] if shared.shape[0] >= 1 else None
    if shared.shape[0] >= 2:
        return shared[:2]
    return None


def _bridge_points(
    box, polytope: Polytope, geom: np.ndarray, n: int, outer: float, inner: float
) -> np.ndarray:
    """Lattice ranks in the spherical shell around scaled junction geometry.

    The shell is ``{inner <= dist < outer}`` around ``n * geom`` (point or
    segment), intersected with the complement of the scaled shape.
    """
    g = geom * n
    center = g.mean(axis=0)
    half = np.linalg.norm(g[-1] - g[0]) / 2.0 + outer + 1.0
    L = box.half_width
    ranges = []
    for a in range(box.d):
        lo = max(int(np.ceil(center[a] - half)), -L)
        hi = min(int(np.floor(center[a] + half)), L)
        if lo > hi:
            return np.empty(0, dtype=np.int64)
        ranges.append(np.arange(lo, hi + 1))
    pts = np.stack(
        [g2.ravel() for g2 in np.meshgrid(*ranges, indexing="ij")], axis=1
    ).astype(float)
    if g.shape[0] == 1:
        dist = np.linalg.norm(pts - g[0], axis=1)
    else:
        a, bseg = g[0], g[-1]
        u = bseg - a
        denom = float(u @ u)
        t = np.clip((pts - a) @ u / denom, 0.0, 1.0) if denom > 0 else np.zeros(len(pts))
        dist = np.linalg.norm(pts - (a + t[:, None] * u), axis=1)
    sel = (dist < outer) & (dist >= inner)
    normals = np.asarray(polytope.normals, dtype=float)
    offsets = np.asarray(polytope.offsets, dtype=float)
    inside = ((pts / n) @ normals.T <= offsets + 1e-9).all(axis=1)
    sel &= ~inside
    if not sel.any():
        return np.empty(0, dtype=np.int64)
    return box.vertex_rank(pts[sel].astype(np.int64))


def _edges_within(box, ranks: np.ndarray) -> np.ndarray:
    """Edge positions with both endpoints among ``ranks``."""
    if ranks.size == 0:
        return np.empty(0, dtype=np.int64)
    members = np.zeros(box.n_vertices, dtype=bool)
    members[ranks] = True
    coords = box.vertex_coords(ranks)
    lookup = box.edge_position_lookup
    out = []
    for a in range(box.d):
        ok = coords[:, a] < box.half_width
        nbr = coords[ok].copy()
        nbr[:, a] += 1
        nbr_rank = box.vertex_rank(nbr)
        both = members[nbr_rank]
        out.append(lookup[a, ranks[ok][both]])
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def construction_reach(polytope: Polytope, delta: float | None, n: int) -> float:
    """Sup-norm extent of the scaled shape plus cylinders and bridge collar.

    The analysis half-width must exceed this by at least one lattice
    unit for the enclosure construction to be attempted; use it to size
    simulation boxes before sampling.
    """
    d = polytope.d
    if delta is None:
        delta = 0.1 * polytope.diameter()
    zeta = 4 * d
    reach = float(np.abs(np.asarray(polytope.vertices)).max()) * n + n * delta + zeta + 1
    for i, f in enumerate(polytope.faces):
        if f.measure * float(n) ** (d - 1) < 1.0:
            continue
        lo, hi = _face_cylinder(f, delta, n, d).bounding_box()
        reach = max(reach, float(np.abs(lo).max()), float(np.abs(hi).max()))
    return reach


def construct_polytope_candidate(
    config: BondConfiguration,
    polytope: Polytope,
    delta: float | None,
    n: int,
) -> tuple[CutsetConstruction, RatioResult]:
    """Enclose the scaled shape with per-face min cuts plus junction bridges.

    Each face of the shape, pushed outward by ``delta`` along its normal
    and scaled by ``n``, carries a cylinder min-cut; spherical shells of
    collar width ``zeta = 4d`` around scaled face junctions contribute
    every lattice edge outside the shape as bridge material.  Deleting
    the combined edge set from the open graph and flooding from the
    origin harvests the certified candidate: its open edge boundary can
    only consist of deleted open edges, so ``gamma_open_count`` is a
    certified upper bound.

    Failure modes that reject the sample (conditioning signal): origin
    detached from the spanning proxy, the origin's component escaping the
    enclosure, or any in-shape proxy vertex reaching the analysis
    boundary after deletion.
    """
    started = time.perf_counter()
    box = config.box
    d = box.d
    if polytope.d != d:
        raise ConfigError(f"shape dimension {polytope.d} != lattice dimension {d}")
    if n < 1:
        raise ConfigError(f"n must be at least 1, got {n}")
    origin_point = np.zeros(d)
    if not bool(polytope.contains(origin_point)):
        raise GeometryError("the anchor (origin) must lie inside the shape")
    if delta is None:
        delta = 0.1 * polytope.diameter()
    if delta <= 0:
        raise ConfigError(f"delta must be positive, got {delta}")
    zeta = 4 * d

    labeling = label_clusters(config)
    proxy = infinite_cluster_proxy(labeling, box)
    if not proxy[box.origin_rank]:
        raise ConstructionFailedError(
            "origin is not attached to the spanning-cluster proxy",
            reason="origin-isolated",
        )

    faces = polytope.faces
    retained = [
        i
        for i, f in enumerate(faces)
        if f.measure * float(n) ** (d - 1) >= 1.0
    ]
    if not retained:
        raise GeometryError("every face is degenerate at this lattice scale")

    # The whole construction (cylinders and bridge shells) must stay
    # strictly inside the analysis region for separation to be checkable.
    hw = box.analysis_half_width
    reach = construction_reach(polytope, delta, n)
    cylinders = {i: _face_cylinder(faces[i], delta, n, d) for i in retained}
    if reach > hw - 1:
        raise GeometryError(
            f"scaled shape plus collar reaches {reach:.1f} but the analysis "
            f"region only extends to {hw}; enlarge the box"
        )

    face_cuts: list[np.ndarray] = []
    cut_stats = []
    for i in retained:
        cut = tau(cylinders[i], config)
        face_cuts.append(cut.cut_edge_positions)
        cut_stats.append(cut.capacity)

    scale = max(1.0, float(np.abs(np.asarray(polytope.vertices)).max()))
    bridges: list[tuple[int, int, np.ndarray]] = []
    outer = n * delta + zeta
    inner = n * delta - zeta
    for ii, i in enumerate(retained):
        for j in retained[ii + 1 :]:
            geom = _shared_face_geometry(faces[i], faces[j], d, 1e-7 * scale)
            if geom is None:
                continue
            ranks = _bridge_points(box, polytope, geom, n, outer, inner)
            positions = _edges_within(box, ranks)
            bridges.append((i, j, positions))

    pieces = face_cuts + [e for _, _, e in bridges]
    gamma = (
        np.unique(np.concatenate(pieces))
        if any(p.size for p in pieces)
        else np.empty(0, dtype=np.int64)
    )
    gamma_open = int(config.open_[gamma].sum()) if gamma.size else 0

    open_after = config.open_.copy()
    if gamma.size:
        open_after[gamma] = False
    adj_after = open_adjacency(config, open_mask=open_after)
    _, labels = connected_components(adj_after, directed=False)
    h_mask = labels == labels[box.origin_rank]

    if bool((h_mask & box.analysis_boundary_mask).any()):
        raise ConstructionFailedError(
            "origin component escaped the cutset enclosure",
            reason="origin-cut",
        )
    normals = np.asarray(polytope.normals, dtype=float)
    offsets = np.asarray(polytope.offsets, dtype=float)
    all_coords = box.vertex_coords(np.arange(box.n_vertices))
    in_shape = ((all_coords / n) @ normals.T <= offsets + 1e-9).all(axis=1)
    seeds = in_shape & proxy
    inside_labels = np.unique(labels[seeds])
    boundary_labels = np.unique(labels[box.analysis_boundary_mask])
    if np.intersect1d(inside_labels, boundary_labels).size:
        raise ConstructionFailedError(
            "an enclosed proxy vertex still reaches the analysis boundary",
            reason="separation-failed",
        )

    boundary = open_edge_boundary(h_mask, config)
    if boundary > gamma_open:
        raise GeometryError(
            f"certificate bound violated: boundary {boundary} exceeds "
            f"open cutset size {gamma_open}"
        )
    subgraph = make_anchored_subgraph(config, h_mask)
    result = RatioResult.from_subgraph(subgraph, kind="polytope-certificate", n=n)
    construction = CutsetConstruction(
        polytope=polytope,
        delta=float(delta),
        n=n,
        zeta=zeta,
        face_indices=tuple(retained),
        face_cutsets=tuple(face_cuts),
        bridge_edges=tuple(bridges),
        gamma_positions=gamma,
        gamma_open_count=gamma_open,
        subgraph=subgraph,
        separation_verified=True,
        stats={
            "face_capacities": cut_stats,
            "bridge_edge_counts": [int(e.size) for _, _, e in bridges],
            "gamma_edges": int(gamma.size),
            "gamma_open_edges": gamma_open,
            "harvest_volume": subgraph.volume,
            "harvest_boundary": subgraph.boundary,
            "seconds": time.perf_counter() - started,
        },
    )
    return construction, result


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineResult:
    """Best candidate across solvers plus the provenance of every attempt."""

    best: RatioResult
    best_subgraph: AnchoredSubgraph
    candidates: tuple[RatioResult, ...]
    diagnostics: dict = field(repr=False)


def phi_pipeline(
    config: BondConfiguration,
    n: int,
    *,
    vol_cap: int | None = None,
    schedule: AnnealSchedule | None = None,
    polytope: Polytope | None = None,
    delta: float | None = None,
    max_solves: int = 80,
) -> PipelineResult:
    """Parametric sweep, annealing refinement, optional shape certificate.

    ``vol_cap`` defaults to ``n**d``.  When ``polytope`` is given (e.g. a
    dilated Wulff estimate), the cutset certificate joins the candidate
    pool whenever its harvested volume respects the cap; rejected
    constructions are recorded in the diagnostics rather than raised.
    """
    box = config.box
    if vol_cap is None:
        vol_cap = int(n**box.d)
    para = parametric_phi(config, n, vol_cap, max_solves=max_solves)
    refined = local_search_refine(
        para.subgraph, config, vol_cap, schedule, n=n
    )
    pool: list[tuple[RatioResult, AnchoredSubgraph]] = [
        (para.result, para.subgraph),
        (refined.result, refined.subgraph),
    ]
    diagnostics: dict = {
        "parametric": {
            "solves": para.solve_count,
            "breakpoints": len(para.sweep),
            "candidates": len(para.candidates),
            "repairs": list(para.repairs),
            "truncated": para.truncated,
        },
        "local_search": {
            "proposed": refined.proposed,
            "accepted": refined.accepted,
            "improved": refined.improved,
        },
    }
    if polytope is not None:
        try:
            construction, cert = construct_polytope_candidate(
                config, polytope, delta, n
            )
            info = dict(construction.stats)
            info["separation_verified"] = construction.separation_verified
            if cert.volume <= vol_cap:
                pool.append((cert, construction.subgraph))
            else:
                info["over_volume_cap"] = True
            diagnostics["certificate"] = info
        except ConstructionFailedError as exc:
            diagnostics["certificate"] = {
                "rejected": str(exc),
                "reason": exc.reason,
            }
    best_result, best_sub = pool[0]
    best_key = (
        best_result.boundary,
        best_result.volume,
        tuple(int(v) for v in best_sub.vertices),
    )
    for res, sub in pool[1:]:
        key = (res.boundary, res.volume, tuple(int(v) for v in sub.vertices))
        if _prefer(key, best_key):
            best_result, best_sub, best_key = res, sub, key
    return PipelineResult(
        best=best_result,
        best_subgraph=best_sub,
        candidates=tuple(res for res, _ in pool),
        diagnostics=diagnostics,
    )
