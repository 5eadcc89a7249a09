"""Discrete-to-continuum shape analysis.

Tools for turning an anchored vertex set into a continuum object and
comparing it against a target crystal shape: enclosure hulls (vertices
that cannot reach the region boundary without crossing a given edge
set), decomposition and filling of enclosed holes, voxelized thickenings
with discrete perimeter counts, rasterization of translated convex
shapes, empirical measures, clamped distance-profile test functions,
and a translation search minimizing the symmetric-difference distance.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .clusters import (
    infinite_cluster_proxy,
    label_clusters,
    open_adjacency,
)
from .errors import ConfigError, GeometryError
from .geometry import Polytope, WulffShape
from .lattice import BondConfiguration, BoxSpec
from .subgraphs import AnchoredSubgraph, make_anchored_subgraph

VOXELSET_FORMAT = "percoshape-voxelset-v1"


# ---------------------------------------------------------------------------
# enclosure hulls
# ---------------------------------------------------------------------------


def boundary_edge_positions(
    mask: np.ndarray, config: BondConfiguration, *, open_only: bool = False
) -> np.ndarray:
    """Edge positions with exactly one endpoint inside ``mask``.

    With ``open_only`` the closed boundary edges are dropped, matching
    the open-edge boundary count of the same mask.
    """
    box = config.box
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (box.n_vertices,):
        raise ConfigError(
            f"mask has shape {mask.shape}, expected ({box.n_vertices},)"
        )
    tails, heads, _, _ = box.edge_arrays
    cross = mask[tails] != mask[heads]
    if open_only:
        cross &= config.open_
    return np.flatnonzero(cross)


def hull(
    edge_positions: np.ndarray,
    config: BondConfiguration,
    *,
    traversable: np.ndarray | None = None,
) -> np.ndarray:
    """Vertices whose every path to the region boundary crosses the edge set.

    Walks the lattice graph with the given edges deleted, starting from
    every analysis-boundary vertex, and returns the analysis-region
    vertices that were never reached (boolean mask over vertex ranks).
    ``traversable`` restricts which edges may be walked at all (defaults
    to every lattice edge; pass ``config.open_`` for the open-graph
    variant used to restate cutset separation).
    """
    box = config.box
    keep = (
        np.ones(box.n_edges, dtype=bool)
        if traversable is None
        else np.asarray(traversable, dtype=bool).copy()
    )
    if keep.shape != (box.n_edges,):
        raise ConfigError(
            f"traversable has shape {keep.shape}, expected ({box.n_edges},)"
        )
    positions = np.asarray(edge_positions, dtype=np.int64)
    if positions.size and (
        positions.min() < 0 or positions.max() >= box.n_edges
    ):
        raise ConfigError("edge positions out of range")
    keep[positions] = False
    adj = open_adjacency(config, open_mask=keep)
    _, labels = connected_components(adj, directed=False)
    reached_labels = np.unique(labels[box.analysis_boundary_mask])
    reached = np.isin(labels, reached_labels)
    return box.analysis_mask & ~reached


# ---------------------------------------------------------------------------
# hole decomposition and filling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HoleDecomposition:
    """Enclosed open components of cluster-minus-subgraph, split by size.

    ``large`` and ``small`` hold the vertex ranks of each enclosed
    component, ordered by decreasing size then smallest rank; a
    component is large when its size reaches ``threshold``.
    ``hull_mask`` is the enclosure hull of the subgraph's full edge
    boundary that defined enclosure.
    """

    subgraph: AnchoredSubgraph
    large: tuple[np.ndarray, ...]
    small: tuple[np.ndarray, ...]
    threshold: int
    hull_mask: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        """Number of large enclosed components."""
        return len(self.large)

    @property
    def filled_count(self) -> int:
        return int(sum(comp.size for comp in self.small))


def hole_size_threshold(n: int, d: int) -> int:
    """Smallest component size classified as large: ceil(n^(1-1/(2(d-1))))."""
    if d < 2:
        raise ConfigError(f"dimension must be at least 2, got {d}")
    exponent = 1.0 - 1.0 / (2 * (d - 1))
    return math.ceil(float(n) ** exponent - 1e-9)


def decompose_holes(
    G: AnchoredSubgraph, config: BondConfiguration, n: int
) -> HoleDecomposition:
    """Enumerate the cluster components enclosed by ``G``'s boundary hull.

    Components are the open-connected pieces of (cluster proxy minus G)
    that cannot reach the region boundary without crossing a boundary
    edge of G; they are split into large and small at the size
    threshold, larger-or-equal counting as large.
    """
    if G.config is not config and G.config_id != config.content_hash():
        raise ConfigError("subgraph belongs to a different configuration")
    box = config.box
    labeling = label_clusters(config)
    proxy = infinite_cluster_proxy(labeling, box)
    edge_set = boundary_edge_positions(G.mask, config)
    hull_mask = hull(edge_set, config)

    pocket_universe = proxy & ~G.mask
    adj = open_adjacency(config)
    _, labels = connected_components(adj, directed=False)
    # Components of the open graph restricted to the pocket universe:
    # every open component of cluster-minus-G keeps one label because
    # open edges leaving it land in G (maximality), so global labels
    # restricted to the universe identify them only when G disconnects
    # them; relabel on the induced subgraph instead.
    idx = np.flatnonzero(pocket_universe)
    comps: list[np.ndarray] = []
    if idx.size:
        sub = adj[idx][:, idx]
        _, sub_labels = connected_components(sub, directed=False)
        for lab in range(sub_labels.max() + 1):
            comps.append(idx[sub_labels == lab])

    threshold = hole_size_threshold(n, box.d)
    large: list[np.ndarray] = []
    small: list[np.ndarray] = []
    for comp in comps:
        if not hull_mask[comp[0]]:
            continue
        if comp.size >= threshold:
            large.append(np.sort(comp))
        else:
            small.append(np.sort(comp))
    order = lambda c: (-c.size, int(c[0]))  # noqa: E731
    return HoleDecomposition(
        subgraph=G,
        large=tuple(sorted(large, key=order)),
        small=tuple(sorted(small, key=order)),
        threshold=threshold,
        hull_mask=hull_mask,
    )


def fill_small_holes(
    G: AnchoredSubgraph, holes: HoleDecomposition
) -> AnchoredSubgraph:
    """Union ``G`` with every small enclosed component.

    The result is open-connected (each pocket's open edges exit into G)
    and grows by exactly the summed small-component sizes.
    """
    if holes.subgraph is not G and not np.array_equal(holes.subgraph.mask, G.mask):
        raise ConfigError("hole decomposition was built from a different subgraph")
    mask = G.mask.copy()
    added = 0
    for comp in holes.small:
        mask[comp] = True
        added += comp.size
    filled = make_anchored_subgraph(G.config, mask)
    if filled.volume != G.volume + added:
        raise GeometryError("hole filling changed the volume inconsistently")
    return filled


def enclosure_interior(
    G: AnchoredSubgraph, config: BondConfiguration, holes: HoleDecomposition
) -> np.ndarray:
    """Hull of ``G``'s boundary minus the hulls of its large holes.

    On fixtures this vertex mask intersected with the cluster proxy
    equals the hole-filled subgraph; returned as a boolean mask.
    """
    if holes.subgraph is not G and not np.array_equal(holes.subgraph.mask, G.mask):
        raise ConfigError("hole decomposition was built from a different subgraph")
    interior = holes.hull_mask.copy()
    n_vertices = config.box.n_vertices
    for comp in holes.large:
        comp_mask = np.zeros(n_vertices, dtype=bool)
        comp_mask[comp] = True
        comp_edges = boundary_edge_positions(comp_mask, config)
        interior &= ~hull(comp_edges, config)
    return interior


# ---------------------------------------------------------------------------
# voxel sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VoxelSet:
    """Unit-cube union over the analysis region at lattice resolution.

    ``mask`` is a d-dimensional boolean array whose entry at index ``i``
    is the cube centered on lattice point ``lower + i``; ``n`` is the
    scale so the continuum set is (1/n)(centers + [-1/2, 1/2]^d).
    """

    mask: np.ndarray = field(repr=False)
    lower: tuple[int, ...]
    n: int

    def __post_init__(self) -> None:
        if self.mask.ndim != len(self.lower):
            raise ConfigError(
                f"mask rank {self.mask.ndim} does not match lower corner "
                f"{self.lower}"
            )
        if self.n < 1:
            raise ConfigError(f"scale must be at least 1, got {self.n}")

    @property
    def d(self) -> int:
        return self.mask.ndim

    @property
    def count(self) -> int:
        """Number of voxels; the continuum volume is count / n^d."""
        return int(self.mask.sum())

    @property
    def scaled_volume(self) -> float:
        return self.count / float(self.n) ** self.d

    def centers(self) -> np.ndarray:
        """Lattice coordinates of the occupied voxel centers."""
        idx = np.argwhere(self.mask)
        return idx + np.asarray(self.lower, dtype=np.int64)

    @classmethod
    def from_vertex_mask(
        cls, box: BoxSpec, vertex_mask: np.ndarray, n: int
    ) -> "VoxelSet":
        """Crop a rank-indexed vertex mask to the analysis region grid."""
        vertex_mask = np.asarray(vertex_mask, dtype=bool)
        if vertex_mask.shape != (box.n_vertices,):
            raise ConfigError(
                f"vertex mask has shape {vertex_mask.shape}, expected "
                f"({box.n_vertices},)"
            )
        if bool((vertex_mask & ~box.analysis_mask).any()):
            raise GeometryError("vertex set leaves the analysis region")
        a = box.analysis_half_width
        side = 2 * a + 1
        grid = vertex_mask.reshape((box.side,) * box.d)
        pad = box.half_width - a
        cut = tuple(slice(pad, pad + side) for _ in range(box.d))
        return cls(mask=grid[cut].copy(), lower=(-a,) * box.d, n=n)

    def to_vertex_mask(self, box: BoxSpec) -> np.ndarray:
        """Inverse of :meth:`from_vertex_mask` for a matching box."""
        a = box.analysis_half_width
        if self.lower != (-a,) * box.d or self.mask.shape != (2 * a + 1,) * box.d:
            raise ConfigError("voxel grid does not match the box analysis region")
        out = np.zeros(box.n_vertices, dtype=bool)
        centers = self.centers()
        if centers.size:
            out[box.vertex_rank(centers)] = True
        return out

    # -- serialization ------------------------------------------------------

    def _runs(self) -> tuple[int, np.ndarray]:
        flat = self.mask.reshape(-1)
        if flat.size == 0:
            return 0, np.zeros(0, dtype=np.uint32)
        change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
        bounds = np.concatenate(([0], change, [flat.size]))
        return int(flat[0]), np.diff(bounds).astype(np.uint32)

    def header(self) -> dict:
        first, runs = self._runs()
        return {
            "format": VOXELSET_FORMAT,
            "d": self.d,
            "shape": list(self.mask.shape),
            "lower": list(self.lower),
            "n": self.n,
            "count": self.count,
            "first_bit": first,
            "run_count": int(runs.size),
        }

    def to_bytes(self) -> bytes:
        """Run lengths of the C-order flattened mask, little-endian uint32."""
        _, runs = self._runs()
        return struct.pack(f"<{runs.size}I", *runs.tolist())

    def save(self, stem: str) -> tuple[str, str]:
        """Write ``stem.json`` (header) and ``stem.bin`` (run lengths)."""
        json_path, bin_path = f"{stem}.json", f"{stem}.bin"
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.header(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(bin_path, "wb") as fh:
            fh.write(self.to_bytes())
        return json_path, bin_path

    @classmethod
    def load(cls, stem: str) -> "VoxelSet":
        with open(f"{stem}.json", encoding="utf-8") as fh:
            head = json.load(fh)
        with open(f"{stem}.bin", "rb") as fh:
            blob = fh.read()
        return cls.from_header_and_bytes(head, blob)

    @classmethod
    def from_header_and_bytes(cls, head: dict, blob: bytes) -> "VoxelSet":
        if head.get("format") != VOXELSET_FORMAT:
            raise ConfigError(f"unknown voxel format {head.get('format')!r}")
        runs = np.frombuffer(blob, dtype="<u4")
        if runs.size != head["run_count"]:
            raise ConfigError("run count does not match header")
        size = int(np.prod(head["shape"])) if head["shape"] else 0
        flat = np.zeros(size, dtype=bool)
        bit = bool(head["first_bit"])
        pos = 0
        for length in runs.tolist():
            if bit:
                flat[pos : pos + length] = True
            bit = not bit
            pos += length
        if pos != size:
            raise ConfigError("run lengths do not cover the mask")
        vox = cls(
            mask=flat.reshape(head["shape"]),
            lower=tuple(head["lower"]),
            n=head["n"],
        )
        if vox.count != head["count"]:
            raise ConfigError("voxel count does not match header")
        return vox


@dataclass(frozen=True)
class ContinuousSet:
    """Voxel thickening of a vertex set with its discrete perimeter."""

    voxels: VoxelSet
    perimeter: int
    perimeter_scaled: float
    n: int


def discrete_perimeter(mask: np.ndarray) -> int:
    """Count unit faces between occupied voxels and their complement."""
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        return 0
    padded = np.pad(mask, 1, constant_values=False)
    total = 0
    for axis in range(mask.ndim):
        lead = [slice(None)] * mask.ndim
        trail = [slice(None)] * mask.ndim
        lead[axis] = slice(1, None)
        trail[axis] = slice(None, -1)
        total += int(
            (padded[tuple(lead)] != padded[tuple(trail)]).sum()
        )
    return total


def continuous_set_and_perimeter(
    H: AnchoredSubgraph | np.ndarray,
    n: int,
    box: BoxSpec | None = None,
) -> ContinuousSet:
    """Thicken a vertex set into unit cubes and count its boundary faces.

    The perimeter is reported raw and scaled by n^(d-1); the voxel grid
    covers the analysis region with cubes centered on lattice points.
    """
    if isinstance(H, AnchoredSubgraph):
        box = H.box
        vertex_mask = H.mask
    else:
        if box is None:
            raise ConfigError("a box is required when passing a bare mask")
        vertex_mask = np.asarray(H, dtype=bool)
    vox = VoxelSet.from_vertex_mask(box, vertex_mask, n)
    per = discrete_perimeter(vox.mask)
    return ContinuousSet(
        voxels=vox,
        perimeter=per,
        perimeter_scaled=per / float(n) ** (box.d - 1),
        n=n,
    )


# ---------------------------------------------------------------------------
# rasterization of translated shapes
# ---------------------------------------------------------------------------


def _shape_polytope(W: WulffShape | Polytope) -> Polytope:
    return W.polytope if isinstance(W, WulffShape) else W


def rasterize_translate(
    W: WulffShape | Polytope,
    n: int,
    x: np.ndarray,
    box: BoxSpec,
    *,
    cluster: np.ndarray | None = None,
) -> VoxelSet:
    """Voxels whose centers lie in the n-fold dilation of the shifted shape.

    A lattice point z is included iff z belongs to n(x + W), boundary
    ties included; ``cluster`` optionally intersects the result with a
    rank-indexed vertex mask.  The scaled shape must fit inside the
    analysis region.
    """
    poly = _shape_polytope(W)
    x = np.asarray(x, dtype=float)
    if x.shape != (box.d,):
        raise ConfigError(f"translation has shape {x.shape}, expected ({box.d},)")
    if poly.d != box.d:
        raise ConfigError(
            f"shape dimension {poly.d} does not match box dimension {box.d}"
        )
    verts = (poly.vertices + x) * n
    a = box.analysis_half_width
    if bool((np.abs(verts) > a + 0.5 - 1e-9).any()):
        raise GeometryError(
            "scaled shape leaves the analysis region; enlarge the box or "
            "shrink the translation"
        )
    side = 2 * a + 1
    axes = [np.arange(-a, a + 1)] * box.d
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.d)
    inside = poly.contains(grid / float(n) - x[None, :])
    mask = inside.reshape((side,) * box.d)
    if cluster is not None:
        cluster = np.asarray(cluster, dtype=bool)
        if cluster.shape != (box.n_vertices,):
            raise ConfigError(
                f"cluster mask has shape {cluster.shape}, expected "
                f"({box.n_vertices},)"
            )
        pad = box.half_width - a
        cut = tuple(slice(pad, pad + side) for _ in range(box.d))
        mask = mask & cluster.reshape((box.side,) * box.d)[cut]
    return VoxelSet(mask=mask, lower=(-a,) * box.d, n=n)


# ---------------------------------------------------------------------------
# empirical and voxel measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Point masses 1/n^d at the scaled vertices of an anchored set."""

    points: np.ndarray = field(repr=False)
    n: int

    def __post_init__(self) -> None:
        if self.points.ndim != 2:
            raise ConfigError("points must be a (count, d) array")
        if self.n < 1:
            raise ConfigError(f"scale must be at least 1, got {self.n}")

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def total_mass(self) -> float:
        return self.points.shape[0] / float(self.n) ** self.d

    def integrate(self, f) -> float:
        """Sum f over the scaled support with weight 1/n^d each."""
        if self.points.shape[0] == 0:
            return 0.0
        values = np.asarray(f(self.points / float(self.n)), dtype=float)
        return float(values.sum()) / float(self.n) ** self.d

    @classmethod
    def from_subgraph(cls, G: AnchoredSubgraph, n: int) -> "EmpiricalMeasure":
        box = G.box
        if bool((G.mask & ~box.analysis_mask).any()):
            raise GeometryError("subgraph support leaves the analysis region")
        return cls(points=box.vertex_coords(G.vertices).astype(float), n=n)


@dataclass(frozen=True)
class VoxelMeasure:
    """theta-weighted Lebesgue measure of a voxel union.

    Integrals are evaluated by the midpoint rule, one sample per voxel
    center with weight theta/n^d; exact for constants and accurate to
    the integrand's modulus of continuity at scale 1/n otherwise.
    """

    voxels: VoxelSet
    theta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must lie in [0, 1], got {self.theta}")

    @property
    def total_mass(self) -> float:
        return self.theta * self.voxels.scaled_volume

    def integrate(self, f) -> float:
        centers = self.voxels.centers()
        if centers.shape[0] == 0:
            return 0.0
        n = self.voxels.n
        values = np.asarray(f(centers / float(n)), dtype=float)
        return self.theta * float(values.sum()) / float(n) ** self.voxels.d


def distance_profile_family(
    W: WulffShape | Polytope,
    delta: float | None = None,
    centers: tuple | None = None,
) -> tuple[tuple[str, object], ...]:
    """Clamped distance profiles of a shape plus the constant function.

    For each center z the family holds the smoothed indicator of the
    delta-thickened shape (1 well inside, 0 outside the thickening), the
    clamped exterior distance (0 on the shape, 1 at distance delta), and
    the signed profile (-1 deep inside through +1 far outside); all are
    1-Lipschitz after the 1/delta scaling and bounded by 1.
    """
    poly = _shape_polytope(W)
    if delta is None:
        delta = 0.05 * poly.diameter()
    if delta <= 0:
        raise ConfigError(f"delta must be positive, got {delta}")
    if centers is None:
        centers = (np.zeros(poly.d),)

    def signed(points: np.ndarray, z: np.ndarray) -> np.ndarray:
        return poly.signed_gap(np.atleast_2d(points) - z[None, :])

    family: list[tuple[str, object]] = [("const", lambda pts: np.ones(len(np.atleast_2d(pts))))]
    for z in centers:
        z = np.asarray(z, dtype=float)
        tag = ",".join(f"{c:g}" for c in z)

        def inner(pts, z=z):
            return np.clip((delta - signed(pts, z)) / delta, 0.0, 1.0)

        def outer(pts, z=z):
            return np.clip(signed(pts, z) / delta, 0.0, 1.0)

        def signed_profile(pts, z=z):
            return np.clip(signed(pts, z) / delta, -1.0, 1.0)

        family.append((f"inner[{tag}]", inner))
        family.append((f"outer[{tag}]", outer))
        family.append((f"signed[{tag}]", signed_profile))
    return tuple(family)


@dataclass(frozen=True)
class MeasureComparison:
    """Per-function discrepancies and their supremum."""

    discrepancies: tuple[tuple[str, float], ...]
    supremum: float


def measure_compare(
    mu: EmpiricalMeasure,
    nu: VoxelMeasure,
    test_functions: tuple[tuple[str, object], ...],
) -> MeasureComparison:
    """Supremum over the family of |mu(f) - nu(f)| by direct summation."""
    rows: list[tuple[str, float]] = []
    for name, f in test_functions:
        rows.append((name, abs(mu.integrate(f) - nu.integrate(f))))
    sup = max((v for _, v in rows), default=0.0)
    return MeasureComparison(discrepancies=tuple(rows), supremum=sup)


# ---------------------------------------------------------------------------
# symmetric-difference distance to a translated shape
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SearchSchedule:
    """Pattern-search schedule for the translation optimization.

    Starting from the centroid seed, the search probes the 2d axis
    neighbors at the current step size, moves to the best strict
    improvement, and halves the step when none improves, stopping once
    the step falls below ``min_step`` (default 1/(4n)) or the evaluation
    budget is spent.
    """

    initial_step: float = 0.5
    min_step: float | None = None
    max_evals: int = 4000

    def resolved_min_step(self, n: int) -> float:
        return self.min_step if self.min_step is not None else 0.25 / n


@dataclass(frozen=True)
class ShapeDistanceResult:
    """Best translation found and its scaled symmetric difference."""

    best_x: np.ndarray
    value: float
    evaluations: int
    trace: tuple[tuple[tuple[float, ...], float], ...]


def symmetric_difference_at(
    G: AnchoredSubgraph,
    W: WulffShape | Polytope,
    n: int,
    x: np.ndarray,
) -> float:
    """|G Δ (raster(n, x, W) ∩ cluster)| / n^d at one fixed translation."""
    config = G.config
    box = config.box
    proxy = infinite_cluster_proxy(label_clusters(config), box)
    g_vox = VoxelSet.from_vertex_mask(box, G.mask, n)
    raster = rasterize_translate(_shape_polytope(W), n, np.asarray(x, dtype=float), box, cluster=proxy)
    return int((raster.mask ^ g_vox.mask).sum()) / float(n) ** box.d


def symmetric_difference_distance(
    G: AnchoredSubgraph,
    W: WulffShape | Polytope,
    n: int,
    search: SearchSchedule | None = None,
) -> ShapeDistanceResult:
    """Upper bound on inf over x of |G Δ (raster(n, x, W) ∩ cluster)| / n^d.

    Seeds at centroid(G)/n - centroid(W) and pattern-searches over a
    shrinking grid; the reported value is the best found, an upper
    bound on the true infimum of the piecewise-constant objective.
    """
    if search is None:
        search = SearchSchedule()
    poly = _shape_polytope(W)
    config = G.config
    box = config.box
    proxy = infinite_cluster_proxy(label_clusters(config), box)
    g_vox = VoxelSet.from_vertex_mask(box, G.mask, n)
    norm = float(n) ** box.d

    evals = 0

    def objective(x: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        try:
            raster = rasterize_translate(poly, n, x, box, cluster=proxy)
        except GeometryError:
            return math.inf
        return int((raster.mask ^ g_vox.mask).sum()) / norm

    centroid_g = box.vertex_coords(G.vertices).mean(axis=0) / float(n)
    centroid_w = poly.vertices.mean(axis=0)
    cur = centroid_g - centroid_w
    cur_val = objective(cur)
    trace: list[tuple[tuple[float, ...], float]] = [(tuple(cur), cur_val)]
    step = search.initial_step
    min_step = search.resolved_min_step(n)
    while step >= min_step and evals < search.max_evals:
        moved = False
        for axis in range(box.d):
            for sign in (1.0, -1.0):
                probe = cur.copy()
                probe[axis] += sign * step
                val = objective(probe)
                if val < cur_val:
                    cur, cur_val = probe, val
                    trace.append((tuple(cur), cur_val))
                    moved = True
                if evals >= search.max_evals:
                    break
            if evals >= search.max_evals:
                break
        if not moved:
            step /= 2.0
    return ShapeDistanceResult(
        best_x=cur,
        value=cur_val,
        evaluations=evals,
        trace=tuple(trace),
    )
