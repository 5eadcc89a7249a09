"""Minimal open cutsets in oriented cylinders and the surface-tension norm.

A cylinder is a hyperrectangle (or convex polygon) base swept along its
unit normal.  The base hyperplane splits the cylinder into two halves;
the *plug sets* of either half are the lattice points having a lattice
neighbor outside the cylinder.  The cutset problem asks for the minimum
number of open edges whose removal disconnects the two plug sets inside
the cylinder; by max-flow/min-cut duality it is solved exactly with a
blocking-flow (Dinic) max-flow on unit capacities.

Normalizing the cutset capacity by the base area and averaging over
replicates estimates the direction-dependent surface tension; tables of
those estimates over direction meshes feed the crystal construction.
"""

from __future__ import annotations

import csv
import io
import json
import time
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from .errors import CoverageError, GeometryError
from .errors import ConfigError
from .lattice import BondConfiguration, BoxSpec, sample_configuration
from .rng import mix_seed

__all__ = [
    "SNAP",
    "CylinderSpec",
    "FlowNetwork",
    "CutsetResult",
    "NormRow",
    "NormTable",
    "discretize_cylinder",
    "tau",
    "estimate_beta",
    "build_norm_table",
    "circle_directions",
    "fibonacci_sphere_directions",
    "canonical_direction",
]

# Boundary-tie snap: lattice points within SNAP of the cylinder surface
# count as inside, making tilted discretization deterministic.
SNAP = 1e-9

_BETA_STAGE = "beta"


def _orthonormal_frame(normal: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of the hyperplane normal to ``v``.

    Gram-Schmidt over standard basis vectors taken in increasing order
    of ``|v_j|`` (ties by index), so the frame is a pure function of the
    normal.  Returns shape ``(d-1, d)``.
    """
    v = np.asarray(normal, dtype=float)
    d = v.size
    order = np.lexsort((np.arange(d), np.abs(v)))
    basis = [v]
    for j in order:
        if len(basis) == d:
            break
        w = np.zeros(d)
        w[j] = 1.0
        for b in basis:
            w = w - (w @ b) * b
        norm = np.linalg.norm(w)
        if norm > 1e-12:
            basis.append(w / norm)
    return np.asarray(basis[1:])


def _polygon_halfplanes(poly: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Outward halfplane form (normals, offsets) of a convex 2D polygon."""
    center = poly.mean(axis=0)
    order = np.argsort(np.arctan2(poly[:, 1] - center[1], poly[:, 0] - center[0]))
    pts = poly[order]
    k = pts.shape[0]
    normals = np.empty((k, 2))
    offsets = np.empty(k)
    for i in range(k):
        a, b = pts[i], pts[(i + 1) % k]
        edge = b - a
        nrm = np.array([edge[1], -edge[0]])
        ln = np.linalg.norm(nrm)
        if ln < 1e-15:
            nrm, ln = np.array([1.0, 0.0]), 1.0
        nrm = nrm / ln
        if nrm @ (center - a) > 0:
            nrm = -nrm
        normals[i] = nrm
        offsets[i] = nrm @ a
    return normals, offsets


@dataclass(frozen=True)
class CylinderSpec:
    """Oriented cylinder in lattice units.

    The cylinder is ``{c + w + t v : w in base, t in [-height, height]}``
    where the base is either the hyperrectangle with the given side
    lengths or, when ``base_polygon`` is set, the convex polygon with
    those frame-coordinate vertices (both centered at ``base_center`` in
    the hyperplane normal to ``normal``).  ``n`` records the lattice
    scale used to build the cylinder so capacity-per-area estimates can
    be tabulated against it.
    """

    d: int
    base_center: tuple
    base_sides: tuple
    normal: tuple
    height: float
    n: int
    base_polygon: tuple | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.normal, dtype=float)
        if v.shape != (self.d,):
            raise GeometryError(f"normal must have {self.d} components")
        ln = np.linalg.norm(v)
        if abs(ln - 1.0) > 1e-9:
            raise GeometryError(f"normal must be a unit vector, |v| = {ln}")
        if self.height <= 0:
            raise GeometryError(f"height must be positive, got {self.height}")
        if len(self.base_sides) != self.d - 1:
            raise GeometryError(
                f"expected {self.d - 1} base side lengths, got {len(self.base_sides)}"
            )
        if self.base_measure() <= 0:
            raise GeometryError("base must have positive area")

    # ---- geometry -------------------------------------------------------

    @cached_property
    def frame(self) -> np.ndarray:
        return _orthonormal_frame(np.asarray(self.normal, dtype=float))

    @cached_property
    def _polygon_hp(self) -> tuple[np.ndarray, np.ndarray] | None:
        if self.base_polygon is None:
            return None
        return _polygon_halfplanes(np.asarray(self.base_polygon, dtype=float))

    def base_measure(self) -> float:
        """Area of the base in lattice units (shoelace for polygons)."""
        if self.base_polygon is None:
            return float(np.prod(self.base_sides))
        poly = np.asarray(self.base_polygon, dtype=float)
        center = poly.mean(axis=0)
        order = np.argsort(
            np.arctan2(poly[:, 1] - center[1], poly[:, 0] - center[0])
        )
        pts = poly[order]
        x, y = pts[:, 0], pts[:, 1]
        return float(abs(x @ np.roll(y, -1) - y @ np.roll(x, -1)) / 2.0)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership of real points, boundary ties included via snap."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        y = pts - np.asarray(self.base_center, dtype=float)
        t = y @ np.asarray(self.normal, dtype=float)
        inside = np.abs(t) <= self.height + SNAP
        w = y @ self.frame.T
        if self.base_polygon is None:
            for j, s in enumerate(self.base_sides):
                inside &= np.abs(w[:, j]) <= s / 2.0 + SNAP
        else:
            normals, offsets = self._polygon_hp
            for nrm, off in zip(normals, offsets):
                inside &= w @ nrm <= off + SNAP
        return inside if np.asarray(points).ndim > 1 else inside[0]

    def axial_offset(self, points: np.ndarray) -> np.ndarray:
        """Signed distance along the normal from the base hyperplane."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts - np.asarray(self.base_center, dtype=float)) @ np.asarray(
            self.normal, dtype=float
        )

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned (lo, hi) real bounds of the cylinder."""
        if self.base_polygon is None:
            corners = np.array(
                np.meshgrid(*[(-s / 2.0, s / 2.0) for s in self.base_sides])
            ).reshape(self.d - 1, -1).T
        else:
            corners = np.asarray(self.base_polygon, dtype=float)
        center = np.asarray(self.base_center, dtype=float)
        v = np.asarray(self.normal, dtype=float)
        pts = []
        for t in (-self.height, self.height):
            pts.append(center + t * v + corners @ self.frame)
        allpts = np.concatenate(pts, axis=0)
        return allpts.min(axis=0), allpts.max(axis=0)

    @classmethod
    def hypersquare(
        cls, normal, n: int, height: float, d: int | None = None
    ) -> "CylinderSpec":
        """Standard probe cylinder: side-``n`` hypersquare base.

        The base center sits at ``(1/4, ..., 1/4)`` so no lattice point
        ever ties with the lateral boundary for any integer ``n``: the
        discretized base then has exactly ``n`` lattice columns per
        transverse axis. ``height`` is in lattice units.
        """
        v = np.asarray(normal, dtype=float)
        v = v / np.linalg.norm(v)
        dd = d if d is not None else v.size
        return cls(
            d=dd,
            base_center=tuple(0.25 for _ in range(dd)),
            base_sides=tuple(float(n) for _ in range(dd - 1)),
            normal=tuple(v),
            height=float(height),
            n=int(n),
        )


@dataclass(frozen=True)
class FlowNetwork:
    """Discretized cylinder: induced open subgraph plus plug sets."""

    spec: CylinderSpec
    vertex_ranks: np.ndarray = field(repr=False)
    c1_ranks: np.ndarray = field(repr=False)
    c2_ranks: np.ndarray = field(repr=False)
    edge_positions: np.ndarray = field(repr=False)  # open interior edges
    edge_tails: np.ndarray = field(repr=False)
    edge_heads: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return int(self.vertex_ranks.size)

    @property
    def n_open_edges(self) -> int:
        return int(self.edge_positions.size)


@dataclass(frozen=True)
class CutsetResult:
    """Minimal open cutset between the two plug sets of a cylinder."""

    capacity: int
    cut_edge_positions: np.ndarray = field(repr=False)
    c1_ranks: np.ndarray = field(repr=False)
    c2_ranks: np.ndarray = field(repr=False)
    separation_verified: bool
    stats: dict = field(default_factory=dict, repr=False)


def discretize_cylinder(
    spec: CylinderSpec, config: BondConfiguration
) -> FlowNetwork:
    """Induce the open network on the cylinder's lattice points.

    Plug sets are the lattice points of either open half (strictly above
    or below the base hyperplane) that have a lattice neighbor outside
    the cylinder.  Only open edges with both endpoints inside the
    cylinder enter the network; paths may not leave the cylinder.
    """
    box = config.box
    lo, hi = spec.bounding_box()
    L = box.half_width
    if bool((lo < -L - SNAP).any() or (hi > L + SNAP).any()):
        raise GeometryError(
            f"cylinder bounding box [{lo}, {hi}] escapes the simulation box "
            f"[-{L}, {L}]^{box.d}"
        )
    axes = [
        np.arange(int(np.ceil(lo[a] - SNAP)), int(np.floor(hi[a] + SNAP)) + 1)
        for a in range(box.d)
    ]
    grid = np.stack(
        [g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1
    )
    member = spec.contains(grid)
    pts = grid[member]
    ranks = box.vertex_rank(pts) if pts.size else np.empty(0, dtype=np.int64)

    # A point belongs to a plug set when some lattice neighbor leaves the
    # cylinder; neighbors may leave the simulation box, which is fine
    # because they are only membership-tested, never used as edges.
    exposed = np.zeros(pts.shape[0], dtype=bool)
    for a in range(box.d):
        for s in (-1, 1):
            nbr = pts.copy()
            nbr[:, a] += s
            exposed |= ~spec.contains(nbr)
    t = spec.axial_offset(pts)
    c1 = ranks[(t > SNAP) & exposed]
    c2 = ranks[(t < -SNAP) & exposed]

    in_cyl = np.zeros(box.n_vertices, dtype=bool)
    in_cyl[ranks] = True
    tails, heads, _, _ = box.edge_arrays
    keep = config.open_ & in_cyl[tails] & in_cyl[heads]
    positions = np.flatnonzero(keep)
    return FlowNetwork(
        spec=spec,
        vertex_ranks=np.sort(ranks),
        c1_ranks=np.sort(c1),
        c2_ranks=np.sort(c2),
        edge_positions=positions,
        edge_tails=tails[positions],
        edge_heads=heads[positions],
    )


def _verify_separation(net: FlowNetwork, cut_positions: np.ndarray) -> bool:
    """Check removing the cut edges kills every plug-to-plug open path."""
    cut = set(int(x) for x in cut_positions)
    keep = np.array(
        [int(pos) not in cut for pos in net.edge_positions], dtype=bool
    )
    t, h = net.edge_tails[keep], net.edge_heads[keep]
    n = net.n_vertices
    local = {int(r): i for i, r in enumerate(net.vertex_ranks)}
    lt = np.array([local[int(x)] for x in t], dtype=np.int64)
    lh = np.array([local[int(x)] for x in h], dtype=np.int64)
    adj = sp.csr_matrix(
        (
            np.ones(2 * lt.size, dtype=np.int8),
            (np.concatenate([lt, lh]), np.concatenate([lh, lt])),
        ),
        shape=(n, n),
    )
    # BFS from a super-source over all side-1 plugs via one synthetic row.
    reach = np.zeros(n, dtype=bool)
    frontier = [local[int(r)] for r in net.c1_ranks]
    reach[frontier] = True
    indptr, indices = adj.indptr, adj.indices
    while frontier:
        nxt = []
        for u in frontier:
            for w in indices[indptr[u] : indptr[u + 1]]:
                if not reach[w]:
                    reach[w] = True
                    nxt.append(int(w))
        frontier = nxt
    side2 = np.array([local[int(r)] for r in net.c2_ranks], dtype=np.int64)
    return not bool(reach[side2].any()) if side2.size else True


def tau(spec: CylinderSpec, config: BondConfiguration) -> CutsetResult:
    """Exact minimal open-cutset capacity between the two plug sets.

    Solved as a unit-capacity max-flow with a super-source on the upper
    plug set and a super-sink on the lower one; the cutset is recovered
    from residual reachability and the separation property is verified
    by an independent reachability pass on every call.
    """
    started = time.perf_counter()
    net = discretize_cylinder(spec, config)
    stats = {
        "n_vertices": net.n_vertices,
        "n_open_edges": net.n_open_edges,
        "c1_size": int(net.c1_ranks.size),
        "c2_size": int(net.c2_ranks.size),
    }
    if net.c1_ranks.size == 0 or net.c2_ranks.size == 0 or net.n_open_edges == 0:
        stats["seconds"] = time.perf_counter() - started
        return CutsetResult(
            capacity=0,
            cut_edge_positions=np.empty(0, dtype=np.int64),
            c1_ranks=net.c1_ranks,
            c2_ranks=net.c2_ranks,
            separation_verified=_verify_separation(
                net, np.empty(0, dtype=np.int64)
            ),
            stats=stats,
        )
    local = {int(r): i for i, r in enumerate(net.vertex_ranks)}
    nv = net.n_vertices
    src, snk = nv, nv + 1
    lt = np.array([local[int(x)] for x in net.edge_tails], dtype=np.int64)
    lh = np.array([local[int(x)] for x in net.edge_heads], dtype=np.int64)
    big = net.n_open_edges + 1
    rows = [lt, lh]
    cols = [lh, lt]
    caps = [np.ones(lt.size, dtype=np.int64), np.ones(lt.size, dtype=np.int64)]
    c1_local = np.array([local[int(r)] for r in net.c1_ranks], dtype=np.int64)
    c2_local = np.array([local[int(r)] for r in net.c2_ranks], dtype=np.int64)
    rows.append(np.full(c1_local.size, src, dtype=np.int64))
    cols.append(c1_local)
    caps.append(np.full(c1_local.size, big, dtype=np.int64))
    rows.append(c2_local)
    cols.append(np.full(c2_local.size, snk, dtype=np.int64))
    caps.append(np.full(c2_local.size, big, dtype=np.int64))
    cap = sp.csr_matrix(
        (
            np.concatenate(caps).astype(np.int32),
            (np.concatenate(rows), np.concatenate(cols)),
        ),
        shape=(nv + 2, nv + 2),
    )
    res = maximum_flow(cap, src, snk, method="dinic")
    residual = cap - res.flow
    reach_order = breadth_first_order(
        (residual > 0).astype(np.int8), src, directed=True, return_predecessors=False
    )
    reach = np.zeros(nv + 2, dtype=bool)
    reach[reach_order] = True
    cut_mask = reach[lt] != reach[lh]
    cut_positions = net.edge_positions[cut_mask]
    if cut_positions.size != res.flow_value:
        raise GeometryError(
            f"residual cut has {cut_positions.size} edges but max-flow is "
            f"{res.flow_value}; duality violated"
        )
    verified = _verify_separation(net, cut_positions)
    if not verified:
        raise GeometryError("reported cutset fails the separation recheck")
    stats["seconds"] = time.perf_counter() - started
    return CutsetResult(
        capacity=int(res.flow_value),
        cut_edge_positions=cut_positions,
        c1_ranks=net.c1_ranks,
        c2_ranks=net.c2_ranks,
        separation_verified=verified,
        stats=stats,
    )


# ---------------------------------------------------------------------------
# Norm estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormRow:
    """One direction's capacity-per-area estimate."""

    direction: tuple
    beta_hat: float
    ci_radius: float
    n: int
    h: float
    replicates: int

    def __post_init__(self) -> None:
        if self.beta_hat < 0 or self.ci_radius < 0:
            raise ConfigError("beta_hat and ci_radius must be nonnegative")


def _box_for_cylinder(spec: CylinderSpec, d: int) -> BoxSpec:
    lo, hi = spec.bounding_box()
    L = int(np.ceil(max(float(np.abs(lo).max()), float(np.abs(hi).max())) + SNAP)) + 1
    return BoxSpec(d=d, half_width=max(L, 2))


def estimate_beta(
    direction,
    p: float,
    n: int,
    h: float,
    replicates: int,
    seed: int,
) -> NormRow:
    """Monte Carlo estimate of cutset capacity per unit base area.

    Uses the standard side-``n`` hypersquare probe cylinder of height
    ``h`` lattice units; each replicate samples a fresh configuration on
    the smallest box containing the cylinder and solves one min-cut.
    The 95% half-width uses the normal approximation.
    """
    if not 0.0 < p <= 1.0:
        raise ConfigError(f"p must lie in (0, 1], got {p}")
    if n < 1 or replicates < 1:
        raise ConfigError("n and replicates must be >= 1")
    v = np.asarray(direction, dtype=float)
    v = v / np.linalg.norm(v)
    spec = CylinderSpec.hypersquare(v, n=n, height=h)
    box = _box_for_cylinder(spec, v.size)
    area = spec.base_measure()
    values = np.empty(replicates, dtype=float)
    for r in range(replicates):
        config = sample_configuration(box, p, mix_seed(seed, _BETA_STAGE, r))
        values[r] = tau(spec, config).capacity / area
    beta_hat = float(values.mean())
    ci = (
        1.96 * float(values.std(ddof=1) / np.sqrt(replicates))
        if replicates > 1
        else 0.0
    )
    return NormRow(
        direction=tuple(float(x) for x in v),
        beta_hat=beta_hat,
        ci_radius=ci,
        n=int(n),
        h=float(h),
        replicates=int(replicates),
    )


def circle_directions(k: int) -> np.ndarray:
    """``k`` unit directions evenly spaced on the circle."""
    angles = 2.0 * np.pi * np.arange(k) / k
    return np.stack([np.cos(angles), np.sin(angles)], axis=1)


def fibonacci_sphere_directions(k: int) -> np.ndarray:
    """``k`` quasi-uniform unit directions on the 2-sphere."""
    i = np.arange(k) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / k)
    golden = np.pi * (1.0 + np.sqrt(5.0))
    theta = golden * i
    return np.stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)],
        axis=1,
    )


def canonical_direction(u: np.ndarray) -> tuple:
    """Orbit representative under signed coordinate permutations."""
    rep = np.sort(np.abs(np.asarray(u, dtype=float)))[::-1]
    return tuple(round(float(x), 12) for x in rep)


@dataclass(frozen=True)
class NormTable:
    """Direction-indexed table of capacity-per-area estimates."""

    d: int
    p: float
    seed: int
    rows: tuple
    symmetry_expanded: bool = False

    def __post_init__(self) -> None:
        if not self.rows:
            raise ConfigError("norm table must have at least one row")
        for row in self.rows:
            u = np.asarray(row.direction, dtype=float)
            if abs(np.linalg.norm(u) - 1.0) > 1e-9:
                raise ConfigError(f"direction {row.direction} is not unit")

    @cached_property
    def directions(self) -> np.ndarray:
        return np.asarray([r.direction for r in self.rows], dtype=float)

    @cached_property
    def values(self) -> np.ndarray:
        return np.asarray([r.beta_hat for r in self.rows], dtype=float)

    @cached_property
    def _mesh_spacing(self) -> float:
        """Largest nearest-neighbor angle over the table's directions."""
        dirs = self.directions
        dots = np.clip(dirs @ dirs.T, -1.0, 1.0)
        np.fill_diagonal(dots, -1.0)
        nearest = np.arccos(dots.max(axis=1))
        return float(nearest.max())

    def table_id(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(json.dumps(self.metadata(), sort_keys=True).encode())
        for row in self.rows:
            h.update(json.dumps(_row_dict(row), sort_keys=True).encode())
        return h.hexdigest()

    def metadata(self) -> dict:
        return {
            "format": "percoshape-normtable-v1",
            "d": self.d,
            "p": self.p,
            "seed": self.seed,
            "symmetry_expanded": self.symmetry_expanded,
        }

    # ---- evaluation ------------------------------------------------------

    def value(self, direction, interpolate: bool = True) -> float:
        """Estimate for an arbitrary unit direction.

        Exact table hits (within 1e-9) return the stored value.  With
        interpolation, off-mesh directions are filled in by arc-linear
        interpolation between angular neighbors (circle) or by linear
        interpolation on the containing face of the direction hull
        (sphere).  Without interpolation, the nearest direction within
        twice the mesh spacing is used, else a coverage error is raised.
        """
        q = np.asarray(direction, dtype=float)
        q = q / np.linalg.norm(q)
        dirs = self.directions
        dist = np.linalg.norm(dirs - q, axis=1)
        hit = int(np.argmin(dist))
        if dist[hit] <= 1e-9:
            return float(self.values[hit])
        if not interpolate:
            angle = float(np.arccos(np.clip(dirs[hit] @ q, -1.0, 1.0)))
            if angle <= 2.0 * self._mesh_spacing + 1e-12:
                return float(self.values[hit])
            raise CoverageError(
                f"direction {tuple(q)} is {angle:.4f} rad from the nearest "
                f"table entry; mesh spacing is {self._mesh_spacing:.4f} rad"
            )
        if self.d == 2:
            return self._interp_circle(q)
        if self.d == 3:
            return self._interp_sphere(q)
        raise CoverageError(f"interpolation unsupported for d={self.d}")

    def _interp_circle(self, q: np.ndarray) -> float:
        angles = np.arctan2(self.directions[:, 1], self.directions[:, 0])
        order = np.argsort(angles)
        ang, val = angles[order], self.values[order]
        qa = float(np.arctan2(q[1], q[0]))
        j = int(np.searchsorted(ang, qa))
        lo, hi = j - 1, j % ang.size
        a0, a1 = ang[lo], ang[hi]
        gap = (a1 - a0) % (2.0 * np.pi)
        if gap < 1e-15:
            return float(val[lo])
        w = ((qa - a0) % (2.0 * np.pi)) / gap
        return float((1.0 - w) * val[lo] + w * val[hi])

    def _interp_sphere(self, q: np.ndarray) -> float:
        from scipy.spatial import ConvexHull

        dirs = self.directions
        if dirs.shape[0] < 4:
            raise CoverageError("need at least 4 directions to interpolate on the sphere")
        hull = ConvexHull(dirs)
        best, best_t = None, np.inf
        # Hull faces satisfy x.nrm + off <= 0 with off < 0 when the hull
        # surrounds the origin; the ray t*q exits through the face with
        # the smallest positive t = -off / (nrm.q).
        for simplex, eq in zip(hull.simplices, hull.equations):
            nrm, off = eq[:-1], eq[-1]
            denom = nrm @ q
            if denom <= 1e-15:
                continue
            tt = -off / denom
            if tt < best_t:
                best_t, best = tt, simplex
        if best is None:
            raise CoverageError("direction hull does not surround the origin")
        tri = dirs[best]
        lam, *_ = np.linalg.lstsq(tri.T, q * best_t, rcond=None)
        lam = np.clip(lam, 0.0, None)
        lam = lam / lam.sum()
        return float(lam @ self.values[best])

    # ---- serialization ---------------------------------------------------

    def to_csv(self) -> str:
        """Versioned CSV: direction components, estimate, CI, n, h, reps."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"# {self.metadata()['format']}"])
        header = [f"u{j}" for j in range(self.d)] + [
            "beta_hat",
            "ci_radius",
            "n",
            "h",
            "replicates",
        ]
        writer.writerow(header)
        for row in self.rows:
            writer.writerow(
                [f"{x:.17g}" for x in row.direction]
                + [
                    f"{row.beta_hat:.17g}",
                    f"{row.ci_radius:.17g}",
                    str(row.n),
                    f"{row.h:.17g}",
                    str(row.replicates),
                ]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, p: float, seed: int) -> "NormTable":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or "percoshape-normtable-v1" not in lines[0]:
            raise ConfigError("missing norm-table CSV version header")
        reader = csv.reader(lines[1:])
        header = next(reader)
        d = sum(1 for name in header if name.startswith("u"))
        rows = []
        for rec in reader:
            rows.append(
                NormRow(
                    direction=tuple(float(x) for x in rec[:d]),
                    beta_hat=float(rec[d]),
                    ci_radius=float(rec[d + 1]),
                    n=int(rec[d + 2]),
                    h=float(rec[d + 3]),
                    replicates=int(rec[d + 4]),
                )
            )
        return cls(d=d, p=p, seed=seed, rows=tuple(rows))

    def to_json(self) -> str:
        doc = self.metadata()
        doc["rows"] = [_row_dict(r) for r in self.rows]
        doc["table_id"] = self.table_id()
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "NormTable":
        doc = json.loads(text)
        if doc.get("format") != "percoshape-normtable-v1":
            raise ConfigError(f"unknown norm-table format {doc.get('format')!r}")
        rows = tuple(
            NormRow(
                direction=tuple(r["direction"]),
                beta_hat=r["beta_hat"],
                ci_radius=r["ci_radius"],
                n=r["n"],
                h=r["h"],
                replicates=r["replicates"],
            )
            for r in doc["rows"]
        )
        return cls(
            d=doc["d"],
            p=doc["p"],
            seed=doc["seed"],
            rows=rows,
            symmetry_expanded=doc["symmetry_expanded"],
        )


def _row_dict(row: NormRow) -> dict:
    return {
        "direction": list(row.direction),
        "beta_hat": row.beta_hat,
        "ci_radius": row.ci_radius,
        "n": row.n,
        "h": row.h,
        "replicates": row.replicates,
    }


def build_norm_table(
    p: float,
    directions,
    n: int,
    h: float,
    replicates: int,
    seed: int,
) -> NormTable:
    """Estimate once per lattice-symmetry orbit and expand to all inputs.

    Directions sharing an orbit under signed coordinate permutations get
    identical estimates (the lattice model is exactly invariant under
    that group), cutting solve count.  Duplicate directions are collapsed
    with a warning.
    """
    dirs = np.asarray(directions, dtype=float)
    if dirs.ndim != 2 or dirs.shape[0] == 0:
        raise ConfigError("direction set must be a nonempty (k, d) array")
    d = dirs.shape[1]
    norms = np.linalg.norm(dirs, axis=1)
    if bool((norms <= 0).any()):
        raise ConfigError("directions must be nonzero")
    dirs = dirs / norms[:, None]

    unique: list[np.ndarray] = []
    for u in dirs:
        if any(np.linalg.norm(u - w) <= 1e-12 for w in unique):
            warnings.warn(
                f"duplicate direction {tuple(u)} collapsed", stacklevel=2
            )
            continue
        unique.append(u)

    orbit_values: dict[tuple, NormRow] = {}
    rows = []
    for u in unique:
        key = canonical_direction(u)
        if key not in orbit_values:
            rep = np.asarray(key, dtype=float)
            rep = rep / np.linalg.norm(rep)
            orbit_seed = mix_seed(seed, "orbit", json.dumps(key))
            orbit_values[key] = estimate_beta(
                rep, p, n=n, h=h, replicates=replicates, seed=orbit_seed
            )
        base = orbit_values[key]
        rows.append(
            NormRow(
                direction=tuple(float(x) for x in u),
                beta_hat=base.beta_hat,
                ci_radius=base.ci_radius,
                n=base.n,
                h=base.h,
                replicates=base.replicates,
            )
        )
    return NormTable(
        d=d, p=float(p), seed=int(seed), rows=tuple(rows), symmetry_expanded=True
    )
