"""Convex polytopes, Wulff construction, volumes, and surface energies.

Polytopes are stored as intersections of unit-normal halfspaces with
derived vertices and faces.  Vertex enumeration is done in-house
(batched 2x2 / 3x3 solves over normal pairs/triples) so that fixtures
with dyadic-rational geometry evaluate float-exactly; scipy is used
only for the boundedness/interior linear programs and for hulls of
point sets.  Exact geometry is restricted to d in {2, 3}.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigError, GeometryError
from .flows import NormRow, NormTable, _orthonormal_frame

__all__ = [
    "Face",
    "Polytope",
    "WulffShape",
    "wulff_from_norm",
    "polytope_volume",
    "surface_energy",
    "dilate_to_volume",
    "build_wulff",
    "isoperimetric_constant",
    "IsoperimetricValue",
    "inner_outer_approximation",
    "analytic_norm_table",
]

_TIGHT = 1e-9


@dataclass(frozen=True)
class Face:
    """One facet: supporting halfspace plus its polygon of vertices."""

    normal: tuple
    offset: float
    vertices: np.ndarray = field(repr=False)  # ordered along the face
    measure: float = 0.0
    centroid: tuple = ()


def _pairwise_vertices_2d(normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    idx = np.array(list(itertools.combinations(range(normals.shape[0]), 2)))
    if idx.size == 0:
        return np.empty((0, 2))
    a = normals[idx[:, 0]]
    b = normals[idx[:, 1]]
    det = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    ok = np.abs(det) > 1e-12
    a, b, dd = a[ok], b[ok], det[ok]
    pa, pb = offsets[idx[ok, 0]], offsets[idx[ok, 1]]
    x = (pa * b[:, 1] - pb * a[:, 1]) / dd
    y = (a[:, 0] * pb - b[:, 0] * pa) / dd
    return np.stack([x, y], axis=1)


def _triple_vertices_3d(normals: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    idx = np.array(list(itertools.combinations(range(normals.shape[0]), 3)))
    if idx.size == 0:
        return np.empty((0, 3))
    mats = normals[idx]  # (m, 3, 3)
    rhs = offsets[idx]
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-12
    sols = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    return sols


def _dedupe_points(points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    if points.shape[0] == 0:
        return points
    out: list[np.ndarray] = []
    for pt in points:
        if not any(np.linalg.norm(pt - q) <= tol for q in out):
            out.append(pt)
    return np.asarray(out)


def _order_in_plane(points: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Order coplanar points by angle around their centroid."""
    frame = _orthonormal_frame(normal)
    center = points.mean(axis=0)
    w = (points - center) @ frame.T
    if w.shape[1] == 1:
        return np.argsort(w[:, 0])
    return np.argsort(np.arctan2(w[:, 1], w[:, 0]))


@dataclass(frozen=True)
class Polytope:
    """Bounded intersection of unit-normal halfspaces ``n.x <= offset``."""

    d: int
    normals: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)
    vertices: np.ndarray = field(repr=False)
    interior_point: np.ndarray = field(repr=False)

    # ---- construction -----------------------------------------------------

    @classmethod
    def from_halfspaces(cls, normals, offsets) -> "Polytope":
        """Build from halfspaces; rejects unbounded or empty input.

        Normals are normalized to unit length; exactly repeated normals
        keep only their tightest offset.  Boundedness requires the
        normals to positively span, which is checked by linear programs
        in the +/- axis directions.
        """
        nr = np.atleast_2d(np.asarray(normals, dtype=float))
        off = np.asarray(offsets, dtype=float).ravel()
        if nr.shape[0] != off.size:
            raise GeometryError("normals and offsets must have matching length")
        d = nr.shape[1]
        if d not in (2, 3):
            raise GeometryError(f"exact geometry supports d in {{2, 3}}, got d={d}")
        lens = np.linalg.norm(nr, axis=1)
        if bool((lens < 1e-12).any()):
            raise GeometryError("zero normal vector in halfspace list")
        off = off / lens
        nr = nr / lens[:, None]
        # Keep the tightest offset for exactly repeated directions.
        keep: list[int] = []
        for i in range(nr.shape[0]):
            dup = None
            for j in keep:
                if np.linalg.norm(nr[i] - nr[j]) <= 1e-12:
                    dup = j
                    break
            if dup is None:
                keep.append(i)
            elif off[i] < off[dup]:
                off[dup] = off[i]
        nr, off = nr[keep], off[keep]

        for direction in np.vstack([np.eye(d), -np.eye(d)]):
            res = linprog(
                -direction, A_ub=nr, b_ub=off, bounds=[(None, None)] * d,
                method="highs",
            )
            if res.status == 3:
                raise GeometryError(
                    "halfspace normals do not positively span: intersection "
                    "is unbounded"
                )
            if res.status == 2:
                raise GeometryError("halfspace intersection is empty")
            if res.status != 0:
                raise GeometryError(f"boundedness check failed: {res.message}")
        # Chebyshev center: interior point maximizing slack.
        res = linprog(
            np.concatenate([np.zeros(d), [-1.0]]),
            A_ub=np.hstack([nr, np.ones((nr.shape[0], 1))]),
            b_ub=off,
            bounds=[(None, None)] * d + [(0, None)],
            method="highs",
        )
        if res.status != 0 or res.x[-1] <= 1e-12:
            raise GeometryError("halfspace intersection has empty interior")
        interior = res.x[:d]

        cand = (
            _pairwise_vertices_2d(nr, off)
            if d == 2
            else _triple_vertices_3d(nr, off)
        )
        scale = max(1.0, float(np.abs(off).max()))
        feas = cand[(cand @ nr.T <= off[None, :] + _TIGHT * scale).all(axis=1)]
        verts = _dedupe_points(feas)
        if verts.shape[0] < d + 1:
            raise GeometryError("degenerate polytope: fewer than d+1 vertices")
        return cls(
            d=d, normals=nr, offsets=off, vertices=verts, interior_point=interior
        )

    @classmethod
    def from_vertices(cls, points) -> "Polytope":
        """Convex hull of a point set, rebuilt in halfspace form."""
        from scipy.spatial import ConvexHull

        pts = np.asarray(points, dtype=float)
        hull = ConvexHull(pts)
        normals = hull.equations[:, :-1]
        offsets = -hull.equations[:, -1]
        return cls.from_halfspaces(normals, offsets)

    # ---- derived structure --------------------------------------------------

    @cached_property
    def faces(self) -> tuple:
        """Facets with positive measure, keyed by supporting halfspace."""
        scale = max(1.0, float(np.abs(self.offsets).max()))
        out: list[Face] = []
        for nrm, off in zip(self.normals, self.offsets):
            tight = np.abs(self.vertices @ nrm - off) <= _TIGHT * scale
            pts = self.vertices[tight]
            if pts.shape[0] < self.d:
                continue  # inactive halfspace
            order = _order_in_plane(pts, nrm)
            pts = pts[order]
            if self.d == 2:
                measure = float(np.linalg.norm(pts[-1] - pts[0]))
                centroid = (pts[0] + pts[-1]) / 2.0
            else:
                measure, centroid = _polygon_area_centroid(pts)
            if measure <= 1e-12:
                continue
            out.append(
                Face(
                    normal=tuple(float(x) for x in nrm),
                    offset=float(off),
                    vertices=pts,
                    measure=measure,
                    centroid=tuple(float(x) for x in centroid),
                )
            )
        return tuple(out)

    @cached_property
    def ordered_vertices(self) -> np.ndarray:
        """Vertices in counterclockwise order (d=2 only)."""
        if self.d != 2:
            raise GeometryError("ordered_vertices is only defined for d=2")
        center = self.vertices.mean(axis=0)
        ang = np.arctan2(
            self.vertices[:, 1] - center[1], self.vertices[:, 0] - center[0]
        )
        return self.vertices[np.argsort(ang)]

    def volume(self) -> float:
        """Shoelace (d=2) or signed tetrahedron fan over faces (d=3)."""
        if self.d == 2:
            pts = self.ordered_vertices
            x, y = pts[:, 0], pts[:, 1]
            return float(abs(x @ np.roll(y, -1) - y @ np.roll(x, -1)) / 2.0)
        total = 0.0
        apex = self.interior_point
        for face in self.faces:
            pts = face.vertices
            for i in range(1, pts.shape[0] - 1):
                mat = np.stack(
                    [pts[0] - apex, pts[i] - apex, pts[i + 1] - apex]
                )
                total += abs(float(np.linalg.det(mat))) / 6.0
        return total

    def volume_divergence(self) -> float:
        """Cross-check volume: (1/d) * sum(offset * face measure)."""
        return float(
            sum(f.offset * f.measure for f in self.faces) / float(self.d)
        )

    def surface_measure(self) -> float:
        return float(sum(f.measure for f in self.faces))

    def closed_surface_defect(self) -> float:
        """Norm of sum(measure * normal); zero on closed surfaces."""
        acc = np.zeros(self.d)
        for f in self.faces:
            acc = acc + f.measure * np.asarray(f.normal)
        return float(np.linalg.norm(acc))

    # ---- queries -------------------------------------------------------------

    def contains(self, points, tol: float = _TIGHT) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = (pts @ self.normals.T <= self.offsets[None, :] + tol).all(axis=1)
        return ok if np.asarray(points).ndim > 1 else ok[0]

    def support(self, direction) -> float:
        """Support function: max of x.u over the polytope."""
        u = np.asarray(direction, dtype=float)
        return float((self.vertices @ u).max())

    def face_plane_gap(self, points) -> np.ndarray:
        """min over faces of (offset - n.x): positive inside, negative out."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        gaps = (self.offsets[None, :] - pts @ self.normals.T).min(axis=1)
        return gaps if np.asarray(points).ndim > 1 else gaps[0]

    def distance(self, points) -> np.ndarray:
        """Euclidean distance to the polytope (0 inside)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(pts.shape[0])
        inside = self.contains(pts)
        todo = np.flatnonzero(~inside)
        for i in todo:
            out[i] = self._point_distance(pts[i])
        return out if np.asarray(points).ndim > 1 else out[0]

    def _point_distance(self, x: np.ndarray) -> float:
        best = np.inf
        for face in self.faces:
            pts = face.vertices
            if self.d == 2:
                best = min(best, _segment_distance(x, pts[0], pts[-1]))
            else:
                best = min(best, _polygon_distance(x, pts, np.asarray(face.normal)))
        return float(best)

    def boundary_distance(self, points) -> np.ndarray:
        """Euclidean distance to the boundary (positive inside and out)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.array([self._point_distance(x) for x in pts])
        return out if np.asarray(points).ndim > 1 else out[0]

    def signed_gap(self, points) -> np.ndarray:
        """Signed Euclidean distance: negative inside, positive outside."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = self.contains(pts)
        out = np.empty(pts.shape[0])
        for i, x in enumerate(pts):
            out[i] = -self._point_distance(x) if inside[i] else self._point_distance(x)
        return out if np.asarray(points).ndim > 1 else out[0]

    def diameter(self) -> float:
        diffs = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.linalg.norm(diffs, axis=-1).max())

    def scaled(self, s: float) -> "Polytope":
        return Polytope.from_halfspaces(self.normals, self.offsets * s)

    def translated(self, shift) -> "Polytope":
        shift = np.asarray(shift, dtype=float)
        return Polytope.from_halfspaces(
            self.normals, self.offsets + self.normals @ shift
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "format": "percoshape-polytope-v1",
                "d": self.d,
                "halfspaces": [
                    {"normal": list(map(float, n)), "offset": float(o)}
                    for n, o in zip(self.normals, self.offsets)
                ],
                "vertices": self.vertices.tolist(),
                "faces": [
                    {
                        "normal": list(f.normal),
                        "offset": f.offset,
                        "measure": f.measure,
                        "centroid": list(f.centroid),
                    }
                    for f in self.faces
                ],
            },
            indent=2,
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Polytope":
        """Rebuild from :meth:`to_json` output via the stored halfspaces."""
        head = json.loads(text)
        if head.get("format") != "percoshape-polytope-v1":
            raise GeometryError(
                f"unknown polytope format {head.get('format')!r}"
            )
        normals = np.array([h["normal"] for h in head["halfspaces"]])
        offsets = np.array([h["offset"] for h in head["halfspaces"]])
        return cls.from_halfspaces(normals, offsets)


def _polygon_area_centroid(pts: np.ndarray) -> tuple[float, np.ndarray]:
    """Area and centroid of an ordered planar polygon in 3-space."""
    area = 0.0
    centroid = np.zeros(3)
    for i in range(1, pts.shape[0] - 1):
        cross = np.cross(pts[i] - pts[0], pts[i + 1] - pts[0])
        a = float(np.linalg.norm(cross)) / 2.0
        area += a
        centroid = centroid + a * (pts[0] + pts[i] + pts[i + 1]) / 3.0
    if area <= 0:
        return 0.0, pts.mean(axis=0)
    return area, centroid / area


def _segment_distance(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else float(np.clip((x - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(x - (a + t * ab)))


def _polygon_distance(x: np.ndarray, pts: np.ndarray, normal: np.ndarray) -> float:
    """Distance from a point to an ordered convex polygon in 3-space."""
    frame = _orthonormal_frame(normal)
    center = pts.mean(axis=0)
    w = (pts - center) @ frame.T
    q = (x - center) @ frame.T
    t = float((x - center) @ normal)
    k = pts.shape[0]
    inside = True
    for i in range(k):
        a, b = w[i], w[(i + 1) % k]
        edge = b - a
        nrm = np.array([edge[1], -edge[0]])
        if nrm @ (w.mean(axis=0) - a) > 0:
            nrm = -nrm
        if (q - a) @ nrm > 1e-12:
            inside = False
            break
    if inside:
        return abs(t)
    best = np.inf
    for i in range(k):
        best = min(best, _segment_distance(x, pts[i], pts[(i + 1) % k]))
    return float(best)


# ---------------------------------------------------------------------------
# Wulff construction and energies
# ---------------------------------------------------------------------------


def wulff_from_norm(table: NormTable) -> Polytope:
    """Halfspace intersection ``{x : x.u <= value(u)}`` over the table."""
    if len(table.rows) < table.d + 1:
        raise GeometryError(
            f"need at least {table.d + 1} directions, got {len(table.rows)}"
        )
    return Polytope.from_halfspaces(table.directions, table.values)


def polytope_volume(P: Polytope) -> float:
    return P.volume()


def surface_energy(P: Polytope, table: NormTable, interpolate: bool = True) -> float:
    """Sum over faces of (norm at face normal) times face measure."""
    total = 0.0
    for face in P.faces:
        total += table.value(face.normal, interpolate=interpolate) * face.measure
    return float(total)


def dilate_to_volume(P: Polytope, target_volume: float) -> tuple[Polytope, float]:
    """Scale so the volume hits the target; returns (scaled, factor)."""
    if target_volume <= 0:
        raise GeometryError(f"target volume must be positive, got {target_volume}")
    vol = P.volume()
    # sqrt/cbrt evaluate float-exactly on exact dyadic ratios, which the
    # endpoint fixtures rely on.
    ratio = target_volume / vol
    s = float(np.sqrt(ratio)) if P.d == 2 else float(np.cbrt(ratio))
    scaled = P.scaled(float(s))
    new_vol = scaled.volume()
    if abs(new_vol - target_volume) > 1e-9 * max(1.0, abs(target_volume)):
        raise GeometryError(
            f"dilation missed target volume: {new_vol} vs {target_volume}"
        )
    return scaled, float(s)


@dataclass(frozen=True)
class WulffShape:
    """Crystal normalized so its volume equals 1/theta."""

    polytope: Polytope
    table_id: str
    dilation: float
    theta_used: float

    def __post_init__(self) -> None:
        if not 0.0 < self.theta_used <= 1.0:
            raise ConfigError(f"theta must lie in (0, 1], got {self.theta_used}")
        target = 1.0 / self.theta_used
        vol = self.polytope.volume()
        if abs(vol - target) > 1e-9 * target:
            raise GeometryError(
                f"crystal volume {vol} differs from 1/theta = {target} beyond "
                "1e-9 relative"
            )


def build_wulff(table: NormTable, theta: float) -> WulffShape:
    """Full chain: halfspace intersection, then dilation to volume 1/theta."""
    if not 0.0 < theta <= 1.0:
        raise ConfigError(f"theta must lie in (0, 1], got {theta}")
    base = wulff_from_norm(table)
    scaled, s = dilate_to_volume(base, 1.0 / theta)
    return WulffShape(
        polytope=scaled, table_id=table.table_id(), dilation=s, theta_used=theta
    )


@dataclass(frozen=True)
class IsoperimetricValue:
    energy: float
    ratio: float


def isoperimetric_constant(
    W: WulffShape, table: NormTable, interpolate: bool = True
) -> IsoperimetricValue:
    """Surface energy of the normalized crystal, with its ratio recheck.

    Returns the energy and the raw ratio energy / (theta * volume); for a
    crystal normalized to volume 1/theta the two agree to 1e-9 relative,
    which is asserted.
    """
    energy = surface_energy(W.polytope, table, interpolate=interpolate)
    vol = W.polytope.volume()
    ratio = energy / (W.theta_used * vol)
    if abs(ratio - energy) > 1e-9 * max(1.0, abs(energy)):
        raise GeometryError(
            f"normalization check failed: ratio {ratio} vs energy {energy}"
        )
    return IsoperimetricValue(energy=float(energy), ratio=float(ratio))


def inner_outer_approximation(
    P: Polytope, samples, table: NormTable | None = None
) -> tuple[Polytope, Polytope, dict]:
    """Convexity sandwich from boundary samples.

    ``samples`` is either a count of ray-cast directions (equally spaced
    on the circle for d=2, quasi-uniform for d=3) or an explicit array
    of boundary points.  The inner body is the hull of the points; the
    outer body intersects the supporting halfspaces of every face each
    point lies on.  Surface energies (constant norm 1 when no table is
    given) bracket the target's energy by convex monotonicity.
    """
    from .flows import circle_directions, fibonacci_sphere_directions

    if isinstance(samples, (int, np.integer)):
        if samples < P.d + 1:
            raise GeometryError("need at least d+1 boundary samples")
        dirs = (
            circle_directions(int(samples))
            if P.d == 2
            else fibonacci_sphere_directions(int(samples))
        )
        pts = np.array([_ray_boundary(P, u) for u in dirs])
    else:
        pts = np.atleast_2d(np.asarray(samples, dtype=float))
        on = np.abs(P.face_plane_gap(pts)) <= 1e-7
        if not bool(on.all()):
            raise GeometryError("all sample points must lie on the boundary")
    inner = Polytope.from_vertices(pts)
    scale = max(1.0, float(np.abs(P.offsets).max()))
    normals, offsets = [], []
    for x in pts:
        slacks = P.offsets - P.normals @ x
        for i in np.flatnonzero(np.abs(slacks) <= 1e-7 * scale):
            normals.append(P.normals[i])
            offsets.append(P.offsets[i])
    outer = Polytope.from_halfspaces(np.asarray(normals), np.asarray(offsets))
    if table is None:
        mesh = (
            circle_directions(360)
            if P.d == 2
            else fibonacci_sphere_directions(512)
        )
        table = analytic_norm_table(lambda u: 1.0, mesh, p=1.0)
    e_in = surface_energy(inner, table)
    e_mid = surface_energy(P, table)
    e_out = surface_energy(outer, table)
    report = {
        "inner_energy": e_in,
        "energy": e_mid,
        "outer_energy": e_out,
        "gap": e_out - e_in,
    }
    return inner, outer, report


def _ray_boundary(P: Polytope, direction: np.ndarray) -> np.ndarray:
    """Boundary point hit by the ray from the interior point along u."""
    x0 = P.interior_point
    u = np.asarray(direction, dtype=float)
    num = P.offsets - P.normals @ x0
    den = P.normals @ u
    with np.errstate(divide="ignore"):
        ts = np.where(den > 1e-12, num / den, np.inf)
    t = float(ts.min())
    if not np.isfinite(t):
        raise GeometryError("ray cast failed; polytope unbounded?")
    return x0 + t * u


def analytic_norm_table(fn, directions, p: float = 1.0, seed: int = 0) -> NormTable:
    """Tabulate a closed-form norm on a direction set (no estimation)."""
    dirs = np.atleast_2d(np.asarray(directions, dtype=float))
    dirs = dirs / np.linalg.norm(dirs, axis=1)[:, None]
    rows = tuple(
        NormRow(
            direction=tuple(float(x) for x in u),
            beta_hat=float(fn(u)),
            ci_radius=0.0,
            n=0,
            h=0.0,
            replicates=0,
        )
        for u in dirs
    )
    return NormTable(d=dirs.shape[1], p=p, seed=seed, rows=rows)
