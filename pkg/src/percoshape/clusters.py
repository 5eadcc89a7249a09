"""Cluster labeling, infinite-cluster surrogate, and density estimators.

The infinite cluster is surrogated in finite volume by the origin's
cluster *conditioned to touch the outer face* of the padded box; samples
whose origin cluster misses the outer face are rejected, mirroring
conditioning on the origin belonging to the infinite cluster.

Density estimation reports two estimators side by side: the touching
frequency (primary) and the largest-cluster density over the analysis
region (cross-check).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError
from .lattice import BondConfiguration, BoxSpec, sample_configuration
from .rng import mix_seed

__all__ = [
    "ClusterLabeling",
    "PercolationEstimates",
    "GoodCubeReport",
    "open_adjacency",
    "label_clusters",
    "infinite_cluster_proxy",
    "open_edge_boundary",
    "estimate_theta",
    "good_cube_scan",
]


def open_adjacency(
    config: BondConfiguration, open_mask: np.ndarray | None = None
) -> sp.csr_matrix:
    """Symmetric boolean adjacency over vertex ranks using open edges.

    ``open_mask`` optionally replaces the configuration's own edge states,
    e.g. to study reachability after deleting a cutset.
    """
    box = config.box
    tails, heads, _, _ = box.edge_arrays
    states = config.open_ if open_mask is None else np.asarray(open_mask, dtype=bool)
    if states.shape != config.open_.shape:
        raise ConfigError("open_mask must have one entry per lattice edge")
    t, h = tails[states], heads[states]
    n = box.n_vertices
    data = np.ones(2 * t.size, dtype=np.int8)
    return sp.csr_matrix(
        (data, (np.concatenate([t, h]), np.concatenate([h, t]))), shape=(n, n)
    )


@dataclass(frozen=True)
class ClusterLabeling:
    """Partition of box vertices into open-connected clusters.

    ``roots[v]`` is the smallest vertex rank in ``v``'s cluster, so two
    vertices share a cluster iff they share a root, and root order is
    lexicographic order of representative coordinates.
    """

    box: BoxSpec
    roots: np.ndarray = field(repr=False)

    @cached_property
    def _root_table(self) -> tuple[np.ndarray, np.ndarray]:
        uniq, counts = np.unique(self.roots, return_counts=True)
        return uniq, counts

    @property
    def cluster_roots(self) -> np.ndarray:
        """Sorted array of cluster representatives (smallest member rank)."""
        return self._root_table[0]

    @property
    def cluster_sizes(self) -> np.ndarray:
        """Sizes aligned with :attr:`cluster_roots`; sums to vertex count."""
        return self._root_table[1]

    def size_of(self, root: int) -> int:
        uniq, counts = self._root_table
        i = np.searchsorted(uniq, root)
        if i >= uniq.size or uniq[i] != root:
            raise ConfigError(f"{root} is not a cluster root")
        return int(counts[i])

    @cached_property
    def largest_root(self) -> int:
        """Root of the largest cluster; ties go to the smallest root."""
        uniq, counts = self._root_table
        return int(uniq[np.argmax(counts)])  # uniq ascending => smallest root

    @property
    def origin_root(self) -> int:
        return int(self.roots[self.box.origin_rank])

    def mask_of(self, root: int) -> np.ndarray:
        """Boolean vertex mask of the cluster with the given root."""
        return self.roots == root


def label_clusters(config: BondConfiguration) -> ClusterLabeling:
    """Label open clusters; isolated vertices are singleton clusters."""
    adj = open_adjacency(config)
    _, comp = connected_components(adj, directed=False)
    n = config.box.n_vertices
    # Map arbitrary component ids to the minimum vertex rank they contain.
    # np.minimum.at over ranks gives each component its smallest member.
    min_rank = np.full(comp.max() + 1, n, dtype=np.int64)
    np.minimum.at(min_rank, comp, np.arange(n, dtype=np.int64))
    return ClusterLabeling(box=config.box, roots=min_rank[comp])


def infinite_cluster_proxy(labeling: ClusterLabeling, box: BoxSpec) -> np.ndarray:
    """Boolean vertex mask of the origin's cluster when it reaches the face.

    Returns the all-false mask when the origin cluster does not touch the
    outer face of the padded box: the sample is *rejected* for anchored
    experiments, which mirrors conditioning the origin into the infinite
    cluster.
    """
    mask = labeling.mask_of(labeling.origin_root)
    if bool((mask & box.outer_face_mask).any()):
        return mask
    return np.zeros(box.n_vertices, dtype=bool)


def _vertex_mask(H, n: int) -> np.ndarray:
    """Accept a boolean mask, an index array, or a ``.mask`` carrier."""
    if hasattr(H, "mask"):
        return np.asarray(H.mask, dtype=bool)
    arr = np.asarray(H)
    if arr.dtype == bool:
        return arr
    mask = np.zeros(n, dtype=bool)
    mask[arr.astype(np.int64)] = True
    return mask


def open_edge_boundary(H, config: BondConfiguration) -> int:
    """Exact count of open edges with exactly one endpoint in ``H``.

    ``H`` may be a boolean vertex mask, an array of vertex ranks, or any
    object exposing a boolean ``mask`` attribute.  Every vertex of ``H``
    must lie in the analysis region, so each incident lattice edge exists
    in the padded box and the count is free of truncation effects.
    """
    box = config.box
    mask = _vertex_mask(H, box.n_vertices)
    if bool((mask & ~box.analysis_mask).any()):
        offender = int(np.flatnonzero(mask & ~box.analysis_mask)[0])
        raise ConfigError(
            f"vertex rank {offender} of H lies in the margin band; boundary "
            "counts are only exact inside the analysis region"
        )
    tails, heads, _, _ = box.edge_arrays
    return int((config.open_ & (mask[tails] != mask[heads])).sum())


@dataclass(frozen=True)
class PercolationEstimates:
    """Density estimates with 95% normal-approximation half-widths."""

    theta_hat: float
    ci_radius: float
    replicates: int
    alt_theta_hat: float
    alt_ci_radius: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta_hat <= 1.0:
            raise ConfigError(f"theta_hat out of [0,1]: {self.theta_hat}")
        if self.ci_radius < 0 or self.alt_ci_radius < 0:
            raise ConfigError("confidence radius must be nonnegative")


def estimate_theta(
    d: int, p: float, box: BoxSpec, replicates: int, seed: int
) -> PercolationEstimates:
    """Estimate the origin-in-infinite-cluster density by Monte Carlo.

    Primary estimator: frequency of {origin cluster touches the outer
    face}.  Cross-check estimator: mean largest-cluster density over the
    analysis region.  Exact at the endpoints: p=1 gives 1, p=0 gives 0.
    """
    if d != box.d:
        raise ConfigError(f"d={d} disagrees with box dimension {box.d}")
    if replicates < 1:
        raise ConfigError(f"replicates must be >= 1, got {replicates}")
    touches = np.zeros(replicates, dtype=bool)
    densities = np.zeros(replicates, dtype=float)
    analysis_count = (2 * box.analysis_half_width + 1) ** box.d
    for r in range(replicates):
        config = sample_configuration(box, p, mix_seed(seed, "theta", r))
        labeling = label_clusters(config)
        mask = labeling.mask_of(labeling.origin_root)
        touches[r] = bool((mask & box.outer_face_mask).any())
        largest = labeling.mask_of(labeling.largest_root)
        densities[r] = (largest & box.analysis_mask).sum() / analysis_count
    theta_hat = float(touches.mean())
    ci = 1.96 * float(np.sqrt(theta_hat * (1.0 - theta_hat) / replicates))
    alt = float(densities.mean())
    alt_ci = 1.96 * float(densities.std(ddof=1) / np.sqrt(replicates)) if replicates > 1 else 0.0
    return PercolationEstimates(
        theta_hat=theta_hat,
        ci_radius=ci,
        replicates=replicates,
        alt_theta_hat=alt,
        alt_ci_radius=alt_ci,
    )


@dataclass(frozen=True)
class GoodCubeReport:
    """Per-cube renormalization diagnostic over the analysis region.

    A cube is *good* when its 3^d clipped neighborhood contains exactly
    one open cluster of l-infinity diameter greater than the cube side
    and the surrogate-cluster density over the cube sits strictly inside
    ``(theta_hat - delta, theta_hat + delta)``.
    """

    k: int
    delta: float
    theta_used: float
    low_corners: np.ndarray = field(repr=False)
    unique_flags: np.ndarray = field(repr=False)
    density_flags: np.ndarray = field(repr=False)
    densities: np.ndarray = field(repr=False)

    @property
    def side(self) -> int:
        return 2 * self.k

    @property
    def good_flags(self) -> np.ndarray:
        return self.unique_flags & self.density_flags

    @property
    def good_fraction(self) -> float:
        return float(self.good_flags.mean())


def _unique_large_cluster(
    adj: sp.csr_matrix, coords: np.ndarray, idx: np.ndarray, threshold: int
) -> bool:
    """True iff the induced subgraph has exactly one cluster of
    l-infinity diameter strictly greater than ``threshold``."""
    sub = adj[idx][:, idx]
    _, comp = connected_components(sub, directed=False)
    large = 0
    for c in range(comp.max() + 1):
        pts = coords[idx[comp == c]]
        if int((pts.max(axis=0) - pts.min(axis=0)).max()) > threshold:
            large += 1
            if large > 1:
                return False
    return large == 1


def good_cube_scan(
    config: BondConfiguration, k: int, delta: float, theta_hat: float
) -> GoodCubeReport:
    """Tile the analysis region with side-2k cubes and flag the good ones.

    Cubes tile from the low corner of the analysis region; partial cubes
    at the high end are excluded.  Each cube's neighborhood is the 3^d
    surrounding block clipped to the analysis region.  Density uses the
    origin-anchored surrogate cluster against continuum cube volume
    ``(2k)^d``.
    """
    box = config.box
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    side = 2 * k
    hw = box.analysis_half_width
    region_side = 2 * hw + 1
    m = region_side // side
    if m < 1:
        raise ConfigError(
            f"cube side {side} exceeds the analysis region side {region_side}"
        )
    adj = open_adjacency(config)
    labeling = label_clusters(config)
    proxy = infinite_cluster_proxy(labeling, box)
    coords = box.vertex_coords(np.arange(box.n_vertices))

    axis_starts = -hw + side * np.arange(m)
    grids = np.meshgrid(*([axis_starts] * box.d), indexing="ij")
    low_corners = np.stack([g.ravel() for g in grids], axis=1)

    n_cubes = low_corners.shape[0]
    unique_flags = np.zeros(n_cubes, dtype=bool)
    density_flags = np.zeros(n_cubes, dtype=bool)
    densities = np.zeros(n_cubes, dtype=float)
    threshold = side
    for j, low in enumerate(low_corners):
        in_cube = np.ones(box.n_vertices, dtype=bool)
        in_hood = np.ones(box.n_vertices, dtype=bool)
        for a in range(box.d):
            c = coords[:, a]
            in_cube &= (c >= low[a]) & (c < low[a] + side)
            in_hood &= (c >= max(low[a] - side, -hw)) & (
                c < min(low[a] + 2 * side, hw + 1)
            )
        densities[j] = proxy[in_cube].sum() / float(side**box.d)
        density_flags[j] = (
            theta_hat - delta < densities[j] < theta_hat + delta
        )
        unique_flags[j] = _unique_large_cluster(
            adj, coords, np.flatnonzero(in_hood), threshold
        )
    return GoodCubeReport(
        k=k,
        delta=delta,
        theta_used=theta_hat,
        low_corners=low_corners,
        unique_flags=unique_flags,
        density_flags=density_flags,
        densities=densities,
    )
