"""Anchored subgraphs and boundary/volume ratio records.

An anchored subgraph is a set of vertices containing the origin inside
the open graph of one bond configuration; the boundary-to-volume ratio
records for such sets are the currency of the profile solvers, so ratio
comparisons here are exact integer cross-multiplications, never float
divisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ConfigError
from .lattice import BondConfiguration

__all__ = [
    "AnchoredSubgraph",
    "RatioResult",
    "RATIO_KINDS",
    "make_anchored_subgraph",
    "is_connected_open",
]

RATIO_KINDS = ("exact-oracle", "parametric", "local-search", "polytope-certificate")


def is_connected_open(config: BondConfiguration, mask: np.ndarray) -> bool:
    """True iff the masked vertices form one open-connected component."""
    idx = np.flatnonzero(mask)
    if idx.size <= 1:
        return idx.size == 1
    from .clusters import open_adjacency

    sub = open_adjacency(config)[idx][:, idx]
    n_comp, _ = connected_components(sub, directed=False)
    return n_comp == 1


@dataclass(frozen=True)
class AnchoredSubgraph:
    """Origin-anchored vertex set within one bond configuration.

    ``mask`` is boolean over vertex ranks.  ``connected`` records that
    open-graph connectivity was verified at construction time; ``volume``
    and ``boundary`` cache the vertex count and the open-edge boundary
    count, both recomputable.
    """

    config: BondConfiguration
    mask: np.ndarray = field(repr=False)
    connected: bool
    volume: int
    boundary: int

    @property
    def box(self):
        return self.config.box

    @cached_property
    def vertices(self) -> np.ndarray:
        """Sorted vertex ranks of the set."""
        return np.flatnonzero(self.mask)

    @property
    def config_id(self) -> str:
        return self.config.content_hash()

    def recount_boundary(self) -> int:
        from .clusters import open_edge_boundary

        return open_edge_boundary(self.mask, self.config)


def make_anchored_subgraph(
    config: BondConfiguration,
    vertices: np.ndarray,
    *,
    verify_connected: bool = True,
) -> AnchoredSubgraph:
    """Build and validate an anchored subgraph from a mask or rank array.

    Checks that the origin belongs to the set; when ``verify_connected``
    is set, verifies open-graph connectivity (every anchored set that is
    open-connected and contains the origin automatically lies inside the
    origin's cluster).
    """
    from .clusters import _vertex_mask, open_edge_boundary

    box = config.box
    mask = _vertex_mask(vertices, box.n_vertices)
    if not mask[box.origin_rank]:
        raise ConfigError("anchored subgraph must contain the origin")
    connected = False
    if verify_connected:
        if not is_connected_open(config, mask):
            raise ConfigError("vertex set is not open-connected")
        connected = True
    return AnchoredSubgraph(
        config=config,
        mask=mask,
        connected=connected,
        volume=int(mask.sum()),
        boundary=open_edge_boundary(mask, config),
    )


@dataclass(frozen=True)
class RatioResult:
    """Boundary/volume record for one candidate set.

    ``ratio`` is derived from the exact integer fields; ordering helpers
    cross-multiply integers so comparisons carry no rounding.
    """

    boundary: int
    volume: int
    kind: str
    n: int

    def __post_init__(self) -> None:
        if self.kind not in RATIO_KINDS:
            raise ConfigError(f"unknown ratio kind {self.kind!r}")
        if self.volume <= 0:
            raise ConfigError(f"volume must be positive, got {self.volume}")
        if self.boundary < 0:
            raise ConfigError(f"boundary must be nonnegative, got {self.boundary}")

    @property
    def ratio(self) -> float:
        return self.boundary / self.volume

    def compare(self, other: "RatioResult") -> int:
        """Sign of ``self.ratio - other.ratio`` by exact cross-multiplication."""
        lhs = self.boundary * other.volume
        rhs = other.boundary * self.volume
        return (lhs > rhs) - (lhs < rhs)

    def not_worse_than(self, other: "RatioResult") -> bool:
        return self.compare(other) <= 0

    def as_dict(self) -> dict:
        return {
            "boundary": self.boundary,
            "volume": self.volume,
            "ratio": self.ratio,
            "kind": self.kind,
            "n": self.n,
        }

    @classmethod
    def from_subgraph(
        cls, sub: AnchoredSubgraph, kind: str, n: int
    ) -> "RatioResult":
        return cls(boundary=sub.boundary, volume=sub.volume, kind=kind, n=n)
