"""Finite boxes of the hypercubic lattice and bond configurations.

A simulation box is ``[-L, L]^d`` intersected with the integer lattice.
Vertices are addressed by *rank*: row-major order over coordinates with
the first coordinate most significant, so rank order coincides with
lexicographic order of coordinate tuples.

Edges carry a *canonical index*: the edge from ``x`` to ``x + e_axis``
(the tail ``x`` has ``x[axis] < L``) gets index ``axis * V + rank(x)``
where ``V`` is the vertex count.  That index space is sparse (tails on
the top face of an axis have no outgoing edge), so bond configurations
store one bit per *valid* edge, in increasing canonical order; the
canonical index itself is what keys the per-edge uniform variate and
what appears in serialized form.

Serialization is a one-line JSON header followed by the packed bit
array, and regeneration from ``(box, p, seed)`` is bit-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import CapacityError, ConfigError
from .rng import mix_seed, uniforms_at

__all__ = [
    "BoxSpec",
    "BondConfiguration",
    "sample_configuration",
    "MAX_EDGES",
    "PC_REFERENCE",
]

# Refuse boxes whose edge array would not be addressable comfortably.
MAX_EDGES = 2**31

# Reference critical probabilities (literature values): exact 1/2 in d=2,
# numerical estimate in d=3.  Used only to warn, never to refuse.
PC_REFERENCE = {2: 0.5, 3: 0.2488}

_SAMPLE_STAGE = "edges"


@dataclass(frozen=True)
class BoxSpec:
    """Padded simulation box ``[-L, L]^d`` with an inner analysis region.

    The analysis region is ``[-(L-M), L-M]^d``; subgraph boundary counts
    are only exact there, since every incident edge of an analysis vertex
    exists in the padded box.  ``margin`` defaults to ``ceil(L / 5)``.
    """

    d: int
    half_width: int
    margin: int = -1  # sentinel: filled with ceil(L/5) in __post_init__

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ConfigError(f"dimension must be >= 2, got {self.d}")
        if self.half_width < 1:
            raise ConfigError(f"half_width must be >= 1, got {self.half_width}")
        if self.margin < 0:
            object.__setattr__(self, "margin", -(-self.half_width // 5))
        if not 0 <= self.margin < self.half_width:
            raise ConfigError(
                f"margin must satisfy 0 <= margin < half_width, got "
                f"margin={self.margin}, half_width={self.half_width}"
            )

    # ---- basic counts -------------------------------------------------

    @property
    def side(self) -> int:
        """Vertices per axis, ``2L + 1``."""
        return 2 * self.half_width + 1

    @property
    def n_vertices(self) -> int:
        return self.side**self.d

    @property
    def n_edges(self) -> int:
        """Exact edge count: ``d * side^(d-1) * 2L``."""
        return self.d * self.side ** (self.d - 1) * (2 * self.half_width)

    @property
    def analysis_half_width(self) -> int:
        return self.half_width - self.margin

    # ---- vertex addressing -------------------------------------------

    def axis_stride(self, axis: int) -> int:
        """Rank increment of a unit step along ``axis``."""
        return self.side ** (self.d - 1 - axis)

    def vertex_rank(self, coords: np.ndarray) -> np.ndarray:
        """Rank(s) of coordinate tuples in ``[-L, L]^d`` (vectorized)."""
        c = np.atleast_2d(np.asarray(coords, dtype=np.int64))
        strides = np.array(
            [self.axis_stride(a) for a in range(self.d)], dtype=np.int64
        )
        ranks = (c + self.half_width) @ strides
        return ranks if np.asarray(coords).ndim > 1 else ranks[0]

    def vertex_coords(self, ranks: np.ndarray) -> np.ndarray:
        """Coordinate tuples of vertex rank(s), shape ``(..., d)``."""
        r = np.asarray(ranks, dtype=np.int64)
        out = np.empty(r.shape + (self.d,), dtype=np.int64)
        for a in range(self.d):
            out[..., a] = (r // self.axis_stride(a)) % self.side - self.half_width
        return out

    @property
    def origin_rank(self) -> int:
        return int(self.vertex_rank(np.zeros(self.d, dtype=np.int64)))

    # ---- vertex masks -------------------------------------------------

    @cached_property
    def _all_coords(self) -> np.ndarray:
        return self.vertex_coords(np.arange(self.n_vertices))

    @cached_property
    def outer_face_mask(self) -> np.ndarray:
        """True where a vertex lies on the outer face of the padded box."""
        return (np.abs(self._all_coords) == self.half_width).any(axis=1)

    @cached_property
    def analysis_mask(self) -> np.ndarray:
        """True where a vertex lies inside the analysis region."""
        return (np.abs(self._all_coords) <= self.analysis_half_width).all(axis=1)

    @cached_property
    def analysis_boundary_mask(self) -> np.ndarray:
        """True on the boundary layer of the analysis region."""
        hw = self.analysis_half_width
        on_face = (np.abs(self._all_coords) == hw).any(axis=1)
        return on_face & self.analysis_mask

    # ---- edge addressing ----------------------------------------------

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(tails, heads, axes, canonical)`` over all valid edges.

        Arrays are sorted by canonical index (axis-major, then tail rank),
        which is the storage order of configuration bits.
        """
        if self.n_edges > MAX_EDGES:
            raise CapacityError(
                f"box has {self.n_edges} edges, exceeding the "
                f"{MAX_EDGES}-edge addressing budget"
            )
        v = self.n_vertices
        ranks = np.arange(v, dtype=np.int64)
        tails_parts, heads_parts, axes_parts, canon_parts = [], [], [], []
        for a in range(self.d):
            coord = (ranks // self.axis_stride(a)) % self.side
            valid = coord < self.side - 1
            t = ranks[valid]
            tails_parts.append(t)
            heads_parts.append(t + self.axis_stride(a))
            axes_parts.append(np.full(t.shape, a, dtype=np.int8))
            canon_parts.append(a * v + t)
        return (
            np.concatenate(tails_parts),
            np.concatenate(heads_parts),
            np.concatenate(axes_parts),
            np.concatenate(canon_parts),
        )

    @cached_property
    def edge_position_lookup(self) -> np.ndarray:
        """Map ``(axis, tail rank) -> bit position``; -1 where no edge."""
        tails, _, axes, _ = self.edge_arrays
        lookup = np.full((self.d, self.n_vertices), -1, dtype=np.int64)
        lookup[axes.astype(np.int64), tails] = np.arange(tails.size)
        return lookup

    def edge_position(self, axis: int, tail_rank: int) -> int:
        pos = int(self.edge_position_lookup[axis, tail_rank])
        if pos < 0:
            raise ConfigError(
                f"no edge along axis {axis} out of vertex rank {tail_rank}"
            )
        return pos

    def header(self) -> dict:
        return {
            "format": "percoshape-bond-v1",
            "d": self.d,
            "half_width": self.half_width,
            "margin": self.margin,
        }


@dataclass(frozen=True)
class BondConfiguration:
    """Open/closed status of every edge of a box, regenerable from seed."""

    box: BoxSpec
    p: float
    seed: int
    open_: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.open_.shape != (self.box.n_edges,):
            raise ConfigError(
                f"bit array has length {self.open_.shape[0]}, expected the "
                f"exact edge count {self.box.n_edges}"
            )

    @property
    def n_open(self) -> int:
        return int(self.open_.sum())

    @property
    def open_fraction(self) -> float:
        return self.n_open / self.box.n_edges

    def content_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(json.dumps(self._header(), sort_keys=True).encode())
        h.update(np.packbits(self.open_).tobytes())
        return h.hexdigest()

    def _header(self) -> dict:
        hdr = self.box.header()
        hdr.update(
            {"p": self.p, "seed": self.seed, "edge_count": self.box.n_edges}
        )
        return hdr

    def to_bytes(self) -> bytes:
        """One-line JSON header, newline, packed bit array."""
        header = json.dumps(self._header(), sort_keys=True).encode()
        return header + b"\n" + np.packbits(self.open_).tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "BondConfiguration":
        newline = blob.index(b"\n")
        hdr = json.loads(blob[:newline].decode())
        if hdr.get("format") != "percoshape-bond-v1":
            raise ConfigError(f"unknown serialization format {hdr.get('format')!r}")
        box = BoxSpec(hdr["d"], hdr["half_width"], hdr["margin"])
        n = box.n_edges
        if hdr["edge_count"] != n:
            raise ConfigError(
                f"header edge count {hdr['edge_count']} does not match box ({n})"
            )
        bits = np.unpackbits(
            np.frombuffer(blob[newline + 1 :], dtype=np.uint8), count=n
        ).astype(bool)
        return cls(box=box, p=hdr["p"], seed=hdr["seed"], open_=bits)


def sample_configuration(box: BoxSpec, p: float, seed: int) -> BondConfiguration:
    """Sample i.i.d. bond percolation on the box.

    Each edge draws the uniform keyed by its canonical index from the
    SplitMix64 stream ``mix_seed(seed, "edges")`` and is open iff the
    uniform is strictly below ``p``.  Deterministic per ``(box, p, seed)``
    and monotone in ``p`` under a shared seed.
    """
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"p must lie in [0, 1], got {p}")
    if box.n_edges > MAX_EDGES:
        raise CapacityError(
            f"box has {box.n_edges} edges, exceeding the "
            f"{MAX_EDGES}-edge addressing budget"
        )
    _, _, _, canonical = box.edge_arrays
    u = uniforms_at(mix_seed(seed, _SAMPLE_STAGE), canonical.astype(np.uint64))
    return BondConfiguration(box=box, p=float(p), seed=int(seed), open_=u < p)
