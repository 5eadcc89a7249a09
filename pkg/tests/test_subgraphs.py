"""Anchored vertex sets and exact boundary/volume ratio records."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import open_edge_pairs
from percoshape import (
    BoxSpec,
    ConfigError,
    RatioResult,
    make_anchored_subgraph,
    sample_configuration,
)
from percoshape.subgraphs import is_connected_open


def _square_mask(box: BoxSpec, k: int) -> np.ndarray:
    coords = box.vertex_coords(np.arange(box.n_vertices))
    return np.all((coords >= 0) & (coords < k), axis=1)


def test_make_anchored_subgraph_counts_square():
    config = sample_configuration(BoxSpec(2, 6, 2), 1.0, 0)
    sub = make_anchored_subgraph(config, _square_mask(config.box, 2))
    assert sub.volume == 4
    assert sub.boundary == 8
    assert sub.connected
    assert sub.recount_boundary() == 8
    assert oracles.boundary_count_direct(open_edge_pairs(config), sub.mask) == 8


def test_make_anchored_subgraph_accepts_rank_arrays():
    config = sample_configuration(BoxSpec(2, 6, 2), 1.0, 0)
    mask = _square_mask(config.box, 2)
    from_ranks = make_anchored_subgraph(config, np.flatnonzero(mask))
    from_mask = make_anchored_subgraph(config, mask)
    assert np.array_equal(from_ranks.mask, from_mask.mask)
    assert np.array_equal(from_ranks.vertices, np.sort(np.flatnonzero(mask)))


def test_make_anchored_subgraph_requires_origin():
    config = sample_configuration(BoxSpec(2, 6, 2), 1.0, 0)
    box = config.box
    mask = np.zeros(box.n_vertices, dtype=bool)
    mask[box.vertex_rank(np.array([[1, 1]]))[0]] = True
    with pytest.raises(ConfigError):
        make_anchored_subgraph(config, mask)


def test_make_anchored_subgraph_requires_open_connectivity():
    box = BoxSpec(2, 6, 2)
    config = sample_configuration(box, 0.0, 0)
    mask = np.zeros(box.n_vertices, dtype=bool)
    mask[box.origin_rank] = True
    mask[box.vertex_rank(np.array([[0, 1]]))[0]] = True
    with pytest.raises(ConfigError):
        make_anchored_subgraph(config, mask)
    unchecked = make_anchored_subgraph(config, mask, verify_connected=False)
    assert not unchecked.connected
    assert unchecked.volume == 2


def test_is_connected_open_basics():
    box = BoxSpec(2, 4, 1)
    full = sample_configuration(box, 1.0, 0)
    none = sample_configuration(box, 0.0, 0)
    mask = np.zeros(box.n_vertices, dtype=bool)
    mask[box.origin_rank] = True
    assert is_connected_open(full, mask)
    assert is_connected_open(none, mask)  # singleton is trivially connected
    mask[box.vertex_rank(np.array([[0, 1]]))[0]] = True
    assert is_connected_open(full, mask)
    assert not is_connected_open(none, mask)


def test_ratio_result_validation():
    with pytest.raises(ConfigError):
        RatioResult(boundary=4, volume=0, kind="parametric", n=5)
    with pytest.raises(ConfigError):
        RatioResult(boundary=-1, volume=2, kind="parametric", n=5)
    with pytest.raises(ConfigError):
        RatioResult(boundary=1, volume=2, kind="made-up", n=5)


def test_ratio_result_exact_comparison():
    a = RatioResult(boundary=1, volume=3, kind="parametric", n=5)
    b = RatioResult(boundary=2, volume=6, kind="exact-oracle", n=5)
    c = RatioResult(boundary=1, volume=2, kind="parametric", n=5)
    assert a.compare(b) == 0
    assert a.not_worse_than(b) and b.not_worse_than(a)
    assert a.compare(c) == -1
    assert c.compare(a) == 1
    assert a.as_dict()["ratio"] == pytest.approx(1 / 3)


@given(
    st.integers(min_value=0, max_value=10**9),
    st.integers(min_value=1, max_value=10**9),
    st.integers(min_value=0, max_value=10**9),
    st.integers(min_value=1, max_value=10**9),
)
@settings(max_examples=100, deadline=None)
def test_ratio_comparison_is_exact_at_scale(b1, v1, b2, v2):
    # Cross-multiplied ordering agrees with exact rational ordering even
    # where floating division would tie.
    from fractions import Fraction

    a = RatioResult(boundary=b1, volume=v1, kind="parametric", n=1)
    b = RatioResult(boundary=b2, volume=v2, kind="parametric", n=1)
    expected = (Fraction(b1, v1) > Fraction(b2, v2)) - (
        Fraction(b1, v1) < Fraction(b2, v2)
    )
    assert a.compare(b) == expected
    assert a.compare(b) == -b.compare(a)


def test_from_subgraph_copies_the_counts():
    config = sample_configuration(BoxSpec(2, 6, 2), 1.0, 0)
    sub = make_anchored_subgraph(config, _square_mask(config.box, 3))
    rr = RatioResult.from_subgraph(sub, "local-search", n=7)
    assert (rr.boundary, rr.volume, rr.kind, rr.n) == (12, 9, "local-search", 7)
