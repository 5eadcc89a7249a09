"""Cylinder discretization, exact min-cuts, and flow-constant estimation."""

from __future__ import annotations

import math
import warnings

import numpy as np
import pytest

import oracles
from percoshape import (
    BoxSpec,
    ConfigError,
    CylinderSpec,
    GeometryError,
    NormTable,
    analytic_norm_table,
    build_norm_table,
    circle_directions,
    estimate_beta,
    fibonacci_sphere_directions,
    sample_configuration,
    tau,
)
from percoshape.errors import CoverageError
from percoshape.flows import NormRow, canonical_direction, discretize_cylinder

DIAG = math.sqrt(0.5)


def _local_network(net):
    """Plain-container view of a FlowNetwork for the oracles."""
    local = {int(r): i for i, r in enumerate(net.vertex_ranks)}
    pairs = [
        (local[int(t)], local[int(h)])
        for t, h in zip(net.edge_tails, net.edge_heads)
    ]
    side1 = [local[int(r)] for r in net.c1_ranks]
    side2 = [local[int(r)] for r in net.c2_ranks]
    return local, pairs, side1, side2


def _assert_tau_matches_enumeration(spec, config):
    net = discretize_cylinder(spec, config)
    result = tau(spec, config)
    _, pairs, side1, side2 = _local_network(net)
    if not side1 or not side2:
        assert result.capacity == 0
        return result
    size, _ = oracles.min_cut_enumeration(
        net.n_vertices, pairs, side1, side2
    )
    assert result.capacity == size
    # The reported cutset must separate the plug sets (independent BFS).
    position_row = {int(p): i for i, p in enumerate(net.edge_positions)}
    removed = [position_row[int(p)] for p in result.cut_edge_positions]
    assert oracles.separates(net.n_vertices, pairs, removed, side1, side2)
    assert result.separation_verified
    return result


# ---------------------------------------------------------------------------
# cylinder specification and discretization
# ---------------------------------------------------------------------------


def test_cylinder_spec_validation():
    with pytest.raises(GeometryError):
        CylinderSpec(2, (0.0, 0.0), (2.0,), (1.0, 1.0), 1.0, 4)
    with pytest.raises(GeometryError):
        CylinderSpec(2, (0.0, 0.0), (2.0,), (1.0, 0.0), -1.0, 4)
    with pytest.raises(GeometryError):
        CylinderSpec(2, (0.0, 0.0), (2.0, 2.0), (1.0, 0.0), 1.0, 4)
    with pytest.raises(GeometryError):
        CylinderSpec(2, (0.0, 0.0), (0.0,), (1.0, 0.0), 1.0, 4)


def test_hypersquare_convention():
    spec = CylinderSpec.hypersquare(np.array([1.0, 0.0]), n=6, height=2.0)
    assert spec.base_center == (0.25, 0.25)
    assert spec.base_sides == (6.0,)
    assert spec.base_measure() == pytest.approx(6.0)
    spec3 = CylinderSpec.hypersquare(np.array([0.0, 0.0, 1.0]), n=4, height=2.0)
    assert spec3.base_measure() == pytest.approx(16.0)


def test_cylinder_must_fit_in_the_box():
    spec = CylinderSpec.hypersquare(np.array([1.0, 0.0]), n=30, height=9.0)
    config = sample_configuration(BoxSpec(2, 5, 1), 0.5, 0)
    with pytest.raises(GeometryError):
        discretize_cylinder(spec, config)


def test_discretization_matches_membership_oracle_tilted():
    spec = CylinderSpec(
        d=2,
        base_center=(0.2, 0.3),
        base_sides=(2.6,),
        normal=(DIAG, DIAG),
        height=1.7,
        n=4,
    )
    box = BoxSpec(2, 6, 1)
    config = sample_configuration(box, 0.8, 3)
    net = discretize_cylinder(spec, config)
    coords = box.vertex_coords(np.arange(box.n_vertices))
    member = oracles.square_cylinder_membership(
        (0.2, 0.3), (DIAG, DIAG), 2.6, 1.7, coords
    )
    assert set(net.vertex_ranks.tolist()) == set(
        np.flatnonzero(member).tolist()
    )


def test_no_interior_edges_at_p0():
    spec = CylinderSpec.hypersquare(np.array([1.0, 0.0]), n=3, height=2.0)
    config = sample_configuration(BoxSpec(2, 8, 1), 0.0, 0)
    net = discretize_cylinder(spec, config)
    assert net.n_open_edges == 0
    assert tau(spec, config).capacity == 0


# ---------------------------------------------------------------------------
# exact min-cuts against the subset-enumeration oracle
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("m", [2, 3, 5])
def test_tau_counts_columns_at_p1(m):
    spec = CylinderSpec.hypersquare(np.array([1.0, 0.0]), n=m, height=2.0)
    config = sample_configuration(BoxSpec(2, 8, 1), 1.0, 0)
    result = tau(spec, config)
    assert result.capacity == m
    assert result.cut_edge_positions.size == m


def test_tau_matches_enumeration_at_p1_small():
    spec = CylinderSpec.hypersquare(np.array([1.0, 0.0]), n=2, height=2.0)
    config = sample_configuration(BoxSpec(2, 6, 1), 1.0, 0)
    result = _assert_tau_matches_enumeration(spec, config)
    assert result.capacity == 2


def test_tau_matches_enumeration_random_sweep():
    rng = np.random.default_rng(12345)
    box = BoxSpec(2, 6, 1)
    checked = 0
    seed = 0
    while checked < 30:
        seed += 1
        assert seed < 500, "could not find enough small instances"
        angle = rng.uniform(0.0, 2.0 * np.pi)
        spec = CylinderSpec(
            d=2,
            base_center=(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)),
            base_sides=(rng.uniform(1.4, 3.2),),
            normal=(math.cos(angle), math.sin(angle)),
            height=rng.uniform(1.2, 2.4),
            n=4,
        )
        config = sample_configuration(box, 0.7, seed)
        if discretize_cylinder(spec, config).n_open_edges > 20:
            continue
        _assert_tau_matches_enumeration(spec, config)
        checked += 1


def test_tau_reports_solver_statistics():
    spec = CylinderSpec.hypersquare(np.array([0.0, 1.0]), n=3, height=2.0)
    config = sample_configuration(BoxSpec(2, 8, 1), 0.9, 5)
    stats = tau(spec, config).stats
    assert {"n_vertices", "n_open_edges", "c1_size", "c2_size", "seconds"} <= set(
        stats
    )


# ---------------------------------------------------------------------------
# flow-constant estimation
# ---------------------------------------------------------------------------


def test_estimate_beta_axis_is_exact_at_p1():
    for n in (4, 8):
        row = estimate_beta(np.array([1.0, 0.0]), 1.0, n=n, h=3.0, replicates=3, seed=0)
        assert row.beta_hat == 1.0
        assert row.ci_radius == 0.0


def test_estimate_beta_axis_is_exact_at_p1_d3():
    row = estimate_beta(
        np.array([0.0, 0.0, 1.0]), 1.0, n=3, h=2.0, replicates=2, seed=0
    )
    assert row.beta_hat == 1.0


def test_estimate_beta_diagonal_near_l1_at_p1():
    row = estimate_beta(
        np.array([1.0, 1.0]), 1.0, n=20, h=5.0, replicates=2, seed=0
    )
    assert abs(row.beta_hat - math.sqrt(2.0)) / math.sqrt(2.0) <= 0.05
    assert row.ci_radius == 0.0  # deterministic at p=1


def test_estimate_beta_validates_arguments():
    e1 = np.array([1.0, 0.0])
    with pytest.raises(ConfigError):
        estimate_beta(e1, 0.0, n=4, h=2.0, replicates=2, seed=0)
    with pytest.raises(ConfigError):
        estimate_beta(e1, 1.2, n=4, h=2.0, replicates=2, seed=0)
    with pytest.raises(ConfigError):
        estimate_beta(e1, 0.5, n=0, h=2.0, replicates=2, seed=0)
    with pytest.raises(ConfigError):
        estimate_beta(e1, 0.5, n=4, h=2.0, replicates=0, seed=0)


# ---------------------------------------------------------------------------
# direction meshes and the norm table
# ---------------------------------------------------------------------------


def test_circle_directions_are_unit_and_even():
    dirs = circle_directions(12)
    assert dirs.shape == (12, 2)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    assert np.allclose(dirs[0], [1.0, 0.0])
    gaps = np.diff(np.unwrap(np.arctan2(dirs[:, 1], dirs[:, 0])))
    assert np.allclose(gaps, 2.0 * np.pi / 12)


def test_fibonacci_directions_are_unit_and_distinct():
    dirs = fibonacci_sphere_directions(40)
    assert dirs.shape == (40, 3)
    assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0)
    gram = dirs @ dirs.T
    np.fill_diagonal(gram, -1.0)
    assert gram.max() < 1.0 - 1e-6


def test_canonical_direction_is_orbit_invariant():
    base = np.array([0.6, -0.8])
    images = [
        np.array([-0.8, 0.6]),
        np.array([0.8, 0.6]),
        np.array([-0.6, 0.8]),
    ]
    key = canonical_direction(base)
    for u in images:
        assert canonical_direction(u) == key
    assert canonical_direction(np.array([0.6, 0.8])) == key


def test_build_norm_table_axes_exact_at_p1():
    table = build_norm_table(
        1.0, circle_directions(4), n=4, h=2.0, replicates=2, seed=0
    )
    assert table.symmetry_expanded
    assert np.array_equal(table.values, np.ones(4))


def test_build_norm_table_shares_orbit_estimates():
    table = build_norm_table(
        0.7, circle_directions(8), n=4, h=2.0, replicates=2, seed=9
    )
    by_orbit: dict[tuple, set] = {}
    for row in table.rows:
        orbit = canonical_direction(np.asarray(row.direction))
        by_orbit.setdefault(orbit, set()).add(round(row.beta_hat, 12))
    assert len(by_orbit) == 2  # axes and diagonals
    for orbit_values in by_orbit.values():
        assert len(orbit_values) == 1


def test_build_norm_table_warns_on_duplicates():
    dirs = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.warns(UserWarning):
        build_norm_table(1.0, dirs, n=3, h=2.0, replicates=1, seed=0)


def test_build_norm_table_validates_directions():
    with pytest.raises(ConfigError):
        build_norm_table(0.5, np.zeros((0, 2)), n=3, h=2.0, replicates=1, seed=0)
    with pytest.raises(ConfigError):
        build_norm_table(
            0.5, np.array([[0.0, 0.0]]), n=3, h=2.0, replicates=1, seed=0
        )


def test_norm_table_self_reports_uncertainty():
    table = build_norm_table(
        0.7, circle_directions(8), n=6, h=2.0, replicates=4, seed=4
    )
    radii = [row.ci_radius for row in table.rows]
    assert max(radii) < 0.5  # self-reported 95% half-widths stay moderate


def test_norm_table_validation():
    with pytest.raises(ConfigError):
        NormTable(d=2, p=1.0, seed=0, rows=())
    bad = NormRow(
        direction=(1.0, 1.0), beta_hat=1.0, ci_radius=0.0, n=0, h=0.0, replicates=0
    )
    with pytest.raises(ConfigError):
        NormTable(d=2, p=1.0, seed=0, rows=(bad,))


def _l1_table(k: int) -> NormTable:
    return analytic_norm_table(
        lambda u: float(np.abs(u).sum()), circle_directions(k)
    )


def test_norm_table_value_exact_hit_and_arc_interpolation():
    table = _l1_table(8)
    assert table.value(np.array([1.0, 0.0])) == 1.0
    assert table.value(np.array([DIAG, DIAG])) == pytest.approx(math.sqrt(2.0))
    mid = table.value(np.array([math.cos(math.pi / 8), math.sin(math.pi / 8)]))
    assert mid == pytest.approx((1.0 + math.sqrt(2.0)) / 2.0, abs=1e-9)


def test_norm_table_nearest_mode_and_coverage_error():
    rows = tuple(
        NormRow(
            direction=(math.cos(a), math.sin(a)),
            beta_hat=v,
            ci_radius=0.0,
            n=0,
            h=0.0,
            replicates=0,
        )
        for a, v in [(0.0, 1.0), (0.1, 1.1)]
    )
    table = NormTable(d=2, p=1.0, seed=0, rows=rows)
    near = table.value(np.array([math.cos(0.05), math.sin(0.05)]), interpolate=False)
    assert near in (1.0, 1.1)
    with pytest.raises(CoverageError):
        table.value(np.array([0.0, 1.0]), interpolate=False)


def test_norm_table_sphere_interpolation_brackets_face_values():
    eye = np.eye(3)
    mesh = np.vstack([eye, -eye, fibonacci_sphere_directions(16)])
    table = analytic_norm_table(lambda u: float(np.abs(u).sum()), mesh)
    q = np.array([1.0, 0.4, 0.2])
    q /= np.linalg.norm(q)
    got = table.value(q)
    assert table.values.min() - 1e-9 <= got <= table.values.max() + 1e-9
    hit = table.value(mesh[3] / np.linalg.norm(mesh[3]))
    assert hit == pytest.approx(np.abs(mesh[3] / np.linalg.norm(mesh[3])).sum())


def test_norm_table_json_roundtrip_preserves_identity():
    table = _l1_table(8)
    back = NormTable.from_json(table.to_json())
    assert back.table_id() == table.table_id()
    assert np.allclose(back.values, table.values)


def test_table_id_depends_on_metadata():
    a = _l1_table(8)
    b = NormTable(d=a.d, p=0.9, seed=a.seed, rows=a.rows)
    assert a.table_id() != b.table_id()
