"""Seeded experiment orchestration.

Each runner turns an :class:`~percoshape.config.ExperimentConfig` into a
:class:`RunRecord`: raw per-replicate rows plus order-independent
summaries, stamped with the config hash and the per-replicate seeds.
Replicate seeds mix the master seed with a stage tag and the replicate
coordinates through the 64-bit finalizer, so stages never share streams
and reruns of the same config reproduce the raw rows bit for bit.

Anchored experiments condition on the origin belonging to the spanning
cluster: replicates whose origin cluster misses the outer face are
rejected and counted, and a run with zero valid samples raises a
conditioning error.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__ as TOOL_VERSION
from .cheeger import (
    AnnealSchedule,
    PipelineResult,
    construction_reach,
    phi_pipeline,
)
from .clusters import (
    estimate_theta,
    infinite_cluster_proxy,
    label_clusters,
)
from .config import AUTO, ExperimentConfig
from .errors import ConditioningError, ConfigError
from .flows import (
    NormTable,
    build_norm_table,
    circle_directions,
    fibonacci_sphere_directions,
)
from .geometry import (
    IsoperimetricValue,
    WulffShape,
    build_wulff,
    isoperimetric_constant,
)
from .lattice import BondConfiguration, BoxSpec, sample_configuration
from .rng import mix_seed
from .shape import (
    SearchSchedule,
    VoxelSet,
    decompose_holes,
    symmetric_difference_distance,
)

__all__ = [
    "RunRecord",
    "WulffContext",
    "resolve_wulff",
    "run_theta",
    "run_beta",
    "run_wulff",
    "run_phi",
    "run_convergence_phi",
    "run_shape_study",
    "run_experiment",
]


@dataclass(frozen=True)
class RunRecord:
    """One experiment's reproducible results.

    ``raw_rows`` (and the summary derived from them) are functions of
    the config alone; wall-clock and other volatile facts live in
    ``metadata`` and never reach the CSV emitters.
    """

    kind: str
    config_hash: str
    tool_version: str
    seeds: tuple[int, ...]
    raw_columns: tuple[str, ...]
    raw_rows: tuple[tuple, ...]
    summary_columns: tuple[str, ...]
    summary_rows: tuple[tuple, ...]
    metadata: dict = field(repr=False)

    def __post_init__(self) -> None:
        for row in self.raw_rows:
            if len(row) != len(self.raw_columns):
                raise ConfigError("raw row width disagrees with header")
        for row in self.summary_rows:
            if len(row) != len(self.summary_columns):
                raise ConfigError("summary row width disagrees with header")

    def to_jsonable(self) -> dict:
        return {
            "kind": self.kind,
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "seeds": list(self.seeds),
            "raw_columns": list(self.raw_columns),
            "raw_rows": [list(r) for r in self.raw_rows],
            "summary_columns": list(self.summary_columns),
            "summary_rows": [list(r) for r in self.summary_rows],
            "metadata": self.metadata,
        }


def replicate_seed(master: int, stage: str, *coords: int) -> int:
    """Documented per-replicate seed: mix(master, stage tag, coordinates)."""
    return mix_seed(master, stage, *coords)


# ---------------------------------------------------------------------------
# shared stages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WulffContext:
    """Estimated norm table, cluster density, crystal, and its constant.

    The same ``theta`` feeds the crystal normalization, rasterization
    mass, and measure comparisons of one run (pipeline consistency).
    """

    table: NormTable
    theta_hat: float
    theta_ci: float
    wulff: WulffShape
    iso: IsoperimetricValue


def _direction_mesh(d: int, k: int) -> np.ndarray:
    return circle_directions(k) if d == 2 else fibonacci_sphere_directions(k)


def resolve_wulff(cfg: ExperimentConfig) -> WulffContext:
    """Estimate the norm table and cluster density, then build the crystal."""
    table = build_norm_table(
        cfg.p,
        _direction_mesh(cfg.d, cfg.norm_directions),
        n=cfg.norm_n,
        h=cfg.norm_h_over_n * cfg.norm_n,
        replicates=cfg.norm_replicates,
        seed=replicate_seed(cfg.seed, "beta"),
    )
    theta = estimate_theta(
        cfg.d,
        cfg.p,
        _theta_box(cfg),
        cfg.theta_replicates,
        replicate_seed(cfg.seed, "theta"),
    )
    if theta.theta_hat <= 0.0:
        raise ConditioningError(
            "estimated spanning-cluster density is zero; no valid samples "
            "are possible at this p"
        )
    wulff = build_wulff(table, theta.theta_hat)
    iso = isoperimetric_constant(wulff, table)
    return WulffContext(
        table=table,
        theta_hat=theta.theta_hat,
        theta_ci=theta.ci_radius,
        wulff=wulff,
        iso=iso,
    )


def _theta_box(cfg: ExperimentConfig) -> BoxSpec:
    if cfg.box_margin != AUTO:
        return BoxSpec(cfg.d, cfg.theta_half_width, cfg.box_margin)
    return BoxSpec(cfg.d, cfg.theta_half_width)


def _box_for_scale(
    cfg: ExperimentConfig,
    n: int,
    *,
    polytope=None,
    construct_delta: float | None = None,
    rasterize: bool = False,
) -> BoxSpec:
    """Smallest comfortable box for scale ``n`` under the config overrides.

    The baseline ``n + 4`` half-width leaves room for cap-sized anchored
    sets; enclosure constructions and shape rasterization push the
    analysis region out to their own reach when they participate.
    """
    if cfg.box_half_width != AUTO:
        hw = cfg.box_half_width
    else:
        hw = n + 4
        need_ahw = 0.0
        if polytope is not None:
            need_ahw = max(
                need_ahw, construction_reach(polytope, construct_delta, n) + 1.5
            )
        if rasterize and polytope is not None:
            extent = float(np.abs(np.asarray(polytope.vertices)).max())
            need_ahw = max(need_ahw, n * (extent + 0.25) + 1.5)

        def ahw(h: int) -> int:
            margin = cfg.box_margin if cfg.box_margin != AUTO else -(-h // 5)
            return h - margin

        while ahw(hw) < need_ahw:
            hw += 1
    if cfg.box_margin != AUTO:
        return BoxSpec(cfg.d, hw, cfg.box_margin)
    return BoxSpec(cfg.d, hw)


def _anneal_schedule(cfg: ExperimentConfig, seed: int) -> AnnealSchedule:
    t_end = cfg.anneal_t_end if cfg.anneal_t_end != AUTO else 0.01
    return AnnealSchedule(steps=cfg.anneal_steps, t_end=t_end, seed=seed)


def _valid_sample(
    config: BondConfiguration,
) -> bool:
    """Conditioning check: origin attached to the spanning-cluster proxy."""
    proxy = infinite_cluster_proxy(label_clusters(config), config.box)
    return bool(proxy[config.box.origin_rank])


def _summary_stats(values: np.ndarray) -> tuple[float, float, float]:
    """(mean, sd, 95% normal half-width) from a sorted copy, order-free."""
    v = np.sort(np.asarray(values, dtype=float))
    mean = float(v.mean())
    if v.size > 1:
        sd = float(v.std(ddof=1))
        ci = 1.96 * sd / math.sqrt(v.size)
    else:
        sd = 0.0
        ci = 0.0
    return mean, sd, ci


def _fan_out(tasks: list, worker, threads: int) -> dict:
    """Run ``worker`` over ``tasks``, keyed results in task order.

    Replicates are independent; results are reassembled by task key so
    the aggregation (and therefore every emitted byte) is identical for
    any thread count.
    """
    if threads <= 1:
        return {key: worker(key) for key in tasks}
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = {key: pool.submit(worker, key) for key in tasks}
        return {key: futures[key].result() for key in tasks}


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def run_theta(cfg: ExperimentConfig) -> RunRecord:
    """Spanning-cluster density estimate with its cross-check estimator."""
    started = time.perf_counter()
    seed = replicate_seed(cfg.seed, "theta")
    est = estimate_theta(cfg.d, cfg.p, _theta_box(cfg), cfg.theta_replicates, seed)
    raw = (
        (
            cfg.d,
            cfg.p,
            est.replicates,
            est.theta_hat,
            est.ci_radius,
            est.alt_theta_hat,
            est.alt_ci_radius,
        ),
    )
    return RunRecord(
        kind="theta",
        config_hash=cfg.config_hash(),
        tool_version=TOOL_VERSION,
        seeds=(seed,),
        raw_columns=(
            "d",
            "p",
            "replicates",
            "theta_hat",
            "ci_radius",
            "alt_theta_hat",
            "alt_ci_radius",
        ),
        raw_rows=raw,
        summary_columns=("theta_hat", "ci_radius"),
        summary_rows=((est.theta_hat, est.ci_radius),),
        metadata={"wall_clock": time.perf_counter() - started},
    )


def run_beta(cfg: ExperimentConfig) -> RunRecord:
    """Flow-constant table over the configured direction mesh."""
    started = time.perf_counter()
    seed = replicate_seed(cfg.seed, "beta")
    table = build_norm_table(
        cfg.p,
        _direction_mesh(cfg.d, cfg.norm_directions),
        n=cfg.norm_n,
        h=cfg.norm_h_over_n * cfg.norm_n,
        replicates=cfg.norm_replicates,
        seed=seed,
    )
    coord_names = ("ux", "uy", "uz")[: cfg.d]
    rows = tuple(
        tuple(row.direction)
        + (row.beta_hat, row.ci_radius, row.n, row.h, row.replicates)
        for row in table.rows
    )
    mean_beta, sd, ci = _summary_stats(np.array([r.beta_hat for r in table.rows]))
    return RunRecord(
        kind="beta",
        config_hash=cfg.config_hash(),
        tool_version=TOOL_VERSION,
        seeds=(seed,),
        raw_columns=coord_names
        + ("beta_hat", "ci_radius", "n", "h", "replicates"),
        raw_rows=rows,
        summary_columns=("directions", "mean_beta", "sd", "ci95"),
        summary_rows=((len(table.rows), mean_beta, sd, ci),),
        metadata={
            "wall_clock": time.perf_counter() - started,
            "table_id": table.table_id(),
            "norm_table": table.to_json(),
        },
    )


def run_wulff(cfg: ExperimentConfig) -> RunRecord:
    """Full crystal chain: norm table, density, normalized shape, constant."""
    started = time.perf_counter()
    ctx = resolve_wulff(cfg)
    poly = ctx.wulff.polytope
    rows = tuple(
        (i,) + tuple(float(x) for x in v) for i, v in enumerate(poly.vertices)
    )
    coord_names = tuple(f"x{i}" for i in range(cfg.d))
    return RunRecord(
        kind="wulff",
        config_hash=cfg.config_hash(),
        tool_version=TOOL_VERSION,
        seeds=(
            replicate_seed(cfg.seed, "beta"),
            replicate_seed(cfg.seed, "theta"),
        ),
        raw_columns=("vertex",) + coord_names,
        raw_rows=rows,
        summary_columns=(
            "theta_hat",
            "volume",
            "dilation",
            "energy",
            "ratio",
        ),
        summary_rows=(
            (
                ctx.theta_hat,
                poly.volume(),
                ctx.wulff.dilation,
                ctx.iso.energy,
                ctx.iso.ratio,
            ),
        ),
        metadata={
            "wall_clock": time.perf_counter() - started,
            "table_id": ctx.table.table_id(),
            "norm_table": ctx.table.to_json(),
            "wulff": ctx.wulff.polytope.to_json(),
            "theta_ci": ctx.theta_ci,
        },
    )


def _pipeline_replicate(
    cfg: ExperimentConfig,
    n: int,
    r: int,
    ctx: WulffContext | None,
) -> tuple[int, BondConfiguration | None, PipelineResult | None]:
    """Sample one replicate; None result marks a conditioning rejection."""
    seed = replicate_seed(cfg.seed, "phi", n, r)
    polytope = (
        ctx.wulff.polytope if (ctx is not None and cfg.use_certificate) else None
    )
    construct_delta = (
        cfg.construct_delta if cfg.construct_delta != AUTO else None
    )
    box = _box_for_scale(
        cfg, n, polytope=polytope, construct_delta=construct_delta
    )
    config = sample_configuration(box, cfg.p, seed)
    if not _valid_sample(config):
        return seed, None, None
    vol_cap = cfg.phi_vol_cap if cfg.phi_vol_cap != AUTO else None
    result = phi_pipeline(
        config,
        n,
        vol_cap=vol_cap,
        schedule=_anneal_schedule(cfg, mix_seed(seed, "anneal")),
        polytope=polytope,
        delta=construct_delta,
        max_solves=cfg.phi_max_solves,
    )
    return seed, config, result


def _phi_rows(
    cfg: ExperimentConfig, ctx: WulffContext | None, threads: int = 1
) -> tuple[tuple[int, ...], tuple[tuple, ...], dict]:
    """Shared sampling loop for profile runs: raw rows plus rejection stats."""
    tasks = [(n, r) for n in cfg.n_schedule for r in range(cfg.replicates)]
    results = _fan_out(
        tasks, lambda key: _pipeline_replicate(cfg, key[0], key[1], ctx), threads
    )
    seeds: list[int] = []
    rows: list[tuple] = []
    rejected: dict[str, int] = {str(n): 0 for n in cfg.n_schedule}
    for n, r in tasks:
        seed, _, result = results[(n, r)]
        seeds.append(seed)
        if result is None:
            rejected[str(n)] += 1
            continue
        best = result.best
        rows.append(
            (
                n,
                r,
                seed,
                best.boundary,
                best.volume,
                best.ratio,
                n * best.ratio,
                best.kind,
            )
        )
    if not rows:
        raise ConditioningError(
            "no valid samples: every replicate was rejected by the "
            "cluster conditioning"
        )
    return tuple(seeds), tuple(rows), {"rejected": rejected}


_PHI_RAW_COLUMNS = (
    "n",
    "replicate",
    "seed",
    "boundary",
    "volume",
    "ratio",
    "n_ratio",
    "source",
)


def _phi_summaries(
    cfg: ExperimentConfig, rows: tuple[tuple, ...]
) -> tuple[tuple, ...]:
    out = []
    for n in cfg.n_schedule:
        vals = np.array([row[6] for row in rows if row[0] == n])
        if vals.size == 0:
            continue
        mean, sd, ci = _summary_stats(vals)
        out.append((n, int(vals.size), mean, sd, ci))
    return tuple(out)


def run_phi(cfg: ExperimentConfig, threads: int = 1) -> RunRecord:
    """Anchored profile estimates over the scale schedule."""
    started = time.perf_counter()
    ctx = resolve_wulff(cfg) if cfg.use_certificate else None
    seeds, rows, rejections = _phi_rows(cfg, ctx, threads)
    metadata = {"wall_clock": time.perf_counter() - started, **rejections}
    if ctx is not None:
        metadata["table_id"] = ctx.table.table_id()
        metadata["theta_hat"] = ctx.theta_hat
    return RunRecord(
        kind="phi",
        config_hash=cfg.config_hash(),
        tool_version=TOOL_VERSION,
        seeds=seeds,
        raw_columns=_PHI_RAW_COLUMNS,
        raw_rows=rows,
        summary_columns=("n", "samples", "mean_n_ratio", "sd", "ci95"),
        summary_rows=_phi_summaries(cfg, rows),
        metadata=metadata,
    )


def run_convergence_phi(cfg: ExperimentConfig, threads: int = 1) -> RunRecord:
    """Scaled profile against the crystal constant across the schedule.

    Summaries report, per scale, the mean scaled profile and its gap to
    the predicted constant; the trend statistic counts consecutive
    nonincreasing gap steps.
    """
    started = time.perf_counter()
    ctx = resolve_wulff(cfg)
    constant = ctx.iso.energy
    seeds, rows, rejections = _phi_rows(cfg, ctx, threads)
    summaries = []
    gaps: list[tuple[int, float]] = []
    for n, samples, mean, sd, ci in _phi_summaries(cfg, rows):
        gap = abs(mean - constant)
        gaps.append((n, gap))
        summaries.append((n, samples, mean, sd, ci, constant, gap))
    flags = [
        int(gaps[i + 1][1] <= gaps[i][1] + 1e-12) for i in range(len(gaps) - 1)
    ]
    return RunRecord(
        kind="convergence",
        config_hash=cfg.config_hash(),
        tool_version=TOOL_VERSION,
        seeds=seeds,
        raw_columns=_PHI_RAW_COLUMNS,
        raw_rows=rows,
        summary_columns=(
            "n",
            "samples",
            "mean_n_ratio",
            "sd",
            "ci95",
            "constant",
            "gap",
        ),
        summary_rows=tuple(summaries),
        metadata={
            "wall_clock": time.perf_counter() - started,
            "constant": constant,
            "theta_hat": ctx.theta_hat,
            "table_id": ctx.table.table_id(),
            "trend_nonincreasing_steps": flags,
            "trend_nonincreasing_count": int(sum(flags)),
            **rejections,
        },
    )


def run_shape_study(cfg: ExperimentConfig, threads: int = 1) -> RunRecord:
    """Symmetric-difference distance of best candidates to the crystal.

    Per valid replicate: run the profile pipeline, take the best
    candidate, log its enclosed-hole statistics, and pattern-search the
    translation minimizing the scaled symmetric difference against the
    estimated crystal.  Summaries report the per-scale median distance
    and the median-nonincreasing trend.
    """
    started = time.perf_counter()
    # Conditioning precedes the crystal chain so that a hopeless p fails
    # with the rejection outcome rather than a degenerate-shape error.
    probe_box = _box_for_scale(cfg, min(cfg.n_schedule))
    any_valid = False
    for n in cfg.n_schedule:
        for r in range(cfg.replicates):
            seed = replicate_seed(cfg.seed, "phi", n, r)
            config = sample_configuration(probe_box, cfg.p, seed)
            if _valid_sample(config):
                any_valid = True
                break
        if any_valid:
            break
    if not any_valid:
        raise ConditioningError(
            "no valid samples: every replicate was rejected by the "
            "cluster conditioning"
        )

    ctx = resolve_wulff(cfg)
    search = SearchSchedule(
        initial_step=cfg.search_initial_step,
        max_evals=cfg.search_max_evals,
    )
    def replicate(key: tuple[int, int]):
        n, r = key
        seed = replicate_seed(cfg.seed, "phi", n, r)
        construct_delta = (
            cfg.construct_delta if cfg.construct_delta != AUTO else None
        )
        polytope = ctx.wulff.polytope if cfg.use_certificate else None
        box = _box_for_scale(
            cfg,
            n,
            polytope=ctx.wulff.polytope,
            construct_delta=construct_delta,
            rasterize=True,
        )
        config = sample_configuration(box, cfg.p, seed)
        if not _valid_sample(config):
            return seed, None, None
        vol_cap = cfg.phi_vol_cap if cfg.phi_vol_cap != AUTO else None
        result = phi_pipeline(
            config,
            n,
            vol_cap=vol_cap,
            schedule=_anneal_schedule(cfg, mix_seed(seed, "anneal")),
            polytope=polytope,
            delta=construct_delta,
            max_solves=cfg.phi_max_solves,
        )
        G = result.best_subgraph
        holes = decompose_holes(G, config, n)
        dist = symmetric_difference_distance(G, ctx.wulff, n, search)
        row = (
            n,
            r,
            seed,
            dist.value,
            *(float(x) for x in dist.best_x),
            dist.evaluations,
            holes.m,
            holes.filled_count,
        )
        vox = VoxelSet.from_vertex_mask(box, G.mask, n)
        overlay = {
            "distance": dist.value,
            "replicate": r,
            "x": [float(v) for v in dist.best_x],
            "voxels_header": vox.header(),
            "voxels_rle": vox.to_bytes().hex(),
        }
        return seed, row, overlay

    tasks = [(n, r) for n in cfg.n_schedule for r in range(cfg.replicates)]
    results = _fan_out(tasks, replicate, threads)
    seeds: list[int] = []
    rows: list[tuple] = []
    rejected: dict[str, int] = {str(n): 0 for n in cfg.n_schedule}
    overlays: dict[str, dict] = {}
    for n, r in tasks:
        seed, row, overlay = results[(n, r)]
        seeds.append(seed)
        if row is None:
            rejected[str(n)] += 1
            continue
        rows.append(row)
        key = str(n)
        if key not in overlays or overlay["distance"] < overlays[key]["distance"]:
            overlays[key] = overlay
    if not rows:
        raise ConditioningError(
            "no valid samples: every replicate was rejected by the "
            "cluster conditioning"
        )
    coord_names = tuple(f"x{i}" for i in range(cfg.d))
    summaries = []
    medians: list[tuple[int, float]] = []
    for n in cfg.n_schedule:
        vals = np.sort(np.array([row[3] for row in rows if row[0] == n]))
        if vals.size == 0:
            continue
        med = float(np.median(vals))
        medians.append((n, med))
        mean, sd, ci = _summary_stats(vals)
        summaries.append((n, int(vals.size), med, mean, sd, ci))
    flags = [
        int(medians[i + 1][1] <= medians[i][1] + 1e-12)
        for i in range(len(medians) - 1)
    ]
    return RunRecord(
        kind="shape",
        config_hash=cfg.config_hash(),
        tool_version=TOOL_VERSION,
        seeds=tuple(seeds),
        raw_columns=(
            "n",
            "replicate",
            "seed",
            "distance",
            *coord_names,
            "evaluations",
            "large_holes",
            "filled_vertices",
        ),
        raw_rows=tuple(rows),
        summary_columns=("n", "samples", "median_distance", "mean", "sd", "ci95"),
        summary_rows=tuple(summaries),
        metadata={
            "wall_clock": time.perf_counter() - started,
            "theta_hat": ctx.theta_hat,
            "table_id": ctx.table.table_id(),
            "wulff": ctx.wulff.polytope.to_json(),
            "trend_nonincreasing_steps": flags,
            "trend_nonincreasing_count": int(sum(flags)),
            "rejected": rejected,
            "overlays": overlays,
        },
    )


_RUNNERS = {
    "theta": run_theta,
    "beta": run_beta,
    "wulff": run_wulff,
    "phi": run_phi,
    "convergence": run_convergence_phi,
    "shape": run_shape_study,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> RunRecord:
    """Dispatch on the configured experiment kind."""
    runner = _RUNNERS.get(cfg.kind)
    if runner is None:
        raise ConfigError(f"unknown experiment kind {cfg.kind!r}")
    if cfg.kind in ("phi", "convergence", "shape"):
        return runner(cfg, threads)
    return runner(cfg)
