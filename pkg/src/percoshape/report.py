"""Result persistence: versioned CSV tables, JSON archives, SVG plots.

CSV layout is frozen — schema tag first, fixed column order, floats
rendered by shortest round-trip ``repr`` — so identical run records emit
byte-identical files.  Timestamps and wall-clock live only in the JSON
archives.  SVG output is hand-assembled (line plots with a reference
asymptote for convergence studies, voxel-vs-crystal overlays for
two-dimensional shape studies) and contains no volatile fields.
"""

from __future__ import annotations

import csv
import io
import json
import os
from datetime import datetime, timezone

import numpy as np

from .errors import ConfigError
from .experiments import RunRecord
from .geometry import Polytope
from .shape import VoxelSet

CSV_SCHEMA = "percoshape-csv-v1"
FORMATS = ("csv", "json", "svg")


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _render_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def render_csv(
    columns: tuple[str, ...],
    rows: tuple[tuple, ...],
    *,
    kind: str,
    table: str,
    config_hash: str,
) -> str:
    """Schema comment line, header row, then data rows (LF newlines)."""
    buf = io.StringIO()
    buf.write(
        f"# {CSV_SCHEMA} kind={kind} table={table} config={config_hash[:16]}\n"
    )
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_render_cell(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _svg_open(width: int, height: int) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, count)
    return [float(v) for v in raw]


def render_line_plot_svg(
    series: dict[str, tuple[tuple[float, float], ...]],
    *,
    title: str,
    xlabel: str,
    ylabel: str,
    hline: float | None = None,
    hline_label: str = "",
    width: int = 640,
    height: int = 420,
) -> str:
    """Minimal deterministic line plot with optional reference level."""
    margin_l, margin_r, margin_t, margin_b = 64, 20, 36, 46
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b
    xs = [p[0] for pts in series.values() for p in pts]
    ys = [p[1] for pts in series.values() for p in pts]
    if hline is not None:
        ys.append(hline)
    if not xs:
        raise ConfigError("nothing to plot")
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    pad = 0.08 * (y_hi - y_lo) if y_hi > y_lo else max(0.5, abs(y_hi) * 0.1)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def sx(x: float) -> float:
        return margin_l + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y: float) -> float:
        return margin_t + (y_hi - y) / (y_hi - y_lo) * plot_h

    out = _svg_open(width, height)
    out.append(
        f'<text x="{width / 2:.0f}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>'
    )
    # axes
    out.append(
        f'<rect x="{margin_l}" y="{margin_t}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="black"/>'
    )
    for tx in _ticks(x_lo, x_hi):
        out.append(
            f'<line x1="{_fmt(sx(tx))}" y1="{margin_t + plot_h}" '
            f'x2="{_fmt(sx(tx))}" y2="{margin_t + plot_h + 4}" stroke="black"/>'
        )
        out.append(
            f'<text x="{_fmt(sx(tx))}" y="{margin_t + plot_h + 18}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="11">'
            f"{_fmt(tx)}</text>"
        )
    for ty in _ticks(y_lo, y_hi):
        out.append(
            f'<line x1="{margin_l - 4}" y1="{_fmt(sy(ty))}" '
            f'x2="{margin_l}" y2="{_fmt(sy(ty))}" stroke="black"/>'
        )
        out.append(
            f'<text x="{margin_l - 8}" y="{_fmt(sy(ty) + 4)}" '
            f'text-anchor="end" font-family="sans-serif" font-size="11">'
            f"{_fmt(ty)}</text>"
        )
    out.append(
        f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    out.append(
        f'<text x="16" y="{height / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {height / 2:.0f})">{ylabel}</text>'
    )
    if hline is not None:
        out.append(
            f'<line x1="{margin_l}" y1="{_fmt(sy(hline))}" '
            f'x2="{margin_l + plot_w}" y2="{_fmt(sy(hline))}" '
            f'stroke="crimson" stroke-dasharray="6 4"/>'
        )
        if hline_label:
            out.append(
                f'<text x="{margin_l + plot_w - 4}" '
                f'y="{_fmt(sy(hline) - 6)}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11" fill="crimson">'
                f"{hline_label}</text>"
            )
    palette = ("steelblue", "darkorange", "seagreen", "purple")
    for i, (name, pts) in enumerate(sorted(series.items())):
        color = palette[i % len(palette)]
        path = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
        out.append(
            f'<polyline points="{path}" fill="none" stroke="{color}" '
            f'stroke-width="1.5"/>'
        )
        for x, y in pts:
            out.append(
                f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" '
                f'fill="{color}"/>'
            )
        out.append(
            f'<text x="{margin_l + 8}" y="{margin_t + 16 + 14 * i}" '
            f'font-family="sans-serif" font-size="11" fill="{color}">'
            f"{name}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_overlay_svg(
    vox: VoxelSet,
    polytope: Polytope,
    x: np.ndarray,
    *,
    title: str = "",
    width: int = 520,
) -> str:
    """Two-dimensional voxel mask with the crystal outline at its best shift.

    Voxels are unit squares centered on lattice points; the outline is
    the n-fold dilation of the shifted shape in the same coordinates.
    """
    if vox.d != 2:
        raise ConfigError("overlays are only defined for d=2 masks")
    a_lo = np.asarray(vox.lower, dtype=float) - 0.5
    a_hi = a_lo + np.asarray(vox.mask.shape, dtype=float)
    span = float((a_hi - a_lo).max())
    scale = (width - 40) / span
    height = int(40 + scale * (a_hi[1] - a_lo[1])) + (24 if title else 0)
    top = 20 + (24 if title else 0)

    def px(cx: float) -> float:
        return 20 + (cx - a_lo[0]) * scale

    def py(cy: float) -> float:
        return top + (a_hi[1] - cy) * scale

    out = _svg_open(width, height)
    if title:
        out.append(
            f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{title}</text>'
        )
    # merge runs of occupied voxels per row into single rectangles
    lower = vox.lower
    rects = []
    mask = vox.mask
    for j in range(mask.shape[1]):
        col_y = lower[1] + j
        i = 0
        while i < mask.shape[0]:
            if not mask[i, j]:
                i += 1
                continue
            start = i
            while i < mask.shape[0] and mask[i, j]:
                i += 1
            x0 = lower[0] + start - 0.5
            x1 = lower[0] + i - 0.5
            rects.append((x0, col_y - 0.5, x1 - x0, 1.0))
    for rx, ry, rw, rh in rects:
        out.append(
            f'<rect x="{_fmt(px(rx))}" y="{_fmt(py(ry + rh))}" '
            f'width="{_fmt(rw * scale)}" height="{_fmt(rh * scale)}" '
            f'fill="lightsteelblue" stroke="none"/>'
        )
    verts = (polytope.ordered_vertices + np.asarray(x, dtype=float)) * vox.n
    path = " ".join(f"{_fmt(px(vx))},{_fmt(py(vy))}" for vx, vy in verts)
    out.append(
        f'<polygon points="{path}" fill="none" stroke="crimson" '
        f'stroke-width="1.5"/>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# record emission
# ---------------------------------------------------------------------------


def _plot_for(record: RunRecord) -> str | None:
    if record.kind == "convergence" and record.summary_rows:
        series = {
            "mean scaled profile": tuple(
                (float(row[0]), float(row[2])) for row in record.summary_rows
            )
        }
        constant = float(record.metadata.get("constant", record.summary_rows[0][5]))
        return render_line_plot_svg(
            series,
            title="scaled anchored profile vs scale",
            xlabel="n",
            ylabel="n x profile",
            hline=constant,
            hline_label=f"crystal constant {_fmt(constant)}",
        )
    if record.kind == "shape" and record.summary_rows:
        series = {
            "median distance": tuple(
                (float(row[0]), float(row[2])) for row in record.summary_rows
            )
        }
        return render_line_plot_svg(
            series,
            title="symmetric-difference distance vs scale",
            xlabel="n",
            ylabel="median scaled distance",
        )
    if record.kind == "phi" and record.summary_rows:
        series = {
            "mean scaled profile": tuple(
                (float(row[0]), float(row[2])) for row in record.summary_rows
            )
        }
        return render_line_plot_svg(
            series,
            title="scaled anchored profile vs scale",
            xlabel="n",
            ylabel="n x profile",
        )
    return None


def _overlay_files(record: RunRecord, outdir: str) -> list[str]:
    overlays = record.metadata.get("overlays")
    wulff_json = record.metadata.get("wulff")
    if not overlays or not wulff_json:
        return []
    poly = Polytope.from_json(wulff_json)
    if poly.d != 2:
        return []
    paths = []
    for n_key in sorted(overlays, key=int):
        entry = overlays[n_key]
        vox = VoxelSet.from_header_and_bytes(
            entry["voxels_header"], bytes.fromhex(entry["voxels_rle"])
        )
        svg = render_overlay_svg(
            vox,
            poly,
            np.asarray(entry["x"], dtype=float),
            title=(
                f"best candidate vs crystal, n={n_key} "
                f"(distance {_fmt(float(entry['distance']))})"
            ),
        )
        path = os.path.join(outdir, f"{record.kind}_overlay_n{n_key}.svg")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(svg)
        paths.append(path)
    return paths


def emit_record(
    record: RunRecord, outdir: str, formats: tuple[str, ...] = FORMATS
) -> list[str]:
    """Write one record's artifacts; returns the created paths."""
    for fmt in formats:
        if fmt not in FORMATS:
            raise ConfigError(
                f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}"
            )
    os.makedirs(outdir, exist_ok=True)
    paths: list[str] = []
    if "csv" in formats:
        for table, columns, rows in (
            ("raw", record.raw_columns, record.raw_rows),
            ("summary", record.summary_columns, record.summary_rows),
        ):
            text = render_csv(
                columns,
                rows,
                kind=record.kind,
                table=table,
                config_hash=record.config_hash,
            )
            path = os.path.join(outdir, f"{record.kind}_{table}.csv")
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            paths.append(path)
    if "json" in formats:
        payload = record.to_jsonable()
        payload["emitted_at"] = datetime.now(timezone.utc).isoformat()
        path = os.path.join(outdir, f"{record.kind}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths.append(path)
    if "svg" in formats:
        svg = _plot_for(record)
        if svg is not None:
            path = os.path.join(outdir, f"{record.kind}.svg")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(svg)
            paths.append(path)
        paths.extend(_overlay_files(record, outdir))
    return paths


def emit_report(
    records, outdir: str, formats: tuple[str, ...] = FORMATS
) -> list[str]:
    """Emit artifacts for every record; at least one record is required."""
    records = list(records)
    if not records:
        raise ConfigError("emit_report needs at least one run record")
    paths: list[str] = []
    for record in records:
        paths.extend(emit_record(record, outdir, formats))
    return paths


def load_record(path: str) -> RunRecord:
    """Rebuild a record from its JSON archive (timestamps dropped)."""
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read record {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed record {path!r}: {exc}") from exc
    try:
        return RunRecord(
            kind=payload["kind"],
            config_hash=payload["config_hash"],
            tool_version=payload["tool_version"],
            seeds=tuple(payload["seeds"]),
            raw_columns=tuple(payload["raw_columns"]),
            raw_rows=tuple(tuple(r) for r in payload["raw_rows"]),
            summary_columns=tuple(payload["summary_columns"]),
            summary_rows=tuple(tuple(r) for r in payload["summary_rows"]),
            metadata=payload["metadata"],
        )
    except KeyError as exc:
        raise ConfigError(f"record {path!r} is missing field {exc}") from exc
