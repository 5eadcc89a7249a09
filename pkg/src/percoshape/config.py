"""Experiment configuration: INI-style files with a typed schema.

Configs are plain-text ``key = value`` files grouped into sections.
Every recognized key has a declared type, default, and validator;
unknown sections or keys are hard errors so that typos never silently
fall back to defaults.  The resolved configuration (defaults filled in)
canonicalizes to a sorted line format whose SHA-256 prefix stamps every
output artifact.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, fields

from .errors import ConfigError

EXPERIMENT_KINDS = ("theta", "beta", "wulff", "phi", "shape", "convergence")

#: sentinel meaning "derive the value at run time"
AUTO = -1


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(int(s) for s in items)


@dataclass(frozen=True)
class _Field:
    """One schema entry: attribute name, parser, default, validator."""

    attr: str
    parse: object
    default: object
    check: object = None
    help: str = ""


_SCHEMA: dict[str, dict[str, _Field]] = {
    "experiment": {
        "kind": _Field(
            "kind",
            str,
            "phi",
            lambda v: v in EXPERIMENT_KINDS,
            "one of " + ", ".join(EXPERIMENT_KINDS),
        ),
        "d": _Field("d", int, 2, lambda v: v >= 2, "lattice dimension, >= 2"),
        "p": _Field(
            "p", float, 0.7, lambda v: 0.0 <= v <= 1.0, "bond probability"
        ),
        "seed": _Field(
            "seed",
            int,
            0,
            lambda v: 0 <= v < 2**64,
            "master seed, unsigned 64-bit",
        ),
        "replicates": _Field(
            "replicates", int, 10, lambda v: v >= 1, "replicates per stage"
        ),
        "out": _Field("out", str, "runs", None, "output directory"),
    },
    "box": {
        "half_width": _Field(
            "box_half_width",
            int,
            AUTO,
            lambda v: v == AUTO or v >= 1,
            "padded box half-width; -1 derives it from the scale",
        ),
        "margin": _Field(
            "box_margin",
            int,
            AUTO,
            lambda v: v == AUTO or v >= 0,
            "analysis margin; -1 uses the box default",
        ),
    },
    "schedule": {
        "n": _Field(
            "n_schedule",
            _parse_int_list,
            (10, 20, 30, 40),
            lambda v: all(x >= 1 for x in v) and len(v) >= 1,
            "comma-separated scales for phi/shape/convergence runs",
        ),
    },
    "norm": {
        "directions": _Field(
            "norm_directions",
            int,
            36,
            lambda v: v >= 4,
            "number of flow-constant directions on the sphere",
        ),
        "n": _Field(
            "norm_n", int, 30, lambda v: v >= 2, "cylinder base side"
        ),
        "h_over_n": _Field(
            "norm_h_over_n",
            float,
            0.25,
            lambda v: v > 0,
            "cylinder height as a fraction of the base side",
        ),
        "replicates": _Field(
            "norm_replicates",
            int,
            20,
            lambda v: v >= 1,
            "min-cut replicates per direction orbit",
        ),
    },
    "theta": {
        "replicates": _Field(
            "theta_replicates",
            int,
            200,
            lambda v: v >= 1,
            "cluster-density replicates",
        ),
        "half_width": _Field(
            "theta_half_width",
            int,
            30,
            lambda v: v >= 2,
            "box half-width for density estimation",
        ),
    },
    "phi": {
        "vol_cap": _Field(
            "phi_vol_cap",
            int,
            AUTO,
            lambda v: v == AUTO or v >= 1,
            "volume cap; -1 uses n^d",
        ),
        "anneal_steps": _Field(
            "anneal_steps", int, 400, lambda v: v >= 0, "annealing steps"
        ),
        "anneal_t_end": _Field(
            "anneal_t_end",
            float,
            AUTO,
            lambda v: v == AUTO or v > 0,
            "final annealing temperature; -1 uses the schedule default",
        ),
        "max_solves": _Field(
            "phi_max_solves",
            int,
            80,
            lambda v: v >= 1,
            "parametric sweep solve budget",
        ),
        "use_certificate": _Field(
            "use_certificate",
            _parse_bool,
            True,
            None,
            "add the crystal-boundary cutset candidate when a shape is known",
        ),
        "construct_delta": _Field(
            "construct_delta",
            float,
            AUTO,
            lambda v: v == AUTO or v > 0,
            "cutset collar fraction; -1 uses 0.1 x shape diameter",
        ),
    },
    "shape": {
        "delta": _Field(
            "shape_delta",
            float,
            AUTO,
            lambda v: v == AUTO or v > 0,
            "profile-family thickening; -1 uses 0.05 x shape diameter",
        ),
        "search_max_evals": _Field(
            "search_max_evals",
            int,
            4000,
            lambda v: v >= 1,
            "translation-search evaluation budget",
        ),
        "search_initial_step": _Field(
            "search_initial_step",
            float,
            0.5,
            lambda v: v > 0,
            "translation-search initial step",
        ),
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment parameters (defaults filled, everything checked)."""

    kind: str
    d: int
    p: float
    seed: int
    replicates: int
    out: str
    box_half_width: int
    box_margin: int
    n_schedule: tuple[int, ...]
    norm_directions: int
    norm_n: int
    norm_h_over_n: float
    norm_replicates: int
    theta_replicates: int
    theta_half_width: int
    phi_vol_cap: int
    anneal_steps: int
    anneal_t_end: float
    phi_max_solves: int
    use_certificate: bool
    construct_delta: float
    shape_delta: float
    search_max_evals: int
    search_initial_step: float

    def canonical_text(self) -> str:
        """Sorted ``section.key = value`` lines; the hashing surface.

        The output directory is excluded: it names where artifacts go,
        not what they contain, so re-emitting the same experiment into a
        different directory keeps the same hash (and the same bytes).
        """
        lines = []
        by_attr = {
            f.attr: (section, key)
            for section, keys in _SCHEMA.items()
            for key, f in keys.items()
        }
        for fld in fields(self):
            if fld.name == "out":
                continue
            section, key = by_attr[fld.name]
            value = getattr(self, fld.name)
            if isinstance(value, tuple):
                rendered = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                rendered = "true" if value else "false"
            elif isinstance(value, float):
                rendered = repr(value)
            else:
                rendered = str(value)
            lines.append(f"{section}.{key} = {rendered}")
        return "\n".join(sorted(lines)) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def replace(self, **overrides) -> "ExperimentConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        for name, value in overrides.items():
            if name not in values:
                raise ConfigError(f"unknown config attribute {name!r}")
            values[name] = value
        cfg = ExperimentConfig(**values)
        _validate(cfg)
        return cfg


def _validate(cfg: ExperimentConfig) -> None:
    for section, keys in _SCHEMA.items():
        for key, f in keys.items():
            value = getattr(cfg, f.attr)
            if f.check is not None and not f.check(value):
                raise ConfigError(
                    f"invalid value for [{section}] {key}: {value!r} ({f.help})"
                )


def default_config(kind: str = "phi", **overrides) -> ExperimentConfig:
    """All-defaults configuration for one experiment kind."""
    values = {
        f.attr: f.default for keys in _SCHEMA.values() for f in keys.values()
    }
    values["kind"] = kind
    values.update(overrides)
    cfg = ExperimentConfig(**values)
    _validate(cfg)
    return cfg


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse and validate ``key = value`` sections; unknown keys are errors."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    parser.optionxform = str  # keep keys case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    values = {
        f.attr: f.default for keys in _SCHEMA.values() for f in keys.values()
    }
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(
                f"unknown config section [{section}]; known sections: "
                + ", ".join(sorted(_SCHEMA))
            )
        for key, raw in parser.items(section):
            f = _SCHEMA[section].get(key)
            if f is None:
                raise ConfigError(
                    f"unknown key {key!r} in section [{section}]; known keys: "
                    + ", ".join(sorted(_SCHEMA[section]))
                )
            try:
                values[f.attr] = f.parse(raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(
                    f"bad value for [{section}] {key}: {raw!r} ({exc})"
                ) from exc
    cfg = ExperimentConfig(**values)
    _validate(cfg)
    return cfg


def parse_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc


def schema_text() -> str:
    """Documented template listing every section, key, default, and meaning."""
    out = io.StringIO()
    out.write("# experiment configuration schema (key = default  # meaning)\n")
    for section, keys in _SCHEMA.items():
        out.write(f"\n[{section}]\n")
        for key, f in keys.items():
            default = f.default
            if isinstance(default, tuple):
                rendered = ",".join(str(v) for v in default)
            elif isinstance(default, bool):
                rendered = "true" if default else "false"
            else:
                rendered = str(default)
            out.write(f"{key} = {rendered}  # {f.help}\n")
    return out.getvalue()
