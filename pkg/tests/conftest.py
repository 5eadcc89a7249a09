"""Shared helpers for the test suite.

Provides the regression-fixture mechanism (record on first run, compare
afterwards) plus small bridges between library objects and the plain
containers the oracles consume.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FIXTURE_DIR = Path(__file__).parent / "fixtures"


def load_or_record(name: str, payload: dict) -> dict:
    """Return the frozen copy of ``payload``, writing it on first use.

    The first run records the computed payload under
    ``tests/fixtures/<name>.json`` and returns it unchanged; later runs
    return the recorded version so the caller can assert no regression.
    """
    FIXTURE_DIR.mkdir(exist_ok=True)
    path = FIXTURE_DIR / f"{name}.json"
    if not path.exists():
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return payload
    return json.loads(path.read_text())


def open_edge_pairs(config) -> list[tuple[int, int]]:
    """The open edges of a configuration as plain (tail, head) pairs."""
    box = config.box
    tails, heads, _, _ = box.edge_arrays
    keep = np.flatnonzero(config.open_)
    return list(zip(tails[keep].tolist(), heads[keep].tolist()))


def all_edge_pairs(config) -> list[tuple[int, int]]:
    """Every lattice edge of the box as plain (tail, head) pairs."""
    tails, heads, _, _ = config.box.edge_arrays
    return list(zip(tails.tolist(), heads.tolist()))
