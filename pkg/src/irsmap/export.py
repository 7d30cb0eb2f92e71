"""Shared on-disk formats for radio maps and paths.

Every sidecar embeds the scenario hash and the tolerance set that produced
the artifact, so reruns with identical inputs reproduce identical bytes.
The sidecar JSON round-trips map values bit-exactly (repr-based floats with
an explicit traversability mask instead of float infinities); the CSV form
rounds dB values to 6 decimals and writes "NA" for untraversable cells.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def _values_to_lists(values: np.ndarray, mask: np.ndarray):
    out = []
    for row, mrow in zip(values, mask):
        out.append([float(v) if m else None for v, m in zip(row, mrow)])
    return out


def _lists_to_values(data, fill=-np.inf) -> tuple[np.ndarray, np.ndarray]:
    arr = np.array([[fill if v is None else v for v in row] for row in data], dtype=float)
    mask = np.array([[v is not None for v in row] for row in data], dtype=bool)
    return arr, mask


def write_map_csv(path: str | Path, values_db: np.ndarray, mask: np.ndarray) -> None:
    """One CSV row per x index; columns are y indices; 6-decimal dB values."""
    lines = []
    for row, mrow in zip(values_db, mask):
        cells = [f"{v:.6f}" if m else "NA" for v, m in zip(row, mrow)]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_map_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    rows = []
    mask = []
    for line in Path(path).read_text().strip().splitlines():
        cells = line.split(",")
        rows.append([float("-inf") if c == "NA" else float(c) for c in cells])
        mask.append([c != "NA" for c in cells])
    return np.array(rows), np.array(mask, dtype=bool)


def write_sidecar(path: str | Path, payload: dict) -> None:
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n"
    )


def read_sidecar(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def map_sidecar_payload(values: np.ndarray, traversable: np.ndarray,
                        grid, scenario_hash: str, units: str,
                        extra: dict | None = None) -> dict:
    payload = {
        "scenario_hash": scenario_hash,
        "grid": {
            "origin": [grid.origin_x, grid.origin_y],
            "delta": [grid.delta_x, grid.delta_y],
            "cells": [grid.nx, grid.ny],
        },
        "units": units,
        "values": _values_to_lists(values, traversable),
    }
    if extra:
        payload.update(extra)
    return payload


def sidecar_values(payload: dict) -> tuple[np.ndarray, np.ndarray]:
    """(values, traversable-mask) recovered bit-exactly from a sidecar."""
    return _lists_to_values(payload["values"])
