"""Plain-text artifacts: points CSV, ASCII PLY, JSON summaries.

Floats are written with ``repr``, the shortest string that parses back to
the same double, so files round-trip bit for bit.
"""
from __future__ import annotations

import json
import os

import numpy as np


def _fmt(v) -> str:
    return repr(float(v))


def write_points(path, config):
    x = np.atleast_2d(np.asarray(config, dtype=float))
    with open(path, "w") as fh:
        fh.write(",".join(f"x{j + 1}" for j in range(x.shape[1])) + "\n")
        for row in x:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_points(path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline()
        p = len(header.strip().split(","))
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    return np.asarray(rows, dtype=float).reshape(len(rows), p)


def write_ply(path, config):
    """Vertex-only ASCII PLY; points must live in R^3."""
    x = np.atleast_2d(np.asarray(config, dtype=float))
    if x.shape[1] != 3:
        raise ValueError("PLY export needs points in R^3")
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {x.shape[0]}\n")
        fh.write("property double x\nproperty double y\nproperty double z\nend_header\n")
        for row in x:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def write_json(path, obj):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
