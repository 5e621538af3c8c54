"""ASCII PLY point clouds, label sidecars, and result JSON documents.

Coordinates are written with repr-level precision so write-then-read
round-trips are lossless; correspondence is by row index between paired
files.  Labels are one 0/1 per line.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

RESULT_SCHEMA_VERSION = "1"


class PlyError(ValueError):
    """Malformed PLY input; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def write_ascii_ply(path, points) -> None:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must be (N, 3)")
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {pts.shape[0]}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    for p in pts:
        lines.append(f"{p[0]:.17g} {p[1]:.17g} {p[2]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_ascii_ply(path) -> np.ndarray:
    """Parse vertices with x, y, z properties from an ASCII PLY file."""
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != "ply":
        raise PlyError("missing 'ply' magic", 1)

    n_vertex = None
    coord_cols = {}
    n_props = 0
    in_vertex_element = False
    header_end = None
    for lineno, raw in enumerate(text[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("comment"):
            continue
        if line == "end_header":
            header_end = lineno
            break
        parts = line.split()
        if parts[0] == "format":
            if len(parts) < 2 or parts[1] != "ascii":
                raise PlyError("only 'format ascii 1.0' is supported", lineno)
        elif parts[0] == "element":
            in_vertex_element = parts[1] == "vertex"
            if in_vertex_element:
                try:
                    n_vertex = int(parts[2])
                except (IndexError, ValueError):
                    raise PlyError("bad vertex count", lineno) from None
        elif parts[0] == "property" and in_vertex_element:
            if len(parts) != 3:
                raise PlyError("malformed property", lineno)
            name = parts[2]
            if name in ("x", "y", "z"):
                coord_cols[name] = n_props
            n_props += 1
    if header_end is None:
        raise PlyError("missing end_header", len(text))
    if n_vertex is None:
        raise PlyError("missing 'element vertex'", header_end)
    if set(coord_cols) != {"x", "y", "z"}:
        raise PlyError("vertex element must carry x, y, z properties", header_end)

    rows = []
    lineno = header_end
    for raw in text[header_end:]:
        lineno += 1
        line = raw.strip()
        if not line:
            continue
        if len(rows) == n_vertex:
            break
        parts = line.split()
        if len(parts) < n_props:
            raise PlyError(f"expected {n_props} values, found {len(parts)}", lineno)
        try:
            rows.append(
                [
                    float(parts[coord_cols["x"]]),
                    float(parts[coord_cols["y"]]),
                    float(parts[coord_cols["z"]]),
                ]
            )
        except ValueError:
            raise PlyError("non-numeric vertex value", lineno) from None
    if len(rows) != n_vertex:
        raise PlyError(f"expected {n_vertex} vertices, found {len(rows)}", lineno)
    return np.asarray(rows, dtype=float)


def write_labels(path, labels) -> None:
    Path(path).write_text("".join(f"{int(bool(v))}\n" for v in labels))


def read_labels(path) -> np.ndarray:
    values = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line not in ("0", "1"):
            raise PlyError("labels must be 0 or 1", lineno)
        values.append(line == "1")
    return np.asarray(values, dtype=bool)


def transform_to_dict(transform) -> dict:
    return {
        "scale": float(transform.scale),
        "quaternion_xyzw": [float(v) for v in transform.rotation.as_array()],
        "translation": [float(v) for v in transform.translation],
    }


def write_result_json(path, payload: dict) -> None:
    doc = {"schema_version": RESULT_SCHEMA_VERSION, **payload}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_result_json(path) -> dict:
    return json.loads(Path(path).read_text())
