"""Point-cloud and transform file I/O: ASCII XYZ, ASCII PLY, 12-number
transform text. All output uses 9 significant digits and LF line endings
so golden files diff cleanly across platforms."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .errors import CloudFormatError
from .geom import RigidTransform

_FLOAT_TYPES = {"float", "float32", "float64", "double"}
_SCALAR_TYPES = _FLOAT_TYPES | {
    "char", "uchar", "short", "ushort", "int", "uint",
    "int8", "uint8", "int16", "uint16", "int32", "uint32",
}


def _parse_xyz(path: Path) -> PointCloud:
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise CloudFormatError(
                    path, line_no, f"expected 3 coordinates, got {len(parts)} fields"
                )
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                raise CloudFormatError(path, line_no, f"bad number in {line!r}") from None
    if not rows:
        raise CloudFormatError(path, 0, "file contains no points")
    return PointCloud(np.array(rows))


def _parse_ply(path: Path) -> PointCloud:
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise CloudFormatError(path, 1, "missing 'ply' magic line")

    vertex_count = None
    vertex_props: list[str] = []
    fmt_seen = False
    current_element = None
    data_start = None
    for line_no, raw in enumerate(lines[1:], start=2):
        parts = raw.split()
        if not parts or parts[0] == "comment":
            continue
        kw = parts[0]
        if kw == "format":
            if parts[1:3] != ["ascii", "1.0"]:
                raise CloudFormatError(path, line_no, f"unsupported PLY format {raw.strip()!r}")
            fmt_seen = True
        elif kw == "element":
            if len(parts) != 3:
                raise CloudFormatError(path, line_no, f"malformed element line {raw.strip()!r}")
            current_element = parts[1]
            if current_element == "vertex":
                if vertex_count is not None:
                    raise CloudFormatError(path, line_no, "duplicate vertex element")
                vertex_count = int(parts[2])
            elif vertex_count is None:
                # Vertex data must come first in the payload or the vertex
                # block offset is unknowable for list-typed elements.
                raise CloudFormatError(
                    path, line_no, f"unsupported PLY element {current_element!r} before vertex"
                )
        elif kw == "property":
            if current_element != "vertex":
                continue  # properties of trailing elements are irrelevant
            if len(parts) != 3 or parts[1] not in _SCALAR_TYPES:
                raise CloudFormatError(
                    path, line_no, f"unsupported vertex property {raw.strip()!r}"
                )
            vertex_props.append(parts[2])
        elif kw == "end_header":
            data_start = line_no  # 0-based index into `lines` of first data row
            break
        else:
            raise CloudFormatError(path, line_no, f"unknown header keyword {kw!r}")
    if data_start is None or not fmt_seen:
        raise CloudFormatError(path, len(lines), "truncated PLY header")
    if vertex_count is None:
        raise CloudFormatError(path, data_start, "PLY header declares no vertex element")
    try:
        cols = [vertex_props.index(name) for name in ("x", "y", "z")]
    except ValueError:
        raise CloudFormatError(
            path, data_start, f"vertex element lacks x/y/z properties, has {vertex_props}"
        ) from None

    pts = np.empty((vertex_count, 3))
    for i in range(vertex_count):
        line_no = data_start + 1 + i
        if line_no > len(lines):
            raise CloudFormatError(path, len(lines), "unexpected end of vertex data")
        parts = lines[line_no - 1].split()
        if len(parts) != len(vertex_props):
            raise CloudFormatError(
                path, line_no,
                f"expected {len(vertex_props)} vertex fields, got {len(parts)}",
            )
        try:
            pts[i] = [float(parts[c]) for c in cols]
        except ValueError:
            raise CloudFormatError(path, line_no, "bad number in vertex row") from None
    if vertex_count == 0:
        raise CloudFormatError(path, data_start, "PLY declares zero vertices")
    return PointCloud(pts)


def load_cloud(path) -> PointCloud:
    """Load an XYZ or ASCII-PLY point cloud; format sniffed from the first
    line ('ply' magic) with the extension as fallback."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline().strip()
    if first == "ply" or path.suffix.lower() == ".ply":
        return _parse_ply(path)
    return _parse_xyz(path)


def save_cloud(cloud: PointCloud, path, fmt: str = "xyz") -> None:
    """Write a cloud as 'xyz' or 'ply' (ASCII) text, 9 significant digits."""
    if fmt not in ("xyz", "ply"):
        raise ValueError(f"unknown cloud format {fmt!r}")
    path = Path(path)
    rows = [" ".join(f"{c:.9g}" for c in p) for p in cloud.points]
    if fmt == "xyz":
        body = "\n".join(rows) + "\n"
    else:
        header = (
            "ply\nformat ascii 1.0\n"
            f"element vertex {len(cloud)}\n"
            "property float x\nproperty float y\nproperty float z\n"
            "end_header\n"
        )
        body = header + "\n".join(rows) + "\n"
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(body)


def save_transform(t: RigidTransform, path) -> None:
    """Write the 3x4 transform as 12 plain numbers: three rotation rows then
    the translation row."""
    path = Path(path)
    lines = [" ".join(f"{v:.17g}" for v in row) for row in t.rotation]
    lines.append(" ".join(f"{v:.17g}" for v in t.translation))
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_transform(path) -> RigidTransform:
    path = Path(path)
    values = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#")[0].strip()
            if not line:
                continue
            try:
                values.extend(float(v) for v in line.split())
            except ValueError:
                raise CloudFormatError(path, line_no, f"bad number in {line!r}") from None
    if len(values) != 12:
        raise CloudFormatError(path, 0, f"expected 12 numbers, got {len(values)}")
    return RigidTransform(np.array(values[:9]).reshape(3, 3), np.array(values[9:]))
