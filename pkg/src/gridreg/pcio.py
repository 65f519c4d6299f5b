"""Point-cloud file readers and writers.

Two formats:

* ASCII XYZ: one point per line, three whitespace-separated floats,
  lines starting with ``#`` skipped.
* PLY subset: ASCII or binary-little-endian, reads the x/y/z properties of
  the ``vertex`` element (float32 or float64); every other element and
  property is ignored. List properties inside or before the vertex element
  are rejected rather than mis-parsed.

The XYZ writer emits 9 significant digits.
"""

from __future__ import annotations

import numpy as np

from .errors import PointCloudIOError
from .geometry import as_point_cloud

__all__ = ["read_xyz", "write_xyz", "read_ply", "read_point_cloud"]

_PLY_SCALARS = {
    "char": ("i1", 1), "int8": ("i1", 1),
    "uchar": ("u1", 1), "uint8": ("u1", 1),
    "short": ("i2", 2), "int16": ("i2", 2),
    "ushort": ("u2", 2), "uint16": ("u2", 2),
    "int": ("i4", 4), "int32": ("i4", 4),
    "uint": ("u4", 4), "uint32": ("u4", 4),
    "float": ("f4", 4), "float32": ("f4", 4),
    "double": ("f8", 8), "float64": ("f8", 8),
}


def read_xyz(path) -> np.ndarray:
    """Read an ASCII XYZ file into an (N, 3) float64 array."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 3:
                raise PointCloudIOError(
                    f"{path}:{lineno}: expected 3 fields, got {len(parts)}"
                )
            try:
                rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise PointCloudIOError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise PointCloudIOError(f"{path}: no points found")
    try:
        return as_point_cloud(np.array(rows, dtype=np.float64))
    except Exception as exc:
        raise PointCloudIOError(f"{path}: {exc}") from exc


def write_xyz(path, points) -> None:
    """Write an (N, 3) array as ASCII XYZ with 9 significant digits."""
    pts = as_point_cloud(points)
    with open(path, "w", encoding="utf-8") as fh:
        for p in pts:
            fh.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")


def _parse_ply_header(fh):
    """Return (format, elements) where elements is a list of
    (name, count, [(prop_name, dtype_code, size)]); list properties produce
    a ('__list__', item sizes) marker that the callers reject when relevant."""
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise PointCloudIOError("not a PLY file (missing 'ply' magic)")
    fmt = None
    elements = []
    current = None
    while True:
        raw = fh.readline()
        if not raw:
            raise PointCloudIOError("unexpected end of PLY header")
        line = raw.decode("ascii", errors="replace").strip()
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        parts = line.split()
        if parts[0] == "format":
            if len(parts) < 2 or parts[1] not in ("ascii", "binary_little_endian"):
                raise PointCloudIOError(f"unsupported PLY format: {line!r}")
            fmt = parts[1]
        elif parts[0] == "element":
            if len(parts) != 3:
                raise PointCloudIOError(f"malformed element line: {line!r}")
            current = (parts[1], int(parts[2]), [])
            elements.append(current)
        elif parts[0] == "property":
            if current is None:
                raise PointCloudIOError("property before any element in PLY header")
            if parts[1] == "list":
                current[2].append((parts[-1], "__list__", 0))
            else:
                if parts[1] not in _PLY_SCALARS:
                    raise PointCloudIOError(f"unknown PLY property type {parts[1]!r}")
                code, size = _PLY_SCALARS[parts[1]]
                current[2].append((parts[2], code, size))
        elif parts[0] == "end_header":
            break
        else:
            raise PointCloudIOError(f"unexpected PLY header line: {line!r}")
    if fmt is None:
        raise PointCloudIOError("PLY header missing format line")
    return fmt, elements


def read_ply(path) -> np.ndarray:
    """Read the vertex x/y/z coordinates from a PLY file."""
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh)
        vertex = None
        for el in elements:
            if el[0] == "vertex":
                vertex = el
                break
        if vertex is None:
            raise PointCloudIOError(f"{path}: PLY file has no vertex element")
        _, count, props = vertex
        names = [p[0] for p in props]
        for axis in ("x", "y", "z"):
            if axis not in names:
                raise PointCloudIOError(f"{path}: vertex element lacks property {axis!r}")
        if count < 1:
            raise PointCloudIOError(f"{path}: vertex element is empty")
        for p in props:
            if p[1] == "__list__":
                raise PointCloudIOError(
                    f"{path}: list property in vertex element is not supported"
                )
            if p[0] in ("x", "y", "z") and p[1] not in ("f4", "f8"):
                raise PointCloudIOError(
                    f"{path}: vertex coordinate {p[0]!r} is not float32/float64"
                )

        if fmt == "ascii":
            return _read_ply_ascii(fh, path, elements, vertex)
        return _read_ply_binary(fh, path, elements, vertex)


def _read_ply_ascii(fh, path, elements, vertex):
    names = [p[0] for p in vertex[2]]
    ix, iy, iz = names.index("x"), names.index("y"), names.index("z")
    rows = np.empty((vertex[1], 3))
    for el in elements:
        if el is vertex:
            for r in range(el[1]):
                line = fh.readline()
                if not line:
                    raise PointCloudIOError(f"{path}: truncated vertex data")
                parts = line.split()
                if len(parts) < len(names):
                    raise PointCloudIOError(f"{path}: short vertex row {r}")
                try:
                    rows[r, 0] = float(parts[ix])
                    rows[r, 1] = float(parts[iy])
                    rows[r, 2] = float(parts[iz])
                except ValueError as exc:
                    raise PointCloudIOError(f"{path}: bad vertex row {r}: {exc}") from exc
            break
        for p in el[2]:
            if p[1] == "__list__":
                raise PointCloudIOError(
                    f"{path}: list property before vertex element is not supported"
                )
        for _ in range(el[1]):
            if not fh.readline():
                raise PointCloudIOError(f"{path}: truncated element {el[0]!r}")
    try:
        return as_point_cloud(rows)
    except Exception as exc:
        raise PointCloudIOError(f"{path}: {exc}") from exc


def _read_ply_binary(fh, path, elements, vertex):
    for el in elements:
        if el is vertex:
            dtype = np.dtype([(p[0], "<" + p[1]) for p in el[2]])
            buf = fh.read(dtype.itemsize * el[1])
            if len(buf) != dtype.itemsize * el[1]:
                raise PointCloudIOError(f"{path}: truncated vertex data")
            rec = np.frombuffer(buf, dtype=dtype)
            out = np.stack(
                [rec["x"].astype(np.float64), rec["y"].astype(np.float64),
                 rec["z"].astype(np.float64)],
                axis=1,
            )
            try:
                return as_point_cloud(out)
            except Exception as exc:
                raise PointCloudIOError(f"{path}: {exc}") from exc
        for p in el[2]:
            if p[1] == "__list__":
                raise PointCloudIOError(
                    f"{path}: list property before vertex element is not supported"
                )
        stride = sum(p[2] for p in el[2])
        skipped = fh.read(stride * el[1])
        if len(skipped) != stride * el[1]:
            raise PointCloudIOError(f"{path}: truncated element {el[0]!r}")
    raise PointCloudIOError(f"{path}: vertex element not reached")


def read_point_cloud(path) -> np.ndarray:
    """Read a point cloud, dispatching on file suffix (.ply -> PLY, else XYZ)."""
    p = str(path)
    if p.lower().endswith(".ply"):
        return read_ply(p)
    return read_xyz(p)
