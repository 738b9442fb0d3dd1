"""PLY reader/writer for feature-bearing point clouds.

Writing uses binary little-endian doubles (positions as x/y/z, features
as feat_0..feat_{F-1}) so round-trips are bit-exact. Reading additionally
accepts ASCII files from external tools: any scalar vertex property other
than x/y/z is treated as a feature column, in declaration order.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import FormatError
from .cloud import PointCloud

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def write_ply(cloud: PointCloud, path, binary: bool = True) -> None:
    f = cloud.feature_dim
    names = ["x", "y", "z"] + [f"feat_{i}" for i in range(f)]
    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0", f"element vertex {cloud.n_points}"]
    header += [f"property double {name}" for name in names]
    header.append("end_header")
    columns = [cloud.positions]
    if f:
        columns.append(cloud.features)
    table = np.concatenate(columns, axis=1)
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(table.astype("<f8").tobytes())
        else:
            for row in table:
                fh.write((" ".join(f"{v:.17g}" for v in row) + "\n").encode("ascii"))


def read_ply(path) -> PointCloud:
    raw = Path(path).read_bytes()
    end = raw.find(b"end_header")
    if not raw.startswith(b"ply") or end < 0:
        raise FormatError(f"{path}: not a PLY file")
    body_start = raw.index(b"\n", end) + 1
    header_lines = raw[:end].decode("ascii", errors="replace").splitlines()

    fmt = None
    n_vertex = None
    props: list[tuple[str, str]] = []
    element = None
    for line in header_lines[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            element = parts[1]
            if element == "vertex":
                n_vertex = int(parts[2])
            else:
                raise FormatError(f"{path}: unsupported element {element!r}")
        elif parts[0] == "property":
            if element != "vertex":
                raise FormatError(f"{path}: property outside vertex element")
            if parts[1] == "list":
                raise FormatError(f"{path}: list properties are not supported")
            if parts[1] not in _PLY_TYPES:
                raise FormatError(f"{path}: unknown property type {parts[1]!r}")
            props.append((parts[2], _PLY_TYPES[parts[1]]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise FormatError(f"{path}: unsupported format {fmt!r}")
    if n_vertex is None:
        raise FormatError(f"{path}: missing vertex element")
    names = [name for name, _ in props]
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise FormatError(f"{path}: missing {axis!r} property")

    if fmt == "binary_little_endian":
        dtype = np.dtype([(name, "<" + kind) for name, kind in props])
        body = raw[body_start : body_start + dtype.itemsize * n_vertex]
        if len(body) != dtype.itemsize * n_vertex:
            raise FormatError(f"{path}: truncated payload")
        rows = np.frombuffer(body, dtype=dtype)
    else:
        text = raw[body_start:].decode("ascii")
        values = text.split()
        if len(values) < n_vertex * len(props):
            raise FormatError(f"{path}: truncated payload")
        try:
            flat = np.array(values[: n_vertex * len(props)], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"{path}: bad ascii value ({exc})") from exc
        table = flat.reshape(n_vertex, len(props))
        rows = {name: table[:, i] for i, (name, _) in enumerate(props)}

    positions = np.stack(
        [np.asarray(rows["x"], np.float64), np.asarray(rows["y"], np.float64),
         np.asarray(rows["z"], np.float64)], axis=1,
    )
    feat_names = [n for n in names if n not in ("x", "y", "z")]
    features = None
    if feat_names:
        features = np.stack(
            [np.asarray(rows[n], np.float64) for n in feat_names], axis=1
        )
    return PointCloud(positions=positions, features=features)
