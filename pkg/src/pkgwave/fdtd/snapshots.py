"""Field snapshot files.

Layout: an ASCII header terminated by a line ``end``, then the raw arrays in
the order listed, little-endian float64, C order. Header lines::

    pkgwave-snapshot 1
    byteorder little
    dtype float64
    step <n>
    time <seconds>
    dim <2|3>
    nodes <Nx+1> <Ny+1> <Nz+1>
    field <name> <shape...>        (one line per array)
    end

The node coordinate arrays x, y, z are stored first as fields.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

MAGIC = "pkgwave-snapshot 1"


def write_snapshot(path, state, grid) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {"x": grid.x, "y": grid.y, "z": grid.z, **state.fields()}
    lines = [MAGIC, "byteorder little", "dtype float64", f"step {state.n}",
             f"time {state.time!r}", f"dim {grid.dim}",
             f"nodes {len(grid.x)} {len(grid.y)} {len(grid.z)}"]
    lines += [f"field {name} " + " ".join(str(s) for s in a.shape) for name, a in arrays.items()]
    lines.append("end")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return path


def read_snapshot(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Return (header, arrays)."""
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.find(b"\nend\n")
    if not data.startswith(MAGIC.encode()) or end < 0:
        raise ValueError(f"{path}: not a snapshot file")
    header: dict = {}
    shapes = []
    for line in data[:end].decode("ascii").splitlines()[1:]:
        key, *rest = line.split()
        if key == "field":
            shapes.append((rest[0], tuple(int(s) for s in rest[1:])))
        elif key in ("step", "dim"):
            header[key] = int(rest[0])
        elif key == "time":
            header[key] = float(rest[0])
        elif key == "nodes":
            header[key] = tuple(int(s) for s in rest)
        else:
            header[key] = rest[0]
    offset = end + len(b"\nend\n")
    arrays = {}
    for name, shape in shapes:
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += 8 * count
    if offset != len(data):
        raise ValueError(f"{path}: size does not match header")
    return header, arrays
