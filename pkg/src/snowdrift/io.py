"""Plain-text and SVG exports.

Every file starts with ``#`` comment lines echoing the effective run config.
Floats are written with ``repr`` so outputs are byte-identical across runs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .boundary import BoundaryFunction
from .geometry import BoundaryGraph
from .mesh import TriMesh


def config_header(config: dict | None) -> str:
    if not config:
        return ""
    return "".join(f"# {k}={config[k]}\n" for k in sorted(config))


def _fmt(x: float) -> str:
    return repr(float(x))


def write_mesh(path, mesh: TriMesh, values: np.ndarray | None = None, config: dict | None = None) -> Path:
    """``snowmesh v1``: node, tri and optional val records."""
    path = Path(path)
    lines = [config_header(config), "snowmesh v1\n"]
    for i, (x, y) in enumerate(mesh.nodes):
        rec = f"node {i} {_fmt(x)} {_fmt(y)}"
        if mesh.boundary_link[i] >= 0:
            rec += f" boundary {mesh.boundary_link[i]}"
        lines.append(rec + "\n")
    for t, (a, b, c) in enumerate(mesh.triangles):
        lines.append(f"tri {t} {a} {b} {c} {mesh.shell[t]}\n")
    if values is not None:
        lines.extend(f"val {i} {_fmt(v)}\n" for i, v in enumerate(values))
    path.write_text("".join(lines))
    return path


def read_mesh(path) -> dict:
    """Parse a snowmesh file into arrays (nodes, boundary, triangles, shell, values)."""
    nodes, bnd, tris, shell, vals = [], {}, [], [], {}
    seen_magic = False
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "snowmesh":
            if parts[1:] != ["v1"]:
                raise ValueError(f"unsupported mesh format {line!r}")
            seen_magic = True
        elif parts[0] == "node":
            nodes.append((float(parts[2]), float(parts[3])))
            if len(parts) == 6 and parts[4] == "boundary":
                bnd[int(parts[1])] = int(parts[5])
        elif parts[0] == "tri":
            tris.append(tuple(int(p) for p in parts[2:5]))
            shell.append(int(parts[5]))
        elif parts[0] == "val":
            vals[int(parts[1])] = float(parts[2])
        else:
            raise ValueError(f"unknown record {parts[0]!r}")
    if not seen_magic:
        raise ValueError("missing snowmesh header")
    values = np.array([vals[i] for i in range(len(nodes))]) if vals else None
    return {"nodes": np.array(nodes), "boundary": bnd, "triangles": np.array(tris, dtype=np.int64),
            "shell": np.array(shell, dtype=np.int64), "values": values}


def write_values(path, values, config: dict | None = None) -> Path:
    """CSV ``vertex_or_edge_id,value``."""
    path = Path(path)
    rows = "".join(f"{i},{_fmt(v)}\n" for i, v in enumerate(np.asarray(values)))
    path.write_text(config_header(config) + "vertex_or_edge_id,value\n" + rows)
    return path


def read_boundary_csv(path, graph: BoundaryGraph) -> BoundaryFunction:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    values = np.full(graph.n, np.nan)
    for row in csv.DictReader(lines):
        i = int(row["vertex_or_edge_id"])
        if not 0 <= i < graph.n:
            raise ValueError(f"vertex id {i} out of range for {graph.n} vertices")
        values[i] = float(row["value"])
    if np.isnan(values).any():
        raise ValueError(f"boundary data misses {int(np.isnan(values).sum())} vertices")
    return BoundaryFunction(graph, values)


def write_trajectory(path, traj, config: dict | None = None) -> Path:
    """CSV ``time,node_id,value``, one row per (time, node)."""
    path = Path(path)
    out = [config_header(config), "time,node_id,value\n"]
    for t, u in zip(traj.times, traj.states):
        ts = _fmt(t)
        out.extend(f"{ts},{i},{_fmt(v)}\n" for i, v in enumerate(u))
    path.write_text("".join(out))
    return path


def write_report(path, items: dict | str, config: dict | None = None) -> Path:
    """key=value text report."""
    path = Path(path)
    body = items if isinstance(items, str) else "".join(f"{k}={v}\n" for k, v in items.items())
    path.write_text(config_header(config) + body)
    return path


def _colour(t: float) -> str:
    # blue -> white -> red
    t = min(max(t, 0.0), 1.0)
    if t < 0.5:
        s = t / 0.5
        r, g, b = int(59 + s * (255 - 59)), int(76 + s * (255 - 76)), 255 - int(s * 10)
    else:
        s = (t - 0.5) / 0.5
        r, g, b = 255 - int(s * 75), int(255 - s * (255 - 4)), int(245 - s * (245 - 38))
    return f"#{r:02x}{g:02x}{b:02x}"


def write_svg(path, mesh: TriMesh, values: np.ndarray | None = None, config: dict | None = None,
              size: int = 800) -> Path:
    """Mesh drawing; with ``values`` triangles are shaded by their mean value."""
    path = Path(path)
    xy = mesh.nodes
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    scale = size / float((hi - lo).max())
    px = (xy - lo) * scale
    px[:, 1] = size - px[:, 1]
    if values is not None:
        tv = values[mesh.triangles].mean(axis=1)
        span = float(tv.max() - tv.min()) or 1.0
        tv = (tv - tv.min()) / span
    parts = ["<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"]
    if config:
        parts.append("<!--\n" + config_header(config) + "-->\n")
    parts.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
                 f'viewBox="0 0 {size} {size}">\n')
    stroke = "none" if mesh.n_triangles > 20000 else "#333333"
    for t, tri in enumerate(mesh.triangles):
        pts = " ".join(f"{px[i, 0]:.3f},{px[i, 1]:.3f}" for i in tri)
        fill = _colour(tv[t]) if values is not None else ("#dddddd" if mesh.shell[t] >= 0 else "#f4c48a")
        parts.append(f'<polygon points="{pts}" fill="{fill}" stroke="{stroke}" stroke-width="0.3"/>\n')
    parts.append("</svg>\n")
    path.write_text("".join(parts))
    return path
