"""Triangulations of the snowflake domain.

``shell_triangulation`` builds the nested lattice triangulation T_N (triangles
of side 3**-k filling T_k minus T_{k-1}); ``hexagon_exhaustion`` builds the
closed hexagon union Omega_N.  Both keep their multiscale structure, so
they carry hanging nodes at scale changes.  ``collar_mesh`` adds the lattice
triangles between the base and the level-(N+1) polyline; with
``conforming=True`` (the default) it returns the conforming refinement used
by the solver.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import lattice as lat
from .geometry import BoundaryGraph, boundary_lattice_points, check_level, polygon_triangles


class Construction(str, Enum):
    SHELL = "ShellLattice"
    HEXAGON = "HexagonInduction"


COLLAR = -1


@dataclass(eq=False)
class TriMesh:
    """Triangle mesh with exact lattice node coordinates.

    ``lattice`` holds nodes as integer pairs at ``level`` (points of
    3**-level Z[w]); ``scale[t]`` is k when triangle t is an equilateral
    triangle of side 3**-k; ``shell[t]`` is the shell (or hexagon step) that
    produced it, ``COLLAR`` for collar triangles.
    """

    level: int
    lattice: np.ndarray
    triangles: np.ndarray
    shell: np.ndarray
    scale: np.ndarray
    boundary_link: np.ndarray
    construction: Construction
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = lat.to_xy(self.lattice[:, 0], self.lattice[:, 1], self.level)

    @property
    def n_nodes(self) -> int:
        return len(self.lattice)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def area(self) -> float:
        return float(self.areas().sum())

    def angles(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        out = np.empty((len(p), 3))
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            c = (u * v).sum(1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            out[:, i] = np.degrees(np.arccos(np.clip(c, -1.0, 1.0)))
        return out

    def boundary_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_link >= 0)

    def node_index(self) -> dict:
        return {p: i for i, p in enumerate(map(tuple, self.lattice.tolist()))}

    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted node pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def hanging_nodes(self) -> list[tuple[int, int, int]]:
        """(node, edge_start, edge_end) for nodes lying strictly inside an edge."""
        e = self.edges()
        d = self.lattice[e[:, 1]] - self.lattice[e[:, 0]]
        g = np.gcd(np.abs(d[:, 0]), np.abs(d[:, 1]))
        index = lat.KeyIndex(self.lattice, points=True)
        out = []
        for (i, j), dd, gg in zip(e[g > 1], d[g > 1], g[g > 1]):
            t = np.arange(1, gg)[:, None]
            found = index.lookup(self.lattice[i] + t * (dd // gg))
            out.extend((int(k), int(i), int(j)) for k in found[found >= 0])
        return out

    def is_conforming(self) -> bool:
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        _, counts = np.unique(e, axis=0, return_counts=True)
        return bool(counts.max() <= 2) and not self.hanging_nodes()

    def triangle_keys(self) -> np.ndarray:
        """Lattice key of each triangle at its own scale."""
        c = self.lattice[self.triangles].sum(axis=1)
        denom = 3 * 3 ** (self.level - self.scale)
        keys = np.empty((self.n_triangles, 3), dtype=np.int64)
        for s in np.unique(self.scale):
            sel = self.scale == s
            keys[sel] = lat.locate(c[sel, 0], c[sel, 1], int(3 * 3 ** (self.level - s)))
        return keys


class _NodeTable:
    def __init__(self):
        self.index: dict = {}
        self.points: list = []

    def add(self, p) -> int:
        p = (int(p[0]), int(p[1]))
        i = self.index.get(p)
        if i is None:
            i = len(self.points)
            self.index[p] = i
            self.points.append(p)
        return i

    def add_many(self, pts: np.ndarray) -> np.ndarray:
        return np.array([self.add(p) for p in pts.reshape(-1, 2).tolist()], dtype=np.int64)

    def array(self) -> np.ndarray:
        return np.array(self.points, dtype=np.int64).reshape(-1, 2)


def _link_boundary(points: np.ndarray, level: int, graph: BoundaryGraph | None) -> np.ndarray:
    if graph is None:
        return np.full(len(points), -1, dtype=np.int64)
    f = 3 ** (level - graph.level)
    return lat.KeyIndex(graph.lattice * f, points=True).lookup(points)


def _mesh_from_keys(key_groups, level, shell_tags, construction, graph=None, meta=None) -> TriMesh:
    """Assemble a mesh from lattice keys given per (scale, keys) group."""
    verts, shells, scales = [], [], []
    for (scale, keys), tag in zip(key_groups, shell_tags):
        if len(keys) == 0:
            continue
        verts.append(lat.triangle_vertices(keys) * 3 ** (level - scale))
        shells.append(np.broadcast_to(np.asarray(tag), (len(keys),)))
        scales.append(np.full(len(keys), scale))
    v = np.concatenate(verts).reshape(-1, 2)
    _, first, inverse = np.unique(lat.encode_points(v), return_index=True, return_inverse=True)
    pts = v[first]
    return TriMesh(
        level=level,
        lattice=pts,
        triangles=inverse.reshape(-1, 3).astype(np.int64),
        shell=np.concatenate(shells).astype(np.int64),
        scale=np.concatenate(scales).astype(np.int64),
        boundary_link=_link_boundary(pts, level, graph),
        construction=construction,
        meta=meta or {},
    )


def interior_triangles(k: int) -> np.ndarray:
    """Keys of the L_k triangles whose closure lies in the open domain (T_k)."""
    keys = polygon_triangles(k)
    bpts, blevel = boundary_lattice_points(k + 1)
    assert blevel == k
    v = lat.triangle_vertices(keys).reshape(-1, 2)
    touches = (lat.KeyIndex(bpts, points=True).lookup(v) >= 0).reshape(-1, 3).any(axis=1)
    return keys[~touches]


def shell_triangulation(level: int) -> TriMesh:
    """Nested lattice triangulation of T_N with shells tagged 1..N."""
    check_level(level, 1)
    groups, tags, shell_keys = [], [], {}
    prev = None
    for k in range(1, level + 1):
        tk = interior_triangles(k)
        if prev is None:
            new = tk
        else:
            new = tk[lat.KeyIndex(prev).lookup(lat.parent(tk)) < 0]
        shell_keys[k] = new
        groups.append((k, new))
        tags.append(k)
        prev = tk
    return _mesh_from_keys(groups, level, tags, Construction.SHELL,
                           meta={"N": level, "shell_keys": shell_keys})


# ---------------------------------------------------------------------------
# hexagon induction

@dataclass(frozen=True)
class Component:
    """Open component left after a hexagon step, described by its triangle.

    kind "A": base [p, q] already covered, sides [q, r], [r, p] fractal.
    kind "B": [p, q], [q, r] covered, [r, p] fractal (p on the boundary).
    kind "C": all three sides covered.
    """

    kind: str
    p: tuple
    q: tuple
    r: tuple

    @property
    def fractal_sides(self) -> int:
        return {"A": 2, "B": 1, "C": 0}[self.kind]


def _third(u, v, t):
    d = (v[0] - u[0], v[1] - u[1])
    assert d[0] % 3 == 0 and d[1] % 3 == 0, "hexagon recursion left the lattice"
    return (u[0] + t * d[0] // 3, u[1] + t * d[1] // 3)


def _outward_tip(u, v, inside):
    """Apex of the equilateral bump on segment uv pointing away from ``inside``."""
    d = (v[0] - u[0], v[1] - u[1])
    best = None
    for rot in (lat.mul_w, lat.mul_wbar):
        e = rot(*d)
        tip = (u[0] + e[0], u[1] + e[1])
        s_tip = lat.cross(d[0], d[1], tip[0] - u[0], tip[1] - u[1])
        s_in = lat.cross(d[0], d[1], inside[0] - u[0], inside[1] - u[1])
        if s_tip * s_in < 0:
            best = tip
    assert best is not None
    return best


def _split(c: Component):
    """Hexagon of a component and its child components.

    Returns (centre, vertices in cyclic order with their sides, children);
    a side is ("fractal",) or ("covered", a, b, weight_of_a).
    """
    p, q, r = c.p, c.q, c.r
    a1, a2 = _third(p, q, 1), _third(p, q, 2)
    b1, b2 = _third(q, r, 1), _third(q, r, 2)
    c1, c2 = _third(r, p, 1), _third(r, p, 2)
    kinds = {"A": ("cov", "frac", "frac"), "B": ("cov", "cov", "frac"), "C": ("cov", "cov", "cov")}[c.kind]
    sides = [((p, q), (a1, a2), kinds[0]), ((q, r), (b1, b2), kinds[1]), ((r, p), (c1, c2), kinds[2])]
    verts = []
    for (u, v), (t1, t2), kind in sides:
        for t, wu in ((t1, 2 / 3), (t2, 1 / 3)):
            verts.append((t, ("fractal",) if kind == "frac" else ("covered", u, v, wu)))
    centre3 = (p[0] + q[0] + r[0], p[1] + q[1] + r[1])
    assert centre3[0] % 3 == 0 and centre3[1] % 3 == 0
    centre = (centre3[0] // 3, centre3[1] // 3)
    kids = []
    if c.kind == "A":
        kids.append(Component("A", b2, c1, r))
        kids.append(Component("A", b1, b2, _outward_tip(b1, b2, centre)))
        kids.append(Component("A", c1, c2, _outward_tip(c1, c2, centre)))
        kids.append(Component("B", p, a1, c2))
        kids.append(Component("B", q, a2, b1))
    elif c.kind == "B":
        # p is on the boundary, [r, p] is the fractal side
        kids.append(Component("B", p, a1, c2))
        kids.append(Component("B", r, b2, c1))
        kids.append(Component("C", q, a2, b1))
        kids.append(Component("A", c1, c2, _outward_tip(c1, c2, centre)))
    else:
        kids.append(Component("C", p, a1, c2))
        kids.append(Component("C", q, b1, a2))
        kids.append(Component("C", r, c1, b2))
    return centre, verts, kids


def _unit_components(scale_pow: int) -> list[Component]:
    roots = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]
    s = 3**scale_pow
    out = []
    for k in range(6):
        p = (roots[k][0] * s, roots[k][1] * s)
        q = (roots[(k + 1) % 6][0] * s, roots[(k + 1) % 6][1] * s)
        out.append(Component("A", p, q, (p[0] + q[0], p[1] + q[1])))
    return out


def hexagon_components(step: int, level: int | None = None) -> list[Component]:
    """Components of Omega minus the closed hexagon union after ``step - 1`` steps.

    ``hexagon_components(3)`` is the set of components of Omega \\ Omega_2.
    Coordinates are lattice points at ``level`` (default: ``step``).
    """
    if step < 2:
        raise ValueError("components exist from step 2 on")
    level = step if level is None else level
    comps = _unit_components(level)
    for _ in range(2, step):
        comps = [k for c in comps for k in _split(c)[2]]
    return comps


def hexagon_exhaustion(level: int, graph: BoundaryGraph | None = None) -> TriMesh:
    """Closed hexagon union Omega_N: unit hexagon plus N-1 inductive steps.

    ``meta["recipe"]`` lists, step by step, every hexagon as
    (centre node, [(vertex node, rule)]) with rule ``("f", graph_id)``,
    ``("lin", a, b, w)`` or ``("node",)`` for an already valued node; the
    extension replays it.
    """
    check_level(level, 1)
    D = level + 1
    s = 3**D
    table = _NodeTable()
    tris, shells, scales = [], [], []
    census = {}
    recipe = []
    bidx = None
    if graph is not None:
        f = 3 ** (D - graph.level)
        bidx = {(p[0] * f, p[1] * f): i for p, i in graph.index().items()}

    def add_hexagon(centre, verts, step):
        cid = table.add(centre)
        entries = []
        ids = []
        for v, rule in verts:
            known = v in table.index
            vid = table.add(v)
            ids.append(vid)
            if rule[0] == "fractal":
                if bidx is not None and v not in bidx:
                    raise AssertionError(f"hexagon vertex {v} expected on the boundary")
                entries.append((vid, ("f", bidx[v] if bidx is not None else -1)))
            elif rule[0] == "covered" and not known:
                entries.append((vid, ("lin", table.add(rule[1]), table.add(rule[2]), rule[3])))
            else:
                entries.append((vid, ("node",)))
        recipe.append((step, cid, entries))
        for i in range(6):
            t = [cid, ids[i], ids[(i + 1) % 6]]
            a, b, c = (np.array(table.points[j]) for j in t)
            if lat.cross(*(b - a), *(c - a)) < 0:
                t = [t[0], t[2], t[1]]
            tris.append(t)
            shells.append(step)
            scales.append(step - 1)

    roots = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]
    unit = [((u * s, v * s), ("fractal",)) for u, v in roots]
    add_hexagon((0, 0), unit, 1)
    comps = _unit_components(D)
    for step in range(2, level + 1):
        census[step] = Counter(c.kind for c in comps)
        nxt = []
        for c in comps:
            centre, verts, kids = _split(c)
            add_hexagon(centre, verts, step)
            nxt.extend(kids)
        comps = nxt
    census[level + 1] = Counter(c.kind for c in comps)
    pts = table.array()
    return TriMesh(
        level=D,
        lattice=pts,
        triangles=np.array(tris, dtype=np.int64),
        shell=np.array(shells, dtype=np.int64),
        scale=np.array(scales, dtype=np.int64),
        boundary_link=_link_boundary(pts, D, graph),
        construction=Construction.HEXAGON,
        meta={"N": level, "recipe": recipe, "census": census},
    )


# ---------------------------------------------------------------------------
# collar

class CollarError(RuntimeError):
    pass


def collar_mesh(base: TriMesh, graph: BoundaryGraph, conforming: bool = True) -> TriMesh:
    """Extend ``base`` to the polygon bounded by the level-(N+1) polyline.

    The collar consists of the L_N lattice triangles of that polygon not
    covered by ``base``.  With ``conforming=True`` every base triangle is
    also refined to L_N, which removes all hanging nodes; shell tags are
    inherited from the base triangle, collar triangles get ``COLLAR``.
    """
    N = graph.level
    if base.meta.get("N") != N:
        raise ValueError(f"base built at level {base.meta.get('N')}, graph at level {N}")
    poly = polygon_triangles(N)
    base_keys = base.triangle_keys()
    fine, owner = [], []
    for t_scale in np.unique(base.scale):
        sel = np.flatnonzero(base.scale == t_scale)
        sub = lat.subdivide(base_keys[sel], N - int(t_scale))
        fine.append(sub)
        owner.append(np.repeat(sel, 9 ** (N - int(t_scale))))
    fine, owner = np.concatenate(fine), np.concatenate(owner)
    if len(np.unique(lat.encode_keys(fine))) != len(fine):
        raise CollarError("base triangles overlap")
    if np.any(lat.KeyIndex(poly).lookup(fine) < 0):
        raise CollarError("base sub-triangles outside the polygon")
    pos = lat.KeyIndex(fine).lookup(poly)
    collar = poly[pos < 0]
    meta = dict(base.meta)
    meta["collar"] = "uniform L_N lattice triangles of the level-(N+1) polygon outside the base"
    meta["conforming_refinement"] = conforming
    if conforming:
        tags = np.where(pos >= 0, base.shell[owner[np.maximum(pos, 0)]], COLLAR)
        mesh = _mesh_from_keys([(N, poly)], N, [tags], base.construction, graph, meta)
    else:
        groups = [(int(s), base_keys[base.scale == s]) for s in np.unique(base.scale)]
        tags = [base.shell[base.scale == s] for s in np.unique(base.scale)]
        groups.append((N, collar))
        tags.append(COLLAR)
        level = max(base.level, N)
        mesh = _mesh_from_keys(groups, level, tags, base.construction, graph, meta)
    linked = mesh.boundary_link[mesh.boundary_link >= 0]
    if len(linked) != graph.n or len(np.unique(linked)) != graph.n:
        raise CollarError("boundary link is not a bijection onto the graph vertices")
    if conforming and not mesh.is_conforming():
        raise CollarError("collar mesh is not conforming")
    return mesh
