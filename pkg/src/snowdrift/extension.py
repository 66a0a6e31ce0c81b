"""Lipschitz extensions of boundary data into the snowflake domain.

Both constructions are linear in the boundary data, so each is assembled
once per level as a sparse operator ``E`` with ``g = E @ f``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from . import lattice as lat
from .boundary import BoundaryFunction
from .geometry import boundary_graph, check_level
from .mesh import (COLLAR, Construction, TriMesh, collar_mesh, hexagon_exhaustion,
                   interior_triangles, shell_triangulation)


@dataclass(eq=False)
class ExtensionResult:
    mesh: TriMesh
    values: np.ndarray
    method: Construction
    shell_lipschitz: list
    meta: dict = field(default_factory=dict)

    def boundary_error(self, f: BoundaryFunction) -> float:
        b = self.mesh.boundary_nodes()
        return float(np.max(np.abs(self.values[b] - f.values[self.mesh.boundary_link[b]])))


def intrinsic_lipschitz_constant(f: BoundaryFunction) -> float:
    """Largest |f(q) - f(p)| per unit h-increment over the edges of the graph."""
    d = np.abs(np.roll(f.values, -1) - f.values)
    return float(d.max() / f.graph.dh)


# ---------------------------------------------------------------------------
# operator building blocks

def _nearest_rows(points: np.ndarray, level: int, k: int, N: int) -> sp.csr_matrix:
    """Rows averaging f over the points of V_{k+1} nearest to each point.

    ``points`` are integer pairs at ``level``; ties are decided exactly.
    """
    g = boundary_graph(N)
    ids = g.restrict(k)
    cand = g.lattice[ids] * 3 ** (level - N)
    tree = cKDTree(lat.to_xy(cand[:, 0], cand[:, 1], level))
    xy = lat.to_xy(points[:, 0], points[:, 1], level)
    dmin, _ = tree.query(xy)
    rows, cols, vals = [], [], []
    for i, near in enumerate(tree.query_ball_point(xy, dmin * (1 + 1e-6) + 1e-12)):
        near = np.asarray(near)
        d = cand[near] - points[i]
        n2 = lat.norm2(d[:, 0], d[:, 1])
        best = near[n2 == n2.min()]
        rows.extend([i] * len(best))
        cols.extend(ids[best].tolist())
        vals.extend([1.0 / len(best)] * len(best))
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(points), g.n))


def _barycentric(points: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Barycentric weights (n, 3) of integer points in integer triangles (n, 3, 2)."""
    p0, p1, p2 = tri[:, 0], tri[:, 1], tri[:, 2]
    area = lat.cross(*(p1 - p0).T, *(p2 - p0).T)
    w1 = lat.cross(*(points - p0).T, *(p2 - p0).T) / area
    w2 = lat.cross(*(p1 - p0).T, *(points - p0).T) / area
    return np.stack([1 - w1 - w2, w1, w2], axis=-1)


def _locate(points: np.ndarray, level: int, mesh: TriMesh, scales=None) -> np.ndarray:
    """Index of a mesh triangle whose closure contains each point, -1 if none."""
    keys = mesh.triangle_keys()
    out = np.full(len(points), -1, dtype=np.int64)
    for s in np.unique(mesh.scale) if scales is None else scales:
        sel = np.flatnonzero(mesh.scale == s)
        if len(sel) == 0:
            continue
        index = lat.KeyIndex(keys[sel])
        todo = np.flatnonzero(out < 0)
        if len(todo) == 0:
            break
        cont = lat.containing_triangles(points[todo], level, int(s))
        hit = index.lookup(cont.reshape(-1, 3)).reshape(-1, 6)
        first = hit.max(axis=1)
        found = first >= 0
        out[todo[found]] = sel[first[found]]
    return out


def _interp_rows(points, level, mesh: TriMesh, tri: np.ndarray) -> sp.csr_matrix:
    """Rows interpolating node values of ``mesh`` at points inside triangles ``tri``."""
    if level < mesh.level:
        raise ValueError("points must be given at least at the mesh level")
    verts = mesh.lattice[mesh.triangles[tri]] * 3 ** (level - mesh.level)
    w = _barycentric(points, verts)
    rows = np.repeat(np.arange(len(tri)), 3)
    return sp.csr_matrix((w.ravel(), (rows, mesh.triangles[tri].ravel())),
                         shape=(len(tri), mesh.n_nodes))


def _shell_operator(N: int) -> tuple[TriMesh, sp.csr_matrix, dict]:
    base = shell_triangulation(N)
    nb = boundary_graph(N).n
    E = sp.csr_matrix((base.n_nodes, nb))
    done = np.zeros(base.n_nodes, dtype=bool)
    averaged = {}
    for k in range(1, N + 1):
        nodes = np.unique(base.triangles[base.shell == k])
        nodes = nodes[~done[nodes]]
        pts = base.lattice[nodes]
        tri = _locate(pts, base.level, base, scales=range(1, k)) if k > 1 else np.full(len(nodes), -1)
        inside = tri >= 0
        blocks = []
        if inside.any():
            W = _interp_rows(pts[inside], base.level, base, tri[inside])
            blocks.append((nodes[inside], W @ E))
        fresh = nodes[~inside]
        blocks.append((fresh, _nearest_rows(pts[~inside], base.level, k, N)))
        averaged[k] = fresh
        for ids, rows in blocks:
            P = sp.csr_matrix((np.ones(len(ids)), (ids, np.arange(len(ids)))),
                              shape=(base.n_nodes, len(ids)))
            E = E + P @ rows
        done[nodes] = True
    assert done.all()
    return base, E.tocsr(), {"averaged_nodes": averaged}


def _hexagon_operator(N: int) -> tuple[TriMesh, sp.csr_matrix, dict]:
    graph = boundary_graph(N)
    base = hexagon_exhaustion(N, graph)
    E = sp.lil_matrix((base.n_nodes, graph.n))
    assigned = np.zeros(base.n_nodes, dtype=bool)
    for _, centre, entries in base.meta["recipe"]:
        for vid, rule in entries:
            if rule[0] == "f":
                E[vid, rule[1]] = 1.0
            elif rule[0] == "lin":
                a, b, w = rule[1:]
                assert assigned[a] and assigned[b]
                E[vid] = w * E[a] + (1 - w) * E[b]
            else:
                assert assigned[vid]
            assigned[vid] = True
        vids = [v for v, _ in entries]
        E[centre] = sum(E[v] for v in vids) / 6.0
        assigned[centre] = True
    assert assigned.all()
    return base, E.tocsr(), {}


def _transfer(base: TriMesh, E: sp.csr_matrix, target: TriMesh, N: int) -> sp.csr_matrix:
    """Operator on the nodes of ``target`` (which contains ``base``)."""
    n = target.n_nodes
    nb = E.shape[1]
    pieces = []
    link = target.boundary_link
    bnd = np.flatnonzero(link >= 0)
    pieces.append((bnd, sp.csr_matrix((np.ones(len(bnd)), (np.arange(len(bnd)), link[bnd])),
                                      shape=(len(bnd), nb))))
    rest = np.flatnonzero(link < 0)
    pts = target.lattice[rest]
    level = target.level
    if base.level > level:
        pts = pts * 3 ** (base.level - level)
        level = base.level
    tri = _locate(pts, level, base)
    inside = tri >= 0
    W = _interp_rows(pts[inside], level, base, tri[inside])
    pieces.append((rest[inside], W @ E))
    pieces.append((rest[~inside], _nearest_rows(pts[~inside], level, N, N)))
    out = sp.csr_matrix((n, nb))
    for ids, block in pieces:
        P = sp.csr_matrix((np.ones(len(ids)), (ids, np.arange(len(ids)))), shape=(n, len(ids)))
        out = out + P @ block
    return out.tocsr()


@lru_cache(maxsize=8)
def extension_operator(method: Construction, level: int, conforming: bool = False):
    """(mesh, E, meta) with ``E @ f.values`` the extension on the collar mesh."""
    check_level(level, 1, 6)
    method = Construction(method)
    build = _shell_operator if method is Construction.SHELL else _hexagon_operator
    base, E, meta = build(level)
    target = collar_mesh(base, boundary_graph(level), conforming=conforming)
    meta = dict(meta)
    if "averaged_nodes" in meta:
        index = lat.KeyIndex(target.lattice, points=True)
        f = 3 ** (target.level - base.level)
        meta["averaged_nodes"] = {k: index.lookup(base.lattice[v] * f)
                                  for k, v in meta["averaged_nodes"].items()}
    return target, _transfer(base, E, target, level), meta


def _check_data(f: BoundaryFunction, level: int) -> None:
    if f.level != level:
        raise ValueError(f"boundary data at level {f.level}, extension requested at level {level}")


def _extend(method, f, level, conforming) -> ExtensionResult:
    _check_data(f, level)
    mesh, E, meta = extension_operator(method, level, conforming)
    res = ExtensionResult(mesh, E @ f.values, Construction(method), [], dict(meta))
    glob, per_shell = measured_lipschitz(res)
    res.shell_lipschitz = per_shell
    res.meta["global_lipschitz"] = glob
    res.meta["collar_lipschitz"] = _max_gradient(res, res.mesh.shell == COLLAR)
    return res


def extend_shell(f: BoundaryFunction, level: int, conforming: bool = False) -> ExtensionResult:
    """Shell-by-shell nearest-point averaging on the lattice triangulation."""
    return _extend(Construction.SHELL, f, level, conforming)


def extend_hexagon(f: BoundaryFunction, level: int, conforming: bool = False) -> ExtensionResult:
    """Inductive hexagon construction: centres average their six vertices."""
    return _extend(Construction.HEXAGON, f, level, conforming)


def triangle_gradients(mesh: TriMesh, values: np.ndarray) -> np.ndarray:
    """(m, 2) gradient of the piecewise affine interpolant on each triangle."""
    p = mesh.nodes[mesh.triangles]
    u = values[mesh.triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    d1, d2 = u[:, 1] - u[:, 0], u[:, 2] - u[:, 0]
    gx = (d1 * e2[:, 1] - d2 * e1[:, 1]) / det
    gy = (d2 * e1[:, 0] - d1 * e2[:, 0]) / det
    return np.stack([gx, gy], axis=-1)


def _max_gradient(res: ExtensionResult, mask: np.ndarray) -> float:
    if not mask.any():
        return 0.0
    g = triangle_gradients(res.mesh, res.values)[mask]
    return float(np.linalg.norm(g, axis=1).max())


def measured_lipschitz(res: ExtensionResult) -> tuple[float, list]:
    """Largest triangle gradient overall and per shell 1..N."""
    N = res.mesh.meta["N"]
    per_shell = [_max_gradient(res, res.mesh.shell == k) for k in range(1, N + 1)]
    return _max_gradient(res, np.ones(res.mesh.n_triangles, dtype=bool)), per_shell


def adjacent_shell_differences(res: ExtensionResult) -> dict:
    """Per shell n, max |g(x) - g(x')| over averaged L_n nodes at distance 3**-n."""
    if "averaged_nodes" not in res.meta:
        raise ValueError("only defined for the shell construction")
    mesh = res.mesh
    index = lat.KeyIndex(mesh.lattice, points=True)
    out = {}
    for n, ids in res.meta["averaged_nodes"].items():
        member = np.zeros(mesh.n_nodes, dtype=bool)
        member[ids] = True
        step = 3 ** (mesh.level - n)
        worst = 0.0
        for d in lat.NEIGHBOUR_STEPS[:3]:
            nb = index.lookup(mesh.lattice[ids] + step * d)
            ok = nb >= 0
            ok[ok] &= member[nb[ok]]
            if ok.any():
                worst = max(worst, float(np.abs(res.values[ids[ok]] - res.values[nb[ok]]).max()))
        out[n] = worst
    return out


# ---------------------------------------------------------------------------
# coordinates

def angular_boundary_data(level: int) -> BoundaryFunction:
    """Piecewise h-affine data for y1: slopes 1, 1, -2 on the copies K1, K2, K3."""
    g = boundary_graph(level)
    s = g.arc
    return BoundaryFunction(g, np.where(s <= 2.0, s, 2.0 - 2.0 * (s - 2.0)))


def _shell_hits(mesh: TriMesh, n: int) -> np.ndarray:
    keys = interior_triangles(n)
    cont = lat.containing_triangles(mesh.lattice, mesh.level, n)
    return lat.KeyIndex(keys).lookup(cont.reshape(-1, 3)).reshape(-1, 6) >= 0


def shell_boundary_nodes(mesh: TriMesh, n: int) -> np.ndarray:
    """Nodes of ``mesh`` on the boundary of the union T_n."""
    hit = _shell_hits(mesh, n)
    return np.flatnonzero(hit.any(axis=1) & ~hit.all(axis=1))


def radial_coordinate(level: int) -> ExtensionResult:
    """y2: 3**-n on each shell boundary and 0 on the curve.

    Between consecutive shell boundaries y2 is discrete harmonic on the
    uniform conforming mesh (linear interpolation across the shell).  Inside
    T_1 it is 1/3 plus the distance to the boundary of T_1.
    """
    mesh, _, _ = extension_operator(Construction.SHELL, level, True)
    fixed = np.full(mesh.n_nodes, np.nan)
    fixed[mesh.boundary_nodes()] = 0.0
    for n in range(1, level + 1):
        fixed[shell_boundary_nodes(mesh, n)] = 3.0**-n
    inner = np.flatnonzero(_shell_hits(mesh, 1).all(axis=1))
    rim = shell_boundary_nodes(mesh, 1)
    dist, _ = cKDTree(mesh.nodes[rim]).query(mesh.nodes[inner])
    fixed[inner] = 1.0 / 3.0 + dist
    e = mesh.edges()
    A = sp.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(mesh.n_nodes,) * 2)
    A = (A + A.T).tocsr()
    L = sp.diags(np.asarray(A.sum(axis=1)).ravel()) - A
    known = ~np.isnan(fixed)
    free = np.flatnonzero(~known)
    y = np.where(known, fixed, 0.0)
    if len(free):
        rhs = -L[free][:, np.flatnonzero(known)] @ fixed[known]
        y[free] = spla.spsolve(L[free][:, free].tocsc(), rhs)
    res = ExtensionResult(mesh, y, Construction.SHELL, [], {"coordinate": "y2"})
    res.meta["global_lipschitz"], res.shell_lipschitz = measured_lipschitz(res)
    return res


def coordinates(level: int) -> tuple[ExtensionResult, ExtensionResult]:
    """Lipschitz coordinate pair (y1, y2) on the conforming mesh."""
    check_level(level, 2, 6)
    y1 = extend_shell(angular_boundary_data(level), level, conforming=True)
    y1.meta["coordinate"] = "y1"
    return y1, radial_coordinate(level)
