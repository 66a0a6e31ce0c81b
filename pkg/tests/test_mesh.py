import math
from collections import Counter

import numpy as np
import pytest

from snowdrift import lattice as lat
from snowdrift.geometry import boundary_graph, polyline, shoelace_area
from snowdrift.mesh import (COLLAR, collar_mesh, hexagon_components, hexagon_exhaustion,
                            interior_triangles, shell_triangulation)


def _inside_polygon(pts, poly):
    """Even-odd ray casting, float; points must not lie on the polygon."""
    x, y = pts[:, 0][:, None], pts[:, 1][:, None]
    x1, y1 = poly[:, 0][None], poly[:, 1][None]
    x2, y2 = np.roll(poly[:, 0], -1)[None], np.roll(poly[:, 1], -1)[None]
    cond = (y1 > y) != (y2 > y)
    xi = x1 + (y - y1) * (x2 - x1) / np.where(y2 == y1, 1, y2 - y1)
    return (cond & (x < xi)).sum(axis=1) % 2 == 1


def _on_polygon(pts, poly, tol=1e-9):
    a, b = poly, np.roll(poly, -1, 0)
    ab = b - a
    t = np.clip(((pts[:, None] - a[None]) * ab[None]).sum(-1) / (ab * ab).sum(-1)[None], 0, 1)
    d = np.linalg.norm(pts[:, None] - (a[None] + t[..., None] * ab[None]), axis=-1)
    return d.min(axis=1) < tol


@pytest.mark.parametrize("k", [1, 2])
def test_shell_triangles_against_brute_force(k):
    # enumerate every L_k triangle of a bounding box; keep those whose vertices
    # and centroid lie strictly inside the level-(k+1) polygon
    poly = polyline(k + 1)
    R = 2 * 3**k + 2
    a, b = np.meshgrid(np.arange(-R, R), np.arange(-R, R), indexing="ij")
    cand = np.concatenate([np.stack([a.ravel(), b.ravel(), np.full(a.size, o)], -1) for o in (0, 1)])
    v = lat.triangle_vertices(cand)
    xy = lat.to_xy(v[..., 0], v[..., 1], k).reshape(-1, 2)
    c = lat.centroid3(cand)
    cxy = lat.to_xy(c[:, 0], c[:, 1], k + 1)
    ok_c = _inside_polygon(cxy, poly)
    cand, v, xy = cand[ok_c], v[ok_c], xy.reshape(-1, 3, 2)[ok_c]
    flat = xy.reshape(-1, 2)
    strict = (_inside_polygon(flat, poly) & ~_on_polygon(flat, poly)).reshape(-1, 3).all(axis=1)
    brute = lat.keyset(cand[strict])
    assert brute == lat.keyset(interior_triangles(k))
    if k == 1:
        assert len(brute) == 48


def test_shells_are_nested():
    for k in range(2, 5):
        prev = lat.subdivide(interior_triangles(k - 1), 1)
        assert lat.keyset(prev) <= lat.keyset(interior_triangles(k))


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_shell_mesh_tiles_union(level):
    m = shell_triangulation(level)
    area = len(interior_triangles(level)) * math.sqrt(3) / 4 * 9.0**-level
    assert abs(m.area() - area) < 1e-10
    assert np.all(m.areas() > 0)
    assert set(m.shell.tolist()) == set(range(1, level + 1))
    assert np.all(m.scale == m.shell)


def test_shell_mesh_hanging_nodes_are_on_scale_changes():
    m = shell_triangulation(3)
    for node, i, j in m.hanging_nodes():
        tris = np.flatnonzero((m.triangles == i).any(1) & (m.triangles == j).any(1))
        assert all(m.scale[t] < 3 for t in tris)


def test_hexagon_census():
    comps = hexagon_components(3)
    assert len(comps) == 30
    assert Counter(c.kind for c in comps) == {"A": 18, "B": 12}
    assert Counter(c.fractal_sides for c in comps) == {2: 18, 1: 12}


def test_hexagon_census_later_steps():
    h = hexagon_exhaustion(4, boundary_graph(4))
    assert h.meta["census"][4] == {"A": 66, "B": 60, "C": 12}


@pytest.mark.parametrize("level", [1, 2, 3])
def test_hexagon_union_area(level):
    # unit hexagon plus one hexagon per component, each 2/3 of its triangle
    h = hexagon_exhaustion(level, boundary_graph(level))
    area = 3 * math.sqrt(3) / 2
    for s in range(2, level + 1):
        side = 3.0 ** -(s - 2)
        n = sum(h.meta["census"][s].values())
        area += n * (2 / 3) * math.sqrt(3) / 4 * side**2
    assert abs(h.area() - area) < 1e-10


def test_hexagon_component_vertices_on_boundary():
    N = 3
    g = boundary_graph(N)
    h = hexagon_exhaustion(N, g)
    for _, _, entries in h.meta["recipe"]:
        for vid, rule in entries:
            if rule[0] == "f":
                assert h.boundary_link[vid] == rule[1]


@pytest.mark.parametrize("method", ["shell", "hexagon"])
@pytest.mark.parametrize("level", [1, 2, 3])
def test_collar_mesh(method, level):
    g = boundary_graph(level)
    base = shell_triangulation(level) if method == "shell" else hexagon_exhaustion(level, g)
    area = shoelace_area(polyline(level + 1))
    for conforming in (True, False):
        m = collar_mesh(base, g, conforming=conforming)
        assert abs(m.area() - area) < 1e-10
        linked = m.boundary_link[m.boundary_link >= 0]
        assert sorted(linked.tolist()) == list(range(g.n))
        assert (m.shell == COLLAR).any()
    m = collar_mesh(base, g, conforming=True)
    assert m.is_conforming()
    assert m.angles().min() > 59.999999


def test_collar_keeps_shell_tags():
    g = boundary_graph(2)
    base = shell_triangulation(2)
    m = collar_mesh(base, g, conforming=True)
    for k in (1, 2):
        assert np.isclose(m.areas()[m.shell == k].sum(), base.areas()[base.shell == k].sum())


def test_collar_rejects_level_mismatch():
    with pytest.raises(ValueError):
        collar_mesh(shell_triangulation(2), boundary_graph(3))
