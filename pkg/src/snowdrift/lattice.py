"""Exact arithmetic on the triangular lattice Z[w], w = exp(i*pi/3).

A point at level ``k`` is an integer pair ``(a, b)`` standing for
``(a + b*w) * 3**-k``.  Lattice triangles of ``L_k`` are keyed by
``(a, b, o)``: ``o == 0`` is the up triangle ``(a,b), (a+1,b), (a,b+1)``
and ``o == 1`` the down triangle ``(a+1,b), (a+1,b+1), (a,b+1)``.

The map ``(a, b) -> (a + b/2, b*sqrt(3)/2)`` is affine with positive
determinant, so orientation and incidence tests can run directly on the
integer pairs.
"""

from __future__ import annotations

import numpy as np

SQRT3 = np.sqrt(3.0)

UP, DOWN = 0, 1

# children of U(0,0) after trisection, as (di, dj, orientation)
_UP_CHILDREN = np.array(
    [(0, 0, UP), (1, 0, UP), (2, 0, UP), (0, 1, UP), (1, 1, UP), (0, 2, UP),
     (0, 0, DOWN), (1, 0, DOWN), (0, 1, DOWN)],
    dtype=np.int64,
)
# children of D(0,0) are the point reflection of the above through (3, 3)
_DOWN_CHILDREN = np.column_stack(
    [2 - _UP_CHILDREN[:, 0], 2 - _UP_CHILDREN[:, 1], 1 - _UP_CHILDREN[:, 2]]
)

# the six lattice triangles incident to the origin
_INCIDENT = np.array(
    [(0, 0, UP), (-1, 0, UP), (0, -1, UP), (-1, 0, DOWN), (0, -1, DOWN), (-1, -1, DOWN)],
    dtype=np.int64,
)

# unit steps to the six lattice neighbours
NEIGHBOUR_STEPS = np.array([(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)], dtype=np.int64)


def to_xy(a, b, level: int) -> np.ndarray:
    """Float Cartesian coordinates of lattice points."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = 3.0 ** (-level)
    return np.stack([(a + 0.5 * b) * s, (SQRT3 / 2.0) * b * s], axis=-1)


def norm2(a, b):
    """Squared modulus of a + b*w, in lattice units (exact for ints)."""
    return a * a + a * b + b * b


def mul_w(a, b):
    return -b, a + b


def mul_wbar(a, b):
    return a + b, -a


def cross(ax, ay, bx, by):
    return ax * by - ay * bx


def triangle_vertices(keys: np.ndarray) -> np.ndarray:
    """(n, 3, 2) integer vertex array for triangle keys, counterclockwise."""
    keys = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
    a, b, o = keys[:, 0], keys[:, 1], keys[:, 2]
    up = o == UP
    v = np.empty((len(keys), 3, 2), dtype=np.int64)
    v[:, 0, 0] = np.where(up, a, a + 1)
    v[:, 0, 1] = b
    v[:, 1, 0] = np.where(up, a + 1, a + 1)
    v[:, 1, 1] = np.where(up, b, b + 1)
    v[:, 2, 0] = a
    v[:, 2, 1] = b + 1
    return v


def subdivide(keys: np.ndarray, times: int = 1) -> np.ndarray:
    """Replace each triangle of ``L_k`` by its 9 children in ``L_{k+1}``."""
    keys = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
    for _ in range(times):
        if len(keys) == 0:
            return keys
        up = keys[keys[:, 2] == UP]
        dn = keys[keys[:, 2] == DOWN]
        parts = []
        for sel, pattern in ((up, _UP_CHILDREN), (dn, _DOWN_CHILDREN)):
            if len(sel):
                c = np.empty((len(sel), len(pattern), 3), dtype=np.int64)
                c[:, :, 0] = 3 * sel[:, None, 0] + pattern[None, :, 0]
                c[:, :, 1] = 3 * sel[:, None, 1] + pattern[None, :, 1]
                c[:, :, 2] = pattern[None, :, 2]
                parts.append(c.reshape(-1, 3))
        keys = np.concatenate(parts)
    return keys


def locate(x, y, denom: int) -> np.ndarray:
    """Key of the lattice triangle containing the point ``(x + y*w)/denom``.

    The point must not lie on a lattice edge.
    """
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    a = np.floor_divide(x, denom)
    b = np.floor_divide(y, denom)
    rx = x - a * denom
    ry = y - b * denom
    o = np.where(rx + ry < denom, UP, DOWN)
    return np.stack([a, b, o], axis=-1)


def centroid3(keys: np.ndarray) -> np.ndarray:
    """Three times the centroid (integer) of each triangle key."""
    keys = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
    off = np.where(keys[:, 2] == UP, 1, 2)
    return np.stack([3 * keys[:, 0] + off, 3 * keys[:, 1] + off], axis=-1)


def parent(keys: np.ndarray, up_levels: int = 1) -> np.ndarray:
    """Ancestor key ``up_levels`` levels coarser."""
    c = centroid3(keys)
    return locate(c[:, 0], c[:, 1], 3 * 3**up_levels)


def incident_triangles(points: np.ndarray) -> np.ndarray:
    """(n, 6, 3) keys of the six triangles around each lattice point."""
    points = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    out = np.empty((len(points), 6, 3), dtype=np.int64)
    out[:, :, 0] = points[:, None, 0] + _INCIDENT[None, :, 0]
    out[:, :, 1] = points[:, None, 1] + _INCIDENT[None, :, 1]
    out[:, :, 2] = _INCIDENT[None, :, 2]
    return out


def containing_triangles(points: np.ndarray, point_level: int, level: int) -> np.ndarray:
    """Keys of every ``L_level`` triangle whose closure contains each point.

    Returns an (n, 6, 3) array; duplicates appear for points interior to a
    triangle or on an edge.  Works by nudging each point a distance
    ``3**-(point_level+1)`` in six directions, which never leaves the star of
    the point at the coarser level.
    """
    if level > point_level:
        raise ValueError("target level must not be finer than the point level")
    points = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    denom = 3 ** (point_level + 1 - level)
    # nudges along the six triangle-centre directions (never on an edge)
    nudges = np.array([(1, 1), (-1, 2), (-2, 1), (-1, -1), (1, -2), (2, -1)], dtype=np.int64)
    x = 3 * points[:, None, 0] + nudges[None, :, 0]
    y = 3 * points[:, None, 1] + nudges[None, :, 1]
    return locate(x, y, denom)


def keyset(keys: np.ndarray) -> set:
    return set(map(tuple, np.asarray(keys, dtype=np.int64).reshape(-1, 3).tolist()))


def fill_triangle(p, q, r) -> np.ndarray:
    """Keys of all unit lattice triangles inside the lattice-aligned triangle pqr."""
    pts = np.array([p, q, r], dtype=np.int64)
    lo = pts.min(axis=0) - 1
    hi = pts.max(axis=0) + 1
    aa, bb = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1), indexing="ij")
    cand = []
    for o in (UP, DOWN):
        cand.append(np.stack([aa.ravel(), bb.ravel(), np.full(aa.size, o)], axis=-1))
    cand = np.concatenate(cand)
    c = centroid3(cand)
    inside = points_in_triangle(c, 3 * pts[0], 3 * pts[1], 3 * pts[2])
    return cand[inside]


def points_in_triangle(c, p, q, r) -> np.ndarray:
    """Strict inside test of integer points against triangle pqr (any orientation)."""
    c = np.asarray(c, dtype=np.int64)
    s = np.sign(cross(q[0] - p[0], q[1] - p[1], r[0] - p[0], r[1] - p[1]))
    d1 = cross(q[0] - p[0], q[1] - p[1], c[:, 0] - p[0], c[:, 1] - p[1]) * s
    d2 = cross(r[0] - q[0], r[1] - q[1], c[:, 0] - q[0], c[:, 1] - q[1]) * s
    d3 = cross(p[0] - r[0], p[1] - r[1], c[:, 0] - r[0], c[:, 1] - r[1]) * s
    return (d1 > 0) & (d2 > 0) & (d3 > 0)


def encode_points(points: np.ndarray) -> np.ndarray:
    """Injective int64 code of integer pairs with |coordinate| < 2**30."""
    p = np.asarray(points, dtype=np.int64).reshape(-1, 2)
    return ((p[:, 0] + (1 << 30)) << 31) | (p[:, 1] + (1 << 30))


def encode_keys(keys: np.ndarray) -> np.ndarray:
    k = np.asarray(keys, dtype=np.int64).reshape(-1, 3)
    return (encode_points(k[:, :2]) << 1) | k[:, 2]


class KeyIndex:
    """Vectorised lookup of triangle keys (or points) in a fixed collection."""

    def __init__(self, items: np.ndarray, points: bool = False):
        self._enc = encode_points if points else encode_keys
        codes = self._enc(items)
        self.order = np.argsort(codes, kind="stable")
        self.codes = codes[self.order]

    def __len__(self) -> int:
        return len(self.codes)

    def lookup(self, items: np.ndarray) -> np.ndarray:
        """Position of each item in the original collection, -1 if absent."""
        q = self._enc(items)
        if len(self.codes) == 0:
            return np.full(len(q), -1, dtype=np.int64)
        pos = np.clip(np.searchsorted(self.codes, q), 0, len(self.codes) - 1)
        hit = self.codes[pos] == q
        return np.where(hit, self.order[pos], -1)
