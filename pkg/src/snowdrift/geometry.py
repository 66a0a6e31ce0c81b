"""Koch curve, snowflake boundary graph and prefractal polygons.

Ambient frame: the snowflake is inscribed in the circle of radius sqrt(3),
its six innermost boundary points are the sixth roots of unity and each of
the copies K1, K2, K3 has diameter 3.  Vertices of the level-N boundary
graph are the points of V_{N+1}(dOmega), stored exactly as lattice points of
L_N = 3**-N Z[w].
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import lattice as lat

N_MAX = 10
DELTA = math.log(4.0) / math.log(3.0)

_W = cmath.exp(1j * math.pi / 3)
_MAPS = (
    lambda z: z / 3,
    lambda z: z / 3 * _W + 1 / 3,
    lambda z: z / 3 * _W.conjugate() + 0.5 + 1j * math.sqrt(3) / 6,
    lambda z: (z + 2) / 3,
)

# big-triangle corners (copy junctions) in counterclockwise order, level 0
_CORNERS = [(1, -2), (1, 1), (-2, 1)]


class LevelError(ValueError):
    pass


def check_level(level: int, lo: int = 0, hi: int = N_MAX) -> None:
    if not isinstance(level, (int, np.integer)) or not lo <= level <= hi:
        raise LevelError(f"level {level!r} outside [{lo}, {hi}]")


def ifs_apply(word: Sequence[int], z: complex) -> complex:
    """Evaluate psi_{j1} o ... o psi_{jn} at ``z`` in the unit-curve chart."""
    for j in reversed(tuple(word)):
        if j not in (1, 2, 3, 4):
            raise ValueError(f"IFS letter {j!r} not in 1..4")
        z = _MAPS[j - 1](z)
    return z


def unit_curve_vertices(level: int) -> np.ndarray:
    """V_level(K) of the unit curve, ordered from 0 to 1 (complex)."""
    pts = np.array([0.0 + 0j, 1.0 + 0j])
    for _ in range(level):
        p, q = pts[:-1], pts[1:]
        d = (q - p) / 3
        out = np.empty(4 * len(p) + 1, dtype=complex)
        out[0:-1:4] = p
        out[1::4] = p + d
        out[2::4] = p + d + d * _W
        out[3::4] = p + 2 * d
        out[-1] = pts[-1]
        pts = out
    return pts


@dataclass(frozen=True, order=True)
class Address:
    """A cell of the snowflake boundary: copy index 1..6 and an IFS word.

    Copies 1..3 are the partition used for the energy; 4..6 are the shifted
    copies, each made of the second half of copy i and the first half of
    copy i+1 (indices mod 3).
    """

    copy: int
    word: tuple = ()

    def __post_init__(self):
        if not 1 <= self.copy <= 6:
            raise ValueError("copy must be in 1..6")
        if any(j not in (1, 2, 3, 4) for j in self.word):
            raise ValueError("word letters must be in 1..4")
        object.__setattr__(self, "word", tuple(self.word))

    @property
    def level(self) -> int:
        return len(self.word)

    def endpoints_arc(self) -> tuple[float, float]:
        """Arc coordinates (cumulative h, in [0, 3)) of the cell's endpoints."""
        s = 0.0
        width = 1.0
        for j in self.word:
            width /= 4
            s += (j - 1) * width
        if self.copy <= 3:
            start = (self.copy - 1) + s
        else:
            start = (self.copy - 4) + 0.5 + s
        return start % 3.0, (start + width) % 3.0 or 3.0

    def canonical(self) -> "Address":
        """Representative among copies 1..3 when the cell fits in one of them."""
        if self.copy <= 3 or not self.word:
            return self
        # shifted copy: first letter picks the half, halves are level-1 cells
        i = self.copy - 4
        first, rest = self.word[0], self.word[1:]
        if first in (1, 2):
            return Address(i + 1, (first + 2,) + rest)
        return Address((i + 1) % 3 + 1, (first - 2,) + rest)


def canonical_vertex(copy: int, h: float) -> tuple[int, float]:
    """Resolve the junction ambiguity of a vertex given in a copy chart.

    A point with h = 0 in copy i equals the point with h = 1 in the previous
    copy; the lower copy index wins.
    """
    if copy not in (1, 2, 3):
        raise ValueError("vertex charts are copies 1..3")
    if h == 0.0:
        prev = (copy - 2) % 3 + 1
        if prev < copy:
            return prev, 1.0
    if h == 1.0:
        nxt = copy % 3 + 1
        if nxt < copy:
            return nxt, 0.0
    return copy, h


@lru_cache(maxsize=None)
def _boundary_points(refinements: int) -> tuple[np.ndarray, np.ndarray]:
    """Counterclockwise V_m(dOmega) as integer pairs at level m - 1."""
    pts = np.array(_CORNERS + [_CORNERS[0]], dtype=np.int64)
    level = 0
    for r in range(refinements):
        if r > 0:
            pts = 3 * pts
            level += 1
        p, q = pts[:-1], pts[1:]
        d = (q - p) // 3
        tip = np.stack(lat.mul_wbar(d[:, 0], d[:, 1]), axis=-1)
        out = np.empty((4 * len(p) + 1, 2), dtype=np.int64)
        out[0:-1:4] = p
        out[1::4] = p + d
        out[2::4] = p + d + tip
        out[3::4] = p + 2 * d
        out[-1] = pts[-1]
        pts = out
    return pts[:-1], level


def boundary_lattice_points(m: int) -> tuple[np.ndarray, int]:
    """V_m(dOmega) counterclockwise as integer pairs, with their lattice level.

    For m >= 1 the level is m - 1 (the points of L_{m-1} on the boundary).
    """
    pts, level = _boundary_points(m)
    return pts.copy(), level


@dataclass(frozen=True, eq=False)
class BoundaryGraph:
    """Cycle graph of V_{N+1}(dOmega) in counterclockwise order.

    Vertex ``j`` sits in copy ``j // 4**(N+1)`` (0-based) at harmonic
    coordinate ``(j mod 4**(N+1)) / 4**(N+1)``; edge ``j`` joins vertex ``j``
    to ``j+1``.  Cell masses are those of the energy measure of h, which is
    half the normalised Hausdorff measure, so each copy carries mass 1/2.
    """

    level: int
    lattice: np.ndarray          # (n, 2) ints, points of L_level
    positions: np.ndarray        # (n, 2) floats
    arc: np.ndarray              # cumulative h in [0, 3)
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.lattice)

    @property
    def cells_per_copy(self) -> int:
        return 4 ** (self.level + 1)

    @property
    def dh(self) -> float:
        return 4.0 ** (-(self.level + 1))

    @property
    def edges(self) -> np.ndarray:
        i = np.arange(self.n)
        return np.stack([i, (i + 1) % self.n], axis=-1)

    @property
    def edge_copy(self) -> np.ndarray:
        return np.arange(self.n) // self.cells_per_copy

    @property
    def cell_mass(self) -> np.ndarray:
        return np.full(self.n, 0.5 * self.dh)

    @property
    def vertex_mass(self) -> np.ndarray:
        m = self.cell_mass
        return 0.5 * (m + np.roll(m, 1))

    @property
    def copy(self) -> np.ndarray:
        return np.arange(self.n) // self.cells_per_copy

    @property
    def h(self) -> np.ndarray:
        """Harmonic coordinate of each vertex in its own copy chart."""
        return (np.arange(self.n) % self.cells_per_copy) * self.dh

    def h_in_copy(self, copy: int) -> np.ndarray:
        """h_i of every vertex, extended by the counterclockwise arc outside K_i."""
        return self.arc - copy

    def copies_of(self, vid: int) -> set[int]:
        c = int(vid // self.cells_per_copy)
        if vid % self.cells_per_copy == 0:
            return {c + 1, (c - 1) % 3 + 1}
        return {c + 1}

    def junctions(self) -> np.ndarray:
        return np.arange(3) * self.cells_per_copy

    def inner_points(self) -> np.ndarray:
        """Vertex ids of the six sixth roots of unity."""
        want = {(1 * 3**self.level * u, 1 * 3**self.level * v)
                for u, v in [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]}
        ids = [i for i, p in enumerate(map(tuple, self.lattice.tolist())) if p in want]
        return np.array(ids, dtype=np.int64)

    def index(self) -> dict:
        """Map from exact lattice point to vertex id."""
        return {p: i for i, p in enumerate(map(tuple, self.lattice.tolist()))}

    def restrict(self, coarser: int) -> np.ndarray:
        """Vertex ids of the level-``coarser`` graph inside this one, in order."""
        return np.arange(0, self.n, 4 ** (self.level - coarser))


@lru_cache(maxsize=16)
def boundary_graph(level: int) -> BoundaryGraph:
    """The level-N boundary graph (vertex set V_{N+1}(dOmega))."""
    check_level(level)
    pts, lvl = boundary_lattice_points(level + 1)
    assert lvl == level
    n = len(pts)
    arc = np.arange(n) * 4.0 ** (-(level + 1))
    g = BoundaryGraph(level, pts, lat.to_xy(pts[:, 0], pts[:, 1], level), arc,
                      meta={"energy_convention": "1/2 * 4^n * sum over unordered edges",
                            "copy_mass": 0.5})
    g.lattice.setflags(write=False)
    g.positions.setflags(write=False)
    return g


def polyline(level: int) -> np.ndarray:
    """Float vertices of the level-``level`` prefractal polygon (V_level)."""
    pts, lvl = boundary_lattice_points(level)
    return lat.to_xy(pts[:, 0], pts[:, 1], lvl)


def shoelace_area(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@lru_cache(maxsize=16)
def polygon_triangles(level: int) -> np.ndarray:
    """Keys of the L_level triangles tiling the polygon bounded by V_{level+1}.

    The polygon is the big triangle plus one bump triangle per edge at each
    refinement; a bump created at refinement m is a single L_{m-1} triangle.
    """
    parts = [lat.subdivide(lat.fill_triangle(*_CORNERS), level)]
    for m in range(1, level + 2):
        prev, plevel = _boundary_points(m - 1)
        p = prev * 3 ** (m - 1 - plevel)
        q = np.roll(p, -1, axis=0)
        d = (q - p) // 3
        a = p + d
        tip = a + np.stack(lat.mul_wbar(d[:, 0], d[:, 1]), axis=-1)
        b = p + 2 * d
        # each bump (a, tip, b) is one triangle of L_{m-1}
        c3x = a[:, 0] + tip[:, 0] + b[:, 0]
        c3y = a[:, 1] + tip[:, 1] + b[:, 1]
        keys = lat.locate(c3x, c3y, 3)
        parts.append(lat.subdivide(keys, level - (m - 1)))
    keys = np.concatenate(parts)
    keys.setflags(write=False)
    return keys
