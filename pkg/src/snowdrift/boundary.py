"""Discrete energy calculus on the snowflake boundary graph.

Energy convention: E(u) = (1/2) * 4**(N+1) * sum over unordered edges of
(u(q) - u(p))**2, so that h restricted to one copy has energy 1/2 at every
level.  The energy measure gives each level-(N+1) cell mass 4**-(N+1) / 2,
which makes ``sum D(u)**2 * mass == E(u)`` exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import DELTA, BoundaryGraph, boundary_graph

COPY_DIAMETER = 3.0
CONVENTION = "1/2 * 4^(N+1) * sum over unordered edges"


class SizeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    graph: BoundaryGraph
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if len(v) != self.graph.n:
            raise SizeError(f"{len(v)} values for a graph with {self.graph.n} vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("boundary values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def level(self) -> int:
        return self.graph.level

    def restrict(self, level: int) -> "BoundaryFunction":
        if level > self.level:
            raise ValueError("can only restrict to a coarser level")
        return BoundaryFunction(boundary_graph(level), self.values[self.graph.restrict(level)])

    @classmethod
    def from_arc(cls, graph: BoundaryGraph, fn) -> "BoundaryFunction":
        """Evaluate ``fn`` on the cumulative harmonic coordinate in [0, 3)."""
        return cls(graph, fn(graph.arc))


@dataclass(frozen=True, eq=False)
class EdgeField:
    """One value per counterclockwise edge j -> j+1."""

    graph: BoundaryGraph
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if len(v) != self.graph.n:
            raise SizeError(f"{len(v)} values for a graph with {self.graph.n} edges")
        object.__setattr__(self, "values", v)

    def at_vertices(self) -> np.ndarray:
        """Average of the two edges incident to each vertex."""
        return 0.5 * (self.values + np.roll(self.values, 1))


@dataclass(frozen=True)
class FormReport:
    level: int
    energy: float
    per_copy: tuple
    meta: dict = field(default_factory=lambda: {"convention": CONVENTION})

    def to_text(self) -> str:
        lines = [f"level={self.level}", f"energy={self.energy!r}"]
        lines += [f"energy_K{i + 1}={e!r}" for i, e in enumerate(self.per_copy)]
        lines += [f"{k}={v}" for k, v in self.meta.items()]
        return "\n".join(lines) + "\n"


def _check(u) -> BoundaryFunction:
    if not isinstance(u, BoundaryFunction):
        raise TypeError("expected a BoundaryFunction")
    return u


def edge_weight(graph: BoundaryGraph) -> float:
    """Conductance of one edge under the unordered-edge convention."""
    return 0.5 * 4.0 ** (graph.level + 1)


def discrete_energy(u: BoundaryFunction) -> FormReport:
    u = _check(u)
    g = u.graph
    d = np.roll(u.values, -1) - u.values
    terms = edge_weight(g) * d * d
    per_copy = np.bincount(g.edge_copy, weights=terms, minlength=3)
    return FormReport(g.level, float(per_copy.sum()), tuple(float(x) for x in per_copy))


def harmonic_coordinate(graph: BoundaryGraph, copy: int) -> BoundaryFunction:
    """h_i on copy ``copy`` (1..3), continued harmonically back to 0 on the other two."""
    if copy not in (1, 2, 3):
        raise ValueError("copy must be 1, 2 or 3")
    s = (graph.arc - (copy - 1)) % 3.0
    return BoundaryFunction(graph, np.where(s <= 1.0, s, (3.0 - s) / 2.0))


def harmonic_extend(coarse: BoundaryFunction, level: int) -> BoundaryFunction:
    """Energy minimising extension to a finer level: affine in h on each coarse cell."""
    _check(coarse)
    m = coarse.level
    if level <= m:
        raise ValueError(f"target level {level} must exceed {m}")
    g = boundary_graph(level)
    k = 4 ** (level - m)
    j = np.arange(g.n)
    cell, t = j // k, (j % k) / k
    a = coarse.values[cell]
    b = coarse.values[(cell + 1) % coarse.graph.n]
    return BoundaryFunction(g, (1 - t) * a + t * b)


def tangential_gradient(u: BoundaryFunction) -> EdgeField:
    """Difference quotient in h along each counterclockwise edge."""
    u = _check(u)
    return EdgeField(u.graph, (np.roll(u.values, -1) - u.values) / u.graph.dh)


def boundary_laplacian_matrices(graph: BoundaryGraph) -> tuple[sp.csr_matrix, sp.dia_matrix]:
    """Stiffness S (u @ S @ u == energy) and lumped mass of the boundary graph."""
    n = graph.n
    w = edge_weight(graph)
    i = np.arange(n)
    j = (i + 1) % n
    rows = np.concatenate([i, j, i, j])
    cols = np.concatenate([j, i, i, j])
    vals = np.concatenate([-np.full(n, w), -np.full(n, w), np.full(n, w), np.full(n, w)])
    S = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return S, sp.diags(graph.vertex_mass)


def _arc_steps(graph: BoundaryGraph, p: int, q: int) -> int:
    return int((q - p) % graph.n)


def resistance_metric(graph: BoundaryGraph, p: int, q: int) -> float:
    """Effective resistance between vertices p and q of the cycle network."""
    k = _arc_steps(graph, p, q)
    r = 1.0 / edge_weight(graph)
    a, b = k * r, (graph.n - k) * r
    return a * b / (a + b)


def intrinsic_metric(graph: BoundaryGraph, x: int, y: int) -> float:
    """Shorter of the two arcs measured in accumulated h-increments."""
    k = _arc_steps(graph, x, y)
    return min(k, graph.n - k) * graph.dh


def unit_chart_distance(graph: BoundaryGraph, p, q) -> np.ndarray:
    """Euclidean distance rescaled to a copy of diameter one."""
    d = graph.positions[np.asarray(p)] - graph.positions[np.asarray(q)]
    return np.linalg.norm(d, axis=-1) / COPY_DIAMETER


def ball_mass(graph: BoundaryGraph, x: int, r: float) -> float:
    """Energy-measure mass of the vertices within Euclidean distance r of x."""
    d = np.linalg.norm(graph.positions - graph.positions[x], axis=1)
    return float(graph.vertex_mass[d < r].sum())


def besov_seminorm(u: BoundaryFunction, beta: float = DELTA / 2, block: int = 1024) -> float:
    """Discrete B^{2,2}_beta norm: L2(mu) part plus the near-diagonal double sum.

    Pairs with Euclidean distance >= 1 are left out, so the value is
    increasing in ``beta``.
    """
    u = _check(u)
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    g = u.graph
    x, m, v = g.positions, g.vertex_mass, u.values
    total = float(np.sum(v * v * m))
    expo = DELTA + 2 * beta
    for s in range(0, g.n, block):
        d = np.linalg.norm(x[s:s + block, None, :] - x[None, :, :], axis=-1)
        near = (d > 0) & (d < 1)
        diff = (v[s:s + block, None] - v[None, :]) ** 2
        w = np.zeros_like(d)
        w[near] = diff[near] / d[near] ** expo
        total += float(m[s:s + block] @ w @ m)
    return float(np.sqrt(total))
