"""Invariant suite run by ``snowdrift verify``."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import boundary as bd
from . import extension as ext
from . import solver as sv
from .geometry import DELTA, boundary_graph, polyline, shoelace_area
from .mesh import collar_mesh, hexagon_components, shell_triangulation


def _check_graph(level, rng):
    out = []
    g = boundary_graph(level)
    out.append(("vertex_count", g.n == 3 * 4 ** (level + 1), f"n={g.n}"))
    e = bd.discrete_energy(bd.harmonic_coordinate(g, 1))
    out.append(("harmonic_energy", abs(e.per_copy[0] - 0.5) < 1e-12, f"E_K1={e.per_copy[0]!r}"))
    i = np.arange(g.n)
    dist = bd.unit_chart_distance(g, i, (i + 1) % g.n)
    err = float(np.max(np.abs(dist**DELTA - g.dh)))
    out.append(("metric_identity", err < 1e-10, f"max_err={err:.3g}"))
    viol = 0
    for _ in range(50):
        u = bd.BoundaryFunction(g, rng.standard_normal(g.n))
        energies = [bd.discrete_energy(u.restrict(m)).energy for m in range(level + 1)]
        viol += int(np.any(np.diff(energies) < -1e-12 * max(energies)))
    out.append(("monotone_energy", viol == 0, f"violations={viol}"))
    u = bd.BoundaryFunction(g, rng.standard_normal(g.n))
    D = bd.tangential_gradient(u).values
    lhs, rhs = float(np.sum(D**2 * g.cell_mass)), bd.discrete_energy(u).energy
    out.append(("parseval", abs(lhs - rhs) <= 1e-10 * max(1.0, rhs), f"defect={abs(lhs - rhs):.3g}"))
    S, M = bd.boundary_laplacian_matrices(g)
    rs = float(np.abs(S @ np.ones(g.n)).max())
    off = S - sp.diags(S.diagonal())
    out.append(("laplacian_structure", rs < 1e-9 and off.max() <= 0, f"row_sum={rs:.3g}"))
    out.append(("mu_total_mass", abs(M.diagonal().sum() - 1.5) < 1e-12, f"mass={M.diagonal().sum()!r}"))
    j = g.junctions()
    dR = bd.resistance_metric(g, j[0], j[1])
    out.append(("junction_resistance", abs(dR - 4.0 / 3.0) < 1e-12, f"d_R={dR!r}"))
    return out


def _check_meshes(level):
    out = []
    comps = hexagon_components(3)
    kinds = sorted(c.kind for c in comps)
    ok = len(comps) == 30 and kinds.count("A") == 18 and kinds.count("B") == 12
    out.append(("hexagon_census", ok, f"components={len(comps)}"))
    lvl = max(1, min(level, 3))
    g = boundary_graph(lvl)
    m = collar_mesh(shell_triangulation(lvl), g, conforming=True)
    area = shoelace_area(polyline(lvl + 1))
    out.append(("collar_conforming", m.is_conforming(), f"triangles={m.n_triangles}"))
    out.append(("collar_area", abs(m.area() - area) < 1e-10, f"area={m.area()!r}"))
    out.append(("collar_min_angle", m.angles().min() > 59.999, f"min_angle={m.angles().min():.6f}"))
    return out


def _check_extension(level, rng):
    out = []
    lvl = max(1, min(level, 4))
    g = boundary_graph(lvl)
    f = bd.BoundaryFunction(g, np.cumsum(rng.uniform(-1, 1, g.n)))
    f = bd.BoundaryFunction(g, f.values - np.linspace(0, f.values[-1], g.n, endpoint=False))
    L = ext.intrinsic_lipschitz_constant(f)
    for name, fn in (("shell", ext.extend_shell), ("hexagon", ext.extend_hexagon)):
        r = fn(f, lvl)
        out.append((f"{name}_boundary_fidelity", r.boundary_error(f) == 0.0, f"err={r.boundary_error(f)!r}"))
        inside = r.values.min() >= f.values.min() - 1e-12 and r.values.max() <= f.values.max() + 1e-12
        out.append((f"{name}_max_principle", inside, ""))
        worst = max(r.shell_lipschitz[k - 1] / (0.75**k * L) for k in range(1, lvl + 1))
        out.append((f"{name}_shell_decay", worst <= 10.0, f"c={worst:.4f}"))
    r = ext.extend_shell(f, lvl)
    adj = ext.adjacent_shell_differences(r)
    worst = max(adj[k] / (7 * 4.0**-k * L) for k in adj)
    out.append(("adjacent_shell_bound", worst <= 1.0, f"ratio={worst:.4f}"))
    return out


def _check_solver(level, rng):
    out = []
    lvl = max(1, min(level, 3))
    g = boundary_graph(lvl)
    m = sv.solver_mesh(lvl)
    fm = sv.assemble(m, g, sv.CoefficientSet())
    out.append(("form_symmetric", abs(fm.B - fm.B.T).max() < 1e-12, ""))
    x1 = m.nodes[:, 0]
    q = float(x1 @ fm.stiff_bulk @ x1)
    area = shoelace_area(polyline(lvl + 1))
    out.append(("stiffness_area", abs(q - area) < 1e-10, f"x1Kx1={q!r}"))
    u = rng.uniform(0, 1, fm.n)
    M1 = fm.mass @ np.ones(fm.n)
    tr = sv.solve_cauchy(fm, u, None, 0.05, 0.01, "ie")
    cons = float(np.max(np.abs(tr.states @ M1 - M1 @ u)))
    rng_ok = tr.states.min() >= -1e-12 and tr.states.max() <= 1 + 1e-12
    out.append(("mass_conservation", cons < 1e-10, f"defect={cons:.3g}"))
    out.append(("range_preservation", bool(rng_ok), ""))
    c = sv.CoefficientSet(b=(1.0, 0.5), gamma2=1.25, b_boundary=0.5, delta2=0.25, c=0.3)
    fm = sv.assemble(m, g, c)
    forcing = lambda t: np.sin(3 * t) * np.ones(fm.n)
    tr = sv.solve_cauchy(fm, np.zeros(fm.n), forcing, 0.05, 0.01, "cn")
    worst = 0.0
    for i in range(len(tr.loads)):
        d = sv.ventsell_defect(fm, tr.states[i], tr.states[i + 1], tr.dt, "cn", tr.loads[i])
        worst = max(worst, float(np.abs(d).max()))
    out.append(("ventsell_identity", worst < 1e-10, f"defect={worst:.3g}"))
    rep = sv.check_assumptions(fm, c, seed=int(rng.integers(2**31)))
    out.append(("garding_alpha", rep.alpha >= 0 and math.isfinite(rep.K), f"alpha={rep.alpha:.6g} K={rep.K:.6g}"))
    try:
        sv.check_assumptions(fm, sv.CoefficientSet(gamma1=0.6, lam=1.0))
        rejected = False
    except sv.AssumptionError:
        rejected = True
    out.append(("assumption_rejection", rejected, ""))
    return out


SUITES: list[Callable] = [_check_graph, _check_meshes, _check_extension, _check_solver]


def run_suite(level: int, seed: int = 0) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    results = []
    for suite in SUITES:
        results.extend(suite(level, rng) if suite is not _check_meshes else suite(level))
    return results
