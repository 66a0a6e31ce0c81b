"""One test per acceptance criterion; each prints a pass/fail line in the summary."""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from snowdrift import boundary as bd
from snowdrift import extension as ext
from snowdrift import solver as sv
from snowdrift.cli import main
from snowdrift.geometry import DELTA, boundary_graph
from snowdrift.mesh import hexagon_components

DRIFT = dict(b=(1.0, 0.5), gamma2=1.25, b_boundary=0.5, delta2=0.25, c=0.3)


def record(k, ok, detail):
    ACCEPTANCE_LINES.append(f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


def test_criterion_1_harmonic_energy():
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(0, 9):
        g = boundary_graph(n)
        for copy in (1, 2, 3):
            e = bd.discrete_energy(bd.harmonic_coordinate(g, copy)).per_copy[copy - 1]
            worst = max(worst, abs(e - 0.5))
    dt = time.perf_counter() - t0
    record(1, worst < 1e-12 and dt < 1.0, f"max |E(h)-1/2| = {worst:.2e} over n<=8, {dt:.2f} s")


def test_criterion_2_metric_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(0, 7):
        g = boundary_graph(n)
        i = np.arange(g.n)
        d = bd.unit_chart_distance(g, i, (i + 1) % g.n)
        for copy in (1, 2, 3):
            # every neighbour pair is measured with the coordinate of its own copy
            h = bd.harmonic_coordinate(g, copy).values
            on = g.edge_copy == copy - 1
            dh = np.abs(h[(i + 1) % g.n] - h)[on]
            worst = max(worst, float(np.max(np.abs(dh - d[on] ** DELTA))))
    dt = time.perf_counter() - t0
    record(2, worst < 1e-10 and dt < 5.0, f"max defect {worst:.2e} over levels<=6, {dt:.2f} s")


def test_criterion_3_monotone_energies(rng):
    viol = 0
    for level in range(1, 6):
        g = boundary_graph(level)
        for _ in range(50):
            u = bd.BoundaryFunction(g, rng.standard_normal(g.n))
            e = np.array([bd.discrete_energy(u.restrict(m)).energy for m in range(level + 1)])
            viol += int(np.any(np.diff(e) < -1e-12 * e.max()))
    record(3, viol == 0, f"{viol} violations in 250 functions")


def _structured(g):
    yield bd.harmonic_coordinate(g, 1)
    yield ext.angular_boundary_data(g.level)
    for i in range(g.n):
        v = np.zeros(g.n)
        v[i] = 1.0
        yield bd.BoundaryFunction(g, v)
    for k in (1, 2, 5):
        yield bd.BoundaryFunction.from_arc(g, lambda s, k=k: np.cos(2 * np.pi * k * s / 3))


def test_criterion_4_gradient_parseval():
    worst, count = 0.0, 0
    for level in range(0, 5):
        g = boundary_graph(level)
        for u in _structured(g):
            D = bd.tangential_gradient(u).values
            e = bd.discrete_energy(u).energy
            worst = max(worst, abs(np.sum(D**2 * g.cell_mass) - e) / max(1.0, e))
            count += 1
    record(4, worst <= 1e-10, f"max relative defect {worst:.2e} over {count} functions")


def test_criterion_5_lipschitz_extension(rng):
    level = 5
    t0 = time.perf_counter()
    g = boundary_graph(level)
    c, adj_worst = 0.0, 0.0
    for _ in range(20):
        v = np.cumsum(rng.uniform(-1, 1, g.n))
        f = bd.BoundaryFunction(g, v - np.linspace(0, v[-1], g.n, endpoint=False))
        L = ext.intrinsic_lipschitz_constant(f)
        r = ext.extend_shell(f, level)
        c = max(c, max(r.shell_lipschitz[n - 1] / (0.75**n * L) for n in range(1, level + 1)))
        adj = ext.adjacent_shell_differences(r)
        adj_worst = max(adj_worst, max(adj[n] / (7 * 4.0**-n * L) for n in adj))
    dt = time.perf_counter() - t0
    ok = c <= 10 and adj_worst <= 1.0 and dt < 30
    record(5, ok, f"c = {c:.4f}, adjacent ratio {adj_worst:.4f}, {dt:.1f} s")


def test_criterion_6_hexagon_census():
    t0 = time.perf_counter()
    comps = hexagon_components(3)
    kinds = [c.kind for c in comps]
    dt = time.perf_counter() - t0
    ok = len(comps) == 30 and kinds.count("A") == 18 and kinds.count("B") == 12 and dt < 1
    record(6, ok, f"{len(comps)} components, {kinds.count('A')} + {kinds.count('B')}, {dt:.3f} s")


def test_criterion_7_solver_oracle():
    t0 = time.perf_counter()
    level, T, w = 2, 0.2, 3.0
    fm = sv.assemble(sv.solver_mesh(level), boundary_graph(level), sv.CoefficientSet(**DRIFT))
    phi = fm.mesh.nodes[:, 0] + 0.5
    u0 = np.zeros(fm.n)
    # sin(w t) phi via the rotation system a' = C a
    C = np.array([[0.0, w], [-w, 0.0]])
    ex = sv.duhamel_oracle(fm, u0, [T], phi=np.stack([phi, 0 * phi], 1), C=C, a0=np.array([0.0, 1.0]))[0]
    forcing = lambda t: np.sin(w * t) * phi
    dts = [0.02, 0.01, 0.005, 0.0025]
    orders = {}
    for scheme in ("ie", "cn"):
        errs = []
        for d in dts:
            e = sv.solve_cauchy(fm, u0, forcing, T, d, scheme).states[-1] - ex
            errs.append(float(np.sqrt(e @ (fm.mass @ e))))
        orders[scheme] = np.log2(np.array(errs[:-1]) / errs[1:])
    dt = time.perf_counter() - t0
    ok = (np.all(np.abs(orders["ie"] - 1) <= 0.3) and np.all(np.abs(orders["cn"] - 2) <= 0.3) and dt < 60)
    fmt = lambda a: ",".join(f"{x:.3f}" for x in a)
    record(7, ok, f"IE orders {fmt(orders['ie'])}; CN orders {fmt(orders['cn'])}; {dt:.1f} s")


def test_criterion_8_conservation_and_range(rng):
    cons, in_range = 0.0, True
    for level in (1, 2, 3):
        fm = sv.assemble(sv.solver_mesh(level), boundary_graph(level), sv.CoefficientSet())
        M1 = fm.mass @ np.ones(fm.n)
        for scheme, dt in (("ie", 0.01),):
            tr = sv.solve_cauchy(fm, rng.uniform(0, 1, fm.n), None, 0.1, dt, scheme)
            cons = max(cons, float(np.abs(np.diff(tr.states @ M1)).max()))
            in_range &= bool(tr.states.min() >= -1e-12 and tr.states.max() <= 1 + 1e-12)
    record(8, cons < 1e-10 and in_range, f"max per-step mass change {cons:.2e}, range kept {in_range}")


def test_criterion_9_ventsell_identity(rng):
    worst = 0.0
    for level in (1, 2, 3):
        fm = sv.assemble(sv.solver_mesh(level), boundary_graph(level), sv.CoefficientSet(**DRIFT))
        forcing = lambda t: np.sin(3 * t) * (1 + fm.mesh.nodes[:, 1])
        for scheme in ("ie", "cn"):
            tr = sv.solve_cauchy(fm, rng.standard_normal(fm.n), forcing, 0.05, 0.01, scheme)
            for i in range(len(tr.loads)):
                d = sv.ventsell_defect(fm, tr.states[i], tr.states[i + 1], tr.dt, scheme, tr.loads[i])
                worst = max(worst, float(np.abs(d).max()))
    record(9, worst < 1e-10, f"max boundary-equation defect {worst:.2e}")


def test_criterion_10_assumption_verifier(tmp_path, capsys):
    codes = []
    for line in ("gamma1=0.6", "delta1=0.5"):
        cfg = tmp_path / "c.txt"
        cfg.write_text(f"level=1\nT=0.02\ndt=0.01\nlambda=1\nc0=1\n{line}\n")
        codes.append(main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]))
    capsys.readouterr()
    K, pd = [], True
    for level in (2, 3, 4):
        fm = sv.assemble(sv.solver_mesh(level), boundary_graph(level), sv.CoefficientSet(**DRIFT))
        rep = sv.check_assumptions(fm, sv.CoefficientSet(**DRIFT))
        shifted = fm.B + (rep.alpha + 1.0) * fm.mass
        pd &= sv._is_positive_definite(((shifted + shifted.T) * 0.5).tocsr())
        K.append(rep.K)
    spread = (max(K) - min(K)) / min(K)
    ok = codes == [2, 2] and pd and spread <= 0.10
    record(10, ok, f"exit codes {codes}, shifted form PD {pd}, K = "
                   + ", ".join(f"{k:.4f}" for k in K) + f" (spread {spread:.2%})")
