"""Command-line front end: ``snowdrift {mesh,extend,solve,verify,export}``.

Exit status 0 on success, 1 for a bad configuration, 2 for a numerical
failure; failures print ``error: <code> <detail>`` on stderr.
"""

from __future__ import annotations

import argparse
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import boundary as bd
from . import extension as ext
from . import io
from . import solver as sv
from .config import ConfigError, RunConfig, build_config, parse_coefficients, parse_kv
from .geometry import boundary_graph, polyline
from .mesh import Construction, collar_mesh, hexagon_exhaustion, shell_triangulation
from .verify import run_suite


class NumericalFailure(RuntimeError):
    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code


def _base_mesh(cfg: RunConfig):
    g = boundary_graph(cfg.level)
    if cfg.method == "shell":
        return shell_triangulation(cfg.level), g
    return hexagon_exhaustion(cfg.level, g), g


def cmd_mesh(cfg: RunConfig, out: Path) -> None:
    base, g = _base_mesh(cfg)
    mesh = collar_mesh(base, g, conforming=False)
    echo = cfg.echo()
    io.write_mesh(out / "mesh.snowmesh", mesh, config=echo)
    report = {"nodes": mesh.n_nodes, "triangles": mesh.n_triangles,
              "base_triangles": base.n_triangles, "hanging_nodes": len(mesh.hanging_nodes()),
              "area": repr(mesh.area()), "boundary_vertices": g.n}
    for k, v in sorted(Counter(mesh.shell.tolist()).items()):
        report[f"triangles_shell_{'collar' if k < 0 else k}"] = v
    if cfg.method == "hexagon":
        for step, census in sorted(base.meta["census"].items()):
            report[f"components_step_{step}"] = ",".join(f"{k}:{census[k]}" for k in sorted(census))
    io.write_report(out / "mesh_report.txt", report, echo)
    if cfg.svg:
        io.write_svg(out / "mesh.svg", mesh, config=echo)


def _boundary_data(cfg: RunConfig) -> bd.BoundaryFunction:
    g = boundary_graph(cfg.level)
    if cfg.boundary_data:
        try:
            return io.read_boundary_csv(cfg.boundary_data, g)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"boundary data: {exc}") from exc
    return ext.angular_boundary_data(cfg.level)


def cmd_extend(cfg: RunConfig, out: Path) -> None:
    f = _boundary_data(cfg)
    fn = ext.extend_shell if cfg.method == "shell" else ext.extend_hexagon
    res = fn(f, cfg.level)
    L = ext.intrinsic_lipschitz_constant(f)
    echo = cfg.echo()
    io.write_mesh(out / "extension.snowmesh", res.mesh, res.values, config=echo)
    report = {"method": res.method.value, "level": cfg.level, "L_intrinsic": repr(L),
              "global_lipschitz": repr(res.meta["global_lipschitz"]),
              "collar_lipschitz": repr(res.meta["collar_lipschitz"]),
              "boundary_error": repr(res.boundary_error(f))}
    ps = res.shell_lipschitz
    for k, v in enumerate(ps, 1):
        report[f"shell_{k}_lipschitz"] = repr(v)
        if L > 0:
            report[f"shell_{k}_over_(3/4)^k_L"] = repr(v / (0.75**k * L))
    for k in range(1, len(ps)):
        if ps[k - 1] > 0:
            report[f"shell_ratio_{k + 1}_{k}"] = repr(ps[k] / ps[k - 1])
    if res.method is Construction.SHELL:
        for k, v in ext.adjacent_shell_differences(res).items():
            report[f"adjacent_diff_shell_{k}"] = repr(v)
    io.write_report(out / "extension_report.txt", report, echo)
    if cfg.svg:
        io.write_svg(out / "extension.svg", res.mesh, res.values, config=echo)


def _nodal(spec: str, mesh, name: str):
    """Initial data or forcing profile: constant(v), x1, x2, zero, file:path."""
    spec = spec.strip()
    if spec == "zero":
        return np.zeros(mesh.n_nodes)
    if spec in ("x1", "x2"):
        return mesh.nodes[:, int(spec[1]) - 1].copy()
    if spec.startswith("constant(") and spec.endswith(")"):
        try:
            return np.full(mesh.n_nodes, float(spec[9:-1]))
        except ValueError as exc:
            raise ConfigError(f"bad {name} {spec!r}") from exc
    if spec.startswith("file:"):
        try:
            rows = [ln for ln in Path(spec[5:]).read_text().splitlines() if ln and not ln.startswith("#")]
            vals = np.array([float(r.split(",")[1]) for r in rows[1:]])
        except (OSError, ValueError, IndexError) as exc:
            raise ConfigError(f"{name} file: {exc}") from exc
        if len(vals) != mesh.n_nodes:
            raise ConfigError(f"{name} file has {len(vals)} values, mesh has {mesh.n_nodes} nodes")
        return vals
    raise ConfigError(f"unknown {name} {spec!r}")


def _forcing(spec: str, mesh):
    spec = spec.strip()
    if spec.startswith("sin(") and spec.endswith(")"):
        inner = spec[4:-1]
        if ";" not in inner:
            raise ConfigError("forcing sin(w;profile) needs a profile")
        w, prof = inner.split(";", 1)
        try:
            w = float(w)
        except ValueError as exc:
            raise ConfigError(f"bad forcing frequency {w!r}") from exc
        p = _nodal(prof, mesh, "forcing")
        return lambda t: np.sin(w * t) * p
    p = _nodal(spec, mesh, "forcing")
    return None if not p.any() else p


def cmd_solve(cfg: RunConfig, out: Path) -> None:
    kv = dict(cfg.coefficients)
    if cfg.coeff:
        try:
            kv = {**parse_kv(Path(cfg.coeff).read_text()), **kv}
        except OSError as exc:
            raise ConfigError(f"coefficient file: {exc}") from exc
    coeff = parse_coefficients(kv)
    g = boundary_graph(cfg.level)
    mesh = sv.solver_mesh(cfg.level)
    try:
        fm = sv.assemble(mesh, g, coeff)
        rep = sv.check_assumptions(fm, coeff, seed=cfg.seed)
    except sv.AssumptionError as exc:
        raise NumericalFailure("assumption", str(exc)) from exc
    except ConfigError:
        raise
    u0 = _nodal(cfg.u0, mesh, "u0")
    forcing = _forcing(cfg.forcing, mesh)
    try:
        tr = sv.solve_cauchy(fm, u0, forcing, cfg.T, cfg.dt, cfg.scheme)
    except sv.SolveError as exc:
        raise NumericalFailure("solve", str(exc)) from exc
    M1 = fm.mass @ np.ones(fm.n)
    ventsell = max(float(np.abs(sv.ventsell_defect(fm, tr.states[i], tr.states[i + 1], tr.dt,
                                                    tr.scheme, tr.loads[i])).max())
                   for i in range(len(tr.loads)))
    echo = cfg.echo()
    io.write_trajectory(out / "trajectory.csv", tr, echo)
    report = rep.to_text() + "".join(f"{k}={v}\n" for k, v in {
        "lambda": repr(coeff.lam), "scheme": tr.scheme.value, "steps": len(tr.loads),
        "nodes": fm.n, "mass_initial": repr(float(M1 @ tr.states[0])),
        "mass_final": repr(float(M1 @ tr.states[-1])),
        "ventsell_max_defect": repr(ventsell)}.items())
    io.write_report(out / "solve_report.txt", report, echo)
    if cfg.svg:
        io.write_svg(out / "solution.svg", mesh, tr.states[-1], config=echo)


def cmd_verify(cfg: RunConfig, out: Path | None) -> int:
    results = run_suite(cfg.level, cfg.seed)
    failed = [r for r in results if not r[1]]
    for name, ok, detail in results:
        if not ok:
            print(f"FAIL {name} {detail}".rstrip())
    if failed:
        print(f"error: verify {len(failed)} of {len(results)} checks failed", file=sys.stderr)
        return 2
    print(f"PASS {len(results)} checks")
    return 0


def cmd_export(cfg: RunConfig, out: Path) -> None:
    g = boundary_graph(cfg.level)
    echo = cfg.echo()
    h = bd.harmonic_coordinate(g, 1)
    io.write_values(out / "harmonic_coordinate.csv", h.values, echo)
    io.write_values(out / "tangential_gradient.csv", bd.tangential_gradient(h).values, echo)
    io.write_values(out / "angular_data.csv", ext.angular_boundary_data(cfg.level).values, echo)
    io.write_report(out / "energy_report.txt", bd.discrete_energy(h).to_text(), echo)
    poly = polyline(cfg.level + 1)
    lines = "".join(f"{i},{x!r},{y!r}\n" for i, (x, y) in enumerate(poly))
    (out / "polyline.csv").write_text(io.config_header(echo) + "vertex_id,x,y\n" + lines)
    if cfg.svg and cfg.level >= 1:
        base, _ = _base_mesh(cfg)
        io.write_svg(out / "base_mesh.svg", base, config=echo)


COMMANDS = {"mesh": cmd_mesh, "extend": cmd_extend, "solve": cmd_solve, "export": cmd_export}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="snowdrift", description="Snowflake-domain Ventsell toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("mesh", "extend", "solve", "verify", "export"):
        s = sub.add_parser(name)
        s.add_argument("--config", help="key=value run configuration file")
        s.add_argument("--level", type=int)
        s.add_argument("--method", choices=["shell", "hexagon"])
        s.add_argument("--scheme", choices=["ie", "cn"])
        s.add_argument("--theta", type=float)
        s.add_argument("--dt", type=float)
        s.add_argument("--T", type=float)
        s.add_argument("--coeff", help="coefficient file (key=value)")
        s.add_argument("--boundary-data", help="CSV vertex_or_edge_id,value")
        s.add_argument("--u0")
        s.add_argument("--forcing")
        s.add_argument("--out")
        s.add_argument("--seed", type=int)
        s.add_argument("--svg", action="store_true", default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_kv = parse_kv(Path(args.config).read_text()) if args.config else {}
        cfg = build_config(args.command, file_kv, flags)
        if cfg.command == "verify":
            return cmd_verify(cfg, None)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[cfg.command](cfg, out)
    except ConfigError as exc:
        print(f"error: config {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: config {exc}", file=sys.stderr)
        return 1
    except NumericalFailure as exc:
        print(f"error: {exc.code} {exc}", file=sys.stderr)
        return 2
    except (sv.SolveError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
