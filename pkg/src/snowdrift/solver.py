"""Parabolic problem with a dynamic (Ventsell) boundary condition.

Unknowns are P1 nodal values on a conforming mesh whose boundary nodes are
identified with the vertices of the boundary graph.  The state space carries
m = Lebesgue measure on the domain + energy measure on the boundary, so the
mass is the sum of a lumped bulk mass and the lumped boundary mass.  The
form operator is

    B = K_A + c0 * S + D_bulk + D_bnd + P_c

and the Cauchy problem reads  M u' + B u = M f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .boundary import BoundaryFunction, boundary_laplacian_matrices
from .geometry import BoundaryGraph, boundary_graph
from .mesh import TriMesh, collar_mesh, shell_triangulation


class Scheme(str, Enum):
    IE = "ImplicitEuler"
    CN = "CrankNicolson"

    @property
    def theta(self) -> float:
        return 1.0 if self is Scheme.IE else 0.5

    @classmethod
    def parse(cls, s) -> "Scheme":
        if isinstance(s, cls):
            return s
        return {"ie": cls.IE, "cn": cls.CN}.get(str(s).lower()) or cls(s)


class AssumptionError(ValueError):
    """Coefficients outside the admissible class."""


class SolveError(RuntimeError):
    pass


def _field(value, dim: tuple) -> Callable:
    if callable(value):
        return value
    arr = np.asarray(value, dtype=float)
    if arr.shape != dim:
        raise ValueError(f"constant coefficient of shape {arr.shape}, expected {dim}")
    return lambda x: np.broadcast_to(arr, (len(x),) + dim)


@dataclass
class CoefficientSet:
    """Coefficients of the form; fields may be constants or callables.

    ``A`` and ``b`` take (n, 2) points; ``b_boundary`` and ``c`` take the
    cumulative harmonic coordinate of edges (midpoints) or vertices.
    """

    A: object = field(default_factory=lambda: np.eye(2))
    b: object = (0.0, 0.0)
    b_boundary: object = 0.0
    c: object = 0.0
    c0: float = 1.0
    lam: float = 1.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    delta1: float = 0.0
    delta2: float = 0.0
    alpha: float | None = None

    def __post_init__(self):
        if self.c0 <= 0 or self.lam <= 0:
            raise AssumptionError("c0 and lambda must be positive")
        if min(self.gamma1, self.gamma2, self.delta1, self.delta2) < 0:
            raise AssumptionError("gamma and delta constants must be nonnegative")

    def A_at(self, x):
        return _field(self.A, (2, 2))(x)

    def b_at(self, x):
        return _field(self.b, (2,))(x)

    def _scalar(self, value, s):
        if callable(value):
            return np.asarray(value(s), dtype=float) * np.ones(len(s))
        v = np.asarray(value, dtype=float)
        return np.broadcast_to(v, (len(s),)) if v.ndim == 0 else v

    def b_boundary_at(self, s):
        return self._scalar(self.b_boundary, s)

    def c_at(self, s):
        return self._scalar(self.c, s)

    def check_smallness(self) -> None:
        if math.sqrt(2 * self.gamma1) >= self.lam:
            raise AssumptionError(f"sqrt(2*gamma1) = {math.sqrt(2 * self.gamma1):.6g} >= lambda = {self.lam:.6g}")
        if math.sqrt(2 * self.delta1) >= self.c0:
            raise AssumptionError(f"sqrt(2*delta1) = {math.sqrt(2 * self.delta1):.6g} >= c0 = {self.c0:.6g}")


@dataclass(eq=False)
class FormMatrices:
    mesh: TriMesh
    graph: BoundaryGraph
    mass_bulk: sp.csr_matrix
    mass_boundary: sp.csr_matrix
    stiff_bulk: sp.csr_matrix
    stiff_boundary: sp.csr_matrix
    drift_bulk: sp.csr_matrix
    drift_boundary: sp.csr_matrix
    potential_boundary: sp.csr_matrix
    trace: sp.csr_matrix             # (n_nodes, n_graph) boundary identification
    quad_A: np.ndarray               # A at the barycentres
    _factors: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.mesh.n_nodes

    @property
    def mass(self) -> sp.csr_matrix:
        return (self.mass_bulk + self.mass_boundary).tocsr()

    @property
    def B(self) -> sp.csr_matrix:
        return (self.stiff_bulk + self.stiff_boundary + self.drift_bulk
                + self.drift_boundary + self.potential_boundary).tocsr()

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self.mesh.boundary_nodes()

    def to_graph(self, u: np.ndarray) -> BoundaryFunction:
        """Trace of a nodal vector as a function on the boundary graph."""
        return BoundaryFunction(self.graph, self.trace.T @ u)

    def factor(self, dt: float, theta: float):
        key = (float(dt), float(theta))
        if key not in self._factors:
            lhs = (self.mass + dt * theta * self.B).tocsc()
            try:
                self._factors[key] = spla.splu(lhs)
            except RuntimeError as exc:
                raise SolveError(f"singular system for dt={dt}, theta={theta}: {exc}") from exc
        return self._factors[key]


def solver_mesh(level: int) -> TriMesh:
    """Conforming uniform mesh of the level-(N+1) polygon built on the shells."""
    return collar_mesh(shell_triangulation(level), boundary_graph(level), conforming=True)


def _p1_gradients(mesh: TriMesh):
    p = mesh.nodes[mesh.triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    # gradients of the three barycentric coordinates, shape (m, 3, 2)
    g1 = np.stack([e2[:, 1], -e2[:, 0]], axis=-1) / det[:, None]
    g2 = np.stack([-e1[:, 1], e1[:, 0]], axis=-1) / det[:, None]
    G = np.stack([-g1 - g2, g1, g2], axis=1)
    return G, 0.5 * det


def assemble(mesh: TriMesh, graph: BoundaryGraph, coeff: CoefficientSet) -> FormMatrices:
    n = mesh.n_nodes
    link = mesh.boundary_link
    bnodes = np.flatnonzero(link >= 0)
    if len(bnodes) != graph.n or set(link[bnodes].tolist()) != set(range(graph.n)):
        raise ValueError("mesh boundary is not linked one-to-one to the boundary graph")
    tri = mesh.triangles
    G, area = _p1_gradients(mesh)
    if np.any(area <= 0):
        raise ValueError("mesh has degenerate or clockwise triangles")
    bary = mesh.nodes[tri].mean(axis=1)
    A = np.asarray(coeff.A_at(bary), dtype=float)
    if not np.allclose(A, np.swapaxes(A, 1, 2), atol=1e-14):
        raise AssumptionError("A must be symmetric")
    b = np.asarray(coeff.b_at(bary), dtype=float)

    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    AG = np.einsum("tkl,tjl->tjk", A, G)
    Ke = np.einsum("tik,tjk->tij", G, AG) * area[:, None, None]
    K = sp.csr_matrix((Ke.ravel(), (rows, cols)), shape=(n, n))
    # -(b . grad phi_j) * phi_i(barycentre) * area, phi_i(barycentre) = 1/3
    bg = np.einsum("tk,tjk->tj", b, G)
    De = -np.repeat(bg[:, None, :], 3, axis=1) * (area / 3.0)[:, None, None]
    Db = sp.csr_matrix((De.ravel(), (rows, cols)), shape=(n, n))
    Mb_bulk = sp.csr_matrix((np.repeat(area / 3.0, 3), (tri.ravel(), tri.ravel())), shape=(n, n))

    P = sp.csr_matrix((np.ones(len(bnodes)), (bnodes, link[bnodes])), shape=(n, graph.n))
    S, Mg = boundary_laplacian_matrices(graph)
    S_nodes = (coeff.c0 * (P @ S @ P.T)).tocsr()
    M_bnd = (P @ Mg @ P.T).tocsr()

    # boundary drift, edge j -> j+1 with half the cell mass to each endpoint
    j = np.arange(graph.n)
    k = (j + 1) % graph.n
    mid = graph.arc + 0.5 * graph.dh
    beta = coeff.b_boundary_at(mid)
    w = 0.5 * graph.cell_mass * beta / graph.dh
    r = np.concatenate([j, j, k, k])
    c = np.concatenate([k, j, k, j])
    v = np.concatenate([-w, w, -w, w])
    Dg = sp.csr_matrix((v, (r, c)), shape=(graph.n, graph.n))
    D_nodes = (P @ Dg @ P.T).tocsr()
    cval = coeff.c_at(graph.arc)
    Pc = (P @ sp.diags(cval * graph.vertex_mass) @ P.T).tocsr()
    return FormMatrices(mesh, graph, Mb_bulk, M_bnd, K, S_nodes, Db, D_nodes, Pc, P, A)


# ---------------------------------------------------------------------------
# assumption checks

def _is_positive_definite(A: sp.spmatrix) -> bool:
    """Inertia test through an LDL^T-type factorisation without pivoting."""
    try:
        lu = spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
    except RuntimeError:
        return False
    d = lu.U.diagonal()
    return bool(np.all(d > 0))


def smallest_generalized_eigenvalue(B: sp.spmatrix, M: sp.spmatrix) -> float:
    """Smallest eigenvalue of B x = lam M x for symmetric B and SPD M."""
    B = sp.csc_matrix(B)
    M = sp.csc_matrix(M)
    if B.shape[0] <= 400:
        from scipy.linalg import eigh
        return float(eigh(B.toarray(), M.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0])
    sigma = -1.0
    while not _is_positive_definite(B - sigma * M):
        sigma *= 4.0
        if sigma < -1e12:
            raise SolveError("could not bracket the spectrum")
    val = spla.eigsh(B, k=1, M=M, sigma=sigma, which="LM", return_eigenvectors=False, tol=1e-12)
    return float(val[0])


def sector_constant(fm: FormMatrices, alpha: float) -> float:
    """Exact sup |E_{a+1}(u,v)| / (E_{a+1}(u) E_{a+1}(v))^(1/2) of the discrete form.

    With S and N the symmetric and skew parts of B + (alpha+1) M this equals
    sqrt(1 + rho**2), rho**2 the top eigenvalue of N^T S^-1 N x = rho**2 S x.
    """
    B1 = (fm.B + (alpha + 1.0) * fm.mass).tocsc()
    S = ((B1 + B1.T) * 0.5).tocsc()
    N = ((B1 - B1.T) * 0.5).tocsc()
    if abs(N).max() == 0 if N.nnz else True:
        return 1.0
    if S.shape[0] <= 600:
        from scipy.linalg import eigh, solve
        Sd, Nd = S.toarray(), N.toarray()
        rho2 = eigh(Nd.T @ solve(Sd, Nd, assume_a="pos"), Sd, eigvals_only=True)[-1]
        return float(math.sqrt(1.0 + max(rho2, 0.0)))
    lu = spla.splu(S)
    n = S.shape[0]
    op = spla.LinearOperator((n, n), matvec=lambda x: N.T @ lu.solve(N @ x), dtype=float)
    minv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    rho2 = spla.eigsh(op, k=1, M=S, Minv=minv, which="LA", return_eigenvectors=False, tol=1e-10)[0]
    return float(math.sqrt(1.0 + max(rho2, 0.0)))


def sampled_sector_constant(fm: FormMatrices, alpha: float, rng, pairs: int = 200) -> float:
    B1 = fm.B + (alpha + 1.0) * fm.mass
    U = rng.standard_normal((fm.n, pairs))
    V = rng.standard_normal((fm.n, pairs))
    num = np.abs(np.einsum("ij,ij->j", U, B1 @ V))
    eu = np.einsum("ij,ij->j", U, B1 @ U)
    ev = np.einsum("ij,ij->j", V, B1 @ V)
    return float((num / np.sqrt(eu * ev)).max())


def _best_form_bound(drift, stiff, mass, u_samples, small: float, scale: float, const2: float):
    """Check |u D u| <= ((small + eps^2)/scale) u K u + (2 const2/eps^2) u M u.

    Returns (holds, eps, worst ratio lhs/rhs) for the best eps on a grid.
    """
    lhs = np.abs(np.einsum("ij,ij->j", u_samples, drift @ u_samples))
    k = np.einsum("ij,ij->j", u_samples, stiff @ u_samples)
    m = np.einsum("ij,ij->j", u_samples, mass @ u_samples)
    if not np.any(lhs > 0):
        return True, 1.0, 0.0
    best = (False, None, np.inf)
    for eps in np.logspace(-3, 1.5, 200):
        rhs = (small + eps**2) / scale * k + 2 * const2 / eps**2 * m
        ratio = float(np.max(lhs / np.maximum(rhs, 1e-300)))
        if ratio < best[2]:
            best = (ratio <= 1.0 + 1e-12, float(eps), ratio)
    return best


@dataclass
class AssumptionReport:
    lam_quadrature: float
    form_bound_bulk: tuple
    form_bound_boundary: tuple
    alpha: float
    K: float
    K_sampled: float
    seed: int

    def to_text(self) -> str:
        fb, bb = self.form_bound_bulk, self.form_bound_boundary
        return "\n".join([
            f"lambda_quadrature={self.lam_quadrature!r}",
            f"form_bound_bulk_ok={fb[0]}", f"form_bound_bulk_eps={fb[1]!r}", f"form_bound_bulk_ratio={fb[2]!r}",
            f"form_bound_boundary_ok={bb[0]}", f"form_bound_boundary_eps={bb[1]!r}",
            f"form_bound_boundary_ratio={bb[2]!r}",
            f"alpha={self.alpha!r}", f"K={self.K!r}", f"K_sampled={self.K_sampled!r}",
            f"seed={self.seed}",
        ]) + "\n"


def check_assumptions(fm: FormMatrices, coeff: CoefficientSet, seed: int = 0,
                      samples: int = 100) -> AssumptionReport:
    """Discrete verification of the admissibility conditions on the coefficients."""
    coeff.check_smallness()
    lam_q = float(np.linalg.eigvalsh(fm.quad_A).min())
    if lam_q < coeff.lam - 1e-12:
        raise AssumptionError(f"ellipticity fails: min eigenvalue {lam_q:.6g} < lambda {coeff.lam:.6g}")
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((fm.n, samples))
    bulk = _best_form_bound(fm.drift_bulk, fm.stiff_bulk, fm.mass_bulk, U,
                            math.sqrt(2 * coeff.gamma1), coeff.lam, coeff.gamma2)
    # the boundary stiffness already carries c0: (small + eps^2)/c0 * c0 E = ... / c0 * S
    bnd = _best_form_bound(fm.drift_boundary, fm.stiff_boundary, fm.mass_boundary, U,
                           math.sqrt(2 * coeff.delta1), coeff.c0, coeff.delta2)
    Bs = ((fm.B + fm.B.T) * 0.5).tocsr()
    lmin = smallest_generalized_eigenvalue(Bs, fm.mass)
    alpha = max(0.0, -lmin)
    return AssumptionReport(lam_q, bulk, bnd, alpha, sector_constant(fm, alpha),
                            sampled_sector_constant(fm, alpha, rng), seed)


# ---------------------------------------------------------------------------
# time stepping

@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray             # (steps + 1, n)
    scheme: Scheme
    dt: float
    loads: np.ndarray              # forcing values used on each step, (steps, n)


def step(fm: FormMatrices, u: np.ndarray, dt: float, scheme, load: np.ndarray) -> np.ndarray:
    """One theta step of M u' + B u = load; ``load`` is an assembled vector."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    th = Scheme.parse(scheme).theta
    rhs = fm.mass @ u - dt * (1 - th) * (fm.B @ u) + dt * load
    out = fm.factor(dt, th).solve(rhs)
    lhs = fm.mass + dt * th * fm.B
    res = np.linalg.norm(lhs @ out - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if not np.isfinite(out).all() or res > 1e-10:
        raise SolveError(f"linear solve residual {res:.3g}")
    return out


def _forcing_values(forcing, t, n) -> np.ndarray:
    if forcing is None:
        return np.zeros(n)
    return np.asarray(forcing(t), dtype=float) if callable(forcing) else np.asarray(forcing, dtype=float)


def solve_cauchy(fm: FormMatrices, u0: np.ndarray, forcing, T: float, dt: float, scheme) -> Trajectory:
    """Time-step u' = -M^-1 B u + f from u0 over [0, T].

    ``forcing`` is None, a nodal vector, or a callable t -> nodal values of f;
    the load on each step is M applied to f at the new time (implicit Euler)
    or to the average of the two end values (Crank-Nicolson).
    """
    if T <= 0 or not 0 < dt <= T:
        raise ValueError("need T > 0 and 0 < dt <= T")
    scheme = Scheme.parse(scheme)
    steps = math.ceil(T / dt - 1e-12)
    times = dt * np.arange(steps + 1)
    states = np.empty((steps + 1, fm.n))
    loads = np.empty((steps, fm.n))
    states[0] = u0
    M = fm.mass
    f_prev = _forcing_values(forcing, 0.0, fm.n)
    for i in range(steps):
        f_next = _forcing_values(forcing, times[i + 1], fm.n)
        f = f_next if scheme is Scheme.IE else 0.5 * (f_prev + f_next)
        loads[i] = f
        states[i + 1] = step(fm, states[i], dt, scheme, M @ f)
        f_prev = f_next
    return Trajectory(times, states, scheme, dt, loads)


def conormal_residual(fm: FormMatrices, u_prev: np.ndarray, u_next: np.ndarray,
                      dt: float, scheme, f: np.ndarray | None = None) -> BoundaryFunction:
    """Discrete co-normal derivative paired with the boundary hat functions.

    Bulk part of the weak equation evaluated on the boundary rows:
    K u_theta + D_bulk u_theta + M_bulk (u_next - u_prev)/dt - M_bulk f.
    For a stationary state pass ``u_prev = u_next``.
    """
    th = Scheme.parse(scheme).theta
    u_th = th * u_next + (1 - th) * u_prev
    f = np.zeros(fm.n) if f is None else f
    r = (fm.stiff_bulk @ u_th + fm.drift_bulk @ u_th
         + fm.mass_bulk @ (u_next - u_prev) / dt - fm.mass_bulk @ f)
    return fm.to_graph(r)


def ventsell_defect(fm: FormMatrices, u_prev, u_next, dt, scheme, f=None) -> np.ndarray:
    """Boundary equation residual: M_b u' + (c0 S + D_bnd + P) u + dn u - M_b f."""
    th = Scheme.parse(scheme).theta
    u_th = th * u_next + (1 - th) * u_prev
    f = np.zeros(fm.n) if f is None else f
    bnd = (fm.mass_boundary @ (u_next - u_prev) / dt
           + (fm.stiff_boundary + fm.drift_boundary + fm.potential_boundary) @ u_th
           - fm.mass_boundary @ f)
    return fm.trace.T @ bnd + conormal_residual(fm, u_prev, u_next, dt, scheme, f).values


def duhamel_oracle(fm: FormMatrices, u0: np.ndarray, times: np.ndarray,
                   phi: np.ndarray | None = None, C: np.ndarray | None = None,
                   a0: np.ndarray | None = None) -> np.ndarray:
    """Dense variation-of-constants solution at ``times`` (small meshes only).

    Solves u' = -G u + phi @ a(t), G = M^-1 B, with a' = C a, a(0) = a0, by
    one matrix exponential of the augmented system; this equals
    exp(-t G) u0 + int_0^t exp(-(t-s) G) f(s) ds exactly.
    """
    from scipy.linalg import expm

    G = np.linalg.solve(fm.mass.toarray(), fm.B.toarray())
    n = fm.n
    if phi is None:
        Z, z0 = -G, np.asarray(u0, dtype=float)
    else:
        phi = np.asarray(phi, dtype=float).reshape(n, -1)
        k = phi.shape[1]
        Z = np.zeros((n + k, n + k))
        Z[:n, :n] = -G
        Z[:n, n:] = phi
        Z[n:, n:] = C
        z0 = np.concatenate([u0, a0])
    return np.array([(expm(t * Z) @ z0)[:n] for t in times])
