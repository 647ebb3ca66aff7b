"""P1 finite-element assembly and conjugate-gradient solves.

All operators are scipy CSR matrices assembled from vectorized per-triangle
blocks. Dirichlet conditions are imposed by symmetric elimination (rows and
columns zeroed, unit diagonal) so the systems stay symmetric positive
definite and amenable to CG.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .mesh import TriangleMesh

_MASS_REF = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


class ConvergenceError(Exception):
    """CG failed to reach the requested tolerance."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(f"CG: residual {residual:.3e} after {iterations} iterations")
        self.iterations = iterations
        self.residual = residual


def _scatter(mesh: TriangleMesh, blocks: np.ndarray) -> sp.csr_matrix:
    """Accumulate (T, 3, 3) element blocks into a CSR matrix."""
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    m = sp.coo_matrix((blocks.ravel(), (rows, cols)),
                      shape=(mesh.n_nodes, mesh.n_nodes)).tocsr()
    m.eliminate_zeros()
    return m


def assemble_mass(mesh: TriangleMesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix; row sums integrate the hat functions."""
    blocks = mesh.areas[:, None, None] * _MASS_REF[None, :, :]
    return _scatter(mesh, blocks)


def triangle_gradients(mesh: TriangleMesh) -> np.ndarray:
    """Gradient operator per triangle: (T, 2, 3) mapping nodal values to
    the constant gradient of the linear interpolant."""
    p = mesh.nodes[mesh.triangles]  # (T, 3, 2)
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    det = 2.0 * mesh.areas  # positive by mesh invariant
    g = np.empty((mesh.n_triangles, 2, 3))
    # grad of the hat function at each vertex: perpendicular of opposite edge.
    g[:, 0, 0] = b[:, 1] - c[:, 1]
    g[:, 1, 0] = c[:, 0] - b[:, 0]
    g[:, 0, 1] = c[:, 1] - a[:, 1]
    g[:, 1, 1] = a[:, 0] - c[:, 0]
    g[:, 0, 2] = a[:, 1] - b[:, 1]
    g[:, 1, 2] = b[:, 0] - a[:, 0]
    g /= det[:, None, None]
    return g


def assemble_stiffness(mesh: TriangleMesh, k: np.ndarray) -> sp.csr_matrix:
    """Stiffness matrix for -div(k grad .) with element-wise constant k."""
    k = np.asarray(k, dtype=float)
    if k.shape != (mesh.n_triangles,):
        raise ValueError("k must hold one value per triangle")
    if np.any(k <= 0):
        raise ValueError("diffusivity must be positive on every cell")
    g = triangle_gradients(mesh)
    blocks = (k * mesh.areas)[:, None, None] * np.einsum("tdi,tdj->tij", g, g)
    return _scatter(mesh, blocks)


def p1_gradient(mesh: TriangleMesh, values: np.ndarray, tri: int) -> np.ndarray:
    """Constant gradient of the P1 interpolant on one triangle."""
    g = triangle_gradients(mesh)[tri]
    return g @ np.asarray(values, dtype=float)[mesh.triangles[tri]]


def subdomain_operators(mesh: TriangleMesh, label: int,
                        k_value: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Mass and stiffness assembled over one subdomain only.

    Rows of the returned operators at interface nodes integrate test
    functions restricted to that subdomain, which is what variational flux
    recovery across the interface needs.
    """
    mask = mesh.subdomain == label
    tris = mesh.triangles[mask]
    areas = mesh.areas[mask]
    g = triangle_gradients(mesh)[mask]
    mass_blocks = areas[:, None, None] * _MASS_REF[None, :, :]
    stiff_blocks = (k_value * areas)[:, None, None] * np.einsum("tdi,tdj->tij", g, g)
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.n_nodes
    mass = sp.coo_matrix((mass_blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    stiff = sp.coo_matrix((stiff_blocks.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return mass, stiff


def apply_dirichlet(A: sp.csr_matrix, b: np.ndarray, nodes,
                    value, mesh: TriangleMesh | None = None):
    """Impose fixed values by symmetric elimination.

    Returns a new (A, b) pair; the inputs are untouched. `value` may be a
    scalar or one value per constrained node. When a mesh is supplied the
    node set must lie on its tagged outer boundary.
    """
    nodes = np.asarray(nodes, dtype=np.int64)
    if mesh is not None and len(nodes):
        if not np.all(np.isin(nodes, mesh.boundary_nodes())):
            raise ValueError("Dirichlet node set is not on the tagged boundary")
    values = np.broadcast_to(np.asarray(value, dtype=float), nodes.shape)
    if len(nodes) == 0:
        return A.copy(), np.array(b, dtype=float)
    full = np.zeros(A.shape[0])
    full[nodes] = values
    b2 = np.array(b, dtype=float) - A @ full
    b2[nodes] = values
    return eliminate_rows_cols(A, nodes), b2


def eliminate_rows_cols(A: sp.csr_matrix, nodes) -> sp.csr_matrix:
    """Zero the rows and columns of the given dofs and set a unit diagonal."""
    n = A.shape[0]
    keep = np.ones(n)
    keep[nodes] = 0.0
    d = sp.diags(keep)
    out = (d @ A @ d + sp.diags(1.0 - keep)).tocsr()
    out.eliminate_zeros()
    return out


class DirichletSystem:
    """A constrained SPD system reusable across right-hand sides.

    Precomputes the eliminated matrix and the column contribution of the
    fixed values, so time-stepping loops pay only vector work per step.
    """

    def __init__(self, A: sp.csr_matrix, nodes, value):
        self.nodes = np.asarray(nodes, dtype=np.int64)
        self.values = np.broadcast_to(np.asarray(value, dtype=float), self.nodes.shape)
        lift = np.zeros(A.shape[0])
        lift[self.nodes] = self.values
        self.lift = A @ lift
        self.matrix = eliminate_rows_cols(A, self.nodes)
        self.diag = self.matrix.diagonal()

    def solve(self, b: np.ndarray, x0: np.ndarray | None = None,
              rel_tol: float = 1e-10) -> np.ndarray:
        rhs = b - self.lift
        rhs[self.nodes] = self.values
        # Starting with the exact constrained values keeps those components
        # untouched by the Krylov iteration.
        x0 = np.zeros(len(rhs)) if x0 is None else x0.copy()
        x0[self.nodes] = self.values
        return cg_solve(self.matrix, rhs, rel_tol=rel_tol, x0=x0, diag=self.diag)


def cg_solve(A, b: np.ndarray, rel_tol: float = 1e-10,
             max_iter: int | None = None, x0: np.ndarray | None = None,
             diag: np.ndarray | None = None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients for SPD systems.

    Stops when ||Ax - b|| <= rel_tol * ||b||; raises ConvergenceError if the
    iteration cap (default 10 * dim) is hit first.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros(n)
    if max_iter is None:
        max_iter = 10 * n
    if diag is None:
        diag = A.diagonal()
    inv_diag = 1.0 / diag
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    r = b - A @ x
    if np.linalg.norm(r) <= rel_tol * norm_b:
        return x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, max_iter + 1):
        Ap = A @ p
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r)
        if res <= rel_tol * norm_b:
            return x
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(max_iter, float(np.linalg.norm(b - A @ x) / norm_b))
