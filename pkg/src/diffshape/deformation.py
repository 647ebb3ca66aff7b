"""Extension of interface displacements into the volume via linear elasticity.

Moving only the interface nodes would immediately tangle the surrounding
triangles. Instead the boundary displacement is applied as Dirichlet data of
a plane elasticity problem with zero displacement on the outer square, and
the elastic solution moves every mesh node smoothly. Default material
parameters (zero first parameter, unit shear) act as a pure smoothing
operator for mesh motion.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import fem
from .mesh import TriangleMesh


def assemble_elasticity(mesh: TriangleMesh, lam: float = 0.0,
                        mu_e: float = 1.0) -> sp.csr_matrix:
    """Vector P1 stiffness of the symmetric-gradient elasticity form.

    Degrees of freedom are interleaved (x0, y0, x1, y1, ...). The operator is
    symmetric positive semi-definite with rigid motions in its kernel until
    boundary conditions are imposed.
    """
    if mu_e <= 0 or lam < 0:
        raise ValueError("need mu_e > 0 and lam >= 0")
    g = fem.triangle_gradients(mesh)  # (T, 2, 3)
    nt = mesh.n_triangles
    b = np.zeros((nt, 3, 6))
    b[:, 0, 0::2] = g[:, 0, :]
    b[:, 1, 1::2] = g[:, 1, :]
    b[:, 2, 0::2] = g[:, 1, :]
    b[:, 2, 1::2] = g[:, 0, :]
    d = np.array([[lam + 2 * mu_e, lam, 0.0],
                  [lam, lam + 2 * mu_e, 0.0],
                  [0.0, 0.0, mu_e]])
    blocks = mesh.areas[:, None, None] * np.einsum("tpi,pq,tqj->tij", b, d, b)
    dofs = np.empty((nt, 6), dtype=np.int64)
    dofs[:, 0::2] = 2 * mesh.triangles
    dofs[:, 1::2] = 2 * mesh.triangles + 1
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    out = sp.coo_matrix((blocks.ravel(), (rows, cols)),
                        shape=(2 * mesh.n_nodes, 2 * mesh.n_nodes)).tocsr()
    out.eliminate_zeros()
    return out


def extend_to_domain(mesh: TriangleMesh, node_ids: np.ndarray,
                     values: np.ndarray, lam: float = 0.0, mu_e: float = 1.0,
                     rel_tol: float = 1e-10) -> np.ndarray:
    """Elastic extension of prescribed node displacements into the mesh.

    Args:
        node_ids: nodes carrying prescribed displacements (the interface).
        values: (len(node_ids), 2) displacement at those nodes.

    Returns an (n_nodes, 2) field equal to `values` on the given nodes and
    exactly zero on the outer boundary.
    """
    node_ids = np.asarray(node_ids, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    if values.shape != (len(node_ids), 2):
        raise ValueError("values must be (len(node_ids), 2)")
    stiffness = assemble_elasticity(mesh, lam, mu_e)
    outer = mesh.boundary_nodes()
    dofs = np.concatenate([2 * node_ids, 2 * node_ids + 1,
                           2 * outer, 2 * outer + 1])
    vals = np.concatenate([values[:, 0], values[:, 1],
                           np.zeros(2 * len(outer))])
    system = fem.DirichletSystem(stiffness, dofs, vals)
    u = system.solve(np.zeros(2 * mesh.n_nodes), rel_tol=rel_tol)
    return u.reshape(-1, 2)
