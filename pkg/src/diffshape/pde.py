"""Transient state and discrete-adjoint solves for the interface problem.

The heat equation with piecewise-constant diffusivity is discretized with P1
elements in space and implicit Euler in time. The driving boundary condition
is a unit Dirichlet value on the top side; the other sides are insulated
(natural condition). The adjoint solver is the exact discrete adjoint of the
time-stepping scheme, so adjoint-based gradients differentiate the discrete
objective to solver accuracy.

Adjoint storage convention: stored level j is the multiplier of the step that
advances the state from level j to level j+1. The terminal stored level is
zero, and the backward recursion at level j is driven by the misfit of state
level j+1. Consequently gradient pairings combine adjoint level j with state
level j+1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from .mesh import TOP, BOTTOM, InterfaceCurve, TriangleMesh, locate_points

STATE_TOP_VALUE = 1.0


@dataclass
class TimeSeriesField:
    """Nodal P1 field at N+1 uniform time levels on [0, T]."""

    mesh: TriangleMesh
    final_time: float
    data: np.ndarray  # (N+1, n_nodes)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] != self.mesh.n_nodes:
            raise ValueError("data must be (N+1, n_nodes) on the given mesh")
        if len(self.data) < 2:
            raise ValueError("need at least two time levels")

    @property
    def n_steps(self) -> int:
        return len(self.data) - 1

    @property
    def dt(self) -> float:
        return self.final_time / self.n_steps

    def __getitem__(self, level: int) -> np.ndarray:
        return self.data[level]


@dataclass
class Observation:
    """Synthetic measurement: the field produced on a reference geometry."""

    mesh: TriangleMesh
    curve: InterfaceCurve
    field: "TimeSeriesField | np.ndarray"


def solve_state_parabolic(mesh: TriangleMesh, k: np.ndarray,
                          f: np.ndarray | None = None,
                          y0: np.ndarray | None = None,
                          final_time: float = 20.0, n_steps: int = 30,
                          rel_tol: float = 1e-10) -> TimeSeriesField:
    """Implicit-Euler solve of dy/dt - div(k grad y) = f, unit top boundary."""
    if final_time <= 0 or n_steps < 1:
        raise ValueError("need final_time > 0 and n_steps >= 1")
    n = mesh.n_nodes
    y0 = np.zeros(n) if y0 is None else np.asarray(y0, dtype=float)
    dt = final_time / n_steps
    mass = fem.assemble_mass(mesh)
    stiff = fem.assemble_stiffness(mesh, k)
    system = fem.DirichletSystem(mass + dt * stiff, mesh.boundary_nodes(TOP),
                                 STATE_TOP_VALUE)
    load = dt * (mass @ f) if f is not None else 0.0
    data = np.empty((n_steps + 1, n))
    data[0] = y0
    y = y0
    for j in range(1, n_steps + 1):
        y = system.solve(mass @ y + load, x0=y, rel_tol=rel_tol)
        data[j] = y
    return TimeSeriesField(mesh, final_time, data)


def solve_adjoint_parabolic(mesh: TriangleMesh, k: np.ndarray,
                            y: TimeSeriesField, ybar: TimeSeriesField,
                            rel_tol: float = 1e-10) -> TimeSeriesField:
    """Exact discrete adjoint of the implicit-Euler state solve.

    The adjoint runs backward in time with a zero terminal level, homogeneous
    Dirichlet data on the top side and the state misfit as a source.
    """
    if y.data.shape != ybar.data.shape:
        raise ValueError("state and observation must share mesh and time grid")
    n_steps, dt = y.n_steps, y.dt
    mass = fem.assemble_mass(mesh)
    stiff = fem.assemble_stiffness(mesh, k)
    system = fem.DirichletSystem(mass + dt * stiff, mesh.boundary_nodes(TOP), 0.0)
    data = np.zeros((n_steps + 1, mesh.n_nodes))
    p = data[n_steps]
    for j in range(n_steps - 1, -1, -1):
        rhs = mass @ p - dt * (mass @ (y[j + 1] - ybar[j + 1]))
        p = system.solve(rhs, x0=p, rel_tol=rel_tol)
        data[j] = p
    return TimeSeriesField(mesh, y.final_time, data)


def solve_elliptic(mesh: TriangleMesh, k: np.ndarray,
                   f: np.ndarray | None = None,
                   rel_tol: float = 1e-10) -> np.ndarray:
    """Steady variant: -div(k grad y) = f, y = 1 on top, y = 0 on bottom."""
    stiff = fem.assemble_stiffness(mesh, k)
    b = fem.assemble_mass(mesh) @ f if f is not None else np.zeros(mesh.n_nodes)
    top, bottom = mesh.boundary_nodes(TOP), mesh.boundary_nodes(BOTTOM)
    nodes = np.concatenate([top, bottom])
    values = np.concatenate([np.full(len(top), STATE_TOP_VALUE), np.zeros(len(bottom))])
    system = fem.DirichletSystem(stiff, nodes, values)
    return system.solve(b, rel_tol=rel_tol)


def solve_adjoint_elliptic(mesh: TriangleMesh, k: np.ndarray, y: np.ndarray,
                           ybar: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Adjoint of the steady solve: -div(k grad p) = -(y - ybar), p = 0 where
    the state carries Dirichlet data."""
    stiff = fem.assemble_stiffness(mesh, k)
    mass = fem.assemble_mass(mesh)
    nodes = np.concatenate([mesh.boundary_nodes(TOP), mesh.boundary_nodes(BOTTOM)])
    system = fem.DirichletSystem(stiff, nodes, 0.0)
    return system.solve(-(mass @ (np.asarray(y) - np.asarray(ybar))), rel_tol=rel_tol)


def interface_perimeter(mesh: TriangleMesh) -> float:
    e = mesh.interface_edges
    d = mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]]
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def evaluate_objective(mesh: TriangleMesh, y, ybar, mu: float) -> float:
    """Tracking objective: misfit plus perimeter regularization."""
    return objective_parts(mesh, y, ybar, mu)[0]


def objective_parts(mesh: TriangleMesh, y, ybar, mu: float):
    """Return (total, misfit, perimeter_term).

    For time series the misfit integrates the squared error with the
    rectangle rule over levels 1..N, matching the implicit-Euler stepping;
    for steady fields it is the plain half squared mass norm.
    """
    mass = fem.assemble_mass(mesh)
    if isinstance(y, TimeSeriesField):
        if not isinstance(ybar, TimeSeriesField) or y.data.shape != ybar.data.shape:
            raise ValueError("state and observation grids differ")
        misfit = 0.0
        for j in range(1, y.n_steps + 1):
            d = y[j] - ybar[j]
            misfit += y.dt * 0.5 * float(d @ (mass @ d))
    else:
        d = np.asarray(y, dtype=float) - np.asarray(ybar, dtype=float)
        misfit = 0.5 * float(d @ (mass @ d))
    per = mu * interface_perimeter(mesh)
    return misfit + per, misfit, per


def interpolate_field(source_mesh: TriangleMesh, values: np.ndarray,
                      target_mesh: TriangleMesh) -> np.ndarray:
    """Evaluate a nodal field of one mesh at the nodes of another."""
    tris, bary = locate_points(source_mesh, target_mesh.nodes)
    return np.einsum("nk,nk->n", np.asarray(values)[source_mesh.triangles[tris]], bary)


def interpolate_observation(source_mesh: TriangleMesh, source_ts,
                            target_mesh: TriangleMesh):
    """Barycentric transfer of an observation onto another mesh.

    Points are located once; every time level reuses the same coordinates.
    Accepts a steady field as well and returns the matching type.
    """
    if source_mesh is target_mesh:
        return source_ts
    tris, bary = locate_points(source_mesh, target_mesh.nodes)
    corners = source_mesh.triangles[tris]
    if isinstance(source_ts, TimeSeriesField):
        data = np.einsum("jnk,nk->jn", source_ts.data[:, corners], bary)
        return TimeSeriesField(target_mesh, source_ts.final_time, data)
    return np.einsum("nk,nk->n", np.asarray(source_ts)[corners], bary)


def solve_tangent_parabolic(mesh: TriangleMesh, k: np.ndarray,
                            dy0: np.ndarray, final_time: float, n_steps: int,
                            rel_tol: float = 1e-10) -> TimeSeriesField:
    """Linearized state solve for an initial-value perturbation.

    The tangent dynamics reuse the state operator with homogeneous boundary
    data; used to validate adjoint consistency.
    """
    dt = final_time / n_steps
    mass = fem.assemble_mass(mesh)
    stiff = fem.assemble_stiffness(mesh, k)
    system = fem.DirichletSystem(mass + dt * stiff, mesh.boundary_nodes(TOP), 0.0)
    data = np.empty((n_steps + 1, mesh.n_nodes))
    data[0] = dy0
    v = np.asarray(dy0, dtype=float)
    for j in range(1, n_steps + 1):
        v = system.solve(mass @ v, x0=v, rel_tol=rel_tol)
        data[j] = v
    return TimeSeriesField(mesh, final_time, data)


def diffusivity_gradient(mesh: TriangleMesh, y, p) -> np.ndarray:
    """Gradient of the discrete misfit with respect to per-cell diffusivity.

    Pairs the adjoint with the state through the stiffness sensitivity of
    each cell: entry t is d(misfit)/d(k_t). Exact for the discrete objective,
    which is what the finite-difference consistency tests check.
    """
    g = fem.triangle_gradients(mesh)
    tris = mesh.triangles
    if isinstance(y, TimeSeriesField):
        total = np.zeros(mesh.n_triangles)
        for j in range(1, y.n_steps + 1):
            gy = np.einsum("tdi,ti->td", g, y[j][tris])
            gp = np.einsum("tdi,ti->td", g, p[j - 1][tris])
            total += y.dt * np.einsum("td,td->t", gy, gp)
        return total * mesh.areas
    gy = np.einsum("tdi,ti->td", g, np.asarray(y)[tris])
    gp = np.einsum("tdi,ti->td", g, np.asarray(p)[tris])
    return np.einsum("td,td->t", gy, gp) * mesh.areas
