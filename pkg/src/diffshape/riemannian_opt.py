"""Descent drivers on the space of interface curves.

Steepest descent and limited-memory BFGS act on normal-velocity coefficients
along the interface. The retraction adds the displacement to the node
positions (after elastic extension into the volume) and the vector transport
carries coefficients unchanged: nodal data rides with the moving nodes. The
transport is not an isometry of the curve metric, so stored quasi-Newton pairs
are re-measured with the metric of the current curve.

Progress toward a known reference interface is measured by casting rays from
the iterate's nodes along their normals onto the reference polyline and
taking the curve-L2 norm of the resulting signed distance field.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import pde, shape_calculus as sc
from .config import ExperimentConfig
from .deformation import extend_to_domain
from .mesh import (InterfaceCurve, InvertedElementError, TriangleMesh,
                   apply_displacement, cell_diffusivity, extract_interface,
                   generate_ogrid_mesh)
from .pde import Observation
from .shape_calculus import TangentVector

logger = logging.getLogger(__name__)

# Largest allowed relative displacement of edge-adjacent interface nodes in
# one step, as a fraction of their edge length.
_SHEAR_CAP = 0.25


@dataclass
class LbfgsMemory:
    """Bounded ring of curvature pairs for the two-loop recursion.

    Each entry stores the step and gradient-difference coefficients together
    with the reciprocal of their metric product at the time of the update.
    """

    capacity: int
    smoothing: float
    pairs: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)


def transport(eta: TangentVector, v: TangentVector,
              new_curve: InterfaceCurve | None = None) -> TangentVector:
    """Carry coefficients across a step unchanged (identity transport)."""
    return TangentVector(new_curve if new_curve is not None else v.curve,
                         v.values.copy())


def lbfgs_update(memory: LbfgsMemory, s: TangentVector, y: TangentVector) -> LbfgsMemory:
    """Push a curvature pair, guarding against non-positive curvature.

    Pairs whose metric product is not safely positive are skipped (logged,
    not an error); the oldest pair is evicted beyond capacity.
    """
    curve = s.curve
    d = sc.sobolev_inner(curve, s, y, memory.smoothing)
    floor = 1e-14 * np.sqrt(sc.sobolev_inner(curve, s, s, memory.smoothing)
                            * sc.sobolev_inner(curve, y, y, memory.smoothing))
    if not np.isfinite(d) or d <= floor:
        logger.info("skipping quasi-Newton pair: curvature %.3e below guard", d)
        return memory
    memory.pairs.append((s.values.copy(), y.values.copy(), 1.0 / d))
    if len(memory.pairs) > memory.capacity:
        memory.pairs.pop(0)
    return memory


def lbfgs_direction(memory: LbfgsMemory, grad: TangentVector,
                    curve: InterfaceCurve) -> TangentVector:
    """Two-loop recursion with curve-metric inner products.

    Returns the inverse-Hessian image of the gradient; the descent direction
    is its negative. With empty memory the gradient is returned unchanged.
    """
    q = grad.values.copy()
    live = [p for p in memory.pairs if np.isfinite(p[2])]
    if not live:
        return TangentVector(curve, q)
    w = sc.curve_mass_matrix(curve)
    if memory.smoothing:
        w = w + memory.smoothing * sc.curve_stiffness_matrix(curve)
    alphas = []
    for s, y, rho in reversed(live):
        a = rho * float(s @ (w @ q))
        q -= a * y
        alphas.append(a)
    s_last, y_last, _ = live[-1]
    yy = float(y_last @ (w @ y_last))
    ys = float(y_last @ (w @ s_last))
    if yy > 0 and np.isfinite(ys / yy):
        q *= ys / yy
    for (s, y, rho), a in zip(live, reversed(alphas)):
        b = rho * float(y @ (w @ q))
        q += (a - b) * s
    return TangentVector(curve, q)


@dataclass
class HistoryRecord:
    iteration: int
    objective: float
    misfit: float
    perimeter_term: float
    grad_norm: float
    distance: float
    seconds: float


@dataclass
class OptimizerState:
    iteration: int
    mesh: TriangleMesh
    curve: InterfaceCurve
    history: list = field(default_factory=list)
    last_increment: np.ndarray | None = None
    # Smallest triangle area of the starting mesh; anchors the step quality
    # guard so repeated steps cannot ratchet the mesh quality downward.
    reference_min_area: float | None = None


def optimization_step(state: OptimizerState, direction: TangentVector,
                      step: float = 1.0, max_halvings: int = 30,
                      quality_floor: float = 0.25) -> OptimizerState:
    """Move interface nodes along their normals and drag the mesh along.

    The nodal displacement is extended into the volume elastically before
    deforming the mesh. A step is halved and retried when it flips a
    triangle or squeezes the smallest triangle below `quality_floor` times
    its pre-step area; after `max_halvings` failures it is rejected. The
    budget is generous because early iterations far from the optimum can
    carry gradients much larger than any feasible mesh motion. Both guards
    are purely geometric (no objective evaluations, so not a line search);
    the quality floor keeps repeated steps from grinding the interface
    neighborhood into slivers, which would poison later gradients. The
    realized increment (after any halving) is stored on the state.
    """
    curve = state.curve
    values = step * direction.values
    disp = values[:, None] * curve.normals
    # Shear cap: bound the relative displacement of edge-adjacent interface
    # nodes by a fraction of the edge length. Smooth motions of any size
    # pass through; oscillatory components that would fold the interface
    # cells get damped.
    rel = np.hypot(*(np.roll(disp, -1, axis=0) - disp).T) / curve.edge_lengths
    shear = float(rel.max())
    if shear > _SHEAR_CAP:
        values = values * (_SHEAR_CAP / shear)
        disp = values[:, None] * curve.normals
        logger.info("step shear ratio %.3g capped at %.3g", shear, _SHEAR_CAP)
    u = extend_to_domain(state.mesh, curve.node_ids, disp)
    current = float(state.mesh.areas.min())
    anchor = state.reference_min_area
    # Anchored to the starting mesh, but never deadlocks a mesh that has
    # legitimately deformed past the anchor: then the guard is per-step.
    floor = quality_floor * (current if anchor is None else min(anchor, current))
    scale = 1.0
    new_mesh = None
    for _ in range(max_halvings + 1):
        try:
            candidate = apply_displacement(state.mesh, scale * u)
        except InvertedElementError as err:
            logger.warning("inverted triangle %d at step scale %.3g; halving",
                           err.triangle, scale)
            scale *= 0.5
            continue
        if float(candidate.areas.min()) < floor:
            logger.info("step scale %.3g squeezes min area below %.2e; halving",
                        scale, floor)
            scale *= 0.5
            continue
        new_mesh = candidate
        break
    if new_mesh is None:
        raise RuntimeError(
            f"step rejected: inverted elements persist after {max_halvings} halvings")
    return replace(state, mesh=new_mesh, curve=extract_interface(new_mesh),
                   last_increment=scale * values)


# ---------------------------------------------------------------------------
# Convergence metric


def shape_distance(curve: InterfaceCurve, target: InterfaceCurve) -> float:
    """Curve-L2 norm of the normal distance field from iterate to target.

    Every node of the iterate casts a ray along +/- its normal; the nearest
    intersection with any target segment (checked exhaustively) gives a
    signed distance sample attached to the target arclength where it lands.
    Nodes whose rays miss fall back to the nearest-point distance.
    """
    a = target.points
    b = np.roll(a, -1, axis=0)
    d = b - a
    s0 = target.arclengths
    samples = []
    for x, n in zip(curve.points, curve.normals):
        denom = n[0] * d[:, 1] - n[1] * d[:, 0]  # cross(n, d)
        ax = a - x
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ax[:, 0] * d[:, 1] - ax[:, 1] * d[:, 0]) / denom
            u = (ax[:, 0] * n[1] - ax[:, 1] * n[0]) / denom
        ok = (np.abs(denom) > 1e-14) & (u >= -1e-10) & (u <= 1.0 + 1e-10) & np.isfinite(t)
        if np.any(ok):
            idx = np.where(ok)[0]
            best = idx[np.argmin(np.abs(t[idx]))]
            dist = float(t[best])
            s_hit = float(s0[best] + np.clip(u[best], 0.0, 1.0)
                          * target.edge_lengths[best])
        else:
            dist, s_hit = _nearest_point_distance(x, a, b, target)
            logger.debug("normal ray missed the target; nearest-point fallback")
        samples.append((s_hit % target.perimeter, dist))
    samples.sort()
    s = np.array([p[0] for p in samples])
    vals = np.array([p[1] for p in samples])
    # Periodic trapezoid rule of dist^2 over the target arclength.
    ds = np.diff(np.append(s, s[0] + target.perimeter))
    sq = vals ** 2
    integral = float(np.sum(0.5 * ds * (sq + np.roll(sq, -1))))
    return float(np.sqrt(integral))


def _nearest_point_distance(x, a, b, target: InterfaceCurve):
    d = b - a
    lengths2 = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.einsum("ij,ij->i", x - a, d) / lengths2, 0.0, 1.0)
    proj = a + t[:, None] * d
    dist = np.hypot(*(proj - x).T)
    best = int(np.argmin(dist))
    # Signs follow the ray convention: target ahead of the outward normal
    # (iterate inside the target) counts positive.
    sign = 1.0 if _point_inside(x, target.points) else -1.0
    s_hit = target.arclengths[best] + t[best] * target.edge_lengths[best]
    return sign * float(dist[best]), float(s_hit)


def _point_inside(x, poly: np.ndarray) -> bool:
    crossings = 0
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        if (p[1] > x[1]) != (q[1] > x[1]):
            xi = p[0] + (x[1] - p[1]) / (q[1] - p[1]) * (q[0] - p[0])
            if xi > x[0]:
                crossings += 1
    return crossings % 2 == 1


# ---------------------------------------------------------------------------
# Driver


def initial_mesh(config: ExperimentConfig) -> TriangleMesh:
    center = (config.initial_center_x, config.initial_center_y)
    return generate_ogrid_mesh((config.initial_radius, center),
                               n_interface=config.n_interface,
                               refinement=config.refinement)


def run_optimizer(config: ExperimentConfig, observation: Observation,
                  callback=None) -> OptimizerState:
    """Full descent loop: solve, assemble the gradient, smooth, step.

    Iterates until the metric norm of the smoothed gradient drops below the
    configured tolerance or the iteration budget is exhausted. The history
    always contains one record per visited iterate, including partial runs.
    """
    mesh = initial_mesh(config)
    state = OptimizerState(0, mesh, extract_interface(mesh),
                           reference_min_area=float(mesh.areas.min()))
    memory = LbfgsMemory(config.memory, config.metric_a)
    use_lbfgs = config.optimizer == "lbfgs"
    prev_grad: np.ndarray | None = None
    started = time.perf_counter()

    for it in range(config.max_iters + 1):
        mesh, curve = state.mesh, state.curve
        k = cell_diffusivity(mesh, config.k1, config.k2)
        ybar = pde.interpolate_observation(observation.mesh, observation.field, mesh)
        if config.mode == "parabolic":
            y = pde.solve_state_parabolic(mesh, k, final_time=config.final_time,
                                          n_steps=config.n_steps)
            p = pde.solve_adjoint_parabolic(mesh, k, y, ybar)
        else:
            y = pde.solve_elliptic(mesh, k)
            p = pde.solve_adjoint_elliptic(mesh, k, y, ybar)
        total, misfit, per = pde.objective_parts(mesh, y, ybar, config.mu)
        gamma = sc.interface_gradient_density(mesh, curve, y, p, ybar,
                                              config.k1, config.k2, config.mu)
        grad = sc.sobolev_representation(curve, gamma, config.metric_a)
        grad_norm = sc.sobolev_norm(curve, grad, config.metric_a)
        distance = shape_distance(curve, observation.curve)
        state.iteration = it
        state.history.append(HistoryRecord(it, total, misfit, per, grad_norm,
                                           distance, time.perf_counter() - started))
        if callback is not None:
            callback(state)
        if use_lbfgs and prev_grad is not None and state.last_increment is not None:
            lbfgs_update(memory, TangentVector(curve, state.last_increment),
                         TangentVector(curve, grad.values - prev_grad))
        if grad_norm < config.grad_tol:
            logger.info("gradient norm %.3e below tolerance at iteration %d",
                        grad_norm, it)
            break
        if it == config.max_iters:
            break
        if use_lbfgs:
            q = lbfgs_direction(memory, grad, curve)
            direction = TangentVector(curve, -q.values)
        else:
            direction = TangentVector(curve, -grad.values)
        prev_grad = grad.values
        state = optimization_step(state, direction, step=config.step)
    return state
