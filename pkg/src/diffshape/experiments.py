"""End-to-end experiment drivers: synthetic data, noise studies, runs.

A run synthesizes the observation on the reference geometry, optionally
perturbs it with noise, optimizes the interface starting from the configured
initial circle, and writes a per-iteration history CSV, an echo of the
configuration, the final interface polyline and optional VTK snapshots.
"""

from __future__ import annotations

import logging
import time
from dataclasses import replace as dc_replace
from pathlib import Path

import numpy as np

from . import pde, riemannian_opt as ro, shape_calculus as sc, vtk_io
from .config import ExperimentConfig
from .mesh import TriangleMesh, cell_diffusivity, extract_interface, generate_ogrid_mesh
from .pde import Observation, TimeSeriesField

logger = logging.getLogger(__name__)

HISTORY_HEADER = "iter,J,misfit,perimeter,gradnorm,distance,seconds"


def synthesize_observation(config: ExperimentConfig) -> Observation:
    """Solve the forward problem on the reference interface geometry."""
    mesh = generate_ogrid_mesh(config.target_radius,
                               n_interface=config.n_interface,
                               refinement=config.refinement)
    curve = extract_interface(mesh)
    k = cell_diffusivity(mesh, config.k1, config.k2)
    if config.mode == "parabolic":
        field = pde.solve_state_parabolic(mesh, k, final_time=config.final_time,
                                          n_steps=config.n_steps)
    else:
        field = pde.solve_elliptic(mesh, k)
    return Observation(mesh, curve, field)


def add_noise(field, amplitude: float, seed: int, distribution: str = "uniform"):
    """Perturb a measurement by independent per-node, per-level noise.

    The noise amplitude is the given fraction of the maximum absolute value
    of the field. Uniform noise is bounded by that amplitude; gaussian noise
    uses it as the standard deviation.
    """
    if not 0.0 <= amplitude < 1.0:
        raise ValueError("amplitude must lie in [0, 1)")
    if amplitude == 0.0:
        return field
    values = field.data if isinstance(field, TimeSeriesField) else np.asarray(field)
    scale = amplitude * float(np.abs(values).max())
    rng = np.random.default_rng(seed)
    if distribution == "uniform":
        noise = rng.uniform(-scale, scale, size=values.shape)
    elif distribution == "gaussian":
        noise = rng.normal(0.0, scale, size=values.shape)
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    if isinstance(field, TimeSeriesField):
        return TimeSeriesField(field.mesh, field.final_time, values + noise)
    return values + noise


def write_history_csv(path, history):
    rows = [HISTORY_HEADER]
    for r in history:
        rows.append(f"{r.iteration},{r.objective:.12g},{r.misfit:.12g},"
                    f"{r.perimeter_term:.12g},{r.grad_norm:.12g},"
                    f"{r.distance:.12g},{r.seconds:.3f}")
    Path(path).write_text("\n".join(rows) + "\n")


def write_shape_csv(path, curve):
    rows = ["node,x,y"]
    rows.extend(f"{i},{p[0]:.12g},{p[1]:.12g}" for i, p in enumerate(curve.points))
    Path(path).write_text("\n".join(rows) + "\n")


def run_experiment(config: ExperimentConfig, out_dir=None,
                   snapshot_every: int = 0) -> int:
    """Full single run; returns a process-style exit status."""
    out = Path(out_dir if out_dir is not None else config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        config.write(out / "config_echo")
        observation = synthesize_observation(config)
        if config.noise > 0:
            observation = dc_replace(observation, field=add_noise(
                observation.field, config.noise, config.seed,
                config.noise_distribution))

        def snapshot(state):
            if snapshot_every > 0 and state.iteration % snapshot_every == 0:
                vtk_io.write_vtk_mesh(out / f"mesh_{state.iteration:04d}.vtk",
                                      state.mesh, config.k1, config.k2)

        state = ro.run_optimizer(config, observation, callback=snapshot)
        write_history_csv(out / "history.csv", state.history)
        write_shape_csv(out / "shape_final.csv", state.curve)
        vtk_io.write_vtk_mesh(out / "mesh_final.vtk", state.mesh,
                              config.k1, config.k2)
        logger.info("run finished after %d iterations, distance %.4e",
                    state.iteration, state.history[-1].distance)
        return 0
    except Exception:
        logger.exception("experiment failed")
        return 1


def max_pointwise_distance(curve_a, curve_b) -> float:
    """Largest node-to-polyline distance between two curves (symmetrized)."""

    def directed(c1, c2):
        a = c2.points
        b = np.roll(a, -1, axis=0)
        d = b - a
        len2 = np.einsum("ij,ij->i", d, d)
        worst = 0.0
        for x in c1.points:
            t = np.clip(np.einsum("j,ij->i", x, d) - np.einsum("ij,ij->i", a, d), 0.0,
                        len2) / len2
            proj = a + t[:, None] * d
            worst = max(worst, float(np.min(np.hypot(*(proj - x).T))))
        return worst

    return max(directed(curve_a, curve_b), directed(curve_b, curve_a))


def mean_diameter(curves) -> float:
    out = []
    for c in curves:
        p = c.points
        d2 = np.sum((p[:, None, :] - p[None, :, :]) ** 2, axis=-1)
        out.append(float(np.sqrt(d2.max())))
    return float(np.mean(out))


def run_noise_study(config: ExperimentConfig, n_runs: int, out_dir=None) -> dict:
    """Repeated optimization under fresh noise realizations.

    Each run gets seed + run index; converged shapes are written per run and
    the spread statistic is the maximum point-wise distance between any two
    converged interfaces relative to their mean diameter.
    """
    if n_runs < 2:
        raise ValueError("a noise study needs at least two runs")
    out = Path(out_dir if out_dir is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    clean = synthesize_observation(config)
    curves, seeds = [], []
    for run in range(n_runs):
        seed = config.seed + run
        obs = clean
        if config.noise > 0:
            obs = dc_replace(clean, field=add_noise(
                clean.field, config.noise, seed, config.noise_distribution))
        t0 = time.perf_counter()
        state = ro.run_optimizer(config, obs)
        logger.info("noise run %d/%d (seed %d): distance %.4e in %.1fs",
                    run + 1, n_runs, seed, state.history[-1].distance,
                    time.perf_counter() - t0)
        write_shape_csv(out / f"shape_run_{run:03d}.csv", state.curve)
        curves.append(state.curve)
        seeds.append(seed)

    spread = 0.0
    for i in range(n_runs):
        for j in range(i + 1, n_runs):
            spread = max(spread, max_pointwise_distance(curves[i], curves[j]))
    diameter = mean_diameter(curves)
    ratio = spread / diameter
    rows = ["run,seed,shape_file"]
    rows.extend(f"{i},{seeds[i]},shape_run_{i:03d}.csv" for i in range(n_runs))
    rows.append(f"# max_pointwise_spread={spread:.12g}")
    rows.append(f"# mean_diameter={diameter:.12g}")
    rows.append(f"# spread_ratio={ratio:.12g}")
    (out / "spread.csv").write_text("\n".join(rows) + "\n")
    logger.info("noise study: spread %.4e over mean diameter %.4f (%.3f%%)",
                spread, diameter, 100 * ratio)
    return {"spread": spread, "mean_diameter": diameter, "ratio": ratio,
            "seeds": seeds, "curves": curves}


# ---------------------------------------------------------------------------
# Derivative checks


def smoothstep_cutoff(points: np.ndarray, flat: float = 0.7,
                      zero: float = 0.95) -> np.ndarray:
    """C2 bump: 1 on the centered square of half-width `flat`, 0 beyond `zero`."""

    def ramp(t):
        t = np.clip((zero - np.abs(t)) / (zero - flat), 0.0, 1.0)
        return t * t * t * (t * (6.0 * t - 15.0) + 10.0)

    return ramp(points[:, 0]) * ramp(points[:, 1])


def smooth_test_field(mesh: TriangleMesh, seed: int) -> np.ndarray:
    """Random low-frequency vector field vanishing near the outer boundary."""
    rng = np.random.default_rng(seed)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    basis = np.column_stack([
        np.ones_like(x), x, y,
        np.sin(np.pi * x), np.cos(np.pi * y),
        np.sin(np.pi * x) * np.cos(np.pi * y),
    ])
    field = basis @ rng.normal(size=(basis.shape[1], 2))
    field *= smoothstep_cutoff(mesh.nodes)[:, None]
    peak = float(np.abs(field).max())
    return field / peak if peak > 0 else field


def objective_on_mesh(config: ExperimentConfig, observation: Observation,
                      mesh: TriangleMesh, rel_tol: float = 1e-12) -> float:
    """Objective of a given interface geometry under the stored observation."""
    k = cell_diffusivity(mesh, config.k1, config.k2)
    ybar = pde.interpolate_observation(observation.mesh, observation.field, mesh)
    if config.mode == "parabolic":
        y = pde.solve_state_parabolic(mesh, k, final_time=config.final_time,
                                      n_steps=config.n_steps, rel_tol=rel_tol)
    else:
        y = pde.solve_elliptic(mesh, k, rel_tol=rel_tol)
    return pde.evaluate_objective(mesh, y, ybar, config.mu)


def gradient_check(config: ExperimentConfig, observation: Observation | None = None,
                   n_fields: int = 5, eps=(1e-2, 5e-3, 2.5e-3),
                   seed: int = 7, rel_tol: float = 1e-12) -> list[dict]:
    """Compare the interface gradient against central finite differences.

    For each random smooth deformation field the predicted derivative is the
    interface density paired with the field's normal component; the reference
    values displace the whole mesh by +/- eps times the field and re-solve.
    Returns one record per field with the prediction, the difference
    quotients and their relative errors.
    """
    from .mesh import apply_displacement

    if observation is None:
        observation = synthesize_observation(config)
    mesh = ro.initial_mesh(config)
    curve = extract_interface(mesh)
    k = cell_diffusivity(mesh, config.k1, config.k2)
    ybar = pde.interpolate_observation(observation.mesh, observation.field, mesh)
    if config.mode == "parabolic":
        y = pde.solve_state_parabolic(mesh, k, final_time=config.final_time,
                                      n_steps=config.n_steps, rel_tol=rel_tol)
        p = pde.solve_adjoint_parabolic(mesh, k, y, ybar, rel_tol=rel_tol)
    else:
        y = pde.solve_elliptic(mesh, k, rel_tol=rel_tol)
        p = pde.solve_adjoint_elliptic(mesh, k, y, ybar, rel_tol=rel_tol)
    gamma = sc.interface_gradient_density(mesh, curve, y, p, ybar,
                                          config.k1, config.k2, config.mu)
    results = []
    for i in range(n_fields):
        v = smooth_test_field(mesh, seed + i)
        predicted = sc.density_pairing(curve, gamma, v)
        quotients = []
        for e in eps:
            plus = objective_on_mesh(config, observation,
                                     apply_displacement(mesh, e * v), rel_tol)
            minus = objective_on_mesh(config, observation,
                                      apply_displacement(mesh, -e * v), rel_tol)
            quotients.append((plus - minus) / (2.0 * e))
        errors = [abs(q - predicted) / abs(predicted) for q in quotients]
        results.append({"field": i, "predicted": predicted,
                        "quotients": quotients, "errors": errors, "eps": list(eps)})
        logger.info("field %d: predicted %.6e, fd %s, rel err %s", i, predicted,
                    [f"{q:.6e}" for q in quotients], [f"{e:.2%}" for e in errors])
    return results
