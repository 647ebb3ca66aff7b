"""Legacy ASCII VTK export/import for triangle meshes and fields.

Meshes are written as UNSTRUCTURED_GRID datasets with `subdomain` and `k`
cell data; arbitrary nodal scalar or 2-vector fields ride along as point
data. The reader accepts the same dialect restricted to triangle cells and
rebuilds boundary tags and oriented interface edges from the geometry and
subdomain labels.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .mesh import TriangleMesh, cell_diffusivity, validate_mesh
from .pde import TimeSeriesField

_VTK_TRIANGLE = 5


def write_vtk_mesh(path, mesh: TriangleMesh, k1: float | None = None,
                   k2: float | None = None, point_data: dict | None = None,
                   title: str = "diffshape mesh"):
    """Write mesh plus subdomain labels (and diffusivity, if given) to VTK."""
    lines = ["# vtk DataFile Version 3.0", title, "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_nodes} double"]
    lines.extend(f"{x:.16g} {y:.16g} 0" for x, y in mesh.nodes)
    lines.append(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    lines.extend(f"3 {i} {j} {k}" for i, j, k in mesh.triangles)
    lines.append(f"CELL_TYPES {mesh.n_triangles}")
    lines.extend([str(_VTK_TRIANGLE)] * mesh.n_triangles)
    lines.append(f"CELL_DATA {mesh.n_triangles}")
    lines.append("SCALARS subdomain int 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(str(int(s)) for s in mesh.subdomain)
    if k1 is not None and k2 is not None:
        lines.append("SCALARS k double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.16g}" for v in cell_diffusivity(mesh, k1, k2))
    if point_data:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        for name, values in point_data.items():
            values = np.asarray(values)
            if values.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(f"{v:.16g}" for v in values)
            else:
                lines.append(f"VECTORS {name} double")
                lines.extend(f"{v[0]:.16g} {v[1]:.16g} 0" for v in values)
    Path(path).write_text("\n".join(lines) + "\n")


def read_vtk_mesh(path) -> TriangleMesh:
    """Read a triangle-only legacy VTK file written by this package (or a
    compatible one carrying `subdomain` cell data)."""
    tokens = Path(path).read_text().split()
    pos = 0

    def expect(word):
        nonlocal pos
        while tokens[pos].upper() != word:
            pos += 1
        pos += 1

    expect("POINTS")
    n_points = int(tokens[pos]); pos += 2  # skip dtype
    coords = np.array(tokens[pos:pos + 3 * n_points], dtype=float).reshape(-1, 3)
    pos += 3 * n_points
    expect("CELLS")
    n_cells = int(tokens[pos]); total = int(tokens[pos + 1]); pos += 2
    raw = np.array(tokens[pos:pos + total], dtype=np.int64)
    pos += total
    expect("CELL_TYPES")
    pos += 1
    types = np.array(tokens[pos:pos + n_cells], dtype=int)
    pos += n_cells
    if np.any(types != _VTK_TRIANGLE):
        raise ValueError("only triangle cells are supported")
    cells = raw.reshape(n_cells, 4)
    if np.any(cells[:, 0] != 3):
        raise ValueError("malformed triangle connectivity")
    triangles = cells[:, 1:]

    expect("CELL_DATA")
    pos += 1
    expect("SCALARS")
    if tokens[pos] != "subdomain":
        raise ValueError("expected `subdomain` cell data")
    pos += 3  # name dtype ncomp
    expect("LOOKUP_TABLE")
    pos += 1
    subdomain = np.array(tokens[pos:pos + n_cells], dtype=int)

    return mesh_from_arrays(coords[:, :2], triangles, subdomain)


def mesh_from_arrays(nodes: np.ndarray, triangles: np.ndarray,
                     subdomain: np.ndarray) -> TriangleMesh:
    """Rebuild tags and oriented interface edges from raw arrays."""
    edge_tris: dict[tuple[int, int], list[int]] = {}
    for t, tri in enumerate(triangles):
        i, j, k = (int(v) for v in tri)
        for a, b in ((i, j), (j, k), (k, i)):
            edge_tris.setdefault((min(a, b), max(a, b)), []).append(t)

    boundary, interface = [], []
    for (a, b), adj in edge_tris.items():
        if len(adj) == 1:
            boundary.append((a, b))
        elif len(adj) == 2 and subdomain[adj[0]] != subdomain[adj[1]]:
            interior = adj[0] if subdomain[adj[0]] == 2 else adj[1]
            order = [int(v) for v in triangles[interior]]
            k = order.index(a)
            # Use the edge direction as traversed by the interior triangle so
            # the interior subdomain sits on the left.
            interface.append((a, b) if order[(k + 1) % 3] == b else (b, a))

    boundary = np.asarray(boundary, dtype=np.int32)
    mid = 0.5 * (nodes[boundary[:, 0]] + nodes[boundary[:, 1]])
    tags = np.empty(len(boundary), dtype="<U6")
    tol = 1e-9
    tags[np.abs(mid[:, 1] - 1.0) < tol] = "top"
    tags[np.abs(mid[:, 1] + 1.0) < tol] = "bottom"
    tags[np.abs(mid[:, 0] + 1.0) < tol] = "left"
    tags[np.abs(mid[:, 0] - 1.0) < tol] = "right"
    if np.any(tags == ""):
        raise ValueError("boundary edge midpoint not on a side of the square")

    mesh = TriangleMesh(nodes, triangles, subdomain, boundary, tags,
                        np.asarray(interface, dtype=np.int32))
    validate_mesh(mesh)
    return mesh


def write_time_series(out_dir, basename: str, mesh: TriangleMesh,
                      ts: TimeSeriesField, levels=None, k1=None, k2=None):
    """One VTK file per selected level plus a manifest CSV (level, time, file)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if levels is None:
        levels = range(ts.n_steps + 1)
    manifest = out_dir / f"{basename}_manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "time", "file"])
        for level in levels:
            name = f"{basename}_{level:04d}.vtk"
            write_vtk_mesh(out_dir / name, mesh, k1, k2,
                           point_data={"y": ts[level]})
            writer.writerow([level, f"{level * ts.dt:.12g}", name])
    return manifest
