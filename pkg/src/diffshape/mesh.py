"""Triangulations of the square [-1,1]^2 with an embedded closed interface.

A mesh splits the square into an interior region (subdomain 2) bounded by a
simple closed polyline and the surrounding exterior (subdomain 1). Meshes are
built as structured O-grids: rings of quads (each split into two triangles)
following the interface inward to its centroid and outward to the square
boundary. During optimization only node positions move; connectivity, labels
and tags are fixed, so no remeshing is ever needed.

Mesh objects are immutable snapshots: every array is marked read-only and
deformation returns a new mesh sharing the connectivity arrays.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Outer-boundary side tags.
TOP, BOTTOM, LEFT, RIGHT = "top", "bottom", "left", "right"

_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


class MeshError(Exception):
    """Invalid mesh topology or geometry."""


class InvertedElementError(MeshError):
    """A deformation produced a non-positive triangle area.

    Carries the index of the first offending triangle so callers can react
    (typically by shrinking the step that produced the displacement).
    """

    def __init__(self, triangle: int, area: float):
        super().__init__(f"triangle {triangle} inverted (signed area {area:.3e})")
        self.triangle = int(triangle)
        self.area = float(area)


class PointLocationError(MeshError):
    """A query point lies outside every triangle of the mesh."""


def cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """z-component of the cross product of 2D vectors (broadcasts)."""
    a = np.asarray(a)
    b = np.asarray(b)
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def signed_areas(nodes: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Signed area of each triangle (positive for counter-clockwise)."""
    a = nodes[triangles[:, 0]]
    b = nodes[triangles[:, 1]]
    c = nodes[triangles[:, 2]]
    return 0.5 * cross2(b - a, c - a)


@dataclass
class TriangleMesh:
    """Conforming triangulation of [-1,1]^2 with one interior interface loop.

    Attributes:
        nodes: (N, 2) coordinates.
        triangles: (T, 3) node indices, counter-clockwise.
        subdomain: (T,) labels, 1 = exterior, 2 = interior.
        boundary_edges: (B, 2) node pairs on the outer square.
        boundary_tags: (B,) side tag per boundary edge.
        interface_edges: (I, 2) oriented node pairs; the interior subdomain
            lies on the left of the traversal a -> b.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    subdomain: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    interface_edges: np.ndarray
    _locator: "_BucketGrid | None" = field(default=None, repr=False, compare=False)
    _iface_tris: "tuple[np.ndarray, np.ndarray] | None" = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int32)
        self.subdomain = np.ascontiguousarray(self.subdomain, dtype=np.int32)
        self.boundary_edges = np.ascontiguousarray(self.boundary_edges, dtype=np.int32)
        self.boundary_tags = np.asarray(self.boundary_tags)
        self.interface_edges = np.ascontiguousarray(self.interface_edges, dtype=np.int32)
        areas = signed_areas(self.nodes, self.triangles)
        worst = int(np.argmin(areas))
        if areas[worst] <= 0.0:
            raise InvertedElementError(worst, areas[worst])
        self.areas = areas
        for arr in (self.nodes, self.triangles, self.subdomain,
                    self.boundary_edges, self.boundary_tags,
                    self.interface_edges, self.areas):
            arr.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def boundary_nodes(self, tag: str | None = None) -> np.ndarray:
        """Sorted node indices on the outer boundary, optionally one side only."""
        if tag is None:
            edges = self.boundary_edges
        else:
            edges = self.boundary_edges[self.boundary_tags == tag]
        return np.unique(edges)

    def interface_nodes(self) -> np.ndarray:
        return np.unique(self.interface_edges)

    def interface_triangles(self) -> tuple[np.ndarray, np.ndarray]:
        """Adjacent triangle on each side of every interface edge.

        Returns (exterior, interior): for interface edge i, ``exterior[i]`` is
        the subdomain-1 triangle and ``interior[i]`` the subdomain-2 triangle.
        """
        if self._iface_tris is None:
            self._iface_tris = _interface_adjacency(self)
        return self._iface_tris

    def locate(self, point) -> tuple[int, np.ndarray]:
        """Triangle index and barycentric coordinates of a point."""
        return locate_point(self, point)


def _interface_adjacency(mesh: TriangleMesh) -> tuple[np.ndarray, np.ndarray]:
    iface_nodes = set(mesh.interface_nodes().tolist())
    edge_to_tris: dict[tuple[int, int], list[int]] = {}
    tris = mesh.triangles
    for t in np.nonzero(np.isin(tris, list(iface_nodes)).any(axis=1))[0]:
        i, j, k = (int(v) for v in tris[t])
        for a, b in ((i, j), (j, k), (k, i)):
            if a in iface_nodes and b in iface_nodes:
                edge_to_tris.setdefault((min(a, b), max(a, b)), []).append(int(t))
    exterior = np.empty(len(mesh.interface_edges), dtype=np.int32)
    interior = np.empty(len(mesh.interface_edges), dtype=np.int32)
    for e, (a, b) in enumerate(mesh.interface_edges):
        adj = edge_to_tris.get((min(a, b), max(a, b)), [])
        adj = [t for t in adj if _has_edge(tris[t], a, b)]
        labels = sorted(adj, key=lambda t: mesh.subdomain[t])
        if len(labels) != 2 or {int(mesh.subdomain[t]) for t in labels} != {1, 2}:
            raise MeshError(f"interface edge {e} not shared by both subdomains")
        exterior[e], interior[e] = labels[0], labels[1]
    return exterior, interior


def _has_edge(tri, a: int, b: int) -> bool:
    s = set(int(v) for v in tri)
    return a in s and b in s


@dataclass
class InterfaceCurve:
    """Closed interface polyline in traversal order.

    ``node_ids[i]`` is the mesh node of vertex i; edge i joins vertex i to
    vertex i+1 (cyclically). Normals point out of the interior subdomain and
    are the renormalized bisectors of the two adjacent edge normals. The
    lumped weight of a vertex is half the length of its two incident edges,
    so the weights sum to the perimeter.
    """

    node_ids: np.ndarray
    points: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    edge_lengths: np.ndarray

    def __len__(self) -> int:
        return len(self.node_ids)

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())

    @property
    def arclengths(self) -> np.ndarray:
        """Arclength position of each vertex (vertex 0 at 0)."""
        s = np.zeros(len(self.node_ids))
        s[1:] = np.cumsum(self.edge_lengths[:-1])
        return s

    def same_curve(self, other: "InterfaceCurve") -> bool:
        return len(self) == len(other) and np.array_equal(self.node_ids, other.node_ids)


def extract_interface(mesh: TriangleMesh) -> InterfaceCurve:
    """Order the interface edges into a single closed loop with normals.

    Raises MeshError if the interface edges do not form exactly one simple
    closed loop (multiple interface components are out of scope).
    """
    edges = mesh.interface_edges
    succ = {}
    for a, b in edges:
        a, b = int(a), int(b)
        if a in succ:
            raise MeshError("interface edges branch; not a simple loop")
        succ[a] = b
    start = int(edges[0, 0])
    order = [start]
    node = succ[start]
    while node != start:
        order.append(node)
        if len(order) > len(edges) or node not in succ:
            raise MeshError("interface edges do not close into a loop")
        node = succ[node]
    if len(order) != len(edges):
        raise MeshError("more than one interface loop")
    ids = np.array(order, dtype=np.int32)
    pts = mesh.nodes[ids]
    return _curve_from_points(ids, pts)


def _curve_from_points(ids: np.ndarray, pts: np.ndarray) -> InterfaceCurve:
    vec = np.roll(pts, -1, axis=0) - pts
    lengths = np.hypot(vec[:, 0], vec[:, 1])
    if np.any(lengths <= 0):
        raise MeshError("degenerate interface edge of zero length")
    tang = vec / lengths[:, None]
    # Outward normal of the oriented edge: interior on the left => rotate -90deg.
    edge_n = np.column_stack([tang[:, 1], -tang[:, 0]])
    nodal = edge_n + np.roll(edge_n, 1, axis=0)
    norms = np.hypot(nodal[:, 0], nodal[:, 1])
    if np.any(norms < 1e-12):
        raise MeshError("interface turns back on itself; nodal normal undefined")
    normals = nodal / norms[:, None]
    weights = 0.5 * (lengths + np.roll(lengths, 1))
    return InterfaceCurve(ids, pts.copy(), normals, weights, lengths)


def apply_displacement(mesh: TriangleMesh, u: np.ndarray) -> TriangleMesh:
    """Move mesh nodes by a displacement field that is zero on the outer boundary.

    Connectivity, subdomain labels and tags are shared with the input mesh.
    Raises InvertedElementError if the deformation flips any triangle.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != mesh.nodes.shape:
        raise ValueError(f"displacement shape {u.shape} != nodes {mesh.nodes.shape}")
    bnd = mesh.boundary_nodes()
    worst = float(np.abs(u[bnd]).max()) if len(bnd) else 0.0
    if worst > 1e-12:
        raise ValueError(f"displacement must vanish on the outer boundary (max {worst:.2e})")
    return replace(mesh, nodes=mesh.nodes + u, _locator=None, _iface_tris=mesh._iface_tris)


# ---------------------------------------------------------------------------
# O-grid generation


def generate_ogrid_mesh(interface, n_interface: int = 64,
                        refinement: int = 3) -> TriangleMesh:
    """Structured O-grid mesh of [-1,1]^2 conforming to a closed interface.

    Args:
        interface: either a circle radius (float), a ``(radius, (cx, cy))``
            pair, or an explicit (m, 2) polygon in counter-clockwise order.
            The polygon must be simple, star-shaped about its vertex centroid
            and strictly inside the square.
        n_interface: number of interface vertices when a circle is requested
            (>= 8). Ignored for an explicit polygon.
        refinement: ring-count level; the total number of quad rings is
            ``3 * 4**(refinement - 1)``, so each level multiplies the
            triangle count by four.

    The interface vertices coincide with the polygon vertices; the triangle
    count is ``n * (2 * rings - 1)`` for an n-vertex interface.
    """
    if refinement < 1:
        raise ValueError("refinement must be >= 1")
    poly = _interface_polygon(interface, n_interface)
    n = len(poly)
    _check_polygon(poly)

    centroid = poly.mean(axis=0)
    rays = poly - centroid
    angles = np.arctan2(rays[:, 1], rays[:, 0])
    if not _cyclically_increasing(angles):
        raise MeshError("interface polygon is not star-shaped about its centroid")

    hits, sides = _square_hits(centroid, rays)
    boundary = _boundary_ring(hits, sides, centroid, angles)

    rings_total = 3 * 4 ** (refinement - 1)
    d_in = float(np.hypot(*rays.T).mean())
    d_out = float(np.hypot(*(boundary - poly).T).mean())
    r_in = int(round(rings_total * d_in / (d_in + d_out)))
    r_in = min(max(r_in, 1), rings_total - 1)
    r_out = rings_total - r_in

    # Node layout: interface ring, then inner rings shrinking to the centroid,
    # the centroid itself, then outer rings blending to the square boundary.
    # Outer rings interpolate angle and radius about the centroid separately,
    # which spreads any angular mismatch between an interface vertex and its
    # boundary node evenly over the rings instead of shearing the first band.
    rings = [poly]
    for k in range(1, r_in):
        s = 1.0 - k / r_in
        rings.append(centroid + s * rays)
    nodes = [np.vstack(rings), centroid[None, :]]
    center_idx = r_in * n
    b_vec = boundary - centroid
    phi_b = np.arctan2(b_vec[:, 1], b_vec[:, 0])
    dphi = (phi_b - angles + np.pi) % (2.0 * np.pi) - np.pi
    r_p = np.hypot(rays[:, 0], rays[:, 1])
    r_b = np.hypot(b_vec[:, 0], b_vec[:, 1])
    for k in range(1, r_out):
        t = k / r_out
        theta = angles + t * dphi
        radius = (1.0 - t) * r_p + t * r_b
        nodes.append(centroid + radius[:, None]
                     * np.column_stack([np.cos(theta), np.sin(theta)]))
    nodes.append(boundary)  # exact corner coordinates, no trig round-off
    nodes = np.vstack(nodes)

    tris: list[tuple[int, int, int]] = []
    labels: list[int] = []

    def band_inward(b0: int, b1: int, label: int):
        for i in range(n):
            j = (i + 1) % n
            tris.append((b0 + i, b0 + j, b1 + j))
            tris.append((b0 + i, b1 + j, b1 + i))
            labels.extend((label, label))

    def band_outward(b0: int, b1: int, label: int):
        for i in range(n):
            j = (i + 1) % n
            tris.append((b0 + i, b1 + i, b1 + j))
            tris.append((b0 + i, b1 + j, b0 + j))
            labels.extend((label, label))

    for k in range(r_in - 1):
        band_inward(k * n, (k + 1) * n, 2)
    innermost = (r_in - 1) * n
    for i in range(n):
        j = (i + 1) % n
        tris.append((innermost + i, innermost + j, center_idx))
        labels.append(2)
    outer_start = center_idx + 1
    band_outward(0, outer_start, 1)
    for k in range(r_out - 1):
        band_outward(outer_start + k * n, outer_start + (k + 1) * n, 1)

    triangles = np.array(tris, dtype=np.int32)

    last_ring = outer_start + (r_out - 1) * n
    boundary_edges = np.array(
        [(last_ring + i, last_ring + (i + 1) % n) for i in range(n)], dtype=np.int32
    )
    boundary_tags = _tag_boundary_edges(nodes, boundary_edges)
    interface_edges = np.array([(i, (i + 1) % n) for i in range(n)], dtype=np.int32)

    mesh = TriangleMesh(nodes, triangles, np.array(labels, dtype=np.int32),
                        boundary_edges, boundary_tags, interface_edges)
    validate_mesh(mesh)
    return mesh


def _interface_polygon(interface, n_interface: int) -> np.ndarray:
    if isinstance(interface, (int, float)):
        return _circle_polygon(float(interface), (0.0, 0.0), n_interface)
    if isinstance(interface, tuple) and len(interface) == 2 and np.isscalar(interface[0]):
        radius, center = interface
        return _circle_polygon(float(radius), center, n_interface)
    poly = np.asarray(interface, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
        raise ValueError("polygon must be an (m, 2) array with m >= 3")
    if _polygon_area(poly) < 0:
        poly = poly[::-1].copy()
    return poly


def _circle_polygon(radius: float, center, n: int) -> np.ndarray:
    if n < 8:
        raise ValueError("n_interface must be >= 8 for a circular interface")
    if radius <= 0:
        raise ValueError("circle radius must be positive")
    theta = 2.0 * np.pi * np.arange(n) / n
    return np.asarray(center, dtype=float) + radius * np.column_stack(
        [np.cos(theta), np.sin(theta)]
    )


def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _check_polygon(poly: np.ndarray):
    if np.abs(poly).max() >= 1.0:
        raise MeshError("interface polygon must lie strictly inside (-1,1)^2")
    if _self_intersects(poly):
        raise MeshError("interface polygon is self-intersecting")


def _self_intersects(poly: np.ndarray) -> bool:
    n = len(poly)
    a = poly
    b = np.roll(poly, -1, axis=0)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue  # shared endpoint
            if _segments_cross(a[i], b[i], a[j], b[j]):
                return True
    return False


def _segments_cross(p1, p2, q1, q2) -> bool:
    d1 = cross2(p2 - p1, q1 - p1)
    d2 = cross2(p2 - p1, q2 - p1)
    d3 = cross2(q2 - q1, p1 - q1)
    d4 = cross2(q2 - q1, p2 - q1)
    return bool((d1 * d2 < 0) and (d3 * d4 < 0))


def _cyclically_increasing(angles: np.ndarray) -> bool:
    d = np.diff(np.unwrap(np.append(angles, angles[0])))
    return bool(np.all(d > 0) or np.all(d < 0))


def _square_hits(origin: np.ndarray, rays: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First intersection of each ray from `origin` with the unit square."""
    hits = np.empty_like(rays)
    sides = np.empty(len(rays), dtype=np.int64)
    for i, d in enumerate(rays):
        best_t, best_side = np.inf, -1
        for axis, sign, side in ((0, 1.0, 1), (0, -1.0, 3), (1, 1.0, 2), (1, -1.0, 0)):
            if abs(d[axis]) < 1e-15:
                continue
            t = (sign - origin[axis]) / d[axis]
            if t <= 0 or t >= best_t:
                continue
            other = origin[1 - axis] + t * d[1 - axis]
            if abs(other) <= 1.0 + 1e-12:
                best_t, best_side = t, side
        if best_side < 0:
            raise MeshError("interface centroid ray misses the square boundary")
        hits[i] = origin + best_t * d
        sides[i] = best_side
    return hits, sides


def _boundary_ring(hits: np.ndarray, sides: np.ndarray, centroid: np.ndarray,
                   interface_angles: np.ndarray) -> np.ndarray:
    """Place one boundary node per interface vertex, corners included.

    Side s (0=bottom, 1=right, 2=top, 3=left, counter-clockwise) receives as
    many nodes as it has ray hits: its starting corner plus uniformly spaced
    interior points. The ring is then rotated so that node i is angularly
    close to the ray hit of interface vertex i.
    """
    n = len(hits)
    counts = np.bincount(sides, minlength=4)
    while np.any(counts == 0):
        counts[np.argmin(counts)] += 1
        counts[np.argmax(counts)] -= 1
    ring = []
    for s in range(4):
        c0, c1 = _CORNERS[s], _CORNERS[(s + 1) % 4]
        for j in range(counts[s]):
            ring.append(c0 + (j / counts[s]) * (c1 - c0))
    ring = np.asarray(ring)
    ring_angles = np.arctan2(*(ring - centroid).T[::-1])
    shift = _best_shift(ring_angles, interface_angles)
    return np.roll(ring, -shift, axis=0)


def _best_shift(ring_angles: np.ndarray, target_angles: np.ndarray) -> int:
    n = len(ring_angles)
    best, best_cost = 0, np.inf
    for o in range(n):
        d = ring_angles[(np.arange(n) + o) % n] - target_angles
        cost = np.abs((d + np.pi) % (2 * np.pi) - np.pi).sum()
        if cost < best_cost:
            best, best_cost = o, cost
    return best


def _tag_boundary_edges(nodes: np.ndarray, edges: np.ndarray) -> np.ndarray:
    mid = 0.5 * (nodes[edges[:, 0]] + nodes[edges[:, 1]])
    tags = np.empty(len(edges), dtype="<U6")
    tol = 1e-12
    tags[np.abs(mid[:, 1] - 1.0) < tol] = TOP
    tags[np.abs(mid[:, 1] + 1.0) < tol] = BOTTOM
    tags[np.abs(mid[:, 0] + 1.0) < tol] = LEFT
    tags[np.abs(mid[:, 0] - 1.0) < tol] = RIGHT
    if np.any(tags == ""):
        raise MeshError("boundary edge not on a side of the square")
    return tags


# ---------------------------------------------------------------------------
# Validation and point location


def validate_mesh(mesh: TriangleMesh):
    """Check all structural invariants; raises MeshError on violation."""
    if mesh.areas.min() <= 0:
        raise MeshError("non-positive triangle area")
    if abs(mesh.areas.sum() - 4.0) > 1e-9 * 4.0:
        raise MeshError(f"triangle areas sum to {mesh.areas.sum()!r}, expected 4")
    if not np.all(np.isin(mesh.subdomain, (1, 2))):
        raise MeshError("subdomain labels must be 1 or 2")

    # Every interface edge is shared by one triangle of each subdomain, and
    # the interior triangle traverses it in the stored orientation.
    exterior, interior = mesh.interface_triangles()
    for e, (a, b) in enumerate(mesh.interface_edges):
        tri = mesh.triangles[interior[e]]
        order = [int(v) for v in tri]
        k = order.index(int(a))
        if order[(k + 1) % 3] != int(b):
            raise MeshError(f"interface edge {e} oriented with interior on the right")

    extract_interface(mesh)  # raises unless a single simple loop

    # Boundary edges are exactly the edges with a single adjacent triangle.
    count: dict[tuple[int, int], int] = {}
    for tri in mesh.triangles:
        i, j, k = (int(v) for v in tri)
        for a, b in ((i, j), (j, k), (k, i)):
            key = (min(a, b), max(a, b))
            count[key] = count.get(key, 0) + 1
    lonely = {k for k, v in count.items() if v == 1}
    tagged = {(min(int(a), int(b)), max(int(a), int(b))) for a, b in mesh.boundary_edges}
    if lonely != tagged:
        raise MeshError("boundary-edge tags do not cover the outer boundary")


class _BucketGrid:
    """Uniform background grid over [-1,1]^2 for point-in-triangle queries."""

    def __init__(self, mesh: TriangleMesh):
        t = mesh.triangles
        p = mesh.nodes[t]  # (T, 3, 2)
        self.resolution = max(8, int(math.sqrt(mesh.n_triangles)))
        lo = ((p.min(axis=1) + 1.0) / 2.0 * self.resolution).astype(int)
        hi = ((p.max(axis=1) + 1.0) / 2.0 * self.resolution).astype(int)
        np.clip(lo, 0, self.resolution - 1, out=lo)
        np.clip(hi, 0, self.resolution - 1, out=hi)
        buckets: dict[tuple[int, int], list[int]] = {}
        for tri in range(mesh.n_triangles):
            for ix in range(lo[tri, 0], hi[tri, 0] + 1):
                for iy in range(lo[tri, 1], hi[tri, 1] + 1):
                    buckets.setdefault((ix, iy), []).append(tri)
        self.buckets = buckets

    def candidates(self, point) -> Sequence[int]:
        ix = min(max(int((point[0] + 1.0) / 2.0 * self.resolution), 0), self.resolution - 1)
        iy = min(max(int((point[1] + 1.0) / 2.0 * self.resolution), 0), self.resolution - 1)
        return self.buckets.get((ix, iy), ())


_BARY_TOL = 1e-10


def barycentric(mesh: TriangleMesh, tri: int, point) -> np.ndarray:
    """Barycentric coordinates of a point in a triangle (sum to one exactly)."""
    a, b, c = mesh.nodes[mesh.triangles[tri]]
    v0, v1 = b - a, c - a
    v2 = np.asarray(point, dtype=float) - a
    det = v0[0] * v1[1] - v0[1] * v1[0]
    l1 = (v2[0] * v1[1] - v2[1] * v1[0]) / det
    l2 = (v0[0] * v2[1] - v0[1] * v2[0]) / det
    return np.array([1.0 - l1 - l2, l1, l2])


def locate_point(mesh: TriangleMesh, point) -> tuple[int, np.ndarray]:
    """Find the triangle containing a point of [-1,1]^2.

    Uses a bucket grid over triangle bounding boxes, so the containing
    triangle is always among the candidates of the point's bucket.
    """
    point = np.asarray(point, dtype=float)
    if mesh._locator is None:
        object.__setattr__(mesh, "_locator", _BucketGrid(mesh))
    best: tuple[int, np.ndarray] | None = None
    best_violation = np.inf
    for tri in mesh._locator.candidates(point):
        lam = barycentric(mesh, tri, point)
        violation = float(-lam.min())
        if violation <= _BARY_TOL:
            return tri, lam
        if violation < best_violation:
            best, best_violation = (tri, lam), violation
    if best is not None and best_violation <= 1e-8:
        # Grazing a bucket boundary; accept the nearest triangle.
        logger.debug("point %s accepted with barycentric slack %.2e", point, best_violation)
        return best
    raise PointLocationError(f"point {point} not inside any triangle")


def locate_points(mesh: TriangleMesh, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized wrapper around locate_point for an (n, 2) array."""
    tris = np.empty(len(points), dtype=np.int32)
    bary = np.empty((len(points), 3))
    for i, p in enumerate(points):
        tris[i], bary[i] = locate_point(mesh, p)
    return tris, bary


def cell_diffusivity(mesh: TriangleMesh, k1: float, k2: float) -> np.ndarray:
    """Per-triangle diffusivity, constant on each subdomain."""
    if k1 <= 0 or k2 <= 0:
        raise ValueError("diffusivities must be positive")
    return np.where(mesh.subdomain == 1, float(k1), float(k2))
