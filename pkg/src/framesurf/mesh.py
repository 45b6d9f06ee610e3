"""Curved triangular meshes of the sphere and of a tri-axial ellipsoid.

Vertices are placed exactly on the target surface.  Each element carries a
frozen set of degree-q geometry nodes: edge nodes sample the exact surface,
interior nodes come from a transfinite blend of the three edge curves, so
they sit slightly off the surface.  Solution nodes of any degree p are images
of the reference nodes under this fixed degree-q map, which is what produces
the geometric approximation error studied in this package.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import sqrt

import numpy as np

from .refelem import (EDGE_VERTICES, VERTICES, barycentric, build_reference_element,
                      edge_points, gauss_lobatto, grad_vandermonde, vandermonde,
                      warp_blend_nodes)


class MeshFormatError(ValueError):
    """Malformed mesh file; carries the offending line number."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class UnsupportedSurfaceError(ValueError):
    pass


def icosahedron():
    t = (1.0 + sqrt(5.0)) / 2.0
    verts = np.array([(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
                      (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
                      (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)], dtype=float)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = np.array([(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
                      (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
                      (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
                      (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)])
    return verts, faces


def subdivide(verts, faces):
    """Split every triangle into four, projecting new vertices to the unit sphere."""
    verts = [tuple(v) for v in verts]
    midpoint = {}

    def mid(a, b):
        key = (min(a, b), max(a, b))
        if key not in midpoint:
            m = np.add(verts[key[0]], verts[key[1]])
            m /= np.linalg.norm(m)
            midpoint[key] = len(verts)
            verts.append(tuple(m))
        return midpoint[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.array(verts), np.array(new_faces)


def _orient_outward(verts, faces):
    faces = faces.copy()
    v0, v1, v2 = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    flip = np.einsum("ij,ij->i", np.cross(v1 - v0, v2 - v0), v0 + v1 + v2) < 0
    faces[flip] = faces[flip][:, [0, 2, 1]]
    return faces


def build_adjacency(elements):
    """(neighbor element, neighbor local edge) per local edge; -1 on boundaries."""
    owners = {}
    for k, tri in enumerate(elements):
        for f, (a, b) in enumerate(EDGE_VERTICES):
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            owners.setdefault(key, []).append((k, f))
    nbr = -np.ones((len(elements), 3), dtype=int)
    nbr_edge = -np.ones((len(elements), 3), dtype=int)
    for key, items in owners.items():
        if len(items) > 2:
            raise ValueError(f"non-manifold edge {key}")
        if len(items) == 2:
            (k1, f1), (k2, f2) = items
            nbr[k1, f1], nbr_edge[k1, f1] = k2, f2
            nbr[k2, f2], nbr_edge[k2, f2] = k1, f1
    return nbr, nbr_edge


@dataclass(eq=False)
class SurfaceMesh:
    surface_kind: str                 # "sphere" or "ellipsoid"
    axes: tuple                       # (a, b, c); a sphere of radius r has (r, r, r)
    geometric_order_q: int
    vertices: np.ndarray              # (V, 3)
    elements: np.ndarray              # (K, 3) vertex indices, counter-clockwise seen from outside
    geometry_nodes: np.ndarray        # (K, Ng, 3)
    neighbors: np.ndarray             # (K, 3)
    neighbor_edges: np.ndarray        # (K, 3)
    _geometry_cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def radius(self):
        if self.surface_kind != "sphere":
            raise UnsupportedSurfaceError("radius is only defined for sphere meshes")
        return self.axes[0]

    def project_to_surface(self, x):
        """Radial projection of points onto the exact surface."""
        x = np.asarray(x, dtype=float)
        return np.asarray(self.axes) * (x / np.linalg.norm(x, axis=-1, keepdims=True))

    def surface_residual(self, x):
        x = np.asarray(x, dtype=float)
        if self.surface_kind == "sphere":
            return np.abs(np.linalg.norm(x, axis=-1) - self.axes[0])
        return np.abs(np.sum((x / np.asarray(self.axes)) ** 2, axis=-1) - 1.0)

    def surface_normal(self, x):
        """Unit normal of the exact surface at (projected) points x."""
        y = self.project_to_surface(x)
        g = y / np.asarray(self.axes) ** 2
        return g / np.linalg.norm(g, axis=-1, keepdims=True)

    @cached_property
    def _geom_ref(self):
        r, s = warp_blend_nodes(self.geometric_order_q)
        return np.linalg.inv(vandermonde(self.geometric_order_q, r, s))

    def map_points(self, r, s):
        """Image of reference points under every element map: (K, n, 3)."""
        B = vandermonde(self.geometric_order_q, r, s) @ self._geom_ref
        return np.einsum("ng,kgd->knd", B, self.geometry_nodes)

    def map_tangents(self, r, s):
        """d c / d r and d c / d s at reference points: two (K, n, 3) arrays."""
        vr, vs = grad_vandermonde(self.geometric_order_q, r, s)
        cr = np.einsum("ng,kgd->knd", vr @ self._geom_ref, self.geometry_nodes)
        cs = np.einsum("ng,kgd->knd", vs @ self._geom_ref, self.geometry_nodes)
        return cr, cs

    def geometry(self, elem):
        """Geometric factors for the reference element `elem` (cached per element order)."""
        key = (elem.order_p, elem.quad_order)
        if key not in self._geometry_cache:
            self._geometry_cache[key] = ElementGeometry.build(self, elem)
        return self._geometry_cache[key]


def _point_sets(q):
    r, s = warp_blend_nodes(q)
    return r, s, barycentric(r, s)


def _element_geometry_nodes(dirs, tri, axes, q, t_canon):
    """Degree-q geometry nodes of one element from its unit-sphere vertex directions."""
    axes = np.asarray(axes, dtype=float)
    r, s, bary = _point_sets(q)
    d = dirs[tri]                      # flat triangle on the unit icosphere
    X = axes * d                       # vertices on the target surface

    def exact(p):
        return axes * (p / np.linalg.norm(p))

    def edge_point(a, b, lam_b):
        # canonical orientation (lower global index first) for bitwise-shared edges
        if tri[a] > tri[b]:
            a, b, lam_b = b, a, 1.0 - lam_b
        j = np.argmin(np.abs(t_canon - lam_b))
        t = t_canon[j] if abs(t_canon[j] - lam_b) < 1e-10 else lam_b
        return exact((1.0 - t) * d[a] + t * d[b]), (1.0 - t) * X[a] + t * X[b]

    nodes = np.empty((len(r), 3))
    for n, lam in enumerate(bary):
        zero = np.abs(lam) < 1e-12
        if zero.sum() == 2:
            nodes[n] = X[int(np.argmax(lam))]
        elif zero.sum() == 1:
            a, b = [v for v in range(3) if not zero[v]]
            nodes[n] = edge_point(a, b, lam[b] / (lam[a] + lam[b]))[0]
        else:
            x = lam @ X
            for a, b in EDGE_VERTICES:
                xi = lam[b] - lam[a]
                exact_pt, flat_pt = edge_point(a, b, 0.5 * (1.0 + xi))
                x = x + 4.0 * lam[a] * lam[b] / ((1.0 + xi) * (1.0 - xi)) * (exact_pt - flat_pt)
            nodes[n] = x
    return nodes


def _generate(refine_level, q, axes, kind):
    if int(refine_level) != refine_level or refine_level < 0:
        raise ValueError(f"refine_level must be a non-negative integer, got {refine_level!r}")
    if int(q) != q or q < 1:
        raise ValueError(f"geometric order q must be a positive integer, got {q!r}")
    dirs, faces = icosahedron()
    for _ in range(int(refine_level)):
        dirs, faces = subdivide(dirs, faces)
    faces = _orient_outward(dirs, faces)
    t_canon = 0.5 * (1.0 + gauss_lobatto(q)) if q > 1 else np.array([0.0, 1.0])
    geom = np.stack([_element_geometry_nodes(dirs, tri, axes, q, t_canon) for tri in faces])
    nbr, nbr_edge = build_adjacency(faces)
    return SurfaceMesh(kind, tuple(float(a) for a in axes), int(q), np.asarray(axes) * dirs,
                       faces, geom, nbr, nbr_edge)


def generate_sphere_mesh(refine_level, q=3, radius=1.0):
    """Icosahedral sphere mesh with 20 * 4**refine_level curved elements."""
    return _generate(refine_level, q, (radius, radius, radius), "sphere")


def generate_ellipsoid_mesh(refine_level, q=3, ratio=1.003364):
    """Ellipsoid (x/a)^2 + (y/a)^2 + z^2 = 1 with a = ratio (c normalised to 1)."""
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    return _generate(refine_level, q, (ratio, ratio, 1.0), "ellipsoid")


@dataclass(frozen=True)
class MeshStats:
    p: int
    L2_mesh_error: float
    Linf_mesh_error: float
    node_count: int


def mesh_error_stats(mesh, p):
    """Radial deviation of the degree-p solution nodes from the exact sphere."""
    if mesh.surface_kind != "sphere":
        raise UnsupportedSurfaceError("mesh error statistics need a sphere (single exact radius)")
    elem = build_reference_element(p)
    x = mesh.map_points(elem.r, elem.s)
    dev = mesh.axes[0] - np.linalg.norm(x, axis=-1)
    return MeshStats(p, float(np.sqrt(np.mean(dev ** 2))), float(np.max(np.abs(dev))), dev.size)


def check_mesh(mesh, tol=1e-13):
    """Return a list of invariant violations (empty when the mesh is sound)."""
    problems = []
    res = mesh.surface_residual(mesh.vertices)
    if res.max() > tol:
        problems.append(f"vertex off surface: max residual {res.max():.3e} at vertex {int(res.argmax())}")
    nbr, nbr_edge = mesh.neighbors, mesh.neighbor_edges
    for k in range(mesh.n_elements):
        for f in range(3):
            k2, f2 = nbr[k, f], nbr_edge[k, f]
            if k2 < 0:
                problems.append(f"boundary edge at element {k}, edge {f}")
            elif nbr[k2, f2] != k or nbr_edge[k2, f2] != f:
                problems.append(f"adjacency not an involution at element {k}, edge {f}")
    n_edges = int((nbr >= 0).sum() // 2 + (nbr < 0).sum())
    chi = len(mesh.vertices) - n_edges + mesh.n_elements
    if chi != 2:
        problems.append(f"Euler characteristic {chi} != 2")
    return problems


# ---------------------------------------------------------------- geometry


@dataclass(eq=False)
class ElementGeometry:
    """Geometric factors of all elements for one reference element.

    Arrays are batched over elements: volume data are (K, n, ...), edge data
    (K, 3, n_edge, ...).  `contra` holds the contravariant basis c^a = g^{ab} c_b,
    so the surface gradient of f is sum_a (d f / d s_a) c^a.
    """
    nodes: np.ndarray
    node_tangents: np.ndarray        # (K, Np, 2, 3)
    node_contra: np.ndarray          # (K, Np, 2, 3)
    quad_points: np.ndarray
    quad_tangents: np.ndarray        # (K, Nq, 2, 3)
    quad_contra: np.ndarray
    jacobian: np.ndarray             # (K, Nq)
    quad_normal: np.ndarray          # unit discrete-surface normal at quadrature points
    node_normal: np.ndarray
    edge_points: np.ndarray          # (K, 3, Ne, 3)
    edge_tangent: np.ndarray         # unit tangent along the counter-clockwise boundary
    edge_jacobian: np.ndarray        # |dc/dt| (K, 3, Ne)
    edge_tangents2: np.ndarray       # (K, 3, Ne, 2, 3): c_r, c_s on the edge
    edge_normal: np.ndarray          # discrete-surface normal at edge points
    edge_conormals: np.ndarray       # outward in-surface normals t x nu
    edge_contra: np.ndarray
    exterior: np.ndarray             # flat index of the matching point on the neighbour
    owner: np.ndarray                # (K, 3) True where this side owns the shared edge flux

    @staticmethod
    def _contra(cr, cs):
        g11 = np.einsum("...d,...d->...", cr, cr)
        g12 = np.einsum("...d,...d->...", cr, cs)
        g22 = np.einsum("...d,...d->...", cs, cs)
        det = g11 * g22 - g12 ** 2
        if np.any(det <= 0):
            raise ValueError("singular metric: degenerate element")
        c1 = (g22[..., None] * cr - g12[..., None] * cs) / det[..., None]
        c2 = (-g12[..., None] * cr + g11[..., None] * cs) / det[..., None]
        return np.stack([c1, c2], axis=-2)

    @classmethod
    def build(cls, mesh, elem):
        K = mesh.n_elements
        ncr, ncs = mesh.map_tangents(elem.r, elem.s)
        qcr, qcs = mesh.map_tangents(elem.quad_r, elem.quad_s)
        qn = np.cross(qcr, qcs)
        jac = np.linalg.norm(qn, axis=-1)
        if np.any(jac <= 0):
            raise ValueError("non-positive Jacobian: inverted element")
        nn = np.cross(ncr, ncs)

        ne = elem.n_edge_quad
        epts, etan, ejac, etan2, enorm = [], [], [], [], []
        for f, (a, b) in enumerate(EDGE_VERTICES):
            er, es = edge_points(f, elem.edge_t)
            cr, cs = mesh.map_tangents(er, es)
            dr, ds = 0.5 * (VERTICES[b] - VERTICES[a])
            dcdt = dr * cr + ds * cs
            ej = np.linalg.norm(dcdt, axis=-1)
            epts.append(mesh.map_points(er, es))
            etan.append(dcdt / ej[..., None])
            ejac.append(ej)
            etan2.append(np.stack([cr, cs], axis=-2))
            n = np.cross(cr, cs)
            enorm.append(n / np.linalg.norm(n, axis=-1, keepdims=True))
        edge_pts = np.stack(epts, axis=1)
        edge_tan = np.stack(etan, axis=1)
        edge_nrm = np.stack(enorm, axis=1)
        edge_t2 = np.stack(etan2, axis=1)

        idx = np.arange(K * 3 * ne).reshape(K, 3, ne)
        exterior = idx.copy()
        owner = np.ones((K, 3), dtype=bool)
        for k in range(K):
            for f in range(3):
                k2, f2 = mesh.neighbors[k, f], mesh.neighbor_edges[k, f]
                if k2 >= 0:
                    exterior[k, f] = idx[k2, f2, ::-1]
                    owner[k, f] = k < k2 or (k == k2 and f < f2)
        return cls(
            nodes=mesh.map_points(elem.r, elem.s),
            node_tangents=np.stack([ncr, ncs], axis=-2),
            node_contra=cls._contra(ncr, ncs),
            quad_points=mesh.map_points(elem.quad_r, elem.quad_s),
            quad_tangents=np.stack([qcr, qcs], axis=-2),
            quad_contra=cls._contra(qcr, qcs),
            jacobian=jac,
            quad_normal=qn / jac[..., None],
            node_normal=nn / np.linalg.norm(nn, axis=-1, keepdims=True),
            edge_points=edge_pts,
            edge_tangent=edge_tan,
            edge_jacobian=np.stack(ejac, axis=1),
            edge_tangents2=edge_t2,
            edge_normal=edge_nrm,
            edge_conormals=np.cross(edge_tan, edge_nrm),
            edge_contra=cls._contra(edge_t2[..., 0, :], edge_t2[..., 1, :]),
            exterior=exterior.ravel(),
            owner=owner,
        )


# ---------------------------------------------------------------- file format

_MAGIC = "FRAMESURF-MESH 1"


def _fmt(x):
    return repr(float(x))            # shortest string that round-trips exactly


def write_mesh(mesh, path):
    lines = [_MAGIC]
    a, b, c = mesh.axes
    if mesh.surface_kind == "sphere":
        lines.append(f"SURFACE SPHERE {_fmt(a)}")
    else:
        lines.append(f"SURFACE ELLIPSOID {_fmt(a)} {_fmt(b)} {_fmt(c)}")
    lines.append(f"ORDER {mesh.geometric_order_q}")
    lines.append(f"VERTICES {len(mesh.vertices)}")
    lines += [" ".join(_fmt(v) for v in row) for row in mesh.vertices]
    lines.append(f"ELEMENTS {mesh.n_elements}")
    lines += [" ".join(str(int(v)) for v in row) for row in mesh.elements]
    ng = mesh.geometry_nodes.shape[1]
    lines.append(f"GEOMNODES {mesh.n_elements} {ng}")
    lines += [" ".join(_fmt(v) for v in row.ravel()) for row in mesh.geometry_nodes]
    lines.append(f"ADJACENCY {mesh.n_elements}")
    lines += [" ".join(f"{n} {f}" for n, f in zip(nr, fr))
              for nr, fr in zip(mesh.neighbors, mesh.neighbor_edges)]
    lines.append("END")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_mesh(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    pos = 0

    def take(expected=None):
        nonlocal pos
        if pos >= len(lines):
            raise MeshFormatError(f"unexpected end of file (expected {expected or 'more data'})",
                                  pos + 1)
        line = lines[pos].split()
        pos += 1
        if expected is not None and (not line or line[0] != expected):
            raise MeshFormatError(f"expected section {expected!r}", pos)
        return line

    def numbers(line, n, kind):
        if len(line) != n:
            raise MeshFormatError(f"expected {n} values, found {len(line)}", pos)
        try:
            return [kind(v) for v in line]
        except ValueError as exc:
            raise MeshFormatError(str(exc), pos) from None

    if " ".join(take()) != _MAGIC:
        raise MeshFormatError("not a framesurf mesh file", 1)
    head = take("SURFACE")
    kind = head[1].lower() if len(head) > 1 else ""
    if kind == "sphere":
        r = numbers(head[2:], 1, float)[0]
        axes = (r, r, r)
    elif kind == "ellipsoid":
        axes = tuple(numbers(head[2:], 3, float))
    else:
        raise MeshFormatError(f"unknown surface {kind!r}", pos)
    q = numbers(take("ORDER")[1:], 1, int)[0]
    nv = numbers(take("VERTICES")[1:], 1, int)[0]
    verts = np.array([numbers(take(), 3, float) for _ in range(nv)])
    ne = numbers(take("ELEMENTS")[1:], 1, int)[0]
    elements = np.array([numbers(take(), 3, int) for _ in range(ne)], dtype=int)
    ne2, ng = numbers(take("GEOMNODES")[1:], 2, int)
    if ne2 != ne:
        raise MeshFormatError("GEOMNODES count does not match ELEMENTS", pos)
    geom = np.array([numbers(take(), 3 * ng, float) for _ in range(ne)]).reshape(ne, ng, 3)
    ne3 = numbers(take("ADJACENCY")[1:], 1, int)[0]
    if ne3 != ne:
        raise MeshFormatError("ADJACENCY count does not match ELEMENTS", pos)
    adj = np.array([numbers(take(), 6, int) for _ in range(ne)], dtype=int).reshape(ne, 3, 2)
    take("END")
    if elements.size and (elements.min() < 0 or elements.max() >= nv):
        raise MeshFormatError("element references a missing vertex")
    nbr, nbr_edge = build_adjacency(elements)
    if not (np.array_equal(nbr, adj[..., 0]) and np.array_equal(nbr_edge, adj[..., 1])):
        raise MeshFormatError("ADJACENCY section is inconsistent with ELEMENTS")
    return SurfaceMesh(kind, axes, q, verts, elements, geom, nbr, nbr_edge)
