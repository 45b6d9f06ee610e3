"""Nodal machinery on the standard triangle.

The reference triangle has vertices (-1,-1), (1,-1), (-1,1).  Local edge 0
runs v0->v1 (s=-1), edge 1 runs v1->v2 (r+s=0) and edge 2 runs v2->v0
(r=-1), so the boundary is traversed counter-clockwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gamma, sqrt

import numpy as np
from scipy.special import eval_jacobi, roots_jacobi

MAX_ORDER = 10

# Warp-blend optimisation parameters (Warburton 2006), indexed by order-1.
_ALPHA_OPT = (0.0, 0.0, 1.4152, 0.1001, 0.2751, 0.9800, 1.0999,
              1.2832, 1.3648, 1.4773, 1.4959, 1.5743, 1.5770, 1.6223, 1.6258)

EDGE_VERTICES = ((0, 1), (1, 2), (2, 0))
VERTICES = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])


def jacobi_normalized(x, alpha, beta, n):
    """Orthonormal Jacobi polynomial P_n^(alpha,beta) on [-1, 1]."""
    x = np.asarray(x, dtype=float)
    norm2 = (2.0 ** (alpha + beta + 1) / (2 * n + alpha + beta + 1)
             * gamma(n + alpha + 1) * gamma(n + beta + 1)
             / (gamma(n + alpha + beta + 1) * gamma(n + 1)))
    return eval_jacobi(n, alpha, beta, x) / sqrt(norm2)


def grad_jacobi_normalized(x, alpha, beta, n):
    if n == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return sqrt(n * (n + alpha + beta + 1.0)) * jacobi_normalized(x, alpha + 1, beta + 1, n - 1)


def gauss_lobatto(n):
    """Legendre-Gauss-Lobatto points on [-1, 1] (n+1 points), symmetrised."""
    if n == 1:
        return np.array([-1.0, 1.0])
    inner = roots_jacobi(n - 1, 1.0, 1.0)[0]
    x = np.concatenate(([-1.0], np.sort(inner), [1.0]))
    return 0.5 * (x - x[::-1])


def rs_to_ab(r, s):
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    a = np.full_like(r, -1.0)
    ok = np.abs(1.0 - s) > 1e-14
    a[ok] = 2.0 * (1.0 + r[ok]) / (1.0 - s[ok]) - 1.0
    return a, s


def basis_index(n):
    return [(i, j) for i in range(n + 1) for j in range(n + 1 - i)]


def vandermonde(n, r, s):
    """Orthonormal Dubiner basis of total degree n evaluated at (r, s)."""
    a, b = rs_to_ab(r, s)
    cols = [sqrt(2.0) * jacobi_normalized(a, 0, 0, i)
            * jacobi_normalized(b, 2 * i + 1, 0, j) * (1.0 - b) ** i
            for i, j in basis_index(n)]
    return np.stack(cols, axis=-1)


def grad_vandermonde(n, r, s):
    a, b = rs_to_ab(r, s)
    vr, vs = [], []
    for i, j in basis_index(n):
        fa = jacobi_normalized(a, 0, 0, i)
        dfa = grad_jacobi_normalized(a, 0, 0, i)
        gb = jacobi_normalized(b, 2 * i + 1, 0, j)
        dgb = grad_jacobi_normalized(b, 2 * i + 1, 0, j)
        half = 0.5 * (1.0 - b)
        dr = dfa * gb
        if i > 0:
            dr = dr * half ** (i - 1)
        ds = dfa * gb * 0.5 * (1.0 + a)
        if i > 0:
            ds = ds * half ** (i - 1)
        tmp = dgb * half ** i
        if i > 0:
            tmp = tmp - 0.5 * i * gb * half ** (i - 1)
        ds = ds + fa * tmp
        vr.append(2.0 ** (i + 0.5) * dr)
        vs.append(2.0 ** (i + 0.5) * ds)
    return np.stack(vr, axis=-1), np.stack(vs, axis=-1)


def _warp_factor(n, rout):
    lgl = gauss_lobatto(n)
    req = np.linspace(-1.0, 1.0, n + 1)
    veq = np.stack([jacobi_normalized(req, 0, 0, i) for i in range(n + 1)], axis=-1)
    pmat = np.stack([jacobi_normalized(rout, 0, 0, i) for i in range(n + 1)], axis=0)
    lmat = np.linalg.solve(veq.T, pmat)
    warp = lmat.T @ (lgl - req)
    interior = np.abs(rout) < 1.0 - 1e-10
    sf = 1.0 - (interior * rout) ** 2
    return warp / sf + warp * (interior - 1.0)


def warp_blend_nodes(n):
    """Warp-and-blend interpolation nodes on the reference triangle.

    Returns (r, s) arrays of length (n+1)(n+2)/2, ordered with s as the slow
    index, starting at vertex v0.
    """
    if n == 1:
        return np.array([-1.0, 1.0, -1.0]), np.array([-1.0, -1.0, 1.0])
    alpha = _ALPHA_OPT[n - 1] if n < 16 else 5.0 / 3.0
    l1, l3 = [], []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            l1.append(i / n)
            l3.append(j / n)
    l1 = np.array(l1)
    l3 = np.array(l3)
    l2 = 1.0 - l1 - l3
    x = -l2 + l3
    y = (-l2 - l3 + 2.0 * l1) / sqrt(3.0)
    warp1 = 4 * l2 * l3 * _warp_factor(n, l3 - l2) * (1 + (alpha * l1) ** 2)
    warp2 = 4 * l1 * l3 * _warp_factor(n, l1 - l3) * (1 + (alpha * l2) ** 2)
    warp3 = 4 * l1 * l2 * _warp_factor(n, l2 - l1) * (1 + (alpha * l3) ** 2)
    x = x + warp1 + np.cos(2 * np.pi / 3) * warp2 + np.cos(4 * np.pi / 3) * warp3
    y = y + np.sin(2 * np.pi / 3) * warp2 + np.sin(4 * np.pi / 3) * warp3
    # equilateral -> reference triangle
    b1 = (sqrt(3.0) * y + 1.0) / 3.0
    b2 = (-3.0 * x - sqrt(3.0) * y + 2.0) / 6.0
    b3 = (3.0 * x - sqrt(3.0) * y + 2.0) / 6.0
    r = -b2 + b3 - b1
    s = -b2 - b3 + b1
    # snap round-off on the boundary
    for arr in (r, s):
        arr[np.abs(arr + 1.0) < 1e-12] = -1.0
    edge1 = np.abs(r + s) < 1e-12
    r[edge1] = 0.5 * (r[edge1] - s[edge1])
    s[edge1] = -r[edge1]
    return r, s


def barycentric(r, s):
    """Barycentric coordinates (l0, l1, l2) w.r.t. vertices v0, v1, v2."""
    l1 = 0.5 * (1.0 + r)
    l2 = 0.5 * (1.0 + s)
    return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)


def triangle_quadrature(degree):
    """Collapsed Gauss rule on the reference triangle exact to `degree`."""
    n = degree // 2 + 1
    xa, wa = np.polynomial.legendre.leggauss(n)
    xb, wb = roots_jacobi(n, 1.0, 0.0)
    A, B = np.meshgrid(xa, xb, indexing="ij")
    WA, WB = np.meshgrid(wa, wb, indexing="ij")
    r = 0.5 * (1.0 + A) * (1.0 - B) - 1.0
    s = B
    w = 0.5 * WA * WB
    return r.ravel(), s.ravel(), w.ravel()


def edge_points(edge, t):
    """Reference coordinates of edge parameter t in [-1, 1] on a local edge."""
    a, b = EDGE_VERTICES[edge]
    va, vb = VERTICES[a], VERTICES[b]
    lam = 0.5 * (1.0 + np.asarray(t))
    pts = (1.0 - lam)[:, None] * va + lam[:, None] * vb
    return pts[:, 0], pts[:, 1]


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    order_p: int
    quad_order: int
    r: np.ndarray
    s: np.ndarray
    V: np.ndarray
    Dr: np.ndarray
    Ds: np.ndarray
    mass_op: np.ndarray
    quad_r: np.ndarray
    quad_s: np.ndarray
    quad_w: np.ndarray
    interp_quad: np.ndarray      # nodes -> volume quadrature points
    dr_quad: np.ndarray          # nodes -> d/dr at volume quadrature points
    ds_quad: np.ndarray
    edge_t: np.ndarray           # 1D Gauss points on [-1, 1]
    edge_w: np.ndarray
    edge_nodes: tuple            # node indices lying on each edge, ordered along the edge
    interp_edge: np.ndarray      # (3, n_edge_quad, Np): nodes -> edge quadrature points
    lift_op: np.ndarray          # (3, Np, n_edge_quad): weighted transpose of interp_edge

    @property
    def n_nodes(self):
        return len(self.r)

    @property
    def n_quad(self):
        return len(self.quad_w)

    @property
    def n_edge_quad(self):
        return len(self.edge_w)

    @property
    def area(self):
        return 2.0

    def interpolation_matrix(self, r, s):
        return vandermonde(self.order_p, r, s) @ np.linalg.inv(self.V)

    def gradient_matrices(self, r, s):
        vr, vs = grad_vandermonde(self.order_p, r, s)
        vinv = np.linalg.inv(self.V)
        return vr @ vinv, vs @ vinv


@lru_cache(maxsize=None)
def build_reference_element(p, quad_order=None):
    """Build the degree-p nodal element with a quadrature exact to `quad_order`."""
    if not isinstance(p, (int, np.integer)) or not 1 <= p <= MAX_ORDER:
        raise ValueError(f"polynomial degree must be an integer in [1, {MAX_ORDER}], got {p!r}")
    if quad_order is None:
        quad_order = 2 * p + 2
    if quad_order < 2 * p + 2:
        raise ValueError(f"quad_order must be >= 2p+2 = {2 * p + 2}, got {quad_order}")
    r, s = warp_blend_nodes(p)
    V = vandermonde(p, r, s)
    vinv = np.linalg.inv(V)
    vr, vs = grad_vandermonde(p, r, s)
    Dr, Ds = vr @ vinv, vs @ vinv
    mass = vinv.T @ vinv

    qr, qs, qw = triangle_quadrature(quad_order)
    interp_q = vandermonde(p, qr, qs) @ vinv
    gr, gs = grad_vandermonde(p, qr, qs)

    n_edge = quad_order // 2 + 1
    et, ew = np.polynomial.legendre.leggauss(n_edge)
    et = 0.5 * (et - et[::-1])
    ew = 0.5 * (ew + ew[::-1])
    interp_e = np.stack([vandermonde(p, *edge_points(f, et)) @ vinv for f in range(3)])
    lift = np.transpose(interp_e * ew[None, :, None], (0, 2, 1))

    bary = barycentric(r, s)
    edge_nodes = []
    for f, (a, b) in enumerate(EDGE_VERTICES):
        opposite = 3 - a - b
        idx = np.flatnonzero(np.abs(bary[:, opposite]) < 1e-12)
        idx = idx[np.argsort(bary[idx, b])]
        edge_nodes.append(idx)

    for op in (Dr, Ds, mass, interp_q, interp_e):
        op.setflags(write=False)
    return ReferenceElement(
        order_p=int(p), quad_order=int(quad_order), r=r, s=s, V=V, Dr=Dr, Ds=Ds,
        mass_op=mass, quad_r=qr, quad_s=qs, quad_w=qw, interp_quad=interp_q,
        dr_quad=gr @ vinv, ds_quad=gs @ vinv, edge_t=et, edge_w=ew,
        edge_nodes=tuple(edge_nodes), interp_edge=interp_e, lift_op=lift,
    )


def differentiate(elem, u, axis):
    """Nodal derivative of nodal values `u` along reference axis 0 (r) or 1 (s).

    `u` may carry leading batch dimensions; the node axis is the last one.
    """
    u = np.asarray(u)
    if u.shape[-1] != elem.n_nodes:
        raise ValueError(f"expected {elem.n_nodes} nodal values, got {u.shape[-1]}")
    if axis in (0, "r", "s1"):
        D = elem.Dr
    elif axis in (1, "s", "s2"):
        D = elem.Ds
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return u @ D.T


def integrate(elem, u, jacobian):
    """Quadrature of nodal data `u` weighted by a positive Jacobian.

    The Jacobian may be given at the nodes or at the quadrature points.
    """
    u = np.asarray(u)
    if u.shape[-1] != elem.n_nodes:
        raise ValueError(f"expected {elem.n_nodes} nodal values, got {u.shape[-1]}")
    jac = np.asarray(jacobian, dtype=float)
    if jac.ndim and jac.shape[-1] == elem.n_nodes:
        jac = jac @ elem.interp_quad.T
    jac = np.broadcast_to(jac, u.shape[:-1] + (elem.n_quad,))
    if np.any(jac <= 0.0):
        raise ValueError("non-positive Jacobian: inverted or degenerate element")
    uq = u @ elem.interp_quad.T
    return np.sum(uq * jac * elem.quad_w, axis=-1)
