"""Discontinuous-Galerkin weak operators on curved surface meshes.

Every operator returns nodal values obtained by inverting the element mass
matrix on the assembled weak residual.  Interface fluxes are single valued:
the flux is computed once per edge point on the owning element and applied
with the opposite sign on the neighbour, so surface integrals telescope.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .frames import surface_gradient
from .gterm import compute_G


@dataclass(frozen=True)
class FluxRule:
    """Numerical flux choice.

    kind: "upwind", "lax_friedrichs" or "central".
    wave_speed: optional callable (left, right, n) -> speed for Lax-Friedrichs.
    """
    kind: str = "upwind"
    wave_speed: object = None

    def __post_init__(self):
        if self.kind not in ("upwind", "lax_friedrichs", "central"):
            raise ValueError(f"unknown flux kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class Field:
    """Nodal unknowns: scalar (K, Np) or frame components (K, Np, ncomp)."""
    layout: str
    data: np.ndarray
    frames: object = None

    def __post_init__(self):
        if self.layout not in ("scalar", "frame_vector"):
            raise ValueError(f"unknown layout {self.layout!r}")
        if self.layout == "frame_vector":
            if self.data.ndim != 3 or self.data.shape[-1] not in (2, 3):
                raise ValueError("frame_vector data must have shape (K, Np, 2|3)")
            if self.frames is None:
                raise ValueError("frame_vector fields need the frames they are expressed in")
        elif self.data.ndim != 2:
            raise ValueError("scalar data must have shape (K, Np)")

    def cartesian(self, where="node"):
        """Cartesian vectors at nodes, quadrature points or edge points."""
        if self.layout != "frame_vector":
            raise ValueError("only frame_vector fields have a Cartesian form")
        n = self.data.shape[-1]
        if where == "node":
            return np.einsum("kni,knid->knd", self.data, self.frames.node[..., :n, :])
        raise ValueError(f"unknown location {where!r}")


def _apply(M, u):
    """M (a, n) applied along axis 1 of u (K, n, ...) -> (K, a, ...)."""
    K = u.shape[0]
    out = np.matmul(M, u.reshape(K, u.shape[1], -1))
    return out.reshape((K, M.shape[0]) + u.shape[2:])


def _scale(w, f):
    """Multiply f (K, n, ...) by weights w (K, n)."""
    return f * w.reshape(w.shape + (1,) * (f.ndim - w.ndim))


class DGOperators:
    """Reference-to-physical assembly helpers for one mesh and polynomial degree."""

    def __init__(self, mesh, elem):
        self.mesh = mesh
        self.elem = elem
        self.geom = mesh.geometry(elem)
        self.K = mesh.n_elements
        self.wj = self.geom.jacobian * elem.quad_w                  # (K, Nq)
        g = self.geom
        # shared edge measure taken from the owning side so both sides agree bitwise
        ej = g.edge_jacobian.reshape(-1)
        owner = np.repeat(g.owner.reshape(-1), elem.n_edge_quad)
        ej = np.where(owner, ej, ej[g.exterior])
        self.edge_wj = ej.reshape(g.edge_jacobian.shape) * elem.edge_w
        self._owner_pts = owner.reshape(g.edge_jacobian.shape)
        self._interp_edge_flat = elem.interp_edge.reshape(-1, elem.n_nodes)

    @cached_property
    def mass(self):
        B = self.elem.interp_quad
        return np.einsum("qn,kq,qm->knm", B, self.wj, B)

    @cached_property
    def mass_inv(self):
        return np.linalg.inv(self.mass)

    @property
    def owner_points(self):
        return self._owner_pts

    # ---- interpolation

    def to_quad(self, u):
        return _apply(self.elem.interp_quad, u)

    def to_edge(self, u):
        ue = _apply(self._interp_edge_flat, u)
        return ue.reshape((u.shape[0],) + self.elem.interp_edge.shape[:2] + u.shape[2:])

    def exterior(self, ue):
        """Values on the neighbouring element at the matching edge points."""
        flat = ue.reshape((-1,) + ue.shape[3:])
        return flat[self.geom.exterior].reshape(ue.shape)

    def make_single_valued(self, flux):
        """Keep the owner's flux and give the neighbour its negative."""
        flat = flux.reshape((-1,) + flux.shape[3:])
        own = self._owner_pts.reshape((-1,) + (1,) * (flux.ndim - 3))
        return np.where(own, flat, -flat[self.geom.exterior]).reshape(flux.shape)

    # ---- weak integrals against the nodal basis

    def test_volume(self, fq):
        """int f phi_n dA for every basis function."""
        return _apply(self.elem.interp_quad.T, _scale(self.wj, fq))

    def test_grad(self, wq):
        """int grad(phi_n) . w dA for a Cartesian vector field at quadrature points."""
        c = self.geom.quad_contra
        a1 = np.einsum("kqd,kqd->kq", c[:, :, 0], wq) * self.wj
        a2 = np.einsum("kqd,kqd->kq", c[:, :, 1], wq) * self.wj
        return a1 @ self.elem.dr_quad + a2 @ self.elem.ds_quad

    def test_edge(self, fe):
        """Boundary integral of f phi_n around each element, f given at edge points."""
        K = fe.shape[0]
        fe = _scale(self.edge_wj, fe).reshape((K, -1) + fe.shape[3:])
        return _apply(self._interp_edge_flat.T, fe)

    def solve_mass(self, r):
        return np.matmul(self.mass_inv, r.reshape(r.shape[:2] + (-1,))).reshape(r.shape)

    def integrate(self, u):
        """Integral over the whole surface of nodal data u."""
        return float(np.sum(self.wj * self.to_quad(u)))

    def l2_norm(self, u, mask=None):
        w = self.wj if mask is None else self.wj[mask]
        uq = self.to_quad(u) if mask is None else self.to_quad(u)[mask]
        return float(np.sqrt(np.sum(w * uq ** 2)))

    # ---- frames on edges

    def trace_normal(self, frames):
        """Single-valued in-surface unit normal at edge points, outward for the owner."""
        g = self.geom
        e3 = frames.edge[..., 2, :]
        n = np.cross(g.edge_tangent, e3 + self.exterior(e3))
        n /= np.linalg.norm(n, axis=-1, keepdims=True)
        return self.make_single_valued(n)


def _check_frames(v, frames):
    if v.layout == "frame_vector" and v.frames is not frames:
        raise ValueError("field components are not expressed in the supplied frames")


def upwind_normal_flux(wn_in, wn_out):
    """Upwind choice of a normal component using the average transport direction."""
    return np.where(wn_in + wn_out >= 0.0, wn_in, wn_out)


def surface_flux_integral(ops, trace_left, trace_right, flux, normal=None):
    """Weak boundary term for the normal component of a vector field.

    trace_left/right: Cartesian vectors (K, 3, Ne, 3) on the element and its
    neighbour.  Returns the per-element residual sum_f int F phi ds with a
    single shared F per edge point.
    """
    if trace_left.shape != trace_right.shape:
        raise ValueError("orientation mismatch: traces have different shapes")
    n = normal
    wl = np.einsum("kfed,kfed->kfe", trace_left, n)
    wr = np.einsum("kfed,kfed->kfe", trace_right, n)
    if flux.kind == "upwind":
        F = upwind_normal_flux(wl, wr)
    elif flux.kind == "central":
        F = 0.5 * (wl + wr)
    else:
        raise ValueError("Lax-Friedrichs needs a conserved state; use the solver fluxes")
    return ops.test_edge(ops.make_single_valued(F))


def _vector_traces(ops, comps, frames):
    n = comps.shape[-1]
    ce = ops.to_edge(comps)
    ve = np.einsum("kfei,kfeid->kfed", ce, frames.edge[..., :n, :])
    return ve, ops.exterior(ve)


def _vector_quad(ops, comps, frames):
    n = comps.shape[-1]
    return np.einsum("kqi,kqid->kqd", ops.to_quad(comps), frames.quad[..., :n, :])


def g_residual(ops, frames, w):
    """int G(e3, w) phi dA for a nodal Cartesian field w."""
    split = compute_G(frames.node[..., 2, :], w, ops.mesh, ops.elem, k_quad=frames.quad[..., 2, :])
    return ops.test_volume(split.total)


def g_residual_matrix(ops, frames):
    """Element blocks B (K, Np, Np, 3) with g_residual(ops, frames, w) = B w.

    G(e3, w) is linear in w once e3 is fixed, so the residual can be
    precomputed for solvers that apply it many times.
    """
    elem, g = ops.elem, ops.geom
    kq = frames.quad[..., 2, :]
    grad_k = surface_gradient(ops.mesh, elem, frames.node[..., 2, :])
    a1 = np.einsum("kqd,kqd->kq", g.quad_contra[:, :, 0], kq)
    a2 = np.einsum("kqd,kqd->kq", g.quad_contra[:, :, 1], kq)
    deriv = elem.dr_quad[None] * a1[..., None] + elem.ds_quad[None] * a2[..., None]
    w = np.einsum("kqc,kqcd->kqd", kq, grad_k)
    A = deriv[..., None] * kq[:, :, None, :] - elem.interp_quad[None, :, :, None] * w[:, :, None, :]
    return np.einsum("qm,kq,kqnc->kmnc", elem.interp_quad, ops.wj, A)


def weak_divergence_residual(ops, comps, frames, flux, with_G):
    """Weak residual of div(v) for v = sum_i comps_i e_i (before mass inversion).

    Integration by parts on the discrete surface yields div(v) - G(e3, v), so
    the G term is added back when with_G is set.
    """
    vq = _vector_quad(ops, comps, frames)
    vl, vr = _vector_traces(ops, comps, frames)
    res = -ops.test_grad(vq) + surface_flux_integral(ops, vl, vr, flux, ops.trace_normal(frames))
    if with_G:
        n = comps.shape[-1]
        res = res + g_residual(ops, frames, np.einsum("kni,knid->knd", comps, frames.node[..., :n, :]))
    return res


def weak_divergence(ops, v, frames, flux=FluxRule("upwind"), with_G=False):
    """Nodal surface divergence, optionally corrected by the spurious divergence G(e3, v)."""
    _check_frames(v, frames)
    return ops.solve_mass(weak_divergence_residual(ops, v.data, frames, flux, with_G))


def weak_curl_normal(ops, v, frames, flux=FluxRule("upwind"), with_G=False):
    """Nodal (curl v) . e3 via div(v x e3) + v . curl(e3); with_G adds G(e3, v x e3)."""
    _check_frames(v, frames)
    if not frames.has_differentials:
        raise ValueError("frames need differentials; call frame_differentials first")
    comps = v.data[..., :2]
    rot = np.stack([comps[..., 1], -comps[..., 0]], axis=-1)       # v x e3 = v2 e1 - v1 e2
    res = weak_divergence_residual(ops, rot, frames, flux, with_G)
    vq = _vector_quad(ops, comps, frames)
    res = res + ops.test_volume(np.einsum("kqd,kqd->kq", vq, frames.curl_e_quad[..., 2, :]))
    return ops.solve_mass(res)


def directional_gradient_residual(ops, f, i, frames, f_star_edge, with_G):
    """Weak residual of grad(f) . e_i given the single-valued trace f* at edge points."""
    ei_q = frames.quad[..., i, :]
    fq = ops.to_quad(f)
    res = -ops.test_grad(fq[..., None] * ei_q) - ops.test_volume(fq * frames.div_e_quad[..., i])
    n = ops.trace_normal(frames)
    res = res + ops.test_edge(f_star_edge * np.einsum("kfed,kfed->kfe", frames.edge[..., i, :], n))
    if with_G:
        res = res + g_residual(ops, frames, f[..., None] * frames.node[..., i, :])
    return res


def weak_directional_gradient(ops, f, i, frames, flux=FluxRule("central"), with_G=False):
    """Nodal grad(f) . e_i for a scalar field f and frame direction i in {0, 1}."""
    if not frames.has_differentials:
        raise ValueError("frames need differentials; call frame_differentials first")
    data = f.data if isinstance(f, Field) else np.asarray(f)
    fe = ops.to_edge(data)
    f_star = 0.5 * (fe + ops.exterior(fe))
    return ops.solve_mass(directional_gradient_residual(ops, data, i, frames, f_star, with_G))
