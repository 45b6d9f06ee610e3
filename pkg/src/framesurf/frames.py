"""Moving frames on curved elements.

Two constructions are provided:

* LOCAL: e1, e2 orthonormalise the element-map tangents, e3 = e1 x e2 is the
  normal of the discrete surface.
* LOCSPH: e3 is replaced by a prescribed normal k/|k| of the exact surface,
  e1 is the LOCAL e1 projected onto the plane orthogonal to k and e2 = e3 x e1.

Triads are stored at solution nodes, volume quadrature points and edge
quadrature points, always with shape (..., 3, 3) where axis -2 selects e1, e2,
e3 and axis -1 the Cartesian component.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np


class FrameKind(str, Enum):
    LOCAL = "local"
    LOCSPH = "locsph"


NORMAL_RULES = ("radial_sphere", "analytic_ellipsoid")


class DegenerateFrameError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FrameField:
    kind: FrameKind
    normal_rule: str | None
    node: np.ndarray                  # (K, Np, 3, 3)
    quad: np.ndarray                  # (K, Nq, 3, 3)
    edge: np.ndarray                  # (K, 3, Ne, 3, 3)
    div_e: np.ndarray | None = None   # (K, Np, 3) nodal divergence of e1, e2, e3
    curl_e: np.ndarray | None = None  # (K, Np, 3, 3) nodal curl of e1, e2, e3
    div_e_quad: np.ndarray | None = None
    curl_e_quad: np.ndarray | None = None

    @property
    def has_differentials(self):
        return self.div_e is not None


def _normalize(v, what):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n < 1e-14):
        raise DegenerateFrameError(f"degenerate {what}")
    return v / n


def _local_triads(tangents):
    c1, c2 = tangents[..., 0, :], tangents[..., 1, :]
    e1 = _normalize(c1, "tangent d c / d s1")
    w = c2 - np.einsum("...d,...d->...", c2, e1)[..., None] * e1
    e2 = _normalize(w, "tangents (collinear d c / d s1, d c / d s2)")
    return np.stack([e1, e2, np.cross(e1, e2)], axis=-2)


def _aligned_triads(local, k):
    e3 = k / np.linalg.norm(k, axis=-1, keepdims=True)
    e1 = local[..., 0, :]
    e1 = _normalize(e1 - np.einsum("...d,...d->...", e1, e3)[..., None] * e3,
                    "projection of LOCAL e1 onto the normal plane")
    return np.stack([e1, np.cross(e3, e1), e3], axis=-2)


def build_local_frames(mesh, elem):
    g = mesh.geometry(elem)
    return FrameField(FrameKind.LOCAL, None, _local_triads(g.node_tangents),
                      _local_triads(g.quad_tangents), _local_triads(g.edge_tangents2))


def prescribed_normal(mesh, x, normal_rule):
    if normal_rule == "radial_sphere":
        return x / np.linalg.norm(x, axis=-1, keepdims=True)
    if normal_rule == "analytic_ellipsoid":
        return mesh.surface_normal(x)
    raise ValueError(f"unknown normal rule {normal_rule!r}; choose from {NORMAL_RULES}")


def build_locsph_frames(mesh, elem, normal_rule="radial_sphere"):
    """Frames whose e3 is the exact-surface normal prescribed by `normal_rule`."""
    g = mesh.geometry(elem)
    loc = build_local_frames(mesh, elem)
    return FrameField(
        FrameKind.LOCSPH, normal_rule,
        _aligned_triads(loc.node, prescribed_normal(mesh, g.nodes, normal_rule)),
        _aligned_triads(loc.quad, prescribed_normal(mesh, g.quad_points, normal_rule)),
        _aligned_triads(loc.edge, prescribed_normal(mesh, g.edge_points, normal_rule)),
    )


def build_frames(mesh, elem, kind, normal_rule=None, differentials=True):
    kind = FrameKind(kind)
    if kind is FrameKind.LOCAL:
        frames = build_local_frames(mesh, elem)
    else:
        if normal_rule is None:
            normal_rule = "radial_sphere" if mesh.surface_kind == "sphere" else "analytic_ellipsoid"
        frames = build_locsph_frames(mesh, elem, normal_rule)
    return frame_differentials(frames, mesh, elem) if differentials else frames


def surface_gradient(mesh, elem, f, at="quad"):
    """Discrete surface gradient of nodal data f (K, Np, ...) -> (K, n, ..., 3).

    Reference derivatives are pushed forward with the contravariant basis of the
    element map, so the result lies in the tangent plane of the discrete surface.
    """
    g = mesh.geometry(elem)
    if at == "quad":
        dr, ds, contra = elem.dr_quad, elem.ds_quad, g.quad_contra
    elif at == "node":
        dr, ds, contra = elem.Dr, elem.Ds, g.node_contra
    else:
        raise ValueError(f"unknown location {at!r}")
    f = np.asarray(f)
    if f.shape[:2] != (mesh.n_elements, elem.n_nodes):
        raise ValueError(f"field shape {f.shape} does not match mesh/element "
                         f"({mesh.n_elements}, {elem.n_nodes})")
    fr = np.einsum("qn,kn...->kq...", dr, f)
    fs = np.einsum("qn,kn...->kq...", ds, f)
    extra = (None,) * (f.ndim - 2)
    c1 = contra[:, :, 0][(slice(None), slice(None)) + extra]
    c2 = contra[:, :, 1][(slice(None), slice(None)) + extra]
    return fr[..., None] * c1 + fs[..., None] * c2


def frame_differentials(frames, mesh, elem):
    """Attach div e_i and curl e_i, computed from the nodal interpolant of each triad.

    With grad(e_i)[c, d] = d e_i,c / d x_d the divergence is the trace and the
    curl is the antisymmetric part eps_{abc} d_b e_c.
    """
    out = {}
    for at in ("node", "quad"):
        grad = surface_gradient(mesh, elem, frames.node, at=at)     # (K, n, 3, 3, 3)
        div = np.einsum("knicc->kni", grad)
        curl = np.stack([grad[..., 2, 1] - grad[..., 1, 2],
                         grad[..., 0, 2] - grad[..., 2, 0],
                         grad[..., 1, 0] - grad[..., 0, 1]], axis=-1)
        out[at] = (div, curl)
    return replace(frames, div_e=out["node"][0], curl_e=out["node"][1],
                   div_e_quad=out["quad"][0], curl_e_quad=out["quad"][1])


def frame_angle_error(local, aligned):
    """Nodewise angle between the two e3 fields."""
    dot = np.einsum("knd,knd->kn", local.node[..., 2, :], aligned.node[..., 2, :])
    return np.arccos(np.clip(dot, -1.0, 1.0))


def orthonormality_residual(frames):
    """Max of |e_i . e_j - delta_ij| and |e1 x e2 - e3| over every stored triad."""
    worst = 0.0
    for t in (frames.node, frames.quad, frames.edge):
        gram = np.einsum("...id,...jd->...ij", t, t)
        worst = max(worst, np.abs(gram - np.eye(3)).max(),
                    np.abs(np.cross(t[..., 0, :], t[..., 1, :]) - t[..., 2, :]).max())
    return float(worst)
