"""Static divergence and curl tests on the sphere.

Each test samples an analytic field that is divergence-free (or curl-free) on
the exact sphere, applies the DG operator and reports the L2 norm of the
result, which is the error.  The first test field is singular at the poles, so
its norms exclude polar caps; the second test field is smooth everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dgops import DGOperators, Field, FluxRule, weak_curl_normal, weak_divergence
from .fields import STATIC_FIELDS
from .frames import build_frames
from .gterm import compute_G, quad_norms
from .refelem import build_reference_element

POLAR_CAP_ANGLE = np.pi / 6


def polar_cap_mask(mesh, cap_angle=POLAR_CAP_ANGLE):
    """True for elements whose centroid lies further than cap_angle from both poles."""
    d = mesh.vertices[mesh.elements].mean(axis=1)
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    colat = np.arccos(np.clip(np.abs(d[:, 2]), 0.0, 1.0))
    return colat > cap_angle


def static_mask(mesh, test):
    return polar_cap_mask(mesh) if test == 1 else np.ones(mesh.n_elements, dtype=bool)


@dataclass(frozen=True)
class StaticResult:
    op: str
    test: int
    frames: str
    with_G: bool
    p: int
    l2_error: float
    linf_error: float
    term1_L2: float
    term2_L2: float


def run_static(mesh, op, test, frame_kind, with_G, p, flux=FluxRule("upwind")):
    """Error of the DG divergence (op="div") or normal curl (op="curl") for one degree."""
    if (op, test) not in STATIC_FIELDS:
        raise ValueError(f"unknown static test {op!r} {test!r}; "
                         f"available: {sorted(STATIC_FIELDS)}")
    elem = build_reference_element(p)
    ops = DGOperators(mesh, elem)
    frames = build_frames(mesh, elem, frame_kind)
    mask = static_mask(mesh, test)
    vx = np.nan_to_num(STATIC_FIELDS[(op, test)](ops.geom.nodes), nan=0.0, posinf=0.0, neginf=0.0)
    comps = np.einsum("knd,knid->kni", vx, frames.node[..., :2, :])
    v = Field("frame_vector", comps, frames)
    if op == "div":
        result = weak_divergence(ops, v, frames, flux, with_G)
        w = v.cartesian()
    else:
        result = weak_curl_normal(ops, v, frames, flux, with_G)
        w = np.cross(v.cartesian(), frames.node[..., 2, :])
    split = compute_G(frames.node[..., 2, :], w, mesh, elem, k_quad=frames.quad[..., 2, :])
    return StaticResult(
        op, test, str(frames.kind.value), bool(with_G), p,
        ops.l2_norm(result, mask),
        float(np.abs(ops.to_quad(result)[mask]).max()),
        quad_norms(mesh, elem, split.term1, mask)["L2"],
        quad_norms(mesh, elem, split.term2, mask)["L2"],
    )


def static_sweep(mesh, op, test, frame_kind, with_G, p_list):
    return [run_static(mesh, op, test, frame_kind, with_G, p) for p in p_list]
