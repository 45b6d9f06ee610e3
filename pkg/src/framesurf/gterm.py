"""Spurious divergence G(k, v) = k.(k.grad)v - k.(v.grad)k and its two-term split.

Both terms use the discrete surface gradient of the element map, whatever k is.
Fields are nodal Cartesian 3-vectors of shape (K, Np, 3); the split is
evaluated at volume quadrature points so it can enter weak forms directly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .frames import surface_gradient
from .refelem import build_reference_element


@dataclass(frozen=True, eq=False)
class GSplit:
    term1: np.ndarray     # k.(k.grad)v at quadrature points (K, Nq)
    term2: np.ndarray     # k.(v.grad)k
    total: np.ndarray     # term1 - term2
    norms: dict           # term{1,2}/total -> {"L2", "Linf"}


def quad_norms(mesh, elem, values, mask=None):
    """Quadrature-weighted L2 and max norm of a (K, Nq) field, optionally over masked elements."""
    wj = mesh.geometry(elem).jacobian * elem.quad_w
    if mask is not None:
        wj, values = wj[mask], values[mask]
    return {"L2": float(np.sqrt(np.sum(wj * values ** 2))), "Linf": float(np.max(np.abs(values)))}


def _vector_at_quad(elem, f):
    return np.einsum("qn,knd->kqd", elem.interp_quad, f)


def compute_G(k, v, mesh, elem, frames_for_gradient=None, k_quad=None):
    """Split G(k, v) into its two directional-derivative terms.

    Gradients are always tangential to the discrete surface, which is what
    LOCAL frames span; `frames_for_gradient` is accepted for interface symmetry.
    `k_quad` supplies k evaluated directly at quadrature points (for instance a
    frame vector); otherwise the nodal k is interpolated.
    """
    k = np.asarray(k, dtype=float)
    v = np.asarray(v, dtype=float)
    expected = (mesh.n_elements, elem.n_nodes, 3)
    if k.shape != expected or v.shape != expected:
        raise ValueError(f"k {k.shape} and v {v.shape} must both have shape {expected}")
    grad_v = surface_gradient(mesh, elem, v)            # (K, Nq, 3 comp, 3 dir)
    grad_k = surface_gradient(mesh, elem, k)
    kq = _vector_at_quad(elem, k) if k_quad is None else np.asarray(k_quad)
    vq = _vector_at_quad(elem, v)
    term1 = np.einsum("kqc,kqcd,kqd->kq", kq, grad_v, kq)
    term2 = np.einsum("kqc,kqcd,kqd->kq", kq, grad_k, vq)
    total = term1 - term2
    norms = {name: quad_norms(mesh, elem, val)
             for name, val in (("term1", term1), ("term2", term2), ("total", total))}
    return GSplit(term1, term2, total, norms)


def g_convergence_sweep(mesh, test_field, frame_kind, p_list, mask=None):
    """Rows (p, term1_L2, term2_L2, term1_Linf, term2_Linf) of G(e3, v) for a static field.

    `test_field(x)` returns Cartesian vectors at points x; the field is sampled
    at the solution nodes and expanded in the tangential vectors of the chosen
    frames.  Norms are restricted to the elements selected by `mask`.
    """
    from .frames import build_frames

    p_list = list(p_list)
    if p_list != sorted(p_list):
        raise ValueError("p_list must be ascending")
    rows = []
    for p in p_list:
        elem = build_reference_element(p)
        frames = build_frames(mesh, elem, frame_kind, differentials=False)
        e = frames.node
        vx = np.nan_to_num(test_field(mesh.geometry(elem).nodes), nan=0.0, posinf=0.0, neginf=0.0)
        comps = np.einsum("knd,knid->kni", vx, e[..., :2, :])
        v = np.einsum("kni,knid->knd", comps, e[..., :2, :])
        split = compute_G(e[..., 2, :], v, mesh, elem, k_quad=frames.quad[..., 2, :])
        n1 = quad_norms(mesh, elem, split.term1, mask)
        n2 = quad_norms(mesh, elem, split.term2, mask)
        rows.append((p, n1["L2"], n2["L2"], n1["Linf"], n2["Linf"]))
    return rows


SWEEP_COLUMNS = ("p", "term1_L2", "term2_L2", "term1_Linf", "term2_Linf")


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for row in rows:
            w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])
