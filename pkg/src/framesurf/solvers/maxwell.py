"""Transverse-magnetic Maxwell equations on a closed surface.

Unknowns are H = H1 e1 + H2 e2 (tangential) and E = E3 e3 (normal), with unit
permittivity and permeability:

    dH/dt = -curl(E) + F sin(w t),    dE/dt = curl(H).

The characteristic upwind flux is used at interfaces.
"""
from __future__ import annotations

import numpy as np

from ..dgops import g_residual
from .common import build_discretization
from .timestep import assemble_linear_operator, rk4_march

OMEGA = np.sqrt(2.0)
PULSE_CENTER = np.array([1.0, 0.0, 1.0]) / np.sqrt(2.0)
PULSE_WIDTH = 0.25


def manufactured_fields(x):
    """Stream function psi = z: returns V = k x grad(psi), zeta = curl(V).k and forcing F."""
    xh = x / np.linalg.norm(x, axis=-1, keepdims=True)
    V = np.cross(xh, np.array([0.0, 0.0, 1.0]) - xh[..., 2:3] * xh)   # = -sin(theta) phi_hat
    zeta = -2.0 * xh[..., 2]
    return V, zeta


def manufactured_forcing(x, omega=OMEGA):
    """F = -w V + (1/w) curl(zeta k); on the unit sphere this is (2/w - w) V."""
    V, _ = manufactured_fields(x)
    return (2.0 / omega - omega) * V


def manufactured_solution(x, t, omega=OMEGA):
    V, zeta = manufactured_fields(x)
    return V * np.cos(omega * t), zeta / omega * np.sin(omega * t)


def gaussian_pulse(x, center=PULSE_CENTER, width=PULSE_WIDTH):
    xh = x / np.linalg.norm(x, axis=-1, keepdims=True)
    return np.exp(-np.sum((xh - center) ** 2, axis=-1) / width ** 2)


class MaxwellTMOperator:
    """Linear DG right-hand side; state has shape (K, Np, 3) = (H1, H2, E3)."""

    def __init__(self, disc, with_G):
        self.disc = disc
        self.with_G = with_G
        ops, fr = disc.ops, disc.frames_e
        self.n = ops.trace_normal(fr)
        e3e = fr.edge[..., 2, :] + ops.exterior(fr.edge[..., 2, :])
        e3e /= np.linalg.norm(e3e, axis=-1, keepdims=True)
        self.tau = np.cross(e3e, self.n)                       # single valued, flips with n
        # n . (e3 x e_i) on each side's own frame
        self.n_e3xei = np.stack([np.einsum("kfed,kfed->kfe", self.n, np.cross(fr.edge[..., 2, :], fr.edge[..., i, :]))
                                 for i in range(2)], axis=-1)
        # e3 x e_i at quadrature points and nodes
        self.e3xei_q = np.cross(fr.quad[..., 2:3, :], fr.quad[..., :2, :])
        self.e3xei_n = np.cross(fr.node[..., 2:3, :], fr.node[..., :2, :])
        # E . curl(e_i) = E3 e3 . curl(e_i);  H . curl(e3) = sum_i H^i e_i . curl(e3)
        self.e3_curl_ei = np.einsum("kqd,kqid->kqi", fr.quad[..., 2, :], fr.curl_e_quad[..., :2, :])
        self.ei_curl_e3 = np.einsum("kqid,kqd->kqi", fr.quad[..., :2, :], fr.curl_e_quad[..., 2, :])

    def residual(self, state):
        ops, fr = self.disc.ops, self.disc.frames_e
        H, E = state[..., :2], state[..., 2]
        Eq, Hq = ops.to_quad(E), ops.to_quad(H)
        Ee, He = ops.to_edge(E), ops.to_edge(H)
        He_cart = np.einsum("kfei,kfeid->kfed", He, fr.edge[..., :2, :])
        Ht_in = np.einsum("kfed,kfed->kfe", He_cart, self.tau)
        Ht_out = np.einsum("kfed,kfed->kfe", ops.exterior(He_cart), self.tau)
        E_out = ops.exterior(Ee)
        E_star = 0.5 * (Ee + E_out) + 0.5 * (Ht_out - Ht_in)
        Ht_star = ops.make_single_valued(0.5 * (Ht_in + Ht_out) + 0.5 * (E_out - Ee))
        out = np.empty_like(state)
        for i in range(2):
            # dH^i/dt = -(div E*_i + G(e3, E*_i)) - E . curl(e_i),  E*_i = E3 (e3 x e_i)
            div = -ops.test_grad(Eq[..., None] * self.e3xei_q[:, :, i]) \
                + ops.test_edge(E_star * self.n_e3xei[..., i])
            if self.with_G:
                div = div + g_residual(ops, fr, E[..., None] * self.e3xei_n[:, :, i])
            out[..., i] = -div - ops.test_volume(Eq * self.e3_curl_ei[..., i])
        # dE3/dt = div(H x e3) + G(e3, H x e3) + H . curl(e3)
        Hxe3_q = -np.einsum("kqi,kqid->kqd", Hq, self.e3xei_q)
        res = -ops.test_grad(Hxe3_q) + ops.test_edge(Ht_star)
        if self.with_G:
            res = res + g_residual(ops, fr, -np.einsum("kni,knid->knd", H, self.e3xei_n))
        out[..., 2] = res + ops.test_volume(np.einsum("kqi,kqi->kq", Hq, self.ei_curl_e3))
        return out

    def __call__(self, state):
        return self.disc.ops.solve_mass(self.residual(state))

    def matrix(self):
        return assemble_linear_operator(self, self.disc.mesh.neighbors, self.disc.elem.n_nodes, 3)


def maxwell_energy(disc, state):
    ops = disc.ops
    q = ops.to_quad(state)
    return 0.5 * float(np.sum(ops.wj * np.sum(q ** 2, axis=-1)))


def run_maxwell_tm(config, return_state=False):
    cases = ("manufactured", "elf_pulse")
    if config.test_case not in cases:
        raise ValueError(f"unknown maxwell case {config.test_case!r}; available: {list(cases)}")
    disc = build_discretization(config)
    ops, fr = disc.ops, disc.frames_e
    shape = (ops.K, disc.elem.n_nodes, 3)
    op = MaxwellTMOperator(disc, config.with_G)
    A = op.matrix()
    omega = float(config.params.get("omega", OMEGA))
    x, xq = disc.nodes, disc.quad_points
    state0 = np.zeros(shape)
    manufactured = config.test_case == "manufactured"
    if manufactured:
        H0, E0 = manufactured_solution(x, 0.0, omega)
        state0[..., :2] = disc.components(H0, fr)
        state0[..., 2] = E0
        Fn = disc.components(manufactured_forcing(x, omega), fr)
        forcing = np.zeros(shape)
        forcing[..., :2] = Fn
        forcing = forcing.ravel()
        has_forcing = np.any(forcing != 0.0)
    else:
        state0[..., 2] = gaussian_pulse(x, width=float(config.params.get("width", PULSE_WIDTH)))
        has_forcing = False

    def rhs(t, u):
        du = A @ u
        return du + forcing * np.sin(omega * t) if has_forcing else du

    def diagnostics(t, u):
        s = u.reshape(shape)
        err = 0.0
        if manufactured:
            Hx, Ex = manufactured_solution(xq, t, omega)
            q = ops.to_quad(s)
            Hh = np.einsum("kqi,kqid->kqd", q[..., :2], fr.quad[..., :2, :])
            err = np.sqrt(np.sum(ops.wj * (np.sum((Hh - Hx) ** 2, axis=-1) + (q[..., 2] - Ex) ** 2)))
        return err, float(np.sum(ops.wj * ops.to_quad(s[..., 2]))), maxwell_energy(disc, s)

    u, series = rk4_march(rhs, state0.ravel(), config.dt, config.n_steps, diagnostics,
                          config.diagnostic_stride)
    return (series, u.reshape(shape)) if return_state else series
