"""Scalar conservation law du/dt + div(u v) = 0 with a cosine bell in solid-body rotation."""
from __future__ import annotations

import numpy as np

from ..dgops import g_residual
from ..fields import rotate
from .common import build_discretization
from .timestep import assemble_linear_operator, rk4_march

ALPHA = np.pi / 4
ROTATION_AXIS = np.array([-np.sin(ALPHA), 0.0, np.cos(ALPHA)])
ANGULAR_SPEED = np.pi          # one revolution every 2 time units
BELL_RADIUS = 1.0 / 3.0
BELL_CENTER = np.array([0.0, -1.0, 0.0])


def solid_body_velocity(x, axis=ROTATION_AXIS, omega=ANGULAR_SPEED):
    return omega * np.cross(axis, x)


def cosine_bell(x, center=BELL_CENTER, radius=BELL_RADIUS, amplitude=1.0):
    xh = x / np.linalg.norm(x, axis=-1, keepdims=True)
    d = np.arccos(np.clip(xh @ center, -1.0, 1.0))
    return np.where(d < radius, 0.5 * amplitude * (1.0 + np.cos(np.pi * d / radius)), 0.0)


def exact_bell(x, t, axis=ROTATION_AXIS, omega=ANGULAR_SPEED):
    return cosine_bell(rotate(x, axis, -omega * t))


class AdvectionOperator:
    """Linear DG right-hand side for a fixed velocity field."""

    def __init__(self, disc, velocity, with_G):
        self.disc = disc
        self.with_G = with_G
        ops, fr = disc.ops, disc.frames_e
        comps = disc.components(velocity(disc.nodes), fr)
        self.v_node = np.einsum("kni,knid->knd", comps, fr.node[..., :2, :])
        self.v_quad = np.einsum("kqi,kqid->kqd", ops.to_quad(comps), fr.quad[..., :2, :])
        ve = np.einsum("kfei,kfeid->kfed", ops.to_edge(comps), fr.edge[..., :2, :])
        n = ops.trace_normal(fr)
        self.vn = 0.5 * np.einsum("kfed,kfed->kfe", ve + ops.exterior(ve), n)

    def residual(self, u):
        ops = self.disc.ops
        res = ops.test_grad(ops.to_quad(u)[..., None] * self.v_quad)
        ue = ops.to_edge(u)
        flux = self.vn * np.where(self.vn >= 0.0, ue, ops.exterior(ue))
        res = res - ops.test_edge(ops.make_single_valued(flux))
        if self.with_G:
            res = res - g_residual(ops, self.disc.frames_e, u[..., None] * self.v_node)
        return res

    def __call__(self, u):
        return self.disc.ops.solve_mass(self.residual(u))

    def matrix(self):
        K, Np = self.disc.ops.K, self.disc.elem.n_nodes
        return assemble_linear_operator(lambda w: self(w[..., 0])[..., None],
                                        self.disc.mesh.neighbors, Np)


def run_advection(config, return_state=False):
    if config.test_case != "cosine_bell":
        raise ValueError(f"unknown advection case {config.test_case!r}; available: ['cosine_bell']")
    disc = build_discretization(config)
    ops = disc.ops
    axis = np.asarray(config.params.get("axis", ROTATION_AXIS), dtype=float)
    omega = float(config.params.get("omega", ANGULAR_SPEED))
    op = AdvectionOperator(disc, lambda x: solid_body_velocity(x, axis, omega), config.with_G)
    A = op.matrix()
    shape = (ops.K, disc.elem.n_nodes)
    u0 = cosine_bell(disc.nodes).ravel()
    xq = disc.quad_points

    def rhs(t, u):
        return A @ u

    def diagnostics(t, u):
        u = u.reshape(shape)
        uq = ops.to_quad(u)
        err = np.sqrt(np.sum(ops.wj * (uq - exact_bell(xq, t, axis, omega)) ** 2))
        return err, np.sum(ops.wj * uq), 0.5 * np.sum(ops.wj * uq ** 2)

    u, series = rk4_march(rhs, u0, config.dt, config.n_steps, diagnostics, config.diagnostic_stride)
    return (series, u.reshape(shape)) if return_state else series
