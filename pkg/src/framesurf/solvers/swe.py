"""Shallow water equations with two sets of moving frames.

The momentum H u is stored by its components along the LOCAL frames e_i; the
divergence terms div(H u), div(H u^i u) are evaluated with a second frame set
d_i (LOCAL or LOCSPH).  Interface fluxes are Lax-Friedrichs.  All quantities
are nondimensional: unit radius and a time unit of one day.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from ..dgops import g_residual_matrix
from ..fields import spherical_angles, spherical_basis
from ..frames import surface_gradient
from .common import build_discretization
from .timestep import rk4_march

DAY = 86400.0
EARTH_RADIUS = 6.37122e6
VELOCITY_SCALE = EARTH_RADIUS / DAY             # m/s per nondimensional unit
OMEGA_EARTH = 7.292e-5 * DAY


def _unit(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


@dataclass(frozen=True)
class SWEState:
    """Analytic fields of a test case at time t (all Cartesian, evaluated on unit directions)."""
    H: np.ndarray
    u: np.ndarray


class SWETestCase:
    g: float
    has_exact = False

    def coriolis(self, x):
        return 2.0 * OMEGA_EARTH * _unit(x)[..., 2]

    def bottom(self, x):
        """Still water depth H0."""
        return np.ones(x.shape[:-1])

    def state(self, x, t):
        raise NotImplementedError


class SteadyZonal(SWETestCase):
    """Solid-body flow about a tilted axis with the Coriolis axis tilted alike."""
    has_exact = True

    def __init__(self, alpha=np.pi / 4, g=2.94e4 / VELOCITY_SCALE ** 2, u0=2.0 * np.pi / 12.0,
                 omega=OMEGA_EARTH):
        self.g, self.u0, self.omega = g, u0, omega
        self.axis = np.array([-np.sin(alpha), 0.0, np.cos(alpha)])

    def coriolis(self, x):
        return 2.0 * self.omega * (_unit(x) @ self.axis)

    def state(self, x, t):
        xh = _unit(x)
        c = xh @ self.axis
        H = 1.0 - (self.omega * self.u0 + 0.5 * self.u0 ** 2) * c ** 2 / self.g
        return SWEState(H, self.u0 * np.cross(self.axis, xh))


class UnsteadyZonal(SWETestCase):
    """Solid-body flow whose axis precesses about the rotation axis; varying still depth."""
    has_exact = True

    def __init__(self, alpha=np.pi / 4, k1=133681.0, k2=10.0, u0=2.0 * np.pi / 12.0,
                 omega=OMEGA_EARTH):
        self.g = k1 / VELOCITY_SCALE ** 2            # depth scaled so that g H = k1 at rest
        self.k2 = k2 / VELOCITY_SCALE ** 2
        self.u0, self.omega = u0, omega
        self.axis0 = np.array([-np.sin(alpha), 0.0, np.cos(alpha)])

    def axis(self, t):
        a = -self.omega * t
        c, s = np.cos(a), np.sin(a)
        x, y, z = self.axis0
        return np.array([c * x - s * y, s * x + c * y, z])

    def bottom(self, x):
        z = _unit(x)[..., 2]
        return 1.0 - self.k2 / self.g - (self.omega * z) ** 2 / (2.0 * self.g)

    def state(self, x, t):
        xh = _unit(x)
        w = self.u0 * self.axis(t)
        H = 1.0 - 0.5 * (xh @ w + self.omega * xh[..., 2]) ** 2 / self.g
        return SWEState(H, np.cross(w, xh))


class RossbyHaurwitz(SWETestCase):
    """Wavenumber-R Rossby-Haurwitz wave (no exact solution)."""

    def __init__(self, R=4, omega_w=7.848e-6 * DAY, K=7.848e-6 * DAY, h0=8000.0, gravity=9.80616):
        self.R, self.w, self.K = R, omega_w, K
        self.g = gravity * h0 / VELOCITY_SCALE ** 2
        self.Omega = OMEGA_EARTH

    def state(self, x, t):
        if t != 0.0:
            raise ValueError("rossby_haurwitz provides initial data only")
        R, w, K, Om = self.R, self.w, self.K, self.Omega
        theta, phi = spherical_angles(x)
        cl, sl = np.sin(theta), np.cos(theta)              # cos/sin of latitude
        A = 0.5 * w * (2 * Om + w) * cl ** 2 + 0.25 * K ** 2 * (
            (R + 1) * cl ** (2 * R + 2) + (2 * R ** 2 - R - 2) * cl ** (2 * R) - 2 * R ** 2 * cl ** (2 * R - 2))
        B = 2 * (Om + w) * K / ((R + 1) * (R + 2)) * cl ** R * ((R ** 2 + 2 * R + 2) - (R + 1) ** 2 * cl ** 2)
        C = 0.25 * K ** 2 * cl ** (2 * R) * ((R + 1) * cl ** 2 - (R + 2))
        H = 1.0 + (A + B * np.cos(R * phi) + C * np.cos(2 * R * phi)) / self.g
        u_east = w * cl + K * cl ** (R - 1) * (R * sl ** 2 - cl ** 2) * np.cos(R * phi)
        u_north = -K * R * cl ** (R - 1) * sl * np.sin(R * phi)
        e_theta, e_phi = spherical_basis(x)
        return SWEState(H, u_east[..., None] * e_phi - u_north[..., None] * e_theta)


class PerturbedJet(SWETestCase):
    """Barotropically unstable mid-latitude jet with a localized height bump."""

    def __init__(self, umax=80.0, h_mean=1.0e4, h_hat=120.0, gravity=9.80616, n_table=40001):
        self.umax = umax / VELOCITY_SCALE
        self.g = gravity * h_mean / VELOCITY_SCALE ** 2
        self.h_hat = h_hat / h_mean
        self.phi0, self.phi1 = np.pi / 7, np.pi / 2 - np.pi / 7
        self.en = np.exp(-4.0 / (self.phi1 - self.phi0) ** 2)
        lat = np.linspace(-np.pi / 2, np.pi / 2, n_table)
        u = self.zonal_wind(lat)
        dgh = -u * (2.0 * OMEGA_EARTH * np.sin(lat) + np.tan(lat) * u)
        gh = cumulative_trapezoid(dgh, lat, initial=0.0)
        # shift so that the area-mean depth is one
        mean = trapezoid(gh * np.cos(lat), lat) / 2.0
        self._lat, self._h = lat, 1.0 + (gh - mean) / self.g

    def zonal_wind(self, lat):
        lat = np.asarray(lat, dtype=float)
        inside = (lat > self.phi0) & (lat < self.phi1)
        out = np.zeros_like(lat)
        li = lat[inside]
        out[inside] = self.umax / self.en * np.exp(1.0 / ((li - self.phi0) * (li - self.phi1)))
        return out

    def state(self, x, t):
        if t != 0.0:
            raise ValueError("perturbed_jet provides initial data only")
        theta, lon = spherical_angles(x)
        lat = np.pi / 2 - theta
        lon = np.where(lon > np.pi, lon - 2 * np.pi, lon)
        H = np.interp(lat, self._lat, self._h)
        H = H + self.h_hat * np.cos(lat) * np.exp(-(lon * 3.0) ** 2) * np.exp(-((np.pi / 4 - lat) * 15.0) ** 2)
        _, e_phi = spherical_basis(x)
        return SWEState(H, self.zonal_wind(lat)[..., None] * e_phi)


SWE_CASES = {
    "steady_zonal": SteadyZonal,
    "unsteady_zonal": UnsteadyZonal,
    "rossby_haurwitz": RossbyHaurwitz,
    "perturbed_jet": PerturbedJet,
}


def make_case(name, **params):
    if name not in SWE_CASES:
        raise ValueError(f"unknown swe case {name!r}; available: {sorted(SWE_CASES)}")
    return SWE_CASES[name](**params)


def _apply_g(B, w):
    """Precomputed G residual blocks B (K, Np, 3 Np) applied to w (K, Np, 3, m) -> (K, Np, m)."""
    K = w.shape[0]
    return np.matmul(B, w.reshape(K, -1, w.shape[-1]))


class SWEOperator:
    """Nonlinear DG right-hand side; state has shape (K, Np, 3) = (H, H u^1, H u^2)."""

    def __init__(self, disc, case, with_G, frame_tendency=False):
        self.disc, self.case, self.with_G = disc, case, with_G
        self.frame_tendency = frame_tendency
        ops, fe, fd = disc.ops, disc.frames_e, disc.frames_d
        self.g = case.g
        self.n_d = ops.trace_normal(fd)
        self.n_e = ops.trace_normal(fe)
        self.f_q = case.coriolis(disc.quad_points)
        H0 = case.bottom(disc.nodes)
        self.H0_q = ops.to_quad(H0)
        grad_H0 = surface_gradient(disc.mesh, disc.elem, H0)
        self.src_q = self.g * np.einsum("kqd,kqid->kqi", grad_H0, fe.quad[..., :2, :])
        self.has_source = bool(np.any(self.src_q != 0.0))
        if frame_tendency:
            # the H u . grad(e_i) . u term that the component form otherwise drops
            self.grad_e = np.stack([surface_gradient(disc.mesh, disc.elem, fe.node[..., i, :])
                                    for i in range(2)], axis=2)
        if with_G:
            K, Np = ops.K, disc.elem.n_nodes
            self.Bd = g_residual_matrix(ops, fd).reshape(K, Np, 3 * Np)
            self.Be = g_residual_matrix(ops, fe).reshape(K, Np, 3 * Np)

    def _project_d(self, v, frames):
        d3 = frames[..., 2, :]
        return v - np.einsum("...d,...d->...", v, d3)[..., None] * d3

    def residual(self, state):
        ops, fe, fd, g = self.disc.ops, self.disc.frames_e, self.disc.frames_d, self.g
        H, m = state[..., 0], state[..., 1:]
        # volume terms
        Hq, mq = ops.to_quad(H), ops.to_quad(m)
        Mq = np.einsum("kqi,kqid->kqd", mq, fe.quad[..., :2, :])
        Mdq = self._project_d(Mq, fd.quad)
        udq = Mdq / Hq[..., None]
        out = np.empty_like(state)
        out[..., 0] = ops.test_grad(Mdq)
        pq = 0.5 * g * Hq ** 2
        for i in range(2):
            r = ops.test_grad(mq[..., i, None] * udq) + ops.test_grad(pq[..., None] * fe.quad[..., i, :])
            r = r + ops.test_volume(pq * fe.div_e_quad[..., i])
            out[..., 1 + i] = r
        sign = (1.0, -1.0)
        for i in range(2):
            src = sign[i] * self.f_q * mq[..., 1 - i]
            if self.has_source:
                src = src + Hq * self.src_q[..., i]
            if self.frame_tendency:
                src = src + np.einsum("kqc,kqcd,kqd->kq", Mq, self.grad_e[:, :, i], Mq) / Hq
            out[..., 1 + i] += ops.test_volume(src)
        # interface fluxes
        He, me = ops.to_edge(H), ops.to_edge(m)
        Me = np.einsum("kfei,kfeid->kfed", me, fe.edge[..., :2, :])
        Ho, Mo = ops.exterior(He), ops.exterior(Me)
        un_i = np.einsum("kfed,kfed->kfe", Me, self.n_d) / He
        un_o = np.einsum("kfed,kfed->kfe", Mo, self.n_d) / Ho
        lam = np.maximum(np.abs(un_i) + np.sqrt(g * np.abs(He)), np.abs(un_o) + np.sqrt(g * np.abs(Ho)))
        FH = 0.5 * (He * un_i + Ho * un_o) - 0.5 * lam * (Ho - He)
        FM = (0.5 * (Me * un_i[..., None] + Mo * un_o[..., None])
              + 0.25 * g * (He ** 2 + Ho ** 2)[..., None] * self.n_e
              - 0.5 * lam[..., None] * (Mo - Me))
        FH = ops.make_single_valued(FH)
        FM = ops.make_single_valued(FM)
        out[..., 0] -= ops.test_edge(FH)
        for i in range(2):
            out[..., 1 + i] -= ops.test_edge(np.einsum("kfed,kfed->kfe", FM, fe.edge[..., i, :]))
        if self.with_G:
            Mn = np.einsum("kni,knid->knd", m, fe.node[..., :2, :])
            Mdn = self._project_d(Mn, fd.node)
            udn = Mdn / H[..., None]
            pn = 0.5 * g * H ** 2
            wd = np.stack([Mdn, m[..., 0, None] * udn, m[..., 1, None] * udn], axis=-1)
            we = pn[..., None, None] * np.swapaxes(fe.node[..., :2, :], -1, -2)
            out -= _apply_g(self.Bd, wd)
            out[..., 1:] -= _apply_g(self.Be, we)
        return out

    def __call__(self, state):
        return self.disc.ops.solve_mass(self.residual(state))


def compute_diagnostics(disc, state, model, g=None, H0=None):
    """(mass, energy) of a state.

    advection: state (K, Np) -> mass = int u, energy = int u^2 / 2.
    maxwell_tm: state (K, Np, 3) -> mass = int E3, energy = int (|H|^2 + E^2) / 2.
    swe: state (K, Np, 3) -> mass = int H, energy = int (H|u|^2 + g (H^2 - H0^2)) / 2.
    """
    ops = disc.ops
    q = ops.to_quad(state)
    if model == "advection":
        return float(np.sum(ops.wj * q)), 0.5 * float(np.sum(ops.wj * q ** 2))
    if model == "maxwell_tm":
        return float(np.sum(ops.wj * q[..., 2])), 0.5 * float(np.sum(ops.wj * np.sum(q ** 2, axis=-1)))
    if model == "swe":
        if g is None:
            raise ValueError("swe diagnostics need g")
        H = q[..., 0]
        H0 = np.ones_like(H) if H0 is None else ops.to_quad(H0)
        m2 = np.sum(q[..., 1:] ** 2, axis=-1)         # e1, e2 orthonormal
        e = 0.5 * m2 / H + 0.5 * g * (H ** 2 - H0 ** 2)
        return float(np.sum(ops.wj * H)), float(np.sum(ops.wj * e))
    raise ValueError(f"unknown model {model!r}")


def zero_tendency_field(u, frames, mesh, elem):
    """u . ((u . grad) e_i) at quadrature points for i = 1, 2 -> (K, Nq, 2).

    `u` is a nodal Cartesian field or a Field; `frames` a FrameField or nodal
    frame array (K, Np, 3, 3).
    """
    u = u.cartesian() if hasattr(u, "cartesian") else np.asarray(u, dtype=float)
    node = frames.node if hasattr(frames, "node") else np.asarray(frames)
    uq = np.einsum("qn,knd->kqd", elem.interp_quad, u)
    out = []
    for i in range(2):
        grad = surface_gradient(mesh, elem, node[..., i, :])     # (K, Nq, comp, dir)
        out.append(np.einsum("kqc,kqcd,kqd->kq", uq, grad, uq))
    return np.stack(out, axis=-1)


def zero_tendency_residual(u, frames, mesh, elem):
    """L2 norm over the surface of the zero-tendency terms for i = 1, 2 combined."""
    z = zero_tendency_field(u, frames, mesh, elem)
    wj = mesh.geometry(elem).jacobian * elem.quad_w
    return float(np.sqrt(np.sum(wj[..., None] * z ** 2)))


def run_swe(config, return_state=False):
    params = dict(config.params)
    params.pop("normal_rule", None)
    frame_tendency = bool(params.pop("frame_tendency", False))
    case = make_case(config.test_case, **params)
    disc = build_discretization(config)
    ops, fe = disc.ops, disc.frames_e
    op = SWEOperator(disc, case, config.with_G, frame_tendency)
    shape = (ops.K, disc.elem.n_nodes, 3)
    x, xq = disc.nodes, disc.quad_points
    s0 = case.state(x, 0.0)
    state0 = np.empty(shape)
    state0[..., 0] = s0.H
    state0[..., 1:] = disc.components(s0.H[..., None] * s0.u, fe)
    H0 = case.bottom(x)

    def rhs(t, u):
        return op(u.reshape(shape)).ravel()

    def check(u):
        if np.min(u.reshape(shape)[..., 0]) <= 0.0:
            return "non-positive depth"
        return None

    def diagnostics(t, u):
        s = u.reshape(shape)
        err = np.nan
        if case.has_exact:
            Hq = ops.to_quad(s[..., 0])
            err = float(np.sqrt(np.sum(ops.wj * (Hq - case.state(xq, t).H) ** 2)))
        return (err,) + compute_diagnostics(disc, s, "swe", case.g, H0)

    u, series = rk4_march(rhs, state0.ravel(), config.dt, config.n_steps, diagnostics,
                          config.diagnostic_stride, check=check)
    return (series, u.reshape(shape)) if return_state else series
