"""Analytic vector fields on the unit sphere, given as Cartesian vectors at points x."""
from __future__ import annotations

import numpy as np

RH_OMEGA = 7.848e-6
RH_K = 7.848e-6


def spherical_angles(x):
    """Colatitude theta and longitude phi of (projected) points."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    theta = np.arccos(np.clip(x[..., 2] / r, -1.0, 1.0))
    phi = np.arctan2(x[..., 1], x[..., 0])
    return theta, phi


def spherical_basis(x):
    """Unit vectors theta_hat and phi_hat at points x."""
    theta, phi = spherical_angles(x)
    ct, st, cp, sp = np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)
    th = np.stack([ct * cp, ct * sp, -st], axis=-1)
    ph = np.stack([-sp, cp, np.zeros_like(phi)], axis=-1)
    return th, ph


def from_spherical(x, v_theta, v_phi):
    th, ph = spherical_basis(x)
    return v_theta[..., None] * th + v_phi[..., None] * ph


def divergence_test1(x):
    """Divergence-free field v_theta = 1/sin(theta), v_phi = 1 (singular at the poles)."""
    theta, _ = spherical_angles(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        return from_spherical(x, 1.0 / np.sin(theta), np.ones_like(theta))


def rossby_haurwitz_velocity(x, omega=RH_OMEGA, K=RH_K, R=4):
    """Divergence-free Rossby-Haurwitz wave; theta_hat points from north to south."""
    theta, phi = spherical_angles(x)
    st, ct = np.sin(theta), np.cos(theta)
    v_phi = omega * st + K * st ** (R - 1) * (R * ct ** 2 - st ** 2) * np.cos(R * phi)
    v_theta = R * K * st ** (R - 1) * ct * np.sin(R * phi)
    return from_spherical(x, v_theta, v_phi)


def curl_test1(x):
    """Curl-free field v_theta = 1, v_phi = 1/sin(theta)."""
    theta, _ = spherical_angles(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        return from_spherical(x, np.ones_like(theta), 1.0 / np.sin(theta))


def flipped_rossby_haurwitz(x, omega=RH_OMEGA, K=RH_K, R=4):
    """Rossby-Haurwitz flow rotated by 90 degrees in the tangent plane (curl-free)."""
    theta, phi = spherical_angles(x)
    st, ct = np.sin(theta), np.cos(theta)
    v_theta = omega * st + K * st ** (R - 1) * (R * ct ** 2 - st ** 2) * np.cos(R * phi)
    v_phi = -R * K * st ** (R - 1) * ct * np.sin(R * phi)
    return from_spherical(x, v_theta, v_phi)


STATIC_FIELDS = {
    ("div", 1): divergence_test1,
    ("div", 2): rossby_haurwitz_velocity,
    ("curl", 1): curl_test1,
    ("curl", 2): flipped_rossby_haurwitz,
}


def rotate(x, axis, angle):
    """Rodrigues rotation of points x about a unit axis."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    c, s = np.cos(angle), np.sin(angle)
    return (x * c + np.cross(axis, x) * s
            + np.einsum("...d,d->...", x, axis)[..., None] * axis * (1.0 - c))
