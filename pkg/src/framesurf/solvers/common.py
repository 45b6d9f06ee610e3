"""Shared setup for the time-dependent solvers."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..dgops import DGOperators
from ..frames import build_frames
from ..mesh import generate_ellipsoid_mesh, generate_sphere_mesh
from ..refelem import build_reference_element


@lru_cache(maxsize=8)
def cached_mesh(surface, refine, q, ratio):
    if surface == "sphere":
        return generate_sphere_mesh(refine, q)
    if surface == "ellipsoid":
        return generate_ellipsoid_mesh(refine, q, ratio)
    raise ValueError(f"unknown surface {surface!r}")


@dataclass(eq=False)
class Discretization:
    mesh: object
    elem: object
    ops: DGOperators
    frames_e: object
    frames_d: object

    @property
    def nodes(self):
        return self.ops.geom.nodes

    @property
    def quad_points(self):
        return self.ops.geom.quad_points

    def components(self, vec, frames=None, n=2):
        """Frame components of nodal Cartesian vectors."""
        frames = self.frames_e if frames is None else frames
        return np.einsum("knd,knid->kni", vec, frames.node[..., :n, :])


def build_discretization(config, normal_rule=None):
    mesh = cached_mesh(config.surface, config.refine, config.q,
                       config.ratio if config.surface == "ellipsoid" else 1.0)
    elem = build_reference_element(config.p)
    ops = DGOperators(mesh, elem)
    rule = normal_rule or config.params.get("normal_rule")
    if rule is None:
        rule = "radial_sphere"
    frames_e = build_frames(mesh, elem, config.frames_e, rule)
    frames_d = frames_e if config.frames_d == config.frames_e else build_frames(mesh, elem, config.frames_d, rule)
    return Discretization(mesh, elem, ops, frames_e, frames_d)
