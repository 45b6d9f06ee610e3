import csv

import numpy as np
import pytest

from framesurf.fields import divergence_test1, rossby_haurwitz_velocity
from framesurf.frames import build_frames
from framesurf.gterm import (
    SWEEP_COLUMNS, compute_G, g_convergence_sweep, quad_norms, write_sweep_csv,
)
from framesurf.static import polar_cap_mask


@pytest.fixture(scope="module")
def setup(sphere, elem5):
    loc = build_frames(sphere, elem5, "local", differentials=False)
    sph = build_frames(sphere, elem5, "locsph", differentials=False)
    return sphere, elem5, loc, sph


def _tangent_field(frames, x, field):
    v = field(x)
    comps = np.einsum("knd,knid->kni", v, frames.node[..., :2, :])
    return np.einsum("kni,knid->knd", comps, frames.node[..., :2, :])


class TestBasics:
    def test_zero_field(self, setup):
        mesh, elem, _, sph = setup
        split = compute_G(sph.node[..., 2, :], np.zeros_like(sph.node[..., 0, :]), mesh, elem)
        assert not split.total.any()
        assert split.norms["total"] == {"L2": 0.0, "Linf": 0.0}

    def test_total_is_difference(self, setup):
        mesh, elem, _, sph = setup
        split = compute_G(sph.node[..., 2, :], sph.node[..., 0, :], mesh, elem)
        np.testing.assert_array_equal(split.total, split.term1 - split.term2)

    def test_linear_in_v(self, setup, rng):
        mesh, elem, _, sph = setup
        k = sph.node[..., 2, :]
        v, w = rng.standard_normal((2,) + k.shape)
        a, b = 0.7, -2.3
        lhs = compute_G(k, a * v + b * w, mesh, elem).total
        rhs = a * compute_G(k, v, mesh, elem).total + b * compute_G(k, w, mesh, elem).total
        assert np.abs(lhs - rhs).max() < 1e-12 * max(1.0, np.abs(lhs).max())

    def test_shape_mismatch(self, setup):
        mesh, elem, _, sph = setup
        with pytest.raises(ValueError, match="shape"):
            compute_G(sph.node[..., 2, :], sph.node[:1, :, 0, :], mesh, elem)

    def test_unit_k_has_no_second_term(self, setup):
        # k.(v.grad)k = v.grad(|k|^2)/2 vanishes for a unit field k
        mesh, elem, _, sph = setup
        split = compute_G(sph.node[..., 0, :], sph.node[..., 2, :], mesh, elem)
        assert split.norms["term2"]["Linf"] < 1e-6
        assert split.norms["term1"]["L2"] > 1.0


class TestFrames:
    def test_local_first_term_vanishes(self, setup):
        # the discrete gradient is tangent to the discrete surface, so LOCAL e3 . grad = 0
        mesh, elem, loc, _ = setup
        v = _tangent_field(loc, mesh.geometry(elem).nodes, rossby_haurwitz_velocity)
        split = compute_G(loc.node[..., 2, :], v, mesh, elem, k_quad=loc.quad[..., 2, :])
        assert split.norms["term1"]["Linf"] < 1e-14 * np.abs(v).max() * 1e3

    def test_locsph_first_term_is_mesh_limited(self, sphere):
        mask = polar_cap_mask(sphere)
        rows = g_convergence_sweep(sphere, divergence_test1, "locsph", [5, 6, 7, 8], mask)
        t1 = np.array([r[1] for r in rows])
        assert t1.max() / t1.min() < 1.5
        assert t1.min() > 1e-4

    def test_locsph_second_term_decays(self, sphere):
        rows = g_convergence_sweep(sphere, divergence_test1, "locsph", [3, 5, 7], polar_cap_mask(sphere))
        t2 = [r[2] for r in rows]
        assert t2[0] > 10 * t2[1] > 100 * t2[2]

    def test_local_sweep_first_term_zero(self, sphere):
        rows = g_convergence_sweep(sphere, rossby_haurwitz_velocity, "local", [3, 4], None)
        assert all(r[1] < 1e-14 for r in rows)


class TestSweep:
    def test_requires_ascending(self, sphere):
        with pytest.raises(ValueError, match="ascending"):
            g_convergence_sweep(sphere, divergence_test1, "locsph", [4, 3])

    def test_mask_restricts(self, setup):
        mesh, elem, *_ = setup
        vals = np.ones((mesh.n_elements, elem.n_quad))
        mask = polar_cap_mask(mesh)
        full, part = quad_norms(mesh, elem, vals), quad_norms(mesh, elem, vals, mask)
        assert part["L2"] < full["L2"]
        assert full["L2"] ** 2 == pytest.approx(4 * np.pi, rel=1e-4)

    def test_csv(self, sphere, tmp_path):
        rows = g_convergence_sweep(sphere, divergence_test1, "locsph", [2, 3], polar_cap_mask(sphere))
        path = tmp_path / "sweep.csv"
        write_sweep_csv(rows, path)
        with open(path) as fh:
            got = list(csv.reader(fh))
        assert tuple(got[0]) == SWEEP_COLUMNS
        assert [int(r[0]) for r in got[1:]] == [2, 3]
        assert float(got[1][2]) == rows[0][2]
