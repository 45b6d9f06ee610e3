import numpy as np
import pytest

from framesurf.dgops import (
    DGOperators, Field, FluxRule, g_residual, g_residual_matrix, surface_flux_integral,
    upwind_normal_flux, weak_curl_normal, weak_directional_gradient, weak_divergence,
    weak_divergence_residual,
)
from framesurf.frames import build_frames, surface_gradient
from framesurf.mesh import generate_sphere_mesh
from framesurf.refelem import build_reference_element

Z = np.array([0.0, 0.0, 1.0])


@pytest.fixture(scope="module")
def disc(sphere, elem5):
    ops = DGOperators(sphere, elem5)
    return ops, build_frames(sphere, elem5, "local"), build_frames(sphere, elem5, "locsph")


def _grad_z(x):
    """Surface gradient of z on the unit sphere; its divergence is -2z."""
    xh = x / np.linalg.norm(x, axis=-1, keepdims=True)
    return Z - xh[..., 2:3] * xh


def _field(vec, frames):
    return Field("frame_vector", np.einsum("knd,knid->kni", vec, frames.node[..., :2, :]), frames)


class TestAssembly:
    def test_mass_symmetric_positive(self, disc):
        ops = disc[0]
        M = ops.mass
        assert np.abs(M - np.swapaxes(M, 1, 2)).max() < 1e-15
        assert np.linalg.eigvalsh(M).min() > 0

    def test_integrate_constant_is_area(self, disc):
        ops = disc[0]
        assert ops.integrate(np.ones((ops.K, ops.elem.n_nodes))) == pytest.approx(4 * np.pi, rel=1e-4)

    def test_edge_weights_shared(self, disc):
        ops = disc[0]
        np.testing.assert_array_equal(ops.edge_wj, ops.exterior(ops.edge_wj))

    def test_exterior_is_involution(self, disc, rng):
        ops = disc[0]
        u = rng.standard_normal((ops.K, 3, ops.elem.n_edge_quad))
        np.testing.assert_array_equal(ops.exterior(ops.exterior(u)), u)

    def test_edge_points_match(self, disc):
        ops = disc[0]
        x = ops.geom.edge_points
        assert np.abs(x - ops.exterior(x)).max() < 1e-14


class TestFluxes:
    def test_single_valued_antisymmetric(self, disc, rng):
        ops = disc[0]
        F = ops.make_single_valued(rng.standard_normal((ops.K, 3, ops.elem.n_edge_quad)))
        np.testing.assert_array_equal(F, -ops.exterior(F))

    @pytest.mark.parametrize("kind", ["local", "locsph"])
    def test_trace_normal(self, disc, kind):
        ops, loc, sph = disc
        fr = loc if kind == "local" else sph
        n = ops.trace_normal(fr)
        g = ops.geom
        assert np.abs(np.linalg.norm(n, axis=-1) - 1).max() < 1e-14
        assert np.abs(np.einsum("kfed,kfed->kfe", n, g.edge_tangent)).max() < 1e-14
        np.testing.assert_array_equal(n, -ops.exterior(n))
        # points away from the element centroid
        c = g.nodes.mean(axis=1)[:, None, None, :]
        assert np.einsum("kfed,kfed->kfe", n, g.edge_points - c).min() > 0

    def test_upwind_consistency(self, rng):
        a = rng.standard_normal(50)
        np.testing.assert_array_equal(upwind_normal_flux(a, a), a)

    def test_upwind_picks_inflow_side(self):
        np.testing.assert_array_equal(upwind_normal_flux(np.array([2.0, -2.0]), np.array([1.0, -1.0])),
                                      [2.0, -1.0])

    def test_orientation_mismatch(self, disc):
        ops = disc[0]
        with pytest.raises(ValueError, match="orientation"):
            surface_flux_integral(ops, np.zeros((1, 3, 2, 3)), np.zeros((1, 3, 3, 3)), FluxRule())

    def test_flux_kinds(self):
        with pytest.raises(ValueError, match="flux kind"):
            FluxRule("roe")

    def test_lax_friedrichs_needs_state(self, disc):
        ops, loc, _ = disc
        t = np.zeros((ops.K, 3, ops.elem.n_edge_quad, 3))
        with pytest.raises(ValueError, match="Lax-Friedrichs"):
            surface_flux_integral(ops, t, t, FluxRule("lax_friedrichs"), ops.trace_normal(loc))


class TestDivergence:
    @pytest.mark.parametrize("kind", ["local", "locsph"])
    @pytest.mark.parametrize("flux", ["upwind", "central"])
    def test_telescoping(self, disc, rng, kind, flux):
        # the nodal basis sums to one, so the residual total is a sum of cancelling fluxes
        ops, loc, sph = disc
        fr = loc if kind == "local" else sph
        comps = rng.standard_normal((ops.K, ops.elem.n_nodes, 2))
        r = weak_divergence_residual(ops, comps, fr, FluxRule(flux), False)
        assert abs(r.sum()) < 1e-11

    def test_divergence_of_gradient(self, disc):
        ops, _, sph = disc
        x = ops.geom.nodes
        d = weak_divergence(ops, _field(_grad_z(x), sph), sph, FluxRule("central"), with_G=True)
        assert ops.l2_norm(d + 2 * x[..., 2]) < 1e-3

    def test_zero_field(self, disc):
        ops, loc, _ = disc
        v = Field("frame_vector", np.zeros((ops.K, ops.elem.n_nodes, 2)), loc)
        assert not weak_divergence(ops, v, loc).any()

    def test_frames_must_match(self, disc):
        ops, loc, sph = disc
        v = Field("frame_vector", np.zeros((ops.K, ops.elem.n_nodes, 2)), loc)
        with pytest.raises(ValueError, match="frames"):
            weak_divergence(ops, v, sph)


def _monomials(elem, deg, coef):
    out = 0.0
    for i in range(deg + 1):
        for j in range(deg + 1 - i):
            out = out + coef[:, i, j, None] * elem.r ** i * elem.s ** j
    return out


class TestDivergenceTheorem:
    """Per element, int div(w) dA equals the conormal flux of w around the boundary."""

    @pytest.mark.parametrize("curved,p", [(True, 5), (True, 8), (False, 4)])
    def test_polynomial_tangent_field(self, sphere, rng, curved, p):
        mesh = sphere if curved else generate_sphere_mesh(1, q=1)
        elem = build_reference_element(p)
        ops = DGOperators(mesh, elem)
        g = ops.geom
        # w = a c_r + b c_s is tangent and polynomial of degree <= p - 1
        deg = p - mesh.geometric_order_q
        a, b = (_monomials(elem, deg, rng.standard_normal((mesh.n_elements, deg + 1, deg + 1)))
                for _ in range(2))
        w = a[..., None] * g.node_tangents[:, :, 0] + b[..., None] * g.node_tangents[:, :, 1]
        div = np.einsum("kqcc->kq", surface_gradient(mesh, elem, w))
        volume = np.sum(ops.wj * div, axis=1)
        flux = np.einsum("kfed,kfed->kfe", ops.to_edge(w), g.edge_conormals)
        boundary = np.sum(g.edge_jacobian * elem.edge_w * flux, axis=(1, 2))
        assert np.abs(volume - boundary).max() < 1e-10

    def test_weak_divergence_integrates_to_flux(self, disc, rng):
        ops, _, sph = disc
        comps = rng.standard_normal((ops.K, ops.elem.n_nodes, 2))
        d = ops.solve_mass(weak_divergence_residual(ops, comps, sph, FluxRule("central"), False))
        vl = np.einsum("kfei,kfeid->kfed", ops.to_edge(comps), sph.edge[..., :2, :])
        F = 0.5 * np.einsum("kfed,kfed->kfe", vl + ops.exterior(vl), ops.trace_normal(sph))
        per_element = np.sum(ops.wj * ops.to_quad(d), axis=1)
        assert np.abs(per_element - np.sum(ops.edge_wj * F, axis=(1, 2))).max() < 1e-10


class TestGSign:
    """The correction enters the divergence with a plus sign."""

    def test_with_g_adds_residual(self, disc):
        ops, _, sph = disc
        v = _field(_grad_z(ops.geom.nodes), sph)
        w = v.cartesian()
        base = weak_divergence_residual(ops, v.data, sph, FluxRule(), False)
        withg = weak_divergence_residual(ops, v.data, sph, FluxRule(), True)
        np.testing.assert_allclose(withg - base, g_residual(ops, sph, w), atol=1e-15)

    def test_plus_sign_reduces_error(self, disc):
        ops, _, sph = disc
        x = ops.geom.nodes
        v = _field(_grad_z(x), sph)
        exact = -2 * x[..., 2]
        base = weak_divergence(ops, v, sph)
        corr = ops.solve_mass(g_residual(ops, sph, v.cartesian()))
        plus, minus = ops.l2_norm(base + corr - exact), ops.l2_norm(base - corr - exact)
        assert plus < 0.5 * ops.l2_norm(base - exact)
        assert minus > ops.l2_norm(base - exact)

    def test_matrix_form(self, disc, rng):
        ops, _, sph = disc
        w = rng.standard_normal((ops.K, ops.elem.n_nodes, 3))
        B = g_residual_matrix(ops, sph)
        np.testing.assert_allclose(np.einsum("kmnc,knc->km", B, w), g_residual(ops, sph, w),
                                   atol=1e-13 * np.abs(B).max())


class TestCurlAndGradient:
    def test_curl_of_gradient_small(self, disc):
        ops, _, sph = disc
        v = _field(_grad_z(ops.geom.nodes), sph)
        assert ops.l2_norm(weak_curl_normal(ops, v, sph, FluxRule("central"))) < 1e-2

    def test_curl_of_rotation(self, disc):
        # v = z_hat x x has curl(v) . n = 2z on the unit sphere
        ops, _, sph = disc
        x = ops.geom.nodes
        v = _field(np.cross(Z, x), sph)
        c = weak_curl_normal(ops, v, sph, FluxRule("central"))
        assert ops.l2_norm(c - 2 * x[..., 2]) < 1e-2

    def test_curl_needs_differentials(self, sphere, elem5, disc):
        ops = disc[0]
        fr = build_frames(sphere, elem5, "local", differentials=False)
        v = Field("frame_vector", np.zeros((ops.K, ops.elem.n_nodes, 2)), fr)
        with pytest.raises(ValueError, match="differentials"):
            weak_curl_normal(ops, v, fr)

    @pytest.mark.parametrize("i", [0, 1])
    def test_gradient_of_z(self, disc, i):
        ops, loc, sph = disc
        x = ops.geom.nodes
        for fr in (loc, sph):
            g = weak_directional_gradient(ops, x[..., 2], i, fr, with_G=fr is sph)
            exact = np.einsum("knd,knd->kn", _grad_z(x), fr.node[..., i, :])
            assert ops.l2_norm(g - exact) < 5e-3

    def test_gradient_of_constant_local(self, disc):
        ops, loc, _ = disc
        g = weak_directional_gradient(ops, np.ones((ops.K, ops.elem.n_nodes)), 0, loc)
        assert ops.l2_norm(g) < 1e-3

    def test_field_input(self, disc):
        ops, loc, _ = disc
        f = ops.geom.nodes[..., 0]
        np.testing.assert_array_equal(weak_directional_gradient(ops, Field("scalar", f), 1, loc),
                                      weak_directional_gradient(ops, f, 1, loc))


class TestField:
    def test_layout_checks(self, disc):
        _, loc, _ = disc
        with pytest.raises(ValueError, match="layout"):
            Field("tensor", np.zeros((2, 3)))
        with pytest.raises(ValueError, match="frames"):
            Field("frame_vector", np.zeros((2, 3, 2)))
        with pytest.raises(ValueError, match="scalar"):
            Field("scalar", np.zeros((2, 3, 2)))

    def test_cartesian_roundtrip(self, disc, rng):
        ops, loc, _ = disc
        c = rng.standard_normal((ops.K, ops.elem.n_nodes, 2))
        v = Field("frame_vector", c, loc).cartesian()
        np.testing.assert_allclose(np.einsum("knd,knid->kni", v, loc.node[..., :2, :]), c, atol=1e-14)

    @pytest.mark.parametrize("p", [1, 2, 4])
    def test_other_orders(self, sphere, p):
        elem = build_reference_element(p)
        ops = DGOperators(sphere, elem)
        assert ops.mass.shape == (sphere.n_elements, elem.n_nodes, elem.n_nodes)
