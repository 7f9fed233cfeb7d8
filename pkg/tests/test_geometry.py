"""Quadrature, metric weights and pullback metrics against closed forms."""

import math

import numpy as np
import pytest

from feclab.errors import ConfigError, DegenerateMetricError, MeshError
from feclab.geometry import (ThetaMap, approx_metric, exact_metric,
                             flat_metric, identity_theta, interpolate_metric,
                             mass_weight, metric_catalog,
                             perturbed_torus_metric, pullback_metric,
                             radial_theta, round_sphere_metric, simplex_rule,
                             total_volume)
from feclab.mesh import build_icosphere, build_torus3, single_cell_complex


def monomial_integral(alpha):
    """Exact reference-simplex integral of prod x_i^alpha_i.

    The closed form is prod(alpha_i!) / (n + sum alpha_i)!.
    """
    n = len(alpha)
    num = 1
    for a in alpha:
        num *= math.factorial(a)
    return num / math.factorial(n + sum(alpha))


class TestQuadrature:
    @pytest.mark.parametrize("dim", [1, 2, 3])
    @pytest.mark.parametrize("degree", [1, 2, 3, 5, 8, 13, 17])
    def test_monomials_exact(self, dim, degree):
        rule = simplex_rule(dim, degree)
        assert rule.points.shape[1] == dim
        assert np.all(rule.weights > 0)
        # every monomial with total degree <= requested
        for alpha in np.ndindex(*([degree + 1] * dim)):
            if sum(alpha) > degree:
                continue
            vals = np.prod(rule.points ** np.asarray(alpha), axis=1)
            exact = monomial_integral(alpha)
            got = float(vals @ rule.weights)
            assert got == pytest.approx(exact, rel=1e-12)

    def test_weights_sum_to_simplex_volume(self):
        for dim in (1, 2, 3):
            rule = simplex_rule(dim, 4)
            assert rule.weights.sum() == pytest.approx(
                1.0 / math.factorial(dim), rel=1e-14)

    def test_points_interior(self):
        rule = simplex_rule(3, 6)
        assert np.all(rule.points > 0)
        assert np.all(rule.points.sum(axis=1) < 1)

    def test_invalid_requests(self):
        with pytest.raises(MeshError):
            simplex_rule(4, 3)
        with pytest.raises(MeshError):
            simplex_rule(2, 0)


class TestMassWeights:
    @pytest.mark.parametrize("c", [0.5, 2.0, 10.0])
    def test_scaling_laws_random_spd(self, c):
        rng = np.random.default_rng(11)
        for _ in range(20):
            base = rng.standard_normal((3, 3))
            G = (base @ base.T + 3.0 * np.eye(3))[None, None]
            for k in range(4):
                ref = np.asarray(mass_weight(k, G), dtype=float)
                scaled = np.asarray(mass_weight(k, c * G), dtype=float)
                factor = c ** (1.5 - k)
                assert np.abs(scaled - factor * ref).max() <= \
                    1e-11 * factor * np.abs(ref).max()

    def test_identity_metric_values(self):
        G = np.eye(3)[None, None]
        assert mass_weight(0, G) == pytest.approx(1.0)
        assert np.allclose(mass_weight(1, G)[0, 0], np.eye(3))
        assert np.allclose(mass_weight(2, G)[0, 0], np.eye(3))
        assert mass_weight(3, G) == pytest.approx(1.0)

    def test_two_form_weight_is_cofactor(self):
        # the 2-form proxy weight must equal sqrt(det) * cof(G^{-1}) = G/sqrt(det)
        rng = np.random.default_rng(5)
        base = rng.standard_normal((3, 3))
        G = base @ base.T + 3.0 * np.eye(3)
        got = mass_weight(2, G[None, None])[0, 0]
        expected = G / np.sqrt(np.linalg.det(G))
        assert np.abs(got - expected).max() < 1e-12

    def test_dimension_two(self):
        rng = np.random.default_rng(6)
        base = rng.standard_normal((2, 2))
        G = (base @ base.T + 2.0 * np.eye(2))[None, None]
        det = np.linalg.det(G[0, 0])
        assert mass_weight(0, G)[0, 0] == pytest.approx(np.sqrt(det))
        assert mass_weight(2, G)[0, 0] == pytest.approx(1.0 / np.sqrt(det))
        w1 = mass_weight(1, G)[0, 0]
        assert np.allclose(w1, np.sqrt(det) * np.linalg.inv(G[0, 0]))

    def test_rejects_non_spd(self):
        G = -np.eye(3)[None, None]
        with pytest.raises(DegenerateMetricError):
            mass_weight(0, G)


class TestPullbacks:
    def test_identity_theta_gram(self):
        # flat metric equals J^T J of the affine charts
        cx = build_torus3(2)
        g = flat_metric(cx)
        rule = simplex_rule(3, 2)
        G = g.eval(None, rule.points)
        jac = cx.chart_jacobians()
        expected = np.einsum("mca,mcb->mab", jac, jac)
        assert np.abs(G - expected[:, None]).max() < 1e-13

    def test_radial_theta_tangent_gram(self):
        cx = build_icosphere(2)
        g = round_sphere_metric(cx)
        rule = simplex_rule(2, 3)
        G = g.eval(None, rule.points)
        # SPD 2x2 with positive determinant everywhere
        det = G[..., 0, 0] * G[..., 1, 1] - G[..., 0, 1] * G[..., 1, 0]
        assert np.all(det > 0)
        assert np.abs(G - np.swapaxes(G, -1, -2)).max() < 1e-14

    def test_pullback_isometry_invariance(self):
        # rotating the ambient map leaves the pulled-back metric unchanged
        verts = np.vstack([np.zeros(3), np.eye(3)])
        cx = single_cell_complex(verts)
        theta = identity_theta(cx)
        rng = np.random.default_rng(3)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))

        def rotated_point(cells, pts):
            return theta.point(cells, pts) @ q.T

        def rotated_jacobian(cells, pts):
            return np.einsum("rc,mqcd->mqrd", q, theta.jacobian(cells, pts))

        rot_theta = ThetaMap(complex=cx, name="rotated", ambient_dim=3,
                             identity=False, point=rotated_point,
                             jacobian=rotated_jacobian)
        g1 = pullback_metric(theta)
        g2 = pullback_metric(rot_theta)
        pts = simplex_rule(3, 3).points
        assert np.abs(g1.eval(None, pts) - g2.eval(None, pts)).max() < 1e-12


class TestVolumes:
    def test_flat_torus_volume_one(self):
        for sub in (1, 2, 4):
            cx = build_torus3(sub)
            vol = total_volume(cx, flat_metric(cx))
            assert vol == pytest.approx(1.0, abs=1e-12)

    def test_perturbed_torus_volume_converges(self):
        # exp(eps * traceless sines) has unit Jacobian on average only in the
        # eps -> 0 limit; here just check positivity and h-convergence
        vols = []
        for sub in (2, 4, 8):
            cx = build_torus3(sub)
            vols.append(total_volume(cx, perturbed_torus_metric(cx)))
        assert all(v > 0 for v in vols)
        assert abs(vols[2] - vols[1]) < abs(vols[1] - vols[0])

    def test_sphere_area_second_order(self):
        # inscribed-polyhedron (chart Gram) area converges at second order
        errors = []
        for level in (1, 2, 3, 4):
            cx = build_icosphere(level)
            area = total_volume(cx, flat_metric(cx), degree=4)
            errors.append(abs(area - 4.0 * np.pi))
        rates = [np.log2(a / b) for a, b in zip(errors, errors[1:])]
        assert rates[-1] == pytest.approx(2.0, abs=0.3)

    def test_round_pullback_area_exact(self):
        # radial projection tiles the round sphere exactly, so the pulled-back
        # area equals 4*pi up to pure quadrature error at every level
        for level, tol in ((1, 1e-7), (2, 1e-10), (3, 1e-11)):
            cx = build_icosphere(level)
            area = total_volume(cx, round_sphere_metric(cx), degree=10)
            assert area == pytest.approx(4.0 * np.pi, abs=tol)

    def test_flat_sphere_area_underestimates(self):
        cx = build_icosphere(3)
        flat_area = total_volume(cx, flat_metric(cx))
        assert flat_area < 4.0 * np.pi


class TestMetricInterpolation:
    def test_pw_constant_idempotent(self):
        cx = build_torus3(2)
        g = interpolate_metric(exact_metric(cx), "pw-constant")
        gg = interpolate_metric(g, "pw-constant")
        pts = simplex_rule(3, 4).points
        assert np.abs(g.eval(None, pts) - gg.eval(None, pts)).max() < 1e-14

    def test_pw_linear_reproduces_flat(self):
        cx = build_torus3(2)
        g = flat_metric(cx)
        gi = interpolate_metric(g, "pw-linear")
        pts = simplex_rule(3, 4).points
        assert np.abs(g.eval(None, pts) - gi.eval(None, pts)).max() < 1e-13

    def test_interpolants_converge_to_exact(self):
        errs = {"pw-constant": [], "pw-linear": []}
        pts = simplex_rule(3, 3).points
        for sub in (2, 4, 8):
            cx = build_torus3(sub)
            g = exact_metric(cx)
            ref = g.eval(None, pts)
            for scheme in errs:
                gi = interpolate_metric(g, scheme)
                errs[scheme].append(np.abs(gi.eval(None, pts) - ref).max())
        for seq in errs.values():
            assert seq[2] < seq[1] < seq[0]
        # once the sines are resolved the linear interpolant pulls ahead
        assert errs["pw-linear"][2] < errs["pw-constant"][2]

    def test_unknown_scheme(self):
        cx = build_torus3(1)
        with pytest.raises(MeshError):
            interpolate_metric(flat_metric(cx), "spline")


class TestCatalogs:
    def test_metric_catalog_names(self):
        cx = build_torus3(1)
        for name in ("flat", "perturbed", "pw-constant", "pw-linear"):
            metric_catalog(cx, name)
        with pytest.raises(MeshError, match="flat"):
            metric_catalog(cx, "warp")

    def test_approx_metric_names(self):
        cx = build_torus3(1)
        pts = simplex_rule(3, 2).points
        exact = approx_metric(cx, "exact").eval(None, pts)
        assert np.abs(exact - exact_metric(cx).eval(None, pts)).max() == 0.0
        for name in ("flat", "pw-constant", "pw-linear"):
            approx_metric(cx, name)
        with pytest.raises(ConfigError, match="pw-linear"):
            approx_metric(cx, "cubic")

    def test_radial_theta_lands_on_unit_sphere(self):
        cx = build_icosphere(1)
        theta = radial_theta(cx)
        pts = simplex_rule(2, 3).points
        x = theta.point(None, pts)
        assert np.abs(np.linalg.norm(x, axis=-1) - 1.0).max() < 1e-14
