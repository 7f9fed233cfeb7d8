"""Interpolation operators, error norms, observed rates and report paths."""

import math

import numpy as np
import pytest

from feclab.approximation import (INTERPOLANT_NAMES, PROBLEM_NAMES,
                                  cellwise_broken_norms, cellwise_l2_errors,
                                  commuting_residual, convergence_report,
                                  error_norms, quasi_interpolant, rate_table,
                                  rate_sequence)
from feclab.errors import ComplexMismatchError, ConfigError
from feclab.fields import (broken_torus_field, constant_form, fe_ref_field,
                           pullback_form, torus_commuting_catalog)
from feclab.geometry import flat_metric, identity_theta, perturbed_torus_metric
from feclab.mesh import build_torus3
from feclab.solver import de_rham_spaces
from feclab.whitney import FESpace


def torus_setup(sub):
    cx = build_torus3(sub)
    return cx, flat_metric(cx), FESpace(cx, 1)


class TestRateTable:
    def test_halving_rates(self):
        assert rate_table([4.0, 2.0, 1.0]) == [1.0, 1.0]
        assert rate_table([16.0, 4.0, 1.0]) == [2.0, 2.0]

    def test_constant_errors_give_zero(self):
        assert rate_table([1.0, 1.0]) == [0.0]

    def test_growth_goes_negative(self):
        assert rate_table([1.0, 2.0]) == [-1.0]

    def test_nonpositive_entries_are_nan(self):
        out = rate_table([0.0, 1.0, 0.0])
        assert all(math.isnan(r) for r in out)

    def test_alias(self):
        assert rate_sequence([4.0, 2.0]) == rate_table([4.0, 2.0])


class TestErrorNorms:
    def test_self_error_vanishes(self):
        cx, g, s1 = torus_setup(2)
        spaces = de_rham_spaces(cx)
        rng = np.random.default_rng(31)
        coeffs = rng.standard_normal(s1.num_dofs)
        out = error_norms(spaces, coeffs, fe_ref_field(s1, coeffs), g)
        assert out["err_l2"] < 1e-11
        assert out["err_curl"] < 1e-11
        assert out["err_hcurl"] < 1e-11
        assert math.isnan(out["err_zeta_h1"])

    def test_hcurl_splits_into_l2_and_curl(self):
        cx, g, s1 = torus_setup(2)
        spaces = de_rham_spaces(cx)
        field = pullback_form(
            identity_theta(cx),
            [f for f in torus_commuting_catalog() if f.degree == 1][0])
        coeffs = np.zeros(s1.num_dofs)
        out = error_norms(spaces, coeffs, field, g)
        combined = math.sqrt(out["err_l2"] ** 2 + out["err_curl"] ** 2)
        assert out["err_hcurl"] == pytest.approx(combined, rel=1e-12)
        assert out["err_l2"] > 0 and out["err_curl"] > 0

    def test_scalar_pair_and_validation(self):
        cx, g, s1 = torus_setup(2)
        spaces = de_rham_spaces(cx)
        s0 = spaces[0]
        rng = np.random.default_rng(5)
        z = rng.standard_normal(s0.num_dofs)
        out = error_norms(spaces, np.zeros(s1.num_dofs),
                          fe_ref_field(s1, np.zeros(s1.num_dofs)), g,
                          z_coeffs=z, exact_z=fe_ref_field(s0, z))
        assert out["err_zeta_h1"] < 1e-11
        with pytest.raises(ConfigError):
            error_norms(spaces, np.zeros(s1.num_dofs),
                        fe_ref_field(s1, np.zeros(s1.num_dofs)), g,
                        z_coeffs=z)
        with pytest.raises(ConfigError):
            error_norms(spaces, np.zeros(s1.num_dofs),
                        fe_ref_field(s1, np.zeros(s1.num_dofs)), g, degree=3)
        other = build_torus3(1)
        wrong = fe_ref_field(FESpace(other, 1),
                             np.zeros(FESpace(other, 1).num_dofs))
        with pytest.raises(ComplexMismatchError):
            error_norms(spaces, np.zeros(s1.num_dofs), wrong, g)


class TestQuasiInterpolant:
    def test_idempotent_on_fe_fields(self):
        cx, g, s1 = torus_setup(2)
        rng = np.random.default_rng(17)
        coeffs = rng.standard_normal(s1.num_dofs)
        back = quasi_interpolant(s1, fe_ref_field(s1, coeffs), g)
        assert np.abs(back - coeffs).max() < 1e-11

    def test_idempotent_in_curved_metric(self):
        cx = build_torus3(2)
        g = perturbed_torus_metric(cx)
        s1 = FESpace(cx, 1)
        rng = np.random.default_rng(19)
        coeffs = rng.standard_normal(s1.num_dofs)
        back = quasi_interpolant(s1, fe_ref_field(s1, coeffs), g)
        assert np.abs(back - coeffs).max() < 1e-10

    def test_locality_is_bitwise(self):
        # a dof solves a patch problem over the cells that contain its edge;
        # perturbing the field outside that patch must not change one bit
        cx, g, s1 = torus_setup(2)
        base = np.zeros(s1.num_dofs)
        far_edge = 0
        bumped = base.copy()
        bumped[far_edge] = 1.0
        out_base = quasi_interpolant(s1, fe_ref_field(s1, base), g)
        out_bump = quasi_interpolant(s1, fe_ref_field(s1, bumped), g)
        touched_cells = np.nonzero((s1.cell_dofs == far_edge).any(axis=1))[0]
        touched_dofs = np.unique(s1.cell_dofs[touched_cells])
        untouched = np.setdiff1d(np.arange(s1.num_dofs), touched_dofs)
        assert untouched.size > 0
        assert np.array_equal(out_base[untouched], out_bump[untouched])
        assert not np.array_equal(out_base[touched_dofs],
                                  out_bump[touched_dofs])

    def test_broken_field_stays_finite(self):
        cx, g, s1 = torus_setup(2)
        broken = pullback_form(identity_theta(cx), broken_torus_field(),
                               tag="tangentially-continuous")
        coeffs = quasi_interpolant(s1, broken, g)
        assert np.isfinite(coeffs).all()
        errors = cellwise_l2_errors(s1, coeffs, broken, g)
        assert errors.shape == (cx.num_simplices(3),)
        assert errors.max() > 0

    def test_broken_norms_shape(self):
        cx, g, s1 = torus_setup(2)
        broken = pullback_form(identity_theta(cx), broken_torus_field(),
                               tag="tangentially-continuous")
        norms, d_norms = cellwise_broken_norms(broken, g)
        assert norms.shape == (48,) and d_norms.shape == (48,)
        assert norms.min() > 0


class TestCommuting:
    def test_canonical_commutes(self):
        cx, g, s1 = torus_setup(2)
        theta = identity_theta(cx)
        for form in torus_commuting_catalog():
            if form.degree >= 3:
                continue
            resid = commuting_residual(cx, pullback_form(theta, form))
            assert resid < 1e-10

    def test_quasi_residual_is_a_measurement(self):
        cx, g, s1 = torus_setup(2)
        theta = identity_theta(cx)
        sines = [f for f in torus_commuting_catalog() if f.degree == 1][0]
        resid = commuting_residual(cx, pullback_form(theta, sines),
                                   "quasi", g)
        assert 0.1 < resid < 1.0
        const = pullback_form(theta, constant_form(1, [1.0, 2.0, 3.0]))
        assert commuting_residual(cx, const, "quasi", g) < 1e-12

    def test_validation(self):
        cx, g, s1 = torus_setup(1)
        theta = identity_theta(cx)
        top = pullback_form(theta, constant_form(3, [1.0]))
        with pytest.raises(ConfigError):
            commuting_residual(cx, top)
        zero_form = pullback_form(theta, constant_form(0, [1.0]))
        with pytest.raises(ConfigError):
            commuting_residual(cx, zero_form, "quasi", g)
        one_form = pullback_form(theta, constant_form(1, [1.0, 0.0, 0.0]))
        with pytest.raises(ConfigError):
            commuting_residual(cx, one_form, "quasi")
        with pytest.raises(ConfigError):
            commuting_residual(cx, one_form, "sinc")


class TestConvergenceReports:
    def test_canonical_regression(self):
        rep = convergence_report("torus3", "sines", 2, "canonical")
        hcurl = [r.err_hcurl for r in rep.rows]
        assert hcurl[0] == pytest.approx(6.356930216197823, rel=1e-9)
        assert hcurl[1] == pytest.approx(2.8152809785037523, rel=1e-9)
        assert rep.hcurl_rates()[0] == pytest.approx(1.175051333841945,
                                                     abs=1e-8)

    def test_galerkin_regression(self):
        rep = convergence_report("torus3", "sines", 2, "galerkin")
        hcurl = [r.err_hcurl for r in rep.rows]
        assert hcurl[0] == pytest.approx(6.2903038752786165, rel=1e-9)
        assert hcurl[1] == pytest.approx(2.788161193372551, rel=1e-9)
        # the sines solution is divergence free and so is its discrete
        # multiplier, giving an essentially exact zeta block
        assert all(r.err_zeta_h1 < 1e-10 for r in rep.rows)

    def test_quasi_l2_first_order(self):
        rep = convergence_report("torus3", "sines", 3, "quasi")
        l2 = [r.err_l2 for r in rep.rows]
        rates = rate_table(l2)
        assert rates[-1] == pytest.approx(1.0, abs=0.15)

    def test_rows_carry_mesh_data(self):
        rep = convergence_report("torus3", "sines", 2, "canonical")
        assert [r.level for r in rep.rows] == [1, 2]
        assert rep.rows[0].h == pytest.approx(math.sqrt(3) / 2)
        assert rep.rows[1].h == pytest.approx(math.sqrt(3) / 4)
        assert rep.rows[0].dofs == 56 and rep.rows[1].dofs == 448
        assert rep.interpolant == "canonical"

    def test_galerkin_restrictions(self):
        with pytest.raises(ConfigError):
            convergence_report("sphere2", "rotational", 1, "galerkin")
        with pytest.raises(ConfigError):
            convergence_report("torus3", "sines", 1, "galerkin",
                               metric_name="perturbed")
        with pytest.raises(ConfigError):
            convergence_report("torus3", "sines", 1, "galerkin",
                               field_factory=lambda cx: None)

    def test_canonical_refuses_broken_fields(self):
        def factory(cx):
            return pullback_form(identity_theta(cx), broken_torus_field(),
                                 tag="tangentially-continuous")

        with pytest.raises(ConfigError):
            convergence_report("torus3", "sines", 1, "canonical",
                               field_factory=factory)
        rep = convergence_report("torus3", "sines", 1, "quasi",
                                 field_factory=factory)
        assert np.isfinite(rep.rows[0].err_l2)

    def test_catalog_validation(self):
        assert set(INTERPOLANT_NAMES) == {"canonical", "quasi", "galerkin"}
        assert set(PROBLEM_NAMES) == {"torus3", "sphere2"}
        with pytest.raises(ConfigError):
            convergence_report("torus3", "swirl", 1, "canonical")
        with pytest.raises(ConfigError):
            convergence_report("mobius", "sines", 1, "canonical")
        with pytest.raises(ConfigError):
            convergence_report("torus3", "sines", 1, "spectral")
