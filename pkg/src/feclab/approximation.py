"""Interpolants, error norms and convergence-rate experiments.

Two interpolation operators live here next to the Galerkin error path.  The
canonical interpolant integrates traces and therefore needs tangential
continuity; the quasi-interpolant replaces each edge dof by the canonical
dof of a patch-local L2 best approximation, which only needs the field to be
square integrable per cell.  Both reproduce FE fields exactly, and the
quasi-interpolant's dof depends on nothing outside the edge's cell patch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ComplexMismatchError, ConfigError, SolverError
from .fields import RefField, pullback_form
from .geometry import (MetricField, identity_theta, mass_weight,
                       metric_catalog, radial_theta, simplex_rule)
from .mesh import SimplicialComplex, build_level
from .solver import (assemble_mixed, de_rham_spaces, load_catalog,
                     manufactured_problem, solve_mixed)
from .whitney import (FESpace, canonical_interpolant, evaluate_fe_field,
                      exterior_derivative, whitney_basis)

__all__ = [
    "ErrorRow",
    "ErrorReport",
    "rate_table",
    "rate_sequence",
    "error_norms",
    "cellwise_l2_errors",
    "cellwise_broken_norms",
    "quasi_interpolant",
    "commuting_residual",
    "canonical_error_path",
    "quasi_error_path",
    "galerkin_error_path",
    "convergence_report",
    "INTERPOLANT_NAMES",
    "PROBLEM_NAMES",
]

INTERPOLANT_NAMES = ("canonical", "quasi", "galerkin")
PROBLEM_NAMES = {"torus3": ("sines", "gradient", "mixed", "zero"),
                 "sphere2": ("rotational",)}


@dataclass(frozen=True)
class ErrorRow:
    """Error norms of one level; zeta entries are NaN on interpolant paths."""

    level: int
    h: float
    dofs: int
    err_l2: float
    err_curl: float
    err_hcurl: float
    err_zeta_h1: float


@dataclass(frozen=True)
class ErrorReport:
    interpolant: str
    rows: tuple

    def hcurl_rates(self) -> list:
        return rate_table([row.err_hcurl for row in self.rows])


def rate_table(errors: Sequence[float]) -> list:
    """Observed orders log2(e_l / e_{l+1}) between consecutive levels.

    Nonpositive entries make the rate undefined; those slots are NaN.
    Growing errors give a negative rate rather than hiding the growth.
    """
    out = []
    for a, b in zip(errors, errors[1:]):
        if a > 0 and b > 0:
            out.append(float(np.log2(a / b)))
        else:
            out.append(float("nan"))
    return out


# kept as an alias: decreasing sequences read more naturally under this name
rate_sequence = rate_table


def _norm_sq(weight: np.ndarray, vals: np.ndarray,
             qweights: np.ndarray) -> float:
    if weight.ndim == 2:
        return float(np.einsum("mq,mq,q->", weight, vals[..., 0] ** 2,
                               qweights))
    return float(np.einsum("mqcd,mqc,mqd,q->", weight, vals, vals,
                           qweights, optimize=True))


def error_norms(spaces: Sequence[FESpace], u_coeffs: np.ndarray,
                exact_u: RefField, metric: MetricField,
                z_coeffs: Optional[np.ndarray] = None,
                exact_z: Optional[RefField] = None,
                degree: int = 5) -> dict:
    """Quadrature error norms of a discrete 1-form (and optional scalar).

    Returns err_l2, err_curl, err_hcurl for u and, when the scalar pair is
    given, the full H1 error err_zeta_h1 (NaN otherwise).
    """
    if degree < 5:
        raise ConfigError("error quadrature degree must be >= 5")
    cx = metric.complex
    if exact_u.complex is not cx:
        raise ComplexMismatchError("exact field built on a different complex")
    s0, s1, s2 = spaces[0], spaces[1], spaces[2]
    rule = simplex_rule(cx.dim, degree)
    G = metric.eval(None, rule.points)
    w = rule.weights

    diff = evaluate_fe_field(s1, u_coeffs, None, rule.points) \
        - exact_u.eval(None, rule.points)
    l2_sq = _norm_sq(mass_weight(1, G), diff, w)

    D1 = exterior_derivative(s1, s2).matrix
    curl_diff = evaluate_fe_field(s2, D1 @ u_coeffs, None, rule.points) \
        - exact_u.eval_d(None, rule.points)
    curl_sq = _norm_sq(mass_weight(2, G), curl_diff, w)

    if z_coeffs is None:
        zeta = float("nan")
    else:
        if exact_z is None:
            raise ConfigError("z coefficients given without an exact scalar")
        zdiff = evaluate_fe_field(s0, z_coeffs, None, rule.points) \
            - exact_z.eval(None, rule.points)
        D0 = exterior_derivative(s0, s1).matrix
        gdiff = evaluate_fe_field(s1, D0 @ z_coeffs, None, rule.points) \
            - exact_z.eval_d(None, rule.points)
        zeta = float(np.sqrt(max(_norm_sq(mass_weight(0, G), zdiff, w)
                                 + _norm_sq(mass_weight(1, G), gdiff, w),
                                 0.0)))
    return {"err_l2": float(np.sqrt(max(l2_sq, 0.0))),
            "err_curl": float(np.sqrt(max(curl_sq, 0.0))),
            "err_hcurl": float(np.sqrt(max(l2_sq + curl_sq, 0.0))),
            "err_zeta_h1": zeta}


def cellwise_l2_errors(space: FESpace, coeffs: np.ndarray, field: RefField,
                       metric: MetricField, degree: int = 5) -> np.ndarray:
    """Per-cell L2 error of an FE field against an analytic one."""
    cx = space.complex
    rule = simplex_rule(cx.dim, degree)
    weight = mass_weight(space.degree, metric.eval(None, rule.points))
    diff = evaluate_fe_field(space, coeffs, None, rule.points) \
        - field.eval(None, rule.points)
    if weight.ndim == 2:
        sq = np.einsum("mq,mq,q->m", weight, diff[..., 0] ** 2, rule.weights)
    else:
        sq = np.einsum("mqcd,mqc,mqd,q->m", weight, diff, diff, rule.weights,
                       optimize=True)
    return np.sqrt(np.maximum(sq, 0.0))


def cellwise_broken_norms(field: RefField, metric: MetricField,
                          degree: int = 5) -> tuple:
    """Per-cell L2 norms of a field and of its derivative.

    The broken regularity data of a piecewise-smooth field: cellwise norms
    never see the discontinuity set, so they stay finite for any tag.
    """
    cx = metric.complex
    rule = simplex_rule(cx.dim, degree)
    G = metric.eval(None, rule.points)
    vals = field.eval(None, rule.points)
    dvals = field.eval_d(None, rule.points)

    def per_cell(weight, v):
        if weight.ndim == 2:
            sq = np.einsum("mq,mq,q->m", weight, v[..., 0] ** 2, rule.weights)
        else:
            sq = np.einsum("mqcd,mqc,mqd,q->m", weight, v, v, rule.weights,
                           optimize=True)
        return np.sqrt(np.maximum(sq, 0.0))

    return (per_cell(mass_weight(field.degree, G), vals),
            per_cell(mass_weight(field.degree + 1, G), dvals))


# ---------------------------------------------------------------------------
# quasi-interpolant
# ---------------------------------------------------------------------------

def quasi_interpolant(space: FESpace, field: RefField, metric: MetricField,
                      degree: int = 5) -> np.ndarray:
    """Patch-projection interpolant onto the edge space.

    Every edge dof is the canonical dof of the L2(patch)-best approximation
    of the field in the edge space restricted to the patch of cells meeting
    that edge.  The construction needs only cellwise integrability, is
    idempotent on FE fields, and each dof is exactly local to its patch.
    """
    cx = space.complex
    if space.degree != 1:
        raise ConfigError("the patch interpolant is built for the edge space")
    if field.complex is not cx or metric.complex is not cx:
        raise ComplexMismatchError("field or metric on a different complex")
    rule = simplex_rule(cx.dim, degree)
    vals = whitney_basis(cx.dim, 1, rule.points)
    G = metric.eval(None, rule.points)
    W = mass_weight(1, G)
    fvals = field.eval(None, rule.points)
    blocks = np.einsum("aqc,mqcd,bqd,q->mab", vals, W, vals, rule.weights,
                       optimize=True)
    rhs = np.einsum("aqc,mqcd,mqd,q->ma", vals, W, fvals, rule.weights,
                    optimize=True)

    cell_dofs = space.cell_dofs
    nloc = cell_dofs.shape[1]
    flat = cell_dofs.ravel()
    order = np.argsort(flat, kind="stable")
    starts = np.searchsorted(flat[order], np.arange(space.num_dofs + 1))

    out = np.empty(space.num_dofs)
    for e in range(space.num_dofs):
        cells = order[starts[e]:starts[e + 1]] // nloc
        local = np.unique(cell_dofs[cells])
        npatch = local.size
        gram = np.zeros((npatch, npatch))
        load = np.zeros(npatch)
        for t in cells:
            idx = np.searchsorted(local, cell_dofs[t])
            gram[np.ix_(idx, idx)] += blocks[t]
            load[idx] += rhs[t]
        try:
            sol = np.linalg.solve(gram, load)
        except np.linalg.LinAlgError as exc:
            raise SolverError(
                f"degenerate patch normal equations at edge dof {e}",
                diagnostics={"edge": e, "cells": cells.tolist(),
                             "patch_dofs": int(npatch)}) from exc
        out[e] = sol[np.searchsorted(local, e)]
    return out


def commuting_residual(cx: SimplicialComplex, field: RefField,
                       interpolant: str = "canonical",
                       metric: Optional[MetricField] = None,
                       trace_degree: int = 17, degree: int = 5) -> float:
    """Sup-norm commuting defect ||D I(u) - I(du)|| of an interpolant.

    The canonical interpolant commutes up to quadrature error; the patch
    interpolant has no such guarantee, so its residual is a measurement.
    The degree-(k+1) interpolant is always the canonical one.
    """
    k = field.degree
    if k >= cx.dim:
        raise ConfigError(
            f"no commuting residual for top-degree forms (k={k})")
    s_k = FESpace(cx, k)
    s_k1 = FESpace(cx, k + 1)
    if interpolant == "canonical":
        a = canonical_interpolant(s_k, field, trace_degree)
    elif interpolant == "quasi":
        if k != 1:
            raise ConfigError("the patch interpolant only exists for k=1")
        if metric is None:
            raise ConfigError("the patch interpolant needs a metric")
        a = quasi_interpolant(s_k, field, metric, degree)
    else:
        raise ConfigError(
            f"unknown interpolant '{interpolant}'; catalog: canonical, quasi")
    D = exterior_derivative(s_k, s_k1).matrix
    b = canonical_interpolant(s_k1, field.d(), trace_degree)
    return float(np.abs(D @ a - b).max())


# ---------------------------------------------------------------------------
# per-level experiment paths
# ---------------------------------------------------------------------------

def _theta_for(cx: SimplicialComplex):
    return radial_theta(cx) if cx.geometry == "sphere2" else identity_theta(cx)


def _problem_fields(geometry: str, problem: str, cx: SimplicialComplex):
    """Exact (U, zeta, F) of a named problem, pulled back to the complex.

    Only the manufactured torus problems carry an exact solution; the sphere
    names give the target field itself for the interpolant paths, with no
    scalar and no solvable load."""
    names = PROBLEM_NAMES.get(geometry)
    if names is None:
        raise ConfigError(f"unknown geometry '{geometry}'; catalog: "
                          f"{', '.join(sorted(PROBLEM_NAMES))}")
    if problem not in names:
        raise ConfigError(
            f"unknown problem '{problem}' for {geometry}; catalog: "
            f"{', '.join(names)}")
    theta = _theta_for(cx)
    if geometry == "torus3":
        exact_u, exact_z, load = manufactured_problem(problem)
        return (pullback_form(theta, exact_u), pullback_form(theta, exact_z),
                pullback_form(theta, load))
    target = load_catalog(geometry, problem)
    return pullback_form(theta, target), None, None


def _metric_for(cx: SimplicialComplex, metric_name: str, eps: float):
    return metric_catalog(cx, metric_name, eps)


def convergence_report(geometry: str, problem: str, levels: int,
                       interpolant: str, metric_name: str = "flat",
                       eps: float = 0.3, degree: int = 5,
                       field_factory=None) -> ErrorReport:
    """Per-level error norms for one interpolation or Galerkin path.

    ``field_factory`` (complex -> RefField) replaces the problem catalog as
    the source of the target field on the interpolant paths.
    """
    if interpolant not in INTERPOLANT_NAMES:
        raise ConfigError(
            f"unknown interpolant '{interpolant}'; catalog: "
            f"{', '.join(INTERPOLANT_NAMES)}")
    if levels < 1:
        raise ConfigError("convergence experiment needs at least one level")
    if interpolant == "galerkin":
        if geometry != "torus3" or metric_name != "flat":
            raise ConfigError(
                "the Galerkin path needs geometry torus3 with the flat "
                "metric (the manufactured solutions solve that problem)")
        if field_factory is not None:
            raise ConfigError("the Galerkin path solves catalog problems; "
                              "a bare field has no load")
    rows = []
    for level in range(1, levels + 1):
        cx = build_level(geometry, level)
        metric = _metric_for(cx, metric_name, eps)
        if field_factory is not None:
            exact_u, exact_z, load = field_factory(cx), None, None
        else:
            exact_u, exact_z, load = _problem_fields(geometry, problem, cx)
        spaces = de_rham_spaces(cx)[:3]
        s1 = spaces[1]
        if interpolant == "canonical":
            if exact_u.tag != "smooth":
                raise ConfigError(
                    "the canonical interpolant needs a smooth field; got "
                    f"tag '{exact_u.tag}'")
            coeffs = canonical_interpolant(s1, exact_u)
            err = error_norms(spaces, coeffs, exact_u, metric, degree=degree)
        elif interpolant == "quasi":
            coeffs = quasi_interpolant(s1, exact_u, metric, degree)
            err = error_norms(spaces, coeffs, exact_u, metric, degree=degree)
        else:
            system = assemble_mixed(spaces, metric, degree=degree)
            sol = solve_mixed(system, load, degree=degree)
            err = error_norms(spaces, sol.u, exact_u, metric,
                              z_coeffs=sol.z, exact_z=exact_z, degree=degree)
        rows.append(ErrorRow(level=level,
                             h=float(cx.cell_diameters().max()),
                             dofs=s1.num_dofs, **err))
    return ErrorReport(interpolant=interpolant, rows=tuple(rows))


def canonical_error_path(geometry: str, problem: str, levels: int,
                         metric_name: str = "flat", eps: float = 0.3,
                         degree: int = 5, field_factory=None) -> ErrorReport:
    """Interpolation errors of the trace-based interpolant per level."""
    return convergence_report(geometry, problem, levels, "canonical",
                              metric_name, eps, degree, field_factory)


def quasi_error_path(geometry: str, problem: str, levels: int,
                     metric_name: str = "flat", eps: float = 0.3,
                     degree: int = 5, field_factory=None) -> ErrorReport:
    """Interpolation errors of the patch interpolant per level."""
    return convergence_report(geometry, problem, levels, "quasi",
                              metric_name, eps, degree, field_factory)


def galerkin_error_path(problem: str, levels: int,
                        degree: int = 5) -> ErrorReport:
    """Discretization errors of the mixed solver on the flat torus."""
    return convergence_report("torus3", problem, levels, "galerkin",
                              "flat", 0.3, degree)
