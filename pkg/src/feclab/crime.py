"""Quantifying the geometric consistency error between two metrics.

When the assembled metric g-hat only approximates the pulled-back metric
g-tilde, the identity map between the two discrete L2 spaces fails to be an
isometry.  Its defect norm is the extreme deviation of the generalized
Rayleigh quotient of the two k=1 mass matrices from one, the transfer of
load data between the metrics picks up a measurable discrepancy, and the two
discrete solutions drift apart.  Everything here measures those three
quantities per refinement level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .approximation import rate_sequence
from .errors import ComplexMismatchError, ConfigError, SolverError
from .fields import RefField, pullback_form
from .geometry import (MetricField, approx_metric, exact_metric,
                       identity_theta, radial_theta)
from .mesh import SimplicialComplex, build_level
from .solver import (DENSE_EIG_CUTOFF, assemble_mixed, de_rham_spaces,
                     field_l2_norm, load_catalog, solve_mixed, spd_solver)
from .whitney import (FESpace, SparseOperator, assemble_load, assemble_mass,
                      canonical_interpolant)

__all__ = [
    "pencil_extremes",
    "crime_norm",
    "data_transfer_discrepancy",
    "CrimeConfig",
    "CrimeLevel",
    "CrimeReport",
    "run_crime_experiment",
]


def pencil_extremes(source: SparseOperator, reference: SparseOperator,
                    tol: float = 1e-10) -> tuple:
    """Extreme generalized eigenvalues of source x = lambda reference x.

    Dense solve below the cutoff; above it two one-sided Lanczos runs, the
    minimum obtained as the reciprocal of the largest eigenvalue of the
    swapped pencil (both matrices are SPD mass matrices, so the swap is
    legitimate and keeps ARPACK in its well-conditioned largest-mode regime).
    """
    if source.shape != reference.shape:
        raise ComplexMismatchError(
            f"pencil matrices differ in size: {source.shape} vs "
            f"{reference.shape}")
    if not (source.symmetric and reference.symmetric):
        raise SolverError("pencil wants symmetric positive definite masses")
    n = source.shape[0]
    A = source.matrix.tocsc()
    B = reference.matrix.tocsc()
    if n <= DENSE_EIG_CUTOFF:
        from scipy.linalg import eigh as dense_eigh
        vals = dense_eigh(A.toarray(), B.toarray(), eigvals_only=True)
        lam_min, lam_max = float(vals[0]), float(vals[-1])
    else:
        v0 = np.ones(n)
        A_inv = LinearOperator((n, n), matvec=spd_solver(A))
        B_inv = LinearOperator((n, n), matvec=spd_solver(B))
        try:
            top = eigsh(A, k=1, M=B, Minv=B_inv, which="LA", v0=v0, tol=tol,
                        return_eigenvectors=False)
            bottom = eigsh(B, k=1, M=A, Minv=A_inv, which="LA", v0=v0,
                           tol=tol, return_eigenvectors=False)
        except ArpackNoConvergence as exc:
            raise SolverError(
                "pencil eigensolve did not converge",
                diagnostics={"converged": len(exc.eigenvalues),
                             "size": n}) from exc
        lam_max = float(top[0])
        lam_min = 1.0 / float(bottom[0])
    if lam_min <= 0:
        raise SolverError("pencil returned a nonpositive eigenvalue",
                          diagnostics={"lambda_min": lam_min})
    return lam_min, lam_max


def crime_norm(cx: SimplicialComplex, g_hat: MetricField,
               g_tilde: MetricField, degree: int = 5) -> float:
    """Isometry defect of the metric swap on the k=1 FE space."""
    space = FESpace(cx, 1)
    M_hat = assemble_mass(space, g_hat, degree)
    M_tilde = assemble_mass(space, g_tilde, degree)
    lam_min, lam_max = pencil_extremes(M_hat, M_tilde)
    return max(abs(1.0 - lam_min), abs(1.0 - lam_max))


def _theta_for(cx: SimplicialComplex):
    return radial_theta(cx) if cx.geometry == "sphere2" else identity_theta(cx)


def data_transfer_discrepancy(cx: SimplicialComplex, load: RefField,
                              choice: str, g_hat: MetricField,
                              g_tilde: MetricField,
                              degree: int = 5) -> float:
    """L2(g-hat) distance between a chosen discrete load and its transfer.

    The reference datum is the g-tilde Riesz lift of the load moments pushed
    through the metric swap, which collapses to solving M_hat x = l_tilde.
    The compared construction is either the canonical interpolant of the
    load or its L2(g-hat) projection (the g-hat Riesz lift of the g-hat
    moments).
    """
    if choice not in ("interp", "l2-projection"):
        raise SolverError(
            f"unknown transfer choice '{choice}'; catalog: interp, "
            "l2-projection")
    space = FESpace(cx, 1)
    M_hat = assemble_mass(space, g_hat, degree).matrix
    solve = spd_solver(M_hat)
    transferred = solve(assemble_load(space, load, g_tilde, degree))
    if choice == "interp":
        constructed = canonical_interpolant(space, load)
    else:
        constructed = solve(assemble_load(space, load, g_hat, degree))
    diff = constructed - transferred
    return float(np.sqrt(max(diff @ (M_hat @ diff), 0.0)))


@dataclass(frozen=True)
class CrimeConfig:
    """Configuration of one crime experiment sweep."""

    geometry: str = "sphere2"
    approx: str = "flat"
    levels: int = 3
    load_name: Optional[str] = None
    transfer: str = "l2-projection"
    eps: float = 0.3
    degree: int = 5

    def resolved_load(self) -> str:
        if self.load_name is not None:
            return self.load_name
        return "rotational" if self.geometry == "sphere2" else "sines"


@dataclass(frozen=True)
class CrimeLevel:
    level: int
    h: float
    dofs: int
    lambda_min: float
    lambda_max: float
    crime_norm: float
    discrepancy: float
    solution_gap: float


@dataclass(frozen=True)
class CrimeReport:
    config: CrimeConfig
    levels: tuple
    load_norms: tuple
    bound_constant: float

    def gap_rates(self) -> list:
        gaps = [lv.solution_gap for lv in self.levels]
        return rate_sequence(gaps)

    def crime_rates(self) -> list:
        return rate_sequence([lv.crime_norm for lv in self.levels])


def run_crime_experiment(config: CrimeConfig) -> CrimeReport:
    """Sweep levels, solving the computational and intermediate problems.

    Both problems share the analytic load; the computational side assembles
    everything, load included, in g-hat, the intermediate side in g-tilde.
    The gap is measured in H(curl, g-hat).
    """
    if config.levels < 1:
        raise ConfigError("crime experiment needs at least one level")
    records = []
    load_norms = []
    for level in range(1, config.levels + 1):
        cx = build_level(config.geometry, level)
        g_tilde = exact_metric(cx, config.eps)
        g_hat = approx_metric(cx, config.approx, config.eps)
        theta = _theta_for(cx)
        load = pullback_form(theta, load_catalog(config.geometry,
                                                 config.resolved_load()))

        spaces = de_rham_spaces(cx)[:3]
        space1 = spaces[1]
        M_hat = assemble_mass(space1, g_hat, config.degree)
        M_tilde = assemble_mass(space1, g_tilde, config.degree)
        lam_min, lam_max = pencil_extremes(M_hat, M_tilde)
        cnorm = max(abs(1.0 - lam_min), abs(1.0 - lam_max))
        disc = data_transfer_discrepancy(cx, load, config.transfer,
                                         g_hat, g_tilde, config.degree)

        sys_hat = assemble_mixed(spaces, g_hat, degree=config.degree)
        sys_tilde = assemble_mixed(spaces, g_tilde, degree=config.degree)
        sol_hat = solve_mixed(sys_hat, load, degree=config.degree)
        sol_tilde = solve_mixed(sys_tilde, load, degree=config.degree)
        diff = sol_tilde.u - sol_hat.u
        gap = float(np.sqrt(max(
            diff @ (sys_hat.M1 @ diff) + diff @ (sys_hat.A @ diff), 0.0)))

        records.append(CrimeLevel(
            level=level, h=float(cx.cell_diameters().max()),
            dofs=space1.num_dofs, lambda_min=lam_min, lambda_max=lam_max,
            crime_norm=cnorm, discrepancy=disc, solution_gap=gap))
        load_norms.append(field_l2_norm(load, g_hat, config.degree))

    first = records[0]
    denom = first.discrepancy + first.crime_norm * load_norms[0]
    constant = first.solution_gap / denom if denom > 0 else 0.0
    return CrimeReport(config=config, levels=tuple(records),
                       load_norms=tuple(load_norms),
                       bound_constant=constant)
