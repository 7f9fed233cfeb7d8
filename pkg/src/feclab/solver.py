"""Mixed curl-curl solver with scalar multiplier and harmonic deflation.

The discrete problem searches (u, z, p) with

    [ A      B      M1 H ] [u]   [l]
    [ B^T   -M0     0    ] [z] = [0]
    [ (M1 H)^T  0   0    ] [p]   [0]

where A = (D1)^T M2 D1, B = M1 D0, l_i = integral <F, phi_i>_g, and H spans
the discrete harmonic 1-forms.  On a geometry with first Betti number zero
the harmonic block is empty and the plain saddle system is already
nonsingular; with b1 > 0 the deflation rows are what make it so.

Convention: the multiplier z satisfies <z, t> = <u, grad t> for all FE
scalars t, so z discretizes minus the metric divergence of u.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.linalg import eigh as dense_eigh
from scipy.sparse.linalg import lobpcg, splu

from .errors import BettiMismatchError, ComplexMismatchError, SolverError
from .fields import FormField, RefField, constant_form
from .geometry import MetricField, mass_weight, simplex_rule
from .mesh import SimplicialComplex
from .whitney import (FESpace, assemble_load, assemble_mass,
                      exterior_derivative)

__all__ = [
    "de_rham_spaces",
    "compute_harmonic_basis",
    "spd_solver",
    "MixedSystem",
    "MixedSolution",
    "assemble_mixed",
    "solve_mixed",
    "field_l2_norm",
    "manufactured_problem",
    "load_catalog",
]

DENSE_EIG_CUTOFF = 2000
SADDLE_DIRECT_CUTOFF = 12000


def de_rham_spaces(cx: SimplicialComplex) -> tuple:
    """Whitney spaces for every form degree on the complex."""
    return tuple(FESpace(cx, k) for k in range(cx.dim + 1))


def field_l2_norm(ref_field: RefField, metric: MetricField,
                  degree: int = 5) -> float:
    """L2(g) norm of an analytic or FE k-form by assembly-grade quadrature."""
    cx = metric.complex
    if ref_field.complex is not cx:
        raise ComplexMismatchError("field built on a different complex")
    rule = simplex_rule(cx.dim, degree)
    weight = mass_weight(ref_field.degree, metric.eval(None, rule.points))
    vals = ref_field.eval(None, rule.points)
    if weight.ndim == 2:
        cellwise = np.einsum("mq,mq,q->m", weight, vals[..., 0] ** 2,
                             rule.weights)
    else:
        cellwise = np.einsum("mqcd,mqc,mqd,q->m", weight, vals, vals,
                             rule.weights, optimize=True)
    return float(np.sqrt(cellwise.sum()))


def _sign_canonicalize(columns: np.ndarray) -> np.ndarray:
    out = columns.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


def spd_solver(M: sparse.spmatrix, direct_cutoff: int = 20000):
    """Solver closure for an SPD sparse matrix.

    Direct factorization below the cutoff; above it a Jacobi-preconditioned
    conjugate gradient loop (SPD mass-type matrices are well conditioned, so
    the loop is short and the factorization fill is avoided).
    """
    M = M.tocsc()
    n = M.shape[0]
    if n <= direct_cutoff:
        return splu(M).solve
    dinv = 1.0 / M.diagonal()

    def solve(b):
        b = np.asarray(b, dtype=float)
        x = np.zeros_like(b)
        r = b.copy()
        z = dinv * r
        p = z.copy()
        rz = r @ z
        b_norm = max(float(np.linalg.norm(b)), 1e-300)
        for _ in range(400):
            if np.linalg.norm(r) <= 1e-14 * b_norm:
                return x
            q = M @ p
            alpha = rz / (p @ q)
            x += alpha * p
            r -= alpha * q
            z = dinv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        if np.linalg.norm(r) <= 1e-10 * b_norm:
            return x
        raise SolverError("SPD solve stalled",
                          diagnostics={"size": n,
                                       "residual": float(np.linalg.norm(r))})

    return solve


def _bordered_stiffness_solver(S: sparse.spmatrix, mass_vector: np.ndarray):
    """Factorized scalar stiffness with the constant nullspace pinned by a
    mean-value multiplier row."""
    n = S.shape[0]
    m = sparse.csc_matrix(mass_vector.reshape(n, 1))
    K = sparse.bmat([[S, m], [m.T, None]], format="csc")
    lu = splu(K)

    def solve(b):
        full = lu.solve(np.concatenate([b, [0.0]]))
        return full[:n]

    return solve


def _winding_cocycles(cx: SimplicialComplex) -> np.ndarray:
    """Edge displacement cocycles: exact coefficient vectors of the
    interpolated coordinate 1-forms, with D1 annihilating them exactly."""
    from .mesh import edge_displacements
    return edge_displacements(cx)


def compute_harmonic_basis(cx: SimplicialComplex, metric: MetricField,
                           betti: Optional[int] = None,
                           gap_factor: float = 1e-10,
                           dense_cutoff: Optional[int] = None) -> np.ndarray:
    """M1-orthonormal basis of the discrete harmonic 1-forms.

    The harmonic space is the nullspace of the Hodge Laplacian
    L = (D1)^T M2 D1 + M1 D0 (M0)^{-1} (D0)^T M1 in the M1 inner product,
    and the declared Betti number must be matched by an actual spectral gap:
    lambda_betti <= gap_factor * lambda_{betti+1}.

    Small problems solve the dense generalized eigenproblem for L outright.
    Large periodic meshes build the basis constructively: the coordinate
    winding cocycles span the cohomology, and subtracting the gradient part
    (one scalar Poisson solve each) lands exactly in the nullspace; the gap
    is then evidenced by Rayleigh quotients against an iteratively estimated
    lambda_{betti+1}.
    """
    if betti is None:
        betti = cx.betti[1]
    if betti < 0:
        raise BettiMismatchError(f"negative Betti number {betti}")
    if dense_cutoff is None:
        dense_cutoff = DENSE_EIG_CUTOFF
    spaces = de_rham_spaces(cx)
    n1 = spaces[1].num_dofs
    if betti == 0:
        return np.zeros((n1, 0))
    M0 = assemble_mass(spaces[0], metric).matrix
    M1 = assemble_mass(spaces[1], metric).matrix
    M2 = assemble_mass(spaces[2], metric).matrix
    D0 = exterior_derivative(spaces[0], spaces[1]).matrix.astype(float)
    D1 = exterior_derivative(spaces[1], spaces[2]).matrix.astype(float)

    A = (D1.T @ M2 @ D1).tocsc()
    grad_rows = (M1 @ D0).tocsc()
    M0_lu = splu(M0.tocsc())

    if n1 <= dense_cutoff:
        # exact Hodge Laplacian, dense generalized eigensolve
        penalty = grad_rows @ M0_lu.solve(grad_rows.T.toarray())
        L = A.toarray() + penalty
        vals, vecs = dense_eigh(L, M1.toarray())
        lam_small = vals[betti - 1]
        lam_next = vals[betti]
        if not lam_small <= gap_factor * lam_next:
            raise BettiMismatchError(
                f"declared first Betti number {betti} but eigenvalues "
                f"{vals[:betti + 1].tolist()} show no gap (need "
                f"lambda_{betti} <= {gap_factor:.0e} * lambda_{betti + 1})")
        H = vecs[:, :betti]
    else:
        C = _winding_cocycles(cx)
        if C.shape[1] != betti:
            raise BettiMismatchError(
                f"no constructive cocycle basis of size {betti} on "
                f"'{cx.geometry}' (displacement cocycles give "
                f"{C.shape[1]})")
        closed_defect = float(np.abs(D1 @ C).max()) if C.size else 0.0
        if closed_defect > 1e-12:
            raise BettiMismatchError(
                f"winding cocycles are not closed (defect {closed_defect:.3e})")
        S = (D0.T @ M1 @ D0).tocsc()
        lumped0 = np.asarray(M0.sum(axis=1)).ravel()
        s_solve = _bordered_stiffness_solver(S, lumped0)
        H = np.empty((n1, betti))
        for i in range(betti):
            rhs = D0.T @ (M1 @ C[:, i])
            psi = s_solve(rhs)
            psi += s_solve(rhs - S @ psi)
            H[:, i] = C[:, i] - D0 @ psi

        # gap evidence: exact-L Rayleigh quotients of the candidates against
        # an estimated first nonzero eigenvalue (lumped-penalty surrogate has
        # the identical nullspace since ker(B W B^T) = ker(B^T) for SPD W)
        lam_small = 0.0
        for i in range(betti):
            h = H[:, i]
            Lh = A @ h + grad_rows @ M0_lu.solve(grad_rows.T @ h)
            lam_small = max(lam_small, float((h @ Lh) / (h @ (M1 @ h))))
        L_sparse = (A + grad_rows @ sparse.diags(1.0 / lumped0)
                    @ grad_rows.T).tocsc()
        lam_next = _smallest_nonkernel_eigenvalue(L_sparse, M1, H)
        if not lam_small <= gap_factor * lam_next:
            raise BettiMismatchError(
                f"declared first Betti number {betti} but the constructed "
                f"candidates have Rayleigh quotient {lam_small:.3e} against "
                f"an estimated lambda_{betti + 1} of {lam_next:.3e}")

    gram = H.T @ (M1 @ H)
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise BettiMismatchError(
            "harmonic candidates are numerically dependent") from exc
    H = H @ np.linalg.inv(chol).T
    return _sign_canonicalize(H)


def _smallest_nonkernel_eigenvalue(L: sparse.spmatrix, M: sparse.spmatrix,
                                   kernel: np.ndarray) -> float:
    """Rough lambda_{betti+1} of the pencil (L, M), deflating the kernel.

    Only feeds the spectral-gap sanity check, where the zero/nonzero margin
    is fifteen orders of magnitude, so two-digit accuracy is plenty.
    """
    x0 = np.ones((L.shape[0], 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals, _ = lobpcg(L, x0, B=M, Y=kernel, largest=False, maxiter=60,
                         tol=1e-3)
    lam = float(vals[0])
    if not np.isfinite(lam) or lam <= 0:
        raise SolverError("could not estimate the spectral gap",
                          diagnostics={"estimate": lam})
    return lam


@dataclass(frozen=True)
class MixedSystem:
    """Assembled blocks of the deflated curl-curl saddle problem."""

    complex: SimplicialComplex
    metric: MetricField
    spaces: tuple
    A: sparse.csr_matrix = field(repr=False)
    B: sparse.csr_matrix = field(repr=False)
    M0: sparse.csr_matrix = field(repr=False)
    M1: sparse.csr_matrix = field(repr=False)
    M2: sparse.csr_matrix = field(repr=False)
    harmonic: Optional[np.ndarray] = field(repr=False, default=None)

    @property
    def betti(self) -> int:
        return 0 if self.harmonic is None else self.harmonic.shape[1]

    @property
    def num_unknowns(self) -> int:
        return self.spaces[1].num_dofs + self.spaces[0].num_dofs + self.betti

    def block_matrix(self) -> sparse.csc_matrix:
        blocks = [[self.A, self.B], [self.B.T, -self.M0]]
        if self.betti:
            MH = sparse.csc_matrix(self.M1 @ self.harmonic)
            blocks[0].append(MH)
            blocks[1].append(None)
            blocks.append([MH.T, None, None])
        return sparse.bmat(blocks, format="csc")


@dataclass(frozen=True)
class MixedSolution:
    """Solution of one mixed solve with its solver diagnostics."""

    u: np.ndarray
    z: np.ndarray
    p: np.ndarray
    residual: float
    stability_ratio: float
    diagnostics: dict


def assemble_mixed(spaces: Sequence[FESpace], metric: MetricField,
                   harmonics: Union[str, np.ndarray, None] = "auto",
                   degree: int = 5) -> MixedSystem:
    """Build all blocks of the mixed system in the given metric.

    ``harmonics`` is "auto" (compute a basis when the geometry has b1 > 0),
    an explicit dof x b1 matrix, or None to skip deflation.
    """
    s0, s1, s2 = spaces[0], spaces[1], spaces[2]
    cx = s1.complex
    if s0.complex is not cx or s2.complex is not cx or metric.complex is not cx:
        raise ComplexMismatchError("mixed system blocks on different complexes")
    if (s0.degree, s1.degree, s2.degree) != (0, 1, 2):
        raise ComplexMismatchError("mixed system wants spaces of degree 0,1,2")
    M0 = assemble_mass(s0, metric, degree).matrix
    M1 = assemble_mass(s1, metric, degree).matrix
    M2 = assemble_mass(s2, metric, degree).matrix
    D0 = exterior_derivative(s0, s1).matrix.astype(float)
    D1 = exterior_derivative(s1, s2).matrix.astype(float)
    A = (D1.T @ M2 @ D1).tocsr()
    A = (A + A.T) * 0.5
    B = (M1 @ D0).tocsr()
    if isinstance(harmonics, str):
        if harmonics != "auto":
            raise SolverError(f"unknown harmonics mode '{harmonics}'")
        H = (compute_harmonic_basis(cx, metric) if cx.betti[1] > 0 else None)
    else:
        H = harmonics
    if H is not None and H.shape[1] == 0:
        H = None
    return MixedSystem(complex=cx, metric=metric, spaces=(s0, s1, s2),
                       A=A, B=B, M0=M0, M1=M1, M2=M2, harmonic=H)


def _load_vector(system: MixedSystem, load, degree: int):
    """Moment vector and L2 norm of the load.

    A RefField load is integrated against the k=1 basis; a plain array is
    taken as an already-assembled moment vector (dual coefficients), whose
    norm is then the discrete Riesz norm sqrt(l^T M^{-1} l).
    """
    if isinstance(load, RefField):
        ell = assemble_load(system.spaces[1], load, system.metric, degree)
        f_norm = field_l2_norm(load, system.metric, degree)
        return ell, f_norm
    ell = np.asarray(load, dtype=float)
    if ell.shape != (system.spaces[1].num_dofs,):
        raise ComplexMismatchError(
            f"load vector has shape {ell.shape}, expected "
            f"({system.spaces[1].num_dofs},)")
    riesz = spd_solver(system.M1)(ell)
    return ell, float(np.sqrt(max(ell @ riesz, 0.0)))


def _direct_saddle_solve(system: MixedSystem, ell: np.ndarray,
                         rel_tol: float, max_refine: int):
    """Factorize the full block matrix; refine until the residual is met."""
    n1 = system.spaces[1].num_dofs
    n0 = system.spaces[0].num_dofs
    b1 = system.betti
    K = system.block_matrix()
    rhs = np.concatenate([ell, np.zeros(n0 + b1)])
    lu = splu(K, permc_spec="MMD_AT_PLUS_A")
    x = lu.solve(rhs)
    rhs_norm = float(np.linalg.norm(rhs))
    refinements = 0
    residual = float(np.linalg.norm(rhs - K @ x)) / max(rhs_norm, 1e-300)
    while residual > rel_tol and refinements < max_refine:
        x = x + lu.solve(rhs - K @ x)
        refinements += 1
        residual = float(np.linalg.norm(rhs - K @ x)) / max(rhs_norm, 1e-300)
    if residual > rel_tol:
        raise SolverError(
            "mixed solve stalled above the residual tolerance",
            diagnostics={"residual": residual, "tolerance": rel_tol,
                         "refinements": refinements,
                         "unknowns": system.num_unknowns})
    return (x[:n1], x[n1:n1 + n0], x[n1 + n0:], residual,
            {"method": "direct", "refinements": refinements})


def _pcg(apply_op, precond, b: np.ndarray, x0: np.ndarray,
         abs_tol: float, maxiter: int):
    """Conjugate gradients with a fresh true residual every 50 steps."""
    x = x0.copy()
    r = b - apply_op(x)
    z = precond(r)
    p = z.copy()
    rz = r @ z
    res = float(np.linalg.norm(r))
    for it in range(1, maxiter + 1):
        if res <= abs_tol:
            return x, it - 1, res
        q = apply_op(p)
        pq = p @ q
        if not np.isfinite(pq) or pq <= 0:
            raise SolverError("conjugate gradient direction broke down",
                              diagnostics={"iteration": it, "curvature": pq})
        alpha = rz / pq
        x += alpha * p
        if it % 50 == 0:
            r = b - apply_op(x)
        else:
            r -= alpha * q
        res = float(np.linalg.norm(r))
        z = precond(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, maxiter, res


def _reduced_saddle_solve(system: MixedSystem, ell: np.ndarray,
                          rel_tol: float, max_refine: int):
    """Eliminate z and solve the SPD reduced system iteratively.

    With z = M0^{-1} B^T u the saddle problem collapses to
    K u = A u + B M0^{-1} B^T u = l - M1 H p, whose kernel is exactly the
    harmonic space, and p = H^T l makes the right side consistent.  The
    preconditioner is an auxiliary-space split: Jacobi on K, the exact
    inverse of the gradient block (G^T K G = S M0^{-1} S with S the scalar
    stiffness), and componentwise scalar solves pulled through the
    nodal-to-edge averaging map.
    """
    from .mesh import edge_displacements

    cx = system.complex
    s0, s1 = system.spaces[0], system.spaces[1]
    n0 = s0.num_dofs
    b1 = system.betti
    A = system.A.tocsr()
    B = system.B.tocsr()
    BT = B.T.tocsr()
    M0 = system.M0
    M1 = system.M1
    M0_lu = splu(M0.tocsc())
    H = system.harmonic

    def apply_reduced(x):
        return A @ x + B @ M0_lu.solve(BT @ x)

    if b1:
        p = H.T @ ell
        b = ell - M1 @ (H @ p)

        def project(v):
            return v - H @ (H.T @ v)
    else:
        p = np.zeros(0)
        b = ell

        def project(v):
            return v

    D0 = exterior_derivative(s0, s1).matrix.astype(float)
    S = (D0.T @ M1 @ D0).tocsc()
    lumped0 = np.asarray(M0.sum(axis=1)).ravel()
    s_solve = _bordered_stiffness_solver(S, lumped0)
    diag = A.diagonal() + np.asarray(
        B.multiply(B) @ (1.0 / M0.diagonal())).ravel()
    if np.any(diag <= 0):
        raise SolverError("reduced operator has a nonpositive diagonal")
    dinv = 1.0 / diag

    edges = cx.simplices[1]
    disp = edge_displacements(cx)
    rows = np.repeat(np.arange(s1.num_dofs), 2)
    averaging = [sparse.coo_matrix(
        (np.repeat(0.5 * disp[:, c], 2), (rows, edges.ravel())),
        shape=(s1.num_dofs, n0)).tocsr() for c in range(disp.shape[1])]

    def precond(v):
        w = dinv * v
        w = w + D0 @ s_solve(M0 @ s_solve(D0.T @ v))
        for Pi in averaging:
            w = w + Pi @ s_solve(Pi.T @ v)
        return project(w)

    b = project(b)
    b_norm = float(np.linalg.norm(b))
    target = 0.2 * rel_tol * max(b_norm, 1e-300)
    u = np.zeros(s1.num_dofs)
    iterations = 0
    for attempt in range(max_refine + 1):
        u, its, res = _pcg(lambda x: project(apply_reduced(x)), precond,
                           b, u, target, maxiter=1500)
        iterations += its
        if res <= target:
            break
    if res > target:
        raise SolverError(
            "reduced mixed solve stalled above the residual tolerance",
            diagnostics={"residual": res / max(b_norm, 1e-300),
                         "tolerance": rel_tol, "iterations": iterations,
                         "unknowns": system.num_unknowns})
    if b1:
        u = u - H @ (H.T @ (M1 @ u))
    z = M0_lu.solve(BT @ u)

    r1 = ell - (A @ u + B @ z)
    if b1:
        r1 -= M1 @ (H @ p)
    r2 = BT @ u - M0 @ z
    r3 = H.T @ (M1 @ u) if b1 else np.zeros(0)
    residual = float(np.sqrt(np.linalg.norm(r1) ** 2
                             + np.linalg.norm(r2) ** 2
                             + np.linalg.norm(r3) ** 2))
    residual /= max(float(np.linalg.norm(ell)), 1e-300)
    if residual > rel_tol:
        raise SolverError(
            "reduced solve met the inner tolerance but not the block "
            "residual", diagnostics={"residual": residual,
                                     "tolerance": rel_tol,
                                     "iterations": iterations})
    return u, z, p, residual, {"method": "reduced-cg",
                               "iterations": iterations}


def solve_mixed(system: MixedSystem, load,
                degree: int = 5, rel_tol: float = 1e-10,
                max_refine: int = 5) -> MixedSolution:
    """Solve the deflated saddle system to a relative residual.

    ``load`` is an analytic 1-form (RefField) or a moment vector.  Small
    systems factorize the full block matrix; large ones run the reduced
    conjugate-gradient path.  Either way the relative algebraic residual of
    the full block system is driven below ``rel_tol``; failure to get there
    raises with diagnostics.
    """
    cx = system.complex
    if cx.betti[1] > 0 and system.harmonic is None:
        raise SolverError(
            "geometry has harmonic 1-forms; assemble the system with the "
            "harmonic deflation block (harmonics='auto') before solving")
    ell, f_norm = _load_vector(system, load, degree)
    if system.num_unknowns <= SADDLE_DIRECT_CUTOFF:
        u, z, p, residual, diagnostics = _direct_saddle_solve(
            system, ell, rel_tol, max_refine)
    else:
        u, z, p, residual, diagnostics = _reduced_saddle_solve(
            system, ell, rel_tol, max_refine)
    if system.betti:
        deflation = float(np.abs(system.harmonic.T @ (system.M1 @ u)).max())
    else:
        deflation = 0.0
    diagnostics["deflation_residual"] = deflation
    diagnostics["unknowns"] = system.num_unknowns
    u_norm = float(np.sqrt(u @ (system.M1 @ u) + u @ (system.A @ u)))
    ratio = u_norm / f_norm if f_norm > 0 else 0.0
    return MixedSolution(u=u, z=z, p=p, residual=residual,
                         stability_ratio=ratio, diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# manufactured problems and named loads
# ---------------------------------------------------------------------------

def _sines_problem():
    two_pi = 2.0 * np.pi
    c = 4.0 * np.pi ** 2

    def U(x):
        out = np.empty(x.shape[:-1] + (3,))
        out[..., 0] = np.sin(two_pi * x[..., 2])
        out[..., 1] = np.sin(two_pi * x[..., 0])
        out[..., 2] = np.sin(two_pi * x[..., 1])
        return out

    def curl_U(x):
        out = np.empty(x.shape[:-1] + (3,))
        out[..., 0] = two_pi * np.cos(two_pi * x[..., 1])
        out[..., 1] = two_pi * np.cos(two_pi * x[..., 2])
        out[..., 2] = two_pi * np.cos(two_pi * x[..., 0])
        return out

    exact_u = FormField(1, "sines-U", U, curl_U)
    exact_z = constant_form(0, (0.0,), name="sines-zeta")
    load = FormField(1, "sines-F", lambda x: c * U(x),
                     lambda x: c * curl_U(x))
    return exact_u, exact_z, load


def _gradient_problem():
    two_pi = 2.0 * np.pi
    c = 8.0 * np.pi ** 2

    def phi(x):
        return np.cos(two_pi * x[..., 0:1]) * np.cos(two_pi * x[..., 1:2])

    def grad_phi(x):
        out = np.zeros(x.shape[:-1] + (3,))
        sx = np.sin(two_pi * x[..., 0])
        cx = np.cos(two_pi * x[..., 0])
        sy = np.sin(two_pi * x[..., 1])
        cy = np.cos(two_pi * x[..., 1])
        out[..., 0] = -two_pi * sx * cy
        out[..., 1] = -two_pi * cx * sy
        return out

    def zero3(x):
        return np.zeros(x.shape[:-1] + (3,))

    exact_u = FormField(1, "gradient-U", grad_phi, zero3)
    exact_z = FormField(0, "gradient-zeta", lambda x: c * phi(x),
                        lambda x: c * grad_phi(x))
    load = FormField(1, "gradient-F", lambda x: c * grad_phi(x), zero3)
    return exact_u, exact_z, load


def _combine(a: FormField, b: FormField, name: str) -> FormField:
    def comps(x):
        return a.comps(x) + b.comps(x)

    d_comps = None
    if a.d_comps is not None and b.d_comps is not None:
        def d_comps(x):
            return a.d_comps(x) + b.d_comps(x)

    return FormField(a.degree, name, comps, d_comps)


def manufactured_problem(name: str):
    """Exact (U, zeta, F) triples on the flat 3-torus.

    F = curl curl U + grad zeta and zeta equals minus the divergence of U,
    matching the sign convention of the discrete multiplier.
    """
    if name == "sines":
        return _sines_problem()
    if name == "gradient":
        return _gradient_problem()
    if name == "mixed":
        us, zs, fs = _sines_problem()
        ug, zg, fg = _gradient_problem()
        return (_combine(us, ug, "mixed-U"), zg,
                _combine(fs, fg, "mixed-F"))
    if name == "zero":
        z3 = constant_form(1, (0.0, 0.0, 0.0), name="zero-U")
        return z3, constant_form(0, (0.0,), name="zero-zeta"), \
            constant_form(1, (0.0, 0.0, 0.0), name="zero-F")
    raise SolverError(f"unknown manufactured problem '{name}'; catalog: "
                      "sines, gradient, mixed, zero")


def _rotational_load():
    def comps(x):
        out = np.empty(x.shape[:-1] + (3,))
        out[..., 0] = -x[..., 1]
        out[..., 1] = x[..., 0]
        out[..., 2] = 0.0
        return out

    def curl(x):
        out = np.zeros(x.shape[:-1] + (3,))
        out[..., 2] = 2.0
        return out

    return FormField(1, "rotational-F", comps, curl)


LOAD_NAMES = {
    "torus3": ("sines", "gradient", "mixed", "zero"),
    "sphere2": ("rotational", "zero"),
}


def load_catalog(geometry: str, name: str) -> FormField:
    """Named 1-form loads per geometry; torus names share the manufactured
    catalog so `solve` and `converge` agree on what F means."""
    names = LOAD_NAMES.get(geometry)
    if names is None or name not in names:
        raise SolverError(
            f"unknown load '{name}' for geometry '{geometry}'; catalog: "
            f"{', '.join(LOAD_NAMES.get(geometry, ()))}")
    if geometry == "torus3":
        return manufactured_problem(name)[2]
    if name == "zero":
        return constant_form(1, (0.0, 0.0, 0.0), name="zero-F")
    return _rotational_load()
