"""Lowest-order Whitney forms and the operators built from them.

One degree of freedom per k-simplex.  Cell vertex tuples are stored in
ascending canonical order and sub-simplex tuples inherit that order, so every
local-to-global sign is +1; orientation bookkeeping lives entirely in the
integer boundary matrices.  The discrete exterior derivative is the transpose
of the simplicial boundary operator and is metric free.

Basis conventions on the reference n-simplex (barycentric lambda_i):

    k=0        lambda_i
    k=1        lambda_i grad(lambda_j) - lambda_j grad(lambda_i)
    k=2, n=3   2 (lambda_i gj x gk - lambda_j gi x gk + lambda_k gi x gj)
    k=n        constant n!   (unit integral over the reference cell)

Component layout follows fields.py: trailing axis of width 1 for k in {0, n}
and width n otherwise (2-form proxies in n=3 use the cross-product basis).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb, factorial
from typing import Optional

import numpy as np
from scipy import sparse

from .errors import ComplexMismatchError, SolverError
from .geometry import (MetricField, mass_weight, reference_vertices,
                       simplex_rule)
from .mesh import SimplicialComplex, boundary_operator

__all__ = [
    "whitney_basis",
    "FESpace",
    "SparseOperator",
    "exterior_derivative",
    "assemble_mass",
    "assemble_load",
    "canonical_interpolant",
    "evaluate_fe_field",
    "dump_operator",
]


def _barycentric_data(dim, pts):
    pts = np.asarray(pts, dtype=float)
    lam = np.empty(pts.shape[:-1] + (dim + 1,))
    lam[..., 0] = 1.0 - pts.sum(axis=-1)
    lam[..., 1:] = pts
    grads = np.vstack([-np.ones(dim), np.eye(dim)])
    return lam, grads


def whitney_basis(dim: int, degree: int, pts) -> np.ndarray:
    """All local Whitney bases of one form degree at reference points.

    Returns (nloc, ..., c) with local functions ordered by the ascending
    vertex combinations of the reference simplex, matching the column order
    of SimplicialComplex.subsimplex_index.
    """
    if not 0 <= degree <= dim:
        raise ComplexMismatchError(
            f"no degree-{degree} forms on a {dim}-manifold")
    lam, grads = _barycentric_data(dim, pts)
    base_shape = lam.shape[:-1]

    if degree == 0:
        return np.stack([lam[..., i, None] for i in range(dim + 1)])
    if degree == dim:
        value = float(factorial(dim))
        return np.full((1,) + base_shape + (1,), value)
    if degree == 1:
        out = []
        for i, j in itertools.combinations(range(dim + 1), 2):
            out.append(lam[..., i, None] * grads[j]
                       - lam[..., j, None] * grads[i])
        return np.stack(out)
    if degree == 2 and dim == 3:
        out = []
        for i, j, k in itertools.combinations(range(4), 3):
            w = (lam[..., i, None] * np.cross(grads[j], grads[k])
                 - lam[..., j, None] * np.cross(grads[i], grads[k])
                 + lam[..., k, None] * np.cross(grads[i], grads[j]))
            out.append(2.0 * w)
        return np.stack(out)
    raise ComplexMismatchError(
        f"degree-{degree} Whitney forms in dimension {dim} not implemented")


@dataclass(frozen=True)
class FESpace:
    """Whitney k-form space on a simplicial complex."""

    complex: SimplicialComplex
    degree: int

    def __post_init__(self):
        if not 0 <= self.degree <= self.complex.dim:
            raise ComplexMismatchError(
                f"no degree-{self.degree} space on a "
                f"{self.complex.dim}-complex")

    @property
    def num_dofs(self) -> int:
        return self.complex.num_simplices(self.degree)

    @property
    def local_dofs(self) -> int:
        return comb(self.complex.dim + 1, self.degree + 1)

    @property
    def cell_dofs(self) -> np.ndarray:
        """(num_cells, local_dofs) global dof ids, all signs +1."""
        return self.complex.subsimplex_index[self.degree]

    @property
    def component_width(self) -> int:
        return 1 if self.degree in (0, self.complex.dim) else self.complex.dim


@dataclass(frozen=True)
class SparseOperator:
    """Sparse matrix between two FE spaces, with its metadata."""

    matrix: sparse.csr_matrix
    domain: FESpace
    codomain: FESpace
    name: str
    symmetric: bool = False

    def __post_init__(self):
        rows, cols = self.matrix.shape
        if rows != self.codomain.num_dofs or cols != self.domain.num_dofs:
            raise ComplexMismatchError(
                f"operator '{self.name}' is {rows}x{cols}, spaces want "
                f"{self.codomain.num_dofs}x{self.domain.num_dofs}")
        if self.symmetric:
            gap = sparse.csr_matrix(self.matrix - self.matrix.T)
            scale = max(abs(self.matrix).max(), 1e-300)
            if gap.nnz and abs(gap).max() > 1e-13 * scale:
                raise SolverError(
                    f"operator '{self.name}' marked symmetric but is not",
                    diagnostics={"asymmetry": float(abs(gap).max() / scale)})

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, other):
        return self.matrix @ other


def _same_complex(a, b, what):
    if a is not b:
        raise ComplexMismatchError(f"{what} built on a different complex")


def exterior_derivative(domain: FESpace,
                        codomain: Optional[FESpace] = None) -> SparseOperator:
    """Discrete d: transpose of the integer boundary operator."""
    cx = domain.complex
    k = domain.degree
    if codomain is None:
        codomain = FESpace(cx, k + 1)
    _same_complex(cx, codomain.complex, "codomain space")
    if codomain.degree != k + 1:
        raise ComplexMismatchError(
            f"d maps degree {k} to {k + 1}, not {codomain.degree}")
    matrix = boundary_operator(cx, k + 1).T.tocsr()
    return SparseOperator(matrix=matrix, domain=domain, codomain=codomain,
                          name=f"d{k}")


def _scatter_cellwise(local, dofs, num_dofs):
    """(m, a, b) cell matrices -> global csr, symmetrized."""
    m, nloc, _ = local.shape
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    mat = sparse.coo_matrix((local.ravel(), (rows, cols)),
                            shape=(num_dofs, num_dofs)).tocsr()
    return (mat + mat.T) * 0.5


def assemble_mass(space: FESpace, metric: MetricField,
                  degree: int = 5) -> SparseOperator:
    """Mass matrix of the k-form L2 inner product in the given metric."""
    _same_complex(space.complex, metric.complex, "metric")
    cx = space.complex
    n, k = cx.dim, space.degree
    rule = simplex_rule(n, degree)
    basis = whitney_basis(n, k, rule.points)            # (a, q, c)
    weight = mass_weight(k, metric.eval(None, rule.points))
    if weight.ndim == 2:                                 # scalar weight (m, q)
        local = np.einsum("aq,mq,bq,q->mab", basis[..., 0], weight,
                          basis[..., 0], rule.weights, optimize=True)
    else:
        local = np.einsum("aqc,mqcd,bqd,q->mab", basis, weight, basis,
                          rule.weights, optimize=True)
    mat = _scatter_cellwise(local, space.cell_dofs, space.num_dofs)
    return SparseOperator(matrix=mat, domain=space, codomain=space,
                          name=f"M{k}[{metric.name}]", symmetric=True)


def assemble_load(space: FESpace, ref_field, metric: MetricField,
                  degree: int = 5) -> np.ndarray:
    """Load vector r_a = integral <phi_a, F>_g over the complex."""
    _same_complex(space.complex, metric.complex, "metric")
    _same_complex(space.complex, ref_field.complex, "field")
    if ref_field.degree != space.degree:
        raise ComplexMismatchError(
            f"load field has degree {ref_field.degree}, space wants "
            f"{space.degree}")
    cx = space.complex
    n, k = cx.dim, space.degree
    rule = simplex_rule(n, degree)
    basis = whitney_basis(n, k, rule.points)
    weight = mass_weight(k, metric.eval(None, rule.points))
    vals = ref_field.eval(None, rule.points)             # (m, q, c)
    if weight.ndim == 2:
        local = np.einsum("aq,mq,mq,q->ma", basis[..., 0], weight,
                          vals[..., 0], rule.weights, optimize=True)
    else:
        local = np.einsum("aqc,mqcd,mqd,q->ma", basis, weight, vals,
                          rule.weights, optimize=True)
    out = np.zeros(space.num_dofs)
    np.add.at(out, space.cell_dofs, local)
    return out


def canonical_interpolant(space: FESpace, ref_field,
                          degree: int = 17) -> np.ndarray:
    """Degrees of freedom of the canonical (trace integral) interpolant.

    Each k-simplex trace is integrated through the first cell containing it;
    for tangentially continuous fields every containing cell gives the same
    number.  The quadrature degree is deliberately high so that commuting
    residuals of trigonometric fields bottom out at solver tolerance rather
    than at trace integration error.
    """
    _same_complex(space.complex, ref_field.complex, "field")
    if ref_field.degree != space.degree:
        raise ComplexMismatchError(
            f"interpolating a degree-{ref_field.degree} field into a "
            f"degree-{space.degree} space")
    cx = space.complex
    n, k = cx.dim, space.degree
    first = cx.first_cell[k]                             # (N_k, 2)
    combos = list(itertools.combinations(range(n + 1), k + 1))
    verts = reference_vertices(n)
    out = np.empty(space.num_dofs)

    if k == 0:
        for c, pos in enumerate(combos):
            sel = np.nonzero(first[:, 1] == c)[0]
            if sel.size == 0:
                continue
            cells = first[sel, 0]
            pts = np.broadcast_to(verts[pos[0]], (sel.size, 1, n))
            out[sel] = ref_field.eval(cells, pts)[:, 0, 0]
        return out

    rule = simplex_rule(k, degree)
    for c, pos in enumerate(combos):
        sel = np.nonzero(first[:, 1] == c)[0]
        if sel.size == 0:
            continue
        cells = first[sel, 0]
        origin = verts[pos[0]]
        span = np.stack([verts[p] - origin for p in pos[1:]], axis=1)
        pts = origin + rule.points @ span.T              # (q, n)
        vals = ref_field.eval(cells, np.broadcast_to(
            pts, (sel.size,) + pts.shape))               # (m, q, c)
        if k == 1:
            trace = vals @ span[:, 0]
        elif k == 2 and n == 3:
            trace = vals @ np.cross(span[:, 0], span[:, 1])
        else:                                            # k == n
            trace = vals[..., 0] * np.linalg.det(span)
        out[sel] = trace @ rule.weights
    return out


def evaluate_fe_field(space: FESpace, coeffs, cells, pts) -> np.ndarray:
    """Pointwise reference-coordinate components of a coefficient vector.

    ``pts`` is either (q, n), shared by all requested cells, or (m, q, n)
    matching ``cells``.  Returns (m, q, c).
    """
    cx = space.complex
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (space.num_dofs,):
        raise ComplexMismatchError(
            f"coefficient vector has shape {coeffs.shape}, space wants "
            f"({space.num_dofs},)")
    if cells is None:
        cells = np.arange(cx.num_simplices(cx.dim))
    cells = np.asarray(cells, dtype=np.int64)
    local = coeffs[space.cell_dofs[cells]]               # (m, a)
    pts = np.asarray(pts, dtype=float)
    basis = whitney_basis(cx.dim, space.degree, pts)
    if pts.ndim == 2:                                    # (a, q, c) shared
        return np.einsum("ma,aqc->mqc", local, basis)
    return np.einsum("ma,amqc->mqc", local, basis)


def dump_operator(op: SparseOperator, path) -> None:
    """Plain text triplet dump: header line, then 'row col value' lines."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# {op.name} {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for i in order:
            fh.write(f"{coo.row[i]} {coo.col[i]} {coo.data[i]:.17g}\n")
