"""Analytic differential forms and their pullbacks to reference coordinates.

A FormField is a k-form given in the coordinates of the ambient space: the
fundamental-domain chart R^3/Z^3 for the torus, ambient R^3 for the sphere.
Component conventions (always a trailing component axis):

    k=0   (..., 1)   scalar
    k=1   (..., 3)   covector components (a1, a2, a3)
    k=2   (..., 3)   proxy (b1, b2, b3) for b1 dy^dz + b2 dz^dx + b3 dx^dy
    k=3   (..., 1)   coefficient of dx^dy^dz

``d_comps`` holds the components of the exterior derivative (gradient, curl,
divergence in proxy language), supplied analytically by each catalog entry.

A RefField is the same object pushed down to per-cell reference coordinates
through a ThetaMap; this is the form every assembly and interpolation routine
consumes.  Pullback commutes with d, so the reference derivative is just the
pullback of ``d_comps``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import MeshError
from .geometry import ThetaMap, _expand_cell_points

__all__ = [
    "FormField",
    "RefField",
    "pullback_form",
    "fe_ref_field",
    "torus_commuting_catalog",
    "sphere_commuting_catalog",
    "broken_torus_field",
    "constant_form",
    "check_tangential_continuity",
]

TAGS = ("smooth", "tangentially-continuous", "discontinuous")


@dataclass(frozen=True)
class FormField:
    """Analytic k-form in ambient/chart coordinates."""

    degree: int
    name: str
    comps: Callable = field(repr=False)            # (..., 3) -> (..., c)
    d_comps: Optional[Callable] = field(default=None, repr=False)

    def d(self) -> "FormField":
        if self.d_comps is None:
            raise MeshError(f"field '{self.name}' has no derivative attached")
        k1 = self.degree + 1
        return FormField(degree=k1, name=f"d({self.name})",
                         comps=self.d_comps,
                         d_comps=(_zero_comps(k1 + 1) if k1 < 3 else None))


def _zero_comps(degree):
    width = 1 if degree in (0, 3) else 3

    def comps(x):
        return np.zeros(x.shape[:-1] + (width,))

    return comps


def constant_form(degree: int, values, name: str = "const") -> FormField:
    values = np.asarray(values, dtype=float).reshape(-1)

    def comps(x):
        return np.broadcast_to(values, x.shape[:-1] + values.shape).copy()

    return FormField(degree=degree, name=name, comps=comps,
                     d_comps=_zero_comps(degree + 1) if degree < 3 else None)


@dataclass(frozen=True)
class RefField:
    """k-form in reference coordinates of each top cell.

    ``eval``/``eval_d`` take (cells, reference points) like MetricField and
    return component arrays (m, q, c).  ``tag`` records the continuity class
    across cell interfaces.
    """

    complex: object
    degree: int
    tag: str
    name: str
    eval: Callable = field(repr=False)
    eval_d: Optional[Callable] = field(default=None, repr=False)

    def d(self) -> "RefField":
        if self.eval_d is None:
            raise MeshError(f"field '{self.name}' has no derivative attached")
        return RefField(complex=self.complex, degree=self.degree + 1,
                        tag=self.tag, name=f"d({self.name})",
                        eval=self.eval_d, eval_d=None)


def _pullback_components(degree, J, comps):
    """Pull ambient k-form components back through a map with Jacobian J
    (m, q, 3, n)."""
    n = J.shape[-1]
    if degree == 0:
        return comps
    if degree == 1:
        return np.einsum("mqia,mqi->mqa", J, comps)
    if degree == 2:
        cross = {}
        for a in range(n):
            for b in range(a + 1, n):
                cross[a, b] = np.cross(J[..., :, a], J[..., :, b])
        if n == 2:
            out = np.einsum("mqi,mqi->mq", comps, cross[0, 1])
            return out[..., None]
        pulled = np.empty(comps.shape)
        pulled[..., 0] = np.einsum("mqi,mqi->mq", comps, cross[1, 2])
        pulled[..., 1] = -np.einsum("mqi,mqi->mq", comps, cross[0, 2])
        pulled[..., 2] = np.einsum("mqi,mqi->mq", comps, cross[0, 1])
        return pulled
    if degree == 3 and n == 3:
        det = np.linalg.det(J)
        return comps * det[..., None]
    raise MeshError(f"cannot pull back a degree-{degree} form to dimension {n}")


def pullback_form(theta: ThetaMap, form: FormField,
                  tag: str = "smooth") -> RefField:
    """Reference-coordinate realization of an ambient form through Theta."""
    if tag not in TAGS:
        raise MeshError(f"unknown continuity tag '{tag}'")
    complex = theta.complex

    def evaluate(cells, pts):
        cells, pts = _expand_cell_points(complex, cells, pts)
        x = theta.point(cells, pts)
        J = theta.jacobian(cells, pts)
        return _pullback_components(form.degree, J, form.comps(x))

    eval_d = None
    if form.d_comps is not None and form.degree < complex.dim:
        d_form = form.d()

        def eval_d(cells, pts):
            cells, pts = _expand_cell_points(complex, cells, pts)
            x = theta.point(cells, pts)
            J = theta.jacobian(cells, pts)
            return _pullback_components(d_form.degree, J, d_form.comps(x))

    return RefField(complex=complex, degree=form.degree, tag=tag,
                    name=form.name, eval=evaluate, eval_d=eval_d)


def fe_ref_field(space, coeffs, tag: str = "tangentially-continuous") -> RefField:
    """Wrap a finite element field (space + coefficients) as a RefField.

    The derivative evaluator applies the discrete exterior derivative to the
    coefficients, which is exact for Whitney forms.
    """
    from . import whitney  # local import to avoid a module cycle

    coeffs = np.asarray(coeffs, dtype=float)

    def evaluate(cells, pts):
        return whitney.evaluate_fe_field(space, coeffs, cells, pts)

    eval_d = None
    if space.degree < space.complex.dim:
        d_space = whitney.FESpace(space.complex, space.degree + 1)
        d_op = whitney.exterior_derivative(space, d_space)
        d_coeffs = d_op.matrix @ coeffs

        def eval_d(cells, pts):
            return whitney.evaluate_fe_field(d_space, d_coeffs, cells, pts)

    return RefField(complex=space.complex, degree=space.degree, tag=tag,
                    name="fe-field", eval=evaluate, eval_d=eval_d)


# ---------------------------------------------------------------------------
# catalogs
# ---------------------------------------------------------------------------

def _torus_scalar():
    two_pi = 2.0 * np.pi

    def comps(x):
        return np.cos(two_pi * x[..., 0:1]) * np.sin(two_pi * x[..., 1:2])

    def grad(x):
        cx = np.cos(two_pi * x[..., 0])
        sx = np.sin(two_pi * x[..., 0])
        cy = np.cos(two_pi * x[..., 1])
        sy = np.sin(two_pi * x[..., 1])
        out = np.zeros(x.shape[:-1] + (3,))
        out[..., 0] = -two_pi * sx * sy
        out[..., 1] = two_pi * cx * cy
        return out

    return FormField(0, "torus-cos-sin", comps, grad)


def _torus_one_form():
    two_pi = 2.0 * np.pi

    def comps(x):
        out = np.zeros(x.shape[:-1] + (3,))
        out[..., 0] = np.sin(two_pi * x[..., 2])
        out[..., 1] = np.sin(two_pi * x[..., 0])
        out[..., 2] = np.sin(two_pi * x[..., 1])
        return out

    def curl(x):
        out = np.zeros(x.shape[:-1] + (3,))
        out[..., 0] = two_pi * np.cos(two_pi * x[..., 1])
        out[..., 1] = two_pi * np.cos(two_pi * x[..., 2])
        out[..., 2] = two_pi * np.cos(two_pi * x[..., 0])
        return out

    return FormField(1, "torus-sines", comps, curl)


def _torus_two_form():
    two_pi = 2.0 * np.pi

    def comps(x):
        out = np.zeros(x.shape[:-1] + (3,))
        out[..., 0] = np.sin(two_pi * x[..., 1]) * np.cos(two_pi * x[..., 2])
        out[..., 1] = np.cos(two_pi * x[..., 0])
        out[..., 2] = np.sin(two_pi * x[..., 0]) * np.sin(two_pi * x[..., 1])
        return out

    def div(x):
        # only the first proxy component depends on its own axis... it does
        # not: d/dx of comp0 is 0, d/dy of comp1 is 0, d/dz of comp2 is 0
        return np.zeros(x.shape[:-1] + (1,))

    return FormField(2, "torus-swirl2", comps, div)


def torus_commuting_catalog():
    """Periodic fields on the torus chart, one per form degree 0..2."""
    return [_torus_scalar(), _torus_one_form(), _torus_two_form(),
            constant_form(1, (1.0, -2.0, 0.5), name="const-one-form")]


def _sphere_poly_scalar():
    def comps(x):
        return (x[..., 0:1] * x[..., 1:2] * x[..., 2:3]
                + 0.5 * x[..., 0:1] ** 2 - x[..., 2:3])

    def grad(x):
        out = np.empty(x.shape[:-1] + (3,))
        out[..., 0] = x[..., 1] * x[..., 2] + x[..., 0]
        out[..., 1] = x[..., 0] * x[..., 2]
        out[..., 2] = x[..., 0] * x[..., 1] - 1.0
        return out

    return FormField(0, "sphere-poly0", comps, grad)


def _sphere_poly_one_form():
    def comps(x):
        out = np.empty(x.shape[:-1] + (3,))
        out[..., 0] = -x[..., 1] + x[..., 2] ** 2
        out[..., 1] = x[..., 0] * x[..., 2]
        out[..., 2] = x[..., 0] ** 3
        return out

    def curl(x):
        out = np.empty(x.shape[:-1] + (3,))
        out[..., 0] = -x[..., 0]
        out[..., 1] = 2.0 * x[..., 2] - 3.0 * x[..., 0] ** 2
        out[..., 2] = x[..., 2] + 1.0
        return out

    return FormField(1, "sphere-poly1", comps, curl)


def _sphere_trig_scalar():
    def comps(x):
        return np.sin(x[..., 0:1]) * np.cos(x[..., 1:2]) + x[..., 2:3]

    def grad(x):
        out = np.empty(x.shape[:-1] + (3,))
        out[..., 0] = np.cos(x[..., 0]) * np.cos(x[..., 1])
        out[..., 1] = -np.sin(x[..., 0]) * np.sin(x[..., 1])
        out[..., 2] = 1.0
        return out

    return FormField(0, "sphere-trig0", comps, grad)


def _sphere_trig_one_form():
    def comps(x):
        out = np.empty(x.shape[:-1] + (3,))
        out[..., 0] = np.sin(x[..., 1])
        out[..., 1] = np.cos(x[..., 2])
        out[..., 2] = np.sin(x[..., 0])
        return out

    def curl(x):
        out = np.empty(x.shape[:-1] + (3,))
        out[..., 0] = np.sin(x[..., 2])
        out[..., 1] = -np.cos(x[..., 0])
        out[..., 2] = -np.cos(x[..., 1])
        return out

    return FormField(1, "sphere-trig1", comps, curl)


def sphere_commuting_catalog():
    """Ambient polynomial and trigonometric forms restricted to the sphere."""
    return [_sphere_poly_scalar(), _sphere_poly_one_form(),
            _sphere_trig_scalar(), _sphere_trig_one_form()]


def broken_torus_field():
    """Tangentially continuous 1-form whose normal component jumps across the
    mesh plane x = 0 (== 1): the dx component cos(pi x) has different limits
    from the two sides of the identification, the dy/dz components are
    1-periodic and smooth."""
    two_pi = 2.0 * np.pi

    def comps(x):
        out = np.empty(x.shape[:-1] + (3,))
        out[..., 0] = np.cos(np.pi * x[..., 0])
        out[..., 1] = np.sin(two_pi * x[..., 1])
        out[..., 2] = np.cos(two_pi * x[..., 2])
        return out

    def curl(x):
        return np.zeros(x.shape[:-1] + (3,))

    return FormField(1, "broken-normal-jump", comps, curl)


# ---------------------------------------------------------------------------
# continuity validation
# ---------------------------------------------------------------------------

def check_tangential_continuity(field: RefField, degree: int = 4,
                                tol: float = 1e-12) -> float:
    """Largest mismatch of tangential traces across interior codim-1 faces.

    For every (n-1)-simplex shared by two cells, the field is evaluated from
    both sides at common quadrature points and pulled back onto the face;
    matching traces are what the tangentially-continuous tag promises.
    """
    from .geometry import simplex_rule, reference_vertices
    import itertools as _it

    cx = field.complex
    n = cx.dim
    k = field.degree
    if k >= n:
        raise MeshError("tangential traces compare forms of degree < n")
    rule = simplex_rule(n - 1, degree) if n - 1 >= 1 else None
    combos = list(_it.combinations(range(n + 1), n))
    verts = reference_vertices(n)

    # both cells touching each face, from the per-cell subsimplex table
    owners = [[] for _ in range(cx.num_simplices(n - 1))]
    table = cx.subsimplex_index[n - 1]
    for t in range(table.shape[0]):
        for c in range(table.shape[1]):
            owners[table[t, c]].append((t, c))

    worst = 0.0
    for fid, own in enumerate(owners):
        if len(own) != 2:
            continue
        traces = []
        for t, c in own:
            pos = combos[c]
            origin = verts[pos[0]]
            span = np.stack([verts[p] - verts[pos[0]] for p in pos[1:]], axis=1)
            pts = origin + rule.points @ span.T
            vals = field.eval(np.array([t]), pts[None])[0]
            if k == 0:
                traces.append(vals)
            elif k == 1:
                traces.append(np.einsum("qc,ca->qa", vals, span))
            else:
                raise MeshError("trace comparison implemented for k <= 1")
        worst = max(worst, float(np.abs(traces[0] - traces[1]).max()))
    if field.tag in ("smooth", "tangentially-continuous") and worst > tol:
        raise MeshError(
            f"field '{field.name}' tagged {field.tag} has tangential trace "
            f"mismatch {worst:.3e} > {tol:.1e}")
    return worst
