"""Quadrature, Riemannian metrics and k-form mass weights.

Every metric in this package is stored in reference-simplex coordinates: a
MetricField evaluates, for a batch of cells and reference points, the n x n
Gram matrix of the metric pulled back through (Theta o chart).  With that
convention all finite element quantities are assembled directly on the
reference simplex and the chart Jacobians never appear downstream; they are
folded into the metric once, here.

The L^2 inner product of k-forms with (chart) component vectors a, b under a
metric G is  integral( a . W_k(G) b )  over reference coordinates, with

    W_0 = sqrt(det G)               W_1 = sqrt(det G) G^{-1}
    W_2 = G / sqrt(det G)  (n=3)    W_n = 1 / sqrt(det G)

so scaling G -> cG on a 3-manifold scales the four weights by c^{3/2},
c^{1/2}, c^{-1/2}, c^{-3/2} respectively.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import roots_jacobi

from .errors import (ConfigError, DegenerateMetricError, MeshError,
                     SingularMapError)
from .mesh import SimplicialComplex

__all__ = [
    "QuadratureRule",
    "quadrature_rule",
    "simplex_rule",
    "mass_weight",
    "MetricField",
    "ThetaMap",
    "identity_theta",
    "radial_theta",
    "pullback_metric",
    "interpolate_metric",
    "total_volume",
    "flat_metric",
    "perturbed_torus_metric",
    "round_sphere_metric",
    "metric_catalog",
    "exact_metric",
    "approx_metric",
    "APPROX_NAMES",
    "reference_vertices",
    "barycentric",
]


# ---------------------------------------------------------------------------
# quadrature on the reference simplex
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    dim: int
    degree: int
    points: np.ndarray   # (m, dim)
    weights: np.ndarray  # (m,), sum = 1/dim!


def simplex_rule(dim: int, degree: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi rule on the reference simplex, exact for
    polynomials of the given total degree.  Supports dim 1..3 and any
    degree >= 1; all points are interior."""
    if dim not in (1, 2, 3):
        raise MeshError(f"no simplex quadrature for dimension {dim}")
    if degree < 1:
        raise MeshError("quadrature degree must be >= 1")
    q = (degree + 2) // 2  # 2q - 1 >= degree
    nodes, weights = [], []
    for alpha in range(dim):
        t, w = roots_jacobi(q, alpha, 0.0)
        # map from [-1, 1] with weight (1-t)^alpha to [0, 1] with (1-u)^alpha
        nodes.append((t + 1.0) / 2.0)
        weights.append(w / 2.0 ** (alpha + 1))
    pts = np.zeros((q ** dim, dim))
    wts = np.ones(q ** dim)
    # Duffy map: x_d = u_d * prod_{e>d} (1 - u_e); weights absorb the Jacobian
    idx = np.stack(np.meshgrid(*[np.arange(q)] * dim, indexing="ij"),
                   axis=-1).reshape(-1, dim)
    for d in range(dim):
        u = nodes[d][idx[:, d]]
        tail = np.ones(len(idx))
        for e in range(d + 1, dim):
            tail = tail * (1.0 - nodes[e][idx[:, e]])
        pts[:, d] = u * tail
        wts = wts * weights[d][idx[:, d]]
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(dim=dim, degree=2 * q - 1, points=pts, weights=wts)


def quadrature_rule(dim: int, degree: int) -> QuadratureRule:
    """Public quadrature catalog: reference triangle or tetrahedron, exactness
    degree 1..6."""
    if dim not in (2, 3):
        raise MeshError(f"unsupported quadrature dimension {dim} (need 2 or 3)")
    if not 1 <= degree <= 6:
        raise MeshError(f"unsupported quadrature degree {degree} (need 1..6)")
    return simplex_rule(dim, degree)


def reference_vertices(dim: int) -> np.ndarray:
    """Vertices of the reference simplex: origin followed by the unit basis."""
    verts = np.zeros((dim + 1, dim))
    verts[1:] = np.eye(dim)
    return verts


def barycentric(pts: np.ndarray) -> np.ndarray:
    """Barycentric coordinates (..., n+1) of reference points (..., n)."""
    lam0 = 1.0 - pts.sum(axis=-1, keepdims=True)
    return np.concatenate([lam0, pts], axis=-1)


# ---------------------------------------------------------------------------
# mass weights
# ---------------------------------------------------------------------------

def _det_spd(G: np.ndarray) -> np.ndarray:
    det = np.linalg.det(G)
    if np.any(det <= 0.0):
        raise DegenerateMetricError("metric with non-positive determinant")
    return det


def mass_weight(k: int, G: np.ndarray):
    """L^2 weight of k-form components under metric G (shape (..., n, n)).

    Returns an array of shape (...,) for k in {0, n} and (..., n, n) for the
    vector-valued degrees.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[-1]
    if not 0 <= k <= n:
        raise MeshError(f"no degree-{k} forms on an {n}-manifold")
    det = _det_spd(G)
    sqrt_det = np.sqrt(det)
    if k == 0:
        return sqrt_det
    if k == n:
        return 1.0 / sqrt_det
    if k == 1:
        W = np.linalg.inv(G) * sqrt_det[..., None, None]
    elif k == 2 and n == 3:
        W = G / sqrt_det[..., None, None]
    else:
        raise MeshError(f"unsupported form degree {k} in dimension {n}")
    return 0.5 * (W + np.swapaxes(W, -1, -2))


# ---------------------------------------------------------------------------
# metric fields and Theta maps
# ---------------------------------------------------------------------------

def _expand_cell_points(complex, cells, pts):
    """Normalize (cells, pts) to (cells (m,), pts (m, q, n))."""
    if cells is None:
        cells = np.arange(complex.cell_charts.shape[0])
    cells = np.atleast_1d(np.asarray(cells, dtype=np.int64))
    pts = np.asarray(pts, dtype=float)
    if pts.ndim == 2:
        pts = np.broadcast_to(pts, (cells.shape[0],) + pts.shape)
    if pts.ndim != 3 or pts.shape[0] != cells.shape[0]:
        raise MeshError("reference points must have shape (q, n) or (m, q, n)")
    return cells, pts


@dataclass(frozen=True)
class MetricField:
    """Metric in reference coordinates: (cells, reference points) -> SPD n x n."""

    complex: SimplicialComplex
    tag: str        # "analytic" | "piecewise-linear" | "piecewise-constant"
    name: str
    _eval: Callable = field(repr=False)

    def eval(self, cells, pts) -> np.ndarray:
        cells, pts = _expand_cell_points(self.complex, cells, pts)
        return self._eval(cells, pts)


@dataclass(frozen=True)
class ThetaMap:
    """Per-cell parametrization Theta o chart of the target manifold.

    ``point`` returns ambient coordinates, ``jacobian`` the derivative of the
    composite map, shape (m, q, ambient_dim, n).
    """

    complex: SimplicialComplex
    name: str
    ambient_dim: int
    identity: bool
    point: Callable = field(repr=False)
    jacobian: Callable = field(repr=False)


def identity_theta(complex: SimplicialComplex) -> ThetaMap:
    """Theta = identity: the composite map is just the affine chart."""
    charts = complex.cell_charts
    jac = complex.chart_jacobians()

    def point(cells, pts):
        cells, pts = _expand_cell_points(complex, cells, pts)
        return charts[cells, 0][:, None, :] + np.einsum(
            "mij,mqj->mqi", jac[cells], pts)

    def jacobian(cells, pts):
        cells, pts = _expand_cell_points(complex, cells, pts)
        return np.broadcast_to(jac[cells][:, None],
                               (cells.shape[0], pts.shape[1]) + jac.shape[1:])

    return ThetaMap(complex=complex, name="identity",
                    ambient_dim=charts.shape[2], identity=True,
                    point=point, jacobian=jacobian)


def radial_theta(complex: SimplicialComplex) -> ThetaMap:
    """Theta(x) = x / |x|: radial projection of a polyhedral surface onto the
    unit sphere, composed with the affine charts."""
    base = identity_theta(complex)

    def point(cells, pts):
        p = base.point(cells, pts)
        r = np.linalg.norm(p, axis=-1, keepdims=True)
        if np.any(r == 0.0):
            raise SingularMapError("radial projection undefined at the origin")
        return p / r

    def jacobian(cells, pts):
        p = base.point(cells, pts)
        J = base.jacobian(cells, pts)
        r = np.linalg.norm(p, axis=-1)
        if np.any(r == 0.0):
            raise SingularMapError("radial projection undefined at the origin")
        phat = p / r[..., None]
        proj = np.eye(3) - phat[..., :, None] * phat[..., None, :]
        return np.einsum("mqij,mqjk->mqik", proj, J) / r[..., None, None]

    return ThetaMap(complex=complex, name="radial",
                    ambient_dim=3, identity=False,
                    point=point, jacobian=jacobian)


def pullback_metric(theta: ThetaMap,
                    ambient_metric: Optional[Callable] = None,
                    name: Optional[str] = None) -> MetricField:
    """Pull an ambient metric back through Theta o chart.

    ``ambient_metric`` maps ambient points (..., d) to SPD matrices
    (..., d, d); None means the Euclidean metric.  The result is validated
    for full rank on a probe set (cell vertices and barycenter).
    """
    complex = theta.complex

    def evaluate(cells, pts):
        J = theta.jacobian(cells, pts)
        if ambient_metric is None:
            G = np.einsum("mqia,mqib->mqab", J, J)
        else:
            A = ambient_metric(theta.point(cells, pts))
            G = np.einsum("mqia,mqij,mqjb->mqab", J, A, J)
        return 0.5 * (G + np.swapaxes(G, -1, -2))

    metric = MetricField(complex=complex, tag="analytic",
                         name=name or f"pullback[{theta.name}]",
                         _eval=evaluate)
    probe = np.vstack([reference_vertices(complex.dim),
                       np.full((1, complex.dim), 1.0 / (complex.dim + 1))])
    values = metric.eval(None, probe)
    if np.any(np.linalg.eigvalsh(values)[..., 0] <= 0.0):
        raise SingularMapError(
            "pullback metric is singular: rank-deficient Jacobian")
    return metric


def interpolate_metric(source: MetricField, scheme: str) -> MetricField:
    """Piecewise-polynomial interpolation of a metric, cell by cell.

    "pw-constant" samples the source at the barycenter; "pw-linear" samples at
    the cell vertices and interpolates with barycentric weights.  Vertex and
    barycenter values are checked to be SPD.
    """
    complex = source.complex
    n = complex.dim
    if scheme == "pw-constant":
        center = np.full((1, n), 1.0 / (n + 1))
        values = source.eval(None, center)[:, 0]  # (N, n, n)
        _require_spd(values, scheme)

        def evaluate(cells, pts):
            block = values[cells][:, None]
            return np.broadcast_to(block,
                                   (cells.shape[0], pts.shape[1], n, n)).copy()

        tag = "piecewise-constant"
    elif scheme == "pw-linear":
        verts = reference_vertices(n)
        values = source.eval(None, verts)  # (N, n+1, n, n)
        _require_spd(values, scheme)

        def evaluate(cells, pts):
            lam = barycentric(pts)
            return np.einsum("mqv,mvab->mqab", lam, values[cells])

        tag = "piecewise-linear"
    else:
        raise MeshError(f"unknown metric interpolation scheme '{scheme}' "
                        "(valid: pw-constant, pw-linear)")
    return MetricField(complex=complex, tag=tag,
                       name=f"{source.name}|{scheme}", _eval=evaluate)


def _require_spd(values, context):
    eig = np.linalg.eigvalsh(values)
    if np.any(eig[..., 0] <= 0.0):
        raise DegenerateMetricError(
            f"{context} interpolation produced a non-SPD metric value")


def total_volume(complex: SimplicialComplex, metric: MetricField,
                 degree: int = 5) -> float:
    """Riemannian volume: cellwise integral of sqrt(det G)."""
    rule = simplex_rule(complex.dim, degree)
    G = metric.eval(None, rule.points)
    det = _det_spd(G)
    return float(np.sum(np.sqrt(det) @ rule.weights))


# ---------------------------------------------------------------------------
# metric catalog
# ---------------------------------------------------------------------------

def flat_metric(complex: SimplicialComplex) -> MetricField:
    """Pullback of the Euclidean ambient/chart metric: the constant per-cell
    Gram matrix of the chart map."""
    return pullback_metric(identity_theta(complex), name="flat")


def _sine_symmetric_field(x: np.ndarray) -> np.ndarray:
    """Smooth 1-periodic field of symmetric matrices used to perturb the
    flat torus metric."""
    two_pi = 2.0 * np.pi
    sx, sy, sz = (np.sin(two_pi * x[..., i]) for i in range(3))
    sxy = np.sin(two_pi * (x[..., 0] + x[..., 1]))
    syz = np.sin(two_pi * (x[..., 1] + x[..., 2]))
    szx = np.sin(two_pi * (x[..., 2] + x[..., 0]))
    S = np.zeros(x.shape[:-1] + (3, 3))
    S[..., 0, 0] = sy
    S[..., 1, 1] = sz
    S[..., 2, 2] = sx
    S[..., 0, 1] = S[..., 1, 0] = 0.5 * sxy
    S[..., 0, 2] = S[..., 2, 0] = 0.5 * syz
    S[..., 1, 2] = S[..., 2, 1] = 0.5 * szx
    return S


def _expm_symmetric(S: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(S)
    return np.einsum("...ab,...b,...cb->...ac", V, np.exp(w), V)


def perturbed_torus_metric(complex: SimplicialComplex,
                           eps: float = 0.3) -> MetricField:
    """g(x) = exp(eps * S(x)) with S a symmetric field of sines; SPD for any
    eps by construction and equal to the flat metric at eps = 0."""
    if complex.geometry != "torus3":
        raise MeshError("perturbed metric is defined on the torus geometry")

    def ambient(x):
        return _expm_symmetric(eps * _sine_symmetric_field(x))

    return pullback_metric(identity_theta(complex), ambient_metric=ambient,
                           name=f"perturbed(eps={eps})")


def round_sphere_metric(complex: SimplicialComplex) -> MetricField:
    """Pullback of the round metric through radial projection onto the unit
    sphere."""
    if complex.geometry != "sphere2":
        raise MeshError("round pullback metric is defined on the sphere geometry")
    return pullback_metric(radial_theta(complex), name="round-pullback")


def metric_catalog(complex: SimplicialComplex, name: str,
                   eps: float = 0.3) -> MetricField:
    """Metric lookup used by the experiment configs.

    flat             chart Gram matrix (both geometries)
    perturbed        exp(eps * sines) pullback (torus only)
    round-pullback   round sphere pullback (sphere only)
    pw-constant      cellwise-constant interpolation of the geometry's
                     exact metric (perturbed torus / round sphere)
    pw-linear        cellwise-linear interpolation of the same
    """
    if name == "flat":
        return flat_metric(complex)
    if name == "perturbed":
        return perturbed_torus_metric(complex, eps=eps)
    if name == "round-pullback":
        return round_sphere_metric(complex)
    if name in ("pw-constant", "pw-linear"):
        return interpolate_metric(exact_metric(complex, eps=eps), name)
    raise MeshError(
        f"unknown metric '{name}' (valid: flat, perturbed, round-pullback, "
        "pw-constant, pw-linear)")


def exact_metric(complex: SimplicialComplex, eps: float = 0.3) -> MetricField:
    """The geometry's exact pullback metric: perturbed sines on the torus,
    the round metric on the sphere."""
    if complex.geometry == "torus3":
        return perturbed_torus_metric(complex, eps=eps)
    if complex.geometry == "sphere2":
        return round_sphere_metric(complex)
    raise MeshError(f"no exact metric catalog for geometry '{complex.geometry}'")


APPROX_NAMES = ("exact", "flat", "pw-constant", "pw-linear")


def approx_metric(complex: SimplicialComplex, approx: str,
                  eps: float = 0.3) -> MetricField:
    """Computational metric for one approximation scheme of the exact one."""
    if approx == "exact":
        return exact_metric(complex, eps)
    if approx == "flat":
        return flat_metric(complex)
    if approx in ("pw-constant", "pw-linear"):
        return interpolate_metric(exact_metric(complex, eps), approx)
    raise ConfigError(
        f"unknown approximation scheme '{approx}'; catalog: "
        f"{', '.join(APPROX_NAMES)}")
