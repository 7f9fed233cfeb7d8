"""Simplicial complexes for two compact model geometries.

Two builders are provided: a flat 3-torus triangulated by the Kuhn (Freudenthal)
subdivision of a periodic cube grid, and an icosphere (subdivided icosahedron
with vertices on the unit 2-sphere).  Both produce the same data structure:

* for every k, the list of k-simplices, each stored with its global vertex
  indices in a fixed canonical order;
* signed incidence (boundary) matrices with integer entries, so that the chain
  property  boundary o boundary = 0  holds exactly in integer arithmetic;
* per-cell affine charts: the coordinates of each top cell's vertices, in
  fundamental-domain coordinates for the torus and ambient R^3 coordinates
  for the sphere.

Periodic identification demands care at small subdivision counts: on the
1-subdivision torus all eight cube corners are the same quotient vertex, so a
simplex is NOT determined by its global vertex tuple.  Simplices are therefore
identified by their lift to the covering lattice, translated so that the
lexicographically smallest vertex lands in the fundamental cell.  Translation
preserves the row order, so face deletion signs stay consistent and dd = 0 is
exact by construction.

Vertex order convention: every stored simplex has its vertex labels sorted
ascending (lexicographically for lattice labels).  All orientation-sensitive
quantities elsewhere in the package inherit this convention, which makes the
discrete exterior derivative a pure incidence transpose with no per-cell sign
tables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DegenerateCellError, MeshError

__all__ = [
    "SimplicialComplex",
    "ShapeRegularityReport",
    "build_torus3",
    "build_icosphere",
    "build_level",
    "GEOMETRY_NAMES",
    "refine_uniform",
    "boundary_operator",
    "edge_displacements",
    "shape_regularity",
    "single_cell_complex",
    "dump_mesh",
]

GEOMETRY_NAMES = ("torus3", "sphere2")


# ---------------------------------------------------------------------------
# data structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimplicialComplex:
    """Oriented simplicial complex with per-cell affine charts.

    Arrays are frozen (read-only) after construction; treat instances as
    immutable values.
    """

    dim: int
    num_vertices: int
    # simplices[k]: (N_k, k+1) global vertex indices, canonical order
    simplices: tuple
    # boundaries[k-1]: signed incidence matrix of shape (N_{k-1}, N_k), int64
    boundaries: tuple
    # cell_charts: (N_n, n+1, chart_dim) vertex coordinates of each top cell
    cell_charts: np.ndarray
    # orientations: (N_n,) +-1, geometric orientation of the stored vertex order
    orientations: np.ndarray
    # subsimplex_index[k]: (N_n, C(n+1, k+1)) global index of each local
    # k-subsimplex, columns in lexicographic order of local vertex positions
    subsimplex_index: tuple
    # first_cell[k]: (N_k, 2) = (cell, local combo position) of one fixed
    # top cell containing each k-simplex (smallest cell, then smallest combo)
    first_cell: tuple
    # cell_labels: (N_n, n+1, label_width) integer labels of top-cell vertices
    # (covering-lattice coordinates when periodic, vertex ids otherwise)
    cell_labels: np.ndarray
    geometry: str
    betti: tuple
    # lattice points per period along each axis; None for non-periodic meshes
    period: Optional[int] = None
    level: int = 0
    meta: dict = field(default_factory=dict)

    # -- basic queries ------------------------------------------------------

    def num_simplices(self, k: int) -> int:
        return self.simplices[k].shape[0]

    def counts(self) -> tuple:
        return tuple(self.num_simplices(k) for k in range(self.dim + 1))

    def euler_characteristic(self) -> int:
        return int(sum((-1) ** k * self.num_simplices(k)
                       for k in range(self.dim + 1)))

    @property
    def chart_dim(self) -> int:
        return self.cell_charts.shape[2]

    def chart_jacobians(self) -> np.ndarray:
        """Affine chart Jacobians, shape (N_n, chart_dim, n)."""
        v = self.cell_charts
        return np.transpose(v[:, 1:, :] - v[:, :1, :], (0, 2, 1))

    def cell_volumes(self) -> np.ndarray:
        """Chart-coordinate volumes of the top cells (flat measure)."""
        jac = self.chart_jacobians()
        n = self.dim
        if jac.shape[1] == n:
            return np.abs(np.linalg.det(jac)) / _factorial(n)
        if n == 2 and jac.shape[1] == 3:
            cross = np.cross(jac[:, :, 0], jac[:, :, 1])
            return 0.5 * np.linalg.norm(cross, axis=1)
        raise MeshError(f"unsupported chart shape {jac.shape}")

    def cell_diameters(self) -> np.ndarray:
        """Longest edge of each top cell in chart coordinates."""
        v = self.cell_charts
        n1 = v.shape[1]
        d = np.zeros(v.shape[0])
        for a, b in itertools.combinations(range(n1), 2):
            d = np.maximum(d, np.linalg.norm(v[:, a] - v[:, b], axis=1))
        return d

    # -- validation ---------------------------------------------------------

    def check_chain_complex(self) -> None:
        """Verify that consecutive boundary operators compose to zero exactly."""
        for k in range(1, self.dim):
            prod = self.boundaries[k - 1] @ self.boundaries[k]
            prod.eliminate_zeros()
            if prod.nnz != 0:
                raise MeshError(
                    f"boundary_{k} o boundary_{k + 1} != 0 "
                    f"({prod.nnz} nonzero entries)")

    def check_closed(self) -> None:
        """Every (n-1)-simplex must bound exactly two consistently oriented cells."""
        bnd = self.boundaries[self.dim - 1]
        incid = np.asarray(np.abs(bnd).sum(axis=1)).ravel()
        if not np.all(incid == 2):
            bad = int(np.sum(incid != 2))
            raise MeshError(f"{bad} codim-1 simplices not shared by exactly 2 cells")
        signed = bnd @ self.orientations.astype(np.int64)
        if np.any(signed != 0):
            raise MeshError("induced orientations do not cancel on some facet")


@dataclass(frozen=True)
class ShapeRegularityReport:
    """Global shape-regularity summary of a complex."""

    num_cells: int
    h_max: float
    h_min: float
    volume_min: float
    volume_max: float
    volume_ratio: float          # max/min cell volume
    c_map: float                 # max_T |J_T| / h_T
    c_inverse: float             # max_T |J_T^+| * h_T


# ---------------------------------------------------------------------------
# canonical simplex labels
# ---------------------------------------------------------------------------

def _factorial(n: int) -> int:
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


def _canonical(rows, period):
    """Canonical form of a simplex given as a tuple of integer label rows.

    Rows are sorted lexicographically; for periodic meshes the whole simplex
    is then translated by a period multiple so the smallest row lies in the
    fundamental cell [0, period)^d.  Translation does not disturb the row
    order, which is what keeps boundary signs exact.
    """
    rows = sorted(rows)
    if period is not None:
        base = rows[0]
        shift = tuple(-period * (c // period) for c in base)
        if any(shift):
            rows = [tuple(c + s for c, s in zip(r, shift)) for r in rows]
    return tuple(rows)


def _vertex_id_torus(row, period):
    x, y, z = (c % period for c in row)
    return (x * period + y) * period + z


class _ComplexBuilder:
    """Assembles the full complex from canonical top-cell labels."""

    def __init__(self, dim, cells, period, geometry, betti, level, meta,
                 chart_of_label, num_vertices, vertex_id):
        self.dim = dim
        self.period = period
        self.geometry = geometry
        self.betti = betti
        self.level = level
        self.meta = meta
        self.chart_of_label = chart_of_label
        self.num_vertices = num_vertices
        self.vertex_id = vertex_id
        self.cells = [_canonical(c, period) for c in cells]

    def build(self) -> SimplicialComplex:
        dim, period = self.dim, self.period
        levels = [None] * (dim + 1)
        levels[dim] = sorted(set(self.cells))
        if len(levels[dim]) != len(self.cells):
            raise MeshError("duplicate top cells")
        for k in range(dim, 0, -1):
            faces = set()
            for simplex in levels[k]:
                for i in range(k + 1):
                    faces.add(_canonical(simplex[:i] + simplex[i + 1:], period))
            levels[k - 1] = sorted(faces)

        index = [{s: j for j, s in enumerate(lev)} for lev in levels]

        boundaries = []
        for k in range(1, dim + 1):
            rows, cols, vals = [], [], []
            for j, simplex in enumerate(levels[k]):
                for i in range(k + 1):
                    face = _canonical(simplex[:i] + simplex[i + 1:], period)
                    rows.append(index[k - 1][face])
                    cols.append(j)
                    vals.append((-1) ** i)
            mat = sp.coo_matrix(
                (np.asarray(vals, dtype=np.int64),
                 (np.asarray(rows), np.asarray(cols))),
                shape=(len(levels[k - 1]), len(levels[k]))).tocsr()
            boundaries.append(mat)

        # global vertex ids of every simplex
        simplices = []
        for k in range(dim + 1):
            arr = np.empty((len(levels[k]), k + 1), dtype=np.int64)
            for j, simplex in enumerate(levels[k]):
                arr[j] = [self.vertex_id(r) for r in simplex]
            simplices.append(arr)

        n_cells = len(levels[dim])
        combos = {k: list(itertools.combinations(range(dim + 1), k + 1))
                  for k in range(dim + 1)}
        sub_index = []
        first = [np.full((len(levels[k]), 2), -1, dtype=np.int64)
                 for k in range(dim + 1)]
        for k in range(dim + 1):
            table = np.empty((n_cells, len(combos[k])), dtype=np.int64)
            for t, cell in enumerate(levels[dim]):
                for c, positions in enumerate(combos[k]):
                    sub = _canonical(tuple(cell[p] for p in positions), period)
                    j = index[k][sub]
                    table[t, c] = j
                    if first[k][j, 0] < 0:
                        first[k][j] = (t, c)
            sub_index.append(table)

        charts = np.empty((n_cells, dim + 1, len(self.chart_of_label(levels[dim][0][0]))))
        for t, cell in enumerate(levels[dim]):
            for i, row in enumerate(cell):
                charts[t, i] = self.chart_of_label(row)

        orientations = _orientations(dim, charts)
        cell_labels = np.asarray(levels[dim], dtype=np.int64)

        for arr in (charts, orientations, cell_labels, *simplices, *sub_index, *first):
            arr.setflags(write=False)

        return SimplicialComplex(
            dim=dim,
            num_vertices=self.num_vertices,
            simplices=tuple(simplices),
            boundaries=tuple(boundaries),
            cell_charts=charts,
            orientations=orientations,
            subsimplex_index=tuple(sub_index),
            first_cell=tuple(first),
            cell_labels=cell_labels,
            geometry=self.geometry,
            betti=self.betti,
            period=period,
            level=self.level,
            meta=self.meta,
        )


def _orientations(dim, charts):
    jac = np.transpose(charts[:, 1:, :] - charts[:, :1, :], (0, 2, 1))
    if jac.shape[1] == dim:
        det = np.linalg.det(jac)
    elif dim == 2 and jac.shape[1] == 3:
        normal = np.cross(jac[:, :, 0], jac[:, :, 1])
        centroid = charts.mean(axis=1)
        det = np.einsum("ti,ti->t", normal, centroid)
    else:
        raise MeshError("cannot orient cells with this chart shape")
    if np.any(det == 0):
        raise DegenerateCellError("zero-volume cell encountered during orientation")
    return np.where(det > 0, 1, -1).astype(np.int64)


# ---------------------------------------------------------------------------
# torus
# ---------------------------------------------------------------------------

# Kuhn subdivision of the unit cube: six tetrahedra, one per permutation of
# the axes, all sharing the main diagonal.
_KUHN_PERMUTATIONS = list(itertools.permutations(range(3)))


def _kuhn_cells(sub: int):
    cells = []
    for i, j, k in itertools.product(range(sub), repeat=3):
        corner = (i, j, k)
        for perm in _KUHN_PERMUTATIONS:
            rows = [corner]
            cur = list(corner)
            for axis in perm:
                cur[axis] += 1
                rows.append(tuple(cur))
            cells.append(tuple(rows))
    return cells


@lru_cache(maxsize=8)
def build_torus3(subdivisions: int) -> SimplicialComplex:
    """Kuhn triangulation of the flat 3-torus R^3 / Z^3.

    The periodic unit cube is split into ``subdivisions``^3 subcubes of six
    tetrahedra each.  With full periodic identification the 1-subdivision
    mesh has (V, E, F, T) = (1, 7, 12, 6).
    """
    if subdivisions < 1:
        raise MeshError("subdivisions must be >= 1")
    s = int(subdivisions)
    builder = _ComplexBuilder(
        dim=3,
        cells=_kuhn_cells(s),
        period=s,
        geometry="torus3",
        betti=(1, 3, 3, 1),
        level=s,
        meta={"subdivisions": s},
        chart_of_label=lambda row: tuple(c / s for c in row),
        num_vertices=s ** 3,
        vertex_id=lambda row: _vertex_id_torus(row, s),
    )
    return builder.build()


# ---------------------------------------------------------------------------
# icosphere
# ---------------------------------------------------------------------------

_PHI = (1.0 + np.sqrt(5.0)) / 2.0

_ICO_VERTS = np.array([
    (-1, _PHI, 0), (1, _PHI, 0), (-1, -_PHI, 0), (1, -_PHI, 0),
    (0, -1, _PHI), (0, 1, _PHI), (0, -1, -_PHI), (0, 1, -_PHI),
    (_PHI, 0, -1), (_PHI, 0, 1), (-_PHI, 0, -1), (-_PHI, 0, 1),
], dtype=float)

_ICO_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def _normalize_rows(pts):
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


@lru_cache(maxsize=8)
def build_icosphere(level: int) -> SimplicialComplex:
    """Icosahedron subdivided ``level`` times, all vertices on the unit sphere.

    Each subdivision splits every triangle into four via edge midpoints
    projected back onto the sphere, so the face count is 20 * 4^level.
    """
    if level < 0:
        raise MeshError("level must be >= 0")
    coords = _normalize_rows(_ICO_VERTS.copy())
    faces = [tuple(f) for f in _ICO_FACES]
    for _ in range(level):
        coords, faces = _subdivide_triangles(coords, faces, project=True)
    return _triangle_complex(coords, faces, geometry="sphere2",
                             betti=(1, 0, 1), level=level,
                             meta={"icosphere_level": level})


def _subdivide_triangles(coords, faces, project):
    """Split every triangle in four; midpoint vertices are appended in the
    lexicographic order of the (sorted) parent edges, which keeps numbering
    deterministic."""
    edges = sorted({tuple(sorted(pair))
                    for f in faces
                    for pair in itertools.combinations(f, 2)})
    edge_id = {e: len(coords) + i for i, e in enumerate(edges)}
    mids = 0.5 * (coords[[e[0] for e in edges]] + coords[[e[1] for e in edges]])
    if project:
        mids = _normalize_rows(mids)
    new_coords = np.vstack([coords, mids])
    new_faces = []
    for a, b, c in faces:
        ab = edge_id[tuple(sorted((a, b)))]
        bc = edge_id[tuple(sorted((b, c)))]
        ca = edge_id[tuple(sorted((c, a)))]
        new_faces.extend([(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)])
    return new_coords, new_faces


def _triangle_complex(coords, faces, geometry, betti, level, meta):
    coords = np.asarray(coords, dtype=float)
    builder = _ComplexBuilder(
        dim=2,
        cells=[tuple((v,) for v in f) for f in faces],
        period=None,
        geometry=geometry,
        betti=betti,
        level=level,
        meta=meta,
        chart_of_label=lambda row: tuple(coords[row[0]]),
        num_vertices=coords.shape[0],
        vertex_id=lambda row: row[0],
    )
    return builder.build()


# ---------------------------------------------------------------------------
# uniform refinement
# ---------------------------------------------------------------------------

def refine_uniform(complex: SimplicialComplex) -> SimplicialComplex:
    """Uniform refinement: red split in 2d, the Bey split (red refinement with
    a fixed octahedron diagonal) in 3d.  Charts of the children are affine
    sub-simplices of the parent chart, so no new geometry is introduced."""
    if complex.dim == 2:
        return _refine_triangles(complex)
    if complex.dim == 3 and complex.period is not None:
        return _refine_periodic_tets(complex)
    raise MeshError("refinement implemented for surface and periodic volume meshes")


def _refine_triangles(cx: SimplicialComplex) -> SimplicialComplex:
    coords = np.empty((cx.num_vertices, cx.chart_dim))
    for t in range(cx.cell_labels.shape[0]):
        for i in range(3):
            coords[cx.cell_labels[t, i, 0]] = cx.cell_charts[t, i]
    faces = [tuple(int(v) for v in row[:, 0]) for row in cx.cell_labels]
    new_coords, new_faces = _subdivide_triangles(coords, faces, project=False)
    return _triangle_complex(new_coords, new_faces, geometry=cx.geometry,
                             betti=cx.betti, level=cx.level + 1,
                             meta=dict(cx.meta, refined=True))


# Bey's red refinement of the tetrahedron (v0..v3 in label order); the four
# interior children share the v0+v2 / v1+v3 diagonal of the octahedron.
_BEY_CHILDREN = [
    ((0, 0), (0, 1), (0, 2), (0, 3)),
    ((0, 1), (1, 1), (1, 2), (1, 3)),
    ((0, 2), (1, 2), (2, 2), (2, 3)),
    ((0, 3), (1, 3), (2, 3), (3, 3)),
    ((0, 1), (0, 2), (0, 3), (1, 3)),
    ((0, 1), (0, 2), (1, 2), (1, 3)),
    ((0, 2), (0, 3), (1, 3), (2, 3)),
    ((0, 2), (1, 2), (1, 3), (2, 3)),
]


def _refine_periodic_tets(cx: SimplicialComplex) -> SimplicialComplex:
    s2 = 2 * cx.period
    cells = []
    for rows in cx.cell_labels:
        v = rows.astype(np.int64)
        for child in _BEY_CHILDREN:
            cells.append(tuple(tuple(int(c) for c in (v[a] + v[b]))
                               for a, b in child))
    builder = _ComplexBuilder(
        dim=3,
        cells=cells,
        period=s2,
        geometry=cx.geometry,
        betti=cx.betti,
        level=s2,
        meta=dict(cx.meta, subdivisions=s2, refined=True),
        chart_of_label=lambda row: tuple(c / s2 for c in row),
        num_vertices=s2 ** 3,
        vertex_id=lambda row: _vertex_id_torus(row, s2),
    )
    return builder.build()


# ---------------------------------------------------------------------------
# small helpers and reports
# ---------------------------------------------------------------------------

def single_cell_complex(vertices) -> SimplicialComplex:
    """One n-simplex with the given vertex coordinates (testing helper).

    Not a closed manifold; skip check_closed on the result.
    """
    vertices = np.asarray(vertices, dtype=float)
    n = vertices.shape[0] - 1
    builder = _ComplexBuilder(
        dim=n,
        cells=[tuple((i,) for i in range(n + 1))],
        period=None,
        geometry="cell",
        betti=(1,) + (0,) * n,
        level=0,
        meta={},
        chart_of_label=lambda row: tuple(vertices[row[0]]),
        num_vertices=n + 1,
        vertex_id=lambda row: row[0],
    )
    return builder.build()


def build_level(geometry: str, level: int) -> SimplicialComplex:
    """Level-to-mesh map shared by every experiment and the CLI.

    Level l is 2^l subdivisions per period on the torus and l icosphere
    refinements on the sphere, so the mesh size roughly halves per level on
    both geometries.
    """
    if geometry == "torus3":
        return build_torus3(2 ** level)
    if geometry == "sphere2":
        return build_icosphere(level)
    raise ConfigError(
        f"unknown geometry '{geometry}'; catalog: {', '.join(GEOMETRY_NAMES)}")


def boundary_operator(complex: SimplicialComplex, k: int):
    """Signed incidence matrix from k-simplices to their (k-1)-faces."""
    if not 1 <= k <= complex.dim:
        raise MeshError(f"no boundary operator for k={k} on a {complex.dim}-complex")
    return complex.boundaries[k - 1]


def edge_displacements(complex: SimplicialComplex) -> np.ndarray:
    """Chart displacement of every edge, taken in its first cell's lift.

    On identified meshes the endpoints of an edge can wrap around the
    fundamental domain; the per-cell chart rows resolve the lift, so the
    displacement is single-valued.  Rows follow edge dof order.
    """
    import itertools as _it

    n = complex.dim
    first = complex.first_cell[1]
    combos = list(_it.combinations(range(n + 1), 2))
    out = np.empty((complex.num_simplices(1), complex.chart_dim))
    for c, (a, b) in enumerate(combos):
        sel = np.nonzero(first[:, 1] == c)[0]
        if sel.size == 0:
            continue
        cells = first[sel, 0]
        out[sel] = (complex.cell_charts[cells, b, :]
                    - complex.cell_charts[cells, a, :])
    return out


def shape_regularity(complex: SimplicialComplex) -> ShapeRegularityReport:
    """Diameters, volume spread and affine-map constants of the top cells."""
    jac = complex.chart_jacobians()
    sv = np.linalg.svd(jac, compute_uv=False)
    smax, smin = sv[:, 0], sv[:, -1]
    if np.any(smin <= 1e-12 * smax):
        raise DegenerateCellError("rank-deficient chart Jacobian")
    vols = complex.cell_volumes()
    if np.any(vols <= 0.0):
        raise DegenerateCellError("non-positive cell volume")
    h = complex.cell_diameters()
    return ShapeRegularityReport(
        num_cells=int(jac.shape[0]),
        h_max=float(h.max()),
        h_min=float(h.min()),
        volume_min=float(vols.min()),
        volume_max=float(vols.max()),
        volume_ratio=float(vols.max() / vols.min()),
        c_map=float((smax / h).max()),
        c_inverse=float((h / smin).max()),
    )


def dump_mesh(complex: SimplicialComplex, path) -> None:
    """Plain-text dump: one `k v0 ... vk` line per simplex, then per-cell
    chart coordinate rows."""
    lines = [
        f"# simplicial complex dim={complex.dim} vertices={complex.num_vertices} "
        f"geometry={complex.geometry}",
        "# simplices: k v0 ... vk (global vertex indices)",
    ]
    for k in range(complex.dim + 1):
        for row in complex.simplices[k]:
            lines.append(" ".join([str(k)] + [str(int(v)) for v in row]))
    lines.append("# charts: cell vertex x ... (one row per cell vertex)")
    for t in range(complex.cell_charts.shape[0]):
        for i in range(complex.dim + 1):
            coords = " ".join(format(x, ".17g") for x in complex.cell_charts[t, i])
            lines.append(f"{t} {i} {coords}")
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")
