"""Simplicial meshes (1D intervals, 2D triangulated rectangles), the radial
field m(x) = x - x0, and the split of the boundary into a clamped part
(m . nu <= 0) and a damped part (m . nu > 0).

Two geometric constants drive every later estimate:

* R:  largest |m(x)| over the mesh vertices (exact for polytopes, since the
  maximum of a convex function is attained at a vertex);
* m0: smallest m . nu over the quadrature points of damped facets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import segment_rule

#: Quadrature degree used on boundary facets (classification and later
#: boundary-matrix assembly must share it so that m0 really bounds the
#: damping coefficient at the points where it is sampled).
BOUNDARY_QUAD_DEGREE = 5

GAMMA0 = 0
GAMMA1 = 1


class MeshError(Exception):
    """Invalid mesh topology or geometry."""


class MixedFacetError(Exception):
    """m . nu changes sign across the quadrature points of one facet.

    Cannot happen on straight facets (m . nu is constant along them) but is
    checked so imported meshes with exotic normals fail loudly; the caller
    should refine the mesh.
    """


class EmptyGamma1Error(Exception):
    """No facet has m . nu > 0, so there is no damped boundary part."""


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh with an explicit boundary facet list.

    dim           1 or 2
    vertices      (nv, dim) coordinates
    elements      (ne, dim+1) vertex indices (positively oriented)
    facets        (nf, dim) vertex indices of boundary facets
    facet_normals (nf, dim) outward unit normals
    """

    dim: int
    vertices: np.ndarray
    elements: np.ndarray
    facets: np.ndarray
    facet_normals: np.ndarray

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise MeshError(f"unsupported dimension {self.dim}")
        object.__setattr__(self, "vertices", np.asarray(self.vertices, float).reshape(-1, self.dim))
        object.__setattr__(self, "elements", np.asarray(self.elements, int).reshape(-1, self.dim + 1))
        object.__setattr__(self, "facets", np.asarray(self.facets, int).reshape(-1, self.dim))
        object.__setattr__(self, "facet_normals", np.asarray(self.facet_normals, float).reshape(-1, self.dim))
        if len(self.facets) != len(self.facet_normals):
            raise MeshError("facet and normal counts differ")
        lengths = np.linalg.norm(self.facet_normals, axis=1)
        if np.any(np.abs(lengths - 1.0) > 1e-12):
            raise MeshError("facet normals must have unit length")
        if np.any(self.element_volumes() <= 0.0):
            raise MeshError("element volumes must be strictly positive")
        object.__setattr__(self, "_facet_owner", self._find_owners())
        for arr in (self.vertices, self.elements, self.facets, self.facet_normals):
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    def element_volumes(self) -> np.ndarray:
        coords = self.vertices[self.elements]
        if self.dim == 1:
            return coords[:, 1, 0] - coords[:, 0, 0]
        e1 = coords[:, 1] - coords[:, 0]
        e2 = coords[:, 2] - coords[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def facet_measures(self) -> np.ndarray:
        """Facet sizes: edge lengths in 2D, counting measure 1 for points."""
        if self.dim == 1:
            return np.ones(self.n_facets)
        coords = self.vertices[self.facets]
        return np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1)

    def facet_owner(self) -> np.ndarray:
        """Index of the unique element owning each boundary facet."""
        return self._facet_owner

    def facet_quadrature(self, degree: int = BOUNDARY_QUAD_DEGREE):
        """Quadrature on every facet.

        Returns (points, weights, shapes): points (nf, nq, dim), weights
        (nf, nq) absorbing the facet measure, shapes (nq, dim) P1 values of
        the facet's own vertices at the points.
        """
        if self.dim == 1:
            pts = self.vertices[self.facets[:, 0]][:, None, :]
            wts = np.ones((self.n_facets, 1))
            shp = np.ones((1, 1))
            return pts, wts, shp
        ref, w = segment_rule(degree)
        a = self.vertices[self.facets[:, 0]]
        b = self.vertices[self.facets[:, 1]]
        pts = a[:, None, :] + ref[None, :, None] * (b - a)[:, None, :]
        wts = w[None, :] * self.facet_measures()[:, None]
        shp = np.column_stack([1.0 - ref, ref])
        return pts, wts, shp

    def min_diameter(self) -> float:
        coords = self.vertices[self.elements]
        if self.dim == 1:
            return float(np.min(coords[:, 1, 0] - coords[:, 0, 0]))
        d01 = np.linalg.norm(coords[:, 0] - coords[:, 1], axis=1)
        d12 = np.linalg.norm(coords[:, 1] - coords[:, 2], axis=1)
        d20 = np.linalg.norm(coords[:, 2] - coords[:, 0], axis=1)
        return float(np.min(np.maximum(np.maximum(d01, d12), d20)))

    def _find_owners(self) -> np.ndarray:
        elem_sets = [frozenset(e) for e in self.elements]
        owners = np.empty(self.n_facets, dtype=int)
        for i, f in enumerate(self.facets):
            fs = set(f)
            hits = [k for k, es in enumerate(elem_sets) if fs <= es]
            if len(hits) != 1:
                raise MeshError(
                    f"boundary facet {f.tolist()} belongs to {len(hits)} elements, expected exactly 1"
                )
            owners[i] = hits[0]
        owners.setflags(write=False)
        return owners


def build_interval_mesh(a: float, b: float, elements: int) -> Mesh:
    """Uniform mesh of the interval (a, b) with endpoint facets."""
    if not a < b:
        raise ValueError(f"need a < b, got a={a}, b={b}")
    if elements < 1:
        raise ValueError("need at least one element")
    x = np.linspace(a, b, elements + 1)
    conn = np.column_stack([np.arange(elements), np.arange(1, elements + 1)])
    facets = np.array([[0], [elements]])
    normals = np.array([[-1.0], [1.0]])
    return Mesh(1, x[:, None], conn, facets, normals)


def build_rectangle_mesh(corner_lo, corner_hi, nx: int, ny: int) -> Mesh:
    """Structured triangulation of a rectangle; each cell split along the
    lo-to-hi diagonal so uniform refinement nests the coarse space."""
    lo = np.asarray(corner_lo, float)
    hi = np.asarray(corner_hi, float)
    if lo.shape != (2,) or hi.shape != (2,):
        raise ValueError("corners must be 2-vectors")
    if not np.all(lo < hi):
        raise ValueError("degenerate rectangle: need corner_lo < corner_hi componentwise")
    if nx < 1 or ny < 1:
        raise ValueError("need nx, ny >= 1")
    xs = np.linspace(lo[0], hi[0], nx + 1)
    ys = np.linspace(lo[1], hi[1], ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    elems = []
    for j in range(ny):
        for i in range(nx):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
            elems.append([v00, v10, v11])
            elems.append([v00, v11, v01])
    facets, normals = [], []
    for i in range(nx):
        facets.append([vid(i, 0), vid(i + 1, 0)])
        normals.append([0.0, -1.0])
        facets.append([vid(i, ny), vid(i + 1, ny)])
        normals.append([0.0, 1.0])
    for j in range(ny):
        facets.append([vid(0, j), vid(0, j + 1)])
        normals.append([-1.0, 0.0])
        facets.append([vid(nx, j), vid(nx, j + 1)])
        normals.append([1.0, 0.0])
    return Mesh(2, verts, np.array(elems), np.array(facets), np.array(normals))


@dataclass(frozen=True)
class BoundaryPartition:
    """Facet labels (GAMMA0 clamped / GAMMA1 damped) for a given star point,
    with the geometric constants R and m0."""

    mesh: Mesh
    x0: np.ndarray
    labels: np.ndarray
    R: float
    m0: float
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def gamma1_facets(self) -> np.ndarray:
        return np.flatnonzero(self.labels == GAMMA1)

    @property
    def gamma0_facets(self) -> np.ndarray:
        return np.flatnonzero(self.labels == GAMMA0)

    def dirichlet_vertices(self) -> np.ndarray:
        """Vertices lying on any clamped facet (sorted, unique)."""
        g0 = self.gamma0_facets
        if len(g0) == 0:
            return np.array([], dtype=int)
        return np.unique(self.mesh.facets[g0].ravel())


def radial_field(points: np.ndarray, x0: np.ndarray) -> np.ndarray:
    """m(x) = x - x0 evaluated at an array of points (..., dim)."""
    return points - np.asarray(x0, float)


def _label_from_samples(mdotnu: np.ndarray) -> int:
    if np.all(mdotnu > 0.0):
        return GAMMA1
    if np.all(mdotnu <= 0.0):
        return GAMMA0
    raise MixedFacetError(
        "m . nu changes sign across the quadrature points of a facet; refine the mesh"
    )


def classify_boundary(mesh: Mesh, x0) -> BoundaryPartition:
    """Split the boundary by the sign of m . nu at facet quadrature points.

    A facet is damped (GAMMA1) when m . nu > 0 at every quadrature point and
    clamped (GAMMA0) when m . nu <= 0 at every point.  Raises MixedFacetError
    for a sign change within one facet and EmptyGamma1Error when no facet is
    damped.
    """
    x0 = np.atleast_1d(np.asarray(x0, float))
    if x0.shape != (mesh.dim,):
        raise ValueError(f"x0 must have {mesh.dim} coordinates")
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    pts, _, _ = mesh.facet_quadrature(BOUNDARY_QUAD_DEGREE)
    mdotnu = np.einsum("fqd,fd->fq", radial_field(pts, x0), mesh.facet_normals)
    labels = np.array([_label_from_samples(row) for row in mdotnu], dtype=int)
    gamma1 = labels == GAMMA1
    if not np.any(gamma1):
        raise EmptyGamma1Error("no facet has m . nu > 0")
    R = float(np.max(np.linalg.norm(radial_field(mesh.vertices, x0), axis=1)))
    m0 = float(np.min(mdotnu[gamma1]))
    warnings = []
    if np.any(~gamma1):
        touching = np.intersect1d(
            mesh.facets[gamma1].ravel(), mesh.facets[~gamma1].ravel()
        )
        if len(touching):
            warnings.append(
                "closures of the clamped and damped boundary parts touch at "
                f"{len(touching)} vertex/vertices; facets are attributed wholly to one label"
            )
    return BoundaryPartition(mesh, x0, labels, R, m0, tuple(warnings))


def geometry_constants(partition: BoundaryPartition) -> dict[str, float]:
    """The constants R and m0 of a valid partition."""
    return {"R": partition.R, "m0": partition.m0}


# ---------------------------------------------------------------------------
# plain-text mesh interchange: vertex table, element table, facet table
# (one whitespace-separated record per line)
# ---------------------------------------------------------------------------

def save_mesh_text(mesh: Mesh, path, labels: np.ndarray | None = None) -> None:
    lab = np.full(mesh.n_facets, -1, dtype=int) if labels is None else np.asarray(labels, int)
    with open(path, "w") as fh:
        fh.write(f"dim {mesh.dim}\n")
        fh.write(f"vertices {mesh.n_vertices}\n")
        for v in mesh.vertices:
            fh.write(" ".join(f"{c:.17g}" for c in v) + "\n")
        fh.write(f"elements {mesh.n_elements}\n")
        for e in mesh.elements:
            fh.write(" ".join(str(i) for i in e) + "\n")
        fh.write(f"facets {mesh.n_facets}\n")
        for f, nrm, l in zip(mesh.facets, mesh.facet_normals, lab):
            cols = [str(i) for i in f] + [f"{c:.17g}" for c in nrm] + [str(l)]
            fh.write(" ".join(cols) + "\n")


def load_mesh_text(path) -> tuple[Mesh, np.ndarray]:
    """Read a mesh written by save_mesh_text; returns (mesh, facet labels)."""
    with open(path) as fh:
        tokens = fh.read().split()
    pos = 0

    def take(n):
        nonlocal pos
        out = tokens[pos:pos + n]
        if len(out) != n:
            raise MeshError("truncated mesh file")
        pos += n
        return out

    kw, dim = take(2)
    if kw != "dim":
        raise MeshError("mesh file must start with 'dim'")
    dim = int(dim)
    kw, nv = take(2)
    if kw != "vertices":
        raise MeshError("expected vertex table")
    verts = np.array([float(t) for t in take(int(nv) * dim)]).reshape(-1, dim)
    kw, ne = take(2)
    if kw != "elements":
        raise MeshError("expected element table")
    elems = np.array([int(t) for t in take(int(ne) * (dim + 1))]).reshape(-1, dim + 1)
    kw, nf = take(2)
    if kw != "facets":
        raise MeshError("expected facet table")
    rows = np.array(take(int(nf) * (2 * dim + 1))).reshape(-1, 2 * dim + 1)
    facets = rows[:, :dim].astype(int)
    normals = rows[:, dim:2 * dim].astype(float)
    labels = rows[:, -1].astype(int)
    return Mesh(dim, verts, elems, facets, normals), labels
