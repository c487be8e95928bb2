"""Structured tetrahedral meshes of axis-aligned boxes.

Every box cell is cut into the six Kuhn (Freudenthal) path simplices.  Path
simplices of a rectangular brick are nonobtuse, so the resulting meshes are
weakly acute, which the projection step of the tangent plane scheme relies on.
"""
from dataclasses import dataclass
from itertools import permutations

import numpy as np

# local vertex pairs of a tetrahedron, in the order used for tet_edges
LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
# face opposite local vertex i
LOCAL_FACES = ((1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2))


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class TetMesh:
    vertices: np.ndarray       # (nv, 3)
    tets: np.ndarray           # (nt, 4), positively oriented
    edges: np.ndarray          # (ne, 2), sorted pairs
    tet_edges: np.ndarray      # (nt, 6) edge indices in LOCAL_EDGES order
    tet_edge_signs: np.ndarray  # (nt, 6) +1 if local orientation agrees with global
    boundary_faces: np.ndarray  # (nf, 3)
    box: tuple = None

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_tets(self):
        return len(self.tets)

    @property
    def n_edges(self):
        return len(self.edges)

    def volumes(self):
        x = self.vertices[self.tets]
        d = x[:, 1:] - x[:, :1]
        return np.linalg.det(d) / 6.0

    def quality(self):
        """Return (h, max diam/|K|^(1/3), h/min |K|^(1/3))."""
        x = self.vertices[self.tets]
        diam = np.zeros(len(x))
        for a, b in LOCAL_EDGES:
            diam = np.maximum(diam, np.linalg.norm(x[:, a] - x[:, b], axis=1))
        size = np.cbrt(self.volumes())
        h = diam.max()
        return h, float(np.max(diam / size)), float(h / size.min())


def mesh_from_tets(vertices, tets, box=None):
    """Build connectivity for a given vertex/tet list.

    Tets with negative orientation are flipped; degenerate ones are rejected.
    """
    vertices = np.asarray(vertices, dtype=float)
    tets = np.array(tets, dtype=np.int64).reshape(-1, 4)
    x = vertices[tets]
    vol = np.linalg.det(x[:, 1:] - x[:, :1]) / 6.0
    scale = np.ptp(vertices, axis=0).max() ** 3 if len(vertices) else 1.0
    if np.any(np.abs(vol) <= 1e-14 * scale):
        raise ValueError("degenerate tetrahedron")
    neg = vol < 0
    tets[neg, 2], tets[neg, 3] = tets[neg, 3].copy(), tets[neg, 2].copy()

    pairs = np.stack([tets[:, list(p)] for p in LOCAL_EDGES], axis=1)  # (nt,6,2)
    signs = np.where(pairs[..., 0] < pairs[..., 1], 1, -1).astype(np.int8)
    sorted_pairs = np.sort(pairs, axis=2).reshape(-1, 2)
    edges, inv = np.unique(sorted_pairs, axis=0, return_inverse=True)
    tet_edges = inv.reshape(-1, 6)

    faces = np.sort(np.stack([tets[:, list(f)] for f in LOCAL_FACES], axis=1).reshape(-1, 3), axis=1)
    uf, counts = np.unique(faces, axis=0, return_counts=True)
    bfaces = uf[counts == 1]

    return TetMesh(_frozen(vertices), _frozen(tets), _frozen(edges), _frozen(tet_edges),
                   _frozen(signs), _frozen(bfaces), box)


def build_box_mesh(xs, ys, zs):
    """Kuhn mesh of the tensor grid spanned by three increasing coordinate arrays."""
    axes = [np.asarray(c, dtype=float) for c in (xs, ys, zs)]
    for c in axes:
        if c.ndim != 1 or len(c) < 2 or np.any(np.diff(c) <= 0):
            raise ValueError("axis coordinates must be strictly increasing with at least one cell")
    nx, ny, nz = (len(c) for c in axes)
    X, Y, Z = np.meshgrid(*axes, indexing="ij")
    # vertex index = i + nx*(j + ny*k)
    verts = np.stack([X.transpose(2, 1, 0).ravel(), Y.transpose(2, 1, 0).ravel(),
                      Z.transpose(2, 1, 0).ravel()], axis=1)

    i, j, k = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), np.arange(nz - 1), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    step = np.array([1, nx, nx * ny])
    origin = i + nx * (j + ny * k)
    tets = []
    for perm in permutations(range(3)):
        v0 = origin
        v1 = v0 + step[perm[0]]
        v2 = v1 + step[perm[1]]
        v3 = v2 + step[perm[2]]
        tets.append(np.stack([v0, v1, v2, v3], axis=1))
    tets = np.concatenate(tets)
    lo = tuple(float(c[0]) for c in axes)
    hi = tuple(float(c[-1]) for c in axes)
    return mesh_from_tets(verts, tets, box=(lo, hi))


def build_cube_mesh(lo, hi, n):
    """Uniform Kuhn mesh of the box [lo, hi] with n cells per axis."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if np.any(hi <= lo):
        raise ValueError("degenerate box: need hi > lo in every axis")
    return build_box_mesh(*(np.linspace(lo[d], hi[d], int(n) + 1) for d in range(3)))


def build_graded_cube_mesh(lo, hi, n, inner_lo, inner_hi, inner_cells=None):
    """Kuhn mesh with n cells per axis whose grid planes contain the inner box faces.

    Per axis, the cells are distributed between the three intervals
    [lo, inner_lo], [inner_lo, inner_hi], [inner_hi, hi] as evenly as
    their lengths allow, with at least one cell in each nonempty interval.
    `inner_cells` pins the count of the middle interval.
    """
    axes = []
    for d in range(3):
        pts = [lo[d], inner_lo[d], inner_hi[d], hi[d]]
        if not (pts[0] <= pts[1] < pts[2] <= pts[3]) or pts[0] >= pts[3]:
            raise ValueError("inner box must lie inside the outer box")
        lens = np.diff(pts)
        nonempty = lens > 0
        if n < nonempty.sum():
            raise ValueError("too few cells to resolve the inner box")
        cells = np.where(nonempty, 1, 0)
        free = nonempty.copy()
        if inner_cells is not None:
            cells[1] = int(inner_cells)
            free[1] = False
            if cells.sum() > n:
                raise ValueError("too few cells to resolve the inner box")
        for _ in range(int(n) - cells.sum()):
            # give the next cell to the interval with the coarsest spacing
            spacing = np.where(free, lens / np.maximum(cells, 1), -1)
            if spacing.max() < 0:
                raise ValueError("cannot place the remaining cells")
            cells[np.argmax(spacing)] += 1
        coords = [pts[0]]
        for a, b, c in zip(pts[:-1], pts[1:], cells):
            if c:
                coords.extend(np.linspace(a, b, c + 1)[1:])
        axes.append(np.array(coords))
    return build_box_mesh(*axes)


@dataclass(frozen=True, eq=False)
class SubMeshMap:
    inner_tets: np.ndarray
    inner_vertices: np.ndarray
    global_to_local: np.ndarray  # -1 for vertices outside
    mesh: TetMesh                # the inner tets as a mesh of their own, local numbering
    box: tuple


def extract_submesh(mesh, box, tol=1e-12):
    """Select the tets of `mesh` lying in the closed box (lo, hi)."""
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    if np.any(hi <= lo):
        raise ValueError("degenerate submesh box")
    v = mesh.vertices
    scale = max(1.0, float(np.abs(v).max()))
    eps = tol * scale
    for corner in (lo, hi):
        if not np.any(np.all(np.abs(v - corner) <= eps, axis=1)):
            raise ValueError("submesh box corner %s is not a mesh vertex" % corner)
    inside_v = np.all((v >= lo - eps) & (v <= hi + eps), axis=1)
    all_in = inside_v[mesh.tets].all(axis=1)
    centroid = v[mesh.tets].mean(axis=1)
    c_in = np.all((centroid > lo + eps) & (centroid < hi - eps), axis=1)
    straddle = c_in & ~all_in
    if np.any(straddle):
        raise ValueError("box not resolved by the mesh: %d tets straddle its boundary" % straddle.sum())
    inner = np.flatnonzero(all_in & c_in)
    if len(inner) == 0:
        raise ValueError("box contains no tetrahedra")
    verts = np.unique(mesh.tets[inner])
    g2l = -np.ones(mesh.n_vertices, dtype=np.int64)
    g2l[verts] = np.arange(len(verts))
    sub = mesh_from_tets(v[verts], g2l[mesh.tets[inner]], box=(tuple(lo), tuple(hi)))
    return SubMeshMap(_frozen(inner), _frozen(verts), _frozen(g2l), sub, (tuple(lo), tuple(hi)))


def barycentric_gradients(vertices, tets):
    """Gradients of the four barycentric coordinates on each tet, shape (nt, 4, 3)."""
    x = np.asarray(vertices)[np.asarray(tets)]
    J = (x[:, 1:] - x[:, :1])           # rows are edge vectors
    G = np.linalg.inv(J)                 # columns are grads of lambda_1..3
    g = np.empty((len(x), 4, 3))
    g[:, 1:] = np.transpose(G, (0, 2, 1))
    g[:, 0] = -g[:, 1:].sum(axis=1)
    return g


def dihedral_angles(vertices, tets):
    """All six dihedral angles per tet, shape (nt, 6), ordered as LOCAL_EDGES pairs of faces."""
    g = barycentric_gradients(vertices, tets)
    n = g / np.linalg.norm(g, axis=2, keepdims=True)  # inward unit normals of the faces
    ang = np.empty((len(g), 6))
    for e, (a, b) in enumerate(LOCAL_EDGES):
        c = -np.einsum("ij,ij->i", n[:, a], n[:, b])
        ang[:, e] = np.arccos(np.clip(c, -1.0, 1.0))
    return ang


@dataclass
class AcutenessReport:
    max_angle: np.ndarray  # per tet, radians
    weakly_acute: bool

    @property
    def worst(self):
        return float(self.max_angle.max())


def weak_acuteness_report(mesh, tol=1e-12):
    ang = dihedral_angles(mesh.vertices, mesh.tets).max(axis=1)
    return AcutenessReport(ang, bool(np.all(ang <= np.pi / 2 + tol)))


def mesh_summary(mesh):
    h, kappa_a, kappa_b = mesh.quality()
    rep = weak_acuteness_report(mesh)
    lines = [
        "vertices        %d" % mesh.n_vertices,
        "tetrahedra      %d" % mesh.n_tets,
        "edges           %d" % mesh.n_edges,
        "boundary faces  %d" % len(mesh.boundary_faces),
        "volume          %.12g" % mesh.volumes().sum(),
        "h               %.6g" % h,
        "kappa (diam/|K|^1/3 max)  %.6g" % kappa_a,
        "kappa (h/min |K|^1/3)     %.6g" % kappa_b,
        "max dihedral    %.6f deg" % np.degrees(rep.worst),
        "weakly acute    %s" % ("yes" if rep.weakly_acute else "no"),
    ]
    return "\n".join(lines)
