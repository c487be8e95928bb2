"""P1 vector and lowest-order edge element spaces on tetrahedral meshes.

Vector P1 dofs are interleaved: dof 3*a + i is component i at vertex a.
Edge dofs follow the mesh edge list; edge e points from edges[e, 0] to
edges[e, 1] (ascending vertex index).
"""
import numpy as np
import scipy.sparse as sp

from .mesh import LOCAL_EDGES, barycentric_gradients


def quadrature(degree):
    """Barycentric points (nq, 4) and weights (nq,) summing to one on a tet.

    degree 1: centroid; degree 2: the symmetric 4-point rule; anything higher
    uses a conical product Gauss rule that is exact well beyond `degree`.
    """
    if degree <= 1:
        return np.full((1, 4), 0.25), np.ones(1)
    if degree == 2:
        a, b = 0.5854101966249685, 0.1381966011250105
        lam = np.full((4, 4), b)
        np.fill_diagonal(lam, a)
        return lam, np.full(4, 0.25)
    n = degree // 2 + 2
    t, w = np.polynomial.legendre.leggauss(n)
    t, w = 0.5 * (t + 1), 0.5 * w
    U, V, Wc = np.meshgrid(t, t, t, indexing="ij")
    wu, wv, ww = np.meshgrid(w, w, w, indexing="ij")
    x = U
    y = (1 - U) * V
    z = (1 - U) * (1 - V) * Wc
    weight = wu * wv * ww * (1 - U) ** 2 * (1 - V) * 6.0
    lam = np.stack([1 - x - y - z, x, y, z], axis=-1).reshape(-1, 4)
    return lam, weight.ravel()


class BlockPattern:
    """Fixed sparsity pattern for repeated elementwise assembly.

    `dofs` is (nt, nloc) global dof indices per element.  Calling assemble
    with local matrices (nt, nloc, nloc) returns a CSR matrix whose entries
    are sums over elements, without re-sorting indices each time.
    """

    def __init__(self, dofs, ndof, ncols_dofs=None, ncol=None):
        rdofs = np.asarray(dofs)
        cdofs = rdofs if ncols_dofs is None else np.asarray(ncols_dofs)
        ncol = ndof if ncol is None else ncol
        rows = np.repeat(rdofs[:, :, None], cdofs.shape[1], axis=2).ravel()
        cols = np.repeat(cdofs[:, None, :], rdofs.shape[1], axis=1).ravel()
        key = rows * ncol + cols
        ukey, self.perm = np.unique(key, return_inverse=True)
        self.shape = (ndof, ncol)
        r = ukey // ncol
        self.indices = (ukey % ncol).astype(np.int32)
        self.indptr = np.searchsorted(r, np.arange(ndof + 1)).astype(np.int32)
        self.nnz = len(ukey)

    def assemble(self, local):
        data = np.bincount(self.perm, weights=np.asarray(local).ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)


def _vector_dofs(tets):
    return (3 * tets[:, :, None] + np.arange(3)).reshape(len(tets), 12)


class P1Space:
    """Continuous piecewise linear 3-vector fields on a mesh."""

    def __init__(self, mesh, quad_degree=2):
        self.mesh = mesh
        self.tets = mesh.tets
        self.n = mesh.n_vertices
        self.ndof = 3 * self.n
        self.vol = mesh.volumes()
        self.grads = barycentric_gradients(mesh.vertices, mesh.tets)
        self.qlam, self.qw = quadrature(quad_degree)
        self.qweights = self.vol[:, None] * self.qw[None, :]  # (nt, nq)
        self._scalar_pattern = BlockPattern(self.tets, self.n)
        self._vector_pattern = BlockPattern(_vector_dofs(self.tets), self.ndof)
        self._mass = None
        self._stiff = None

    @property
    def nq(self):
        return len(self.qw)

    # field evaluation -------------------------------------------------
    def at_quad(self, values):
        """Nodal (n, 3) or scalar (n,) values evaluated at quadrature points."""
        return np.einsum("qa,ta...->tq...", self.qlam, np.asarray(values)[self.tets])

    def gradient(self, values):
        """Elementwise gradient of a nodal (n, 3) field: (nt, 3 components, 3 directions)."""
        return np.einsum("tad,tac->tcd", self.grads, np.asarray(values)[self.tets])

    def load(self, quad_values):
        """Vector of integrals of F . phi over all basis functions, F given at quad points."""
        F = np.asarray(quad_values)
        if F.ndim == 1 and F.shape == (3,):
            F = np.broadcast_to(F, (len(self.tets), self.nq, 3))
        loc = np.einsum("tq,qa,tqc->tac", self.qweights, self.qlam, F)
        out = np.zeros((self.n, 3))
        np.add.at(out, self.tets, loc)
        return out.ravel()

    def scalar_mass_local(self):
        base = (np.ones((4, 4)) + np.eye(4)) / 20.0
        return self.vol[:, None, None] * base[None]

    # assemblies -------------------------------------------------------
    def scalar_mass(self):
        return self._scalar_pattern.assemble(self.scalar_mass_local())

    def scalar_stiffness(self):
        loc = self.vol[:, None, None] * np.einsum("tad,tbd->tab", self.grads, self.grads)
        return self._scalar_pattern.assemble(loc)

    def _vectorize(self, scalar_local):
        eye = np.eye(3)
        loc = scalar_local[:, :, None, :, None] * eye[None, None, :, None, :]
        return self._vector_pattern.assemble(loc.reshape(len(self.tets), 12, 12))

    @property
    def mass(self):
        if self._mass is None:
            self._mass = self._vectorize(self.scalar_mass_local())
        return self._mass

    @property
    def stiffness(self):
        if self._stiff is None:
            loc = self.vol[:, None, None] * np.einsum("tad,tbd->tab", self.grads, self.grads)
            self._stiff = self._vectorize(loc)
        return self._stiff

    def weighted_mass(self, weight):
        """Quadrature approximation of the integral of w phi_a . phi_b, w at quad points."""
        w = np.broadcast_to(np.asarray(weight, dtype=float), (len(self.tets), self.nq))
        if not np.all(np.isfinite(w)):
            raise ValueError("non-finite weight value")
        loc = np.einsum("tq,qa,qb->tab", self.qweights * w, self.qlam, self.qlam)
        return self._vectorize(loc)

    def cross_term(self, m):
        """Matrix of (v, phi) -> integral of (m x v) . phi for nodal m."""
        mq = self.at_quad(m)  # (nt, nq, 3)
        X = np.zeros(mq.shape[:2] + (3, 3))
        X[..., 0, 1], X[..., 0, 2] = -mq[..., 2], mq[..., 1]
        X[..., 1, 0], X[..., 1, 2] = mq[..., 2], -mq[..., 0]
        X[..., 2, 0], X[..., 2, 1] = -mq[..., 1], mq[..., 0]
        loc = np.einsum("tq,qa,qb,tqij->taibj", self.qweights, self.qlam, self.qlam, X)
        return self._vector_pattern.assemble(loc.reshape(len(self.tets), 12, 12))

    # norms ------------------------------------------------------------
    def l2_norm(self, values):
        x = np.asarray(values).ravel()
        return float(np.sqrt(max(x @ (self.mass @ x), 0.0)))

    def h1_norm(self, values):
        x = np.asarray(values).ravel()
        return float(np.sqrt(max(x @ (self.mass @ x) + x @ (self.stiffness @ x), 0.0)))


def assemble_mass_p1(space):
    return space.mass


def assemble_stiffness_p1(space):
    return space.stiffness


def assemble_weighted_mass(space, weight):
    return space.weighted_mass(weight)


def assemble_cross_term(space, m):
    return space.cross_term(m)


class EdgeSpace:
    """Lowest-order Nedelec (first kind) edge elements on a mesh."""

    def __init__(self, mesh, quad_degree=2):
        self.mesh = mesh
        self.n = mesh.n_edges
        self.vol = mesh.volumes()
        self.grads = barycentric_gradients(mesh.vertices, mesh.tets)
        self.signs = mesh.tet_edge_signs.astype(float)
        self.tet_edges = mesh.tet_edges
        self.qlam, self.qw = quadrature(quad_degree)
        self._pattern = BlockPattern(self.tet_edges, self.n)
        a = np.array([p[0] for p in LOCAL_EDGES])
        b = np.array([p[1] for p in LOCAL_EDGES])
        self._a, self._b = a, b
        ga, gb = self.grads[:, a], self.grads[:, b]  # (nt, 6, 3)
        self.local_curls = 2.0 * self.signs[..., None] * np.cross(ga, gb)
        self._mass = None

    def _basis_at(self, lam):
        """Local basis values at barycentric points lam (nq, 4): (nt, nq, 6, 3)."""
        la, lb = lam[:, self._a], lam[:, self._b]  # (nq, 6)
        ga, gb = self.grads[:, self._a], self.grads[:, self._b]
        w = la[None, :, :, None] * gb[:, None] - lb[None, :, :, None] * ga[:, None]
        return w * self.signs[:, None, :, None]

    def mass_local(self):
        g = self.grads
        G = np.einsum("tad,tbd->tab", g, g)
        Mab = (np.ones((4, 4)) + np.eye(4)) / 20.0
        a, b = self._a, self._b
        # integral of (la gb - lb ga).(lc gd - ld gc)
        loc = (Mab[a][:, a][None] * G[:, b][:, :, b]
               - Mab[a][:, b][None] * G[:, b][:, :, a]
               - Mab[b][:, a][None] * G[:, a][:, :, b]
               + Mab[b][:, b][None] * G[:, a][:, :, a])
        s = self.signs
        return self.vol[:, None, None] * loc * s[:, :, None] * s[:, None, :]

    @property
    def mass(self):
        if self._mass is None:
            self._mass = self._pattern.assemble(self.mass_local())
        return self._mass

    def curlcurl(self, sigma_inv=1.0):
        s = np.broadcast_to(np.asarray(sigma_inv, dtype=float), (len(self.vol),))
        if np.any(~np.isfinite(s)) or np.any(s <= 0):
            raise ValueError("sigma must be positive")
        c = self.local_curls
        loc = (self.vol * s)[:, None, None] * np.einsum("tid,tjd->tij", c, c)
        return self._pattern.assemble(loc)

    def curl(self, coeffs):
        """Elementwise constant curl, (nt, 3)."""
        return np.einsum("tid,ti->td", self.local_curls, np.asarray(coeffs)[self.tet_edges])

    def at_quad(self, coeffs, tets=None, lam=None):
        lam = self.qlam if lam is None else lam
        W = self._basis_at(lam)
        c = np.asarray(coeffs)[self.tet_edges]
        vals = np.einsum("tqid,ti->tqd", W, c)
        return vals if tets is None else vals[tets]

    def cell_average(self, coeffs):
        return self.at_quad(coeffs, lam=np.full((1, 4), 0.25))[:, 0, :]

    def l2_norm(self, coeffs):
        x = np.asarray(coeffs)
        return float(np.sqrt(max(x @ (self.mass @ x), 0.0)))

    def hcurl_gram(self):
        return self.mass + self.curlcurl(1.0)


def assemble_edge_mass(space):
    return space.mass


def assemble_curlcurl(space, sigma_inv):
    return space.curlcurl(sigma_inv)


def coupling_matrix(edge_space, p1_space, inner_tets):
    """Matrix P (n_edges, 3 n_inner) with P[e, 3c+i] = integral over omega of w_e . (lambda_c e_i).

    `p1_space` lives on the submesh whose tets are `inner_tets` of the edge
    space's mesh, in the same order.
    """
    inner_tets = np.asarray(inner_tets)
    W = edge_space._basis_at(p1_space.qlam)[inner_tets]  # (nti, nq, 6, 3)
    loc = np.einsum("tq,qc,tqed->tedc", p1_space.qweights, p1_space.qlam, W)
    loc = loc.reshape(len(inner_tets), 6, 12)
    rows = edge_space.tet_edges[inner_tets]
    cols = _vector_dofs(p1_space.tets)
    pat = BlockPattern(rows, edge_space.n, cols, p1_space.ndof)
    return pat.assemble(loc)


def nodal_interpolate(fn, space):
    """Nodal interpolant; `fn` maps an (n, 3) array of points to (n, 3) values."""
    vals = np.asarray(fn(space.mesh.vertices), dtype=float)
    vals = np.broadcast_to(vals, (space.n, 3)).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite value in nodal interpolation")
    return vals


def edge_interpolate(fn, space):
    """Edge dofs as line integrals of fn . t, by two-point Gauss along each edge."""
    v = space.mesh.vertices
    p, q = v[space.mesh.edges[:, 0]], v[space.mesh.edges[:, 1]]
    d = q - p
    out = np.zeros(space.n)
    for s in (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)):
        f = np.broadcast_to(np.asarray(fn(p + s * d), dtype=float), d.shape)
        out += 0.5 * np.einsum("ed,ed->e", f, d)
    return out
