"""Low-dimensional convex hulls, images of polytopes under linear maps,
Caratheodory decompositions and preimages."""
from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy.spatial import ConvexHull, Delaunay

from ..config import TOL_FEAS
from ..errors import NotAMember, NotInImage, NumericalFailure
from .lp import solve_lp
from .polytope import Polytope
from .projection import project_halfspaces

MAX_FACES = 20000


@dataclass(frozen=True)
class ConvexCombination:
    points: np.ndarray
    weights: np.ndarray
    preimages: np.ndarray | None = None

    def __post_init__(self):
        if np.any(self.weights < -1e-12) or abs(self.weights.sum() - 1.0) > 1e-10:
            raise ValueError("weights must form a probability vector")

    def __len__(self):
        return len(self.weights)

    def reconstruct(self):
        return self.weights @ self.points


def affine_frame(points, tol=1e-9):
    """Centroid and orthonormal basis of the affine hull of ``points``."""
    points = np.asarray(points, dtype=float)
    center = points.mean(axis=0)
    if len(points) == 1:
        return center, np.zeros((points.shape[1], 0))
    _, s, vt = np.linalg.svd(points - center, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return center, vt[:rank].T


class ImageHull:
    """Convex hull of finitely many points in ``R^D``, possibly lower
    dimensional, together with optional preimages of the points.

    Everything is computed in coordinates of the affine hull, which is what
    makes barrier methods and triangulations work on flat hulls.
    """

    def __init__(self, points, preimages=None, frame=None, tol=1e-9):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        self.ambient_dim = points.shape[1]
        self.center, self.basis = frame if frame is not None else affine_frame(points, tol)
        self.dim = self.basis.shape[1]
        Y = (points - self.center) @ self.basis
        if self.dim >= 2:
            try:
                hull = ConvexHull(Y)
            except Exception as exc:  # qhull precision errors
                raise NumericalFailure(f"qhull failed: {exc}") from exc
            vidx = np.sort(hull.vertices)
            remap = -np.ones(len(points), dtype=int)
            remap[vidx] = np.arange(len(vidx))
            self.simplices = remap[hull.simplices]
            eq = hull.equations
            normals, offsets = eq[:, :-1], -eq[:, -1]
        elif self.dim == 1:
            lo, hi = int(np.argmin(Y[:, 0])), int(np.argmax(Y[:, 0]))
            vidx = np.array([lo, hi]) if lo != hi else np.array([lo])
            self.simplices = np.array([[0], [len(vidx) - 1]])
            normals = np.array([[-1.0], [1.0]])
            offsets = np.array([-Y[lo, 0], Y[hi, 0]])
        else:
            vidx = np.array([0])
            self.simplices = np.zeros((0, 1), dtype=int)
            normals, offsets = np.zeros((0, 0)), np.zeros(0)
        self.vertices = points[vidx]
        self.reduced_vertices = Y[vidx]
        self.vertex_preimages = None if preimages is None else np.asarray(preimages, float)[vidx]
        self.normals, self.offsets = _unique_facets(normals, offsets)
        self._faces = None
        self._delaunay = None

    # -- coordinates -----------------------------------------------------
    def reduce(self, z):
        return (np.asarray(z, dtype=float) - self.center) @ self.basis

    def lift(self, y):
        return self.center + np.asarray(y, dtype=float) @ self.basis.T

    def off_hull_distance(self, z):
        z = np.asarray(z, dtype=float)
        return np.linalg.norm(z - self.lift(self.reduce(z)), axis=-1)

    @property
    def n_facets(self):
        return len(self.offsets)

    def as_polytope(self):
        """H-representation in ambient coordinates."""
        D = self.ambient_dim
        A_ub = self.normals @ self.basis.T if self.dim else np.zeros((0, D))
        b_ub = self.offsets + A_ub @ self.center
        comp = _complement(self.basis, D)
        return Polytope.from_constraints(D, A_ub, b_ub, comp.T, comp.T @ self.center)

    def violation(self, z):
        """Max violation of ``z`` (or rows of ``z``) against the hull."""
        z = np.asarray(z, dtype=float)
        off = self.off_hull_distance(z)
        if self.dim == 0:
            return off
        y = self.reduce(z)
        return np.maximum(off, np.max(y @ self.normals.T - self.offsets, axis=-1))

    def contains(self, z, tol=TOL_FEAS):
        return bool(self.violation(z) <= tol)

    # -- projection ------------------------------------------------------
    def _face_tables(self):
        """Faces of the hull grouped by dimension, each as a base point and
        an orthonormal basis of its direction space."""
        if self._faces is None:
            scale = 1.0 + np.abs(self.offsets).max(initial=0.0)
            slack = self.offsets[:, None] - self.normals @ self.reduced_vertices.T
            incidence = np.abs(slack) <= 1e-9 * scale
            facets = {frozenset(np.flatnonzero(row)) for row in incidence}
            faces = set(facets)
            frontier = facets
            while frontier and len(faces) <= MAX_FACES:
                nxt = set()
                for f in frontier:
                    for g in facets:
                        h = f & g
                        if h and h != f and h not in faces:
                            nxt.add(h)
                faces |= nxt
                frontier = nxt
            faces |= {frozenset([i]) for i in range(len(self.vertices))}
            if len(faces) > MAX_FACES:
                self._faces = []
                return self._faces
            facet_sets = [frozenset(np.flatnonzero(row)) for row in incidence]
            groups = {}
            for f in faces:
                V = self.reduced_vertices[sorted(f)]
                within = [i for i, g in enumerate(facet_sets) if f <= g]
                if len(V) == 1:
                    groups.setdefault(0, []).append((V[0], np.zeros((self.dim, 0)), within))
                    continue
                _, sv, vt = np.linalg.svd(V - V[0], full_matrices=False)
                rank = int(np.sum(sv > 1e-9 * max(1.0, sv[0])))
                if rank >= self.dim:
                    continue
                groups.setdefault(rank, []).append((V[0], vt[:rank].T, within))
            tables = []
            for _, g in sorted(groups.items()):
                contained = np.zeros((len(g), self.n_facets), dtype=bool)
                for j, (_, _, within) in enumerate(g):
                    contained[j, within] = True
                tables.append((np.array([b for b, _, _ in g]), np.array([u for _, u, _ in g]),
                               contained))
            self._faces = tables
        return self._faces

    def project(self, z):
        """Exact Euclidean projection of one point or a batch (rows)."""
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        Z = np.atleast_2d(z)
        if self.dim == 0:
            out = np.repeat(self.vertices[:1], len(Z), axis=0)
            return out[0] if single else out
        Y = self.reduce(Z)
        viol = Y @ self.normals.T - self.offsets
        best = Y.copy()
        todo = np.flatnonzero(viol.max(axis=1) > 1e-12)
        if todo.size:
            best[todo], done = self._project_single_facet(Y[todo], viol[todo])
            todo = todo[~done]
        if todo.size:
            tables = self._face_tables()
            if tables:
                best[todo] = self._project_faces(Y[todo], viol[todo], tables)
            else:
                for i in todo:
                    best[i], _, _ = project_halfspaces(Y[i], self.normals, self.offsets)
        out = self.lift(best)
        return out[0] if single else out

    def _feasible(self, Y, tol=1e-10):
        scale = 1.0 + np.abs(self.offsets).max()
        return np.all(Y @ self.normals.T - self.offsets <= tol * scale, axis=-1)

    def _project_single_facet(self, Y, viol):
        # If the projection onto a violated facet hyperplane is feasible it
        # is the projection onto the hull.
        best = Y.copy()
        done = np.zeros(len(Y), dtype=bool)
        b, i = np.nonzero(viol > 1e-12)
        A = self.normals[i]
        cand = Y[b] - (viol[b, i] / np.einsum("ij,ij->i", A, A))[:, None] * A
        ok = self._feasible(cand)
        b, cand = b[ok], cand[ok]
        best[b] = cand
        done[b] = True
        return best, done

    def _face_maps(self, tables):
        # every face as an affine map y -> c + P y onto its affine hull
        if getattr(self, "_maps", None) is None:
            Ps, cs, cont = [], [], []
            for base, U, contained in tables:
                P = np.einsum("fik,fjk->fij", U, U)
                Ps.append(P)
                cs.append(base - np.einsum("fij,fj->fi", P, base))
                cont.append(contained)
            self._maps = (np.concatenate(Ps), np.concatenate(cs),
                          np.concatenate(cont).astype(float))
        return self._maps

    def _project_faces(self, Y, viol, tables):
        # The projection is the projection onto the affine hull of the face
        # whose relative interior contains it, and that face lies in a
        # violated facet; the nearest feasible such candidate is exact.
        # Candidates are checked for feasibility in order of distance.
        P, c, contained = self._face_maps(tables)
        F, dim = c.shape
        # (F, dim, B) layout keeps the products plain matrix multiplies
        cand_t = (P.reshape(F * dim, dim) @ Y.T).reshape(F, dim, -1) + c[:, :, None]
        d = np.square(cand_t - Y.T[None]).sum(axis=1).T          # (B, F)
        d[(viol > 1e-12).astype(float) @ contained.T == 0] = np.inf
        cand = cand_t.transpose(2, 0, 1)                          # (B, F, dim) view
        order = np.argsort(d, axis=1)
        best = np.zeros_like(Y)
        found = np.zeros(len(Y), dtype=bool)
        lo, width = 0, 1
        while lo < d.shape[1] and not found.all():
            rows = np.flatnonzero(~found)
            idx = order[rows, lo: lo + width]
            C = cand[rows[:, None], idx]
            ok = self._feasible(C) & np.isfinite(d[rows[:, None], idx])
            hit = ok.any(axis=1)
            first = ok.argmax(axis=1)
            best[rows[hit]] = C[hit, first[hit]]
            found[rows[hit]] = True
            lo, width = lo + width, width * 4
        if not found.all():
            raise NumericalFailure("face scan found no feasible projection candidate")
        return best

    # -- decomposition ----------------------------------------------------
    def decompose_batch(self, Z, tol=TOL_FEAS):
        """Vertex indices and barycentric weights, ``(B, dim + 1)`` each, of
        a batch of points of the hull.  Unused slots carry weight 0."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        viol = self.violation(Z)
        if np.any(viol > tol):
            raise NotAMember(f"point lies {float(viol.max()):.2e} outside the hull")
        B = len(Z)
        if self.dim == 0:
            return np.zeros((B, 1), dtype=int), np.ones((B, 1))
        Y = self.reduce(Z)
        if self.dim == 1:
            lo, hi = self.reduced_vertices[0, 0], self.reduced_vertices[-1, 0]
            lam = np.clip((Y[:, 0] - lo) / (hi - lo), 0.0, 1.0)
            idx = np.tile([0, len(self.vertices) - 1], (B, 1))
            return idx, np.column_stack([1 - lam, lam])
        if self._delaunay is None:
            self._delaunay = Delaunay(self.reduced_vertices)
        tri = self._delaunay
        s = tri.find_simplex(Y, tol=1e-9)
        lost = s < 0
        if np.any(lost):
            # boundary points pushed out by rounding
            Y[lost] = self.reduce(self.project(Z[lost]))
            s[lost] = tri.find_simplex(Y[lost], tol=1e-9)
            if np.any(s < 0):
                raise NumericalFailure("point location failed inside the hull")
        T = tri.transform[s]
        b = np.einsum("bij,bj->bi", T[:, : self.dim], Y - T[:, self.dim])
        w = np.clip(np.column_stack([b, 1.0 - b.sum(axis=1)]), 0.0, None)
        w /= w.sum(axis=1, keepdims=True)
        return tri.simplices[s], w

    def decompose(self, z, tol=TOL_FEAS):
        """Caratheodory decomposition of ``z`` into at most ``dim + 1``
        hull vertices."""
        idx, w = self.decompose_batch(np.asarray(z, dtype=float)[None, :], tol)
        keep = w[0] > 0
        idx, w = idx[0][keep], w[0][keep]
        pre = None if self.vertex_preimages is None else self.vertex_preimages[idx]
        return ConvexCombination(self.vertices[idx], w / w.sum(), pre)

    def preimage(self, z):
        """A point of the source domain mapping onto ``z``, as the convex
        combination of the vertex preimages."""
        if self.vertex_preimages is None:
            raise NotInImage("hull was built without preimages")
        comb = self.decompose(z)
        return comb.weights @ comb.preimages

    def preimage_batch(self, Z):
        """Row-wise :meth:`preimage` of a batch of points."""
        if self.vertex_preimages is None:
            raise NotInImage("hull was built without preimages")
        idx, w = self.decompose_batch(Z)
        return np.einsum("bk,bkn->bn", w, self.vertex_preimages[idx])

    def support_min(self, direction):
        """``(value, vertex index)`` minimising ``direction . z`` over the hull."""
        vals = self.vertices @ np.asarray(direction, dtype=float)
        i = int(np.argmin(vals))
        return float(vals[i]), i


def _complement(basis, D):
    if basis.shape[1] == 0:
        return np.eye(D)
    q, _ = np.linalg.qr(basis, mode="complete")
    return q[:, basis.shape[1]:]


def _unique_facets(normals, offsets):
    if len(offsets) == 0:
        return normals, offsets
    key = np.round(np.hstack([normals, offsets[:, None]]), 9)
    _, first = np.unique(key, axis=0, return_index=True)
    first = np.sort(first)
    return normals[first], offsets[first]


def image_hull(M, polytope, tol=1e-9, max_lps=20000):
    """Vertices (with preimages) of ``M X`` for the polytope ``X``.

    Builds the hull from support-function queries: each query is an LP
    ``max w.(Mx)`` over ``X``.  The affine hull is found first, then facets
    of the current hull are tested until none can be pushed further out.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    D = M.shape[0]
    pts, pre = [], []
    n_lp = 0

    def support(w):
        nonlocal n_lp
        n_lp += 1
        if n_lp > max_lps:
            raise NumericalFailure("image hull construction exceeded its LP budget")
        sol = solve_lp(M.T @ w, polytope, "Max")
        if sol.status != "Optimal":
            raise NumericalFailure(f"support LP returned {sol.status}")
        return M @ sol.point, sol.point

    def add(v, x):
        if pts and np.min(np.linalg.norm(np.asarray(pts) - v, axis=1)) <= 1e-11:
            return False
        pts.append(v)
        pre.append(x)
        return True

    for i in range(D):
        for sgn in (1.0, -1.0):
            add(*support(sgn * np.eye(D)[i]))
    scale = max(1.0, float(np.max(np.abs(pts))))
    while True:
        center, basis = affine_frame(np.asarray(pts), tol)
        grew = False
        for c in _complement(basis, D).T:
            for sgn in (1.0, -1.0):
                v, x = support(sgn * c)
                if abs(c @ (v - center)) > tol * scale:
                    add(v, x)
                    grew = True
        if not grew:
            break
    frame = affine_frame(np.asarray(pts), tol)
    verified = set()
    while True:
        hull = ImageHull(np.asarray(pts), np.asarray(pre), frame=frame)
        grew = False
        for a, off in zip(hull.normals, hull.offsets):
            key = tuple(np.round(np.append(a, off), 7))
            if key in verified:
                continue
            v, x = support(hull.basis @ a)
            if a @ hull.reduce(v) - off > tol * scale:
                grew |= add(v, x)
            else:
                verified.add(key)
        if not grew:
            return hull


def caratheodory_decompose(z, image):
    """Write ``z`` as a convex combination of points of ``image``.

    ``image`` may be a :class:`Polytope` (a convex image set: the answer is
    the single atom ``z``), an :class:`ImageHull`, or an array of points
    whose hull is meant.  At most ``dim + 1`` atoms are returned.
    """
    z = np.asarray(z, dtype=float)
    if isinstance(image, Polytope):
        if not image.contains(z):
            raise NotAMember(f"point violates the polytope by {image.violation(z):.2e}")
        return ConvexCombination(z[None, :], np.ones(1))
    if not isinstance(image, ImageHull):
        image = ImageHull(image)
    return image.decompose(z)


def linear_preimage(M, z, domain, hull=None, tol=1e-7):
    """Some ``x`` in ``domain`` with ``M x = z``.

    With a prebuilt ``hull`` of ``M domain`` carrying vertex preimages the
    answer is a convex combination of those; otherwise an LP minimising
    ``||Mx - z||_1`` over the domain is solved.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    z = np.asarray(z, dtype=float)
    if hull is not None and hull.vertex_preimages is not None:
        try:
            x = hull.preimage(z)
        except NotAMember as exc:
            raise NotInImage(str(exc)) from exc
    else:
        D, n = M.shape
        # variables (x, s_plus, s_minus)
        A_eq = np.hstack([M, np.eye(D), -np.eye(D)])
        ext = Polytope.from_constraints(
            n + 2 * D,
            A_ub=np.hstack([domain.A_ub, np.zeros((domain.n_ineq, 2 * D))]),
            b_ub=domain.b_ub,
            A_eq=np.vstack([np.hstack([domain.A_eq, np.zeros((domain.n_eq, 2 * D))]), A_eq]),
            b_eq=np.concatenate([domain.b_eq, z]),
            lower=np.concatenate([domain.lower, np.zeros(2 * D)]),
            upper=np.concatenate([domain.upper, np.full(2 * D, np.inf)]),
        )
        sol = solve_lp(np.concatenate([np.zeros(n), np.ones(2 * D)]), ext, "Min")
        if sol.status != "Optimal":
            raise NotInImage(f"preimage LP returned {sol.status}")
        x = sol.point[:n]
    resid = float(np.max(np.abs(M @ x - z)))
    if resid > tol:
        raise NotInImage(f"no preimage within tolerance (residual {resid:.2e})")
    return x
