"""Conforming triangulations with face topology and newest-vertex bisection.

Element vertex order encodes the bisection state: ``elements[k] = [n1, n2, n3]``
is counter-clockwise, ``n1-n2`` is the refinement edge and ``n3`` the newest
vertex. Local face ``i`` of an element is the edge opposite local vertex ``i``.

Face orientation: ``face_elements[f] = (K-, K+)`` with ``K- < K+`` (``K+ = -1``
on the boundary) and ``normals[f]`` pointing from ``K-`` into ``K+`` (outward
on the boundary). Faces are stored as vertex pairs ``(a, b)`` with ``a < b``,
``tangents[f]`` points from ``a`` to ``b`` and a segment parameter
``s in [0, 1]`` denotes the point ``(1 - s) a + s b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    elements: np.ndarray
    subdomain: np.ndarray
    parent: np.ndarray | None = None
    level: int = 0
    # derived (filled in __post_init__)
    faces: np.ndarray = field(init=False, repr=False)
    face_elements: np.ndarray = field(init=False, repr=False)
    face_local: np.ndarray = field(init=False, repr=False)
    element_faces: np.ndarray = field(init=False, repr=False)
    normals: np.ndarray = field(init=False, repr=False)
    tangents: np.ndarray = field(init=False, repr=False)
    face_length: np.ndarray = field(init=False, repr=False)
    areas: np.ndarray = field(init=False, repr=False)
    diameters: np.ndarray = field(init=False, repr=False)
    grad_lambda: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p = self.vertices
        t = self.elements
        nv = len(p)
        set_ = lambda name, val: object.__setattr__(self, name, val)  # noqa: E731

        e0, e1, e2 = p[t[:, 0]], p[t[:, 1]], p[t[:, 2]]
        d1 = e1 - e0
        d2 = e2 - e0
        set_("areas", 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]))

        # local face i = (t[i+1], t[i+2])
        start = t[:, [1, 2, 0]]
        end = t[:, [2, 0, 1]]
        a = np.minimum(start, end).ravel()
        b = np.maximum(start, end).ravel()
        key = a.astype(np.int64) * nv + b
        uniq, first, inverse, counts = np.unique(
            key, return_index=True, return_inverse=True, return_counts=True
        )
        if np.any(counts > 2):
            raise MeshError("nonconforming input: an edge is shared by more than two triangles")
        nf = len(uniq)
        faces = np.column_stack([a[first], b[first]])
        element_faces = inverse.reshape(-1, 3)

        order = np.argsort(inverse, kind="stable")
        ptr = np.zeros(nf + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        minus = order[ptr[:-1]]
        face_elements = np.full((nf, 2), -1, dtype=np.int64)
        face_local = np.full((nf, 2), -1, dtype=np.int64)
        face_elements[:, 0] = minus // 3
        face_local[:, 0] = minus % 3
        interior = counts == 2
        plus = order[ptr[:-1][interior] + 1]
        face_elements[interior, 1] = plus // 3
        face_local[interior, 1] = plus % 3

        s_flat, e_flat = start.ravel(), end.ravel()
        if np.any(s_flat[minus[interior]] != e_flat[plus]):
            raise MeshError("inconsistent orientation: overlapping triangles share an edge")

        seg = p[e_flat[minus]] - p[s_flat[minus]]
        length = np.hypot(seg[:, 0], seg[:, 1])
        normals = np.column_stack([seg[:, 1], -seg[:, 0]]) / length[:, None]
        tang = p[faces[:, 1]] - p[faces[:, 0]]
        tang /= length[:, None]

        ep = p[end] - p[start]  # (nt, 3, 2) edge vectors opposite each vertex
        grad = np.stack([-ep[..., 1], ep[..., 0]], axis=-1) / (2.0 * self.areas)[:, None, None]
        edge_len = np.hypot(ep[..., 0], ep[..., 1])

        set_("faces", faces)
        set_("face_elements", face_elements)
        set_("face_local", face_local)
        set_("element_faces", element_faces)
        set_("normals", normals)
        set_("tangents", tang)
        set_("face_length", length)
        set_("diameters", edge_len.max(axis=1))
        set_("grad_lambda", grad)

    # -- sizes --------------------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_elements[:, 1] >= 0)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_elements[:, 1] < 0)

    @property
    def is_boundary_face(self) -> np.ndarray:
        return self.face_elements[:, 1] < 0

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.elements].mean(axis=1)

    # -- geometry helpers ---------------------------------------------------
    def map_points(self, bary: np.ndarray, elems=None) -> np.ndarray:
        """Physical coordinates of barycentric points, shape ``(nK, nq, 2)``."""
        t = self.elements if elems is None else self.elements[elems]
        return np.einsum("qi,kid->kqd", bary, self.vertices[t])

    def face_bary(self, s: np.ndarray, side: int, faces=None) -> np.ndarray:
        """Barycentric coordinates, in the element on ``side`` (0 for ``K-``,
        1 for ``K+``), of the segment points ``s`` on each face.

        Returns an array of shape ``(nF, nq, 3)``. Rows for missing
        neighbours (boundary faces with ``side=1``) are zero.
        """
        faces = np.arange(self.n_faces) if faces is None else np.asarray(faces)
        K = self.face_elements[faces, side]
        loc = self.face_local[faces, side]
        out = np.zeros((len(faces), len(s), 3), dtype=np.result_type(s, float))
        ok = K >= 0
        K, loc, fa = K[ok], loc[ok], self.faces[faces[ok], 0]
        i1 = (loc + 1) % 3
        i2 = (loc + 2) % 3
        a_is_i1 = self.elements[K, i1] == fa
        ia = np.where(a_is_i1, i1, i2)
        ib = np.where(a_is_i1, i2, i1)
        rows = np.flatnonzero(ok)
        out[rows[:, None], np.arange(len(s))[None, :], ia[:, None]] = 1.0 - s[None, :]
        out[rows[:, None], np.arange(len(s))[None, :], ib[:, None]] = s[None, :]
        return out

    def face_points(self, s: np.ndarray, faces=None) -> np.ndarray:
        faces = np.arange(self.n_faces) if faces is None else np.asarray(faces)
        a = self.vertices[self.faces[faces, 0]]
        b = self.vertices[self.faces[faces, 1]]
        return a[:, None, :] * (1.0 - s)[None, :, None] + b[:, None, :] * s[None, :, None]

    def min_angle(self) -> float:
        """Smallest interior angle over all elements, in radians."""
        p = self.vertices[self.elements]
        ang = []
        for i in range(3):
            u = p[:, (i + 1) % 3] - p[:, i]
            v = p[:, (i + 2) % 3] - p[:, i]
            c = np.einsum("kd,kd->k", u, v) / (
                np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
            )
            ang.append(np.arccos(np.clip(c, -1.0, 1.0)))
        return float(np.min(ang))

    def neighbours(self) -> np.ndarray:
        """``(nt, 3)`` element across each local face, ``-1`` on the boundary."""
        fe = self.face_elements[self.element_faces]
        own = np.arange(self.n_elements)[:, None]
        return np.where(fe[..., 0] == own, fe[..., 1], fe[..., 0])

    def refinement_edges(self) -> np.ndarray:
        """Face index of each element's refinement edge."""
        return self.element_faces[:, 2]


def build_mesh(points, triangles, subdomain_ids=None) -> Mesh:
    """Validate raw input and build a :class:`Mesh`.

    Triangles are re-oriented counter-clockwise and rotated so that the
    longest edge becomes the refinement edge.
    """
    p = np.asarray(points, dtype=float)
    t = np.array(triangles, dtype=np.int64)
    if p.ndim != 2 or p.shape[1] != 2:
        raise MeshError("points must have shape (N, 2)")
    if t.ndim != 2 or t.shape[1] != 3 or len(t) == 0:
        raise MeshError("triangles must have shape (M, 3), M >= 1")
    sub = np.zeros(len(t), dtype=np.int64) if subdomain_ids is None else np.array(
        subdomain_ids, dtype=np.int64
    )
    if sub.shape != (len(t),):
        raise MeshError("one subdomain id per triangle required")
    if t.min() < 0 or t.max() >= len(p):
        raise MeshError("triangle vertex index out of range")
    used = np.zeros(len(p), dtype=bool)
    used[t.ravel()] = True
    if not used.all():
        raise MeshError(f"dangling vertex {int(np.flatnonzero(~used)[0])} not used by any triangle")
    if len(np.unique(np.sort(t, axis=1), axis=0)) != len(t):
        raise MeshError("duplicate triangle")

    d1 = p[t[:, 1]] - p[t[:, 0]]
    d2 = p[t[:, 2]] - p[t[:, 0]]
    area2 = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    scale = np.sum((p.max(axis=0) - p.min(axis=0)) ** 2)
    if np.any(np.abs(area2) <= 2e-14 * scale):
        raise MeshError("degenerate triangle (zero area)")
    cw = area2 < 0
    t[cw] = t[cw][:, [1, 0, 2]]

    # longest edge first: edge j is (t[j], t[j+1])
    q = p[t]
    lens = np.linalg.norm(q[:, [1, 2, 0]] - q, axis=2)
    longest = np.argmax(lens >= lens.max(axis=1, keepdims=True) * (1.0 - 1e-12), axis=1)
    rot = (np.arange(3)[None, :] + longest[:, None]) % 3
    t = np.take_along_axis(t, rot, axis=1)

    mesh = Mesh(p, t, sub)
    _check_hanging(mesh)
    return mesh


def _check_hanging(mesh: Mesh) -> None:
    bf = mesh.boundary_faces
    cand = np.unique(mesh.faces[bf].ravel())
    p = mesh.vertices
    tol = 1e-12 * max(np.ptp(p[:, 0]), np.ptp(p[:, 1]))
    for lo in range(0, len(bf), 256):
        chunk = bf[lo : lo + 256]
        a = p[mesh.faces[chunk, 0]][:, None, :]
        b = p[mesh.faces[chunk, 1]][:, None, :]
        c = p[cand][None, :, :]
        ab = b - a
        ac = c - a
        cross = ab[..., 0] * ac[..., 1] - ab[..., 1] * ac[..., 0]
        L = np.linalg.norm(ab, axis=-1)
        s = np.einsum("fkd,fkd->fk", ac, np.broadcast_to(ab, ac.shape)) / L**2
        hit = (np.abs(cross) <= tol * L) & (s > 1e-12) & (s < 1 - 1e-12)
        if hit.any():
            raise MeshError("nonconforming input: hanging vertex on an edge")


# ----------------------------------------------------------------------------
# refinement
# ----------------------------------------------------------------------------


def _bisect_edges(mesh: Mesh, marked_edges: np.ndarray) -> Mesh:
    elem_edges = mesh.element_faces[:, [2, 0, 1]]
    marked_edges = kernels.nvb_closure(elem_edges, marked_edges)
    new = np.flatnonzero(marked_edges)
    if len(new) == 0:
        return Mesh(
            mesh.vertices,
            mesh.elements,
            mesh.subdomain,
            np.arange(mesh.n_elements),
            mesh.level + 1,
        )
    midpoint = np.full(mesh.n_faces, -1, dtype=np.int64)
    midpoint[new] = mesh.n_vertices + np.arange(len(new))
    mids = 0.5 * (mesh.vertices[mesh.faces[new, 0]] + mesh.vertices[mesh.faces[new, 1]])
    children, parent = kernels.nvb_bisect(mesh.elements, elem_edges, midpoint)
    return Mesh(
        np.vstack([mesh.vertices, mids]),
        children,
        mesh.subdomain[parent],
        parent,
        mesh.level + 1,
    )


def refine(mesh: Mesh, marked) -> Mesh:
    """Bisect every marked element at least once, then close conformingly.

    ``marked`` is a boolean mask or an index array over elements. The child's
    ``parent`` array maps each new element to its element in ``mesh``.
    """
    marked = np.asarray(marked)
    if marked.dtype == bool:
        idx = np.flatnonzero(marked)
    else:
        idx = marked.astype(np.int64)
    if len(idx) and (idx.min() < 0 or idx.max() >= mesh.n_elements):
        raise IndexError("marked element index out of range")
    edges = np.zeros(mesh.n_faces, dtype=bool)
    edges[mesh.element_faces[idx, 2]] = True
    return _bisect_edges(mesh, edges)


def uniform_refine(mesh: Mesh, times: int = 1) -> Mesh:
    """Split every element into four by bisecting all edges."""
    for _ in range(times):
        mesh = _bisect_edges(mesh, np.ones(mesh.n_faces, dtype=bool))
    return mesh


class RefinementChain:
    """Keeps parent arrays so fine elements can be traced back to ancestors."""

    def __init__(self, mesh: Mesh):
        self.meshes = [mesh]

    @property
    def finest(self) -> Mesh:
        return self.meshes[-1]

    def push(self, mesh: Mesh) -> None:
        if mesh.parent is None or len(mesh.parent) != mesh.n_elements:
            raise ValueError("mesh has no genealogy")
        self.meshes.append(mesh)

    def ancestors(self, coarse_index: int) -> np.ndarray:
        amap = np.arange(self.finest.n_elements)
        for m in reversed(self.meshes[coarse_index + 1 :]):
            amap = m.parent[amap]
        return amap


# ----------------------------------------------------------------------------
# generators and text format
# ----------------------------------------------------------------------------


def rectangle_mesh(x0, x1, y0, y1, nx, ny, subdomain_of=None) -> Mesh:
    """Structured mesh, each cell split along its ``/`` diagonal.

    ``subdomain_of(cx, cy)`` maps element centroids to integer ids.
    """
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    idx = lambda i, j: j * (nx + 1) + i  # noqa: E731
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00, v10, v01, v11 = idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)
    tris = np.vstack([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])])
    if subdomain_of is None:
        sub = np.zeros(len(tris), dtype=np.int64)
    else:
        c = pts[tris].mean(axis=1)
        sub = np.asarray(subdomain_of(c[:, 0], c[:, 1]), dtype=np.int64)
    return build_mesh(pts, tris, sub)


def read_mesh(path) -> Mesh:
    """Read the line-oriented ``vertices N`` / ``triangles M`` text format."""
    with open(path) as fh:
        tokens = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    try:
        if tokens[0][0] != "vertices":
            raise MeshError(f"{path}: expected 'vertices N' header")
        nv = int(tokens[0][1])
        pts = [[float(x) for x in row[:2]] for row in tokens[1 : 1 + nv]]
        hdr = tokens[1 + nv]
        if hdr[0] != "triangles":
            raise MeshError(f"{path}: expected 'triangles M' header")
        nt = int(hdr[1])
        rows = tokens[2 + nv : 2 + nv + nt]
        if len(pts) != nv or len(rows) != nt:
            raise MeshError(f"{path}: truncated file")
        tris = [[int(x) for x in row[:3]] for row in rows]
        sub = [int(row[3]) if len(row) > 3 else 0 for row in rows]
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"{path}: malformed mesh file ({exc})") from exc
    return build_mesh(pts, tris, sub)


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"vertices {mesh.n_vertices}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"triangles {mesh.n_elements}\n")
        for (i, j, k), s in zip(mesh.elements, mesh.subdomain):
            fh.write(f"{i} {j} {k} {s}\n")
