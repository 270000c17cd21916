"""Inner loops with a numba and a numpy implementation.

Both variants of every kernel return identical results (same ordering,
same dtype); :mod:`jumpfem._accel` decides which one the rest of the
package calls. The ``*_numpy`` and ``*_numba`` names stay importable so the
benchmark and the tests can run both side by side.

Element convention for bisection: ``[n1, n2, n3]`` with refinement edge
``n1-n2`` and newest vertex ``n3``. ``elem_edges[:, 0]`` is the refinement
edge, ``[:, 1]`` is ``n2-n3`` and ``[:, 2]`` is ``n3-n1``.
"""
import numpy as np
import scipy.sparse as sp

from ._accel import HAVE_NUMBA, njit

# ----------------------------------------------------------------------------
# newest-vertex bisection: closure
# ----------------------------------------------------------------------------


def nvb_closure_numpy(elem_edges, marked):
    marked = marked.copy()
    while True:
        touched = marked[elem_edges].any(axis=1)
        ref = elem_edges[touched, 0]
        if marked[ref].all():
            return marked
        marked[ref] = True


@njit
def _nvb_closure_loop(elem_edges, marked, edge_ptr, edge_elems):
    n_edges = marked.shape[0]
    stack = np.empty(n_edges, dtype=np.int64)
    top = 0
    for e in range(n_edges):
        if marked[e]:
            stack[top] = e
            top += 1
    while top > 0:
        top -= 1
        e = stack[top]
        for p in range(edge_ptr[e], edge_ptr[e + 1]):
            r = elem_edges[edge_elems[p], 0]
            if not marked[r]:
                marked[r] = True
                stack[top] = r
                top += 1
    return marked


def _edge_to_elements(elem_edges, n_edges):
    flat = elem_edges.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=n_edges)
    ptr = np.zeros(n_edges + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, (order // 3).astype(np.int64)


def nvb_closure_numba(elem_edges, marked):
    elem_edges = np.ascontiguousarray(elem_edges, dtype=np.int64)
    ptr, edge_elems = _edge_to_elements(elem_edges, marked.shape[0])
    return _nvb_closure_loop(elem_edges, marked.copy(), ptr, edge_elems)


# ----------------------------------------------------------------------------
# newest-vertex bisection: element splitting
# ----------------------------------------------------------------------------

# number of children for the marked-edge pattern (ref, e2, e3) as a 3-bit code
_N_CHILDREN = np.array([1, 2, 0, 3, 0, 3, 0, 4], dtype=np.int64)


def _pattern(elem_edges, midpoint):
    m = midpoint[elem_edges] >= 0
    return m[:, 0] * 1 + m[:, 1] * 2 + m[:, 2] * 4


def nvb_bisect_numpy(elements, elem_edges, midpoint):
    """Split elements according to their marked edges.

    ``midpoint[e]`` is the new vertex on edge ``e`` or ``-1``. Returns the
    child connectivity and, for each child, its parent element index.
    """
    code = _pattern(elem_edges, midpoint)
    nchild = _N_CHILDREN[code]
    if np.any(nchild == 0):
        raise ValueError("marked edges are not closed under the refinement-edge rule")
    offset = np.zeros(len(elements) + 1, dtype=np.int64)
    np.cumsum(nchild, out=offset[1:])
    children = np.empty((offset[-1], 3), dtype=np.int64)
    parent = np.repeat(np.arange(len(elements), dtype=np.int64), nchild)

    n1, n2, n3 = elements[:, 0], elements[:, 1], elements[:, 2]
    m1 = midpoint[elem_edges[:, 0]]
    m2 = midpoint[elem_edges[:, 1]]
    m3 = midpoint[elem_edges[:, 2]]

    def put(idx, k, a, b, c):
        rows = offset[idx] + k
        children[rows, 0] = a[idx]
        children[rows, 1] = b[idx]
        children[rows, 2] = c[idx]

    i = np.flatnonzero(code == 0)
    put(i, 0, n1, n2, n3)
    i = np.flatnonzero(code == 1)
    put(i, 0, n3, n1, m1)
    put(i, 1, n2, n3, m1)
    i = np.flatnonzero(code == 3)
    put(i, 0, n3, n1, m1)
    put(i, 1, m1, n2, m2)
    put(i, 2, n3, m1, m2)
    i = np.flatnonzero(code == 5)
    put(i, 0, m1, n3, m3)
    put(i, 1, n1, m1, m3)
    put(i, 2, n2, n3, m1)
    i = np.flatnonzero(code == 7)
    put(i, 0, m1, n3, m3)
    put(i, 1, n1, m1, m3)
    put(i, 2, m1, n2, m2)
    put(i, 3, n3, m1, m2)
    return children, parent


@njit
def _nvb_bisect_loop(elements, elem_edges, midpoint, nchild_table):
    nt = elements.shape[0]
    total = 0
    for k in range(nt):
        code = 0
        for j in range(3):
            if midpoint[elem_edges[k, j]] >= 0:
                code += 1 << j
        if nchild_table[code] == 0:
            return np.empty((0, 3), np.int64), np.empty(0, np.int64), False
        total += nchild_table[code]
    children = np.empty((total, 3), dtype=np.int64)
    parent = np.empty(total, dtype=np.int64)
    r = 0
    for k in range(nt):
        n1 = elements[k, 0]
        n2 = elements[k, 1]
        n3 = elements[k, 2]
        m1 = midpoint[elem_edges[k, 0]]
        m2 = midpoint[elem_edges[k, 1]]
        m3 = midpoint[elem_edges[k, 2]]
        if m1 < 0:
            children[r, 0] = n1
            children[r, 1] = n2
            children[r, 2] = n3
            parent[r] = k
            r += 1
            continue
        if m3 >= 0:
            children[r, 0] = m1
            children[r, 1] = n3
            children[r, 2] = m3
            children[r + 1, 0] = n1
            children[r + 1, 1] = m1
            children[r + 1, 2] = m3
            parent[r] = k
            parent[r + 1] = k
            r += 2
        else:
            children[r, 0] = n3
            children[r, 1] = n1
            children[r, 2] = m1
            parent[r] = k
            r += 1
        if m2 >= 0:
            children[r, 0] = m1
            children[r, 1] = n2
            children[r, 2] = m2
            children[r + 1, 0] = n3
            children[r + 1, 1] = m1
            children[r + 1, 2] = m2
            parent[r] = k
            parent[r + 1] = k
            r += 2
        else:
            children[r, 0] = n2
            children[r, 1] = n3
            children[r, 2] = m1
            parent[r] = k
            r += 1
    return children, parent, True


def nvb_bisect_numba(elements, elem_edges, midpoint):
    children, parent, ok = _nvb_bisect_loop(
        np.ascontiguousarray(elements, dtype=np.int64),
        np.ascontiguousarray(elem_edges, dtype=np.int64),
        np.ascontiguousarray(midpoint, dtype=np.int64),
        _N_CHILDREN,
    )
    if not ok:
        raise ValueError("marked edges are not closed under the refinement-edge rule")
    return children, parent


# ----------------------------------------------------------------------------
# Jacobi-preconditioned conjugate gradients on CSR data
# ----------------------------------------------------------------------------


def pcg_numpy(A, b, x0, tol, max_iter):
    """Returns ``(x, iterations, relative_residual, status)``.

    status: 0 converged, 1 max_iter reached, 2 breakdown (p.Ap <= 0).
    """
    A = sp.csr_matrix(A)
    dinv = 1.0 / A.diagonal()
    x = x0.copy()
    r = b - A @ x
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(b), 0, 0.0, 0
    res = np.linalg.norm(r) / bnorm
    if res <= tol:
        return x, 0, res, 0
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if not pAp > 0.0:
            return x, it, res, 2
        step = rz / pAp
        x += step * p
        r -= step * Ap
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            return x, it, res, 0
        z = dinv * r
        rz_new = r @ z
        p *= rz_new / rz
        p += z
        rz = rz_new
    return x, max_iter, res, 1


@njit
def _csr_matvec(indptr, indices, data, x, out):
    n = indptr.shape[0] - 1
    for i in range(n):
        s = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            s += data[p] * x[indices[p]]
        out[i] = s


@njit
def _pcg_loop(indptr, indices, data, dinv, b, x, tol, max_iter):
    n = b.shape[0]
    r = np.empty(n)
    Ap = np.empty(n)
    _csr_matvec(indptr, indices, data, x, Ap)
    bnorm = np.sqrt(np.dot(b, b))
    for i in range(n):
        r[i] = b[i] - Ap[i]
    res = np.sqrt(np.dot(r, r)) / bnorm
    if res <= tol:
        return x, 0, res, 0
    z = dinv * r
    p = z.copy()
    rz = np.dot(r, z)
    for it in range(1, max_iter + 1):
        _csr_matvec(indptr, indices, data, p, Ap)
        pAp = np.dot(p, Ap)
        if not pAp > 0.0:
            return x, it, res, 2
        step = rz / pAp
        rr = 0.0
        for i in range(n):
            x[i] += step * p[i]
            r[i] -= step * Ap[i]
            rr += r[i] * r[i]
        res = np.sqrt(rr) / bnorm
        if res <= tol:
            return x, it, res, 0
        rz_new = 0.0
        for i in range(n):
            z[i] = dinv[i] * r[i]
            rz_new += r[i] * z[i]
        beta = rz_new / rz
        for i in range(n):
            p[i] = z[i] + beta * p[i]
        rz = rz_new
    return x, max_iter, res, 1


def pcg_numba(A, b, x0, tol, max_iter):
    A = sp.csr_matrix(A)
    if np.linalg.norm(b) == 0.0:
        return np.zeros_like(b), 0, 0.0, 0
    A.sort_indices()
    dinv = 1.0 / A.diagonal()
    return _pcg_loop(
        A.indptr.astype(np.int64),
        A.indices.astype(np.int64),
        A.data.astype(np.float64),
        dinv,
        np.asarray(b, dtype=np.float64),
        np.array(x0, dtype=np.float64),
        float(tol),
        int(max_iter),
    )


if HAVE_NUMBA:
    nvb_closure = nvb_closure_numba
    nvb_bisect = nvb_bisect_numba
    pcg = pcg_numba
else:
    nvb_closure = nvb_closure_numpy
    nvb_bisect = nvb_bisect_numpy
    pcg = pcg_numpy
