# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors ``_pykernels`` bit for bit."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()

from ._pykernels import label_components as _pylabel


def binary_open_cross(mask):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1], r, c
    ero_arr = np.zeros((h, w), dtype=np.uint8)
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] ero = ero_arr
    cdef cnp.uint8_t[:, ::1] out = out_arr
    # erosion: out-of-image neighbours count as background
    for r in range(1, h - 1):
        for c in range(1, w - 1):
            if m[r, c] and m[r - 1, c] and m[r + 1, c] and m[r, c - 1] and m[r, c + 1]:
                ero[r, c] = 1
    for r in range(h):
        for c in range(w):
            if ero[r, c]:
                out[r, c] = 1
                if r > 0:
                    out[r - 1, c] = 1
                if r < h - 1:
                    out[r + 1, c] = 1
                if c > 0:
                    out[r, c - 1] = 1
                if c < w - 1:
                    out[r, c + 1] = 1
    return out_arr.astype(bool)


cdef inline Py_ssize_t _find(Py_ssize_t* parent, Py_ssize_t a) noexcept nogil:
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


cdef inline void _union(Py_ssize_t* parent, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a < b:
        parent[b] = a
    elif b < a:
        parent[a] = b


def label_components(mask, values):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    cdef Py_ssize_t r, c, p, q, root, n = 0
    if h * w == 0:
        return _pylabel(mask, values)
    parent_arr = np.arange(h * w, dtype=np.intp)
    cdef Py_ssize_t[::1] parent_view = parent_arr
    cdef Py_ssize_t* parent = &parent_view[0]

    with nogil:
        for r in range(h):
            for c in range(w):
                if not m[r, c]:
                    continue
                p = r * w + c
                if c > 0 and m[r, c - 1]:
                    _union(parent, p, p - 1)
                if r > 0:
                    if c > 0 and m[r - 1, c - 1]:
                        _union(parent, p, p - w - 1)
                    if m[r - 1, c]:
                        _union(parent, p, p - w)
                    if c < w - 1 and m[r - 1, c + 1]:
                        _union(parent, p, p - w + 1)

    # roots are the smallest raster index in each set, so first-seen order is raster order
    label_arr = np.full(h * w, -1, dtype=np.intp)
    cdef Py_ssize_t[::1] label = label_arr
    with nogil:
        for p in range(h * w):
            if m[p // w, p % w]:
                root = _find(parent, p)
                if label[root] < 0:
                    label[root] = n
                    n += 1
                label[p] = label[root]

    area_arr = np.zeros(n, dtype=np.int64)
    sums = np.zeros((6, n), dtype=np.float64)
    cdef cnp.int64_t[::1] area = area_arr
    cdef double[:, ::1] s = sums
    cdef double fx, fy
    with nogil:
        for p in range(h * w):
            q = label[p]
            if q < 0:
                continue
            r = p // w
            c = p % w
            fx = <double>c
            fy = <double>r
            area[q] += 1
            s[0, q] += fx
            s[1, q] += fy
            s[2, q] += v[r, c]
            s[3, q] += fx * fx
            s[4, q] += fy * fy
            s[5, q] += fx * fy
    return {
        "area": area_arr,
        "sum_x": sums[0].copy(),
        "sum_y": sums[1].copy(),
        "sum_v": sums[2].copy(),
        "sum_xx": sums[3].copy(),
        "sum_yy": sums[4].copy(),
        "sum_xy": sums[5].copy(),
    }


def knn_edges(x, y, int k, double max_distance):
    cdef double[::1] xs = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] ys = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t kk = min(k, n - 1)
    if n < 2 or kk < 1:
        return (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.float64))

    best_d_arr = np.empty(kk, dtype=np.float64)
    best_j_arr = np.empty(kk, dtype=np.intp)
    cdef double[::1] best_d = best_d_arr
    cdef Py_ssize_t[::1] best_j = best_j_arr
    adj_arr = np.zeros((n, n), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] adj = adj_arr
    cdef Py_ssize_t i, j, t, filled, m = 0
    cdef double dx, dy, d

    with nogil:
        for i in range(n):
            filled = 0
            for j in range(n):
                if j == i:
                    continue
                dx = xs[i] - xs[j]
                dy = ys[i] - ys[j]
                d = sqrt(dx * dx + dy * dy)
                # j ascends, so strict < keeps the smaller id on ties
                if filled == kk and not (d < best_d[kk - 1]):
                    continue
                t = filled if filled < kk else kk - 1
                while t > 0 and d < best_d[t - 1]:
                    best_d[t] = best_d[t - 1]
                    best_j[t] = best_j[t - 1]
                    t -= 1
                best_d[t] = d
                best_j[t] = j
                if filled < kk:
                    filled += 1
            for t in range(filled):
                if best_d[t] <= max_distance:
                    j = best_j[t]
                    if i < j:
                        if not adj[i, j]:
                            adj[i, j] = 1
                            m += 1
                    else:
                        if not adj[j, i]:
                            adj[j, i] = 1
                            m += 1

    ii_arr = np.empty(m, dtype=np.int64)
    jj_arr = np.empty(m, dtype=np.int64)
    dd_arr = np.empty(m, dtype=np.float64)
    cdef cnp.int64_t[::1] ii = ii_arr
    cdef cnp.int64_t[::1] jj = jj_arr
    cdef double[::1] dd = dd_arr
    t = 0
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                if adj[i, j]:
                    dx = xs[i] - xs[j]
                    dy = ys[i] - ys[j]
                    ii[t] = i
                    jj[t] = j
                    dd[t] = sqrt(dx * dx + dy * dy)
                    t += 1
    return ii_arr, jj_arr, dd_arr
