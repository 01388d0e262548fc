"""numpy/scipy implementations of the hot kernels.

Used when the compiled module is unavailable or ``PATHRAG_KERNELS=python`` is set.
Output must match ``_ckernels`` exactly (same ordering, same float operations).
"""

import numpy as np
from scipy import ndimage

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_EIGHT = np.ones((3, 3), dtype=bool)


def binary_open_cross(mask):
    mask = np.asarray(mask, dtype=bool)
    return ndimage.binary_opening(mask, structure=_CROSS, border_value=0)


def label_components(mask, values):
    """8-connected components with per-component raw moments.

    Components are numbered in raster order of their first pixel. Returns a
    dict of 1-D arrays: area, sum_x, sum_y, sum_v, sum_xx, sum_yy, sum_xy.
    """
    mask = np.asarray(mask, dtype=bool)
    values = np.asarray(values, dtype=np.float64)
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        empty_f = np.zeros(0, dtype=np.float64)
        return {
            "area": np.zeros(0, dtype=np.int64),
            "sum_x": empty_f, "sum_y": empty_f, "sum_v": empty_f,
            "sum_xx": empty_f, "sum_yy": empty_f, "sum_xy": empty_f,
        }
    flat = labels.reshape(-1)
    sel = flat > 0
    lab = flat[sel] - 1
    h, w = mask.shape
    yy, xx = np.divmod(np.arange(h * w, dtype=np.int64), w)
    xs = xx[sel].astype(np.float64)
    ys = yy[sel].astype(np.float64)
    vs = values.reshape(-1)[sel]

    def acc(weights):
        return np.bincount(lab, weights=weights, minlength=n)

    return {
        "area": np.bincount(lab, minlength=n).astype(np.int64),
        "sum_x": acc(xs),
        "sum_y": acc(ys),
        "sum_v": acc(vs),
        "sum_xx": acc(xs * xs),
        "sum_yy": acc(ys * ys),
        "sum_xy": acc(xs * ys),
    }


def knn_edges(x, y, k, max_distance):
    """Union of directed k-nearest-neighbour relations, cut at ``max_distance``.

    Returns ``(i, j, dist)`` arrays with ``i < j``, sorted lexicographically.
    Distance ties resolve toward the smaller node id.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    kk = min(int(k), n - 1)
    if n < 2 or kk < 1:
        return (np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0, np.float64))
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    dist = np.sqrt(dx * dx + dy * dy)
    np.fill_diagonal(dist, np.inf)
    # stable sort keeps ascending column id among equal distances
    nbr = np.argsort(dist, axis=1, kind="stable")[:, :kk]
    src = np.repeat(np.arange(n, dtype=np.int64), kk)
    dst = nbr.reshape(-1).astype(np.int64)
    d = dist[src, dst]
    keep = d <= max_distance
    lo = np.minimum(src[keep], dst[keep])
    hi = np.maximum(src[keep], dst[keep])
    codes = np.unique(lo * n + hi)
    i, j = np.divmod(codes, n)
    return i, j, dist[i, j]
