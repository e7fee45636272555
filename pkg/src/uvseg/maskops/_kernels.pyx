# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled connected-component kernels.

Two-pass union-find labeling over a binary mask with fused per-component
statistics (area, tight bounding box, centroid sums). Components are numbered
1..n in raster order of their first pixel so the output is bit-identical to
the pure numpy fallback.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline int _find(int[::1] parent, int x) nogil:
    cdef int r = x
    cdef int p
    while parent[r] != r:
        r = parent[r]
    # path compression
    while parent[x] != r:
        p = parent[x]
        parent[x] = r
        x = p
    return r


cdef inline void _union(int[::1] parent, int a, int b) nogil:
    cdef int ra = _find(parent, a)
    cdef int rb = _find(parent, b)
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


def label_and_stats(const unsigned char[:, ::1] mask, int connectivity):
    """Label 4- or 8-connected foreground components and collect stats.

    Returns (labels int32[H, W], count, areas int64[n], bboxes int64[n, 4]
    as (y0, x0, y1, x1) half-open, centroids float64[n, 2] as (y, x)).
    """
    cdef Py_ssize_t H = mask.shape[0]
    cdef Py_ssize_t W = mask.shape[1]

    labels_arr = np.zeros((H, W), dtype=np.int32)
    cdef int[:, ::1] labels = labels_arr

    # provisional labels; at most one new label per two pixels in a row
    cdef Py_ssize_t max_labels = (H * W) // 2 + 2
    parent_arr = np.empty(max_labels, dtype=np.int32)
    cdef int[::1] parent = parent_arr

    cdef int next_label = 1
    cdef Py_ssize_t y, x
    cdef int lw, ln, lnw, lne, cur
    parent[0] = 0

    with nogil:
        for y in range(H):
            for x in range(W):
                if mask[y, x] == 0:
                    continue
                cur = 0
                if x > 0 and mask[y, x - 1]:
                    cur = labels[y, x - 1]
                if y > 0:
                    if mask[y - 1, x]:
                        ln = labels[y - 1, x]
                        if cur == 0:
                            cur = ln
                        else:
                            _union(parent, cur, ln)
                    if connectivity == 8:
                        if x > 0 and mask[y - 1, x - 1]:
                            lnw = labels[y - 1, x - 1]
                            if cur == 0:
                                cur = lnw
                            else:
                                _union(parent, cur, lnw)
                        if x + 1 < W and mask[y - 1, x + 1]:
                            lne = labels[y - 1, x + 1]
                            if cur == 0:
                                cur = lne
                            else:
                                _union(parent, cur, lne)
                if cur == 0:
                    cur = next_label
                    parent[cur] = cur
                    next_label += 1
                labels[y, x] = cur

    # canonical numbering: order of first pixel in raster scan
    remap_arr = np.zeros(next_label, dtype=np.int32)
    cdef int[::1] remap = remap_arr
    cdef int count = 0
    cdef int root, lab

    areas_arr = np.zeros(max_labels, dtype=np.int64)
    bbox_arr = np.empty((max_labels, 4), dtype=np.int64)
    csum_arr = np.zeros((max_labels, 2), dtype=np.float64)
    cdef long long[::1] areas = areas_arr
    cdef long long[:, ::1] bbox = bbox_arr
    cdef double[:, ::1] csum = csum_arr

    with nogil:
        for y in range(H):
            for x in range(W):
                lab = labels[y, x]
                if lab == 0:
                    continue
                root = _find(parent, lab)
                if remap[root] == 0:
                    count += 1
                    remap[root] = count
                    bbox[count, 0] = y
                    bbox[count, 1] = x
                    bbox[count, 2] = y + 1
                    bbox[count, 3] = x + 1
                lab = remap[root]
                labels[y, x] = lab
                areas[lab] += 1
                if y < bbox[lab, 0]:
                    bbox[lab, 0] = y
                if x < bbox[lab, 1]:
                    bbox[lab, 1] = x
                if y + 1 > bbox[lab, 2]:
                    bbox[lab, 2] = y + 1
                if x + 1 > bbox[lab, 3]:
                    bbox[lab, 3] = x + 1
                csum[lab, 0] += y
                csum[lab, 1] += x

    areas_out = areas_arr[1:count + 1].copy()
    bbox_out = bbox_arr[1:count + 1].copy()
    cent_out = csum_arr[1:count + 1].copy()
    if count:
        cent_out /= areas_out[:, None]
    return labels_arr, count, areas_out, bbox_out, cent_out
