# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled raster kernels.

Must stay behaviourally identical to :mod:`semvos._pykernels`; the test
suite runs both backends against the same oracles.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def label_components(const cnp.uint8_t[:, ::1] mask, bint eight):
    """Label foreground components, numbered in row-major first-pixel order.

    Returns ``(labels, n)`` with background set to -1.
    """
    cdef Py_ssize_t h = mask.shape[0], w = mask.shape[1]
    labels_arr = np.full((h, w), -1, dtype=np.int32)
    cdef int[:, ::1] labels = labels_arr
    queue_arr = np.empty(h * w, dtype=np.intp)
    cdef Py_ssize_t[::1] queue = queue_arr
    cdef Py_ssize_t head, tail, p, r, c, rr, cc
    cdef int dr, dc, n = 0
    cdef Py_ssize_t r0, c0

    for r0 in range(h):
        for c0 in range(w):
            if mask[r0, c0] == 0 or labels[r0, c0] >= 0:
                continue
            labels[r0, c0] = n
            head = 0
            tail = 1
            queue[0] = r0 * w + c0
            while head < tail:
                p = queue[head]
                head += 1
                r = p // w
                c = p - r * w
                for dr in range(-1, 2):
                    for dc in range(-1, 2):
                        if dr == 0 and dc == 0:
                            continue
                        if not eight and dr != 0 and dc != 0:
                            continue
                        rr = r + dr
                        cc = c + dc
                        if rr < 0 or rr >= h or cc < 0 or cc >= w:
                            continue
                        if mask[rr, cc] == 0 or labels[rr, cc] >= 0:
                            continue
                        labels[rr, cc] = n
                        queue[tail] = rr * w + cc
                        tail += 1
            n += 1
    return labels_arr, n


def absorb_unlabeled(const int[:, ::1] seeds):
    """Grow labelled regions (>= 0) into unlabelled pixels (-1) by 4-connected
    multi-source BFS; a pixel reached at equal distance by several regions
    takes the lowest label."""
    cdef Py_ssize_t h = seeds.shape[0], w = seeds.shape[1]
    labels_arr = np.array(seeds, dtype=np.int32, copy=True)
    cdef int[:, ::1] labels = labels_arr
    dist_arr = np.full((h, w), -1, dtype=np.int64)
    cdef long long[:, ::1] dist = dist_arr
    queue_arr = np.empty(h * w, dtype=np.intp)
    cdef Py_ssize_t[::1] queue = queue_arr
    cdef Py_ssize_t head = 0, tail = 0, p, r, c, rr, cc, k
    cdef int lab
    cdef long long d
    cdef int* drs = [-1, 1, 0, 0]
    cdef int* dcs = [0, 0, -1, 1]

    for r in range(h):
        for c in range(w):
            if labels[r, c] >= 0:
                dist[r, c] = 0
                queue[tail] = r * w + c
                tail += 1
    if tail == 0:
        labels_arr.fill(0)
        return labels_arr

    while head < tail:
        p = queue[head]
        head += 1
        r = p // w
        c = p - r * w
        lab = labels[r, c]
        d = dist[r, c]
        for k in range(4):
            rr = r + drs[k]
            cc = c + dcs[k]
            if rr < 0 or rr >= h or cc < 0 or cc >= w:
                continue
            if dist[rr, cc] < 0:
                dist[rr, cc] = d + 1
                labels[rr, cc] = lab
                queue[tail] = rr * w + cc
                tail += 1
            elif dist[rr, cc] == d + 1 and lab < labels[rr, cc]:
                labels[rr, cc] = lab
    return labels_arr


def near_mask(const cnp.uint8_t[:, ::1] src, const cnp.uint8_t[:, ::1] target,
              double radius, bint chebyshev):
    """Flag source pixels with a target pixel within ``radius``.

    Euclidean uses ``dy*dy + dx*dx <= radius*radius``; Chebyshev uses
    ``max(|dy|, |dx|) <= radius``.
    """
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    if radius < 0:
        return out_arr
    cdef Py_ssize_t reach = <Py_ssize_t>radius
    cdef double r2 = radius * radius
    cdef Py_ssize_t r, c, dy, dx, rr, cc
    cdef bint found

    for r in range(h):
        for c in range(w):
            if src[r, c] == 0:
                continue
            found = False
            for dy in range(-reach, reach + 1):
                rr = r + dy
                if rr < 0 or rr >= h:
                    continue
                for dx in range(-reach, reach + 1):
                    cc = c + dx
                    if cc < 0 or cc >= w:
                        continue
                    if not chebyshev and <double>(dy * dy + dx * dx) > r2:
                        continue
                    if target[rr, cc]:
                        found = True
                        break
                if found:
                    break
            if found:
                out[r, c] = 1
    return out_arr
