# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot kernels.

Mirrors the semantics of ``airwayseg._kernels_py`` (the selection between the
two happens in ``airwayseg.backend``). The flood and labeling kernels produce
bit-identical integer results to the fallback; the box filter may differ at
float rounding level because summation order differs.
"""

from libc.math cimport sqrt
from libc.stdlib cimport free, malloc, realloc

import numpy as np

cimport numpy as cnp

cnp.import_array()

NAME = "compiled"


# ------------------------------------------------------------------ box sums

cdef void _row_box_sum(const double[:, ::1] src, double[:, ::1] dst, Py_ssize_t r) noexcept nogil:
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef Py_ssize_t i, j, jj
    cdef double acc
    for i in range(h):
        acc = 0.0
        for j in range(-r, r + 1):
            jj = j
            if jj < 0:
                jj = 0
            elif jj >= w:
                jj = w - 1
            acc += src[i, jj]
        dst[i, 0] = acc
        for j in range(1, w):
            jj = j - 1 - r
            if jj < 0:
                jj = 0
            acc -= src[i, jj]
            jj = j + r
            if jj >= w:
                jj = w - 1
            acc += src[i, jj]
            dst[i, j] = acc


cdef void _col_box_sum(const double[:, ::1] src, double[:, ::1] dst, Py_ssize_t r) noexcept nogil:
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    cdef Py_ssize_t i, j, ii
    cdef double acc
    for j in range(w):
        acc = 0.0
        for i in range(-r, r + 1):
            ii = i
            if ii < 0:
                ii = 0
            elif ii >= h:
                ii = h - 1
            acc += src[ii, j]
        dst[0, j] = acc
    for i in range(1, h):
        for j in range(w):
            ii = i - 1 - r
            if ii < 0:
                ii = 0
            acc = dst[i - 1, j] - src[ii, j]
            ii = i + r
            if ii >= h:
                ii = h - 1
            dst[i, j] = acc + src[ii, j]


def box_smooth(data, valid, int kernel, int passes):
    """Repeated masked mean filter, clamp-to-edge, invalid pixels excluded."""
    cdef Py_ssize_t r = kernel // 2
    valid_bool = np.asarray(valid, dtype=bool)
    vmask_arr = np.ascontiguousarray(valid_bool, dtype=np.float64)
    out_arr = np.ascontiguousarray(
        np.where(valid_bool, np.asarray(data, dtype=np.float64), 0.0))
    cdef Py_ssize_t h = out_arr.shape[0], w = out_arr.shape[1]
    cnt_arr = np.empty((h, w), dtype=np.float64)
    tmp_arr = np.empty((h, w), dtype=np.float64)
    s_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] vo = out_arr, vt = tmp_arr, vs = s_arr, vc = cnt_arr
    cdef const double[:, ::1] vv = vmask_arr
    cdef Py_ssize_t i, j, p
    with nogil:
        _row_box_sum(vv, vt, r)
        _col_box_sum(vt, vc, r)
        for p in range(passes):
            for i in range(h):
                for j in range(w):
                    vs[i, j] = vo[i, j] * vv[i, j]
            _row_box_sum(vs, vt, r)
            _col_box_sum(vt, vs, r)
            for i in range(h):
                for j in range(w):
                    if vc[i, j] > 0 and vv[i, j] != 0.0:
                        vo[i, j] = vs[i, j] / vc[i, j]
                    else:
                        vo[i, j] = 0.0
    return out_arr


# ------------------------------------------------------------ peak candidates

def local_max_candidates(data, mask):
    """Pixels inside ``mask`` that are >= every in-bounds 8-neighbor, row-major."""
    cdef const double[:, ::1] dv = np.ascontiguousarray(data, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] mv = np.ascontiguousarray(
        np.asarray(mask, dtype=bool)).view(np.uint8)
    cdef Py_ssize_t h = dv.shape[0], w = dv.shape[1]
    rows_arr = np.empty(h * w, dtype=np.int64)
    cols_arr = np.empty(h * w, dtype=np.int64)
    cdef cnp.int64_t[::1] rv = rows_arr, cv = cols_arr
    cdef Py_ssize_t i, j, ni, nj, n = 0
    cdef int dr, dc, ok
    cdef double v
    with nogil:
        for i in range(h):
            for j in range(w):
                if not mv[i, j]:
                    continue
                v = dv[i, j]
                ok = 1
                for dr in range(-1, 2):
                    ni = i + dr
                    if ni < 0 or ni >= h:
                        continue
                    for dc in range(-1, 2):
                        if dr == 0 and dc == 0:
                            continue
                        nj = j + dc
                        if nj < 0 or nj >= w:
                            continue
                        if v < dv[ni, nj]:
                            ok = 0
                            break
                    if not ok:
                        break
                if ok:
                    rv[n] = i
                    cv[n] = j
                    n += 1
    return rows_arr[:n].copy(), cols_arr[:n].copy()


def greedy_nms(rows, cols, order, int min_dist):
    """Greedy minimum-distance suppression; exact integer distance test."""
    cdef const cnp.int64_t[::1] rv = np.ascontiguousarray(rows, dtype=np.int64)
    cdef const cnp.int64_t[::1] cv = np.ascontiguousarray(cols, dtype=np.int64)
    cdef const cnp.int64_t[::1] ov = np.ascontiguousarray(order, dtype=np.int64)
    cdef Py_ssize_t n = ov.shape[0]
    out_arr = np.empty(n, dtype=np.int64)
    acc_r = np.empty(n, dtype=np.int64)
    acc_c = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] outv = out_arr, arv = acc_r, acv = acc_c
    cdef Py_ssize_t i, k, n_acc = 0
    cdef cnp.int64_t r, c, dr, dc, min_d2 = (<cnp.int64_t> min_dist) * min_dist
    cdef int keep
    with nogil:
        for i in range(n):
            r = rv[ov[i]]
            c = cv[ov[i]]
            keep = 1
            for k in range(n_acc):
                dr = arv[k] - r
                dc = acv[k] - c
                if dr * dr + dc * dc < min_d2:
                    keep = 0
                    break
            if keep:
                arv[n_acc] = r
                acv[n_acc] = c
                outv[n_acc] = ov[i]
                n_acc += 1
    return out_arr[:n_acc].copy()


# -------------------------------------------------------------- compact flood

cdef struct Heap:
    double *prio
    long long *age
    int *idx
    int *lab
    Py_ssize_t size
    Py_ssize_t cap


cdef inline int _heap_less(Heap *hp, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    if hp.prio[a] != hp.prio[b]:
        return hp.prio[a] < hp.prio[b]
    return hp.age[a] < hp.age[b]


cdef inline void _heap_swap(Heap *hp, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef double p = hp.prio[a]
    cdef long long g = hp.age[a]
    cdef int i = hp.idx[a], l = hp.lab[a]
    hp.prio[a] = hp.prio[b]; hp.age[a] = hp.age[b]; hp.idx[a] = hp.idx[b]; hp.lab[a] = hp.lab[b]
    hp.prio[b] = p; hp.age[b] = g; hp.idx[b] = i; hp.lab[b] = l


cdef int _heap_push(Heap *hp, double prio, long long age, int idx, int lab) noexcept nogil:
    cdef Py_ssize_t i, parent
    if hp.size == hp.cap:
        hp.cap *= 2
        hp.prio = <double *> realloc(hp.prio, hp.cap * sizeof(double))
        hp.age = <long long *> realloc(hp.age, hp.cap * sizeof(long long))
        hp.idx = <int *> realloc(hp.idx, hp.cap * sizeof(int))
        hp.lab = <int *> realloc(hp.lab, hp.cap * sizeof(int))
        if hp.prio == NULL or hp.age == NULL or hp.idx == NULL or hp.lab == NULL:
            return -1
    i = hp.size
    hp.prio[i] = prio; hp.age[i] = age; hp.idx[i] = idx; hp.lab[i] = lab
    hp.size += 1
    while i > 0:
        parent = (i - 1) >> 1
        if _heap_less(hp, i, parent):
            _heap_swap(hp, i, parent)
            i = parent
        else:
            break
    return 0


cdef void _heap_pop(Heap *hp) noexcept nogil:
    cdef Py_ssize_t i = 0, left, right, smallest
    hp.size -= 1
    if hp.size == 0:
        return
    _heap_swap(hp, 0, hp.size)
    while True:
        left = 2 * i + 1
        right = left + 1
        smallest = i
        if left < hp.size and _heap_less(hp, left, smallest):
            smallest = left
        if right < hp.size and _heap_less(hp, right, smallest):
            smallest = right
        if smallest == i:
            break
        _heap_swap(hp, i, smallest)
        i = smallest


def compact_flood(height, valid, marker_rows, marker_cols,
                  double compactness, int connectivity, double maxdim):
    """Marker-seeded priority flood; see the fallback backend for semantics."""
    cdef const double[:, ::1] hv = np.ascontiguousarray(height, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] vv = np.ascontiguousarray(
        np.asarray(valid, dtype=bool)).view(np.uint8)
    cdef const cnp.int64_t[::1] mrv = np.ascontiguousarray(marker_rows, dtype=np.int64)
    cdef const cnp.int64_t[::1] mcv = np.ascontiguousarray(marker_cols, dtype=np.int64)
    cdef Py_ssize_t h = hv.shape[0], w = hv.shape[1]
    cdef Py_ssize_t n_mark = mrv.shape[0]
    labels_arr = np.zeros(h * w, dtype=np.int32)
    cdef cnp.int32_t[::1] lv = labels_arr

    # neighbor offsets in push order: N, E, S, W, NE, SE, SW, NW
    cdef int[8] off_r = [-1, 0, 1, 0, -1, 1, 1, -1]
    cdef int[8] off_c = [0, 1, 0, -1, 1, 1, -1, -1]
    cdef int n_off = 4 if connectivity == 4 else 8

    cdef Heap hp
    hp.cap = 1024 if 4 * n_mark < 1024 else 4 * n_mark
    hp.size = 0
    hp.prio = <double *> malloc(hp.cap * sizeof(double))
    hp.age = <long long *> malloc(hp.cap * sizeof(long long))
    hp.idx = <int *> malloc(hp.cap * sizeof(int))
    hp.lab = <int *> malloc(hp.cap * sizeof(int))
    if hp.prio == NULL or hp.age == NULL or hp.idx == NULL or hp.lab == NULL:
        free(hp.prio); free(hp.age); free(hp.idx); free(hp.lab)
        raise MemoryError()

    cdef long long age = 0
    cdef Py_ssize_t k, r, c, nr, nc
    cdef int lab, failed = 0, o
    cdef double prio, d, dr, dc
    with nogil:
        for k in range(n_mark):
            r = mrv[k]
            c = mcv[k]
            if _heap_push(&hp, hv[r, c], age, <int> (r * w + c), <int> (k + 1)) < 0:
                failed = 1
                break
            age += 1
        while hp.size > 0 and not failed:
            r = hp.idx[0] // w
            c = hp.idx[0] % w
            lab = hp.lab[0]
            _heap_pop(&hp)
            if lv[r * w + c] != 0:
                continue
            lv[r * w + c] = lab
            for o in range(n_off):
                nr = r + off_r[o]
                nc = c + off_c[o]
                if nr < 0 or nr >= h or nc < 0 or nc >= w:
                    continue
                if lv[nr * w + nc] != 0 or not vv[nr, nc]:
                    continue
                dr = <double> (nr - mrv[lab - 1])
                dc = <double> (nc - mcv[lab - 1])
                d = sqrt(dr * dr + dc * dc)
                prio = hv[nr, nc] + compactness * d / maxdim
                if _heap_push(&hp, prio, age, <int> (nr * w + nc), lab) < 0:
                    failed = 1
                    break
                age += 1
    free(hp.prio); free(hp.age); free(hp.idx); free(hp.lab)
    if failed:
        raise MemoryError()
    return labels_arr.reshape(h, w)


# -------------------------------------------------------- component labeling

def label_components8(mask):
    """8-connected component labeling, labels in first-encounter raster order."""
    cdef const cnp.uint8_t[:, ::1] mv = np.ascontiguousarray(
        np.asarray(mask, dtype=bool)).view(np.uint8)
    cdef Py_ssize_t h = mv.shape[0], w = mv.shape[1]
    labels_arr = np.zeros((h, w), dtype=np.int32)
    queue_arr = np.empty(h * w, dtype=np.int64)
    cdef cnp.int32_t[:, ::1] lv = labels_arr
    cdef cnp.int64_t[::1] qv = queue_arr
    cdef int[8] off_r = [-1, 0, 1, 0, -1, 1, 1, -1]
    cdef int[8] off_c = [0, 1, 0, -1, 1, 1, -1, -1]
    cdef Py_ssize_t i, j, r, c, nr, nc, head, tail
    cdef int o
    cdef cnp.int32_t nxt = 0
    with nogil:
        for i in range(h):
            for j in range(w):
                if not mv[i, j] or lv[i, j] != 0:
                    continue
                nxt += 1
                lv[i, j] = nxt
                head = 0
                tail = 0
                qv[tail] = i * w + j
                tail += 1
                while head < tail:
                    r = qv[head] // w
                    c = qv[head] % w
                    head += 1
                    for o in range(8):
                        nr = r + off_r[o]
                        nc = c + off_c[o]
                        if nr < 0 or nr >= h or nc < 0 or nc >= w:
                            continue
                        if mv[nr, nc] and lv[nr, nc] == 0:
                            lv[nr, nc] = nxt
                            qv[tail] = nr * w + nc
                            tail += 1
    return labels_arr, int(nxt)
