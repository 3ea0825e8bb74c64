# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: grid ray traversal, batch path-gain, CART split search.

Operation-for-operation twin of ``pyref.py``. Every floating-point
expression keeps the same shape and evaluation order as the reference so
that (with FP contraction disabled at compile time) both backends return
bit-identical results. Change the two files together.
"""
from libc.math cimport sqrt, log10, atan2, fmod, isnan, floor, INFINITY, M_PI
from libc.stdlib cimport malloc, free, qsort
from libc.string cimport memset

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


cdef struct ValLab:
    double v
    int y


cdef int _cmp_pair(const void* a, const void* b) noexcept nogil:
    cdef double av = (<const ValLab*> a).v
    cdef double bv = (<const ValLab*> b).v
    if av < bv:
        return -1
    if av > bv:
        return 1
    return 0


cdef Py_ssize_t _traverse(const short[:, ::1] codes, double cell_m,
                          double ax, double ay, double bx, double by,
                          int* out_codes, double* out_lens) noexcept nogil:
    cdef Py_ssize_t n_rows = codes.shape[0]
    cdef Py_ssize_t n_cols = codes.shape[1]
    cdef double dx = bx - ax
    cdef double dy = by - ay
    cdef double total = sqrt(dx * dx + dy * dy)
    cdef Py_ssize_t count = 0
    if total == 0.0:
        return 0

    cdef Py_ssize_t ix = <Py_ssize_t> floor(ax / cell_m)
    cdef Py_ssize_t iy = <Py_ssize_t> floor(ay / cell_m)
    if ix < 0:
        ix = 0
    if ix > n_cols - 1:
        ix = n_cols - 1
    if iy < 0:
        iy = 0
    if iy > n_rows - 1:
        iy = n_rows - 1

    cdef int step_x, step_y
    cdef double t_max_x, t_max_y, t_delta_x, t_delta_y
    if dx > 0.0:
        step_x = 1
        t_max_x = ((ix + 1) * cell_m - ax) / dx
        t_delta_x = cell_m / dx
    elif dx < 0.0:
        step_x = -1
        t_max_x = (ix * cell_m - ax) / dx
        t_delta_x = -cell_m / dx
    else:
        step_x = 0
        t_max_x = INFINITY
        t_delta_x = INFINITY

    if dy > 0.0:
        step_y = 1
        t_max_y = ((iy + 1) * cell_m - ay) / dy
        t_delta_y = cell_m / dy
    elif dy < 0.0:
        step_y = -1
        t_max_y = (iy * cell_m - ay) / dy
        t_delta_y = -cell_m / dy
    else:
        step_y = 0
        t_max_y = INFINITY
        t_delta_y = INFINITY

    cdef double t_prev = 0.0
    cdef double t_hit, chord
    cdef Py_ssize_t max_steps = 2 * (n_rows + n_cols) + 4
    cdef Py_ssize_t it
    for it in range(max_steps):
        if t_max_x < t_max_y:
            t_hit = t_max_x
        else:
            t_hit = t_max_y
        if t_hit >= 1.0:
            chord = (1.0 - t_prev) * total
            if chord > 0.0:
                out_codes[count] = <int> codes[iy, ix]
                out_lens[count] = chord
                count += 1
            break
        chord = (t_hit - t_prev) * total
        if chord > 0.0:
            out_codes[count] = <int> codes[iy, ix]
            out_lens[count] = chord
            count += 1
        t_prev = t_hit
        if t_max_x < t_max_y:
            t_max_x = t_max_x + t_delta_x
            ix = ix + step_x
        else:
            t_max_y = t_max_y + t_delta_y
            iy = iy + step_y
        if ix < 0:
            ix = 0
        if ix > n_cols - 1:
            ix = n_cols - 1
        if iy < 0:
            iy = 0
        if iy > n_rows - 1:
            iy = n_rows - 1
    return count


def traverse_segment(const short[:, ::1] codes, double cell_m,
                     double ax, double ay, double bx, double by):
    """Cells crossed by the 2-D segment a->b with per-cell chord lengths."""
    cdef Py_ssize_t cap = 2 * (codes.shape[0] + codes.shape[1]) + 4
    cdef int* cbuf = <int*> malloc(cap * sizeof(int))
    cdef double* lbuf = <double*> malloc(cap * sizeof(double))
    if cbuf == NULL or lbuf == NULL:
        free(cbuf)
        free(lbuf)
        raise MemoryError()
    cdef Py_ssize_t n
    try:
        n = _traverse(codes, cell_m, ax, ay, bx, by, cbuf, lbuf)
        out_codes = np.empty(n, dtype=np.int32)
        out_lens = np.empty(n, dtype=np.float64)
        for i in range(n):
            out_codes[i] = cbuf[i]
            out_lens[i] = lbuf[i]
        return out_codes, out_lens
    finally:
        free(cbuf)
        free(lbuf)


cdef double _excess_along(const short[:, ::1] codes, double cell_m,
                          const double[:] excess_lookup,
                          double ax, double ay, double bx, double by,
                          int* cbuf, double* lbuf) noexcept nogil:
    cdef Py_ssize_t n = _traverse(codes, cell_m, ax, ay, bx, by, cbuf, lbuf)
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        acc = acc + excess_lookup[cbuf[i]] * lbuf[i]
    return acc


def gain_matrix(const short[:, ::1] codes, double cell_m,
                const double[:] exp_lookup, const double[:] excess_lookup,
                const double[:] sx, const double[:] sy, const double[:] sz,
                const double[:] s_az, const double[:] fspl,
                const double[:] ue_x, const double[:] ue_y, double ue_z,
                double d0, double min_gain, const double[:, ::1] shadow):
    """Path gains (dB) for every (drop, station) pair; NaN azimuth = omni."""
    cdef Py_ssize_t n_drops = ue_x.shape[0]
    cdef Py_ssize_t n_stations = sx.shape[0]
    out_arr = np.empty((n_drops, n_stations), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t cap = 2 * (codes.shape[0] + codes.shape[1]) + 4
    cdef int* cbuf = <int*> malloc(cap * sizeof(int))
    cdef double* lbuf = <double*> malloc(cap * sizeof(double))
    if cbuf == NULL or lbuf == NULL:
        free(cbuf)
        free(lbuf)
        raise MemoryError()
    cdef double deg_per_rad = 180.0 / M_PI
    cdef Py_ssize_t l, k, ix, iy
    cdef double ux, uy, n_ue, dx, dy, dz, d3, d_eff, pl, az
    cdef double bearing, delta, t, sector_loss, g
    try:
        with nogil:
            for l in range(n_drops):
                ux = ue_x[l]
                uy = ue_y[l]
                iy = <Py_ssize_t> floor(uy / cell_m)
                ix = <Py_ssize_t> floor(ux / cell_m)
                n_ue = exp_lookup[codes[iy, ix]]
                for k in range(n_stations):
                    dx = sx[k] - ux
                    dy = sy[k] - uy
                    dz = sz[k] - ue_z
                    d3 = sqrt(dx * dx + dy * dy + dz * dz)
                    if d3 > d0:
                        d_eff = d3
                    else:
                        d_eff = d0
                    pl = fspl[k] + 10.0 * n_ue * log10(d_eff / d0)
                    pl = pl + _excess_along(codes, cell_m, excess_lookup,
                                            ux, uy, sx[k], sy[k], cbuf, lbuf)
                    az = s_az[k]
                    if not isnan(az):
                        bearing = atan2(-dy, -dx) * deg_per_rad
                        delta = fmod(bearing - az, 360.0)
                        if delta > 180.0:
                            delta = delta - 360.0
                        elif delta < -180.0:
                            delta = delta + 360.0
                        t = delta / 65.0
                        sector_loss = 12.0 * (t * t)
                        if sector_loss > 30.0:
                            sector_loss = 30.0
                        pl = pl + sector_loss
                    g = shadow[l, k] - pl
                    if g < min_gain:
                        g = min_gain
                    out[l, k] = g
    finally:
        free(cbuf)
        free(lbuf)
    return out_arr


def best_split(const double[:, ::1] X, const int[:] y, int n_classes):
    """Best (feature, threshold) by weighted child Gini over an (m, f) block.

    Same candidate set, tie-breaks and impurity expression as the reference
    implementation; see pyref.best_split.
    """
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t n_feat = X.shape[1]
    cdef ValLab* pairs = <ValLab*> malloc(m * sizeof(ValLab))
    cdef long long* cnt_tot = <long long*> malloc(n_classes * sizeof(long long))
    cdef long long* cnt_l = <long long*> malloc(n_classes * sizeof(long long))
    cdef long long* cnt_r = <long long*> malloc(n_classes * sizeof(long long))
    if pairs == NULL or cnt_tot == NULL or cnt_l == NULL or cnt_r == NULL:
        free(pairs)
        free(cnt_tot)
        free(cnt_l)
        free(cnt_r)
        raise MemoryError()

    cdef long long sumsq_tot = 0
    cdef long long ssl, ssr
    cdef double m_f = <double> m
    cdef double parent_imp, best_imp, imp, nl, nr, lo, hi, thr, best_thr
    cdef Py_ssize_t i, j, c
    cdef Py_ssize_t best_col = -1
    cdef int found = 0
    try:
        with nogil:
            memset(cnt_tot, 0, n_classes * sizeof(long long))
            for i in range(m):
                cnt_tot[y[i]] += 1
            for c in range(n_classes):
                sumsq_tot += cnt_tot[c] * cnt_tot[c]
            parent_imp = 1.0 - (<double> sumsq_tot) / (m_f * m_f)

            best_imp = INFINITY
            best_thr = 0.0
            for j in range(n_feat):
                for i in range(m):
                    pairs[i].v = X[i, j]
                    pairs[i].y = y[i]
                qsort(pairs, m, sizeof(ValLab), _cmp_pair)
                if pairs[0].v == pairs[m - 1].v:
                    continue
                memset(cnt_l, 0, n_classes * sizeof(long long))
                for c in range(n_classes):
                    cnt_r[c] = cnt_tot[c]
                ssl = 0
                ssr = sumsq_tot
                for i in range(1, m):
                    c = pairs[i - 1].y
                    ssl += 2 * cnt_l[c] + 1
                    cnt_l[c] += 1
                    ssr += 1 - 2 * cnt_r[c]
                    cnt_r[c] -= 1
                    if pairs[i].v != pairs[i - 1].v:
                        nl = <double> i
                        nr = m_f - (<double> i)
                        imp = 1.0 - ((<double> ssl) / nl + (<double> ssr) / nr) / m_f
                        if imp < best_imp:
                            lo = pairs[i - 1].v
                            hi = pairs[i].v
                            thr = 0.5 * (lo + hi)
                            if thr == hi:
                                thr = lo
                            best_imp = imp
                            best_thr = thr
                            best_col = j
            if best_col >= 0 and best_imp < parent_imp:
                found = 1
    finally:
        free(pairs)
        free(cnt_tot)
        free(cnt_l)
        free(cnt_r)
    if not found:
        return (-1, 0.0, parent_imp, 0)
    return (<int> best_col, best_thr, best_imp, 1)


def tree_predict(const int[:] feature, const double[:] threshold,
                 const int[:] left, const int[:] right,
                 const int[:] leaf_class, const double[:, ::1] X):
    """Leaf class index for every row of X, descending one flat-array tree."""
    cdef Py_ssize_t n_rows = X.shape[0]
    out_arr = np.empty(n_rows, dtype=np.int32)
    cdef int[:] out = out_arr
    cdef Py_ssize_t i
    cdef int node
    with nogil:
        for i in range(n_rows):
            node = 0
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] = leaf_class[node]
    return out_arr
