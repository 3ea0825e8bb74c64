"""Pure-Python kernels: grid ray traversal, batch path-gain, CART split search.

This module is the reference implementation of the hot loops. The compiled
twin in ``_speedups.pyx`` performs the same floating-point operations in the
same order (and is built with FP contraction disabled), so both backends
produce bit-identical results; the parity tests assert exact equality.

Keep the arithmetic here expression-for-expression in sync with the .pyx
file. In particular: scalar ``math`` calls (libm), no ``x ** 2`` (written as
``x * x``), and sequential accumulation order along rays.
"""
import math

import numpy as np

BACKEND_NAME = "python"


def traverse_segment(codes, cell_m, ax, ay, bx, by):
    """Cells crossed by the 2-D segment a->b with per-cell chord lengths.

    Amanatides-Woo stepping on the raster. Returns (codes, lengths) arrays;
    zero-length boundary touches are skipped and a == b yields empty arrays.
    Chord lengths telescope, so they sum to |a - b| up to rounding.
    """
    n_rows, n_cols = codes.shape[0], codes.shape[1]
    dx = bx - ax
    dy = by - ay
    total = math.sqrt(dx * dx + dy * dy)
    out_codes = []
    out_lens = []
    if total == 0.0:
        return (np.asarray(out_codes, dtype=np.int32),
                np.asarray(out_lens, dtype=np.float64))

    ix = int(math.floor(ax / cell_m))
    iy = int(math.floor(ay / cell_m))
    if ix < 0:
        ix = 0
    if ix > n_cols - 1:
        ix = n_cols - 1
    if iy < 0:
        iy = 0
    if iy > n_rows - 1:
        iy = n_rows - 1

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
        t_max_x = math.inf
        t_delta_x = math.inf

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
        t_max_y = math.inf
        t_delta_y = math.inf

    t_prev = 0.0
    max_steps = 2 * (n_rows + n_cols) + 4
    for _ in range(max_steps):
        if t_max_x < t_max_y:
            t_hit = t_max_x
        else:
            t_hit = t_max_y
        if t_hit >= 1.0:
            chord = (1.0 - t_prev) * total
            if chord > 0.0:
                out_codes.append(int(codes[iy, ix]))
                out_lens.append(chord)
            break
        chord = (t_hit - t_prev) * total
        if chord > 0.0:
            out_codes.append(int(codes[iy, ix]))
            out_lens.append(chord)
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

    return (np.asarray(out_codes, dtype=np.int32),
            np.asarray(out_lens, dtype=np.float64))


def _excess_along(codes, cell_m, excess_lookup, ax, ay, bx, by):
    """Sum of per-category obstruction loss (dB) along the 2-D segment."""
    cell_codes, lengths = traverse_segment(codes, cell_m, ax, ay, bx, by)
    acc = 0.0
    for i in range(len(cell_codes)):
        acc = acc + excess_lookup[cell_codes[i]] * lengths[i]
    return acc


def gain_matrix(codes, cell_m, exp_lookup, excess_lookup,
                sx, sy, sz, s_az, fspl, ue_x, ue_y, ue_z,
                d0, min_gain, shadow):
    """Path gains (dB) for every (drop, station) pair.

    ``s_az`` holds sector boresights in degrees with NaN meaning
    omnidirectional. ``shadow`` is the pre-drawn (L, K) shadowing matrix so
    the computation itself stays deterministic and RNG-free.
    """
    n_drops = len(ue_x)
    n_stations = len(sx)
    out = np.empty((n_drops, n_stations), dtype=np.float64)
    deg_per_rad = 180.0 / math.pi
    for l in range(n_drops):
        ux = float(ue_x[l])
        uy = float(ue_y[l])
        iy = int(math.floor(uy / cell_m))
        ix = int(math.floor(ux / cell_m))
        n_ue = float(exp_lookup[codes[iy, ix]])
        for k in range(n_stations):
            dx = float(sx[k]) - ux
            dy = float(sy[k]) - uy
            dz = float(sz[k]) - ue_z
            d3 = math.sqrt(dx * dx + dy * dy + dz * dz)
            if d3 > d0:
                d_eff = d3
            else:
                d_eff = d0
            pl = float(fspl[k]) + 10.0 * n_ue * math.log10(d_eff / d0)
            pl = pl + _excess_along(codes, cell_m, excess_lookup,
                                    ux, uy, float(sx[k]), float(sy[k]))
            az = float(s_az[k])
            if not math.isnan(az):
                bearing = math.atan2(-dy, -dx) * deg_per_rad
                delta = math.fmod(bearing - az, 360.0)
                if delta > 180.0:
                    delta = delta - 360.0
                elif delta < -180.0:
                    delta = delta + 360.0
                t = delta / 65.0
                sector_loss = 12.0 * (t * t)
                if sector_loss > 30.0:
                    sector_loss = 30.0
                pl = pl + sector_loss
            g = float(shadow[l, k]) - pl
            if g < min_gain:
                g = min_gain
            out[l, k] = g
    return out


def best_split(X, y, n_classes):
    """Best (feature, threshold) by weighted child Gini over an (m, f) block.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values of each column; ties break to the lower column index then lower
    threshold. Returns (col, threshold, weighted_impurity, found) with
    found == 0 when no candidate strictly reduces the parent impurity.

    Impurity is evaluated from integer class counts through one fixed float
    expression (1 - (ssl/nl + ssr/nr)/m) so equal inputs give equal floats in
    both backends and in the brute-force test oracle.
    """
    m = X.shape[0]
    n_feat = X.shape[1]
    cnt_tot = np.bincount(y, minlength=n_classes).astype(np.int64)
    sumsq_tot = int((cnt_tot * cnt_tot).sum())
    m_f = float(m)
    parent_imp = 1.0 - sumsq_tot / (m_f * m_f)

    best_col = -1
    best_thr = 0.0
    best_imp = math.inf
    class_ids = np.arange(n_classes)
    for j in range(n_feat):
        col = X[:, j]
        order = np.argsort(col, kind="stable")
        v = col[order]
        boundaries = np.nonzero(v[1:] != v[:-1])[0] + 1
        if boundaries.size == 0:
            continue
        yy = y[order]
        cum = np.cumsum(yy[:, None] == class_ids[None, :], axis=0,
                        dtype=np.int64)
        cnt_l = cum[boundaries - 1]
        cnt_r = cnt_tot[None, :] - cnt_l
        sumsq_l = (cnt_l * cnt_l).sum(axis=1)
        sumsq_r = (cnt_r * cnt_r).sum(axis=1)
        nl = boundaries.astype(np.float64)
        nr = m_f - nl
        imp = 1.0 - (sumsq_l / nl + sumsq_r / nr) / m_f
        k = int(np.argmin(imp))
        imp_k = float(imp[k])
        if imp_k < best_imp:
            b = int(boundaries[k])
            lo = float(v[b - 1])
            hi = float(v[b])
            thr = 0.5 * (lo + hi)
            if thr == hi:
                thr = lo
            best_col = j
            best_thr = thr
            best_imp = imp_k

    if best_col < 0 or not best_imp < parent_imp:
        return (-1, 0.0, parent_imp, 0)
    return (best_col, best_thr, best_imp, 1)


def tree_predict(feature, threshold, left, right, leaf_class, X):
    """Leaf class index for every row of X, descending one flat-array tree."""
    n_rows = X.shape[0]
    node = np.zeros(n_rows, dtype=np.int32)
    rows = np.arange(n_rows)
    while True:
        feat = feature[node]
        internal = feat >= 0
        if not internal.any():
            break
        idx = rows[internal]
        nd = node[internal]
        go_left = X[idx, feat[internal]] <= threshold[nd]
        node[idx] = np.where(go_left, left[nd], right[nd])
    return leaf_class[node].astype(np.int32)
