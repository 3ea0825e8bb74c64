"""Shared test oracles, independent of the production code paths."""
import numpy as np


def brute_force_split_oracle(X, y):
    """Exhaustive (feature, midpoint) search minimizing weighted child Gini.

    Enumerates every candidate, partitions with a mask and recounts classes
    from scratch; only the impurity expression (from integer counts) is
    shared with the implementation so exact tie comparison is meaningful.
    Returns (feature, threshold, impurity) or None.
    """
    X = np.asarray(X, dtype=np.float64)
    m = len(y)
    classes = sorted(set(int(v) for v in y))
    enc = {c: i for i, c in enumerate(classes)}
    yy = np.array([enc[int(v)] for v in y])
    cnt_tot = np.bincount(yy, minlength=len(classes)).astype(np.int64)
    parent = 1.0 - int((cnt_tot ** 2).sum()) / (float(m) * float(m))
    best = None
    for j in range(X.shape[1]):
        vals = sorted(set(X[:, j].tolist()))
        for lo, hi in zip(vals, vals[1:]):
            thr = 0.5 * (lo + hi)
            if thr == hi:
                thr = lo
            mask = X[:, j] <= thr
            nl, nr = int(mask.sum()), int((~mask).sum())
            cl = np.bincount(yy[mask], minlength=len(classes)).astype(np.int64)
            cr = np.bincount(yy[~mask], minlength=len(classes)).astype(np.int64)
            imp = 1.0 - (int((cl ** 2).sum()) / float(nl)
                         + int((cr ** 2).sum()) / float(nr)) / float(m)
            if best is None or imp < best[2]:
                best = (j, thr, imp)
    if best is None or not best[2] < parent:
        return None
    return best
