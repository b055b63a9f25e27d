"""Pure-numpy simplex phase kernels.

Same pivoting rules as the numba flavor in _simplex_nb; selected when
VARMIN_NO_NUMBA is set or numba is unavailable. All arrays are modified
in place.
"""

import numpy as np

BASIC = 0
AT_LO = 1
AT_UP = 2
FREE_NB = 3

OPT = 0
UNBOUNDED = 1
ITER_LIMIT = 2

_DEGEN_EPS = 1e-11


def _price_dantzig(d, status, lo, up, dtol):
    movable = lo != up
    can_inc = ((status == AT_LO) | (status == FREE_NB)) & movable & (d < -dtol)
    can_dec = ((status == AT_UP) | (status == FREE_NB)) & movable & (d > dtol)
    score = np.where(can_inc, -d, 0.0)
    score = np.maximum(score, np.where(can_dec, d, 0.0))
    j = int(np.argmax(score))
    if score[j] <= dtol:
        return -1, 0
    return j, (1 if can_inc[j] else -1)


def _price_bland(d, status, lo, up, dtol):
    movable = lo != up
    can_inc = ((status == AT_LO) | (status == FREE_NB)) & movable & (d < -dtol)
    can_dec = ((status == AT_UP) | (status == FREE_NB)) & movable & (d > dtol)
    eligible = can_inc | can_dec
    if not eligible.any():
        return -1, 0
    j = int(np.argmax(eligible))
    return j, (1 if can_inc[j] else -1)


def run_phase(T, d, value, status, basis, lo, up, dtol, ptol, bland_after, max_iter):
    """Run one simplex phase on the current tableau. Returns (code, iterations)."""
    m = T.shape[0]
    iters = 0
    bland = False
    streak = 0
    while iters < max_iter:
        if bland:
            j, direction = _price_bland(d, status, lo, up, dtol)
        else:
            j, direction = _price_dantzig(d, status, lo, up, dtol)
        if j < 0:
            return OPT, iters
        iters += 1

        w = T[:, j]
        g = -direction * w
        bcols = basis
        blo = lo[bcols]
        bup = up[bcols]
        bval = value[bcols]
        dist = np.full(m, np.inf)
        down = (g < -ptol) & (blo > -np.inf)
        if down.any():
            dist[down] = (bval[down] - blo[down]) / (-g[down])
        upm = (g > ptol) & (bup < np.inf)
        if upm.any():
            dist[upm] = (bup[upm] - bval[upm]) / g[upm]
        np.maximum(dist, 0.0, out=dist)
        if m > 0:
            r = int(np.argmin(dist))
            t_best = dist[r]
            if bland and np.isfinite(t_best):
                # full Bland rule: among tied rows leave the smallest
                # variable index, which is what kills cycling
                ties = np.flatnonzero(dist == t_best)
                r = int(ties[np.argmin(bcols[ties])])
        else:
            r, t_best = -1, np.inf

        t_flip = up[j] - lo[j] if (lo[j] > -np.inf and up[j] < np.inf) else np.inf

        if t_flip <= t_best:
            if not np.isfinite(t_flip):
                return UNBOUNDED, iters
            value[j] += direction * t_flip
            status[j] = AT_UP if status[j] == AT_LO else AT_LO
            value[bcols] = bval - direction * w * t_flip
            streak = 0
            bland = False
            continue

        if not np.isfinite(t_best):
            return UNBOUNDED, iters

        value[j] += direction * t_best
        value[bcols] = bval - direction * w * t_best
        leave = basis[r]
        if g[r] < 0.0:
            value[leave] = lo[leave]
            status[leave] = AT_LO
        else:
            value[leave] = up[leave]
            status[leave] = AT_UP
        status[j] = BASIC
        basis[r] = j

        piv = T[r, j]
        T[r, :] /= piv
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r, :])
        d -= d[j] * T[r, :]
        T[:, j] = 0.0
        T[r, j] = 1.0
        d[j] = 0.0

        if t_best <= _DEGEN_EPS:
            streak += 1
            if streak >= bland_after:
                bland = True
        else:
            streak = 0
            bland = False
    return ITER_LIMIT, iters
