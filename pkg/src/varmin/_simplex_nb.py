"""Numba-jitted simplex phase kernel.

Mirrors _simplex_np.run_phase exactly (same pivot rules, same tie-breaking);
this flavor keeps the whole phase loop inside one nopython function.
"""

import numpy as np
from numba import njit

BASIC = 0
AT_LO = 1
AT_UP = 2
FREE_NB = 3

OPT = 0
UNBOUNDED = 1
ITER_LIMIT = 2

_DEGEN_EPS = 1e-11

NEG_INF = -np.inf
POS_INF = np.inf


@njit(cache=True)
def _run_phase_jit(T, d, value, status, basis, lo, up, dtol, ptol, bland_after, max_iter):
    m, N = T.shape
    iters = 0
    bland = False
    streak = 0
    while iters < max_iter:
        # pricing
        j = -1
        direction = 0
        best = dtol
        for col in range(N):
            st = status[col]
            if st == BASIC or lo[col] == up[col]:
                continue
            dj = d[col]
            if (st == AT_LO or st == FREE_NB) and dj < -dtol:
                if bland:
                    j = col
                    direction = 1
                    break
                if -dj > best:
                    best = -dj
                    j = col
                    direction = 1
            elif (st == AT_UP or st == FREE_NB) and dj > dtol:
                if bland:
                    j = col
                    direction = -1
                    break
                if dj > best:
                    best = dj
                    j = col
                    direction = -1
        if j < 0:
            return OPT, iters
        iters += 1

        # ratio test
        t_best = POS_INF
        r = -1
        for i in range(m):
            g = -direction * T[i, j]
            bcol = basis[i]
            t = POS_INF
            if g < -ptol:
                if lo[bcol] > NEG_INF:
                    t = (value[bcol] - lo[bcol]) / (-g)
            elif g > ptol:
                if up[bcol] < POS_INF:
                    t = (up[bcol] - value[bcol]) / g
            if t < 0.0:
                t = 0.0
            if t < t_best:
                t_best = t
                r = i
            elif bland and r >= 0 and t == t_best and t_best < POS_INF:
                # full Bland rule: among tied rows leave the smallest
                # variable index, which is what kills cycling
                if bcol < basis[r]:
                    r = i

        if lo[j] > NEG_INF and up[j] < POS_INF:
            t_flip = up[j] - lo[j]
        else:
            t_flip = POS_INF

        if t_flip <= t_best:
            if t_flip == POS_INF:
                return UNBOUNDED, iters
            value[j] += direction * t_flip
            status[j] = AT_UP if status[j] == AT_LO else AT_LO
            for i in range(m):
                value[basis[i]] -= direction * T[i, j] * t_flip
            streak = 0
            bland = False
            continue

        if t_best == POS_INF:
            return UNBOUNDED, iters

        value[j] += direction * t_best
        for i in range(m):
            value[basis[i]] -= direction * T[i, j] * t_best
        leave = basis[r]
        if -direction * T[r, j] < 0.0:
            value[leave] = lo[leave]
            status[leave] = AT_LO
        else:
            value[leave] = up[leave]
            status[leave] = AT_UP
        status[j] = BASIC
        basis[r] = j

        piv = T[r, j]
        for col in range(N):
            T[r, col] /= piv
        for i in range(m):
            if i == r:
                continue
            fac = T[i, j]
            if fac != 0.0:
                for col in range(N):
                    T[i, col] -= fac * T[r, col]
        dj = d[j]
        if dj != 0.0:
            for col in range(N):
                d[col] -= dj * T[r, col]
        for i in range(m):
            T[i, j] = 0.0
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


def run_phase(T, d, value, status, basis, lo, up, dtol, ptol, bland_after, max_iter):
    """Run one simplex phase on the current tableau. Returns (code, iterations)."""
    code, iters = _run_phase_jit(T, d, value, status, basis, lo, up,
                                 dtol, ptol, bland_after, max_iter)
    return int(code), int(iters)
