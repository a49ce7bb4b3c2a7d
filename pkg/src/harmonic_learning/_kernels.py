"""Compiled inner loops for the flow integrator and the discrete schemes.

Profiles are flattened into one vector; player ``i`` owns the slice
``offsets[i]:offsets[i + 1]``. ``index[a, j]`` is player ``j``'s action in the
``a``-th pure profile (row-major), and ``utility[i, a]`` the matching payoff.
Regularizer kinds are coded 0 (entropic) and 1 (euclidean).
"""
import numpy as np
from numba import njit

OK = 0
NONFINITE = 1
DIVERGED = 2


def flatten_game(game):
    counts = game.action_counts
    index = np.array(list(np.ndindex(*counts)), dtype=np.int64).reshape(-1, len(counts))
    utility = np.ascontiguousarray(game.payoffs.reshape(game.num_players, -1))
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return utility, index, offsets


@njit(cache=True)
def field(x, utility, index, offsets, out):
    n_players = index.shape[1]
    out[:] = 0.0
    for a in range(index.shape[0]):
        for i in range(n_players):
            p = utility[i, a]
            if p == 0.0:
                continue
            for j in range(n_players):
                if j != i:
                    p *= x[offsets[j] + index[a, j]]
            out[offsets[i] + index[a, i]] += p


@njit(cache=True)
def mirror(y, kinds, offsets, out):
    for i in range(kinds.shape[0]):
        lo = offsets[i]
        hi = offsets[i + 1]
        if kinds[i] == 0:
            top = y[lo]
            for k in range(lo + 1, hi):
                if y[k] > top:
                    top = y[k]
            total = 0.0
            for k in range(lo, hi):
                out[k] = np.exp(y[k] - top)
                total += out[k]
            for k in range(lo, hi):
                out[k] /= total
        else:
            u = np.sort(y[lo:hi])[::-1]
            css = 0.0
            theta = 0.0
            for k in range(hi - lo):
                css += u[k]
                t = (css - 1.0) / (k + 1)
                if u[k] - t > 0.0:
                    theta = t
            for k in range(lo, hi):
                out[k] = max(y[k] - theta, 0.0)


@njit(cache=True)
def _rhs(y, utility, index, offsets, kinds, xbuf, out):
    mirror(y, kinds, offsets, xbuf)
    field(xbuf, utility, index, offsets, out)


@njit(cache=True)
def rk4(y0, dt, steps, utility, index, offsets, kinds, ys, xs):
    """Fixed-step RK4 on dy/dt = v(Q(y)); fills ``ys``/``xs`` with steps+1 rows.

    Returns the number of completed steps and a status code.
    """
    n = y0.shape[0]
    y = y0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)
    xbuf = np.empty(n)
    ys[0] = y
    mirror(y, kinds, offsets, xs[0])
    for s in range(steps):
        _rhs(y, utility, index, offsets, kinds, xbuf, k1)
        for k in range(n):
            tmp[k] = y[k] + 0.5 * dt * k1[k]
        _rhs(tmp, utility, index, offsets, kinds, xbuf, k2)
        for k in range(n):
            tmp[k] = y[k] + 0.5 * dt * k2[k]
        _rhs(tmp, utility, index, offsets, kinds, xbuf, k3)
        for k in range(n):
            tmp[k] = y[k] + dt * k3[k]
        _rhs(tmp, utility, index, offsets, kinds, xbuf, k4)
        for k in range(n):
            y[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
        if not np.all(np.isfinite(y)):
            return s, NONFINITE
        ys[s + 1] = y
        mirror(y, kinds, offsets, xs[s + 1])
    return steps, OK


@njit(cache=True)
def pin(y, shift, offsets):
    """Move each player's first score into ``shift`` so that block starts at 0."""
    for i in range(shift.shape[0]):
        lo = offsets[i]
        c = y[lo]
        shift[i] += c
        for k in range(lo, offsets[i + 1]):
            y[k] -= c
        y[lo] = 0.0


@njit(cache=True)
def ftrl_plus(y, shift, x, v_prev, etas, w_cur, w_past, utility, index, offsets, kinds,
              steps, stop_gap, guard,
              base_y, base_shift, lead_y, lead_x, base_x, signal, lead_signal, gaps):
    """Run up to ``steps`` iterations of the extrapolated scheme in place.

    ``y``/``x`` hold the current base score and state, ``v_prev`` the field at the
    previous leading state. Per-player weights (w_cur, w_past) on v(X_n) and
    v(X_{n-1/2}) select the mode: (0, 0) vanilla, (1, 0) extra, (0, 1) optimistic.

    Scores are kept pinned (first entry of every block is 0) with the removed
    constants accumulated in ``shift``; the choice map ignores such constants,
    and pinning keeps the scores small, so updates lose no precision to a
    growing common offset. Leading scores are stored relative to the same shift
    as the base score they extrapolate from.
    Returns (steps done, field evaluations, status).
    """
    n_players = kinds.shape[0]
    n = y.shape[0]
    need_cur = False
    all_vanilla = True
    for i in range(n_players):
        if w_cur[i] != 0.0:
            need_cur = True
        if w_cur[i] != 0.0 or w_past[i] != 0.0:
            all_vanilla = False
    v_cur = np.zeros(n)
    g = np.empty(n)
    yl = np.empty(n)
    xl = np.empty(n)
    vl = np.empty(n)
    evals = 0
    for s in range(steps):
        base_y[s] = y
        base_shift[s] = shift
        base_x[s] = x
        if need_cur:
            field(x, utility, index, offsets, v_cur)
            evals += 1
        for i in range(n_players):
            for k in range(offsets[i], offsets[i + 1]):
                g[k] = w_cur[i] * v_cur[k] + w_past[i] * v_prev[k]
                yl[k] = y[k] + etas[i] * g[k]
        if all_vanilla:
            xl[:] = x
        else:
            mirror(yl, kinds, offsets, xl)
        field(xl, utility, index, offsets, vl)
        evals += 1
        if not np.all(np.isfinite(vl)):
            return s, evals, NONFINITE

        gap = 0.0
        for i in range(n_players):
            best = vl[offsets[i]]
            mean = 0.0
            for k in range(offsets[i], offsets[i + 1]):
                if vl[k] > best:
                    best = vl[k]
                mean += vl[k] * xl[k]
            if best - mean > gap:
                gap = best - mean

        lead_y[s] = yl
        lead_x[s] = xl
        signal[s] = g
        lead_signal[s] = vl
        gaps[s] = gap

        for i in range(n_players):
            for k in range(offsets[i], offsets[i + 1]):
                y[k] += etas[i] * vl[k]
        v_prev[:] = vl
        if not np.all(np.isfinite(y)):
            return s + 1, evals, NONFINITE
        pin(y, shift, offsets)
        big = 0.0
        for k in range(n):
            if abs(y[k]) > big:
                big = abs(y[k])
        mirror(y, kinds, offsets, x)
        if big > guard:
            return s + 1, evals, DIVERGED
        if gap < stop_gap:
            return s + 1, evals, OK
    return steps, evals, OK
