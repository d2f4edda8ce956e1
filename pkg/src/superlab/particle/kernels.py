"""Compiled inner loops of the two particle engines.

The kernels never draw random numbers themselves: they consume buffers of
uniforms and standard normals filled from the per-path numpy stream, and
return ``NEED_RNG`` when a buffer runs low.  This keeps every path
reproducible from its ``(seed, path_id)`` key regardless of threading.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

DONE = 0
NEED_RNG = 1
GROW = 2
CAPACITY = 3
P2_RANGE = 4
BOUND_VIOLATED = 5

UNIFORMS_PER_EVENT = 5


@njit(cache=True, nogil=True)
def ou_coeffs(sign, c, s):
    """``(F, V)``: ``xi_s = F x + sqrt(V) Z`` for the OU with drift ``sign * c``."""
    r = sign * c
    F = math.exp(r * s)
    V = math.expm1(2.0 * r * s) / (2.0 * r)
    return F, V


@njit(cache=True, nogil=True)
def field_eval(coef, q, center, powers, lo, hi, x):
    s = 0.0
    d = x.shape[0]
    for k in range(lo, hi):
        v = coef[k]
        if q[k] != 0.0:
            r = 0.0
            for j in range(d):
                dd = x[j] - center[k, j]
                r += dd * dd
            v *= math.exp(-q[k] * r)
        for j in range(d):
            p = powers[k, j]
            if p != 0:
                v *= x[j] ** p
        s += v
    return s


@njit(cache=True, nogil=True)
def thinning_run(pos, tl, n, t, t_end, sign, c, coef, q, center, powers, offsets,
                 eps, bb_bound, w_bounds, ks, beta_w_bound, max_cap, U, ui, Z, zi):
    """Advance the aggregate-clock thinning scheme until ``t_end``.

    Field order in the packed arrays: ``a, b, beta, w_1, ..., w_m``.
    Returns ``(status, n, t, events, ui, zi, info)``; particles are moved
    lazily, so on ``DONE`` the caller still has to move every particle from
    its last-update time ``tl`` to ``t_end``.
    """
    d = pos.shape[1]
    m = ks.shape[0]
    rate_b = 2.0 * bb_bound / eps
    rate_s = np.empty(m)
    kmax = 1
    death_k = 0.0
    for i in range(m):
        rate_s[i] = eps * w_bounds[i]
        if ks[i] > kmax:
            kmax = ks[i]
        death_k += ks[i] * eps
    rate_d = beta_w_bound
    per = rate_b + rate_d
    for i in range(m):
        per += rate_s[i]
    events = 0
    info = 0.0
    x = np.empty(d)
    while True:
        if n == 0 or per == 0.0:
            return DONE, n, t_end, events, ui, zi, info
        if ui + UNIFORMS_PER_EVENT > U.shape[0] or zi + d > Z.shape[0]:
            return NEED_RNG, n, t, events, ui, zi, info
        if n + kmax > pos.shape[0] and pos.shape[0] < max_cap:
            return GROW, n, t, events, ui, zi, info
        dt = -math.log1p(-U[ui]) / (per * n)
        ui += 1
        if t + dt >= t_end:
            return DONE, n, t_end, events, ui, zi, info
        t += dt
        j = min(int(U[ui] * n), n - 1)
        ui += 1
        # exact lazy move of the selected particle
        s = t - tl[j]
        if s > 0.0:
            F, V = ou_coeffs(sign, c, s)
            sd = math.sqrt(V)
            for k in range(d):
                pos[j, k] = F * pos[j, k] + sd * Z[zi + k]
            zi += d
            tl[j] = t
        for k in range(d):
            x[k] = pos[j, k]
        u = U[ui] * per
        ui += 1
        acc = U[ui]
        ui += 1
        events += 1
        beta = field_eval(coef, q, center, powers, offsets[2], offsets[3], x)
        if u < rate_b:
            b = field_eval(coef, q, center, powers, offsets[1], offsets[2], x)
            ratio = beta * b / bb_bound
            if ratio > 1.0 + 1e-12:
                return BOUND_VIOLATED, n, t, events, ui, zi, ratio
            if acc >= ratio:
                continue
            a = field_eval(coef, q, center, powers, offsets[0], offsets[1], x)
            p2 = 0.5 + eps * a / (4.0 * b)
            if p2 < 0.0 or p2 > 1.0:
                return P2_RANGE, n, t, events, ui, zi, 2.0 * b / abs(a)
            if U[ui] < p2:
                if n + 1 > pos.shape[0]:
                    return CAPACITY, n, t, events, ui, zi, info
                for k in range(d):
                    pos[n, k] = x[k]
                tl[n] = t
                n += 1
            else:
                n -= 1
                for k in range(d):
                    pos[j, k] = pos[n, k]
                tl[j] = tl[n]
            ui += 1
            continue
        u -= rate_b
        if u < rate_d:
            wsum = 0.0
            for i in range(m):
                wsum += field_eval(coef, q, center, powers, offsets[3 + i], offsets[4 + i], x) * ks[i] * eps
            ratio = beta * wsum / rate_d
            if ratio > 1.0 + 1e-12:
                return BOUND_VIOLATED, n, t, events, ui, zi, ratio
            if acc < ratio:
                n -= 1
                for k in range(d):
                    pos[j, k] = pos[n, k]
                tl[j] = tl[n]
            continue
        u -= rate_d
        i = 0
        while i < m - 1 and u >= rate_s[i]:
            u -= rate_s[i]
            i += 1
        w = field_eval(coef, q, center, powers, offsets[3 + i], offsets[4 + i], x)
        ratio = beta * w / w_bounds[i]
        if ratio > 1.0 + 1e-12:
            return BOUND_VIOLATED, n, t, events, ui, zi, ratio
        if acc < ratio:
            if n + ks[i] > pos.shape[0]:
                return CAPACITY, n, t, events, ui, zi, info
            for r in range(ks[i]):
                for k in range(d):
                    pos[n, k] = x[k]
                tl[n] = t
                n += 1


@njit(cache=True, nogil=True)
def genealogy_positions(roots, sizes, depths, Z, T, sign, c, out):
    """Leaf positions of coalescent point processes rooted at ``roots``.

    Ancestor ``j`` has ``sizes[j]`` leaves at depth 0 and ``sizes[j] - 1``
    node depths (consumed in order from ``depths``); the node between
    consecutive leaves is where their lineages split.  The spine of the
    previous leaf is kept as a stack of ``(depth, value)`` points, and each
    split value is an OU bridge draw between its two neighbouring spine
    points.  Consumes ``d`` normals per leaf and per node.
    """
    d = roots.shape[1]
    smax = 0
    for j in range(sizes.shape[0]):
        if sizes[j] > smax:
            smax = sizes[j]
    sdep = np.empty(2 * smax + 1)
    sval = np.empty((2 * smax + 1, d))
    hi = 0
    zi = 0
    li = 0
    for j in range(sizes.shape[0]):
        top = 0
        sdep[0] = T
        for k in range(d):
            sval[0, k] = roots[j, k]
        F, V = ou_coeffs(sign, c, T)
        sd = math.sqrt(V)
        top = 1
        sdep[1] = 0.0
        for k in range(d):
            sval[1, k] = F * roots[j, k] + sd * Z[zi + k]
            out[li, k] = sval[1, k]
        zi += d
        li += 1
        for _ in range(sizes[j] - 1):
            H = depths[hi]
            hi += 1
            low = top
            while sdep[top] < H:
                low = top
                top -= 1
            # bridge between sval[top] (depth >= H) and sval[low] (depth < H)
            s1 = sdep[top] - H
            s2 = H - sdep[low]
            if s1 > 0.0:
                F1, V1 = ou_coeffs(sign, c, s1)
                F2, V2 = ou_coeffs(sign, c, s2)
                prec = 1.0 / V1 + F2 * F2 / V2
                psd = math.sqrt(1.0 / prec)
                for k in range(d):
                    mean = (F1 * sval[top, k] / V1 + F2 * sval[low, k] / V2) / prec
                    sval[top + 1, k] = mean + psd * Z[zi + k]
            else:
                for k in range(d):
                    sval[top + 1, k] = sval[top, k]
            zi += d
            top += 1
            sdep[top] = H
            F, V = ou_coeffs(sign, c, H)
            sd = math.sqrt(V)
            for k in range(d):
                sval[top + 1, k] = F * sval[top, k] + sd * Z[zi + k]
                out[li, k] = sval[top + 1, k]
            zi += d
            top += 1
            sdep[top] = 0.0
            li += 1
    return li
