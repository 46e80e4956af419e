"""
Compiled window objective and box-projected Nelder-Mead.

The objective for a (family, contrast) pair is selected by an integer code.
Recursive conditional moments restart from zero state ``m`` steps before the
window, where ``m`` is chosen so that the discarded state is damped by at
least 1e-17 (the contraction rate is bounded by the sum of the feedback
coefficients); when that sum is >= 1 the recursion starts at ``t = 1``.
Power-law lag sums are read from a Chebyshev interpolation table in the
decay exponent (see :func:`power_sum_table`).
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

AR1_LS = 0
AR1_LAV = 1
AR1S_GQMLE = 2
ARINF_GQMLE = 3
ARMA_GQMLE = 4
ARCHINF_GQMLE = 5
GARCH_GQMLE = 6
ARMAGARCH_GQMLE = 7
LARCHINF_LS = 8
GLARCH_LS = 9
INGARCH_POIS = 10
INGARCH_THR_POIS = 11

CODES = {
    ("tvar1", "ls"): AR1_LS,
    ("tvar1", "lav"): AR1_LAV,
    ("tvar1-scale", "gqmle"): AR1S_GQMLE,
    ("tvarinf", "gqmle"): ARINF_GQMLE,
    ("tvarma", "gqmle"): ARMA_GQMLE,
    ("tvarchinf", "gqmle"): ARCHINF_GQMLE,
    ("tvgarch", "gqmle"): GARCH_GQMLE,
    ("tvarmagarch", "gqmle"): ARMAGARCH_GQMLE,
    ("tvlarchinf", "larch-ls"): LARCHINF_LS,
    ("tvglarch", "larch-ls"): GLARCH_LS,
    ("tvingarch", "poisson-qmle"): INGARCH_POIS,
    ("tvingarch-thr", "poisson-qmle"): INGARCH_THR_POIS,
}
POWER_LAW_CODES = (ARINF_GQMLE, ARCHINF_GQMLE, LARCHINF_LS)

_LOG_DAMP = math.log(1e-17)
CHEB_NODES = 40


def chebyshev_nodes(lo, hi, m=CHEB_NODES):
    """Chebyshev-Lobatto points on ``[lo, hi]`` and their barycentric weights."""
    k = np.arange(m)
    nodes = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(np.pi * k / (m - 1))
    w = (-1.0) ** k
    w[0] *= 0.5
    w[-1] *= 0.5
    return nodes, w


@njit(cache=True)
def _power_sums_nb(y, exps, lo, hi, trunc):
    n = y.shape[0]
    m = exps.shape[0]
    out = np.zeros((hi - lo + 1, m))
    logj = np.log(np.arange(1, n + 1).astype(np.float64))
    for k in range(m):
        w = np.exp(-exps[k] * logj)
        for t in range(lo, hi + 1):
            top = t - 1
            if trunc < top:
                top = trunc
            s = 0.0
            for j in range(1, top + 1):
                s += w[j - 1] * y[t - j - 1]
            out[t - lo, k] = s
    return out


def power_sum_table(y, nodes, lo=1, hi=None, truncation_lag=None):
    """
    ``S_t(e_k) = sum_{j=1}^{t-1} j**-e_k y_{t-j}`` for ``t = lo..hi`` at each node ``e_k``.

    Rows follow ``t``; columns follow the nodes.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    hi = y.shape[0] if hi is None else hi
    trunc = y.shape[0] if truncation_lag is None else int(truncation_lag)
    return _power_sums_nb(y, np.ascontiguousarray(nodes, dtype=np.float64), int(lo), int(hi), trunc)


@njit(cache=True)
def _bary(z, nodes, bw):
    m = nodes.shape[0]
    out = np.zeros(m)
    for k in range(m):
        if z == nodes[k]:
            out[k] = 1.0
            return out
    s = 0.0
    for k in range(m):
        out[k] = bw[k] / (z - nodes[k])
        s += out[k]
    for k in range(m):
        out[k] /= s
    return out


@njit(cache=True)
def _start(lo, rho, steps, maxlag):
    if rho >= 1.0:
        return 1
    if rho <= 0.0:
        m = maxlag
    else:
        m = steps * int(math.ceil(_LOG_DAMP / math.log(rho))) + maxlag
    s = lo - m
    return s if s > 1 else 1


@njit(cache=True)
def window_objective(code, th, x, lo, hi, w, orders, floor, table, nodes, bw):
    """
    Weighted sum ``sum_{t=lo}^{hi} w[t-lo] Phi_t(theta)``.

    ``x`` is 0-based (``x[t-1]`` is ``x_t``); ``lo, hi`` are 1-based.
    Returns the value and the number of floor applications in the window.
    """
    p = orders[0]
    q = orders[1]
    p2 = orders[2]
    q2 = orders[3]
    ell = orders[4]
    acc = 0.0
    nfl = 0

    if code == AR1_LS or code == AR1_LAV or code == AR1S_GQMLE:
        a = th[0]
        m2 = 1.0
        if code == AR1S_GQMLE:
            m2 = th[1] * th[1]
            if m2 < floor:
                m2 = floor
                nfl = hi - lo + 1
        lm2 = math.log(m2)
        for t in range(lo, hi + 1):
            prev = x[t - 2] if t >= 2 else 0.0
            r = x[t - 1] - a * prev
            if code == AR1_LS:
                v = r * r
            elif code == AR1_LAV:
                v = abs(r)
            else:
                v = lm2 + r * r / m2
            acc += w[t - lo] * v
        return acc, nfl

    if code == ARINF_GQMLE or code == ARCHINF_GQMLE or code == LARCHINF_LS:
        if code == ARINF_GQMLE:
            cw = _bary(th[1], nodes, bw)
        else:
            cw = _bary(th[2], nodes, bw)
        m = nodes.shape[0]
        for t in range(lo, hi + 1):
            s = 0.0
            row = t - lo
            for k in range(m):
                s += table[row, k] * cw[k]
            xt = x[t - 1]
            if code == ARINF_GQMLE:
                m2 = th[2] * th[2]
                if m2 < floor:
                    m2 = floor
                    nfl += 1
                r = xt - th[0] * s
                v = math.log(m2) + r * r / m2
            elif code == ARCHINF_GQMLE:
                m2 = th[0] + th[1] * s
                if m2 < floor:
                    m2 = floor
                    nfl += 1
                v = math.log(m2) + xt * xt / m2
            else:
                lv = th[0] + th[1] * s
                d = xt * xt - lv * lv
                v = d * d
            acc += w[t - lo] * v
        return acc, nfl

    if code == ARMA_GQMLE or code == ARMAGARCH_GQMLE:
        rho = 0.0
        for j in range(q):
            rho += abs(th[p + j])
        steps = q if q > 0 else 1
        if code == ARMAGARCH_GQMLE:
            o = p + q
            rg = 0.0
            for j in range(q2):
                rg += th[o + 1 + p2 + j]
            s0 = _start(lo, max(rho, rg), max(steps, q2 if q2 > 0 else 1), p + p2 + q + q2)
            sig = 1.0
        else:
            s0 = _start(lo, rho, steps, p + q)
            sig = th[p + q]
        L = hi - s0 + 1
        res = np.zeros(L)
        var = np.zeros(L)
        for t in range(s0, hi + 1):
            xt = x[t - 1]
            f = 0.0
            for i in range(1, p + 1):
                if t - i >= 1:
                    f -= th[i - 1] * x[t - i - 1]
            for j in range(1, q + 1):
                if t - j >= s0:
                    f += th[p + j - 1] * res[t - j - s0]
            r = (xt - f) / sig
            res[t - s0] = r
            if code == ARMA_GQMLE:
                if t >= lo:
                    m2 = sig * sig
                    if m2 < floor:
                        m2 = floor
                        nfl += 1
                    acc += w[t - lo] * (math.log(m2) + (xt - f) * (xt - f) / m2)
                continue
            o = p + q
            v = th[o]
            for i in range(1, p2 + 1):
                if t - i >= s0:
                    e = res[t - i - s0]
                    v += th[o + i] * e * e
            for j in range(1, q2 + 1):
                if t - j >= s0:
                    v += th[o + p2 + j] * var[t - j - s0]
            var[t - s0] = v
            if t >= lo:
                m2 = v
                if m2 < floor:
                    m2 = floor
                    nfl += 1
                acc += w[t - lo] * (math.log(m2) + r * r / m2)
        return acc, nfl

    if code == GARCH_GQMLE or code == GLARCH_LS:
        rho = 0.0
        for j in range(q):
            rho += abs(th[1 + p + j])
        s0 = _start(lo, rho, q if q > 0 else 1, p + q)
        L = hi - s0 + 1
        st = np.zeros(L)
        for t in range(s0, hi + 1):
            v = th[0]
            for i in range(1, p + 1):
                if t - i >= 1:
                    xv = x[t - i - 1]
                    if code == GARCH_GQMLE:
                        v += th[i] * xv * xv
                    else:
                        v += th[i] * xv
            for j in range(1, q + 1):
                if t - j >= s0:
                    v += th[p + j] * st[t - j - s0]
            st[t - s0] = v
            if t >= lo:
                xt = x[t - 1]
                if code == GARCH_GQMLE:
                    m2 = v
                    if m2 < floor:
                        m2 = floor
                        nfl += 1
                    acc += w[t - lo] * (math.log(m2) + xt * xt / m2)
                else:
                    d = xt * xt - v * v
                    acc += w[t - lo] * d * d
        return acc, nfl

    # count models
    a0 = th[0]
    rho = 0.0
    if code == INGARCH_POIS:
        for j in range(q):
            rho += th[1 + p + j]
        s0 = _start(lo, rho, q if q > 0 else 1, p + q)
    else:
        for i in range(p):
            rho += th[1 + i]
        s0 = _start(lo, rho, p if p > 0 else 1, p + q)
    L = hi - s0 + 1
    lam = np.zeros(L)
    for t in range(s0, hi + 1):
        v = a0
        if code == INGARCH_POIS:
            for i in range(1, p + 1):
                if t - i >= 1:
                    v += th[i] * x[t - i - 1]
            for j in range(1, q + 1):
                if t - j >= s0:
                    v += th[p + j] * lam[t - j - s0]
                else:
                    v += th[p + j] * a0
        else:
            for i in range(1, p + 1):
                if t - i >= s0:
                    v += th[i] * lam[t - i - s0]
                else:
                    v += th[i] * a0
            for j in range(1, q + 1):
                if t - j >= 1:
                    xv = x[t - j - 1]
                    v += th[p + j] * max(xv - ell, 0.0) - th[p + q + j] * min(xv, float(ell))
        floored = False
        if v < floor:
            v = floor
            floored = True
        lam[t - s0] = v
        if t >= lo:
            if floored:
                nfl += 1
            acc += w[t - lo] * (v - x[t - 1] * math.log(v))
    return acc, nfl


@njit(cache=True)
def _clip(v, lo, hi):
    out = v.copy()
    for i in range(v.shape[0]):
        if out[i] < lo[i]:
            out[i] = lo[i]
        elif out[i] > hi[i]:
            out[i] = hi[i]
    return out


@njit(cache=True)
def nelder_mead(x0, blo, bhi, ftol, xtol, maxiter, scale,
                code, x, lo, hi, w, orders, floor, table, nodes, bw):
    """
    Box-projected Nelder-Mead on the window objective times ``scale``.

    Every trial point is clipped to the box before evaluation.  Converged
    means the spread of simplex values is ``<= ftol`` and every vertex lies
    within ``xtol * (bhi - blo)`` of the best one.

    Returns ``(theta, value, iterations, evaluations, converged)``.
    """
    d = x0.shape[0]
    sim = np.empty((d + 1, d))
    fs = np.empty(d + 1)
    sim[0] = _clip(x0, blo, bhi)
    for i in range(d):
        v = sim[0].copy()
        step = 0.05 * (bhi[i] - blo[i])
        if v[i] + step > bhi[i]:
            step = -step
        v[i] += step
        sim[i + 1] = _clip(v, blo, bhi)
    nfev = 0
    for i in range(d + 1):
        fs[i] = scale * window_objective(code, sim[i], x, lo, hi, w, orders, floor, table, nodes, bw)[0]
        nfev += 1

    converged = False
    it = 0
    while it < maxiter:
        order = np.argsort(fs)
        sim = sim[order]
        fs = fs[order]
        spread_ok = fs[d] - fs[0] <= ftol
        x_ok = True
        for i in range(1, d + 1):
            for k in range(d):
                if abs(sim[i, k] - sim[0, k]) > xtol * (bhi[k] - blo[k]):
                    x_ok = False
        if spread_ok and x_ok:
            converged = True
            break
        it += 1
        cen = np.zeros(d)
        for i in range(d):
            cen += sim[i]
        cen /= d
        xr = _clip(cen + (cen - sim[d]), blo, bhi)
        fr = scale * window_objective(code, xr, x, lo, hi, w, orders, floor, table, nodes, bw)[0]
        nfev += 1
        if fr < fs[0]:
            xe = _clip(cen + 2.0 * (cen - sim[d]), blo, bhi)
            fe = scale * window_objective(code, xe, x, lo, hi, w, orders, floor, table, nodes, bw)[0]
            nfev += 1
            if fe < fr:
                sim[d] = xe
                fs[d] = fe
            else:
                sim[d] = xr
                fs[d] = fr
            continue
        if fr < fs[d - 1]:
            sim[d] = xr
            fs[d] = fr
            continue
        if fr < fs[d]:
            xc = _clip(cen + 0.5 * (xr - cen), blo, bhi)
        else:
            xc = _clip(cen + 0.5 * (sim[d] - cen), blo, bhi)
        fc = scale * window_objective(code, xc, x, lo, hi, w, orders, floor, table, nodes, bw)[0]
        nfev += 1
        if fc < min(fr, fs[d]):
            sim[d] = xc
            fs[d] = fc
            continue
        for i in range(1, d + 1):
            sim[i] = _clip(sim[0] + 0.5 * (sim[i] - sim[0]), blo, bhi)
            fs[i] = scale * window_objective(code, sim[i], x, lo, hi, w, orders, floor, table, nodes, bw)[0]
            nfev += 1
    order = np.argsort(fs)
    return sim[order[0]].copy(), fs[order[0]], it, nfev, converged
