"""Fused numba kernels for one aggregation step and its backward pass.

Each kernel walks the center-sorted star graph once, sequentially, so every
sum is taken in context storage order and results are reproducible bit for
bit. ``kind`` is 0 for TransE and 1 for DistMult.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _score(kind, h, r, t):
    acc = 0.0
    if kind == 0:
        for k in range(h.shape[0]):
            v = t[k] - r[k] - h[k]
            acc += v * v
        return -math.sqrt(acc)
    for k in range(h.shape[0]):
        acc += h[k] * r[k] * t[k]
    return acc


@njit(cache=True)
def _softmax_inplace(w, lo, hi):
    peak = -np.inf
    for i in range(lo, hi):
        if w[i] > peak:
            peak = w[i]
    tot = 0.0
    for i in range(lo, hi):
        w[i] = math.exp(w[i] - peak)
        tot += w[i]
    for i in range(lo, hi):
        w[i] /= tot


@njit(cache=True)
def entity_forward(kind, E, R, offsets, rel, tail, alpha, E_out):
    d = E.shape[1]
    for c in range(offsets.shape[0] - 1):
        lo, hi = offsets[c], offsets[c + 1]
        if lo == hi:
            continue
        for i in range(lo, hi):
            alpha[i] = _score(kind, E[c], R[rel[i]], E[tail[i]])
        _softmax_inplace(alpha, lo, hi)
        for i in range(lo, hi):
            a, rr, tt = alpha[i], R[rel[i]], E[tail[i]]
            if kind == 0:
                for k in range(d):
                    E_out[c, k] += a * (tt[k] - rr[k])
            else:
                for k in range(d):
                    E_out[c, k] += a * (tt[k] * rr[k])


@njit(cache=True)
def relation_forward(kind, E, R, offsets, head, tail, beta, R_out):
    d = E.shape[1]
    for c in range(offsets.shape[0] - 1):
        lo, hi = offsets[c], offsets[c + 1]
        if lo == hi:
            continue
        for i in range(lo, hi):
            beta[i] = _score(kind, E[head[i]], R[c], E[tail[i]])
        _softmax_inplace(beta, lo, hi)
        for i in range(lo, hi):
            b, hh, tt = beta[i], E[head[i]], E[tail[i]]
            if kind == 0:
                for k in range(d):
                    R_out[c, k] += b * (tt[k] - hh[k])
            else:
                for k in range(d):
                    R_out[c, k] += b * (tt[k] * hh[k])


@njit(cache=True)
def _score_backward(kind, gs, H, R, T, gH, gR, gT):
    """Accumulate ``gs * d psi / d(H, R, T)`` into the three gradient rows."""
    d = H.shape[0]
    if kind == 0:
        acc = 0.0
        for k in range(d):
            v = T[k] - R[k] - H[k]
            acc += v * v
        norm = math.sqrt(acc)
        if norm == 0.0:
            return
        coef = -gs / norm
        for k in range(d):
            gv = coef * (T[k] - R[k] - H[k])
            gH[k] -= gv
            gR[k] -= gv
            gT[k] += gv
    else:
        for k in range(d):
            gH[k] += gs * R[k] * T[k]
            gR[k] += gs * H[k] * T[k]
            gT[k] += gs * H[k] * R[k]


@njit(cache=True)
def entity_backward(kind, E, R, offsets, rel, tail, alpha, gE_next, gE, gR):
    d = E.shape[1]
    for c in range(offsets.shape[0] - 1):
        lo, hi = offsets[c], offsets[c + 1]
        if lo == hi:
            continue
        up = gE_next[c]
        # d loss / d alpha_i = <up, phi_i>
        n = hi - lo
        galpha = np.empty(n)
        S = 0.0
        for i in range(lo, hi):
            rr, tt = R[rel[i]], E[tail[i]]
            acc = 0.0
            if kind == 0:
                for k in range(d):
                    acc += up[k] * (tt[k] - rr[k])
            else:
                for k in range(d):
                    acc += up[k] * (tt[k] * rr[k])
            galpha[i - lo] = acc
            S += alpha[i] * acc
        for i in range(lo, hi):
            a = alpha[i]
            r_i, t_i = rel[i], tail[i]
            rr, tt = R[r_i], E[t_i]
            if kind == 0:
                for k in range(d):
                    gm = a * up[k]
                    gR[r_i, k] -= gm
                    gE[t_i, k] += gm
            else:
                for k in range(d):
                    gm = a * up[k]
                    gR[r_i, k] += gm * tt[k]
                    gE[t_i, k] += gm * rr[k]
            gs = a * (galpha[i - lo] - S)
            _score_backward(kind, gs, E[c], rr, tt, gE[c], gR[r_i], gE[t_i])


@njit(cache=True)
def relation_backward(kind, E, R, offsets, head, tail, beta, gR_next, gE, gR):
    d = E.shape[1]
    for c in range(offsets.shape[0] - 1):
        lo, hi = offsets[c], offsets[c + 1]
        if lo == hi:
            continue
        up = gR_next[c]
        n = hi - lo
        gbeta = np.empty(n)
        S = 0.0
        for i in range(lo, hi):
            hh, tt = E[head[i]], E[tail[i]]
            acc = 0.0
            if kind == 0:
                for k in range(d):
                    acc += up[k] * (tt[k] - hh[k])
            else:
                for k in range(d):
                    acc += up[k] * (tt[k] * hh[k])
            gbeta[i - lo] = acc
            S += beta[i] * acc
        for i in range(lo, hi):
            b = beta[i]
            h_i, t_i = head[i], tail[i]
            hh, tt = E[h_i], E[t_i]
            if kind == 0:
                for k in range(d):
                    gm = b * up[k]
                    gE[h_i, k] -= gm
                    gE[t_i, k] += gm
            else:
                for k in range(d):
                    gm = b * up[k]
                    gE[h_i, k] += gm * tt[k]
                    gE[t_i, k] += gm * hh[k]
            gs = b * (gbeta[i - lo] - S)
            _score_backward(kind, gs, hh, R[c], tt, gE[h_i], gR[c], gE[t_i])
