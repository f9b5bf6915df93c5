"""Numba-jitted implementations of the hot kernels.

Same contracts as ``numpy_impl``; explicit loops avoid the gathered
(rows, width) temporaries and the np.add.at scatter cost.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def transe_scores(ent, rel, h, r, t):
    n, w = h.shape[0], ent.shape[1]
    out = np.empty(n)
    for j in range(n):
        acc = 0.0
        for k in range(w):
            d = ent[h[j], k] + rel[r[j], k] - ent[t[j], k]
            acc += d * d
        out[j] = -np.sqrt(acc)
    return out


@njit(**_JIT)
def distmult_scores(ent, rel, h, r, t):
    n, w = h.shape[0], ent.shape[1]
    out = np.empty(n)
    for j in range(n):
        acc = 0.0
        for k in range(w):
            acc += ent[h[j], k] * rel[r[j], k] * ent[t[j], k]
        out[j] = acc
    return out


@njit(**_JIT)
def complex_scores(ent, rel, h, r, t):
    n = h.shape[0]
    d = ent.shape[1] // 2
    out = np.empty(n)
    for j in range(n):
        acc = 0.0
        for k in range(d):
            hr, hi = ent[h[j], k], ent[h[j], d + k]
            rr, ri = rel[r[j], k], rel[r[j], d + k]
            tr, ti = ent[t[j], k], ent[t[j], d + k]
            acc += hr * rr * tr - hi * ri * tr + hr * ri * ti + hi * rr * ti
        out[j] = acc
    return out


@njit(**_JIT)
def rotate_scores(ent, rel, h, r, t):
    n = h.shape[0]
    d = rel.shape[1]
    out = np.empty(n)
    for j in range(n):
        acc = 0.0
        for k in range(d):
            hr, hi = ent[h[j], k], ent[h[j], d + k]
            c, s = np.cos(rel[r[j], k]), np.sin(rel[r[j], k])
            ur = hr * c - hi * s - ent[t[j], k]
            ui = hr * s + hi * c - ent[t[j], d + k]
            acc += ur * ur + ui * ui
        out[j] = -np.sqrt(acc)
    return out


@njit(**_JIT)
def transe_grads(ent, rel, h, r, t, coeff, gent, grel):
    n, w = h.shape[0], ent.shape[1]
    for j in range(n):
        acc = 0.0
        for k in range(w):
            d = ent[h[j], k] + rel[r[j], k] - ent[t[j], k]
            acc += d * d
        nrm = np.sqrt(acc)
        if nrm < 1e-30:
            nrm = 1e-30
        f = -coeff[j] / nrm
        for k in range(w):
            d = ent[h[j], k] + rel[r[j], k] - ent[t[j], k]
            g = f * d
            gent[h[j], k] += g
            grel[r[j], k] += g
            gent[t[j], k] -= g


@njit(**_JIT)
def distmult_grads(ent, rel, h, r, t, coeff, gent, grel):
    n, w = h.shape[0], ent.shape[1]
    for j in range(n):
        c = coeff[j]
        for k in range(w):
            eh, er, et = ent[h[j], k], rel[r[j], k], ent[t[j], k]
            gent[h[j], k] += c * er * et
            grel[r[j], k] += c * eh * et
            gent[t[j], k] += c * eh * er


@njit(**_JIT)
def complex_grads(ent, rel, h, r, t, coeff, gent, grel):
    n = h.shape[0]
    d = ent.shape[1] // 2
    for j in range(n):
        c = coeff[j]
        for k in range(d):
            hr, hi = ent[h[j], k], ent[h[j], d + k]
            rr, ri = rel[r[j], k], rel[r[j], d + k]
            tr, ti = ent[t[j], k], ent[t[j], d + k]
            gent[h[j], k] += c * (rr * tr + ri * ti)
            gent[h[j], d + k] += c * (-ri * tr + rr * ti)
            grel[r[j], k] += c * (hr * tr + hi * ti)
            grel[r[j], d + k] += c * (-hi * tr + hr * ti)
            gent[t[j], k] += c * (hr * rr - hi * ri)
            gent[t[j], d + k] += c * (hr * ri + hi * rr)


@njit(**_JIT)
def rotate_grads(ent, rel, h, r, t, coeff, gent, grel):
    n = h.shape[0]
    d = rel.shape[1]
    for j in range(n):
        acc = 0.0
        for k in range(d):
            hr, hi = ent[h[j], k], ent[h[j], d + k]
            c, s = np.cos(rel[r[j], k]), np.sin(rel[r[j], k])
            ur = hr * c - hi * s - ent[t[j], k]
            ui = hr * s + hi * c - ent[t[j], d + k]
            acc += ur * ur + ui * ui
        nrm = np.sqrt(acc)
        if nrm < 1e-30:
            nrm = 1e-30
        f = -coeff[j] / nrm
        for k in range(d):
            hr, hi = ent[h[j], k], ent[h[j], d + k]
            tr, ti = ent[t[j], k], ent[t[j], d + k]
            c, s = np.cos(rel[r[j], k]), np.sin(rel[r[j], k])
            ur = hr * c - hi * s - tr
            ui = hr * s + hi * c - ti
            gent[h[j], k] += f * (ur * c + ui * s)
            gent[h[j], d + k] += f * (-ur * s + ui * c)
            grel[r[j], k] += f * (ui * tr - ur * ti)
            gent[t[j], k] += -f * ur
            gent[t[j], d + k] += -f * ui


@njit(**_JIT)
def l3_penalty(table, rows):
    acc = 0.0
    for i in range(rows.shape[0]):
        for k in range(table.shape[1]):
            x = abs(table[rows[i], k])
            acc += x * x * x
    return acc


@njit(**_JIT)
def l3_add_grad(table, rows, coeff, gtable):
    for i in range(rows.shape[0]):
        for k in range(table.shape[1]):
            x = table[rows[i], k]
            gtable[rows[i], k] += coeff * 3.0 * x * abs(x)


@njit(**_JIT)
def adam_update(param, grad, m, v, lr, beta1, beta2, eps, step):
    bias1 = 1.0 - beta1 ** step
    bias2 = 1.0 - beta2 ** step
    for i in range(param.shape[0]):
        for k in range(param.shape[1]):
            g = grad[i, k]
            m[i, k] = beta1 * m[i, k] + (1.0 - beta1) * g
            v[i, k] = beta2 * v[i, k] + (1.0 - beta2) * g * g
            param[i, k] -= lr * (m[i, k] / bias1) / (np.sqrt(v[i, k] / bias2) + eps)


@njit(**_JIT)
def levenshtein(a, b):
    m, n = a.shape[0], b.shape[0]
    if m == 0:
        return n
    if n == 0:
        return m
    prev = np.arange(n + 1)
    cur = np.empty(n + 1, dtype=np.int64)
    for i in range(1, m + 1):
        cur[0] = i
        for j in range(1, n + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            if prev[j - 1] + cost < best:
                best = prev[j - 1] + cost
            cur[j] = best
        prev, cur = cur, prev
    return int(prev[n])


@njit(**_JIT)
def split_scan(vals, g, h, reg_lambda, min_child_weight):
    n = vals.shape[0]
    if n < 2:
        return -np.inf, -1
    gt = 0.0
    ht = 0.0
    for i in range(n):
        gt += g[i]
        ht += h[i]
    base = gt * gt / (ht + reg_lambda)
    best_gain = -np.inf
    best_pos = -1
    gl = 0.0
    hl = 0.0
    for i in range(n - 1):
        gl += g[i]
        hl += h[i]
        if vals[i] >= vals[i + 1]:
            continue
        hr = ht - hl
        if hl < min_child_weight or hr < min_child_weight:
            continue
        gr = gt - gl
        gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - base)
        if gain > best_gain:
            best_gain = gain
            best_pos = i
    return best_gain, best_pos
