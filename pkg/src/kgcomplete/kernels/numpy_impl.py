"""Pure-numpy implementations of the hot kernels.

Reference semantics for the numba backend; selected by setting
``KGC_NO_NUMBA=1`` or automatically when numba is unavailable.
"""

import numpy as np

# Rows processed per slice in the batched kernels, bounds peak memory of the
# gathered (rows, width) temporaries.
_CHUNK = 4096


def _chunks(n):
    for lo in range(0, n, _CHUNK):
        yield lo, min(lo + _CHUNK, n)


# ---------------------------------------------------------------------------
# KGE scoring
# ---------------------------------------------------------------------------


def transe_scores(ent, rel, h, r, t):
    out = np.empty(h.shape[0])
    for lo, hi in _chunks(h.shape[0]):
        d = ent[h[lo:hi]] + rel[r[lo:hi]] - ent[t[lo:hi]]
        out[lo:hi] = -np.sqrt(np.sum(d * d, axis=1))
    return out


def distmult_scores(ent, rel, h, r, t):
    out = np.empty(h.shape[0])
    for lo, hi in _chunks(h.shape[0]):
        out[lo:hi] = np.sum(ent[h[lo:hi]] * rel[r[lo:hi]] * ent[t[lo:hi]], axis=1)
    return out


def complex_scores(ent, rel, h, r, t):
    # ent/rel store dim real parts followed by dim imaginary parts.
    d = ent.shape[1] // 2
    out = np.empty(h.shape[0])
    for lo, hi in _chunks(h.shape[0]):
        eh, er, et = ent[h[lo:hi]], rel[r[lo:hi]], ent[t[lo:hi]]
        hr, hi_ = eh[:, :d], eh[:, d:]
        rr, ri = er[:, :d], er[:, d:]
        tr, ti = et[:, :d], et[:, d:]
        out[lo:hi] = np.sum(hr * rr * tr - hi_ * ri * tr + hr * ri * ti + hi_ * rr * ti, axis=1)
    return out


def rotate_scores(ent, rel, h, r, t):
    # rel stores phase angles; entity rows are (real, imag) halves.
    d = rel.shape[1]
    out = np.empty(h.shape[0])
    for lo, hi in _chunks(h.shape[0]):
        eh, et = ent[h[lo:hi]], ent[t[lo:hi]]
        hr, hi_ = eh[:, :d], eh[:, d:]
        tr, ti = et[:, :d], et[:, d:]
        c, s = np.cos(rel[r[lo:hi]]), np.sin(rel[r[lo:hi]])
        ur = hr * c - hi_ * s - tr
        ui = hr * s + hi_ * c - ti
        out[lo:hi] = -np.sqrt(np.sum(ur * ur + ui * ui, axis=1))
    return out


# ---------------------------------------------------------------------------
# KGE gradients: accumulate coeff[j] * d score_j / d row into dense tables
# ---------------------------------------------------------------------------


def transe_grads(ent, rel, h, r, t, coeff, gent, grel):
    for lo, hi in _chunks(h.shape[0]):
        d = ent[h[lo:hi]] + rel[r[lo:hi]] - ent[t[lo:hi]]
        n = np.sqrt(np.sum(d * d, axis=1))
        n = np.maximum(n, 1e-30)
        g = (-coeff[lo:hi] / n)[:, None] * d
        np.add.at(gent, h[lo:hi], g)
        np.add.at(grel, r[lo:hi], g)
        np.add.at(gent, t[lo:hi], -g)


def distmult_grads(ent, rel, h, r, t, coeff, gent, grel):
    for lo, hi in _chunks(h.shape[0]):
        eh, er, et = ent[h[lo:hi]], rel[r[lo:hi]], ent[t[lo:hi]]
        c = coeff[lo:hi, None]
        np.add.at(gent, h[lo:hi], c * er * et)
        np.add.at(grel, r[lo:hi], c * eh * et)
        np.add.at(gent, t[lo:hi], c * eh * er)


def complex_grads(ent, rel, h, r, t, coeff, gent, grel):
    d = ent.shape[1] // 2
    for lo, hi in _chunks(h.shape[0]):
        eh, er, et = ent[h[lo:hi]], rel[r[lo:hi]], ent[t[lo:hi]]
        hr, hi_ = eh[:, :d], eh[:, d:]
        rr, ri = er[:, :d], er[:, d:]
        tr, ti = et[:, :d], et[:, d:]
        c = coeff[lo:hi, None]
        gh = np.concatenate([rr * tr + ri * ti, -ri * tr + rr * ti], axis=1)
        gr = np.concatenate([hr * tr + hi_ * ti, -hi_ * tr + hr * ti], axis=1)
        gt = np.concatenate([hr * rr - hi_ * ri, hr * ri + hi_ * rr], axis=1)
        np.add.at(gent, h[lo:hi], c * gh)
        np.add.at(grel, r[lo:hi], c * gr)
        np.add.at(gent, t[lo:hi], c * gt)


def rotate_grads(ent, rel, h, r, t, coeff, gent, grel):
    d = rel.shape[1]
    for lo, hi in _chunks(h.shape[0]):
        eh, et = ent[h[lo:hi]], ent[t[lo:hi]]
        hr, hi_ = eh[:, :d], eh[:, d:]
        tr, ti = et[:, :d], et[:, d:]
        c, s = np.cos(rel[r[lo:hi]]), np.sin(rel[r[lo:hi]])
        ur = hr * c - hi_ * s - tr
        ui = hr * s + hi_ * c - ti
        n = np.sqrt(np.sum(ur * ur + ui * ui, axis=1))
        n = np.maximum(n, 1e-30)
        k = (-coeff[lo:hi] / n)[:, None]
        gh = np.concatenate([ur * c + ui * s, -ur * s + ui * c], axis=1)
        gth = (ui * (tr + ur) - ur * (ti + ui)) * k
        np.add.at(gent, h[lo:hi], k * gh)
        np.add.at(grel, r[lo:hi], gth)
        np.add.at(gent, t[lo:hi], -k * np.concatenate([ur, ui], axis=1))


# ---------------------------------------------------------------------------
# L3 regularization over touched rows
# ---------------------------------------------------------------------------


def l3_penalty(table, rows):
    x = table[rows]
    return float(np.sum(np.abs(x) ** 3))


def l3_add_grad(table, rows, coeff, gtable):
    x = table[rows]
    gtable[rows] += coeff * 3.0 * x * np.abs(x)


# ---------------------------------------------------------------------------
# Adam (dense, in place)
# ---------------------------------------------------------------------------


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, step):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    bias1 = 1.0 - beta1 ** step
    bias2 = 1.0 - beta2 ** step
    param -= lr * (m / bias1) / (np.sqrt(v / bias2) + eps)


# ---------------------------------------------------------------------------
# Levenshtein distance over code-point arrays
# ---------------------------------------------------------------------------


def levenshtein(a, b):
    m, n = a.shape[0], b.shape[0]
    if m == 0:
        return n
    if n == 0:
        return m
    idx = np.arange(n + 1)
    prev = idx.copy()
    cur = np.empty(n + 1, dtype=np.int64)
    for i in range(1, m + 1):
        cost = (a[i - 1] != b).astype(np.int64)
        cur[0] = i
        # cur[j] = min(prev[j]+1, prev[j-1]+cost, cur[j-1]+1); the left
        # dependency resolves as a prefix min on (value - column).
        cur[1:] = np.minimum(prev[1:] + 1, prev[:-1] + cost)
        cur = np.minimum.accumulate(cur - idx) + idx
        prev, cur = cur, prev
    return int(prev[n])


# ---------------------------------------------------------------------------
# GBDT exact greedy split scan
# ---------------------------------------------------------------------------


def split_scan(vals, g, h, reg_lambda, min_child_weight):
    """Best split of one feature: values pre-sorted ascending, g/h aligned.

    Returns (gain, pos): split places indices [0, pos] left, threshold is the
    midpoint of vals[pos] and vals[pos+1]. gain is the loss reduction versus
    no split; (-inf, -1) when no valid split exists.
    """
    n = vals.shape[0]
    if n < 2:
        return -np.inf, -1
    gl = np.cumsum(g)[:-1]
    hl = np.cumsum(h)[:-1]
    gt, ht = gl[-1] + g[-1], hl[-1] + h[-1]
    gr, hr = gt - gl, ht - hl
    gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda)
                  - gt * gt / (ht + reg_lambda))
    valid = (vals[:-1] < vals[1:]) & (hl >= min_child_weight) & (hr >= min_child_weight)
    if not valid.any():
        return -np.inf, -1
    gain = np.where(valid, gain, -np.inf)
    pos = int(np.argmax(gain))
    return float(gain[pos]), pos
