"""Naive scalar-loop reference implementations.

These are deliberately slow and share no code with the vectorised paths
they check, apart from reading weights. Used by the test-suite and by the
``bench`` command.
"""

from __future__ import annotations

import math

import numpy as np


def matmul_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, k = a.shape
    n = b.shape[1]
    out = np.zeros((m, n), np.float32)
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += float(a[i, t]) * float(b[t, j])
            out[i, j] = acc
    return out


def softmax_oracle(row) -> list[float]:
    m = max(row)
    e = [math.exp(v - m) for v in row]
    s = math.fsum(e)
    return [v / s for v in e]


def conv2d_oracle(x, weight, bias=None, stride=1, pad=0) -> np.ndarray:
    c_in, h, w = x.shape
    c_out, _, k, _ = weight.shape
    h_out = (h + 2 * pad - k) // stride + 1
    w_out = (w + 2 * pad - k) // stride + 1
    out = np.zeros((c_out, h_out, w_out), np.float32)
    for o in range(c_out):
        for i in range(h_out):
            for j in range(w_out):
                acc = 0.0 if bias is None else float(bias[o])
                for c in range(c_in):
                    for ky in range(k):
                        for kx in range(k):
                            y = i * stride + ky - pad
                            xx = j * stride + kx - pad
                            if 0 <= y < h and 0 <= xx < w:
                                acc += float(weight[o, c, ky, kx]) * float(x[c, y, xx])
                out[o, i, j] = acc
    return out


def adaptive_avg_pool_oracle(x, s: int) -> np.ndarray:
    c, h, w = x.shape
    out = np.zeros((c, s, s), np.float32)
    for ch in range(c):
        for i in range(s):
            r0, r1 = math.floor(i * h / s), math.ceil((i + 1) * h / s)
            for j in range(s):
                c0, c1 = math.floor(j * w / s), math.ceil((j + 1) * w / s)
                vals = [float(x[ch, y, xx]) for y in range(r0, r1) for xx in range(c0, c1)]
                out[ch, i, j] = math.fsum(vals) / len(vals)
    return out


def bilinear_oracle(x, h2: int, w2: int) -> np.ndarray:
    c, h, w = x.shape
    out = np.zeros((c, h2, w2), np.float32)

    def coord(i, n_in, n_out):
        s = (i + 0.5) * n_in / n_out - 0.5
        s = min(max(s, 0.0), n_in - 1)
        i0 = int(math.floor(s))
        return i0, min(i0 + 1, n_in - 1), s - i0

    for ch in range(c):
        for i in range(h2):
            y0, y1, ty = coord(i, h, h2)
            for j in range(w2):
                x0, x1, tx = coord(j, w, w2)
                top = (1 - tx) * float(x[ch, y0, x0]) + tx * float(x[ch, y0, x1])
                bot = (1 - tx) * float(x[ch, y1, x0]) + tx * float(x[ch, y1, x1])
                out[ch, i, j] = (1 - ty) * top + ty * bot
    return out


def affinity_oracle(c_d, f_da, weights, s: int) -> np.ndarray:
    """``[G, H*W, s*s]`` affinities from explicit per-pixel and per-centre projections."""
    g, h, w = c_d.shape
    c = f_da.shape[0]
    per = c // g
    wq, bq = weights["ddca.wq.w"][:, :, 0, 0], weights["ddca.wq.b"]
    wk, bk = weights["ddca.wk.w"][:, :, 0, 0], weights["ddca.wk.b"]
    pooled = adaptive_avg_pool_oracle(f_da, s)
    centres = []
    for i in range(s):
        for j in range(s):
            v = pooled[:, i, j]
            centres.append([float(bk[o]) + sum(float(wk[o, t]) * float(v[t]) for t in range(c)) for o in range(c)])
    out = np.zeros((g, h * w, s * s), np.float32)
    for y in range(h):
        for x in range(w):
            q = [float(bq[o]) + sum(float(wq[o, t]) * float(c_d[t, y, x]) for t in range(g)) for o in range(c)]
            p = y * w + x
            for grp in range(g):
                for n, kc in enumerate(centres):
                    out[grp, p, n] = sum(q[o] * kc[o] for o in range(grp * per, (grp + 1) * per))
    return out


def dynamic_conv_oracle(x: np.ndarray, m: np.ndarray, k: int) -> np.ndarray:
    """Per pixel: materialise each group's ``k x k`` kernel and the zero-padded window, then reduce.

    ``m`` is ``[G, H*W, k*k]``.
    """
    cx, h, w = x.shape
    g = m.shape[0]
    per = cx // g
    r = k // 2
    xp = np.pad(x.astype(np.float64), ((0, 0), (r, r), (r, r)))
    out = np.zeros((cx, h, w), np.float32)
    for y in range(h):
        for xx in range(w):
            window = xp[:, y : y + k, xx : xx + k]
            for grp in range(g):
                kernel = m[grp, y * w + xx].astype(np.float64).reshape(k, k)
                for c in range(grp * per, (grp + 1) * per):
                    out[c, y, xx] = (kernel * window[c]).sum()
    return out


def soft_argmin_oracle(scores: np.ndarray) -> np.ndarray:
    n_d, h, w = scores.shape
    out = np.zeros((h, w), np.float32)
    for y in range(h):
        for x in range(w):
            probs = softmax_oracle([float(scores[d, y, x]) for d in range(n_d)])
            out[y, x] = math.fsum(d * p for d, p in enumerate(probs))
    return out


def lookup_oracle(vol: np.ndarray, disp: np.ndarray, radius: int) -> np.ndarray:
    g, n_d, h, w = vol.shape
    out = np.zeros(((2 * radius + 1) * g, h, w), np.float32)

    def at(grp, d, y, x):
        return float(vol[grp, d, y, x]) if 0 <= d < n_d else 0.0

    for y in range(h):
        for x in range(w):
            for i, o in enumerate(range(-radius, radius + 1)):
                pos = float(disp[y, x]) + o
                lo = math.floor(pos)
                t = pos - lo
                for grp in range(g):
                    out[i * g + grp, y, x] = (1 - t) * at(grp, lo, y, x) + t * at(grp, lo + 1, y, x)
    return out


def convex_upsample_oracle(disp: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Full-res output from quarter-res ``disp`` and ``[9, 4H, 4W]`` weights, one pixel at a time."""
    h4, w4 = disp.shape
    out = np.zeros((4 * h4, 4 * w4), np.float32)
    for y in range(4 * h4):
        for x in range(4 * w4):
            py, px = y // 4, x // 4
            acc = 0.0
            for n in range(9):
                ny = min(max(py + n // 3 - 1, 0), h4 - 1)
                nx = min(max(px + n % 3 - 1, 0), w4 - 1)
                acc += float(mask[n, y, x]) * float(disp[ny, nx])
            out[y, x] = 4.0 * acc
    return out


def epe_oracle(pred: np.ndarray, gt: np.ndarray, valid: np.ndarray) -> float:
    total, n = 0.0, 0
    for y in range(gt.shape[0]):
        for x in range(gt.shape[1]):
            if valid[y, x]:
                total += abs(float(pred[y, x]) - float(gt[y, x]))
                n += 1
    return total / n
