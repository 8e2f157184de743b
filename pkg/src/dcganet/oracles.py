"""Naive direct-summation reference implementations.

Deliberately written as plain index loops, independent of the lowered
kernels in :mod:`dcganet.kernels`. Slow and only used by tests, where they
define the semantics of every fast kernel.
"""
from __future__ import annotations

import numpy as np

from .kernels import ConvSpec, bilinear_sample


def conv2d_naive(x, weight, bias, spec: ConvSpec):
    n, c_in, h, w = x.shape
    c_out = weight.shape[0]
    kh, kw = spec.kernel
    oh, ow = spec.out_hw(h, w)
    g = spec.groups
    cpg = c_in // g
    opg = c_out // g
    out = np.zeros((n, c_out, oh, ow), dtype=x.dtype)
    for b in range(n):
        for co in range(c_out):
            grp = co // opg
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for ci_local in range(cpg):
                        ci = grp * cpg + ci_local
                        for i in range(kh):
                            for j in range(kw):
                                iy = oy * spec.stride - spec.padding + i * spec.dilation
                                ix = ox * spec.stride - spec.padding + j * spec.dilation
                                if 0 <= iy < h and 0 <= ix < w:
                                    acc += weight[co, ci_local, i, j] * x[b, ci, iy, ix]
                    out[b, co, oy, ox] = acc + (bias[co] if bias is not None else 0.0)
    return out


def deform_conv2d_naive(x, offsets, weight, bias, spec: ConvSpec):
    """Per-output-pixel loop over taps, sampling via bilinear_sample."""
    n, c_in, h, w = x.shape
    c_out = weight.shape[0]
    kh, kw = spec.kernel
    oh, ow = spec.out_hw(h, w)
    out = np.zeros((n, c_out, oh, ow), dtype=x.dtype)
    for b in range(n):
        for co in range(c_out):
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for i in range(kh):
                        for j in range(kw):
                            tap = i * kw + j
                            dy = offsets[b, 2 * tap, oy, ox]
                            dx = offsets[b, 2 * tap + 1, oy, ox]
                            py = oy * spec.stride - spec.padding + i * spec.dilation + dy
                            px = ox * spec.stride - spec.padding + j * spec.dilation + dx
                            for ci in range(c_in):
                                acc += weight[co, ci, i, j] * bilinear_sample(x[b, ci], py, px)
                    out[b, co, oy, ox] = acc + (bias[co] if bias is not None else 0.0)
    return out


def channel_shuffle_naive(x, groups: int):
    n, c, h, w = x.shape
    sub = c // groups
    out = np.empty_like(x)
    for j in range(sub):
        for i in range(groups):
            out[:, j * groups + i] = x[:, i * sub + j]
    return out


def global_avg_pool_naive(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, 1, 1), dtype=x.dtype)
    for b in range(n):
        for ch in range(c):
            s = 0.0
            for y in range(h):
                for xx in range(w):
                    s += x[b, ch, y, xx]
            out[b, ch, 0, 0] = s / (h * w)
    return out


def global_max_pool_naive(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, 1, 1), dtype=x.dtype)
    for b in range(n):
        for ch in range(c):
            m = x[b, ch, 0, 0]
            for y in range(h):
                for xx in range(w):
                    if x[b, ch, y, xx] > m:
                        m = x[b, ch, y, xx]
            out[b, ch, 0, 0] = m
    return out


def channel_mean_map_naive(x):
    n, c, h, w = x.shape
    out = np.zeros((n, 1, h, w), dtype=x.dtype)
    for b in range(n):
        for y in range(h):
            for xx in range(w):
                s = 0.0
                for ch in range(c):
                    s += x[b, ch, y, xx]
                out[b, 0, y, xx] = s / c
    return out


def channel_max_map_naive(x):
    n, c, h, w = x.shape
    out = np.zeros((n, 1, h, w), dtype=x.dtype)
    for b in range(n):
        for y in range(h):
            for xx in range(w):
                m = x[b, 0, y, xx]
                for ch in range(1, c):
                    if x[b, ch, y, xx] > m:
                        m = x[b, ch, y, xx]
                out[b, 0, y, xx] = m
    return out


def broadcast_add_naive(a, b):
    shape = tuple(max(da, db) for da, db in zip(a.shape, b.shape))
    out = np.zeros(shape, dtype=a.dtype)
    for n in range(shape[0]):
        for c in range(shape[1]):
            for y in range(shape[2]):
                for x in range(shape[3]):
                    av = a[n if a.shape[0] > 1 else 0,
                           c if a.shape[1] > 1 else 0,
                           y if a.shape[2] > 1 else 0,
                           x if a.shape[3] > 1 else 0]
                    bv = b[n if b.shape[0] > 1 else 0,
                           c if b.shape[1] > 1 else 0,
                           y if b.shape[2] > 1 else 0,
                           x if b.shape[3] > 1 else 0]
                    out[n, c, y, x] = av + bv
    return out


def maxpool2x2_naive(x):
    n, c, h, w = x.shape
    out = np.zeros((n, c, h // 2, w // 2), dtype=x.dtype)
    for b in range(n):
        for ch in range(c):
            for oy in range(h // 2):
                for ox in range(w // 2):
                    m = x[b, ch, 2 * oy, 2 * ox]
                    for dy in range(2):
                        for dx in range(2):
                            v = x[b, ch, 2 * oy + dy, 2 * ox + dx]
                            if v > m:
                                m = v
                    out[b, ch, oy, ox] = m
    return out
