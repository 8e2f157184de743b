"""Forward numerical kernels on raw (n, c, h, w) numpy arrays.

Convolutions are lowered to patch matrices (im2col) and batched matmuls;
the naive loop implementations in :mod:`dcganet.oracles` are the semantic
contract. Backward helpers live here too so the autograd layer stays thin.

Conventions:
  * zero padding everywhere, including out-of-range bilinear neighbors;
  * deformable offsets are tap-major (dy, dx) pairs, 2*kh*kw channels;
  * channel shuffle views channels as (groups, c/groups) and transposes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, ShapeError


@dataclass(frozen=True)
class ConvSpec:
    """Kernel geometry: (kh, kw), stride, zero padding, dilation, groups."""

    kernel: tuple = (3, 3)
    stride: int = 1
    padding: int = 0
    dilation: int = 1
    groups: int = 1

    def __post_init__(self):
        kh, kw = self.kernel
        if kh < 1 or kw < 1:
            raise ConfigurationError(f"kernel must be >= 1x1, got {self.kernel}")
        if self.stride < 1:
            raise ConfigurationError(f"stride must be >= 1, got {self.stride}")
        if self.padding < 0:
            raise ConfigurationError(f"padding must be >= 0, got {self.padding}")
        if self.dilation < 1:
            raise ConfigurationError(f"dilation must be >= 1, got {self.dilation}")
        if self.groups < 1:
            raise ConfigurationError(f"groups must be >= 1, got {self.groups}")

    def out_hw(self, h: int, w: int) -> tuple:
        kh, kw = self.kernel
        oh = (h + 2 * self.padding - self.dilation * (kh - 1) - 1) // self.stride + 1
        ow = (w + 2 * self.padding - self.dilation * (kw - 1) - 1) // self.stride + 1
        if oh < 1 or ow < 1:
            raise ConfigurationError(
                f"conv output size {oh}x{ow} < 1 for input {h}x{w} with {self}"
            )
        return oh, ow


def same_padding(kernel: int, dilation: int = 1) -> int:
    """Padding that preserves spatial size at stride 1 (odd kernels only)."""
    return dilation * (kernel - 1) // 2


def _check_conv_shapes(x, weight, spec):
    kh, kw = spec.kernel
    if weight.ndim != 4 or weight.shape[2:] != (kh, kw):
        raise ShapeError(f"weight kernel axes {weight.shape[2:]} != spec kernel {(kh, kw)}")
    c_out, c_in_g = weight.shape[:2]
    c_in = x.shape[1]
    if c_in % spec.groups != 0:
        raise ShapeError(f"input channel axis {c_in} not divisible by groups {spec.groups}")
    if c_out % spec.groups != 0:
        raise ShapeError(f"output channel axis {c_out} not divisible by groups {spec.groups}")
    if c_in_g != c_in // spec.groups:
        raise ShapeError(
            f"weight channel axis {c_in_g} != in_channels/groups = {c_in // spec.groups}"
        )


def im2col(x, spec: ConvSpec):
    """Lower x to patch matrix of shape (n, c*kh*kw, oh*ow)."""
    n, c, h, w = x.shape
    kh, kw = spec.kernel
    oh, ow = spec.out_hw(h, w)
    p, s, d = spec.padding, spec.stride, spec.dilation
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    kh_eff = d * (kh - 1) + 1
    kw_eff = d * (kw - 1) + 1
    win = sliding_window_view(xp, (kh_eff, kw_eff), axis=(2, 3))
    win = win[:, :, ::s, ::s, ::d, ::d]  # (n, c, oh, ow, kh, kw)
    col = np.ascontiguousarray(win.transpose(0, 1, 4, 5, 2, 3))
    return col.reshape(n, c * kh * kw, oh * ow), (oh, ow)


def col2im(dcol, x_shape, spec: ConvSpec):
    """Adjoint of im2col: scatter-add patch gradients back to input layout."""
    n, c, h, w = x_shape
    kh, kw = spec.kernel
    oh, ow = spec.out_hw(h, w)
    p, s, d = spec.padding, spec.stride, spec.dilation
    dxp = np.zeros((n, c, h + 2 * p, w + 2 * p), dtype=dcol.dtype)
    d6 = dcol.reshape(n, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i * d : i * d + oh * s : s, j * d : j * d + ow * s : s] += d6[:, :, i, j]
    return dxp[:, :, p : p + h, p : p + w]


def conv2d(x, weight, bias, spec: ConvSpec, return_cache=False):
    """Grouped 2-D convolution with zero padding."""
    _check_conv_shapes(x, weight, spec)
    n = x.shape[0]
    c_out = weight.shape[0]
    g = spec.groups
    kh, kw = spec.kernel
    col, (oh, ow) = im2col(x, spec)
    cpg = x.shape[1] // g
    opg = c_out // g
    colg = col.reshape(n, g, cpg * kh * kw, oh * ow)
    wg = weight.reshape(g, opg, cpg * kh * kw)
    out = np.matmul(wg, colg)  # (g,o,k) @ (n,g,k,l) -> (n,g,o,l), BLAS-backed
    out = out.reshape(n, c_out, oh, ow)
    if bias is not None:
        out = out + bias.reshape(1, c_out, 1, 1)
    if return_cache:
        return out, colg
    return out


def conv2d_backward(dout, x_shape, weight, colg, spec: ConvSpec, with_dx=True):
    """Gradients of conv2d: (dx, dweight, dbias)."""
    n, c_out = dout.shape[:2]
    g = spec.groups
    kh, kw = spec.kernel
    opg = c_out // g
    doutg = dout.reshape(n, g, opg, -1)
    db = dout.sum(axis=(0, 2, 3))
    dwg = np.matmul(doutg, colg.transpose(0, 1, 3, 2)).sum(axis=0)
    dw = dwg.reshape(weight.shape)
    dx = None
    if with_dx:
        wg = weight.reshape(g, opg, -1)
        dcolg = np.matmul(wg.transpose(0, 2, 1), doutg)
        dcol = dcolg.reshape(n, x_shape[1] * kh * kw, -1)
        dx = col2im(dcol, x_shape, spec)
    return dx, dw, db


def dilated_conv2d(x, weight, bias, spec: ConvSpec, return_cache=False):
    """Convolution with taps spaced ``spec.dilation`` pixels apart.

    With dilation 1 this is conv2d by construction (shared lowering path).
    """
    return conv2d(x, weight, bias, spec, return_cache=return_cache)


def bilinear_sample(plane, y: float, x: float) -> float:
    """4-neighbor bilinear interpolation; out-of-range neighbors contribute 0."""
    h, w = plane.shape
    y0 = int(np.floor(y))
    x0 = int(np.floor(x))
    wy = y - y0
    wx = x - x0
    total = 0.0
    for dy, wyc in ((0, 1.0 - wy), (1, wy)):
        for dx, wxc in ((0, 1.0 - wx), (1, wx)):
            yy, xx = y0 + dy, x0 + dx
            if 0 <= yy < h and 0 <= xx < w:
                total += wyc * wxc * float(plane[yy, xx])
    return total


def _deform_geometry(x, offsets, spec):
    n, c_in, h, w = x.shape
    kh, kw = spec.kernel
    oh, ow = spec.out_hw(h, w)
    k = kh * kw
    if offsets.shape[1] != 2 * k:
        raise ShapeError(
            f"offset channel axis is {offsets.shape[1]}, expected 2*kh*kw = {2 * k}"
        )
    if offsets.shape[2:] != (oh, ow):
        raise ShapeError(f"offset spatial axes {offsets.shape[2:]} != output {(oh, ow)}")
    ky, kx = np.meshgrid(np.arange(kh), np.arange(kw), indexing="ij")
    oy, ox = np.meshgrid(np.arange(oh), np.arange(ow), indexing="ij")
    base_y = (oy[None] * spec.stride - spec.padding) + (ky.reshape(-1, 1, 1) * spec.dilation)
    base_x = (ox[None] * spec.stride - spec.padding) + (kx.reshape(-1, 1, 1) * spec.dilation)
    off = offsets.reshape(n, k, 2, oh, ow)
    py = base_y[None] + off[:, :, 0]
    px = base_x[None] + off[:, :, 1]
    return py, px, (oh, ow)


def _bilinear_gather(x, py, px):
    """Batched bilinear sampling.

    Returns samples v of shape (n, c, k, oh, ow) and the cache needed for
    the backward pass (corner values, indices, weights, validity masks).
    """
    n, c, h, w = x.shape
    y0 = np.floor(py).astype(np.int64)
    x0 = np.floor(px).astype(np.int64)
    wy = (py - y0).astype(x.dtype)
    wx = (px - x0).astype(x.dtype)
    ni = np.arange(n)[:, None, None, None]
    corners = []
    v = 0.0
    for dy in (0, 1):
        for dx in (0, 1):
            yy = y0 + dy
            xx = x0 + dx
            valid = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            yc = np.clip(yy, 0, h - 1)
            xc = np.clip(xx, 0, w - 1)
            # advanced indexing -> (n, k, oh, ow, c); move c forward
            val = x[ni, :, yc, xc]
            val = np.moveaxis(val, -1, 1)
            val = val * valid[:, None].astype(x.dtype)
            cw = (wy if dy else 1.0 - wy) * (wx if dx else 1.0 - wx)
            v = v + val * cw[:, None]
            corners.append((val, yc, xc, valid))
    cache = (corners, wy, wx)
    return v, cache


def deform_conv2d(x, offsets, weight, bias, spec: ConvSpec, return_cache=False):
    """Deformable convolution: taps displaced by learned fractional offsets."""
    if spec.groups != 1:
        raise ConfigurationError("deformable convolution supports groups=1 only")
    _check_conv_shapes(x, weight, spec)
    n, c_in = x.shape[:2]
    c_out = weight.shape[0]
    kh, kw = spec.kernel
    py, px, (oh, ow) = _deform_geometry(x, offsets, spec)
    v, bl_cache = _bilinear_gather(x, py, px)
    wmat = weight.reshape(c_out, c_in * kh * kw)
    out = (wmat @ v.reshape(n, c_in * kh * kw, oh * ow)).reshape(n, c_out, oh, ow)
    if bias is not None:
        out = out + bias.reshape(1, c_out, 1, 1)
    if return_cache:
        return out, (v, bl_cache, py.shape)
    return out


def deform_conv2d_backward(dout, x, offsets, weight, cache, spec: ConvSpec,
                           with_dx=True):
    """Gradients of deform_conv2d: (dx, doffsets, dweight, dbias)."""
    v, (corners, wy, wx), _ = cache
    n, c_in, h, w = x.shape
    c_out = weight.shape[0]
    kh, kw = spec.kernel
    k = kh * kw
    oh, ow = dout.shape[2:]
    wmat = weight.reshape(c_out, c_in * k)
    doutm = dout.reshape(n, c_out, oh * ow)
    db = dout.sum(axis=(0, 2, 3))
    dw = np.matmul(doutm, v.reshape(n, c_in * k, -1).transpose(0, 2, 1)).sum(axis=0)
    dw = dw.reshape(weight.shape)
    dv = (wmat.T @ doutm).reshape(n, c_in, k, oh, ow)

    dx = None
    if with_dx:
        corner_weights = [
            (1.0 - wy) * (1.0 - wx),  # (0,0)
            (1.0 - wy) * wx,          # (0,1)
            wy * (1.0 - wx),          # (1,0)
            wy * wx,                  # (1,1)
        ]
        plane = h * w
        base = (np.arange(n)[:, None, None, None] * c_in
                + np.arange(c_in)[None, :, None, None]) * plane  # (n, c_in, 1, 1)
        dx_flat = np.zeros(n * c_in * plane, dtype=x.dtype)
        for (val, yc, xc, valid), cw in zip(corners, corner_weights):
            contrib = dv * (cw * valid.astype(x.dtype))[:, None]
            lin = base[..., None] + (yc * w + xc)[:, None]  # broadcast over c_in, k
            lin = np.broadcast_to(lin, contrib.shape)
            dx_flat += np.bincount(lin.ravel(), weights=contrib.ravel(),
                                   minlength=dx_flat.size).astype(x.dtype)
        dx = dx_flat.reshape(n, c_in, h, w)

    (c00, _, _, _), (c01, _, _, _), (c10, _, _, _), (c11, _, _, _) = corners
    dpy = (dv * ((c10 - c00) * (1.0 - wx[:, None]) + (c11 - c01) * wx[:, None])).sum(axis=1)
    dpx = (dv * ((c01 - c00) * (1.0 - wy[:, None]) + (c11 - c10) * wy[:, None])).sum(axis=1)
    doff = np.stack([dpy, dpx], axis=2).reshape(n, 2 * k, oh, ow)
    return dx, doff, dw, db


def channel_shuffle_perm(c: int, groups: int) -> np.ndarray:
    """Destination-order permutation: output channel i reads input perm[i]."""
    if c % groups != 0:
        raise ConfigurationError(f"channels {c} not divisible by shuffle groups {groups}")
    return np.arange(c).reshape(groups, c // groups).T.reshape(-1)


def channel_shuffle(x, groups: int):
    perm = channel_shuffle_perm(x.shape[1], groups)
    return np.ascontiguousarray(x[:, perm])


def global_avg_pool(x):
    return x.mean(axis=(2, 3), keepdims=True)


def global_max_pool(x):
    return x.max(axis=(2, 3), keepdims=True)


def channel_mean_map(x):
    return x.mean(axis=1, keepdims=True)


def channel_max_map(x):
    return x.max(axis=1, keepdims=True)


def broadcast_add(a, b):
    """Elementwise addition with numpy broadcasting (axes equal or 1)."""
    for ax, (da, db_) in enumerate(zip(a.shape, b.shape)):
        if da != db_ and da != 1 and db_ != 1:
            raise ShapeError(f"broadcast_add: axis {ax} sizes {da} vs {db_} incompatible")
    return a + b


def concat_channels(xs):
    ref = xs[0]
    for i, x in enumerate(xs[1:], start=1):
        if x.shape[0] != ref.shape[0]:
            raise ShapeError(f"concat input {i}: batch axis {x.shape[0]} != {ref.shape[0]}")
        if x.shape[2:] != ref.shape[2:]:
            raise ShapeError(f"concat input {i}: spatial axes {x.shape[2:]} != {ref.shape[2:]}")
    return np.concatenate(xs, axis=1)


def relu(x):
    return np.maximum(x, 0)


def sigmoid(x):
    # split by sign for numerical stability
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def maxpool2x2(x, return_cache=False):
    """2x2 max pooling, stride 2; ties break to the first window index."""
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2x2 needs even spatial axes, got {h}x{w}")
    win = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
    win = win.reshape(n, c, h // 2, w // 2, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    if return_cache:
        return out, idx
    return out


def maxpool2x2_backward(dout, x_shape, idx):
    n, c, h, w = x_shape
    dwin = np.zeros((n, c, h // 2, w // 2, 4), dtype=dout.dtype)
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    dwin = dwin.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return dwin.reshape(n, c, h, w)


def upsample_nearest2x(x):
    return x.repeat(2, axis=2).repeat(2, axis=3)


def upsample_nearest2x_backward(dout):
    n, c, h, w = dout.shape
    return dout.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))
