"""Differentiable ops: forward kernels plus VJP registration on the tape.

Every function takes and returns :class:`~dcganet.autograd.Variable`;
outside a ``with Tape():`` block they are plain forward evaluations.
"""
from __future__ import annotations

import numpy as np

from . import kernels as K
from .autograd import Variable, active_tape
from .errors import ShapeError
from .kernels import ConvSpec


def constant(data) -> Variable:
    return Variable(np.asarray(data), requires_grad=False, source=True)


def _dead(var: Variable) -> bool:
    return var.source and not var.requires_grad


def _emit(out_data, input_vjps) -> Variable:
    out = Variable(out_data)
    tape = active_tape()
    if tape is not None:
        tape.record(out, [(v, f) for v, f in input_vjps if not _dead(v)])
    return out


def _reduce_to(g, shape):
    """Sum-reduce a broadcasted gradient back to the original shape."""
    if g.shape == shape:
        return g
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    return g.sum(axis=axes, keepdims=True)


def add(a: Variable, b: Variable) -> Variable:
    out = K.broadcast_add(a.data, b.data) if a.data.ndim == 4 and b.data.ndim == 4 \
        else a.data + b.data
    return _emit(out, [
        (a, lambda g: _reduce_to(g, a.data.shape)),
        (b, lambda g: _reduce_to(g, b.data.shape)),
    ])


broadcast_add = add


def sub(a: Variable, b: Variable) -> Variable:
    return _emit(a.data - b.data, [
        (a, lambda g: _reduce_to(g, a.data.shape)),
        (b, lambda g: _reduce_to(-g, b.data.shape)),
    ])


def mul(a: Variable, b: Variable) -> Variable:
    ad, bd = a.data, b.data
    return _emit(ad * bd, [
        (a, lambda g: _reduce_to(g * bd, ad.shape)),
        (b, lambda g: _reduce_to(g * ad, bd.shape)),
    ])


def scale(a: Variable, s: float) -> Variable:
    return _emit(a.data * s, [(a, lambda g: g * s)])


def relu(a: Variable) -> Variable:
    mask = a.data > 0
    return _emit(a.data * mask, [(a, lambda g: g * mask)])


def sigmoid(a: Variable) -> Variable:
    s = K.sigmoid(a.data)
    return _emit(s, [(a, lambda g: g * s * (1.0 - s))])


def sum_all(a: Variable) -> Variable:
    shape = a.data.shape
    return _emit(np.asarray(a.data.sum()), [(a, lambda g: np.broadcast_to(g, shape).astype(a.dtype))])


def sum_per_sample(a: Variable) -> Variable:
    """Sum over (c, h, w) per batch element -> shape (n,)."""
    n = a.data.shape[0]
    shape = a.data.shape
    return _emit(a.data.reshape(n, -1).sum(axis=1),
                 [(a, lambda g: np.broadcast_to(g.reshape(n, 1, 1, 1), shape).astype(a.dtype))])


def mean_all(a: Variable) -> Variable:
    size = a.data.size
    shape = a.data.shape
    return _emit(np.asarray(a.data.mean()),
                 [(a, lambda g: np.broadcast_to(g / size, shape).astype(a.dtype))])


def conv2d(x: Variable, weight: Variable, bias: Variable | None, spec: ConvSpec) -> Variable:
    out, colg = K.conv2d(x.data, weight.data, None if bias is None else bias.data,
                         spec, return_cache=True)
    xshape, w_data = x.data.shape, weight.data
    need_dx = not _dead(x)

    state = {}

    def _bw(g):
        if "grads" not in state:
            state["grads"] = K.conv2d_backward(g, xshape, w_data, colg, spec,
                                               with_dx=need_dx)
        return state["grads"]

    vjps = [(x, lambda g: _bw(g)[0]), (weight, lambda g: _bw(g)[1])]
    if bias is not None:
        vjps.append((bias, lambda g: _bw(g)[2]))
    return _emit(out, vjps)


dilated_conv2d = conv2d


def deform_conv2d(x: Variable, offsets: Variable, weight: Variable,
                  bias: Variable | None, spec: ConvSpec) -> Variable:
    out, cache = K.deform_conv2d(x.data, offsets.data, weight.data,
                                 None if bias is None else bias.data, spec, return_cache=True)
    xd, od, wd = x.data, offsets.data, weight.data
    need_dx = not _dead(x)
    state = {}

    def _bw(g):
        if "grads" not in state:
            state["grads"] = K.deform_conv2d_backward(g, xd, od, wd, cache, spec,
                                                      with_dx=need_dx)
        return state["grads"]

    vjps = [(x, lambda g: _bw(g)[0]), (offsets, lambda g: _bw(g)[1]),
            (weight, lambda g: _bw(g)[2])]
    if bias is not None:
        vjps.append((bias, lambda g: _bw(g)[3]))
    return _emit(out, vjps)


def channel_shuffle(x: Variable, groups: int) -> Variable:
    perm = K.channel_shuffle_perm(x.data.shape[1], groups)
    inv = np.argsort(perm)
    return _emit(np.ascontiguousarray(x.data[:, perm]),
                 [(x, lambda g: np.ascontiguousarray(g[:, inv]))])


def global_avg_pool(x: Variable) -> Variable:
    n, c, h, w = x.data.shape
    return _emit(K.global_avg_pool(x.data),
                 [(x, lambda g: np.broadcast_to(g / (h * w), (n, c, h, w)).astype(x.dtype))])


def global_max_pool(x: Variable) -> Variable:
    n, c, h, w = x.data.shape
    flat = x.data.reshape(n, c, h * w)
    idx = flat.argmax(axis=2)  # first max in scan order
    out = np.take_along_axis(flat, idx[..., None], axis=2).reshape(n, c, 1, 1)

    def _bw(g):
        df = np.zeros_like(flat)
        np.put_along_axis(df, idx[..., None], g.reshape(n, c, 1), axis=2)
        return df.reshape(n, c, h, w)

    return _emit(out, [(x, _bw)])


def channel_mean_map(x: Variable) -> Variable:
    n, c, h, w = x.data.shape
    return _emit(K.channel_mean_map(x.data),
                 [(x, lambda g: np.broadcast_to(g / c, (n, c, h, w)).astype(x.dtype))])


def channel_max_map(x: Variable) -> Variable:
    n, c, h, w = x.data.shape
    idx = x.data.argmax(axis=1, keepdims=True)
    out = np.take_along_axis(x.data, idx, axis=1)

    def _bw(g):
        dx = np.zeros_like(x.data)
        np.put_along_axis(dx, idx, g, axis=1)
        return dx

    return _emit(out, [(x, _bw)])


def concat_channels(xs) -> Variable:
    out = K.concat_channels([x.data for x in xs])
    vjps = []
    start = 0
    for x in xs:
        c = x.data.shape[1]
        lo, hi = start, start + c
        vjps.append((x, lambda g, lo=lo, hi=hi: g[:, lo:hi]))
        start = hi
    return _emit(out, vjps)


def maxpool2x2(x: Variable) -> Variable:
    out, idx = K.maxpool2x2(x.data, return_cache=True)
    xshape = x.data.shape
    return _emit(out, [(x, lambda g: K.maxpool2x2_backward(g, xshape, idx))])


def upsample_nearest2x(x: Variable) -> Variable:
    return _emit(K.upsample_nearest2x(x.data),
                 [(x, lambda g: K.upsample_nearest2x_backward(g))])


def soft_iou_loss(pred_probs: Variable, target, smooth: float = 1.0) -> Variable:
    """1 - (|P.T| + s)/(|P| + |T| - |P.T| + s), mean over the batch.

    ``pred_probs`` must already be in [0, 1]; ``target`` is a binary numpy
    mask of the same shape. Fused op with a hand-derived gradient.
    """
    t = np.asarray(target, dtype=pred_probs.dtype)
    p = pred_probs.data
    if p.shape != t.shape:
        raise ShapeError(f"soft_iou_loss: pred shape {p.shape} != target shape {t.shape}")
    n = p.shape[0]
    pf = p.reshape(n, -1)
    tf = t.reshape(n, -1)
    inter = (pf * tf).sum(axis=1)
    union = pf.sum(axis=1) + tf.sum(axis=1) - inter
    ratio = (inter + smooth) / (union + smooth)
    loss = np.asarray((1.0 - ratio).mean())

    def _bw(g):
        den = (union + smooth)[:, None]
        num = (inter + smooth)[:, None]
        dratio = (tf * den - num * (1.0 - tf)) / (den * den)
        return (-float(g) / n) * dratio.reshape(p.shape)

    return _emit(loss, [(pred_probs, _bw)])
