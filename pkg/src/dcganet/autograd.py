"""Reverse-mode differentiation over the tensor-core kernels.

A :class:`Tape` records every differentiable op in execution order (which
is automatically topological), then :meth:`Tape.backward` walks the nodes
once in reverse, accumulating gradients additively across fan-out. Leaves
are :class:`Variable` objects with ``requires_grad=True``; their gradients
land in ``.grad``. Intermediate buffers are released as soon as their node
has been processed.

Ops live in :mod:`dcganet.functional`; they run the forward kernel and, if
a tape is active, register vector-Jacobian closures on it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TapeUsageError


class Variable:
    """A numpy array plus gradient slot; leaves carry requires_grad."""

    __slots__ = ("data", "grad", "requires_grad", "name", "source")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 source: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        # source: graph input with no producer; gradients through it are
        # never needed unless it is a leaf, so vjps can be skipped
        self.source = source

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" '{self.name}'" if self.name else ""
        return f"Variable{tag}(shape={self.shape}, requires_grad={self.requires_grad})"


_ACTIVE: list["Tape"] = []


def active_tape():
    return _ACTIVE[-1] if _ACTIVE else None


class Tape:
    """Ordered record of forward ops enabling one reverse sweep."""

    def __init__(self):
        self._nodes = []  # (out Variable, [(input Variable, vjp callable), ...])

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.pop()
        return False

    def record(self, out: Variable, input_vjps):
        self._nodes.append((out, input_vjps))

    def __len__(self):
        return len(self._nodes)

    def backward(self, loss: Variable, seed=None):
        """Accumulate d(loss)/d(leaf) into every reachable leaf's .grad."""
        if not self._nodes:
            raise TapeUsageError("backward() on an empty tape")
        if seed is None:
            seed = np.ones_like(loss.data)
        pending = {id(loss): np.asarray(seed, dtype=loss.data.dtype)}
        for out, input_vjps in reversed(self._nodes):
            g = pending.pop(id(out), None)
            if g is None:
                continue  # branch that does not feed the loss
            for var, vjp in input_vjps:
                gi = vjp(g)
                if var.requires_grad:
                    if var.grad is None:
                        var.grad = gi.copy()
                    else:
                        var.grad += gi
                else:
                    acc = pending.get(id(var))
                    if acc is None:
                        # copy: a vjp may return a view of (or the) upstream
                        # gradient, which in-place accumulation must not touch
                        pending[id(var)] = gi.copy()
                    else:
                        acc += gi


@dataclass
class GradCheckReport:
    op_name: str
    max_rel_error: float
    worst_param: str
    worst_index: tuple

    def ok(self, tol: float) -> bool:
        return self.max_rel_error <= tol


def _rel_err(a, f, floor=1e-8):
    return abs(a - f) / max(abs(a), abs(f), floor)


def grad_check(forward, params, epsilon: float = 1e-5, op_name: str = "op",
               max_coords: int | None = None, rng=None,
               floor: float = 1e-8) -> GradCheckReport:
    """Compare tape gradients with central differences.

    ``forward`` is a closure over ``params`` returning a scalar Variable.
    With ``max_coords`` set, only that many randomly chosen coordinates per
    parameter are perturbed (needed for whole-network checks). ``floor``
    bounds the relative-error denominator; raise it when the loss magnitude
    puts finite-difference resolution above the default 1e-8.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise TapeUsageError(f"epsilon {epsilon} outside [1e-7, 1e-3]")
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        out = forward()
        if out.data.size != 1:
            raise TapeUsageError(f"grad_check requires a scalar loss, got shape {out.shape}")
        tape.backward(out)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = GradCheckReport(op_name, 0.0, "", ())
    rng = np.random.default_rng(0) if rng is None else rng
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        n = flat.size
        if max_coords is not None and n > max_coords:
            coords = rng.choice(n, size=max_coords, replace=False)
        else:
            coords = range(n)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + epsilon
            f_plus = float(forward().data)
            flat[i] = orig - epsilon
            f_minus = float(forward().data)
            flat[i] = orig
            fd = (f_plus - f_minus) / (2 * epsilon)
            err = _rel_err(float(ana.reshape(-1)[i]), fd, floor)
            if err > worst.max_rel_error:
                worst.max_rel_error = err
                worst.worst_param = p.name or "param"
                worst.worst_index = np.unravel_index(i, p.data.shape)
    return worst
