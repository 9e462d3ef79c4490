"""Reverse-mode automatic differentiation for scalar-network programs.

Machine-precision derivatives of programs built from a small set of array
primitives (affine maps, tanh, sums, products, slicing). The backward pass
is itself recorded on the tape, so a gradient can be differentiated once
more: enough for losses containing an input gradient, and for input
Hessians. Exactly one nesting level is supported; requesting a third
derivative level raises :class:`UnsupportedNestingError`.

All arithmetic is float64. Everything here is pure-functional: no global
tape, no shared mutable state.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Var",
    "constant",
    "leaf",
    "grad",
    "tanh",
    "matmul",
    "transpose",
    "vsum",
    "reshape",
    "concat",
    "dot",
    "norm_sq",
    "value_and_input_gradient",
    "input_hessian",
    "parameter_gradient",
    "DimensionMismatchError",
    "NonFiniteError",
    "UnsupportedNestingError",
]


class DimensionMismatchError(ValueError):
    """Input shape incompatible with the program's declared dimensions."""


class NonFiniteError(ValueError):
    """A NaN or Inf entered a derivative computation."""


class UnsupportedNestingError(RuntimeError):
    """A derivative of a derivative of a derivative was requested."""


class Var:
    """Node of the computation graph: a float64 array plus backward rule.

    ``level`` counts how many recorded backward passes this node descends
    from (0 = forward program, 1 = first gradient graph, ...).
    """

    __slots__ = ("value", "requires_grad", "level", "_parents", "_vjp")

    def __init__(self, value, requires_grad=False, parents=(), vjp=None, level=0):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.level = level
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(_as_var(other)))

    def __rsub__(self, other):
        return add(_as_var(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, c):
        if isinstance(c, Var):
            raise TypeError("only division by a plain scalar is supported")
        return mul(self, 1.0 / float(c))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return vsum(self, axis=axis, keepdims=keepdims)

    def item(self):
        return float(self.value)

    def __repr__(self):
        return f"Var(shape={self.value.shape}, level={self.level}, requires_grad={self.requires_grad})"


def _as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def constant(value) -> Var:
    """Wrap an array as a graph constant."""
    return Var(value)


def leaf(value) -> Var:
    """Wrap an array as a differentiable input."""
    v = Var(value, requires_grad=True)
    if not np.all(np.isfinite(v.value)):
        raise NonFiniteError("differentiable input contains NaN or Inf")
    return v


def _node(value, parents, vjp) -> Var:
    requires = any(p.requires_grad for p in parents)
    level = max((p.level for p in parents), default=0)
    return Var(value, requires_grad=requires, parents=tuple(parents), vjp=vjp, level=level)


# -- primitives ----------------------------------------------------------


def _unbroadcast(g: Var, shape: tuple) -> Var:
    """Reduce a cotangent back to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.value.ndim - len(shape)
    if extra > 0:
        g = vsum(g, axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = vsum(g, axis=axes, keepdims=True)
    if g.shape != shape:
        g = reshape(g, shape)
    return g


def add(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    return _node(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def neg(a) -> Var:
    a = _as_var(a)
    return _node(-a.value, (a,), lambda g: (neg(g),))


def mul(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    return _node(
        a.value * b.value,
        (a, b),
        lambda g: (_unbroadcast(mul(g, b), a.shape), _unbroadcast(mul(g, a), b.shape)),
    )


def matmul(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise DimensionMismatchError(
            f"matmul expects 2-D operands, got {a.value.ndim}-D @ {b.value.ndim}-D"
        )
    return _node(
        a.value @ b.value,
        (a, b),
        lambda g: (matmul(g, transpose(b)), matmul(transpose(a), g)),
    )


def transpose(a) -> Var:
    a = _as_var(a)
    return _node(a.value.T, (a,), lambda g: (transpose(g),))


def tanh(a) -> Var:
    a = _as_var(a)
    out_value = np.tanh(a.value)
    out = _node(out_value, (a,), None)
    # d tanh = 1 - tanh^2, expressed through the output node so the rule
    # itself stays differentiable
    out._vjp = lambda g: (mul(g, add(1.0, neg(mul(out, out)))),)
    return out


def vsum(a, axis=None, keepdims=False) -> Var:
    a = _as_var(a)
    value = np.sum(a.value, axis=axis, keepdims=keepdims)
    shape = a.shape

    def vjp(g):
        gv = g
        if axis is not None and not keepdims:
            kept = [1 if (axis == i or (isinstance(axis, tuple) and i in axis)) else d
                    for i, d in enumerate(shape)]
            gv = reshape(gv, tuple(kept))
        return (broadcast_to(gv, shape),)

    return _node(value, (a,), vjp)


def broadcast_to(a, shape) -> Var:
    a = _as_var(a)
    return _node(
        np.broadcast_to(a.value, shape).copy(),
        (a,),
        lambda g: (_unbroadcast(g, a.shape),),
    )


def reshape(a, shape) -> Var:
    a = _as_var(a)
    return _node(a.value.reshape(shape), (a,), lambda g: (reshape(g, a.shape),))


def take(a, key) -> Var:
    a = _as_var(a)
    return _node(a.value[key], (a,), lambda g: (scatter(g, key, a.shape),))


def scatter(g, key, shape) -> Var:
    g = _as_var(g)
    value = np.zeros(shape)
    value[key] = g.value
    return _node(value, (g,), lambda gg: (take(gg, key),))


def concat(parts: Sequence, axis=0) -> Var:
    parts = [_as_var(p) for p in parts]
    value = np.concatenate([p.value for p in parts], axis=axis)
    offsets = np.cumsum([0] + [p.shape[axis] for p in parts])

    def vjp(g):
        outs = []
        for i in range(len(parts)):
            key = [slice(None)] * value.ndim
            key[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
            outs.append(take(g, tuple(key)))
        return tuple(outs)

    return _node(value, tuple(parts), vjp)


def dot(a, b) -> Var:
    """Inner product of two same-shape arrays."""
    return vsum(mul(a, b))


def norm_sq(a) -> Var:
    """Squared Euclidean norm, summed over all entries."""
    return vsum(mul(a, a))


# -- backward pass -------------------------------------------------------


def _toposort(out: Var) -> list:
    order, seen, stack = [], set(), [(out, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    return order


def grad(out: Var, wrt: Sequence[Var], create_graph: bool = False) -> list:
    """Gradients of a scalar ``out`` with respect to the leaves ``wrt``.

    With ``create_graph=True`` the returned cotangents are themselves graph
    nodes and can be differentiated one more time. Differentiating a
    gradient graph again with ``create_graph=True`` is refused.
    """
    if out.value.size != 1:
        raise DimensionMismatchError("grad expects a scalar output")
    if create_graph and out.level >= 1:
        raise UnsupportedNestingError(
            "derivatives are supported to one nesting level only"
        )
    seed = Var(np.ones_like(out.value), level=out.level + 1)
    cotangents = {id(out): seed}
    for node in reversed(_toposort(out)):
        g = cotangents.get(id(node))
        if g is None or node._vjp is None:
            continue
        for parent, contrib in zip(node._parents, node._vjp(g)):
            if contrib is None or not parent.requires_grad:
                continue
            held = cotangents.get(id(parent))
            cotangents[id(parent)] = contrib if held is None else add(held, contrib)
    results = []
    for w in wrt:
        g = cotangents.get(id(w))
        if g is None:
            g = Var(np.zeros_like(w.value), level=out.level + 1)
        results.append(g)
    return results


# -- contract-level API ----------------------------------------------------

# A differentiable scalar program: callable(theta: Var, y: Var) -> scalar Var,
# where theta is the flat parameter vector and y the input point.
ScalarProgram = Callable[[Var, Var], Var]


def _check_point(y, dim=None) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise DimensionMismatchError(f"expected a flat input vector, got shape {y.shape}")
    if dim is not None and y.shape[0] != dim:
        raise DimensionMismatchError(f"input has dimension {y.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(y)):
        raise NonFiniteError("input point contains NaN or Inf")
    return y


def value_and_input_gradient(f: ScalarProgram, params, y) -> tuple[float, np.ndarray]:
    """Evaluate ``f`` and its exact gradient with respect to the input point."""
    yv = leaf(_check_point(y))
    out = f(constant(params), yv)
    (g,) = grad(out, [yv])
    if not np.isfinite(out.value) or not np.all(np.isfinite(g.value)):
        raise NonFiniteError("non-finite value or gradient")
    return out.item(), g.value


def input_hessian(f: ScalarProgram, params, y) -> np.ndarray:
    """Dense Hessian of ``f`` with respect to the input point, symmetrized."""
    y = _check_point(y)
    d = y.shape[0]
    yv = leaf(y)
    out = f(constant(params), yv)
    (g,) = grad(out, [yv], create_graph=True)
    rows = []
    for i in range(d):
        (row,) = grad(g[i], [yv])
        rows.append(row.value)
    hess = np.array(rows)
    if not np.all(np.isfinite(hess)):
        raise NonFiniteError("non-finite Hessian")
    return 0.5 * (hess + hess.T)


def parameter_gradient(loss: Callable[[Var], Var], params) -> np.ndarray:
    """Gradient of a scalar loss program with respect to its flat parameters.

    The loss may internally take one input gradient of the same parameters
    (via :func:`grad` with ``create_graph=True``); deeper nesting raises.
    """
    params = np.asarray(params, dtype=np.float64)
    if not np.all(np.isfinite(params)):
        raise NonFiniteError("parameter vector contains NaN or Inf")
    theta = leaf(params)
    out = loss(theta)
    (g,) = grad(out, [theta])
    if not np.all(np.isfinite(g.value)):
        raise NonFiniteError("non-finite parameter gradient")
    return g.value
