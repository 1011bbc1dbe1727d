"""A small expression grammar for data functions f and g.

Allowed: numbers, the coordinates ``x0``, ``x1`` (``x`` is ``x0`` in 1-d),
``r`` for |x|, ``+ - * /``, integer powers ``**k`` with k >= 0, ``abs(e)`` and
``ball(radius)`` / ``ball(radius, c0[, c1])``, the indicator of the open ball.
Division is only by constants. Example: ``"ball(2) - ball(1)"``.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidSpecError

_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)


@dataclass(frozen=True)
class Expression:
    """A parsed expression, vectorised over points of shape (..., dim)."""

    text: str
    dim: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidSpecError("expressions support dimensions 1 and 2")
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise InvalidSpecError(f"cannot parse expression {self.text!r}: {exc.msg}") from None
        _validate(tree.body, self.dim)
        object.__setattr__(self, "_tree", tree.body)

    def __call__(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        if p.shape[-1] != self.dim:
            p = p[..., None] if self.dim == 1 else p
        if p.shape[-1] != self.dim:
            raise InvalidSpecError("points do not match the expression dimension")
        out = _eval(self._tree, p)
        return np.broadcast_to(out, p.shape[:-1]).astype(float)

    def far_field(self) -> Optional[tuple]:
        """(value, radius) when the expression is constant for |x|_∞ > radius, else None."""
        return _far(self._tree)

    def bound(self) -> float:
        """An upper bound for |expression| on R^d (inf when unbounded)."""
        return _bound(self._tree)


def parse(text: str, dim: int) -> Expression:
    return Expression(str(text), int(dim))


def _names(dim):
    return {"x0", "r", "x"} if dim == 1 else {"x0", "x1", "r"}


def _const(node) -> Optional[float]:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        c = _const(node.operand)
        return None if c is None else (-c if isinstance(node.op, ast.USub) else c)
    return None


def _validate(node, dim):
    if _const(node) is not None:
        return
    if isinstance(node, ast.Constant):
        raise InvalidSpecError(f"unsupported constant {node.value!r}")
    if isinstance(node, ast.Name):
        if node.id not in _names(dim):
            raise InvalidSpecError(f"unknown variable {node.id!r}")
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        _validate(node.operand, dim)
        return
    if isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        _validate(node.left, dim)
        if isinstance(node.op, ast.Pow):
            k = _const(node.right)
            if k is None or k < 0 or k != int(k):
                raise InvalidSpecError("powers must be nonnegative integer constants")
            return
        if isinstance(node.op, ast.Div) and _const(node.right) is None:
            raise InvalidSpecError("division is only allowed by constants")
        if isinstance(node.op, ast.Div) and _const(node.right) == 0:
            raise InvalidSpecError("division by zero")
        _validate(node.right, dim)
        return
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name, args = node.func.id, node.args
        if name == "abs" and len(args) == 1:
            _validate(args[0], dim)
            return
        if name == "ball" and len(args) in (1, 1 + dim):
            vals = [_const(a) for a in args]
            if any(v is None for v in vals) or vals[0] <= 0:
                raise InvalidSpecError("ball() takes a positive radius and constant centre coordinates")
            return
    raise InvalidSpecError(f"unsupported syntax: {ast.dump(node)[:60]}")


def _eval(node, p):
    c = _const(node)
    if c is not None:
        return np.float64(c)
    if isinstance(node, ast.Name):
        if node.id == "r":
            return np.sqrt(np.sum(p * p, axis=-1))
        return p[..., 1] if node.id == "x1" else p[..., 0]
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, p)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a = _eval(node.left, p)
        if isinstance(node.op, ast.Pow):
            return a ** int(_const(node.right))
        b = _eval(node.right, p)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        if isinstance(node.op, ast.Mult):
            return a * b
        return a / b
    name, args = node.func.id, node.args
    if name == "abs":
        return np.abs(_eval(args[0], p))
    vals = [_const(a) for a in args]
    center = np.zeros(p.shape[-1])
    if len(vals) > 1:
        center[:] = vals[1:]
    return (np.sum((p - center) ** 2, axis=-1) < vals[0] ** 2).astype(float)


def _far(node):
    c = _const(node)
    if c is not None:
        return c, 0.0
    if isinstance(node, ast.Name):
        return None
    if isinstance(node, ast.UnaryOp):
        f = _far(node.operand)
        return None if f is None else ((-f[0] if isinstance(node.op, ast.USub) else f[0]), f[1])
    if isinstance(node, ast.BinOp):
        a = _far(node.left)
        if isinstance(node.op, ast.Pow):
            return None if a is None else (a[0] ** int(_const(node.right)), a[1])
        b = _far(node.right)
        if isinstance(node.op, ast.Mult):
            # a factor vanishing far out kills any locally bounded partner
            if a is not None and a[0] == 0.0:
                return 0.0, a[1]
            if b is not None and b[0] == 0.0:
                return 0.0, b[1]
        if a is None or b is None:
            return None
        if isinstance(node.op, ast.Add):
            return a[0] + b[0], max(a[1], b[1])
        if isinstance(node.op, ast.Sub):
            return a[0] - b[0], max(a[1], b[1])
        if isinstance(node.op, ast.Mult):
            return a[0] * b[0], max(a[1], b[1])
        return a[0] / b[0], max(a[1], b[1])
    name, args = node.func.id, node.args
    if name == "abs":
        f = _far(args[0])
        return None if f is None else (abs(f[0]), f[1])
    vals = [_const(a) for a in args]
    return 0.0, vals[0] + max([abs(v) for v in vals[1:]], default=0.0)


def _bound(node):
    c = _const(node)
    if c is not None:
        return abs(c)
    if isinstance(node, ast.Name):
        return np.inf
    if isinstance(node, ast.UnaryOp):
        return _bound(node.operand)
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Mult):
            # a compactly supported factor bounds polynomial partners on its support
            for s, o in ((node.left, node.right), (node.right, node.left)):
                fs = _far(s)
                if fs is not None and fs[0] == 0.0 and np.isfinite(_bound(s)):
                    return _bound(s) * _local_bound(o, fs[1])
        a = _bound(node.left)
        if isinstance(node.op, ast.Pow):
            return a ** int(_const(node.right))
        b = _bound(node.right)
        if isinstance(node.op, (ast.Add, ast.Sub)):
            return a + b
        if isinstance(node.op, ast.Mult):
            return a * b
        return a / abs(_const(node.right))
    if node.func.id == "abs":
        return _bound(node.args[0])
    return 1.0


def _local_bound(node, radius):
    """Bound of |node| on the cube |x|_∞ <= radius."""
    c = _const(node)
    if c is not None:
        return abs(c)
    if isinstance(node, ast.Name):
        return radius * (np.sqrt(2.0) if node.id == "r" else 1.0)
    if isinstance(node, ast.UnaryOp):
        return _local_bound(node.operand, radius)
    if isinstance(node, ast.BinOp):
        a = _local_bound(node.left, radius)
        if isinstance(node.op, ast.Pow):
            return a ** int(_const(node.right))
        b = _local_bound(node.right, radius)
        if isinstance(node.op, (ast.Add, ast.Sub)):
            return a + b
        if isinstance(node.op, ast.Mult):
            return a * b
        return a / abs(_const(node.right))
    if node.func.id == "abs":
        return _local_bound(node.args[0], radius)
    return 1.0
