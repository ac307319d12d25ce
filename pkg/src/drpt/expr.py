"""Tiny arithmetic expression language for ratio functions.

Grammar: numbers, ``+ - * / ^`` (``**`` also accepted), unary minus,
parentheses, the functions ``exp log abs sqrt``, coordinate references
``x1 .. xd`` (``x`` is an alias for ``x1``), the constants ``e`` and ``pi``,
and any named parameters supplied at construction.  Evaluation is vectorised
over the rows of a point array.
"""

from __future__ import annotations

import ast
import math
import re
from typing import Mapping

import numpy as np

_FUNCS = {"exp": np.exp, "log": np.log, "abs": np.abs, "sqrt": np.sqrt}
_CONSTS = {"e": math.e, "pi": math.pi}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_COORD = re.compile(r"^x(\d*)$")


class ExpressionError(ValueError):
    pass


def parse(text: str) -> ast.Expression:
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse ratio expression {text!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        ok = isinstance(
            node,
            (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Constant, ast.Load,
             ast.USub, ast.UAdd, *_BINOPS),
        )
        if not ok:
            raise ExpressionError(f"unsupported syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"only exp/log/abs/sqrt of one argument are allowed in {text!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ExpressionError(f"non-numeric literal in {text!r}")
    return tree


def names(tree: ast.Expression) -> set[str]:
    out = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Name):
            out.add(node.id)
    called = {n.func.id for n in ast.walk(tree) if isinstance(n, ast.Call)}
    return out - called


def evaluate(tree: ast.Expression, points: np.ndarray, params: Mapping[str, float]) -> np.ndarray:
    """Evaluate on ``points`` of shape (N, d) (or (N,) for scalar data)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    npts = pts.shape[0]

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in params:
                return float(params[node.id])
            mt = _COORD.match(node.id)
            if mt:
                k = int(mt.group(1) or 1)
                if not 1 <= k <= pts.shape[1]:
                    raise ExpressionError(f"coordinate {node.id} out of range for dimension {pts.shape[1]}")
                return pts[:, k - 1]
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise ExpressionError(f"unknown name {node.id!r}")
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.Call):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ExpressionError(f"unsupported node {type(node).__name__}")

    with np.errstate(all="ignore"):
        out = ev(tree)
    return np.broadcast_to(np.asarray(out, dtype=float), (npts,)).copy()
