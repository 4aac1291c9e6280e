"""Chart-spec files: JSON descriptions of a coordinate grid and a metric.

    {"axes": [{"name": "x", "origin": 0, "spacing": 0.01, "count": 9}, ...],
     "metric": [["1", "0"], ["0", "sin(x)^2"]],        # or {"diagonal": [...]}
     "signature": [1, 1]}

A product metric uses a "bcwp" block in place of "metric":

    {"bcwp": {"base": {...chart...}, "fiber": {...chart...}, "c": "exp(x)", "w": "x"}}

or an "sbcwp" block with "psi" and "mu".  Expressions use + - * / ^ ** and
sin cos tan exp log sqrt pow abs sinh cosh tanh over the axis names and pi, e.
"""

from __future__ import annotations

import ast
import json
import operator
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bcwp import BcwpFunctions, BcwpSpec, assemble
from .geometry import Axis, ChartGrid, MetricField

__all__ = ["ChartSpecError", "compile_expression", "ChartSpec", "parse_chart_spec", "load_chart_spec"]


class ChartSpecError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column = line, column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
    "pow": np.power, "abs": np.abs, "sinh": np.sinh, "cosh": np.cosh, "tanh": np.tanh,
}
_CONSTS = {"pi": np.pi, "e": np.e}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNARY = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def compile_expression(text: str, names) -> Callable:
    """Compile an arithmetic expression over ``names`` into f(*coords)."""
    names = tuple(names)
    src = str(text).replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ChartSpecError(f"bad expression {text!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            val = float(node.value)
            return lambda env: val
        if isinstance(node, ast.Name):
            if node.id in names:
                idx = names.index(node.id)
                return lambda env: env[idx]
            if node.id in _CONSTS:
                val = _CONSTS[node.id]
                return lambda env: val
            raise ChartSpecError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, a, b = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda env: op(a(env), b(env))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            op, a = _UNARY[type(node.op)], build(node.operand)
            return lambda env: op(a(env))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
            if node.func.id not in _FUNCS:
                raise ChartSpecError(f"unknown function {node.func.id!r} in {text!r}")
            fn, args = _FUNCS[node.func.id], [build(a) for a in node.args]
            return lambda env: fn(*(a(env) for a in args))
        raise ChartSpecError(f"unsupported syntax {type(node).__name__} in {text!r}")

    body = build(tree)

    def f(*coords):
        out = body(coords)
        shape = np.shape(coords[0]) if coords else ()
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else float(out)

    return f


@dataclass(frozen=True, eq=False)
class ChartSpec:
    grid: ChartGrid
    metric: MetricField
    bcwp: BcwpSpec | None = None


def _locate(text: str, needle: str) -> tuple[int | None, int | None]:
    pos = text.find(needle)
    if pos < 0:
        return None, None
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def _grid(block) -> ChartGrid:
    axes = block.get("axes")
    if not isinstance(axes, list) or not axes:
        raise ChartSpecError("'axes' must be a non-empty list")
    out = []
    for a in axes:
        try:
            out.append(Axis(str(a["name"]), float(a["origin"]), float(a["spacing"]), int(a["count"]),
                            bool(a.get("periodic", False))))
        except KeyError as exc:
            raise ChartSpecError(f"axis is missing field {exc.args[0]!r}") from None
    return ChartGrid(tuple(out))


def _entries(block, names):
    metric = block.get("metric")
    n = len(names)
    if isinstance(metric, dict) and "diagonal" in metric:
        diag = metric["diagonal"]
        if len(diag) != n:
            raise ChartSpecError(f"diagonal metric needs {n} entries")
        return [[diag[i] if i == j else 0 for j in range(n)] for i in range(n)]
    if not isinstance(metric, list) or len(metric) != n or any(len(row) != n for row in metric):
        raise ChartSpecError(f"'metric' must be an {n} x {n} list of expressions")
    return metric


def _compile_entries(entries, names):
    return [[compile_expression(e, names) if isinstance(e, str) else float(e) for e in row] for row in entries]


def _metric(block) -> tuple[ChartGrid, list]:
    grid = _grid(block)
    return grid, _compile_entries(_entries(block, grid.names), grid.names)


def parse_chart_spec(text: str) -> ChartSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChartSpecError(exc.msg, exc.lineno, exc.colno) from None
    try:
        return _build(doc)
    except ChartSpecError as exc:
        if exc.line is not None:
            raise
        # point at the first quoted token named in the message, if any
        msg = str(exc)
        line = col = None
        for token in msg.split("'")[1::2]:
            line, col = _locate(text, token)
            if line is not None:
                break
        raise ChartSpecError(msg, line, col) from None


def _need(block, key):
    if not isinstance(block, dict) or key not in block:
        raise ChartSpecError(f"missing field '{key}'")
    return block[key]


def _build(doc) -> ChartSpec:
    if not isinstance(doc, dict):
        raise ChartSpecError("top level must be an object")
    if "bcwp" in doc or "sbcwp" in doc:
        key = "bcwp" if "bcwp" in doc else "sbcwp"
        blk = doc[key]
        bgrid, bent = _metric(_need(blk, "base"))
        fgrid, fent = _metric(_need(blk, "fiber"))
        if key == "bcwp":
            c = compile_expression(_need(blk, "c"), bgrid.names)
            w = compile_expression(_need(blk, "w"), bgrid.names)
        else:
            psi = compile_expression(_need(blk, "psi"), bgrid.names)
            mu = float(_need(blk, "mu"))
            c = (lambda *x: psi(*x) ** mu)
            w = psi
        spec = BcwpSpec.from_functions(bgrid, fgrid, BcwpFunctions(bent, fent, c, w),
                                       blk["base"].get("signature"), blk["fiber"].get("signature"))
        g = assemble(spec)
        return ChartSpec(g.grid, g, spec)
    grid, entries = _metric(doc)
    return ChartSpec(grid, MetricField.from_functions(grid, entries, doc.get("signature")))


def load_chart_spec(path) -> ChartSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_chart_spec(fh.read())
