"""Field expressions over a closed catalogue of primitives.

Expressions are arithmetic strings (``+ - * / **``, unary minus) over named
coordinates, numeric literals, named parameters and the functions in
:data:`FUNCTIONS`. They are parsed with :mod:`ast` and compiled to closures,
so evaluation works unchanged on floats, numpy arrays and :class:`Jet` values.
"""

from __future__ import annotations

import ast
import math

from . import jet
from .errors import ExpressionError

FUNCTIONS = {
    "sin": jet.sin,
    "cos": jet.cos,
    "tan": jet.tan,
    "exp": jet.exp,
    "log": jet.log,
    "sqrt": jet.sqrt,
    "sinh": jet.sinh,
    "cosh": jet.cosh,
    "tanh": jet.tanh,
}
CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


class Expr:
    """A compiled catalogue expression.

    >>> Expr("0.5*v**2").evaluate({"v": 3.0})
    4.5
    """

    def __init__(self, text):
        if not isinstance(text, str):
            text = repr(float(text))
        self.text = text.strip()
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"syntax error: {exc.msg}", self.text, (exc.offset or 1) - 1) from None
        self.names = set()
        self._fn = self._compile(tree.body)

    def __repr__(self):
        return f"Expr({self.text!r})"

    @property
    def free_names(self):
        return frozenset(self.names - CONSTANTS.keys())

    def evaluate(self, env):
        return self._fn(env)

    def _fail(self, node, what):
        raise ExpressionError(f"{what} is not in the primitive catalogue", self.text, getattr(node, "col_offset", 0))

    def _compile(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                self._fail(node, f"literal {node.value!r}")
            value = float(node.value) if isinstance(node.value, float) else node.value
            return lambda env: value
        if isinstance(node, ast.Name):
            name = node.id
            if name in FUNCTIONS:
                self._fail(node, f"bare function name {name!r}")
            self.names.add(name)
            if name in CONSTANTS:
                value = CONSTANTS[name]
                return lambda env: value
            return lambda env: env[name]
        if isinstance(node, ast.UnaryOp):
            operand = self._compile(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda env: -operand(env)
            if isinstance(node.op, ast.UAdd):
                return operand
            self._fail(node, type(node.op).__name__)
        if isinstance(node, ast.BinOp):
            op = _BINOPS.get(type(node.op))
            if op is None:
                self._fail(node, f"operator {type(node.op).__name__}")
            left = self._compile(node.left)
            right = self._compile(node.right)
            return lambda env: op(left(env), right(env))
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                self._fail(node, "call")
            if len(node.args) != 1 or node.keywords:
                self._fail(node, f"{node.func.id} with {len(node.args)} arguments")
            fn = FUNCTIONS[node.func.id]
            arg = self._compile(node.args[0])
            return lambda env: fn(arg(env))
        self._fail(node, type(node).__name__)
