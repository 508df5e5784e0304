"""Safe evaluation of arithmetic expressions from configuration files.

Custom branch systems and digit potentials are written as short formulas such
as ``1 - 1/(y + i)``.  They are parsed with :mod:`ast`, checked against a
whitelist of node types, names and functions, and compiled into vectorized
numpy callables.  Attribute access, subscripts, lambdas and every name not on
the whitelist are rejected before anything is evaluated.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

FUNCTIONS: dict[str, Callable] = {
    "log": np.log,
    "log1p": np.log1p,
    "exp": np.exp,
    "expm1": np.expm1,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "floor": np.floor,
    "ceil": np.ceil,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "arctan": np.arctan,
    "minimum": np.minimum,
    "maximum": np.maximum,
}
CONSTANTS = {"pi": float(np.pi), "e": float(np.e)}

_ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Call,
    ast.Name,
    ast.Load,
    ast.Constant,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.Div,
    ast.Pow,
    ast.USub,
    ast.UAdd,
    ast.Mod,
    ast.FloorDiv,
)


class ExpressionError(ValueError):
    """Raised when an expression is malformed or uses forbidden constructs."""


@dataclass(frozen=True)
class Expression:
    """A validated formula in a fixed set of variables."""

    source: str
    variables: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "_code", _compile(self.source, self.variables))

    def __call__(self, *args) -> np.ndarray:
        if len(args) != len(self.variables):
            raise TypeError(f"expression expects {len(self.variables)} arguments")
        namespace = dict(FUNCTIONS)
        namespace.update(CONSTANTS)
        namespace.update({name: np.asarray(a, dtype=float) for name, a in zip(self.variables, args)})
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(eval(self._code, {"__builtins__": {}}, namespace), dtype=float)


def _compile(source: str, variables: Iterable[str]):
    try:
        tree = ast.parse(source.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {source!r}: {exc.msg}") from None
    allowed_names = set(variables) | set(CONSTANTS) | set(FUNCTIONS)
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ExpressionError(f"forbidden construct {type(node).__name__} in {source!r}")
        if isinstance(node, ast.Name) and node.id not in allowed_names:
            raise ExpressionError(f"unknown name {node.id!r} in {source!r}")
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
                raise ExpressionError(f"unknown function in {source!r}")
            if node.keywords:
                raise ExpressionError(f"keyword arguments are not allowed in {source!r}")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise ExpressionError(f"only numeric literals are allowed in {source!r}")
    return compile(tree, "<expression>", "eval")
