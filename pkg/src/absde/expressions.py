"""A small, closed arithmetic language for drifts, terminals and delays.

Expressions are parsed with :mod:`ast` and compiled into numpy closures;
nothing is ever passed to ``eval``.  Accepted syntax:

* numbers, ``+``, ``-``, ``*``, unary minus, parentheses;
* ``/`` only with a numeric literal as the denominator;
* ``**`` only with a small nonnegative integer literal exponent, and only
  where the caller enables it (terminals and delays, never drifts);
* calls ``abs``, ``sin``, ``cos``, ``expb`` (exponential with its argument
  clipped to [-50, 50]), ``min`` and ``max`` of two arguments;
* the variables of the context: ``t, y, z, EY, EZ`` for drifts, where
  ``EY`` and ``EZ`` are the conditional means of the anticipated ``Y`` and
  ``Z``; ``t, b`` for terminals; ``t`` for delays;
* in drifts, ``E[...]`` around an expression in ``theta`` and ``phi``: the
  conditional expectation of that function of the anticipated values.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ExpressionError

_EXP_CLIP = 50.0
_MAX_POWER = 4


def expb(x):
    return np.exp(np.clip(x, -_EXP_CLIP, _EXP_CLIP))


_FUNCS = {
    "abs": (1, np.abs),
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "expb": (1, expb),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}


def take_theta(a, b):
    return a


def take_phi(a, b):
    return b


def _literal(node):
    """Numeric value of a literal (possibly signed), else ``None``."""
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        return float(node.value)
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _literal(node.operand)
        if inner is not None:
            return -inner if isinstance(node.op, ast.USub) else inner
    return None


class _Compiler:
    def __init__(self, variables, allow_pow=False, allow_expectation=False):
        self.variables = set(variables)
        self.allow_pow = allow_pow
        self.allow_expectation = allow_expectation
        self.used = set()

    def compile(self, node):
        method = getattr(self, "_" + type(node).__name__, None)
        if method is None:
            raise ExpressionError(f"unsupported syntax: {type(node).__name__}")
        return method(node)

    def _Expression(self, node):
        return self.compile(node.body)

    def _Constant(self, node):
        value = _literal(node)
        if value is None:
            raise ExpressionError(f"unsupported constant {node.value!r}")
        return lambda env: value

    def _Name(self, node):
        if node.id not in self.variables:
            raise ExpressionError(f"unknown variable {node.id!r}")
        self.used.add(node.id)
        name = node.id
        if name == "EY":
            return lambda env: env["q"].expect(take_theta)
        if name == "EZ":
            return lambda env: env["q"].expect(take_phi)
        return lambda env: env[name]

    def _UnaryOp(self, node):
        operand = self.compile(node.operand)
        if isinstance(node.op, ast.USub):
            return lambda env: -operand(env)
        if isinstance(node.op, ast.UAdd):
            return operand
        raise ExpressionError("only unary + and - are allowed")

    def _BinOp(self, node):
        left = self.compile(node.left)
        op = node.op
        if isinstance(op, ast.Div):
            denom = _literal(node.right)
            if denom is None or denom == 0.0:
                raise ExpressionError("division needs a nonzero numeric literal denominator")
            return lambda env: left(env) / denom
        if isinstance(op, ast.Pow):
            power = _literal(node.right)
            if not self.allow_pow:
                raise ExpressionError("'**' is not allowed in this context")
            if power is None or power != int(power) or not 0 <= power <= _MAX_POWER:
                raise ExpressionError(f"exponent must be an integer literal in 0..{_MAX_POWER}")
            p = int(power)
            return lambda env: left(env) ** p
        right = self.compile(node.right)
        if isinstance(op, ast.Add):
            return lambda env: left(env) + right(env)
        if isinstance(op, ast.Sub):
            return lambda env: left(env) - right(env)
        if isinstance(op, ast.Mult):
            return lambda env: left(env) * right(env)
        raise ExpressionError(f"operator {type(op).__name__} is not allowed")

    def _Call(self, node):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError("only abs, sin, cos, expb, min, max may be called")
        arity, fn = _FUNCS[node.func.id]
        if node.keywords or len(node.args) != arity:
            raise ExpressionError(f"{node.func.id} takes {arity} positional argument(s)")
        args = [self.compile(a) for a in node.args]
        if arity == 1:
            (a,) = args
            return lambda env: fn(a(env))
        a, b = args
        return lambda env: fn(a(env), b(env))

    def _Subscript(self, node):
        if not (self.allow_expectation and isinstance(node.value, ast.Name)
                and node.value.id == "E"):
            raise ExpressionError("subscripts are only allowed as E[...] in drifts")
        inner = _Compiler({"theta", "phi"}, allow_pow=False)
        body = inner.compile(node.slice)
        self.used.add("E")

        def h(theta, phi):
            return body({"theta": theta, "phi": phi}) + 0.0 * theta

        return lambda env: env["q"].expect(h)


def _parse(source: str):
    try:
        return ast.parse(source.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None


def compile_drift(source: str):
    """Compile a drift expression into ``drift(t, y, z, q)``."""
    comp = _Compiler({"t", "y", "z", "EY", "EZ"}, allow_expectation=True)
    body = comp.compile(_parse(source))

    def drift(t, y, z, q):
        out = body({"t": t, "y": y, "z": z, "q": q})
        return out + 0.0 * (np.asarray(y, dtype=float) + np.asarray(z, dtype=float))

    drift.uses_query = bool(comp.used & {"EY", "EZ", "E"})
    return drift


def compile_node_function(source: str):
    """Compile a terminal expression into ``fn(t, b)``."""
    comp = _Compiler({"t", "b"}, allow_pow=True)
    body = comp.compile(_parse(source))

    def fn(t, b):
        return body({"t": t, "b": b}) + 0.0 * np.asarray(b, dtype=float)

    return fn


def compile_time_function(source: str):
    """Compile a delay expression into ``fn(t)``; also reports constancy."""
    comp = _Compiler({"t"}, allow_pow=True)
    body = comp.compile(_parse(source))

    def fn(t):
        return body({"t": t}) + 0.0 * np.asarray(t, dtype=float)

    fn.is_constant = "t" not in comp.used
    return fn
