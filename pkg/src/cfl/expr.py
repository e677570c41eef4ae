"""Expression trees for structural equations, with a parser and a vectorized evaluator.

Grammar (Python-like infix): numbers, names, ``+ - * /`` (division only by
constants), unary minus, ``min(...)``, ``max(...)``, ``indicator(cond)`` where
``cond`` is ``a > b``, ``a >= b``, ``a < b``, ``a <= b``, ``a == b``,
``a != b`` or a bare expression (meaning ``expr > 0``), and
``table(inputs, {key: value, ...})``. A counterfactual reference such as
``Y[T=1]`` names the value of ``Y`` in the world where ``T`` is set to 1.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import MissingTableEntry, ParseError


class Expr:
    """Base class of expression nodes."""

    def __add__(self, other):
        return Add((self, as_expr(other)))

    def __radd__(self, other):
        return Add((as_expr(other), self))

    def __sub__(self, other):
        return Add((self, Neg(as_expr(other))))

    def __rsub__(self, other):
        return Add((as_expr(other), Neg(self)))

    def __mul__(self, other):
        return Mul((self, as_expr(other)))

    def __rmul__(self, other):
        return Mul((as_expr(other), self))

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return to_str(self)


@dataclass(frozen=True, eq=True, repr=False)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Ref(Expr):
    name: str

    def __repr__(self):
        return f"Ref({self.name!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Add(Expr):
    args: tuple

    def __repr__(self):
        return f"Add{self.args!r}"


@dataclass(frozen=True, eq=True, repr=False)
class Mul(Expr):
    args: tuple

    def __repr__(self):
        return f"Mul{self.args!r}"


@dataclass(frozen=True, eq=True, repr=False)
class Neg(Expr):
    arg: Expr

    def __repr__(self):
        return f"Neg({self.arg!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Min(Expr):
    args: tuple

    def __repr__(self):
        return f"Min{self.args!r}"


@dataclass(frozen=True, eq=True, repr=False)
class Max(Expr):
    args: tuple

    def __repr__(self):
        return f"Max{self.args!r}"


INDICATOR_OPS = (">", ">=", "==", "!=")


@dataclass(frozen=True, eq=True, repr=False)
class Indicator(Expr):
    """``1{arg op 0}`` with ``op`` one of ``>``, ``>=``, ``==``, ``!=``."""

    arg: Expr
    op: str = ">"

    def __post_init__(self):
        if self.op not in INDICATOR_OPS:
            raise ValueError(f"bad indicator operator {self.op!r}")

    def __repr__(self):
        return f"Indicator({self.arg!r}, {self.op!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Table(Expr):
    """Lookup of the tuple ``inputs`` in ``entries`` (sorted ``(key, value)`` pairs)."""

    inputs: tuple
    entries: tuple

    def __post_init__(self):
        entries = tuple(sorted((tuple(float(k) for k in key), float(v)) for key, v in self.entries))
        keys = [k for k, _ in entries]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate table keys")
        if any(len(k) != len(self.inputs) for k in keys):
            raise ValueError("table key arity does not match inputs")
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "entries", entries)

    def __repr__(self):
        return f"Table({self.inputs!r}, {self.entries!r})"


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return Ref(x)
    return Const(float(x))


def children(e: Expr) -> tuple:
    if isinstance(e, (Add, Mul, Min, Max)):
        return e.args
    if isinstance(e, (Neg, Indicator)):
        return (e.arg,)
    if isinstance(e, Table):
        return e.inputs
    return ()


def rebuild(e: Expr, kids) -> Expr:
    kids = tuple(kids)
    if isinstance(e, (Add, Mul, Min, Max)):
        return type(e)(kids)
    if isinstance(e, Neg):
        return Neg(kids[0])
    if isinstance(e, Indicator):
        return Indicator(kids[0], e.op)
    if isinstance(e, Table):
        return Table(kids, e.entries)
    return e


def refs(e: Expr) -> set:
    """All names referenced anywhere in ``e``."""
    out = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Ref):
            out.add(node.name)
        stack.extend(children(node))
    return out


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace references by expressions (no recursion into replacements)."""
    if isinstance(e, Ref):
        return mapping.get(e.name, e)
    kids = children(e)
    if not kids:
        return e
    return rebuild(e, (substitute(k, mapping) for k in kids))


def _apply_op(v, op):
    if op == ">":
        return (v > 0).astype(float)
    if op == ">=":
        return (v >= 0).astype(float)
    if op == "==":
        return (v == 0).astype(float)
    return (v != 0).astype(float)


def evaluate(e: Expr, env: Mapping[str, np.ndarray], n: int) -> np.ndarray:
    """Evaluate ``e`` elementwise over ``n`` draws; ``env`` maps names to arrays or scalars."""
    out = _eval(e, env)
    return np.array(np.broadcast_to(np.asarray(out, dtype=float), (n,)))


def _eval(e, env):
    if isinstance(e, Const):
        return np.float64(e.value)
    if isinstance(e, Ref):
        return env[e.name]
    if isinstance(e, Add):
        acc = _eval(e.args[0], env)
        for a in e.args[1:]:
            acc = acc + _eval(a, env)
        return acc
    if isinstance(e, Mul):
        acc = _eval(e.args[0], env)
        for a in e.args[1:]:
            acc = acc * _eval(a, env)
        return acc
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Min):
        acc = _eval(e.args[0], env)
        for a in e.args[1:]:
            acc = np.minimum(acc, _eval(a, env))
        return acc
    if isinstance(e, Max):
        acc = _eval(e.args[0], env)
        for a in e.args[1:]:
            acc = np.maximum(acc, _eval(a, env))
        return acc
    if isinstance(e, Indicator):
        return _apply_op(np.asarray(_eval(e.arg, env), dtype=float), e.op)
    if isinstance(e, Table):
        return _eval_table(e, env)
    raise TypeError(f"not an expression: {e!r}")


def _eval_table(e: Table, env):
    cols = [np.atleast_1d(np.asarray(_eval(a, env), dtype=float)) for a in e.inputs]
    n = max((c.shape[0] for c in cols), default=1)
    cols = [np.broadcast_to(c, (n,)) for c in cols]
    out = np.full(n, np.nan)
    hit = np.zeros(n, dtype=bool)
    for key, val in e.entries:
        m = np.ones(n, dtype=bool)
        for c, k in zip(cols, key):
            m &= c == k
        out[m] = val
        hit |= m
    if not hit.all():
        i = int(np.flatnonzero(~hit)[0])
        raise MissingTableEntry(tuple(float(c[i]) for c in cols))
    return out


# printing ------------------------------------------------------------------

def _num(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


_PREC = {Add: 1, Neg: 2, Mul: 3}


def to_str(e: Expr) -> str:
    """Render ``e`` in the parseable infix syntax."""
    if isinstance(e, Const):
        return _num(e.value)
    if isinstance(e, Ref):
        return e.name
    if isinstance(e, Add):
        parts = [to_str(e.args[0])]
        for a in e.args[1:]:
            if isinstance(a, Neg):
                inner = a.arg
                s = to_str(inner)
                if isinstance(inner, Add):
                    s = f"({s})"
                parts.append(f"- {s}")
            else:
                s = to_str(a)
                # float addition is not associative: keep right nesting
                parts.append(f"+ ({s})" if isinstance(a, Add) else f"+ {s}")
        return " ".join(parts)
    if isinstance(e, Mul):
        out = []
        for i, a in enumerate(e.args):
            s = to_str(a)
            if (isinstance(a, (Add, Neg)) or (isinstance(a, Const) and a.value < 0)
                    or (i > 0 and isinstance(a, Mul))):
                s = f"({s})"
            out.append(s)
        return "*".join(out)
    if isinstance(e, Neg):
        s = to_str(e.arg)
        if isinstance(e.arg, (Add, Neg)) or (isinstance(e.arg, Const) and e.arg.value < 0):
            s = f"({s})"
        return f"-{s}"
    if isinstance(e, (Min, Max)):
        name = "min" if isinstance(e, Min) else "max"
        return f"{name}({', '.join(to_str(a) for a in e.args)})"
    if isinstance(e, Indicator):
        return f"indicator({to_str(e.arg)} {e.op} 0)"
    if isinstance(e, Table):
        ins = ", ".join(to_str(a) for a in e.inputs)
        body = ", ".join(
            "(" + ", ".join(_num(k) for k in key) + ("," if len(key) == 1 else "") + f"): {_num(v)}"
            for key, v in e.entries
        )
        return f"table(({ins}{',' if len(e.inputs) == 1 else ''}), {{{body}}})"
    raise TypeError(f"not an expression: {e!r}")


# parsing -------------------------------------------------------------------

_CF_REF = re.compile(r"\[\s*([A-Za-z_]\w*)\s*=\s*([^\]=]+?)\s*\]")
_EQUATION = re.compile(r"^\s*([A-Za-z_]\w*)\s*=(?!=)(.*)$", re.S)


def cf_name(var: str, treatment: str, t) -> str:
    """Canonical reference name for ``var`` in the world ``do(treatment=t)``."""
    return f"{var}[{treatment}={_num(float(t))}]"


def parse(src: str, params: Mapping[str, float] | None = None) -> Expr:
    """Parse an expression string; names found in ``params`` become constants.

    Raises:
        ParseError: on syntax errors or unsupported constructs.
    """
    params = dict(params or {})
    text = _CF_REF.sub(lambda m: f"[{m.group(1)}=={m.group(2)}]", src)
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse {src!r}: {exc.msg} at column {exc.offset}") from exc
    try:
        return _convert(tree.body, params)
    except ParseError as exc:
        raise ParseError(f"{exc} in {src!r}") from exc


def parse_equation(src: str, params: Mapping[str, float] | None = None) -> tuple[str, Expr]:
    """Parse ``"NAME = expression"`` into ``(NAME, Expr)``."""
    m = _EQUATION.match(src)
    if not m:
        raise ParseError(f"expected 'NAME = expression', got {src!r}")
    return m.group(1), parse(m.group(2), params)


def _const_value(e: Expr):
    folded = fold(e)
    return folded.value if isinstance(folded, Const) else None


def _convert(node, params) -> Expr:
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ParseError(f"unsupported literal {node.value!r}")
        return Const(float(node.value))
    if isinstance(node, ast.Name):
        if node.id in params:
            return Const(float(params[node.id]))
        return Ref(node.id)
    if isinstance(node, ast.UnaryOp):
        inner = _convert(node.operand, params)
        if isinstance(node.op, ast.USub):
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Neg(inner)
        if isinstance(node.op, ast.UAdd):
            return inner
        raise ParseError("unsupported unary operator")
    if isinstance(node, ast.BinOp):
        a, b = _convert(node.left, params), _convert(node.right, params)
        if isinstance(node.op, ast.Add):
            return Add((a, b))
        if isinstance(node.op, ast.Sub):
            return Add((a, Neg(b) if not isinstance(b, Const) else Const(-b.value)))
        if isinstance(node.op, ast.Mult):
            return Mul((a, b))
        if isinstance(node.op, ast.Div):
            c = _const_value(b)
            if c is None or c == 0:
                raise ParseError("division is only supported by a nonzero constant")
            return Mul((a, Const(1.0 / c)))
        if isinstance(node.op, ast.Pow):
            c = _const_value(b)
            if c is None or not float(c).is_integer() or c < 1:
                raise ParseError("powers need a positive integer constant exponent")
            return Mul(tuple([a] * int(c))) if c > 1 else a
        raise ParseError("unsupported binary operator")
    if isinstance(node, ast.Compare):
        raise ParseError("comparisons are only allowed inside indicator(...)")
    if isinstance(node, ast.Subscript):
        return _convert_cf(node)
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.keywords:
            raise ParseError("unsupported call")
        fname = node.func.id
        if fname in ("min", "max"):
            if len(node.args) < 2:
                raise ParseError(f"{fname} needs at least two arguments")
            args = tuple(_convert(a, params) for a in node.args)
            return Min(args) if fname == "min" else Max(args)
        if fname == "indicator":
            if len(node.args) != 1:
                raise ParseError("indicator takes exactly one condition")
            return _convert_condition(node.args[0], params)
        if fname == "table":
            return _convert_table(node, params)
        raise ParseError(f"unknown function {fname!r}")
    raise ParseError(f"unsupported syntax {type(node).__name__}")


def _convert_cf(node) -> Expr:
    if not isinstance(node.value, ast.Name):
        raise ParseError("only NAME[T=t] subscripts are supported")
    sl = node.slice
    if (
        isinstance(sl, ast.Compare)
        and len(sl.ops) == 1
        and isinstance(sl.ops[0], ast.Eq)
        and isinstance(sl.left, ast.Name)
    ):
        try:
            t = ast.literal_eval(sl.comparators[0])
        except ValueError as exc:
            raise ParseError("world value must be a number") from exc
        return Ref(cf_name(node.value.id, sl.left.id, t))
    raise ParseError("expected a world such as Y[T=1]")


def _convert_condition(node, params) -> Expr:
    if not isinstance(node, ast.Compare):
        return Indicator(_convert(node, params), ">")
    if len(node.ops) != 1:
        raise ParseError("chained comparisons are not supported")
    a = _convert(node.left, params)
    b = _convert(node.comparators[0], params)
    op = node.ops[0]

    def diff(x, y):
        if isinstance(y, Const) and y.value == 0:
            return x
        return Add((x, Neg(y) if not isinstance(y, Const) else Const(-y.value)))

    if isinstance(op, ast.Gt):
        return Indicator(diff(a, b), ">")
    if isinstance(op, ast.GtE):
        return Indicator(diff(a, b), ">=")
    if isinstance(op, ast.Lt):
        return Indicator(diff(b, a), ">")
    if isinstance(op, ast.LtE):
        return Indicator(diff(b, a), ">=")
    if isinstance(op, ast.Eq):
        return Indicator(diff(a, b), "==")
    if isinstance(op, ast.NotEq):
        return Indicator(diff(a, b), "!=")
    raise ParseError("unsupported comparison")


def _convert_table(node, params) -> Expr:
    if len(node.args) != 2:
        raise ParseError("table takes (inputs, {key: value})")
    ins_node, map_node = node.args
    ins = ins_node.elts if isinstance(ins_node, ast.Tuple) else [ins_node]
    inputs = tuple(_convert(a, params) for a in ins)
    try:
        mapping = ast.literal_eval(map_node)
    except ValueError as exc:
        raise ParseError("table entries must be a literal mapping") from exc
    if not isinstance(mapping, dict):
        raise ParseError("table entries must be a mapping")
    entries = []
    for key, val in mapping.items():
        key = key if isinstance(key, tuple) else (key,)
        entries.append((key, val))
    try:
        return Table(inputs, tuple(entries))
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from exc


# folding -------------------------------------------------------------------

def fold(e: Expr) -> Expr:
    """Constant-fold subtrees whose leaves are all constants."""
    kids = children(e)
    if not kids:
        return e
    kids = tuple(fold(k) for k in kids)
    node = rebuild(e, kids)
    if all(isinstance(k, Const) for k in kids):
        return Const(float(evaluate(node, {}, 1)[0]))
    if isinstance(node, Add):
        # merge constant terms; drop them when they sum to 0
        c = sum(k.value for k in kids if isinstance(k, Const))
        rest = tuple(k for k in kids if not isinstance(k, Const))
        kids = rest if c == 0 else rest + (Const(c),)
        return kids[0] if len(kids) == 1 else Add(kids)
    return node
