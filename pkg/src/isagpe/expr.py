"""Factorable functions as hash-consed DAGs, with a recursive-descent parser.

Grammar (``^`` binds tightest, then unary minus, then ``* /``, then ``+ -``)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' integer)*          # right-associative
    atom   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' factor

Variables are ``x1 .. xN`` unless explicit names are supplied.  Division is
desugared to multiplication by ``recip``; multiplication by a point constant
becomes a ``smul`` node.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ArityError, DomainViolation, ParseError, UnknownIdentifier
from .interval import ATOMS, E_HI, E_LO, PI_HI, PI_LO, IntervalArray, IntervalBox

BINARY = ("add", "sub", "mul")
UNARY_FUNCS = ("exp", "log", "sin", "cos", "sqrt", "recip")
NAMED_CONSTANTS = {"pi": (math.pi, PI_LO, PI_HI), "e": (math.e, E_LO, E_HI)}


@dataclass(frozen=True)
class Node:
    """One DAG node.

    ``op`` is one of ``var const add sub mul neg smul pow un``.  ``param``
    holds the variable index (0-based), the constant ``(value, lo, hi)``, the
    scalar of ``smul``, the exponent of ``pow`` or the atom tag of ``un``.
    """

    op: str
    args: tuple = ()
    param: object = None


@dataclass(frozen=True)
class Expr:
    nodes: tuple
    outputs: tuple
    n_vars: int
    var_names: tuple = ()

    def __post_init__(self):
        for k, node in enumerate(self.nodes):
            if any(not 0 <= a < k for a in node.args):
                raise ValueError(f"node {k} references a later node: {node}")
            if node.op == "var" and not 0 <= node.param < self.n_vars:
                raise ValueError(f"variable index {node.param} out of range")
        if not self.outputs:
            raise ValueError("expression has no outputs")
        for o in self.outputs:
            if not 0 <= o < len(self.nodes):
                raise ValueError(f"output index {o} out of range")
        if not self.var_names:
            object.__setattr__(
                self, "var_names", tuple(f"x{i + 1}" for i in range(self.n_vars))
            )

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def __len__(self):
        return len(self.nodes)

    def select(self, outputs: Sequence[int]) -> "Expr":
        """Same DAG restricted to a subset of the outputs."""
        return Expr(self.nodes, tuple(self.outputs[k] for k in outputs), self.n_vars, self.var_names)


class ExprBuilder:
    """Incremental, hash-consing DAG construction."""

    def __init__(self, n_vars: int = 0, var_names: Sequence[str] = ()):
        self.nodes: list[Node] = []
        self._index: dict[Node, int] = {}
        self.n_vars = n_vars
        self.var_names = tuple(var_names)

    def _add(self, node: Node) -> int:
        k = self._index.get(node)
        if k is None:
            k = len(self.nodes)
            self.nodes.append(node)
            self._index[node] = k
        return k

    def var(self, i: int) -> int:
        self.n_vars = max(self.n_vars, i + 1)
        return self._add(Node("var", (), i))

    def const(self, value: float, lo: float | None = None, hi: float | None = None) -> int:
        value = float(value)
        lo = value if lo is None else float(lo)
        hi = value if hi is None else float(hi)
        return self._add(Node("const", (), (value, lo, hi)))

    def point_value(self, k: int):
        node = self.nodes[k]
        if node.op == "const" and node.param[1] == node.param[2]:
            return node.param[0]
        return None

    def add(self, l: int, r: int) -> int:
        return self._add(Node("add", (l, r)))

    def sub(self, l: int, r: int) -> int:
        return self._add(Node("sub", (l, r)))

    def mul(self, l: int, r: int) -> int:
        c = self.point_value(l)
        if c is not None:
            return self.smul(c, r)
        c = self.point_value(r)
        if c is not None:
            return self.smul(c, l)
        return self._add(Node("mul", (l, r)))

    def div(self, l: int, r: int) -> int:
        return self.mul(l, self.un("recip", r))

    def neg(self, u: int) -> int:
        c = self.point_value(u)
        if c is not None:
            return self.const(-c)
        return self._add(Node("neg", (u,)))

    def smul(self, c: float, u: int) -> int:
        return self._add(Node("smul", (u,), float(c)))

    def pow(self, u: int, k: int) -> int:
        return self._add(Node("pow", (u,), int(k)))

    def un(self, tag: str, u: int) -> int:
        if tag not in ATOMS:
            raise ValueError(f"unknown atom {tag!r}")
        return self._add(Node("un", (u,), tag))

    def build(self, outputs: Sequence[int]) -> Expr:
        """Freeze the DAG, dropping nodes no output depends on (e.g. folded constants)."""
        full = Expr(tuple(self.nodes), tuple(outputs), self.n_vars, self.var_names)
        keep = sorted(live_nodes(full))
        renumber = {old: new for new, old in enumerate(keep)}
        nodes = tuple(
            Node(n.op, tuple(renumber[a] for a in n.args), n.param) for n in (self.nodes[k] for k in keep)
        )
        return Expr(nodes, tuple(renumber[o] for o in outputs), self.n_vars, self.var_names)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)
_VAR_RE = re.compile(r"x([1-9][0-9]*)$")


@dataclass
class _Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "ws":
            newlines = m.group().count("\n")
            if newlines:
                line += newlines
                line_start = m.start() + m.group().rfind("\n") + 1
        else:
            tokens.append(_Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    tokens.append(_Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, builder: ExprBuilder, variables: Sequence[str] | None):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.b = builder
        self.variables = {name: i for i, name in enumerate(variables)} if variables else None

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def fail(self, msg, cls=ParseError, tok=None):
        tok = tok or self.tok
        raise cls(msg, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            self.fail(f"expected {text!r}, found {found!r}")

    def parse(self) -> int:
        k = self.expr()
        if self.tok.kind != "eof":
            self.fail(f"unexpected {self.tok.text!r}")
        return k

    def expr(self) -> int:
        k = self.term()
        while True:
            if self.accept("+"):
                k = self.b.add(k, self.term())
            elif self.accept("-"):
                k = self.b.sub(k, self.term())
            else:
                return k

    def term(self) -> int:
        k = self.factor()
        while True:
            if self.accept("*"):
                k = self.b.mul(k, self.factor())
            elif self.accept("/"):
                k = self.b.div(k, self.factor())
            else:
                return k

    def factor(self) -> int:
        k = self.atom()
        if self.accept("^"):
            k = self.b.pow(k, self.exponent())
        return k

    def exponent(self) -> int:
        tok = self.tok
        if tok.kind != "number" or not tok.text.isdigit():
            self.fail("exponent must be a non-negative integer literal")
        self.pos += 1
        k = int(tok.text)
        if self.accept("^"):
            k = k ** self.exponent()
        return k

    def atom(self) -> int:
        tok = self.tok
        if tok.kind == "number":
            self.pos += 1
            return self.b.const(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.pos += 1
            k = self.expr()
            self.expect(")")
            return k
        if tok.kind == "op" and tok.text == "-":
            self.pos += 1
            return self.b.neg(self.factor())
        if tok.kind == "ident":
            self.pos += 1
            return self.identifier(tok)
        found = tok.text or "end of input"
        self.fail(f"unexpected {found!r}")

    def identifier(self, tok: _Token) -> int:
        name = tok.text
        if name in UNARY_FUNCS:
            if not self.accept("("):
                self.fail(f"{name} takes exactly one parenthesised argument", ArityError)
            arg = self.expr()
            if self.tok.kind == "op" and self.tok.text == ",":
                self.fail(f"{name} takes exactly one argument", ArityError)
            self.expect(")")
            return self.b.un(name, arg)
        if self.tok.kind == "op" and self.tok.text == "(":
            self.fail(f"unknown function {name!r}", UnknownIdentifier, tok)
        if self.variables is not None and name in self.variables:
            return self.b.var(self.variables[name])
        if name in NAMED_CONSTANTS:
            return self.b.const(*NAMED_CONSTANTS[name])
        if self.variables is None:
            m = _VAR_RE.match(name)
            if m:
                return self.b.var(int(m.group(1)) - 1)
        self.fail(f"unknown identifier {name!r}", UnknownIdentifier, tok)


def parse_many(
    texts: Sequence[str], variables: Sequence[str] | None = None, n_vars: int | None = None
) -> Expr:
    """Parse several formulas into one DAG with one output each (shared subterms)."""
    builder = ExprBuilder(
        n_vars=len(variables) if variables else (n_vars or 0), var_names=variables or ()
    )
    outputs = [_Parser(t, builder, variables).parse() for t in texts]
    if variables is None and builder.var_names == ():
        builder.var_names = tuple(f"x{i + 1}" for i in range(builder.n_vars))
    return builder.build(outputs)


def parse(text: str, variables: Sequence[str] | None = None, n_vars: int | None = None) -> Expr:
    return parse_many([text], variables, n_vars)


def to_text(e: Expr, output: int = 0) -> str:
    """Render one output as text that parses back to the same DAG."""
    memo: dict[int, str] = {}

    def render(k: int) -> str:
        if k in memo:
            return memo[k]
        node = e.nodes[k]
        op = node.op
        if op == "var":
            s = e.var_names[node.param]
        elif op == "const":
            value, lo, hi = node.param
            named = [n for n, v in NAMED_CONSTANTS.items() if v == node.param]
            if named:
                s = named[0]
            elif lo == hi:
                s = repr(value) if value >= 0 else f"(-{repr(-value)})"
            else:
                raise ValueError(f"constant {node.param} has no textual form")
        elif op in BINARY:
            sym = {"add": "+", "sub": "-", "mul": "*"}[op]
            s = f"({render(node.args[0])} {sym} {render(node.args[1])})"
        elif op == "neg":
            s = f"(-{render(node.args[0])})"
        elif op == "smul":
            c = node.param
            cs = repr(c) if c >= 0 else f"(-{repr(-c)})"
            s = f"({cs} * {render(node.args[0])})"
        elif op == "pow":
            s = f"({render(node.args[0])})^{node.param}"
        elif op == "un":
            s = f"{node.param}({render(node.args[0])})"
        else:
            raise ValueError(f"unknown node kind {op!r}")
        memo[k] = s
        return s

    return render(e.outputs[output])


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def fold(e: Expr, leaf_var: Callable, leaf_const: Callable, ops: dict, nodes_needed=None) -> list:
    """Evaluate every node bottom-up.

    ``ops`` maps ``add sub mul neg smul pow un`` to callables receiving the
    child values followed by ``param`` where relevant.  A DomainViolation is
    re-raised with the index of the failing node.
    """
    values: list = [None] * len(e.nodes)
    for k, node in enumerate(e.nodes):
        if nodes_needed is not None and k not in nodes_needed:
            continue
        op = node.op
        try:
            if op == "var":
                values[k] = leaf_var(node.param)
            elif op == "const":
                values[k] = leaf_const(*node.param)
            elif op in BINARY:
                values[k] = ops[op](values[node.args[0]], values[node.args[1]])
            elif op == "neg":
                values[k] = ops["neg"](values[node.args[0]])
            else:
                values[k] = ops[op](values[node.args[0]], node.param)
        except DomainViolation as err:
            if err.node is not None:
                raise
            raise DomainViolation(err.op, err.interval, node=k) from None
    return values


def live_nodes(e: Expr) -> set:
    """Indices of nodes reachable from the outputs."""
    seen = set()
    stack = list(e.outputs)
    while stack:
        k = stack.pop()
        if k in seen:
            continue
        seen.add(k)
        stack.extend(e.nodes[k].args)
    return seen


def _real_un(x, tag):
    x = np.asarray(x, dtype=float)
    if tag == "exp":
        with np.errstate(over="ignore"):
            return np.exp(x)
    if tag == "log":
        if np.any(x <= 0):
            raise DomainViolation("log", x)
        return np.log(x)
    if tag == "sqrt":
        if np.any(x < 0):
            raise DomainViolation("sqrt", x)
        return np.sqrt(x)
    if tag == "recip":
        if np.any(x == 0):
            raise DomainViolation("recip", x)
        return 1.0 / x
    if tag == "sin":
        return np.sin(x)
    if tag == "cos":
        return np.cos(x)
    raise ValueError(f"unknown atom {tag!r}")


_REAL_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "neg": lambda a: -a,
    "smul": lambda a, c: c * a,
    "pow": lambda a, k: np.asarray(a, dtype=float) ** k if k >= 0 else _real_un(a, "recip") ** (-k),
    "un": _real_un,
}


def eval_real(e: Expr, x) -> np.ndarray:
    """Point evaluation.  ``x`` has ``n_vars`` leading entries; trailing axes batch points."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != e.n_vars:
        raise ValueError(f"expected {e.n_vars} variables, got {x.shape[0]}")
    batch = x.shape[1:]
    values = fold(
        e,
        lambda i: x[i],
        lambda value, lo, hi: np.full(batch, value) if batch else value,
        _REAL_OPS,
        live_nodes(e),
    )
    return np.array([np.broadcast_to(values[o], batch) for o in e.outputs], dtype=float)


def _interval_ops(strict: bool) -> dict:
    return {
        "add": lambda a, b: a + b,
        "sub": lambda a, b: a - b,
        "mul": lambda a, b: a * b,
        "neg": lambda a: -a,
        "smul": lambda a, c: a.scale(c),
        "pow": lambda a, k: a.pow(k, strict),
        "un": lambda a, tag: a.apply(tag, strict),
    }


def eval_interval_arrays(e: Expr, lo, hi, strict: bool = True) -> list:
    """Natural interval extension over a batch of boxes.

    ``lo`` and ``hi`` have shape ``(n_vars, ...)``.  Returns one
    :class:`IntervalArray` per output.  With ``strict=False`` domain violations
    produce unbounded entries instead of raising.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    batch = lo.shape[1:]
    values = fold(
        e,
        lambda i: IntervalArray(lo[i], hi[i]),
        lambda value, clo, chi: IntervalArray(np.full(batch, clo), np.full(batch, chi)),
        _interval_ops(strict),
        live_nodes(e),
    )
    return [values[o] for o in e.outputs]


def eval_interval(e: Expr, X: IntervalBox) -> IntervalBox:
    if len(X) != e.n_vars:
        raise ValueError(f"expected a {e.n_vars}-dimensional box, got {len(X)}")
    outs = eval_interval_arrays(e, X.lo, X.hi)
    return IntervalBox(tuple(o.to_interval() for o in outs))
