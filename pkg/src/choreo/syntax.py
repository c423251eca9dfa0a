"""p-LTL abstract syntax, concrete grammar and structural utilities.

Concrete grammar (ASCII)::

    formula  := implies
    implies  := or ('->' implies)?
    or       := and ('|' and)*
    and      := bound ('&' bound)*
    bound    := unary ('@' IDENT)?
    unary    := ('~' | 'X' | 'F' | 'G' | 'Y') unary | primary
    primary  := 'true' | 'false' | IDENT
              | 'snd' '(' IDENT ',' IDENT ')' | 'rcv' '(' IDENT ',' IDENT ')'
              | '(' formula ')'

``@ s`` anchors the local formula on its left at service ``s``.  Everything
above an ``@`` is the boolean global layer, everything below it is local.
``&``, ``->`` and ``G`` are expanded while parsing, so parsed trees only
contain the primitive connectives.  ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Union


class FormulaError(ValueError):
    """Raised for malformed formula text or ill-formed formulas."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" at line {line}, column {column}" if line is not None else ""
        super().__init__(f"{message}{where}")


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Formula:
    def __str__(self) -> str:
        return to_text(self)

    @cached_property
    def _hash(self) -> int:
        return hash((type(self).__name__,) + tuple(getattr(self, f) for f in self.__dataclass_fields__))

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True, eq=True)
class TrueConst(Formula):
    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Prop(Formula):
    name: str
    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Send(Formula):
    """``!a_to``: this event sends message ``msg`` to service ``peer``."""

    msg: str
    peer: str
    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Recv(Formula):
    """``?a_from``: this event receives message ``msg`` from service ``peer``."""

    msg: str
    peer: str
    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Not(Formula):
    arg: Formula
    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Or(Formula):
    left: Formula
    right: Formula
    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Next(Formula):
    arg: Formula
    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Eventually(Formula):
    arg: Formula
    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class Prev(Formula):
    arg: Formula
    __hash__ = Formula.__hash__


@dataclass(frozen=True, eq=True)
class At(Formula):
    """A local formula evaluated at service ``service``."""

    formula: Formula
    service: str
    __hash__ = Formula.__hash__


LocalFormula = Union[TrueConst, Prop, Send, Recv, Not, Or, Next, Eventually, Prev]
GlobalFormula = Union[At, Not, Or]

TRUE = TrueConst()
FALSE = Not(TRUE)


def neg(f: Formula) -> Formula:
    """Negation with double-negation elimination."""
    return f.arg if isinstance(f, Not) else Not(f)


def conj(a: Formula, b: Formula) -> Formula:
    return neg(Or(neg(a), neg(b)))


def implies(a: Formula, b: Formula) -> Formula:
    return Or(neg(a), b)


def always(a: Formula) -> Formula:
    return neg(Eventually(neg(a)))


def normalize(f: Formula) -> Formula:
    """Rebuild ``f`` with every double negation removed."""
    match f:
        case Not(a):
            return neg(normalize(a))
        case Or(a, b):
            return Or(normalize(a), normalize(b))
        case Next(a):
            return Next(normalize(a))
        case Eventually(a):
            return Eventually(normalize(a))
        case Prev(a):
            return Prev(normalize(a))
        case At(a, s):
            return At(normalize(a), s)
    return f


def children(f: Formula) -> tuple[Formula, ...]:
    match f:
        case Not(a) | Next(a) | Eventually(a) | Prev(a):
            return (a,)
        case Or(a, b):
            return (a, b)
        case At(a, _):
            return (a,)
    return ()


def subformulas(f: Formula) -> Iterator[Formula]:
    """Post-order traversal (children before parents), duplicates included."""
    stack: list[tuple[Formula, bool]] = [(f, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            yield node
            continue
        stack.append((node, True))
        for c in reversed(children(node)):
            stack.append((c, False))


def formula_size(f: Formula) -> int:
    """Number of AST nodes (derived connectives are already expanded)."""
    return sum(1 for _ in subformulas(f))


def is_local(f: Formula) -> bool:
    return not any(isinstance(g, At) for g in subformulas(f))


def is_temporal(f: Formula) -> bool:
    return isinstance(f, (Next, Eventually, Prev))


# --------------------------------------------------------------------------
# inventory
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    """Services, messages and per-service propositions occurring in a formula."""

    services: tuple[str, ...]
    messages: tuple[str, ...]
    props: dict[str, frozenset[str]]

    def __hash__(self) -> int:
        return hash((self.services, self.messages, tuple(sorted(self.props.items()))))

    def merge(self, other: Signature) -> Signature:
        services = self.services + tuple(s for s in other.services if s not in self.services)
        messages = self.messages + tuple(m for m in other.messages if m not in self.messages)
        props = {s: self.props.get(s, frozenset()) | other.props.get(s, frozenset()) for s in services}
        _check_disjoint(props)
        return Signature(services, messages, props)


def _check_disjoint(props: dict[str, frozenset[str]]) -> None:
    seen: dict[str, str] = {}
    for s, ps in props.items():
        for p in ps:
            if p in seen and seen[p] != s:
                raise FormulaError(f"proposition {p!r} used under services {seen[p]!r} and {s!r}")
            seen[p] = s


def signature(f: Formula) -> Signature:
    services: list[str] = []
    messages: list[str] = []
    props: dict[str, set[str]] = {}

    def add_service(s: str) -> None:
        if s not in services:
            services.append(s)
            props.setdefault(s, set())

    def walk_local(g: Formula, owner: str) -> None:
        for h in subformulas(g):
            match h:
                case Prop(p):
                    props[owner].add(p)
                case Send(m, peer) | Recv(m, peer):
                    add_service(peer)
                    if m not in messages:
                        messages.append(m)

    for h in subformulas(f):
        if isinstance(h, At):
            add_service(h.service)
    for h in subformulas(f):
        if isinstance(h, At):
            walk_local(h.formula, h.service)
    frozen = {s: frozenset(ps) for s, ps in props.items()}
    _check_disjoint(frozen)
    return Signature(tuple(services), tuple(messages), frozen)


def check_well_formed(f: Formula) -> None:
    """Raise FormulaError unless ``f`` is a global formula over local formulas."""

    def check_local(g: Formula, owner: str) -> None:
        for h in subformulas(g):
            match h:
                case At():
                    raise FormulaError(f"nested '@' inside the local formula for {owner!r}")
                case Send(_, peer) | Recv(_, peer) if peer == owner:
                    raise FormulaError(f"service {owner!r} cannot communicate with itself")

    def check_global(g: Formula) -> None:
        match g:
            case At(a, s):
                check_local(a, s)
            case Not(a):
                check_global(a)
            case Or(a, b):
                check_global(a)
                check_global(b)
            case _:
                raise FormulaError(f"local formula {to_text(g)!r} is not anchored with '@'")

    check_global(f)
    signature(f)


# --------------------------------------------------------------------------
# printing
# --------------------------------------------------------------------------

_PREC_IMPLIES, _PREC_OR, _PREC_AT, _PREC_UNARY = 1, 2, 4, 5


def to_text(f: Formula) -> str:
    """Render ``f`` in the concrete grammar; ``parse`` inverts this exactly."""
    return _render(f)[0]


def _render(f: Formula) -> tuple[str, int]:
    def wrap(g: Formula, min_prec: int) -> str:
        text, prec = _render(g)
        return text if prec >= min_prec else f"({text})"

    match f:
        case TrueConst():
            return "true", 9
        case Not(TrueConst()):
            return "false", 9
        case Prop(p):
            return p, 9
        case Send(m, s):
            return f"snd({m},{s})", 9
        case Recv(m, s):
            return f"rcv({m},{s})", 9
        case Not(a):
            return "~" + wrap(a, _PREC_UNARY), _PREC_UNARY
        case Next(a):
            return "X " + wrap(a, _PREC_UNARY), _PREC_UNARY
        case Eventually(a):
            return "F " + wrap(a, _PREC_UNARY), _PREC_UNARY
        case Prev(a):
            return "Y " + wrap(a, _PREC_UNARY), _PREC_UNARY
        case Or(a, b):
            return f"{wrap(a, _PREC_OR)} | {wrap(b, _PREC_OR + 1)}", _PREC_OR
        case At(a, s):
            return f"{wrap(a, _PREC_UNARY)} @ {s}", _PREC_AT
    raise TypeError(f"not a formula: {f!r}")


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>\#[^\n]*)
  | (?P<op>->|[~|&@(),])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)
_KEYWORDS = {"X", "F", "G", "Y", "true", "false", "snd", "rcv"}
_PREFIX = {"~", "X", "F", "G", "Y"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        col = m.start() - line_start + 1
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind in ("ws", "comment"):
            pass
        elif kind == "bad":
            raise FormulaError(f"unexpected character {m.group()!r}", line, col)
        elif kind == "ident" and m.group() in _KEYWORDS:
            toks.append(_Tok("kw", m.group(), line, col))
        else:
            toks.append(_Tok(kind, m.group(), line, col))
    toks.append(_Tok("eof", "", line, len(text) - line_start + 1))
    return toks


# Raw parse tree: connectives are shared between the two layers until
# resolution decides which side of an '@' each node lives on.
@dataclass(frozen=True)
class _Raw:
    op: str
    args: tuple
    tok: _Tok


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind == "eof":
            self.fail(f"expected {text!r}")
        return self.advance()

    def fail(self, message: str):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise FormulaError(f"{message}, found {found}", t.line, t.col)

    def parse(self) -> _Raw:
        if self.tok.kind == "eof":
            self.fail("empty formula")
        node = self.implies()
        if self.tok.kind != "eof":
            self.fail("unexpected token")
        return node

    def implies(self) -> _Raw:
        left = self.disj()
        if self.tok.text == "->":
            t = self.advance()
            return _Raw("->", (left, self.implies()), t)
        return left

    def disj(self) -> _Raw:
        left = self.conj()
        while self.tok.text == "|":
            t = self.advance()
            left = _Raw("|", (left, self.conj()), t)
        return left

    def conj(self) -> _Raw:
        left = self.bound()
        while self.tok.text == "&":
            t = self.advance()
            left = _Raw("&", (left, self.bound()), t)
        return left

    def bound(self) -> _Raw:
        inner = self.unary()
        if self.tok.text == "@":
            t = self.advance()
            if self.tok.kind != "ident":
                self.fail("expected a service name after '@'")
            return _Raw("@", (inner, self.advance().text), t)
        return inner

    def unary(self) -> _Raw:
        if self.tok.text in _PREFIX and self.tok.kind in ("op", "kw"):
            t = self.advance()
            return _Raw(t.text, (self.unary(),), t)
        return self.primary()

    def primary(self) -> _Raw:
        t = self.tok
        if t.kind == "kw" and t.text in ("true", "false"):
            self.advance()
            return _Raw(t.text, (), t)
        if t.kind == "kw" and t.text in ("snd", "rcv"):
            self.advance()
            self.expect("(")
            if self.tok.kind != "ident":
                self.fail("expected a message name")
            msg = self.advance().text
            self.expect(",")
            if self.tok.kind != "ident":
                self.fail("expected a service name")
            peer = self.advance().text
            self.expect(")")
            return _Raw(t.text, (msg, peer), t)
        if t.kind == "ident":
            self.advance()
            return _Raw("prop", (t.text,), t)
        if t.text == "(":
            self.advance()
            node = self.implies()
            self.expect(")")
            return node
        self.fail("expected a formula")


def _resolve_global(node: _Raw) -> Formula:
    match node.op:
        case "@":
            inner, service = node.args
            return At(_resolve_local(inner, service), service)
        case "~":
            return neg(_resolve_global(node.args[0]))
        case "|":
            return Or(_resolve_global(node.args[0]), _resolve_global(node.args[1]))
        case "&":
            return conj(_resolve_global(node.args[0]), _resolve_global(node.args[1]))
        case "->":
            return implies(_resolve_global(node.args[0]), _resolve_global(node.args[1]))
    t = node.tok
    raise FormulaError("local formula must be anchored to a service with '@'", t.line, t.col)


def _resolve_local(node: _Raw, owner: str) -> Formula:
    def rec(n: _Raw) -> Formula:
        a = n.args
        match n.op:
            case "true":
                return TRUE
            case "false":
                return FALSE
            case "prop":
                return Prop(a[0])
            case "snd" | "rcv":
                if a[1] == owner:
                    raise FormulaError(f"service {owner!r} cannot communicate with itself", n.tok.line, n.tok.col)
                return Send(*a) if n.op == "snd" else Recv(*a)
            case "~":
                return neg(rec(a[0]))
            case "X":
                return Next(rec(a[0]))
            case "F":
                return Eventually(rec(a[0]))
            case "Y":
                return Prev(rec(a[0]))
            case "G":
                return always(rec(a[0]))
            case "|":
                return Or(rec(a[0]), rec(a[1]))
            case "&":
                return conj(rec(a[0]), rec(a[1]))
            case "->":
                return implies(rec(a[0]), rec(a[1]))
            case "@":
                raise FormulaError("nested '@' inside a local formula", n.tok.line, n.tok.col)
        raise AssertionError(n.op)

    return rec(node)


def parse_global(text: str) -> Formula:
    """Parse a global p-LTL formula; derived connectives are expanded."""
    formula = _resolve_global(_Parser(text).parse())
    signature(formula)  # proposition ownership must be disjoint
    return formula


def parse_local(text: str) -> Formula:
    """Parse a formula without '@' anchors (used for tests and debugging)."""
    return _resolve_local(_Parser(text).parse(), owner="")
