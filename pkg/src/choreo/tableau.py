"""Closure sets, atoms and the local/communication relations between atoms.

An atom is stored as an integer bitmask over the *positive* members of the
service's closure (those not of the form ``~g``); ``~g`` belongs to the atom
exactly when ``g`` does not.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

from .syntax import (
    FALSE,
    TRUE,
    At,
    Eventually,
    Formula,
    Next,
    Not,
    Or,
    Prev,
    Prop,
    Recv,
    Send,
    Signature,
    TrueConst,
    check_well_formed,
    formula_size,
    neg,
    normalize,
    signature,
    to_text,
)

NEXT_FALSE = Next(FALSE)
PREV_FALSE = Prev(FALSE)


def _positive(f: Formula) -> Formula:
    return f.arg if isinstance(f, Not) else f


def _order_key(f: Formula) -> tuple[int, str]:
    return (formula_size(f), to_text(f))


@dataclass
class LocalClosure:
    """CL_s for one service, as an ordered list of positive formulas."""

    service: str
    positives: list[Formula]
    index: dict[Formula, int] = field(init=False)

    def __post_init__(self) -> None:
        self.index = {f: i for i, f in enumerate(self.positives)}

    def __len__(self) -> int:
        """|CL_s|, counting each formula and its negation."""
        return 2 * len(self.positives)

    def formulas(self) -> list[Formula]:
        return [g for f in self.positives for g in (f, Not(f))]

    def bit(self, f: Formula) -> int:
        return 1 << self.index[_positive(f)]

    def holds(self, mask: int, f: Formula) -> bool:
        present = bool(mask & (1 << self.index[_positive(f)]))
        return not present if isinstance(f, Not) else present

    def of_kind(self, *kinds: type) -> list[Formula]:
        return [f for f in self.positives if isinstance(f, kinds)]

    @cached_property
    def eventualities(self) -> list[Formula]:
        """U_s: the eventuality formulas of CL_s in closure order."""
        return self.of_kind(Eventually)

    @cached_property
    def comm_props(self) -> list[Formula]:
        return self.of_kind(Send, Recv)

    @cached_property
    def comm_mask(self) -> int:
        return sum(self.bit(f) for f in self.comm_props)

    def members(self, mask: int) -> list[Formula]:
        return [f if mask >> i & 1 else Not(f) for i, f in enumerate(self.positives)]

    def describe(self, mask: int) -> str:
        return "{" + ", ".join(to_text(f) for i, f in enumerate(self.positives) if mask >> i & 1) + "}"

    # -- relation keys ------------------------------------------------------

    @cached_property
    def _nexts(self) -> list[tuple[int, Formula]]:
        return [(self.index[f], f.arg) for f in self.of_kind(Next)]

    @cached_property
    def _prevs(self) -> list[tuple[int, Formula]]:
        return [(self.index[f], f.arg) for f in self.of_kind(Prev)]

    def _pack(self, mask: int, items: list[tuple[int, Formula]], use_arg: bool) -> int:
        out = 0
        for k, (i, arg) in enumerate(items):
            v = self.holds(mask, arg) if use_arg else bool(mask >> i & 1)
            if v:
                out |= 1 << k
        return out

    def forward_key(self, mask: int) -> tuple[int, int]:
        """What this atom demands of a successor: (next-requirements, previous-facts)."""
        return (self._pack(mask, self._nexts, False), self._pack(mask, self._prevs, True))

    def backward_key(self, mask: int) -> tuple[int, int]:
        """What this atom offers to a predecessor: (next-facts, previous-requirements)."""
        return (self._pack(mask, self._nexts, True), self._pack(mask, self._prevs, False))

    def is_initial(self, mask: int) -> bool:
        return self.holds(mask, PREV_FALSE)

    def is_last(self, mask: int) -> bool:
        return self.holds(mask, NEXT_FALSE)

    def letter(self, mask: int) -> frozenset[str]:
        """Input letter read when entering an atom: its propositions and communicated messages."""
        out = set()
        for i, f in enumerate(self.positives):
            if mask >> i & 1:
                if isinstance(f, Prop):
                    out.add(f.name)
                elif isinstance(f, (Send, Recv)):
                    out.add(f.msg)
        return frozenset(out)

    def pending(self, mask: int) -> int:
        """Bitmask over U_s of eventualities in the atom not yet fulfilled in it."""
        out = 0
        for k, f in enumerate(self.eventualities):
            if mask & self.bit(f) and not self.holds(mask, f.arg):
                out |= 1 << k
        return out

    def fulfilled(self, mask: int) -> int:
        """Bitmask over U_s of eventualities whose argument holds in the atom."""
        out = 0
        for k, f in enumerate(self.eventualities):
            if self.holds(mask, f.arg):
                out |= 1 << k
        return out


@dataclass
class Closure:
    formula: Formula
    signature: Signature
    global_formulas: list[Formula]
    local: dict[str, LocalClosure]

    @property
    def services(self) -> tuple[str, ...]:
        return self.signature.services

    def __getitem__(self, service: str) -> LocalClosure:
        return self.local[service]

    def dump(self) -> str:
        lines = ["CL:"]
        for i, g in enumerate(self.global_formulas):
            lines.append(f"  g{i}: {to_text(g)}")
        for s in self.services:
            cl = self.local[s]
            lines.append(f"CL_{s} ({len(cl)} formulas, |U_{s}| = {len(cl.eventualities)}):")
            for i, f in enumerate(cl.positives):
                lines.append(f"  {i}: {to_text(f)}")
        return "\n".join(lines)


def closure(psi: Formula) -> Closure:
    """Least set closed under the closure rules, with messages restricted to those in ``psi``.

    Double negations are removed first, so ``~g`` always has a positive ``g``.
    """
    check_well_formed(psi)
    psi = normalize(psi)
    sig = signature(psi)

    glob: set[Formula] = set()
    seeds: dict[str, set[Formula]] = {s: set() for s in sig.services}
    work = [psi]
    while work:
        g = work.pop()
        for h in (g, neg(g)):
            if h in glob:
                continue
            glob.add(h)
            match h:
                case At(alpha, s):
                    seeds[s].add(alpha)
                case Not(a):
                    work.append(a)
                case Or(a, b):
                    work.extend((a, b))

    local = {}
    for s in sig.services:
        pos: set[Formula] = set()
        todo = list(seeds[s]) + [TRUE, NEXT_FALSE, PREV_FALSE]
        for m in sig.messages:
            for peer in sig.services:
                if peer != s:
                    todo += [Send(m, peer), Recv(m, peer)]
        while todo:
            f = _positive(todo.pop())
            if f in pos:
                continue
            pos.add(f)
            match f:
                case Or(a, b):
                    todo += [a, b]
                case Next(a) | Prev(a):
                    todo.append(a)
                case Eventually(a):
                    todo += [a, Next(f)]
        local[s] = LocalClosure(s, sorted(pos, key=_order_key))
    return Closure(psi, sig, sorted(glob, key=_order_key), local)


# --------------------------------------------------------------------------
# atoms
# --------------------------------------------------------------------------


def _complete(cl: LocalClosure, base: int) -> int:
    """Fill in True, disjunctions and eventualities from the independent members."""
    mask = base | cl.bit(TRUE)
    for i, f in enumerate(cl.positives):
        match f:
            case Or(a, b):
                if cl.holds(mask, a) or cl.holds(mask, b):
                    mask |= 1 << i
            case Eventually(a):
                if cl.holds(mask, a) or cl.holds(mask, Next(f)):
                    mask |= 1 << i
    return mask


def atoms(cl: LocalClosure) -> list[int]:
    """All atoms of one service, generated from their independent members.

    Besides negation-completeness, disjunction and eventuality consistency,
    an initial atom (containing Y false) contains no other Y-formula and no
    send/receive proposition, a last atom (containing X false) contains no
    other X-formula, and an atom holds at most one send/receive proposition.
    """
    props = cl.of_kind(Prop)
    nexts = [f for f in cl.of_kind(Next) if f != NEXT_FALSE]
    prevs = [f for f in cl.of_kind(Prev) if f != PREV_FALSE]
    out = []
    for initial, last in itertools.product((False, True), repeat=2):
        fixed = (cl.bit(PREV_FALSE) if initial else 0) | (cl.bit(NEXT_FALSE) if last else 0)
        free = props + ([] if last else nexts) + ([] if initial else prevs)
        comms: list[Formula | None] = [None] if initial else [None] + cl.comm_props
        for comm in comms:
            start = fixed | (cl.bit(comm) if comm is not None else 0)
            for bits in itertools.product((0, 1), repeat=len(free)):
                base = start
                for b, f in zip(bits, free):
                    if b:
                        base |= cl.bit(f)
                out.append(_complete(cl, base))
    return sorted(out)


def is_atom(cl: LocalClosure, mask: int) -> bool:
    """Direct check of every atom rule on an arbitrary subset of positives."""
    if not cl.holds(mask, TRUE):
        return False
    for f in cl.positives:
        match f:
            case Or(a, b):
                if cl.holds(mask, f) != (cl.holds(mask, a) or cl.holds(mask, b)):
                    return False
            case Eventually(a):
                if cl.holds(mask, f) != (cl.holds(mask, a) or cl.holds(mask, Next(f))):
                    return False
    if cl.holds(mask, PREV_FALSE):
        if any(cl.holds(mask, f) for f in cl.of_kind(Prev) if f != PREV_FALSE):
            return False
        if mask & cl.comm_mask:
            return False
    if cl.holds(mask, NEXT_FALSE):
        if any(cl.holds(mask, f) for f in cl.of_kind(Next) if f != NEXT_FALSE):
            return False
    if bin(mask & cl.comm_mask).count("1") > 1:
        return False
    return True


# --------------------------------------------------------------------------
# global atoms and relations
# --------------------------------------------------------------------------


def global_contains(cls: Closure, atom_tuple: dict[str, int], psi: Formula) -> bool:
    """Membership of a global formula in a tuple of atoms (one per service)."""
    match psi:
        case At(alpha, s):
            return cls[s].holds(atom_tuple[s], alpha)
        case Not(a):
            return not global_contains(cls, atom_tuple, a)
        case Or(a, b):
            return global_contains(cls, atom_tuple, a) or global_contains(cls, atom_tuple, b)
    raise TypeError(f"not a global formula: {psi!r}")


def loc_step(cl: LocalClosure, a: int, b: int) -> bool:
    """``a ~>_l b``: X-formulas of ``a`` match ``b`` and Y-formulas of ``b`` match ``a``."""
    for f in cl.of_kind(Next):
        if cl.holds(a, f) != cl.holds(b, f.arg):
            return False
    for f in cl.of_kind(Prev):
        if cl.holds(b, f) != cl.holds(a, f.arg):
            return False
    return True


def loc_pairs(cl: LocalClosure, masks: list[int]) -> Iterator[tuple[int, int]]:
    """All pairs of ``masks`` related by ``~>_l``, found by joining on relation keys."""
    by_key: dict[tuple[int, int], list[int]] = defaultdict(list)
    for b in masks:
        by_key[cl.backward_key(b)].append(b)
    for a in masks:
        for b in by_key.get(cl.forward_key(a), ()):
            yield a, b


def comm_step(cls: Closure, sender: str, a: int, receiver: str, b: int, msg: str) -> bool:
    """``a ~>_lambda b`` for message ``msg``: ``a`` sends it to ``receiver``, ``b`` receives it."""
    if sender == receiver:
        return False
    src, dst = cls[sender], cls[receiver]
    return (
        src.holds(a, Send(msg, receiver))
        and dst.holds(b, Recv(msg, sender))
        and not dst.is_initial(b)
    )
