"""Conversation protocols and bounded realizability checks."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .diagrams import SendEvent
from .sca import SCA, Coupling, bounded_chor_language

Word = tuple[SendEvent, ...]


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class ConversationProtocol:
    """An NFA over send events ``(message, sender, receiver)``."""

    states: tuple[str, ...]
    initial: str
    final: frozenset[str]
    transitions: frozenset[tuple[str, SendEvent, str]]

    def __post_init__(self) -> None:
        known = set(self.states)
        if self.initial not in known:
            raise ProtocolError(f"initial state {self.initial!r} is not declared")
        if not self.final <= known:
            raise ProtocolError(f"unknown final states {sorted(self.final - known)}")
        for q, (m, p, c), r in self.transitions:
            if q not in known or r not in known:
                raise ProtocolError(f"transition {q} -> {r} uses an undeclared state")
            if p == c:
                raise ProtocolError(f"{m}[{p}->{c}]: a service cannot send to itself")

    @property
    def services(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for _, (_, p, c), _ in sorted(self.transitions):
            seen.setdefault(p)
            seen.setdefault(c)
        return tuple(seen)

    @property
    def messages(self) -> frozenset[str]:
        return frozenset(m for _, (m, _, _), _ in self.transitions)

    def accepts(self, word: Iterable[SendEvent]) -> bool:
        current = {self.initial}
        for a in word:
            current = {r for q, b, r in self.transitions if q in current and b == a}
            if not current:
                return False
        return bool(current & self.final)


def nfa_language_bounded(c: ConversationProtocol, max_len: int) -> set[Word]:
    """Accepted words of length at most ``max_len``."""
    out: dict[str, list[tuple[SendEvent, str]]] = defaultdict(list)
    for q, a, r in c.transitions:
        out[q].append((a, r))
    words: set[Word] = set()
    frontier: dict[Word, set[str]] = {(): {c.initial}}
    for length in range(max_len + 1):
        nxt: dict[Word, set[str]] = defaultdict(set)
        for w, qs in frontier.items():
            if qs & c.final:
                words.add(w)
            if length < max_len:
                for q in qs:
                    for a, r in out[q]:
                        nxt[w + (a,)].add(r)
        frontier = nxt
    return words


# --------------------------------------------------------------------------
# realizability
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    """Outcome of comparing an implementation's conversations with a protocol.

    ``kind`` is ``equal``, ``sca-extra`` (the implementation produces the
    witness, the protocol does not) or ``chor-missing`` (the reverse).
    """

    kind: str
    witness: Word | None = None
    produced: frozenset[Word] = field(default=frozenset(), compare=False)
    expected: frozenset[Word] = field(default=frozenset(), compare=False)

    @property
    def holds(self) -> bool:
        return self.kind == "equal"

    def to_dict(self) -> dict:
        return {
            "verdict": self.kind,
            "witness": None if self.witness is None else [list(a) for a in self.witness],
            "produced": sorted([list(a) for a in w] for w in self.produced),
            "expected": sorted([list(a) for a in w] for w in self.expected),
        }

    @classmethod
    def from_dict(cls, data: dict) -> Verdict:
        def word(w: list) -> Word:
            return tuple(tuple(a) for a in w)

        return cls(
            data["verdict"],
            None if data["witness"] is None else word(data["witness"]),
            frozenset(word(w) for w in data["produced"]),
            frozenset(word(w) for w in data["expected"]),
        )


def word_text(w: Word) -> str:
    return " ".join(m for m, _, _ in w) if w else "(empty)"


def _first(words: set[Word]) -> Word:
    return min(words, key=lambda w: (len(w), w))


def compare_languages(produced: set[Word], expected: set[Word]) -> Verdict:
    extra, missing = produced - expected, expected - produced
    if extra:
        kind, witness = "sca-extra", _first(extra)
    elif missing:
        kind, witness = "chor-missing", _first(missing)
    else:
        kind, witness = "equal", None
    return Verdict(kind, witness, frozenset(produced), frozenset(expected))


def realizes_bounded(sca: SCA, c: ConversationProtocol, event_bound: int, word_bound: int) -> Verdict:
    """Compare conversations of diagrams with at most ``event_bound`` events per service,
    cut to words of length at most ``word_bound``, with the protocol's words of that length."""
    if c.messages - sca.messages:
        raise ProtocolError(f"protocol messages {sorted(c.messages - sca.messages)} unknown to the system")
    produced = {w for w in bounded_chor_language(sca, event_bound) if len(w) <= word_bound}
    return compare_languages(produced, nfa_language_bounded(c, word_bound))


# --------------------------------------------------------------------------
# per-service projection
# --------------------------------------------------------------------------


def project(c: ConversationProtocol, services: Iterable[str] | None = None) -> SCA:
    """Determinized projection of the protocol onto every service, coupled per FIFO channel.

    Each service keeps the transitions it takes part in and treats the rest as
    silent.  Every state entered by sending ``m`` to ``r`` is coupled with
    every state of ``r`` entered by receiving ``m`` from the sender.
    """
    services = tuple(services) if services is not None else c.services
    states, final, transitions, names = {}, {}, {}, {}
    entered: dict[tuple[str, str, str, str], set] = defaultdict(set)
    for s in services:

        def closure(qs: frozenset[str]) -> frozenset[str]:
            seen = set(qs)
            todo = list(qs)
            while todo:
                q = todo.pop()
                for p, (_, snd, rcv), r in c.transitions:
                    if p == q and s not in (snd, rcv) and r not in seen:
                        seen.add(r)
                        todo.append(r)
            return frozenset(seen)

        start = closure(frozenset({c.initial}))
        seen = {start: 0}
        order = [start]
        trans = set()
        k = 0
        while k < len(order):
            qs = order[k]
            k += 1
            moves: dict[SendEvent, set[str]] = defaultdict(set)
            for p, a, r in c.transitions:
                if p in qs and s in a[1:]:
                    moves[a].add(r)
            for a, targets in sorted(moves.items()):
                nxt = closure(frozenset(targets))
                if nxt not in seen:
                    seen[nxt] = len(order)
                    order.append(nxt)
                m, snd, rcv = a
                trans.add((qs, frozenset({m}), nxt))
                entered[(m, snd, rcv, "!" if snd == s else "?")].add(nxt)
        states[s] = order
        final[s] = {qs for qs in order if qs & c.final}
        transitions[s] = trans
        names[s] = {qs: f"{s}_{seen[qs]}" for qs in order}
    couplings = []
    for (m, snd, rcv, kind), srcs in sorted(entered.items(), key=lambda kv: kv[0]):
        if kind != "!" or rcv not in states:
            continue
        dsts = entered.get((m, snd, rcv, "?"), set())
        if dsts:
            couplings.append(Coupling(snd, frozenset(srcs), rcv, frozenset(dsts)))
    init = [tuple(frozenset({states[s][0]}) for s in services)]
    return SCA(services, states, final, transitions, couplings, init, c.messages, {}, "post", names)


# --------------------------------------------------------------------------
# text format (.cp) and DOT export
# --------------------------------------------------------------------------

_TRANS = re.compile(r"trans\s+(\S+)\s*->\s*(\S+)\s+on\s+(\w+)\s*\[\s*(\w+)\s*->\s*(\w+)\s*\]")


def parse_cp(text: str) -> ConversationProtocol:
    """Parse the ``.cp`` format: ``init g0;``, ``final g2 g3;``, ``trans g0 -> g1 on a[p->c];``."""
    initial: str | None = None
    final: set[str] = set()
    order: dict[str, None] = {}
    transitions = set()
    body = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    for stmt in body.split(";"):
        stmt = " ".join(stmt.split())
        if not stmt:
            continue
        word, _, rest = stmt.partition(" ")
        match word:
            case "init":
                initial = rest.strip()
                order.setdefault(initial)
            case "final":
                for q in rest.split():
                    final.add(q)
                    order.setdefault(q)
            case "states":
                for q in rest.split():
                    order.setdefault(q)
            case "trans":
                m = _TRANS.fullmatch(stmt)
                if not m:
                    raise ProtocolError(f"cannot parse {stmt!r}; expected 'trans q -> r on m[p->c]'")
                q, r, msg, snd, rcv = m.groups()
                order.setdefault(q)
                order.setdefault(r)
                transitions.add((q, (msg, snd, rcv), r))
            case _:
                raise ProtocolError(f"unexpected statement {stmt!r}")
    if initial is None:
        raise ProtocolError("missing 'init' statement")
    return ConversationProtocol(tuple(order), initial, frozenset(final), frozenset(transitions))


def format_cp(c: ConversationProtocol) -> str:
    lines = [f"init {c.initial};", "final " + " ".join(sorted(c.final)) + ";"]
    for q, (m, p, r), t in sorted(c.transitions):
        lines.append(f"trans {q} -> {t} on {m}[{p}->{r}];")
    return "\n".join(lines) + "\n"


def protocol_to_dot(c: ConversationProtocol, name: str = "protocol") -> str:
    out = [f"digraph {name} {{", "  rankdir=LR;", "  __start [shape=point];"]
    for q in c.states:
        shape = "doublecircle" if q in c.final else "circle"
        out.append(f"  \"{q}\" [shape={shape}];")
    out.append(f"  __start -> \"{c.initial}\";")
    for q, (m, p, r), t in sorted(c.transitions):
        out.append(f"  \"{q}\" -> \"{t}\" [label=\"{m} ({p}&rarr;{r})\"];")
    out.append("}")
    return "\n".join(out) + "\n"
