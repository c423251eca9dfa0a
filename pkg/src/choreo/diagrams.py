"""Lamport diagrams: finite per-service event chains joined by message edges.

Events are addressed positionally as ``(service, index)``; index 0 is the
initial event of the service.  Labels are sets of proposition and message
names; the diagram records which names are messages.
"""

from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

EventRef = tuple[str, int]
SendEvent = tuple[str, str, str]  # (message, sender, receiver)


class DiagramError(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    axiom: str
    events: tuple[EventRef, ...]
    detail: str = ""

    def __str__(self) -> str:
        where = ", ".join(f"{s}[{i}]" for s, i in self.events)
        return f"{self.axiom}: {self.detail} ({where})" if where else f"{self.axiom}: {self.detail}"


@dataclass(frozen=True)
class LamportDiagram:
    services: tuple[str, ...]
    labels: tuple[tuple[frozenset[str], ...], ...]
    comm: frozenset[tuple[EventRef, EventRef]] = frozenset()
    messages: frozenset[str] = frozenset()

    @classmethod
    def build(
        cls,
        events: Mapping[str, Sequence[Iterable[str]]],
        comm: Iterable[tuple[EventRef, EventRef]] = (),
        messages: Iterable[str] = (),
    ) -> LamportDiagram:
        """``events[s]`` lists the labels of every event of ``s``, initial event first.

        A bare string stands for a single label.
        """

        def label(l: Iterable[str] | str) -> frozenset[str]:
            return frozenset({l}) if isinstance(l, str) else frozenset(l)

        return cls(
            tuple(events),
            tuple(tuple(label(l) for l in ls) for ls in events.values()),
            frozenset((tuple(a), tuple(b)) for a, b in comm),
            frozenset(messages),
        )

    # -- structure ---------------------------------------------------------

    @cached_property
    def index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.services)}

    def length(self, s: str) -> int:
        """Number of events of ``s``, including its initial event."""
        return len(self.labels[self.index[s]])

    def label(self, e: EventRef) -> frozenset[str]:
        return self.labels[self.index[e[0]]][e[1]]

    def events(self, s: str | None = None) -> list[EventRef]:
        services = self.services if s is None else (s,)
        return [(t, i) for t in services for i in range(self.length(t))]

    def maximal(self, s: str) -> EventRef:
        return (s, self.length(s) - 1)

    @cached_property
    def receiver_of(self) -> dict[EventRef, EventRef]:
        return dict(self.comm)

    @cached_property
    def sender_of(self) -> dict[EventRef, EventRef]:
        return {r: s for s, r in self.comm}

    def message_of(self, e: EventRef) -> str | None:
        msgs = self.label(e) & self.messages
        return next(iter(msgs)) if len(msgs) == 1 else None

    def props_of(self, e: EventRef) -> frozenset[str]:
        return self.label(e) - self.messages

    def with_labels(self, labels: tuple[tuple[frozenset[str], ...], ...]) -> LamportDiagram:
        return LamportDiagram(self.services, labels, self.comm, self.messages)

    @cached_property
    def clocks(self) -> dict[EventRef, tuple[int, ...]]:
        """Vector clock per event: entry j is the largest index of service j below the event.

        Only meaningful for acyclic diagrams.
        """
        n = len(self.services)
        clocks: dict[EventRef, tuple[int, ...]] = {}
        for e in topological_order(self):
            s, i = e
            k = self.index[s]
            vc = [0] * n
            if i > 0:
                vc = list(clocks[(s, i - 1)])
            sender = self.sender_of.get(e)
            if sender is not None:
                vc = [max(a, b) for a, b in zip(vc, clocks[sender])]
            vc[k] = i
            clocks[e] = tuple(vc)
        return clocks

    def leq(self, e: EventRef, f: EventRef) -> bool:
        """Causal order ``e <= f``."""
        if e[1] == 0:
            # the initial event of a service lies below all of that service's events
            return e[0] == f[0] or self.clocks[f][self.index[e[0]]] > 0
        return self.clocks[f][self.index[e[0]]] >= e[1]

    def __str__(self) -> str:
        return format_ld(self)


def topological_order(d: LamportDiagram) -> list[EventRef]:
    """Events in an order compatible with local order and message edges.

    Raises DiagramError on cycles.
    """
    preds: dict[EventRef, list[EventRef]] = {}
    for s in d.services:
        for i in range(d.length(s)):
            preds[(s, i)] = [(s, i - 1)] if i > 0 else []
    for snd, rcv in d.comm:
        if rcv in preds:
            preds[rcv].append(snd)
    indeg = {e: len(p) for e, p in preds.items()}
    succs: dict[EventRef, list[EventRef]] = {e: [] for e in preds}
    for e, ps in preds.items():
        for p in ps:
            if p in succs:
                succs[p].append(e)
    queue = deque(e for e in preds if indeg[e] == 0)
    order = []
    while queue:
        e = queue.popleft()
        order.append(e)
        for f in succs[e]:
            indeg[f] -= 1
            if indeg[f] == 0:
                queue.append(f)
    if len(order) != len(preds):
        raise DiagramError("causal order is cyclic")
    return order


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def validate(d: LamportDiagram) -> Violation | None:
    """Return the first violated diagram axiom, or None if ``d`` is a valid Lamport diagram."""
    if not d.services:
        return Violation("services", (), "a diagram needs at least one service")
    if len(set(d.services)) != len(d.services):
        return Violation("services", (), "duplicate service names")
    for s, ls in zip(d.services, d.labels):
        if len(ls) == 0:
            return Violation("initial event", (), f"service {s!r} has no initial event")

    owner: dict[str, str] = {}
    for s in d.services:
        for e in d.events(s):
            for p in d.props_of(e):
                if owner.setdefault(p, s) != s:
                    return Violation("proposition ownership", (e,), f"{p!r} also labels service {owner[p]!r}")

    seen: dict[EventRef, tuple[EventRef, EventRef]] = {}
    for pair in sorted(d.comm):
        snd, rcv = pair
        for e in pair:
            if e[0] not in d.index or not 0 <= e[1] < d.length(e[0]):
                return Violation("dangling message", pair, "message endpoint is not an event")
        if snd[0] == rcv[0]:
            return Violation("local message", pair, "sender and receiver are the same service")
        if snd[1] == 0 or rcv[1] == 0:
            return Violation("initial communication", pair, "the initial event cannot communicate")
        for e in pair:
            if e in seen:
                return Violation("single communication", (e,), "event takes part in two messages")
            seen[e] = pair
        m_snd, m_rcv = d.label(snd) & d.messages, d.label(rcv) & d.messages
        if len(m_snd) != 1 or m_snd != m_rcv:
            return Violation("message label", pair, "both endpoints must carry exactly the transmitted message")

    for e in d.events():
        if e not in seen and d.label(e) & d.messages:
            return Violation("message label", (e,), "only communication events carry message labels")

    by_channel: dict[tuple[str, str], list[tuple[EventRef, EventRef]]] = {}
    for snd, rcv in d.comm:
        by_channel.setdefault((snd[0], rcv[0]), []).append((snd, rcv))
    for pairs in by_channel.values():
        pairs.sort()
        for (s1, r1), (s2, r2) in zip(pairs, pairs[1:]):
            if r2[1] < r1[1]:
                return Violation("FIFO non-crossing", (s1, s2, r1, r2), "messages overtake each other")

    try:
        topological_order(d)
    except DiagramError:
        return Violation("acyclicity", (), "local order and messages form a cycle")
    return None


def check(d: LamportDiagram) -> LamportDiagram:
    v = validate(d)
    if v is not None:
        raise DiagramError(str(v))
    return d


# --------------------------------------------------------------------------
# configurations and linearizations
# --------------------------------------------------------------------------

Configuration = tuple[int, ...]  # one event index per service, in d.services order


def is_configuration(d: LamportDiagram, cut: Configuration) -> bool:
    for s, k in zip(d.services, cut):
        vc = d.clocks[(s, k)]
        if any(vc[j] > cut[j] for j in range(len(cut))):
            return False
    return True


def initial_configuration(d: LamportDiagram) -> Configuration:
    return (0,) * len(d.services)


def maximal_configuration(d: LamportDiagram) -> Configuration:
    return tuple(d.length(s) - 1 for s in d.services)


def successors(d: LamportDiagram, cut: Configuration) -> list[tuple[EventRef, Configuration]]:
    """One-event extensions of ``cut`` that are again configurations."""
    out = []
    for k, s in enumerate(d.services):
        if cut[k] + 1 < d.length(s):
            nxt = cut[:k] + (cut[k] + 1,) + cut[k + 1 :]
            if is_configuration(d, nxt):
                out.append(((s, cut[k] + 1), nxt))
    return out


def configurations(d: LamportDiagram) -> list[Configuration]:
    """All configurations in breadth-first order from the initial one."""
    start = initial_configuration(d)
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        c = queue.popleft()
        for _, nxt in successors(d, c):
            if nxt not in seen:
                seen.add(nxt)
                order.append(nxt)
                queue.append(nxt)
    return order


def linearizations(d: LamportDiagram) -> Iterator[tuple[EventRef, ...]]:
    """All topological orders of the non-initial events."""

    def walk(cut: Configuration, prefix: list[EventRef]) -> Iterator[tuple[EventRef, ...]]:
        nexts = successors(d, cut)
        if not nexts:
            yield tuple(prefix)
            return
        for e, c in nexts:
            prefix.append(e)
            yield from walk(c, prefix)
            prefix.pop()

    yield from walk(initial_configuration(d), [])


def send_event(d: LamportDiagram, e: EventRef) -> SendEvent | None:
    rcv = d.receiver_of.get(e)
    if rcv is None:
        return None
    return (d.message_of(e), e[0], rcv[0])


def chor(d: LamportDiagram) -> set[tuple[SendEvent, ...]]:
    """Send-event projections of all linearizations of ``d``."""
    words: set[tuple[SendEvent, ...]] = set()
    # sends are ordered only through the causal order, so project the configuration
    # lattice restricted to sends: memoise on cuts to avoid enumerating every interleaving
    memo: dict[Configuration, set[tuple[SendEvent, ...]]] = {}

    def suffixes(cut: Configuration) -> set[tuple[SendEvent, ...]]:
        if cut in memo:
            return memo[cut]
        nexts = successors(d, cut)
        if not nexts:
            result = {()}
        else:
            result = set()
            for e, c in nexts:
                se = send_event(d, e)
                for w in suffixes(c):
                    result.add((se,) + w if se else w)
        memo[cut] = result
        return result

    words |= suffixes(initial_configuration(d))
    return words


# --------------------------------------------------------------------------
# exhaustive enumeration
# --------------------------------------------------------------------------


def _powerset(items: Sequence[str]) -> list[frozenset[str]]:
    items = sorted(items)
    return [frozenset(c) for r in range(len(items) + 1) for c in itertools.combinations(items, r)]


def _matchings(
    events: list[EventRef], messages: Sequence[str]
) -> Iterator[list[tuple[EventRef, EventRef, str]]]:
    """Partial matchings of events into directed, message-labelled pairs across services."""
    if not events:
        yield []
        return
    first, rest = events[0], events[1:]
    yield from _matchings(rest, messages)
    for k, other in enumerate(rest):
        if other[0] == first[0]:
            continue
        remaining = rest[:k] + rest[k + 1 :]
        for tail in _matchings(remaining, messages):
            for m in messages:
                yield [(first, other, m)] + tail
                yield [(other, first, m)] + tail


def enumerate_diagrams(
    services: Sequence[str],
    messages: Sequence[str],
    props: Mapping[str, Iterable[str]] | None = None,
    max_events: int = 1,
) -> Iterator[LamportDiagram]:
    """Every valid diagram with at most ``max_events`` non-initial events per service.

    Communication events carry exactly their message; every event (the
    initial ones included) carries any subset of its service's propositions.
    """
    props = props or {}
    label_choices = {s: _powerset(tuple(props.get(s, ()))) for s in services}
    msgset = frozenset(messages)
    for lengths in itertools.product(range(max_events + 1), repeat=len(services)):
        events = [(s, i) for s, k in zip(services, lengths) for i in range(1, k + 1)]
        for matching in _matchings(events, list(messages)):
            msg_of = {}
            comm = []
            for snd, rcv, m in matching:
                msg_of[snd] = msg_of[rcv] = m
                comm.append((snd, rcv))
            skeleton = LamportDiagram(
                tuple(services),
                tuple(
                    tuple(frozenset((msg_of[(s, i)],)) if (s, i) in msg_of else frozenset() for i in range(k + 1))
                    for s, k in zip(services, lengths)
                ),
                frozenset(comm),
                msgset,
            )
            if validate(skeleton) is not None:
                continue
            slots = [(s, i) for s, k in zip(services, lengths) for i in range(k + 1)]
            for choice in itertools.product(*(label_choices[s] for s, _ in slots)):
                if not any(choice):
                    yield skeleton
                    continue
                labels = [list(ls) for ls in skeleton.labels]
                for (s, i), extra in zip(slots, choice):
                    k = skeleton.index[s]
                    labels[k][i] = labels[k][i] | extra
                yield skeleton.with_labels(tuple(tuple(ls) for ls in labels))


# --------------------------------------------------------------------------
# text format (.ld) and DOT export
# --------------------------------------------------------------------------

_LD_LINE = re.compile(r"^(?P<kw>services|messages|event|init|msg)\b(?P<rest>.*)$")


def _parse_labels(text: str, where: str) -> frozenset[str]:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise DiagramError(f"{where}: labels must be written as {{a, b}}")
    body = text[1:-1].strip()
    return frozenset(x.strip() for x in body.split(",") if x.strip())


def parse_ld(text: str) -> LamportDiagram:
    """Parse the ``.ld`` format.

    ::

        services: p c
        messages: a            # optional; names used in msg lines are messages anyway
        init p {ready}         # optional labels of an initial event
        event e1 p {a}
        event f1 c {a}
        msg e1 -> f1
    """
    services: list[str] = []
    messages: set[str] = set()
    events: dict[str, list[frozenset[str]]] = {}
    ids: dict[str, EventRef] = {}
    pending: list[tuple[str, str, int]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        m = _LD_LINE.match(line)
        if not m:
            raise DiagramError(f"{where}: cannot parse {line!r}")
        kw, rest = m.group("kw"), m.group("rest").lstrip(":").strip()
        if kw == "services":
            services = rest.split()
            events = {s: [frozenset()] for s in services}
            for s in services:
                ids[f"bot_{s}"] = (s, 0)
        elif kw == "messages":
            messages |= set(rest.replace(",", " ").split())
        elif kw in ("event", "init"):
            parts = rest.split(None, 2 if kw == "event" else 1)
            if kw == "event":
                if len(parts) < 2:
                    raise DiagramError(f"{where}: expected 'event <id> <service> {{labels}}'")
                eid, s = parts[0], parts[1]
                labels = _parse_labels(parts[2] if len(parts) > 2 else "{}", where)
            else:
                s = parts[0]
                labels = _parse_labels(parts[1] if len(parts) > 1 else "{}", where)
            if s not in events:
                raise DiagramError(f"{where}: unknown service {s!r}")
            if kw == "init":
                events[s][0] = labels
            else:
                if eid in ids:
                    raise DiagramError(f"{where}: duplicate event id {eid!r}")
                events[s].append(labels)
                ids[eid] = (s, len(events[s]) - 1)
        else:
            arrow = re.fullmatch(r"(\S+)\s*->\s*(\S+)", rest)
            if not arrow:
                raise DiagramError(f"{where}: expected 'msg <send-id> -> <recv-id>'")
            pending.append((arrow.group(1), arrow.group(2), lineno))
    if not services:
        raise DiagramError("missing 'services:' header")
    comm = []
    declared = bool(messages)
    for a, b, lineno in pending:
        if a not in ids or b not in ids:
            raise DiagramError(f"line {lineno}: unknown event id in message")
        comm.append((ids[a], ids[b]))
        if not declared:
            common = events[ids[a][0]][ids[a][1]] & events[ids[b][0]][ids[b][1]]
            if len(common) != 1:
                raise DiagramError(f"line {lineno}: cannot infer the message; add a 'messages:' line")
            messages |= common
    return LamportDiagram.build(events, comm, messages)


def event_name(e: EventRef) -> str:
    s, i = e
    return f"bot_{s}" if i == 0 else f"{s}{i}"


def format_ld(d: LamportDiagram) -> str:
    def fmt(labels: frozenset[str]) -> str:
        return "{" + ", ".join(sorted(labels)) + "}"

    lines = ["services: " + " ".join(d.services)]
    if d.messages:
        lines.append("messages: " + " ".join(sorted(d.messages)))
    for s in d.services:
        if d.label((s, 0)):
            lines.append(f"init {s} {fmt(d.label((s, 0)))}")
        for i in range(1, d.length(s)):
            lines.append(f"event {event_name((s, i))} {s} {fmt(d.label((s, i)))}")
    for snd, rcv in sorted(d.comm):
        lines.append(f"msg {event_name(snd)} -> {event_name(rcv)}")
    return "\n".join(lines) + "\n"


def diagram_to_dot(d: LamportDiagram, name: str = "diagram") -> str:
    """One column per service; solid local edges, bold arrows for messages."""
    out = [f"digraph {name} {{", "  rankdir=TB;", "  node [shape=box, fontsize=10];"]
    for s in d.services:
        out.append(f"  subgraph cluster_{s} {{ label=\"{s}\"; style=invis;")
        for e in d.events(s):
            text = "&perp;" if e[1] == 0 else event_name(e)
            msg = d.message_of(e)
            if msg is not None:
                text += (" !" if e in d.receiver_of else " ?") + msg
            props = sorted(d.props_of(e))
            if props:
                text += " {" + ",".join(props) + "}"
            out.append(f"    \"{event_name(e)}\" [label=\"{text}\"];")
        for i in range(1, d.length(s)):
            out.append(f"    \"{event_name((s, i - 1))}\" -> \"{event_name((s, i))}\" [arrowhead=none];")
        out.append("  }")
    for snd, rcv in sorted(d.comm):
        out.append(f"  \"{event_name(snd)}\" -> \"{event_name(rcv)}\" [style=bold, constraint=false];")
    out.append("}")
    return "\n".join(out) + "\n"
