"""Systems of communicating automata and their runs on Lamport diagrams.

Each service owns a finite automaton over letters (sets of proposition and
message names).  Couplings (lambda-constraints) link states of different
services; they are stored as bicliques ``src_states x dst_states`` because
synthesized systems couple whole classes of states at once.

A run labels every event with the local state reached after it.  For a
message from ``e`` to ``f`` the coupling must join the sender's state to the
state entered by ``f``.  ``coupling_source`` selects which sender state:
``"post"`` (the state reached by the send, used by synthesized systems) or
``"pre"`` (the state the send leaves).
"""

from __future__ import annotations

import itertools
import re
from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Iterator, Mapping, Sequence

from .diagrams import (
    Configuration,
    EventRef,
    LamportDiagram,
    SendEvent,
    chor,
    configurations,
    linearizations,
    topological_order,
    validate,
)

State = Hashable
Letter = frozenset


class SCAError(ValueError):
    pass


@dataclass(frozen=True)
class Coupling:
    src_service: str
    src: frozenset
    dst_service: str
    dst: frozenset

    def __len__(self) -> int:
        return len(self.src) * len(self.dst)


@dataclass
class SCA:
    services: tuple[str, ...]
    states: dict[str, list]
    final: dict[str, set]
    transitions: dict[str, set[tuple[State, Letter, State]]]
    couplings: list[Coupling]
    init: list[tuple[frozenset, ...]]
    messages: frozenset[str] = frozenset()
    entry: dict[str, dict[State, Letter]] = field(default_factory=dict)
    coupling_source: str = "post"
    names: dict[str, dict[State, str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.coupling_source not in ("post", "pre"):
            raise SCAError(f"coupling source must be 'post' or 'pre', not {self.coupling_source!r}")
        for s in self.services:
            known = set(self.states[s])
            for q, _, r in self.transitions.get(s, ()):
                if q not in known or r not in known:
                    raise SCAError(f"transition of {s!r} uses an unknown state")
            if not self.final.get(s, set()) <= known:
                raise SCAError(f"final states of {s!r} are not states of {s!r}")
        for c in self.couplings:
            if c.src_service == c.dst_service:
                raise SCAError("couplings must join states of two distinct services")
            if c.src_service not in self.states or c.dst_service not in self.states:
                raise SCAError(f"coupling {c.src_service} -> {c.dst_service} names an unknown service")
            if not c.src <= set(self.states[c.src_service]) or not c.dst <= set(self.states[c.dst_service]):
                raise SCAError("coupling uses an unknown state")
        for rect in self.init:
            if len(rect) != len(self.services):
                raise SCAError("initial tuple has the wrong arity")
            for s, comp in zip(self.services, rect):
                if not comp <= set(self.states[s]):
                    raise SCAError(f"initial states {sorted(comp - set(self.states[s]))} of {s!r} are unknown")

    # -- derived indexes ------------------------------------------------------

    @cached_property
    def service_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.services)}

    @cached_property
    def _succ(self) -> dict[str, dict[tuple[State, Letter], set]]:
        out: dict[str, dict] = {}
        for s in self.services:
            table: dict = defaultdict(set)
            for q, a, r in self.transitions.get(s, ()):
                table[(q, a)].add(r)
            out[s] = table
        return out

    @cached_property
    def _pred(self) -> dict[str, dict[tuple[State, Letter], set]]:
        out: dict[str, dict] = {}
        for s in self.services:
            table: dict = defaultdict(set)
            for q, a, r in self.transitions.get(s, ()):
                table[(r, a)].add(q)
            out[s] = table
        return out

    @cached_property
    def _coupled_out(self) -> dict[str, dict[State, set[str]]]:
        """Services each state has an outgoing coupling into."""
        out: dict[str, dict] = {s: defaultdict(set) for s in self.services}
        for c in self.couplings:
            if c.dst:
                for q in c.src:
                    out[c.src_service][q].add(c.dst_service)
        return out

    @cached_property
    def _couplings_by_pair(self) -> dict[tuple[str, str], list[Coupling]]:
        out: dict = defaultdict(list)
        for c in self.couplings:
            out[(c.src_service, c.dst_service)].append(c)
        return out

    def coupled(self, src_service: str, q: State, dst_service: str, r: State) -> bool:
        return any(q in c.src and r in c.dst for c in self._couplings_by_pair.get((src_service, dst_service), ()))

    def coupled_targets(self, src_service: str, qs: set, dst_service: str) -> set:
        out: set = set()
        for c in self._couplings_by_pair.get((src_service, dst_service), ()):
            if not c.src.isdisjoint(qs):
                out |= c.dst
        return out

    def coupled_sources(self, src_service: str, dst_service: str, rs: set) -> set:
        out: set = set()
        for c in self._couplings_by_pair.get((src_service, dst_service), ()):
            if not c.dst.isdisjoint(rs):
                out |= c.src
        return out

    def coupling_targets(self, service: str, q: State) -> set[str]:
        return self._coupled_out[service].get(q, set())

    def step(self, service: str, qs: Iterable, letter: Letter) -> set:
        table = self._succ[service]
        out: set = set()
        for q in qs:
            out |= table.get((q, letter), set())
        return out

    def back(self, service: str, rs: Iterable, letter: Letter) -> set:
        table = self._pred[service]
        out: set = set()
        for r in rs:
            out |= table.get((r, letter), set())
        return out

    def is_initial_tuple(self, states: Sequence) -> bool:
        return any(all(q in comp for q, comp in zip(states, rect)) for rect in self.init)

    def initial_states(self, service: str) -> set:
        k = self.service_index[service]
        return set().union(*(rect[k] for rect in self.init)) if self.init else set()

    def name(self, service: str, q: State) -> str:
        return self.names.get(service, {}).get(q, str(q))

    def props(self, service: str) -> frozenset[str]:
        symbols: set[str] = set()
        for _, a, _ in self.transitions.get(service, ()):
            symbols |= a
        for a in self.entry.get(service, {}).values():
            symbols |= a
        return frozenset(symbols - self.messages)

    # -- counts ---------------------------------------------------------------

    def num_states(self) -> int:
        return sum(len(self.states[s]) for s in self.services)

    def num_transitions(self) -> int:
        return sum(len(self.transitions.get(s, ())) for s in self.services)

    def num_couplings(self) -> int:
        """Number of coupling pairs; bicliques of one system never overlap in synthesized systems."""
        pairs = 0
        seen: set = set()
        overlap = False
        for c in self.couplings:
            key = (c.src_service, c.dst_service)
            for q in c.src:
                if (key, q) in seen:
                    overlap = True
            seen |= {(key, q) for q in c.src}
            pairs += len(c)
        if not overlap:
            return pairs
        return len({(c.src_service, q, c.dst_service, r) for c in self.couplings for q in c.src for r in c.dst})


# --------------------------------------------------------------------------
# runs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RunWitness:
    """State reached after every event (initial events included)."""

    states: dict[EventRef, State]

    def labelling(self, d: LamportDiagram) -> dict[Configuration, tuple]:
        """The induced map from configurations to global states."""
        return {c: tuple(self.states[(s, k)] for s, k in zip(d.services, c)) for c in configurations(d)}


def _check_alphabet(sca: SCA, d: LamportDiagram) -> None:
    if set(d.services) != set(sca.services):
        raise SCAError(f"diagram services {d.services} differ from system services {sca.services}")
    if d.messages - sca.messages:
        raise SCAError(f"diagram messages {sorted(d.messages - sca.messages)} unknown to the system")


def _sender_state(sca: SCA, e: EventRef) -> EventRef:
    return e if sca.coupling_source == "post" else (e[0], e[1] - 1)


def accepts(sca: SCA, d: LamportDiagram) -> RunWitness | None:
    """An accepting run of ``sca`` on ``d``, or None.

    Constraint propagation over the per-event state variables followed by
    backtracking.  A run must start in an initial tuple, follow local
    transitions on the event labels, couple every message, end in final
    states, and only use a state with outgoing couplings into service ``j``
    right after sending to ``j``.
    """
    _check_alphabet(sca, d)
    if validate(d) is not None:
        raise SCAError(f"invalid diagram: {validate(d)}")

    events = topological_order(d)
    order_pos = {e: k for k, e in enumerate(events)}
    constraints: dict[EventRef, list[tuple[EventRef, str]]] = defaultdict(list)
    for s in d.services:
        for i in range(1, d.length(s)):
            constraints[(s, i - 1)].append(((s, i), "next"))
            constraints[(s, i)].append(((s, i - 1), "prev"))
    for snd, rcv in d.comm:
        src = _sender_state(sca, snd)
        constraints[src].append((rcv, "lam+"))
        constraints[rcv].append((src, "lam-"))

    def project(x: EventRef, kind: str, y: EventRef, dom: set) -> set:
        """States of ``y`` supported by ``dom`` (the domain of ``x``) under one constraint."""
        match kind:
            case "next":
                return sca.step(y[0], dom, d.label(y))
            case "prev":
                return sca.back(y[0], dom, d.label(x))
            case "lam+":
                return sca.coupled_targets(x[0], dom, y[0])
            case "lam-":
                return sca.coupled_sources(y[0], x[0], dom)
        raise AssertionError(kind)

    base: dict[EventRef, set] = {}
    for s in d.services:
        entry = sca.entry.get(s, {})
        for i in range(d.length(s)):
            e = (s, i)
            dom = set(sca.states[s])
            if i == 0:
                dom = {q for q in dom if q not in entry or entry[q] == d.label(e)}
            if i == d.length(s) - 1:
                dom &= sca.final.get(s, set())
            base[e] = dom
        # a state couplings start from must be the coupling state of a send to that service
        for i in range(1, d.length(s)):
            rcv = d.receiver_of.get((s, i))
            allowed = {rcv[0]} if rcv is not None else set()
            src = _sender_state(sca, (s, i))
            base[src] = {q for q in base[src] if sca.coupling_targets(s, q) <= allowed}

    def propagate(doms: dict[EventRef, set], queue: deque) -> bool:
        queued = set(queue)
        while queue:
            x = queue.popleft()
            queued.discard(x)
            for y, kind in constraints[x]:
                supported = project(x, kind, y, doms[x])
                narrowed = doms[y] & supported
                if len(narrowed) != len(doms[y]):
                    if not narrowed:
                        return False
                    doms[y] = narrowed
                    if y not in queued:
                        queue.append(y)
                        queued.add(y)
        return True

    def search(doms: dict[EventRef, set]) -> dict[EventRef, State] | None:
        open_events = [e for e in events if len(doms[e]) > 1]
        if not open_events:
            return {e: next(iter(doms[e])) for e in events}
        e = min(open_events, key=lambda x: (len(doms[x]), order_pos[x]))
        for q in sorted(doms[e], key=repr):
            trial = {k: (v if k != e else {q}) for k, v in doms.items()}
            if propagate(trial, deque([e])):
                found = search(trial)
                if found is not None:
                    return found
        return None

    for rect in sca.init:
        doms = {e: set(v) for e, v in base.items()}
        ok = True
        for s, comp in zip(sca.services, rect):
            doms[(s, 0)] &= comp
            if not doms[(s, 0)]:
                ok = False
        if not ok or not propagate(doms, deque(events)):
            continue
        found = search(doms)
        if found is not None:
            return RunWitness(found)
    return None


def check_witness(sca: SCA, d: LamportDiagram, w: RunWitness) -> list[str]:
    """Problems with ``w`` as an accepting run of ``sca`` on ``d`` (empty if valid)."""
    problems = []
    first = tuple(w.states[(s, 0)] for s in sca.services)
    if not sca.is_initial_tuple(first):
        problems.append(f"initial states {first} not in Init")
    for s in d.services:
        entry = sca.entry.get(s, {})
        q0 = w.states[(s, 0)]
        if q0 in entry and entry[q0] != d.label((s, 0)):
            problems.append(f"initial state of {s} expects letter {set(entry[q0])}")
        for i in range(1, d.length(s)):
            q, r = w.states[(s, i - 1)], w.states[(s, i)]
            if r not in sca.step(s, {q}, d.label((s, i))):
                problems.append(f"no transition for event {s}[{i}]")
            rcv = d.receiver_of.get((s, i))
            allowed = {rcv[0]} if rcv is not None else set()
            src = w.states[_sender_state(sca, (s, i))]
            if not sca.coupling_targets(s, src) <= allowed:
                problems.append(f"coupling state of {s}[{i}] is coupled but the event sends nothing there")
        if w.states[d.maximal(s)] not in sca.final.get(s, set()):
            problems.append(f"last state of {s} is not final")
    for snd, rcv in d.comm:
        src = _sender_state(sca, snd)
        if not sca.coupled(snd[0], w.states[src], rcv[0], w.states[rcv]):
            problems.append(f"message {snd}->{rcv} is not coupled")
    return problems


# --------------------------------------------------------------------------
# FIFO replay
# --------------------------------------------------------------------------


class FifoChannel:
    """Queue of sender states for one ordered pair of services."""

    def __init__(self) -> None:
        self._queue: deque = deque()

    def push(self, q: State) -> None:
        self._queue.append(q)

    def pop(self, expected: State) -> bool:
        if not self._queue or self._queue[0] != expected:
            return False
        self._queue.popleft()
        return True

    def front(self) -> State | None:
        return self._queue[0] if self._queue else None

    def __len__(self) -> int:
        return len(self._queue)


def replay(sca: SCA, d: LamportDiagram, w: RunWitness, order: Sequence[EventRef] | None = None) -> bool:
    """Execute ``w`` along one linearization with FIFO channels.

    Sends push the coupled sender state, receives pop it from the front of
    their channel and require a coupling into the state they enter.  Returns
    True if nothing blocks and every channel is drained at the end.
    """
    if order is None:
        order = next(linearizations(d))
    channels: dict[tuple[str, str], FifoChannel] = defaultdict(FifoChannel)
    for e in order:
        s = e[0]
        if e in d.receiver_of:
            rcv = d.receiver_of[e]
            channels[(s, rcv[0])].push(w.states[_sender_state(sca, e)])
        if e in d.sender_of:
            snd = d.sender_of[e]
            chan = channels[(snd[0], s)]
            front = chan.front()
            if front is None or not sca.coupled(snd[0], front, s, w.states[e]) or not chan.pop(front):
                return False
    return all(len(c) == 0 for c in channels.values())


# --------------------------------------------------------------------------
# bounded languages
# --------------------------------------------------------------------------


def _local_words(sca: SCA, s: str, starts: set, bound: int) -> set[tuple[Letter, ...]]:
    """Letter words of length <= bound leading from ``starts`` to a final state."""
    letters_from: dict = defaultdict(set)
    for q, a, r in sca.transitions.get(s, ()):
        letters_from[q].add((a, r))
    final = sca.final.get(s, set())
    words = set()
    frontier = {(): set(starts)}
    for length in range(bound + 1):
        nxt: dict = defaultdict(set)
        for w, qs in frontier.items():
            if qs & final:
                words.add(w)
            if length == bound:
                continue
            for q in qs:
                for a, r in letters_from.get(q, ()):
                    nxt[w + (a,)].add(r)
        frontier = nxt
    return words


def _complete_matchings(events: list[tuple[EventRef, str]]) -> Iterator[list[tuple[EventRef, EventRef]]]:
    """Pair up all message-carrying events, each with an equally labelled event of another service."""
    if not events:
        yield []
        return
    (first, msg), rest = events[0], events[1:]
    for k, (other, m) in enumerate(rest):
        if m != msg or other[0] == first[0]:
            continue
        remaining = rest[:k] + rest[k + 1 :]
        for tail in _complete_matchings(remaining):
            yield [(first, other)] + tail
            yield [(other, first)] + tail


def _powerset(items: Iterable[str]) -> list[frozenset[str]]:
    items = sorted(items)
    return [frozenset(c) for r in range(len(items) + 1) for c in itertools.combinations(items, r)]


def candidate_diagrams(sca: SCA, bound: int) -> Iterator[LamportDiagram]:
    """Valid diagrams whose per-service label sequences are locally accepted.

    Every diagram the system accepts within the bound is among these.
    """
    initial_choices: list[list[frozenset]] = []
    words: list[list[tuple]] = []
    for k, s in enumerate(sca.services):
        starts = sca.initial_states(s)
        entry = sca.entry.get(s, {})
        if starts and all(q in entry for q in starts):
            initial_choices.append(sorted({entry[q] for q in starts}, key=sorted))
        else:
            initial_choices.append(_powerset(sca.props(s)))
        words.append(sorted(_local_words(sca, s, starts, bound), key=lambda w: (len(w), [sorted(a) for a in w])))
    for combo in itertools.product(*words):
        msg_events = []
        for s, w in zip(sca.services, combo):
            for i, a in enumerate(w, 1):
                msgs = a & sca.messages
                if len(msgs) > 1:
                    break
                if msgs:
                    msg_events.append(((s, i), next(iter(msgs))))
            else:
                continue
            break
        else:
            for matching in _complete_matchings(msg_events):
                for inits in itertools.product(*initial_choices):
                    d = LamportDiagram(
                        sca.services,
                        tuple((init,) + tuple(w) for init, w in zip(inits, combo)),
                        frozenset(matching),
                        sca.messages,
                    )
                    if validate(d) is None:
                        yield d


def bounded_poset_language(sca: SCA, bound: int) -> set[LamportDiagram]:
    """Accepted diagrams with at most ``bound`` non-initial events per service."""
    return {d for d in candidate_diagrams(sca, bound) if accepts(sca, d) is not None}


def bounded_chor_language(sca: SCA, bound: int) -> set[tuple[SendEvent, ...]]:
    words: set[tuple[SendEvent, ...]] = set()
    for d in bounded_poset_language(sca, bound):
        words |= chor(d)
    return words


# --------------------------------------------------------------------------
# text format (.sca) and DOT export
# --------------------------------------------------------------------------

_NAME = r"[A-Za-z0-9_'.]+"


def _letter_text(a: Iterable[str]) -> str:
    return "{" + ", ".join(sorted(a)) + "}"


def _state_set_text(sca: SCA, s: str, qs: Iterable) -> str:
    names = sorted(sca.name(s, q) for q in qs)
    return names[0] if len(names) == 1 else "{" + ", ".join(names) + "}"


def format_sca(sca: SCA) -> str:
    lines = []
    if sca.coupling_source != "post":
        lines.append(f"coupling {sca.coupling_source};")
    if sca.messages:
        lines.append("messages " + " ".join(sorted(sca.messages)) + ";")
    for s in sca.services:
        lines.append(f"service {s} {{")
        finals = sca.final.get(s, set())
        names = [sca.name(s, q) + ("*" if q in finals else "") for q in sca.states[s]]
        lines.append("  states " + " ".join(names) + ";")
        for q, a in sca.entry.get(s, {}).items():
            lines.append(f"  entry {sca.name(s, q)} on {_letter_text(a)};")
        for q, a, r in sorted(sca.transitions.get(s, ()), key=lambda t: (sca.name(s, t[0]), sorted(t[1]), sca.name(s, t[2]))):
            lines.append(f"  trans {sca.name(s, q)} -> {sca.name(s, r)} on {_letter_text(a)};")
        lines.append("}")
    for c in sca.couplings:
        lines.append(
            f"couple {c.src_service}.{_state_set_text(sca, c.src_service, c.src)} -> "
            f"{c.dst_service}.{_state_set_text(sca, c.dst_service, c.dst)};"
        )
    for rect in sca.init:
        comps = ", ".join(_state_set_text(sca, s, comp) for s, comp in zip(sca.services, rect))
        lines.append(f"init ({comps});")
    return "\n".join(lines) + "\n"


def _split_statements(text: str) -> list[tuple[int, str]]:
    out = []
    buf, start = [], None
    depth = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0]
        for ch in line:
            if start is None and not ch.isspace():
                start = lineno
            if ch == "{" and buf and "".join(buf).strip().startswith("service") and depth == 0:
                depth = 1
                out.append((start, "".join(buf).strip() + " {"))
                buf, start = [], None
                continue
            if ch == "}" and depth == 1 and not "".join(buf).strip():
                out.append((lineno, "}"))
                depth = 0
                continue
            if ch == ";":
                out.append((start or lineno, "".join(buf).strip()))
                buf, start = [], None
                continue
            buf.append(ch)
        buf.append(" ")
    if "".join(buf).strip():
        raise SCAError(f"line {start}: missing ';'")
    return out


def _parse_state_set(text: str) -> list[str]:
    text = text.strip()
    if text.startswith("{") and text.endswith("}"):
        return [x.strip() for x in text[1:-1].split(",") if x.strip()]
    return [text]


def _parse_letter(text: str, where: str) -> Letter:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise SCAError(f"{where}: letters are written as {{a, b}}")
    return frozenset(x.strip() for x in text[1:-1].split(",") if x.strip())


def parse_sca(text: str) -> SCA:
    """Parse the ``.sca`` format.

    ::

        coupling pre;                      # optional, default post
        messages a;
        service p { states q0 q1 q2*; trans q0 -> q1 on {a}; }
        service c { states r0 r1*; trans r0 -> r1 on {a}; }
        couple p.q0 -> c.r1;               # or p.{q0, q1} -> c.{r1}
        init (q0, r0);                     # components in service order
    """
    services: list[str] = []
    states: dict[str, list[str]] = {}
    final: dict[str, set[str]] = {}
    transitions: dict[str, set] = {}
    entry: dict[str, dict] = {}
    couplings: list[Coupling] = []
    init_raw: list[tuple[int, list[str]]] = []
    messages: set[str] = set()
    source = "post"
    current: str | None = None

    for lineno, stmt in _split_statements(text):
        where = f"line {lineno}"
        if not stmt:
            continue
        if stmt == "}":
            if current is None:
                raise SCAError(f"{where}: unmatched '}}'")
            current = None
            continue
        m = re.fullmatch(rf"service\s+({_NAME})\s*\{{", stmt)
        if m:
            current = m.group(1)
            if current in states:
                raise SCAError(f"{where}: service {current!r} declared twice")
            services.append(current)
            states[current], final[current], transitions[current], entry[current] = [], set(), set(), {}
            continue
        word, _, rest = stmt.partition(" ")
        rest = rest.strip()
        if word == "states" and current:
            for tok in rest.split():
                name = tok.rstrip("*")
                states[current].append(name)
                if tok.endswith("*"):
                    final[current].add(name)
        elif word == "trans" and current:
            m = re.fullmatch(rf"({_NAME})\s*->\s*({_NAME})\s+on\s+(\{{.*\}})", rest)
            if not m:
                raise SCAError(f"{where}: expected 'trans q -> r on {{letters}}'")
            transitions[current].add((m.group(1), _parse_letter(m.group(3), where), m.group(2)))
        elif word == "entry" and current:
            m = re.fullmatch(rf"({_NAME})\s+on\s+(\{{.*\}})", rest)
            if not m:
                raise SCAError(f"{where}: expected 'entry q on {{letters}}'")
            entry[current][m.group(1)] = _parse_letter(m.group(2), where)
        elif word == "couple" and current is None:
            m = re.fullmatch(rf"({_NAME}?)\.(\{{[^}}]*\}}|{_NAME})\s*->\s*({_NAME}?)\.(\{{[^}}]*\}}|{_NAME})", rest)
            if not m:
                raise SCAError(f"{where}: expected 'couple s.q -> t.r'")
            couplings.append(
                Coupling(m.group(1), frozenset(_parse_state_set(m.group(2))), m.group(3), frozenset(_parse_state_set(m.group(4))))
            )
        elif word == "init" and current is None:
            body = rest.strip()
            if not (body.startswith("(") and body.endswith(")")):
                raise SCAError(f"{where}: expected 'init (q, r, ...)'")
            comps = re.findall(r"\{[^}]*\}|[^,\s{}]+", body[1:-1])
            init_raw.append((lineno, comps))
        elif word == "messages" and current is None:
            messages |= set(rest.replace(",", " ").split())
        elif word == "coupling" and current is None:
            source = rest
        else:
            raise SCAError(f"{where}: unexpected statement {stmt!r}")
    if current is not None:
        raise SCAError(f"service {current!r} is not closed")
    init = []
    for lineno, comps in init_raw:
        if len(comps) != len(services):
            raise SCAError(f"line {lineno}: initial tuple needs one state per service")
        init.append(tuple(frozenset(_parse_state_set(c)) for c in comps))
    return SCA(tuple(services), states, final, transitions, couplings, init, frozenset(messages), entry, source)


def sca_to_dot(sca: SCA, name: str = "sca") -> str:
    """Bold local transitions inside one cluster per service, thin coupling arrows between them."""

    def node(s: str, q: State) -> str:
        return f"\"{s}.{sca.name(s, q)}\""

    out = [f"digraph {name} {{", "  node [shape=circle, fontsize=10];"]
    starts = {s: sca.initial_states(s) for s in sca.services}
    for s in sca.services:
        out.append(f"  subgraph cluster_{s} {{ label=\"{s}\";")
        for q in sca.states[s]:
            shape = "doublecircle" if q in sca.final.get(s, set()) else "circle"
            out.append(f"    {node(s, q)} [label=\"{sca.name(s, q)}\", shape={shape}];")
        for q in starts[s]:
            out.append(f"    \"{s}.__start_{sca.name(s, q)}\" [shape=point]; \"{s}.__start_{sca.name(s, q)}\" -> {node(s, q)};")
        for q, a, r in sorted(sca.transitions.get(s, ()), key=repr):
            out.append(f"    {node(s, q)} -> {node(s, r)} [penwidth=2, label=\"{','.join(sorted(a))}\"];")
        out.append("  }")
    for c in sca.couplings:
        for q in c.src:
            for r in c.dst:
                out.append(f"  {node(c.src_service, q)} -> {node(c.dst_service, r)} [penwidth=0.5, label=\"&lambda;\", constraint=false];")
    out.append("}")
    return "\n".join(out) + "\n"
