"""The formula automaton of a global formula, its pruning, and size statistics.

Local states are pairs ``(atom, u)`` with ``u`` a bitmask over the service's
eventualities still owed.  Couplings join every state whose atom sends
``m`` to ``r`` with every non-initial state of ``r`` whose atom receives
``m`` from the sender, so they are stored as one biclique per
``(sender, receiver, message)``.

``synthesize`` explores only states reachable from the initial tuples and
then prunes.  ``build_sca`` builds every state and is meant for small
formulas and for cross-checking.
"""

from __future__ import annotations

import itertools
import json
import time
from collections import defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Iterator

from .diagrams import LamportDiagram, enumerate_diagrams
from .sca import SCA, Coupling, RunWitness, accepts
from .semantics import models, truth_table
from .syntax import At, Eventually, Formula, Next, Prev, Recv, Send, children, formula_size, signature
from .tableau import Closure, LocalClosure, atoms, closure, global_contains

LocalState = tuple[int, int]  # (atom mask, obligation mask)


@dataclass
class _ServiceTables:
    cl: LocalClosure
    atoms: list[int]
    succ: dict[int, list[int]]
    letter: dict[int, frozenset[str]]
    pending: dict[int, int]
    fulfilled: dict[int, int]
    index: dict[int, int]

    def step(self, u: int, b: int) -> int:
        """Obligations after moving into atom ``b`` while owing ``u``."""
        return self.pending[b] if u == 0 else u & ~self.fulfilled[b]

    def is_final(self, q: LocalState) -> bool:
        return q[1] == 0 and self.cl.is_last(q[0])


def _tables(cl: LocalClosure) -> _ServiceTables:
    masks = atoms(cl)
    by_key: dict[tuple[int, int], list[int]] = defaultdict(list)
    for b in masks:
        by_key[cl.backward_key(b)].append(b)
    succ = {a: by_key.get(cl.forward_key(a), []) for a in masks}
    return _ServiceTables(
        cl,
        masks,
        succ,
        {a: cl.letter(a) for a in masks},
        {a: cl.pending(a) for a in masks},
        {a: cl.fulfilled(a) for a in masks},
        {a: i for i, a in enumerate(masks)},
    )


def _state_name(t: _ServiceTables, q: LocalState) -> str:
    return f"A{t.index[q[0]]}u{q[1]}"


def _init_rectangles(cls: Closure, tables: dict[str, _ServiceTables]) -> list[tuple[frozenset, ...]]:
    """Init as a union of products: initial atoms grouped by the anchored formulas they contain."""
    services = cls.services
    anchored: dict[str, list[Formula]] = defaultdict(list)
    for g in cls.global_formulas:
        if isinstance(g, At):
            anchored[g.service].append(g.formula)
    classes: list[dict[tuple[bool, ...], list[int]]] = []
    for s in services:
        cl = tables[s].cl
        groups: dict[tuple[bool, ...], list[int]] = defaultdict(list)
        for a in tables[s].atoms:
            if cl.is_initial(a):
                groups[tuple(cl.holds(a, f) for f in anchored[s])].append(a)
        classes.append(groups)
    rects = []
    for keys in itertools.product(*(sorted(c) for c in classes)):
        rep = {s: classes[k][key][0] for k, (s, key) in enumerate(zip(services, keys))}
        if global_contains(cls, rep, cls.formula):
            rects.append(tuple(frozenset((a, 0) for a in classes[k][key]) for k, key in enumerate(keys)))
    return rects


def _comm_index(cls: Closure) -> list[tuple[str, str, str]]:
    """Every (sender, receiver, message) the closure can talk about."""
    return [
        (s, r, m)
        for s in cls.services
        for r in cls.services
        if r != s
        for m in sorted(cls.signature.messages)
    ]


@dataclass
class _Raw:
    """Unpruned explicit automaton: states and successor lists per service."""

    states: dict[str, set[LocalState]]
    succ: dict[str, dict[LocalState, list[LocalState]]]
    init: list[tuple[frozenset, ...]]


def _assemble(cls: Closure, tables: dict[str, _ServiceTables], raw: _Raw) -> SCA:
    services = cls.services
    messages = frozenset(cls.signature.messages)
    states, final, transitions, names, entry = {}, {}, {}, {}, {}
    for s in services:
        t = tables[s]
        order = sorted(raw.states[s], key=lambda q: (t.index[q[0]], q[1]))
        states[s] = order
        final[s] = {q for q in order if t.is_final(q)}
        transitions[s] = {
            (q, t.letter[r[0]], r) for q in order for r in raw.succ[s].get(q, ()) if r in raw.states[s]
        }
        names[s] = {q: _state_name(t, q) for q in order}
        entry[s] = {q: t.letter[q[0]] for q in order if t.cl.is_initial(q[0]) and q[1] == 0}
    couplings = []
    for snd, rcv, m in _comm_index(cls):
        src_cl, dst_cl = tables[snd].cl, tables[rcv].cl
        src = frozenset(q for q in states[snd] if src_cl.holds(q[0], Send(m, rcv)))
        dst = frozenset(q for q in states[rcv] if dst_cl.holds(q[0], Recv(m, snd)) and not dst_cl.is_initial(q[0]))
        if src and dst:
            couplings.append(Coupling(snd, src, rcv, dst))
    init = [
        tuple(comp & raw.states[s] for s, comp in zip(services, rect))
        for rect in raw.init
    ]
    init = [rect for rect in init if all(rect)]
    return SCA(services, states, final, transitions, couplings, init, messages, entry, "post", names)


def _explore(tables: dict[str, _ServiceTables], services: Iterable[str], starts: dict[str, set[LocalState]]) -> _Raw:
    states: dict[str, set[LocalState]] = {}
    succ: dict[str, dict[LocalState, list[LocalState]]] = {}
    for s in services:
        t = tables[s]
        seen = set(starts[s])
        out: dict[LocalState, list[LocalState]] = {}
        queue = deque(seen)
        while queue:
            q = queue.popleft()
            a, u = q
            nxt = [(b, t.step(u, b)) for b in t.succ[a]]
            out[q] = nxt
            for r in nxt:
                if r not in seen:
                    seen.add(r)
                    queue.append(r)
        states[s], succ[s] = seen, out
    return _Raw(states, succ, [])


def _prune_raw(cls: Closure, tables: dict[str, _ServiceTables], raw: _Raw) -> _Raw:
    """Greatest sub-automaton that is reachable, co-reachable and keeps a coupling partner for every send."""
    services = cls.services
    kept = {s: set(raw.states[s]) for s in services}
    pred: dict[str, dict[LocalState, list[LocalState]]] = {}
    for s in services:
        p: dict[LocalState, list[LocalState]] = defaultdict(list)
        for q, rs in raw.succ[s].items():
            for r in rs:
                p[r].append(q)
        pred[s] = p
    comm = _comm_index(cls)
    while True:
        before = sum(len(v) for v in kept.values())
        init = [tuple(comp & kept[s] for s, comp in zip(services, rect)) for rect in raw.init]
        init = [rect for rect in init if all(rect)]
        for k, s in enumerate(services):
            t = tables[s]
            # forward reachability from the live initial states
            seen = set().union(*(rect[k] for rect in init)) if init else set()
            queue = deque(seen)
            while queue:
                q = queue.popleft()
                for r in raw.succ[s].get(q, ()):
                    if r in kept[s] and r not in seen:
                        seen.add(r)
                        queue.append(r)
            # backward reachability to final states
            live = {q for q in seen if t.is_final(q)}
            queue = deque(live)
            while queue:
                r = queue.popleft()
                for q in pred[s].get(r, ()):
                    if q in seen and q not in live:
                        live.add(q)
                        queue.append(q)
            kept[s] = live
        for snd, rcv, m in comm:
            src_cl, dst_cl = tables[snd].cl, tables[rcv].cl
            has_partner = any(
                dst_cl.holds(q[0], Recv(m, snd)) and not dst_cl.is_initial(q[0]) for q in kept[rcv]
            )
            if not has_partner:
                kept[snd] = {q for q in kept[snd] if not src_cl.holds(q[0], Send(m, rcv))}
        if sum(len(v) for v in kept.values()) == before:
            break
    return _Raw(kept, raw.succ, raw.init)


def _prepare(psi: Formula) -> tuple[Closure, dict[str, _ServiceTables]]:
    cls = closure(psi)
    return cls, {s: _tables(cls[s]) for s in cls.services}


def build_sca(psi: Formula) -> SCA:
    """Every state ``(A, u)`` with ``u`` ranging over all obligation subsets, unpruned."""
    cls, tables = _prepare(psi)
    states, succ = {}, {}
    for s in cls.services:
        t = tables[s]
        n = len(t.cl.eventualities)
        states[s] = {(a, u) for a in t.atoms for u in range(1 << n)}
        succ[s] = {(a, u): [(b, t.step(u, b)) for b in t.succ[a]] for a, u in states[s]}
    return _assemble(cls, tables, _Raw(states, succ, _init_rectangles(cls, tables)))


def synthesize(psi: Formula, prune_states: bool = True) -> SCA:
    """The formula automaton restricted to reachable states, pruned unless asked otherwise."""
    cls, tables = _prepare(psi)
    init = _init_rectangles(cls, tables)
    starts = {s: set().union(*(rect[k] for rect in init)) if init else set() for k, s in enumerate(cls.services)}
    raw = _explore(tables, cls.services, starts)
    raw.init = init
    if prune_states:
        raw = _prune_raw(cls, tables, raw)
    return _assemble(cls, tables, raw)


def prune(sca: SCA) -> SCA:
    """Prune any system: reachability, co-reachability and the send-partner condition, to a fixpoint."""
    services = sca.services
    kept = {s: set(sca.states[s]) for s in services}
    while True:
        before = sum(len(v) for v in kept.values())
        init = [tuple(comp & kept[s] for s, comp in zip(services, rect)) for rect in sca.init]
        init = [rect for rect in init if all(rect)]
        for k, s in enumerate(services):
            succ: dict = defaultdict(set)
            pred: dict = defaultdict(set)
            for q, _, r in sca.transitions.get(s, ()):
                if q in kept[s] and r in kept[s]:
                    succ[q].add(r)
                    pred[r].add(q)
            seen = set().union(*(rect[k] for rect in init)) if init else set()
            queue = deque(seen)
            while queue:
                q = queue.popleft()
                for r in succ[q] - seen:
                    seen.add(r)
                    queue.append(r)
            live = seen & sca.final.get(s, set())
            queue = deque(live)
            while queue:
                r = queue.popleft()
                for q in (pred[r] & seen) - live:
                    live.add(q)
                    queue.append(q)
            kept[s] = live
        # a state with outgoing couplings into some service needs a surviving partner there
        for c in sca.couplings:
            if not c.dst & kept[c.dst_service]:
                partnered = {
                    q for d in sca.couplings
                    if d.src_service == c.src_service and d.dst_service == c.dst_service and d.dst & kept[d.dst_service]
                    for q in d.src
                }
                kept[c.src_service] -= c.src - partnered
        if sum(len(v) for v in kept.values()) == before:
            break
    states = {s: [q for q in sca.states[s] if q in kept[s]] for s in services}
    transitions = {s: {(q, a, r) for q, a, r in sca.transitions.get(s, ()) if q in kept[s] and r in kept[s]} for s in services}
    couplings = []
    for c in sca.couplings:
        src, dst = c.src & kept[c.src_service], c.dst & kept[c.dst_service]
        if src and dst:
            couplings.append(Coupling(c.src_service, src, c.dst_service, dst))
    init = [tuple(comp & kept[s] for s, comp in zip(services, rect)) for rect in sca.init]
    init = [rect for rect in init if all(rect)]
    entry = {s: {q: a for q, a in sca.entry.get(s, {}).items() if q in kept[s]} for s in services}
    return SCA(
        services,
        states,
        {s: sca.final.get(s, set()) & kept[s] for s in services},
        transitions,
        couplings,
        init,
        sca.messages,
        entry,
        sca.coupling_source,
        sca.names,
    )


# --------------------------------------------------------------------------
# the run built from the truth values of a model
# --------------------------------------------------------------------------


def model_witness(psi: Formula, d: LamportDiagram) -> RunWitness:
    """Label each event with its atom of true closure formulas and the obligations owed so far.

    For a model of ``psi`` this is an accepting run of the formula automaton.
    """
    cls = closure(psi)
    states = {}
    for s in cls.services:
        cl = cls[s]
        table: dict = {}
        for f in cl.positives:
            truth_table(d, s, f, table)
        u = 0
        for i in range(d.length(s)):
            mask = sum(1 << k for k, f in enumerate(cl.positives) if table[f][i])
            if i == 0:
                u = 0
            else:
                u = cl.pending(mask) if u == 0 else u & ~cl.fulfilled(mask)
            states[(s, i)] = (mask, u)
    return RunWitness(states)


# --------------------------------------------------------------------------
# statistics
# --------------------------------------------------------------------------


def _occurrences(f: Formula, kinds: tuple[type, ...]) -> int:
    return int(isinstance(f, kinds)) + sum(_occurrences(c, kinds) for c in children(f))


@dataclass(frozen=True)
class SynthesisStats:
    size: int
    local: int
    send_receive: int
    states: int
    transitions: int
    couplings: int
    time_ms: float

    HEADER = ("Size", "Local", "Send-Receive", "States", "Transitions", "Couplings", "Time (ms)")

    def row(self) -> tuple[str, ...]:
        shown = "<1" if self.time_ms < 1 else f"{self.time_ms:.0f}"
        return (
            str(self.size),
            str(self.local),
            str(self.send_receive),
            str(self.states),
            str(self.transitions),
            str(self.couplings),
            shown,
        )

    def to_text(self) -> str:
        widths = [max(len(h), len(v)) for h, v in zip(self.HEADER, self.row())]
        head = "  ".join(h.rjust(w) for h, w in zip(self.HEADER, widths))
        body = "  ".join(v.rjust(w) for v, w in zip(self.row(), widths))
        return f"{head}\n{body}"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> SynthesisStats:
        return cls(**json.loads(text))


def stats(psi: Formula, sca: SCA, elapsed_ms: float) -> SynthesisStats:
    return SynthesisStats(
        size=formula_size(psi),
        local=_occurrences(psi, (Next, Eventually, Prev)),
        send_receive=_occurrences(psi, (Send, Recv)),
        states=sca.num_states(),
        transitions=sca.num_transitions(),
        couplings=sca.num_couplings(),
        time_ms=elapsed_ms,
    )


def timed_synthesis(psi: Formula, prune_states: bool = True) -> tuple[SCA, SynthesisStats]:
    start = time.perf_counter()
    sca = synthesize(psi, prune_states)
    elapsed = (time.perf_counter() - start) * 1000
    return sca, stats(psi, sca, elapsed)


def state_bound(psi: Formula) -> int:
    """Sum over services of 2^(|CL_s| + |U_s|), counting formula/negation pairs once."""
    cls = closure(psi)
    return sum(2 ** (len(cls[s].positives) + len(cls[s].eventualities)) for s in cls.services)


# --------------------------------------------------------------------------
# exhaustive comparison with the semantics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Mismatch:
    diagram: LamportDiagram
    satisfied: bool
    accepted: bool


@dataclass(frozen=True)
class OracleReport:
    diagrams: int
    models: int
    mismatch: Mismatch | None

    @property
    def holds(self) -> bool:
        return self.mismatch is None


def _judge(psi: Formula, sca: SCA, d: LamportDiagram) -> Mismatch | None:
    sat, acc = models(d, psi), accepts(sca, d) is not None
    return None if sat == acc else Mismatch(d, sat, acc)


def oracle(psi: Formula, bound: int, sca: SCA | None = None, threads: int = 1) -> OracleReport:
    """Compare satisfaction with acceptance on every diagram within ``bound`` events per service.

    Stops at the first disagreement.
    """
    sca = synthesize(psi) if sca is None else sca
    sig = signature(psi)
    diagrams: Iterator[LamportDiagram] = enumerate_diagrams(sig.services, sig.messages, sig.props, bound)
    count = sat = 0
    if threads <= 1:
        for d in diagrams:
            count += 1
            found = _judge(psi, sca, d)
            if found is not None:
                return OracleReport(count, sat, found)
            sat += models(d, psi)
        return OracleReport(count, sat, None)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        batch: list[LamportDiagram] = []
        for d in itertools.chain(diagrams, [None]):
            if d is not None:
                batch.append(d)
                if len(batch) < 256:
                    continue
            for d2, found in zip(batch, pool.map(lambda x: _judge(psi, sca, x), batch)):
                count += 1
                if found is not None:
                    return OracleReport(count, sat, found)
                sat += models(d2, psi)
            batch = []
    return OracleReport(count, sat, None)
