"""Independent reference implementations used by the tests.

Each one follows a definition literally and favours clarity over speed:
  * ``naive_atoms`` filters every subset of a closure by the atom rules;
  * ``naive_sat`` evaluates local formulas by direct recursion;
  * ``configuration_run`` searches a run as a map from configurations to
    global states, checking every edge of the configuration graph;
  * ``brute_poset_language`` filters all small diagrams through ``accepts``.
"""

from __future__ import annotations

import itertools
import random

from choreo.diagrams import LamportDiagram, configurations, enumerate_diagrams, initial_configuration, maximal_configuration, successors
from choreo.sca import SCA, Coupling, accepts
from choreo.syntax import (
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
    TrueConst,
    always,
    conj,
)
from choreo.tableau import LocalClosure

# --------------------------------------------------------------------------
# atoms
# --------------------------------------------------------------------------


def naive_atoms(cl: LocalClosure) -> set[frozenset[Formula]]:
    """Every subset of the positive closure members satisfying the atom rules, as formula sets."""
    positives = list(cl.positives)
    found = set()
    for bits in itertools.product((False, True), repeat=len(positives)):
        members = {f for f, b in zip(positives, bits) if b}

        def has(f: Formula) -> bool:
            return f.arg not in members if isinstance(f, Not) else f in members

        ok = has(TRUE)
        for f in positives:
            if isinstance(f, Or) and has(f) != (has(f.left) or has(f.right)):
                ok = False
            if isinstance(f, Eventually) and has(f) != (has(f.arg) or has(Next(f))):
                ok = False
        comms = [f for f in members if isinstance(f, (Send, Recv))]
        if has(Prev(FALSE)):
            if any(isinstance(f, Prev) and f.arg != FALSE for f in members) or comms:
                ok = False
        if has(Next(FALSE)) and any(isinstance(f, Next) and f.arg != FALSE for f in members):
            ok = False
        if len(comms) > 1:
            ok = False
        if ok:
            found.add(frozenset(members))
    return found


def mask_to_set(cl: LocalClosure, mask: int) -> frozenset[Formula]:
    return frozenset(f for i, f in enumerate(cl.positives) if mask >> i & 1)


# --------------------------------------------------------------------------
# semantics
# --------------------------------------------------------------------------


def naive_sat(d: LamportDiagram, e: tuple[str, int], f: Formula) -> bool:
    s, i = e
    n = d.length(s)
    match f:
        case TrueConst():
            return True
        case Prop(p):
            return p in d.label(e)
        case Send(m, peer):
            r = d.receiver_of.get(e)
            return r is not None and r[0] == peer and m in d.label(e)
        case Recv(m, peer):
            r = d.sender_of.get(e)
            return r is not None and r[0] == peer and m in d.label(e)
        case Not(a):
            return not naive_sat(d, e, a)
        case Or(a, b):
            return naive_sat(d, e, a) or naive_sat(d, e, b)
        case Next(a):
            if i + 1 == n:
                return a == FALSE  # X false marks the last event
            return naive_sat(d, (s, i + 1), a)
        case Prev(a):
            if i == 0:
                return a == FALSE  # Y false marks the initial event
            return naive_sat(d, (s, i - 1), a)
        case Eventually(a):
            return any(naive_sat(d, (s, k), a) for k in range(i, n))
    raise TypeError(f)


def naive_models(d: LamportDiagram, psi: Formula) -> bool:
    match psi:
        case At(a, s):
            return naive_sat(d, (s, 0), a)
        case Not(a):
            return not naive_models(d, a)
        case Or(a, b):
            return naive_models(d, a) or naive_models(d, b)
    raise TypeError(psi)


# --------------------------------------------------------------------------
# runs over the configuration graph
# --------------------------------------------------------------------------


def configuration_run(sca: SCA, d: LamportDiagram) -> dict | None:
    """An accepting run as a map configuration -> global state, or None.

    Configurations are labelled in order of size.  A new configuration takes
    its value from one labelled predecessor and must agree with every other
    one.  Each edge c -> c' adding event e of service i is checked directly:
    the other components are unchanged, service i moves on V(e); for a
    receive, the sender's coupling state (taken from a configuration where
    the send has just happened, or is just about to) couples into the new
    state; a coupling state with couplings into Q_j belongs to a send to j.
    """
    cuts = sorted(configurations(d), key=lambda c: (sum(c), c))
    preds: dict[tuple, list[tuple[tuple, tuple[str, int]]]] = {c: [] for c in cuts}
    for c in cuts:
        for e, c2 in successors(d, c):
            preds[c2].append((c, e))
    index = {s: k for k, s in enumerate(d.services)}
    first, last = initial_configuration(d), maximal_configuration(d)

    def local_state_at(rho: dict, service: str, pos: int):
        """The state of ``service`` in some labelled configuration with that service at ``pos``."""
        k = index[service]
        for c, g in rho.items():
            if c[k] == pos:
                return g[k]
        return None

    def edge_ok(rho: dict, c: tuple, e: tuple[str, int], g2: tuple) -> bool:
        s, pos = e
        k = index[s]
        g = rho[c]
        if any(g[j] != g2[j] for j in range(len(g)) if j != k):
            return False
        if g2[k] not in sca.step(s, {g[k]}, d.label(e)):
            return False
        source = g2[k] if sca.coupling_source == "post" else g[k]
        rcv = d.receiver_of.get(e)
        targets = sca.coupling_targets(s, source)
        if targets and (rcv is None or targets != {rcv[0]}):
            return False
        snd = d.sender_of.get(e)
        if snd is not None:
            j, spos = snd
            at = spos if sca.coupling_source == "post" else spos - 1
            q = local_state_at(rho, j, at)
            if q is None or not sca.coupled(j, q, s, g2[k]):
                return False
        return True

    def initial_ok(g: tuple) -> bool:
        if not sca.is_initial_tuple(g):
            return False
        for s, q in zip(d.services, g):
            letter = sca.entry.get(s, {}).get(q)
            if letter is not None and letter != d.label((s, 0)):
                return False
        return True

    def extend(rho: dict, k: int) -> dict | None:
        if k == len(cuts):
            return rho if all(g in sca.final.get(s, set()) for s, g in zip(d.services, rho[last])) else None
        c2 = cuts[k]
        c, e = preds[c2][0]
        s = e[0]
        g = rho[c]
        for q in sorted(sca.step(s, {g[index[s]]}, d.label(e)), key=repr):
            g2 = g[: index[s]] + (q,) + g[index[s] + 1 :]
            rho[c2] = g2
            if all(edge_ok(rho, p, f, g2) for p, f in preds[c2]):
                found = extend(rho, k + 1)
                if found is not None:
                    return found
            del rho[c2]
        return None

    starts = [tuple(t) for rect in sca.init for t in itertools.product(*(sorted(comp, key=repr) for comp in rect))]
    for g0 in starts:
        if initial_ok(g0):
            found = extend({first: g0}, 1)
            if found is not None:
                return found
    return None


def brute_poset_language(sca: SCA, bound: int, props: dict | None = None) -> set[LamportDiagram]:
    props = props if props is not None else {s: sca.props(s) for s in sca.services}
    return {
        d
        for d in enumerate_diagrams(sca.services, sorted(sca.messages), props, bound)
        if accepts(sca, d) is not None
    }


# --------------------------------------------------------------------------
# random inputs
# --------------------------------------------------------------------------

SERVICES = ("s", "t")
PROPS = {"s": "p", "t": "q"}
MESSAGES = ("a", "b")


def random_local(rng: random.Random, owner: str, budget: int, comm: bool) -> Formula:
    """A local formula of at most ``budget`` constructor nodes."""
    if budget <= 1:
        choices = ["prop", "true", "false"] + (["snd", "rcv"] if comm else [])
    else:
        choices = ["prop", "not", "or", "and", "X", "F", "G", "Y"] + (["snd", "rcv"] if comm else [])
    peer = next(x for x in SERVICES if x != owner)
    match rng.choice(choices):
        case "prop":
            return Prop(PROPS[owner])
        case "true":
            return TRUE
        case "false":
            return FALSE
        case "snd":
            return Send(rng.choice(MESSAGES), peer)
        case "rcv":
            return Recv(rng.choice(MESSAGES), peer)
        case "not":
            return Not(random_local(rng, owner, budget - 1, comm))
        case "X":
            return Next(random_local(rng, owner, budget - 1, comm))
        case "F":
            return Eventually(random_local(rng, owner, budget - 1, comm))
        case "G":
            return always(random_local(rng, owner, budget - 1, comm))
        case "Y":
            return Prev(random_local(rng, owner, budget - 1, comm))
        case kind:
            left = rng.randint(1, budget - 2) if budget > 2 else 1
            a = random_local(rng, owner, left, comm)
            b = random_local(rng, owner, max(1, budget - 1 - left), comm)
            return Or(a, b) if kind == "or" else conj(a, b)


def random_global(rng: random.Random, budget: int = 6, comm: bool = True) -> Formula:
    """A global formula with at most ``budget`` nodes over services s, t and messages a, b."""
    if budget >= 5 and rng.random() < 0.5:
        left = rng.randint(2, budget - 3)
        a = random_global(rng, left, comm)
        b = random_global(rng, budget - 1 - left, comm)
        return Or(a, b) if rng.random() < 0.5 else conj(a, b)
    if budget >= 3 and rng.random() < 0.2:
        return Not(random_global(rng, budget - 1, comm))
    owner = rng.choice(SERVICES)
    return At(random_local(rng, owner, budget - 1, comm), owner)


def random_corpus(seed: int, count: int, comm: bool = True) -> list[Formula]:
    rng = random.Random(seed)
    out: list[Formula] = []
    while len(out) < count:
        f = random_global(rng, 6, comm)
        if f not in out:
            out.append(f)
    return out


def random_sca(rng: random.Random, max_states: int = 6, coupling_source: str = "post") -> SCA:
    services = SERVICES
    letters = {s: [frozenset(), frozenset({"a"}), frozenset({PROPS[s]})] for s in services}
    states, final, transitions = {}, {}, {}
    for s in services:
        n = rng.randint(1, max_states)
        qs = [f"{s}{i}" for i in range(n)]
        states[s] = qs
        final[s] = {q for q in qs if rng.random() < 0.5} or {rng.choice(qs)}
        transitions[s] = {
            (q, a, r) for q in qs for a in letters[s] for r in qs if rng.random() < 2.0 / n
        }
    couplings = []
    for s, t in (("s", "t"), ("t", "s")):
        for q in states[s]:
            for r in states[t]:
                if rng.random() < 0.25:
                    couplings.append(Coupling(s, frozenset({q}), t, frozenset({r})))
    init = [tuple(frozenset({rng.choice(states[s])}) for s in services) for _ in range(rng.randint(1, 2))]
    return SCA(services, states, final, transitions, couplings, init, frozenset({"a"}), {}, coupling_source)
