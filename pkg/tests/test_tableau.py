from __future__ import annotations

import random

from hypothesis import given
from hypothesis import strategies as st

from choreo.syntax import FALSE, TRUE, At, Eventually, Next, Not, Prev, Recv, Send, conj, formula_size, parse_global, to_text
from choreo.tableau import (
    NEXT_FALSE,
    PREV_FALSE,
    atoms,
    closure,
    comm_step,
    global_contains,
    is_atom,
    loc_pairs,
    loc_step,
)

from conftest import formulas
from oracles import mask_to_set, naive_atoms, random_global, random_local


def positives(cl):
    return {to_text(f) for f in cl.positives}


def test_true_at_s_closure():
    cls = closure(parse_global("true @ s"))
    assert positives(cls["s"]) == {"true", "X false", "Y false"}
    assert len(cls["s"]) == 6
    assert cls["s"].eventualities == []


def test_producer_consumer_closure(load):
    cls = closure(load("prodcons_literal.pltl"))
    assert positives(cls["p"]) == {
        "true", "X false", "Y false", "snd(a,c)", "rcv(a,c)", "F ~snd(a,c)", "X F ~snd(a,c)",
    }
    assert len(cls["p"]) == 14
    assert [to_text(f) for f in cls["p"].eventualities] == ["F ~snd(a,c)"]
    assert len(atoms(cls["p"])) == 12 and len(atoms(cls["c"])) == 12


def test_traveller_atom_counts(load):
    cls = closure(load("traveller.pltl"))
    assert (len(cls["M1"]), len(cls["M2"]), len(cls["T"])) == (50, 50, 84)
    assert [len(cls[s].eventualities) for s in ("M1", "M2", "T")] == [2, 2, 7]
    assert [len(atoms(cls[s])) for s in ("M1", "M2", "T")] == [90, 90, 2322]


def test_closure_is_linear_in_the_formula():
    parts = [parse_global(t) for t in ("F (p & X q) @ s", "G (q -> Y p) @ s", "(F snd(a, t) | r) @ s")]
    psi = parts[0]
    for k in range(len(parts)):
        psi = parts[0] if k == 0 else conj(psi, parts[k])
        # two entries per subformula, X F g for each F g, plus the fixed core and messages
        assert len(closure(psi)["s"]) <= 4 * formula_size(psi) + 12


def test_closure_rules_hold(load):
    for psi in (load("traveller.pltl"), load("prodcons.pltl")):
        cls = closure(psi)
        for s in cls.services:
            pos = set(cls[s].positives)
            for f in pos:
                match f:
                    case Eventually(a):
                        assert Next(f) in pos and (a in pos or a.arg in pos)
                    case Next(a) | Prev(a):
                        assert a in pos or (isinstance(a, Not) and a.arg in pos)
            assert {TRUE, NEXT_FALSE, PREV_FALSE} <= pos
            for m in cls.signature.messages:
                for peer in cls.services:
                    if peer != s:
                        assert Send(m, peer) in pos and Recv(m, peer) in pos


@given(formulas(8))
def test_atoms_equal_naive_filter(psi):
    cls = closure(psi)
    for s in cls.services:
        cl = cls[s]
        if len(cl) > 24:  # |CL_s| <= 12 pairs
            continue
        fast = atoms(cl)
        assert len(set(fast)) == len(fast)
        assert {mask_to_set(cl, m) for m in fast} == naive_atoms(cl)


def test_atoms_equal_naive_filter_on_seeded_corpus():
    checked = 0
    rng = random.Random(11)
    while checked < 40:
        cls = closure(random_global(rng, 8))
        for s in cls.services:
            cl = cls[s]
            if len(cl) <= 24:
                assert {mask_to_set(cl, m) for m in atoms(cl)} == naive_atoms(cl)
                checked += 1


@given(formulas(8))
def test_every_atom_passes_the_rule_checker(psi):
    cls = closure(psi)
    for s in cls.services:
        cl = cls[s]
        for m in atoms(cl):
            assert is_atom(cl, m)
            for f in cl.eventualities:
                if cl.holds(m, f) and not cl.holds(m, f.arg):
                    assert cl.holds(m, Next(f))


@given(formulas(8))
def test_local_relation(psi):
    cls = closure(psi)
    for s in cls.services:
        cl = cls[s]
        masks = atoms(cl)
        pairs = set(loc_pairs(cl, masks))
        assert pairs == {(a, b) for a in masks for b in masks if loc_step(cl, a, b)}
        for a, b in pairs:
            assert not cl.is_last(a)
            assert not cl.is_initial(b)
        # maximality: a pair left out breaks one of the two matching clauses
        for a in masks[:6]:
            for b in masks[:6]:
                if (a, b) not in pairs:
                    assert any(cl.holds(a, f) != cl.holds(b, f.arg) for f in cl.of_kind(Next)) or any(
                        cl.holds(b, f) != cl.holds(a, f.arg) for f in cl.of_kind(Prev)
                    )


def test_pinned_local_pair(load):
    cls = closure(load("prodcons_literal.pltl"))
    cl = cls["p"]
    by_text = {cl.describe(m): m for m in atoms(cl)}
    a = by_text["{true, F ~snd(a,c), Y false, X F ~snd(a,c)}"]
    b = by_text["{true, F ~snd(a,c), X false}"]
    assert loc_step(cl, a, b)
    assert not loc_step(cl, b, a)


def test_comm_step(load):
    cls = closure(load("prodcons_literal.pltl"))
    p, c = cls["p"], cls["c"]
    senders = [m for m in atoms(p) if p.holds(m, Send("a", "c"))]
    receivers = [m for m in atoms(c) if c.holds(m, Recv("a", "p"))]
    assert senders and receivers
    for a in senders:
        for b in receivers:
            assert comm_step(cls, "p", a, "c", b, "a")
            assert not comm_step(cls, "c", b, "p", a, "a")
    plain = next(m for m in atoms(p) if not p.holds(m, Send("a", "c")))
    assert not comm_step(cls, "p", plain, "c", receivers[0], "a")


def test_initial_atoms_do_not_communicate(load):
    cls = closure(load("traveller.pltl"))
    for s in cls.services:
        cl = cls[s]
        for m in atoms(cl):
            if cl.is_initial(m):
                assert m & cl.comm_mask == 0
            assert bin(m & cl.comm_mask).count("1") <= 1


def test_global_membership():
    psi = parse_global("p @ s | ~(q @ t)")
    cls = closure(psi)
    s_atoms = {cls["s"].holds(m, parse_global("p @ s").formula): m for m in atoms(cls["s"]) if cls["s"].is_initial(m)}
    t_atoms = {cls["t"].holds(m, parse_global("q @ t").formula): m for m in atoms(cls["t"]) if cls["t"].is_initial(m)}
    assert global_contains(cls, {"s": s_atoms[True], "t": t_atoms[True]}, psi)
    assert not global_contains(cls, {"s": s_atoms[False], "t": t_atoms[True]}, psi)
    assert global_contains(cls, {"s": s_atoms[False], "t": t_atoms[False]}, psi)


def test_false_has_no_atom_containing_it():
    cls = closure(At(FALSE, "s"))
    assert all(not cls["s"].holds(m, FALSE) for m in atoms(cls["s"]))
