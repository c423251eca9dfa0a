from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from choreo.diagrams import LamportDiagram, configurations, enumerate_diagrams
from choreo.semantics import OwnershipError, models, sat_global, sat_local, truth_table
from choreo.syntax import FALSE, TRUE, Eventually, Next, Not, Prev, Send, always, parse_global, parse_local, signature

from conftest import formulas
from oracles import naive_models, naive_sat, random_local

DIAGRAMS = list(enumerate_diagrams(("s", "t"), ["a", "b"], {"s": ["p"], "t": ["q"]}, 2))
BOTTOM = LamportDiagram.build({"p": [()], "c": [()]}, (), ("a",))


def test_send_and_receive_at_figure5(load):
    d = load("fig5_i.ld")
    assert sat_local(d, ("p", 1), parse_local("snd(a, c)"))
    assert sat_local(d, ("c", 1), parse_local("rcv(a, p)"))
    assert not sat_local(d, ("c", 1), parse_local("snd(a, x)"))
    assert not sat_local(d, ("p", 0), parse_local("snd(a, c)"))


def test_ownership_is_checked(load):
    with pytest.raises(OwnershipError):
        sat_local(load("fig5_i.ld"), ("c", 1), parse_local("snd(a, c)"))
    with pytest.raises(OwnershipError):
        models(load("fig5_i.ld"), parse_global("true @ zz"))


def test_boundary_markers():
    d = DIAGRAMS[-1]
    for s in d.services:
        last = d.length(s) - 1
        for i in range(d.length(s)):
            assert sat_local(d, (s, i), Prev(FALSE)) == (i == 0)
            assert sat_local(d, (s, i), Next(FALSE)) == (i == last)
            # any other argument stays strict
            assert not sat_local(d, (s, 0), Prev(TRUE))
            assert not sat_local(d, (s, last), Next(TRUE))


def test_producer_consumer_formulas(load):
    literal, guarded = load("prodcons_literal.pltl"), load("prodcons.pltl")
    for name in ("fig5_i.ld", "fig5_ii.ld", "fig5_iii.ld"):
        d = load(name)
        assert models(d, guarded)
        # the initial events never send, so the unguarded reading fails on every diagram
        assert not models(d, literal)
    assert not models(BOTTOM, parse_global("G snd(a, c) @ p"))
    assert models(BOTTOM, guarded)


def test_traveller_scenario(load):
    psi = load("traveller.pltl")
    d = LamportDiagram.build(
        {"M1": [(), "bid", "acc"], "M2": [(), "bid2", "rej"], "T": [(), "bid", "bid2", "acc", "rej"]},
        [(("M1", 1), ("T", 1)), (("M2", 1), ("T", 2)), (("T", 3), ("M1", 2)), (("T", 4), ("M2", 2))],
        ("bid", "bid2", "acc", "rej"),
    )
    assert models(d, psi)
    # accepting both bids breaks the exclusivity constraint
    both = LamportDiagram.build(
        {"M1": [(), "bid", "acc"], "M2": [(), "bid2", "acc"], "T": [(), "bid", "bid2", "acc", "acc"]},
        d.comm,
        d.messages,
    )
    assert not models(both, psi)


def test_true_holds_everywhere():
    assert all(models(d, parse_global("true @ s")) for d in DIAGRAMS)


@given(st.sampled_from(DIAGRAMS), st.randoms(use_true_random=False), st.sampled_from(["s", "t"]))
def test_table_matches_direct_recursion(d, rng, owner):
    alpha = random_local(rng, owner, 8, True)
    table = truth_table(d, owner, alpha)
    for i in range(d.length(owner)):
        assert table[alpha][i] == naive_sat(d, (owner, i), alpha)


@given(st.sampled_from(DIAGRAMS), formulas(8))
def test_models_matches_direct_recursion(d, psi):
    sig = signature(psi)
    if set(sig.services) <= set(d.services):
        assert models(d, psi) == naive_models(d, psi)


@given(st.sampled_from(DIAGRAMS), st.randoms(use_true_random=False))
def test_dualities(d, rng):
    alpha = random_local(rng, "s", 6, True)
    for i in range(d.length("s")):
        e = ("s", i)
        assert sat_local(d, e, Not(alpha)) != sat_local(d, e, alpha)
        expected = all(sat_local(d, ("s", k), alpha) for k in range(i, d.length("s")))
        assert sat_local(d, e, always(alpha)) == expected
        assert sat_local(d, e, Eventually(alpha)) == any(sat_local(d, ("s", k), alpha) for k in range(i, d.length("s")))


@given(st.sampled_from(DIAGRAMS))
def test_global_formulas_read_the_cut(d):
    psi = parse_global("p @ s")
    for c in configurations(d):
        assert sat_global(d, c, psi) == ("p" in d.label(("s", c[0])))


def test_send_requires_matching_peer():
    d = LamportDiagram.build({"s": [(), "a"], "t": [(), "a"]}, [(("s", 1), ("t", 1))], ("a",))
    assert sat_local(d, ("s", 1), Send("a", "t"))
    assert not sat_local(d, ("s", 1), Send("b", "t"))
