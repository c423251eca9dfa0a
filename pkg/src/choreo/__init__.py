"""Realizable choreographies: p-LTL formulas, Lamport diagrams and systems of communicating automata."""

from __future__ import annotations

from importlib import resources

from .conformance import ConversationProtocol, Verdict, nfa_language_bounded, parse_cp, project, realizes_bounded
from .diagrams import LamportDiagram, chor, configurations, enumerate_diagrams, linearizations, parse_ld, validate
from .sca import SCA, RunWitness, accepts, bounded_chor_language, bounded_poset_language, parse_sca
from .semantics import models, sat_global, sat_local
from .synthesis import SynthesisStats, build_sca, oracle, prune, stats, synthesize
from .syntax import parse_global, parse_local, to_text
from .tableau import atoms, closure


def fixture(name: str) -> str:
    """Text of a bundled fixture file, e.g. ``fixture("c1.cp")``."""
    return resources.files(__package__).joinpath("fixtures", name).read_text()


__all__ = [
    "ConversationProtocol",
    "LamportDiagram",
    "RunWitness",
    "SCA",
    "SynthesisStats",
    "Verdict",
    "accepts",
    "atoms",
    "bounded_chor_language",
    "bounded_poset_language",
    "build_sca",
    "chor",
    "closure",
    "configurations",
    "enumerate_diagrams",
    "fixture",
    "linearizations",
    "models",
    "nfa_language_bounded",
    "oracle",
    "parse_cp",
    "parse_global",
    "parse_ld",
    "parse_local",
    "parse_sca",
    "project",
    "prune",
    "realizes_bounded",
    "sat_global",
    "sat_local",
    "stats",
    "synthesize",
    "to_text",
    "validate",
]
