"""Satisfaction of local and global p-LTL formulas on Lamport diagrams.

``X`` and ``Y`` are strict one-step modalities, with one convention: ``Y false``
holds exactly at the initial event of a service and ``X false`` exactly at its
last event.  These two formulas are how the tableau recognises the ends of a
service's history, so the semantics gives them that meaning.
"""

from __future__ import annotations

from .diagrams import Configuration, EventRef, LamportDiagram, initial_configuration
from .syntax import FALSE, At, Eventually, Formula, Next, Not, Or, Prev, Prop, Recv, Send, TrueConst, subformulas


class OwnershipError(ValueError):
    pass


def truth_table(d: LamportDiagram, service: str, alpha: Formula, table: dict | None = None) -> dict[Formula, list[bool]]:
    """Truth value of every subformula of ``alpha`` at every event of ``service``.

    Filled bottom-up, so each subformula costs one pass over the service's events.
    """
    table = {} if table is None else table
    n = d.length(service)
    events = [(service, i) for i in range(n)]
    for f in subformulas(alpha):
        if f in table:
            continue
        match f:
            case TrueConst():
                row = [True] * n
            case Prop(p):
                row = [p in d.label(e) for e in events]
            case Send(m, peer):
                row = [_partner(d.receiver_of.get(e), peer) and m in d.label(e) for e in events]
            case Recv(m, peer):
                row = [_partner(d.sender_of.get(e), peer) and m in d.label(e) for e in events]
            case Not(a):
                row = [not v for v in table[a]]
            case Or(a, b):
                row = [x or y for x, y in zip(table[a], table[b])]
            case Next(a):
                row = table[a][1:] + [a == FALSE]
            case Prev(a):
                row = [a == FALSE] + table[a][:-1]
            case Eventually(a):
                row = [False] * n
                acc = False
                for i in range(n - 1, -1, -1):
                    acc = acc or table[a][i]
                    row[i] = acc
            case At():
                raise OwnershipError("'@' cannot occur inside a local formula")
            case _:
                raise TypeError(f"not a local formula: {f!r}")
        table[f] = row
    return table


def _partner(e: EventRef | None, peer: str) -> bool:
    return e is not None and e[0] == peer


def sat_local(d: LamportDiagram, e: EventRef, alpha: Formula) -> bool:
    """``D, e |=_s alpha`` where ``s`` is the service of ``e``."""
    service, i = e
    if service not in d.index:
        raise OwnershipError(f"unknown service {service!r}")
    for f in subformulas(alpha):
        if isinstance(f, (Send, Recv)) and f.peer == service:
            raise OwnershipError(f"{f} cannot hold at an event of {service!r}")
    return truth_table(d, service, alpha)[alpha][i]


def sat_global(d: LamportDiagram, cut: Configuration, psi: Formula, _tables: dict | None = None) -> bool:
    tables = {} if _tables is None else _tables
    match psi:
        case At(alpha, s):
            if s not in d.index:
                raise OwnershipError(f"service {s!r} does not occur in the diagram")
            table = truth_table(d, s, alpha, tables.setdefault(s, {}))
            return table[alpha][cut[d.index[s]]]
        case Not(a):
            return not sat_global(d, cut, a, tables)
        case Or(a, b):
            return sat_global(d, cut, a, tables) or sat_global(d, cut, b, tables)
    raise TypeError(f"not a global formula: {psi!r}")


def models(d: LamportDiagram, psi: Formula) -> bool:
    """Whether ``d`` satisfies ``psi`` at its initial configuration."""
    return sat_global(d, initial_configuration(d), psi)
