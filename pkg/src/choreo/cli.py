"""Command-line front end: ``choreo <subcommand> ...``.

Exit status 0 means success or that the checked property holds, 1 that it
fails (a witness is printed), 2 a usage, input or parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from .conformance import ProtocolError, parse_cp, protocol_to_dot, realizes_bounded, word_text
from .diagrams import DiagramError, check, diagram_to_dot, event_name, format_ld, parse_ld
from .sca import SCA, SCAError, accepts, bounded_chor_language, format_sca, parse_sca, sca_to_dot
from .semantics import OwnershipError, models
from .synthesis import build_sca, oracle, stats, timed_synthesis
from .syntax import Formula, FormulaError, formula_size, parse_global, signature, to_text
from .tableau import atoms, closure

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _formula(path: str) -> Formula:
    return parse_global(_read(path))


def _emit(args: argparse.Namespace, text: str, data: dict) -> None:
    print(json.dumps(data, sort_keys=True) if args.json else text)


def _ast(f: Formula, depth: int = 0) -> list[str]:
    from .syntax import children

    fields = {k: v for k, v in vars(f).items() if isinstance(v, str)}
    head = type(f).__name__ + ("(" + ", ".join(f"{k}={v}" for k, v in fields.items()) + ")" if fields else "")
    lines = ["  " * depth + head]
    for c in children(f):
        lines += _ast(c, depth + 1)
    return lines


def _witness_lines(sca: SCA, d, states: dict) -> list[str]:
    return [f"{event_name(e)}: {sca.name(e[0], q)}" for e, q in sorted(states.items())]


def _bounds(text: str) -> tuple[int, int]:
    try:
        b, l = (int(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"--bounds expects B,L (two integers), not {text!r}") from exc
    if b < 0 or l < 0:
        raise UsageError("bounds must be non-negative")
    return b, l


# -- subcommands -----------------------------------------------------------


def cmd_parse(args: argparse.Namespace) -> int:
    f = _formula(args.formula)
    sig = signature(f)
    data = {"formula": to_text(f), "size": formula_size(f), "services": list(sig.services), "messages": list(sig.messages)}
    _emit(args, to_text(f) + "\n" + "\n".join(_ast(f)), data)
    return EXIT_OK


def cmd_closure(args: argparse.Namespace) -> int:
    cls = closure(_formula(args.formula))
    lines = [cls.dump()]
    data: dict = {"global": [to_text(g) for g in cls.global_formulas], "services": {}}
    for s in cls.services:
        cl = cls[s]
        masks = atoms(cl)
        lines.append(f"atoms of {s}: {len(masks)}")
        listed = [[i for i in range(len(cl.positives)) if m >> i & 1] for m in masks]
        lines += [f"  {k}: {{{', '.join(map(str, ix))}}}" for k, ix in enumerate(listed)]
        data["services"][s] = {
            "closure": [to_text(f) for f in cl.positives],
            "eventualities": len(cl.eventualities),
            "atoms": listed,
        }
    _emit(args, "\n".join(lines), data)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    psi = _formula(args.formula)
    if args.no_prune:
        import time

        start = time.perf_counter()
        sca = build_sca(psi)
        row = stats(psi, sca, (time.perf_counter() - start) * 1000)
    else:
        sca, row = timed_synthesis(psi)
    if args.output:
        Path(args.output).write_text(format_sca(sca))
    elif not args.json:
        print(format_sca(sca), end="")
    _emit(args, row.to_text(), json.loads(row.to_json()))
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    psi = _formula(args.formula)
    d = check(parse_ld(_read(args.diagram)))
    holds = models(d, psi)
    _emit(args, "holds" if holds else "does not hold", {"holds": holds})
    return EXIT_OK if holds else EXIT_FAIL


def cmd_run(args: argparse.Namespace) -> int:
    sca = parse_sca(_read(args.sca))
    d = check(parse_ld(_read(args.diagram)))
    w = accepts(sca, d)
    if w is None:
        _emit(args, "rejected", {"accepted": False, "witness": None})
        return EXIT_FAIL
    states = {event_name(e): sca.name(e[0], q) for e, q in w.states.items()}
    _emit(args, "accepted\n" + "\n".join(_witness_lines(sca, d, w.states)), {"accepted": True, "witness": states})
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    psi = _formula(args.formula)
    threads = int(os.environ.get("CHOREO_THREADS", "1") or 1)
    report = oracle(psi, args.bound, threads=threads)
    data = {"diagrams": report.diagrams, "models": report.models, "holds": report.holds, "counterexample": None}
    text = f"checked {report.diagrams} diagrams ({report.models} models), no mismatch"
    if report.mismatch is not None:
        m = report.mismatch
        data["counterexample"] = {"diagram": format_ld(m.diagram), "satisfied": m.satisfied, "accepted": m.accepted}
        text = (
            f"mismatch after {report.diagrams} diagrams: satisfied={m.satisfied} accepted={m.accepted}\n"
            + format_ld(m.diagram)
        )
    _emit(args, text, data)
    return EXIT_OK if report.holds else EXIT_FAIL


def cmd_chor(args: argparse.Namespace) -> int:
    sca = parse_sca(_read(args.sca))
    words = sorted(bounded_chor_language(sca, args.bound), key=lambda w: (len(w), w))
    _emit(args, "\n".join(word_text(w) for w in words), {"words": [[list(a) for a in w] for w in words]})
    return EXIT_OK


def cmd_realizes(args: argparse.Namespace) -> int:
    sca = parse_sca(_read(args.sca))
    protocol = parse_cp(_read(args.protocol))
    b, l = _bounds(args.bounds)
    v = realizes_bounded(sca, protocol, b, l)
    text = v.kind if v.witness is None else f"{v.kind}: {word_text(v.witness)}"
    _emit(args, text, v.to_dict())
    return EXIT_OK if v.holds else EXIT_FAIL


def cmd_stats(args: argparse.Namespace) -> int:
    _, row = timed_synthesis(_formula(args.formula))
    _emit(args, row.to_text(), json.loads(row.to_json()))
    return EXIT_OK


def cmd_export_dot(args: argparse.Namespace) -> int:
    text = _read(args.input)
    match Path(args.input).suffix:
        case ".sca":
            out = sca_to_dot(parse_sca(text))
        case ".ld":
            out = diagram_to_dot(parse_ld(text))
        case ".cp":
            out = protocol_to_dot(parse_cp(text))
        case ".pltl":
            sca, _ = timed_synthesis(parse_global(text))
            out = sca_to_dot(sca)
        case other:
            raise UsageError(f"export-dot reads .sca, .ld, .cp or .pltl files, not {other or 'extensionless'} ones")
    print(out, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="choreo", description="p-LTL choreographies, SCAs and Lamport diagrams")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output")
        p.set_defaults(func=func)
        return p

    add("parse", cmd_parse, "parse a formula and print its syntax tree").add_argument("formula")
    add("closure", cmd_closure, "print closure sets and atoms").add_argument("formula")
    p = add("synth", cmd_synth, "synthesize the SCA of a formula")
    p.add_argument("formula")
    p.add_argument("-o", "--output")
    p.add_argument("--no-prune", action="store_true", help="build every state, no pruning")
    p = add("check", cmd_check, "does a diagram satisfy a formula")
    p.add_argument("formula")
    p.add_argument("diagram")
    p = add("run", cmd_run, "search an accepting run of an SCA on a diagram")
    p.add_argument("sca")
    p.add_argument("diagram")
    p = add("oracle", cmd_oracle, "compare satisfaction and acceptance on all small diagrams")
    p.add_argument("formula")
    p.add_argument("--bound", type=int, default=2)
    p = add("chor", cmd_chor, "bounded conversation language of an SCA")
    p.add_argument("sca")
    p.add_argument("--bound", type=int, default=2)
    p = add("realizes", cmd_realizes, "bounded comparison with a conversation protocol")
    p.add_argument("sca")
    p.add_argument("protocol")
    p.add_argument("--bounds", default="2,6", help="B,L: events per service and word length")
    add("stats", cmd_stats, "size statistics of the synthesized SCA").add_argument("formula")
    add("export-dot", cmd_export_dot, "Graphviz rendering of .sca, .ld, .cp or .pltl input").add_argument("input")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name in ("bound",):
        if getattr(args, name, 0) < 0:
            print(f"choreo: --{name} must be non-negative", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, FormulaError, DiagramError, SCAError, ProtocolError, OwnershipError) as exc:
        print(f"choreo: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
