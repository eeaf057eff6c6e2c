"""Command-line front end: ``lqcheck <command> ...``.

Exit codes: 0 success or equivalent, 1 not equivalent (or a failing corpus
entry), 2 usage or parse error, 3 type error, 4 semantics error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import corpus
from .bisim import WILDCARD, context_replay, ground_bisim
from .lang import ParseError, Program, parse, pretty, sched_str, tags_of
from .plts import (
    TAU,
    ProbDist,
    SemanticsError,
    System,
    enabled,
    matrix_digest,
    parse_action,
    parse_scheduler,
    scheduled_step,
)
from .qlts import QuantumDist, alpha, enabled_q, qdist_step
from .typesys import TypingError, typecheck, uic

EXIT_OK, EXIT_DIFFERENT, EXIT_USAGE, EXIT_TYPE, EXIT_SEMANTICS = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    """Numbers are printed to 12 significant digits."""
    return f"{float(x):.12g}"


def _read_program(path: str) -> Program:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return parse(text)


def _set_name(sigma) -> str:
    return "{" + ", ".join(sorted(sigma)) + "}"


def split_schedule(text: str) -> list:
    """Split on commas outside parentheses."""
    items, depth, cur = [], 0, []
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            items.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if "".join(cur).strip():
        items.append("".join(cur).strip())
    return [i for i in items if i]


def parse_schedule(text: str) -> list:
    """Entries ``SCHED`` or ``SCHED:ACTION``; ``SCHED`` may be ``*``.

    A missing action is left as ``None`` for the caller to infer.
    """
    out = []
    for item in split_schedule(text):
        if item.startswith("("):
            close = item.index(")")
            sched_txt, rest = item[: close + 1], item[close + 1:]
        else:
            sched_txt, _, rest = item.partition(":")
            rest = ":" + rest if rest else ""
        sched = WILDCARD if sched_txt.strip() == WILDCARD else parse_scheduler(sched_txt)
        rest = rest.strip()
        action = parse_action(rest[1:]) if rest.startswith(":") else None
        out.append((sched, action))
    return out


# parse / typecheck ---------------------------------------------------------------


def cmd_parse(args) -> int:
    prog = _read_program(args.file)
    for name, proc in prog.procs.items():
        print(f"proc {name} = {pretty(proc)}")
    main = prog.procs[prog.main]
    print(f"main: {prog.main}")
    print("tags: " + _set_name(tags_of(main)))
    return EXIT_OK


def cmd_typecheck(args) -> int:
    prog = _read_program(args.file)
    for name, proc in prog.procs.items():
        sigma = typecheck(proc, prog.channels)
        print(f"{_set_name(sigma)} ⊢ {name}")
    main = prog.process()
    open_inputs = uic(main, prog.channels)
    if open_inputs:
        print(f"uic({prog.main}) = {_set_name(open_inputs)}: not input-restricted")
    else:
        print(f"uic({prog.main}) = {{}}: {prog.main} is input-restricted")
    return EXIT_OK


# run -------------------------------------------------------------------------------


def _digest(mat: np.ndarray) -> str:
    return hashlib.sha256(matrix_digest(mat)).hexdigest()[:16]


def _support_json(dist) -> list:
    if isinstance(dist, QuantumDist):
        return [
            {"weight": fmt(np.trace(rho).real), "state_digest": _digest(rho), "process_text": pretty(p)}
            for p, rho in dist.entries
        ]
    return [
        {"weight": fmt(w), "state_digest": _digest(rho), "process_text": pretty(p)}
        for w, rho, p in dist.entries
    ]


def _initial(prog: Program, proc_name: str | None, semantics: str):
    proc = prog.process(proc_name)
    pd = ProbDist.ensemble(prog.initial_ensemble(), proc)
    return alpha(pd) if semantics == "qlts" else pd


def _step(dist, sched, action, system, semantics):
    if semantics == "qlts":
        return qdist_step(dist, sched, action, system)
    return scheduled_step(dist, sched, action, system)


def _enabled(dist, system, semantics):
    return enabled_q(dist, system) if semantics == "qlts" else enabled(dist, system)


def cmd_run(args) -> int:
    prog = _read_program(args.file)
    system = System.from_program(prog)
    dist = _initial(prog, args.proc, args.semantics)
    steps = [{"scheduler": None, "action": None, "support": _support_json(dist)}]
    if args.schedule is not None:
        for sched, action in parse_schedule(args.schedule)[: args.max_steps]:
            if sched == WILDCARD:
                raise UsageError("run needs explicit schedulers")
            if action is None:
                options = sorted({str(a): a for s, a in _enabled(dist, system, args.semantics) if s == sched}.items())
                if len(options) > 1:
                    listed = ", ".join(k for k, _ in options)
                    raise UsageError(f"scheduler {sched_str(sched)} allows several actions ({listed}); name one")
                action = options[0][1] if options else TAU
            dist = _step(dist, sched, action, system, args.semantics)
            steps.append(
                {"scheduler": sched_str(sched), "action": str(action), "support": _support_json(dist)}
            )
    else:
        frontier = [(0, dist)]
        steps[0].update({"node": 0, "parent": None, "depth": 0})
        seen = {dist.key(): 0}
        depth = 0
        while frontier and depth < args.max_steps:
            depth += 1
            nxt = []
            for node, d in frontier:
                for sched, action in _enabled(d, system, args.semantics):
                    succ = _step(d, sched, action, system, args.semantics)
                    new = succ.key() not in seen
                    ident = seen.setdefault(succ.key(), len(seen))
                    steps.append(
                        {
                            "node": ident,
                            "parent": node,
                            "depth": depth,
                            "scheduler": sched_str(sched),
                            "action": str(action),
                            "support": _support_json(succ),
                        }
                    )
                    if new and len(succ):
                        nxt.append((ident, succ))
            frontier = nxt
    if args.json:
        print(json.dumps(steps, indent=2))
    else:
        for i, st in enumerate(steps):
            label = "root" if st["scheduler"] is None else f"{st['scheduler']}:{st['action']}"
            prefix = f"[{st['parent']}->{st['node']}] " if "node" in st and st["parent"] is not None else ""
            print(f"step {i}: {prefix}{label}")
            if not st["support"]:
                print("    (empty distribution)")
            for e in st["support"]:
                print(f"    {e['weight']:>14}  {e['state_digest']}  {e['process_text']}")
    return EXIT_OK


# bisim -------------------------------------------------------------------------------


def _print_verdict(verdict, as_json: bool) -> None:
    data = verdict.to_json()
    if as_json:
        print(json.dumps(data, indent=2))
        return
    print(f"equivalent: {'yes' if verdict.equivalent else 'no'}")
    print(f"basis: {data['theorem_basis']}")
    for w in data["warnings"]:
        print(f"warning: {w}")
    for n in data["notes"]:
        print(f"note: {n}")
    if not verdict.equivalent:
        print("witness:")
        for step in data["witness"]:
            print(f"    {step['scheduler']}:{step['action']}")
        mm = data["env_mismatch"]
        print(f"mismatch ({mm['kind']}): max |difference| = {fmt(mm['max_abs_diff'])}")
        if mm.get("detail"):
            print(f"    {mm['detail']}")
        else:
            print(f"    left:  {json.dumps(mm['left'])}")
            print(f"    right: {json.dumps(mm['right'])}")
    st = data["stats"]
    print(f"pairs visited: {st['pairs_visited']}, max depth: {st['max_depth']}")


def cmd_bisim(args) -> int:
    if args.corpus:
        if args.files:
            raise UsageError("give either two files or --corpus, not both")
        if args.corpus not in corpus.ENTRIES:
            raise UsageError(f"unknown corpus entry {args.corpus!r}")
        entry = corpus.ENTRIES[args.corpus]
        if entry.pair is None:
            raise UsageError(f"corpus entry {args.corpus!r} is not a bisimulation pair")
        d, t, system = entry.pair()
    else:
        if len(args.files) != 2:
            raise UsageError("bisim needs two files (or --corpus NAME)")
        pa, pb = (_read_program(f) for f in args.files)
        try:
            system = System.from_programs(pa, pb)
        except SemanticsError as exc:
            raise UsageError(str(exc)) from None
        d = alpha(ProbDist.ensemble(pa.initial_ensemble(), pa.process(args.proc_a)))
        t = alpha(ProbDist.ensemble(pb.initial_ensemble(), pb.process(args.proc_b)))
    verdict = ground_bisim(d, t, system, threads=args.threads)
    _print_verdict(verdict, args.json)
    return EXIT_OK if verdict.equivalent else EXIT_DIFFERENT


# replay ------------------------------------------------------------------------------


def cmd_replay(args) -> int:
    prog = _read_program(args.file)
    ctx_prog = _read_program(args.context) if args.context != args.file else prog
    try:
        system = System.from_programs(prog, ctx_prog)
    except SemanticsError as exc:
        raise UsageError(str(exc)) from None
    dist = ProbDist.ensemble(prog.initial_ensemble(), prog.process(args.proc))
    context = ctx_prog.process(args.context_proc)
    schedule = [(s, TAU if a is None else a) for s, a in parse_schedule(args.schedule)]
    reports = context_replay(dist, context, schedule, system, args.mode)
    if args.json:
        print(json.dumps([r.to_json() for r in reports], indent=2))
    else:
        print(f"{'step':>4}  {'entry':<16} {'min':>14} {'max':>14}  masses")
        for r in reports:
            entry = f"{r.scheduler}:{r.action}"
            masses = ", ".join(fmt(m) for m in r.masses)
            print(f"{r.index:>4}  {entry:<16} {fmt(r.min_mass):>14} {fmt(r.max_mass):>14}  {{{masses}}}")
            for w in r.warnings:
                print(f"      warning: {w}")
    return EXIT_OK


# corpus ------------------------------------------------------------------------------


def cmd_corpus(args) -> int:
    if args.list:
        for name, entry in corpus.ENTRIES.items():
            print(f"{name:<28} {entry.source + '.lq':<20} {entry.expected}")
        return EXIT_OK
    if args.run_all:
        names = list(corpus.ENTRIES)
    elif args.name:
        if args.name not in corpus.ENTRIES:
            raise UsageError(f"unknown corpus entry {args.name!r}")
        names = [args.name]
    else:
        raise UsageError("corpus needs --list, --run-all or an entry name")
    results = {name: corpus.ENTRIES[name].run() for name in names}
    if args.json:
        print(json.dumps({n: {"passed": o.passed, "summary": o.summary} for n, o in results.items()}, indent=2))
    else:
        for name, outcome in results.items():
            print(f"{name:<28} {'PASS' if outcome.passed else 'FAIL'}  {outcome.summary}")
        passed = sum(o.passed for o in results.values())
        print(f"{passed}/{len(results)} passed")
    return EXIT_OK if all(o.passed for o in results.values()) else EXIT_DIFFERENT


# entry point ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lqcheck", description="Tagged lqCCS verification toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a .lq file and print its definitions")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("typecheck", help="print the qubits owned by each definition")
    p.add_argument("file")
    p.set_defaults(func=cmd_typecheck)

    p = sub.add_parser("run", help="execute a process along a schedule or exhaustively")
    p.add_argument("file")
    p.add_argument("--proc", help="definition to run (default: main)")
    p.add_argument("--semantics", choices=["plts", "qlts"], default="plts")
    p.add_argument("--max-steps", type=int, default=50)
    p.add_argument("--schedule", help="comma-separated SCHED[:ACTION] entries, e.g. 't2,(t3,t4),t4'")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bisim", help="check ground bisimilarity of two processes")
    p.add_argument("files", nargs="*")
    p.add_argument("--corpus", help="use the pair of a corpus entry")
    p.add_argument("--proc-a", help="definition in the first file (default: main)")
    p.add_argument("--proc-b", help="definition in the second file (default: main)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bisim)

    p = sub.add_parser("replay", help="replay a schedule under a parallel context")
    p.add_argument("file")
    p.add_argument("--context", required=True, help=".lq file holding the context process")
    p.add_argument("--proc", help="definition under test (default: main)")
    p.add_argument("--context-proc", help="context definition (default: main of the context file)")
    p.add_argument("--schedule", required=True, help="comma-separated SCHED[:ACTION]; SCHED may be *")
    p.add_argument("--mode", choices=["scheduled", "unscheduled"], default="scheduled")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("corpus", help="list or run the built-in corpus")
    p.add_argument("name", nargs="?")
    p.add_argument("--list", action="store_true")
    p.add_argument("--run-all", action="store_true")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (UsageError, ParseError, ValueError) as exc:
        if isinstance(exc, TypingError):
            print(f"type error: {exc}", file=sys.stderr)
            return EXIT_TYPE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SemanticsError as exc:
        print(f"semantics error: {exc}", file=sys.stderr)
        return EXIT_SEMANTICS


if __name__ == "__main__":
    sys.exit(main())
