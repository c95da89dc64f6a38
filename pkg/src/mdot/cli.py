"""Command-line entry point: `mdot check|run|trace|desugar|fuzz`.

Exit codes: 0 success, 1 type or parse error, 2 stuck or out of steps,
3 typechecker ran out of fuel.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import derivations
from .eval import Stuck, run, trace_jsonl
from .harness import GenConfig, fuzz
from .parser import ParseError, SourceFile, parse, pretty
from .syntax import Let, desugar, is_value
from .typecheck import DEFAULT_FUEL, TypeCheckError, Verdict, synthesize

EXIT_OK, EXIT_TYPE, EXIT_RUNTIME, EXIT_UNKNOWN = 0, 1, 2, 3


def _read(path):
    if path == "-":
        return SourceFile(sys.stdin.read(), "<stdin>")
    return SourceFile.read(path)


def _load(path):
    """Parse and desugar; returns (term, None) or (None, exit code)."""
    try:
        return desugar(parse(_read(path))), None
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return None, EXIT_TYPE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return None, EXIT_TYPE


def _typecheck(t, fuel):
    dec = synthesize({}, {}, t, fuel)
    if dec.verdict is Verdict.YES:
        return dec, EXIT_OK
    if dec.verdict is Verdict.UNKNOWN:
        print(f"unknown: {dec.reason}", file=sys.stderr)
        return dec, EXIT_UNKNOWN
    kind = type(dec.error).__name__ if isinstance(dec.error, TypeCheckError) else "TypeError"
    print(f"type error ({kind}): {dec.reason}", file=sys.stderr)
    return dec, EXIT_TYPE


def cmd_check(args):
    t, code = _load(args.path)
    if t is None:
        return code
    dec, code = _typecheck(t, args.fuel)
    if code != EXIT_OK:
        if args.json:
            print(json.dumps({"verdict": dec.verdict.value, "error": dec.reason}))
        return code
    if args.json:
        out = {"verdict": "yes", "type": pretty(dec.type)}
        if args.derivation:
            out["derivation"] = derivations.to_json(dec.derivation)
        print(json.dumps(out))
    else:
        print(pretty(dec.type))
        if args.derivation:
            print(derivations.to_text(dec.derivation))
    return EXIT_OK


def _store_text(store):
    return "{" + ", ".join(f"{l} ↦ {x}" for l, x in sorted(store.items())) + "}"


def cmd_run(args, force_trace=False):
    t, code = _load(args.path)
    if t is None:
        return code
    if not args.unsafe:
        _, code = _typecheck(t, args.fuel)
        if code != EXIT_OK:
            return code
    res = run(t, args.semantics, args.max_steps, raise_on_budget=False)
    if args.trace or force_trace:
        sys.stdout.write(trace_jsonl(res))
    final = res.final
    whole = res.answer  # the stack, if any, reified as lets
    answer = whole
    while isinstance(answer, Let) and is_value(answer.bound):
        answer = answer.body
    if res.answered:
        status, code = "answer", EXIT_OK
    elif isinstance(res.outcome, Stuck):
        status, code = str(res.outcome), EXIT_RUNTIME
    else:
        status, code = f"no answer within {args.max_steps} steps", EXIT_RUNTIME
    if args.json:
        print(json.dumps({
            "outcome": "answer" if code == EXIT_OK else
                       ("stuck" if isinstance(res.outcome, Stuck) else "budget"),
            "answer": pretty(answer), "term": pretty(whole), "steps": len(res.steps),
            "store": {str(l): x for l, x in sorted(final.store.items())},
            "stack": [[x, pretty(v)] for x, v in final.stack],
            "detail": status}))
    elif not (args.trace or force_trace):
        if code == EXIT_OK:
            print(f"answer: {pretty(answer)}")
        else:
            print(status, file=sys.stderr)
        print(f"store: {_store_text(final.store)}")
        print(f"steps: {len(res.steps)}")
    elif code != EXIT_OK:
        print(status, file=sys.stderr)
    return code


def cmd_trace(args):
    return cmd_run(args, force_trace=True)


def cmd_desugar(args):
    t, code = _load(args.path)
    if t is None:
        return code
    print(pretty(t, parseable=True))
    return EXIT_OK


def cmd_fuzz(args):
    cfg = GenConfig(seed=args.seed, max_size=args.max_size, fuel=args.fuel,
                    refs=not args.no_refs, objects=not args.no_objects)
    report = fuzz(cfg, args.count, args.max_steps, differential=args.differential)
    if args.json:
        sys.stdout.write(report.jsonl())
    else:
        s = report.summary()
        print(f"programs: {s['programs']}  checks: {s['checks']}  "
              f"failures: {s['failures']}  unknown: {s['unknown']} "
              f"({100 * s['unknown_rate']:.2f}%)")
        print(f"certificates: {s['certificates_checked']} checked, "
              f"{s['certificates_rejected']} rejected")
        for r in report.records:
            if r.failure:
                print(f"FAIL #{r.index} (seed {r.seed}): {r.failure}\n  {r.term}")
    return EXIT_OK if report.ok else EXIT_RUNTIME


def build_parser():
    p = argparse.ArgumentParser(prog="mdot", description="Mutable DOT toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, path=True):
        if path:
            sp.add_argument("path", help="program file, or - for standard input")
        sp.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
        sp.add_argument("--json", action="store_true")

    c = sub.add_parser("check", help="typecheck a program")
    common(c)
    c.add_argument("--derivation", action="store_true", help="print the derivation")
    c.set_defaults(func=cmd_check)

    for name, func in (("run", cmd_run), ("trace", cmd_trace)):
        r = sub.add_parser(name, help=f"{name} a program")
        common(r)
        r.add_argument("--semantics", choices=("stack", "context"), default="stack")
        r.add_argument("--max-steps", type=int, default=10_000)
        r.add_argument("--trace", action="store_true", help="emit JSON lines per step")
        r.add_argument("--unsafe", action="store_true", help="run ill-typed programs")
        r.set_defaults(func=func)

    d = sub.add_parser("desugar", help="print the core form of a program")
    common(d)
    d.set_defaults(func=cmd_desugar)

    f = sub.add_parser("fuzz", help="generate, run and check well-typed programs")
    common(f, path=False)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--count", type=int, default=100)
    f.add_argument("--max-size", type=int, default=40)
    f.add_argument("--max-steps", type=int, default=500)
    f.add_argument("--differential", action="store_true")
    f.add_argument("--no-refs", action="store_true")
    f.add_argument("--no-objects", action="store_true")
    f.set_defaults(func=cmd_fuzz)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
