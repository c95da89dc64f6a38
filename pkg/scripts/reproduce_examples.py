"""Typecheck, run and soundness-check every program in corpus/.

    python scripts/reproduce_examples.py [corpus-dir]

Prints the synthesized type, the stack-machine answer and store, the rule
sequence, the final store typing, and the per-program soundness verdicts.
"""
import sys
from pathlib import Path

from mdot.derivations import validate_derivation
from mdot.eval import run
from mdot.harness import check_program
from mdot.parser import SourceFile, parse, pretty
from mdot.syntax import desugar
from mdot.typecheck import synthesize


def show(path):
    t = desugar(parse(SourceFile.read(path)))
    dec = synthesize({}, {}, t)
    print(f"== {path.name}")
    if not dec:
        print(f"   verdict: {dec.verdict.value} ({dec.reason})")
        return
    print(f"   type: {pretty(dec.type)}")
    print(f"   derivation: {dec.derivation.size()} nodes, "
          f"validator {'accepts' if validate_derivation(dec.derivation) else 'REJECTS'}")
    out = check_program(t, dec.type, max_steps=10_000, differential=True)
    res, report = out["result"], out["report"]
    store = ", ".join(f"{l} -> {x}" for l, x in sorted(res.final.store.items()))
    answer = pretty(res.final.term) if res.answered else res.outcome
    print(f"   answer: {answer} (stack of {len(res.final.stack)}, {len(res.rules)} steps)")
    print(f"   store: {{{store}}}  sigma: "
          f"{ {l: pretty(T) for l, T in report.final_sigma.items()} }")
    print(f"   rules: {' '.join(res.rules)}")
    print(f"   preservation/store/stack/scoping: {'ok' if report.ok else report.failures()}; "
          f"progress {out['progress'].value}; canonical forms {out['canonical'].value}; "
          f"differential {out['differential'].value}")


def main():
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent.parent / "corpus"
    for path in sorted(root.glob("*.mdot")):
        show(path)


if __name__ == "__main__":
    main()
