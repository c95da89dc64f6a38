"""Fuzz the soundness checks over several seeds and print one line per seed.

    python scripts/fuzz_soundness.py --seeds 0 1 2 --count 1000
    python scripts/fuzz_soundness.py --seeds 6 --count 1000 --jsonl out.jsonl

Each program is generated well typed, run on the stack machine and checked
at every state (progress, preservation, store typing, stack correspondence,
store scoping, canonical forms). Failing programs are shrunk and printed.
"""
import argparse
import time

from mdot.harness import GenConfig, fuzz


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=[6])
    ap.add_argument("--count", type=int, default=1000)
    ap.add_argument("--max-size", type=int, default=40)
    ap.add_argument("--max-steps", type=int, default=500)
    ap.add_argument("--differential", action="store_true")
    ap.add_argument("--jsonl", help="write per-program records here")
    args = ap.parse_args()

    total_fail = 0
    for seed in args.seeds:
        start = time.perf_counter()
        report = fuzz(GenConfig(seed=seed, max_size=args.max_size), args.count,
                      max_steps=args.max_steps, differential=args.differential)
        s = report.summary()
        total_fail += s["failures"]
        print(f"seed {seed}: {s['programs']} programs, {s['checks']} checks, "
              f"{s['failures']} failures, unknown {100 * s['unknown_rate']:.2f}%, "
              f"{s['certificates_checked']} certificates ({s['certificates_rejected']} rejected), "
              f"{time.perf_counter() - start:.1f} s")
        for rec in report.records:
            if rec.failure:
                print(f"  #{rec.index}: {rec.failure}\n    {rec.term}")
        if args.jsonl:
            with open(args.jsonl, "a", encoding="utf-8") as f:
                f.write(report.jsonl() + "\n")
    raise SystemExit(1 if total_fail else 0)


if __name__ == "__main__":
    main()
