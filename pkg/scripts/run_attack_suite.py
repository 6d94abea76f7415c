#!/usr/bin/env python3
"""Run every built-in scenario across a seed range and print a result matrix.

Usage: python3 scripts/run_attack_suite.py [--seeds N] [--transport http]
"""

from __future__ import annotations

import argparse
import sys
import time

from da2fa.scenarios import default_runner


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=20,
                        help="seeds 0..N-1 per scenario (default 20)")
    parser.add_argument("--transport", choices=["in-process", "http"],
                        default="in-process")
    args = parser.parse_args()

    runner = default_runner()
    failures: list[tuple[str, int]] = []
    started = time.time()
    for name in sorted(runner.registry):
        ok = 0
        for seed in range(args.seeds):
            report = runner.run(name, seed=seed, transport=args.transport)
            if report.passed:
                ok += 1
            else:
                failures.append((name, seed))
        print(f"{name:28s} {ok:3d}/{args.seeds} seeds pass")
    elapsed = time.time() - started
    print(f"\n{len(runner.registry)} scenarios x {args.seeds} seeds "
          f"in {elapsed:.1f}s over {args.transport}")
    for name, seed in failures[:10]:
        print(f"FAILED: {name} seed={seed}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
