#!/usr/bin/env python3
"""Sweep the partial fingerprint theft attack: for each k in 0..12 the
attacker clones k of the victim's 12 attributes (never the cookie), gets
the challenge via a SIM-jack, and clicks. Prints score, verdict, and the
click outcome per k.
"""

from __future__ import annotations

import sys

from da2fa.scenarios import default_runner


def main() -> int:
    report = default_runner().run("partial_fingerprint_theft", seed=1, keep_context=True)
    ctx = report.context
    print(f"{'k':>2}  {'score':>7}  {'verdict':<13} challenge")
    for k, (challenge, verdict_event) in enumerate(
            zip(ctx.challenges_in_order(), report.verdict_events)):
        details = verdict_event["details"]
        print(f"{k:>2}  {details['fingerprint_score']:>7.4f}  "
              f"{details['verdict']:<13} {challenge.state.value}")
    completed = [a for a in report.actions if a["state"] == "COMPLETED"]
    print(f"\ncompleted actions: {len(completed)} (attack never passes; "
          f"k=12 caps at UNCERTAIN without the cookie)")
    return 0 if report.passed and not completed else 1


if __name__ == "__main__":
    sys.exit(main())
