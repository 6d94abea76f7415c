"""Clocks and token sources.

Every timestamp in the system is an integer number of seconds read from a
Clock, and every opaque token or id comes from a TokenSource. Production
wiring uses the wall clock and the OS CSPRNG; the scenario harness swaps in
a logical clock and a seeded source so that a (scenario, seed) pair replays
to a byte-identical event log.
"""

from __future__ import annotations

import base64
import random
import secrets
import time
from typing import Protocol


class Clock(Protocol):
    def now(self) -> int: ...


class WallClock:
    def now(self) -> int:
        return int(time.time())


class LogicalClock:
    """Integer clock advanced explicitly by whoever owns the simulation."""

    def __init__(self, start: int = 0):
        self._now = start

    def now(self) -> int:
        return self._now

    def advance(self, seconds: int) -> int:
        if seconds < 0:
            raise ValueError("clock cannot move backwards")
        self._now += seconds
        return self._now


class TokenSource(Protocol):
    def token(self, nbytes: int = 16) -> str: ...

    def new_id(self, prefix: str) -> str: ...

    def digits(self, count: int) -> str: ...


class SystemTokens:
    """Cryptographically strong tokens from the operating system."""

    def token(self, nbytes: int = 16) -> str:
        return secrets.token_urlsafe(nbytes)

    def new_id(self, prefix: str) -> str:
        return f"{prefix}-{secrets.token_hex(6)}"

    def digits(self, count: int) -> str:
        return "".join(str(secrets.randbelow(10)) for _ in range(count))


class SeededTokens:
    """Deterministic stand-in for SystemTokens, for reproducible scenarios.

    Not cryptographically strong; never use outside the harness.
    """

    def __init__(self, seed: int):
        self._rng = random.Random(seed)

    def token(self, nbytes: int = 16) -> str:
        raw = self._rng.getrandbits(nbytes * 8).to_bytes(nbytes, "big")
        return base64.urlsafe_b64encode(raw).rstrip(b"=").decode("ascii")

    def new_id(self, prefix: str) -> str:
        return f"{prefix}-{self._rng.getrandbits(48):012x}"

    def digits(self, count: int) -> str:
        return "".join(str(self._rng.randrange(10)) for _ in range(count))
