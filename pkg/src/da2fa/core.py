"""Shared runtime bundle: store + config + clock + tokens + delivery hooks.

Flow modules (challenge, escalation, registration) all operate through a
Core, which adds typed load/insert/update helpers over the record store
and the event-append shorthand.
"""

from __future__ import annotations

from typing import Callable, Optional

from . import codec
from .config import Config
from .errors import UnknownAccount, UnknownAction
from .model import DeviceProfile, SensitiveAction, UserAccount
from .runtime import Clock, SystemTokens, TokenSource, WallClock
from .store import Store

# (to_phone, body) -> None; wired to the simulated carrier when one exists.
SmsSink = Callable[[str, str], None]
# (account_id, statement_text) -> None; the out-of-band bank channel.
StatementSink = Callable[[str, str], None]


class Core:
    def __init__(self, config: Config, store: Optional[Store] = None,
                 clock: Optional[Clock] = None, tokens: Optional[TokenSource] = None):
        self.config = config
        self.store = store if store is not None else Store()
        self.clock = clock if clock is not None else WallClock()
        self.tokens = tokens if tokens is not None else SystemTokens()
        # Messages pile up here when no SMS sink is wired (unit tests).
        self.outbox: list[tuple[str, str]] = []
        self.sms_sink: Optional[SmsSink] = None
        self.statement_sink: Optional[StatementSink] = None

    def now(self) -> int:
        return self.clock.now()

    def emit(self, kind: str, subjects: dict | None = None,
             details: dict | None = None) -> int:
        return self.store.append_event(kind, self.now(), subjects, details)

    # -- typed record helpers ---------------------------------------------

    def load(self, cls, rec_id: str):
        """Return (object, version) or None."""
        tag, _ = codec.REGISTRY[cls]
        hit = self.store.get(tag, rec_id)
        if hit is None:
            return None
        doc, version = hit
        return codec.from_doc(tag, doc), version

    def insert(self, obj) -> int:
        tag, rec_id = codec.tag_and_id(obj)
        return self.store.compare_and_set(tag, rec_id, 0, codec.to_doc(obj))

    def update(self, obj, expected_version: int) -> int:
        tag, rec_id = codec.tag_and_id(obj)
        return self.store.compare_and_set(tag, rec_id, expected_version, codec.to_doc(obj))

    def list_all(self, cls):
        tag, _ = codec.REGISTRY[cls]
        return [
            (rec_id, codec.from_doc(tag, doc), version)
            for rec_id, doc, version in self.store.list(tag)
        ]

    # -- frequent lookups ---------------------------------------------------

    def account(self, account_id: str) -> tuple[UserAccount, int]:
        hit = self.load(UserAccount, account_id)
        if hit is None:
            raise UnknownAccount(account_id)
        return hit

    def action(self, action_id: str) -> tuple[SensitiveAction, int]:
        hit = self.load(SensitiveAction, action_id)
        if hit is None:
            raise UnknownAction(action_id)
        return hit

    def devices_of(self, account: UserAccount) -> list[DeviceProfile]:
        devices = []
        for device_id in account.device_ids:
            hit = self.load(DeviceProfile, device_id)
            if hit is not None:
                devices.append(hit[0])
        return devices

    def device_by_cookie(self, cookie: str) -> Optional[DeviceProfile]:
        for _, device, _ in self.list_all(DeviceProfile):
            if device.cookie_token is not None and device.cookie_token == cookie:
                return device
        return None

    # -- delivery ------------------------------------------------------------

    def send_sms(self, to_phone: str, body: str) -> None:
        if self.sms_sink is not None:
            self.sms_sink(to_phone, body)
        else:
            self.outbox.append((to_phone, body))

    def post_statement(self, account_id: str, text: str) -> None:
        if self.statement_sink is not None:
            self.statement_sink(account_id, text)
