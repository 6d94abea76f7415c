"""Service configuration.

A single canonical-JSON file holds everything an operator can tune:
recognition weights, gate thresholds, TTLs, KBA fixtures, and the listen
address. The DA2FA_CONFIG environment variable points at it.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .identity import GatePolicy, WeightTable

ENV_VAR = "DA2FA_CONFIG"

DEFAULT_KBA_FIXTURES = [
    ("First concert you attended?", "the kinks"),
    ("Street you grew up on?", "mulberry"),
    ("Name of your first pet?", "biscuit"),
]


@dataclass
class Config:
    provider_name: str = "DemoBank"
    base_url: str = "http://127.0.0.1:8470"
    listen_host: str = "127.0.0.1"
    listen_port: int = 8470
    admin_token: str = "local-admin"
    cookie_name: str = "da2fa_device"

    # Recognition.
    weights: WeightTable = field(default_factory=WeightTable.equal)
    tau_recognized: float = 0.9
    tau_uncertain: float = 0.6
    escalation_enabled: bool = True

    # Lifetimes, in seconds.
    challenge_ttl: int = 600
    action_ttl: int = 1800
    approval_ttl: int = 300
    enrollment_ttl: int = 300
    offer_ttl: int = 86400
    claim_ttl: int = 86400
    click_context_ttl: int = 1800
    proof_ttl: int = 900

    # Escalation policy.
    kba_question_count: int = 3
    kba_required_matches: int = 2
    kba_attempts: int = 3
    resource_proof_enabled: bool = True

    # Demo question/answer pairs used when seeding accounts.
    kba_fixtures: list[tuple[str, str]] = field(
        default_factory=lambda: list(DEFAULT_KBA_FIXTURES)
    )

    def gate_policy(self) -> GatePolicy:
        return GatePolicy.default(
            tau_recognized=self.tau_recognized,
            tau_uncertain=self.tau_uncertain,
            escalation_enabled=self.escalation_enabled,
        )

    def to_doc(self) -> dict:
        return {
            "provider_name": self.provider_name,
            "base_url": self.base_url,
            "listen_host": self.listen_host,
            "listen_port": self.listen_port,
            "admin_token": self.admin_token,
            "cookie_name": self.cookie_name,
            "weights": dict(self.weights.weights),
            "weights_version": self.weights.version,
            "tau_recognized": self.tau_recognized,
            "tau_uncertain": self.tau_uncertain,
            "escalation_enabled": self.escalation_enabled,
            "challenge_ttl": self.challenge_ttl,
            "action_ttl": self.action_ttl,
            "approval_ttl": self.approval_ttl,
            "enrollment_ttl": self.enrollment_ttl,
            "offer_ttl": self.offer_ttl,
            "claim_ttl": self.claim_ttl,
            "click_context_ttl": self.click_context_ttl,
            "proof_ttl": self.proof_ttl,
            "kba_question_count": self.kba_question_count,
            "kba_required_matches": self.kba_required_matches,
            "kba_attempts": self.kba_attempts,
            "resource_proof_enabled": self.resource_proof_enabled,
            "kba_fixtures": [list(pair) for pair in self.kba_fixtures],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "Config":
        cfg = cls()
        for name in (
            "provider_name", "base_url", "listen_host", "listen_port",
            "admin_token", "cookie_name", "tau_recognized", "tau_uncertain",
            "escalation_enabled", "challenge_ttl", "action_ttl", "approval_ttl",
            "enrollment_ttl", "offer_ttl", "claim_ttl", "click_context_ttl",
            "proof_ttl", "kba_question_count", "kba_required_matches",
            "kba_attempts", "resource_proof_enabled",
        ):
            if name in doc:
                setattr(cfg, name, doc[name])
        if "weights" in doc:
            cfg.weights = WeightTable(
                weights=dict(doc["weights"]),
                version=doc.get("weights_version", 1),
            )
        if "kba_fixtures" in doc:
            cfg.kba_fixtures = [(q, a) for q, a in doc["kba_fixtures"]]
        cfg.gate_policy()  # validate thresholds eagerly
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        return cls.from_doc(json.loads(Path(path).read_text()))

    @classmethod
    def from_env(cls) -> "Config":
        path = os.environ.get(ENV_VAR)
        return cls.load(path) if path else cls()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_doc(), sort_keys=True, indent=2) + "\n")
