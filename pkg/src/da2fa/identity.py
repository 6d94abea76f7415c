"""Device identity: cookie issuance, fingerprint scoring, and the
recognition verdict plus its risk gate.

The cookie is the strong factor. A read-only fingerprint alone can raise
a verdict to UNCERTAIN but never to RECOGNIZED, because fingerprints are
spoofable while a high-entropy cookie is not guessable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from . import codec
from .errors import EmptyStoredFingerprint, TokenAlreadyIssued, UnknownDevice
from .model import (
    CANONICAL_FINGERPRINT_KEYS,
    DeviceProfile,
    Fingerprint,
    RecognitionDecision,
    RiskLevel,
    TrustTier,
    Verdict,
)
from .runtime import TokenSource
from .store import Store

COOKIE_TOKEN_BYTES = 32  # 256 bits


class GateOutcome(str, Enum):
    PASS = "PASS"
    ESCALATE = "ESCALATE"
    FAIL = "FAIL"


@dataclass
class WeightTable:
    """Per-attribute weights for the similarity score."""

    weights: dict[str, float]
    version: int = 1

    def __post_init__(self):
        missing = [k for k in CANONICAL_FINGERPRINT_KEYS if k not in self.weights]
        if missing:
            raise ValueError(f"weight table missing attributes: {missing}")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be non-negative")
        if not any(w > 0 for w in self.weights.values()):
            raise ValueError("at least one weight must be positive")

    @classmethod
    def equal(cls, version: int = 1) -> "WeightTable":
        return cls(weights={k: 1.0 for k in CANONICAL_FINGERPRINT_KEYS}, version=version)


@dataclass
class GatePolicy:
    """Thresholds plus the (verdict, risk) -> outcome decision table."""

    tau_recognized: float
    tau_uncertain: float
    rules: dict[tuple[Verdict, RiskLevel], GateOutcome] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.tau_recognized <= 1.0:
            raise ValueError("tau_recognized must be in (0, 1]")
        if not 0.0 < self.tau_uncertain < self.tau_recognized:
            raise ValueError("tau_uncertain must be in (0, tau_recognized)")
        for verdict in Verdict:
            for risk in RiskLevel:
                if (verdict, risk) not in self.rules:
                    raise ValueError(f"gate policy missing rule for ({verdict}, {risk})")

    @classmethod
    def default(cls, tau_recognized: float = 0.9, tau_uncertain: float = 0.6,
                escalation_enabled: bool = True) -> "GatePolicy":
        fallback = GateOutcome.ESCALATE if escalation_enabled else GateOutcome.FAIL
        rules = {
            (Verdict.RECOGNIZED, RiskLevel.LOW): GateOutcome.PASS,
            (Verdict.RECOGNIZED, RiskLevel.HIGH): GateOutcome.PASS,
            (Verdict.UNCERTAIN, RiskLevel.LOW): fallback,
            (Verdict.UNCERTAIN, RiskLevel.HIGH): fallback,
            (Verdict.UNRECOGNIZED, RiskLevel.LOW): fallback,
            (Verdict.UNRECOGNIZED, RiskLevel.HIGH): fallback,
        }
        return cls(tau_recognized=tau_recognized, tau_uncertain=tau_uncertain, rules=rules)


def _norm(value: str) -> str:
    return value.strip().casefold()


def fingerprint_similarity(observed: Fingerprint, stored: Fingerprint,
                           table: WeightTable) -> float:
    """Weighted exact-match ratio over the attributes the stored profile has.

    Attributes present only in the observed fingerprint are ignored; values
    compare case-insensitively after trimming. Raises EmptyStoredFingerprint
    when the denominator would be zero.
    """
    numerator = 0.0
    denominator = 0.0
    for name, stored_value in stored.attributes.items():
        weight = table.weights[name]
        denominator += weight
        observed_value = observed.attributes.get(name)
        if observed_value is not None and _norm(observed_value) == _norm(stored_value):
            numerator += weight
    if denominator == 0.0:
        raise EmptyStoredFingerprint("stored fingerprint carries no weighted attributes")
    return numerator / denominator


def _similarity_or_zero(observed: Fingerprint, stored: Fingerprint,
                        table: WeightTable) -> float:
    try:
        return fingerprint_similarity(observed, stored, table)
    except EmptyStoredFingerprint:
        return 0.0


def recognize(devices: list[DeviceProfile], presented_cookie: Optional[str],
              observed: Fingerprint, table: WeightTable,
              policy: GatePolicy) -> RecognitionDecision:
    """Match a click's evidence against an account's registered devices.

    Cookie match: verdict RECOGNIZED when the fingerprint still clears
    tau_uncertain, else UNCERTAIN (possible cookie theft). No cookie:
    fingerprint similarity against OWNER devices caps out at UNCERTAIN.
    FRIEND devices match only by cookie and never exceed UNCERTAIN.
    """
    if presented_cookie is not None:
        for device in devices:
            if device.cookie_token is not None and device.cookie_token == presented_cookie:
                score = _similarity_or_zero(observed, device.fingerprint, table)
                if device.trust_tier is TrustTier.FRIEND:
                    verdict = Verdict.UNCERTAIN
                else:
                    verdict = (
                        Verdict.RECOGNIZED
                        if score >= policy.tau_uncertain
                        else Verdict.UNCERTAIN
                    )
                return RecognitionDecision(
                    cookie_matched=True,
                    matched_device_id=device.device_id,
                    fingerprint_score=score,
                    verdict=verdict,
                )

    best = 0.0
    for device in devices:
        if device.trust_tier is not TrustTier.OWNER:
            continue
        best = max(best, _similarity_or_zero(observed, device.fingerprint, table))
    verdict = Verdict.UNCERTAIN if best >= policy.tau_recognized else Verdict.UNRECOGNIZED
    return RecognitionDecision(
        cookie_matched=False,
        matched_device_id=None,
        fingerprint_score=best,
        verdict=verdict,
    )


def gate(decision: RecognitionDecision, risk: RiskLevel,
         policy: GatePolicy) -> GateOutcome:
    """Pure lookup of the policy's (verdict, risk) rule."""
    return policy.rules[(decision.verdict, risk)]


def issue_cookie_token(store: Store, tokens: TokenSource, device_id: str,
                       rotate: bool = False) -> str:
    """Mint a fresh cookie token and record it on the device profile.

    Refuses to clobber a live token unless rotation is explicit; the old
    token dies with the overwrite since lookups only see profiles.
    """
    hit = store.get("device", device_id)
    if hit is None:
        raise UnknownDevice(device_id)
    doc, version = hit
    device = codec.device_from_doc(doc)
    if device.cookie_token is not None and not rotate:
        raise TokenAlreadyIssued(f"device {device_id} already has a live cookie")
    token = tokens.token(COOKIE_TOKEN_BYTES)
    device.cookie_token = token
    store.compare_and_set("device", device_id, version, codec.device_to_doc(device))
    return token
