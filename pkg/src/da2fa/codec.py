"""Canonical serialization for every stored record type.

One self-describing text format everywhere: JSON with sorted keys and no
insignificant whitespace, so snapshots and event logs are diffable
line-by-line.
"""

from __future__ import annotations

import json
from typing import Any, Optional

from . import model as m


def canonical_json(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _decision_to_doc(d: Optional[m.RecognitionDecision]) -> Optional[dict]:
    if d is None:
        return None
    return {
        "cookie_matched": d.cookie_matched,
        "matched_device_id": d.matched_device_id,
        "fingerprint_score": d.fingerprint_score,
        "verdict": d.verdict.value,
    }


def _decision_from_doc(doc: Optional[dict]) -> Optional[m.RecognitionDecision]:
    if doc is None:
        return None
    return m.RecognitionDecision(
        cookie_matched=doc["cookie_matched"],
        matched_device_id=doc["matched_device_id"],
        fingerprint_score=doc["fingerprint_score"],
        verdict=m.Verdict(doc["verdict"]),
    )


def account_to_doc(a: m.UserAccount) -> dict:
    return {
        "account_id": a.account_id,
        "phone_numbers": list(a.phone_numbers),
        "device_ids": list(a.device_ids),
        "kba_entries": [
            {"question": e.question, "salt": e.salt, "answer_digest": e.answer_digest}
            for e in a.kba_entries
        ],
        "password_digest": a.password_digest,
    }


def account_from_doc(doc: dict) -> m.UserAccount:
    return m.UserAccount(
        account_id=doc["account_id"],
        phone_numbers=list(doc["phone_numbers"]),
        device_ids=list(doc["device_ids"]),
        kba_entries=[
            m.KbaEntry(e["question"], e["salt"], e["answer_digest"])
            for e in doc["kba_entries"]
        ],
        password_digest=doc["password_digest"],
    )


def device_to_doc(d: m.DeviceProfile) -> dict:
    return {
        "device_id": d.device_id,
        "owner_account_id": d.owner_account_id,
        "cookie_token": d.cookie_token,
        "fingerprint": d.fingerprint.to_doc(),
        "trust_tier": d.trust_tier.value,
        "registered_at": d.registered_at,
        "last_seen_at": d.last_seen_at,
    }


def device_from_doc(doc: dict) -> m.DeviceProfile:
    return m.DeviceProfile(
        device_id=doc["device_id"],
        owner_account_id=doc["owner_account_id"],
        cookie_token=doc["cookie_token"],
        fingerprint=m.Fingerprint(dict(doc["fingerprint"])),
        trust_tier=m.TrustTier(doc["trust_tier"]),
        registered_at=doc["registered_at"],
        last_seen_at=doc["last_seen_at"],
    )


def action_to_doc(a: m.SensitiveAction) -> dict:
    return {
        "action_id": a.action_id,
        "account_id": a.account_id,
        "kind": a.kind.value,
        "risk_level": a.risk_level.value,
        "payload_summary": a.payload_summary,
        "state": a.state.value,
        "created_at": a.created_at,
        "expires_at": a.expires_at,
    }


def action_from_doc(doc: dict) -> m.SensitiveAction:
    return m.SensitiveAction(
        action_id=doc["action_id"],
        account_id=doc["account_id"],
        kind=m.ActionKind(doc["kind"]),
        risk_level=m.RiskLevel(doc["risk_level"]),
        payload_summary=doc["payload_summary"],
        state=m.ActionState(doc["state"]),
        created_at=doc["created_at"],
        expires_at=doc["expires_at"],
    )


def challenge_to_doc(c: m.ChallengeRecord) -> dict:
    return {
        "challenge_id": c.challenge_id,
        "action_id": c.action_id,
        "account_id": c.account_id,
        "target_phone": c.target_phone,
        "approve_token": c.approve_token,
        "report_token": c.report_token,
        "state": c.state.value,
        "issued_at": c.issued_at,
        "expires_at": c.expires_at,
        "decision": _decision_to_doc(c.decision),
        "responding_device_id": c.responding_device_id,
        "is_escalation_challenge": c.is_escalation_challenge,
    }


def challenge_from_doc(doc: dict) -> m.ChallengeRecord:
    return m.ChallengeRecord(
        challenge_id=doc["challenge_id"],
        action_id=doc["action_id"],
        account_id=doc["account_id"],
        target_phone=doc["target_phone"],
        approve_token=doc["approve_token"],
        report_token=doc["report_token"],
        state=m.ChallengeState(doc["state"]),
        issued_at=doc["issued_at"],
        expires_at=doc["expires_at"],
        decision=_decision_from_doc(doc["decision"]),
        responding_device_id=doc["responding_device_id"],
        is_escalation_challenge=doc["is_escalation_challenge"],
    )


def approval_to_doc(s: m.ApprovalSession) -> dict:
    return {
        "session_token": s.session_token,
        "action_id": s.action_id,
        "device_id": s.device_id,
        "issued_at": s.issued_at,
        "expires_at": s.expires_at,
        "consumed": s.consumed,
    }


def approval_from_doc(doc: dict) -> m.ApprovalSession:
    return m.ApprovalSession(
        session_token=doc["session_token"],
        action_id=doc["action_id"],
        device_id=doc["device_id"],
        issued_at=doc["issued_at"],
        expires_at=doc["expires_at"],
        consumed=doc["consumed"],
    )


def escalation_to_doc(s: m.EscalationSession) -> dict:
    return {
        "session_id": s.session_id,
        "action_id": s.action_id,
        "account_id": s.account_id,
        "pending_method": s.pending_method.value,
        "attempts_remaining": s.attempts_remaining,
        "state": s.state.value,
        "click_context_id": s.click_context_id,
        "question_indexes": list(s.question_indexes),
        "proof_code": s.proof_code,
        "proof_expires_at": s.proof_expires_at,
    }


def escalation_from_doc(doc: dict) -> m.EscalationSession:
    return m.EscalationSession(
        session_id=doc["session_id"],
        action_id=doc["action_id"],
        account_id=doc["account_id"],
        pending_method=m.EscalationMethod(doc["pending_method"]),
        attempts_remaining=doc["attempts_remaining"],
        state=m.EscalationState(doc["state"]),
        click_context_id=doc["click_context_id"],
        question_indexes=list(doc["question_indexes"]),
        proof_code=doc["proof_code"],
        proof_expires_at=doc["proof_expires_at"],
    )


def context_to_doc(c: m.ClickContext) -> dict:
    return {
        "context_id": c.context_id,
        "challenge_id": c.challenge_id,
        "account_id": c.account_id,
        "presented_cookie": c.presented_cookie,
        "fingerprint": c.fingerprint.to_doc(),
        "decision": _decision_to_doc(c.decision),
        "retained_until": c.retained_until,
    }


def context_from_doc(doc: dict) -> m.ClickContext:
    return m.ClickContext(
        context_id=doc["context_id"],
        challenge_id=doc["challenge_id"],
        account_id=doc["account_id"],
        presented_cookie=doc["presented_cookie"],
        fingerprint=m.Fingerprint(dict(doc["fingerprint"])),
        decision=_decision_from_doc(doc["decision"]),
        retained_until=doc["retained_until"],
    )


def ticket_to_doc(t: m.EnrollmentTicket) -> dict:
    return {
        "reg_token": t.reg_token,
        "account_id": t.account_id,
        "issued_at": t.issued_at,
        "expires_at": t.expires_at,
        "state": t.state.value,
    }


def ticket_from_doc(doc: dict) -> m.EnrollmentTicket:
    return m.EnrollmentTicket(
        reg_token=doc["reg_token"],
        account_id=doc["account_id"],
        issued_at=doc["issued_at"],
        expires_at=doc["expires_at"],
        state=m.TicketState(doc["state"]),
    )


def offer_to_doc(o: m.AutoRegistrationOffer) -> dict:
    return {
        "offer_id": o.offer_id,
        "account_id": o.account_id,
        "presented_cookie": o.presented_cookie,
        "fingerprint": o.fingerprint.to_doc(),
        "created_at": o.created_at,
        "expires_at": o.expires_at,
        "state": o.state.value,
    }


def offer_from_doc(doc: dict) -> m.AutoRegistrationOffer:
    return m.AutoRegistrationOffer(
        offer_id=doc["offer_id"],
        account_id=doc["account_id"],
        presented_cookie=doc["presented_cookie"],
        fingerprint=m.Fingerprint(dict(doc["fingerprint"])),
        created_at=doc["created_at"],
        expires_at=doc["expires_at"],
        state=m.OfferState(doc["state"]),
    )


def claim_to_doc(c: m.ClaimTicket) -> dict:
    return {
        "claim_token": c.claim_token,
        "device_id": c.device_id,
        "issued_at": c.issued_at,
        "expires_at": c.expires_at,
        "used": c.used,
    }


def claim_from_doc(doc: dict) -> m.ClaimTicket:
    return m.ClaimTicket(
        claim_token=doc["claim_token"],
        device_id=doc["device_id"],
        issued_at=doc["issued_at"],
        expires_at=doc["expires_at"],
        used=doc["used"],
    )


# (type tag, id field, to_doc, from_doc) for every persisted record type.
REGISTRY: dict[type, tuple[str, str]] = {
    m.UserAccount: ("account", "account_id"),
    m.DeviceProfile: ("device", "device_id"),
    m.SensitiveAction: ("action", "action_id"),
    m.ChallengeRecord: ("challenge", "challenge_id"),
    m.ApprovalSession: ("approval_session", "session_token"),
    m.EscalationSession: ("escalation_session", "session_id"),
    m.ClickContext: ("click_context", "context_id"),
    m.EnrollmentTicket: ("enrollment_ticket", "reg_token"),
    m.AutoRegistrationOffer: ("auto_offer", "offer_id"),
    m.ClaimTicket: ("claim", "claim_token"),
}

_TO_DOC = {
    m.UserAccount: account_to_doc,
    m.DeviceProfile: device_to_doc,
    m.SensitiveAction: action_to_doc,
    m.ChallengeRecord: challenge_to_doc,
    m.ApprovalSession: approval_to_doc,
    m.EscalationSession: escalation_to_doc,
    m.ClickContext: context_to_doc,
    m.EnrollmentTicket: ticket_to_doc,
    m.AutoRegistrationOffer: offer_to_doc,
    m.ClaimTicket: claim_to_doc,
}

_FROM_DOC = {
    "account": account_from_doc,
    "device": device_from_doc,
    "action": action_from_doc,
    "challenge": challenge_from_doc,
    "approval_session": approval_from_doc,
    "escalation_session": escalation_from_doc,
    "click_context": context_from_doc,
    "enrollment_ticket": ticket_from_doc,
    "auto_offer": offer_from_doc,
    "claim": claim_from_doc,
}


def tag_and_id(obj) -> tuple[str, str]:
    tag, id_field = REGISTRY[type(obj)]
    return tag, getattr(obj, id_field)


def to_doc(obj) -> dict:
    return _TO_DOC[type(obj)](obj)


def from_doc(tag: str, doc: dict):
    return _FROM_DOC[tag](doc)
