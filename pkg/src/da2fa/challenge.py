"""Link-based 2FA challenges: issuance, click handling, device-bound approval.

A challenge message carries two single-use URLs: the approve link runs
device recognition and, on success, opens an approval session bound to the
responding device; the report link denies the action from any device, no
recognition required.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Optional

from .core import Core
from .errors import (
    ActionNotChallengeable,
    Conflict,
    MissingCompletionPayload,
    NoEscalationAvailable,
    PhoneNotOnAccount,
    SessionExpired,
    UnknownSession,
)
from .identity import GateOutcome, gate, recognize
from .model import (
    ActionEvent,
    ActionKind,
    ActionState,
    ApprovalSession,
    AutoRegistrationOffer,
    ChallengeEvent,
    ChallengeRecord,
    ChallengeState,
    ClickContext,
    DeviceProfile,
    Fingerprint,
    OfferState,
    RecognitionDecision,
    SensitiveAction,
    TERMINAL_ACTION_STATES,
    TERMINAL_CHALLENGE_STATES,
    digest_password,
    transition_action,
    transition_challenge,
)
from .store import EventKind

if TYPE_CHECKING:
    from .escalation import EscalationFlows

MAX_SMS_CHARS = 480
URL_TOKEN_BYTES = 16  # 128 bits
SESSION_TOKEN_BYTES = 32

# Marker for tokens that have been resolved once; insertion is the
# linearization point for single-use semantics.
CONSUMED_TAG = "consumed_token"


class ClickOutcomeKind(str, Enum):
    PASSED = "passed"
    ESCALATED = "escalated"
    DENIED = "denied"
    EXPIRED = "expired"
    ALREADY_USED = "already_used"
    UNKNOWN_TOKEN = "unknown_token"


@dataclass
class ClickOutcome:
    kind: ClickOutcomeKind
    challenge_id: Optional[str] = None
    action_id: Optional[str] = None
    decision: Optional[RecognitionDecision] = None
    approval_url: Optional[str] = None
    escalation_id: Optional[str] = None
    escalation_method: Optional[str] = None
    kba_questions: list[str] = field(default_factory=list)
    detail: str = ""


@dataclass
class ApprovalView:
    action_id: str
    kind: ActionKind
    payload_summary: str
    requires_completion_payload: bool
    expires_at: int
    pending_offer_id: Optional[str] = None


class ApprovalDecision(str, Enum):
    APPROVE = "APPROVE"
    DENY = "DENY"


class ChallengeFlows:
    def __init__(self, core: Core):
        self.core = core
        self.escalations: "EscalationFlows" = None  # wired by the service

    # -- shared transition helpers (also used by escalation flows) -------

    def advance_action(self, action_id: str, event: ActionEvent) -> SensitiveAction:
        action, version = self.core.action(action_id)
        updated = transition_action(action, event)
        self.core.update(updated, version)
        self.core.emit(
            EventKind.ACTION_STATE,
            {"action_id": action_id, "account_id": action.account_id},
            {"from": action.state.value, "to": updated.state.value, "event": event.value},
        )
        return updated

    def _advance_challenge(self, ch: ChallengeRecord, version: int,
                           event: ChallengeEvent, **changes) -> tuple[ChallengeRecord, int]:
        updated = transition_challenge(ch, event)
        if changes:
            updated = replace(updated, **changes)
        new_version = self.core.update(updated, version)
        self.core.emit(
            EventKind.CHALLENGE_STATE,
            {"challenge_id": ch.challenge_id, "action_id": ch.action_id},
            {"from": ch.state.value, "to": updated.state.value, "event": event.value},
        )
        return updated, new_version

    def deny_action_if_live(self, action_id: str, reason: str) -> None:
        """Safe-by-default denial used by report clicks; no-op on terminal."""
        action, _ = self.core.action(action_id)
        if action.state not in TERMINAL_ACTION_STATES:
            event = {
                ActionState.CHALLENGE_SENT: ActionEvent.DENIED,
                ActionState.ESCALATING: ActionEvent.ESCALATION_FAILED,
                ActionState.AWAITING_APPROVAL: ActionEvent.DENIED,
            }[action.state]
            self.advance_action(action_id, event)
            self.escalations.abandon_open_sessions(action_id, reason)
        self.core.emit(
            EventKind.FRAUD_SIGNAL,
            {"action_id": action_id, "account_id": action.account_id},
            {"reason": reason},
        )

    # -- issuance ---------------------------------------------------------

    def issue_challenge(self, action_id: str, target_phone: str,
                        is_escalation: bool = False) -> tuple[ChallengeRecord, str]:
        """Create a two-link challenge and hand its text to the SMS layer."""
        core = self.core
        action, _ = core.action(action_id)
        account, _ = core.account(action.account_id)
        if target_phone not in account.phone_numbers:
            raise PhoneNotOnAccount(f"{target_phone} is not on account {account.account_id}")
        expected = ActionState.ESCALATING if is_escalation else ActionState.REQUESTED
        if action.state is not expected:
            raise ActionNotChallengeable(
                f"action {action_id} in {action.state}, needs {expected}"
            )
        now = core.now()
        ch = ChallengeRecord(
            challenge_id=core.tokens.new_id("ch"),
            action_id=action_id,
            account_id=account.account_id,
            target_phone=target_phone,
            approve_token=core.tokens.token(URL_TOKEN_BYTES),
            report_token=core.tokens.token(URL_TOKEN_BYTES),
            state=ChallengeState.ISSUED,
            issued_at=now,
            expires_at=now + core.config.challenge_ttl,
            is_escalation_challenge=is_escalation,
        )
        core.insert(ch)
        core.emit(
            EventKind.CHALLENGE_ISSUED,
            {"challenge_id": ch.challenge_id, "action_id": action_id,
             "account_id": account.account_id},
            {"target_phone": target_phone, "is_escalation": is_escalation},
        )
        if not is_escalation:
            self.advance_action(action_id, ActionEvent.CHALLENGE_ISSUED)
        text = self._challenge_message(action, ch)
        core.send_sms(target_phone, text)
        return ch, text

    def _challenge_message(self, action: SensitiveAction, ch: ChallengeRecord) -> str:
        base = self.core.config.base_url
        prefix = f"{self.core.config.provider_name}: confirm {action.kind.value}: "
        suffix = f". Yes: {base}/c/{ch.approve_token}  Not you? {base}/c/{ch.report_token}"
        budget = max(MAX_SMS_CHARS - len(prefix) - len(suffix), 8)
        summary = action.payload_summary
        if len(summary) > budget:
            summary = summary[: budget - 1] + "…"
        return prefix + summary + suffix

    # -- clicks -----------------------------------------------------------

    def _find_by_token(self, token: str) -> Optional[tuple[ChallengeRecord, int, str]]:
        for _, ch, version in self.core.list_all(ChallengeRecord):
            if ch.approve_token == token:
                return ch, version, "approve"
            if ch.report_token == token:
                return ch, version, "report"
        return None

    def handle_click(self, token: str, presented_cookie: Optional[str],
                     observed: Fingerprint) -> ClickOutcome:
        """Resolve an arriving /c/{token} request to a well-defined outcome.

        The token is consumed on first resolution regardless of outcome;
        concurrent clicks on one token resolve to exactly one winner.
        """
        core = self.core
        now = core.now()
        found = self._find_by_token(token)
        if found is None:
            core.emit(EventKind.CLICK, {}, {"token_kind": "unknown", "outcome": "unknown_token"})
            return ClickOutcome(kind=ClickOutcomeKind.UNKNOWN_TOKEN)
        ch, version, token_kind = found
        subjects = {
            "challenge_id": ch.challenge_id,
            "action_id": ch.action_id,
            "account_id": ch.account_id,
        }

        try:
            core.store.compare_and_set(
                CONSUMED_TAG, token, 0,
                {"challenge_id": ch.challenge_id, "token_kind": token_kind, "at": now},
            )
        except Conflict:
            core.emit(EventKind.CLICK, subjects,
                      {"token_kind": token_kind, "outcome": "already_used"})
            return ClickOutcome(
                kind=ClickOutcomeKind.ALREADY_USED,
                challenge_id=ch.challenge_id, action_id=ch.action_id,
            )

        if ch.state in TERMINAL_CHALLENGE_STATES:
            return self._click_on_resolved(ch, token_kind, subjects)

        if now > ch.expires_at:
            self._advance_challenge(ch, version, ChallengeEvent.TIMED_OUT)
            core.emit(EventKind.CLICK, subjects,
                      {"token_kind": token_kind, "outcome": "expired"})
            return ClickOutcome(
                kind=ClickOutcomeKind.EXPIRED,
                challenge_id=ch.challenge_id, action_id=ch.action_id,
            )

        if token_kind == "report":
            core.emit(EventKind.CLICK, subjects,
                      {"token_kind": "report", "cookie_presented": presented_cookie is not None})
            self._advance_challenge(ch, version, ChallengeEvent.REPORTED)
            self.deny_action_if_live(ch.action_id, reason="report_link_clicked")
            return ClickOutcome(
                kind=ClickOutcomeKind.DENIED,
                challenge_id=ch.challenge_id, action_id=ch.action_id,
                detail="reported",
            )

        core.emit(EventKind.CLICK, subjects,
                  {"token_kind": "approve", "cookie_presented": presented_cookie is not None})
        ch, version = self._advance_challenge(ch, version, ChallengeEvent.CLICKED)

        account, _ = core.account(ch.account_id)
        devices = core.devices_of(account)
        policy = core.config.gate_policy()
        decision = recognize(devices, presented_cookie, observed, core.config.weights, policy)
        core.emit(
            EventKind.VERDICT, subjects,
            {
                "verdict": decision.verdict.value,
                "fingerprint_score": decision.fingerprint_score,
                "cookie_matched": decision.cookie_matched,
                "matched_device_id": decision.matched_device_id,
            },
        )
        action, _ = core.action(ch.action_id)
        outcome = gate(decision, action.risk_level, policy)

        if outcome is GateOutcome.PASS:
            return self._click_pass(ch, version, decision)
        if outcome is GateOutcome.ESCALATE:
            return self._click_escalate(ch, version, decision, presented_cookie, observed)
        return self._click_fail(ch, version, decision)

    def _click_on_resolved(self, ch: ChallengeRecord, token_kind: str,
                           subjects: dict) -> ClickOutcome:
        """First use of a token whose challenge already reached a terminal state."""
        core = self.core
        if ch.state is ChallengeState.EXPIRED:
            core.emit(EventKind.CLICK, subjects,
                      {"token_kind": token_kind, "outcome": "expired"})
            return ClickOutcome(
                kind=ClickOutcomeKind.EXPIRED,
                challenge_id=ch.challenge_id, action_id=ch.action_id,
            )
        if token_kind == "report":
            # The challenge record cannot move to REPORTED any more, but a
            # report is still a deny-worthy fraud signal for the action.
            core.emit(EventKind.CLICK, subjects,
                      {"token_kind": "report", "cookie_presented": False})
            self.deny_action_if_live(ch.action_id, reason="report_link_clicked")
            return ClickOutcome(
                kind=ClickOutcomeKind.DENIED,
                challenge_id=ch.challenge_id, action_id=ch.action_id,
                detail="reported_after_resolution",
            )
        core.emit(EventKind.CLICK, subjects,
                  {"token_kind": token_kind, "outcome": "already_used"})
        return ClickOutcome(
            kind=ClickOutcomeKind.ALREADY_USED,
            challenge_id=ch.challenge_id, action_id=ch.action_id,
        )

    def _click_pass(self, ch: ChallengeRecord, version: int,
                    decision: RecognitionDecision) -> ClickOutcome:
        ch, version = self._advance_challenge(
            ch, version, ChallengeEvent.RECOGNIZED,
            decision=decision, responding_device_id=decision.matched_device_id,
        )
        self._touch_device(decision.matched_device_id)
        if ch.is_escalation_challenge:
            concluded = self.escalations.conclude_for_challenge(ch)
            approval_url = concluded.approval_url if concluded else None
        else:
            self.advance_action(ch.action_id, ActionEvent.CHALLENGE_PASSED)
            session = self.open_approval(ch.action_id, decision.matched_device_id)
            approval_url = self.approval_url(session)
        return ClickOutcome(
            kind=ClickOutcomeKind.PASSED,
            challenge_id=ch.challenge_id, action_id=ch.action_id,
            decision=decision, approval_url=approval_url,
        )

    def _click_escalate(self, ch: ChallengeRecord, version: int,
                        decision: RecognitionDecision, presented_cookie: Optional[str],
                        observed: Fingerprint) -> ClickOutcome:
        core = self.core
        ch, version = self._advance_challenge(
            ch, version, ChallengeEvent.NOT_RECOGNIZED, decision=decision,
        )
        if ch.is_escalation_challenge:
            # Depth is capped at one: a second unrecognized device ends it.
            self.escalations.conclude_for_challenge(ch)
            return ClickOutcome(
                kind=ClickOutcomeKind.DENIED,
                challenge_id=ch.challenge_id, action_id=ch.action_id,
                decision=decision, detail="second_device_not_recognized",
            )
        self.advance_action(ch.action_id, ActionEvent.CHALLENGE_FAILED)
        context = ClickContext(
            context_id=core.tokens.new_id("ctx"),
            challenge_id=ch.challenge_id,
            account_id=ch.account_id,
            presented_cookie=presented_cookie,
            fingerprint=observed,
            decision=decision,
            retained_until=core.now() + core.config.click_context_ttl,
        )
        core.insert(context)
        try:
            session = self.escalations.start_escalation(ch.action_id, context)
        except NoEscalationAvailable:
            return ClickOutcome(
                kind=ClickOutcomeKind.DENIED,
                challenge_id=ch.challenge_id, action_id=ch.action_id,
                decision=decision, detail="no_escalation_available",
            )
        questions = self.escalations.questions_for(session)
        return ClickOutcome(
            kind=ClickOutcomeKind.ESCALATED,
            challenge_id=ch.challenge_id, action_id=ch.action_id,
            decision=decision, escalation_id=session.session_id,
            escalation_method=session.pending_method.value,
            kba_questions=questions,
        )

    def _click_fail(self, ch: ChallengeRecord, version: int,
                    decision: RecognitionDecision) -> ClickOutcome:
        ch, version = self._advance_challenge(
            ch, version, ChallengeEvent.NOT_RECOGNIZED, decision=decision,
        )
        self.core.emit(
            EventKind.FRAUD_SIGNAL,
            {"action_id": ch.action_id, "account_id": ch.account_id},
            {"reason": "recognition_failed_escalation_disabled"},
        )
        if ch.is_escalation_challenge:
            self.escalations.conclude_for_challenge(ch)
        else:
            self.advance_action(ch.action_id, ActionEvent.DENIED)
        return ClickOutcome(
            kind=ClickOutcomeKind.DENIED,
            challenge_id=ch.challenge_id, action_id=ch.action_id,
            decision=decision, detail="gate_fail",
        )

    def _touch_device(self, device_id: Optional[str]) -> None:
        if device_id is None:
            return
        hit = self.core.load(DeviceProfile, device_id)
        if hit is None:
            return
        device, version = hit
        device.last_seen_at = self.core.now()
        self.core.update(device, version)

    # -- approval sessions --------------------------------------------------

    def approval_url(self, session: ApprovalSession) -> str:
        return f"{self.core.config.base_url}/a/{session.session_token}"

    def open_approval(self, action_id: str, device_id: str) -> ApprovalSession:
        core = self.core
        now = core.now()
        session = ApprovalSession(
            session_token=core.tokens.token(SESSION_TOKEN_BYTES),
            action_id=action_id,
            device_id=device_id,
            issued_at=now,
            expires_at=now + core.config.approval_ttl,
        )
        core.insert(session)
        core.emit(
            EventKind.APPROVAL_ISSUED,
            {"action_id": action_id, "device_id": device_id}, {},
        )
        return session

    def _live_session(self, session_token: str) -> tuple[ApprovalSession, int]:
        hit = self.core.load(ApprovalSession, session_token)
        if hit is None:
            raise UnknownSession(session_token)
        session, version = hit
        if session.consumed:
            raise UnknownSession(session_token)  # consumed = removed
        if self.core.now() > session.expires_at:
            raise SessionExpired(session_token)
        return session, version

    def render_approval(self, session_token: str) -> ApprovalView:
        """Read-only view of the action awaiting review; idempotent."""
        session, _ = self._live_session(session_token)
        action, _ = self.core.action(session.action_id)
        return ApprovalView(
            action_id=action.action_id,
            kind=action.kind,
            payload_summary=action.payload_summary,
            requires_completion_payload=action.kind is ActionKind.PASSWORD_RESET,
            expires_at=session.expires_at,
            pending_offer_id=self._pending_offer_id(action.account_id),
        )

    def _pending_offer_id(self, account_id: str) -> Optional[str]:
        now = self.core.now()
        for _, offer, _ in self.core.list_all(AutoRegistrationOffer):
            if (offer.account_id == account_id
                    and offer.state is OfferState.PENDING
                    and now <= offer.expires_at):
                return offer.offer_id
        return None

    def submit_approval(self, session_token: str, decision: ApprovalDecision,
                        completion_payload: Optional[str] = None) -> SensitiveAction:
        """Approve or deny on the responding device; consumes the session."""
        core = self.core
        session, version = self._live_session(session_token)
        action, _ = core.action(session.action_id)
        if (decision is ApprovalDecision.APPROVE
                and action.kind is ActionKind.PASSWORD_RESET
                and not completion_payload):
            raise MissingCompletionPayload("password reset approval needs the new password")

        session.consumed = True
        try:
            core.update(session, version)
        except Conflict as exc:
            raise UnknownSession(session_token) from exc

        if decision is ApprovalDecision.APPROVE:
            updated = self.advance_action(session.action_id, ActionEvent.APPROVED)
            if action.kind is ActionKind.PASSWORD_RESET:
                self._set_password(action.account_id, completion_payload)
            core.emit(
                EventKind.APPROVAL_SUBMITTED,
                {"action_id": action.action_id, "device_id": session.device_id},
                {"decision": "APPROVE"},
            )
        else:
            updated = self.advance_action(session.action_id, ActionEvent.DENIED)
            core.emit(
                EventKind.APPROVAL_SUBMITTED,
                {"action_id": action.action_id, "device_id": session.device_id},
                {"decision": "DENY"},
            )
            core.emit(
                EventKind.FRAUD_SIGNAL,
                {"action_id": action.action_id, "account_id": action.account_id},
                {"reason": "approval_denied"},
            )
        return updated

    def _set_password(self, account_id: str, new_password: str) -> None:
        account, version = self.core.account(account_id)
        account.password_digest = digest_password(new_password)
        self.core.update(account, version)

    # -- expiry ---------------------------------------------------------------

    def expire_sweep(self) -> int:
        """Expire every challenge and action past its deadline; idempotent."""
        core = self.core
        now = core.now()
        expired = 0
        for rec_id, ch, version in core.list_all(ChallengeRecord):
            if ch.state in (ChallengeState.ISSUED, ChallengeState.CLICKED) and now > ch.expires_at:
                ch, version = self._advance_challenge(ch, version, ChallengeEvent.TIMED_OUT)
                expired += 1
                if ch.is_escalation_challenge:
                    self.escalations.conclude_for_challenge(ch)
        sweepable = (ActionState.CHALLENGE_SENT, ActionState.ESCALATING,
                     ActionState.AWAITING_APPROVAL)
        for rec_id, action, _ in core.list_all(SensitiveAction):
            current, _ = core.action(rec_id)  # reload: a conclude above may have moved it
            if current.state in sweepable and now > current.expires_at:
                self.advance_action(rec_id, ActionEvent.TIMED_OUT)
                self.escalations.abandon_open_sessions(rec_id, reason="action_expired")
                expired += 1
        return expired
