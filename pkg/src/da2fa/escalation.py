"""Escalation for unrecognized devices: second-device challenge, KBA,
or resource proof, tried in that fixed order.

Depth is capped at one: an escalation challenge that itself fails
recognition never spawns another escalation session. A click that cookie-
matched a FRIEND device always escalates into KBA, so a friend's device
can only carry an action together with account knowledge.
"""

from __future__ import annotations

import hmac
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Optional

from .core import Core
from .errors import (
    ActionNotChallengeable,
    NoClickContext,
    NoEscalationAvailable,
    SessionClosed,
    WrongMethod,
)
from .model import (
    ActionEvent,
    ActionState,
    ChallengeRecord,
    ChallengeState,
    ClickContext,
    DeviceProfile,
    EscalationMethod,
    EscalationSession,
    EscalationState,
    TERMINAL_ACTION_STATES,
    TrustTier,
)
from .store import EventKind

if TYPE_CHECKING:
    from .challenge import ChallengeFlows
    from .registration import RegistrationFlows

PROOF_CODE_DIGITS = 8


class EscalationResult(str, Enum):
    PASSED = "PASSED"
    RETRY = "RETRY"
    FAILED = "FAILED"


@dataclass
class EscalationOutcome:
    result: EscalationResult
    attempts_remaining: Optional[int] = None
    approval_url: Optional[str] = None
    offer_id: Optional[str] = None


class EscalationFlows:
    def __init__(self, core: Core):
        self.core = core
        self.challenges: "ChallengeFlows" = None  # wired by the service
        self.registration: "RegistrationFlows" = None

    # -- session lifecycle -------------------------------------------------

    def start_escalation(self, action_id: str, context: ClickContext) -> EscalationSession:
        """Open an escalation session using the first available method.

        Raises NoEscalationAvailable after denying the action when the
        account offers nothing to escalate to.
        """
        core = self.core
        action, _ = core.action(action_id)
        if action.state is not ActionState.ESCALATING:
            raise ActionNotChallengeable(f"action {action_id} in {action.state}")
        account, _ = core.account(action.account_id)

        method: Optional[EscalationMethod] = None
        alt_phone: Optional[str] = None
        kba_ready = len(account.kba_entries) >= core.config.kba_question_count

        if self._clicked_from_friend_device(context):
            # §-trusted-friend rule: the friend's cookie identifies the
            # device, but only account knowledge may carry the action.
            if kba_ready:
                method = EscalationMethod.KBA
        else:
            alt_phone = self._alternate_phone(account.phone_numbers, context)
            if alt_phone is not None:
                method = EscalationMethod.SECOND_DEVICE
            elif kba_ready:
                method = EscalationMethod.KBA
            elif core.config.resource_proof_enabled:
                method = EscalationMethod.RESOURCE_PROOF

        if method is None:
            self.challenges.advance_action(action_id, ActionEvent.ESCALATION_FAILED)
            raise NoEscalationAvailable(f"account {account.account_id} has no escalation path")

        session = EscalationSession(
            session_id=core.tokens.new_id("esc"),
            action_id=action_id,
            account_id=account.account_id,
            pending_method=method,
            attempts_remaining=core.config.kba_attempts,
            state=EscalationState.OPEN,
            click_context_id=context.context_id,
        )
        if method is EscalationMethod.KBA:
            session.question_indexes = list(range(core.config.kba_question_count))
        if method is EscalationMethod.RESOURCE_PROOF:
            session.proof_code = core.tokens.digits(PROOF_CODE_DIGITS)
            session.proof_expires_at = core.now() + core.config.proof_ttl
        core.insert(session)
        core.emit(
            EventKind.ESCALATION_STARTED,
            {"escalation_id": session.session_id, "action_id": action_id,
             "account_id": account.account_id},
            {"method": method.value},
        )
        if method is EscalationMethod.SECOND_DEVICE:
            self.challenges.issue_challenge(action_id, alt_phone, is_escalation=True)
        if method is EscalationMethod.RESOURCE_PROOF:
            statement = (
                f"Deposit $0.01 ref {session.proof_code} "
                f"({core.config.provider_name} device check)"
            )
            core.emit(
                EventKind.STATEMENT_POSTED,
                {"account_id": account.account_id}, {"text": statement},
            )
            core.post_statement(account.account_id, statement)
        return session

    def _clicked_from_friend_device(self, context: ClickContext) -> bool:
        decision = context.decision
        if not (decision.cookie_matched and decision.matched_device_id):
            return False
        hit = self.core.load(DeviceProfile, decision.matched_device_id)
        return hit is not None and hit[0].trust_tier is TrustTier.FRIEND

    def _alternate_phone(self, phones: list[str], context: ClickContext) -> Optional[str]:
        original = self.core.load(ChallengeRecord, context.challenge_id)
        origin_phone = original[0].target_phone if original else None
        for phone in phones:
            if phone != origin_phone:
                return phone
        return None

    def _open_session(self, session_id: str,
                      method: EscalationMethod) -> tuple[EscalationSession, int]:
        hit = self.core.load(EscalationSession, session_id)
        if hit is None:
            raise SessionClosed(session_id)
        session, version = hit
        if session.pending_method is not method:
            raise WrongMethod(f"session pends {session.pending_method}, not {method}")
        if session.state is not EscalationState.OPEN:
            raise SessionClosed(session_id)
        return session, version

    def _close(self, session: EscalationSession, version: int,
               state: EscalationState, reason: str) -> None:
        session.state = state
        self.core.update(session, version)
        self.core.emit(
            EventKind.ESCALATION_RESULT,
            {"escalation_id": session.session_id, "action_id": session.action_id},
            {"method": session.pending_method.value, "result": state.value,
             "reason": reason},
        )

    def _after_pass(self, session: EscalationSession, version: int,
                    device_id: str, reason: str) -> EscalationOutcome:
        self._close(session, version, EscalationState.PASSED, reason)
        self.challenges.advance_action(session.action_id, ActionEvent.ESCALATION_PASSED)
        approval = self.challenges.open_approval(session.action_id, device_id)
        offer_id = None
        try:
            offer = self.registration.offer_auto_registration(session.session_id)
            offer_id = offer.offer_id
        except NoClickContext:
            pass
        return EscalationOutcome(
            result=EscalationResult.PASSED,
            approval_url=self.challenges.approval_url(approval),
            offer_id=offer_id,
        )

    def _fail_and_deny(self, session: EscalationSession, version: int,
                       reason: str) -> EscalationOutcome:
        self._close(session, version, EscalationState.FAILED, reason)
        action, _ = self.core.action(session.action_id)
        if action.state not in TERMINAL_ACTION_STATES:
            self.challenges.advance_action(session.action_id, ActionEvent.ESCALATION_FAILED)
        self.core.emit(
            EventKind.FRAUD_SIGNAL,
            {"action_id": session.action_id, "account_id": session.account_id},
            {"reason": reason},
        )
        return EscalationOutcome(result=EscalationResult.FAILED, attempts_remaining=0)

    def abandon_open_sessions(self, action_id: str, reason: str) -> None:
        """Close any OPEN session for an action that just went terminal."""
        for _, session, version in self.core.list_all(EscalationSession):
            if session.action_id == action_id and session.state is EscalationState.OPEN:
                self._close(session, version, EscalationState.FAILED, reason)

    # -- knowledge-based authentication -------------------------------------

    def questions_for(self, session: EscalationSession) -> list[str]:
        if session.pending_method is not EscalationMethod.KBA:
            return []
        account, _ = self.core.account(session.account_id)
        return [account.kba_entries[i].question for i in session.question_indexes]

    def answer_kba(self, session_id: str,
                   answers: list[tuple[int, str]]) -> EscalationOutcome:
        """Check k-of-n answers; exhausted attempts deny the action."""
        core = self.core
        session, version = self._open_session(session_id, EscalationMethod.KBA)
        account, _ = core.account(session.account_id)

        seen: dict[int, str] = {}
        for index, answer in answers:
            if index in session.question_indexes and index not in seen:
                seen[index] = answer
        correct = sum(
            1 for index, answer in seen.items()
            if account.kba_entries[index].matches(answer)
        )

        if correct >= core.config.kba_required_matches:
            device_id = self._binding_device_id(session)
            return self._after_pass(session, version, device_id, reason="kba_passed")

        session.attempts_remaining -= 1
        if session.attempts_remaining <= 0:
            return self._fail_and_deny(session, version, reason="kba_exhausted")
        core.update(session, version)
        core.emit(
            EventKind.ESCALATION_RESULT,
            {"escalation_id": session_id, "action_id": session.action_id},
            {"method": "KBA", "result": "RETRY", "correct": correct,
             "attempts_remaining": session.attempts_remaining},
        )
        return EscalationOutcome(
            result=EscalationResult.RETRY,
            attempts_remaining=session.attempts_remaining,
        )

    # -- resource proof -------------------------------------------------------

    def verify_resource_proof(self, session_id: str, presented_code: str) -> EscalationOutcome:
        """Single-attempt, constant-time check of the statement code."""
        session, version = self._open_session(session_id, EscalationMethod.RESOURCE_PROOF)
        now = self.core.now()
        fresh = session.proof_expires_at is not None and now <= session.proof_expires_at
        ok = fresh and hmac.compare_digest(presented_code, session.proof_code or "")
        if ok:
            device_id = self._binding_device_id(session)
            return self._after_pass(session, version, device_id, reason="resource_proof_passed")
        return self._fail_and_deny(session, version, reason="resource_proof_failed")

    # -- second device ---------------------------------------------------------

    def conclude_second_device(self, session_id: str,
                               escalation_challenge: ChallengeRecord) -> EscalationOutcome:
        """Settle the session from the escalation challenge's terminal state."""
        session, version = self._open_session(session_id, EscalationMethod.SECOND_DEVICE)
        state = escalation_challenge.state
        if state is ChallengeState.PASSED:
            return self._after_pass(
                session, version,
                escalation_challenge.responding_device_id,
                reason="second_device_passed",
            )
        if state is ChallengeState.EXPIRED:
            self._close(session, version, EscalationState.FAILED, reason="second_device_expired")
            action, _ = self.core.action(session.action_id)
            if action.state not in TERMINAL_ACTION_STATES:
                self.challenges.advance_action(session.action_id, ActionEvent.TIMED_OUT)
            return EscalationOutcome(result=EscalationResult.FAILED)
        # ESCALATED or REPORTED: the second device did not check out either.
        return self._fail_and_deny(session, version, reason="second_device_failed")

    def conclude_for_challenge(self, ch: ChallengeRecord) -> Optional[EscalationOutcome]:
        """Locate the open SECOND_DEVICE session behind an escalation challenge."""
        for _, session, _ in self.core.list_all(EscalationSession):
            if (session.action_id == ch.action_id
                    and session.state is EscalationState.OPEN
                    and session.pending_method is EscalationMethod.SECOND_DEVICE):
                return self.conclude_second_device(session.session_id, ch)
        raise WrongMethod(f"no open second-device session for action {ch.action_id}")

    # -- binding ---------------------------------------------------------------

    def _binding_device_id(self, session: EscalationSession) -> str:
        """Device the approval gets bound to after a KBA or proof pass.

        A friend's cookie-matched device is a real profile; anything else is
        the not-yet-registered clicking device, named by its click context so
        auto-registration can later formalize it.
        """
        if session.click_context_id is not None:
            hit = self.core.load(ClickContext, session.click_context_id)
            if hit is not None:
                context = hit[0]
                if context.decision.cookie_matched and context.decision.matched_device_id:
                    return context.decision.matched_device_id
                return f"unregistered:{context.context_id}"
        return "unregistered:unknown"
