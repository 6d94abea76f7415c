"""Enrollment tickets, QR completion, auto-registration offers, claims,
and friend-device registration."""

from __future__ import annotations

import pytest

from da2fa.errors import (
    EmptyFingerprint,
    EscalationNotPassed,
    NoClickContext,
    NotRecognizedSession,
    OfferExpired,
    TicketExpired,
    TicketUsed,
    UnknownClaim,
    UnknownOffer,
    UnknownTicket,
)
from da2fa.fixtures import fingerprint, kba_answers
from da2fa.model import (
    ClickContext,
    EscalationMethod,
    EscalationSession,
    EscalationState,
    Fingerprint,
    RecognitionDecision,
    TrustTier,
    Verdict,
)
from da2fa.store import EventKind



def recognized_credentials(world):
    cookie = world.sim.device("alice_phone").cookie_jar[world.sim.service_domain]
    return cookie, fingerprint("victim_phone")


def begin(world):
    cookie, observed = recognized_credentials(world)
    return world.service.registration.begin_enrollment("alice", cookie, observed)


# -- enrollment ----------------------------------------------------------------


def test_enrollment_urls_are_unique_per_issuance(world):
    _, first = begin(world)
    world.clock.advance(1)
    _, second = begin(world)
    assert first != second


def test_unrecognized_requester_cannot_enroll(world):
    with pytest.raises(NotRecognizedSession):
        world.service.registration.begin_enrollment(
            "alice", None, fingerprint("attacker"),
        )


def test_completion_registers_owner_device_with_cookie(world):
    ticket, _ = begin(world)
    device, cookie = world.service.registration.complete_enrollment(
        ticket.reg_token, fingerprint("new_phone"),
    )
    assert device.trust_tier is TrustTier.OWNER
    assert cookie and device.cookie_token == cookie
    account, _ = world.core.account("alice")
    assert device.device_id in account.device_ids
    assert any(e.details.get("method") == "qr_enrollment"
               for e in world.store.events() if e.kind == EventKind.DEVICE_REGISTERED)


def test_second_completion_is_ticket_used(world):
    ticket, _ = begin(world)
    world.service.registration.complete_enrollment(ticket.reg_token, fingerprint("new_phone"))
    with pytest.raises(TicketUsed):
        world.service.registration.complete_enrollment(
            ticket.reg_token, fingerprint("new_phone"),
        )


def test_stale_ticket_is_expired(world):
    ticket, _ = begin(world)
    world.clock.advance(301)
    with pytest.raises(TicketExpired):
        world.service.registration.complete_enrollment(
            ticket.reg_token, fingerprint("new_phone"),
        )


def test_empty_fingerprint_rejected(world):
    ticket, _ = begin(world)
    with pytest.raises(EmptyFingerprint):
        world.service.registration.complete_enrollment(ticket.reg_token, Fingerprint({}))


def test_unknown_ticket(world):
    with pytest.raises(UnknownTicket):
        world.service.registration.complete_enrollment("bogus", fingerprint("new_phone"))


def test_enrollment_tokens_and_cookies_never_collide(world):
    reg_tokens, cookies = set(), set()
    for _ in range(50):
        ticket, _ = begin(world)
        device, cookie = world.service.registration.complete_enrollment(
            ticket.reg_token, fingerprint("new_phone"),
        )
        reg_tokens.add(ticket.reg_token)
        cookies.add(cookie)
    assert len(reg_tokens) == 50 and len(cookies) == 50


# -- auto-registration --------------------------------------------------------------


def escalate_and_pass_kba(world):
    """Unrecognized click, then the legitimate user passes KBA."""
    action, ch, _ = world.service.create_action("alice", "PASSWORD_RESET", "reset")
    outcome = world.service.challenges.handle_click(
        ch.approve_token, None, fingerprint("new_phone"),
    )
    right = kba_answers(world.service)
    result = world.service.escalations.answer_kba(
        outcome.escalation_id, list(enumerate(right)),
    )
    return action, result


def test_offer_created_after_escalation_pass(world):
    _, result = escalate_and_pass_kba(world)
    assert result.offer_id is not None
    assert any(e.kind == EventKind.OFFER_CREATED for e in world.store.events())


def test_confirm_registers_the_failed_click_device(world):
    _, result = escalate_and_pass_kba(world)
    before = len(world.core.account("alice")[0].device_ids)
    decision = world.service.registration.confirm_auto_registration(result.offer_id, True)
    assert decision.confirmed and decision.claim_url
    after = world.core.account("alice")[0].device_ids
    assert len(after) == before + 1
    # The claim URL hands over the cookie exactly once.
    claim_token = decision.claim_url.rsplit("/", 1)[1]
    device, cookie = world.service.registration.claim_cookie(claim_token)
    assert device.device_id == decision.device_id and cookie
    with pytest.raises(UnknownClaim):
        world.service.registration.claim_cookie(claim_token)


def test_decline_keeps_devices_and_flags_fraud(world):
    _, result = escalate_and_pass_kba(world)
    before = list(world.core.account("alice")[0].device_ids)
    decision = world.service.registration.confirm_auto_registration(result.offer_id, False)
    assert not decision.confirmed
    assert world.core.account("alice")[0].device_ids == before
    assert any(e.details.get("reason") == "auto_registration_declined"
               for e in world.store.events() if e.kind == EventKind.FRAUD_SIGNAL)


def test_second_decision_is_unknown_offer(world):
    _, result = escalate_and_pass_kba(world)
    world.service.registration.confirm_auto_registration(result.offer_id, True)
    with pytest.raises(UnknownOffer):
        world.service.registration.confirm_auto_registration(result.offer_id, True)


def test_expired_offer_rejected(world):
    _, result = escalate_and_pass_kba(world)
    world.clock.advance(86_401)
    with pytest.raises(OfferExpired):
        world.service.registration.confirm_auto_registration(result.offer_id, True)


def _session(world, state: EscalationState, context_id: str | None) -> EscalationSession:
    session = EscalationSession(
        session_id="esc-crafted", action_id="act-x", account_id="alice",
        pending_method=EscalationMethod.KBA, attempts_remaining=3,
        state=state, click_context_id=context_id,
    )
    world.core.insert(session)
    return session


def _context(world, context_id: str, retained_until: int,
             cookie_matched: bool = False) -> ClickContext:
    context = ClickContext(
        context_id=context_id, challenge_id="ch-x", account_id="alice",
        presented_cookie="stolen" if cookie_matched else None,
        fingerprint=fingerprint("new_phone"),
        decision=RecognitionDecision(
            cookie_matched, "dev-known" if cookie_matched else None,
            0.5, Verdict.UNCERTAIN,
        ),
        retained_until=retained_until,
    )
    world.core.insert(context)
    return context


def test_offer_requires_a_passed_session(world):
    _session(world, EscalationState.FAILED, "ctx-1")
    with pytest.raises(EscalationNotPassed):
        world.service.registration.offer_auto_registration("esc-crafted")


def test_offer_requires_live_click_context(world):
    _context(world, "ctx-1", retained_until=world.clock.now() - 1)
    _session(world, EscalationState.PASSED, "ctx-1")
    with pytest.raises(NoClickContext):
        world.service.registration.offer_auto_registration("esc-crafted")


def test_no_offer_for_an_already_registered_device(world):
    _context(world, "ctx-1", retained_until=world.clock.now() + 600, cookie_matched=True)
    _session(world, EscalationState.PASSED, "ctx-1")
    with pytest.raises(NoClickContext):
        world.service.registration.offer_auto_registration("esc-crafted")


def test_registration_order_is_fail_pass_confirm(world):
    """A device appears only after failed click -> escalation pass -> confirm."""
    action, ch, _ = world.service.create_action("alice", "PASSWORD_RESET", "reset")
    assert len(world.core.account("alice")[0].device_ids) == 1
    outcome = world.service.challenges.handle_click(
        ch.approve_token, None, fingerprint("new_phone"),
    )
    assert len(world.core.account("alice")[0].device_ids) == 1  # not yet
    right = kba_answers(world.service)
    result = world.service.escalations.answer_kba(
        outcome.escalation_id, list(enumerate(right)),
    )
    assert len(world.core.account("alice")[0].device_ids) == 1  # offer, no device
    world.service.registration.confirm_auto_registration(result.offer_id, True)
    assert len(world.core.account("alice")[0].device_ids) == 2


# -- friend devices ---------------------------------------------------------------------


def test_register_friend_device(world):
    cookie, observed = recognized_credentials(world)
    device, friend_cookie = world.service.registration.register_friend_device(
        "alice", fingerprint("friend_tablet"), cookie, observed,
    )
    assert device.trust_tier is TrustTier.FRIEND
    assert friend_cookie
    assert device.device_id in world.core.account("alice")[0].device_ids


def test_friend_registration_needs_recognized_session(world):
    with pytest.raises(NotRecognizedSession):
        world.service.registration.register_friend_device(
            "alice", fingerprint("friend_tablet"), None, fingerprint("attacker"),
        )
