"""Challenge issuance, click handling, device-bound approval, expiry."""

from __future__ import annotations

import re
import threading

import pytest
from hypothesis import given, settings, strategies as st

from da2fa.challenge import ApprovalDecision, ClickOutcomeKind, MAX_SMS_CHARS
from da2fa.errors import (
    ActionNotChallengeable,
    MissingCompletionPayload,
    PhoneNotOnAccount,
    SessionExpired,
    UnknownSession,
)
from da2fa.fixtures import fingerprint
from da2fa.model import (
    ActionState,
    ApprovalSession,
    ChallengeRecord,
    ChallengeState,
    ClickContext,
    digest_password,
)
from da2fa.store import EventKind

from conftest import P1, make_world

URL_PATTERN = re.compile(r"http://\S+")


def initiate(world, kind="ADDRESS_CHANGE", summary="deliver to 12 Main St"):
    return world.service.create_action("alice", kind, summary)


def victim_cookie(world) -> str:
    return world.sim.device("alice_phone").cookie_jar[world.sim.service_domain]


def click(world, token, cookie=None, profile="victim_phone"):
    return world.service.challenges.handle_click(token, cookie, fingerprint(profile))


def victim_click(world, token):
    return click(world, token, cookie=victim_cookie(world))


# -- issuance -------------------------------------------------------------------


def test_message_contains_exactly_two_distinct_urls(world):
    _, ch, text = initiate(world, kind="PASSWORD_RESET", summary="reset password")
    urls = URL_PATTERN.findall(text)
    assert len(urls) == 2 and len(set(urls)) == 2
    assert urls[0].endswith(ch.approve_token)
    assert urls[1].endswith(ch.report_token)
    assert len(text) <= MAX_SMS_CHARS
    assert ch.expires_at - ch.issued_at == world.service.config.challenge_ttl


def test_two_challenges_have_four_distinct_tokens(world):
    _, first, _ = initiate(world)
    _, second, _ = initiate(world)
    tokens = {first.approve_token, first.report_token,
              second.approve_token, second.report_token}
    assert len(tokens) == 4


def test_oversized_summary_is_truncated_to_sms_budget(world):
    _, _, text = initiate(world, summary="x" * 2000)
    assert len(text) <= MAX_SMS_CHARS
    assert len(URL_PATTERN.findall(text)) == 2


def test_phone_not_on_account(world):
    action, _, _ = initiate(world)
    with pytest.raises(PhoneNotOnAccount):
        world.service.challenges.issue_challenge(action.action_id, "+19990000000")


def test_wrong_state_is_not_challengeable(world):
    action, _, _ = initiate(world)  # already CHALLENGE_SENT
    with pytest.raises(ActionNotChallengeable):
        world.service.challenges.issue_challenge(action.action_id, P1)


def test_message_is_handed_to_the_carrier(world):
    initiate(world)
    inbox = world.sim.device("alice_phone").inbox
    assert len(inbox) == 1 and "Not you?" in inbox[0].body


# -- clicks ----------------------------------------------------------------------


def test_recognized_click_passes_and_opens_bound_approval(world):
    action, ch, _ = initiate(world)
    outcome = victim_click(world, ch.approve_token)
    assert outcome.kind is ClickOutcomeKind.PASSED
    assert outcome.approval_url
    stored, _ = world.core.load(ChallengeRecord, ch.challenge_id)
    assert stored.state is ChallengeState.PASSED
    assert stored.responding_device_id == world.phone_device_id
    session_token = outcome.approval_url.rsplit("/", 1)[1]
    session, _ = world.core.load(ApprovalSession, session_token)
    assert session.device_id == world.phone_device_id
    assert world.core.action(action.action_id)[0].state is ActionState.AWAITING_APPROVAL


def test_unknown_token(world):
    outcome = click(world, "no-such-token")
    assert outcome.kind is ClickOutcomeKind.UNKNOWN_TOKEN


def test_replayed_approve_token_is_already_used(world):
    _, ch, _ = initiate(world)
    victim_click(world, ch.approve_token)
    replay = victim_click(world, ch.approve_token)
    assert replay.kind is ClickOutcomeKind.ALREADY_USED


def test_report_click_denies_action_from_any_device(world):
    action, ch, _ = initiate(world)
    outcome = click(world, ch.report_token, profile="attacker")
    assert outcome.kind is ClickOutcomeKind.DENIED
    stored, _ = world.core.load(ChallengeRecord, ch.challenge_id)
    assert stored.state is ChallengeState.REPORTED
    assert world.core.action(action.action_id)[0].state is ActionState.DENIED
    assert any(e.details.get("reason") == "report_link_clicked"
               for e in world.store.events() if e.kind == EventKind.FRAUD_SIGNAL)


def test_report_after_pass_still_denies_the_action(world):
    action, ch, _ = initiate(world)
    victim_click(world, ch.approve_token)
    outcome = click(world, ch.report_token)
    assert outcome.kind is ClickOutcomeKind.DENIED
    assert world.core.action(action.action_id)[0].state is ActionState.DENIED
    # The record keeps its PASSED history; REPORTED is not reachable from it.
    stored, _ = world.core.load(ChallengeRecord, ch.challenge_id)
    assert stored.state is ChallengeState.PASSED


def test_replayed_report_token_is_already_used(world):
    action, ch, _ = initiate(world)
    click(world, ch.report_token)
    replay = click(world, ch.report_token)
    assert replay.kind is ClickOutcomeKind.ALREADY_USED
    assert world.core.action(action.action_id)[0].state is ActionState.DENIED


def test_expired_challenge_click(world):
    _, ch, _ = initiate(world)
    world.clock.advance(601)
    outcome = victim_click(world, ch.approve_token)
    assert outcome.kind is ClickOutcomeKind.EXPIRED
    stored, _ = world.core.load(ChallengeRecord, ch.challenge_id)
    assert stored.state is ChallengeState.EXPIRED


def test_unrecognized_click_escalates_and_retains_context(world):
    action, ch, _ = initiate(world)
    outcome = click(world, ch.approve_token, profile="attacker")
    assert outcome.kind is ClickOutcomeKind.ESCALATED
    assert outcome.escalation_method == "KBA"
    assert world.core.action(action.action_id)[0].state is ActionState.ESCALATING
    contexts = world.core.list_all(ClickContext)
    assert len(contexts) == 1
    assert contexts[0][1].challenge_id == ch.challenge_id


def test_concurrent_clicks_resolve_to_one_winner(world):
    _, ch, _ = initiate(world)
    outcomes = []
    barrier = threading.Barrier(2)

    def run():
        barrier.wait()
        outcomes.append(victim_click(world, ch.approve_token))

    threads = [threading.Thread(target=run) for _ in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    kinds = sorted(o.kind for o in outcomes)
    assert kinds == [ClickOutcomeKind.ALREADY_USED, ClickOutcomeKind.PASSED]


# -- approval ---------------------------------------------------------------------


def approval_token(outcome) -> str:
    return outcome.approval_url.rsplit("/", 1)[1]


def test_render_shows_the_payload_summary(world):
    _, ch, _ = initiate(world, summary="new address: 7 Oak Ave")
    outcome = victim_click(world, ch.approve_token)
    view = world.service.challenges.render_approval(approval_token(outcome))
    assert view.payload_summary == "new address: 7 Oak Ave"
    assert not view.requires_completion_payload
    # Idempotent: rendering again yields the same view.
    again = world.service.challenges.render_approval(approval_token(outcome))
    assert again == view


def test_expired_session_rejected(world):
    _, ch, _ = initiate(world)
    outcome = victim_click(world, ch.approve_token)
    world.clock.advance(301)
    with pytest.raises(SessionExpired):
        world.service.challenges.render_approval(approval_token(outcome))


def test_consumed_session_becomes_unknown(world):
    _, ch, _ = initiate(world)
    outcome = victim_click(world, ch.approve_token)
    token = approval_token(outcome)
    world.service.challenges.submit_approval(token, ApprovalDecision.APPROVE)
    with pytest.raises(UnknownSession):
        world.service.challenges.render_approval(token)
    with pytest.raises(UnknownSession):
        world.service.challenges.submit_approval(token, ApprovalDecision.APPROVE)


def test_approve_completes_and_deny_denies(world):
    for decision, state in [(ApprovalDecision.APPROVE, ActionState.COMPLETED),
                            (ApprovalDecision.DENY, ActionState.DENIED)]:
        action, ch, _ = initiate(world)
        outcome = victim_click(world, ch.approve_token)
        result = world.service.challenges.submit_approval(approval_token(outcome), decision)
        assert result.state is state
        assert world.core.action(action.action_id)[0].state is state


def test_password_reset_requires_completion_payload(world):
    _, ch, _ = initiate(world, kind="PASSWORD_RESET", summary="reset password")
    outcome = victim_click(world, ch.approve_token)
    token = approval_token(outcome)
    with pytest.raises(MissingCompletionPayload):
        world.service.challenges.submit_approval(token, ApprovalDecision.APPROVE)
    # The failed attempt must not burn the session; retry with the payload.
    result = world.service.challenges.submit_approval(
        token, ApprovalDecision.APPROVE, completion_payload="correct-horse",
    )
    assert result.state is ActionState.COMPLETED
    account, _ = world.core.account("alice")
    assert account.password_digest == digest_password("correct-horse")


# -- expiry sweep --------------------------------------------------------------------


def test_sweep_on_empty_store_is_zero(world):
    assert world.service.expire_sweep() == 0


def test_sweep_expires_challenge_and_action_then_idempotent(world):
    action, ch, _ = initiate(world)
    world.clock.advance(601)
    assert world.service.expire_sweep() == 1  # the challenge
    stored, _ = world.core.load(ChallengeRecord, ch.challenge_id)
    assert stored.state is ChallengeState.EXPIRED
    world.clock.advance(1300)
    assert world.service.expire_sweep() == 1  # the action
    assert world.core.action(action.action_id)[0].state is ActionState.EXPIRED
    assert world.service.expire_sweep() == 0


# -- properties ------------------------------------------------------------------------


OPS = st.sampled_from([
    "victim_click", "attacker_click", "report_click", "approve", "deny",
    "advance", "sweep",
])


@settings(max_examples=30, deadline=None)
@given(st.lists(OPS, max_size=12))
def test_device_binding_holds_under_random_operation_sequences(ops):
    """However the run interleaves, COMPLETED implies the approving session's
    device equals the challenge's responding device."""
    world = make_world(seed=99)
    action, ch, _ = world.service.create_action("alice", "ADDRESS_CHANGE", "move")
    approval = None
    for op in ops:
        try:
            if op == "victim_click":
                outcome = victim_click(world, ch.approve_token)
                approval = outcome.approval_url or approval
            elif op == "attacker_click":
                click(world, ch.approve_token, profile="attacker")
            elif op == "report_click":
                click(world, ch.report_token)
            elif op in ("approve", "deny") and approval:
                world.service.challenges.submit_approval(
                    approval.rsplit("/", 1)[1],
                    ApprovalDecision.APPROVE if op == "approve" else ApprovalDecision.DENY,
                    completion_payload="p",
                )
            elif op == "advance":
                world.clock.advance(400)
            elif op == "sweep":
                world.service.expire_sweep()
        except Exception:
            pass  # rejected operations are part of the property space
    final, _ = world.core.action(action.action_id)
    if final.state is ActionState.COMPLETED:
        stored, _ = world.core.load(ChallengeRecord, ch.challenge_id)
        assert stored.state is ChallengeState.PASSED
        sessions = [s for _, s, _ in world.core.list_all(ApprovalSession)
                    if s.action_id == action.action_id and s.consumed]
        assert sessions and all(
            s.device_id == stored.responding_device_id for s in sessions
        )


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["pass", "report", "expire", "escalate"]))
def test_token_reuse_never_changes_action_state(path):
    world = make_world(seed=7)
    action, ch, _ = world.service.create_action("alice", "ADDRESS_CHANGE", "move")
    if path == "pass":
        victim_click(world, ch.approve_token)
        token = ch.approve_token
    elif path == "report":
        click(world, ch.report_token)
        token = ch.report_token
    elif path == "expire":
        world.clock.advance(999)
        victim_click(world, ch.approve_token)
        token = ch.approve_token
    else:
        click(world, ch.approve_token, profile="attacker")
        token = ch.approve_token
    before = world.core.action(action.action_id)[0].state
    outcome = victim_click(world, token)
    assert outcome.kind is ClickOutcomeKind.ALREADY_USED
    assert world.core.action(action.action_id)[0].state is before
