"""The built-in attacker/victim scenarios.

Each scenario seeds a fresh world, scripts the interaction as a step list,
and states its expectations over final records and the event log. Attack
scenarios must end with zero completed actions and adverse evidence on the
log; liveness scenarios must complete exactly one action.
"""

from __future__ import annotations

from .harness import (
    Expectation,
    Runner,
    Scenario,
    ScenarioReport,
    Step,
    action_state,
    attack_unrewarded,
    challenge_state,
    device_count,
    event_count,
    exactly_one_completed,
    expect,
    has_event,
    no_completed_actions,
    no_event,
    verdict_is,
)
from .model import ActionState, ChallengeState, Verdict
from .store import EventKind

P1 = "+15550100001"
P2 = "+15550100002"


def _s(actor: str, op: str, **args) -> Step:
    return Step(actor=actor, op=op, args=args)


def _victim_world(with_kba: bool = True, phones: list[str] | None = None) -> list[Step]:
    return [
        _s("setup", "seed_account", account_id="alice", phones=phones or [P1],
           with_kba=with_kba),
        _s("setup", "seed_registered_device", device="alice_phone",
           profile="victim_phone", account_id="alice"),
        _s("setup", "route", phone=P1, device="alice_phone"),
    ]


def _legit_same_device(seed: int):
    steps = _victim_world() + [
        _s("alice", "initiate_action", account_id="alice", kind="PASSWORD_RESET",
           summary="reset account password"),
        _s("alice", "click_link", device="alice_phone", link="approve"),
        _s("alice", "approve", device="alice_phone", payload="correct-horse-battery"),
    ]
    expectations = [
        exactly_one_completed(),
        action_state(0, ActionState.COMPLETED),
        challenge_state(0, ChallengeState.PASSED),
        verdict_is(0, Verdict.RECOGNIZED),
        no_event(EventKind.ESCALATION_STARTED),
        no_event(EventKind.FRAUD_SIGNAL),
    ]
    return steps, expectations


def _code_forwarding_attack(seed: int):
    steps = _victim_world() + [
        _s("setup", "seed_device", device="mallory_device", profile="attacker"),
        _s("mallory", "initiate_action", account_id="alice", kind="PASSWORD_RESET",
           summary="reset account password"),
        # The social-engineering moment: the victim forwards her challenge.
        _s("alice", "forward", from_device="alice_phone", to_device="mallory_device"),
        _s("mallory", "click_link", device="mallory_device", link="approve"),
        _s("mallory", "answer_kba", account_id="alice", correct=False),
        _s("mallory", "answer_kba", account_id="alice", correct=False),
        _s("mallory", "answer_kba", account_id="alice", correct=False),
    ]
    expectations = [
        no_completed_actions(),
        action_state(0, ActionState.DENIED),
        challenge_state(0, ChallengeState.ESCALATED),
        verdict_is(0, Verdict.UNRECOGNIZED),
        attack_unrewarded(),
        has_event(EventKind.FRAUD_SIGNAL, reason="kba_exhausted"),
    ]
    return steps, expectations


def _simjack_attack(seed: int):
    steps = _victim_world() + [
        _s("setup", "seed_device", device="mallory_device", profile="attacker"),
        _s("mallory", "sim_jack", phone=P1, device="mallory_device"),
        _s("mallory", "initiate_action", account_id="alice", kind="PASSWORD_RESET",
           summary="reset account password"),
        _s("mallory", "click_link", device="mallory_device", link="approve"),
        _s("time", "advance", seconds=3600),
        _s("time", "sweep"),
    ]
    expectations = [
        no_completed_actions(),
        action_state(0, ActionState.EXPIRED),
        challenge_state(0, ChallengeState.ESCALATED),
        verdict_is(0, Verdict.UNRECOGNIZED),
        has_event(EventKind.MESSAGE_DELIVERED,
                  description="challenge SMS was routed to the attacker device",
                  subjects={"sim_device_id": "mallory_device"}),
        attack_unrewarded(),
    ]
    return steps, expectations


def _attacker_induced_click(seed: int):
    victim_denies = seed % 2 == 0
    steps = _victim_world() + [
        _s("setup", "seed_device", device="mallory_device", profile="attacker"),
        _s("mallory", "initiate_action", account_id="alice", kind="ADDRESS_CHANGE",
           summary="ship card to 99 Elm St"),
        _s("alice", "click_link", device="alice_phone", link="approve"),
    ]
    if victim_denies:
        steps.append(_s("alice", "deny", device="alice_phone"))
    else:
        steps += [_s("time", "advance", seconds=3600), _s("time", "sweep")]
    expectations = [
        challenge_state(0, ChallengeState.PASSED),
        verdict_is(0, Verdict.RECOGNIZED),
        action_state(0, ActionState.DENIED if victim_denies else ActionState.EXPIRED),
        no_completed_actions(),
    ]
    if victim_denies:
        expectations.append(has_event(EventKind.FRAUD_SIGNAL, reason="approval_denied"))
    return steps, expectations


def _partial_fingerprint_theft(seed: int):
    steps = _victim_world()
    expectations: list[Expectation] = [no_completed_actions()]
    for k in range(13):
        device = f"mallory_{k}"
        steps += [
            _s("setup", "seed_device", device=device, profile="attacker"),
            _s("mallory", "clone_fingerprint", from_device="alice_phone",
               to_device=device, count=k),
            _s("mallory", "sim_jack", phone=P1, device=device),
            _s("mallory", "initiate_action", account_id="alice", kind="PASSWORD_RESET",
               summary=f"reset attempt with {k} cloned attributes"),
            _s("mallory", "click_link", device=device, link="approve"),
        ]
        if k >= 11:  # 11/12 and 12/12 clear tau_recognized but stay uncertain
            expectations.append(verdict_is(k, Verdict.UNCERTAIN, score=k / 12))
        else:
            expectations.append(verdict_is(k, Verdict.UNRECOGNIZED, score=k / 12))
        expectations.append(challenge_state(k, ChallengeState.ESCALATED))
    return steps, expectations


def _new_phone_escalation(seed: int):
    steps = [
        _s("setup", "seed_account", account_id="alice", phones=[P1, P2]),
        _s("setup", "seed_registered_device", device="old_phone",
           profile="victim_phone", account_id="alice"),
        _s("setup", "seed_registered_device", device="work_phone",
           profile="work_phone", account_id="alice"),
        _s("setup", "seed_device", device="new_phone", profile="new_phone"),
        # Same number, new hardware: the carrier routes P1 to the new handset.
        _s("setup", "route", phone=P1, device="new_phone"),
        _s("setup", "route", phone=P2, device="work_phone"),
        _s("alice", "initiate_action", account_id="alice", kind="PASSWORD_RESET",
           summary="reset account password"),
        _s("alice", "click_link", device="new_phone", link="approve"),
        _s("alice", "click_link", device="work_phone", link="approve"),
        _s("alice", "open_approval_view", device="work_phone"),
        _s("alice", "approve", device="work_phone", payload="fresh-new-pass"),
        _s("alice", "confirm_offer", confirm=True),
        _s("alice", "click_var", device="new_phone", var="claim_url"),
    ]
    expectations = [
        challenge_state(0, ChallengeState.ESCALATED),
        challenge_state(1, ChallengeState.PASSED),
        verdict_is(0, Verdict.UNRECOGNIZED, score=0.5),
        verdict_is(1, Verdict.RECOGNIZED),
        has_event(EventKind.ESCALATION_STARTED, method="SECOND_DEVICE"),
        exactly_one_completed(),
        action_state(0, ActionState.COMPLETED),
        has_event(EventKind.DEVICE_REGISTERED, method="auto_registration"),
        device_count("alice", 3),
        expect("the new phone holds its claimed cookie", lambda ctx: (
            ctx.sim.service_domain in ctx.sim.device("new_phone").cookie_jar,
            "cookie jar: " + ",".join(ctx.sim.device("new_phone").cookie_jar),
        )),
    ]
    return steps, expectations


def _qr_enrollment(seed: int):
    steps = [
        _s("setup", "seed_account", account_id="alice", phones=[P1]),
        _s("setup", "seed_registered_device", device="alice_laptop",
           profile="victim_laptop", account_id="alice"),
        _s("setup", "seed_device", device="new_phone", profile="new_phone"),
        _s("setup", "route", phone=P1, device="new_phone"),
        _s("alice", "begin_enrollment", device="alice_laptop", account_id="alice"),
        # Scanning the QR is visiting its URL from the new device.
        _s("alice", "click_var", device="new_phone", var="enrollment_url"),
        _s("alice", "initiate_action", account_id="alice", kind="ADDRESS_CHANGE",
           summary="deliver to 7 Oak Ave"),
        _s("alice", "click_link", device="new_phone", link="approve"),
        _s("alice", "approve", device="new_phone"),
    ]
    expectations = [
        has_event(EventKind.DEVICE_REGISTERED, method="qr_enrollment"),
        device_count("alice", 2),
        challenge_state(0, ChallengeState.PASSED),
        verdict_is(0, Verdict.RECOGNIZED),
        exactly_one_completed(),
        no_event(EventKind.FRAUD_SIGNAL),
    ]
    return steps, expectations


def _friend_device_reset(seed: int):
    steps = [
        # Two phones on file: without the friend rule this would pick
        # SECOND_DEVICE; a friend-tier click must still land on KBA.
        _s("setup", "seed_account", account_id="alice", phones=[P1, P2]),
        _s("setup", "seed_registered_device", device="friend_tablet",
           profile="friend_tablet", account_id="alice", tier="FRIEND"),
        _s("setup", "seed_device", device="loaner_phone", profile="new_phone"),
        _s("setup", "route", phone=P1, device="loaner_phone"),
        _s("alice", "initiate_action", account_id="alice", kind="PASSWORD_RESET",
           summary="reset account password"),
        _s("alice", "forward", from_device="loaner_phone", to_device="friend_tablet"),
        _s("alice", "click_link", device="friend_tablet", link="approve"),
        _s("alice", "answer_kba", account_id="alice", correct=True),
        _s("alice", "approve", device="friend_tablet", payload="totally-new-pass"),
    ]
    expectations = [
        challenge_state(0, ChallengeState.ESCALATED),
        has_event(EventKind.VERDICT,
                  description="friend cookie matched but capped at UNCERTAIN",
                  verdict="UNCERTAIN", cookie_matched=True),
        has_event(EventKind.ESCALATION_STARTED, method="KBA"),
        has_event(EventKind.ESCALATION_RESULT, result="PASSED"),
        exactly_one_completed(),
        action_state(0, ActionState.COMPLETED),
        device_count("alice", 1),
        no_event(EventKind.OFFER_CREATED),
    ]
    return steps, expectations


def _cookie_theft_mismatched_fp(seed: int):
    steps = _victim_world() + [
        _s("setup", "seed_device", device="mallory_device", profile="attacker"),
        _s("mallory", "steal_cookie", from_device="alice_phone",
           to_device="mallory_device"),
        _s("mallory", "clone_fingerprint", from_device="alice_phone",
           to_device="mallory_device", count=3),
        _s("mallory", "sim_jack", phone=P1, device="mallory_device"),
        _s("mallory", "initiate_action", account_id="alice", kind="FUNDS_TRANSFER",
           summary="wire $9,800 to acct 4411"),
        _s("mallory", "click_link", device="mallory_device", link="approve"),
        _s("time", "advance", seconds=3600),
        _s("time", "sweep"),
    ]
    expectations = [
        verdict_is(0, Verdict.UNCERTAIN, score=0.25),
        has_event(EventKind.VERDICT, verdict="UNCERTAIN", cookie_matched=True),
        has_event(EventKind.ESCALATION_STARTED),
        challenge_state(0, ChallengeState.ESCALATED),
        no_completed_actions(),
        action_state(0, ActionState.EXPIRED),
    ]
    return steps, expectations


def _token_replay_and_expiry(seed: int):
    steps = _victim_world(with_kba=False) + [
        _s("alice", "initiate_action", account_id="alice", kind="ADDRESS_CHANGE",
           summary="deliver to 12 Main St"),
        _s("alice", "click_link", device="alice_phone", link="approve"),
        _s("alice", "click_link", device="alice_phone", link="approve"),  # replay
        _s("alice", "initiate_action", account_id="alice", kind="ADDRESS_CHANGE",
           summary="deliver to 99 Side St"),
        _s("time", "advance", seconds=601),  # past the 600 s challenge TTL
        _s("alice", "click_link", device="alice_phone", link="approve"),
        _s("time", "advance", seconds=1300),  # past the 1800 s action TTL
        _s("time", "sweep"),
        _s("time", "sweep"),  # idempotent: adds no further transitions
    ]
    expectations = [
        has_event(EventKind.CLICK, outcome="already_used"),
        has_event(EventKind.CLICK, outcome="expired"),
        challenge_state(0, ChallengeState.PASSED),
        challenge_state(1, ChallengeState.EXPIRED),
        action_state(0, ActionState.EXPIRED),
        action_state(1, ActionState.EXPIRED),
        no_completed_actions(),
        event_count(EventKind.ACTION_STATE, 2, to="EXPIRED"),
        event_count(EventKind.CHALLENGE_STATE, 1, to="EXPIRED"),
    ]
    return steps, expectations


SCENARIOS: dict[str, Scenario] = {
    s.name: s for s in [
        Scenario("legit_same_device",
                 "owner clicks her own challenge and completes the action",
                 _legit_same_device),
        Scenario("code_forwarding_attack",
                 "victim is tricked into forwarding the challenge; attacker clicks",
                 _code_forwarding_attack),
        Scenario("simjack_attack",
                 "carrier rerouted; the attacker receives and clicks the challenge",
                 _simjack_attack),
        Scenario("attacker_induced_click",
                 "attacker initiates, victim clicks her challenge, then reviews",
                 _attacker_induced_click),
        Scenario("partial_fingerprint_theft",
                 "attacker clones k of 12 attributes (k=0..12) but never the cookie",
                 _partial_fingerprint_theft),
        Scenario("new_phone_escalation",
                 "replacement handset escalates to the registered work phone",
                 _new_phone_escalation),
        Scenario("qr_enrollment",
                 "recognized laptop enrolls a new phone via the QR URL",
                 _qr_enrollment),
        Scenario("friend_device_reset",
                 "trusted friend's device carries a reset only together with KBA",
                 _friend_device_reset),
        Scenario("cookie_theft_mismatched_fp",
                 "stolen cookie on foreign hardware is uncertain, never recognized",
                 _cookie_theft_mismatched_fp),
        Scenario("token_replay_and_expiry",
                 "single-use tokens and TTL sweeps",
                 _token_replay_and_expiry),
    ]
}


def default_runner() -> Runner:
    return Runner(SCENARIOS)


def run_scenario(name: str, seed: int = 0, transport: str = "in-process",
                 keep_context: bool = False) -> ScenarioReport:
    return default_runner().run(name, seed, transport, keep_context=keep_context)
