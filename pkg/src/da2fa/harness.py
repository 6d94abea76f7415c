"""Scenario engine: executes scripted attacker/victim interactions against
a fresh service + simulated carrier on a logical clock, then evaluates
declarative expectations over the final state and the event log.

Determinism contract: a (scenario, seed) pair replays to a byte-identical
event log, because tokens, ids, and the clock are all seed-driven.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from typing import Callable, Optional

from .config import Config
from .errors import Da2faError, ScriptError, UnknownScenario
from .fixtures import kba_answers, register_sim_device, seed_account, wire_simnet
from .http_api import make_server, start_in_thread
from .model import (
    CANONICAL_FINGERPRINT_KEYS,
    ActionState,
    ChallengeRecord,
    ChallengeState,
    Fingerprint,
    SensitiveAction,
    TrustTier,
    Verdict,
)
from .runtime import LogicalClock, SeededTokens
from .service import ApiResponse, Service
from .simnet import HttpTransport, InProcessTransport, SimNet
from .store import Event, EventKind

LOGICAL_START = 1_000_000

_LINK_PATTERN = re.compile(r"Yes: (\S+)  Not you\? (\S+)")
_PROOF_PATTERN = re.compile(r"ref (\d{8})")


@dataclass
class Step:
    actor: str
    op: str
    args: dict = field(default_factory=dict)


@dataclass
class Expectation:
    description: str
    check: Callable[["RunContext"], tuple[bool, str]]


@dataclass
class Scenario:
    name: str
    description: str
    build: Callable[[int], tuple[list[Step], list[Expectation]]]


@dataclass
class ExpectationResult:
    description: str
    passed: bool
    detail: str = ""


@dataclass
class ScenarioReport:
    name: str
    seed: int
    transport: str
    results: list[ExpectationResult]
    events_text: str
    actions: list[dict]
    verdict_events: list[dict]
    # Live context for test introspection; never serialized.
    context: Optional["RunContext"] = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def render_text(self, verbose: bool = False) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"scenario {self.name} seed={self.seed} transport={self.transport}: {status}"]
        for result in self.results:
            mark = "pass" if result.passed else "FAIL"
            lines.append(f"  [{mark}] {result.description}")
            if result.detail and (verbose or not result.passed):
                lines.append(f"         {result.detail}")
        if not self.passed or verbose:
            tail = self.events_text.strip().splitlines()[-12:]
            lines.append("  event log tail:")
            lines.extend(f"    {line}" for line in tail)
        return "\n".join(lines)

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "transport": self.transport,
            "passed": self.passed,
            "expectations": [
                {"description": r.description, "passed": r.passed, "detail": r.detail}
                for r in self.results
            ],
            "actions": self.actions,
            "verdict_events": self.verdict_events,
        }


class RunContext:
    """Mutable state threaded through one scenario run."""

    def __init__(self, service: Service, sim: SimNet, clock: LogicalClock, seed: int):
        self.service = service
        self.sim = sim
        self.clock = clock
        self.seed = seed
        self.accounts: dict[str, dict] = {}
        self.device_ids: dict[str, Optional[str]] = {}  # sim id -> service device id
        self.actions: list[str] = []
        self.approval_url: Optional[str] = None
        self.escalation_id: Optional[str] = None
        self.enrollment_url: Optional[str] = None
        self.claim_url: Optional[str] = None
        self.offer_id: Optional[str] = None
        self.last_response: Optional[ApiResponse] = None

    @property
    def store(self):
        return self.service.core.store

    def call(self, method: str, path: str, body: Optional[dict] = None,
             headers: Optional[dict] = None) -> ApiResponse:
        url = self.service.config.base_url + path
        response = self.sim.transport.request(method, url, headers or {}, body)
        self.last_response = response
        return response

    # -- observable state for expectations ------------------------------

    def action(self, index: int) -> SensitiveAction:
        obj, _ = self.service.core.action(self.actions[index])
        return obj

    def all_actions(self) -> list[SensitiveAction]:
        return [self.action(i) for i in range(len(self.actions))]

    def challenges_in_order(self) -> list[ChallengeRecord]:
        ordered = []
        for event in self.events(EventKind.CHALLENGE_ISSUED):
            hit = self.service.core.load(ChallengeRecord, event.subjects["challenge_id"])
            if hit is not None:
                ordered.append(hit[0])
        return ordered

    def events(self, kind: Optional[str] = None) -> list[Event]:
        all_events = self.store.events()
        if kind is None:
            return all_events
        return [e for e in all_events if e.kind == kind]

    def account_devices(self, account_id: str) -> list[str]:
        account, _ = self.service.core.account(account_id)
        return list(account.device_ids)

    def _absorb(self, body: dict) -> None:
        if body.get("approval_url"):
            self.approval_url = body["approval_url"]
        if body.get("escalation_id"):
            self.escalation_id = body["escalation_id"]
        if body.get("enrollment_url"):
            self.enrollment_url = body["enrollment_url"]
        if body.get("claim_url"):
            self.claim_url = body["claim_url"]
        if body.get("offer_id"):
            self.offer_id = body["offer_id"]
        if body.get("pending_offer_id"):
            self.offer_id = body["pending_offer_id"]


def _links(body: str) -> dict[str, str]:
    match = _LINK_PATTERN.search(body)
    if match is None:
        raise ScriptError(f"challenge links not found in message {body[:80]!r}")
    return {"approve": match.group(1), "report": match.group(2)}


class ScenarioOps:
    """The vocabulary scenario steps are written in."""

    @staticmethod
    def seed_account(ctx: RunContext, actor: str, account_id: str,
                     phones: list[str], with_kba: bool = True) -> None:
        seed_account(ctx.service, account_id, phones, with_kba=with_kba)
        ctx.accounts[account_id] = {
            "phones": list(phones),
            "kba_answers": kba_answers(ctx.service) if with_kba else [],
        }

    @staticmethod
    def seed_device(ctx: RunContext, actor: str, device: str, profile: str) -> None:
        register_sim_device(ctx.service, ctx.sim, device, profile, None)
        ctx.device_ids[device] = None

    @staticmethod
    def seed_registered_device(ctx: RunContext, actor: str, device: str, profile: str,
                               account_id: str, tier: str = "OWNER") -> None:
        service_id = register_sim_device(
            ctx.service, ctx.sim, device, profile, account_id, TrustTier(tier),
        )
        ctx.device_ids[device] = service_id

    @staticmethod
    def route(ctx: RunContext, actor: str, phone: str, device: str) -> None:
        ctx.sim.route_phone(phone, device)

    @staticmethod
    def bind_statements(ctx: RunContext, actor: str, account_id: str, device: str) -> None:
        ctx.sim.route_statement(account_id, device)

    @staticmethod
    def initiate_action(ctx: RunContext, actor: str, account_id: str, kind: str,
                        summary: str, risk: Optional[str] = None,
                        phone: Optional[str] = None) -> None:
        body = {"account_id": account_id, "kind": kind, "payload_summary": summary}
        if risk:
            body["risk_level"] = risk
        if phone:
            body["target_phone"] = phone
        response = ctx.call("POST", "/actions", body)
        if response.status != 201:
            raise ScriptError(f"initiate_action -> {response.status} {response.body}")
        ctx.actions.append(response.body["action"]["action_id"])

    @staticmethod
    def forward(ctx: RunContext, actor: str, from_device: str, to_device: str,
                index: int = -1) -> None:
        inbox = ctx.sim.device(from_device).inbox
        if not inbox:
            raise ScriptError(f"{from_device} inbox is empty")
        ctx.sim.forward(from_device, inbox[index].message_id, to_device)

    @staticmethod
    def sim_jack(ctx: RunContext, actor: str, phone: str, device: str) -> None:
        ctx.sim.sim_jack(phone, device)

    @staticmethod
    def steal_cookie(ctx: RunContext, actor: str, from_device: str, to_device: str) -> None:
        domain = ctx.sim.service_domain
        jar = ctx.sim.device(from_device).cookie_jar
        if domain not in jar:
            raise ScriptError(f"{from_device} holds no cookie to steal")
        ctx.sim.device(to_device).cookie_jar[domain] = jar[domain]

    @staticmethod
    def clone_fingerprint(ctx: RunContext, actor: str, from_device: str,
                          to_device: str, count: int) -> None:
        source = ctx.sim.device(from_device).fingerprint.attributes
        target = ctx.sim.device(to_device)
        merged = dict(target.fingerprint.attributes)
        for key in CANONICAL_FINGERPRINT_KEYS[:count]:
            if key in source:
                merged[key] = source[key]
        target.fingerprint = Fingerprint(merged)

    @staticmethod
    def click_link(ctx: RunContext, actor: str, device: str, link: str = "approve",
                   index: int = -1) -> None:
        inbox = ctx.sim.device(device).inbox
        if not inbox:
            raise ScriptError(f"{device} inbox is empty")
        url = _links(inbox[index].body)[link]
        result = ctx.sim.click_from(device, url)
        ctx._absorb(result.outcome)

    @staticmethod
    def click_var(ctx: RunContext, actor: str, device: str, var: str) -> None:
        url = getattr(ctx, var, None)
        if not url:
            raise ScriptError(f"context has no url in {var!r}")
        result = ctx.sim.click_from(device, url)
        ctx._absorb(result.outcome)

    @staticmethod
    def open_approval_view(ctx: RunContext, actor: str, device: str) -> None:
        if not ctx.approval_url:
            raise ScriptError("no approval session url in context")
        result = ctx.sim.click_from(device, ctx.approval_url)
        ctx._absorb(result.outcome)

    @staticmethod
    def approve(ctx: RunContext, actor: str, device: str,
                payload: Optional[str] = None) -> None:
        if not ctx.approval_url:
            raise ScriptError("no approval session url in context")
        body: dict = {"decision": "APPROVE"}
        if payload is not None:
            body["completion_payload"] = payload
        result = ctx.sim.post_from(device, ctx.approval_url, body)
        if result.status != 200:
            raise ScriptError(f"approve -> {result.status} {result.outcome}")

    @staticmethod
    def deny(ctx: RunContext, actor: str, device: str) -> None:
        if not ctx.approval_url:
            raise ScriptError("no approval session url in context")
        result = ctx.sim.post_from(device, ctx.approval_url, {"decision": "DENY"})
        if result.status != 200:
            raise ScriptError(f"deny -> {result.status} {result.outcome}")

    @staticmethod
    def answer_kba(ctx: RunContext, actor: str, account_id: str,
                   correct: bool = True) -> None:
        if not ctx.escalation_id:
            raise ScriptError("no escalation session in context")
        answers = ctx.accounts[account_id]["kba_answers"]
        if correct:
            pairs = [[i, answer] for i, answer in enumerate(answers)]
        else:
            pairs = [[i, f"wrong-{i}"] for i in range(len(answers) or 3)]
        response = ctx.call(
            "POST", f"/escalations/{ctx.escalation_id}/kba", {"answers": pairs},
        )
        if response.status != 200:
            raise ScriptError(f"answer_kba -> {response.status} {response.body}")
        ctx._absorb(response.body)

    @staticmethod
    def submit_proof(ctx: RunContext, actor: str, device: str,
                     correct: bool = True) -> None:
        if not ctx.escalation_id:
            raise ScriptError("no escalation session in context")
        channel = ctx.sim.device(device).statement_channel
        if not channel:
            raise ScriptError(f"{device} statement channel is empty")
        match = _PROOF_PATTERN.search(channel[-1])
        if match is None:
            raise ScriptError(f"no proof code in statement {channel[-1]!r}")
        code = match.group(1)
        if not correct:
            code = ("1" if code[0] != "1" else "2") + code[1:]
        response = ctx.call(
            "POST", f"/escalations/{ctx.escalation_id}/proof", {"code": code},
        )
        if response.status != 200:
            raise ScriptError(f"submit_proof -> {response.status} {response.body}")
        ctx._absorb(response.body)

    @staticmethod
    def begin_enrollment(ctx: RunContext, actor: str, device: str, account_id: str) -> None:
        fp_doc = ctx.sim.device(device).fingerprint.to_doc()
        result = ctx.sim.post_from(
            device, ctx.service.config.base_url + "/enrollments",
            {"account_id": account_id, "fp": fp_doc},
        )
        if result.status != 201:
            raise ScriptError(f"begin_enrollment -> {result.status} {result.outcome}")
        ctx._absorb(result.outcome)

    @staticmethod
    def confirm_offer(ctx: RunContext, actor: str, confirm: bool = True) -> None:
        if not ctx.offer_id:
            raise ScriptError("no auto-registration offer in context")
        response = ctx.call(
            "POST", f"/offers/{ctx.offer_id}/confirm", {"confirm": confirm},
        )
        if response.status != 200:
            raise ScriptError(f"confirm_offer -> {response.status} {response.body}")
        ctx._absorb(response.body)

    @staticmethod
    def advance(ctx: RunContext, actor: str, seconds: int) -> None:
        ctx.clock.advance(seconds)

    @staticmethod
    def sweep(ctx: RunContext, actor: str) -> None:
        ctx.service.expire_sweep()


# -- expectation builders -----------------------------------------------------


def expect(description: str,
           check: Callable[[RunContext], tuple[bool, str]]) -> Expectation:
    return Expectation(description, check)


def action_state(index: int, *states: ActionState) -> Expectation:
    names = "/".join(s.value for s in states)

    def check(ctx: RunContext) -> tuple[bool, str]:
        actual = ctx.action(index).state
        return actual in states, f"action[{index}] is {actual.value}"

    return expect(f"action[{index}] ends {names}", check)


def no_completed_actions() -> Expectation:
    def check(ctx: RunContext) -> tuple[bool, str]:
        completed = [a.action_id for a in ctx.all_actions()
                     if a.state is ActionState.COMPLETED]
        return not completed, f"completed: {completed}"

    return expect("no action reaches COMPLETED", check)


def exactly_one_completed() -> Expectation:
    def check(ctx: RunContext) -> tuple[bool, str]:
        count = sum(1 for a in ctx.all_actions() if a.state is ActionState.COMPLETED)
        return count == 1, f"{count} actions COMPLETED"

    return expect("exactly one action reaches COMPLETED", check)


def challenge_state(index: int, state: ChallengeState) -> Expectation:
    def check(ctx: RunContext) -> tuple[bool, str]:
        challenges = ctx.challenges_in_order()
        if index >= len(challenges):
            return False, f"only {len(challenges)} challenges issued"
        actual = challenges[index].state
        return actual is state, f"challenge[{index}] is {actual.value}"

    return expect(f"challenge[{index}] ends {state.value}", check)


def verdict_is(challenge_index: int, *verdicts: Verdict,
               score: Optional[float] = None) -> Expectation:
    names = "/".join(v.value for v in verdicts)

    def check(ctx: RunContext) -> tuple[bool, str]:
        challenges = ctx.challenges_in_order()
        if challenge_index >= len(challenges):
            return False, f"only {len(challenges)} challenges issued"
        target = challenges[challenge_index].challenge_id
        hits = [e for e in ctx.events(EventKind.VERDICT)
                if e.subjects.get("challenge_id") == target]
        if not hits:
            return False, "no verdict recorded"
        details = hits[-1].details
        ok = details["verdict"] in {v.value for v in verdicts}
        note = f"verdict={details['verdict']} score={details['fingerprint_score']:.4f}"
        if ok and score is not None:
            ok = abs(details["fingerprint_score"] - score) < 1e-9
        return ok, note

    suffix = f" (score {score})" if score is not None else ""
    return expect(f"challenge[{challenge_index}] verdict is {names}{suffix}", check)


def has_event(kind: str, description: Optional[str] = None,
              subjects: Optional[dict] = None, **detail_match) -> Expectation:
    def check(ctx: RunContext) -> tuple[bool, str]:
        for event in ctx.events(kind):
            if subjects and not all(event.subjects.get(k) == v for k, v in subjects.items()):
                continue
            if all(event.details.get(k) == v for k, v in detail_match.items()):
                return True, f"seq {event.seq}"
        return False, f"no {kind} event matching {detail_match}"

    return expect(description or f"event {kind} {detail_match or ''} recorded", check)


def no_event(kind: str, **detail_match) -> Expectation:
    def check(ctx: RunContext) -> tuple[bool, str]:
        for event in ctx.events(kind):
            if all(event.details.get(k) == v for k, v in detail_match.items()):
                return False, f"found at seq {event.seq}"
        return True, ""

    return expect(f"no {kind} event {detail_match or ''}", check)


def event_count(kind: str, count: int, **detail_match) -> Expectation:
    def check(ctx: RunContext) -> tuple[bool, str]:
        matching = [
            e for e in ctx.events(kind)
            if all(e.details.get(k) == v for k, v in detail_match.items())
        ]
        return len(matching) == count, f"{len(matching)} events"

    return expect(f"exactly {count} {kind} events {detail_match or ''}", check)


def attack_unrewarded() -> Expectation:
    """Zero COMPLETED plus at least one fraud signal or adverse verdict."""

    def check(ctx: RunContext) -> tuple[bool, str]:
        completed = [a.action_id for a in ctx.all_actions()
                     if a.state is ActionState.COMPLETED]
        if completed:
            return False, f"completed: {completed}"
        adverse = any(
            e.details.get("verdict") in (Verdict.UNRECOGNIZED.value, Verdict.UNCERTAIN.value)
            for e in ctx.events(EventKind.VERDICT)
        )
        fraud = bool(ctx.events(EventKind.FRAUD_SIGNAL))
        return adverse or fraud, "no adverse verdict or fraud signal recorded"

    return expect("attack yields nothing: 0 COMPLETED and adverse evidence logged", check)


def device_count(account_id: str, count: int) -> Expectation:
    def check(ctx: RunContext) -> tuple[bool, str]:
        actual = len(ctx.account_devices(account_id))
        return actual == count, f"{actual} devices"

    return expect(f"account {account_id} has {count} registered devices", check)


# -- runner ---------------------------------------------------------------------


class Runner:
    def __init__(self, registry: dict[str, Scenario]):
        self.registry = registry

    def run(self, name: str, seed: int = 0, transport: str = "in-process",
            keep_context: bool = False) -> ScenarioReport:
        if name not in self.registry:
            raise UnknownScenario(name)
        scenario = self.registry[name]
        clock = LogicalClock(start=LOGICAL_START)
        service = Service(Config(), clock=clock, tokens=SeededTokens(seed))
        server = None
        try:
            if transport == "http":
                server, actual_base = make_server(service)
                start_in_thread(server)
                channel = HttpTransport(service.config.base_url, actual_base)
            else:
                channel = InProcessTransport(service)
            sim = wire_simnet(service, channel)
            ctx = RunContext(service, sim, clock, seed)
            steps, expectations = scenario.build(seed)
            for position, step in enumerate(steps):
                op = getattr(ScenarioOps, step.op, None)
                if op is None:
                    raise ScriptError(f"unknown op {step.op!r} at step {position}")
                try:
                    op(ctx, step.actor, **step.args)
                except ScriptError:
                    raise
                except (Da2faError, KeyError, IndexError, TypeError) as exc:
                    raise ScriptError(
                        f"step {position} ({step.actor}:{step.op}) failed: {exc!r}"
                    ) from exc
            results = []
            for expectation in expectations:
                try:
                    ok, detail = expectation.check(ctx)
                except Exception as exc:  # expectation bugs must surface as failures
                    ok, detail = False, f"check raised {exc!r}"
                results.append(ExpectationResult(expectation.description, ok, detail))
            report = ScenarioReport(
                name=name,
                seed=seed,
                transport=transport,
                results=results,
                events_text=ctx.store.events_text(),
                actions=[
                    {"action_id": a.action_id, "state": a.state.value}
                    for a in ctx.all_actions()
                ],
                verdict_events=[e.to_doc() for e in ctx.events(EventKind.VERDICT)],
            )
            if keep_context:
                report.context = ctx
            return report
        finally:
            if server is not None:
                server.shutdown()
                server.server_close()

    def run_all(self, seed: int = 0, transport: str = "in-process") -> list[ScenarioReport]:
        return [self.run(name, seed, transport) for name in sorted(self.registry)]


def to_junit(reports: list[ScenarioReport]) -> str:
    suite = ET.Element("testsuite", name="da2fa-scenarios",
                       tests=str(sum(len(r.results) for r in reports)),
                       failures=str(sum(1 for r in reports for x in r.results if not x.passed)))
    for report in reports:
        for result in report.results:
            case = ET.SubElement(
                suite, "testcase",
                classname=f"{report.name}.seed{report.seed}",
                name=result.description,
            )
            if not result.passed:
                failure = ET.SubElement(case, "failure", message=result.detail)
                failure.text = report.events_text[-2000:]
    return ET.tostring(suite, encoding="unicode", xml_declaration=True)
