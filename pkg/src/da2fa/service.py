"""The relying-party service: typed operations plus the request router.

Both transports go through `route()`: the real HTTP listener wraps it, and
the in-process transport calls it directly, so the two paths cannot
diverge. Every response body is canonical JSON with a machine-readable
`outcome` (or `error`) code mirroring module-level outcomes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from . import codec, errors
from .challenge import ApprovalDecision, ChallengeFlows, ClickOutcome, ClickOutcomeKind
from .config import Config
from .core import Core
from .errors import Da2faError, InvalidRequest
from .escalation import EscalationFlows, EscalationOutcome
from .model import (
    ActionKind,
    ActionState,
    ChallengeRecord,
    DEFAULT_RISK,
    Fingerprint,
    RiskLevel,
    SensitiveAction,
)
from .registration import RegistrationFlows
from .runtime import Clock, TokenSource
from .store import EventKind, Store


@dataclass
class ApiRequest:
    method: str
    path: str
    query: dict[str, str] = field(default_factory=dict)
    headers: dict[str, str] = field(default_factory=dict)  # lower-case keys
    body: Optional[dict] = None


@dataclass
class ApiResponse:
    status: int
    body: dict
    set_cookie: Optional[str] = None
    location: Optional[str] = None


# Exception class -> (HTTP status, outcome code). Subclasses resolve via MRO.
ERROR_MAP: dict[type, tuple[int, str]] = {
    errors.UnknownAccount: (404, "unknown_account"),
    errors.UnknownAction: (404, "unknown_action"),
    errors.UnknownDevice: (404, "unknown_device"),
    errors.UnknownSession: (404, "unknown_session"),
    errors.SessionExpired: (410, "session_expired"),
    errors.MissingCompletionPayload: (422, "missing_completion_payload"),
    errors.PhoneNotOnAccount: (422, "phone_not_on_account"),
    errors.ActionNotChallengeable: (409, "action_not_challengeable"),
    errors.InvalidFingerprint: (422, "invalid_fingerprint"),
    errors.InvalidRequest: (422, "invalid_request"),
    errors.NotRecognizedSession: (401, "not_recognized_session"),
    errors.UnknownTicket: (404, "unknown_ticket"),
    errors.TicketExpired: (410, "ticket_expired"),
    errors.TicketUsed: (410, "ticket_used"),
    errors.EmptyFingerprint: (422, "empty_fingerprint"),
    errors.UnknownOffer: (404, "unknown_offer"),
    errors.OfferExpired: (410, "offer_expired"),
    errors.NoClickContext: (410, "no_click_context"),
    errors.UnknownClaim: (404, "unknown_claim"),
    errors.WrongMethod: (409, "wrong_method"),
    errors.SessionClosed: (410, "session_closed"),
    errors.EscalationNotPassed: (409, "escalation_not_passed"),
    errors.TokenAlreadyConsumed: (410, "token_already_consumed"),
    errors.IllegalTransition: (409, "illegal_transition"),
    errors.NoEscalationAvailable: (422, "no_escalation_available"),
    errors.Conflict: (409, "conflict"),
    errors.UnknownKey: (404, "unknown_key"),
    errors.UnroutablePhone: (422, "unroutable_phone"),
    errors.NotInInbox: (404, "not_in_inbox"),
    errors.MalformedUrl: (422, "malformed_url"),
}

CLICK_STATUS = {
    ClickOutcomeKind.PASSED: 303,
    ClickOutcomeKind.ESCALATED: 200,
    ClickOutcomeKind.DENIED: 200,
    ClickOutcomeKind.EXPIRED: 410,
    ClickOutcomeKind.ALREADY_USED: 410,
    ClickOutcomeKind.UNKNOWN_TOKEN: 404,
}


class Service:
    def __init__(self, config: Optional[Config] = None, store: Optional[Store] = None,
                 clock: Optional[Clock] = None, tokens: Optional[TokenSource] = None):
        self.config = config or Config()
        self.core = Core(self.config, store=store, clock=clock, tokens=tokens)
        self.challenges = ChallengeFlows(self.core)
        self.escalations = EscalationFlows(self.core)
        self.registration = RegistrationFlows(self.core)
        self.challenges.escalations = self.escalations
        self.escalations.challenges = self.challenges
        self.escalations.registration = self.registration
        # Hosted simulated carrier; present in serve/playground mode only.
        self.simnet = None
        # Fingerprint documents posted as click companions, keyed by token.
        self._pending_fp: dict[str, dict] = {}

    # ------------------------------------------------------------------ ops

    def create_action(self, account_id: str, kind: str, payload_summary: str,
                      risk_override: Optional[str] = None,
                      target_phone: Optional[str] = None,
                      ) -> tuple[SensitiveAction, ChallengeRecord, str]:
        """Open a sensitive action and immediately challenge it."""
        core = self.core
        try:
            action_kind = ActionKind(kind)
        except ValueError as exc:
            raise InvalidRequest(f"unknown action kind {kind!r}") from exc
        risk = DEFAULT_RISK[action_kind]
        if risk_override is not None:
            try:
                risk = RiskLevel(risk_override)
            except ValueError as exc:
                raise InvalidRequest(f"unknown risk level {risk_override!r}") from exc
        account, _ = core.account(account_id)
        if target_phone is None:
            if not account.phone_numbers:
                raise errors.PhoneNotOnAccount(f"account {account_id} has no phone numbers")
            target_phone = account.phone_numbers[0]
        now = core.now()
        action = SensitiveAction(
            action_id=core.tokens.new_id("act"),
            account_id=account_id,
            kind=action_kind,
            risk_level=risk,
            payload_summary=payload_summary,
            state=ActionState.REQUESTED,
            created_at=now,
            expires_at=now + core.config.action_ttl,
        )
        core.insert(action)
        core.emit(
            EventKind.ACTION_REQUESTED,
            {"action_id": action.action_id, "account_id": account_id},
            {"kind": action_kind.value, "risk_level": risk.value,
             "payload_summary": payload_summary},
        )
        challenge, text = self.challenges.issue_challenge(action.action_id, target_phone)
        action, _ = core.action(action.action_id)  # reflect the CHALLENGE_SENT transition
        return action, challenge, text

    def click(self, token: str, presented_cookie: Optional[str],
              fp_doc: Optional[dict]) -> ClickOutcome:
        if fp_doc is None:
            fp_doc = self._pending_fp.pop(token, None)
        observed = Fingerprint.from_doc(fp_doc) if fp_doc else Fingerprint({})
        return self.challenges.handle_click(token, presented_cookie, observed)

    def expire_sweep(self) -> int:
        return self.challenges.expire_sweep()

    # ---------------------------------------------------------------- routing

    def route(self, req: ApiRequest) -> ApiResponse:
        try:
            return self._dispatch(req)
        except Da2faError as exc:
            for klass in type(exc).__mro__:
                if klass in ERROR_MAP:
                    status, code = ERROR_MAP[klass]
                    return ApiResponse(status, {"error": code, "detail": str(exc)})
            return ApiResponse(500, {"error": "internal", "detail": str(exc)})

    def _dispatch(self, req: ApiRequest) -> ApiResponse:
        segs = [s for s in req.path.split("/") if s]
        method = req.method.upper()

        if not segs:
            return ApiResponse(200, {"outcome": "ok", "service": "da2fa",
                                     "time": self.core.now()})

        if segs[0] == "actions" and len(segs) == 1 and method == "POST":
            return self._post_action(req)
        if segs[0] == "c" and len(segs) == 2 and method == "GET":
            return self._get_click(req, segs[1])
        if segs[0] == "c" and len(segs) == 3 and segs[2] == "fp" and method == "POST":
            self._pending_fp[segs[1]] = self._fp_doc_from_body(req)
            return ApiResponse(200, {"outcome": "fingerprint_recorded"})
        if segs[0] == "a" and len(segs) == 2:
            if method == "GET":
                return self._get_approval(segs[1])
            if method == "POST":
                return self._post_approval(req, segs[1])
        if segs[0] == "escalations" and len(segs) == 3 and method == "POST":
            if segs[2] == "kba":
                return self._post_kba(req, segs[1])
            if segs[2] == "proof":
                return self._post_proof(req, segs[1])
        if segs[0] == "enrollments" and len(segs) == 1 and method == "POST":
            return self._post_enrollment(req)
        if segs[0] == "r" and len(segs) == 2 and method in ("GET", "POST"):
            return self._complete_enrollment(req, segs[1])
        if segs[0] == "claim" and len(segs) == 2 and method == "GET":
            return self._get_claim(segs[1])
        if segs[0] == "offers" and len(segs) == 3 and segs[2] == "confirm" and method == "POST":
            return self._post_offer(req, segs[1])
        if segs[0] == "admin":
            return self._admin(req, segs, method)
        if segs[0] == "sim":
            return self._sim(req, segs, method)

        return ApiResponse(404, {"error": "not_found", "detail": req.path})

    # -- request plumbing --------------------------------------------------

    def _cookie_from(self, req: ApiRequest) -> Optional[str]:
        header = req.headers.get("cookie", "")
        name = self.config.cookie_name
        for part in header.split(";"):
            part = part.strip()
            if part.startswith(name + "="):
                return part[len(name) + 1:]
        if "cookie" in req.query:
            return req.query["cookie"]
        return req.headers.get("x-da2fa-cookie")

    def _fp_doc_from_query(self, req: ApiRequest) -> Optional[dict]:
        raw = req.query.get("fp")
        if raw is None:
            return None
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise errors.InvalidFingerprint("fp query parameter is not valid JSON") from exc
        return doc

    def _fp_doc_from_body(self, req: ApiRequest) -> dict:
        body = req.body or {}
        doc = body.get("fp")
        if not isinstance(doc, dict):
            raise errors.InvalidFingerprint("body must carry an 'fp' attribute map")
        return doc

    def _body(self, req: ApiRequest) -> dict:
        if req.body is None:
            raise InvalidRequest("request body required")
        return req.body

    # -- handlers ---------------------------------------------------------

    def _post_action(self, req: ApiRequest) -> ApiResponse:
        body = self._body(req)
        for name in ("account_id", "kind", "payload_summary"):
            if name not in body:
                raise InvalidRequest(f"missing field {name!r}")
        action, challenge, _text = self.create_action(
            account_id=body["account_id"],
            kind=body["kind"],
            payload_summary=body["payload_summary"],
            risk_override=body.get("risk_level"),
            target_phone=body.get("target_phone"),
        )
        return ApiResponse(201, {
            "outcome": "challenge_sent",
            "action": codec.action_to_doc(action),
            "challenge_id": challenge.challenge_id,
            "target_phone": challenge.target_phone,
        })

    def _click_doc(self, outcome: ClickOutcome) -> dict:
        doc: dict = {"outcome": outcome.kind.value}
        if outcome.challenge_id:
            doc["challenge_id"] = outcome.challenge_id
        if outcome.action_id:
            doc["action_id"] = outcome.action_id
        if outcome.detail:
            doc["detail"] = outcome.detail
        if outcome.decision is not None:
            doc["verdict"] = outcome.decision.verdict.value
            doc["fingerprint_score"] = outcome.decision.fingerprint_score
            doc["cookie_matched"] = outcome.decision.cookie_matched
        if outcome.approval_url:
            doc["approval_url"] = outcome.approval_url
        if outcome.escalation_id:
            doc["escalation_id"] = outcome.escalation_id
            doc["escalation_method"] = outcome.escalation_method
            doc["kba_questions"] = outcome.kba_questions
        return doc

    def _get_click(self, req: ApiRequest, token: str) -> ApiResponse:
        outcome = self.click(token, self._cookie_from(req), self._fp_doc_from_query(req))
        return ApiResponse(
            CLICK_STATUS[outcome.kind],
            self._click_doc(outcome),
            location=outcome.approval_url if outcome.kind is ClickOutcomeKind.PASSED else None,
        )

    def _get_approval(self, session_token: str) -> ApiResponse:
        view = self.challenges.render_approval(session_token)
        return ApiResponse(200, {
            "outcome": "review",
            "action_id": view.action_id,
            "kind": view.kind.value,
            "payload_summary": view.payload_summary,
            "requires_completion_payload": view.requires_completion_payload,
            "expires_at": view.expires_at,
            "pending_offer_id": view.pending_offer_id,
        })

    def _post_approval(self, req: ApiRequest, session_token: str) -> ApiResponse:
        body = self._body(req)
        try:
            decision = ApprovalDecision(body.get("decision", ""))
        except ValueError as exc:
            raise InvalidRequest("decision must be APPROVE or DENY") from exc
        action = self.challenges.submit_approval(
            session_token, decision, body.get("completion_payload"),
        )
        outcome = "completed" if decision is ApprovalDecision.APPROVE else "denied"
        return ApiResponse(200, {"outcome": outcome, "action": codec.action_to_doc(action)})

    def _escalation_doc(self, result: EscalationOutcome) -> dict:
        doc: dict = {"outcome": result.result.value.lower(), "result": result.result.value}
        if result.attempts_remaining is not None:
            doc["attempts_remaining"] = result.attempts_remaining
        if result.approval_url:
            doc["approval_url"] = result.approval_url
        if result.offer_id:
            doc["offer_id"] = result.offer_id
        return doc

    def _post_kba(self, req: ApiRequest, escalation_id: str) -> ApiResponse:
        body = self._body(req)
        raw = body.get("answers")
        if not isinstance(raw, list):
            raise InvalidRequest("answers must be a list of [question_index, answer]")
        answers = []
        for pair in raw:
            if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
                raise InvalidRequest("each answer must be [question_index, answer]")
            answers.append((int(pair[0]), str(pair[1])))
        result = self.escalations.answer_kba(escalation_id, answers)
        return ApiResponse(200, self._escalation_doc(result))

    def _post_proof(self, req: ApiRequest, escalation_id: str) -> ApiResponse:
        body = self._body(req)
        code = body.get("code")
        if not isinstance(code, str):
            raise InvalidRequest("code must be a string")
        result = self.escalations.verify_resource_proof(escalation_id, code)
        return ApiResponse(200, self._escalation_doc(result))

    def _post_enrollment(self, req: ApiRequest) -> ApiResponse:
        body = self._body(req)
        account_id = body.get("account_id")
        if not account_id:
            raise InvalidRequest("missing field 'account_id'")
        fp_doc = body.get("fp") if isinstance(body.get("fp"), dict) else None
        observed = Fingerprint.from_doc(fp_doc) if fp_doc else Fingerprint({})
        ticket, url = self.registration.begin_enrollment(
            account_id, self._cookie_from(req), observed,
        )
        return ApiResponse(201, {
            "outcome": "ticket_issued",
            "enrollment_url": url,
            "expires_at": ticket.expires_at,
        })

    def _complete_enrollment(self, req: ApiRequest, reg_token: str) -> ApiResponse:
        if req.method.upper() == "GET":
            fp_doc = self._fp_doc_from_query(req)
        else:
            fp_doc = self._fp_doc_from_body(req)
        observed = Fingerprint.from_doc(fp_doc) if fp_doc else Fingerprint({})
        device, cookie = self.registration.complete_enrollment(reg_token, observed)
        return ApiResponse(
            201,
            {"outcome": "enrolled", "device_id": device.device_id, "cookie_token": cookie},
            set_cookie=f"{self.config.cookie_name}={cookie}; Path=/",
        )

    def _get_claim(self, claim_token: str) -> ApiResponse:
        device, cookie = self.registration.claim_cookie(claim_token)
        return ApiResponse(
            200,
            {"outcome": "cookie_claimed", "device_id": device.device_id,
             "cookie_token": cookie},
            set_cookie=f"{self.config.cookie_name}={cookie}; Path=/",
        )

    def _post_offer(self, req: ApiRequest, offer_id: str) -> ApiResponse:
        body = self._body(req)
        if "confirm" not in body:
            raise InvalidRequest("missing field 'confirm'")
        decision = self.registration.confirm_auto_registration(offer_id, bool(body["confirm"]))
        doc: dict = {
            "outcome": "offer_confirmed" if decision.confirmed else "offer_declined",
        }
        if decision.device_id:
            doc["device_id"] = decision.device_id
        if decision.claim_url:
            doc["claim_url"] = decision.claim_url
        return ApiResponse(200, doc)

    # -- admin ---------------------------------------------------------------

    def _admin(self, req: ApiRequest, segs: list[str], method: str) -> ApiResponse:
        if req.headers.get("x-admin-token") != self.config.admin_token:
            return ApiResponse(401, {"error": "unauthorized"})
        if segs[1:2] == ["accounts"] and len(segs) == 3 and method == "GET":
            account, _ = self.core.account(segs[2])
            devices = self.core.devices_of(account)
            actions = [
                codec.action_to_doc(a)
                for _, a, _ in self.core.list_all(SensitiveAction)
                if a.account_id == account.account_id
            ]
            return ApiResponse(200, {
                "outcome": "ok",
                "account": codec.account_to_doc(account),
                "devices": [codec.device_to_doc(d) for d in devices],
                "actions": actions,
            })
        if segs[1:] == ["events"] and method == "GET":
            since = int(req.query.get("since", "0"))
            events = [e.to_doc() for e in self.core.store.events(since)]
            return ApiResponse(200, {"outcome": "ok", "events": events})
        return ApiResponse(404, {"error": "not_found", "detail": req.path})

    # -- hosted simulation (playground support) ----------------------------------

    def _sim(self, req: ApiRequest, segs: list[str], method: str) -> ApiResponse:
        if self.simnet is None:
            return ApiResponse(404, {"error": "sim_disabled"})
        sim = self.simnet
        if segs == ["sim", "devices"] and method == "GET":
            return ApiResponse(200, {
                "outcome": "ok",
                "devices": [sim.device_doc(d) for d in sorted(sim.devices)],
            })
        if len(segs) == 3 and segs[1] == "devices" and method == "GET":
            return ApiResponse(200, {"outcome": "ok", "device": sim.device_doc(segs[2])})
        if (len(segs) == 4 and segs[1] == "devices" and segs[3] == "fingerprint"
                and method == "POST"):
            sim.set_fingerprint(segs[2], self._fp_doc_from_body(req))
            return ApiResponse(200, {"outcome": "ok", "device": sim.device_doc(segs[2])})
        if segs == ["sim", "jack"] and method == "POST":
            body = self._body(req)
            sim.sim_jack(body["phone"], body["sim_device_id"])
            return ApiResponse(200, {"outcome": "ok"})
        if segs == ["sim", "forward"] and method == "POST":
            body = self._body(req)
            message = sim.forward(body["from"], body["message_id"], body["to"])
            return ApiResponse(200, {"outcome": "ok", "message_id": message.message_id})
        if segs == ["sim", "click"] and method == "POST":
            body = self._body(req)
            result = sim.click_from(body["sim_device_id"], body["url"])
            return ApiResponse(200, {
                "outcome": "ok", "status": result.status, "response": result.outcome,
            })
        return ApiResponse(404, {"error": "not_found", "detail": req.path})
