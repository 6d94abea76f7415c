"""Deterministic simulated SMS/carrier layer and simulated clicking devices.

Routing is a plain phone -> device map that SIM-jacking mutates; message
bodies are carried verbatim, so a forwarded challenge hands the attacker
byte-identical URLs. Devices keep a cookie jar and a fingerprint and click
links through a transport: in-process against the service router, or over
the real HTTP listener.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from typing import Optional, Protocol

from .codec import canonical_json
from .errors import MalformedUrl, NotInInbox, UnknownDevice, UnroutablePhone
from .model import Fingerprint
from .runtime import Clock
from .service import ApiRequest, ApiResponse, Service
from .store import EventKind, Store


@dataclass
class SimMessage:
    message_id: str
    to_phone: str
    body: str
    delivered_to: str
    delivered_at: int


@dataclass
class SimDevice:
    sim_device_id: str
    fingerprint: Fingerprint
    cookie_jar: dict[str, str] = field(default_factory=dict)  # domain -> token
    inbox: list[SimMessage] = field(default_factory=list)
    statement_channel: list[str] = field(default_factory=list)


@dataclass
class ClickResult:
    url: str
    status: int
    outcome: dict
    set_cookie: Optional[str] = None


class Transport(Protocol):
    def request(self, method: str, url: str, headers: dict[str, str],
                body: Optional[dict]) -> ApiResponse: ...


class InProcessTransport:
    """Feed requests straight into the service router."""

    def __init__(self, service: Service):
        self.service = service

    def request(self, method: str, url: str, headers: dict[str, str],
                body: Optional[dict]) -> ApiResponse:
        parsed = urllib.parse.urlsplit(url)
        query = dict(urllib.parse.parse_qsl(parsed.query))
        return self.service.route(ApiRequest(
            method=method, path=parsed.path, query=query,
            headers={k.lower(): v for k, v in headers.items()}, body=body,
        ))


class HttpTransport:
    """Talk to a real listener; configured base URLs are rewritten to it.

    Message bodies embed the configured base URL regardless of transport, so
    rewriting (instead of re-templating messages) keeps traces byte-identical
    between in-process and HTTP runs.
    """

    def __init__(self, configured_base: str, actual_base: str):
        self.configured_base = configured_base.rstrip("/")
        self.actual_base = actual_base.rstrip("/")

        class _NoRedirect(urllib.request.HTTPRedirectHandler):
            def redirect_request(self, *args, **kwargs):
                return None

        self._opener = urllib.request.build_opener(_NoRedirect)

    def request(self, method: str, url: str, headers: dict[str, str],
                body: Optional[dict]) -> ApiResponse:
        if url.startswith(self.configured_base):
            url = self.actual_base + url[len(self.configured_base):]
        data = None
        send_headers = dict(headers)
        if body is not None:
            data = canonical_json(body).encode()
            send_headers["Content-Type"] = "application/json"
        request = urllib.request.Request(url, data=data, headers=send_headers, method=method)
        try:
            raw = self._opener.open(request, timeout=30)
        except urllib.error.HTTPError as exc:
            raw = exc
        payload = raw.read().decode() or "{}"
        return ApiResponse(
            status=raw.status if hasattr(raw, "status") else raw.code,
            body=json.loads(payload),
            set_cookie=raw.headers.get("Set-Cookie"),
            location=raw.headers.get("Location"),
        )


class SimNet:
    def __init__(self, transport: Transport, clock: Clock, service_base_url: str,
                 cookie_name: str = "da2fa_device", event_store: Optional[Store] = None):
        self.transport = transport
        self.clock = clock
        self.cookie_name = cookie_name
        self.service_domain = urllib.parse.urlsplit(service_base_url).netloc
        self.devices: dict[str, SimDevice] = {}
        self.routing: dict[str, str] = {}
        # Bank statements reach a fixed device, never the SMS routing table:
        # SIM-jacking must not steal the resource-proof channel.
        self.statement_routes: dict[str, str] = {}
        self._event_store = event_store
        self._message_counter = 0

    # -- topology -----------------------------------------------------------

    def add_device(self, sim_device_id: str, fingerprint: Fingerprint) -> SimDevice:
        device = SimDevice(sim_device_id=sim_device_id, fingerprint=fingerprint)
        self.devices[sim_device_id] = device
        return device

    def device(self, sim_device_id: str) -> SimDevice:
        try:
            return self.devices[sim_device_id]
        except KeyError:
            raise UnknownDevice(sim_device_id) from None

    def route_phone(self, phone: str, sim_device_id: str) -> None:
        self.device(sim_device_id)
        self.routing[phone] = sim_device_id

    def set_fingerprint(self, sim_device_id: str, fp_doc: dict) -> None:
        self.device(sim_device_id).fingerprint = Fingerprint.from_doc(fp_doc)

    def _emit(self, kind: str, subjects: dict, details: dict) -> None:
        if self._event_store is not None:
            self._event_store.append_event(kind, self.clock.now(), subjects, details)

    # -- the carrier ----------------------------------------------------------

    def deliver(self, to_phone: str, body: str) -> SimMessage:
        """Append the message to the inbox of the currently routed device."""
        device_id = self.routing.get(to_phone)
        if device_id is None:
            raise UnroutablePhone(to_phone)
        self._message_counter += 1
        message = SimMessage(
            message_id=f"m{self._message_counter}",
            to_phone=to_phone,
            body=body,
            delivered_to=device_id,
            delivered_at=self.clock.now(),
        )
        self.device(device_id).inbox.append(message)
        self._emit(
            EventKind.MESSAGE_DELIVERED,
            {"message_id": message.message_id, "sim_device_id": device_id},
            {"to_phone": to_phone, "body": body},
        )
        return message

    def sim_jack(self, phone: str, attacker_device_id: str) -> dict[str, str]:
        """Remap a number to another SIM. Previously delivered messages stay."""
        if phone not in self.routing:
            raise UnroutablePhone(phone)
        self.device(attacker_device_id)
        self.routing[phone] = attacker_device_id
        self._emit(
            EventKind.SIM_JACKED,
            {"sim_device_id": attacker_device_id},
            {"phone": phone},
        )
        return dict(self.routing)

    def forward(self, from_device_id: str, message_id: str, to_device_id: str) -> SimMessage:
        """Forward a received message verbatim; the body stays byte-identical."""
        source = self.device(from_device_id)
        original = next((msg for msg in source.inbox if msg.message_id == message_id), None)
        if original is None:
            raise NotInInbox(f"{message_id} not in {from_device_id}")
        self._message_counter += 1
        copy = SimMessage(
            message_id=f"m{self._message_counter}",
            to_phone=original.to_phone,
            body=original.body,
            delivered_to=to_device_id,
            delivered_at=self.clock.now(),
        )
        self.device(to_device_id).inbox.append(copy)
        self._emit(
            EventKind.MESSAGE_FORWARDED,
            {"message_id": message_id, "sim_device_id": to_device_id},
            {"from_device": from_device_id, "new_message_id": copy.message_id},
        )
        return copy

    def post_statement(self, sim_device_id: str, text: str) -> None:
        self.device(sim_device_id).statement_channel.append(text)

    def route_statement(self, account_id: str, sim_device_id: str) -> None:
        self.device(sim_device_id)
        self.statement_routes[account_id] = sim_device_id

    def post_statement_for_account(self, account_id: str, text: str) -> None:
        device_id = self.statement_routes.get(account_id)
        if device_id is not None:
            self.post_statement(device_id, text)

    # -- the browser -------------------------------------------------------------

    def click_from(self, sim_device_id: str, url: str) -> ClickResult:
        """Issue a GET as the device: jar cookie attached, fingerprint posted.

        Any Set-Cookie in the response lands in the device's jar, like a
        real browser would store it.
        """
        device = self.device(sim_device_id)
        parsed = urllib.parse.urlsplit(url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc or not parsed.path:
            raise MalformedUrl(url)
        query = dict(urllib.parse.parse_qsl(parsed.query))
        query["fp"] = canonical_json(device.fingerprint.to_doc())
        full_url = urllib.parse.urlunsplit((
            parsed.scheme, parsed.netloc, parsed.path,
            urllib.parse.urlencode(query), "",
        ))
        headers: dict[str, str] = {}
        cookie = device.cookie_jar.get(self.service_domain)
        if cookie is not None:
            headers["Cookie"] = f"{self.cookie_name}={cookie}"
        response = self.transport.request("GET", full_url, headers, None)
        if response.set_cookie:
            token = self._parse_cookie(response.set_cookie)
            if token is not None:
                device.cookie_jar[self.service_domain] = token
        return ClickResult(
            url=url, status=response.status, outcome=response.body,
            set_cookie=response.set_cookie,
        )

    def post_from(self, sim_device_id: str, url: str, body: dict) -> ClickResult:
        """POST as the device (approvals, KBA answers) with its jar cookie."""
        device = self.device(sim_device_id)
        parsed = urllib.parse.urlsplit(url)
        if parsed.scheme not in ("http", "https") or not parsed.netloc or not parsed.path:
            raise MalformedUrl(url)
        headers: dict[str, str] = {}
        cookie = device.cookie_jar.get(self.service_domain)
        if cookie is not None:
            headers["Cookie"] = f"{self.cookie_name}={cookie}"
        response = self.transport.request("POST", url, headers, body)
        if response.set_cookie:
            token = self._parse_cookie(response.set_cookie)
            if token is not None:
                device.cookie_jar[self.service_domain] = token
        return ClickResult(
            url=url, status=response.status, outcome=response.body,
            set_cookie=response.set_cookie,
        )

    def _parse_cookie(self, set_cookie: str) -> Optional[str]:
        first = set_cookie.split(";", 1)[0].strip()
        prefix = self.cookie_name + "="
        if first.startswith(prefix):
            return first[len(prefix):]
        return None

    # -- introspection --------------------------------------------------------------

    def device_doc(self, sim_device_id: str) -> dict:
        device = self.device(sim_device_id)
        return {
            "sim_device_id": device.sim_device_id,
            "fingerprint": device.fingerprint.to_doc(),
            "cookie_jar": dict(device.cookie_jar),
            "inbox": [
                {
                    "message_id": msg.message_id,
                    "to_phone": msg.to_phone,
                    "body": msg.body,
                    "delivered_at": msg.delivered_at,
                }
                for msg in device.inbox
            ],
            "statement_channel": list(device.statement_channel),
            "routed_phones": sorted(
                phone for phone, dev in self.routing.items() if dev == sim_device_id
            ),
        }
