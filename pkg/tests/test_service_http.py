"""The HTTP surface: endpoint map, status codes, outcome codes, cookies.

Everything here runs against a real listener bound to an ephemeral port;
the simulated devices click through HttpTransport exactly as a browser
would hit the service.
"""

from __future__ import annotations

from types import SimpleNamespace

import pytest

from da2fa.config import Config
from da2fa.fixtures import register_sim_device, seed_account, wire_simnet
from da2fa.harness import LOGICAL_START, _links
from da2fa.http_api import make_server, start_in_thread
from da2fa.runtime import LogicalClock, SeededTokens
from da2fa.service import Service
from da2fa.simnet import HttpTransport

from conftest import P1

ADMIN = {"X-Admin-Token": Config().admin_token}


@pytest.fixture
def http_world():
    service = Service(Config(), clock=LogicalClock(start=LOGICAL_START),
                      tokens=SeededTokens(2024))
    server, actual_base = make_server(service)
    start_in_thread(server)
    transport = HttpTransport(service.config.base_url, actual_base)
    sim = wire_simnet(service, transport)
    seed_account(service, "alice", [P1])
    register_sim_device(service, sim, "alice_phone", "victim_phone", "alice")
    sim.route_phone(P1, "alice_phone")

    def call(method, path, body=None, headers=None):
        return transport.request(
            method, service.config.base_url + path, headers or {}, body,
        )

    world = SimpleNamespace(service=service, sim=sim, call=call,
                            clock=service.core.clock)
    try:
        yield world
    finally:
        server.shutdown()
        server.server_close()


def test_root_reports_the_service(http_world):
    response = http_world.call("GET", "/")
    assert response.status == 200
    assert response.body["service"] == "da2fa"


def test_full_happy_path_over_http(http_world):
    created = http_world.call("POST", "/actions", {
        "account_id": "alice", "kind": "ADDRESS_CHANGE",
        "payload_summary": "deliver to 7 Oak Ave",
    })
    assert created.status == 201
    assert created.body["outcome"] == "challenge_sent"

    inbox = http_world.sim.device("alice_phone").inbox
    assert len(inbox) == 1
    click = http_world.sim.click_from("alice_phone", _links(inbox[0].body)["approve"])
    assert click.status == 303
    assert click.outcome["outcome"] == "passed"

    approval_url = click.outcome["approval_url"]
    view = http_world.sim.click_from("alice_phone", approval_url)
    assert view.status == 200
    assert view.outcome["payload_summary"] == "deliver to 7 Oak Ave"

    done = http_world.sim.post_from("alice_phone", approval_url, {"decision": "APPROVE"})
    assert done.status == 200
    assert done.outcome["outcome"] == "completed"
    assert done.outcome["action"]["state"] == "COMPLETED"


def test_unknown_token_is_404(http_world):
    response = http_world.call("GET", "/c/definitely-not-a-token")
    assert response.status == 404
    assert response.body["outcome"] == "unknown_token"


def test_replayed_token_is_410_already_used(http_world):
    http_world.call("POST", "/actions", {
        "account_id": "alice", "kind": "ADDRESS_CHANGE", "payload_summary": "x",
    })
    message = http_world.sim.device("alice_phone").inbox[-1]
    url = _links(message.body)["approve"]
    http_world.sim.click_from("alice_phone", url)
    replay = http_world.sim.click_from("alice_phone", url)
    assert replay.status == 410
    assert replay.outcome["outcome"] == "already_used"


def test_unknown_account_is_404(http_world):
    response = http_world.call("POST", "/actions", {
        "account_id": "nobody", "kind": "ADDRESS_CHANGE", "payload_summary": "x",
    })
    assert response.status == 404
    assert response.body["error"] == "unknown_account"


def test_invalid_kind_is_422(http_world):
    response = http_world.call("POST", "/actions", {
        "account_id": "alice", "kind": "DELETE_EVERYTHING", "payload_summary": "x",
    })
    assert response.status == 422
    assert response.body["error"] == "invalid_request"


def test_companion_fingerprint_post_feeds_the_click(http_world):
    http_world.call("POST", "/actions", {
        "account_id": "alice", "kind": "ADDRESS_CHANGE", "payload_summary": "x",
    })
    message = http_world.sim.device("alice_phone").inbox[-1]
    url = _links(message.body)["approve"]
    token = url.rsplit("/", 1)[1]
    fp_doc = http_world.sim.device("alice_phone").fingerprint.to_doc()
    posted = http_world.call("POST", f"/c/{token}/fp", {"fp": fp_doc})
    assert posted.status == 200
    cookie = http_world.sim.device("alice_phone").cookie_jar[http_world.sim.service_domain]
    bare_click = http_world.call(
        "GET", f"/c/{token}",
        headers={"Cookie": f"da2fa_device={cookie}"},
    )
    assert bare_click.status == 303
    assert bare_click.body["verdict"] == "RECOGNIZED"


def test_enrollment_round_trip_sets_cookie(http_world):
    register_sim_device(http_world.service, http_world.sim, "new_phone", "new_phone")
    cookie = http_world.sim.device("alice_phone").cookie_jar[http_world.sim.service_domain]
    fp_doc = http_world.sim.device("alice_phone").fingerprint.to_doc()
    ticket = http_world.call("POST", "/enrollments",
                             {"account_id": "alice", "fp": fp_doc},
                             headers={"Cookie": f"da2fa_device={cookie}"})
    assert ticket.status == 201
    result = http_world.sim.click_from("new_phone", ticket.body["enrollment_url"])
    assert result.status == 201
    assert result.set_cookie and "da2fa_device=" in result.set_cookie
    assert http_world.sim.device("new_phone").cookie_jar[http_world.sim.service_domain]


def test_enrollment_requires_recognition(http_world):
    response = http_world.call("POST", "/enrollments", {"account_id": "alice"})
    assert response.status == 401
    assert response.body["error"] == "not_recognized_session"


def test_admin_requires_token(http_world):
    assert http_world.call("GET", "/admin/accounts/alice").status == 401
    ok = http_world.call("GET", "/admin/accounts/alice", headers=ADMIN)
    assert ok.status == 200
    assert ok.body["account"]["account_id"] == "alice"
    assert len(ok.body["devices"]) == 1


def test_admin_events_since_filter(http_world):
    http_world.call("POST", "/actions", {
        "account_id": "alice", "kind": "ADDRESS_CHANGE", "payload_summary": "x",
    })
    full = http_world.call("GET", "/admin/events", headers=ADMIN)
    assert full.status == 200 and len(full.body["events"]) >= 3
    last = full.body["events"][-1]["seq"]
    empty = http_world.call("GET", f"/admin/events?since={last}", headers=ADMIN)
    assert empty.body["events"] == []


def test_sim_surface_reflects_devices(http_world):
    listing = http_world.call("GET", "/sim/devices")
    assert listing.status == 200
    assert "alice_phone" in listing.body["devices"][0]["sim_device_id"]
    one = http_world.call("GET", "/sim/devices/alice_phone")
    assert one.body["device"]["routed_phones"] == [P1]


def test_sim_click_endpoint_drives_a_device(http_world):
    http_world.call("POST", "/actions", {
        "account_id": "alice", "kind": "ADDRESS_CHANGE", "payload_summary": "x",
    })
    message = http_world.sim.device("alice_phone").inbox[-1]
    url = _links(message.body)["approve"]
    response = http_world.call("POST", "/sim/click",
                               {"sim_device_id": "alice_phone", "url": url})
    assert response.status == 200
    assert response.body["response"]["outcome"] == "passed"


def test_unrouted_path_is_404(http_world):
    assert http_world.call("GET", "/nowhere").status == 404


def test_bad_json_is_400(http_world):
    import urllib.error
    import urllib.request

    url = http_world.sim.transport.actual_base + "/actions"
    request = urllib.request.Request(url, data=b"{nope", method="POST",
                                     headers={"Content-Type": "application/json"})
    with pytest.raises(urllib.error.HTTPError) as info:
        urllib.request.urlopen(request, timeout=10)
    assert info.value.code == 400
