"""Seed data shared by scenarios, tests, and the playground demo world.

The fingerprint profiles are constructed so that the attacker profile
shares zero attribute values with either victim profile: cloning k
attributes then yields a similarity of exactly k/12 under equal weights.
"""

from __future__ import annotations

from typing import Optional

from .model import Fingerprint, KbaEntry, TrustTier, UserAccount, digest_password
from .registration import RegistrationFlows
from .service import Service
from .simnet import InProcessTransport, SimNet, Transport

FINGERPRINTS: dict[str, dict[str, str]] = {
    "victim_phone": {
        "browser_type": "mobile-safari",
        "browser_version": "17.4",
        "touch_screen": "yes",
        "system_fonts": "sf-pro,helvetica-neue",
        "languages": "en-US,en",
        "screen_size": "393x852",
        "color_depth": "32",
        "time_zone": "America/New_York",
        "plugins": "none",
        "network_name": "maple-street-wifi",
        "carrier_name": "verimobile",
        "geo_region": "US-NY",
    },
    "victim_laptop": {
        "browser_type": "chrome",
        "browser_version": "124.0",
        "touch_screen": "no",
        "system_fonts": "arial,calibri,georgia",
        "languages": "en-US",
        "screen_size": "1440x900",
        "color_depth": "24",
        "time_zone": "America/New_York",
        "plugins": "pdf-viewer",
        "network_name": "maple-street-wifi",
        "carrier_name": "none",
        "geo_region": "US-NY",
    },
    "attacker": {
        "browser_type": "firefox",
        "browser_version": "118.0",
        "touch_screen": "stylus",
        "system_fonts": "dejavu-sans,liberation",
        "languages": "en-GB",
        "screen_size": "1920x1080",
        "color_depth": "30",
        "time_zone": "Etc/UTC",
        "plugins": "vpn-extension",
        "network_name": "transit-hotspot",
        "carrier_name": "burner-sim",
        "geo_region": "EU-XX",
    },
    # Replacement handset: same home network and habits, new hardware.
    # Exactly 6 of 12 attributes match victim_phone.
    "new_phone": {
        "browser_type": "mobile-chrome",
        "browser_version": "125.1",
        "touch_screen": "yes",
        "system_fonts": "roboto,noto-sans",
        "languages": "en-US,en",
        "screen_size": "412x915",
        "color_depth": "24",
        "time_zone": "America/New_York",
        "plugins": "webview",
        "network_name": "maple-street-wifi",
        "carrier_name": "verimobile",
        "geo_region": "US-NY",
    },
    "friend_tablet": {
        "browser_type": "tablet-safari",
        "browser_version": "16.7",
        "touch_screen": "yes",
        "system_fonts": "sf-pro,marker-felt",
        "languages": "en-US,es",
        "screen_size": "820x1180",
        "color_depth": "32",
        "time_zone": "America/Chicago",
        "plugins": "reader-mode",
        "network_name": "lakeside-wifi",
        "carrier_name": "none",
        "geo_region": "US-IL",
    },
    "work_phone": {
        "browser_type": "mobile-edge",
        "browser_version": "123.2",
        "touch_screen": "yes",
        "system_fonts": "segoe-ui,consolas",
        "languages": "en-US",
        "screen_size": "360x800",
        "color_depth": "24",
        "time_zone": "America/New_York",
        "plugins": "mdm-agent",
        "network_name": "corp-guest",
        "carrier_name": "verimobile",
        "geo_region": "US-NY",
    },
}


def fingerprint(profile: str) -> Fingerprint:
    return Fingerprint.from_doc(FINGERPRINTS[profile])


def seed_account(service: Service, account_id: str, phones: list[str],
                 with_kba: bool = True, password: str = "hunter2") -> UserAccount:
    """Create an account with the configured KBA fixtures pre-enrolled."""
    core = service.core
    entries = []
    if with_kba:
        for question, answer in core.config.kba_fixtures:
            entries.append(KbaEntry.create(question, answer, salt=core.tokens.token(8)))
    account = UserAccount(
        account_id=account_id,
        phone_numbers=list(phones),
        kba_entries=entries,
        password_digest=digest_password(password),
    )
    core.insert(account)
    return account


def kba_answers(service: Service) -> list[str]:
    return [answer for _, answer in service.core.config.kba_fixtures]


def register_sim_device(service: Service, sim: SimNet, sim_device_id: str,
                        profile: str, account_id: Optional[str] = None,
                        tier: TrustTier = TrustTier.OWNER) -> Optional[str]:
    """Add a simulated device; when account_id is given, also register its
    profile with the service and place the issued cookie in the device jar.

    Returns the service-side device id, or None for unregistered hardware.
    """
    device = sim.add_device(sim_device_id, fingerprint(profile))
    if account_id is None:
        return None
    registration: RegistrationFlows = service.registration
    record, cookie = registration.register_bootstrap_device(
        account_id, device.fingerprint, tier,
    )
    device.cookie_jar[sim.service_domain] = cookie
    return record.device_id


def wire_simnet(service: Service, transport: Optional[Transport] = None) -> SimNet:
    """Attach a fresh simulated carrier to the service's delivery hooks."""
    sim = SimNet(
        transport=transport or InProcessTransport(service),
        clock=service.core.clock,
        service_base_url=service.config.base_url,
        cookie_name=service.config.cookie_name,
        event_store=service.core.store,
    )
    service.core.sms_sink = sim.deliver
    service.core.statement_sink = sim.post_statement_for_account
    service.simnet = sim
    return sim


DEMO_ACCOUNT = "alice"
DEMO_PHONE = "+15550100001"


def build_demo_world(service: Service, sim: SimNet) -> dict:
    """The playground world: Alice's phone and laptop, plus Mallory's device."""
    seed_account(service, DEMO_ACCOUNT, [DEMO_PHONE])
    phone_id = register_sim_device(service, sim, "alice_phone", "victim_phone", DEMO_ACCOUNT)
    laptop_id = register_sim_device(service, sim, "alice_laptop", "victim_laptop", DEMO_ACCOUNT)
    register_sim_device(service, sim, "mallory_device", "attacker")
    sim.route_phone(DEMO_PHONE, "alice_phone")
    sim.route_statement(DEMO_ACCOUNT, "alice_phone")
    return {
        "account_id": DEMO_ACCOUNT,
        "phone": DEMO_PHONE,
        "devices": {
            "alice_phone": phone_id,
            "alice_laptop": laptop_id,
            "mallory_device": None,
        },
        "kba_answers": kba_answers(service),
    }
