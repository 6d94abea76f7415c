from __future__ import annotations

from types import SimpleNamespace

import pytest
from hypothesis import HealthCheck, settings

from da2fa.config import Config
from da2fa.fixtures import register_sim_device, seed_account, wire_simnet
from da2fa.harness import LOGICAL_START
from da2fa.runtime import LogicalClock, SeededTokens
from da2fa.service import Service

settings.register_profile(
    "da2fa",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("da2fa")

P1 = "+15550100001"
P2 = "+15550100002"


def make_service(seed: int = 4242, config: Config | None = None) -> Service:
    return Service(
        config or Config(),
        clock=LogicalClock(start=LOGICAL_START),
        tokens=SeededTokens(seed),
    )


def make_world(seed: int = 4242, phones: list[str] | None = None,
               with_kba: bool = True) -> SimpleNamespace:
    """Service + simnet with the standard victim seeded and routed."""
    service = make_service(seed)
    sim = wire_simnet(service)
    seed_account(service, "alice", phones or [P1], with_kba=with_kba)
    phone_device = register_sim_device(service, sim, "alice_phone", "victim_phone", "alice")
    sim.route_phone(P1, "alice_phone")
    return SimpleNamespace(
        service=service,
        sim=sim,
        clock=service.core.clock,
        core=service.core,
        store=service.core.store,
        phone_device_id=phone_device,
    )


@pytest.fixture
def svc() -> Service:
    return make_service()


@pytest.fixture
def world() -> SimpleNamespace:
    return make_world()
