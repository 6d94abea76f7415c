"""Configuration file round-trips and policy wiring."""

from __future__ import annotations

import pytest

from da2fa.config import Config, ENV_VAR
from da2fa.errors import PhoneNotOnAccount
from da2fa.fixtures import seed_account
from da2fa.identity import GateOutcome
from da2fa.model import RiskLevel, Verdict

from conftest import make_service


def test_defaults_round_trip_through_a_file(tmp_path):
    path = tmp_path / "config.json"
    original = Config()
    original.save(path)
    loaded = Config.load(path)
    assert loaded.to_doc() == original.to_doc()


def test_operator_overrides_survive_loading(tmp_path):
    path = tmp_path / "config.json"
    config = Config()
    config.tau_recognized = 0.8
    config.tau_uncertain = 0.5
    config.weights.weights["plugins"] = 0.0
    config.escalation_enabled = False
    config.kba_fixtures = [("favorite color?", "teal")]
    config.save(path)
    loaded = Config.load(path)
    assert loaded.tau_recognized == 0.8
    assert loaded.weights.weights["plugins"] == 0.0
    policy = loaded.gate_policy()
    assert policy.rules[(Verdict.UNRECOGNIZED, RiskLevel.HIGH)] is GateOutcome.FAIL
    assert loaded.kba_fixtures == [("favorite color?", "teal")]


def test_env_var_points_at_the_config(tmp_path, monkeypatch):
    path = tmp_path / "config.json"
    config = Config()
    config.provider_name = "OtherBank"
    config.save(path)
    monkeypatch.setenv(ENV_VAR, str(path))
    assert Config.from_env().provider_name == "OtherBank"
    monkeypatch.delenv(ENV_VAR)
    assert Config.from_env().provider_name == "DemoBank"


def test_invalid_thresholds_rejected_at_load(tmp_path):
    path = tmp_path / "config.json"
    config = Config()
    doc = config.to_doc()
    doc["tau_uncertain"] = 0.95  # above tau_recognized
    import json

    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        Config.load(path)


def test_account_without_phones_cannot_be_challenged():
    service = make_service()
    seed_account(service, "ghost", phones=[])
    with pytest.raises(PhoneNotOnAccount):
        service.create_action("ghost", "PASSWORD_RESET", "reset")
