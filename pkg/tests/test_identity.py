"""Device identity: similarity scoring, recognition verdicts, the risk
gate, and cookie issuance."""

from __future__ import annotations

import random

import pytest
from hypothesis import assume, given, strategies as st

from da2fa import codec
from da2fa.errors import EmptyStoredFingerprint, TokenAlreadyIssued, UnknownDevice
from da2fa.identity import (
    GateOutcome,
    GatePolicy,
    WeightTable,
    fingerprint_similarity,
    gate,
    issue_cookie_token,
    recognize,
)
from da2fa.model import (
    CANONICAL_FINGERPRINT_KEYS,
    DeviceProfile,
    Fingerprint,
    RecognitionDecision,
    RiskLevel,
    TrustTier,
    Verdict,
)
from da2fa.runtime import SeededTokens, SystemTokens
from da2fa.store import Store

from oracles import oracle_similarity, random_fingerprint_doc, random_weights

KEYS = CANONICAL_FINGERPRINT_KEYS
EQUAL = WeightTable.equal()
POLICY = GatePolicy.default()


def fp(values: dict[str, str]) -> Fingerprint:
    return Fingerprint.from_doc(values)


def full_fp(prefix: str) -> Fingerprint:
    return Fingerprint({k: f"{prefix}-{k}" for k in KEYS})


def device(device_id: str, fingerprint: Fingerprint, cookie: str | None = None,
           tier: TrustTier = TrustTier.OWNER) -> DeviceProfile:
    return DeviceProfile(
        device_id=device_id, owner_account_id="alice", cookie_token=cookie,
        fingerprint=fingerprint, trust_tier=tier, registered_at=0, last_seen_at=0,
    )


# -- similarity ----------------------------------------------------------------


def test_identical_fingerprints_score_one():
    a = full_fp("v")
    assert fingerprint_similarity(a, a, EQUAL) == 1.0


def test_disjoint_values_score_zero():
    assert fingerprint_similarity(full_fp("a"), full_fp("b"), EQUAL) == 0.0


def test_nine_of_twelve_matches_is_three_quarters():
    stored = full_fp("v")
    observed_doc = stored.to_doc()
    for key in KEYS[:3]:
        observed_doc[key] = "different"
    score = fingerprint_similarity(fp(observed_doc), stored, EQUAL)
    assert score == pytest.approx(0.75, abs=1e-12)
    assert oracle_similarity(observed_doc, stored.to_doc(), EQUAL.weights) == 0.75


def test_extra_observed_attributes_are_ignored():
    # Stored has 8 attributes; observed matches 6 of them and adds 4 extras.
    stored = Fingerprint({k: f"v-{k}" for k in KEYS[:8]})
    observed_doc = {k: f"v-{k}" for k in KEYS[:6]}
    observed_doc.update({k: "noise" for k in KEYS[8:12]})
    score = fingerprint_similarity(fp(observed_doc), stored, EQUAL)
    assert score == pytest.approx(0.75, abs=1e-12)
    assert oracle_similarity(observed_doc, stored.to_doc(), EQUAL.weights) == 0.75


def test_comparison_is_case_insensitive_and_trimmed():
    stored = Fingerprint({"browser_type": "Chrome"})
    observed = Fingerprint({"browser_type": "  chrome "})
    assert fingerprint_similarity(observed, stored, EQUAL) == 1.0


def test_empty_stored_fingerprint_raises():
    with pytest.raises(EmptyStoredFingerprint):
        fingerprint_similarity(full_fp("v"), Fingerprint({}), EQUAL)


def test_zero_weighted_stored_attributes_raise():
    weights = {k: 0.0 for k in KEYS}
    weights[KEYS[0]] = 1.0
    table = WeightTable(weights=weights)
    stored = Fingerprint({KEYS[1]: "x"})  # only zero-weight attributes present
    with pytest.raises(EmptyStoredFingerprint):
        fingerprint_similarity(full_fp("v"), stored, table)


def test_similarity_matches_rational_oracle_on_random_pairs():
    rng = random.Random(20240811)
    checked = 0
    for _ in range(2000):
        observed = random_fingerprint_doc(rng)
        stored = random_fingerprint_doc(rng)
        weights = random_weights(rng)
        table = WeightTable(weights=weights)
        try:
            expected = oracle_similarity(observed, stored, weights)
        except ZeroDivisionError:
            with pytest.raises(EmptyStoredFingerprint):
                fingerprint_similarity(fp(observed), fp(stored), table)
            continue
        actual = fingerprint_similarity(fp(observed), fp(stored), table)
        assert abs(actual - float(expected)) <= 1e-12
        checked += 1
    assert checked > 1000


# -- similarity properties ---------------------------------------------------

values = st.sampled_from(["alpha", "beta", "GAMMA", "delta", "Epsilon"])
fp_docs = st.dictionaries(st.sampled_from(KEYS), values, min_size=1)
weight_tables = st.builds(
    WeightTable,
    weights=st.fixed_dictionaries({k: st.floats(0.05, 5.0) for k in KEYS}),
)


@given(fp_docs, fp_docs, weight_tables)
def test_score_always_within_bounds(observed, stored, table):
    score = fingerprint_similarity(fp(observed), fp(stored), table)
    assert 0.0 <= score <= 1.0


@given(fp_docs, weight_tables)
def test_similarity_symmetric_on_identical_key_sets(doc, table):
    other = {k: "GAMMA" for k in doc}
    a, b = fp(doc), fp(other)
    assert fingerprint_similarity(a, b, table) == fingerprint_similarity(b, a, table)


@given(fp_docs, fp_docs, weight_tables)
def test_fixing_a_mismatch_never_lowers_the_score(observed, stored, table):
    mismatched = [
        k for k, v in stored.items()
        if k in observed and observed[k].casefold() != v.casefold()
    ]
    assume(mismatched)
    key = mismatched[0]
    before = fingerprint_similarity(fp(observed), fp(stored), table)
    repaired = dict(stored)
    repaired[key] = observed[key]
    after = fingerprint_similarity(fp(observed), fp(repaired), table)
    assert after >= before


# -- recognition --------------------------------------------------------------


def test_cookie_with_identical_fingerprint_is_recognized():
    profile = full_fp("v")
    d = device("d1", profile, cookie="cookie-1")
    decision = recognize([d], "cookie-1", profile, EQUAL, POLICY)
    assert decision == RecognitionDecision(True, "d1", 1.0, Verdict.RECOGNIZED)


def test_no_cookie_and_zero_score_is_unrecognized():
    d = device("d1", full_fp("v"), cookie="cookie-1")
    decision = recognize([d], None, full_fp("attacker"), EQUAL, POLICY)
    assert decision == RecognitionDecision(False, None, 0.0, Verdict.UNRECOGNIZED)


def test_fingerprint_only_match_caps_at_uncertain():
    # 11 of 12 attributes stolen: above tau_recognized yet never RECOGNIZED.
    stored = full_fp("v")
    observed_doc = stored.to_doc()
    observed_doc[KEYS[0]] = "different"
    d = device("d1", stored, cookie="cookie-1")
    decision = recognize([d], None, fp(observed_doc), EQUAL, POLICY)
    assert decision.verdict is Verdict.UNCERTAIN
    assert not decision.cookie_matched
    assert decision.fingerprint_score == pytest.approx(11 / 12, abs=1e-12)


def test_cookie_with_alien_fingerprint_is_uncertain():
    stored = full_fp("v")
    observed_doc = {k: f"v-{k}" for k in KEYS[:3]}  # score 0.25 < tau_uncertain
    d = device("d1", stored, cookie="cookie-1")
    decision = recognize([d], "cookie-1", fp(observed_doc), EQUAL, POLICY)
    assert decision.verdict is Verdict.UNCERTAIN
    assert decision.cookie_matched and decision.matched_device_id == "d1"
    assert decision.fingerprint_score == pytest.approx(0.25, abs=1e-12)


def test_no_registered_devices_is_unrecognized():
    decision = recognize([], "whatever", full_fp("v"), EQUAL, POLICY)
    assert decision.verdict is Verdict.UNRECOGNIZED
    assert decision.fingerprint_score == 0.0


def test_friend_cookie_never_exceeds_uncertain():
    profile = full_fp("friend")
    d = device("f1", profile, cookie="cookie-f", tier=TrustTier.FRIEND)
    decision = recognize([d], "cookie-f", profile, EQUAL, POLICY)
    assert decision.cookie_matched
    assert decision.verdict is Verdict.UNCERTAIN


def test_friend_fingerprint_is_ignored_without_cookie():
    profile = full_fp("friend")
    d = device("f1", profile, cookie="cookie-f", tier=TrustTier.FRIEND)
    decision = recognize([d], None, profile, EQUAL, POLICY)
    assert decision.verdict is Verdict.UNRECOGNIZED
    assert decision.fingerprint_score == 0.0


def test_foreign_cookie_falls_back_to_fingerprint_path():
    d = device("d1", full_fp("v"), cookie="cookie-1")
    decision = recognize([d], "someone-elses-cookie", full_fp("v"), EQUAL, POLICY)
    assert not decision.cookie_matched
    assert decision.verdict is Verdict.UNCERTAIN  # identical fp, no cookie


@given(fp_docs)
def test_cookie_supremacy(doc):
    """A correct cookie with an identical fingerprint always recognizes;
    absence of a cookie never does, whatever the fingerprint."""
    profile = fp(doc)
    d = device("d1", profile, cookie="cookie-1")
    with_cookie = recognize([d], "cookie-1", profile, EQUAL, POLICY)
    assert with_cookie.verdict is Verdict.RECOGNIZED
    without = recognize([d], None, profile, EQUAL, POLICY)
    assert without.verdict is not Verdict.RECOGNIZED


@given(fp_docs, fp_docs)
def test_recognize_is_deterministic(stored_doc, observed_doc):
    d = device("d1", fp(stored_doc), cookie="cookie-1")
    first = recognize([d], "cookie-1", fp(observed_doc), EQUAL, POLICY)
    second = recognize([d], "cookie-1", fp(observed_doc), EQUAL, POLICY)
    assert first == second


# -- the gate ---------------------------------------------------------------------


def test_gate_default_table():
    recognized = RecognitionDecision(True, "d1", 1.0, Verdict.RECOGNIZED)
    uncertain = RecognitionDecision(False, None, 0.95, Verdict.UNCERTAIN)
    unrecognized = RecognitionDecision(False, None, 0.0, Verdict.UNRECOGNIZED)
    assert gate(recognized, RiskLevel.HIGH, POLICY) is GateOutcome.PASS
    assert gate(recognized, RiskLevel.LOW, POLICY) is GateOutcome.PASS
    assert gate(uncertain, RiskLevel.LOW, POLICY) is GateOutcome.ESCALATE
    assert gate(uncertain, RiskLevel.HIGH, POLICY) is GateOutcome.ESCALATE
    assert gate(unrecognized, RiskLevel.LOW, POLICY) is GateOutcome.ESCALATE
    assert gate(unrecognized, RiskLevel.HIGH, POLICY) is GateOutcome.ESCALATE


def test_gate_fail_when_escalation_disabled():
    policy = GatePolicy.default(escalation_enabled=False)
    unrecognized = RecognitionDecision(False, None, 0.0, Verdict.UNRECOGNIZED)
    assert gate(unrecognized, RiskLevel.HIGH, policy) is GateOutcome.FAIL


def test_gate_policy_validates_thresholds():
    with pytest.raises(ValueError):
        GatePolicy.default(tau_recognized=0.5, tau_uncertain=0.6)


def test_weight_table_requires_all_attributes():
    with pytest.raises(ValueError):
        WeightTable(weights={"browser_type": 1.0})


# -- cookie issuance ------------------------------------------------------------


def store_with_device(device_id: str = "d1") -> Store:
    store = Store()
    d = device(device_id, full_fp("v"))
    store.compare_and_set("device", device_id, 0, codec.device_to_doc(d))
    return store


def test_issuance_records_token_on_profile():
    store = store_with_device()
    token = issue_cookie_token(store, SeededTokens(1), "d1")
    doc, _ = store.get("device", "d1")
    assert doc["cookie_token"] == token
    assert len(token) >= 22  # at least 128 bits of urlsafe base64


def test_consecutive_issuances_differ():
    store = store_with_device()
    first = issue_cookie_token(store, SeededTokens(1), "d1")
    second = issue_cookie_token(store, SeededTokens(2), "d1", rotate=True)
    assert first != second


def test_rotation_required_once_live():
    store = store_with_device()
    issue_cookie_token(store, SeededTokens(1), "d1")
    with pytest.raises(TokenAlreadyIssued):
        issue_cookie_token(store, SeededTokens(2), "d1")


def test_unknown_device_rejected():
    with pytest.raises(UnknownDevice):
        issue_cookie_token(Store(), SeededTokens(1), "nope")


def test_ten_thousand_issuances_collide_never():
    # Birthday bound: at 256-bit tokens the collision probability for 10^4
    # draws is far below 1e-30; a single collision here means a broken source.
    store = store_with_device()
    tokens = SystemTokens()
    seen = set()
    for _ in range(10_000):
        seen.add(issue_cookie_token(store, tokens, "d1", rotate=True))
    assert len(seen) == 10_000
