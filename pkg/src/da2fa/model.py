"""Domain types and the two central state machines.

Everything here is a plain value: the transition functions return new
records and never touch shared state. Mutation happens only in the store,
under optimistic versioning.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from .errors import IllegalTransition, InvalidFingerprint, TokenAlreadyConsumed

# The full read-only attribute set a client may report. Unknown keys are
# rejected at parse time; absent attributes are omitted, never empty.
CANONICAL_FINGERPRINT_KEYS = (
    "browser_type",
    "browser_version",
    "touch_screen",
    "system_fonts",
    "languages",
    "screen_size",
    "color_depth",
    "time_zone",
    "plugins",
    "network_name",
    "carrier_name",
    "geo_region",
)


class ActionKind(str, Enum):
    PASSWORD_RESET = "PASSWORD_RESET"
    ADDRESS_CHANGE = "ADDRESS_CHANGE"
    FUNDS_TRANSFER = "FUNDS_TRANSFER"
    ANOMALOUS_OTHER = "ANOMALOUS_OTHER"


class RiskLevel(str, Enum):
    LOW = "LOW"
    HIGH = "HIGH"


# Risk assigned per action kind unless overridden at request time.
DEFAULT_RISK = {
    ActionKind.PASSWORD_RESET: RiskLevel.HIGH,
    ActionKind.ADDRESS_CHANGE: RiskLevel.HIGH,
    ActionKind.FUNDS_TRANSFER: RiskLevel.HIGH,
    ActionKind.ANOMALOUS_OTHER: RiskLevel.LOW,
}


class ActionState(str, Enum):
    REQUESTED = "REQUESTED"
    CHALLENGE_SENT = "CHALLENGE_SENT"
    ESCALATING = "ESCALATING"
    AWAITING_APPROVAL = "AWAITING_APPROVAL"
    COMPLETED = "COMPLETED"
    DENIED = "DENIED"
    EXPIRED = "EXPIRED"


class ActionEvent(str, Enum):
    CHALLENGE_ISSUED = "ChallengeIssued"
    CHALLENGE_PASSED = "ChallengePassed"
    CHALLENGE_FAILED = "ChallengeFailed"
    ESCALATION_PASSED = "EscalationPassed"
    ESCALATION_FAILED = "EscalationFailed"
    APPROVED = "Approved"
    DENIED = "Denied"
    TIMED_OUT = "TimedOut"


class ChallengeState(str, Enum):
    ISSUED = "ISSUED"
    CLICKED = "CLICKED"
    PASSED = "PASSED"
    ESCALATED = "ESCALATED"
    REPORTED = "REPORTED"
    EXPIRED = "EXPIRED"


class ChallengeEvent(str, Enum):
    CLICKED = "Clicked"
    RECOGNIZED = "Recognized"
    NOT_RECOGNIZED = "NotRecognized"
    REPORTED = "Reported"
    TIMED_OUT = "TimedOut"


class TrustTier(str, Enum):
    OWNER = "OWNER"
    FRIEND = "FRIEND"


class Verdict(str, Enum):
    RECOGNIZED = "RECOGNIZED"
    UNCERTAIN = "UNCERTAIN"
    UNRECOGNIZED = "UNRECOGNIZED"


TERMINAL_ACTION_STATES = frozenset(
    {ActionState.COMPLETED, ActionState.DENIED, ActionState.EXPIRED}
)

TERMINAL_CHALLENGE_STATES = frozenset(
    {
        ChallengeState.PASSED,
        ChallengeState.ESCALATED,
        ChallengeState.REPORTED,
        ChallengeState.EXPIRED,
    }
)

# The complete legal transition table for sensitive actions: 11 pairs.
ACTION_TRANSITIONS: dict[tuple[ActionState, ActionEvent], ActionState] = {
    (ActionState.REQUESTED, ActionEvent.CHALLENGE_ISSUED): ActionState.CHALLENGE_SENT,
    (ActionState.CHALLENGE_SENT, ActionEvent.CHALLENGE_PASSED): ActionState.AWAITING_APPROVAL,
    (ActionState.CHALLENGE_SENT, ActionEvent.CHALLENGE_FAILED): ActionState.ESCALATING,
    (ActionState.CHALLENGE_SENT, ActionEvent.DENIED): ActionState.DENIED,
    (ActionState.CHALLENGE_SENT, ActionEvent.TIMED_OUT): ActionState.EXPIRED,
    (ActionState.ESCALATING, ActionEvent.ESCALATION_PASSED): ActionState.AWAITING_APPROVAL,
    (ActionState.ESCALATING, ActionEvent.ESCALATION_FAILED): ActionState.DENIED,
    (ActionState.ESCALATING, ActionEvent.TIMED_OUT): ActionState.EXPIRED,
    (ActionState.AWAITING_APPROVAL, ActionEvent.APPROVED): ActionState.COMPLETED,
    (ActionState.AWAITING_APPROVAL, ActionEvent.DENIED): ActionState.DENIED,
    (ActionState.AWAITING_APPROVAL, ActionEvent.TIMED_OUT): ActionState.EXPIRED,
}

# Challenge lifecycle: 7 pairs.
CHALLENGE_TRANSITIONS: dict[tuple[ChallengeState, ChallengeEvent], ChallengeState] = {
    (ChallengeState.ISSUED, ChallengeEvent.CLICKED): ChallengeState.CLICKED,
    (ChallengeState.CLICKED, ChallengeEvent.RECOGNIZED): ChallengeState.PASSED,
    (ChallengeState.CLICKED, ChallengeEvent.NOT_RECOGNIZED): ChallengeState.ESCALATED,
    (ChallengeState.ISSUED, ChallengeEvent.REPORTED): ChallengeState.REPORTED,
    (ChallengeState.CLICKED, ChallengeEvent.REPORTED): ChallengeState.REPORTED,
    (ChallengeState.ISSUED, ChallengeEvent.TIMED_OUT): ChallengeState.EXPIRED,
    (ChallengeState.CLICKED, ChallengeEvent.TIMED_OUT): ChallengeState.EXPIRED,
}


@dataclass(frozen=True)
class Fingerprint:
    """Read-only device attributes, keyed by the canonical attribute names."""

    attributes: dict[str, str]

    @classmethod
    def from_doc(cls, doc: dict) -> "Fingerprint":
        """Parse and validate a raw attribute document.

        Unknown keys, non-string values, and values that are empty after
        trimming are all rejected.
        """
        if not isinstance(doc, dict):
            raise InvalidFingerprint("fingerprint document must be a map")
        cleaned: dict[str, str] = {}
        for key, value in doc.items():
            if key not in CANONICAL_FINGERPRINT_KEYS:
                raise InvalidFingerprint(f"unknown attribute {key!r}")
            if not isinstance(value, str):
                raise InvalidFingerprint(f"attribute {key!r} must be a string")
            trimmed = value.strip()
            if not trimmed:
                raise InvalidFingerprint(f"attribute {key!r} is empty; omit it instead")
            cleaned[key] = trimmed
        return cls(attributes=cleaned)

    @property
    def is_empty(self) -> bool:
        return not self.attributes

    def to_doc(self) -> dict[str, str]:
        return dict(self.attributes)


def normalize_answer(text: str) -> str:
    return text.strip().casefold()


def digest_answer(salt: str, answer: str) -> str:
    return hashlib.sha256((salt + ":" + normalize_answer(answer)).encode()).hexdigest()


def digest_password(password: str) -> str:
    return hashlib.sha256(("pw:" + password).encode()).hexdigest()


@dataclass
class KbaEntry:
    question: str
    salt: str
    answer_digest: str

    @classmethod
    def create(cls, question: str, answer: str, salt: str) -> "KbaEntry":
        return cls(question=question, salt=salt, answer_digest=digest_answer(salt, answer))

    def matches(self, answer: str) -> bool:
        return hmac.compare_digest(digest_answer(self.salt, answer), self.answer_digest)


@dataclass
class UserAccount:
    account_id: str
    phone_numbers: list[str]
    device_ids: list[str] = field(default_factory=list)
    kba_entries: list[KbaEntry] = field(default_factory=list)
    password_digest: str = ""


@dataclass
class DeviceProfile:
    device_id: str
    owner_account_id: str
    cookie_token: Optional[str]
    fingerprint: Fingerprint
    trust_tier: TrustTier
    registered_at: int
    last_seen_at: int


@dataclass
class SensitiveAction:
    action_id: str
    account_id: str
    kind: ActionKind
    risk_level: RiskLevel
    payload_summary: str
    state: ActionState
    created_at: int
    expires_at: int


@dataclass
class RecognitionDecision:
    cookie_matched: bool
    matched_device_id: Optional[str]
    fingerprint_score: float
    verdict: Verdict

    def __post_init__(self):
        if not 0.0 <= self.fingerprint_score <= 1.0:
            raise ValueError(f"score {self.fingerprint_score} outside [0, 1]")
        if self.verdict is Verdict.RECOGNIZED and self.matched_device_id is None:
            raise ValueError("RECOGNIZED requires a matched device")


@dataclass
class ChallengeRecord:
    challenge_id: str
    action_id: str
    account_id: str
    target_phone: str
    approve_token: str
    report_token: str
    state: ChallengeState
    issued_at: int
    expires_at: int
    decision: Optional[RecognitionDecision] = None
    responding_device_id: Optional[str] = None
    is_escalation_challenge: bool = False


@dataclass
class ApprovalSession:
    """Single-use approval capability bound to one (action, device) pair."""

    session_token: str
    action_id: str
    device_id: str
    issued_at: int
    expires_at: int
    consumed: bool = False


class EscalationMethod(str, Enum):
    SECOND_DEVICE = "SECOND_DEVICE"
    KBA = "KBA"
    RESOURCE_PROOF = "RESOURCE_PROOF"


class EscalationState(str, Enum):
    OPEN = "OPEN"
    PASSED = "PASSED"
    FAILED = "FAILED"


@dataclass
class EscalationSession:
    session_id: str
    action_id: str
    account_id: str
    pending_method: EscalationMethod
    attempts_remaining: int
    state: EscalationState
    # Click evidence retained from the failed click, if still within TTL.
    click_context_id: Optional[str] = None
    # KBA: indexes into the account's kba_entries offered as questions.
    question_indexes: list[int] = field(default_factory=list)
    # Resource proof: the emitted statement code and its deadline.
    proof_code: Optional[str] = None
    proof_expires_at: Optional[int] = None


@dataclass
class ClickContext:
    """Cookie/fingerprint evidence kept after an unrecognized click."""

    context_id: str
    challenge_id: str
    account_id: str
    presented_cookie: Optional[str]
    fingerprint: Fingerprint
    decision: RecognitionDecision
    retained_until: int


class TicketState(str, Enum):
    OPEN = "OPEN"
    USED = "USED"
    EXPIRED = "EXPIRED"


@dataclass
class EnrollmentTicket:
    reg_token: str
    account_id: str
    issued_at: int
    expires_at: int
    state: TicketState = TicketState.OPEN


class OfferState(str, Enum):
    PENDING = "PENDING"
    CONFIRMED = "CONFIRMED"
    DISCARDED = "DISCARDED"


@dataclass
class AutoRegistrationOffer:
    offer_id: str
    account_id: str
    # Snapshot of the click evidence, so the offer outlives the raw context.
    presented_cookie: Optional[str]
    fingerprint: Fingerprint
    created_at: int
    expires_at: int
    state: OfferState = OfferState.PENDING


@dataclass
class ClaimTicket:
    """One-time URL that delivers a freshly issued cookie to a device."""

    claim_token: str
    device_id: str
    issued_at: int
    expires_at: int
    used: bool = False


def transition_action(action: SensitiveAction, event: ActionEvent) -> SensitiveAction:
    """Apply one event to a sensitive action, returning the updated copy.

    Raises IllegalTransition for any (state, event) pair outside the table;
    that always signals a programming or replay error, never business flow.
    """
    target = ACTION_TRANSITIONS.get((action.state, event))
    if target is None:
        raise IllegalTransition(action.state, event)
    return replace(action, state=target)


def transition_challenge(ch: ChallengeRecord, event: ChallengeEvent) -> ChallengeRecord:
    """Apply one event to a challenge record, returning the updated copy."""
    target = CHALLENGE_TRANSITIONS.get((ch.state, event))
    if target is not None:
        return replace(ch, state=target)
    if event is ChallengeEvent.CLICKED:
        # Its click avenue was already spent (or timed out); single-use tokens.
        raise TokenAlreadyConsumed(ch.state, event)
    raise IllegalTransition(ch.state, event)
