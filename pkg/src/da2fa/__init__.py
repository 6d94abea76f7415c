"""Device-aware second-factor authentication, end to end: link-click
challenges, device recognition, escalation, enrollment, a simulated
SMS/carrier layer, and the adversarial scenario harness."""

from .config import Config
from .identity import GateOutcome, GatePolicy, WeightTable, fingerprint_similarity, gate, recognize
from .model import (
    ActionEvent,
    ActionKind,
    ActionState,
    ChallengeEvent,
    ChallengeState,
    Fingerprint,
    RiskLevel,
    TrustTier,
    Verdict,
    transition_action,
    transition_challenge,
)
from .scenarios import SCENARIOS, run_scenario
from .service import Service
from .store import Store

__version__ = "0.1.0"

__all__ = [
    "Config",
    "Service",
    "Store",
    "Fingerprint",
    "WeightTable",
    "GatePolicy",
    "GateOutcome",
    "fingerprint_similarity",
    "recognize",
    "gate",
    "ActionKind",
    "ActionState",
    "ActionEvent",
    "ChallengeState",
    "ChallengeEvent",
    "RiskLevel",
    "TrustTier",
    "Verdict",
    "transition_action",
    "transition_challenge",
    "SCENARIOS",
    "run_scenario",
    "__version__",
]
