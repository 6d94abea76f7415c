"""Exception hierarchy shared by all da2fa modules."""

from __future__ import annotations


class Da2faError(Exception):
    """Base class for every error raised by this package."""


class IllegalTransition(Da2faError):
    """A state machine received an event its current state does not accept."""

    def __init__(self, state, event):
        self.state = state
        self.event = event
        super().__init__(f"no transition from {state} on {event}")


class TokenAlreadyConsumed(IllegalTransition):
    """A single-use token re-triggered a click it already spent."""


# -- device identity ---------------------------------------------------------

class UnknownDevice(Da2faError):
    pass


class TokenAlreadyIssued(Da2faError):
    """Cookie issuance without rotation on a device that already has one."""


class EmptyStoredFingerprint(Da2faError):
    """Similarity denominator is zero; the stored profile is unenrollable."""


class InvalidFingerprint(Da2faError):
    """Fingerprint document violates the canonical attribute contract."""


# -- accounts / challenges ---------------------------------------------------

class InvalidRequest(Da2faError):
    """Request body or parameters fail validation (unknown kind, bad enum...)."""


class UnknownAccount(Da2faError):
    pass


class UnknownAction(Da2faError):
    pass


class PhoneNotOnAccount(Da2faError):
    pass


class ActionNotChallengeable(Da2faError):
    """Challenge issuance attempted while the action is in the wrong state."""


class UnknownSession(Da2faError):
    pass


class SessionExpired(Da2faError):
    pass


class MissingCompletionPayload(Da2faError):
    """APPROVE on a password reset arrived without the replacement password."""


# -- escalation --------------------------------------------------------------

class NoEscalationAvailable(Da2faError):
    """No second phone, too few KBA entries, and resource proof disabled."""


class WrongMethod(Da2faError):
    pass


class SessionClosed(Da2faError):
    pass


class EscalationNotPassed(Da2faError):
    """Auto-registration may only follow a PASSED escalation session."""


# -- registration ------------------------------------------------------------

class NotRecognizedSession(Da2faError):
    pass


class UnknownTicket(Da2faError):
    pass


class TicketExpired(Da2faError):
    pass


class TicketUsed(Da2faError):
    pass


class EmptyFingerprint(Da2faError):
    pass


class UnknownOffer(Da2faError):
    pass


class OfferExpired(Da2faError):
    pass


class NoClickContext(Da2faError):
    """The retained click context expired or never existed; no offer made."""


class UnknownClaim(Da2faError):
    pass


# -- simnet ------------------------------------------------------------------

class UnroutablePhone(Da2faError):
    pass


class NotInInbox(Da2faError):
    pass


class MalformedUrl(Da2faError):
    pass


# -- store -------------------------------------------------------------------

class Conflict(Da2faError):
    """Compare-and-set lost: stored version differs from the expected one."""


class UnknownKey(Da2faError):
    """Update with a nonzero expected version on a record that does not exist."""


class CorruptSnapshot(Da2faError):
    pass


# -- harness -----------------------------------------------------------------

class UnknownScenario(Da2faError):
    pass


class ScriptError(Da2faError):
    """A scenario step is malformed or referenced something that is absent."""
