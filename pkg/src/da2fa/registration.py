"""Device enrollment: bootstrap at account setup, QR-mediated enrollment,
and automatic registration of the device behind a failed click once
escalation succeeded and the user confirmed it was really her.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import identity
from .core import Core
from .errors import (
    Conflict,
    EmptyFingerprint,
    EscalationNotPassed,
    NoClickContext,
    NotRecognizedSession,
    OfferExpired,
    TicketExpired,
    TicketUsed,
    UnknownClaim,
    UnknownOffer,
    UnknownTicket,
)
from .model import (
    AutoRegistrationOffer,
    ClaimTicket,
    ClickContext,
    DeviceProfile,
    EnrollmentTicket,
    EscalationSession,
    EscalationState,
    Fingerprint,
    OfferState,
    TicketState,
    TrustTier,
    Verdict,
)
from .store import EventKind

REG_TOKEN_BYTES = 16  # 128 bits


@dataclass
class OfferDecision:
    offer_id: str
    confirmed: bool
    device_id: Optional[str] = None
    claim_url: Optional[str] = None


class RegistrationFlows:
    def __init__(self, core: Core):
        self.core = core

    # -- shared birth of a device profile -----------------------------------

    def _create_device(self, account_id: str, fingerprint: Fingerprint,
                       tier: TrustTier, method: str) -> tuple[DeviceProfile, str]:
        core = self.core
        now = core.now()
        device = DeviceProfile(
            device_id=core.tokens.new_id("dev"),
            owner_account_id=account_id,
            cookie_token=None,
            fingerprint=fingerprint,
            trust_tier=tier,
            registered_at=now,
            last_seen_at=now,
        )
        core.insert(device)
        cookie = identity.issue_cookie_token(core.store, core.tokens, device.device_id)
        account, version = core.account(account_id)
        account.device_ids.append(device.device_id)
        core.update(account, version)
        core.emit(
            EventKind.DEVICE_REGISTERED,
            {"device_id": device.device_id, "account_id": account_id},
            {"trust_tier": tier.value, "method": method},
        )
        device.cookie_token = cookie
        return device, cookie

    def register_bootstrap_device(self, account_id: str, fingerprint: Fingerprint,
                                  tier: TrustTier = TrustTier.OWNER) -> tuple[DeviceProfile, str]:
        """Account-setup seeding; no ceremony, the harness vouches for it."""
        if fingerprint.is_empty:
            raise EmptyFingerprint(account_id)
        return self._create_device(account_id, fingerprint, tier, method="seed")

    # -- QR enrollment ---------------------------------------------------------

    def _require_recognized(self, account_id: str, presented_cookie: Optional[str],
                            observed: Fingerprint) -> None:
        core = self.core
        account, _ = core.account(account_id)
        decision = identity.recognize(
            core.devices_of(account), presented_cookie, observed,
            core.config.weights, core.config.gate_policy(),
        )
        if decision.verdict is not Verdict.RECOGNIZED:
            raise NotRecognizedSession(f"requester not recognized on {account_id}")

    def begin_enrollment(self, account_id: str, presented_cookie: Optional[str],
                         observed: Fingerprint) -> tuple[EnrollmentTicket, str]:
        """Mint a short-lived enrollment URL for a recognized, logged-in device.

        The URL string itself is the QR payload; unique per (user, time).
        """
        core = self.core
        self._require_recognized(account_id, presented_cookie, observed)
        now = core.now()
        ticket = EnrollmentTicket(
            reg_token=core.tokens.token(REG_TOKEN_BYTES),
            account_id=account_id,
            issued_at=now,
            expires_at=now + core.config.enrollment_ttl,
        )
        core.insert(ticket)
        core.emit(
            EventKind.ENROLLMENT_TICKET_ISSUED,
            {"account_id": account_id}, {"expires_at": ticket.expires_at},
        )
        return ticket, f"{core.config.base_url}/r/{ticket.reg_token}"

    def complete_enrollment(self, reg_token: str,
                            observed: Fingerprint) -> tuple[DeviceProfile, str]:
        """Profile the scanning device and register it as a full OWNER device."""
        core = self.core
        hit = core.load(EnrollmentTicket, reg_token)
        if hit is None:
            raise UnknownTicket(reg_token)
        ticket, version = hit
        if ticket.state is TicketState.USED:
            raise TicketUsed(reg_token)
        if ticket.state is TicketState.EXPIRED or core.now() > ticket.expires_at:
            if ticket.state is TicketState.OPEN:
                ticket.state = TicketState.EXPIRED
                core.update(ticket, version)
            raise TicketExpired(reg_token)
        if observed.is_empty:
            raise EmptyFingerprint("enrollment requires a non-empty fingerprint")
        ticket.state = TicketState.USED
        try:
            core.update(ticket, version)
        except Conflict as exc:
            raise TicketUsed(reg_token) from exc
        return self._create_device(
            ticket.account_id, observed, TrustTier.OWNER, method="qr_enrollment",
        )

    # -- auto-registration after escalation --------------------------------------

    def offer_auto_registration(self, escalation_session_id: str) -> AutoRegistrationOffer:
        """Offer to register the device behind the originally failed click."""
        core = self.core
        hit = core.load(EscalationSession, escalation_session_id)
        if hit is None or hit[0].state is not EscalationState.PASSED:
            raise EscalationNotPassed(escalation_session_id)
        session = hit[0]
        if session.click_context_id is None:
            raise NoClickContext("escalation retained no click context")
        ctx_hit = core.load(ClickContext, session.click_context_id)
        if ctx_hit is None:
            raise NoClickContext(session.click_context_id)
        context = ctx_hit[0]
        if core.now() > context.retained_until:
            raise NoClickContext("click context retention elapsed")
        if context.decision.cookie_matched:
            # The clicking device is already on the account; nothing to enroll.
            raise NoClickContext("clicking device is already registered")
        now = core.now()
        offer = AutoRegistrationOffer(
            offer_id=core.tokens.new_id("offer"),
            account_id=context.account_id,
            presented_cookie=context.presented_cookie,
            fingerprint=context.fingerprint,
            created_at=now,
            expires_at=now + core.config.offer_ttl,
        )
        core.insert(offer)
        core.emit(
            EventKind.OFFER_CREATED,
            {"offer_id": offer.offer_id, "account_id": offer.account_id}, {},
        )
        return offer

    def confirm_auto_registration(self, offer_id: str, user_confirms: bool) -> OfferDecision:
        """Settle a pending offer; a decline is a strong attack signal."""
        core = self.core
        hit = core.load(AutoRegistrationOffer, offer_id)
        if hit is None:
            raise UnknownOffer(offer_id)
        offer, version = hit
        if offer.state is not OfferState.PENDING:
            raise UnknownOffer(offer_id)  # single decision
        if core.now() > offer.expires_at:
            offer.state = OfferState.DISCARDED
            core.update(offer, version)
            raise OfferExpired(offer_id)
        offer.state = OfferState.CONFIRMED if user_confirms else OfferState.DISCARDED
        try:
            core.update(offer, version)
        except Conflict as exc:
            raise UnknownOffer(offer_id) from exc
        core.emit(
            EventKind.OFFER_DECIDED,
            {"offer_id": offer_id, "account_id": offer.account_id},
            {"confirmed": user_confirms},
        )
        if not user_confirms:
            core.emit(
                EventKind.FRAUD_SIGNAL,
                {"account_id": offer.account_id},
                {"reason": "auto_registration_declined", "offer_id": offer_id},
            )
            return OfferDecision(offer_id=offer_id, confirmed=False)
        device, _cookie = self._create_device(
            offer.account_id, offer.fingerprint, TrustTier.OWNER,
            method="auto_registration",
        )
        # The original click already got its response; the cookie reaches the
        # device through a one-time claim URL on its next visit.
        now = core.now()
        claim = ClaimTicket(
            claim_token=core.tokens.token(REG_TOKEN_BYTES),
            device_id=device.device_id,
            issued_at=now,
            expires_at=now + core.config.claim_ttl,
        )
        core.insert(claim)
        return OfferDecision(
            offer_id=offer_id,
            confirmed=True,
            device_id=device.device_id,
            claim_url=f"{core.config.base_url}/claim/{claim.claim_token}",
        )

    def claim_cookie(self, claim_token: str) -> tuple[DeviceProfile, str]:
        """One-time delivery of an auto-registered device's cookie."""
        core = self.core
        hit = core.load(ClaimTicket, claim_token)
        if hit is None:
            raise UnknownClaim(claim_token)
        claim, version = hit
        if claim.used or core.now() > claim.expires_at:
            raise UnknownClaim(claim_token)
        claim.used = True
        try:
            core.update(claim, version)
        except Conflict as exc:
            raise UnknownClaim(claim_token) from exc
        device_hit = core.load(DeviceProfile, claim.device_id)
        if device_hit is None:
            raise UnknownClaim(claim_token)
        device = device_hit[0]
        return device, device.cookie_token

    # -- trusted-friend devices ----------------------------------------------------

    def register_friend_device(self, account_id: str, friend_fingerprint: Fingerprint,
                               presented_cookie: Optional[str],
                               observed: Fingerprint) -> tuple[DeviceProfile, str]:
        """Register a friend's device; it can never carry a challenge alone."""
        if friend_fingerprint.is_empty:
            raise EmptyFingerprint(account_id)
        self._require_recognized(account_id, presented_cookie, observed)
        return self._create_device(
            account_id, friend_fingerprint, TrustTier.FRIEND, method="friend",
        )
