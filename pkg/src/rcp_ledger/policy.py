"""The verdict engine: deterministic compliance checks for transfers.

Every transfer runs a fixed check pipeline. A rejection lists *all* failed
blocking checks in pipeline order, not just the first, so two engines
evaluating the same request against the same snapshot produce byte-identical
verdicts. Monitoring checks never block; they attach alerts.

Pipeline order (blocking):
    (a) killed contract        -> RCP-14
    (b) trading paused         -> RCP-13
    (c) sender role permission -> RCP-07
    (d) party screening: KYC   -> RCP-01, blacklist -> RCP-15
    (e) free balance available -> RCP-08
    (f) expiry reached         -> RCP-23  (issuer redemption stays open)
    (g) transfer mode          -> RCP-24
    (h) whole-unit rule        -> RCP-27
    (i) per-tx / window limit  -> RCP-11
    (j) instrument-level ban   -> RCP-10
then non-blocking monitoring thresholds append alerts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING

from .catalog import ITEM_BY_ID
from .core import Amount, LedgerError, PartyRole, Lifecycle, PrecisionLoss, validate_account_id
from .identity import RiskRating, ScreeningResult

if TYPE_CHECKING:  # pragma: no cover
    from .engine import Engine


class UnknownToken(LedgerError):
    pass


class ReasonCode(Enum):
    """Closed vocabulary of 31 control codes; number = catalog item id."""

    RCP_01 = 1
    RCP_02 = 2
    RCP_03 = 3
    RCP_04 = 4
    RCP_05 = 5
    RCP_06 = 6
    RCP_07 = 7
    RCP_08 = 8
    RCP_09 = 9
    RCP_10 = 10
    RCP_11 = 11
    RCP_12 = 12
    RCP_13 = 13
    RCP_14 = 14
    RCP_15 = 15
    RCP_16 = 16
    RCP_17 = 17
    RCP_18 = 18
    RCP_19 = 19
    RCP_20 = 20
    RCP_21 = 21
    RCP_22 = 22
    RCP_23 = 23
    RCP_24 = 24
    RCP_25 = 25
    RCP_26 = 26
    RCP_27 = 27
    RCP_28 = 28
    RCP_29 = 29
    RCP_30 = 30
    RCP_31 = 31

    @property
    def code(self) -> str:
        return f"RCP-{self.value:02d}"

    @property
    def item_name(self) -> str:
        return ITEM_BY_ID[self.value].name

    @staticmethod
    def from_code(text: str) -> "ReasonCode":
        return ReasonCode(int(text.split("-")[1]))


class TransferModeKind(str, Enum):
    FREE = "Free"
    WHITELIST_ONLY = "WhitelistOnly"
    ISSUER_ONLY = "IssuerOnly"
    NON_TRANSFERABLE = "NonTransferable"


@dataclass(frozen=True)
class TransferMode:
    kind: TransferModeKind = TransferModeKind.FREE
    whitelist: frozenset[str] = frozenset()

    def to_payload(self) -> dict:
        return {"kind": self.kind.value, "whitelist": sorted(self.whitelist)}

    @staticmethod
    def from_payload(raw: dict) -> "TransferMode":
        return TransferMode(TransferModeKind(raw["kind"]), frozenset(raw.get("whitelist", ())))


class AlertKind(str, Enum):
    THRESHOLD_OCCASIONAL = "ThresholdOccasional"
    THRESHOLD_WIRE = "ThresholdWire"
    PATTERN_DEVIATION = "PatternDeviation"
    IDENTITY_CHANGED = "IdentityChanged"


@dataclass(frozen=True)
class MonitoringAlert:
    kind: AlertKind
    subject: str
    token_id: str | None
    at: int
    details: str = ""

    def to_payload(self) -> dict:
        return {
            "alert": self.kind.value,
            "subject": self.subject,
            "token": self.token_id,
            "at": self.at,
            "details": self.details,
        }


# Occasional-transaction and wire-leg thresholds in whole units of the token,
# FATF preset; the currency label is configuration, not semantics.
DEFAULT_OCCASIONAL_THRESHOLD = 15_000
DEFAULT_WIRE_THRESHOLD = 1_000

SECONDS_PER_30_DAYS = 30 * 86_400

DEFAULT_ROLE_PERMISSIONS: dict[str, frozenset[PartyRole]] = {
    "transfer": frozenset({PartyRole.ISSUER, PartyRole.INVESTOR, PartyRole.BROKER,
                           PartyRole.CONSUMER, PartyRole.OPERATOR}),
    "mint": frozenset({PartyRole.ISSUER}),
    "burn": frozenset({PartyRole.ISSUER, PartyRole.INVESTOR, PartyRole.CONSUMER,
                       PartyRole.REGULATOR}),
    "freeze": frozenset({PartyRole.REGULATOR}),
    "unfreeze": frozenset({PartyRole.REGULATOR}),
    "recover": frozenset({PartyRole.REGULATOR}),
    "pause": frozenset({PartyRole.REGULATOR, PartyRole.OPERATOR}),
    "resume": frozenset({PartyRole.REGULATOR, PartyRole.OPERATOR}),
    "kill_switch": frozenset({PartyRole.REGULATOR}),
    "force_liquidate": frozenset({PartyRole.REGULATOR}),
    "split_lot": frozenset({PartyRole.ISSUER}),
    "meta_transfer": frozenset({PartyRole.RELAYER}),
    "set_kyc_status": frozenset({PartyRole.OPERATOR, PartyRole.REGULATOR}),
    "blacklist": frozenset({PartyRole.REGULATOR, PartyRole.OPERATOR}),
    "correct": frozenset({PartyRole.REGULATOR, PartyRole.OPERATOR}),
    "policy_set": frozenset({PartyRole.ISSUER, PartyRole.REGULATOR, PartyRole.OPERATOR}),
    "audit_export": frozenset({PartyRole.AUDITOR, PartyRole.REGULATOR}),
    "regulatory_feed": frozenset({PartyRole.REGULATOR}),
}


@dataclass(frozen=True)
class PolicyProfile:
    """Named preset for thresholds and limits; per-token policies start here."""

    name: str
    occasional_threshold: int = DEFAULT_OCCASIONAL_THRESHOLD
    wire_threshold: int = DEFAULT_WIRE_THRESHOLD
    counterparty_window_limit: tuple[int, int] | None = None  # (whole units, seconds)
    deviation_factor: int = 10
    deviation_window: int = 5
    # Medium/High ratings tighten monitoring thresholds by these divisors.
    risk_divisors: tuple[int, int, int] = (1, 2, 4)  # Low, Medium, High


PROFILES: dict[str, PolicyProfile] = {
    "default": PolicyProfile(name="default"),
    # 10,000 per counterparty per 30 days; connected transactions from 5,000
    # up are flagged as high risk.
    "finma": PolicyProfile(
        name="finma",
        occasional_threshold=5_000,
        wire_threshold=DEFAULT_WIRE_THRESHOLD,
        counterparty_window_limit=(10_000, SECONDS_PER_30_DAYS),
    ),
}


def profile_from_mapping(raw: dict) -> PolicyProfile:
    """Load a profile from a configuration mapping (JSON file contents)."""
    window = raw.get("counterparty_window_limit")
    return PolicyProfile(
        name=raw.get("name", "custom"),
        occasional_threshold=raw.get("occasional_threshold", DEFAULT_OCCASIONAL_THRESHOLD),
        wire_threshold=raw.get("wire_threshold", DEFAULT_WIRE_THRESHOLD),
        counterparty_window_limit=tuple(window) if window else None,
        deviation_factor=raw.get("deviation_factor", 10),
        deviation_window=raw.get("deviation_window", 5),
        risk_divisors=tuple(raw.get("risk_divisors", (1, 2, 4))),
    )


def profile_to_mapping(profile: PolicyProfile) -> dict:
    return {
        "name": profile.name,
        "occasional_threshold": profile.occasional_threshold,
        "wire_threshold": profile.wire_threshold,
        "counterparty_window_limit": (list(profile.counterparty_window_limit)
                                      if profile.counterparty_window_limit else None),
        "deviation_factor": profile.deviation_factor,
        "deviation_window": profile.deviation_window,
        "risk_divisors": list(profile.risk_divisors),
    }


@dataclass(frozen=True)
class PolicySet:
    """Per-token compliance configuration."""

    token_id: str
    transfer_mode: TransferMode = TransferMode()
    role_permissions: dict[str, frozenset[PartyRole]] = field(
        default_factory=lambda: dict(DEFAULT_ROLE_PERMISSIONS))
    per_tx_limit: int | None = None  # whole units
    counterparty_window_limit: tuple[int, int] | None = None
    occasional_threshold: int = DEFAULT_OCCASIONAL_THRESHOLD
    wire_threshold: int = DEFAULT_WIRE_THRESHOLD
    trading_paused: bool = False
    trading_restricted: bool = False
    require_doc_anchor: bool = True
    deviation_factor: int = 10
    deviation_window: int = 5
    risk_divisors: tuple[int, int, int] = (1, 2, 4)

    def __post_init__(self):
        for limit in (self.per_tx_limit, self.occasional_threshold, self.wire_threshold):
            if limit is not None and limit < 0:
                raise LedgerError("policy limits must be non-negative")
        if self.counterparty_window_limit is not None:
            limit, window = self.counterparty_window_limit
            if limit < 0 or window <= 0:
                raise LedgerError("window limit needs a non-negative cap and positive window")

    @staticmethod
    def from_profile(token_id: str, profile: PolicyProfile, **overrides) -> "PolicySet":
        base = PolicySet(
            token_id=token_id,
            occasional_threshold=profile.occasional_threshold,
            wire_threshold=profile.wire_threshold,
            counterparty_window_limit=profile.counterparty_window_limit,
            deviation_factor=profile.deviation_factor,
            deviation_window=profile.deviation_window,
            risk_divisors=profile.risk_divisors,
        )
        return replace(base, **overrides) if overrides else base

    def to_payload(self) -> dict:
        return {
            "transfer_mode": self.transfer_mode.to_payload(),
            "role_permissions": {
                action: sorted(role.value for role in roles)
                for action, roles in sorted(self.role_permissions.items())
            },
            "per_tx_limit": self.per_tx_limit,
            "counterparty_window_limit": (
                list(self.counterparty_window_limit)
                if self.counterparty_window_limit else None),
            "occasional_threshold": self.occasional_threshold,
            "wire_threshold": self.wire_threshold,
            "trading_paused": self.trading_paused,
            "trading_restricted": self.trading_restricted,
            "require_doc_anchor": self.require_doc_anchor,
            "deviation_factor": self.deviation_factor,
            "deviation_window": self.deviation_window,
            "risk_divisors": list(self.risk_divisors),
        }

    @staticmethod
    def from_payload(token_id: str, raw: dict) -> "PolicySet":
        window = raw.get("counterparty_window_limit")
        return PolicySet(
            token_id=token_id,
            transfer_mode=TransferMode.from_payload(raw["transfer_mode"]),
            role_permissions={
                action: frozenset(PartyRole(role) for role in roles)
                for action, roles in raw["role_permissions"].items()
            },
            per_tx_limit=raw.get("per_tx_limit"),
            counterparty_window_limit=tuple(window) if window else None,
            occasional_threshold=raw["occasional_threshold"],
            wire_threshold=raw["wire_threshold"],
            trading_paused=raw["trading_paused"],
            trading_restricted=raw["trading_restricted"],
            require_doc_anchor=raw.get("require_doc_anchor", True),
            deviation_factor=raw.get("deviation_factor", 10),
            deviation_window=raw.get("deviation_window", 5),
            risk_divisors=tuple(raw.get("risk_divisors", (1, 2, 4))),
        )


@dataclass(frozen=True)
class TransferRequest:
    token_id: str
    sender: str
    receiver: str
    amount: Amount
    at: int
    wire: bool = False
    relayed_by: str | None = None

    def __post_init__(self):
        validate_account_id(self.sender)
        validate_account_id(self.receiver)
        if self.sender == self.receiver:
            raise LedgerError("sender and receiver must differ")
        if self.amount.is_zero:
            raise LedgerError("zero-amount transfers are degenerate")

    def to_payload(self) -> dict:
        return {
            "token": self.token_id,
            "sender": self.sender,
            "receiver": self.receiver,
            "amount": self.amount.minor_units,
            "decimals": self.amount.decimals,
            "wire": self.wire,
            "relayed_by": self.relayed_by,
            "at": self.at,
        }


@dataclass(frozen=True)
class ComplianceVerdict:
    approved: bool
    reasons: tuple[ReasonCode, ...] = ()
    alerts: tuple[MonitoringAlert, ...] = ()

    @property
    def reason_codes(self) -> list[str]:
        return [reason.code for reason in self.reasons]


def _scaled_pair(lhs_minor: int, lhs_dec: int, rhs_minor: int, rhs_dec: int) -> tuple[int, int]:
    """Bring two fixed-point quantities to a common scale, exactly."""
    if lhs_dec == rhs_dec:
        return lhs_minor, rhs_minor
    if lhs_dec > rhs_dec:
        return lhs_minor, rhs_minor * 10 ** (lhs_dec - rhs_dec)
    return lhs_minor * 10 ** (rhs_dec - lhs_dec), rhs_minor


def check_permission(actor: str, action: str, state: "Engine",
                     token_id: str | None = None) -> ReasonCode | None:
    """Default-deny role gate; returns RCP-07 when no role of actor is granted."""
    policy = None
    if token_id is not None:
        policy = state.policy_for(token_id)
    permissions = policy.role_permissions if policy else DEFAULT_ROLE_PERMISSIONS
    granted = permissions.get(action, frozenset())
    if state.roles_of(actor) & granted:
        return None
    return ReasonCode.RCP_07


def evaluate_window_limit(sender: str, receiver: str, token_id: str, amount_minor: int,
                          at: int, state: "Engine") -> bool:
    """True when the counterparty window limit would be exceeded.

    Sums executed transfers sender->receiver in (at - window, at]; the
    boundary sum == limit stays within (strict inequality trips).
    """
    policy = state.policy_for(token_id)
    if policy.counterparty_window_limit is None:
        return False
    limit_whole, window = policy.counterparty_window_limit
    token = state.token_state(token_id)
    limit_minor = limit_whole * 10 ** token.decimals
    window_sum = sum(
        minor for t, minor in state.executed_between(token_id, sender, receiver)
        if at - window < t <= at
    )
    return window_sum + amount_minor > limit_minor


def raise_pattern_alert(req: TransferRequest, state: "Engine") -> MonitoringAlert | None:
    """Deviation alert when the amount dwarfs the sender's recent pattern.

    Needs at least `deviation_window` prior executed transfers; alerts when
    amount > deviation_factor x trailing mean of the last window.
    """
    policy = state.policy_for(req.token_id)
    token = state.token_state(req.token_id)
    history = state.executed_amounts(req.token_id, req.sender)
    window = policy.deviation_window
    if len(history) < window:
        return None
    tail = history[-window:]
    amount_minor, tail_sum = _scaled_pair(
        req.amount.minor_units, req.amount.decimals, sum(tail), token.decimals)
    # amount > factor * mean(tail)  <=>  amount * window > factor * sum(tail)
    if amount_minor * window > policy.deviation_factor * tail_sum:
        return MonitoringAlert(
            kind=AlertKind.PATTERN_DEVIATION,
            subject=req.sender,
            token_id=req.token_id,
            at=req.at,
            details=f"amount exceeds {policy.deviation_factor}x trailing mean",
        )
    return None


def _risk_divisor(policy: PolicySet, rating: RiskRating) -> int:
    low, medium, high = policy.risk_divisors
    return {RiskRating.LOW: low, RiskRating.MEDIUM: medium, RiskRating.HIGH: high}[rating]


def check_transfer(req: TransferRequest, state: "Engine") -> ComplianceVerdict:
    """Run the full pipeline; pure function of (request, state snapshot)."""
    token = state.token_state(req.token_id)
    if token is None:
        raise UnknownToken(f"unknown token {req.token_id}")
    policy = state.policy_for(req.token_id)
    cls = token.asset_class

    reasons: list[ReasonCode] = []

    def flag(code: ReasonCode) -> None:
        if code not in reasons:
            reasons.append(code)

    # (a) kill switch is absorbing
    if token.lifecycle is Lifecycle.KILLED:
        flag(ReasonCode.RCP_14)
    # (b) paused trading, lifecycle- or policy-level
    if token.lifecycle is Lifecycle.PAUSED or policy.trading_paused:
        flag(ReasonCode.RCP_13)
    # (c) sender must hold a role granted the transfer action
    if check_permission(req.sender, "transfer", state, req.token_id) is not None:
        flag(ReasonCode.RCP_07)
    # (d) screening, sender then receiver; KYC first, blacklist second
    screenings = (state.screen(req.sender), state.screen(req.receiver))
    if cls.compliant and any(s is ScreeningResult.KYC_MISSING for s in screenings):
        flag(ReasonCode.RCP_01)
    if any(s is ScreeningResult.BLOCKED for s in screenings):
        flag(ReasonCode.RCP_15)
    # (e) transfers draw from the free bucket only
    free = state.holding(req.token_id, req.sender).free
    free_scaled, amount_scaled = _scaled_pair(
        free, token.decimals, req.amount.minor_units, req.amount.decimals)
    if amount_scaled > free_scaled:
        flag(ReasonCode.RCP_08)
    # (f) expiry closes trading; redemption to the issuer stays open
    expired = token.expired or (token.expiry is not None and req.at >= token.expiry)
    if expired and req.receiver != token.issuer:
        flag(ReasonCode.RCP_23)
    # (g) transfer mode restrictions
    mode = policy.transfer_mode
    if not cls.transferable and req.sender != token.issuer and req.receiver != token.issuer:
        flag(ReasonCode.RCP_24)
    elif mode.kind is TransferModeKind.NON_TRANSFERABLE:
        if req.sender != token.issuer and req.receiver != token.issuer:
            flag(ReasonCode.RCP_24)
    elif mode.kind is TransferModeKind.ISSUER_ONLY:
        if token.issuer not in (req.sender, req.receiver):
            flag(ReasonCode.RCP_24)
    elif mode.kind is TransferModeKind.WHITELIST_ONLY:
        allowed = mode.whitelist | {token.issuer}
        if req.sender not in allowed or req.receiver not in allowed:
            flag(ReasonCode.RCP_24)
    # (h) whole-unit rule for non-subdivisible classes
    if not cls.subdivisible:
        whole = 10 ** req.amount.decimals
        if req.amount.minor_units % whole != 0:
            flag(ReasonCode.RCP_27)
    # (i) per-transaction and counterparty-window limits
    limited = False
    if policy.per_tx_limit is not None:
        limit_scaled, amt_scaled = _scaled_pair(
            policy.per_tx_limit * 10 ** token.decimals, token.decimals,
            req.amount.minor_units, req.amount.decimals)
        if amt_scaled > limit_scaled:
            limited = True
    if not limited and policy.counterparty_window_limit is not None:
        norm_minor, remainder = _to_token_scale(req.amount, token.decimals)
        if remainder == 0 and evaluate_window_limit(
                req.sender, req.receiver, req.token_id, norm_minor, req.at, state):
            limited = True
    if limited:
        flag(ReasonCode.RCP_11)
    # (j) instrument-level trading ban
    if policy.trading_restricted:
        flag(ReasonCode.RCP_10)

    # Non-blocking monitoring; attempted transactions are screened too.
    alerts: list[MonitoringAlert] = []
    divisor = _risk_divisor(policy, state.risk_rating_of(req.sender))
    occ_scaled, amt_scaled = _scaled_pair(
        (policy.occasional_threshold * 10 ** token.decimals) // divisor, token.decimals,
        req.amount.minor_units, req.amount.decimals)
    if amt_scaled > occ_scaled:
        alerts.append(MonitoringAlert(
            kind=AlertKind.THRESHOLD_OCCASIONAL, subject=req.sender,
            token_id=req.token_id, at=req.at,
            details=f"above occasional threshold {policy.occasional_threshold}"))
    if req.wire:
        wire_scaled, amt_scaled = _scaled_pair(
            (policy.wire_threshold * 10 ** token.decimals) // divisor, token.decimals,
            req.amount.minor_units, req.amount.decimals)
        if amt_scaled > wire_scaled:
            alerts.append(MonitoringAlert(
                kind=AlertKind.THRESHOLD_WIRE, subject=req.sender,
                token_id=req.token_id, at=req.at,
                details=f"wire leg above threshold {policy.wire_threshold}"))
    pattern = raise_pattern_alert(req, state)
    if pattern is not None:
        alerts.append(pattern)

    return ComplianceVerdict(
        approved=not reasons, reasons=tuple(reasons), alerts=tuple(alerts))


def _to_token_scale(amount: Amount, token_decimals: int) -> tuple[int, int]:
    """(minor units at token scale, remainder); remainder != 0 means inexact."""
    if amount.decimals == token_decimals:
        return amount.minor_units, 0
    if amount.decimals < token_decimals:
        return amount.minor_units * 10 ** (token_decimals - amount.decimals), 0
    factor = 10 ** (amount.decimals - token_decimals)
    return divmod(amount.minor_units, factor)


def normalize_to_token_scale(amount: Amount, token_decimals: int) -> int:
    """Exact minor units at token scale; a remainder is a precision error.

    Only the transfer pipeline tolerates inexact amounts (they surface there
    as the whole-unit rule); every other command requires exact scale.
    """
    minor, remainder = _to_token_scale(amount, token_decimals)
    if remainder != 0:
        raise PrecisionLoss(
            f"amount {amount.render()} is not representable at scale {token_decimals}")
    return minor
