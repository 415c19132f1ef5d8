"""Foundational value types: accounts, roles, logical time, fixed-point
amounts and asset-class descriptors.

Everything in this module is immutable and freely shareable. Balances are
integer minor units with a per-token scale; there is no floating point
anywhere in the accounting path, so replays are bit-exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

MAX_MINOR_UNITS = 1 << 128
MAX_DECIMALS = 18

_ACCOUNT_RE = re.compile(r"^[A-Za-z0-9._~-]{1,64}$")


class LedgerError(Exception):
    """Base class for all domain errors raised by the engine."""

    def __init__(self, message: str, reason_code: str | None = None):
        super().__init__(message)
        self.reason_code = reason_code


class InvalidAccount(LedgerError):
    pass


class InvalidClass(LedgerError):
    pass


class PrecisionLoss(LedgerError):
    pass


class Overflow(LedgerError):
    pass


def validate_account_id(value: str) -> str:
    """Account ids are non-empty, at most 64 chars, URL-safe alphabet."""
    if not isinstance(value, str) or not _ACCOUNT_RE.match(value):
        raise InvalidAccount(f"invalid account id: {value!r}")
    return value


def validate_logical_time(value: int) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise LedgerError(f"logical time must be a non-negative integer, got {value!r}")
    return value


class PartyRole(str, Enum):
    ISSUER = "Issuer"
    INVESTOR = "Investor"
    BROKER = "Broker"
    REGULATOR = "Regulator"
    AUDITOR = "Auditor"
    CONSUMER = "Consumer"
    OPERATOR = "Operator"
    RELAYER = "Relayer"
    LEGAL_COUNSEL = "LegalCounsel"


class Fungibility(str, Enum):
    FUNGIBLE = "Fungible"
    NON_FUNGIBLE = "NonFungible"


class Lifecycle(str, Enum):
    ACTIVE = "Active"
    PAUSED = "Paused"
    KILLED = "Killed"


# Killed is absorbing; the only legal moves are Active<->Paused and any->Killed.
_LIFECYCLE_MOVES = {
    (Lifecycle.ACTIVE, Lifecycle.PAUSED),
    (Lifecycle.PAUSED, Lifecycle.ACTIVE),
    (Lifecycle.ACTIVE, Lifecycle.KILLED),
    (Lifecycle.PAUSED, Lifecycle.KILLED),
}


def lifecycle_transition_allowed(current: Lifecycle, wanted: Lifecycle) -> bool:
    return (current, wanted) in _LIFECYCLE_MOVES


@dataclass(frozen=True, order=True)
class Amount:
    """A quantity in integer minor units at a fixed decimal scale.

    Two amounts are only comparable or combinable when their scales match;
    mixing scales is a programming error, not a rounding opportunity.
    """

    minor_units: int
    decimals: int

    def __post_init__(self):
        if not isinstance(self.minor_units, int) or self.minor_units < 0:
            raise LedgerError(f"minor_units must be a non-negative integer, got {self.minor_units!r}")
        if self.minor_units >= MAX_MINOR_UNITS:
            raise Overflow(f"amount exceeds 128 bits: {self.minor_units}")
        if not 0 <= self.decimals <= MAX_DECIMALS:
            raise LedgerError(f"decimals must be in 0..{MAX_DECIMALS}, got {self.decimals!r}")

    def _check_scale(self, other: "Amount") -> None:
        if self.decimals != other.decimals:
            raise LedgerError(
                f"scale mismatch: {self.decimals} vs {other.decimals} decimals"
            )

    def __add__(self, other: "Amount") -> "Amount":
        self._check_scale(other)
        total = self.minor_units + other.minor_units
        if total >= MAX_MINOR_UNITS:
            raise Overflow("amount addition exceeds 128 bits")
        return Amount(total, self.decimals)

    def __sub__(self, other: "Amount") -> "Amount":
        self._check_scale(other)
        if other.minor_units > self.minor_units:
            raise LedgerError("amount subtraction below zero")
        return Amount(self.minor_units - other.minor_units, self.decimals)

    @property
    def is_zero(self) -> bool:
        return self.minor_units == 0

    def render(self) -> str:
        """Exact decimal text; inverse of quantize at the same scale."""
        if self.decimals == 0:
            return str(self.minor_units)
        scale = 10 ** self.decimals
        whole, frac = divmod(self.minor_units, scale)
        return f"{whole}.{frac:0{self.decimals}d}"


def quantize(amount_text: str, decimals: int) -> Amount:
    """Convert a non-negative decimal numeral to minor units, exactly.

    Any fractional remainder beyond `decimals` is an error, never rounded.
    """
    if not 0 <= decimals <= MAX_DECIMALS:
        raise LedgerError(f"decimals must be in 0..{MAX_DECIMALS}, got {decimals!r}")
    text = amount_text.strip()
    if not re.match(r"^[0-9]+(\.[0-9]+)?$", text):
        raise LedgerError(f"not a non-negative decimal numeral: {amount_text!r}")
    if "." in text:
        whole_part, frac_part = text.split(".")
    else:
        whole_part, frac_part = text, ""
    if len(frac_part) > decimals and any(c != "0" for c in frac_part[decimals:]):
        raise PrecisionLoss(
            f"{amount_text!r} has a fractional remainder beyond {decimals} decimals"
        )
    frac_part = frac_part[:decimals].ljust(decimals, "0")
    minor = int(whole_part) * 10 ** decimals + (int(frac_part) if frac_part else 0)
    if minor >= MAX_MINOR_UNITS:
        raise Overflow(f"{amount_text!r} exceeds 128 bits at scale {decimals}")
    return Amount(minor, decimals)


def div_round_half_even(numerator: int, denominator: int) -> int:
    """Integer division with banker's rounding, used for coupon arithmetic."""
    if denominator <= 0:
        raise LedgerError("denominator must be positive")
    quotient, remainder = divmod(numerator, denominator)
    doubled = remainder * 2
    if doubled > denominator or (doubled == denominator and quotient % 2 == 1):
        quotient += 1
    return quotient


@dataclass(frozen=True)
class AssetClassDescriptor:
    """Behavior flags for a token class, taxonomy-framework style.

    A fungible, non-subdivisible, transferable, compliant bond class renders
    as ``tF{~d,t,c}``.
    """

    fungibility: Fungibility
    subdivisible: bool
    decimals: int
    transferable: bool = True
    compliant: bool = True
    expirable: bool = False
    behavior_tags: frozenset[str] = field(default_factory=frozenset)

    def render(self) -> str:
        base = "tF" if self.fungibility is Fungibility.FUNGIBLE else "tN"
        flags = []
        flags.append("d" if self.subdivisible else "~d")
        if self.transferable:
            flags.append("t")
        if self.compliant:
            flags.append("c")
        if self.expirable:
            flags.append("e")
        return f"{base}{{{','.join(flags)}}}"


def validate_class_descriptor(d: AssetClassDescriptor) -> AssetClassDescriptor:
    """Return the descriptor unchanged iff its invariants hold."""
    if not 0 <= d.decimals <= MAX_DECIMALS:
        raise InvalidClass(f"decimals must be in 0..{MAX_DECIMALS}, got {d.decimals}")
    if d.fungibility is Fungibility.NON_FUNGIBLE and d.subdivisible:
        raise InvalidClass("non-fungible classes cannot be subdivisible")
    if d.fungibility is Fungibility.NON_FUNGIBLE and d.decimals != 0:
        raise InvalidClass("non-fungible classes must use 0 decimals")
    if not d.subdivisible and d.decimals != 0:
        raise InvalidClass("non-subdivisible classes must use 0 decimals")
    return d


@dataclass(frozen=True)
class TokenDefinition:
    """Definition of a tokenized asset as supplied at issuance time."""

    token_id: str
    asset_class: AssetClassDescriptor
    issuer: str
    supply_cap: Amount | None = None
    expiry: int | None = None
    parent_id: str | None = None

    def __post_init__(self):
        validate_account_id(self.issuer)
        if not self.token_id or len(self.token_id) > 64:
            raise LedgerError(f"invalid token id: {self.token_id!r}")
        validate_class_descriptor(self.asset_class)
        if self.supply_cap is not None and self.supply_cap.decimals != self.asset_class.decimals:
            raise LedgerError("supply cap scale must match the class scale")
        if self.asset_class.fungibility is Fungibility.NON_FUNGIBLE:
            if self.supply_cap is None or self.supply_cap.minor_units != 1:
                raise InvalidClass("non-fungible tokens must cap supply at exactly 1 unit")
        if self.expiry is not None:
            validate_logical_time(self.expiry)
