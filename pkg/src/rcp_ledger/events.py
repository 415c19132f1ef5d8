"""Hash-chained, append-only event log.

Every state change in the engine is sealed as one event. Event ``i`` commits
to event ``i-1`` through its ``prev_hash``, so any single-byte mutation of a
sealed record is detectable by recomputing the chain.

Canonical encoding for hashing: the fields ``seq, at, kind, payload,
prev_hash`` are serialized in that order, each as a 4-byte big-endian length
prefix followed by the UTF-8 bytes of a canonical text rendering (integers in
base 10, hashes as lowercase hex, maps as compact JSON with keys sorted at
every depth). The genesis event links to 32 zero bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Iterator, Mapping

from .core import LedgerError, validate_logical_time

GENESIS_PREV_HASH = "0" * 64

Payload = Mapping[str, Any]


class TimeRegression(LedgerError):
    pass


class CorruptLog(LedgerError):
    pass


class EventKind(str, Enum):
    IDENTITY_REGISTERED = "IdentityRegistered"
    IDENTITY_UPDATED = "IdentityUpdated"
    KYC_STATUS_SET = "KycStatusSet"
    BLACKLIST_ADDED = "BlacklistAdded"
    BLACKLIST_REMOVED = "BlacklistRemoved"
    TOKEN_DEFINED = "TokenDefined"
    CONTRACT_AMENDED = "ContractAmended"
    DOCUMENT_ATTACHED = "DocumentAttached"
    MINTED = "Minted"
    BURNED = "Burned"
    TRANSFER_EXECUTED = "TransferExecuted"
    TRANSFER_REJECTED = "TransferRejected"
    CORRECTION_CANCEL = "CorrectionCancel"
    CORRECTION_NEW = "CorrectionNew"
    FROZEN = "Frozen"
    UNFROZEN = "Unfrozen"
    RECOVERED = "Recovered"
    PAUSED = "Paused"
    RESUMED = "Resumed"
    KILLED = "Killed"
    FORCED_LIQUIDATION = "ForcedLiquidation"
    ALERT_RAISED = "AlertRaised"
    SETTLEMENT_EXECUTED = "SettlementExecuted"
    SWAP_PREPARED = "SwapPrepared"
    SWAP_COMMITTED = "SwapCommitted"
    SWAP_ABORTED = "SwapAborted"
    AUDIT_EXPORTED = "AuditExported"


def canonical_payload_text(payload: Payload) -> str:
    """Compact JSON with keys sorted at every depth; list order is preserved."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def _encode_fields(fields: Iterable[str]) -> bytes:
    out = bytearray()
    for text in fields:
        raw = text.encode("utf-8")
        out += len(raw).to_bytes(4, "big")
        out += raw
    return bytes(out)


def compute_event_hash(seq: int, at: int, kind: str, payload: Payload, prev_hash: str) -> str:
    encoded = _encode_fields(
        [str(seq), str(at), kind, canonical_payload_text(payload), prev_hash.lower()]
    )
    return hashlib.sha256(encoded).hexdigest()


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class LedgerEvent:
    seq: int
    at: int
    kind: EventKind
    payload: Payload
    prev_hash: str
    hash: str

    def to_record(self) -> str:
        """One-line record mirroring the canonical field order."""
        return (
            f'{{"seq":{self.seq},"at":{self.at},"kind":{json.dumps(self.kind.value)},'
            f'"payload":{canonical_payload_text(self.payload)},'
            f'"prev_hash":"{self.prev_hash}","hash":"{self.hash}"}}'
        )

    @staticmethod
    def from_record(line: str) -> "LedgerEvent":
        try:
            raw = json.loads(line)
            return LedgerEvent(
                seq=raw["seq"],
                at=raw["at"],
                kind=EventKind(raw["kind"]),
                payload=raw["payload"],
                prev_hash=raw["prev_hash"],
                hash=raw["hash"],
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptLog(f"unreadable event record: {exc}") from exc


@dataclass(frozen=True)
class DocumentAnchor:
    """Content digest of an off-ledger legal document bound to a token."""

    doc_id: str
    digest: str
    uri: str = ""
    notarized_by: str | None = None

    def __post_init__(self):
        if len(self.digest) != 64 or any(c not in "0123456789abcdef" for c in self.digest):
            raise LedgerError("document digest must be 32 bytes of lowercase hex")

    def to_payload(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "digest": self.digest,
            "uri": self.uri,
            "notarized_by": self.notarized_by,
        }

    @staticmethod
    def from_payload(raw: Mapping[str, Any]) -> "DocumentAnchor":
        return DocumentAnchor(
            doc_id=raw["doc_id"],
            digest=raw["digest"],
            uri=raw.get("uri", ""),
            notarized_by=raw.get("notarized_by"),
        )


@dataclass(frozen=True)
class ChainVerificationReport:
    ok: bool
    checked: int
    first_bad_seq: int | None = None


class EventLog:
    """In-memory sealed event sequence with chain verification."""

    def __init__(self, events: Iterable[LedgerEvent] = ()):
        self._events: list[LedgerEvent] = list(events)

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self) -> Iterator[LedgerEvent]:
        return iter(self._events)

    def __getitem__(self, seq: int) -> LedgerEvent:
        return self._events[seq]

    @property
    def last(self) -> LedgerEvent | None:
        return self._events[-1] if self._events else None

    def append(self, kind: EventKind, payload: Payload, at: int) -> LedgerEvent:
        validate_logical_time(at)
        last = self.last
        if last is not None and at < last.at:
            raise TimeRegression(f"event time {at} precedes last event time {last.at}")
        seq = len(self._events)
        prev_hash = last.hash if last is not None else GENESIS_PREV_HASH
        digest = compute_event_hash(seq, at, kind.value, payload, prev_hash)
        event = LedgerEvent(seq=seq, at=at, kind=kind, payload=dict(payload),
                            prev_hash=prev_hash, hash=digest)
        self._events.append(event)
        return event

    def verify_chain(self) -> ChainVerificationReport:
        return verify_events(self._events)

    def prefix_digest(self, upto: int | None = None) -> str:
        """Digest of the raw records of events [0, upto); append-only witness."""
        upto = len(self._events) if upto is None else upto
        blob = "\n".join(e.to_record() for e in self._events[:upto])
        return sha256_hex(blob.encode("utf-8"))


def verify_events(events: Iterable[LedgerEvent]) -> ChainVerificationReport:
    """Recompute every hash and linkage; pure read."""
    prev_hash = GENESIS_PREV_HASH
    prev_at = 0
    checked = 0
    for index, event in enumerate(events):
        bad = (
            event.seq != index
            or event.prev_hash != prev_hash
            or event.at < prev_at
            or compute_event_hash(event.seq, event.at, event.kind.value,
                                  event.payload, event.prev_hash) != event.hash
        )
        if bad:
            return ChainVerificationReport(ok=False, checked=checked, first_bad_seq=index)
        prev_hash = event.hash
        prev_at = event.at
        checked += 1
    return ChainVerificationReport(ok=True, checked=checked)


def verify_records(lines: Iterable[str]) -> ChainVerificationReport:
    """Verify serialized records; a malformed line counts as bad at its position."""
    prev_hash = GENESIS_PREV_HASH
    prev_at = 0
    checked = 0
    for index, line in enumerate(lines):
        try:
            event = LedgerEvent.from_record(line)
        except CorruptLog:
            return ChainVerificationReport(ok=False, checked=checked, first_bad_seq=index)
        bad = (
            not isinstance(event.seq, int)
            or not isinstance(event.at, (int, float))
            or event.seq != index
            or event.prev_hash != prev_hash
            or event.at < prev_at
            or compute_event_hash(event.seq, event.at, event.kind.value,
                                  event.payload, event.prev_hash) != event.hash
        )
        if bad:
            return ChainVerificationReport(ok=False, checked=checked, first_bad_seq=index)
        prev_hash = event.hash
        prev_at = event.at
        checked += 1
    return ChainVerificationReport(ok=True, checked=checked)
