"""KYC/CDD registry, identity-change detection and blacklist management.

Profiles are held as digests only: nothing personal ever enters the
immutable log, so erasure requests stay an off-ledger concern. All mutation
flows through the engine's command stream; this module holds registry state
and answers screening queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .core import LedgerError, PartyRole


class NotFound(LedgerError):
    pass


class AlreadyRegistered(LedgerError):
    pass


class NoChange(LedgerError):
    pass


class AlreadyListed(LedgerError):
    pass


class NotListed(LedgerError):
    pass


class KycStatus(str, Enum):
    UNVERIFIED = "Unverified"
    VERIFIED = "Verified"
    REJECTED = "Rejected"
    EXPIRED = "Expired"


class RiskRating(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


class ScreeningResult(str, Enum):
    CLEAR = "Clear"
    BLOCKED = "Blocked"
    KYC_MISSING = "KycMissing"


@dataclass
class IdentityRecord:
    subject: str
    profile_digest: str
    kyc_status: KycStatus
    risk_rating: RiskRating
    version: int
    updated_at: int
    roles: frozenset[PartyRole] = frozenset()
    # append-only (version, digest, at) history
    history: list[tuple[int, str, int]] = field(default_factory=list)


@dataclass(frozen=True)
class BlacklistEntry:
    subject: str
    listed_at: int
    reason: str
    listed_by: str


class IdentityRegistry:
    """Registry state; mutated only by applying sealed engine events."""

    def __init__(self):
        self._records: dict[str, IdentityRecord] = {}
        self._blacklist: dict[str, BlacklistEntry] = {}
        # removals are recorded, never erased
        self._blacklist_history: list[dict] = []

    # -- reads ---------------------------------------------------------------

    def get(self, subject: str) -> IdentityRecord | None:
        return self._records.get(subject)

    def require(self, subject: str) -> IdentityRecord:
        record = self._records.get(subject)
        if record is None:
            raise NotFound(f"no identity record for {subject}")
        return record

    def roles_of(self, subject: str) -> frozenset[PartyRole]:
        record = self._records.get(subject)
        return record.roles if record else frozenset()

    def is_blacklisted(self, subject: str) -> bool:
        return subject in self._blacklist

    def blacklist_entry(self, subject: str) -> BlacklistEntry | None:
        return self._blacklist.get(subject)

    def screen(self, subject: str) -> ScreeningResult:
        """Blocked outranks KycMissing outranks Clear, regardless of status."""
        if subject in self._blacklist:
            return ScreeningResult.BLOCKED
        record = self._records.get(subject)
        if record is None or record.kyc_status is not KycStatus.VERIFIED:
            return ScreeningResult.KYC_MISSING
        return ScreeningResult.CLEAR

    def subjects(self) -> list[str]:
        return sorted(self._records)

    def blacklisted_subjects(self) -> list[str]:
        return sorted(self._blacklist)

    def blacklist_log(self) -> list[dict]:
        return list(self._blacklist_history)

    # -- event application ----------------------------------------------------

    def apply_registered(self, subject: str, profile_digest: str,
                         roles: list[str], at: int) -> IdentityRecord:
        record = IdentityRecord(
            subject=subject,
            profile_digest=profile_digest,
            kyc_status=KycStatus.UNVERIFIED,
            risk_rating=RiskRating.LOW,
            version=1,
            updated_at=at,
            roles=frozenset(PartyRole(r) for r in roles),
            history=[(1, profile_digest, at)],
        )
        self._records[subject] = record
        return record

    def apply_updated(self, subject: str, profile_digest: str, at: int) -> IdentityRecord:
        record = self._records[subject]
        record.version += 1
        record.profile_digest = profile_digest
        record.updated_at = at
        record.history.append((record.version, profile_digest, at))
        return record

    def apply_kyc_status(self, subject: str, status: str, risk_rating: str | None) -> IdentityRecord:
        record = self._records[subject]
        record.kyc_status = KycStatus(status)
        if risk_rating is not None:
            record.risk_rating = RiskRating(risk_rating)
        return record

    def apply_blacklist_added(self, subject: str, listed_by: str, reason: str, at: int) -> BlacklistEntry:
        entry = BlacklistEntry(subject=subject, listed_at=at, reason=reason, listed_by=listed_by)
        self._blacklist[subject] = entry
        self._blacklist_history.append(
            {"action": "add", "subject": subject, "at": at, "by": listed_by, "reason": reason}
        )
        return entry

    def apply_blacklist_removed(self, subject: str, removed_by: str, at: int) -> None:
        del self._blacklist[subject]
        self._blacklist_history.append(
            {"action": "remove", "subject": subject, "at": at, "by": removed_by, "reason": ""}
        )

    # -- digest ---------------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "records": {
                subject: {
                    "profile_digest": record.profile_digest,
                    "kyc_status": record.kyc_status.value,
                    "risk_rating": record.risk_rating.value,
                    "version": record.version,
                    "updated_at": record.updated_at,
                    "roles": sorted(role.value for role in record.roles),
                    "history": [list(entry) for entry in record.history],
                }
                for subject, record in sorted(self._records.items())
            },
            "blacklist": {
                subject: {
                    "listed_at": entry.listed_at,
                    "reason": entry.reason,
                    "listed_by": entry.listed_by,
                }
                for subject, entry in sorted(self._blacklist.items())
            },
            "blacklist_history": self._blacklist_history,
        }
