"""Report-side controls: history exploration, audit export, regulatory feed.

Confidentiality is enforced at this layer by role-scoped visibility: the
log itself stores digests, never personal data, and all non-regulator views
are filtered down to "need to know". Audits are themselves auditable — every
export seals an event carrying the report digest.

Threat note (code/infrastructure security): the chain verification carried
in every report makes mutation of sealed records *evident*, not impossible.
A writer who controls the store file can rebuild the whole chain; integrity
therefore rests on the single-writer discipline, on copies of the log or of
prefix digests held by other parties, and on exported report digests. No
cryptographic privacy is applied: confidentiality here is visibility
filtering over digests, nothing stronger.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import LedgerError, Fungibility, PartyRole
from .engine import Engine
from .events import (
    EventKind,
    LedgerEvent,
    canonical_payload_text,
    sha256_hex,
)
from .policy import AlertKind, ReasonCode


class BadRange(LedgerError):
    pass


class PermissionDenied(LedgerError):
    def __init__(self, message: str):
        super().__init__(message, reason_code=ReasonCode.RCP_07.code)


# payload keys that name event parties
_PARTY_KEYS = ("sender", "receiver", "subject", "account", "to", "actor", "relayed_by")


def event_parties(event: LedgerEvent) -> set[str]:
    parties = set()
    for key in _PARTY_KEYS:
        value = event.payload.get(key)
        if isinstance(value, str) and value:
            parties.add(value)
    return parties


@dataclass(frozen=True)
class VisibilityScope:
    """Who is asking, and with which roles."""

    requester: str
    roles: frozenset[PartyRole]

    @staticmethod
    def for_account(engine: Engine, requester: str) -> "VisibilityScope":
        return VisibilityScope(requester=requester, roles=engine.roles_of(requester))

    @property
    def sees_everything(self) -> bool:
        return bool(self.roles & {PartyRole.REGULATOR, PartyRole.AUDITOR})


def visible(event: LedgerEvent, scope: VisibilityScope, engine: Engine) -> bool:
    """Regulators and auditors see all; issuers their tokens; investors and
    consumers only events they are party to; everyone else sees nothing."""
    if scope.sees_everything:
        return True
    if PartyRole.ISSUER in scope.roles:
        token_id = event.payload.get("token")
        if token_id:
            token = engine.token_state(token_id)
            if token is not None and token.issuer == scope.requester:
                return True
    if scope.roles & {PartyRole.INVESTOR, PartyRole.CONSUMER}:
        return scope.requester in event_parties(event)
    return False


@dataclass(frozen=True)
class ClassFilter:
    """Asset-class predicate for history exploration."""

    fungibility: Fungibility | None = None
    behavior_tag: str | None = None

    @property
    def matches_all(self) -> bool:
        return self.fungibility is None and self.behavior_tag is None

    def matches(self, engine: Engine, token_id: str | None) -> bool:
        if token_id is None:
            return self.matches_all
        token = engine.token_state(token_id)
        if token is None:
            return self.matches_all
        if self.fungibility is not None and token.asset_class.fungibility is not self.fungibility:
            return False
        if self.behavior_tag is not None and self.behavior_tag not in token.asset_class.behavior_tags:
            return False
        return True


def history_by_asset_type(engine: Engine, class_filter: ClassFilter,
                          scope: VisibilityScope) -> list[LedgerEvent]:
    """Events matching the class predicate AND the visibility scope, in order."""
    out = []
    for event in engine.log:
        if not class_filter.matches(engine, event.payload.get("token")):
            continue
        if not visible(event, scope, engine):
            continue
        out.append(event)
    return out


@dataclass(frozen=True)
class AuditReport:
    from_seq: int
    to_seq: int
    chain_ok: bool
    event_count: int
    conservation: dict = field(default_factory=dict)
    alert_census: dict = field(default_factory=dict)
    identity_summary: dict = field(default_factory=dict)
    report_digest: str = ""

    def body(self) -> dict:
        return {
            "range": [self.from_seq, self.to_seq],
            "chain_ok": self.chain_ok,
            "event_count": self.event_count,
            "conservation": self.conservation,
            "alert_census": self.alert_census,
            "identity_summary": self.identity_summary,
        }


def build_audit_report(engine: Engine, from_seq: int, to_seq: int) -> AuditReport:
    """Pure function of (range, log prefix); replayed, not read off live state."""
    if not (0 <= from_seq <= to_seq < len(engine.log)):
        raise BadRange(f"invalid range [{from_seq}, {to_seq}] over {len(engine.log)} events")
    prefix = engine.replay_prefix(to_seq)
    chain = prefix.log.verify_chain()
    conservation = {}
    for token_id, token in sorted(prefix.tokens.items()):
        held_free = sum(h.free for (tid, _), h in prefix.holdings.items() if tid == token_id)
        held_frozen = sum(h.frozen for (tid, _), h in prefix.holdings.items() if tid == token_id)
        conservation[token_id] = {
            "minted": token.minted,
            "burned": token.burned,
            "held_free": held_free,
            "held_frozen": held_frozen,
            "conserved": token.minted == held_free + held_frozen + token.burned,
        }
    census = {kind.value: 0 for kind in AlertKind}
    for event in list(prefix.log)[from_seq:to_seq + 1]:
        if event.kind is EventKind.ALERT_RAISED:
            census[event.payload["alert"]] += 1
    identity_summary = {
        "records": len(prefix.registry.subjects()),
        "blacklisted": len(prefix.registry.blacklisted_subjects()),
    }
    report = AuditReport(
        from_seq=from_seq,
        to_seq=to_seq,
        chain_ok=chain.ok,
        event_count=to_seq - from_seq + 1,
        conservation=conservation,
        alert_census=census,
        identity_summary=identity_summary,
    )
    digest = sha256_hex(canonical_payload_text(report.body()).encode("utf-8"))
    return AuditReport(**{**report.__dict__, "report_digest": digest})


def export_audit_report(engine: Engine, from_seq: int, to_seq: int, actor: str,
                        at: int | None = None) -> tuple[AuditReport, LedgerEvent]:
    if not engine.roles_of(actor) & {PartyRole.AUDITOR, PartyRole.REGULATOR}:
        raise PermissionDenied(f"{actor} may not export audit reports")
    report = build_audit_report(engine, from_seq, to_seq)
    event = engine._seal(EventKind.AUDIT_EXPORTED, {
        "from_seq": from_seq,
        "to_seq": to_seq,
        "report_digest": report.report_digest,
        "actor": actor,
    }, engine._resolve_time(at))
    return report, event


def regulatory_feed(engine: Engine, since_seq: int, scope: VisibilityScope,
                    limit: int | None = None) -> tuple[list[LedgerEvent], int]:
    """Pull-based resumable stream: events with seq > since_seq, plus cursor."""
    if PartyRole.REGULATOR not in scope.roles:
        raise PermissionDenied(f"{scope.requester} lacks the Regulator role")
    events = [event for event in engine.log if event.seq > since_seq]
    if limit is not None:
        events = events[:limit]
    cursor = events[-1].seq if events else since_seq
    return events, cursor
