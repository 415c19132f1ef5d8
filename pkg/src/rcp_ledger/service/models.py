"""Request/response schemas for the ledger service."""

from __future__ import annotations

from pydantic import BaseModel, Field

from ..core import Amount, quantize


def amount_from_text(text: str) -> Amount:
    """Parse a decimal numeral at its minimal exact scale.

    Keeping the client's scale (rather than forcing the token's) lets the
    pipeline judge sub-unit requests instead of dying at the parser.
    """
    text = text.strip()
    if "." in text:
        whole, frac = text.split(".", 1)
        frac = frac.rstrip("0")
        return quantize(f"{whole}.{frac}" if frac else whole, len(frac))
    return quantize(text, 0)


class EventOut(BaseModel):
    seq: int
    at: int
    kind: str
    hash: str


class AlertOut(BaseModel):
    kind: str
    subject: str
    token: str | None = None
    at: int
    details: str = ""


class VerdictOut(BaseModel):
    decision: str
    reasons: list[str] = []
    alerts: list[AlertOut] = []
    events: list[EventOut] = []


class EventsOut(BaseModel):
    events: list[EventOut]


class ErrorOut(BaseModel):
    error: str
    message: str
    reason_code: str | None = None


class RegisterIdentityIn(BaseModel):
    subject: str
    profile_digest: str
    roles: list[str] = []
    at: int | None = None


class KycIn(BaseModel):
    subject: str
    status: str
    actor: str
    risk_rating: str | None = None
    at: int | None = None


class UpdateIdentityIn(BaseModel):
    subject: str
    profile_digest: str
    at: int | None = None


class BlacklistIn(BaseModel):
    subject: str
    actor: str
    reason: str = ""
    at: int | None = None


class ScreenOut(BaseModel):
    subject: str
    result: str


class IdentityOut(BaseModel):
    subject: str
    profile_digest: str
    kyc_status: str
    risk_rating: str
    version: int
    updated_at: int
    roles: list[str]
    blacklisted: bool


class AnchorIn(BaseModel):
    doc_id: str
    digest: str
    uri: str = ""
    notarized_by: str | None = None


class DefineTokenIn(BaseModel):
    token_id: str
    issuer: str
    fungibility: str = "Fungible"
    subdivisible: bool = True
    decimals: int = 0
    transferable: bool = True
    compliant: bool = True
    expirable: bool = False
    behavior_tags: list[str] = []
    supply_cap: str | None = None  # whole-unit decimal text
    expiry: int | None = None
    anchors: list[AnchorIn] = []
    at: int | None = None


class TokenOut(BaseModel):
    token_id: str
    issuer: str
    asset_class: str
    lifecycle: str
    contract_version: int
    expired: bool
    minted: int
    burned: int
    supply_cap: int | None
    expiry: int | None
    anchors: list[AnchorIn]
    parent: str | None = None


class TransferIn(BaseModel):
    token: str
    sender: str
    receiver: str
    amount: str
    wire: bool = False
    actor: str | None = None
    at: int | None = None


class MintIn(BaseModel):
    token: str
    to: str
    amount: str
    actor: str
    at: int | None = None


class BurnIn(BaseModel):
    token: str
    account: str
    amount: str
    actor: str
    at: int | None = None


class FreezeIn(BaseModel):
    token: str
    account: str
    amount: str
    actor: str
    at: int | None = None


class RecoverIn(BaseModel):
    token: str
    from_account: str
    to_recovery: str
    amount: str
    actor: str
    at: int | None = None


class TokenActionIn(BaseModel):
    token: str
    actor: str
    at: int | None = None


class LiquidateIn(BaseModel):
    token: str
    account: str
    actor: str
    note: str = ""
    at: int | None = None


class SplitIn(BaseModel):
    token: str
    fractions: int
    actor: str
    at: int | None = None


class MetaInnerIn(BaseModel):
    token: str
    sender: str
    receiver: str
    amount: str
    wire: bool = False
    at: int


class MetaTransferIn(BaseModel):
    inner: MetaInnerIn
    relayer: str
    fee: str
    signature_digest: str
    at: int | None = None


class CorrectionIn(BaseModel):
    original_seq: int
    actor: str
    sender: str | None = None
    receiver: str | None = None
    amount: int | None = Field(default=None, description="minor units")
    at: int | None = None


class AmendIn(BaseModel):
    token: str
    actor: str
    note: str = ""
    at: int | None = None


class AttachDocumentIn(BaseModel):
    token: str
    actor: str
    anchor: AnchorIn
    at: int | None = None


class TransferModeIn(BaseModel):
    kind: str
    whitelist: list[str] = []


class PolicyUpdateIn(BaseModel):
    actor: str
    transfer_mode: TransferModeIn | None = None
    per_tx_limit: int | None = None
    window_limit: int | None = None
    window_seconds: int | None = None
    occasional_threshold: int | None = None
    wire_threshold: int | None = None
    trading_paused: bool | None = None
    trading_restricted: bool | None = None
    require_doc_anchor: bool | None = None
    at: int | None = None


class PolicyOut(BaseModel):
    token: str
    policy: dict


class BalanceOut(BaseModel):
    token: str
    account: str
    free: int
    frozen: int


class VerifyOut(BaseModel):
    ok: bool
    checked: int
    first_bad_seq: int | None = None


class ReplayOut(BaseModel):
    state_digest: str
    events: int
    matches_live: bool


class AuditExportIn(BaseModel):
    from_seq: int
    to_seq: int
    actor: str
    at: int | None = None


class AuditReportOut(BaseModel):
    from_seq: int
    to_seq: int
    chain_ok: bool
    event_count: int
    conservation: dict
    alert_census: dict
    identity_summary: dict
    report_digest: str
    event: EventOut


class FeedOut(BaseModel):
    events: list[EventOut]
    cursor: int


class ManifestIn(BaseModel):
    protocol: str
    items: list[int]


class ScoreRowOut(BaseModel):
    institution: str
    label: str
    numerator: int
    denominator: int


class ScoreTableOut(BaseModel):
    protocol: str
    rows: list[ScoreRowOut]
    total_numerator: int
    total_denominator: int


class ErratumOut(BaseModel):
    protocol: str
    institution: str
    recomputed: int
    reported: int
    denominator: int


class ConformanceTableOut(BaseModel):
    tables: list[ScoreTableOut]
    errata: list[ErratumOut]
    totals_match: bool
    rendered: str


class ScenarioRunIn(BaseModel):
    scenario: str
    config: dict | None = None
    golden: bool = False


class TranscriptStepOut(BaseModel):
    label: str
    actor: str
    command: str
    outcome: str


class TranscriptOut(BaseModel):
    scenario: str
    steps: list[TranscriptStepOut]
    final_state_digest: str
    transcript_digest: str
    golden_match: bool | None = None
