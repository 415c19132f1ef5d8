"""FastAPI application exposing the engine to multiple clients.

One service process owns one store (single-writer discipline); mutating
endpoints serialize through a process-wide lock, read endpoints serve from
the same in-memory state.
"""

from __future__ import annotations

import os
import threading

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import conformance
from ..audit import (
    BadRange,
    ClassFilter,
    VisibilityScope,
    export_audit_report,
    history_by_asset_type,
    regulatory_feed,
)
from ..core import (
    AssetClassDescriptor,
    Fungibility,
    InvalidAccount,
    InvalidClass,
    LedgerError,
    Overflow,
    PartyRole,
    PrecisionLoss,
    TokenDefinition,
    quantize,
)
from ..engine import (
    AlreadyDefined,
    BadAuthorization,
    EmptyHolding,
    Engine,
    EngineConfig,
    InsufficientBalance,
    MetaTransferAuthorization,
    NotCorrectable,
    NotExpired,
    NotSplittable,
    PermissionDenied,
    RelayerInsufficientFee,
)
from ..audit import PermissionDenied as AuditPermissionDenied
from ..events import DocumentAnchor, LedgerEvent
from ..identity import (
    AlreadyListed,
    AlreadyRegistered,
    KycStatus,
    NoChange,
    NotFound,
    NotListed,
    RiskRating,
)
from ..policy import TransferMode, TransferModeKind, TransferRequest, UnknownToken
from ..scenarios import ScenarioConfig, run_bond_scenario, run_carbon_scenario, run_interop_scenario
from ..store import open_or_create, verify_store
from ..goldens import golden_digests
from . import models as m

_STATUS_BY_ERROR = {
    UnknownToken: 404,
    NotFound: 404,
    AlreadyDefined: 409,
    AlreadyRegistered: 409,
    AlreadyListed: 409,
    NotListed: 409,
    NoChange: 409,
    PermissionDenied: 403,
    AuditPermissionDenied: 403,
    BadAuthorization: 403,
    InsufficientBalance: 409,
    RelayerInsufficientFee: 409,
    EmptyHolding: 409,
    NotExpired: 409,
    NotSplittable: 409,
    NotCorrectable: 409,
    BadRange: 400,
    InvalidAccount: 400,
    InvalidClass: 400,
    PrecisionLoss: 400,
    Overflow: 400,
}


def _event_out(event: LedgerEvent) -> m.EventOut:
    return m.EventOut(seq=event.seq, at=event.at, kind=event.kind.value, hash=event.hash)


def _verdict_out(verdict, events) -> m.VerdictOut:
    return m.VerdictOut(
        decision="Approved" if verdict.approved else "Rejected",
        reasons=verdict.reason_codes,
        alerts=[m.AlertOut(kind=a.kind.value, subject=a.subject, token=a.token_id,
                           at=a.at, details=a.details) for a in verdict.alerts],
        events=[_event_out(e) for e in events],
    )


def create_app(store_path: str | None = None, engine: Engine | None = None,
               config: EngineConfig | None = None) -> FastAPI:
    """Build the service over a store path (created on demand) or an engine."""
    if engine is None:
        store_path = store_path or os.environ.get("RCP_STORE", "rcp.store")
        engine = open_or_create(store_path, config)

    app = FastAPI(title="rcp-ledger", version="0.1.0")
    app.state.engine = engine
    app.state.store_path = store_path
    write_lock = threading.Lock()

    @app.exception_handler(LedgerError)
    async def ledger_error_handler(request: Request, exc: LedgerError):
        status = _STATUS_BY_ERROR.get(type(exc), 422)
        return JSONResponse(
            status_code=status,
            content=m.ErrorOut(
                error=type(exc).__name__,
                message=str(exc),
                reason_code=exc.reason_code,
            ).model_dump(),
        )

    def eng() -> Engine:
        return app.state.engine

    # ------------------------------------------------------------- identity

    @app.post("/identity/register", response_model=m.EventOut)
    def register_identity(body: m.RegisterIdentityIn):
        with write_lock:
            event = eng().register_identity(
                body.subject, body.profile_digest,
                [PartyRole(r) for r in body.roles], at=body.at)
        return _event_out(event)

    @app.post("/identity/kyc", response_model=m.EventOut)
    def set_kyc(body: m.KycIn):
        with write_lock:
            event = eng().set_kyc_status(
                body.subject, KycStatus(body.status), body.actor, at=body.at,
                risk_rating=RiskRating(body.risk_rating) if body.risk_rating else None)
        return _event_out(event)

    @app.post("/identity/update", response_model=m.EventsOut)
    def update_identity(body: m.UpdateIdentityIn):
        with write_lock:
            events = eng().update_identity(body.subject, body.profile_digest, at=body.at)
        return m.EventsOut(events=[_event_out(e) for e in events])

    @app.post("/identity/blacklist/add", response_model=m.EventOut)
    def blacklist_add(body: m.BlacklistIn):
        with write_lock:
            event = eng().blacklist_add(body.subject, body.actor, body.reason, at=body.at)
        return _event_out(event)

    @app.post("/identity/blacklist/remove", response_model=m.EventOut)
    def blacklist_remove(body: m.BlacklistIn):
        with write_lock:
            event = eng().blacklist_remove(body.subject, body.actor, at=body.at)
        return _event_out(event)

    @app.get("/identity/screen/{subject}", response_model=m.ScreenOut)
    def screen(subject: str):
        return m.ScreenOut(subject=subject, result=eng().screen(subject).value)

    @app.get("/identity/{subject}", response_model=m.IdentityOut)
    def identity(subject: str):
        record = eng().registry.require(subject)
        return m.IdentityOut(
            subject=record.subject,
            profile_digest=record.profile_digest,
            kyc_status=record.kyc_status.value,
            risk_rating=record.risk_rating.value,
            version=record.version,
            updated_at=record.updated_at,
            roles=sorted(r.value for r in record.roles),
            blacklisted=eng().registry.is_blacklisted(subject),
        )

    # --------------------------------------------------------------- tokens

    @app.post("/tokens/define", response_model=m.EventOut)
    def define_token(body: m.DefineTokenIn):
        descriptor = AssetClassDescriptor(
            fungibility=Fungibility(body.fungibility),
            subdivisible=body.subdivisible,
            decimals=body.decimals,
            transferable=body.transferable,
            compliant=body.compliant,
            expirable=body.expirable,
            behavior_tags=frozenset(body.behavior_tags),
        )
        cap = quantize(body.supply_cap, body.decimals) if body.supply_cap else None
        definition = TokenDefinition(
            token_id=body.token_id, asset_class=descriptor, issuer=body.issuer,
            supply_cap=cap, expiry=body.expiry)
        anchors = [DocumentAnchor(doc_id=a.doc_id, digest=a.digest, uri=a.uri,
                                  notarized_by=a.notarized_by) for a in body.anchors]
        with write_lock:
            event = eng().define_token(definition, body.issuer, anchors=anchors, at=body.at)
        return _event_out(event)

    @app.get("/tokens/{token_id}", response_model=m.TokenOut)
    def token_info(token_id: str):
        token = eng().require_token(token_id)
        return m.TokenOut(
            token_id=token.token_id,
            issuer=token.issuer,
            asset_class=token.asset_class.render(),
            lifecycle=token.lifecycle.value,
            contract_version=token.contract_version,
            expired=token.expired,
            minted=token.minted,
            burned=token.burned,
            supply_cap=token.supply_cap_minor,
            expiry=token.expiry,
            anchors=[m.AnchorIn(**a.to_payload()) for a in token.document_anchors],
            parent=token.parent_id,
        )

    @app.post("/tokens/documents", response_model=m.EventOut)
    def attach_document(body: m.AttachDocumentIn):
        anchor = DocumentAnchor(doc_id=body.anchor.doc_id, digest=body.anchor.digest,
                                uri=body.anchor.uri, notarized_by=body.anchor.notarized_by)
        with write_lock:
            event = eng().attach_document(body.token, anchor, body.actor, at=body.at)
        return _event_out(event)

    @app.post("/tokens/amend", response_model=m.EventOut)
    def amend_contract(body: m.AmendIn):
        with write_lock:
            event = eng().amend_contract(body.token, body.actor, at=body.at, note=body.note)
        return _event_out(event)

    @app.get("/balance/{token_id}/{account}", response_model=m.BalanceOut)
    def balance(token_id: str, account: str):
        eng().require_token(token_id)
        holding = eng().holding(token_id, account)
        return m.BalanceOut(token=token_id, account=account,
                            free=holding.free, frozen=holding.frozen)

    # --------------------------------------------------------------- policy

    @app.get("/policy/{token_id}", response_model=m.PolicyOut)
    def policy_show(token_id: str):
        eng().require_token(token_id)
        return m.PolicyOut(token=token_id, policy=eng().policy_for(token_id).to_payload())

    @app.put("/policy/{token_id}", response_model=m.EventOut)
    def policy_set(token_id: str, body: m.PolicyUpdateIn):
        changes: dict = {}
        if body.transfer_mode is not None:
            changes["transfer_mode"] = TransferMode(
                TransferModeKind(body.transfer_mode.kind),
                frozenset(body.transfer_mode.whitelist))
        if body.per_tx_limit is not None:
            changes["per_tx_limit"] = body.per_tx_limit
        if body.window_limit is not None:
            changes["counterparty_window_limit"] = (
                body.window_limit, body.window_seconds or 30 * 86_400)
        for attr in ("occasional_threshold", "wire_threshold", "trading_paused",
                     "trading_restricted", "require_doc_anchor"):
            value = getattr(body, attr)
            if value is not None:
                changes[attr] = value
        with write_lock:
            event = eng().set_policy(token_id, body.actor, changes, at=body.at)
        return _event_out(event)

    # ------------------------------------------------------------------- tx

    @app.post("/tx/transfer", response_model=m.VerdictOut)
    def transfer(body: m.TransferIn):
        request = TransferRequest(
            token_id=body.token, sender=body.sender, receiver=body.receiver,
            amount=m.amount_from_text(body.amount), wire=body.wire,
            at=body.at if body.at is not None else eng().clock)
        with write_lock:
            verdict, events = eng().execute_transfer(request, actor=body.actor, at=body.at)
        return _verdict_out(verdict, events)

    @app.post("/tx/mint", response_model=m.EventOut)
    def mint(body: m.MintIn):
        with write_lock:
            event = eng().mint(body.token, body.to, m.amount_from_text(body.amount),
                               body.actor, at=body.at)
        return _event_out(event)

    @app.post("/tx/burn", response_model=m.EventsOut)
    def burn(body: m.BurnIn):
        with write_lock:
            events = eng().burn(body.token, body.account, m.amount_from_text(body.amount),
                                body.actor, at=body.at)
        return m.EventsOut(events=[_event_out(e) for e in events])

    @app.post("/tx/freeze", response_model=m.EventOut)
    def freeze(body: m.FreezeIn):
        with write_lock:
            event = eng().freeze(body.account, body.token, m.amount_from_text(body.amount),
                                 body.actor, at=body.at)
        return _event_out(event)

    @app.post("/tx/unfreeze", response_model=m.EventOut)
    def unfreeze(body: m.FreezeIn):
        with write_lock:
            event = eng().unfreeze(body.account, body.token, m.amount_from_text(body.amount),
                                   body.actor, at=body.at)
        return _event_out(event)

    @app.post("/tx/recover", response_model=m.EventOut)
    def recover(body: m.RecoverIn):
        with write_lock:
            event = eng().recover(body.token, body.from_account, body.to_recovery,
                                  m.amount_from_text(body.amount), body.actor, at=body.at)
        return _event_out(event)

    @app.post("/tx/pause", response_model=m.EventOut)
    def pause(body: m.TokenActionIn):
        with write_lock:
            event = eng().pause(body.token, body.actor, at=body.at)
        return _event_out(event)

    @app.post("/tx/resume", response_model=m.EventOut)
    def resume(body: m.TokenActionIn):
        with write_lock:
            event = eng().resume(body.token, body.actor, at=body.at)
        return _event_out(event)

    @app.post("/tx/kill", response_model=m.EventOut)
    def kill(body: m.TokenActionIn):
        with write_lock:
            event = eng().kill_switch(body.token, body.actor, at=body.at)
        return _event_out(event)

    @app.post("/tx/liquidate", response_model=m.EventsOut)
    def liquidate(body: m.LiquidateIn):
        with write_lock:
            events = eng().force_liquidate(body.account, body.token, body.actor,
                                           at=body.at, note=body.note)
        return m.EventsOut(events=[_event_out(e) for e in events])

    @app.post("/tx/expire", response_model=m.EventsOut)
    def expire(body: m.TokenActionIn):
        with write_lock:
            events = eng().expire_sweep(body.token, at=body.at)
        return m.EventsOut(events=[_event_out(e) for e in events])

    @app.post("/tx/split", response_model=m.EventsOut)
    def split(body: m.SplitIn):
        with write_lock:
            events = eng().split_lot(body.token, body.fractions, body.actor, at=body.at)
        return m.EventsOut(events=[_event_out(e) for e in events])

    @app.post("/tx/meta", response_model=m.VerdictOut)
    def meta_transfer(body: m.MetaTransferIn):
        inner = TransferRequest(
            token_id=body.inner.token, sender=body.inner.sender,
            receiver=body.inner.receiver, amount=m.amount_from_text(body.inner.amount),
            wire=body.inner.wire, at=body.inner.at)
        auth = MetaTransferAuthorization(
            inner=inner, signer=inner.sender, relayer=body.relayer,
            fee=m.amount_from_text(body.fee), signature_digest=body.signature_digest)
        with write_lock:
            verdict, events = eng().execute_meta_transfer(auth, at=body.at)
        return _verdict_out(verdict, events)

    @app.post("/tx/correct", response_model=m.EventsOut)
    def correct(body: m.CorrectionIn):
        corrected: dict = {}
        if body.sender is not None:
            corrected["sender"] = body.sender
        if body.receiver is not None:
            corrected["receiver"] = body.receiver
        if body.amount is not None:
            corrected["amount"] = body.amount
        with write_lock:
            events = eng().correct(body.original_seq, corrected, body.actor, at=body.at)
        return m.EventsOut(events=[_event_out(e) for e in events])

    # --------------------------------------------------------------- ledger

    @app.get("/ledger/verify", response_model=m.VerifyOut)
    def ledger_verify():
        if app.state.store_path:
            report = verify_store(app.state.store_path)
        else:
            report = eng().log.verify_chain()
        return m.VerifyOut(ok=report.ok, checked=report.checked,
                           first_bad_seq=report.first_bad_seq)

    @app.get("/ledger/replay", response_model=m.ReplayOut)
    def ledger_replay():
        replayed = Engine.replay(list(eng().log), eng().config)
        digest = replayed.state_digest()
        return m.ReplayOut(state_digest=digest, events=len(replayed.log),
                           matches_live=digest == eng().state_digest())

    @app.get("/ledger/export", response_model=m.EventsOut)
    def ledger_export(from_seq: int = Query(default=0), to_seq: int | None = Query(default=None)):
        events = list(eng().log)
        to_seq = to_seq if to_seq is not None else len(events) - 1
        return m.EventsOut(events=[_event_out(e) for e in events[from_seq:to_seq + 1]])

    @app.get("/ledger/state-digest")
    def state_digest():
        return {"state_digest": eng().state_digest()}

    # ---------------------------------------------------------------- audit

    @app.post("/audit/export", response_model=m.AuditReportOut)
    def audit_export(body: m.AuditExportIn):
        with write_lock:
            report, event = export_audit_report(
                eng(), body.from_seq, body.to_seq, body.actor, at=body.at)
        return m.AuditReportOut(
            from_seq=report.from_seq, to_seq=report.to_seq, chain_ok=report.chain_ok,
            event_count=report.event_count, conservation=report.conservation,
            alert_census=report.alert_census, identity_summary=report.identity_summary,
            report_digest=report.report_digest, event=_event_out(event))

    @app.get("/query/history", response_model=m.EventsOut)
    def history(as_account: str, fungibility: str | None = None, tag: str | None = None):
        class_filter = ClassFilter(
            fungibility=Fungibility(fungibility) if fungibility else None,
            behavior_tag=tag)
        scope = VisibilityScope.for_account(eng(), as_account)
        events = history_by_asset_type(eng(), class_filter, scope)
        return m.EventsOut(events=[_event_out(e) for e in events])

    @app.get("/query/feed", response_model=m.FeedOut)
    def feed(as_account: str, since: int = -1, limit: int | None = None):
        scope = VisibilityScope.for_account(eng(), as_account)
        events, cursor = regulatory_feed(eng(), since, scope, limit)
        return m.FeedOut(events=[_event_out(e) for e in events], cursor=cursor)

    # ---------------------------------------------------------- conformance

    def _table_out(table) -> m.ScoreTableOut:
        numerator, denominator = table.total
        return m.ScoreTableOut(
            protocol=table.protocol,
            rows=[m.ScoreRowOut(institution=r.institution, label=r.label,
                                numerator=r.numerator, denominator=r.denominator)
                  for r in table.rows],
            total_numerator=numerator, total_denominator=denominator)

    @app.get("/conformance/table", response_model=m.ConformanceTableOut)
    def conformance_table():
        tables, errata = conformance.reproduce_scorecard()
        return m.ConformanceTableOut(
            tables=[_table_out(t) for t in tables],
            errata=[m.ErratumOut(protocol=e.protocol, institution=e.institution,
                                 recomputed=e.recomputed, reported=e.reported,
                                 denominator=e.denominator) for e in errata],
            totals_match=conformance.reported_totals_match(tables),
            rendered=conformance.render_report(tables, errata))

    @app.post("/conformance/score", response_model=m.ScoreTableOut)
    def conformance_score(body: m.ManifestIn):
        manifest = conformance.ProtocolManifest(
            protocol=body.protocol, items=frozenset(body.items))
        table = conformance.score(manifest, conformance.builtin_matrix())
        return _table_out(table)

    @app.get("/conformance/manifest")
    def conformance_manifest():
        manifest = conformance.derive_manifest_from_engine()
        return {
            "protocol": manifest.protocol,
            "items": sorted(manifest.items),
            "annotations": {str(k): v for k, v in sorted(manifest.annotations.items())},
        }

    # ------------------------------------------------------------- scenario

    @app.post("/scenario/run", response_model=m.TranscriptOut)
    def scenario_run(body: m.ScenarioRunIn):
        config = (ScenarioConfig.from_mapping(body.config)
                  if body.config else ScenarioConfig())
        if body.scenario == "bond":
            transcript, _ = run_bond_scenario(config)
        elif body.scenario == "carbon":
            transcript, _ = run_carbon_scenario(config)
        elif body.scenario == "interop":
            transcript, _, _ = run_interop_scenario(config)
        else:
            raise LedgerError(f"unknown scenario {body.scenario!r}")
        golden_match = None
        if body.golden:
            expected = golden_digests().get(body.scenario, {})
            golden_match = (expected.get("transcript_digest") == transcript.digest()
                            and expected.get("final_state_digest") == transcript.final_state_digest)
        return m.TranscriptOut(
            scenario=transcript.scenario,
            steps=[m.TranscriptStepOut(label=s.label, actor=s.actor,
                                       command=s.command, outcome=s.outcome)
                   for s in transcript.steps],
            final_state_digest=transcript.final_state_digest,
            transcript_digest=transcript.digest(),
            golden_match=golden_match)

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz():
        return "ok"

    return app
