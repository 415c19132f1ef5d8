"""Operator-facing command line; a thin client over the engine.

Every verb binds one engine operation against the store selected by
``--store`` (or RCP_STORE). Exit codes: 0 success, 1 golden or score
mismatch, 2 chain verification failure, 3 verdict rejection or refused
command, 64 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

from .audit import (
    ClassFilter,
    VisibilityScope,
    export_audit_report,
    history_by_asset_type,
    regulatory_feed,
)
from .core import (
    AssetClassDescriptor,
    Fungibility,
    LedgerError,
    PartyRole,
    TokenDefinition,
    quantize,
)
from . import conformance
from .engine import Engine, EngineConfig, MetaTransferAuthorization
from .events import DocumentAnchor
from .goldens import golden_digests
from .identity import KycStatus, RiskRating
from .policy import TransferMode, TransferModeKind, TransferRequest
from .scenarios import (
    ScenarioConfig,
    run_bond_scenario,
    run_carbon_scenario,
    run_interop_scenario,
)
from .service.models import amount_from_text
from .store import (
    default_store_path,
    open_or_create,
    open_store,
    store_lock,
    verify_store,
)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CHAIN = 2
EXIT_REFUSED = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):  # usage errors exit 64
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _emit(args, payload: dict, text: str | None = None) -> None:
    if args.format == "records":
        print(json.dumps(payload, sort_keys=True, separators=(",", ":")))
    else:
        print(text if text is not None else json.dumps(payload, indent=2, sort_keys=True))


def _emit_events(args, events) -> None:
    if not isinstance(events, (list, tuple)):
        events = [events]
    for event in events:
        _emit(args, {"seq": event.seq, "kind": event.kind.value, "hash": event.hash},
              f"{event.kind.value} seq={event.seq} {event.hash}")


def _engine(args, create: bool = True) -> Engine:
    profile_spec = None
    if getattr(args, "profile_file", None):
        with open(args.profile_file, "r", encoding="utf-8") as handle:
            profile_spec = json.load(handle)
    config = EngineConfig(
        engine_id=args.engine_id,
        profile=args.profile,
        recovery_accounts=tuple(args.recovery_account or ()),
        fee_token=args.fee_token,
        fee_collector=args.fee_collector,
        profile_spec=profile_spec,
    )
    if create:
        return open_or_create(args.store, config)
    return open_store(args.store)


def build_parser() -> _Parser:
    parser = _Parser(prog="rcp", description="compliance ledger for tokenized assets")
    parser.add_argument("--store", default=default_store_path(),
                        help="event store path (default: $RCP_STORE or ./rcp.store)")
    parser.add_argument("--format", choices=("text", "records"), default="text")
    parser.add_argument("--engine-id", default="rcp-engine", help="used when creating a store")
    parser.add_argument("--profile", default="default", choices=("default", "finma"),
                        help="policy profile used when creating a store")
    parser.add_argument("--profile-file",
                        help="JSON policy profile used when creating a store")
    parser.add_argument("--recovery-account", action="append",
                        help="designated recovery account (creation only; repeatable)")
    parser.add_argument("--fee-token", help="fee token id for gasless transfers (creation only)")
    parser.add_argument("--fee-collector", help="fee collector account (creation only)")
    sub = parser.add_subparsers(dest="group", required=True)

    # identity ----------------------------------------------------------------
    identity = sub.add_parser("identity").add_subparsers(dest="verb", required=True)
    p = identity.add_parser("register")
    p.add_argument("subject")
    p.add_argument("--profile-digest", help="hex sha-256 of the off-ledger profile")
    p.add_argument("--role", action="append", default=[],
                   choices=[r.value for r in PartyRole])
    p.add_argument("--at", type=int)
    p = identity.add_parser("kyc")
    p.add_argument("subject")
    p.add_argument("status", choices=[s.value for s in KycStatus])
    p.add_argument("--actor", required=True)
    p.add_argument("--risk", choices=[r.value for r in RiskRating])
    p.add_argument("--at", type=int)
    p = identity.add_parser("update")
    p.add_argument("subject")
    p.add_argument("profile_digest")
    p.add_argument("--at", type=int)
    p = identity.add_parser("blacklist")
    p.add_argument("action", choices=("add", "remove"))
    p.add_argument("subject")
    p.add_argument("--actor", required=True)
    p.add_argument("--reason", default="")
    p.add_argument("--at", type=int)
    p = identity.add_parser("screen")
    p.add_argument("subject")

    # tx ----------------------------------------------------------------------
    tx = sub.add_parser("tx").add_subparsers(dest="verb", required=True)
    p = tx.add_parser("define")
    p.add_argument("token")
    p.add_argument("--issuer", required=True)
    p.add_argument("--fungibility", choices=("Fungible", "NonFungible"), default="Fungible")
    p.add_argument("--decimals", type=int, default=0)
    p.add_argument("--subdivisible", action="store_true")
    p.add_argument("--non-transferable", action="store_true")
    p.add_argument("--non-compliant", action="store_true")
    p.add_argument("--expirable", action="store_true")
    p.add_argument("--tag", action="append", default=[])
    p.add_argument("--supply-cap", help="whole units")
    p.add_argument("--expiry", type=int)
    p.add_argument("--doc", action="append", default=[],
                   help="document anchor as doc_id:hex_digest[:uri[:notary]]")
    p.add_argument("--at", type=int)
    p = tx.add_parser("doc")
    p.add_argument("token")
    p.add_argument("doc_id")
    p.add_argument("digest")
    p.add_argument("--uri", default="")
    p.add_argument("--notary")
    p.add_argument("--actor", required=True)
    p.add_argument("--at", type=int)
    p = tx.add_parser("amend")
    p.add_argument("token")
    p.add_argument("--actor", required=True)
    p.add_argument("--note", default="")
    p.add_argument("--at", type=int)
    p = tx.add_parser("transfer")
    p.add_argument("token")
    p.add_argument("sender")
    p.add_argument("receiver")
    p.add_argument("amount")
    p.add_argument("--wire", action="store_true")
    p.add_argument("--actor")
    p.add_argument("--at", type=int)
    p = tx.add_parser("mint")
    p.add_argument("token")
    p.add_argument("to")
    p.add_argument("amount")
    p.add_argument("--actor", required=True)
    p.add_argument("--at", type=int)
    p = tx.add_parser("burn")
    p.add_argument("token")
    p.add_argument("account")
    p.add_argument("amount")
    p.add_argument("--actor", required=True)
    p.add_argument("--at", type=int)
    for verb in ("freeze", "unfreeze"):
        p = tx.add_parser(verb)
        p.add_argument("token")
        p.add_argument("account")
        p.add_argument("amount")
        p.add_argument("--actor", required=True)
        p.add_argument("--at", type=int)
    p = tx.add_parser("recover")
    p.add_argument("token")
    p.add_argument("from_account")
    p.add_argument("to_recovery")
    p.add_argument("amount")
    p.add_argument("--actor", required=True)
    p.add_argument("--at", type=int)
    for verb in ("pause", "resume", "kill", "expire"):
        p = tx.add_parser(verb)
        p.add_argument("token")
        p.add_argument("--actor", required=verb != "expire")
        p.add_argument("--at", type=int)
    p = tx.add_parser("liquidate")
    p.add_argument("token")
    p.add_argument("account")
    p.add_argument("--actor", required=True)
    p.add_argument("--note", default="")
    p.add_argument("--at", type=int)
    p = tx.add_parser("split")
    p.add_argument("token")
    p.add_argument("fractions", type=int)
    p.add_argument("--actor", required=True)
    p.add_argument("--at", type=int)
    p = tx.add_parser("meta")
    p.add_argument("token")
    p.add_argument("sender")
    p.add_argument("receiver")
    p.add_argument("amount")
    p.add_argument("--relayer", required=True)
    p.add_argument("--fee", required=True)
    p.add_argument("--wire", action="store_true")
    p.add_argument("--at", type=int, required=True)
    p.add_argument("--signature", help="hex digest binding the signer to the request; "
                                       "computed locally when omitted")
    p = tx.add_parser("correct")
    p.add_argument("original_seq", type=int)
    p.add_argument("--actor", required=True)
    p.add_argument("--sender")
    p.add_argument("--receiver")
    p.add_argument("--amount", type=int, help="corrected amount in minor units")
    p.add_argument("--at", type=int)

    # policy --------------------------------------------------------------------
    policy = sub.add_parser("policy").add_subparsers(dest="verb", required=True)
    p = policy.add_parser("show")
    p.add_argument("token")
    p = policy.add_parser("set")
    p.add_argument("token")
    p.add_argument("--actor", required=True)
    p.add_argument("--transfer-mode", choices=[k.value for k in TransferModeKind])
    p.add_argument("--whitelist", help="comma-separated accounts")
    p.add_argument("--per-tx-limit", type=int)
    p.add_argument("--window-limit", type=int)
    p.add_argument("--window-seconds", type=int)
    p.add_argument("--occasional-threshold", type=int)
    p.add_argument("--wire-threshold", type=int)
    p.add_argument("--trading-paused", choices=("true", "false"))
    p.add_argument("--trading-restricted", choices=("true", "false"))
    p.add_argument("--at", type=int)

    # ledger ----------------------------------------------------------------
    ledger = sub.add_parser("ledger").add_subparsers(dest="verb", required=True)
    ledger.add_parser("verify")
    p = ledger.add_parser("export")
    p.add_argument("--from", dest="from_seq", type=int, default=0)
    p.add_argument("--to", dest="to_seq", type=int)
    ledger.add_parser("replay")

    # audit / query -----------------------------------------------------------
    audit = sub.add_parser("audit").add_subparsers(dest="verb", required=True)
    p = audit.add_parser("export")
    p.add_argument("--from", dest="from_seq", type=int, default=0)
    p.add_argument("--to", dest="to_seq", type=int)
    p.add_argument("--actor", required=True)
    p.add_argument("--at", type=int)
    query = sub.add_parser("query").add_subparsers(dest="verb", required=True)
    p = query.add_parser("history")
    p.add_argument("--class", dest="fungibility", choices=("Fungible", "NonFungible"))
    p.add_argument("--tag")
    p.add_argument("--as", dest="as_account", required=True)
    p = query.add_parser("feed")
    p.add_argument("--since", type=int, default=-1)
    p.add_argument("--limit", type=int)
    p.add_argument("--as", dest="as_account", required=True)

    # conformance ---------------------------------------------------------------
    conf = sub.add_parser("conformance").add_subparsers(dest="verb", required=True)
    p = conf.add_parser("score")
    p.add_argument("--manifest", required=True, help="JSON file: {protocol, items}")
    conf.add_parser("table")

    # scenario --------------------------------------------------------------
    scenario = sub.add_parser("scenario").add_subparsers(dest="verb", required=True)
    p = scenario.add_parser("run")
    p.add_argument("name", choices=("bond", "carbon", "interop"))
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--fault-step", type=int)
    p.add_argument("--golden", action="store_true")
    p.add_argument("--transcript-out", help="write the rendered transcript here")
    p.add_argument("--logs-dir", help="write each engine's event log into this directory")

    # serve -----------------------------------------------------------------
    p = sub.add_parser("serve")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _anchor_from_spec(spec: str) -> DocumentAnchor:
    parts = spec.split(":")
    if len(parts) < 2:
        raise LedgerError(f"bad --doc spec {spec!r}, want doc_id:digest[:uri[:notary]]")
    return DocumentAnchor(
        doc_id=parts[0], digest=parts[1],
        uri=parts[2] if len(parts) > 2 else "",
        notarized_by=parts[3] if len(parts) > 3 else None)


def _cmd_identity(args) -> int:
    if args.verb == "screen":
        engine = _engine(args, create=False)
        result = engine.screen(args.subject)
        _emit(args, {"subject": args.subject, "result": result.value},
              f"{args.subject}: {result.value}")
        return EXIT_OK
    with store_lock(args.store):
        engine = _engine(args)
        if args.verb == "register":
            digest = args.profile_digest or hashlib.sha256(
                f"profile:{args.subject}".encode()).hexdigest()
            event = engine.register_identity(
                args.subject, digest, [PartyRole(r) for r in args.role], at=args.at)
            _emit_events(args, event)
        elif args.verb == "kyc":
            event = engine.set_kyc_status(
                args.subject, KycStatus(args.status), args.actor, at=args.at,
                risk_rating=RiskRating(args.risk) if args.risk else None)
            _emit_events(args, event)
        elif args.verb == "update":
            events = engine.update_identity(args.subject, args.profile_digest, at=args.at)
            _emit_events(args, list(events))
        elif args.verb == "blacklist":
            if args.action == "add":
                event = engine.blacklist_add(args.subject, args.actor, args.reason, at=args.at)
            else:
                event = engine.blacklist_remove(args.subject, args.actor, at=args.at)
            _emit_events(args, event)
    return EXIT_OK


def _cmd_tx(args) -> int:
    with store_lock(args.store):
        engine = _engine(args)
        if args.verb == "define":
            descriptor = AssetClassDescriptor(
                fungibility=Fungibility(args.fungibility),
                subdivisible=args.subdivisible,
                decimals=args.decimals,
                transferable=not args.non_transferable,
                compliant=not args.non_compliant,
                expirable=args.expirable,
                behavior_tags=frozenset(args.tag),
            )
            cap = quantize(args.supply_cap, args.decimals) if args.supply_cap else None
            definition = TokenDefinition(
                token_id=args.token, asset_class=descriptor, issuer=args.issuer,
                supply_cap=cap, expiry=args.expiry)
            event = engine.define_token(
                definition, args.issuer,
                anchors=[_anchor_from_spec(d) for d in args.doc], at=args.at)
            _emit_events(args, event)
        elif args.verb == "doc":
            anchor = DocumentAnchor(doc_id=args.doc_id, digest=args.digest,
                                    uri=args.uri, notarized_by=args.notary)
            _emit_events(args, engine.attach_document(args.token, anchor, args.actor,
                                                      at=args.at))
        elif args.verb == "amend":
            _emit_events(args, engine.amend_contract(args.token, args.actor,
                                                     at=args.at, note=args.note))
        elif args.verb == "transfer":
            request = TransferRequest(
                token_id=args.token, sender=args.sender, receiver=args.receiver,
                amount=amount_from_text(args.amount), wire=args.wire,
                at=args.at if args.at is not None else engine.clock)
            verdict, events = engine.execute_transfer(request, actor=args.actor, at=args.at)
            payload = {
                "decision": "Approved" if verdict.approved else "Rejected",
                "reasons": verdict.reason_codes,
                "alerts": [a.kind.value for a in verdict.alerts],
                "events": [e.hash for e in events],
            }
            text = payload["decision"]
            if verdict.reasons:
                text += " " + ",".join(verdict.reason_codes)
            if verdict.alerts:
                text += " alerts=" + ",".join(a.kind.value for a in verdict.alerts)
            _emit(args, payload, text)
            if not verdict.approved:
                return EXIT_REFUSED
        elif args.verb == "mint":
            _emit_events(args, engine.mint(args.token, args.to,
                                           amount_from_text(args.amount),
                                           args.actor, at=args.at))
        elif args.verb == "burn":
            _emit_events(args, engine.burn(args.token, args.account,
                                           amount_from_text(args.amount),
                                           args.actor, at=args.at))
        elif args.verb == "freeze":
            _emit_events(args, engine.freeze(args.account, args.token,
                                             amount_from_text(args.amount),
                                             args.actor, at=args.at))
        elif args.verb == "unfreeze":
            _emit_events(args, engine.unfreeze(args.account, args.token,
                                               amount_from_text(args.amount),
                                               args.actor, at=args.at))
        elif args.verb == "recover":
            _emit_events(args, engine.recover(args.token, args.from_account,
                                              args.to_recovery,
                                              amount_from_text(args.amount),
                                              args.actor, at=args.at))
        elif args.verb == "pause":
            _emit_events(args, engine.pause(args.token, args.actor, at=args.at))
        elif args.verb == "resume":
            _emit_events(args, engine.resume(args.token, args.actor, at=args.at))
        elif args.verb == "kill":
            _emit_events(args, engine.kill_switch(args.token, args.actor, at=args.at))
        elif args.verb == "expire":
            _emit_events(args, engine.expire_sweep(args.token, at=args.at))
        elif args.verb == "liquidate":
            _emit_events(args, engine.force_liquidate(args.account, args.token,
                                                      args.actor, at=args.at,
                                                      note=args.note))
        elif args.verb == "split":
            _emit_events(args, engine.split_lot(args.token, args.fractions,
                                                args.actor, at=args.at))
        elif args.verb == "correct":
            corrected = {}
            if args.sender is not None:
                corrected["sender"] = args.sender
            if args.receiver is not None:
                corrected["receiver"] = args.receiver
            if args.amount is not None:
                corrected["amount"] = args.amount
            _emit_events(args, list(engine.correct(args.original_seq, corrected,
                                                   args.actor, at=args.at)))
        elif args.verb == "meta":
            inner = TransferRequest(
                token_id=args.token, sender=args.sender, receiver=args.receiver,
                amount=amount_from_text(args.amount), wire=args.wire, at=args.at)
            signature = args.signature or MetaTransferAuthorization.digest_for(
                inner.sender, inner)
            auth = MetaTransferAuthorization(
                inner=inner, signer=inner.sender, relayer=args.relayer,
                fee=amount_from_text(args.fee), signature_digest=signature)
            verdict, events = engine.execute_meta_transfer(auth, at=args.at)
            _emit(args, {
                "decision": "Approved" if verdict.approved else "Rejected",
                "reasons": verdict.reason_codes,
                "events": [e.hash for e in events],
            }, ("Approved" if verdict.approved else
                "Rejected " + ",".join(verdict.reason_codes)))
            if not verdict.approved:
                return EXIT_REFUSED
    return EXIT_OK


def _cmd_policy(args) -> int:
    if args.verb == "show":
        engine = _engine(args, create=False)
        engine.require_token(args.token)
        payload = engine.policy_for(args.token).to_payload()
        _emit(args, {"token": args.token, "policy": payload})
        return EXIT_OK
    changes: dict = {}
    if args.transfer_mode:
        whitelist = frozenset((args.whitelist or "").split(",")) - {""}
        changes["transfer_mode"] = TransferMode(
            TransferModeKind(args.transfer_mode), whitelist)
    if args.per_tx_limit is not None:
        changes["per_tx_limit"] = args.per_tx_limit
    if args.window_limit is not None:
        changes["counterparty_window_limit"] = (
            args.window_limit, args.window_seconds or 30 * 86_400)
    if args.occasional_threshold is not None:
        changes["occasional_threshold"] = args.occasional_threshold
    if args.wire_threshold is not None:
        changes["wire_threshold"] = args.wire_threshold
    if args.trading_paused is not None:
        changes["trading_paused"] = args.trading_paused == "true"
    if args.trading_restricted is not None:
        changes["trading_restricted"] = args.trading_restricted == "true"
    with store_lock(args.store):
        engine = _engine(args)
        _emit_events(args, engine.set_policy(args.token, args.actor, changes, at=args.at))
    return EXIT_OK


def _cmd_ledger(args) -> int:
    if args.verb == "verify":
        report = verify_store(args.store)
        payload = {"ok": report.ok, "checked": report.checked,
                   "first_bad_seq": report.first_bad_seq}
        _emit(args, payload,
              f"ok checked={report.checked}" if report.ok
              else f"FAIL first_bad_seq={report.first_bad_seq}")
        return EXIT_OK if report.ok else EXIT_CHAIN
    engine = _engine(args, create=False)
    if args.verb == "export":
        events = list(engine.log)
        to_seq = args.to_seq if args.to_seq is not None else len(events) - 1
        for event in events[args.from_seq:to_seq + 1]:
            print(event.to_record())
        return EXIT_OK
    # replay: rebuild from the log alone and print the canonical digest
    replayed = Engine.replay(list(engine.log), engine.config)
    digest = replayed.state_digest()
    live = engine.state_digest()
    _emit(args, {"state_digest": digest, "matches_live": digest == live},
          digest)
    return EXIT_OK if digest == live else EXIT_CHAIN


def _cmd_audit(args) -> int:
    with store_lock(args.store):
        engine = _engine(args, create=False)
        to_seq = args.to_seq if args.to_seq is not None else len(engine.log) - 1
        report, event = export_audit_report(engine, args.from_seq, to_seq,
                                            args.actor, at=args.at)
    payload = report.body()
    payload["report_digest"] = report.report_digest
    payload["event_hash"] = event.hash
    _emit(args, payload)
    return EXIT_OK


def _cmd_query(args) -> int:
    engine = _engine(args, create=False)
    scope = VisibilityScope.for_account(engine, args.as_account)
    if args.verb == "history":
        class_filter = ClassFilter(
            fungibility=Fungibility(args.fungibility) if args.fungibility else None,
            behavior_tag=args.tag)
        events = history_by_asset_type(engine, class_filter, scope)
    else:
        events, cursor = regulatory_feed(engine, args.since, scope, args.limit)
    for event in events:
        if args.format == "records":
            print(event.to_record())
        else:
            print(f"{event.seq:5d} t={event.at:<8d} {event.kind.value:22s} {event.hash[:16]}")
    if args.verb == "feed" and args.format == "text":
        print(f"cursor={cursor}")
    return EXIT_OK


def _cmd_conformance(args) -> int:
    if args.verb == "score":
        with open(args.manifest, "r", encoding="utf-8") as handle:
            manifest = conformance.manifest_from_mapping(json.load(handle))
        table = conformance.score(manifest, conformance.builtin_matrix())
        numerator, denominator = table.total
        _emit(args, {
            "protocol": table.protocol,
            "rows": {row.label: [row.numerator, row.denominator] for row in table.rows},
            "total": [numerator, denominator],
        }, conformance.render_report([table]))
        return EXIT_OK
    tables, errata = conformance.reproduce_scorecard()
    rendered = conformance.render_report(tables, errata)
    if args.format == "records":
        for table in tables:
            numerator, denominator = table.total
            print(json.dumps({
                "protocol": table.protocol,
                "rows": {row.label: [row.numerator, row.denominator] for row in table.rows},
                "total": [numerator, denominator],
            }, sort_keys=True, separators=(",", ":")))
    else:
        print(rendered, end="")
    return EXIT_OK if conformance.reported_totals_match(tables) else EXIT_MISMATCH


def _cmd_scenario(args) -> int:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as handle:
            config = ScenarioConfig.from_mapping(json.load(handle))
    else:
        config = ScenarioConfig()
    if args.fault_step is not None:
        from dataclasses import replace

        config = replace(config, interop=replace(config.interop,
                                                 fault_step=args.fault_step))
    if args.name == "bond":
        transcript, engine = run_bond_scenario(config)
        engines = [engine]
    elif args.name == "carbon":
        transcript, engine = run_carbon_scenario(config)
        engines = [engine]
    else:
        transcript, tradfi, defi = run_interop_scenario(config)
        engines = [tradfi, defi]
    rendered = transcript.render()
    if args.transcript_out:
        with open(args.transcript_out, "w", encoding="utf-8") as handle:
            handle.write(rendered)
    if args.logs_dir:
        from pathlib import Path

        out_dir = Path(args.logs_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for engine in engines:
            log_path = out_dir / f"{engine.config.engine_id}.events"
            with open(log_path, "w", encoding="utf-8") as handle:
                for event in engine.log:
                    handle.write(event.to_record() + "\n")
    if args.format == "records":
        print(json.dumps({
            "scenario": transcript.scenario,
            "transcript_digest": transcript.digest(),
            "final_state_digest": transcript.final_state_digest,
        }, sort_keys=True, separators=(",", ":")))
    else:
        print(rendered, end="")
    if args.golden:
        expected = golden_digests().get(transcript.scenario, {})
        if (expected.get("transcript_digest") != transcript.digest()
                or expected.get("final_state_digest") != transcript.final_state_digest):
            print("golden mismatch", file=sys.stderr)
            return EXIT_MISMATCH
        print("golden ok" if args.format == "text" else "", end="\n" if args.format == "text" else "")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(store_path=args.store)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    handlers = {
        "identity": _cmd_identity,
        "tx": _cmd_tx,
        "policy": _cmd_policy,
        "ledger": _cmd_ledger,
        "audit": _cmd_audit,
        "query": _cmd_query,
        "conformance": _cmd_conformance,
        "scenario": _cmd_scenario,
        "serve": _cmd_serve,
    }
    try:
        return handlers[args.group](args)
    except LedgerError as exc:
        code = f" [{exc.reason_code}]" if exc.reason_code else ""
        print(f"refused: {type(exc).__name__}: {exc}{code}", file=sys.stderr)
        return EXIT_REFUSED
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFUSED


if __name__ == "__main__":
    raise SystemExit(main())
