"""Deterministic end-to-end scenario replays with golden transcripts.

Three flows: a bond issuance-to-settlement lifecycle, a carbon-credit
tokenization with use/burn handling, and a cross-ledger atomic settlement
between two engine instances driven by a two-phase coordinator.

Transcripts are byte-stable: logical time advances one tick per command,
identifiers come from the config roster, and every outcome is an event
digest, so an identical config always produces identical transcript and
final state digests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .audit import (
    ClassFilter,
    VisibilityScope,
    export_audit_report,
    history_by_asset_type,
    regulatory_feed,
)
from .core import (
    Amount,
    AssetClassDescriptor,
    Fungibility,
    LedgerError,
    PartyRole,
    PrecisionLoss,
    TokenDefinition,
    div_round_half_even,
    quantize,
)
from .engine import (
    Engine,
    EngineConfig,
    MetaTransferAuthorization,
)
from .events import DocumentAnchor, EventKind, LedgerEvent, sha256_hex
from .policy import (
    TransferMode,
    TransferModeKind,
    TransferRequest,
    check_transfer,
    normalize_to_token_scale,
)


class ConfigError(LedgerError):
    pass


# ------------------------------------------------------------------- config


@dataclass(frozen=True)
class ActorRoster:
    issuer: str = "issuer-1"
    legal_counsel: str = "counsel-1"
    operator: str = "operator-1"
    regulator: str = "regulator-1"
    auditor: str = "auditor-1"
    broker: str = "broker-1"
    relayer: str = "relayer-1"
    consumer: str = "consumer-1"
    registry: str = "registry-1"
    recovery: str = "recovery-1"
    investors: tuple[str, ...] = ("inv-1", "inv-2")
    unverified_investors: tuple[str, ...] = ("inv-x",)
    bad_actor: str = "rogue-1"


@dataclass(frozen=True)
class BondParams:
    face_value: str = "1000.00"
    coupon_rate_bp: int = 500
    maturity_offset: int = 1_000
    cash_decimals: int = 2
    units_per_investor: int = 2
    big_buyer_units: int = 16
    security_form: str = "FT"  # FT or NFT, exclusive
    skip_legal_docs: bool = False


@dataclass(frozen=True)
class CarbonParams:
    credit_count: int = 100
    splittable: bool = True
    validity_offset: int = 5_000
    use_after_expiry: bool = False


@dataclass(frozen=True)
class InteropParams:
    fault_step: int | None = None
    blacklist_leg_receiver: bool = False
    bond_units: int = 10
    cash_amount: str = "10500.00"


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 7
    actors: ActorRoster = field(default_factory=ActorRoster)
    bond: BondParams = field(default_factory=BondParams)
    carbon: CarbonParams = field(default_factory=CarbonParams)
    interop: InteropParams = field(default_factory=InteropParams)

    @staticmethod
    def from_mapping(raw: dict) -> "ScenarioConfig":
        try:
            actors = dict(raw.get("actors", {}))
            if "investors" in actors:
                actors["investors"] = tuple(actors["investors"])
            if "unverified_investors" in actors:
                actors["unverified_investors"] = tuple(actors["unverified_investors"])
            return ScenarioConfig(
                seed=raw.get("seed", 7),
                actors=ActorRoster(**actors),
                bond=BondParams(**raw.get("bond", {})),
                carbon=CarbonParams(**raw.get("carbon", {})),
                interop=InteropParams(**raw.get("interop", {})),
            )
        except TypeError as exc:
            raise ConfigError(f"bad scenario config: {exc}") from exc


# --------------------------------------------------------------- transcript


@dataclass(frozen=True)
class TranscriptStep:
    label: str
    actor: str
    command: str
    outcome: str


@dataclass(frozen=True)
class ScenarioTranscript:
    scenario: str
    steps: tuple[TranscriptStep, ...]
    final_state_digest: str

    def digest(self) -> str:
        body = json.dumps(
            {
                "scenario": self.scenario,
                "steps": [[s.label, s.actor, s.command, s.outcome] for s in self.steps],
                "final_state_digest": self.final_state_digest,
            },
            sort_keys=True, separators=(",", ":"), ensure_ascii=True)
        return sha256_hex(body.encode("utf-8"))

    def labels(self) -> set[str]:
        return {step.label for step in self.steps}

    def render(self) -> str:
        lines = [f"scenario: {self.scenario}"]
        for index, step in enumerate(self.steps):
            outcome = step.outcome[:16] + "..." if len(step.outcome) > 19 else step.outcome
            lines.append(f"{index:3d}  [{step.label}] {step.actor}: {step.command} -> {outcome}")
        lines.append(f"final state digest: {self.final_state_digest}")
        lines.append(f"transcript digest:  {self.digest()}")
        return "\n".join(lines) + "\n"


class _Run:
    """Ticks logical time and collects transcript steps."""

    def __init__(self, scenario: str):
        self.scenario = scenario
        self.steps: list[TranscriptStep] = []
        self.t = 0

    def tick(self) -> int:
        self.t += 1
        return self.t

    def advance_to(self, t: int) -> int:
        self.t = max(self.t, t)
        return self.t

    def note(self, label: str, actor: str, command: str, outcome: str = "") -> None:
        self.steps.append(TranscriptStep(label, actor, command, outcome))

    def record(self, label: str, actor: str, command: str,
               events: list[LedgerEvent] | LedgerEvent) -> None:
        if isinstance(events, LedgerEvent):
            events = [events]
        self.steps.append(TranscriptStep(
            label, actor, command, ",".join(e.hash for e in events)))

    def finish(self, final_digest: str) -> ScenarioTranscript:
        return ScenarioTranscript(
            scenario=self.scenario, steps=tuple(self.steps), final_state_digest=final_digest)


def _digest_for(account: str, version: int = 1) -> str:
    return hashlib.sha256(f"profile:{account}:{version}".encode()).hexdigest()


def _doc_anchor(doc_id: str, text: str, notary: str | None = None) -> DocumentAnchor:
    return DocumentAnchor(
        doc_id=doc_id,
        digest=hashlib.sha256(text.encode()).hexdigest(),
        uri=f"docs/{doc_id}",
        notarized_by=notary,
    )


def _register(engine: Engine, run: _Run, account: str, roles: tuple[PartyRole, ...],
              verify: bool, operator: str, label: str) -> None:
    event = engine.register_identity(account, _digest_for(account), roles, at=run.tick())
    run.record(label, account, f"identity register {account}", event)
    if verify:
        from .identity import KycStatus

        event = engine.set_kyc_status(account, KycStatus.VERIFIED, operator, at=run.tick())
        run.record(label, operator, f"identity kyc {account} Verified", event)


# ------------------------------------------------------------ bond scenario

BOND_PHASES = (
    "Preparation Phase",
    "Tokenization and Issuance Phase",
    "KYC and Trading Restrictions Setup",
    "Market Trading Phase",
    "Maturity and Settlement Phase",
    "Auditing and Reporting Phase",
)

ALGORITHM1_LABELS = BOND_PHASES + (
    "Legal and Regulatory Compliance met",
    "Proceed to Tokenization and Issuance",
    "Halt and Review Requirements",
    "Define and Deploy Smart Contracts",
    "Issue Tokenized Cash (FT) and Securities (NFT)",
    "Set Regulatory Compliance and Trading Restrictions",
    "KYC Approved",
    "Set Trading Restrictions",
    "Request Additional Information",
    "Market Open",
    "Trade Request Complies with Restrictions",
    "Execute Trade",
    "Reject Trade",
    "Bond Maturity Reached",
    "Prepare for Settlement",
    "Calculate Principal and Interest",
    "Execute Gasless Settlement",
    "Transfer Assets to Investors",
    "Record Settlement for Audit",
    "Perform Real-time Transaction Monitoring",
    "Maintain Record Immutability",
    "Automated Regulatory Reporting",
)

CASH_TOKEN = "cash"
BOND_TOKEN = "bond"


def settlement_per_unit(face_value: str, coupon_rate_bp: int, cash_decimals: int) -> tuple[int, int, int]:
    """(principal, interest, total) per bond unit in cash minor units.

    Interest is face x rate / 10,000 with round-half-even on minor units.
    """
    principal = quantize(face_value, cash_decimals).minor_units
    interest = div_round_half_even(principal * coupon_rate_bp, 10_000)
    return principal, interest, principal + interest


def run_bond_scenario(config: ScenarioConfig) -> tuple[ScenarioTranscript, Engine]:
    roster = config.actors
    params = config.bond
    if params.security_form not in ("FT", "NFT"):
        raise ConfigError(f"security_form must be FT or NFT, got {params.security_form!r}")
    run = _Run("bond")
    engine = Engine(EngineConfig(
        engine_id="bond",
        recovery_accounts=(roster.recovery,),
        fee_token=CASH_TOKEN,
        fee_collector=roster.operator,
    ))

    # Preparation: compliance review of parties plus the notarized prospectus.
    run.note("Preparation Phase", "-", "phase", "")
    core_actors = (
        (roster.operator, (PartyRole.OPERATOR,)),
        (roster.issuer, (PartyRole.ISSUER,)),
        (roster.legal_counsel, (PartyRole.LEGAL_COUNSEL,)),
        (roster.regulator, (PartyRole.REGULATOR,)),
        (roster.auditor, (PartyRole.AUDITOR,)),
        (roster.broker, (PartyRole.BROKER,)),
        (roster.relayer, (PartyRole.RELAYER,)),
    )
    for account, roles in core_actors:
        _register(engine, run, account, roles, verify=True, operator=roster.operator,
                  label="Legal and Regulatory Compliance met")
    if params.skip_legal_docs:
        run.note("Halt and Review Requirements", roster.issuer,
                 "issuance blocked: prospectus missing", "halted")
        return run.finish(engine.state_digest()), engine
    prospectus = _doc_anchor("bond-prospectus", f"bond prospectus {params.face_value}",
                             notary=roster.legal_counsel)
    run.note("Proceed to Tokenization and Issuance", roster.legal_counsel,
             "notarize prospectus", prospectus.digest)

    # Tokenization and issuance: cash FT plus the bond security (FT xor NFT).
    run.note("Tokenization and Issuance Phase", "-", "phase", "")
    cash_class = AssetClassDescriptor(
        fungibility=Fungibility.FUNGIBLE, subdivisible=True,
        decimals=params.cash_decimals, transferable=True, compliant=True)
    event = engine.define_token(
        TokenDefinition(token_id=CASH_TOKEN, asset_class=cash_class, issuer=roster.issuer),
        roster.issuer, anchors=[prospectus], at=run.tick())
    run.record("Define and Deploy Smart Contracts", roster.issuer,
               f"tx define {CASH_TOKEN} {cash_class.render()}", event)
    total_units = (params.units_per_investor * max(len(roster.investors) - 1, 0)
                   + params.big_buyer_units)
    if params.security_form == "FT":
        bond_class = AssetClassDescriptor(
            fungibility=Fungibility.FUNGIBLE, subdivisible=False, decimals=0,
            transferable=True, compliant=True, expirable=True)
        # one spare unit stays with the issuer for the rejected-trade branch
        mint_units = total_units + 1
        bond_cap = Amount(mint_units, 0)
    else:
        bond_class = AssetClassDescriptor(
            fungibility=Fungibility.NON_FUNGIBLE, subdivisible=False, decimals=0,
            transferable=True, compliant=True, expirable=True)
        bond_cap = Amount(1, 0)
        total_units = 1
        mint_units = 1
    maturity = params.maturity_offset
    event = engine.define_token(
        TokenDefinition(token_id=BOND_TOKEN, asset_class=bond_class, issuer=roster.issuer,
                        supply_cap=bond_cap, expiry=maturity),
        roster.issuer, anchors=[prospectus], at=run.tick())
    run.record("Define and Deploy Smart Contracts", roster.issuer,
               f"tx define {BOND_TOKEN} {bond_class.render()}", event)

    principal, interest, per_unit = settlement_per_unit(
        params.face_value, params.coupon_rate_bp, params.cash_decimals)
    issuer_cash = per_unit * total_units * 2
    event = engine.mint(CASH_TOKEN, roster.issuer,
                        Amount(issuer_cash, params.cash_decimals), roster.issuer, at=run.tick())
    run.record("Issue Tokenized Cash (FT) and Securities (NFT)", roster.issuer,
               "tx mint cash treasury", event)
    event = engine.mint(CASH_TOKEN, roster.relayer,
                        Amount(100 * 10 ** params.cash_decimals, params.cash_decimals),
                        roster.issuer, at=run.tick())
    run.record("Issue Tokenized Cash (FT) and Securities (NFT)", roster.issuer,
               "tx mint cash relayer-float", event)
    event = engine.mint(BOND_TOKEN, roster.issuer, Amount(mint_units, 0),
                        roster.issuer, at=run.tick())
    run.record("Issue Tokenized Cash (FT) and Securities (NFT)", roster.issuer,
               "tx mint bond supply", event)
    event = engine.set_policy(BOND_TOKEN, roster.issuer,
                              {"per_tx_limit": 50_000}, at=run.tick())
    run.record("Set Regulatory Compliance and Trading Restrictions", roster.issuer,
               "policy set bond per-tx-limit", event)

    # KYC setup: verified investors are whitelisted, others must resubmit.
    run.note("KYC and Trading Restrictions Setup", "-", "phase", "")
    whitelist = {roster.issuer, roster.broker}
    for investor in roster.investors:
        _register(engine, run, investor, (PartyRole.INVESTOR,), verify=True,
                  operator=roster.operator, label="KYC Approved")
        whitelist.add(investor)
        event = engine.set_policy(
            BOND_TOKEN, roster.issuer,
            {"transfer_mode": TransferMode(TransferModeKind.WHITELIST_ONLY,
                                           frozenset(whitelist))},
            at=run.tick())
        run.record("Set Trading Restrictions", roster.issuer,
                   f"policy set bond whitelist+={investor}", event)
    for investor in roster.unverified_investors:
        event = engine.register_identity(investor, _digest_for(investor),
                                         (PartyRole.INVESTOR,), at=run.tick())
        run.record("Request Additional Information", roster.operator,
                   f"identity register {investor} (kyc pending)", event)
        whitelist.add(investor)
        event = engine.set_policy(
            BOND_TOKEN, roster.issuer,
            {"transfer_mode": TransferMode(TransferModeKind.WHITELIST_ONLY,
                                           frozenset(whitelist))},
            at=run.tick())
        run.record("Set Trading Restrictions", roster.issuer,
                   f"policy set bond whitelist+={investor} (pending kyc)", event)

    # Market trading: primary distribution, cash against bonds.
    run.note("Market Trading Phase", "-", "phase", "")
    run.note("Market Open", roster.broker, "open order window", "")
    purchases: list[tuple[str, int]] = []
    for index, investor in enumerate(roster.investors):
        units = params.big_buyer_units if index == 0 else params.units_per_investor
        if params.security_form == "NFT":
            units = 1 if index == 0 else 0
        if units == 0:
            continue
        purchases.append((investor, units))
        cash_needed = principal * units
        event = engine.mint(CASH_TOKEN, investor,
                            Amount(cash_needed, params.cash_decimals),
                            roster.issuer, at=run.tick())
        run.record("Trade Request Complies with Restrictions", roster.broker,
                   f"fund {investor} with {cash_needed} cash minor units", event)
        when = run.tick()
        verdict, events = engine.execute_transfer(TransferRequest(
            token_id=CASH_TOKEN, sender=investor, receiver=roster.issuer,
            amount=Amount(cash_needed, params.cash_decimals), at=when),
            actor=roster.broker)
        run.record("Trade Request Complies with Restrictions", roster.broker,
                   f"cash leg {investor} pays {cash_needed}", events)
        when = run.tick()
        verdict, events = engine.execute_transfer(TransferRequest(
            token_id=BOND_TOKEN, sender=roster.issuer, receiver=investor,
            amount=Amount(units, 0), at=when), actor=roster.broker)
        run.record("Execute Trade", roster.broker,
                   f"bond leg {units} units to {investor}", events)
    for investor in roster.unverified_investors:
        when = run.tick()
        verdict, events = engine.execute_transfer(TransferRequest(
            token_id=BOND_TOKEN, sender=roster.issuer, receiver=investor,
            amount=Amount(1, 0), at=when), actor=roster.broker)
        run.record("Reject Trade", roster.broker,
                   f"bond leg to {investor}: {','.join(verdict.reason_codes)}", events)

    # Maturity and settlement: principal plus coupon, paid gasless.
    run.note("Maturity and Settlement Phase", "-", "phase", "")
    run.advance_to(maturity)
    events = engine.expire_sweep(BOND_TOKEN, at=run.t)
    run.record("Bond Maturity Reached", roster.operator, "expire sweep bond", events)
    holders = [(investor, engine.holding(BOND_TOKEN, investor).free)
               for investor, _ in purchases]
    run.note("Prepare for Settlement", roster.operator,
             "snapshot bond holders", ";".join(f"{h}:{n}" for h, n in holders))
    run.note("Calculate Principal and Interest", roster.operator,
             f"per unit: principal={principal} interest={interest}",
             str(per_unit))
    fee = Amount(10 ** max(params.cash_decimals - 1, 0), params.cash_decimals)
    for investor, units in holders:
        if units == 0:
            continue
        payout = per_unit * units
        when = run.tick()
        auth = MetaTransferAuthorization.build(
            TransferRequest(token_id=CASH_TOKEN, sender=roster.issuer,
                            receiver=investor,
                            amount=Amount(payout, params.cash_decimals), at=when),
            relayer=roster.relayer, fee=fee)
        verdict, events = engine.execute_meta_transfer(auth, at=when, settlement={
            "principal": principal * units,
            "interest": interest * units,
            "per_unit": per_unit,
            "units": units,
        })
        run.record("Execute Gasless Settlement", roster.relayer,
                   f"settle {payout} cash to {investor}", events)
        when = run.tick()
        verdict, events = engine.execute_transfer(TransferRequest(
            token_id=BOND_TOKEN, sender=investor, receiver=roster.issuer,
            amount=Amount(units, 0), at=when), actor=roster.broker)
        run.record("Transfer Assets to Investors", roster.broker,
                   f"redeem {units} bond units from {investor}", events)
    report, event = export_audit_report(
        engine, 0, len(engine.log) - 1, roster.auditor, at=run.tick())
    run.record("Record Settlement for Audit", roster.auditor,
               f"audit export digest={report.report_digest[:16]}", event)

    # Auditing and reporting.
    run.note("Auditing and Reporting Phase", "-", "phase", "")
    scope = VisibilityScope.for_account(engine, roster.regulator)
    feed, cursor = regulatory_feed(engine, -1, scope)
    alerts = sum(1 for e in feed if e.kind is EventKind.ALERT_RAISED)
    run.note("Perform Real-time Transaction Monitoring", roster.regulator,
             "query feed since=-1", f"events={len(feed)},alerts={alerts}")
    chain = engine.log.verify_chain()
    run.note("Maintain Record Immutability", roster.auditor, "ledger verify",
             f"ok={chain.ok},checked={chain.checked}")
    feed2, cursor2 = regulatory_feed(engine, cursor, scope)
    run.note("Automated Regulatory Reporting", roster.regulator,
             f"query feed since={cursor}", f"events={len(feed2)},cursor={cursor2}")
    return run.finish(engine.state_digest()), engine


# ---------------------------------------------------------- carbon scenario

CARBON_TOKEN = "carbon-credit"
CARBON_LOTS = f"{CARBON_TOKEN}.lots"

ALGORITHM2_LABELS = (
    "Preparation for Issuance Completed",
    "Check Preparation Status",
    "Attach Legal Documents and Compliance",
    "Role-Based Permission Setting",
    "Setting Token Validity Period",
    "Setting Transfer Restrictions",
    "Request Transmitted to RCP via Exchange",
    "RCP Reviews Transaction Restrictions and Regulations",
    "Transaction Approval and Recording",
    "Transaction Rejection and Reason Notification",
    "Issuer Requests Asset Freeze or Recovery",
    "RCP Approves Request and Records",
    "Investor Requests Token Split or Burn",
    "Audit and Verification Request Exists",
    "Receive Request from Audit Institution",
    "Role-Based Permission Setting Verification",
    "Provide Role-Based Permission Setting Information",
    "Legal Document Attachment and Compliance Verification",
    "Provide Legal Document and Compliance Information",
    "Transaction Records and Activity Logs Request",
    "Provide Transaction Records and Activity Logs",
    "Customer Identity Verification and Transaction Restriction Verification",
    "Provide Verification Results and Related Information",
    "Asset Freeze and Blacklist Management Verification",
    "Asset Recovery and Forced Liquidation (Burn) Process Verification",
    "Provide Process Verification Results and Related Information",
    "Consumer Requests Use of Carbon Credit Rights",
    "RCP Verifies Request ('Using Transfer Restrictions')",
    "Ownership Transfer and Use Approval",
    "Reporting Use to Regulatory Body and Attaching Legal Documents",
    "Use Request Rejection and Reason Notification",
    "Consumer Requests Burn of Carbon Credit Rights",
    "RCP Verifies Burn Request",
    "Burn Approval and Ensuring Record Immutability",
    "Reporting Burn Process and Legal Compliance to Audit Institution",
    "Burn Request Rejection and Reason Notification",
)


def run_carbon_scenario(config: ScenarioConfig) -> tuple[ScenarioTranscript, Engine]:
    roster = config.actors
    params = config.carbon
    if params.credit_count <= 0:
        raise ConfigError("credit_count must be positive")
    run = _Run("carbon")
    engine = Engine(EngineConfig(
        engine_id="carbon",
        recovery_accounts=(roster.recovery,),
    ))

    investor = roster.investors[0]
    for account, roles in (
            (roster.operator, (PartyRole.OPERATOR,)),
            (roster.issuer, (PartyRole.ISSUER,)),
            (roster.legal_counsel, (PartyRole.LEGAL_COUNSEL,)),
            (roster.regulator, (PartyRole.REGULATOR,)),
            (roster.auditor, (PartyRole.AUDITOR,)),
            (roster.broker, (PartyRole.BROKER,)),
            (investor, (PartyRole.INVESTOR,)),
            (roster.consumer, (PartyRole.CONSUMER,)),
            (roster.registry, (PartyRole.OPERATOR,)),
            (roster.bad_actor, (PartyRole.INVESTOR,)),
    ):
        _register(engine, run, account, roles, verify=True, operator=roster.operator,
                  label="Preparation for Issuance Completed")

    # First pass: issuance preconditions are not met yet.
    run.note("Check Preparation Status", roster.issuer,
             "issuance checklist", "legal documents missing")
    certificate = _doc_anchor("carbon-certificate", "verified carbon standard batch",
                              notary=roster.legal_counsel)
    run.note("Attach Legal Documents and Compliance", roster.issuer,
             "prepare certificate anchor", certificate.digest)
    run.note("Role-Based Permission Setting", roster.issuer,
             "grant burn to holders, freeze/recovery to regulator", "configured")
    validity = params.validity_offset
    run.note("Setting Token Validity Period", roster.issuer,
             f"validity until t={validity}", str(validity))
    whitelist = frozenset({roster.issuer, investor, roster.consumer, roster.broker,
                           roster.registry, roster.bad_actor})
    run.note("Setting Transfer Restrictions", roster.issuer,
             "whitelist holders", ",".join(sorted(whitelist)))

    # Issuance: one NFT credit batch, escrowed and split into tradable lots.
    tags = frozenset({"splittable"}) if params.splittable else frozenset()
    credit_class = AssetClassDescriptor(
        fungibility=Fungibility.NON_FUNGIBLE, subdivisible=False, decimals=0,
        transferable=True, compliant=True, expirable=True, behavior_tags=tags)
    event = engine.define_token(
        TokenDefinition(token_id=CARBON_TOKEN, asset_class=credit_class,
                        issuer=roster.issuer, supply_cap=Amount(1, 0), expiry=validity),
        roster.issuer, anchors=[certificate],
        policy_overrides={"transfer_mode": TransferMode(TransferModeKind.WHITELIST_ONLY,
                                                        whitelist)},
        at=run.tick())
    run.record("Issuance of Token as NFT", roster.issuer,
               f"tx define {CARBON_TOKEN} {credit_class.render()}", event)
    event = engine.mint(CARBON_TOKEN, roster.issuer, Amount(1, 0), roster.issuer,
                        at=run.tick())
    run.record("Issuance of Token as NFT", roster.issuer, "tx mint credit", event)
    run.note("Asset Class Management", roster.issuer,
             "classify credit", credit_class.render())
    if params.splittable:
        events = engine.split_lot(CARBON_TOKEN, params.credit_count, roster.issuer,
                                  at=run.tick())
        run.record("Setting Token Split and Burn Options", roster.issuer,
                   f"tx split {CARBON_TOKEN} into {params.credit_count} lots", events)
        lots = CARBON_LOTS
    else:
        lots = CARBON_TOKEN
    run.note("Token Supply Control", roster.issuer,
             f"lot supply capped at {params.credit_count}",
             str(engine.token_state(lots).supply_cap_minor))

    # Trading through the exchange.
    half = max(params.credit_count // 2, 1)
    when = run.tick()
    run.note("Request Transmitted to RCP via Exchange", roster.broker,
             f"{investor} buys {half} lots", "")
    verdict, events = engine.execute_transfer(TransferRequest(
        token_id=lots, sender=roster.issuer, receiver=investor,
        amount=Amount(half, 0), at=when), actor=roster.broker)
    run.note("RCP Reviews Transaction Restrictions and Regulations", roster.broker,
             "pipeline check", "Approved" if verdict.approved else "Rejected")
    run.record("Transaction Approval and Recording", roster.broker,
               f"lots {half} to {investor}", events)

    quarter = max(half // 2, 1)
    when = run.tick()
    verdict, events = engine.execute_transfer(TransferRequest(
        token_id=lots, sender=roster.issuer, receiver=roster.bad_actor,
        amount=Amount(quarter, 0), at=when), actor=roster.broker)
    run.record("Transaction Approval and Recording", roster.broker,
               f"lots {quarter} to {roster.bad_actor}", events)
    event = engine.blacklist_add(roster.bad_actor, roster.regulator,
                                 reason="sanctions match", at=run.tick())
    run.record("RCP Approves Request and Records", roster.regulator,
               f"identity blacklist {roster.bad_actor}", event)
    when = run.tick()
    verdict, events = engine.execute_transfer(TransferRequest(
        token_id=lots, sender=roster.issuer, receiver=roster.bad_actor,
        amount=Amount(1, 0), at=when), actor=roster.broker)
    run.record("Transaction Rejection and Reason Notification", roster.broker,
               f"lots to {roster.bad_actor}: {','.join(verdict.reason_codes)}", events)

    # Regulatory intervention: freeze, then recover the tainted lots.
    run.note("Issuer Requests Asset Freeze or Recovery", roster.issuer,
             f"freeze and recover {roster.bad_actor} lots", "")
    event = engine.freeze(roster.bad_actor, lots, Amount(quarter, 0),
                          roster.regulator, at=run.tick())
    run.record("RCP Approves Request and Records", roster.regulator,
               f"tx freeze {quarter} lots of {roster.bad_actor}", event)
    event = engine.recover(lots, roster.bad_actor, roster.recovery, Amount(quarter, 0),
                           roster.regulator, at=run.tick())
    run.record("RCP Approves Request and Records", roster.regulator,
               f"tx recover {quarter} lots to {roster.recovery}", event)

    # Holder-requested burn.
    run.note("Investor Requests Token Split or Burn", investor, "burn one lot", "")
    events = engine.burn(lots, investor, Amount(1, 0), investor, at=run.tick())
    run.record("RCP Approves Request and Records", investor, "tx burn 1 lot", events)

    # Audit and verification battery.
    run.note("Audit and Verification Request Exists", roster.auditor, "audit session", "")
    run.note("Receive Request from Audit Institution", roster.auditor,
             "verification battery", "")
    scope = VisibilityScope.for_account(engine, roster.auditor)
    policy = engine.policy_for(lots)
    run.note("Role-Based Permission Setting Verification", roster.auditor,
             "query policy permissions", "")
    run.note("Provide Role-Based Permission Setting Information", roster.auditor,
             "permission table",
             ";".join(f"{a}:{len(r)}" for a, r in sorted(policy.role_permissions.items())))
    anchors = engine.token_state(CARBON_TOKEN).document_anchors
    run.note("Legal Document Attachment and Compliance Verification", roster.auditor,
             "query document anchors", "")
    run.note("Provide Legal Document and Compliance Information", roster.auditor,
             "anchor digests", ",".join(a.digest[:16] for a in anchors))
    run.note("Transaction Records and Activity Logs Request", roster.auditor,
             "query history --class all", "")
    history = history_by_asset_type(engine, ClassFilter(), scope)
    run.note("Provide Transaction Records and Activity Logs", roster.auditor,
             "history events", str(len(history)))
    run.note("Customer Identity Verification and Transaction Restriction Verification",
             roster.auditor, "screen parties", "")
    screens = [f"{a}:{engine.screen(a).value}"
               for a in (investor, roster.consumer, roster.bad_actor)]
    run.note("Provide Verification Results and Related Information", roster.auditor,
             "screening results", ";".join(screens))
    run.note("Asset Freeze and Blacklist Management Verification", roster.auditor,
             "query frozen and blacklist", "")
    frozen_total = sum(h.frozen for (tid, _), h in engine.holdings.items() if tid == lots)
    run.note("Provide Verification Results and Related Information", roster.auditor,
             "freeze/blacklist state",
             f"frozen={frozen_total};listed={','.join(engine.registry.blacklisted_subjects())}")
    run.note("Asset Recovery and Forced Liquidation (Burn) Process Verification",
             roster.auditor, "query recovery trail", "")
    recoveries = sum(1 for e in engine.log if e.kind is EventKind.RECOVERED)
    run.note("Provide Process Verification Results and Related Information", roster.auditor,
             "recovery events", str(recoveries))

    # Consumer use: ownership transfer into the retirement registry.
    when = run.tick()
    verdict, events = engine.execute_transfer(TransferRequest(
        token_id=lots, sender=investor, receiver=roster.consumer,
        amount=Amount(2, 0), at=when), actor=roster.broker)
    run.record("Transaction Approval and Recording", roster.broker,
               f"lots 2 to {roster.consumer}", events)
    run.note("Consumer Requests Use of Carbon Credit Rights", roster.consumer,
             "use 1 credit lot", "")
    use_at = validity if params.use_after_expiry else run.tick()
    run.advance_to(use_at)
    verdict, events = engine.execute_transfer(TransferRequest(
        token_id=lots, sender=roster.consumer, receiver=roster.registry,
        amount=Amount(1, 0), at=use_at), actor=roster.consumer)
    run.note("RCP Verifies Request ('Using Transfer Restrictions')", roster.consumer,
             "pipeline check", "Approved" if verdict.approved else "Rejected")
    if verdict.approved:
        run.record("Ownership Transfer and Use Approval", roster.consumer,
                   "retire 1 lot to registry", events)
        usage_doc = _doc_anchor("usage-report", "credit retirement statement",
                                notary=roster.legal_counsel)
        event = engine.attach_document(lots, usage_doc, roster.legal_counsel, at=run.tick())
        run.record("Reporting Use to Regulatory Body and Attaching Legal Documents",
                   roster.legal_counsel, "attach usage report", event)
    else:
        run.note("Use Request Rejection and Reason Notification", roster.consumer,
                 "use rejected", ",".join(verdict.reason_codes))

    # Consumer burn, then the double-spend attempts that must fail.
    run.note("Consumer Requests Burn of Carbon Credit Rights", roster.consumer,
             "burn remaining lot", "")
    burned = False
    try:
        events = engine.burn(lots, roster.consumer, Amount(1, 0), roster.consumer,
                             at=run.tick())
        burned = True
        run.note("RCP Verifies Burn Request", roster.consumer, "burn check", "Approved")
        chain = engine.log.verify_chain()
        run.record("Burn Approval and Ensuring Record Immutability", roster.consumer,
                   f"tx burn 1 lot (chain ok={chain.ok})", events)
        report, event = export_audit_report(engine, 0, len(engine.log) - 1,
                                            roster.auditor, at=run.tick())
        run.record("Reporting Burn Process and Legal Compliance to Audit Institution",
                   roster.auditor, f"audit export digest={report.report_digest[:16]}", event)
    except LedgerError as exc:
        run.note("RCP Verifies Burn Request", roster.consumer, "burn check", "Rejected")
        run.note("Burn Request Rejection and Reason Notification", roster.consumer,
                 "burn rejected", type(exc).__name__)

    when = run.tick()
    verdict, events = engine.execute_transfer(TransferRequest(
        token_id=lots, sender=roster.consumer, receiver=roster.registry,
        amount=Amount(1, 0), at=when), actor=roster.consumer)
    run.note("Use Request Rejection and Reason Notification", roster.consumer,
             "re-use of burned credit", ",".join(verdict.reason_codes))
    if burned:
        try:
            engine.burn(lots, roster.consumer, Amount(1, 0), roster.consumer, at=run.tick())
        except LedgerError as exc:
            run.note("Burn Request Rejection and Reason Notification", roster.consumer,
                     "second burn rejected", type(exc).__name__)
    return run.finish(engine.state_digest()), engine


# --------------------------------------------------------- interop scenario


@dataclass(frozen=True)
class SwapLeg:
    engine_id: str
    request: TransferRequest


class SwapPhase:
    INIT = "Init"
    PREPARED = "Prepared"
    COMMITTED = "Committed"
    ABORTED = "Aborted"


@dataclass
class SwapState:
    swap_id: str
    legs: tuple[SwapLeg, SwapLeg]
    phase: str = SwapPhase.INIT
    decision: str | None = None
    fault: str | None = None


# Every coordinator step a fault can strike at; positions hit before/after
# each lock and before each terminal append.
SWAP_FAULT_POINTS = (
    "before-prepare-a",
    "after-prepare-a",
    "before-prepare-b",
    "after-prepare-b",
    "before-decision",
    "before-terminal-a",
    "before-terminal-b",
)


class _CoordinatorHalt(Exception):
    pass


class SwapCoordinator:
    """Two-phase lock/commit across two engines with a durable decision record.

    A fault halts the coordinator mid-protocol; `recover` replays the
    decision from the record (no decision means abort) and drives both
    ledgers to the same terminal, so no fault position can strand exactly
    one committed leg.
    """

    def __init__(self, engine_a: Engine, engine_b: Engine):
        self.engines = {"a": engine_a, "b": engine_b}
        self.decision_record: dict[str, str] = {}

    def _engine_for(self, swap: SwapState, key: str) -> Engine:
        return self.engines[key]

    def _leg(self, swap: SwapState, key: str) -> TransferRequest:
        return swap.legs[0 if key == "a" else 1].request

    def _locked(self, engine: Engine, swap_id: str) -> bool:
        prepared = terminal = False
        for event in engine.log:
            if event.payload.get("swap_id") != swap_id:
                continue
            if event.kind is EventKind.SWAP_PREPARED:
                prepared = True
            elif event.kind in (EventKind.SWAP_COMMITTED, EventKind.SWAP_ABORTED):
                terminal = True
        return prepared and not terminal

    def _terminal(self, engine: Engine, swap_id: str) -> str | None:
        for event in engine.log:
            if event.payload.get("swap_id") != swap_id:
                continue
            if event.kind is EventKind.SWAP_COMMITTED:
                return SwapPhase.COMMITTED
            if event.kind is EventKind.SWAP_ABORTED:
                return SwapPhase.ABORTED
        return None

    def _prepare(self, swap: SwapState, key: str, at: int) -> bool:
        engine = self._engine_for(swap, key)
        req = self._leg(swap, key)
        verdict = check_transfer(req, engine)
        if not verdict.approved:
            return False
        token = engine.require_token(req.token_id)
        try:
            minor = normalize_to_token_scale(req.amount, token.decimals)
        except PrecisionLoss:
            return False
        engine._seal(EventKind.SWAP_PREPARED, {
            "swap_id": swap.swap_id,
            "token": req.token_id,
            "account": req.sender,
            "amount": minor,
            "receiver": req.receiver,
        }, at)
        return True

    def _seal_terminal(self, swap: SwapState, key: str, decision: str, at: int) -> None:
        engine = self._engine_for(swap, key)
        if self._terminal(engine, swap.swap_id) is not None:
            return
        req = self._leg(swap, key)
        token = engine.require_token(req.token_id)
        minor = normalize_to_token_scale(req.amount, token.decimals)
        if decision == "commit":
            engine._seal(EventKind.SWAP_COMMITTED, {
                "swap_id": swap.swap_id,
                "token": req.token_id,
                "sender": req.sender,
                "receiver": req.receiver,
                "amount": minor,
            }, at)
        else:
            locked = self._locked(engine, swap.swap_id)
            engine._seal(EventKind.SWAP_ABORTED, {
                "swap_id": swap.swap_id,
                "token": req.token_id,
                "account": req.sender,
                "amount": minor if locked else 0,
            }, at)

    def run(self, swap: SwapState, at: int, fault: str | None = None) -> SwapState:
        """Drive the protocol; on a fault, halt and then recover."""
        try:
            self._run_steps(swap, at, fault)
        except _CoordinatorHalt:
            swap.fault = fault
            self.recover(swap, at + 1)
        return swap

    def _halt_if(self, fault: str | None, point: str) -> None:
        if fault == point:
            raise _CoordinatorHalt(point)

    def _run_steps(self, swap: SwapState, at: int, fault: str | None) -> None:
        self._halt_if(fault, "before-prepare-a")
        ok_a = self._prepare(swap, "a", at)
        self._halt_if(fault, "after-prepare-a")
        self._halt_if(fault, "before-prepare-b")
        ok_b = self._prepare(swap, "b", at) if ok_a else False
        if ok_a:
            self._halt_if(fault, "after-prepare-b")
        self._halt_if(fault, "before-decision")
        decision = "commit" if (ok_a and ok_b) else "abort"
        self.decision_record[swap.swap_id] = decision
        swap.decision = decision
        swap.phase = SwapPhase.PREPARED if (ok_a and ok_b) else SwapPhase.INIT
        self._halt_if(fault, "before-terminal-a")
        self._seal_terminal(swap, "a", decision, at + 1)
        self._halt_if(fault, "before-terminal-b")
        self._seal_terminal(swap, "b", decision, at + 1)
        swap.phase = SwapPhase.COMMITTED if decision == "commit" else SwapPhase.ABORTED

    def recover(self, swap: SwapState, at: int) -> SwapState:
        """Replay the decision from the durable record; absent means abort."""
        decision = self.decision_record.get(swap.swap_id, "abort")
        swap.decision = decision
        self._seal_terminal(swap, "a", decision, at)
        self._seal_terminal(swap, "b", decision, at)
        swap.phase = SwapPhase.COMMITTED if decision == "commit" else SwapPhase.ABORTED
        return swap


def atomic_swap(engine_a: Engine, engine_b: Engine, leg_a: TransferRequest,
                leg_b: TransferRequest, fault_schedule: str | int | None = None,
                at: int | None = None, swap_id: str = "swap-1") -> SwapState:
    fault: str | None
    if isinstance(fault_schedule, int):
        fault = SWAP_FAULT_POINTS[fault_schedule]
    else:
        fault = fault_schedule
    if fault is not None and fault not in SWAP_FAULT_POINTS:
        raise ConfigError(f"unknown fault point {fault!r}")
    when = at if at is not None else max(engine_a.clock, engine_b.clock) + 1
    coordinator = SwapCoordinator(engine_a, engine_b)
    swap = SwapState(swap_id=swap_id, legs=(
        SwapLeg(engine_a.config.engine_id, leg_a),
        SwapLeg(engine_b.config.engine_id, leg_b),
    ))
    return coordinator.run(swap, when, fault)


def swap_terminal(engine: Engine, swap_id: str) -> str | None:
    for event in engine.log:
        if event.payload.get("swap_id") != swap_id:
            continue
        if event.kind is EventKind.SWAP_COMMITTED:
            return SwapPhase.COMMITTED
        if event.kind is EventKind.SWAP_ABORTED:
            return SwapPhase.ABORTED
    return None


TRADFI_BOND = "t-bond"
DEFI_CASH = "d-cash"


def _interop_engines(config: ScenarioConfig, run: _Run) -> tuple[Engine, Engine, dict]:
    roster = config.actors
    params = config.interop
    accounts = {
        "tf_issuer": "tf-issuer", "tf_desk": "tf-desk", "tf_nominee": "tf-nominee",
        "df_issuer": "df-issuer", "df_desk": "df-desk", "df_nominee": "df-nominee",
        "bridge": "oraclizer-1",
    }
    tradfi = Engine(EngineConfig(engine_id="tradfi", recovery_accounts=(roster.recovery,)))
    defi = Engine(EngineConfig(engine_id="defi", recovery_accounts=(roster.recovery,)))

    from .identity import KycStatus

    for engine, members in (
            (tradfi, (("tf-issuer", (PartyRole.ISSUER,)),
                      ("tf-desk", (PartyRole.INVESTOR,)),
                      ("tf-nominee", (PartyRole.BROKER,)),
                      (accounts["bridge"], (PartyRole.RELAYER, PartyRole.OPERATOR)),
                      (roster.regulator, (PartyRole.REGULATOR,)),
                      (roster.auditor, (PartyRole.AUDITOR,)))),
            (defi, (("df-issuer", (PartyRole.ISSUER,)),
                    ("df-desk", (PartyRole.INVESTOR,)),
                    ("df-nominee", (PartyRole.BROKER,)),
                    (accounts["bridge"], (PartyRole.RELAYER, PartyRole.OPERATOR)),
                    (roster.regulator, (PartyRole.REGULATOR,)),
                    (roster.auditor, (PartyRole.AUDITOR,))))):
        for account, roles in members:
            engine.register_identity(account, _digest_for(account), roles, at=run.tick())
        for account, _ in members:
            engine.set_kyc_status(account, KycStatus.VERIFIED, roster.regulator,
                                  at=run.tick())

    bond_doc = _doc_anchor("tf-bond-terms", "tradfi bond terms", notary=None)
    bond_class = AssetClassDescriptor(
        fungibility=Fungibility.FUNGIBLE, subdivisible=False, decimals=0,
        transferable=True, compliant=True)
    tradfi.define_token(TokenDefinition(
        token_id=TRADFI_BOND, asset_class=bond_class, issuer="tf-issuer",
        supply_cap=Amount(1_000, 0)), "tf-issuer", anchors=[bond_doc], at=run.tick())
    tradfi.mint(TRADFI_BOND, "tf-desk", Amount(100, 0), "tf-issuer", at=run.tick())

    cash_doc = _doc_anchor("df-cash-terms", "stable cash terms", notary=None)
    cash_class = AssetClassDescriptor(
        fungibility=Fungibility.FUNGIBLE, subdivisible=True, decimals=2,
        transferable=True, compliant=True)
    defi.define_token(TokenDefinition(
        token_id=DEFI_CASH, asset_class=cash_class, issuer="df-issuer"),
        "df-issuer", anchors=[cash_doc], at=run.tick())
    defi.mint(DEFI_CASH, "df-desk", quantize("100000.00", 2), "df-issuer", at=run.tick())

    if params.blacklist_leg_receiver:
        defi.blacklist_add("df-nominee", roster.regulator, reason="screening hit",
                           at=run.tick())
    return tradfi, defi, accounts


def run_interop_scenario(config: ScenarioConfig) -> tuple[ScenarioTranscript, Engine, Engine]:
    params = config.interop
    run = _Run("interop")

    run.note("Check Regulatory Compliance Requirements", "tf-issuer",
             "review obligations with regulator", "")
    tradfi, defi, accounts = _interop_engines(config, run)
    run.note("Bond Information Modeling", "tf-issuer", "model bond terms",
             tradfi.token_state(TRADFI_BOND).asset_class.render())
    run.note("Apply Compliance Protocol", "tf-issuer", "bind controls to bond token",
             ",".join(sorted(p for p in tradfi.policies)))
    run.note("Verify Customer Identity and Regulatory Compliance", accounts["bridge"],
             "screen desks",
             f"tf-desk:{tradfi.screen('tf-desk').value};df-desk:{defi.screen('df-desk').value}")
    run.note("Issue Token", "tf-issuer", "bond supply on ledger",
             str(tradfi.token_state(TRADFI_BOND).minted))
    run.note("Interoperability and Atomic Processing", accounts["bridge"],
             "bridge session open", "")

    run.note("Request Tokenized Bonds", "df-desk", "ask bridge for bond units",
             str(params.bond_units))
    run.note("Offer Trading of Tokenized Bonds", accounts["bridge"],
             "quote bond units against cash", params.cash_amount)
    run.note("Request Trade", "df-desk", "accept quote", "")

    leg_a = TransferRequest(
        token_id=TRADFI_BOND, sender="tf-desk", receiver="tf-nominee",
        amount=Amount(params.bond_units, 0), at=run.tick() + 1)
    leg_b = TransferRequest(
        token_id=DEFI_CASH, sender="df-desk", receiver="df-nominee",
        amount=quantize(params.cash_amount, 2), at=leg_a.at)
    run.note("Verify Regulatory Compliance (KYC/AML)", accounts["bridge"],
             "pipeline check both legs", "")
    swap = atomic_swap(tradfi, defi, leg_a, leg_b,
                       fault_schedule=params.fault_step, at=leg_a.at)
    run.advance_to(max(tradfi.clock, defi.clock))
    run.note("Execute Contract", accounts["bridge"],
             f"two-phase settlement decision={swap.decision}",
             swap.fault or "no-fault")
    term_a = swap_terminal(tradfi, swap.swap_id) or "none"
    term_b = swap_terminal(defi, swap.swap_id) or "none"
    run.note("Complete Trade and Transfer Tokens", accounts["bridge"],
             "terminal states", f"tradfi={term_a};defi={term_b}")
    run.note("Report Trade Record", accounts["bridge"], "notify regulator",
             swap.phase)

    run.note("Final Verification of Trade Compliance", config.actors.regulator,
             "confirm symmetric terminals", "ok" if term_a == term_b else "MISMATCH")
    cons_a = _conserved(tradfi, TRADFI_BOND)
    cons_b = _conserved(defi, DEFI_CASH)
    run.note("Asset Distribution and Clearing Processing", accounts["bridge"],
             "conservation check", f"tradfi={cons_a};defi={cons_b}")
    chain_a = tradfi.log.verify_chain().ok
    chain_b = defi.log.verify_chain().ok
    run.note("Report Trade and Clearing Record", config.actors.auditor,
             "chain verification", f"tradfi={chain_a};defi={chain_b}")

    combined = sha256_hex((tradfi.state_digest() + defi.state_digest()).encode())
    return run.finish(combined), tradfi, defi


def _conserved(engine: Engine, token_id: str) -> bool:
    token = engine.token_state(token_id)
    held_free = sum(h.free for (tid, _), h in engine.holdings.items() if tid == token_id)
    held_frozen = sum(h.frozen for (tid, _), h in engine.holdings.items() if tid == token_id)
    return token.minted == held_free + held_frozen + token.burned


SCENARIOS = {
    "bond": lambda config: run_bond_scenario(config)[0],
    "carbon": lambda config: run_carbon_scenario(config)[0],
    "interop": lambda config: run_interop_scenario(config)[0],
}
