"""Shared fixtures: engines with a registered cast and a defined token."""

from __future__ import annotations

import hashlib

import pytest

from rcp_ledger.core import (
    Amount,
    AssetClassDescriptor,
    Fungibility,
    PartyRole,
    TokenDefinition,
)
from rcp_ledger.engine import Engine, EngineConfig
from rcp_ledger.events import DocumentAnchor
from rcp_ledger.identity import KycStatus

OPERATOR = "ops-1"
REGULATOR = "reg-1"
AUDITOR = "aud-1"
ISSUER = "issuer-1"
ALICE = "alice"
BOB = "bob"
CAROL = "carol"
RELAYER = "relay-1"
VAULT = "vault-1"
COLLECTOR = "fees-1"

ASSET = "asset"
FEE_TOKEN = "fee-coin"


def digest_of(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def anchor(doc_id: str = "prospectus") -> DocumentAnchor:
    return DocumentAnchor(doc_id=doc_id, digest=digest_of(doc_id), uri=f"docs/{doc_id}")


def register_verified(engine: Engine, account: str, roles, at=None) -> None:
    engine.register_identity(account, digest_of(f"profile:{account}"), roles, at=at)
    engine.set_kyc_status(account, KycStatus.VERIFIED, OPERATOR, at=at)


def make_engine(profile: str = "default", fee_token: str | None = None) -> Engine:
    engine = Engine(EngineConfig(
        engine_id="test",
        profile=profile,
        recovery_accounts=(VAULT,),
        fee_token=fee_token,
        fee_collector=COLLECTOR if fee_token else None,
    ))
    engine.register_identity(OPERATOR, digest_of("profile:ops"), [PartyRole.OPERATOR], at=0)
    engine.set_kyc_status(OPERATOR, KycStatus.VERIFIED, OPERATOR, at=0)
    for account, roles in (
            (REGULATOR, [PartyRole.REGULATOR]),
            (AUDITOR, [PartyRole.AUDITOR]),
            (ISSUER, [PartyRole.ISSUER]),
            (ALICE, [PartyRole.INVESTOR]),
            (BOB, [PartyRole.INVESTOR]),
            (CAROL, [PartyRole.INVESTOR]),
            (RELAYER, [PartyRole.RELAYER]),
            (VAULT, [PartyRole.OPERATOR]),
            (COLLECTOR, [PartyRole.OPERATOR]),
    ):
        register_verified(engine, account, roles, at=0)
    return engine


def define_asset(engine: Engine, token_id: str = ASSET, decimals: int = 2,
                 subdivisible: bool = True, compliant: bool = True,
                 fungibility: Fungibility = Fungibility.FUNGIBLE,
                 cap: Amount | None = None, expiry: int | None = None,
                 tags: frozenset[str] = frozenset(), at: int | None = None,
                 policy_overrides: dict | None = None) -> None:
    descriptor = AssetClassDescriptor(
        fungibility=fungibility, subdivisible=subdivisible, decimals=decimals,
        transferable=True, compliant=compliant,
        expirable=expiry is not None, behavior_tags=tags)
    engine.define_token(
        TokenDefinition(token_id=token_id, asset_class=descriptor, issuer=ISSUER,
                        supply_cap=cap, expiry=expiry),
        ISSUER, anchors=[anchor()], policy_overrides=policy_overrides, at=at)


@pytest.fixture
def engine() -> Engine:
    """Registered cast plus a compliant, subdivisible 2-decimal token."""
    engine = make_engine()
    define_asset(engine, at=0)
    engine.mint(ASSET, ALICE, Amount(100_000_00, 2), ISSUER, at=0)
    engine.mint(ASSET, BOB, Amount(100_000_00, 2), ISSUER, at=0)
    return engine
