"""Compliance-enforcing ledger engine for tokenized assets.

A deterministic, event-sourced state machine that turns a 31-item catalog of
regulatory controls into enforcement points with stable reason codes, plus a
conformance scorecard, scenario replays, an HTTP service and a CLI.
"""

from .core import (
    Amount,
    AssetClassDescriptor,
    Fungibility,
    LedgerError,
    Lifecycle,
    PartyRole,
    TokenDefinition,
    quantize,
)
from .engine import Engine, EngineConfig, MetaTransferAuthorization
from .events import DocumentAnchor, EventKind, LedgerEvent
from .policy import (
    ComplianceVerdict,
    PolicySet,
    ReasonCode,
    TransferMode,
    TransferModeKind,
    TransferRequest,
)

__version__ = "0.1.0"

__all__ = [
    "Amount",
    "AssetClassDescriptor",
    "ComplianceVerdict",
    "DocumentAnchor",
    "Engine",
    "EngineConfig",
    "EventKind",
    "Fungibility",
    "LedgerError",
    "LedgerEvent",
    "Lifecycle",
    "MetaTransferAuthorization",
    "PartyRole",
    "PolicySet",
    "ReasonCode",
    "TokenDefinition",
    "TransferMode",
    "TransferModeKind",
    "TransferRequest",
    "quantize",
]
