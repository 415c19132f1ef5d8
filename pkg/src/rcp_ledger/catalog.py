"""The 31-item regulatory control catalog.

Item ids, legend names and group partitioning are shared by the reason-code
vocabulary (enforcement side) and the conformance scorecard (reporting side).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class ControlGroup(str, Enum):
    TRACEABILITY = "Traceability"
    CONFIDENTIALITY = "Confidentiality"
    ENFORCEABILITY = "Enforceability"
    FINALITY = "Finality"
    TOKENIZABILITY = "Tokenizability"


@dataclass(frozen=True)
class RcpItem:
    id: int
    name: str
    group: ControlGroup


_T = ControlGroup.TRACEABILITY
_C = ControlGroup.CONFIDENTIALITY
_E = ControlGroup.ENFORCEABILITY
_F = ControlGroup.FINALITY
_Z = ControlGroup.TOKENIZABILITY

ITEMS: tuple[RcpItem, ...] = (
    RcpItem(1, "Customer Identity Verification", _T),
    RcpItem(2, "High-Risk/Suspicious Transaction Monitoring", _T),
    RcpItem(3, "Detection of Changes to Customer Identity Information", _T),
    RcpItem(4, "Contract Version Tracking", _T),
    RcpItem(5, "Exploration of Transaction History by Asset Type", _T),
    RcpItem(6, "External Audit", _T),
    RcpItem(7, "Setting Role-Based Permissions", _E),
    RcpItem(8, "Asset Freeze", _E),
    RcpItem(9, "Asset Recovery", _E),
    RcpItem(10, "Trading Restrictions", _E),
    RcpItem(11, "Transaction Limit", _E),
    RcpItem(12, "Cancellation or Modification of Transactions", _E),
    RcpItem(13, "Pausing of Trading", _E),
    RcpItem(14, "Suspension or Disposal of Smart Contract (kill switch)", _E),
    RcpItem(15, "Blacklist Management", _E),
    RcpItem(16, "Forced Liquidation", _E),
    RcpItem(17, "Privacy of Personal Information", _C),
    RcpItem(18, "Privacy of Financial Transactions", _C),
    RcpItem(19, "Code Security", _C),
    RcpItem(20, "Immutability of the Ledger", _F),
    RcpItem(21, "Finality of Transactions and Payments", _F),
    RcpItem(22, "Attaching Legal Documents", _F),
    RcpItem(23, "Token Expired Time", _Z),
    RcpItem(24, "Token Transfer Restrictions", _Z),
    RcpItem(25, "Issuance of Tokenized Cash", _Z),
    RcpItem(26, "Issuance of Tokenized Securities", _Z),
    RcpItem(27, "Controlling Transactions Involving Splitting Below Decimal Units", _Z),
    RcpItem(28, "Token Burning", _Z),
    RcpItem(29, "Gasless Support", _Z),
    RcpItem(30, "Asset Class Management", _Z),
    RcpItem(31, "Token Supply Control", _Z),
)

ITEM_BY_ID: dict[int, RcpItem] = {item.id: item for item in ITEMS}

ALL_ITEM_IDS: frozenset[int] = frozenset(ITEM_BY_ID)

assert len(ITEMS) == 31
