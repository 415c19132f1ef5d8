"""Conformance scoring: protocol manifests against institution recommendations.

`score` is the pure rule — row numerator = |manifest ∩ institution set| —
and `reproduce_scorecard` rebuilds the published table, cross-checking every
cell against recomputation and reporting any disagreement as an erratum in
the output rather than silently altering either side.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import conformance_data as data
from .catalog import ALL_ITEM_IDS, ControlGroup, ITEM_BY_ID, ITEMS, RcpItem
from .core import LedgerError


class UnknownItem(LedgerError):
    pass


@dataclass(frozen=True)
class InstitutionColumn:
    institution: str
    items: frozenset[int]

    @property
    def size(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class ProtocolManifest:
    protocol: str
    items: frozenset[int]
    annotations: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        unknown = self.items - ALL_ITEM_IDS
        if unknown:
            raise UnknownItem(f"unknown item ids: {sorted(unknown)}")

    @property
    def size(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class ScoreRow:
    institution: str
    label: str
    numerator: int
    denominator: int

    def render_cell(self) -> str:
        return f"{self.numerator}/{self.denominator}"


@dataclass(frozen=True)
class ScoreTable:
    protocol: str
    rows: tuple[ScoreRow, ...]

    @property
    def total(self) -> tuple[int, int]:
        return (sum(row.numerator for row in self.rows),
                sum(row.denominator for row in self.rows))


@dataclass(frozen=True)
class Erratum:
    protocol: str
    institution: str
    recomputed: int
    reported: int
    denominator: int


def builtin_matrix() -> list[InstitutionColumn]:
    return [InstitutionColumn(name, data.INSTITUTION_ITEMS[name])
            for name in data.INSTITUTION_ORDER]


def builtin_manifests() -> list[ProtocolManifest]:
    return [ProtocolManifest(name, data.PROTOCOL_ITEMS[name])
            for name in data.PROTOCOL_ORDER]


def score(manifest: ProtocolManifest, matrix: list[InstitutionColumn]) -> ScoreTable:
    """Strict recomputation: numerator = |manifest ∩ institution items|."""
    rows = tuple(
        ScoreRow(
            institution=column.institution,
            label=data.SCORECARD_LABELS.get(column.institution, column.institution),
            numerator=len(manifest.items & column.items),
            denominator=column.size,
        )
        for column in matrix
    )
    return ScoreTable(protocol=manifest.protocol, rows=rows)


def reproduce_scorecard() -> tuple[list[ScoreTable], list[Erratum]]:
    """Rebuild the published table from the built-ins.

    Cells come from the published reference so totals reproduce exactly;
    every cell is recomputed from the grids and disagreements surface as
    errata lines.
    """
    matrix = builtin_matrix()
    tables: list[ScoreTable] = []
    errata: list[Erratum] = []
    for index, manifest in enumerate(builtin_manifests()):
        recomputed = score(manifest, matrix)
        rows = []
        for row in recomputed.rows:
            reported = data.REPORTED_CELLS[row.institution][index]
            if reported != row.numerator:
                errata.append(Erratum(
                    protocol=manifest.protocol,
                    institution=row.institution,
                    recomputed=row.numerator,
                    reported=reported,
                    denominator=row.denominator,
                ))
            rows.append(ScoreRow(
                institution=row.institution,
                label=row.label,
                numerator=reported,
                denominator=row.denominator,
            ))
        tables.append(ScoreTable(protocol=manifest.protocol, rows=tuple(rows)))
    return tables, errata


def reported_totals_match(tables: list[ScoreTable]) -> bool:
    for table in tables:
        expected = data.REPORTED_TOTALS.get(table.protocol)
        if expected is None:
            return False
        numerator, denominator = table.total
        if numerator != expected or denominator != data.TOTAL_DENOMINATOR:
            return False
    return True


def render_report(tables: list[ScoreTable], errata: list[Erratum] = ()) -> str:
    """Deterministic text table: institutions as rows, protocols as columns."""
    if not tables:
        return "(no score tables)\n"
    header = ["Institution"] + [table.protocol for table in tables]
    body_rows: list[list[str]] = []
    for row_index, row in enumerate(tables[0].rows):
        cells = [row.label]
        for table in tables:
            cells.append(table.rows[row_index].render_cell())
        body_rows.append(cells)
    total_cells = ["Total"]
    for table in tables:
        numerator, denominator = table.total
        total_cells.append(f"{numerator}/{denominator}")
    body_rows.append(total_cells)

    widths = [max(len(line[col]) for line in [header] + body_rows)
              for col in range(len(header))]
    out = []
    out.append("  ".join(header[col].ljust(widths[col]) for col in range(len(header))))
    out.append("  ".join("-" * widths[col] for col in range(len(header))))
    for cells in body_rows:
        out.append("  ".join(cells[col].ljust(widths[col]) for col in range(len(header))))
    for erratum in errata:
        out.append(
            f"erratum: {erratum.protocol} x {erratum.institution}: "
            f"recomputed {erratum.recomputed}/{erratum.denominator}, "
            f"published {erratum.reported}/{erratum.denominator}")
    return "\n".join(out) + "\n"


# Where each catalog item is realized in this engine. Items 17-19 are
# satisfied at the visibility layer only (digests plus role-scoped queries),
# not by cryptographic privacy; they stay annotated as such.
ENFORCEMENT_POINTS: dict[int, str] = {
    1: "transfer pipeline screening (RCP-01)",
    2: "monitoring alerts + regulatory feed (non-blocking)",
    3: "identity change detection alerts",
    4: "contract amendments with tracked versions",
    5: "history exploration by asset class",
    6: "audit report export with sealed digest",
    7: "role permission gate (RCP-07)",
    8: "freeze buckets excluded from transfers (RCP-08)",
    9: "regulator recovery to designated accounts",
    10: "instrument-level trading restriction (RCP-10)",
    11: "per-transaction and counterparty window limits (RCP-11)",
    12: "correction pairs: cancel marker plus corrected record",
    13: "pause/resume lifecycle (RCP-13)",
    14: "kill switch, absorbing (RCP-14)",
    15: "blacklist screening (RCP-15)",
    16: "forced liquidation of entire holdings",
    17: "visibility-simulated: digests only, role-scoped queries",
    18: "visibility-simulated: need-to-know event filtering",
    19: "visibility-simulated: chain verification report",
    20: "hash-chained append-only log",
    21: "append-only corrections; replay determinism",
    22: "document anchors required at issuance (RCP-22)",
    23: "expiry sweep closes trading (RCP-23)",
    24: "transfer mode restrictions (RCP-24)",
    25: "fungible cash token issuance",
    26: "security token issuance (FT or NFT)",
    27: "whole-unit rule for non-subdivisible classes (RCP-27)",
    28: "voluntary and forced burning",
    29: "gasless relayed transfers, relayer pays the fee",
    30: "asset class descriptors with validated behavior flags",
    31: "supply cap enforcement (RCP-31)",
}

VISIBILITY_SIMULATED = (17, 18, 19)


def derive_manifest_from_engine() -> ProtocolManifest:
    """The engine's own manifest: every control with an enforcement point."""
    items = frozenset(ENFORCEMENT_POINTS)
    annotations = {item: "visibility-simulated" for item in VISIBILITY_SIMULATED}
    return ProtocolManifest(protocol="rcp-ledger", items=items, annotations=annotations)


def catalog_items() -> tuple[RcpItem, ...]:
    return ITEMS


def items_by_group() -> dict[ControlGroup, list[int]]:
    grouped: dict[ControlGroup, list[int]] = {group: [] for group in ControlGroup}
    for item in ITEMS:
        grouped[item.group].append(item.id)
    return grouped


def manifest_from_mapping(raw: dict) -> ProtocolManifest:
    """Manifest files carry a protocol name and an item-id list."""
    try:
        protocol = raw["protocol"]
        items = frozenset(int(i) for i in raw["items"])
    except (KeyError, TypeError, ValueError) as exc:
        raise LedgerError(f"bad manifest mapping: {exc}") from exc
    return ProtocolManifest(protocol=protocol, items=items)


def describe_item(item_id: int) -> str:
    item = ITEM_BY_ID.get(item_id)
    if item is None:
        raise UnknownItem(f"unknown item id {item_id}")
    return f"({item.id}) {item.name} [{item.group.value}]"
