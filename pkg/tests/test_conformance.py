"""Scorecard data and scoring rule, cross-checked against the published table."""

import random

import pytest

from rcp_ledger.catalog import ALL_ITEM_IDS, ControlGroup, ITEMS
from rcp_ledger.conformance import (
    ENFORCEMENT_POINTS,
    InstitutionColumn,
    ProtocolManifest,
    UnknownItem,
    builtin_manifests,
    builtin_matrix,
    derive_manifest_from_engine,
    items_by_group,
    manifest_from_mapping,
    render_report,
    reported_totals_match,
    reproduce_scorecard,
    score,
)
from rcp_ledger.conformance_data import (
    PROTOCOL_ITEMS,
    REPORTED_CELLS,
    REPORTED_TOTALS,
)


def column(name: str) -> InstitutionColumn:
    return next(c for c in builtin_matrix() if c.institution == name)


def manifest(name: str) -> ProtocolManifest:
    return next(m for m in builtin_manifests() if m.protocol == name)


class TestCatalog:
    def test_exactly_31_items(self):
        assert len(ITEMS) == 31
        assert ALL_ITEM_IDS == frozenset(range(1, 32))

    def test_group_partitioning(self):
        grouped = items_by_group()
        assert grouped[ControlGroup.TRACEABILITY] == [1, 2, 3, 4, 5, 6]
        assert grouped[ControlGroup.ENFORCEABILITY] == [7, 8, 9, 10, 11, 12, 13, 14, 15, 16]
        assert grouped[ControlGroup.CONFIDENTIALITY] == [17, 18, 19]
        assert grouped[ControlGroup.FINALITY] == [20, 21, 22]
        assert grouped[ControlGroup.TOKENIZABILITY] == [23, 24, 25, 26, 27, 28, 29, 30, 31]


class TestMatrix:
    def test_wb_column(self):
        wb = column("WB")
        assert wb.items == frozenset({1, 17, 18})
        assert wb.size == 3

    def test_fatf_column_size(self):
        assert column("FATF").size == 14

    def test_sizes_sum_to_117(self):
        assert sum(c.size for c in builtin_matrix()) == 117


class TestManifests:
    def test_erc20_items(self):
        assert manifest("ERC-20").items == frozenset({20, 21, 25, 28, 31})

    def test_cardinalities(self):
        sizes = {m.protocol: m.size for m in builtin_manifests()}
        assert sizes == {"ERC-20": 5, "ERC-1400": 16, "ERC-3643": 15, "NEW-EIP": 25}

    def test_new_eip_complement(self):
        missing = ALL_ITEM_IDS - manifest("NEW-EIP").items
        assert missing == frozenset({2, 5, 6, 17, 18, 19})

    def test_unknown_item_rejected(self):
        with pytest.raises(UnknownItem):
            ProtocolManifest("junk", frozenset({0, 99}))
        with pytest.raises(UnknownItem):
            manifest_from_mapping({"protocol": "x", "items": [1, 32]})


class TestScoring:
    def test_anchor_cells_recompute_exactly(self):
        matrix = builtin_matrix()
        by = {m.protocol: {r.institution: (r.numerator, r.denominator)
                           for r in score(m, matrix).rows}
              for m in builtin_manifests()}
        assert by["ERC-20"]["BIS"] == (3, 7)
        assert by["ERC-1400"]["ESMA"] == (3, 6)
        assert by["ERC-3643"]["ESMA"] == (2, 6)
        assert by["NEW-EIP"]["FATF"] == (11, 14)
        assert by["NEW-EIP"]["FINRA"] == (11, 14)

    def test_double_counting_identity_oracle(self):
        # total numerator == sum over manifest items of how many institutions
        # recommend that item (computed without intersections)
        matrix = builtin_matrix()
        for m in builtin_manifests():
            table = score(m, matrix)
            oracle = sum(
                sum(1 for c in matrix if item in c.items) for item in m.items)
            assert table.total[0] == oracle

    def test_empty_manifest(self):
        table = score(ProtocolManifest("empty", frozenset()), builtin_matrix())
        assert table.total == (0, 117)
        assert all(r.numerator == 0 for r in table.rows)

    def test_full_manifest(self):
        table = score(ProtocolManifest("full", ALL_ITEM_IDS), builtin_matrix())
        assert table.total == (117, 117)
        assert all(r.numerator == r.denominator for r in table.rows)

    def test_monotonicity(self):
        rng = random.Random(5)
        matrix = builtin_matrix()
        for _ in range(50):
            items = frozenset(rng.sample(sorted(ALL_ITEM_IDS), rng.randint(0, 30)))
            extra = rng.choice(sorted(ALL_ITEM_IDS - items)) if items != ALL_ITEM_IDS else None
            base = score(ProtocolManifest("x", items), matrix)
            if extra is None:
                continue
            grown = score(ProtocolManifest("x", items | {extra}), matrix)
            for row_a, row_b in zip(base.rows, grown.rows):
                assert row_b.numerator >= row_a.numerator


class TestReproduction:
    def test_totals_match_published(self):
        tables, _ = reproduce_scorecard()
        totals = {t.protocol: t.total for t in tables}
        assert totals == {
            "ERC-20": (15, 117),
            "ERC-1400": (58, 117),
            "ERC-3643": (60, 117),
            "NEW-EIP": (77, 117),
        }
        assert reported_totals_match(tables)

    def test_at_least_55_of_60_cells_recompute(self):
        _, errata = reproduce_scorecard()
        assert len(errata) <= 5
        assert 60 - len(errata) >= 55

    def test_the_single_known_erratum(self):
        _, errata = reproduce_scorecard()
        assert len(errata) == 1
        e = errata[0]
        assert (e.protocol, e.institution, e.recomputed, e.reported) == \
            ("ERC-20", "HKMA", 2, 0)

    def test_published_totals_equal_sum_of_published_cells(self):
        for index, protocol in enumerate(("ERC-20", "ERC-1400", "ERC-3643", "NEW-EIP")):
            total = sum(cells[index] for cells in REPORTED_CELLS.values())
            assert total == REPORTED_TOTALS[protocol]

    def test_render_is_deterministic_and_ordered(self):
        tables, errata = reproduce_scorecard()
        text_a = render_report(tables, errata)
        text_b = render_report(tables, errata)
        assert text_a == text_b
        header = text_a.splitlines()[0].split()
        assert header[1:] == ["ERC-20", "ERC-1400", "ERC-3643", "NEW-EIP"]
        assert "Total" in text_a
        assert "15/117" in text_a and "77/117" in text_a
        assert "ICMA" in text_a  # the published row label for the FSB column
        assert "erratum" in text_a


class TestEngineManifest:
    def test_covers_new_eip_and_the_dlt_items(self):
        own = derive_manifest_from_engine()
        assert own.items >= PROTOCOL_ITEMS["NEW-EIP"]
        assert {2, 5, 6} <= own.items

    def test_visibility_simulated_annotations(self):
        own = derive_manifest_from_engine()
        assert set(own.annotations) == {17, 18, 19}
        assert all(v == "visibility-simulated" for v in own.annotations.values())

    def test_every_item_has_an_enforcement_point(self):
        assert set(ENFORCEMENT_POINTS) == set(range(1, 32))


class TestRenderEdgeCases:
    def test_single_empty_manifest_renders_all_zero_column(self):
        table = score(ProtocolManifest("empty", frozenset()), builtin_matrix())
        text = render_report([table])
        lines = text.splitlines()
        assert lines[0].split() == ["Institution", "empty"]
        body = [line.split()[-1] for line in lines[2:-1]]
        assert all(cell.startswith("0/") for cell in body)
        assert lines[-1].split() == ["Total", "0/117"]
