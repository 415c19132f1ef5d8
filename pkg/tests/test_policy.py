"""Verdict pipeline: ordering, completeness, thresholds, limits, patterns."""

import pytest
from hypothesis import given, settings, strategies as st

from rcp_ledger.core import Amount
from rcp_ledger.identity import KycStatus, RiskRating
from rcp_ledger.policy import (
    AlertKind,
    PROFILES,
    ReasonCode,
    TransferMode,
    TransferModeKind,
    TransferRequest,
    UnknownToken,
    check_permission,
    check_transfer,
    evaluate_window_limit,
    raise_pattern_alert,
)

from conftest import (
    ALICE,
    ASSET,
    BOB,
    CAROL,
    ISSUER,
    OPERATOR,
    REGULATOR,
    define_asset,
    make_engine,
)


def req(engine, amount_minor, decimals=2, sender=ALICE, receiver=BOB, wire=False, at=None):
    return TransferRequest(token_id=ASSET, sender=sender, receiver=receiver,
                           amount=Amount(amount_minor, decimals), wire=wire,
                           at=at if at is not None else engine.clock)


class TestHappyPath:
    def test_verified_to_verified_approved_no_alerts(self, engine):
        verdict = check_transfer(req(engine, 100_00), engine)
        assert verdict.approved
        assert verdict.alerts == ()

    def test_unknown_token_is_an_error(self, engine):
        request = TransferRequest(token_id="ghost", sender=ALICE, receiver=BOB,
                                  amount=Amount(1, 0), at=0)
        with pytest.raises(UnknownToken):
            check_transfer(request, engine)


class TestMonitoringThresholds:
    def test_occasional_threshold_is_strictly_above(self, engine):
        engine.mint(ASSET, ALICE, Amount(10_000_000_00, 2), ISSUER, at=0)
        at_limit = check_transfer(req(engine, 15_000_00), engine)
        assert at_limit.approved and at_limit.alerts == ()
        above = check_transfer(req(engine, 15_000_01), engine)
        assert above.approved
        assert [a.kind for a in above.alerts] == [AlertKind.THRESHOLD_OCCASIONAL]
        well_above = check_transfer(req(engine, 16_000_00), engine)
        assert [a.kind for a in well_above.alerts] == [AlertKind.THRESHOLD_OCCASIONAL]

    def test_wire_threshold_only_on_wire_legs(self, engine):
        verdict = check_transfer(req(engine, 1_500_00, wire=True), engine)
        assert verdict.approved
        assert [a.kind for a in verdict.alerts] == [AlertKind.THRESHOLD_WIRE]
        no_wire = check_transfer(req(engine, 1_500_00, wire=False), engine)
        assert no_wire.alerts == ()

    def test_wire_boundary(self, engine):
        at_limit = check_transfer(req(engine, 1_000_00, wire=True), engine)
        assert at_limit.alerts == ()
        above = check_transfer(req(engine, 1_000_01, wire=True), engine)
        assert [a.kind for a in above.alerts] == [AlertKind.THRESHOLD_WIRE]

    def test_alerts_never_change_decisions(self, engine):
        engine.mint(ASSET, ALICE, Amount(10_000_000_00, 2), ISSUER, at=0)
        verdict = check_transfer(req(engine, 16_000_00), engine)
        assert verdict.approved and verdict.alerts

    def test_high_risk_tightens_thresholds(self, engine):
        engine.set_kyc_status(ALICE, KycStatus.VERIFIED, OPERATOR, at=0,
                              risk_rating=RiskRating.HIGH)
        # divisor 4: threshold 15000 -> 3750
        verdict = check_transfer(req(engine, 3_750_01), engine)
        assert [a.kind for a in verdict.alerts] == [AlertKind.THRESHOLD_OCCASIONAL]
        calm = check_transfer(req(engine, 3_750_00), engine)
        assert calm.alerts == ()


class TestWholeUnitRule:
    def test_fractional_amount_on_non_subdivisible_token(self):
        engine = make_engine()
        define_asset(engine, token_id="units", decimals=0, subdivisible=False)
        engine.mint("units", ALICE, Amount(10, 0), ISSUER, at=0)
        request = TransferRequest(token_id="units", sender=ALICE, receiver=BOB,
                                  amount=Amount(5, 1), at=engine.clock)  # 0.5
        verdict = check_transfer(request, engine)
        assert not verdict.approved
        assert ReasonCode.RCP_27 in verdict.reasons

    def test_whole_amount_passes(self):
        engine = make_engine()
        define_asset(engine, token_id="units", decimals=0, subdivisible=False)
        engine.mint("units", ALICE, Amount(10, 0), ISSUER, at=0)
        request = TransferRequest(token_id="units", sender=ALICE, receiver=BOB,
                                  amount=Amount(30, 1), at=engine.clock)  # 3.0
        assert check_transfer(request, engine).approved


class TestMultiCodeOrdering:
    def test_paused_and_blacklisted_in_pipeline_order(self, engine):
        engine.pause(ASSET, REGULATOR, at=1)
        engine.blacklist_add(BOB, REGULATOR, at=1)
        verdict = check_transfer(req(engine, 10_00), engine)
        assert verdict.reasons == (ReasonCode.RCP_13, ReasonCode.RCP_15)

    def test_killed_leads_the_order(self, engine):
        engine.blacklist_add(BOB, REGULATOR, at=1)
        engine.kill_switch(ASSET, REGULATOR, at=1)
        verdict = check_transfer(req(engine, 10_00), engine)
        assert verdict.reasons[0] is ReasonCode.RCP_14
        assert ReasonCode.RCP_15 in verdict.reasons

    def test_rejection_lists_every_failed_check(self, engine):
        engine.pause(ASSET, REGULATOR, at=1)
        engine.blacklist_add(BOB, REGULATOR, at=1)
        engine.set_policy(ASSET, ISSUER, {"per_tx_limit": 1}, at=1)
        verdict = check_transfer(req(engine, 10_000_00), engine)
        assert verdict.reasons == (
            ReasonCode.RCP_13, ReasonCode.RCP_15, ReasonCode.RCP_11)


class TestPermissions:
    def test_regulator_may_freeze(self, engine):
        assert check_permission(REGULATOR, "freeze", engine, ASSET) is None

    def test_investor_may_not_freeze(self, engine):
        assert check_permission(ALICE, "freeze", engine, ASSET) is ReasonCode.RCP_07

    def test_permission_table_fixture_restricts_operator(self, engine):
        # kill_switch granted only to Regulator in the default table
        assert check_permission(OPERATOR, "kill_switch", engine, ASSET) is ReasonCode.RCP_07

    def test_default_deny_for_unknown_action(self, engine):
        assert check_permission(REGULATOR, "no-such-action", engine) is ReasonCode.RCP_07

    def test_unregistered_sender_fails_role_gate(self, engine):
        engine.mint(ASSET, ALICE, Amount(100, 2), ISSUER, at=0)
        request = TransferRequest(token_id=ASSET, sender="drifter", receiver=BOB,
                                  amount=Amount(10, 2), at=engine.clock)
        verdict = check_transfer(request, engine)
        assert ReasonCode.RCP_07 in verdict.reasons
        assert ReasonCode.RCP_01 in verdict.reasons


class TestTransferModes:
    def test_non_transferable_forbids_non_issuer_legs(self, engine):
        engine.set_policy(ASSET, ISSUER, {
            "transfer_mode": TransferMode(TransferModeKind.NON_TRANSFERABLE)}, at=1)
        verdict = check_transfer(req(engine, 10_00), engine)
        assert verdict.reasons == (ReasonCode.RCP_24,)
        redemption = check_transfer(req(engine, 10_00, receiver=ISSUER), engine)
        assert redemption.approved

    def test_issuer_only_mode(self, engine):
        engine.set_policy(ASSET, ISSUER, {
            "transfer_mode": TransferMode(TransferModeKind.ISSUER_ONLY)}, at=1)
        assert not check_transfer(req(engine, 10_00), engine).approved
        assert check_transfer(req(engine, 10_00, receiver=ISSUER), engine).approved

    def test_whitelist_mode_requires_both_parties(self, engine):
        engine.set_policy(ASSET, ISSUER, {
            "transfer_mode": TransferMode(TransferModeKind.WHITELIST_ONLY,
                                          frozenset({ALICE, BOB}))}, at=1)
        assert check_transfer(req(engine, 10_00), engine).approved
        to_outsider = check_transfer(req(engine, 10_00, receiver=CAROL), engine)
        assert to_outsider.reasons == (ReasonCode.RCP_24,)


class TestExpiry:
    def test_boundary_is_inclusive(self):
        engine = make_engine()
        define_asset(engine, token_id="dated", decimals=2, expiry=100)
        engine.mint("dated", ALICE, Amount(50_00, 2), ISSUER, at=0)
        before = TransferRequest(token_id="dated", sender=ALICE, receiver=BOB,
                                 amount=Amount(10_00, 2), at=99)
        assert check_transfer(before, engine).approved
        at_expiry = TransferRequest(token_id="dated", sender=ALICE, receiver=BOB,
                                    amount=Amount(10_00, 2), at=100)
        verdict = check_transfer(at_expiry, engine)
        assert verdict.reasons == (ReasonCode.RCP_23,)

    def test_redemption_to_issuer_stays_open(self):
        engine = make_engine()
        define_asset(engine, token_id="dated", decimals=2, expiry=100)
        engine.mint("dated", ALICE, Amount(50_00, 2), ISSUER, at=0)
        redemption = TransferRequest(token_id="dated", sender=ALICE, receiver=ISSUER,
                                     amount=Amount(10_00, 2), at=150)
        assert check_transfer(redemption, engine).approved


class TestInstrumentBan:
    def test_trading_restricted_rejects_rcp10(self, engine):
        engine.set_policy(ASSET, REGULATOR, {"trading_restricted": True}, at=1)
        verdict = check_transfer(req(engine, 10_00), engine)
        assert verdict.reasons == (ReasonCode.RCP_10,)


class TestWindowLimit:
    def make_finma_engine(self):
        engine = make_engine(profile="finma")
        define_asset(engine, token_id=ASSET, decimals=2)
        engine.mint(ASSET, ALICE, Amount(100_000_00, 2), ISSUER, at=0)
        return engine

    def window_oracle(self, transfers, at, window, limit_minor, amount_minor):
        # independent brute-force sum over the fixture list
        total = sum(minor for t, minor in transfers if at - window < t <= at)
        return total + amount_minor > limit_minor

    def test_window_exceeded_and_oracle_agreement(self):
        engine = self.make_finma_engine()
        day = 86_400
        window = 30 * day
        engine.execute_transfer(req(engine, 9_000_00, at=day), at=day)
        now = 20 * day
        exceeded = evaluate_window_limit(ALICE, BOB, ASSET, 2_000_00, now, engine)
        assert exceeded
        assert self.window_oracle([(day, 9_000_00)], now, window, 10_000_00 * 100 // 100, 2_000_00) \
            == exceeded
        verdict = check_transfer(req(engine, 2_000_00, at=now), engine)
        assert ReasonCode.RCP_11 in verdict.reasons

    def test_old_transfers_fall_out_of_the_window(self):
        engine = self.make_finma_engine()
        day = 86_400
        engine.execute_transfer(req(engine, 9_000_00, at=day), at=day)
        now = day + 31 * day
        assert not evaluate_window_limit(ALICE, BOB, ASSET, 2_000_00, now, engine)
        verdict = check_transfer(req(engine, 2_000_00, at=now), engine)
        assert verdict.approved

    def test_boundary_sum_equal_to_limit_is_within(self):
        engine = self.make_finma_engine()
        day = 86_400
        engine.execute_transfer(req(engine, 8_000_00, at=day), at=day)
        now = 2 * day
        assert not evaluate_window_limit(ALICE, BOB, ASSET, 2_000_00, now, engine)
        one_more = evaluate_window_limit(ALICE, BOB, ASSET, 2_000_01, now, engine)
        assert one_more

    def test_finma_profile_numbers(self):
        profile = PROFILES["finma"]
        assert profile.counterparty_window_limit == (10_000, 30 * 86_400)
        assert profile.occasional_threshold == 5_000


class TestPatternAlert:
    def seed_history(self, engine, amounts, start=1):
        t = start
        for minor in amounts:
            engine.execute_transfer(req(engine, minor, at=t), at=t)
            t += 1
        return t

    def test_deviation_against_trailing_mean(self, engine):
        engine.mint(ASSET, ALICE, Amount(100_000_00, 2), ISSUER, at=0)
        t = self.seed_history(engine, [100_00] * 5)
        # trailing mean 100.00, factor 10: 2000.00 > 10 x 100.00 -> alert
        alert = raise_pattern_alert(req(engine, 2_000_00, at=t), engine)
        assert alert is not None and alert.kind is AlertKind.PATTERN_DEVIATION
        # oracle: mean of the last 5 executed amounts
        tail = engine.executed_amounts(ASSET, ALICE)[-5:]
        assert 2_000_00 * 5 > 10 * sum(tail)

    def test_moderate_amount_stays_quiet(self, engine):
        engine.mint(ASSET, ALICE, Amount(100_000_00, 2), ISSUER, at=0)
        t = self.seed_history(engine, [100_00] * 5)
        assert raise_pattern_alert(req(engine, 150_00, at=t), engine) is None

    def test_needs_five_prior_transfers(self, engine):
        engine.mint(ASSET, ALICE, Amount(100_000_00, 2), ISSUER, at=0)
        t = self.seed_history(engine, [100_00] * 4)
        assert raise_pattern_alert(req(engine, 2_000_00, at=t), engine) is None


class TestDeterminismAndMonotonicity:
    def test_identical_inputs_identical_verdicts(self, engine):
        engine.pause(ASSET, REGULATOR, at=1)
        engine.blacklist_add(BOB, REGULATOR, at=1)
        a = check_transfer(req(engine, 16_000_00), engine)
        b = check_transfer(req(engine, 16_000_00), engine)
        assert a == b

    @settings(max_examples=200, deadline=None)
    @given(data=st.data())
    def test_blacklist_is_monotone(self, data):
        engine = make_engine()
        define_asset(engine)
        engine.mint(ASSET, ALICE, Amount(1_000_00, 2), ISSUER, at=0)
        if data.draw(st.booleans(), label="paused"):
            engine.pause(ASSET, REGULATOR, at=1)
        amount = data.draw(st.integers(min_value=1, max_value=2_000_00), label="amount")
        request = req(engine, amount)
        before = check_transfer(request, engine)
        victim = data.draw(st.sampled_from([ALICE, BOB]), label="victim")
        engine.blacklist_add(victim, REGULATOR, at=engine.clock)
        after = check_transfer(request, engine)
        if not before.approved:
            assert not after.approved
        assert ReasonCode.RCP_15 in after.reasons
