"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every tolerance is pinned here, nothing is deferred.
"""

import random
import time

from rcp_ledger.catalog import ALL_ITEM_IDS
from rcp_ledger.conformance import (
    builtin_manifests,
    builtin_matrix,
    reported_totals_match,
    reproduce_scorecard,
    score,
)
from rcp_ledger.core import (
    Amount,
    AssetClassDescriptor,
    Fungibility,
    Lifecycle,
    PartyRole,
)
from rcp_ledger.engine import Engine, Holding, TokenState
from rcp_ledger.events import EventKind, verify_records
from rcp_ledger.goldens import golden_digests
from rcp_ledger.identity import KycStatus, RiskRating, ScreeningResult
from rcp_ledger.policy import (
    AlertKind,
    DEFAULT_ROLE_PERMISSIONS,
    PolicySet,
    ReasonCode,
    TransferMode,
    TransferModeKind,
    TransferRequest,
    check_transfer,
)
from rcp_ledger.scenarios import (
    SWAP_FAULT_POINTS,
    ScenarioConfig,
    SwapPhase,
    atomic_swap,
    run_bond_scenario,
    run_carbon_scenario,
    settlement_per_unit,
    swap_terminal,
)

from conftest import (
    ALICE,
    ASSET,
    BOB,
    ISSUER,
    REGULATOR,
    define_asset,
    digest_of,
    make_engine,
)
from test_scenarios import conserved, coupon_oracle, fresh_swap_engines, swap_legs


def _ok(n: int, text: str) -> None:
    print(f"[PASS] criterion {n}: {text}")


class TestCriterion1ConformanceReproduction:
    def test_totals_body_cells_and_anchors(self):
        started = time.perf_counter()
        tables, errata = reproduce_scorecard()
        totals = {t.protocol: t.total for t in tables}
        assert totals == {"ERC-20": (15, 117), "ERC-1400": (58, 117),
                          "ERC-3643": (60, 117), "NEW-EIP": (77, 117)}
        assert reported_totals_match(tables)
        matched_cells = 60 - len(errata)
        assert matched_cells >= 55
        recomputed = {m.protocol: {r.institution: (r.numerator, r.denominator)
                                   for r in score(m, builtin_matrix()).rows}
                      for m in builtin_manifests()}
        assert recomputed["ERC-20"]["BIS"] == (3, 7)
        assert recomputed["ERC-1400"]["ESMA"] == (3, 6)
        assert recomputed["ERC-3643"]["ESMA"] == (2, 6)
        assert recomputed["NEW-EIP"]["FATF"] == (11, 14)
        assert recomputed["NEW-EIP"]["FINRA"] == (11, 14)
        elapsed = time.perf_counter() - started
        assert elapsed < 1.0
        _ok(1, f"totals 15/58/60/77 of 117, {matched_cells}/60 cells match, "
               f"anchor cells exact, {elapsed:.3f}s")


class TestCriterion2ManifestCardinalities:
    def test_exact_cardinalities_and_complement(self):
        sizes = {m.protocol: m.size for m in builtin_manifests()}
        assert sizes == {"ERC-20": 5, "ERC-1400": 16, "ERC-3643": 15, "NEW-EIP": 25}
        new_eip = next(m for m in builtin_manifests() if m.protocol == "NEW-EIP")
        assert ALL_ITEM_IDS - new_eip.items == frozenset({2, 5, 6, 17, 18, 19})
        _ok(2, "manifest sizes 5/16/15/25, complement {2,5,6,17,18,19}")


class TestCriterion3Thresholds:
    def test_occasional_and_wire_boundaries(self):
        engine = make_engine()
        define_asset(engine)
        engine.mint(ASSET, ALICE, Amount(10_000_000_00, 2), ISSUER, at=0)

        def verdict_for(minor, wire=False):
            return check_transfer(TransferRequest(
                token_id=ASSET, sender=ALICE, receiver=BOB,
                amount=Amount(minor, 2), wire=wire, at=engine.clock), engine)

        assert verdict_for(15_000_00).alerts == ()
        above = verdict_for(15_000_01)
        assert [a.kind for a in above.alerts] == [AlertKind.THRESHOLD_OCCASIONAL]
        assert verdict_for(1_000_00, wire=True).alerts == ()
        wire_above = verdict_for(1_000_01, wire=True)
        assert [a.kind for a in wire_above.alerts] == [AlertKind.THRESHOLD_WIRE]
        assert verdict_for(15_000_01).approved  # alerts never block

    def test_finma_window_rejection(self):
        engine = make_engine(profile="finma")
        define_asset(engine)
        engine.mint(ASSET, ALICE, Amount(100_000_00, 2), ISSUER, at=0)
        day = 86_400

        def attempt(minor, at):
            return check_transfer(TransferRequest(
                token_id=ASSET, sender=ALICE, receiver=BOB,
                amount=Amount(minor, 2), at=at), engine)

        engine.execute_transfer(TransferRequest(
            token_id=ASSET, sender=ALICE, receiver=BOB,
            amount=Amount(8_000_00, 2), at=day), at=day)
        boundary = attempt(2_000_00, 10 * day)  # sum == 10,000 exactly
        assert ReasonCode.RCP_11 not in boundary.reasons
        tripped = attempt(2_000_01, 10 * day)
        assert ReasonCode.RCP_11 in tripped.reasons
        aged_out = attempt(2_000_01, day + 31 * day)
        assert ReasonCode.RCP_11 not in aged_out.reasons
        _ok(3, "15,000/1,000 strict boundaries, FINMA 10,000/30d window RCP-11")


class TestCriterion4Atomicity:
    def test_exhaustive_faults_and_randomized_runs(self):
        started = time.perf_counter()
        lone_commits = 0
        conservation_failures = 0
        runs = 0

        def run_one(fault, blacklist):
            nonlocal lone_commits, conservation_failures, runs
            a, b = fresh_swap_engines()
            if blacklist:
                b.register_identity("reg-b", digest_of("reg-b"),
                                    [PartyRole.REGULATOR], at=0)
                b.set_kyc_status("reg-b", KycStatus.VERIFIED, "ops", at=0)
                b.blacklist_add("nom-b", "reg-b", at=1)
            leg_a, leg_b = swap_legs(a, b, at=10)
            swap = atomic_swap(a, b, leg_a, leg_b, fault_schedule=fault, at=10)
            commits = [swap_terminal(a, swap.swap_id),
                       swap_terminal(b, swap.swap_id)].count(SwapPhase.COMMITTED)
            if commits == 1:
                lone_commits += 1
            if not (conserved(a, "bond") and conserved(b, "cash")):
                conservation_failures += 1
            runs += 1

        # exhaustive: every protocol step, with and without a failing leg
        for fault in (None,) + SWAP_FAULT_POINTS:
            for blacklist in (False, True):
                run_one(fault, blacklist)
        # randomized: 1,000 seeded runs over fault positions and leg health
        rng = random.Random(20_26)
        choices = (None,) + SWAP_FAULT_POINTS
        for _ in range(1_000):
            run_one(rng.choice(choices), rng.random() < 0.25)
        elapsed = time.perf_counter() - started
        assert lone_commits == 0
        assert conservation_failures == 0
        assert elapsed < 10.0
        _ok(4, f"{runs} runs (exhaustive + 1,000 seeded): no lone commit, "
               f"conservation intact, {elapsed:.2f}s")


class TestCriterion5Immutability:
    def build_store_lines(self):
        engine = make_engine()
        define_asset(engine)
        engine.mint(ASSET, ALICE, Amount(10_000_00, 2), ISSUER, at=0)
        t = 1
        for i in range(6):
            engine.execute_transfer(TransferRequest(
                token_id=ASSET, sender=ALICE, receiver=BOB,
                amount=Amount(100 + i, 2), at=t), at=t)
            t += 1
        engine.freeze(ALICE, ASSET, Amount(50_00, 2), REGULATOR, at=t)
        return engine, [e.to_record() for e in engine.log]

    def test_every_event_and_byte_position_is_tamper_evident(self):
        engine, lines = self.build_store_lines()
        assert verify_records(lines).ok
        total_mutations = 0
        # every byte of three representative events, a sample of the rest
        exhaustive = {0, len(lines) // 2, len(lines) - 1}
        for seq, line in enumerate(lines):
            if seq in exhaustive:
                positions = range(len(line))
            else:
                positions = [1, len(line) // 2, len(line) - 2]
            for pos in positions:
                original = line[pos]
                replacement = "x" if original != "x" else "y"
                mutated = list(lines)
                mutated[seq] = line[:pos] + replacement + line[pos + 1:]
                report = verify_records(mutated)
                assert not report.ok, f"mutation at seq {seq} pos {pos} undetected"
                assert report.first_bad_seq == seq, (
                    f"mutation at seq {seq} pos {pos} flagged at {report.first_bad_seq}")
                total_mutations += 1
        _ok(5, f"{total_mutations} single-byte mutations all detected at their seq")

    def test_replay_digest_after_1000_command_fuzz(self):
        engine = make_engine()
        define_asset(engine)
        define_asset(engine, token_id="units", decimals=0, subdivisible=False)
        engine.mint(ASSET, ALICE, Amount(900_000_00, 2), ISSUER, at=0)
        engine.mint("units", ALICE, Amount(500, 0), ISSUER, at=0)
        rng = random.Random(555)
        accounts = [ALICE, BOB, "carol"]
        t = 0
        issued = 0
        for _ in range(1_000):
            t += 1
            op = rng.random()
            try:
                if op < 0.55:
                    sender, receiver = rng.sample(accounts, 2)
                    token = rng.choice([ASSET, "units"])
                    decimals = 2 if token == ASSET else 0
                    engine.execute_transfer(TransferRequest(
                        token_id=token, sender=sender, receiver=receiver,
                        amount=Amount(rng.randint(1, 200_00), decimals), at=t), at=t)
                elif op < 0.65:
                    engine.freeze(rng.choice(accounts), ASSET,
                                  Amount(rng.randint(1, 50_00), 2), REGULATOR, at=t)
                elif op < 0.72:
                    engine.unfreeze(rng.choice(accounts), ASSET,
                                    Amount(rng.randint(1, 50_00), 2), REGULATOR, at=t)
                elif op < 0.80:
                    engine.mint(ASSET, rng.choice(accounts), Amount(10_00, 2),
                                ISSUER, at=t)
                elif op < 0.86:
                    engine.burn(ASSET, ALICE, Amount(rng.randint(1, 20_00), 2),
                                ALICE, at=t)
                elif op < 0.90:
                    engine.update_identity(ALICE, digest_of(f"fuzz-{t}"), at=t)
                elif op < 0.94:
                    engine.blacklist_add("carol", REGULATOR, at=t)
                elif op < 0.97:
                    engine.blacklist_remove("carol", REGULATOR, at=t)
                else:
                    issued += 1
                    engine.register_identity(f"acct-{issued}", digest_of(f"acct-{issued}"),
                                             [PartyRole.INVESTOR], at=t)
            except Exception:
                pass
        assert len(engine.log) >= 1_000
        replayed = Engine.replay(list(engine.log), engine.config)
        assert replayed.state_digest() == engine.state_digest()
        assert engine.log.verify_chain().ok
        _ok(5, f"replay of {len(engine.log)} events reproduces the live state digest")


class TestCriterion6ScenarioGoldens:
    def test_bond_settlement_and_stability(self):
        started = time.perf_counter()
        config = ScenarioConfig()
        principal, interest, per_unit = settlement_per_unit("1000.00", 500, 2)
        assert per_unit == coupon_oracle("1000.00", 500, 2) == 105_000
        assert Amount(per_unit, 2).render() == "1050.00"
        first, engine = run_bond_scenario(config)
        second, _ = run_bond_scenario(config)
        assert first.digest() == second.digest()
        assert first.final_state_digest == second.final_state_digest
        golden = golden_digests()["bond"]
        assert first.digest() == golden["transcript_digest"]
        assert first.final_state_digest == golden["final_state_digest"]
        settlements = [e for e in engine.log if e.kind is EventKind.SETTLEMENT_EXECUTED]
        assert settlements
        assert all(e.payload["settlement"]["per_unit"] == 105_000 for e in settlements)
        elapsed = time.perf_counter() - started
        assert elapsed < 2.0 * 2  # two full runs, budget 2s each
        _ok(6, f"bond settles 1050.00/unit, transcript byte-stable ({elapsed:.2f}s)")

    def test_carbon_burn_reuse_and_stability(self):
        started = time.perf_counter()
        config = ScenarioConfig()
        first, engine = run_carbon_scenario(config)
        second, _ = run_carbon_scenario(config)
        assert first.digest() == second.digest()
        golden = golden_digests()["carbon"]
        assert first.digest() == golden["transcript_digest"]
        reuse = [s for s in first.steps
                 if s.label == "Use Request Rejection and Reason Notification"]
        assert reuse and "RCP-08" in reuse[0].outcome
        elapsed = time.perf_counter() - started
        assert elapsed < 2.0 * 2
        _ok(6, f"carbon burned credits stay burned, transcript byte-stable ({elapsed:.2f}s)")


class _StubState:
    """Minimal snapshot for the pure verdict function."""

    def __init__(self, token, policy, screens, balances, roles, history=()):
        self._token = token
        self._policy = policy
        self._screens = screens
        self._balances = balances
        self._roles = roles
        self._history = list(history)

    def token_state(self, token_id):
        return self._token if token_id == self._token.token_id else None

    def policy_for(self, token_id):
        return self._policy

    def screen(self, subject):
        return self._screens.get(subject, ScreeningResult.KYC_MISSING)

    def holding(self, token_id, account):
        return self._balances.get(account, Holding())

    def roles_of(self, account):
        return self._roles.get(account, frozenset())

    def risk_rating_of(self, subject):
        return RiskRating.LOW

    def executed_between(self, token_id, sender, receiver):
        return self._history

    def executed_amounts(self, token_id, sender):
        return [minor for _, minor in self._history]


def _random_case(rng: random.Random):
    decimals = rng.choice([0, 2])
    subdivisible = decimals != 0 and rng.random() < 0.8
    token = TokenState(
        token_id="tok",
        asset_class=AssetClassDescriptor(
            fungibility=Fungibility.FUNGIBLE, subdivisible=subdivisible,
            decimals=decimals, transferable=rng.random() > 0.1,
            compliant=rng.random() > 0.3),
        issuer="issuer",
        supply_cap_minor=None,
        expiry=rng.choice([None, 50, 200]),
        lifecycle=rng.choice([Lifecycle.ACTIVE, Lifecycle.ACTIVE, Lifecycle.ACTIVE,
                              Lifecycle.PAUSED, Lifecycle.KILLED]),
        expired=rng.random() < 0.1,
    )
    mode = rng.choice([
        TransferMode(TransferModeKind.FREE),
        TransferMode(TransferModeKind.WHITELIST_ONLY, frozenset({"s", "r"})),
        TransferMode(TransferModeKind.WHITELIST_ONLY, frozenset({"s"})),
        TransferMode(TransferModeKind.ISSUER_ONLY),
        TransferMode(TransferModeKind.NON_TRANSFERABLE),
    ])
    policy = PolicySet(
        token_id="tok",
        transfer_mode=mode,
        role_permissions=dict(DEFAULT_ROLE_PERMISSIONS),
        per_tx_limit=rng.choice([None, 5, 100]),
        counterparty_window_limit=rng.choice([None, (10, 1000)]),
        trading_paused=rng.random() < 0.2,
        trading_restricted=rng.random() < 0.2,
    )
    screens = {
        "s": rng.choice(list(ScreeningResult)),
        "r": rng.choice(list(ScreeningResult)),
    }
    balances = {"s": Holding(free=rng.randint(0, 400), frozen=rng.randint(0, 100))}
    roles = {"s": rng.choice([frozenset({PartyRole.INVESTOR}), frozenset()])}
    history = [(90, rng.randint(1, 8 * 10 ** decimals))] if rng.random() < 0.4 else []
    amount_minor = rng.randint(1, 600)
    amount_decimals = min(decimals + rng.choice([0, 0, 0, 1]), 18)
    request = TransferRequest(
        token_id="tok", sender="s", receiver=rng.choice(["r", "issuer"]),
        amount=Amount(amount_minor, amount_decimals), at=rng.choice([10, 60, 100, 250]),
        wire=rng.random() < 0.3)
    return _StubState(token, policy, screens, balances, roles, history), request


def _expected_codes(state: _StubState, req: TransferRequest):
    """Independent restatement of the pipeline rules, in order."""
    token = state._token
    policy = state._policy
    cls = token.asset_class
    scale = 10 ** max(req.amount.decimals - token.decimals, 0)
    amt = req.amount.minor_units * 10 ** max(token.decimals - req.amount.decimals, 0)
    codes = []
    if token.lifecycle is Lifecycle.KILLED:
        codes.append(ReasonCode.RCP_14)
    if token.lifecycle is Lifecycle.PAUSED or policy.trading_paused:
        codes.append(ReasonCode.RCP_13)
    granted = policy.role_permissions.get("transfer", frozenset())
    if not (state.roles_of(req.sender) & granted):
        codes.append(ReasonCode.RCP_07)
    screens = (state.screen(req.sender), state.screen(req.receiver))
    if cls.compliant and ScreeningResult.KYC_MISSING in screens:
        codes.append(ReasonCode.RCP_01)
    if ScreeningResult.BLOCKED in screens:
        codes.append(ReasonCode.RCP_15)
    if amt > state.holding("tok", req.sender).free * scale:
        codes.append(ReasonCode.RCP_08)
    expired = token.expired or (token.expiry is not None and req.at >= token.expiry)
    if expired and req.receiver != token.issuer:
        codes.append(ReasonCode.RCP_23)
    mode = policy.transfer_mode
    issuer_leg = token.issuer in (req.sender, req.receiver)
    violates = False
    if not cls.transferable and not issuer_leg:
        violates = True
    elif mode.kind is TransferModeKind.NON_TRANSFERABLE and not issuer_leg:
        violates = True
    elif mode.kind is TransferModeKind.ISSUER_ONLY and not issuer_leg:
        violates = True
    elif mode.kind is TransferModeKind.WHITELIST_ONLY:
        allowed = mode.whitelist | {token.issuer}
        if req.sender not in allowed or req.receiver not in allowed:
            violates = True
    if violates:
        codes.append(ReasonCode.RCP_24)
    if not cls.subdivisible and req.amount.minor_units % 10 ** req.amount.decimals:
        codes.append(ReasonCode.RCP_27)
    limited = False
    if policy.per_tx_limit is not None:
        if amt > policy.per_tx_limit * 10 ** token.decimals * scale:
            limited = True
    if not limited and policy.counterparty_window_limit is not None:
        limit, window = policy.counterparty_window_limit
        if req.amount.decimals >= token.decimals:
            minor, rem = divmod(req.amount.minor_units,
                                10 ** (req.amount.decimals - token.decimals))
        else:
            minor, rem = (req.amount.minor_units
                          * 10 ** (token.decimals - req.amount.decimals), 0)
        if rem == 0:
            in_window = sum(m for t, m in state.executed_between("tok", "s", req.receiver)
                            if req.at - window < t <= req.at)
            if in_window + minor > limit * 10 ** token.decimals:
                limited = True
    if limited:
        codes.append(ReasonCode.RCP_11)
    if policy.trading_restricted:
        codes.append(ReasonCode.RCP_10)
    return tuple(codes)


class TestCriterion7VerdictProperties:
    def test_10000_generated_cases(self):
        rng = random.Random(424242)
        cases = 12_000
        for index in range(cases):
            state, request = _random_case(rng)
            first = check_transfer(request, state)
            second = check_transfer(request, state)
            assert first == second, f"case {index}: nondeterministic verdict"
            expected = _expected_codes(state, request)
            assert first.reasons == expected, (
                f"case {index}: got {first.reason_codes}, "
                f"want {[c.code for c in expected]}")
            assert first.approved == (not expected)
            # blacklist dominance: blocking a party never approves a rejection
            state._screens[request.sender] = ScreeningResult.BLOCKED
            dominated = check_transfer(request, state)
            assert ReasonCode.RCP_15 in dominated.reasons
            if not first.approved:
                assert not dominated.approved
        _ok(7, f"{cases} generated cases: deterministic, complete, "
               f"ordered, blacklist-monotone")
