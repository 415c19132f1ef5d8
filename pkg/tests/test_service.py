"""HTTP surface: the FastAPI app over a temp store."""

import pytest
from fastapi.testclient import TestClient

from rcp_ledger.engine import EngineConfig, MetaTransferAuthorization
from rcp_ledger.policy import TransferRequest
from rcp_ledger.service import create_app
from rcp_ledger.service.models import amount_from_text

from conftest import digest_of


@pytest.fixture
def client(tmp_path):
    app = create_app(store_path=str(tmp_path / "svc.store"),
                     config=EngineConfig(engine_id="svc", recovery_accounts=("vault-9",),
                                         fee_token="cash", fee_collector="ops-9"))
    with TestClient(app) as test_client:
        yield test_client


def bootstrap(client):
    for account, roles in (
            ("ops-9", ["Operator"]),
            ("iss-9", ["Issuer"]),
            ("reg-9", ["Regulator"]),
            ("aud-9", ["Auditor"]),
            ("ann", ["Investor"]),
            ("ben", ["Investor"]),
            ("relay-9", ["Relayer"]),
    ):
        r = client.post("/identity/register", json={
            "subject": account, "profile_digest": digest_of(account), "roles": roles})
        assert r.status_code == 200, r.text
        r = client.post("/identity/kyc", json={
            "subject": account, "status": "Verified", "actor": "ops-9"})
        assert r.status_code == 200, r.text
    r = client.post("/tokens/define", json={
        "token_id": "cash", "issuer": "iss-9", "decimals": 2, "subdivisible": True,
        "anchors": [{"doc_id": "terms", "digest": digest_of("terms")}]})
    assert r.status_code == 200, r.text
    r = client.post("/tx/mint", json={
        "token": "cash", "to": "ann", "amount": "50000.00", "actor": "iss-9"})
    assert r.status_code == 200, r.text


class TestIdentityEndpoints:
    def test_register_then_screen(self, client):
        bootstrap(client)
        r = client.get("/identity/screen/ann")
        assert r.json() == {"subject": "ann", "result": "Clear"}
        r = client.get("/identity/screen/nobody")
        assert r.json()["result"] == "KycMissing"

    def test_duplicate_registration_conflict(self, client):
        bootstrap(client)
        r = client.post("/identity/register", json={
            "subject": "ann", "profile_digest": digest_of("x")})
        assert r.status_code == 409
        assert r.json()["error"] == "AlreadyRegistered"

    def test_permission_denied_maps_to_403(self, client):
        bootstrap(client)
        r = client.post("/identity/kyc", json={
            "subject": "ben", "status": "Verified", "actor": "ann"})
        assert r.status_code == 403
        assert r.json()["reason_code"] == "RCP-07"


class TestTransferEndpoints:
    def test_approved_transfer(self, client):
        bootstrap(client)
        r = client.post("/tx/transfer", json={
            "token": "cash", "sender": "ann", "receiver": "ben", "amount": "12.34"})
        body = r.json()
        assert r.status_code == 200
        assert body["decision"] == "Approved"
        assert body["events"][0]["kind"] == "TransferExecuted"
        r = client.get("/balance/cash/ben")
        assert r.json()["free"] == 1234

    def test_blacklist_rejection_carries_codes(self, client):
        bootstrap(client)
        client.post("/identity/blacklist/add", json={
            "subject": "ben", "actor": "reg-9", "reason": "sanctions"})
        r = client.post("/tx/transfer", json={
            "token": "cash", "sender": "ann", "receiver": "ben", "amount": "1.00"})
        body = r.json()
        assert body["decision"] == "Rejected"
        assert body["reasons"] == ["RCP-15"]
        assert body["events"][0]["kind"] == "TransferRejected"

    def test_threshold_alert_in_response(self, client):
        bootstrap(client)
        r = client.post("/tx/transfer", json={
            "token": "cash", "sender": "ann", "receiver": "ben", "amount": "16000.00"})
        body = r.json()
        assert body["decision"] == "Approved"
        assert [a["kind"] for a in body["alerts"]] == ["ThresholdOccasional"]

    def test_unknown_token_404(self, client):
        bootstrap(client)
        r = client.post("/tx/transfer", json={
            "token": "ghost", "sender": "ann", "receiver": "ben", "amount": "1"})
        assert r.status_code == 404

    def test_meta_transfer_via_http(self, client):
        bootstrap(client)
        client.post("/tx/mint", json={
            "token": "cash", "to": "relay-9", "amount": "10.00", "actor": "iss-9"})
        at = 100
        inner = TransferRequest(token_id="cash", sender="ann", receiver="ben",
                                amount=amount_from_text("25.00"), at=at)
        digest = MetaTransferAuthorization.digest_for("ann", inner)
        r = client.post("/tx/meta", json={
            "inner": {"token": "cash", "sender": "ann", "receiver": "ben",
                      "amount": "25.00", "at": at},
            "relayer": "relay-9", "fee": "0.10", "signature_digest": digest, "at": at})
        assert r.status_code == 200, r.text
        assert r.json()["decision"] == "Approved"
        bad = client.post("/tx/meta", json={
            "inner": {"token": "cash", "sender": "ann", "receiver": "ben",
                      "amount": "26.00", "at": at},
            "relayer": "relay-9", "fee": "0.10", "signature_digest": digest, "at": at})
        assert bad.status_code == 403
        assert bad.json()["error"] == "BadAuthorization"


class TestLedgerEndpoints:
    def test_verify_and_replay(self, client):
        bootstrap(client)
        r = client.get("/ledger/verify")
        assert r.json()["ok"] is True
        r = client.get("/ledger/replay")
        body = r.json()
        assert body["matches_live"] is True

    def test_export_range(self, client):
        bootstrap(client)
        r = client.get("/ledger/export", params={"from_seq": 0, "to_seq": 3})
        assert [e["seq"] for e in r.json()["events"]] == [0, 1, 2, 3]


class TestAuditEndpoints:
    def test_export_and_feed(self, client):
        bootstrap(client)
        r = client.post("/audit/export", json={"from_seq": 0, "to_seq": 5, "actor": "aud-9"})
        assert r.status_code == 200
        body = r.json()
        assert body["chain_ok"] is True
        assert body["event"]["kind"] == "AuditExported"
        r = client.get("/query/feed", params={"as_account": "reg-9", "since": -1})
        assert len(r.json()["events"]) > 0
        r = client.get("/query/feed", params={"as_account": "ann", "since": -1})
        assert r.status_code == 403

    def test_history_visibility(self, client):
        bootstrap(client)
        client.post("/tx/transfer", json={
            "token": "cash", "sender": "ann", "receiver": "ben", "amount": "5.00"})
        r = client.get("/query/history", params={"as_account": "ann"})
        seqs = [e["seq"] for e in r.json()["events"]]
        assert seqs
        r_all = client.get("/query/history", params={"as_account": "reg-9"})
        assert len(r_all.json()["events"]) > len(seqs)


class TestConformanceEndpoints:
    def test_table_reproduces_totals(self, client):
        r = client.get("/conformance/table")
        body = r.json()
        assert body["totals_match"] is True
        totals = {t["protocol"]: t["total_numerator"] for t in body["tables"]}
        assert totals == {"ERC-20": 15, "ERC-1400": 58, "ERC-3643": 60, "NEW-EIP": 77}
        assert all(t["total_denominator"] == 117 for t in body["tables"])
        assert "15/117" in body["rendered"]
        assert len(body["errata"]) == 1

    def test_score_custom_manifest(self, client):
        r = client.post("/conformance/score", json={
            "protocol": "mine", "items": [20, 21, 25, 28, 31]})
        assert r.json()["total_numerator"] == 17  # strict recomputation
        r = client.post("/conformance/score", json={"protocol": "bad", "items": [99]})
        assert r.status_code == 422

    def test_engine_manifest(self, client):
        r = client.get("/conformance/manifest")
        body = r.json()
        assert body["items"] == list(range(1, 32))
        assert body["annotations"]["17"] == "visibility-simulated"


class TestScenarioEndpoint:
    def test_run_bond_with_golden_check(self, client):
        r = client.post("/scenario/run", json={"scenario": "bond", "golden": True})
        body = r.json()
        assert body["golden_match"] is True
        assert body["final_state_digest"]
        labels = {s["label"] for s in body["steps"]}
        assert "Execute Gasless Settlement" in labels

    def test_unknown_scenario(self, client):
        r = client.post("/scenario/run", json={"scenario": "nope"})
        assert r.status_code == 422


class TestPolicyEndpoints:
    def test_show_and_set(self, client):
        bootstrap(client)
        r = client.get("/policy/cash")
        assert r.json()["policy"]["occasional_threshold"] == 15000
        r = client.put("/policy/cash", json={
            "actor": "reg-9", "trading_restricted": True})
        assert r.status_code == 200
        r = client.post("/tx/transfer", json={
            "token": "cash", "sender": "ann", "receiver": "ben", "amount": "1.00"})
        assert r.json()["reasons"] == ["RCP-10"]

    def test_store_persists_across_clients(self, tmp_path):
        path = str(tmp_path / "persist.store")
        app = create_app(store_path=path, config=EngineConfig(engine_id="p1"))
        with TestClient(app) as c1:
            c1.post("/identity/register", json={
                "subject": "keeper", "profile_digest": digest_of("keeper"),
                "roles": ["Operator"]})
        app2 = create_app(store_path=path)
        with TestClient(app2) as c2:
            r = c2.get("/identity/keeper")
            assert r.status_code == 200
            assert r.json()["roles"] == ["Operator"]


class TestEnforcementEndpoints:
    def seed(self, client):
        bootstrap(client)
        client.post("/identity/register", json={
            "subject": "vault-9", "profile_digest": digest_of("vault-9"),
            "roles": ["Operator"]})
        client.post("/identity/kyc", json={
            "subject": "vault-9", "status": "Verified", "actor": "ops-9"})

    def test_freeze_recover_liquidate_flow(self, client):
        self.seed(client)
        r = client.post("/tx/freeze", json={
            "token": "cash", "account": "ann", "amount": "100.00", "actor": "reg-9"})
        assert r.status_code == 200
        r = client.get("/balance/cash/ann")
        assert r.json()["frozen"] == 100_00
        r = client.post("/tx/unfreeze", json={
            "token": "cash", "account": "ann", "amount": "40.00", "actor": "reg-9"})
        assert r.status_code == 200
        r = client.post("/tx/recover", json={
            "token": "cash", "from_account": "ann", "to_recovery": "vault-9",
            "amount": "60.00", "actor": "reg-9"})
        assert r.status_code == 200
        assert client.get("/balance/cash/vault-9").json()["free"] == 60_00
        r = client.post("/tx/liquidate", json={
            "token": "cash", "account": "ann", "actor": "reg-9", "note": "close-out"})
        assert r.status_code == 200
        balance = client.get("/balance/cash/ann").json()
        assert balance["free"] == 0 and balance["frozen"] == 0
        r = client.post("/tx/recover", json={
            "token": "cash", "from_account": "ann", "to_recovery": "ben",
            "amount": "1.00", "actor": "reg-9"})
        assert r.status_code == 422  # ben is not a designated recovery account

    def test_pause_resume_kill_endpoints(self, client):
        self.seed(client)
        assert client.post("/tx/pause", json={
            "token": "cash", "actor": "reg-9"}).status_code == 200
        r = client.post("/tx/transfer", json={
            "token": "cash", "sender": "ann", "receiver": "ben", "amount": "1.00"})
        assert r.json()["reasons"] == ["RCP-13"]
        assert client.post("/tx/resume", json={
            "token": "cash", "actor": "reg-9"}).status_code == 200
        assert client.post("/tx/kill", json={
            "token": "cash", "actor": "reg-9"}).status_code == 200
        r = client.post("/tx/mint", json={
            "token": "cash", "to": "ann", "amount": "1.00", "actor": "iss-9"})
        assert r.status_code == 422
        assert r.json()["reason_code"] == "RCP-14"

    def test_correction_endpoint(self, client):
        self.seed(client)
        r = client.post("/tx/transfer", json={
            "token": "cash", "sender": "ann", "receiver": "ben", "amount": "100.00"})
        seq = r.json()["events"][0]["seq"]
        r = client.post("/tx/correct", json={
            "original_seq": seq, "actor": "reg-9", "amount": 70_00})
        assert r.status_code == 200
        kinds = [e["kind"] for e in r.json()["events"]]
        assert kinds == ["CorrectionCancel", "CorrectionNew"]
        assert client.get("/balance/cash/ben").json()["free"] == 70_00
        assert client.get("/ledger/verify").json()["ok"] is True

    def test_split_and_expire_endpoints(self, client):
        self.seed(client)
        r = client.post("/tokens/define", json={
            "token_id": "deed", "issuer": "iss-9", "fungibility": "NonFungible",
            "subdivisible": False, "decimals": 0, "supply_cap": "1", "expiry": 5000,
            "behavior_tags": ["splittable"], "expirable": True,
            "anchors": [{"doc_id": "deed-doc", "digest": digest_of("deed-doc")}]})
        assert r.status_code == 200, r.text
        client.post("/tx/mint", json={
            "token": "deed", "to": "ann", "amount": "1", "actor": "iss-9"})
        r = client.post("/tx/split", json={
            "token": "deed", "fractions": 10, "actor": "iss-9"})
        assert r.status_code == 200
        assert client.get("/balance/deed.lots/ann").json()["free"] == 10
        r = client.post("/tx/expire", json={
            "token": "deed", "actor": "iss-9", "at": 5000})
        assert r.status_code == 200
        assert client.get("/tokens/deed").json()["expired"] is True

    def test_update_identity_endpoint(self, client):
        self.seed(client)
        r = client.post("/identity/update", json={
            "subject": "ann", "profile_digest": digest_of("ann-v2")})
        kinds = [e["kind"] for e in r.json()["events"]]
        assert kinds == ["IdentityUpdated", "AlertRaised"]
        assert client.get("/identity/ann").json()["version"] == 2
