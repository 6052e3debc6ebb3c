import json
import shutil

import pytest

from snftrack.cli import EXIT_CONFIG, EXIT_DENIED, EXIT_OK, EXIT_VERIFY, main


@pytest.fixture(scope="module")
def sim(demo_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "run"
    assert main(["simulate", "--config", str(demo_dir / "config.json"), "--out", str(out)]) == EXIT_OK
    return out


def run_json(capsys, argv):
    capsys.readouterr()
    code = main(argv + ["--format", "json"])
    return code, json.loads(capsys.readouterr().out)


def test_simulate_writes_artifacts(sim):
    for name in ("ledger.ndjson", "trace.ndjson", "sidestores", "attestations.json", "outbox.ndjson",
                 "registry.json", "policy.json", "validators.json", "reports/public_aggregates.csv", "summary.json"):
        assert (sim / name).exists(), name
    summary = json.loads((sim / "summary.json").read_text())
    assert summary["shipments"]["SHIP-001"]["state"] == "Archived"


def test_simulate_even_n_is_config_error(demo_dir, tmp_path, capsys):
    d = tmp_path / "d"
    shutil.copytree(demo_dir, d)
    doc = json.loads((d / "config.json").read_text())
    doc["consensus"]["n"] = 2
    (d / "even.json").write_text(json.dumps(doc))
    assert main(["simulate", "--config", str(d / "even.json"), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "consensus.n" in capsys.readouterr().err


def test_verify_pass_and_failures(sim, tmp_path, capsys):
    code, doc = run_json(capsys, ["verify", "--ledger", str(sim / "ledger.ndjson"),
                                  "--attestations", str(sim / "attestations.json")])
    assert code == EXIT_OK and doc["ok"]
    assert [c["status"] for c in doc["checks"]] == ["pass"] * 5

    bad = tmp_path / "bad"
    shutil.copytree(sim, bad)
    text = (bad / "ledger.ndjson").read_text()
    i = text.index('"prev_hash":"') + len('"prev_hash":"') + 3
    (bad / "ledger.ndjson").write_text(text[:i] + ("1" if text[i] != "1" else "2") + text[i + 1:])
    code, doc = run_json(capsys, ["verify", "--ledger", str(bad / "ledger.ndjson")])
    assert code == EXIT_VERIFY
    assert doc["checks"][0]["status"] == "fail"
    assert all(c["status"] == "skipped" and c["detail"] == "chain check failed" for c in doc["checks"][1:])

    atts = json.loads((sim / "attestations.json").read_text())
    atts[0]["audit_transcript"][0]["salt"] = "00" * 32
    doctored = tmp_path / "doctored.json"
    doctored.write_text(json.dumps(atts))
    code, doc = run_json(capsys, ["verify", "--ledger", str(sim / "ledger.ndjson"), "--attestations", str(doctored)])
    status = {c["check"]: c["status"] for c in doc["checks"]}
    assert code == EXIT_VERIFY and status["attestations"] == "fail" and status["chain"] == "pass"


def test_ledger_verify(sim, capsys):
    code, doc = run_json(capsys, ["ledger", "verify", "--ledger", str(sim / "ledger.ndjson")])
    assert code == EXIT_OK and doc["ok"] and doc["blocks"] > 0


def test_query_exit_codes(sim, capsys):
    code, doc = run_json(capsys, ["query", "--as", "observer-1", "--layer", "Public", "--run", str(sim)])
    assert code == EXIT_OK and doc["decision"] == "Allow" and doc["records"]
    code, doc = run_json(capsys, ["query", "--as", "observer-1", "--layer", "Operational", "--run", str(sim)])
    assert code == EXIT_DENIED and doc["decision"] == "Deny(RoleForbidden)" and doc["records"] == []
    code, doc = run_json(capsys, ["query", "--as", "carrier-a", "--layer", "Operational", "--shipment", "SHIP-001",
                                  "--run", str(sim)])
    assert code == EXIT_OK and all("payload" in r for r in doc["records"])
    assert main(["query", "--as", "ghost", "--layer", "Public", "--run", str(sim)]) == EXIT_CONFIG


def test_out_root_from_environment(sim, tmp_path, monkeypatch, capsys):
    root = tmp_path / "root"
    shutil.copytree(sim, root / "run")
    monkeypatch.setenv("SNFTRACK_OUT", str(root))
    code, doc = run_json(capsys, ["query", "--as", "regulator-national", "--layer", "Supervisory"])
    assert code == EXIT_OK and doc["records"]


def test_identity_lifecycle(tmp_path, capsys):
    reg, ks = str(tmp_path / "registry.json"), str(tmp_path / "keys.json")
    code, doc = run_json(capsys, ["identity", "keygen", "--id", "alice", "--keystore", ks, "--seed-phrase", "a"])
    assert code == EXIT_OK and len(bytes.fromhex(doc["public_key"])) == 32
    assert main(["identity", "register", "--registry", reg, "--id", "alice", "--org", "org-a", "--org-type",
                 "Transport", "--role", "Carrier", "--keystore", ks, "--assign", "S1"]) == EXIT_OK
    # the same key cannot be registered twice
    assert main(["identity", "register", "--registry", reg, "--id", "bob", "--org", "org-a", "--role", "Carrier",
                 "--public-key", doc["public_key"]]) == EXIT_CONFIG
    assert main(["identity", "revoke", "--registry", reg, "--id", "alice"]) == EXIT_OK
    code, ids = run_json(capsys, ["identity", "list", "--registry", reg])
    assert [(i["identity_id"], i["revoked"], i["assigned_shipments"]) for i in ids] == [("alice", True, ["S1"])]
    assert main(["identity", "revoke", "--registry", reg, "--id", "nobody"]) == EXIT_CONFIG


def test_bench_access_and_tamper(sim, demo_dir, tmp_path, capsys):
    assert main(["bench", "access", "--policy", str(demo_dir / "policy.json")]) == EXIT_OK
    pol = json.loads((demo_dir / "policy.json").read_text())
    pol["Auditor.Operational.Read"] = "allow"
    (tmp_path / "flip.json").write_text(json.dumps(pol))
    code, doc = run_json(capsys, ["bench", "access", "--policy", str(tmp_path / "flip.json")])
    assert code == EXIT_VERIFY and doc["rejection_rate"] < 1.0
    assert {(c["role"], c["layer"], c["action"]) for c in doc["offending"]} == {("Auditor", "Operational", "Read")}
    (tmp_path / "empty.json").write_text(json.dumps({"organizations": [], "identities": [], "nodes": []}))
    code, doc = run_json(capsys, ["bench", "access", "--policy", str(demo_dir / "policy.json"),
                                  "--registry", str(tmp_path / "empty.json")])
    assert code == EXIT_VERIFY and doc["vacuous"]
    code, doc = run_json(capsys, ["bench", "tamper", "--ledger", str(sim / "ledger.ndjson"), "-n", "30", "--seed", "7"])
    assert code == EXIT_OK and doc["detection_rate"] == 1.0 and doc["n"] == 30


def test_bench_run_and_report(tmp_path, capsys, monkeypatch):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"shipments": 2, "tx_rate": 4, "duration_ms": 10_000, "seed": 3}))
    monkeypatch.setenv("SNFTRACK_OUT", str(tmp_path / "root"))
    assert main(["bench", "run", "--spec", str(spec), "--tamper-n", "20", "--audit-trials", "300"]) == EXIT_OK
    out = tmp_path / "root" / "bench"
    for name in ("metrics.csv", "metrics.json", "latency_hist.png", "tps_timeline.png", "availability.png"):
        assert (out / name).exists(), name
    capsys.readouterr()
    assert main(["bench", "report", "--format", "csv"]) == EXIT_OK
    assert capsys.readouterr().out == (out / "metrics.csv").read_text()
    assert main(["bench", "report", "--format", "json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["committed_txs"] > 0
    spec.write_text(json.dumps({"tx_rate": -1}))
    assert main(["bench", "run", "--spec", str(spec)]) == EXIT_CONFIG


def test_telemetry_and_consensus_extras(demo_dir, tmp_path, capsys):
    code, doc = run_json(capsys, ["telemetry", "dump", "--scenario", str(demo_dir / "scenario_happy.json"),
                                  "--csv", str(tmp_path / "t.csv"), "--seed", "7"])
    assert code == EXIT_OK and doc["readings"] == len((tmp_path / "t.csv").read_text().splitlines()) - 1
    script = tmp_path / "faults.json"
    script.write_text(json.dumps([{"at_ms": 1500, "kind": "CrashNode", "node": "@leader"},
                                  {"at_ms": 4000, "kind": "RestartNode", "node": "@leader"}]))
    code, doc = run_json(capsys, ["consensus", "run", "--n", "3", "--script", str(script), "--txs", "40",
                                  "--seed", "2"])
    assert code == EXIT_OK and doc["audit_ok"] and doc["committed"] == 40
    assert main(["consensus", "run", "--n", "4"]) == EXIT_CONFIG
