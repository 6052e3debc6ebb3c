"""End-to-end acceptance checks, one test per criterion, each timed against its budget.

Run alone with ``pytest tests/test_acceptance.py -v -s`` or ``python -m tests.test_acceptance`` from the repository root.
"""

import itertools
import math
import sys
from fractions import Fraction

import pytest

from snftrack.bench import (
    MetricsReport,
    WorkloadSpec,
    access_battery,
    audit_soundness,
    availability,
    emit_report,
    run_bench,
    run_workload,
    supervisory_records,
    tamper_battery,
    trace_battery,
)
from snftrack.consensus import audit_trace, check_log_matching, random_scenario, run_scenario
from snftrack.demo import bundled_demo_dir, demo_registry
from snftrack.errors import IllegalTransition, WrongRole
from snftrack.identity import Registry, Role
from snftrack.layers import AccessPolicy, LayerTag, SideStores
from snftrack.ledger import LedgerStore
from snftrack.lifecycle import ShipmentEvent, ShipmentState, edge_list, validate_transition
from snftrack.query import query
from snftrack.simulate import simulate
from snftrack.verification import check_public

from .acceptance_log import criterion
from .conftest import World
from .leakscan import Secrets, findings, ledger_surfaces, side_store_secrets
from .test_lifecycle import DECLARED, Flow

BUNDLED_SPEC = bundled_demo_dir() / "bench_spec.json"


@pytest.fixture(scope="module")
def bench_workload():
    spec = WorkloadSpec.load(BUNDLED_SPEC)
    return run_workload(spec)


@pytest.fixture(scope="module")
def bench_cache():
    return {}


def test_c1_access_control():
    with criterion(1, "access control: unauthorized rejected 100%, authorized granted 100%", 10):
        reg = demo_registry()[0]
        res = access_battery(AccessPolicy.default(), reg, seed=0, n_random=1000)
        assert not res.vacuous
        assert res.grid_cases == 108 and res.random_cases == 1000
        assert res.deny_cases > 0 and res.allow_cases > 0
        assert res.rejection_rate == 1.0, res.offending[:5]
        assert res.grant_rate == 1.0, res.offending[:5]


def test_c2_tamper_detection(bench_workload):
    with criterion(2, "tamper evidence: 500 single-field mutations all detected", 30):
        text = bench_workload.ledger.dumps()
        assert len(bench_workload.ledger) >= 100
        res = tamper_battery(text, 500, 7, bench_workload.world.registry)
        assert res.n == 500 and res.detected + res.excluded == 500
        assert res.detection_rate == 1.0, res.undetected[:3]


def test_c3_public_traceability(bench_workload, happy_run):
    with criterion(3, "public trace: honest aggregates verify, 200 mutations rejected", 10):
        outcome, paths = happy_run
        demo_check = check_public(LedgerStore.load(paths["ledger"]), None)
        assert demo_check.status == "pass", demo_check.detail
        recs = supervisory_records(bench_workload.ledger)
        res = trace_battery(recs, bench_workload.spec.duration_ms, n_periods=6, n_mutations=200, seed=0)
        assert res.honest_total == 6 and res.verifiability_rate == 1.0
        assert res.mutations == 200 and res.mutation_detection_rate == 1.0, res.accepted_mutations[:3]


def test_c4_consensus_safety_and_liveness(bench_workload):
    with criterion(4, "consensus: 1000 random fault scenarios safe, f=1 of n=3 still commits", 300):
        bad = []
        for seed in range(1000):
            sc = random_scenario(3 if seed % 2 == 0 else 5, seed)
            r = run_scenario(sc)
            aud = audit_trace(r.trace)
            mismatch = check_log_matching(r.logs)
            if not aud.ok or mismatch:
                bad.append((seed, aud, mismatch[:2]))
        assert bad == [], bad[:3]
        avail = availability(bench_workload.spec, baseline=bench_workload)
        assert avail.fault_commits > 0 and avail.ratio > 0


def miss_probability(n, v, k):
    return Fraction(math.comb(n - v, k), math.comb(n, k))


def test_c5_audit_soundness():
    with criterion(5, "audit: detection within 0.02 of hypergeometric, exhaustive detects all", 60):
        res = audit_soundness(100, 5, 20, trials=10_000, seed=0)
        expected = 1 - float(miss_probability(100, 5, 20))
        # the oracle is independent of the module's own formula
        assert abs(res.expected_detection_rate - expected) < 1e-12
        assert abs(res.detection_rate - expected) <= 0.02
        assert res.exhaustive_detection_rate == 1.0


def test_c6_no_operational_leak(demo_dir, tmp_path):
    with criterion(6, "layer isolation: no operational data in shared ledger, reports or denied queries", 10):
        outcome, paths = simulate(demo_dir / "config.json", tmp_path)
        side = SideStores.load(paths["sidestores"])
        secrets = side_store_secrets(side)
        for plan in outcome.config.shipments:
            secrets.add_route(plan.scenario)
        assert secrets.blobs and secrets.numbers

        hits = []
        for where, data in ledger_surfaces(paths["ledger"]):
            hits += findings(data, secrets, where)
        reports = sorted((tmp_path / "reports").glob("*.csv"))
        assert reports
        for p in reports:
            hits += findings(p.read_bytes(), secrets, p.name)

        store = LedgerStore.load(paths["ledger"])
        reg, pol = Registry.load(paths["registry"]), AccessPolicy.load(paths["policy"])
        all_payloads = {a: p for st in side.stores.values() for a, (p, _) in st.items()}
        for ident in reg.identities.values():
            forbidden = Secrets()
            for anchor, payload in all_payloads.items():
                if anchor not in side.stores.get(ident.org_id, {}):
                    forbidden.add_payload(payload)
            for layer in LayerTag:
                out = query(store, reg, pol, side, ident.identity_id, layer, None).dumps().encode()
                hits += findings(out, forbidden, f"query {ident.identity_id}/{layer.value}")
        assert hits == [], hits[:5]

        # positive control: an output that does carry a payload must be flagged
        payload = next(iter(all_payloads.values()))
        assert findings(b"prefix " + payload + b" suffix", secrets, "control")


def test_c7_lifecycle_enforcement():
    with criterion(7, "lifecycle: transition table matches declaration, early transport rejected", 5):
        hits = 0
        for state, event, role in itertools.product(ShipmentState, ShipmentEvent, Role):
            want = DECLARED.get((state.value, event.value))
            if want is None:
                with pytest.raises(IllegalTransition):
                    validate_transition(state, event, role)
            elif role.value not in want[1]:
                with pytest.raises(WrongRole):
                    validate_transition(state, event, role)
            else:
                assert validate_transition(state, event, role).value == want[0]
                hits += 1
        assert hits == sum(len(r) for _, r in DECLARED.values())
        edges = {(e["from"], e["event"]): (e["to"], set(e["roles"])) for e in edge_list()}
        assert edges == DECLARED

        with pytest.raises(IllegalTransition):
            validate_transition(ShipmentState.PermitRequested, ShipmentEvent.StartTransport, Role.Carrier)
        f = Flow(World())
        assert f.request()
        res = f.status(f.s[Role.Carrier], "StartTransport")
        assert not res and "IllegalTransition" in res.reason
        assert f.engine.shipments["S1"].state is ShipmentState.PermitRequested


def test_c8_benchmark_report(bench_cache, tmp_path):
    with criterion(8, "benchmark: metrics report with consistent throughput and latency", 120):
        spec = WorkloadSpec.load(BUNDLED_SPEC)
        bench = run_bench(spec)
        m = bench.metrics
        assert m.tps > 0
        lat = m.latency_ms
        assert 0 <= lat["p50"] <= lat["p95"] <= lat["max"]
        assert m.committed_txs <= m.submitted_txs
        assert abs(m.tps * m.duration_ms / 1000 - m.committed_txs) < 1e-9
        assert m.invariant_violations() == []
        assert m.ledger_blocks >= spec.ledger_min_blocks
        files = emit_report(bench, tmp_path)
        csv_text = (tmp_path / "metrics.csv").read_text()
        assert csv_text.startswith("metric,value")
        assert MetricsReport.from_json(m.to_json()) == m
        assert all(p.exists() for p in files.values())
        bench_cache["first"] = (bench, tmp_path)


def test_c9_reproducibility(demo_dir, happy_run, bench_cache, tmp_path):
    with criterion(9, "reproducibility: same seed gives byte-identical ledger and reports", 120):
        _, first = happy_run
        for i in range(2):
            _, again = simulate(demo_dir / "config.json", tmp_path / f"sim{i}")
            assert again["ledger"].read_bytes() == first["ledger"].read_bytes()
            for name in ("aggregates_csv", "transitions_csv"):
                assert again[name].read_bytes() == first[name].read_bytes()

        if "first" not in bench_cache:
            b = run_bench(WorkloadSpec.load(BUNDLED_SPEC))
            emit_report(b, tmp_path / "b0", plots=False)
            bench_cache["first"] = (b, tmp_path / "b0")
        _, d0 = bench_cache["first"]
        b2 = run_bench(WorkloadSpec.load(BUNDLED_SPEC))
        emit_report(b2, tmp_path / "b1", plots=False)
        for name in ("ledger.ndjson", "metrics.csv", "metrics.json"):
            assert (tmp_path / "b1" / name).read_bytes() == (d0 / name).read_bytes(), name


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
