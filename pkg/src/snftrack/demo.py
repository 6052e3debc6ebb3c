"""Bundled demo consortium, routes and configs (fictional data, deterministic keys)."""

from __future__ import annotations

import json
import shutil
from importlib import resources
from pathlib import Path

from .identity import OrgType, Registry, Role, Signer, keystore_json
from .layers import AccessPolicy
from .telemetry import EventKind, InjectedEvent, RouteScenario, SensorType, default_rules

SHIPMENT = "SHIP-001"

MEMBERS = [
    # org id, org type, identity id, role
    ("org-producer", OrgType.Producer, "consignor-1", Role.Consignor),
    ("org-haul-a", OrgType.Transport, "carrier-a", Role.Carrier),
    ("org-rail-b", OrgType.Transport, "carrier-b", Role.Carrier),
    ("org-receiver", OrgType.Receiver, "consignee-1", Role.Consignee),
    ("org-national-reg", OrgType.Regulator, "regulator-national", Role.RegulatorNational),
    ("org-regional-reg", OrgType.Regulator, "regulator-regional", Role.RegulatorRegional),
    ("org-intl-reg", OrgType.Regulator, "regulator-intl", Role.RegulatorInternational),
    ("org-emergency", OrgType.Emergency, "responder-1", Role.EmergencyResponder),
    ("org-audit", OrgType.Audit, "auditor-1", Role.Auditor),
    ("org-public", OrgType.Public, "observer-1", Role.PublicObserver),
    # a carrier that is not assigned to the demo shipment
    ("org-haul-c", OrgType.Transport, "carrier-c", Role.Carrier),
]
ASSIGNED = ["consignor-1", "carrier-a", "carrier-b", "consignee-1", "regulator-national"]
N_NODES = 5

WAYPOINTS = [
    (46.204391, 6.143158, 300_000),
    (46.519653, 6.632273, 1_800_000),
    (46.947975, 7.447447, 3_600_000),
    (47.376887, 8.541694, 5_700_000),
]


def demo_registry() -> tuple:
    reg = Registry()
    signers = []
    for org, otype, ident, role in MEMBERS:
        if org not in reg.organizations:
            reg.add_organization(org, org, otype)
        s = Signer.from_seed(ident, f"demo-identity:{ident}")
        reg.register_identity(org, role, s.public_key, identity_id=ident)
        signers.append(s)
    for ident in ASSIGNED:
        reg.assign(ident, SHIPMENT)
    for i in range(N_NODES):
        s = Signer.from_seed(f"n{i}", f"demo-node:{i}")
        reg.add_validator(s.identity_id, s.public_key)
        signers.append(s)
    return reg, signers


def demo_scenario(seal_break: bool = False) -> RouteScenario:
    events = [InjectedEvent(2_400_000, EventKind.ShockImpact, 31.5)]
    if seal_break:
        events.append(InjectedEvent(2_700_000, EventKind.SealBreak))
    return RouteScenario(
        shipment_id=SHIPMENT,
        waypoints=list(WAYPOINTS),
        baselines={SensorType.Radiation: (0.62, 0.03), SensorType.Temperature: (34.0, 0.4)},
        injected_events=events,
        gps_sigma_deg=2e-5,
        rfid_tag="RFID-CASK-0042",
    )


def demo_config(scenario_file: str) -> dict:
    return {
        "registry": "registry.json",
        "keystore": "keystore.json",
        "policy": "policy.json",
        "rules": "rules.json",
        "consensus": {"n": 3, "latency_ms": [5, 20], "drop_rate": 0.0, "heartbeat_ms": 1000,
                      "election_ms": [3000, 6000], "faults": []},
        "seeds": {"telemetry": 7, "consensus": 11, "salts": "demo-salts", "audit": 17},
        "batch_ms": 60_000,
        "window_ms": 60_000,
        "audit_k": 10,
        "radiation_limit": 2.0,
        "auditor": "auditor-1",
        "publisher": "regulator-national",
        "responders": ["responder-1"],
        "publish_delay_ms": 60_000,
        "public_sla_ms": 300_000,
        "shipments": [{
            "scenario": scenario_file,
            "consignor": "consignor-1",
            "carriers": ["carrier-a", "carrier-b"],
            "consignee": "consignee-1",
            "regulator": "regulator-national",
            "handovers_at_ms": [3_600_000],
            "scheduled_arrival_ms": 6_000_000,
            "archive": True,
            "clear_incident_after_ms": None,
        }],
    }


def bench_spec() -> dict:
    return {"shipments": 1, "tx_rate": 10, "duration_ms": 60_000, "cluster_size": 3, "seed": 1,
            "fault_script": [], "ledger_min_blocks": 100}


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_demo_bundle(directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    reg, signers = demo_registry()
    reg.save(d / "registry.json")
    _dump(d / "keystore.json", keystore_json(signers))
    AccessPolicy.default().save(d / "policy.json")
    _dump(d / "rules.json", [r.to_json() for r in default_rules(0.62)])
    _dump(d / "scenario_happy.json", demo_scenario().to_json())
    _dump(d / "scenario_sealbreak.json", demo_scenario(seal_break=True).to_json())
    _dump(d / "config.json", demo_config("scenario_happy.json"))
    _dump(d / "config_sealbreak.json", demo_config("scenario_sealbreak.json"))
    _dump(d / "bench_spec.json", bench_spec())
    return d


def bundled_demo_dir() -> Path:
    return Path(str(resources.files("snftrack") / "data" / "demo"))


def copy_demo(directory: str | Path) -> Path:
    d = Path(directory)
    shutil.copytree(bundled_demo_dir(), d, dirs_exist_ok=True)
    return d


if __name__ == "__main__":
    write_demo_bundle(bundled_demo_dir())
