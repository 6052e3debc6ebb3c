"""End-to-end transport run: telemetry, contracts, consensus, ledger and reports."""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .attestation import (
    ComplianceClaim,
    Predicate,
    PublicAggregate,
    ReadingsHolder,
    aggregate_public,
    attest,
    audit_challenge,
    commit_batch,
    save_attestations,
    verify_public_trace,
    write_aggregates_csv,
)
from .consensus import NetworkParams, Raft, SimResult, fault_from_json, fault_to_json, node_ids, run_simulation
from .encoding import OPS, canonical, sha256
from .errors import ClaimFalse, ConfigError, TrackError
from .identity import Registry, Signer, load_keystore
from .layers import AccessPolicy, LayerTag, SideStores
from .ledger import LedgerStore, Transaction, TxType, commit_message, verify_chain
from .lifecycle import (
    ContractEngine,
    HandoverRecord,
    ShipmentState,
    canonical_json,
    edge_list,
    evaluate_alerts,
    record_handover,
)
from .telemetry import AlertRule, RouteScenario, SensorReading, SensorType, generate_readings, interpolate, load_rules, package_batch


@dataclass
class ShipmentPlan:
    scenario: RouteScenario
    consignor: str
    carriers: List[str]
    consignee: str
    regulator: str
    handovers_at_ms: List[int] = field(default_factory=list)
    scheduled_arrival_ms: Optional[int] = None
    archive: bool = True
    clear_incident_after_ms: Optional[int] = None


@dataclass
class SimulationConfig:
    registry: Registry
    keystore: Dict[str, Signer]
    policy: AccessPolicy
    rules: List[AlertRule]
    shipments: List[ShipmentPlan]
    cluster_size: int = 3
    latency_ms: Tuple[int, int] = (5, 20)
    drop_rate: float = 0.0
    heartbeat_ms: int = 1000
    election_ms: Tuple[int, int] = (3000, 6000)
    faults: List[Tuple[int, object]] = field(default_factory=list)
    telemetry_seed: int = 7
    consensus_seed: int = 11
    salt_seed: str = "demo-salts"
    audit_seed: int = 17
    audit_k: int = 10
    radiation_limit: float = 2.0
    batch_ms: int = 60_000
    window_ms: int = 60_000
    auditor: str = ""
    publisher: str = ""
    responders: List[str] = field(default_factory=list)
    publish_delay_ms: int = 60_000
    public_sla_ms: int = 300_000

    @classmethod
    def load(cls, path: str | Path) -> "SimulationConfig":
        path = Path(path)
        base = path.parent

        def need(doc, key, where):
            if key not in doc:
                raise ConfigError(f"{where}: missing field {key!r}")
            return doc[key]

        def read(rel, what, loader):
            p = base / rel
            if not p.exists():
                raise ConfigError(f"{path.name}: {what} file {rel!r} does not exist")
            try:
                return loader(p)
            except ConfigError:
                raise
            except (ValueError, KeyError, TypeError, TrackError) as exc:
                raise ConfigError(f"{rel}: cannot parse {what}: {exc}") from exc

        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {str(path)!r} does not exist") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path.name}: invalid JSON: {exc}") from exc
        where = path.name
        cons = doc.get("consensus", {})
        n = cons.get("n", 3)
        if not isinstance(n, int) or n < 3 or n % 2 == 0:
            raise ConfigError(f"{where}: consensus.n must be an odd integer >= 3, got {n!r}")
        cfg = cls(
            registry=read(need(doc, "registry", where), "registry", Registry.load),
            keystore=read(need(doc, "keystore", where), "keystore", load_keystore),
            policy=read(need(doc, "policy", where), "policy", AccessPolicy.load),
            rules=read(need(doc, "rules", where), "alert rule", load_rules),
            shipments=[],
            cluster_size=n,
            latency_ms=tuple(cons.get("latency_ms", (5, 20))),
            drop_rate=float(cons.get("drop_rate", 0.0)),
            heartbeat_ms=int(cons.get("heartbeat_ms", 1000)),
            election_ms=tuple(cons.get("election_ms", (3000, 6000))),
        )
        try:
            cfg.faults = [(int(f["at_ms"]), fault_from_json(f)) for f in cons.get("faults", [])]
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{where}: consensus.faults: {exc}") from exc
        seeds = doc.get("seeds", {})
        cfg.telemetry_seed = int(seeds.get("telemetry", cfg.telemetry_seed))
        cfg.consensus_seed = int(seeds.get("consensus", cfg.consensus_seed))
        cfg.salt_seed = str(seeds.get("salts", cfg.salt_seed))
        cfg.audit_seed = int(seeds.get("audit", cfg.audit_seed))
        for key in ("audit_k", "batch_ms", "window_ms", "publish_delay_ms", "public_sla_ms"):
            if key in doc:
                setattr(cfg, key, int(doc[key]))
        if "radiation_limit" in doc:
            cfg.radiation_limit = float(doc["radiation_limit"])
        cfg.auditor = need(doc, "auditor", where)
        cfg.publisher = need(doc, "publisher", where)
        cfg.responders = list(doc.get("responders", []))
        for i, s in enumerate(need(doc, "shipments", where)):
            w = f"{where}: shipments[{i}]"
            scenario = read(need(s, "scenario", w), "scenario", RouteScenario.load)
            cfg.shipments.append(ShipmentPlan(
                scenario=scenario,
                consignor=need(s, "consignor", w),
                carriers=list(need(s, "carriers", w)),
                consignee=need(s, "consignee", w),
                regulator=need(s, "regulator", w),
                handovers_at_ms=[int(t) for t in s.get("handovers_at_ms", [])],
                scheduled_arrival_ms=s.get("scheduled_arrival_ms"),
                archive=bool(s.get("archive", True)),
                clear_incident_after_ms=s.get("clear_incident_after_ms"),
            ))
        cfg.validate(where)
        return cfg

    def validate(self, where: str = "config") -> None:
        if self.cluster_size < 3 or self.cluster_size % 2 == 0:
            raise ConfigError(f"{where}: consensus.n must be an odd integer >= 3")
        ids = set(self.registry.identities)
        for nid in node_ids(self.cluster_size):
            if nid not in self.registry.validators:
                raise ConfigError(f"{where}: registry has no validator key for node {nid}")
            if nid not in self.keystore:
                raise ConfigError(f"{where}: keystore has no key for node {nid}")
        named = [self.auditor, self.publisher, *self.responders]
        for i, s in enumerate(self.shipments):
            named += [s.consignor, s.consignee, s.regulator, *s.carriers]
            if len(s.handovers_at_ms) != len(s.carriers) - 1:
                raise ConfigError(f"{where}: shipments[{i}] needs one handover time per carrier change")
            if s.scenario.start_ms < 120_000:
                raise ConfigError(f"{where}: shipments[{i}] route must start at or after 120000 ms")
        for ident in named:
            if ident not in ids:
                raise ConfigError(f"{where}: unknown identity {ident!r}")
            if ident not in self.keystore:
                raise ConfigError(f"{where}: keystore has no key for {ident!r}")


def derive_salt(seed: str, *parts) -> bytes:
    return sha256(b"salt:" + canonical([seed, *[str(p) for p in parts]]))


@dataclass
class SimulationOutcome:
    config: SimulationConfig
    txs: List[Transaction]
    consensus: SimResult
    ledger: LedgerStore
    side_stores: SideStores
    endorser: ContractEngine
    replay: ContractEngine
    readings: Dict[str, List[SensorReading]]
    attestations: list
    aggregate: Optional[PublicAggregate]
    aggregate_tx: Optional[str]
    notes: List[dict]
    registry: Registry

    def summary(self) -> dict:
        store, cfg = self.ledger, self.config
        check = verify_chain(store, store.validators, store.quorum)
        committed = {t.tx_id.hex() for _, t in store.transactions()}
        lat = sorted(self.consensus.commit_ms[t] - self.consensus.submit_ms[t]
                     for t in self.consensus.commit_ms if t in committed)
        agg_commit = self.consensus.commit_ms.get(self.aggregate_tx) if self.aggregate_tx else None
        release = None if agg_commit is None or self.aggregate is None else agg_commit - self.aggregate.period[1]
        return {
            "shipments": {
                sid: {
                    "state": s.state.value,
                    "reached": sorted({t["to"] for t in self.replay.transitions if t["shipment_id"] == sid}),
                    "carrier": s.carrier,
                    "open_alerts": sorted(s.open_alerts),
                }
                for sid, s in sorted(self.replay.shipments.items())
            },
            "transitions": self.replay.transitions,
            "alerts": [o for o in self.replay.outbox],
            "submitted_txs": len(self.txs),
            "committed_txs": len(committed),
            "blocks": len(store),
            "rejections": [{"tx_id": r.tx_id, "reason": r.reason} for r in self.replay.results if not r.accepted],
            "endorsement_matches_replay": _states(self.endorser) == _states(self.replay),
            "missing_alerts": self.replay.missing_alerts(),
            "chain": {"ok": check.ok, "height": check.height, "reason": check.reason},
            "public_aggregate": self.aggregate.to_json() if self.aggregate else None,
            "public_trace_ok": bool(self.aggregate and verify_public_trace(self.aggregate, self.replay.records)),
            "public_release_delay_ms": release,
            "public_release_within_sla": release is not None and release <= cfg.public_sla_ms,
            "attestations": len(self.attestations),
            "notes": self.notes,
            "latency_ms": {"p50": _pct(lat, 50), "p95": _pct(lat, 95), "max": lat[-1] if lat else 0},
            "ops": dict(sorted(OPS.items())),
        }


def _pct(xs: Sequence[int], p: int) -> int:
    if not xs:
        return 0
    k = max(0, min(len(xs) - 1, -(-p * len(xs) // 100) - 1))
    return xs[k]


def _states(engine: ContractEngine) -> dict:
    return {sid: (s.state.value, s.carrier) for sid, s in engine.shipments.items()}


class _Pipeline:
    """Builds the transaction stream in simulated-time order while endorsing each tx."""

    def __init__(self, cfg: SimulationConfig):
        self.cfg = cfg
        self.registry = Registry.from_json(cfg.registry.to_json())
        self.side = SideStores()
        self.engine = ContractEngine(self.registry, cfg.policy, self.side, None, cfg.rules,
                                     cfg.window_ms, cfg.responders)
        self.queue: List[Tuple[int, int, int, Callable[[int], None]]] = []
        self.order = 0
        self.nonce = 0
        self.txs: List[Transaction] = []
        self.notes: List[dict] = []
        self.readings: Dict[str, List[SensorReading]] = {}
        self.attestations = []
        self.aggregate: Optional[PublicAggregate] = None
        self.aggregate_tx: Optional[str] = None
        self.permit_tx: Dict[str, str] = {}
        self.plans: Dict[str, ShipmentPlan] = {}
        self.gateway_seen: Dict[str, set] = {}

    def at(self, t: int, prio: int, fn: Callable[[int], None]) -> None:
        self.order += 1
        heapq.heappush(self.queue, (t, prio, self.order, fn))

    def signer(self, ident: str) -> Signer:
        return self.cfg.keystore[ident]

    def submit(self, tx: Transaction) -> bool:
        res = self.engine.apply(tx)
        if not res.accepted:
            self.notes.append({"t_ms": tx.sim_time_ms, "note": "endorsement refused", "tx_type": tx.tx_type.value,
                               "reason": res.reason})
            return False
        self.txs.append(tx)
        if res.transition == ("InTransit", "Incident"):
            plan = self.plans[tx.shipment_id]
            if plan.clear_incident_after_ms is not None:
                self.at(tx.sim_time_ms + int(plan.clear_incident_after_ms), 0,
                        lambda t, sid=tx.shipment_id: self.clear_incident(sid, t))
        return True

    def make(self, ident: str, tx_type: TxType, t: int, layer: LayerTag, body, sid: str) -> Transaction:
        self.nonce += 1
        if isinstance(body, dict):
            body = canonical_json(body)
        return Transaction.create(self.signer(ident), tx_type, t, layer, body, sid, self.nonce)

    def orgs(self, *idents: str) -> List[str]:
        return sorted({self.registry.get(i).org_id for i in idents})

    def state(self, sid: str) -> Optional[ShipmentState]:
        s = self.engine.shipments.get(sid)
        return s.state if s else None

    def skip(self, t: int, sid: str, what: str) -> None:
        self.notes.append({"t_ms": t, "shipment_id": sid, "note": f"{what} skipped in state "
                           f"{self.state(sid).value if self.state(sid) else 'None'}"})

    # -- per shipment steps -------------------------------------------------

    def schedule(self, plan: ShipmentPlan) -> None:
        sc = plan.scenario
        sid = sc.shipment_id
        start, end = sc.start_ms, sc.end_ms
        readings = generate_readings(sc, self.cfg.telemetry_seed)
        self.readings[sid] = readings
        self.at(start - 120_000, 0, lambda t: self.request_permit(plan, t))
        self.at(start - 60_000, 0, lambda t: self.approve(plan, t))
        self.at(start, 0, lambda t: self.start_transport(plan, t))
        b = self.cfg.batch_ms
        edges = list(range(start, end + 1, b)) + [end + 1]
        if len(edges) > 2 and edges[-1] - edges[-2] < b // 2:
            del edges[-2]  # fold a sliver of a last window into the previous one
        for w0, w1 in zip(edges, edges[1:]):
            chunk = [r for r in readings if w0 <= r.sim_time_ms < w1]
            if chunk:
                self.at(w1, 1, lambda t, chunk=chunk: self.sensor_batch(plan, chunk, t))
        for j, h in enumerate(plan.handovers_at_ms):
            self.at(h, 2, lambda t, j=j: self.begin_handover(plan, plan.carriers[j + 1], t))
            self.at(h + 30_000, 2, lambda t, j=j: self.complete_handover(plan, plan.carriers[j + 1], t))
        self.at(end + 1, 2, lambda t: self.begin_handover(plan, plan.consignee, t))
        self.at(end + 30_000, 2, lambda t: self.complete_handover(plan, plan.consignee, t))
        self.at(end + 45_000, 3, lambda t: self.attest_shipment(plan, t))
        if plan.archive:
            self.at(end + 60_000, 3, lambda t: self.archive(plan, plan.consignor, t))
            self.at(end + 90_000, 3, lambda t: self.archive(plan, plan.regulator, t))

    def request_permit(self, plan: ShipmentPlan, t: int) -> None:
        sc = plan.scenario
        route = {"shipment_id": sc.shipment_id, "waypoints": [list(w) for w in sc.waypoints],
                 "scheduled_arrival_ms": plan.scheduled_arrival_ms}
        parties = [plan.consignor, *plan.carriers, plan.consignee, plan.regulator]
        anchor = self.side.put_private(canonical_json(route), derive_salt(self.cfg.salt_seed, "route", sc.shipment_id),
                                       self.orgs(*parties), collection_id=f"route/{sc.shipment_id}")
        self.submit(self.make(plan.consignor, TxType.PermitRequest, t, LayerTag.Supervisory, {
            "event": "RequestPermit", "shipment_id": sc.shipment_id, "consignor": plan.consignor,
            "carrier": plan.carriers[0], "consignee": plan.consignee, "regulator": plan.regulator,
            "route_anchor": anchor.to_json()}, sc.shipment_id))
        self.permit_tx[sc.shipment_id] = self.txs[-1].tx_id.hex()

    def approve(self, plan: ShipmentPlan, t: int) -> None:
        sid = plan.scenario.shipment_id
        if self.state(sid) is not ShipmentState.PermitRequested:
            return self.skip(t, sid, "permit approval")
        self.submit(self.make(plan.regulator, TxType.PermitApproval, t, LayerTag.Supervisory, {
            "event": "ApprovePermit", "shipment_id": sid, "permit_tx": self.permit_tx[sid]}, sid))

    def start_transport(self, plan: ShipmentPlan, t: int) -> None:
        sid = plan.scenario.shipment_id
        if self.state(sid) is not ShipmentState.Approved:
            return self.skip(t, sid, "transport start")
        self.submit(self.make(plan.carriers[0], TxType.StatusUpdate, t, LayerTag.Supervisory,
                              {"event": "StartTransport", "shipment_id": sid}, sid))

    def sensor_batch(self, plan: ShipmentPlan, chunk: List[SensorReading], t: int) -> None:
        sid = plan.scenario.shipment_id
        ship = self.engine.shipments.get(sid)
        if ship is None or ship.state not in (ShipmentState.InTransit, ShipmentState.Incident,
                                              ShipmentState.HandoverPending):
            return self.skip(t, sid, "sensor batch")
        carrier = ship.carrier
        telemetry_orgs = self.orgs(*plan.carriers, plan.regulator, plan.consignor)
        self.nonce += 1
        tx = package_batch(chunk, self.registry.get(carrier), self.signer(carrier), self.side, telemetry_orgs,
                           derive_salt(self.cfg.salt_seed, "batch", sid, t), t, nonce=self.nonce)
        if not self.submit(tx):
            return
        seen = self.gateway_seen.setdefault(sid, set())
        alerts = evaluate_alerts(chunk, self.cfg.rules, ship, self.signer(carrier), tx.body.anchor, t,
                                 self.cfg.window_ms, seen, nonce=self.nonce + 1)
        self.nonce += len(alerts)
        for a in alerts:
            self.submit(a)

    def begin_handover(self, plan: ShipmentPlan, to: str, t: int) -> None:
        sid = plan.scenario.shipment_id
        ship = self.engine.shipments.get(sid)
        if ship is None or ship.state is not ShipmentState.InTransit:
            return self.skip(t, sid, f"handover to {to}")
        lat, lon = interpolate(plan.scenario.waypoints, min(t, plan.scenario.end_ms))
        details = {"shipment_id": sid, "from": ship.carrier, "to": to, "t_ms": t,
                   "location": [round(lat, 6), round(lon, 6)]}
        anchor = self.side.put_private(canonical_json(details), derive_salt(self.cfg.salt_seed, "handover", sid, t),
                                       self.orgs(ship.carrier, to, plan.regulator), collection_id=f"handover/{sid}")
        self.submit(self.make(ship.carrier, TxType.StatusUpdate, t, LayerTag.Supervisory, {
            "event": "BeginHandover", "shipment_id": sid, "to": to, "details_anchor": anchor.to_json()}, sid))

    def complete_handover(self, plan: ShipmentPlan, to: str, t: int) -> None:
        sid = plan.scenario.shipment_id
        ship = self.engine.shipments.get(sid)
        pending = self.engine.handovers.get(sid)
        if ship is None or ship.state is not ShipmentState.HandoverPending or pending is None or pending.to_id != to:
            return self.skip(t, sid, f"handover confirmation by {to}")
        rec = HandoverRecord(sid, pending.from_id, pending.to_id, pending.details_anchor)
        rec, _ = record_handover(rec, self.signer(rec.from_id).sign(rec.message()), ship, self.registry, t)
        on_time = None
        if to == plan.consignee and plan.scheduled_arrival_ms is not None:
            on_time = t <= int(plan.scheduled_arrival_ms)
        self.nonce += 1
        rec, tx = record_handover(rec, self.signer(to).sign(rec.message()), ship, self.registry, t,
                                  submitter=self.signer(to), on_time=on_time, nonce=self.nonce)
        self.submit(tx)

    def clear_incident(self, sid: str, t: int) -> None:
        if self.state(sid) is not ShipmentState.Incident:
            return self.skip(t, sid, "incident clearance")
        plan = self.plans[sid]
        self.submit(self.make(plan.regulator, TxType.StatusUpdate, t, LayerTag.Supervisory,
                              {"event": "ClearIncident", "shipment_id": sid}, sid))

    def attest_shipment(self, plan: ShipmentPlan, t: int) -> None:
        sc = plan.scenario
        sid = sc.shipment_id
        # The regulator attests from the telemetry it holds; the auditor picks the challenge.
        held = self.held_readings(sid, self.registry.get(plan.regulator).org_id)
        period = (sc.start_ms, sc.end_ms + 1)
        claims = [
            ComplianceClaim(sid, period, Predicate.max_below(SensorType.Radiation, self.cfg.radiation_limit)),
            ComplianceClaim(sid, period, Predicate.all_seal_intact()),
        ]
        for i, claim in enumerate(claims):
            rs = [r for r in held if r.sensor is claim.predicate.sensor and claim.in_scope(r)]
            if not rs:
                continue
            salt_seed = derive_salt(self.cfg.salt_seed, "commit", sid, i)
            commitment = commit_batch(rs, salt_seed)
            try:
                att = attest(claim, rs, commitment, self.registry.get(plan.regulator), self.signer(plan.regulator),
                             salt_seed)
            except ClaimFalse:
                self.notes.append({"t_ms": t, "shipment_id": sid, "note": "claim not attested",
                                   "predicate": claim.predicate.kind.value})
                continue
            challenge = int.from_bytes(derive_salt(str(self.cfg.audit_seed), "challenge", sid, i)[:8], "big")
            audit_challenge(att, ReadingsHolder(rs, salt_seed), min(self.cfg.audit_k, len(rs)), challenge)
            self.attestations.append(att)
            self.submit(self.make(plan.regulator, TxType.Attestation, t + i, LayerTag.Supervisory,
                                  att.ledger_body(), sid))

    def held_readings(self, sid: str, org: str) -> List[SensorReading]:
        from .telemetry import parse_batch

        out = []
        for tx in self.txs:
            if tx.tx_type is TxType.SensorBatch and tx.shipment_id == sid:
                payload, _ = self.side.get(org, tx.body.anchor)
                out.extend(parse_batch(payload)[1])
        return out

    def archive(self, plan: ShipmentPlan, who: str, t: int) -> None:
        sid = plan.scenario.shipment_id
        if self.state(sid) is not ShipmentState.Delivered:
            return self.skip(t, sid, f"archive sign-off by {who}")
        self.submit(self.make(who, TxType.StatusUpdate, t, LayerTag.Supervisory,
                              {"event": "Archive", "shipment_id": sid}, sid))

    def publish(self, period: Tuple[int, int], t: int) -> None:
        agg = aggregate_public(period, self.engine.records, now_ms=t)
        tx = self.make(self.cfg.publisher, TxType.PublicAggregate, t, LayerTag.Public, agg.body(), "")
        if self.submit(tx):
            self.aggregate, self.aggregate_tx = agg, tx.tx_id.hex()

    def run(self) -> None:
        self.plans = {p.scenario.shipment_id: p for p in self.cfg.shipments}
        for plan in self.cfg.shipments:
            self.schedule(plan)
        last = max((p.scenario.end_ms for p in self.cfg.shipments), default=0) + 120_000
        close = -(-last // 60_000) * 60_000
        self.at(close + self.cfg.publish_delay_ms, 9, lambda t: self.publish((0, close), t))
        while self.queue:
            t, _, _, fn = heapq.heappop(self.queue)
            fn(t)


def build_ledger(txs: Sequence[Transaction], result: SimResult, registry: Registry,
                 node_signers: Dict[str, Signer]) -> LedgerStore:
    """One block per committed log entry, signed by the nodes that acknowledged it."""
    by_id = {t.tx_id.hex(): t for t in txs}
    validators = {n: registry.validators[n] for n in node_signers}
    store = LedgerStore(validators, authenticator=registry.authenticate)
    seen = set()
    for c in result.committed:
        block_txs = []
        for tid in c.entry.batch:
            if tid in by_id and tid not in seen:
                seen.add(tid)
                block_txs.append(by_id[tid])
        if not block_txs:
            continue
        block = store.build_block(block_txs, c.entry.leader, c.commit_ms)
        sigs = [node_signers[n].sign(commit_message(block.hash)) for n in c.acks]
        store.append_block(block_txs, c.entry.leader, sigs, c.commit_ms)
    return store


def run_pipeline(cfg: SimulationConfig) -> SimulationOutcome:
    OPS.clear()
    pipe = _Pipeline(cfg)
    pipe.run()
    txs = pipe.txs
    # Txs created at the same instant travel in one client request so their order holds.
    workload: List[Tuple[int, Tuple[str, ...]]] = []
    for tx in txs:
        if workload and workload[-1][0] == tx.sim_time_ms:
            workload[-1] = (tx.sim_time_ms, workload[-1][1] + (tx.tx_id.hex(),))
        else:
            workload.append((tx.sim_time_ms, (tx.tx_id.hex(),)))
    raft = Raft(cfg.cluster_size, heartbeat_ms=cfg.heartbeat_ms)
    params = NetworkParams(latency_ms=tuple(cfg.latency_ms), drop_rate=cfg.drop_rate,
                           election_ms=tuple(cfg.election_ms), client_retry_ms=max(1000, cfg.election_ms[1]))
    until = max([t for t, _ in workload] + [t for t, _ in cfg.faults] + [0]) + 60_000
    result = run_simulation(cfg.cluster_size, cfg.faults, workload, cfg.consensus_seed, until_ms=until,
                            params=params, raft=raft)
    nodes = {n: cfg.keystore[n] for n in node_ids(cfg.cluster_size)}
    ledger_registry = Registry.from_json(cfg.registry.to_json())
    store = build_ledger(txs, result, ledger_registry, nodes)
    # Contracts replay in committed order on a fresh copy of the registry.
    replay_registry = Registry.from_json(cfg.registry.to_json())
    replay = ContractEngine(replay_registry, cfg.policy, pipe.side, None, cfg.rules, cfg.window_ms, cfg.responders)
    for _, tx in store.transactions():
        replay.apply(tx)
    return SimulationOutcome(cfg, txs, result, store, pipe.side, pipe.engine, replay, pipe.readings,
                             pipe.attestations, pipe.aggregate, pipe.aggregate_tx, pipe.notes, replay_registry)


def _ndjson(rows) -> str:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in rows)


def write_validators(store: LedgerStore, path: str | Path) -> None:
    doc = {"quorum": store.quorum, "nodes": {n: k.hex() for n, k in sorted(store.validators.items())}}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_validators(path: str | Path) -> Tuple[Dict[str, bytes], int]:
    doc = json.loads(Path(path).read_text())
    return {n: bytes.fromhex(k) for n, k in doc["nodes"].items()}, int(doc["quorum"])


def write_artifacts(out: SimulationOutcome, out_dir: str | Path) -> Dict[str, Path]:
    d = Path(out_dir)
    (d / "reports").mkdir(parents=True, exist_ok=True)
    paths = {
        "ledger": d / "ledger.ndjson",
        "trace": d / "trace.ndjson",
        "sidestores": d / "sidestores",
        "attestations": d / "attestations.json",
        "outbox": d / "outbox.ndjson",
        "registry": d / "registry.json",
        "policy": d / "policy.json",
        "validators": d / "validators.json",
        "records": d / "supervisory_records.json",
        "edges": d / "edges.json",
        "aggregates_csv": d / "reports" / "public_aggregates.csv",
        "transitions_csv": d / "reports" / "transitions.csv",
        "summary": d / "summary.json",
    }
    out.ledger.save(paths["ledger"])
    paths["trace"].write_text(out.consensus.trace_ndjson())
    out.side_stores.save(paths["sidestores"])
    save_attestations(out.attestations, paths["attestations"])
    paths["outbox"].write_text(_ndjson(out.replay.outbox))
    out.registry.save(paths["registry"])
    out.config.policy.save(paths["policy"])
    write_validators(out.ledger, paths["validators"])
    paths["records"].write_text(json.dumps(out.replay.records, indent=1, sort_keys=True) + "\n")
    paths["edges"].write_text(json.dumps(edge_list(), indent=2) + "\n")
    write_aggregates_csv([out.aggregate] if out.aggregate else [], paths["aggregates_csv"])
    with open(paths["transitions_csv"], "w") as fh:
        fh.write("t_ms,shipment_id,event,from,to\n")
        for t in out.replay.transitions:
            fh.write(f"{t['t_ms']},{t['shipment_id']},{t['event']},{t['from']},{t['to']}\n")
    paths["summary"].write_text(json.dumps(out.summary(), indent=2, sort_keys=True) + "\n")
    return paths


def simulate(config_path: str | Path, out_dir: str | Path) -> Tuple[SimulationOutcome, Dict[str, Path]]:
    cfg = SimulationConfig.load(config_path)
    outcome = run_pipeline(cfg)
    return outcome, write_artifacts(outcome, out_dir)
