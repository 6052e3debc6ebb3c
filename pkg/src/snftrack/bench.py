"""Benchmark harness: workload generation, indicator measurement and report emission."""

from __future__ import annotations

import csv
import io
import json
import math
import random
import resource
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .attestation import (
    ComplianceAttestation,
    ComplianceClaim,
    Predicate,
    PublicAggregate,
    ReadingsHolder,
    SupervisoryRecord,
    aggregate_public,
    attestation_message,
    audit_challenge,
    commit_batch,
    verify_public_trace,
)
from .consensus import LEADER_ALIAS, CrashNode, NetworkParams, Raft, RestartNode, SimResult, fault_from_json, node_ids, run_simulation
from .encoding import OPS
from .errors import AuditFailure, InvalidSpec, TrackError
from .identity import Identity, OrgType, Registry, Role, Signer
from .layers import AccessPolicy, Action, LayerTag, SideStores, check_access
from .ledger import LedgerStore, Transaction, TxType, commit_message, verify_chain
from .telemetry import SensorReading, SensorType

# -- workload ----------------------------------------------------------------


@dataclass
class WorkloadSpec:
    shipments: int = 1
    tx_rate: float = 10.0
    duration_ms: int = 60_000
    cluster_size: int = 3
    seed: int = 1
    fault_script: List[dict] = field(default_factory=list)
    latency_ms: Tuple[int, int] = (5, 20)
    ledger_min_blocks: int = 0
    # share of supervisory txs in the mix; the rest are anchored sensor batches
    alert_share: float = 0.12
    delivery_share: float = 0.03

    def __post_init__(self):
        self.latency_ms = tuple(self.latency_ms)
        problems = []
        if self.shipments < 1:
            problems.append("shipments must be >= 1")
        if not self.tx_rate > 0:
            problems.append("tx_rate must be > 0")
        if self.duration_ms < 0:
            problems.append("duration_ms must be >= 0")
        if self.cluster_size < 3 or self.cluster_size % 2 == 0:
            problems.append("cluster_size must be odd and >= 3")
        if not 0 <= self.alert_share + self.delivery_share <= 1:
            problems.append("tx mix shares must sum to at most 1")
        try:
            self.faults = [(int(d["at_ms"]), fault_from_json(d)) for d in self.fault_script]
        except (KeyError, ValueError, TypeError) as exc:
            problems.append(f"fault_script: {exc}")
        if problems:
            raise InvalidSpec("; ".join(problems))

    @classmethod
    def from_json(cls, d: Mapping) -> "WorkloadSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise InvalidSpec(f"unknown spec fields: {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidSpec(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "WorkloadSpec":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise InvalidSpec(f"{path}: {exc}") from exc
        return cls.from_json(doc)

    def to_json(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["latency_ms"] = list(self.latency_ms)
        return d


@dataclass
class BenchWorld:
    registry: Registry
    signers: Dict[str, Signer]
    carriers: List[str]
    regulator: str
    nodes: List[str]


def bench_world(spec: WorkloadSpec) -> BenchWorld:
    reg = Registry()
    signers: Dict[str, Signer] = {}
    carriers = []
    for i in range(spec.shipments):
        org, ident = f"bench-haul-{i}", f"bench-carrier-{i}"
        reg.add_organization(org, org, OrgType.Transport)
        s = Signer.from_seed(ident, f"bench:{spec.seed}:{ident}")
        reg.register_identity(org, Role.Carrier, s.public_key, identity_id=ident)
        reg.assign(ident, f"BENCH-{i:03d}")
        signers[ident] = s
        carriers.append(ident)
    reg.add_organization("bench-reg", "bench-reg", OrgType.Regulator)
    s = Signer.from_seed("bench-regulator", f"bench:{spec.seed}:regulator")
    reg.register_identity("bench-reg", Role.RegulatorNational, s.public_key, identity_id="bench-regulator")
    signers["bench-regulator"] = s
    nodes = node_ids(spec.cluster_size)
    for n in nodes:
        s = Signer.from_seed(n, f"bench:{spec.seed}:node:{n}")
        reg.add_validator(n, s.public_key)
        signers[n] = s
    return BenchWorld(reg, signers, carriers, "bench-regulator", nodes)


def _workload_txs(spec: WorkloadSpec, world: BenchWorld, side: SideStores) -> List[Transaction]:
    rng = random.Random(f"workload:{spec.seed}")
    count = int(spec.tx_rate * spec.duration_ms / 1000)
    txs = []
    for i in range(count):
        t = int(i * 1000 / spec.tx_rate)
        k = i % spec.shipments
        carrier = world.carriers[k]
        sid = f"BENCH-{k:03d}"
        roll = rng.random()
        signer = world.signers[carrier]
        if roll < spec.alert_share:
            doc = {"kind": "alert", "severity": rng.choice(["Info", "Warning", "Critical"])}
            tx = Transaction.create(signer, TxType.Alert, t, LayerTag.Supervisory,
                                    json.dumps(doc, sort_keys=True).encode(), sid, nonce=i)
        elif roll < spec.alert_share + spec.delivery_share:
            doc = {"kind": "delivery", "on_time": rng.random() < 0.8}
            tx = Transaction.create(signer, TxType.Delivery, t, LayerTag.Supervisory,
                                    json.dumps(doc, sort_keys=True).encode(), sid, nonce=i)
        else:
            payload = rng.randbytes(96)
            anchor = side.put_private(payload, rng.randbytes(16), [f"bench-haul-{k}"], "bench")
            tx = Transaction.create(signer, TxType.SensorBatch, t, LayerTag.Operational, anchor, sid, nonce=i)
        txs.append(tx)
    return txs


@dataclass
class WorkloadRun:
    spec: WorkloadSpec
    world: BenchWorld
    txs: List[Transaction]
    consensus: SimResult
    ledger: LedgerStore
    side: SideStores
    submit_ms: Dict[str, int]
    commit_ms: Dict[str, int]

    @property
    def committed_ids(self) -> List[str]:
        return [tx.tx_id.hex() for _, tx in self.ledger.transactions()]

    def latencies(self) -> List[int]:
        return [self.commit_ms[t] - self.submit_ms[t] for t in self.committed_ids]

    def event_log(self) -> List[dict]:
        rows = []
        for tx in self.txs:
            tid = tx.tx_id.hex()
            rows.append({"tx_id": tid, "tx_type": tx.tx_type.value, "submit_ms": self.submit_ms.get(tid),
                         "commit_ms": self.commit_ms.get(tid)})
        return rows


def _build_store(txs: Sequence[Transaction], result: SimResult, world: BenchWorld, until_ms: int) -> Tuple[LedgerStore, Dict[str, int]]:
    by_id = {t.tx_id.hex(): t for t in txs}
    store = LedgerStore({n: world.registry.validators[n] for n in world.nodes}, authenticator=world.registry.authenticate)
    commit_ms: Dict[str, int] = {}
    for c in result.committed:
        if c.commit_ms > until_ms:
            continue
        block_txs = [by_id[t] for t in c.entry.batch if t in by_id and t not in commit_ms]
        if not block_txs:
            continue
        for t in block_txs:
            commit_ms[t.tx_id.hex()] = c.commit_ms
        block = store.build_block(block_txs, c.entry.leader, c.commit_ms)
        sigs = [world.signers[n].sign(commit_message(block.hash)) for n in c.acks]
        store.append_block(block_txs, c.entry.leader, sigs, c.commit_ms)
    return store, commit_ms


def run_workload(spec: WorkloadSpec, faults: Optional[Sequence[Tuple[int, object]]] = None) -> WorkloadRun:
    """Drive the seeded workload through consensus; commits after ``duration_ms`` are out of scope."""
    world = bench_world(spec)
    side = SideStores()
    txs = _workload_txs(spec, world, side)
    workload: List[Tuple[int, Tuple[str, ...]]] = []
    for tx in txs:
        if workload and workload[-1][0] == tx.sim_time_ms:
            workload[-1] = (tx.sim_time_ms, workload[-1][1] + (tx.tx_id.hex(),))
        else:
            workload.append((tx.sim_time_ms, (tx.tx_id.hex(),)))
    params = NetworkParams(latency_ms=spec.latency_ms)
    script = list(spec.faults if faults is None else faults)
    result = run_simulation(spec.cluster_size, script, workload, spec.seed, until_ms=spec.duration_ms,
                            params=params, raft=Raft(spec.cluster_size))
    store, commit_ms = _build_store(txs, result, world, spec.duration_ms)
    submit_ms = {t.tx_id.hex(): t.sim_time_ms for t in txs}
    return WorkloadRun(spec, world, txs, result, store, side, submit_ms, commit_ms)


def percentile(sorted_values: Sequence[int], q: float) -> int:
    """Nearest-rank percentile."""
    if not sorted_values:
        return 0
    rank = max(1, math.ceil(q * len(sorted_values)))
    return sorted_values[rank - 1]


def tps_timeline(run: WorkloadRun) -> List[int]:
    buckets = [0] * max(1, math.ceil(run.spec.duration_ms / 1000))
    for t in run.committed_ids:
        buckets[min(len(buckets) - 1, run.commit_ms[t] // 1000)] += 1
    return buckets


# -- availability ------------------------------------------------------------


def default_fault(spec: WorkloadSpec) -> List[Tuple[int, object]]:
    """One leader crash over the middle third of the run."""
    third = spec.duration_ms // 3
    return [(third, CrashNode(LEADER_ALIAS)), (2 * third, RestartNode(LEADER_ALIAS))]


def fault_window(spec: WorkloadSpec, faults: Sequence[Tuple[int, object]]) -> Tuple[int, int]:
    """From the first fault plus one maximum link latency to the first recovery (or the end)."""
    if not faults:
        return (0, 0)
    start = min(t for t, _ in faults) + spec.latency_ms[1]
    ends = [t for t, f in faults if type(f).__name__ in ("RestartNode", "Heal")]
    end = min(ends) if ends else spec.duration_ms
    return (start, max(start, min(end, spec.duration_ms)))


def _commits_in(run: WorkloadRun, window: Tuple[int, int]) -> int:
    return sum(1 for t in run.committed_ids if window[0] <= run.commit_ms[t] < window[1])


@dataclass
class Availability:
    ratio: float
    window: Tuple[int, int]
    baseline_commits: int
    fault_commits: int


def availability(spec: WorkloadSpec, faults: Optional[Sequence[Tuple[int, object]]] = None,
                 baseline: Optional[WorkloadRun] = None) -> Availability:
    faults = list(faults if faults is not None else (spec.faults or default_fault(spec)))
    window = fault_window(spec, faults)
    base = baseline or run_workload(spec, faults=[])
    faulted = run_workload(spec, faults=faults)
    b, f = _commits_in(base, window), _commits_in(faulted, window)
    ratio = min(1.0, f / b) if b else 1.0
    return Availability(ratio, window, b, f)


# -- access battery ----------------------------------------------------------

# Ground truth written out independently of the policy engine's own table.
# yes: always allowed, no: always denied, need: allowed only on assigned shipments.
ORACLE_TABLE = """
role                    Operational.Read Operational.Write Supervisory.Read Supervisory.Write Public.Read Public.Write
Consignor               need             need              need             need              yes         no
Carrier                 need             need              need             need              yes         no
Consignee               need             need              need             need              yes         no
RegulatorNational       need             no                yes              yes               yes         yes
RegulatorRegional       no               no                yes              yes               yes         no
RegulatorInternational  no               no                yes              yes               yes         no
EmergencyResponder      need             no                need             no                yes         no
Auditor                 no               no                yes              yes               yes         no
PublicObserver          no               no                no               no                yes         no
"""


def oracle_matrix() -> Dict[Tuple[str, str, str], str]:
    lines = [ln.split() for ln in ORACLE_TABLE.strip().splitlines()]
    header = lines[0][1:]
    out = {}
    for row in lines[1:]:
        for col, cell in zip(header, row[1:]):
            layer, action = col.split(".")
            out[(row[0], layer, action)] = cell
    return out


def oracle_allows(cell: str, assigned: bool) -> bool:
    return cell == "yes" or (cell == "need" and assigned)


@dataclass
class AccessBattery:
    rejection_rate: Optional[float]
    grant_rate: Optional[float]
    deny_cases: int
    allow_cases: int
    grid_cases: int
    random_cases: int
    offending: List[dict]
    vacuous: bool

    def to_json(self) -> dict:
        return asdict(self)

    @property
    def passed(self) -> bool:
        return not self.vacuous and self.rejection_rate == 1.0 and self.grant_rate == 1.0


def access_battery(policy: AccessPolicy, registry: Registry, seed: int = 0, n_random: int = 1000) -> AccessBattery:
    """Compare engine decisions against the oracle table.

    The grid uses a synthetic identity per role, assigned and unassigned.
    Random cases draw real registry identities with re-rolled assignments;
    with no identities to draw from the battery is flagged vacuous.
    """
    truth = oracle_matrix()
    ship = "SHIP-GRID"
    cases = []  # (identity, layer, action, shipment, source)
    for role in Role:
        for assigned in (True, False):
            ident = Identity(f"grid-{role.value}", "grid-org", role, bytes(32), {ship} if assigned else set())
            for layer in LayerTag:
                for action in Action:
                    cases.append((ident, layer, action, ship, "grid"))
    grid_cases = len(cases)
    idents = sorted(registry.identities.values(), key=lambda i: i.identity_id)
    rng = random.Random(f"access:{seed}")
    n_rand = 0
    if idents:
        pool = sorted({s for i in idents for s in i.assigned_shipments} | {f"SHIP-R{j}" for j in range(4)})
        for _ in range(n_random):
            base = rng.choice(idents)
            assigned = {s for s in pool if rng.random() < 0.5}
            ident = Identity(base.identity_id, base.org_id, base.role, base.public_key, assigned)
            cases.append((ident, rng.choice(list(LayerTag)), rng.choice(list(Action)), rng.choice(pool), "random"))
            n_rand += 1
    deny_ok = deny_n = allow_ok = allow_n = 0
    offending = []
    for ident, layer, action, sid, source in cases:
        cell = truth[(ident.role.value, layer.value, action.value)]
        expect = oracle_allows(cell, sid in ident.assigned_shipments)
        got = bool(check_access(policy, ident, layer, action, sid))
        if expect:
            allow_n += 1
            allow_ok += got
        else:
            deny_n += 1
            deny_ok += not got
        if got != expect:
            key = {"role": ident.role.value, "layer": layer.value, "action": action.value,
                   "assigned": sid in ident.assigned_shipments, "expected": "Allow" if expect else "Deny",
                   "got": "Allow" if got else "Deny", "policy_rule": policy.rule(ident.role, layer, action).value}
            if source == "grid" and key not in offending:
                offending.append(key)
    return AccessBattery(
        rejection_rate=deny_ok / deny_n if deny_n else None,
        grant_rate=allow_ok / allow_n if allow_n else None,
        deny_cases=deny_n,
        allow_cases=allow_n,
        grid_cases=grid_cases,
        random_cases=n_rand,
        offending=offending,
        vacuous=n_rand == 0,
    )


# -- tamper battery ----------------------------------------------------------

MUTATION_KINDS = (
    "tx_payload", "tx_id", "tx_signature", "tx_time", "tx_nonce", "tx_submitter",
    "block_prev_hash", "block_merkle_root", "block_hash", "block_time", "block_height",
    "block_proposer", "commit_signature",
)


def _flip_hex(s: str, rng: random.Random) -> str:
    i = rng.randrange(len(s))
    c = "0123456789abcdef"[(int(s[i], 16) + rng.randrange(1, 16)) % 16]
    return s[:i] + c + s[i + 1:]


def mutate_block(doc: dict, kind: str, rng: random.Random) -> str:
    """Apply one single-field mutation in place; returns a description."""
    if kind.startswith("tx_"):
        j = rng.randrange(len(doc["txs"]))
        tx = doc["txs"][j]
        where = f"tx[{j}]"
        if kind == "tx_payload":
            body = tx["body"]
            if "inline" in body:
                body["inline"] = _flip_hex(body["inline"], rng)
            else:
                body["anchor"]["anchor"] = _flip_hex(body["anchor"]["anchor"], rng)
        elif kind == "tx_id":
            tx["tx_id"] = _flip_hex(tx["tx_id"], rng)
        elif kind == "tx_signature":
            tx["signature"]["value"] = _flip_hex(tx["signature"]["value"], rng)
        elif kind == "tx_time":
            tx["sim_time_ms"] += rng.randint(1, 1000)
        elif kind == "tx_nonce":
            tx["nonce"] += rng.randint(1, 1000)
        elif kind == "tx_submitter":
            tx["submitter"] = tx["submitter"] + "x"
        return f"{where}.{kind[3:]}"
    if kind == "block_prev_hash":
        doc["prev_hash"] = _flip_hex(doc["prev_hash"], rng)
    elif kind == "block_merkle_root":
        doc["merkle_root"] = _flip_hex(doc["merkle_root"], rng)
    elif kind == "block_hash":
        doc["hash"] = _flip_hex(doc["hash"], rng)
    elif kind == "block_time":
        doc["sim_time_ms"] += rng.randint(1, 1000)
    elif kind == "block_height":
        doc["height"] += rng.randint(1, 5)
    elif kind == "block_proposer":
        doc["proposer"] = doc["proposer"] + "x"
    elif kind == "commit_signature":
        j = rng.randrange(len(doc["commit_signatures"]))
        doc["commit_signatures"][j]["value"] = _flip_hex(doc["commit_signatures"][j]["value"], rng)
    else:
        raise ValueError(kind)
    return kind


def ledger_is_valid(text: str, registry: Registry, validators: Optional[Mapping[str, bytes]] = None,
                    quorum: Optional[int] = None) -> Tuple[bool, str]:
    """The detector: parse, verify_chain against the validator set, authenticate every tx."""
    try:
        store = LedgerStore.loads(text)
    except TrackError as exc:
        return False, f"parse: {exc}"
    chk = verify_chain(store, validators if validators is not None else (registry.validators or None), quorum)
    if not chk.ok:
        return False, f"chain: {chk.reason} at {chk.height}"
    for h, tx in store.transactions():
        try:
            registry.authenticate(tx)
        except TrackError as exc:
            return False, f"authenticate at {h}: {type(exc).__name__}"
    return True, ""


@dataclass
class TamperBattery:
    detection_rate: float
    n: int
    detected: int
    excluded: int
    blocks: int
    undetected: List[dict]
    flags: List[str]

    def to_json(self) -> dict:
        return asdict(self)


def tamper_battery(ledger_text: str, n: int, seed: int, registry: Registry,
                   scratch_text: Optional[str] = None, validators: Optional[Mapping[str, bytes]] = None,
                   quorum: Optional[int] = None) -> TamperBattery:
    """Seeded single-field mutations of a committed ledger.

    The untouched ledger must verify first.  Mutations aimed at an
    uncommitted scratch file are generated but excluded from the rate.
    """
    ok, why = ledger_is_valid(ledger_text, registry, validators, quorum)
    if not ok:
        raise InvalidSpec(f"baseline ledger does not verify: {why}")
    lines = [ln for ln in ledger_text.splitlines() if ln.strip()]
    flags = []
    if n == 0:
        flags.append("no mutations requested; rate reported as 1.0 over zero cases")
    rng = random.Random(f"tamper:{seed}")
    detected = excluded = 0
    undetected = []
    scratch_lines = [ln for ln in (scratch_text or "").splitlines() if ln.strip()]
    for m in range(n):
        target_scratch = bool(scratch_lines) and rng.random() < len(scratch_lines) / (len(lines) + len(scratch_lines))
        kind = rng.choice(MUTATION_KINDS)
        if target_scratch:
            excluded += 1
            continue
        h = rng.randrange(len(lines))
        doc = json.loads(lines[h])
        where = mutate_block(doc, kind, rng)
        mutated = list(lines)
        mutated[h] = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        assert mutated[h] != lines[h], "mutation left the ledger unchanged"
        ok, why = ledger_is_valid("\n".join(mutated) + "\n", registry, validators, quorum)
        if ok:
            undetected.append({"mutation": m, "height": h, "field": where})
        else:
            detected += 1
    counted = n - excluded
    return TamperBattery(detected / counted if counted else 1.0, counted, detected, excluded, len(lines),
                         undetected, flags)


# -- audit soundness ---------------------------------------------------------


def expected_detection(n: int, v: int, k: int) -> float:
    return 1.0 - math.comb(n - v, k) / math.comb(n, k)


@dataclass
class AuditSoundness:
    n: int
    v: int
    k: int
    trials: int
    detection_rate: float
    expected_detection_rate: float
    failure_rate: float
    exhaustive_detection_rate: float

    def to_json(self) -> dict:
        return asdict(self)


def _planted_batch(n: int, violating: Sequence[int]) -> List[SensorReading]:
    bad = set(violating)
    return [SensorReading("AUDIT", SensorType.Radiation, i, i * 1000, 3.5 if i in bad else 0.5 + (i % 9) * 0.01)
            for i in range(n)]


def audit_soundness(n: int = 100, v: int = 5, k: int = 20, trials: int = 10_000, seed: int = 0,
                    exhaustive_cases: int = 20) -> AuditSoundness:
    """Empirical miss rate of the cut-and-choose audit against a dishonest attestor.

    The attestor signs a false MaxBelow claim over a committed batch holding
    ``v`` violating readings; every trial uses a fresh verifier seed.
    """
    rng = random.Random(f"audit:{seed}")
    signer = Signer.from_seed("audit-bench", f"audit-bench:{seed}")
    claim = ComplianceClaim("AUDIT", (0, 10**12), Predicate.max_below(SensorType.Radiation, 2.0))
    salt = f"audit-salts:{seed}".encode()

    def forged(rs):
        c = commit_batch(rs, salt)
        return ComplianceAttestation(claim, c, signer.identity_id,
                                     signer.sign(attestation_message(claim, c, signer.identity_id)))

    rs = _planted_batch(n, rng.sample(range(n), v))
    att, holder = forged(rs), ReadingsHolder(rs, salt)
    caught = 0
    for _ in range(trials):
        try:
            audit_challenge(att, holder, k, rng.getrandbits(64))
        except AuditFailure:
            caught += 1
    exhaustive = 0
    for _ in range(exhaustive_cases):
        rs = _planted_batch(n, rng.sample(range(n), rng.randint(1, max(1, v))))
        try:
            audit_challenge(forged(rs), ReadingsHolder(rs, salt), n, rng.getrandbits(64))
        except AuditFailure:
            exhaustive += 1
    rate = caught / trials if trials else 1.0
    return AuditSoundness(n, v, k, trials, rate, expected_detection(n, v, k), 1.0 - rate,
                          exhaustive / exhaustive_cases if exhaustive_cases else 1.0)


# -- public traceability -----------------------------------------------------


def supervisory_records(store: LedgerStore) -> List[SupervisoryRecord]:
    out = []
    for _, tx in store.transactions():
        if tx.layer is LayerTag.Supervisory and tx.tx_type in (TxType.Alert, TxType.Delivery, TxType.Attestation):
            out.append(SupervisoryRecord.from_tx(tx, json.loads(tx.payload)))
    return out


def periods(duration_ms: int, count: int) -> List[Tuple[int, int]]:
    step = max(1, math.ceil(duration_ms / count))
    return [(s, min(s + step, duration_ms)) for s in range(0, duration_ms, step)]


AGGREGATE_MUTATIONS = ("shipment_count", "alert_count", "delivered_count", "on_time_rate", "on_time_vacuous",
                       "attestation_count", "supervisory_link")
RECORD_MUTATIONS = ("drop", "duplicate", "severity", "on_time", "shift_time", "shipment", "kind")


def mutate_trace(agg: PublicAggregate, records: List[SupervisoryRecord], rng: random.Random):
    """One single-field change to either the aggregate or one in-period record."""
    inside = [i for i, r in enumerate(records) if agg.period[0] <= r.sim_time_ms < agg.period[1]]
    pool = AGGREGATE_MUTATIONS + (RECORD_MUTATIONS if inside else ())
    kind = rng.choice(pool)
    recs = list(records)
    a = agg
    if kind in AGGREGATE_MUTATIONS:
        if kind == "shipment_count":
            a = replace_agg(a, shipment_count=a.shipment_count + rng.choice([-1, 1]))
        elif kind == "alert_count":
            sev = rng.choice(sorted(a.alert_counts))
            a = replace_agg(a, alert_counts={**a.alert_counts, sev: a.alert_counts[sev] + 1})
        elif kind == "delivered_count":
            a = replace_agg(a, delivered_count=a.delivered_count + 1)
        elif kind == "on_time_rate":
            a = replace_agg(a, on_time_rate=round(a.on_time_rate - 0.125, 6) if a.on_time_rate >= 0.5 else a.on_time_rate + 0.125)
        elif kind == "on_time_vacuous":
            a = replace_agg(a, on_time_vacuous=not a.on_time_vacuous)
        elif kind == "attestation_count":
            a = replace_agg(a, attestation_count=a.attestation_count + 1)
        else:
            b = bytearray(a.supervisory_link)
            b[rng.randrange(len(b))] ^= 1 << rng.randrange(8)
            a = replace_agg(a, supervisory_link=bytes(b))
        return kind, a, recs
    i = rng.choice(inside)
    r = recs[i]
    if kind == "drop":
        del recs[i]
    elif kind == "duplicate":
        recs.append(r)
    elif kind == "severity":
        new = rng.choice([s for s in ("Info", "Warning", "Critical", None) if s != r.severity])
        recs[i] = SupervisoryRecord(r.record_id, r.kind, r.shipment_id, r.sim_time_ms, new, r.on_time)
    elif kind == "on_time":
        recs[i] = SupervisoryRecord(r.record_id, r.kind, r.shipment_id, r.sim_time_ms, r.severity,
                                    (not r.on_time) if r.on_time is not None else True)
    elif kind == "shift_time":
        t = r.sim_time_ms + 1 if r.sim_time_ms + 1 < agg.period[1] else r.sim_time_ms - 1
        if t < agg.period[0]:
            t = agg.period[1]  # moves out of the period
        recs[i] = SupervisoryRecord(r.record_id, r.kind, r.shipment_id, t, r.severity, r.on_time)
    elif kind == "shipment":
        recs[i] = SupervisoryRecord(r.record_id, r.kind, r.shipment_id + "-X", r.sim_time_ms, r.severity, r.on_time)
    else:
        other = "Delivery" if r.kind != "Delivery" else "Alert"
        recs[i] = SupervisoryRecord(r.record_id, other, r.shipment_id, r.sim_time_ms, r.severity, r.on_time)
    return kind, a, recs


def replace_agg(a: PublicAggregate, **kw) -> PublicAggregate:
    d = {f.name: getattr(a, f.name) for f in fields(a)}
    d.update(kw)
    return PublicAggregate(**d)


@dataclass
class TraceBattery:
    honest_total: int
    honest_passed: int
    mutations: int
    mutations_rejected: int
    accepted_mutations: List[dict]

    @property
    def verifiability_rate(self) -> float:
        return self.honest_passed / self.honest_total if self.honest_total else 1.0

    @property
    def mutation_detection_rate(self) -> float:
        return self.mutations_rejected / self.mutations if self.mutations else 1.0

    def to_json(self) -> dict:
        d = asdict(self)
        d["verifiability_rate"] = self.verifiability_rate
        d["mutation_detection_rate"] = self.mutation_detection_rate
        return d


def trace_battery(records: Sequence[SupervisoryRecord], duration_ms: int, n_periods: int = 6,
                  n_mutations: int = 200, seed: int = 0) -> TraceBattery:
    records = list(records)
    aggs = [aggregate_public(p, records, now_ms=duration_ms) for p in periods(duration_ms, n_periods)]
    honest = sum(1 for a in aggs if verify_public_trace(a, records))
    rng = random.Random(f"trace:{seed}")
    rejected = 0
    accepted = []
    for m in range(n_mutations if aggs else 0):
        a = rng.choice(aggs)
        kind, a2, recs = mutate_trace(a, records, rng)
        if verify_public_trace(a2, recs):
            accepted.append({"mutation": m, "kind": kind, "period": list(a.period)})
        else:
            rejected += 1
    return TraceBattery(len(aggs), honest, n_mutations if aggs else 0, rejected, accepted)


# -- overhead proxy ----------------------------------------------------------


def ops_per_tx_class(run: WorkloadRun) -> Dict[str, Dict[str, int]]:
    """Operation counts to create, authenticate, commit and verify one tx of each class seen."""
    world = run.world
    out: Dict[str, Dict[str, int]] = {}
    samples: Dict[str, Transaction] = {}
    for tx in run.txs:
        samples.setdefault(tx.tx_type.value, tx)
    saved = OPS.copy()
    try:
        for name in sorted(samples):
            proto = samples[name]
            OPS.clear()
            signer = world.signers[proto.submitter]
            tx = Transaction.create(signer, proto.tx_type, proto.sim_time_ms, proto.layer, proto.body,
                                    proto.shipment_id, proto.nonce + 10**9)
            world.registry.authenticate(tx)
            store = LedgerStore({n: world.registry.validators[n] for n in world.nodes})
            block = store.build_block([tx], world.nodes[0], 0)
            quorum = world.nodes[: len(world.nodes) // 2 + 1]
            store.append_block([tx], world.nodes[0], [world.signers[n].sign(commit_message(block.hash)) for n in quorum])
            verify_chain(store)
            out[name] = {k: OPS.get(k, 0) for k in ("hashes", "signatures", "verifications", "bytes_written")}
    finally:
        OPS.clear()
        OPS.update(saved)
    return out


# -- the report --------------------------------------------------------------


@dataclass
class MetricsReport:
    tps: float
    latency_ms: Dict[str, int]
    unauthorized_rejection_rate: Optional[float]
    authorized_grant_rate: Optional[float]
    public_verifiability_rate: float
    public_mutation_detection_rate: float
    tamper_detection_rate: float
    audit_soundness_failure_rate: float
    audit_detection_rate: float
    audit_expected_detection_rate: float
    audit_exhaustive_detection_rate: float
    audit_trials: int
    availability_under_fault: float
    ledger_growth_bytes_per_tx: float
    cpu_mem_proxy: Dict[str, Dict[str, int]]
    committed_txs: int
    submitted_txs: int
    duration_ms: int
    ledger_blocks: int
    flags: List[str] = field(default_factory=list)

    RATE_FIELDS = ("unauthorized_rejection_rate", "authorized_grant_rate", "public_verifiability_rate",
                   "public_mutation_detection_rate", "tamper_detection_rate", "audit_soundness_failure_rate",
                   "audit_detection_rate", "audit_expected_detection_rate", "audit_exhaustive_detection_rate",
                   "availability_under_fault")

    def invariant_violations(self) -> List[str]:
        bad = []
        for name in self.RATE_FIELDS:
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                bad.append(f"{name}={v} outside [0,1]")
        lat = self.latency_ms
        if not lat["p50"] <= lat["p95"] <= lat["max"]:
            bad.append(f"latency order broken: {lat}")
        if self.duration_ms and round(self.tps * self.duration_ms / 1000) != self.committed_txs:
            bad.append("tps x duration != committed count")
        return bad

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json(cls, d: Mapping) -> "MetricsReport":
        return cls(**d)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "value"])
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (dict, list)):
                v = json.dumps(v, sort_keys=True, separators=(",", ":"))
            elif v is None:
                v = ""
            w.writerow([f.name, v])
        return buf.getvalue()


def missed_targets(m: MetricsReport, audit_tolerance: float = 0.02) -> List[str]:
    """Asserted targets; anything listed here makes the bench exit nonzero."""
    missed = list(m.invariant_violations())
    if m.unauthorized_rejection_rate != 1.0:
        missed.append(f"unauthorized_rejection_rate={m.unauthorized_rejection_rate} (target 1.0)")
    if m.authorized_grant_rate != 1.0:
        missed.append(f"authorized_grant_rate={m.authorized_grant_rate} (target 1.0)")
    if m.tamper_detection_rate != 1.0:
        missed.append(f"tamper_detection_rate={m.tamper_detection_rate} (target 1.0)")
    if m.public_verifiability_rate != 1.0 or m.public_mutation_detection_rate != 1.0:
        missed.append("public traceability below 1.0")
    p = m.audit_expected_detection_rate
    # short runs get a 3-sigma band; at 10 000 trials the fixed tolerance is the wider one
    tol = max(audit_tolerance, 3 * math.sqrt(p * (1 - p) / m.audit_trials)) if m.audit_trials else audit_tolerance
    if abs(m.audit_detection_rate - p) > tol:
        missed.append(f"audit detection {m.audit_detection_rate:.4f} vs expected {m.audit_expected_detection_rate:.4f}")
    if m.audit_exhaustive_detection_rate != 1.0:
        missed.append("exhaustive audit missed a planted violation")
    if not m.availability_under_fault > 0:
        missed.append("no commits under a single crash fault")
    if m.duration_ms and not m.tps > 0:
        missed.append("tps is zero")
    missed.extend(f for f in m.flags if f.startswith("vacuous"))
    return missed


@dataclass
class BenchRun:
    metrics: MetricsReport
    series: dict
    access: AccessBattery
    tamper: TamperBattery
    audit: AuditSoundness
    trace: TraceBattery
    availability: Availability
    workload: WorkloadRun
    informative: dict


def run_bench(spec: WorkloadSpec, policy: Optional[AccessPolicy] = None, access_registry: Optional[Registry] = None,
              tamper_n: int = 500, audit_trials: int = 10_000, trace_mutations: int = 200) -> BenchRun:
    wall0 = time.perf_counter()
    OPS.clear()
    run = run_workload(spec)
    committed = len(run.committed_ids)
    lat = sorted(run.latencies())
    dur_s = spec.duration_ms / 1000
    tps = committed / dur_s if spec.duration_ms else 0.0
    flags = []
    if spec.ledger_min_blocks and len(run.ledger) < spec.ledger_min_blocks:
        flags.append(f"ledger has {len(run.ledger)} blocks, fewer than the requested {spec.ledger_min_blocks}")

    if access_registry is None:
        from .demo import demo_registry
        access_registry = demo_registry()[0]
    acc = access_battery(policy or AccessPolicy.default(), access_registry, seed=spec.seed)
    if acc.vacuous:
        flags.append("vacuous access battery: registry has no identities")

    text = run.ledger.dumps()
    if len(run.ledger):
        tam = tamper_battery(text, tamper_n, spec.seed, run.world.registry)
    else:
        tam = TamperBattery(1.0, 0, 0, 0, 0, [], ["empty ledger; nothing to tamper with"])
    flags.extend(tam.flags)

    aud = audit_soundness(trials=audit_trials, seed=spec.seed)
    trc = trace_battery(supervisory_records(run.ledger), spec.duration_ms, n_mutations=trace_mutations, seed=spec.seed)
    if spec.duration_ms:
        avail = availability(spec, baseline=run if not spec.faults else None)
    else:
        avail = Availability(1.0, (0, 0), 0, 0)

    metrics = MetricsReport(
        tps=tps,
        latency_ms={"p50": percentile(lat, 0.50), "p95": percentile(lat, 0.95), "max": lat[-1] if lat else 0},
        unauthorized_rejection_rate=acc.rejection_rate,
        authorized_grant_rate=acc.grant_rate,
        public_verifiability_rate=trc.verifiability_rate,
        public_mutation_detection_rate=trc.mutation_detection_rate,
        tamper_detection_rate=tam.detection_rate,
        audit_soundness_failure_rate=aud.failure_rate,
        audit_detection_rate=aud.detection_rate,
        audit_expected_detection_rate=aud.expected_detection_rate,
        audit_exhaustive_detection_rate=aud.exhaustive_detection_rate,
        audit_trials=aud.trials,
        availability_under_fault=avail.ratio,
        ledger_growth_bytes_per_tx=round(len(text.encode()) / committed, 3) if committed else 0.0,
        cpu_mem_proxy=ops_per_tx_class(run),
        committed_txs=committed,
        submitted_txs=len(run.txs),
        duration_ms=spec.duration_ms,
        ledger_blocks=len(run.ledger),
        flags=flags,
    )
    series = {
        "latencies_ms": lat,
        "tps_timeline": tps_timeline(run) if spec.duration_ms else [],
        "availability": {"window": list(avail.window), "baseline_commits": avail.baseline_commits,
                         "fault_commits": avail.fault_commits, "ratio": avail.ratio},
    }
    usage = resource.getrusage(resource.RUSAGE_SELF)
    informative = {"wall_s": round(time.perf_counter() - wall0, 3), "max_rss_kb": usage.ru_maxrss,
                   "cpu_user_s": round(usage.ru_utime, 3), "ops_total": dict(sorted(OPS.items()))}
    return BenchRun(metrics, series, acc, tam, aud, trc, avail, run, informative)


def emit_report(bench: BenchRun, out_dir: str | Path, plots: bool = True) -> Dict[str, Path]:
    """Write metrics (CSV + JSON), raw series, battery details and plots."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    paths = {
        "csv": d / "metrics.csv",
        "json": d / "metrics.json",
        "series": d / "series.json",
        "batteries": d / "batteries.json",
        "ledger": d / "ledger.ndjson",
        "events": d / "events.ndjson",
        "informative": d / "informative.json",
    }
    paths["csv"].write_text(bench.metrics.to_csv())
    paths["json"].write_text(bench.metrics.dumps())
    paths["series"].write_text(json.dumps(bench.series, sort_keys=True) + "\n")
    batteries = {"access": bench.access.to_json(), "tamper": bench.tamper.to_json(), "audit": bench.audit.to_json(),
                 "trace": bench.trace.to_json(), "missed_targets": missed_targets(bench.metrics)}
    paths["batteries"].write_text(json.dumps(batteries, indent=2, sort_keys=True) + "\n")
    bench.workload.ledger.save(paths["ledger"])
    paths["events"].write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in bench.workload.event_log()))
    paths["informative"].write_text(json.dumps(bench.informative, indent=2, sort_keys=True) + "\n")
    if plots:
        from .plotting import render_all
        paths.update(render_all(bench.series, d))
    return paths
