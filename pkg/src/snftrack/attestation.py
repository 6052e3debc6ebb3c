"""Compliance attestations over committed readings, statistical audits and public aggregates.

Salted Merkle commitments plus cut-and-choose audits stand in for zero-knowledge
range proofs: a verifier-seeded challenge opens k of n leaves, so a prover hiding
v violations escapes with probability C(n-v, k) / C(n, k).
"""

from __future__ import annotations

import csv
import hmac
import hashlib
import json
import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .encoding import COMMIT_LEAF, RECORD_SET, canonical, sha256, tagged_hash
from .errors import AuditFailure, ClaimFalse, CommitmentMismatch, EmptyBatch, PeriodOpen, WrongRole
from .identity import REGULATORS, Identity, Registry, Role, Signature, Signer, verify
from .merkle import MerkleTree, ProofStep, proof_from_json, proof_to_json, verify_inclusion
from .telemetry import SensorReading, SensorType, Severity


def _dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


# -- commitments -------------------------------------------------------------


def leaf_salt(salt_seed: bytes, index: int) -> bytes:
    return hmac.new(salt_seed, index.to_bytes(8, "big"), hashlib.sha256).digest()


def reading_bytes(r: SensorReading) -> bytes:
    return canonical(r.to_json())


def commit_leaf(reading: SensorReading, salt: bytes) -> bytes:
    return tagged_hash(COMMIT_LEAF, salt + reading_bytes(reading))


@dataclass(frozen=True)
class BatchCommitment:
    root: bytes
    leaf_count: int
    salt_seed_commitment: bytes

    def to_json(self) -> dict:
        return {"root": self.root.hex(), "leaf_count": self.leaf_count,
                "salt_seed_commitment": self.salt_seed_commitment.hex()}

    @classmethod
    def from_json(cls, d: dict) -> "BatchCommitment":
        return cls(bytes.fromhex(d["root"]), int(d["leaf_count"]), bytes.fromhex(d["salt_seed_commitment"]))


def _tree(readings: Sequence[SensorReading], salt_seed: bytes) -> MerkleTree:
    return MerkleTree([commit_leaf(r, leaf_salt(salt_seed, i)) for i, r in enumerate(readings)])


def commit_batch(readings: Sequence[SensorReading], salt_seed: bytes) -> BatchCommitment:
    if not readings:
        raise EmptyBatch("cannot commit to an empty batch")
    return BatchCommitment(_tree(readings, salt_seed).root, len(readings), sha256(b"salt-seed:" + salt_seed))


# -- claims ------------------------------------------------------------------


class PredicateKind(str, Enum):
    MaxBelow = "MaxBelow"
    AllSealIntact = "AllSealIntact"
    CountAbove = "CountAbove"  # asserts the count above ``limit`` is zero


@dataclass(frozen=True)
class Predicate:
    kind: PredicateKind
    sensor: Optional[SensorType] = None
    limit: Optional[float] = None

    @classmethod
    def max_below(cls, sensor: SensorType, limit: float) -> "Predicate":
        return cls(PredicateKind.MaxBelow, SensorType(sensor), float(limit))

    @classmethod
    def all_seal_intact(cls) -> "Predicate":
        return cls(PredicateKind.AllSealIntact, SensorType.TamperSeal)

    @classmethod
    def count_above_zero(cls, sensor: SensorType, limit: float) -> "Predicate":
        return cls(PredicateKind.CountAbove, SensorType(sensor), float(limit))

    def holds(self, r: SensorReading) -> bool:
        """Per-reading check; readings of other sensors satisfy it vacuously."""
        if r.sensor is not self.sensor:
            return True
        if self.kind is PredicateKind.AllSealIntact:
            return r.value is True
        # MaxBelow allows equality; CountAbove counts strictly greater values.
        return r.scalar <= self.limit

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "sensor": self.sensor.value if self.sensor else None, "limit": self.limit}

    @classmethod
    def from_json(cls, d: dict) -> "Predicate":
        return cls(PredicateKind(d["kind"]), SensorType(d["sensor"]) if d.get("sensor") else None,
                   None if d.get("limit") is None else float(d["limit"]))


@dataclass(frozen=True)
class ComplianceClaim:
    shipment_id: str
    period: Tuple[int, int]
    predicate: Predicate

    def in_scope(self, r: SensorReading) -> bool:
        return r.shipment_id == self.shipment_id and self.period[0] <= r.sim_time_ms < self.period[1]

    def check(self, r: SensorReading) -> bool:
        return self.in_scope(r) and self.predicate.holds(r)

    def to_json(self) -> dict:
        return {"shipment_id": self.shipment_id, "period": list(self.period), "predicate": self.predicate.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> "ComplianceClaim":
        return cls(d["shipment_id"], (int(d["period"][0]), int(d["period"][1])), Predicate.from_json(d["predicate"]))


@dataclass(frozen=True)
class Opening:
    index: int
    reading: SensorReading
    salt: bytes
    proof: Tuple[ProofStep, ...]

    def to_json(self) -> dict:
        return {"index": self.index, "reading": self.reading.to_json(), "salt": self.salt.hex(),
                "proof": proof_to_json(self.proof)}

    @classmethod
    def from_json(cls, d: dict) -> "Opening":
        return cls(int(d["index"]), SensorReading.from_json(d["reading"]), bytes.fromhex(d["salt"]),
                   tuple(proof_from_json(d["proof"])))


@dataclass
class ComplianceAttestation:
    claim: ComplianceClaim
    commitment: BatchCommitment
    attestor: str
    signature: Signature
    audit_transcript: Optional[List[Opening]] = None
    challenge_seed: Optional[int] = None

    def signed_message(self) -> bytes:
        return attestation_message(self.claim, self.commitment, self.attestor)

    def to_json(self) -> dict:
        return {
            "claim": self.claim.to_json(),
            "commitment": self.commitment.to_json(),
            "attestor": self.attestor,
            "signature": self.signature.to_json(),
            "challenge_seed": self.challenge_seed,
            "audit_transcript": None if self.audit_transcript is None
            else [o.to_json() for o in self.audit_transcript],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ComplianceAttestation":
        t = d.get("audit_transcript")
        return cls(ComplianceClaim.from_json(d["claim"]), BatchCommitment.from_json(d["commitment"]),
                   d["attestor"], Signature.from_json(d["signature"]),
                   None if t is None else [Opening.from_json(o) for o in t], d.get("challenge_seed"))

    def dumps(self) -> str:
        return _dumps(self.to_json())

    def digest(self) -> bytes:
        return sha256(self.dumps().encode())

    def ledger_body(self) -> dict:
        """What goes on the Supervisory layer: claim, commitment, signature and a transcript digest."""
        return {
            "kind": "attestation",
            "shipment_id": self.claim.shipment_id,
            "claim": self.claim.to_json(),
            "commitment": self.commitment.to_json(),
            "attestor": self.attestor,
            "signature": self.signature.to_json(),
            "audited": self.audit_transcript is not None,
            "transcript_digest": sha256(_dumps([o.to_json() for o in self.audit_transcript or []]).encode()).hex(),
        }


def attestation_message(claim: ComplianceClaim, commitment: BatchCommitment, attestor: str) -> bytes:
    return b"attest:" + canonical({"claim": claim.to_json(), "commitment": commitment.to_json(), "attestor": attestor})


ATTESTOR_ROLES = frozenset(REGULATORS | {Role.Auditor})


def first_violation(claim: ComplianceClaim, readings: Sequence[SensorReading]) -> Optional[int]:
    for i, r in enumerate(readings):
        if not claim.check(r):
            return i
    return None


def attest(
    claim: ComplianceClaim,
    readings: Sequence[SensorReading],
    commitment: BatchCommitment,
    attestor: Identity,
    signer: Signer,
    salt_seed: bytes,
) -> ComplianceAttestation:
    if attestor.role not in ATTESTOR_ROLES:
        raise WrongRole(f"{attestor.role.value} may not attest")
    if signer.identity_id != attestor.identity_id:
        raise WrongRole("signer and attestor differ")
    if not readings or commit_batch(readings, salt_seed) != commitment:
        raise CommitmentMismatch("commitment does not match the readings")
    bad = first_violation(claim, readings)
    if bad is not None:
        raise ClaimFalse(bad)
    sig = signer.sign(attestation_message(claim, commitment, attestor.identity_id))
    return ComplianceAttestation(claim, commitment, attestor.identity_id, sig)


class ReadingsHolder:
    """The prover side of an audit: keeps readings and salts, opens leaves on demand."""

    def __init__(self, readings: Sequence[SensorReading], salt_seed: bytes):
        self.readings = list(readings)
        self.salts = [leaf_salt(salt_seed, i) for i in range(len(self.readings))]
        self.tree = MerkleTree([commit_leaf(r, s) for r, s in zip(self.readings, self.salts)])

    def open(self, index: int) -> Opening:
        return Opening(index, self.readings[index], self.salts[index], tuple(self.tree.proof(index)))


def challenge_indices(leaf_count: int, k: int, challenge_seed: int) -> List[int]:
    if not 1 <= k <= leaf_count:
        raise ValueError(f"k must lie in [1, {leaf_count}]")
    return random.Random(challenge_seed).sample(range(leaf_count), k)


def check_opening(claim: ComplianceClaim, commitment: BatchCommitment, o: Opening) -> Optional[str]:
    """None if the opening is valid and satisfies the claim, else the reason."""
    if not 0 <= o.index < commitment.leaf_count:
        return "index out of range"
    if len(o.proof) != _depth(commitment.leaf_count) or _path_index(o.proof) != o.index:
        return "proof shape does not match index"
    if not verify_inclusion(commit_leaf(o.reading, o.salt), o.proof, commitment.root):
        return "merkle path does not reach the root"
    if not claim.check(o.reading):
        return "opened reading violates the claim"
    return None


def _depth(n: int) -> int:
    d = 0
    while n > 1:
        n = (n + 1) // 2
        d += 1
    return d


def _path_index(proof: Sequence[ProofStep]) -> int:
    # A right child has its sibling on the left; duplicated last nodes count as left children.
    return sum((1 << i) for i, (_, is_left) in enumerate(proof) if is_left)


def audit_challenge(
    attestation: ComplianceAttestation,
    holder: ReadingsHolder,
    k: int,
    challenge_seed: int,
) -> List[Opening]:
    """Verifier-seeded cut-and-choose audit; appends the transcript on success."""
    openings = []
    for idx in challenge_indices(attestation.commitment.leaf_count, k, challenge_seed):
        o = holder.open(idx)
        why = check_opening(attestation.claim, attestation.commitment, o)
        if why is not None:
            raise AuditFailure(idx, why)
        openings.append(o)
    attestation.audit_transcript = openings
    attestation.challenge_seed = challenge_seed
    return openings


@dataclass(frozen=True)
class TranscriptCheck:
    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def verify_transcript(attestation: ComplianceAttestation, registry: Registry) -> TranscriptCheck:
    try:
        ident = registry.get(attestation.attestor)
    except Exception:
        return TranscriptCheck(False, "unknown attestor")
    if ident.role not in ATTESTOR_ROLES:
        return TranscriptCheck(False, "attestor role may not attest")
    if attestation.signature.signer_id != ident.identity_id or not verify(
        ident.public_key, attestation.signed_message(), attestation.signature
    ):
        return TranscriptCheck(False, "attestation signature invalid")
    t = attestation.audit_transcript
    if t is None:
        return TranscriptCheck(True, "no audit transcript")
    if attestation.challenge_seed is None:
        return TranscriptCheck(False, "transcript without challenge seed")
    want = challenge_indices(attestation.commitment.leaf_count, len(t), attestation.challenge_seed)
    if [o.index for o in t] != want:
        return TranscriptCheck(False, "opened indices differ from the challenge")
    for o in t:
        why = check_opening(attestation.claim, attestation.commitment, o)
        if why is not None:
            return TranscriptCheck(False, f"leaf {o.index}: {why}")
    return TranscriptCheck(True)


def save_attestations(atts: Iterable[ComplianceAttestation], path: str | Path) -> None:
    Path(path).write_text(json.dumps([a.to_json() for a in atts], indent=1, sort_keys=True) + "\n")


def load_attestations(path: str | Path) -> List[ComplianceAttestation]:
    return [ComplianceAttestation.from_json(d) for d in json.loads(Path(path).read_text())]


# -- supervisory records and public aggregates -------------------------------


@dataclass(frozen=True)
class SupervisoryRecord:
    record_id: str
    kind: str
    shipment_id: str
    sim_time_ms: int
    severity: Optional[str] = None
    on_time: Optional[bool] = None

    @classmethod
    def from_tx(cls, tx, doc: dict) -> "SupervisoryRecord":
        sev = doc.get("severity") if tx.tx_type.value == "Alert" else None
        on_time = doc.get("on_time") if tx.tx_type.value == "Delivery" else None
        return cls(tx.tx_id.hex(), tx.tx_type.value, tx.shipment_id, tx.sim_time_ms, sev, on_time)

    def to_json(self) -> dict:
        return {"record_id": self.record_id, "kind": self.kind, "shipment_id": self.shipment_id,
                "sim_time_ms": self.sim_time_ms, "severity": self.severity, "on_time": self.on_time}

    @classmethod
    def from_json(cls, d: dict) -> "SupervisoryRecord":
        return cls(d["record_id"], d["kind"], d["shipment_id"], int(d["sim_time_ms"]), d.get("severity"),
                   d.get("on_time"))


def _as_records(records: Iterable) -> List[SupervisoryRecord]:
    return [r if isinstance(r, SupervisoryRecord) else SupervisoryRecord.from_json(r) for r in records]


def record_set_digest(records: Iterable[SupervisoryRecord]) -> bytes:
    enc = sorted(canonical(r.to_json()) for r in records)
    return tagged_hash(RECORD_SET, canonical(enc))


@dataclass(frozen=True)
class PublicAggregate:
    period: Tuple[int, int]
    shipment_count: int
    alert_counts: Dict[str, int]
    delivered_count: int
    on_time_rate: float
    on_time_vacuous: bool
    attestation_count: int
    supervisory_link: bytes

    def to_json(self) -> dict:
        return {
            "kind": "public_aggregate",
            "period": list(self.period),
            "shipment_count": self.shipment_count,
            "alert_counts": dict(sorted(self.alert_counts.items())),
            "delivered_count": self.delivered_count,
            "on_time_rate": self.on_time_rate,
            "on_time_vacuous": self.on_time_vacuous,
            "attestation_count": self.attestation_count,
            "supervisory_link": self.supervisory_link.hex(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "PublicAggregate":
        return cls((int(d["period"][0]), int(d["period"][1])), int(d["shipment_count"]),
                   {k: int(v) for k, v in d["alert_counts"].items()}, int(d["delivered_count"]),
                   float(d["on_time_rate"]), bool(d["on_time_vacuous"]), int(d["attestation_count"]),
                   bytes.fromhex(d["supervisory_link"]))

    def body(self) -> bytes:
        return _dumps(self.to_json()).encode()


def in_period(records: Iterable, period: Tuple[int, int]) -> List[SupervisoryRecord]:
    return [r for r in _as_records(records) if period[0] <= r.sim_time_ms < period[1]]


def aggregate_public(period: Tuple[int, int], records: Iterable, now_ms: Optional[int] = None) -> PublicAggregate:
    """Counts over supervisory records in [start, end); identifiers are suppressed."""
    start, end = int(period[0]), int(period[1])
    if now_ms is not None and end > now_ms:
        raise PeriodOpen(f"period ends at {end}, now is {now_ms}")
    recs = in_period(records, (start, end))
    alerts = {s.value: 0 for s in Severity}
    for r in recs:
        if r.kind == "Alert" and r.severity in alerts:
            alerts[r.severity] += 1
    deliveries = [r for r in recs if r.kind == "Delivery"]
    on_time = sum(1 for r in deliveries if r.on_time)
    return PublicAggregate(
        period=(start, end),
        shipment_count=len({r.shipment_id for r in recs}),
        alert_counts=alerts,
        delivered_count=len(deliveries),
        on_time_rate=on_time / len(deliveries) if deliveries else 1.0,
        on_time_vacuous=not deliveries,
        attestation_count=sum(1 for r in recs if r.kind == "Attestation"),
        supervisory_link=record_set_digest(recs),
    )


def verify_public_trace(aggregate: PublicAggregate, records: Iterable) -> bool:
    return aggregate_public(aggregate.period, records) == aggregate


AGGREGATE_CSV_HEADER = [
    "period_start", "period_end", "shipment_count", "alerts_info", "alerts_warning", "alerts_critical",
    "delivered_count", "on_time_rate", "on_time_vacuous", "attestation_count", "supervisory_link",
]


def write_aggregates_csv(aggs: Iterable[PublicAggregate], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_CSV_HEADER)
        for a in aggs:
            c = a.alert_counts
            w.writerow([a.period[0], a.period[1], a.shipment_count, c.get("Info", 0), c.get("Warning", 0),
                        c.get("Critical", 0), a.delivered_count, f"{a.on_time_rate:.4f}",
                        int(a.on_time_vacuous), a.attestation_count, a.supervisory_link.hex()])
