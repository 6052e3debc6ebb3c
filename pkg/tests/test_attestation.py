import dataclasses
import hashlib
import hmac
import json
import math
import random
import re

import pytest

from snftrack.attestation import (
    ComplianceAttestation,
    ComplianceClaim,
    Opening,
    Predicate,
    PublicAggregate,
    ReadingsHolder,
    SupervisoryRecord,
    aggregate_public,
    attest,
    attestation_message,
    audit_challenge,
    commit_batch,
    reading_bytes,
    verify_public_trace,
    verify_transcript,
    write_aggregates_csv,
)
from snftrack.errors import AuditFailure, ClaimFalse, CommitmentMismatch, EmptyBatch, PeriodOpen, WrongRole
from snftrack.identity import Role
from snftrack.telemetry import SensorReading, SensorType

SEED = b"salt-seed-0123456789"


def readings(n, sid="S1", violate=(), base=1.0, limit_hit=3.1):
    out = []
    for i in range(n):
        v = limit_hit if i in violate else round(base + (i % 7) * 0.0137, 4)
        out.append(SensorReading(sid, SensorType.Radiation, i, i * 10_000, v))
    return out


def h(b):
    return hashlib.sha256(b).digest()


def oracle_root(rs, seed):
    """Leaf-by-leaf tree built from hashlib/hmac only."""
    level = []
    for i, r in enumerate(rs):
        salt = hmac.new(seed, i.to_bytes(8, "big"), hashlib.sha256).digest()
        level.append(h(b"\x00" + h(b"\x05" + salt + reading_bytes(r))))
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [h(b"\x01" + level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


CLAIM = ComplianceClaim("S1", (0, 10**9), Predicate.max_below(SensorType.Radiation, 2.0))


def test_commitment_examples():
    one = readings(1)
    assert commit_batch(one, SEED).root == oracle_root(one, SEED)
    assert commit_batch(readings(5), SEED).root != commit_batch(readings(5), b"other-seed").root
    for n in (2, 3, 7, 100):
        assert commit_batch(readings(n), SEED).root == oracle_root(readings(n), SEED)
    with pytest.raises(EmptyBatch):
        commit_batch([], SEED)


def test_attest_examples(world):
    auditor, signer = world.ident(Role.Auditor), world.signers[Role.Auditor]
    rs = readings(50)
    att = attest(CLAIM, rs, commit_batch(rs, SEED), auditor, signer, SEED)
    assert verify_transcript(att, world.registry)
    bad = readings(50, violate={17, 30})
    with pytest.raises(ClaimFalse) as ei:
        attest(CLAIM, bad, commit_batch(bad, SEED), auditor, signer, SEED)
    assert ei.value.index == 17
    with pytest.raises(CommitmentMismatch):
        attest(CLAIM, rs, commit_batch(readings(51), SEED), auditor, signer, SEED)
    with pytest.raises(WrongRole):
        attest(CLAIM, rs, commit_batch(rs, SEED), world.ident(Role.Carrier), world.signers[Role.Carrier], SEED)


def test_predicates():
    seal = ComplianceClaim("S1", (0, 100), Predicate.all_seal_intact())
    ok = SensorReading("S1", SensorType.TamperSeal, 0, 5, True)
    broken = SensorReading("S1", SensorType.TamperSeal, 1, 6, False)
    assert seal.check(ok) and not seal.check(broken)
    cnt = ComplianceClaim("S1", (0, 100), Predicate.count_above_zero(SensorType.Shock, 25.0))
    assert cnt.check(SensorReading("S1", SensorType.Shock, 0, 5, 25.0))
    assert not cnt.check(SensorReading("S1", SensorType.Shock, 0, 5, 25.01))
    # out-of-period or other-shipment readings never satisfy the claim
    assert not seal.check(SensorReading("S1", SensorType.TamperSeal, 0, 100, True))
    assert not seal.check(SensorReading("S2", SensorType.TamperSeal, 0, 5, True))


def forged(world, rs):
    """A dishonest attestor signs a claim without checking it."""
    s = world.signers[Role.Auditor]
    c = commit_batch(rs, SEED)
    return ComplianceAttestation(CLAIM, c, s.identity_id, s.sign(attestation_message(CLAIM, c, s.identity_id)))


def test_honest_audit_any_k(world):
    rs = readings(37)
    att = attest(CLAIM, rs, commit_batch(rs, SEED), world.ident(Role.Auditor), world.signers[Role.Auditor], SEED)
    holder = ReadingsHolder(rs, SEED)
    for k in (1, 5, 37):
        audit_challenge(att, holder, k, challenge_seed=k * 11)
        assert len(att.audit_transcript) == k
        assert verify_transcript(att, world.registry)
        again = ComplianceAttestation.from_json(json.loads(att.dumps()))
        assert again.dumps() == att.dumps() and verify_transcript(again, world.registry)


def test_exhaustive_opening_catches_single_violation(world):
    for pos in (0, 42, 99):
        rs = readings(100, violate={pos})
        with pytest.raises(AuditFailure) as ei:
            audit_challenge(forged(world, rs), ReadingsHolder(rs, SEED), 100, challenge_seed=pos)
        assert ei.value.index == pos


def test_detection_rate_matches_hypergeometric(world):
    n, v, k, trials = 100, 5, 20, 3000
    rs = readings(n, violate=set(random.Random(1).sample(range(n), v)))
    att, holder = forged(world, rs), ReadingsHolder(rs, SEED)
    caught = 0
    for seed in range(trials):
        try:
            audit_challenge(att, holder, k, seed)
        except AuditFailure:
            caught += 1
    expected = 1 - math.comb(n - v, k) / math.comb(n, k)
    assert abs(caught / trials - expected) < 0.035


def test_doctored_transcripts_fail(world):
    rs = readings(64)
    att = attest(CLAIM, rs, commit_batch(rs, SEED), world.ident(Role.Auditor), world.signers[Role.Auditor], SEED)
    audit_challenge(att, ReadingsHolder(rs, SEED), 8, challenge_seed=5)
    base = att.to_json()

    def mutations():
        for i in range(8):
            d = json.loads(json.dumps(base))
            d["audit_transcript"][i]["reading"]["value"] = 1.5
            yield d
            d = json.loads(json.dumps(base))
            d["audit_transcript"][i]["salt"] = "00" * 32
            yield d
            d = json.loads(json.dumps(base))
            d["audit_transcript"][i]["proof"][0][0] = "11" * 32
            yield d
            d = json.loads(json.dumps(base))
            d["audit_transcript"][i]["index"] = (d["audit_transcript"][i]["index"] + 1) % 64
            yield d
        d = json.loads(json.dumps(base))
        d["audit_transcript"] = d["audit_transcript"][1:]
        yield d
        d = json.loads(json.dumps(base))
        d["challenge_seed"] = 6
        yield d
        d = json.loads(json.dumps(base))
        d["claim"]["predicate"]["limit"] = 9.0
        yield d
        d = json.loads(json.dumps(base))
        d["commitment"]["root"] = "22" * 32
        yield d

    n = 0
    for d in mutations():
        assert not verify_transcript(ComplianceAttestation.from_json(d), world.registry), d
        n += 1
    assert n == 36


def test_hiding_unopened_values(world):
    rs = [SensorReading("S1", SensorType.Radiation, i, i, round(1.0 + i * 0.000731, 6)) for i in range(50)]
    att = attest(CLAIM, rs, commit_batch(rs, SEED), world.ident(Role.Auditor), world.signers[Role.Auditor], SEED)
    audit_challenge(att, ReadingsHolder(rs, SEED), 6, challenge_seed=9)
    opened = {o.index for o in att.audit_transcript}
    numbers = lambda s: {float(x) for x in re.findall(r"-?\d+\.\d+", s)}
    text = numbers(att.dumps())
    body = numbers(json.dumps(att.ledger_body()))
    for i, r in enumerate(rs):
        assert r.value not in body
        assert (r.value in text) == (i in opened)


# -- public aggregation ----------------------------------------------------


def rec(i, kind, sid, t, severity=None, on_time=None):
    return SupervisoryRecord(f"{i:064x}", kind, sid, t, severity, on_time)


RECS = [
    rec(1, "PermitRequest", "SHIP-A", 100),
    rec(2, "PermitRequest", "SHIP-B", 200),
    rec(3, "StatusUpdate", "SHIP-C", 300),
    rec(4, "Alert", "SHIP-B", 400, severity="Warning"),
    rec(5, "Delivery", "SHIP-A", 500, on_time=True),
    rec(6, "Attestation", "SHIP-A", 600),
    rec(7, "Alert", "SHIP-A", 5_000, severity="Critical"),  # outside the period
]


def test_aggregate_counting_example():
    agg = aggregate_public((0, 1000), RECS, now_ms=2000)
    assert agg.shipment_count == 3
    assert agg.alert_counts == {"Info": 0, "Warning": 1, "Critical": 0}
    assert agg.delivered_count == 1 and agg.on_time_rate == 1.0 and not agg.on_time_vacuous
    assert agg.attestation_count == 1
    assert verify_public_trace(agg, RECS)


def test_empty_period_and_open_period():
    agg = aggregate_public((10_000, 20_000), RECS, now_ms=30_000)
    assert agg.shipment_count == 0 and sum(agg.alert_counts.values()) == 0
    assert agg.on_time_rate == 1.0 and agg.on_time_vacuous
    with pytest.raises(PeriodOpen):
        aggregate_public((0, 1000), RECS, now_ms=999)


def test_scrubbed():
    agg = aggregate_public((0, 1000), RECS)
    text = agg.body().decode()
    for r in RECS:
        assert r.shipment_id not in text and r.record_id not in text
    assert PublicAggregate.from_json(json.loads(text)) == agg


def test_trace_mutations():
    agg = aggregate_public((0, 1000), RECS)
    assert not verify_public_trace(agg, RECS[1:])
    assert not verify_public_trace(dataclasses.replace(agg, shipment_count=agg.shipment_count + 1), RECS)
    altered = RECS[:3] + [dataclasses.replace(RECS[3], severity="Info")] + RECS[4:]
    assert not verify_public_trace(agg, altered)
    # a record outside the period can change freely
    assert verify_public_trace(agg, RECS[:-1])


def test_csv(tmp_path):
    p = tmp_path / "agg.csv"
    write_aggregates_csv([aggregate_public((0, 1000), RECS)], p)
    lines = p.read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("0,1000,3,0,1,0,1,1.0000,0,1,")
