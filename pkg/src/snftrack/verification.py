"""Offline verification of run artifacts: chain, signatures, inclusion, attestations, public trace."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .attestation import ComplianceAttestation, PublicAggregate, SupervisoryRecord, verify_public_trace, verify_transcript
from .errors import TrackError
from .identity import Registry, verify
from .layers import LayerTag
from .ledger import LedgerStore, TxType, verify_chain, verify_tx_inclusion

PASS, FAIL, SKIP = "pass", "fail", "skipped"


@dataclass
class Check:
    name: str
    status: str
    detail: str = ""

    def to_json(self) -> dict:
        return {"check": self.name, "status": self.status, "detail": self.detail}


def _sig_ok(store: LedgerStore, registry: Registry) -> Optional[str]:
    # Revocation stops future submissions; it does not void history, so keys are checked directly.
    for h, tx in store.transactions():
        try:
            ident = registry.get(tx.submitter)
        except TrackError:
            return f"height {h}: unknown submitter {tx.submitter}"
        sig = tx.signature
        if sig is None or sig.signer_id != ident.identity_id or not verify(ident.public_key, tx.signing_bytes(), sig):
            return f"height {h}: bad signature on {tx.tx_id.hex()[:16]}"
    return None


def _inclusion_ok(store: LedgerStore) -> Optional[str]:
    for _, tx in store.transactions():
        found, proof, height = store.query_tx(tx.tx_id)
        if not verify_tx_inclusion(tx.tx_id, proof, store.blocks[height].merkle_root):
            return f"tx {tx.tx_id.hex()[:16]} not provably included at height {height}"
    return None


def _payload_json(tx) -> dict:
    return json.loads(tx.payload)


def check_attestations(store: LedgerStore, registry: Registry, atts: Sequence[ComplianceAttestation]) -> Optional[str]:
    on_ledger = [_payload_json(tx) for _, tx in store.transactions() if tx.tx_type is TxType.Attestation]
    for i, att in enumerate(atts):
        chk = verify_transcript(att, registry)
        if not chk:
            return f"attestation {i}: {chk.reason}"
        if att.ledger_body() not in on_ledger:
            return f"attestation {i}: no matching ledger entry (claim, commitment or transcript digest differ)"
    return None


def ledger_records(store: LedgerStore) -> List[SupervisoryRecord]:
    # Only endorsed txs are ordered, so every supervisory-layer entry is one record.
    return [SupervisoryRecord.from_tx(tx, _payload_json(tx)) for _, tx in store.transactions()
            if tx.layer is LayerTag.Supervisory]


def check_public(store: LedgerStore, records: Optional[List[SupervisoryRecord]]) -> Check:
    aggs = [PublicAggregate.from_json(_payload_json(tx)) for _, tx in store.transactions()
            if tx.tx_type is TxType.PublicAggregate]
    if not aggs:
        return Check("public_trace", SKIP, "no public aggregates on the ledger")
    if records is None:
        records = ledger_records(store)
    else:
        by_id = {tx.tx_id.hex(): tx for _, tx in store.transactions()}
        for r in records:
            tx = by_id.get(r.record_id)
            if tx is None or tx.tx_type.value != r.kind or tx.shipment_id != r.shipment_id or tx.sim_time_ms != r.sim_time_ms:
                return Check("public_trace", FAIL, f"record {r.record_id[:16]} does not match a ledger entry")
    for a in aggs:
        if not verify_public_trace(a, records):
            return Check("public_trace", FAIL, f"aggregate for period {list(a.period)} does not recompute")
    return Check("public_trace", PASS, f"{len(aggs)} aggregate(s) recompute from {len(records)} records")


def verify_artifacts(
    ledger_path: str | Path,
    registry: Registry,
    validators: Optional[Dict[str, bytes]] = None,
    quorum: Optional[int] = None,
    attestations: Optional[Sequence[ComplianceAttestation]] = None,
    records: Optional[List[SupervisoryRecord]] = None,
) -> List[Check]:
    """Run every check in order; later checks are skipped when the chain itself does not verify."""
    checks: List[Check] = []
    try:
        store = LedgerStore.load(ledger_path)
    except TrackError as exc:
        store, why = None, f"cannot parse ledger: {exc}"
    else:
        vals = validators if validators is not None else (registry.validators or None)
        res = verify_chain(store, vals, quorum)
        why = None if res.ok else f"{res.reason} at height {res.height}"
    if why:
        checks.append(Check("chain", FAIL, why))
        for name in ("signatures", "inclusion", "attestations", "public_trace"):
            checks.append(Check(name, SKIP, "chain check failed"))
        return checks
    checks.append(Check("chain", PASS, f"{len(store)} blocks"))
    bad = _sig_ok(store, registry)
    checks.append(Check("signatures", FAIL if bad else PASS, bad or "all submitter signatures verify"))
    bad = _inclusion_ok(store)
    checks.append(Check("inclusion", FAIL if bad else PASS, bad or "every tx has a valid inclusion proof"))
    if attestations is None:
        checks.append(Check("attestations", SKIP, "no attestation file given"))
    else:
        bad = check_attestations(store, registry, attestations)
        checks.append(Check("attestations", FAIL if bad else PASS, bad or f"{len(attestations)} transcript(s) verify"))
    checks.append(check_public(store, records))
    return checks


def all_passed(checks: Sequence[Check]) -> bool:
    return all(c.status != FAIL for c in checks) and checks[0].status == PASS
