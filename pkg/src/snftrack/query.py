"""Ledger queries under a chosen identity, filtered by the access matrix."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional

from .errors import NotFound, RevokedIdentity
from .identity import Registry
from .layers import AccessPolicy, Action, Decision, DenyReason, LayerTag, PrivateAnchor, Rule, SideStores, check_access
from .ledger import LedgerStore, TxType


@dataclass
class QueryResult:
    identity_id: str
    layer: LayerTag
    decision: Decision
    records: List[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "identity": self.identity_id,
            "layer": self.layer.value,
            "decision": str(self.decision),
            "records": self.records,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"


def _inline(payload: bytes):
    try:
        return json.loads(payload)
    except (ValueError, UnicodeDecodeError):
        return payload.hex()


def query(
    store: LedgerStore,
    registry: Registry,
    policy: AccessPolicy,
    side_stores: Optional[SideStores],
    identity_id: str,
    layer: LayerTag,
    shipment_id: Optional[str] = None,
    tx_type: Optional[TxType] = None,
) -> QueryResult:
    ident = registry.get(identity_id)
    layer = LayerTag(layer)
    if ident.revoked:
        raise RevokedIdentity(identity_id)
    rule = policy.rule(ident.role, layer, Action.Read)
    if shipment_id is not None:
        top = check_access(policy, ident, layer, Action.Read, shipment_id)
    elif rule is Rule.Deny:
        top = Decision(False, DenyReason.RoleForbidden)
    elif rule is Rule.AllowIfAssigned and not ident.assigned_shipments:
        top = Decision(False, DenyReason.NotAssigned)
    else:
        top = Decision(True)
    result = QueryResult(identity_id, layer, top)
    if not top:
        return result
    for height, tx in store.transactions():
        if tx.layer is not layer:
            continue
        if shipment_id is not None and tx.shipment_id != shipment_id:
            continue
        if tx_type is not None and tx.tx_type is not TxType(tx_type):
            continue
        if not check_access(policy, ident, layer, Action.Read, tx.shipment_id or None):
            continue
        rec = {
            "tx_id": tx.tx_id.hex(),
            "height": height,
            "tx_type": tx.tx_type.value,
            "shipment_id": tx.shipment_id,
            "submitter": tx.submitter,
            "sim_time_ms": tx.sim_time_ms,
        }
        if isinstance(tx.body, PrivateAnchor):
            rec["anchor"] = tx.body.to_json()
            if side_stores is not None and ident.org_id in tx.body.authorized_orgs:
                try:
                    payload, _ = side_stores.get(ident.org_id, tx.body.anchor)
                    rec["payload"] = _inline(payload)
                except NotFound:
                    rec["payload"] = None
        else:
            rec["content"] = _inline(tx.body)
        result.records.append(rec)
    return result
