"""Shipment contract logic: state machine, alerts, handovers and batch validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple, Union

from .encoding import canonical
from .errors import (
    AlreadySigned,
    BadSignature,
    IllegalTransition,
    NotFound,
    TrackError,
    WrongParty,
    WrongRole,
    WrongState,
)
from .identity import REGULATORS, Identity, Registry, Role, Signature, Signer, verify
from .layers import AccessPolicy, Action, LayerTag, PrivateAnchor, SideStores, check_access, reveal_and_verify
from .ledger import Transaction, TxType
from .telemetry import AlertRule, EdgeSummary, SensorReading, SensorType, Severity, parse_batch


class ShipmentState(str, Enum):
    Drafted = "Drafted"
    PermitRequested = "PermitRequested"
    Approved = "Approved"
    InTransit = "InTransit"
    Incident = "Incident"
    HandoverPending = "HandoverPending"
    Delivered = "Delivered"
    Archived = "Archived"


class ShipmentEvent(str, Enum):
    RequestPermit = "RequestPermit"
    ApprovePermit = "ApprovePermit"
    StartTransport = "StartTransport"
    CriticalAlert = "CriticalAlert"
    ClearIncident = "ClearIncident"
    BeginHandover = "BeginHandover"
    HandoverToCarrier = "HandoverToCarrier"
    HandoverToConsignee = "HandoverToConsignee"
    Archive = "Archive"


S, E = ShipmentState, ShipmentEvent
_REG = frozenset(REGULATORS)

# (state, event) -> (target, roles allowed to drive the edge)
EDGES: Dict[Tuple[ShipmentState, ShipmentEvent], Tuple[ShipmentState, FrozenSet[Role]]] = {
    (S.Drafted, E.RequestPermit): (S.PermitRequested, frozenset({Role.Consignor})),
    (S.PermitRequested, E.ApprovePermit): (S.Approved, _REG),
    (S.Approved, E.StartTransport): (S.InTransit, frozenset({Role.Carrier})),
    (S.InTransit, E.CriticalAlert): (S.Incident, frozenset({Role.Carrier})),
    (S.Incident, E.ClearIncident): (S.InTransit, _REG),
    (S.InTransit, E.BeginHandover): (S.HandoverPending, frozenset({Role.Carrier})),
    (S.HandoverPending, E.HandoverToCarrier): (S.InTransit, frozenset({Role.Carrier})),
    (S.HandoverPending, E.HandoverToConsignee): (S.Delivered, frozenset({Role.Consignee})),
    # Needs both the consignor and a regulator; the engine collects the two sign-offs.
    (S.Delivered, E.Archive): (S.Archived, frozenset({Role.Consignor}) | _REG),
}

_ORDER = list(ShipmentState)


def validate_transition(state: ShipmentState, event: ShipmentEvent, role: Role) -> ShipmentState:
    try:
        target, roles = EDGES[(ShipmentState(state), ShipmentEvent(event))]
    except KeyError:
        raise IllegalTransition(ShipmentState(state).value, ShipmentEvent(event).value) from None
    if Role(role) not in roles:
        raise WrongRole(f"{Role(role).value} may not {ShipmentEvent(event).value}")
    return target


def edge_list() -> List[dict]:
    return [
        {"from": s.value, "event": e.value, "to": t.value, "roles": sorted(r.value for r in roles)}
        for (s, e), (t, roles) in EDGES.items()
    ]


def write_edge_list(path: str | Path) -> None:
    Path(path).write_text(json.dumps(edge_list(), indent=2) + "\n")


@dataclass
class Shipment:
    shipment_id: str
    consignor: str
    carrier: str
    consignee: str
    regulator: str
    state: ShipmentState = ShipmentState.Drafted
    permit_tx: Optional[bytes] = None
    route_anchor: Optional[PrivateAnchor] = None
    open_alerts: Set[str] = field(default_factory=set)
    archive_signoffs: Set[str] = field(default_factory=set)

    def check_invariants(self) -> None:
        rank = _ORDER.index(self.state)
        if rank >= _ORDER.index(ShipmentState.Approved) and self.permit_tx is None:
            raise WrongState(f"{self.shipment_id} is {self.state.value} without a permit")
        if rank >= _ORDER.index(ShipmentState.InTransit) and self.route_anchor is None:
            raise WrongState(f"{self.shipment_id} moved without a filed route")

    def party_ids(self) -> Set[str]:
        return {self.consignor, self.carrier, self.consignee, self.regulator}


# -- alerts ------------------------------------------------------------------


@dataclass(frozen=True)
class AlertFact:
    shipment_id: str
    rule_id: str
    severity: Severity
    sensor: SensorType
    window: Tuple[int, int]
    first_t_ms: int

    @property
    def alert_id(self) -> str:
        return f"{self.rule_id}@{self.window[0]}"

    def body(self, batch_anchor: bytes) -> dict:
        # Only the fact of the violation; the triggering values stay behind the anchor.
        return {
            "kind": "alert",
            "shipment_id": self.shipment_id,
            "rule_id": self.rule_id,
            "severity": self.severity.value,
            "sensor": self.sensor.value,
            "window": list(self.window),
            "t_ms": self.first_t_ms,
            "batch_anchor": batch_anchor.hex(),
        }


ALERT_STATES = frozenset({ShipmentState.InTransit, ShipmentState.HandoverPending})


def find_violations(
    items: Iterable[Union[SensorReading, EdgeSummary]],
    rules: Sequence[AlertRule],
    window_ms: int,
    seen: Optional[Set[Tuple[str, int]]] = None,
) -> List[AlertFact]:
    """One fact per (rule, window); ``seen`` carries dedup state across batches."""
    seen = set() if seen is None else seen
    found: Dict[Tuple[str, int], AlertFact] = {}
    for item in items:
        if isinstance(item, EdgeSummary):
            hits = [(t, rid) for t, rid in item.anomaly_flags]
            sensor, sid = item.sensor, item.shipment_id
        else:
            if item.sensor in (SensorType.Gps, SensorType.Rfid):
                continue
            sensor, sid = item.sensor, item.shipment_id
            hits = [(item.sim_time_ms, r.rule_id) for r in rules if r.sensor is sensor and r.violated(item.scalar)]
        for t, rid in hits:
            rule = next((r for r in rules if r.rule_id == rid), None)
            if rule is None:
                continue
            w = t // window_ms
            key = (rid, w)
            if key in seen:
                continue
            prev = found.get(key)
            if prev is None or t < prev.first_t_ms:
                found[key] = AlertFact(sid, rid, rule.severity, sensor, (w * window_ms, (w + 1) * window_ms), t)
    seen.update(found)
    return sorted(found.values(), key=lambda f: (f.first_t_ms, f.rule_id))


def evaluate_alerts(
    items: Iterable[Union[SensorReading, EdgeSummary]],
    rules: Sequence[AlertRule],
    shipment: Shipment,
    signer: Signer,
    batch_anchor: bytes,
    sim_time_ms: int,
    window_ms: int = 60_000,
    seen: Optional[Set[Tuple[str, int]]] = None,
    nonce: int = 0,
) -> List[Transaction]:
    """Signed Supervisory alert txs, one per violated rule and window."""
    if shipment.state not in ALERT_STATES:
        return []
    facts = find_violations(items, rules, window_ms, seen)
    return [
        Transaction.create(signer, TxType.Alert, sim_time_ms, LayerTag.Supervisory,
                           canonical_json(f.body(batch_anchor)), shipment.shipment_id, nonce + i)
        for i, f in enumerate(facts)
    ]


def canonical_json(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


# -- handover ----------------------------------------------------------------


@dataclass
class HandoverRecord:
    shipment_id: str
    from_id: str
    to_id: str
    details_anchor: PrivateAnchor
    confirm_from: Optional[Signature] = None
    confirm_to: Optional[Signature] = None
    completed_ms: Optional[int] = None

    def message(self) -> bytes:
        return b"handover:" + canonical(
            {"shipment_id": self.shipment_id, "from": self.from_id, "to": self.to_id,
             "details": self.details_anchor.anchor}
        )

    @property
    def complete(self) -> bool:
        return self.completed_ms is not None

    def confirmation_body(self, on_time: Optional[bool] = None) -> dict:
        doc = {
            "kind": "handover",
            "shipment_id": self.shipment_id,
            "from": self.from_id,
            "to": self.to_id,
            "completed_ms": self.completed_ms,
            "details_anchor": self.details_anchor.anchor.hex(),
            "confirm_from": self.confirm_from.to_json(),
            "confirm_to": self.confirm_to.to_json(),
        }
        if on_time is not None:
            doc["on_time"] = on_time
        return doc


def record_handover(
    record: HandoverRecord,
    signature: Signature,
    shipment: Shipment,
    registry: Registry,
    now_ms: int,
    submitter: Optional[Signer] = None,
    on_time: Optional[bool] = None,
    nonce: int = 0,
) -> Tuple[HandoverRecord, Optional[Transaction]]:
    """Attach one party's signature; returns the confirmation tx once both are in."""
    if shipment.state is not ShipmentState.HandoverPending:
        raise WrongState(f"{shipment.shipment_id} is {shipment.state.value}")
    if signature.signer_id not in (record.from_id, record.to_id):
        raise WrongParty(f"{signature.signer_id} is not a party to this handover")
    slot = "confirm_from" if signature.signer_id == record.from_id else "confirm_to"
    if getattr(record, slot) is not None:
        raise AlreadySigned(signature.signer_id)
    if not verify(registry.get(signature.signer_id).public_key, record.message(), signature):
        raise BadSignature(f"handover signature from {signature.signer_id} does not verify")
    setattr(record, slot, signature)
    if record.confirm_from is None or record.confirm_to is None:
        return record, None
    record.completed_ms = now_ms
    if submitter is None:
        return record, None
    to_role = registry.get(record.to_id).role
    tx_type = TxType.Delivery if to_role is Role.Consignee else TxType.Handover
    tx = Transaction.create(submitter, tx_type, now_ms, LayerTag.Supervisory,
                            canonical_json(record.confirmation_body(on_time)), record.shipment_id, nonce)
    return record, tx


def verify_handover_body(doc: dict, registry: Registry) -> bool:
    """Both declared parties must have signed the exact record."""
    try:
        rec = HandoverRecord(doc["shipment_id"], doc["from"], doc["to"],
                             PrivateAnchor(bytes.fromhex(doc["details_anchor"]), (), ""))
        sf, st = Signature.from_json(doc["confirm_from"]), Signature.from_json(doc["confirm_to"])
        if sf.signer_id != rec.from_id or st.signer_id != rec.to_id or rec.from_id == rec.to_id:
            return False
        msg = rec.message()
        return (verify(registry.get(rec.from_id).public_key, msg, sf)
                and verify(registry.get(rec.to_id).public_key, msg, st))
    except (KeyError, ValueError, TypeError, TrackError):
        return False


# -- sensor batch validation -------------------------------------------------


class RejectReason(str, Enum):
    NotAssigned = "NotAssigned"
    SeqGap = "SeqGap"
    ImplausibleValue = "ImplausibleValue"
    TimeRegression = "TimeRegression"


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: Optional[RejectReason] = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.accepted

    def __str__(self) -> str:
        return "Accept" if self.accepted else f"Reject({self.reason.value})"


ACCEPT = Verdict(True)

# Per-sensor cursor: last accepted (seq, t_ms).
Cursor = Dict[SensorType, Tuple[int, int]]


def _plausible(r: SensorReading) -> bool:
    v = r.value
    if r.sensor is SensorType.Gps:
        lat, lon = v
        return math.isfinite(lat) and math.isfinite(lon) and abs(lat) <= 90 and abs(lon) <= 180
    if r.sensor is SensorType.Rfid:
        return isinstance(v, str) and bool(v)
    if r.sensor is SensorType.TamperSeal:
        return isinstance(v, bool)
    x = float(v)
    if not math.isfinite(x):
        return False
    if r.sensor is SensorType.Radiation:
        return x >= 0
    if r.sensor is SensorType.Temperature:
        return -100 <= x <= 1000
    if r.sensor is SensorType.Shock:
        return x >= 0
    return True


def validate_sensor_batch(
    batch_tx: Transaction,
    readings: Sequence[SensorReading],
    submitter: Identity,
    cursor: Optional[Cursor] = None,
) -> Verdict:
    """Checks a decoded batch; ``cursor`` is advanced only on Accept."""
    cursor = {} if cursor is None else cursor
    sid = batch_tx.shipment_id
    if sid not in submitter.assigned_shipments or any(r.shipment_id != sid for r in readings):
        return Verdict(False, RejectReason.NotAssigned, f"{submitter.identity_id} / {sid}")
    local = dict(cursor)
    last_t = None
    for r in readings:
        if last_t is not None and r.sim_time_ms < last_t:
            return Verdict(False, RejectReason.TimeRegression, f"{r.sensor.value} seq {r.seq}")
        last_t = r.sim_time_ms
        prev = local.get(r.sensor)
        expect = 0 if prev is None else prev[0] + 1
        if r.seq != expect:
            return Verdict(False, RejectReason.SeqGap, f"{r.sensor.value} {expect - 1}->{r.seq}")
        if prev is not None and r.sim_time_ms < prev[1]:
            return Verdict(False, RejectReason.TimeRegression, f"{r.sensor.value} seq {r.seq}")
        if not _plausible(r):
            return Verdict(False, RejectReason.ImplausibleValue, f"{r.sensor.value} seq {r.seq}")
        local[r.sensor] = (r.seq, r.sim_time_ms)
    cursor.clear()
    cursor.update(local)
    return ACCEPT


# -- contract engine ---------------------------------------------------------


@dataclass(frozen=True)
class ApplyResult:
    tx_id: str
    accepted: bool
    reason: str = ""
    transition: Optional[Tuple[str, str]] = None

    def __bool__(self) -> bool:
        return self.accepted


class ContractEngine:
    """Applies transactions serially, in committed order, against shipment state.

    Batches are opened from ``side_view`` as ``view_org``; when that is None the
    shipment regulator's organization is used, which must hold the telemetry.
    """

    def __init__(
        self,
        registry: Registry,
        policy: AccessPolicy,
        side_view: SideStores,
        view_org: Optional[str],
        rules: Sequence[AlertRule],
        window_ms: int = 60_000,
        responders: Iterable[str] = (),
    ):
        self.registry = registry
        self.policy = policy
        self.side_view = side_view
        self.view_org = view_org
        self.rules = list(rules)
        self.window_ms = window_ms
        self.responders = list(responders)
        self.shipments: Dict[str, Shipment] = {}
        self.handovers: Dict[str, HandoverRecord] = {}
        self.cursors: Dict[str, Cursor] = {}
        self.seen: Dict[str, Set[Tuple[str, int]]] = {}
        # alert_id -> fact for violations observed in applied batches
        self.expected: Dict[str, Dict[str, AlertFact]] = {}
        self.alerted: Dict[str, Set[str]] = {}
        self.records: List[dict] = []
        self.transitions: List[dict] = []
        self.outbox: List[dict] = []
        self.results: List[ApplyResult] = []

    # helpers

    def _ship(self, sid: str) -> Shipment:
        try:
            return self.shipments[sid]
        except KeyError:
            raise NotFound(f"unknown shipment {sid!r}") from None

    def _move(self, ship: Shipment, event: ShipmentEvent, ident: Identity, tx: Transaction) -> Tuple[str, str]:
        target = validate_transition(ship.state, event, ident.role)
        before = ship.state
        ship.state = target
        self.transitions.append({"t_ms": tx.sim_time_ms, "shipment_id": ship.shipment_id, "event": event.value,
                                 "from": before.value, "to": target.value, "tx_id": tx.tx_id.hex()})
        return before.value, target.value

    def _record(self, tx: Transaction, doc: dict) -> None:
        from .attestation import SupervisoryRecord

        self.records.append(SupervisoryRecord.from_tx(tx, doc).to_json())

    # dispatch

    def apply(self, tx: Transaction) -> ApplyResult:
        try:
            res = self._apply(tx)
        except TrackError as exc:
            res = ApplyResult(tx.tx_id.hex(), False, f"{type(exc).__name__}: {exc}")
        except (KeyError, ValueError, TypeError) as exc:
            res = ApplyResult(tx.tx_id.hex(), False, f"Malformed: {exc}")
        self.results.append(res)
        return res

    def _apply(self, tx: Transaction) -> ApplyResult:
        ident = self.registry.authenticate(tx)
        decision = check_access(self.policy, ident, tx.layer, Action.Write, tx.shipment_id or None)
        if not decision:
            raise WrongRole(f"{ident.identity_id}: {decision}")
        handler = getattr(self, f"_on_{tx.tx_type.value}", None)
        if handler is None:
            return ApplyResult(tx.tx_id.hex(), True)
        moved = handler(tx, ident)
        return ApplyResult(tx.tx_id.hex(), True, "", moved)

    def _doc(self, tx: Transaction) -> dict:
        doc = json.loads(tx.payload)
        if doc.get("shipment_id", tx.shipment_id) != tx.shipment_id:
            raise WrongParty("body and envelope name different shipments")
        return doc

    def _on_PermitRequest(self, tx, ident):
        doc = self._doc(tx)
        sid = tx.shipment_id
        if sid in self.shipments:
            raise WrongState(f"{sid} already exists")
        if doc["consignor"] != ident.identity_id:
            raise WrongParty("only the named consignor may request the permit")
        ship = Shipment(sid, doc["consignor"], doc["carrier"], doc["consignee"], doc["regulator"],
                        route_anchor=PrivateAnchor.from_json(doc["route_anchor"]) if doc.get("route_anchor") else None)
        moved = self._move(ship, ShipmentEvent.RequestPermit, ident, tx)
        self.shipments[sid] = ship
        self._record(tx, doc)
        return moved

    def _on_PermitApproval(self, tx, ident):
        doc = self._doc(tx)
        ship = self._ship(tx.shipment_id)
        if ident.identity_id != ship.regulator:
            raise WrongParty(f"{ident.identity_id} is not the designated regulator")
        moved = self._move(ship, ShipmentEvent.ApprovePermit, ident, tx)
        ship.permit_tx = bytes.fromhex(doc["permit_tx"])
        self._record(tx, doc)
        return moved

    def _on_StatusUpdate(self, tx, ident):
        doc = self._doc(tx)
        ship = self._ship(tx.shipment_id)
        event = ShipmentEvent(doc["event"])
        if event is ShipmentEvent.StartTransport:
            if ident.identity_id != ship.carrier:
                raise WrongParty("only the current carrier may start transport")
            if ship.route_anchor is None:
                raise WrongState("no route filed")
            moved = self._move(ship, event, ident, tx)
        elif event is ShipmentEvent.BeginHandover:
            if ident.identity_id != ship.carrier:
                raise WrongParty("only the current carrier may hand over")
            to = self.registry.get(doc["to"])
            if to.role not in (Role.Carrier, Role.Consignee) or to.identity_id == ident.identity_id:
                raise WrongParty(f"cannot hand over to {to.identity_id}")
            if to.role is Role.Consignee and to.identity_id != ship.consignee:
                raise WrongParty("delivery must go to the named consignee")
            moved = self._move(ship, event, ident, tx)
            self.handovers[ship.shipment_id] = HandoverRecord(
                ship.shipment_id, ident.identity_id, to.identity_id, PrivateAnchor.from_json(doc["details_anchor"]))
        elif event is ShipmentEvent.ClearIncident:
            if ident.identity_id != ship.regulator:
                raise WrongParty("only the designated regulator may clear an incident")
            moved = self._move(ship, event, ident, tx)
            ship.open_alerts.clear()
            for rid in self.responders:
                self.registry.unassign(rid, ship.shipment_id)
        elif event is ShipmentEvent.Archive:
            if ident.identity_id not in (ship.consignor, ship.regulator):
                raise WrongParty("archive needs the consignor and the regulator")
            validate_transition(ship.state, event, ident.role)
            if ident.identity_id in ship.archive_signoffs:
                raise AlreadySigned(ident.identity_id)
            ship.archive_signoffs.add(ident.identity_id)
            moved = None
            if ship.archive_signoffs >= {ship.consignor, ship.regulator}:
                moved = self._move(ship, event, ident, tx)
        else:
            raise IllegalTransition(ship.state.value, event.value)
        self._record(tx, doc)
        ship.check_invariants()
        return moved

    def _on_SensorBatch(self, tx, ident):
        ship = self._ship(tx.shipment_id)
        if ident.identity_id != ship.carrier:
            raise WrongParty("telemetry must come from the current carrier")
        if ship.state not in (ShipmentState.InTransit, ShipmentState.Incident, ShipmentState.HandoverPending):
            raise WrongState(f"{ship.shipment_id} is {ship.state.value}")
        anchor: PrivateAnchor = tx.body
        org = self.view_org or self.registry.get(ship.regulator).org_id
        payload, salt = self.side_view.get(org, anchor.anchor)
        if not reveal_and_verify(anchor.anchor, payload, salt):
            raise BadSignature("side-store payload does not match its anchor")
        _, readings = parse_batch(payload)
        verdict = validate_sensor_batch(tx, readings, ident, self.cursors.setdefault(ship.shipment_id, {}))
        if not verdict:
            raise BatchRejected(verdict)
        if ship.state in ALERT_STATES:
            seen = self.seen.setdefault(ship.shipment_id, set())
            for f in find_violations(readings, self.rules, self.window_ms, seen):
                self.expected.setdefault(ship.shipment_id, {})[f.alert_id] = f
        return None

    def _on_Alert(self, tx, ident):
        doc = self._doc(tx)
        ship = self._ship(tx.shipment_id)
        alert_id = f"{doc['rule_id']}@{doc['window'][0]}"
        fact = self.expected.get(ship.shipment_id, {}).get(alert_id)
        if fact is None or fact.severity.value != doc["severity"] or fact.sensor.value != doc["sensor"]:
            raise WrongState(f"alert {alert_id} is not backed by an applied batch")
        done = self.alerted.setdefault(ship.shipment_id, set())
        if alert_id in done:
            raise AlreadySigned(f"alert {alert_id} already raised")
        done.add(alert_id)
        ship.open_alerts.add(alert_id)
        moved = None
        if fact.severity is Severity.Critical and ship.state is ShipmentState.InTransit:
            moved = self._move(ship, ShipmentEvent.CriticalAlert, ident, tx)
            for rid in self.responders:
                self.registry.assign(rid, ship.shipment_id)
        self.outbox.append({"t_ms": tx.sim_time_ms, "channel": "emergency" if fact.severity is Severity.Critical
                            else "regulator", "shipment_id": ship.shipment_id, "rule_id": fact.rule_id,
                            "severity": fact.severity.value, "tx_id": tx.tx_id.hex()})
        self._record(tx, doc)
        return moved

    def _on_handover(self, tx, ident, event):
        doc = self._doc(tx)
        ship = self._ship(tx.shipment_id)
        pending = self.handovers.get(ship.shipment_id)
        if pending is None or (doc["from"], doc["to"]) != (pending.from_id, pending.to_id):
            raise WrongParty("confirmation does not match the pending handover")
        if doc["details_anchor"] != pending.details_anchor.anchor.hex():
            raise WrongParty("confirmation names different handover details")
        if ident.identity_id != pending.to_id:
            raise WrongParty("the receiving party submits the confirmation")
        if not verify_handover_body(doc, self.registry):
            raise BadSignature("handover needs two verifying signatures")
        moved = self._move(ship, event, ident, tx)
        ship.carrier = pending.to_id if event is ShipmentEvent.HandoverToCarrier else ship.carrier
        del self.handovers[ship.shipment_id]
        self._record(tx, doc)
        return moved

    def _on_Handover(self, tx, ident):
        return self._on_handover(tx, ident, ShipmentEvent.HandoverToCarrier)

    def _on_Delivery(self, tx, ident):
        return self._on_handover(tx, ident, ShipmentEvent.HandoverToConsignee)

    def _on_Attestation(self, tx, ident):
        doc = self._doc(tx)
        if ident.role not in REGULATORS and ident.role is not Role.Auditor:
            raise WrongRole(f"{ident.role.value} may not attest")
        self._record(tx, doc)
        return None

    def missing_alerts(self) -> Dict[str, List[str]]:
        """Violations seen in applied batches that never got an alert tx."""
        out = {}
        for sid, facts in self.expected.items():
            gone = sorted(set(facts) - self.alerted.get(sid, set()))
            if gone:
                out[sid] = gone
        return out


class BatchRejected(TrackError):
    def __init__(self, verdict: Verdict):
        super().__init__(f"{verdict}: {verdict.detail}")
        self.verdict = verdict
