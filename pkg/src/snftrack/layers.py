"""Three confidentiality tiers, private-data anchoring and the access policy engine."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Tuple

from .encoding import sha256
from .errors import EmptyAuthSet, NotFound, UnknownKind
from .identity import Identity, Role


class LayerTag(str, Enum):
    Operational = "Operational"
    Supervisory = "Supervisory"
    Public = "Public"


class Action(str, Enum):
    Read = "Read"
    Write = "Write"


class Rule(str, Enum):
    Allow = "allow"
    Deny = "deny"
    AllowIfAssigned = "allow_if_assigned"


class DenyReason(str, Enum):
    RoleForbidden = "RoleForbidden"
    NotAssigned = "NotAssigned"
    WriteForbidden = "WriteForbidden"


@dataclass(frozen=True)
class Decision:
    allowed: bool
    reason: Optional[DenyReason] = None

    def __bool__(self) -> bool:
        return self.allowed

    def __str__(self) -> str:
        return "Allow" if self.allowed else f"Deny({self.reason.value})"


ALLOW = Decision(True)


def _default_matrix() -> Dict[Tuple[Role, LayerTag, Action], Rule]:
    A, D, AA = Rule.Allow, Rule.Deny, Rule.AllowIfAssigned
    Op, Sup, Pub = LayerTag.Operational, LayerTag.Supervisory, LayerTag.Public
    R, W = Action.Read, Action.Write
    rows = {
        #                          Op.R  Op.W  Sup.R Sup.W Pub.R Pub.W
        Role.Consignor:              (AA,   AA,   AA,   AA,   A,    D),
        Role.Carrier:                (AA,   AA,   AA,   AA,   A,    D),
        Role.Consignee:              (AA,   AA,   AA,   AA,   A,    D),
        Role.RegulatorNational:      (AA,   D,    A,    A,    A,    A),
        Role.RegulatorRegional:      (D,    D,    A,    A,    A,    D),
        Role.RegulatorInternational: (D,    D,    A,    A,    A,    D),
        # Responders are assigned only while their shipment is in Incident.
        Role.EmergencyResponder:     (AA,   D,    AA,   D,    A,    D),
        Role.Auditor:                (D,    D,    A,    A,    A,    D),
        Role.PublicObserver:         (D,    D,    D,    D,    A,    D),
    }
    cells = [(Op, R), (Op, W), (Sup, R), (Sup, W), (Pub, R), (Pub, W)]
    return {(role, layer, act): rules[i] for role, rules in rows.items() for i, (layer, act) in enumerate(cells)}


@dataclass(frozen=True)
class AccessPolicy:
    rules: Mapping[Tuple[Role, LayerTag, Action], Rule] = field(default_factory=_default_matrix)

    @classmethod
    def default(cls) -> "AccessPolicy":
        return cls()

    def rule(self, role: Role, layer: LayerTag, action: Action) -> Rule:
        return self.rules.get((role, layer, action), Rule.Deny)

    def to_json(self) -> dict:
        return {
            f"{r.value}.{l.value}.{a.value}": self.rule(r, l, a).value
            for r in Role
            for l in LayerTag
            for a in Action
        }

    @classmethod
    def from_json(cls, doc: Mapping[str, str]) -> "AccessPolicy":
        rules = {}
        for key, val in doc.items():
            try:
                role, layer, action = key.split(".")
                rules[(Role(role), LayerTag(layer), Action(action))] = Rule(val)
            except ValueError as exc:
                raise ValueError(f"bad policy entry {key!r}: {val!r}") from exc
        return cls(rules)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "AccessPolicy":
        return cls.from_json(json.loads(Path(path).read_text()))


def check_access(
    policy: AccessPolicy,
    identity: Identity,
    layer: LayerTag,
    action: Action,
    shipment_id: Optional[str] = None,
) -> Decision:
    rule = policy.rule(identity.role, layer, action)
    if rule is Rule.Allow:
        return ALLOW
    if rule is Rule.AllowIfAssigned:
        if shipment_id is not None and shipment_id in identity.assigned_shipments:
            return ALLOW
        return Decision(False, DenyReason.NotAssigned)
    if action is Action.Write:
        return Decision(False, DenyReason.WriteForbidden)
    return Decision(False, DenyReason.RoleForbidden)


# -- data classification -----------------------------------------------------


class PayloadKind(str, Enum):
    LocationPath = "LocationPath"
    RadiationDose = "RadiationDose"
    SecurityProgram = "SecurityProgram"
    PersonnelIdentity = "PersonnelIdentity"
    InteractionRecords = "InteractionRecords"
    ComplianceAudit = "ComplianceAudit"
    RegulatoryDecision = "RegulatoryDecision"
    AggregatedStats = "AggregatedStats"
    EnvStatement = "EnvStatement"


_KIND_LAYER = {
    PayloadKind.LocationPath: LayerTag.Operational,
    PayloadKind.RadiationDose: LayerTag.Operational,
    PayloadKind.SecurityProgram: LayerTag.Operational,
    PayloadKind.PersonnelIdentity: LayerTag.Operational,
    PayloadKind.InteractionRecords: LayerTag.Supervisory,
    PayloadKind.ComplianceAudit: LayerTag.Supervisory,
    PayloadKind.RegulatoryDecision: LayerTag.Public,
    PayloadKind.AggregatedStats: LayerTag.Public,
    PayloadKind.EnvStatement: LayerTag.Public,
}


def classify(tx_type, payload_kind) -> LayerTag:
    """Map a payload kind to its confidentiality tier; ``tx_type`` is informational."""
    try:
        return _KIND_LAYER[PayloadKind(payload_kind)]
    except ValueError:
        raise UnknownKind(str(payload_kind)) from None


# -- private data ------------------------------------------------------------


def anchor_digest(payload: bytes, salt: bytes) -> bytes:
    return sha256(payload + salt)


@dataclass(frozen=True)
class PrivateAnchor:
    anchor: bytes
    authorized_orgs: Tuple[str, ...]
    collection_id: str

    def to_json(self) -> dict:
        return {
            "anchor": self.anchor.hex(),
            "authorized_orgs": list(self.authorized_orgs),
            "collection_id": self.collection_id,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PrivateAnchor":
        return cls(bytes.fromhex(d["anchor"]), tuple(d["authorized_orgs"]), d["collection_id"])


class SideStores:
    """Per-organization off-ledger payload stores, keyed by anchor."""

    def __init__(self):
        self.stores: Dict[str, Dict[bytes, Tuple[bytes, bytes]]] = {}
        self.transfers: list = []

    def get(self, org_id: str, anchor: bytes) -> Tuple[bytes, bytes]:
        try:
            return self.stores[org_id][anchor]
        except KeyError:
            raise NotFound(f"{org_id} holds no payload for anchor {anchor.hex()[:16]}") from None

    def holders(self, anchor: bytes) -> set:
        return {org for org, store in self.stores.items() if anchor in store}

    def put_private(
        self,
        payload: bytes,
        salt: bytes,
        authorized_orgs: Iterable[str],
        collection_id: str = "default",
    ) -> PrivateAnchor:
        orgs = tuple(sorted(set(authorized_orgs)))
        if not orgs:
            raise EmptyAuthSet("at least one organization must be authorized")
        if len(salt) < 16:
            raise ValueError("salt must carry at least 128 bits")
        anchor = anchor_digest(payload, salt)
        for org in orgs:
            self.stores.setdefault(org, {})[anchor] = (payload, salt)
            self.transfers.append({"kind": "private_transfer", "org": org, "anchor": anchor.hex()})
        return PrivateAnchor(anchor, orgs, collection_id)

    def to_json(self, org_id: str) -> dict:
        return {
            a.hex(): {"payload": p.hex(), "salt": s.hex()}
            for a, (p, s) in sorted(self.stores.get(org_id, {}).items())
        }

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for org in sorted(self.stores):
            (d / f"{org}.json").write_text(json.dumps(self.to_json(org), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory: str | Path) -> "SideStores":
        ss = cls()
        for f in sorted(Path(directory).glob("*.json")):
            doc = json.loads(f.read_text())
            ss.stores[f.stem] = {
                bytes.fromhex(a): (bytes.fromhex(v["payload"]), bytes.fromhex(v["salt"])) for a, v in doc.items()
            }
        return ss


def reveal_and_verify(anchor: bytes, payload: bytes, salt: bytes) -> bool:
    return anchor_digest(payload, salt) == anchor
