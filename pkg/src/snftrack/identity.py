"""Consortium membership: organizations, identities and Ed25519 signatures."""

from __future__ import annotations

import json
from functools import lru_cache
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Set

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .encoding import OPS, sha256
from .errors import (
    BadSignature,
    DuplicateKey,
    RevokedIdentity,
    UnknownIdentity,
    UnknownOrganization,
)


class Role(str, Enum):
    Consignor = "Consignor"
    Carrier = "Carrier"
    Consignee = "Consignee"
    RegulatorNational = "RegulatorNational"
    RegulatorRegional = "RegulatorRegional"
    RegulatorInternational = "RegulatorInternational"
    EmergencyResponder = "EmergencyResponder"
    Auditor = "Auditor"
    PublicObserver = "PublicObserver"


REGULATORS = frozenset({Role.RegulatorNational, Role.RegulatorRegional, Role.RegulatorInternational})


class OrgType(str, Enum):
    Producer = "Producer"
    Transport = "Transport"
    Receiver = "Receiver"
    Regulator = "Regulator"
    Emergency = "Emergency"
    Audit = "Audit"
    Public = "Public"


@dataclass
class Organization:
    org_id: str
    name: str
    org_type: OrgType
    member_ids: Set[str] = field(default_factory=set)


@dataclass
class Identity:
    identity_id: str
    org_id: str
    role: Role
    public_key: bytes
    assigned_shipments: Set[str] = field(default_factory=set)
    revoked: bool = False
    # Stored verbatim, never interpreted.
    clearance: str = ""


@dataclass(frozen=True)
class Signature:
    signer_id: str
    value: bytes
    over: bytes  # sha256 of the signed message

    def to_json(self) -> dict:
        return {"signer_id": self.signer_id, "value": self.value.hex(), "over": self.over.hex()}

    @classmethod
    def from_json(cls, d: dict) -> "Signature":
        return cls(d["signer_id"], bytes.fromhex(d["value"]), bytes.fromhex(d["over"]))


# -- keys and signatures -----------------------------------------------------


def private_key_from_seed(seed: bytes | str) -> Ed25519PrivateKey:
    """Derive a deterministic private key; the 32-byte Ed25519 seed is sha256(seed)."""
    if isinstance(seed, str):
        seed = seed.encode()
    return Ed25519PrivateKey.from_private_bytes(sha256(seed))


def public_bytes(key: Ed25519PrivateKey | Ed25519PublicKey) -> bytes:
    if isinstance(key, Ed25519PrivateKey):
        key = key.public_key()
    return key.public_bytes(Encoding.Raw, PublicFormat.Raw)


def sign(private_key: Ed25519PrivateKey, message: bytes, signer_id: str = "") -> Signature:
    OPS["signatures"] += 1
    return Signature(signer_id, private_key.sign(message), sha256(message))


def verify(public_key: bytes, message: bytes, signature: Signature) -> bool:
    OPS["verifications"] += 1
    if signature.over != sha256(message):
        return False
    return _ed25519_ok(bytes(public_key), bytes(message), bytes(signature.value))


@lru_cache(maxsize=1 << 16)
def _ed25519_ok(public_key: bytes, message: bytes, value: bytes) -> bool:
    # Pure in all three inputs, so memoizing is safe; repeated chain checks hit the cache.
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(value, message)
    except (InvalidSignature, ValueError):
        return False
    return True


@dataclass
class Signer:
    """An identity id paired with its private key."""

    identity_id: str
    private_key: Ed25519PrivateKey

    @classmethod
    def from_seed(cls, identity_id: str, seed: bytes | str) -> "Signer":
        return cls(identity_id, private_key_from_seed(seed))

    @property
    def public_key(self) -> bytes:
        return public_bytes(self.private_key)

    def sign(self, message: bytes) -> Signature:
        return sign(self.private_key, message, self.identity_id)


# -- registry ----------------------------------------------------------------


class Registry:
    """Single-writer registry of organizations, identities and validator nodes."""

    def __init__(self):
        self.organizations: Dict[str, Organization] = {}
        self.identities: Dict[str, Identity] = {}
        self.validators: Dict[str, bytes] = {}
        self._keys: Dict[bytes, str] = {}

    def add_organization(self, org_id: str, name: str = "", org_type: OrgType | str = OrgType.Producer) -> Organization:
        if org_id in self.organizations:
            raise ValueError(f"organization {org_id!r} already registered")
        org = Organization(org_id, name or org_id, OrgType(org_type))
        self.organizations[org_id] = org
        return org

    def register_identity(
        self,
        org_id: str,
        role: Role | str,
        public_key: bytes,
        identity_id: Optional[str] = None,
        clearance: str = "",
    ) -> Identity:
        if org_id not in self.organizations:
            raise UnknownOrganization(org_id)
        if not isinstance(public_key, (bytes, bytearray)) or len(public_key) != 32:
            raise ValueError("public key must be 32 raw Ed25519 bytes")
        public_key = bytes(public_key)
        if public_key in self._keys:
            raise DuplicateKey(f"key already registered to {self._keys[public_key]}")
        if identity_id is None:
            n = len(self.organizations[org_id].member_ids) + 1
            identity_id = f"{org_id}/{n}"
            while identity_id in self.identities:
                n += 1
                identity_id = f"{org_id}/{n}"
        elif identity_id in self.identities:
            raise ValueError(f"identity {identity_id!r} already registered")
        ident = Identity(identity_id, org_id, Role(role), public_key, clearance=clearance)
        self.identities[identity_id] = ident
        self.organizations[org_id].member_ids.add(identity_id)
        self._keys[public_key] = identity_id
        return ident

    def add_validator(self, node_id: str, public_key: bytes) -> None:
        self.validators[node_id] = bytes(public_key)

    def get(self, identity_id: str) -> Identity:
        try:
            return self.identities[identity_id]
        except KeyError:
            raise UnknownIdentity(identity_id) from None

    def revoke(self, identity_id: str) -> Identity:
        ident = self.get(identity_id)
        ident.revoked = True
        return ident

    def assign(self, identity_id: str, shipment_id: str) -> None:
        self.get(identity_id).assigned_shipments.add(shipment_id)

    def unassign(self, identity_id: str, shipment_id: str) -> None:
        self.get(identity_id).assigned_shipments.discard(shipment_id)

    def by_role(self, role: Role) -> List[Identity]:
        return [i for i in self.identities.values() if i.role == role]

    def authenticate(self, tx) -> Identity:
        """Return the submitter of ``tx`` if its signature checks out.

        ``tx`` needs ``submitter``, ``signature`` and ``signing_bytes()``.
        """
        ident = self.get(tx.submitter)
        if ident.revoked:
            raise RevokedIdentity(ident.identity_id)
        sig = tx.signature
        if sig is None or sig.signer_id != ident.identity_id:
            raise BadSignature(f"signature does not belong to {ident.identity_id}")
        if not verify(ident.public_key, tx.signing_bytes(), sig):
            raise BadSignature(f"signature check failed for {ident.identity_id}")
        return ident

    # -- bootstrap file ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "organizations": [
                {"org_id": o.org_id, "name": o.name, "org_type": o.org_type.value}
                for o in sorted(self.organizations.values(), key=lambda o: o.org_id)
            ],
            "identities": [
                {
                    "identity_id": i.identity_id,
                    "org_id": i.org_id,
                    "role": i.role.value,
                    "public_key": i.public_key.hex(),
                    "assigned_shipments": sorted(i.assigned_shipments),
                    "revoked": i.revoked,
                    "clearance": i.clearance,
                }
                for i in sorted(self.identities.values(), key=lambda i: i.identity_id)
            ],
            "nodes": [{"node_id": n, "public_key": k.hex()} for n, k in sorted(self.validators.items())],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Registry":
        reg = cls()
        for o in doc.get("organizations", []):
            reg.add_organization(o["org_id"], o.get("name", ""), o.get("org_type", OrgType.Producer))
        for i in doc.get("identities", []):
            ident = reg.register_identity(
                i["org_id"],
                i["role"],
                bytes.fromhex(i["public_key"]),
                identity_id=i.get("identity_id"),
                clearance=i.get("clearance", ""),
            )
            ident.assigned_shipments.update(i.get("assigned_shipments", []))
            ident.revoked = bool(i.get("revoked", False))
        for n in doc.get("nodes", []):
            reg.add_validator(n["node_id"], bytes.fromhex(n["public_key"]))
        return reg

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Registry":
        return cls.from_json(json.loads(Path(path).read_text()))


def load_keystore(path: str | Path) -> Dict[str, Signer]:
    """Keystore file: ``{identity_id: private_seed_hex}``."""
    doc = json.loads(Path(path).read_text())
    return {
        ident: Signer(ident, Ed25519PrivateKey.from_private_bytes(bytes.fromhex(h)))
        for ident, h in doc.items()
    }


def keystore_json(signers: Iterable[Signer]) -> dict:
    from cryptography.hazmat.primitives.serialization import NoEncryption, PrivateFormat

    return {
        s.identity_id: s.private_key.private_bytes(Encoding.Raw, PrivateFormat.Raw, NoEncryption()).hex()
        for s in signers
    }
