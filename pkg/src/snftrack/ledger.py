"""Hash-chained block store with Merkle-rooted transactions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .encoding import HEADER, OPS, TX, ZERO_HASH, canonical, tagged_hash
from .errors import InvalidTx, NotFound, QuorumNotMet, TrackError
from .identity import Signature, Signer, verify
from .layers import LayerTag, PrivateAnchor
from .merkle import ProofStep, inclusion_proof, merkle_root, verify_inclusion


class TxType(str, Enum):
    PermitRequest = "PermitRequest"
    PermitApproval = "PermitApproval"
    SensorBatch = "SensorBatch"
    Alert = "Alert"
    Handover = "Handover"
    Delivery = "Delivery"
    Attestation = "Attestation"
    PublicAggregate = "PublicAggregate"
    AdminPolicy = "AdminPolicy"
    StatusUpdate = "StatusUpdate"


Body = Union[bytes, PrivateAnchor]


class ParseError(TrackError):
    pass


@dataclass
class Transaction:
    tx_type: TxType
    submitter: str
    sim_time_ms: int
    layer: LayerTag
    body: Body
    shipment_id: str = ""
    nonce: int = 0
    signature: Optional[Signature] = None
    tx_id: bytes = b""

    def _fields(self) -> dict:
        if isinstance(self.body, PrivateAnchor):
            body = {"anchor": self.body.anchor, "orgs": list(self.body.authorized_orgs), "collection": self.body.collection_id}
        else:
            body = {"inline": self.body}
        return {
            "tx_type": self.tx_type,
            "submitter": self.submitter,
            "sim_time_ms": self.sim_time_ms,
            "layer": self.layer,
            "body": body,
            "shipment_id": self.shipment_id,
            "nonce": self.nonce,
        }

    def signing_bytes(self) -> bytes:
        return canonical(self._fields())

    def compute_id(self) -> bytes:
        sig = None
        if self.signature is not None:
            sig = {"signer_id": self.signature.signer_id, "value": self.signature.value, "over": self.signature.over}
        return tagged_hash(TX, canonical({"fields": self._fields(), "signature": sig}))

    def check_layer(self) -> None:
        if self.layer is LayerTag.Operational and not isinstance(self.body, PrivateAnchor):
            raise InvalidTx("operational transactions must carry an anchor, not inline data")
        if self.layer is not LayerTag.Operational and isinstance(self.body, PrivateAnchor):
            raise InvalidTx(f"{self.layer.value} transactions carry inline payloads")

    @property
    def payload(self) -> bytes:
        if isinstance(self.body, PrivateAnchor):
            raise TypeError("anchored transaction has no inline payload")
        return self.body

    @classmethod
    def create(
        cls,
        signer: Signer,
        tx_type: TxType,
        sim_time_ms: int,
        layer: LayerTag,
        body: Body,
        shipment_id: str = "",
        nonce: int = 0,
    ) -> "Transaction":
        tx = cls(TxType(tx_type), signer.identity_id, int(sim_time_ms), LayerTag(layer), body, shipment_id, nonce)
        tx.check_layer()
        tx.signature = signer.sign(tx.signing_bytes())
        tx.tx_id = tx.compute_id()
        return tx

    def to_json(self) -> dict:
        if isinstance(self.body, PrivateAnchor):
            body = {"anchor": self.body.to_json()}
        else:
            body = {"inline": self.body.hex()}
        return {
            "tx_id": self.tx_id.hex(),
            "tx_type": self.tx_type.value,
            "submitter": self.submitter,
            "sim_time_ms": self.sim_time_ms,
            "layer": self.layer.value,
            "shipment_id": self.shipment_id,
            "nonce": self.nonce,
            "body": body,
            "signature": self.signature.to_json() if self.signature else None,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Transaction":
        b = d["body"]
        body: Body = PrivateAnchor.from_json(b["anchor"]) if "anchor" in b else bytes.fromhex(b["inline"])
        return cls(
            tx_type=TxType(d["tx_type"]),
            submitter=d["submitter"],
            sim_time_ms=int(d["sim_time_ms"]),
            layer=LayerTag(d["layer"]),
            body=body,
            shipment_id=d.get("shipment_id", ""),
            nonce=int(d.get("nonce", 0)),
            signature=Signature.from_json(d["signature"]) if d.get("signature") else None,
            tx_id=bytes.fromhex(d["tx_id"]),
        )


def commit_message(header_hash: bytes) -> bytes:
    return b"commit:" + header_hash


@dataclass
class Block:
    height: int
    prev_hash: bytes
    merkle_root: bytes
    sim_time_ms: int
    proposer: str
    txs: List[Transaction]
    commit_signatures: List[Signature] = field(default_factory=list)
    hash: bytes = b""

    def header(self) -> dict:
        return {
            "height": self.height,
            "prev_hash": self.prev_hash,
            "merkle_root": self.merkle_root,
            "sim_time_ms": self.sim_time_ms,
            "proposer": self.proposer,
        }

    def header_hash(self) -> bytes:
        return tagged_hash(HEADER, canonical(self.header()))

    def to_json(self) -> dict:
        return {
            "height": self.height,
            "prev_hash": self.prev_hash.hex(),
            "merkle_root": self.merkle_root.hex(),
            "sim_time_ms": self.sim_time_ms,
            "proposer": self.proposer,
            "hash": self.hash.hex(),
            "txs": [t.to_json() for t in self.txs],
            "commit_signatures": [s.to_json() for s in self.commit_signatures],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Block":
        return cls(
            height=int(d["height"]),
            prev_hash=bytes.fromhex(d["prev_hash"]),
            merkle_root=bytes.fromhex(d["merkle_root"]),
            sim_time_ms=int(d["sim_time_ms"]),
            proposer=d["proposer"],
            txs=[Transaction.from_json(t) for t in d["txs"]],
            commit_signatures=[Signature.from_json(s) for s in d["commit_signatures"]],
            hash=bytes.fromhex(d["hash"]),
        )


@dataclass(frozen=True)
class ChainCheck:
    ok: bool
    height: Optional[int] = None
    reason: Optional[str] = None

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "Ok" if self.ok else f"FirstViolation({self.height}, {self.reason})"


OK = ChainCheck(True)


def majority(n: int) -> int:
    return n // 2 + 1


class LedgerStore:
    """Append-only block sequence plus a tx_id -> (height, offset) index.

    ``validators`` maps node ids to commit-signing keys; when present, every
    appended block needs ``quorum`` distinct valid commit signatures.
    ``authenticator`` (usually ``Registry.authenticate``) checks each tx.
    """

    def __init__(self, validators: Optional[Mapping[str, bytes]] = None, quorum: Optional[int] = None, authenticator=None):
        self.blocks: List[Block] = []
        self.tx_index: Dict[bytes, Tuple[int, int]] = {}
        self.validators = dict(validators or {})
        self.quorum = quorum if quorum is not None else (majority(len(self.validators)) if self.validators else 0)
        self.authenticator = authenticator

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def tip_hash(self) -> bytes:
        return self.blocks[-1].hash if self.blocks else ZERO_HASH

    def build_block(self, txs: Sequence[Transaction], proposer: str, sim_time_ms: int) -> Block:
        if not txs:
            raise InvalidTx("a block needs at least one transaction")
        seen = set()
        for tx in txs:
            if tx.tx_id != tx.compute_id():
                raise InvalidTx(f"tx id mismatch for {tx.tx_id.hex()[:16]}")
            if tx.tx_id in seen or tx.tx_id in self.tx_index:
                raise InvalidTx(f"duplicate tx {tx.tx_id.hex()[:16]}")
            seen.add(tx.tx_id)
            tx.check_layer()
            if self.authenticator is not None:
                try:
                    self.authenticator(tx)
                except TrackError as exc:
                    raise InvalidTx(f"{tx.tx_id.hex()[:16]}: {exc}") from exc
        block = Block(
            height=len(self.blocks),
            prev_hash=self.tip_hash,
            merkle_root=merkle_root([t.tx_id for t in txs]),
            sim_time_ms=int(sim_time_ms),
            proposer=proposer,
            txs=list(txs),
        )
        block.hash = block.header_hash()
        return block

    def count_valid_commits(self, block: Block) -> int:
        msg = commit_message(block.hash)
        good = set()
        for sig in block.commit_signatures:
            key = self.validators.get(sig.signer_id)
            if key is not None and sig.signer_id not in good and verify(key, msg, sig):
                good.add(sig.signer_id)
        return len(good)

    def append_block(
        self,
        txs: Sequence[Transaction],
        proposer: str,
        commit_sigs: Iterable[Signature],
        sim_time_ms: int = 0,
    ) -> Block:
        block = self.build_block(txs, proposer, sim_time_ms)
        block.commit_signatures = list(commit_sigs)
        if self.validators and self.count_valid_commits(block) < self.quorum:
            raise QuorumNotMet(f"block {block.height}: fewer than {self.quorum} valid commit signatures")
        self._push(block)
        return block

    def _push(self, block: Block) -> None:
        self.blocks.append(block)
        for i, tx in enumerate(block.txs):
            self.tx_index[tx.tx_id] = (block.height, i)
        OPS["bytes_written"] += len(json.dumps(block.to_json(), sort_keys=True)) + 1

    def query_tx(self, tx_id: bytes) -> Tuple[Transaction, List[ProofStep], int]:
        try:
            height, offset = self.tx_index[tx_id]
        except KeyError:
            raise NotFound(tx_id.hex()) from None
        block = self.blocks[height]
        proof = inclusion_proof([t.tx_id for t in block.txs], offset)
        return block.txs[offset], proof, height

    def transactions(self) -> Iterable[Tuple[int, Transaction]]:
        for b in self.blocks:
            for tx in b.txs:
                yield b.height, tx

    # -- persistence ---------------------------------------------------------

    def dumps(self) -> str:
        return "".join(json.dumps(b.to_json(), sort_keys=True, separators=(",", ":")) + "\n" for b in self.blocks)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str, **kwargs) -> "LedgerStore":
        store = cls(**kwargs)
        for n, line in enumerate(text.splitlines()):
            if not line.strip():
                continue
            try:
                block = Block.from_json(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise ParseError(f"line {n + 1}: {exc}") from exc
            store.blocks.append(block)
            for i, tx in enumerate(block.txs):
                store.tx_index.setdefault(tx.tx_id, (block.height, i))
        return store

    @classmethod
    def load(cls, path: str | Path, **kwargs) -> "LedgerStore":
        return cls.loads(Path(path).read_text(), **kwargs)


def verify_chain(
    blocks: Union[LedgerStore, Sequence[Block]],
    validators: Optional[Mapping[str, bytes]] = None,
    quorum: Optional[int] = None,
) -> ChainCheck:
    """Recompute every digest and link; report the lowest violating height.

    Commit signatures are checked only when ``validators`` is given.
    """
    if isinstance(blocks, LedgerStore):
        if validators is None and blocks.validators:
            validators, quorum = blocks.validators, blocks.quorum
        blocks = blocks.blocks
    if validators and quorum is None:
        quorum = majority(len(validators))
    prev = ZERO_HASH
    for expect_height, block in enumerate(blocks):
        h = expect_height
        for tx in block.txs:
            if tx.compute_id() != tx.tx_id:
                return ChainCheck(False, h, "TxIdMismatch")
        if not block.txs or merkle_root([t.tx_id for t in block.txs]) != block.merkle_root:
            return ChainCheck(False, h, "MerkleMismatch")
        if block.prev_hash != prev:
            return ChainCheck(False, h, "PrevHashMismatch")
        header_hash = block.header_hash()
        if block.height != expect_height or header_hash != block.hash:
            return ChainCheck(False, h, "HeaderMismatch")
        for tx in block.txs:
            try:
                tx.check_layer()
            except InvalidTx:
                return ChainCheck(False, h, "LayerViolation")
        if validators:
            good = set()
            for sig in block.commit_signatures:
                key = validators.get(sig.signer_id)
                if key is not None and verify(key, commit_message(header_hash), sig):
                    good.add(sig.signer_id)
            if len(good) < quorum or len(good) != len(block.commit_signatures):
                return ChainCheck(False, h, "CommitSignatureInvalid")
        prev = header_hash
    return OK


def verify_tx_inclusion(tx_id: bytes, proof: Sequence[ProofStep], root: bytes) -> bool:
    return verify_inclusion(tx_id, proof, root)
