"""Binary Merkle tree over opaque leaves; the last node is duplicated on odd levels."""

from __future__ import annotations

from typing import List, Sequence, Tuple

from .encoding import LEAF, NODE, tagged_hash
from .errors import EmptyList

# One proof step: (sibling digest, sibling_is_left).
ProofStep = Tuple[bytes, bool]


def leaf_hash(data: bytes) -> bytes:
    return tagged_hash(LEAF, data)


def node_hash(left: bytes, right: bytes) -> bytes:
    return tagged_hash(NODE, left + right)


def _levels(leaves: Sequence[bytes]) -> List[List[bytes]]:
    if not leaves:
        raise EmptyList("merkle tree needs at least one leaf")
    level = [leaf_hash(x) for x in leaves]
    levels = [level]
    while len(level) > 1:
        if len(level) % 2:
            level = level + [level[-1]]
        level = [node_hash(level[i], level[i + 1]) for i in range(0, len(level), 2)]
        levels.append(level)
    return levels


def merkle_root(leaves: Sequence[bytes]) -> bytes:
    return _levels(leaves)[-1][0]


def inclusion_proof(leaves: Sequence[bytes], index: int) -> List[ProofStep]:
    return MerkleTree(leaves).proof(index)


class MerkleTree:
    """Keeps every level so repeated proofs cost no rehashing."""

    def __init__(self, leaves: Sequence[bytes]):
        self.levels = _levels(leaves)

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    def __len__(self) -> int:
        return len(self.levels[0])

    def proof(self, index: int) -> List[ProofStep]:
        return _proof(self.levels, index)


def _proof(levels: List[List[bytes]], index: int) -> List[ProofStep]:
    if not 0 <= index < len(levels[0]):
        raise IndexError(index)
    proof = []
    for level in levels[:-1]:
        sib = index ^ 1
        if sib >= len(level):
            sib = index  # duplicated last node
        proof.append((level[sib], sib < index))
        index //= 2
    return proof


def verify_inclusion(leaf: bytes, proof: Sequence[ProofStep], root: bytes) -> bool:
    h = leaf_hash(leaf)
    for sibling, is_left in proof:
        h = node_hash(sibling, h) if is_left else node_hash(h, sibling)
    return h == root


def proof_to_json(proof: Sequence[ProofStep]) -> list:
    return [[s.hex(), left] for s, left in proof]


def proof_from_json(doc: list) -> List[ProofStep]:
    return [(bytes.fromhex(s), bool(left)) for s, left in doc]
