import copy
import hashlib
import json
import random

import pytest

from snftrack.encoding import ZERO_HASH
from snftrack.errors import EmptyList, InvalidTx, NotFound, QuorumNotMet
from snftrack.identity import Role, Signer
from snftrack.layers import LayerTag
from snftrack.ledger import Block, LedgerStore, commit_message, verify_chain
from snftrack.merkle import inclusion_proof, merkle_root, verify_inclusion


def oracle_root(leaves):
    # Written independently: plain hashlib, explicit prefixes, odd-duplicate.
    level = [hashlib.sha256(b"\x00" + x).digest() for x in leaves]
    while len(level) > 1:
        nxt = []
        i = 0
        while i < len(level):
            left = level[i]
            right = level[i + 1] if i + 1 < len(level) else level[i]
            nxt.append(hashlib.sha256(b"\x01" + left + right).digest())
            i += 2
        level = nxt
    return level[0]


def test_merkle_small_cases():
    t1, t2 = b"t1", b"t2"
    assert merkle_root([t1]) == hashlib.sha256(b"\x00t1").digest()
    l1, l2 = hashlib.sha256(b"\x00t1").digest(), hashlib.sha256(b"\x00t2").digest()
    assert merkle_root([t1, t2]) == hashlib.sha256(b"\x01" + l1 + l2).digest()
    with pytest.raises(EmptyList):
        merkle_root([])


@pytest.mark.parametrize("n", [1, 2, 3, 5, 7, 8, 13, 64])
def test_merkle_matches_oracle_and_proofs(n):
    leaves = [f"tx-{i}".encode() for i in range(n)]
    root = merkle_root(leaves)
    assert root == oracle_root(leaves)
    for i, leaf in enumerate(leaves):
        proof = inclusion_proof(leaves, i)
        assert verify_inclusion(leaf, proof, root)
        assert not verify_inclusion(b"not-a-leaf", proof, root)


def test_genesis_and_links(world):
    store = world.store()
    b0 = world.commit(store, [world.tx(0)])
    assert b0.height == 0 and b0.prev_hash == ZERO_HASH
    b1 = world.commit(store, [world.tx(1), world.tx(2)])
    assert b1.prev_hash == b0.hash


def test_forged_commit_signature_fails_quorum(world):
    store = world.store()
    txs = [world.tx(0)]
    block = store.build_block(txs, "n0", 0)
    good = world.nodes["n0"].sign(commit_message(block.hash))
    forged = Signer.from_seed("n1", "not-n1").sign(commit_message(block.hash))
    with pytest.raises(QuorumNotMet):
        store.append_block(txs, "n0", [good, forged], 0)
    assert len(store) == 0


def test_append_rejects_unauthenticated_and_duplicate(world):
    store = world.store()
    tx = world.tx(0)
    tx.body = b"edited"
    tx.tx_id = tx.compute_id()
    with pytest.raises(InvalidTx):
        world.commit(store, [tx])
    t = world.tx(1)
    with pytest.raises(InvalidTx):
        world.commit(store, [t, t])


def test_operational_inline_rejected(world):
    with pytest.raises(InvalidTx):
        world.tx(0, role=Role.Carrier, layer=LayerTag.Operational, body=b"raw")


def _oracle_rebuild(blocks):
    """Independent recomputation of every link using the JSON form only."""
    from snftrack.encoding import canonical

    prev = bytes(32)
    for b in blocks:
        ids = [t.tx_id for t in b.txs]
        assert oracle_root(ids) == b.merkle_root
        assert b.prev_hash == prev
        header = canonical({"height": b.height, "prev_hash": b.prev_hash, "merkle_root": b.merkle_root,
                            "sim_time_ms": b.sim_time_ms, "proposer": b.proposer})
        prev = hashlib.sha256(b"\x02" + header).digest()
        assert prev == b.hash


def test_hundred_appends_verify(world):
    store = world.chain(100, per_block=1)
    assert verify_chain(store)
    _oracle_rebuild(store.blocks)


def test_flip_payload_byte_at_height_7(world):
    store = world.chain(50, per_block=2)
    assert verify_chain(store)
    tx = store.blocks[7].txs[1]
    tx.body = bytes([tx.body[0] ^ 1]) + tx.body[1:]
    res = verify_chain(store)
    assert (res.height, res.reason) == (7, "TxIdMismatch")


def test_self_consistent_forgery_breaks_next_link(world):
    store = world.chain(10)
    forged_store = LedgerStore()
    for b in store.blocks[:3]:
        forged_store.blocks.append(b)
    forged = forged_store.build_block([world.tx(900), world.tx(901)], "n1", 1500)
    blocks = store.blocks[:3] + [forged] + store.blocks[4:]
    res = verify_chain(blocks)
    assert (res.height, res.reason) == (4, "PrevHashMismatch")
    # With validator keys the forgery itself is caught.
    assert verify_chain(blocks, world.registry.validators).height == 3


def _mutations(block_json):
    """Every single-field mutation class of one serialized block."""
    def flip_hex(h):
        return ("1" if h[0] == "0" else "0") + h[1:]

    out = []
    for key in ("prev_hash", "merkle_root", "hash"):
        d = copy.deepcopy(block_json)
        d[key] = flip_hex(d[key])
        out.append((key, d))
    for key in ("sim_time_ms", "height"):
        d = copy.deepcopy(block_json)
        d[key] += 1
        out.append((key, d))
    d = copy.deepcopy(block_json)
    d["proposer"] += "x"
    out.append(("proposer", d))
    d = copy.deepcopy(block_json)
    d["commit_signatures"][0]["value"] = flip_hex(d["commit_signatures"][0]["value"])
    out.append(("commit_sig", d))
    for i in range(len(block_json["txs"])):
        for field in ("tx_id", "payload", "sim_time_ms", "submitter", "signature", "nonce", "shipment_id"):
            d = copy.deepcopy(block_json)
            t = d["txs"][i]
            if field == "tx_id":
                t["tx_id"] = flip_hex(t["tx_id"])
            elif field == "payload":
                t["body"]["inline"] = flip_hex(t["body"]["inline"])
            elif field == "signature":
                t["signature"]["value"] = flip_hex(t["signature"]["value"])
            elif field in ("sim_time_ms", "nonce"):
                t[field] += 1
            else:
                t[field] += "x"
            out.append((f"tx.{field}", d))
    return out


def test_mutation_battery_every_block_and_field(world):
    store = world.chain(12, per_block=2)
    lines = [b.to_json() for b in store.blocks]
    for h, bj in enumerate(lines):
        for name, mutated in _mutations(bj):
            blocks = [Block.from_json(x) for x in lines[:h]] + [Block.from_json(mutated)] + [
                Block.from_json(x) for x in lines[h + 1:]]
            res = verify_chain(blocks, world.registry.validators)
            assert not res, (h, name)
            assert res.height == h, (h, name, res)


def test_query_and_inclusion_sweep(world):
    rng = random.Random(3)
    store = world.store()
    k = 0
    for h in range(20):
        txs = []
        for _ in range(rng.randint(1, 9)):
            txs.append(world.tx(k))
            k += 1
        world.commit(store, txs, t=h)
    for _, tx in store.transactions():
        got, proof, height = store.query_tx(tx.tx_id)
        assert got is tx
        root = store.blocks[height].merkle_root
        assert verify_inclusion(tx.tx_id, proof, root)
        assert not verify_inclusion(b"\x00" * 32, proof, root)
    with pytest.raises(NotFound):
        store.query_tx(b"\x11" * 32)


def test_persistence_round_trip_and_determinism(tmp_path, world):
    a = world.chain(15)
    from tests.conftest import World

    b = World().chain(15)
    assert a.dumps() == b.dumps()
    path = tmp_path / "ledger.ndjson"
    a.save(path)
    loaded = LedgerStore.load(path)
    assert loaded.dumps() == a.dumps()
    assert verify_chain(loaded, world.registry.validators)
    for line in path.read_text().splitlines():
        json.loads(line)
