import pytest

from snftrack.identity import OrgType, Registry, Role, Signer
from snftrack.layers import LayerTag
from snftrack.ledger import LedgerStore, Transaction, TxType, commit_message


class World:
    """Small consortium: one org per role, one identity each, three validators."""

    def __init__(self):
        self.registry = Registry()
        self.signers = {}
        for role in Role:
            org = f"org-{role.value.lower()}"
            self.registry.add_organization(org, org, OrgType.Producer)
            s = Signer.from_seed(f"id-{role.value}", f"seed:{role.value}")
            self.registry.register_identity(org, role, s.public_key, identity_id=s.identity_id)
            self.signers[role] = s
        self.nodes = {f"n{i}": Signer.from_seed(f"n{i}", f"node:{i}") for i in range(3)}
        for nid, s in self.nodes.items():
            self.registry.add_validator(nid, s.public_key)

    def ident(self, role):
        return self.registry.get(self.signers[role].identity_id)

    def store(self):
        return LedgerStore(self.registry.validators, authenticator=self.registry.authenticate)

    def tx(self, i, role=Role.RegulatorNational, layer=LayerTag.Supervisory, body=None):
        return Transaction.create(
            self.signers[role], TxType.StatusUpdate, 1000 * i, layer,
            body if body is not None else f"payload-{i}".encode(), shipment_id="S1", nonce=i,
        )

    def commit(self, store, txs, proposer="n0", t=0, signers=None):
        block = store.build_block(txs, proposer, t)
        sigs = [s.sign(commit_message(block.hash)) for s in (signers or self.nodes.values())]
        return store.append_block(txs, proposer, sigs, t)

    def chain(self, n_blocks, per_block=3):
        store = self.store()
        k = 0
        for h in range(n_blocks):
            txs = []
            for _ in range(per_block):
                txs.append(self.tx(k))
                k += 1
            self.commit(store, txs, proposer=f"n{h % 3}", t=500 * h)
        return store


@pytest.fixture
def world():
    return World()


# -- bundled demo runs, shared across modules --------------------------------


@pytest.fixture(scope="session")
def demo_dir(tmp_path_factory):
    from snftrack.demo import copy_demo

    return copy_demo(tmp_path_factory.mktemp("demo"))


@pytest.fixture(scope="session")
def happy_run(demo_dir, tmp_path_factory):
    from snftrack.simulate import simulate

    return simulate(demo_dir / "config.json", tmp_path_factory.mktemp("happy"))


@pytest.fixture(scope="session")
def sealbreak_run(demo_dir, tmp_path_factory):
    from snftrack.simulate import simulate

    return simulate(demo_dir / "config_sealbreak.json", tmp_path_factory.mktemp("sealbreak"))


def pytest_terminal_summary(terminalreporter):
    from .acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
