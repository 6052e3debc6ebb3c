"""Crash-fault-tolerant leader-based ordering over a deterministic simulated network.

The replica logic is a pure function, :meth:`Raft.step`, from (state, event)
to (state, outbound messages, timer requests, trace notes).  The
:class:`Simulation` owns the clock, the seeded RNG, message latency, drops,
partitions and crashes, and feeds events to the replicas one at a time.
"""

from __future__ import annotations

import copy
import hashlib
import heapq
import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from .errors import InvalidClusterSize, NotLeader, UnknownNode

CLIENT = "client"
LEADER_ALIAS = "@leader"


class Mode(str, Enum):
    Follower = "Follower"
    Candidate = "Candidate"
    Leader = "Leader"


@dataclass(frozen=True)
class Entry:
    term: int
    batch: Tuple[str, ...]  # opaque tx ids; empty for the leader's no-op
    created_ms: int
    leader: str

    def digest(self) -> str:
        doc = json.dumps([self.term, list(self.batch), self.created_ms, self.leader], separators=(",", ":"))
        return hashlib.sha256(doc.encode()).hexdigest()[:16]


@dataclass
class NodeState:
    node_id: str
    peers: Tuple[str, ...]
    mode: Mode = Mode.Follower
    term: int = 0
    vote_granted_to: Optional[str] = None
    log: Tuple[Entry, ...] = ()
    commit_index: int = 0
    leader_hint: Optional[str] = None
    votes: FrozenSet[str] = frozenset()
    next_index: Dict[str, int] = field(default_factory=dict)
    match_index: Dict[str, int] = field(default_factory=dict)
    pending: Tuple[str, ...] = ()
    batch_armed: bool = False

    def last_index(self) -> int:
        return len(self.log)

    def last_term(self) -> int:
        return self.log[-1].term if self.log else 0

    def term_at(self, index: int) -> int:
        return self.log[index - 1].term if index > 0 else 0

    def committed(self) -> Tuple[Entry, ...]:
        return self.log[: self.commit_index]

    def restarted(self) -> "NodeState":
        """Crash recovery keeps only term, vote and log."""
        return NodeState(self.node_id, self.peers, term=self.term, vote_granted_to=self.vote_granted_to, log=self.log)


# -- messages and events -----------------------------------------------------


@dataclass(frozen=True)
class RequestVote:
    src: str
    dst: str
    term: int
    last_index: int
    last_term: int


@dataclass(frozen=True)
class Vote:
    src: str
    dst: str
    term: int
    granted: bool


@dataclass(frozen=True)
class Append:
    src: str
    dst: str
    term: int
    prev_index: int
    prev_term: int
    entries: Tuple[Entry, ...]
    leader_commit: int


@dataclass(frozen=True)
class AppendReply:
    src: str
    dst: str
    term: int
    success: bool
    match_index: int


@dataclass(frozen=True)
class ClientRequest:
    src: str
    dst: str
    tx_ids: Tuple[str, ...]


@dataclass(frozen=True)
class ClientReply:
    src: str
    dst: str
    committed: Tuple[str, ...] = ()
    redirect: bool = False
    leader_hint: Optional[str] = None


Message = Union[RequestVote, Vote, Append, AppendReply, ClientRequest, ClientReply]


@dataclass(frozen=True)
class TimerFire:
    node: str
    kind: str  # election | heartbeat | batch | client_retry
    generation: int = 0


@dataclass(frozen=True)
class Deliver:
    msg: Message


@dataclass(frozen=True)
class CrashNode:
    node: str


@dataclass(frozen=True)
class RestartNode:
    node: str


@dataclass(frozen=True)
class Partition:
    groups: Tuple[Tuple[str, ...], ...]


@dataclass(frozen=True)
class Heal:
    pass


@dataclass(frozen=True)
class ClientSubmit:
    tx_ids: Tuple[str, ...]


FAULT_KINDS = {"CrashNode": CrashNode, "RestartNode": RestartNode, "Partition": Partition, "Heal": Heal}


@dataclass(frozen=True)
class SimEvent:
    at_ms: int
    kind: str
    body: object


# -- replica state machine ---------------------------------------------------


@dataclass
class StepResult:
    state: NodeState
    messages: List[Message] = field(default_factory=list)
    timers: List[Tuple[str, Optional[int]]] = field(default_factory=list)  # delay None = random election timeout
    notes: List[dict] = field(default_factory=list)


@dataclass(frozen=True)
class Raft:
    cluster_size: int
    heartbeat_ms: int = 50
    max_batch: int = 64
    max_wait_ms: int = 500
    max_entries_per_append: int = 64

    @property
    def quorum(self) -> int:
        return self.cluster_size // 2 + 1

    # public entry points

    def step(self, state: NodeState, event, now: int) -> StepResult:
        """Pure transition: never mutates ``state`` or anything it references."""
        s = copy.copy(state)
        out = StepResult(s)
        if isinstance(event, TimerFire):
            if event.kind == "election":
                self._on_election_timeout(out, now)
            elif event.kind == "heartbeat":
                if s.mode is Mode.Leader:
                    self._broadcast_append(out)
                    out.timers.append(("heartbeat", self.heartbeat_ms))
            elif event.kind == "batch":
                s.batch_armed = False
                if s.mode is Mode.Leader and s.pending:
                    self._flush(out, now, len(s.pending))
            return out
        msg = event.msg if isinstance(event, Deliver) else event
        if isinstance(msg, ClientRequest):
            self._on_client(out, msg, now)
            return out
        if msg.term > s.term:
            self._become_follower(out, msg.term, None)
        if isinstance(msg, RequestVote):
            self._on_request_vote(out, msg)
        elif isinstance(msg, Vote):
            self._on_vote(out, msg, now)
        elif isinstance(msg, Append):
            self._on_append(out, msg, now)
        elif isinstance(msg, AppendReply):
            self._on_append_reply(out, msg, now)
        return out

    def propose(self, state: NodeState, batch: Sequence[str], now: int) -> StepResult:
        """Append ``batch`` as one log entry at the leader and replicate it."""
        if not batch:
            raise ValueError("empty batch")
        if state.mode is not Mode.Leader:
            raise NotLeader(state.leader_hint)
        s = copy.copy(state)
        out = StepResult(s)
        self._append_entry(out, tuple(batch), now)
        return out

    # helpers; all operate on out.state which is a private shallow copy

    def _become_follower(self, out: StepResult, term: int, leader: Optional[str]) -> None:
        s = out.state
        was = s.mode
        if term > s.term:
            s.term = term
            s.vote_granted_to = None
        s.mode = Mode.Follower
        s.votes = frozenset()
        s.leader_hint = leader
        if was is Mode.Leader:
            s.next_index, s.match_index = {}, {}
            s.pending, s.batch_armed = (), False
            out.notes.append({"kind": "stepped_down", "node": s.node_id, "term": s.term})

    def _on_election_timeout(self, out: StepResult, now: int) -> None:
        s = out.state
        if s.mode is Mode.Leader:
            return
        s.term += 1
        s.mode = Mode.Candidate
        s.vote_granted_to = s.node_id
        s.votes = frozenset({s.node_id})
        s.leader_hint = None
        out.notes.append({"kind": "candidate", "node": s.node_id, "term": s.term})
        for p in s.peers:
            out.messages.append(RequestVote(s.node_id, p, s.term, s.last_index(), s.last_term()))
        out.timers.append(("election", None))

    def _on_request_vote(self, out: StepResult, m: RequestVote) -> None:
        s = out.state
        up_to_date = (m.last_term, m.last_index) >= (s.last_term(), s.last_index())
        grant = m.term == s.term and s.vote_granted_to in (None, m.src) and up_to_date
        if grant:
            s.vote_granted_to = m.src
            out.timers.append(("election", None))
        out.messages.append(Vote(s.node_id, m.src, s.term, grant))

    def _on_vote(self, out: StepResult, m: Vote, now: int) -> None:
        s = out.state
        if s.mode is not Mode.Candidate or m.term != s.term or not m.granted:
            return
        s.votes = s.votes | {m.src}
        if len(s.votes) >= self.quorum:
            s.mode = Mode.Leader
            s.leader_hint = s.node_id
            s.next_index = {p: s.last_index() + 1 for p in s.peers}
            s.match_index = {p: 0 for p in s.peers}
            s.pending, s.batch_armed = (), False
            out.notes.append({"kind": "leader", "node": s.node_id, "term": s.term})
            self._append_entry(out, (), now)  # no-op commits prior terms' entries
            out.timers.append(("heartbeat", self.heartbeat_ms))

    def _append_entry(self, out: StepResult, batch: Tuple[str, ...], now: int) -> None:
        s = out.state
        s.log = s.log + (Entry(s.term, batch, now, s.node_id),)
        self._broadcast_append(out)

    def _append_for(self, s: NodeState, peer: str) -> Append:
        nxt = s.next_index.get(peer, s.last_index() + 1)
        prev = nxt - 1
        entries = s.log[prev : prev + self.max_entries_per_append]
        return Append(s.node_id, peer, s.term, prev, s.term_at(prev), entries, s.commit_index)

    def _broadcast_append(self, out: StepResult) -> None:
        s = out.state
        for p in s.peers:
            out.messages.append(self._append_for(s, p))

    def _on_append(self, out: StepResult, m: Append, now: int) -> None:
        s = out.state
        if m.term < s.term:
            out.messages.append(AppendReply(s.node_id, m.src, s.term, False, 0))
            return
        if s.mode is not Mode.Follower or s.leader_hint != m.src:
            self._become_follower(out, m.term, m.src)
        out.timers.append(("election", None))
        if m.prev_index > s.last_index() or s.term_at(m.prev_index) != m.prev_term:
            hint = min(m.prev_index - 1, s.last_index())
            out.messages.append(AppendReply(s.node_id, m.src, s.term, False, max(hint, 0)))
            return
        log = list(s.log)
        for i, e in enumerate(m.entries):
            idx = m.prev_index + 1 + i
            if idx <= len(log):
                if log[idx - 1].term != e.term:
                    del log[idx - 1 :]
                    log.append(e)
            else:
                log.append(e)
        if len(log) != len(s.log) or any(a is not b for a, b in zip(log, s.log)):
            s.log = tuple(log)
        last_new = m.prev_index + len(m.entries)
        if m.leader_commit > s.commit_index:
            self._advance_commit(out, min(m.leader_commit, last_new), now)
        out.messages.append(AppendReply(s.node_id, m.src, s.term, True, last_new))

    def _on_append_reply(self, out: StepResult, m: AppendReply, now: int) -> None:
        s = out.state
        if s.mode is not Mode.Leader or m.term != s.term:
            return
        if m.success:
            if m.match_index > s.match_index.get(m.src, 0):
                s.match_index = {**s.match_index, m.src: m.match_index}
            s.next_index = {**s.next_index, m.src: max(s.next_index.get(m.src, 1), m.match_index + 1)}
            for n in range(s.last_index(), s.commit_index, -1):
                if s.log[n - 1].term != s.term:
                    break
                acks = [s.node_id] + [p for p in s.peers if s.match_index.get(p, 0) >= n]
                if len(acks) >= self.quorum:
                    self._advance_commit(out, n, now, acks=sorted(acks))
                    break
            if s.next_index[m.src] <= s.last_index():
                out.messages.append(self._append_for(s, m.src))
        else:
            cur = s.next_index.get(m.src, s.last_index() + 1)
            s.next_index = {**s.next_index, m.src: max(1, min(cur - 1, m.match_index + 1))}
            out.messages.append(self._append_for(s, m.src))

    def _advance_commit(self, out: StepResult, new_commit: int, now: int, acks=None) -> None:
        s = out.state
        old = s.commit_index
        if new_commit <= old:
            return
        s.commit_index = new_commit
        committed_txs: List[str] = []
        for idx in range(old + 1, new_commit + 1):
            e = s.log[idx - 1]
            note = {"kind": "commit", "node": s.node_id, "index": idx, "term": e.term, "digest": e.digest()}
            if acks is not None:
                note["acks"] = acks
            out.notes.append(note)
            committed_txs.extend(e.batch)
        if s.mode is Mode.Leader and committed_txs:
            out.messages.append(ClientReply(s.node_id, CLIENT, tuple(committed_txs)))

    def _on_client(self, out: StepResult, m: ClientRequest, now: int) -> None:
        s = out.state
        if s.mode is not Mode.Leader:
            out.messages.append(ClientReply(s.node_id, m.src, redirect=True, leader_hint=s.leader_hint))
            return
        known = set(s.pending)
        for e in s.log:
            known.update(e.batch)
        fresh = tuple(t for t in dict.fromkeys(m.tx_ids) if t not in known)
        if not fresh:
            return
        s.pending = s.pending + fresh
        while len(s.pending) >= self.max_batch:
            self._flush(out, now, self.max_batch)
        if s.pending and not s.batch_armed:
            s.batch_armed = True
            out.timers.append(("batch", self.max_wait_ms))

    def _flush(self, out: StepResult, now: int, n: int) -> None:
        s = out.state
        batch, s.pending = s.pending[:n], s.pending[n:]
        self._append_entry(out, batch, now)


# -- simulation --------------------------------------------------------------


@dataclass
class CommittedEntry:
    index: int
    entry: Entry
    commit_ms: int
    acks: Tuple[str, ...]


@dataclass
class SimResult:
    trace: List[dict]
    logs: Dict[str, Tuple[Entry, ...]]
    committed: List[CommittedEntry]
    submit_ms: Dict[str, int]
    commit_ms: Dict[str, int]
    final_states: Dict[str, NodeState]
    until_ms: int

    def applied(self) -> List[str]:
        """Committed tx ids in log order, first occurrence only."""
        seen, out = set(), []
        for c in self.committed:
            for t in c.entry.batch:
                if t not in seen:
                    seen.add(t)
                    out.append(t)
        return out

    def trace_ndjson(self) -> str:
        return "".join(json.dumps(ev, sort_keys=True, separators=(",", ":")) + "\n" for ev in self.trace)


@dataclass
class NetworkParams:
    latency_ms: Tuple[int, int] = (5, 20)
    drop_rate: float = 0.0
    election_ms: Tuple[int, int] = (150, 300)
    client_retry_ms: int = 1000


def node_ids(n: int) -> List[str]:
    return [f"n{i}" for i in range(n)]


class Simulation:
    """Discrete-event loop; events run in (at_ms, insertion order)."""

    def __init__(self, cluster_size: int, seed: int, params: Optional[NetworkParams] = None,
                 raft: Optional[Raft] = None, trace_messages: bool = False):
        if cluster_size < 3 or cluster_size % 2 == 0:
            raise InvalidClusterSize(f"cluster size must be odd and >= 3, got {cluster_size}")
        self.params = params or NetworkParams()
        self.raft = raft or Raft(cluster_size)
        self.rng = random.Random(seed)
        self.ids = node_ids(cluster_size)
        self.nodes = {i: NodeState(i, tuple(p for p in self.ids if p != i)) for i in self.ids}
        self.crashed: set = set()
        self.severed: set = set()
        self.now = 0
        self._queue: list = []
        self._seq = 0
        self._timer_gen: Dict[Tuple[str, str], int] = {}
        self.trace: List[dict] = []
        self.trace_messages = trace_messages
        # client
        self.outstanding: Dict[str, int] = {}
        self.submit_ms: Dict[str, int] = {}
        self.commit_ms: Dict[str, int] = {}
        self.client_target = self.ids[0]
        self._client_progress = 0
        self._client_last_progress = 0
        # global commit record from leaders' notes
        self.committed: Dict[int, CommittedEntry] = {}
        for i in self.ids:
            self._set_timer(i, "election", None)

    # scheduling

    def schedule(self, at_ms: int, kind: str, body) -> None:
        heapq.heappush(self._queue, (int(at_ms), self._seq, SimEvent(int(at_ms), kind, body)))
        self._seq += 1

    def _set_timer(self, node: str, kind: str, delay: Optional[int]) -> None:
        if delay is None:
            delay = self.rng.randint(*self.params.election_ms)
        gen = self._timer_gen.get((node, kind), 0) + 1
        self._timer_gen[(node, kind)] = gen
        self.schedule(self.now + delay, "TimerFire", TimerFire(node, kind, gen))

    def inject_fault(self, at_ms: int, fault) -> None:
        if isinstance(fault, (CrashNode, RestartNode)):
            if fault.node != LEADER_ALIAS and fault.node not in self.nodes:
                raise UnknownNode(fault.node)
        elif isinstance(fault, Partition):
            for g in fault.groups:
                for n in g:
                    if n not in self.nodes:
                        raise UnknownNode(n)
        elif not isinstance(fault, Heal):
            raise ValueError(f"not a fault: {fault!r}")
        self.schedule(at_ms, type(fault).__name__, fault)

    def submit(self, at_ms: int, tx_ids: Iterable[str]) -> None:
        self.schedule(at_ms, "ClientSubmit", ClientSubmit(tuple(tx_ids)))

    def _send(self, msg: Message) -> None:
        if self.params.drop_rate and self.rng.random() < self.params.drop_rate:
            if self.trace_messages:
                self.trace.append({"t": self.now, "kind": "drop", "msg": type(msg).__name__, "src": msg.src, "dst": msg.dst})
            return
        lo, hi = self.params.latency_ms
        self.schedule(self.now + self.rng.randint(lo, hi), "Deliver", Deliver(msg))

    def _link_up(self, a: str, b: str) -> bool:
        if CLIENT in (a, b):
            return True
        return frozenset((a, b)) not in self.severed

    # main loop

    def leader(self) -> Optional[str]:
        best = None
        for i in self.ids:
            s = self.nodes[i]
            if i not in self.crashed and s.mode is Mode.Leader and (best is None or s.term > self.nodes[best].term):
                best = i
        return best

    def run(self, until_ms: int) -> None:
        while self._queue and self._queue[0][0] <= until_ms:
            at, _, ev = heapq.heappop(self._queue)
            self.now = at
            self._dispatch(ev)
        self.now = max(self.now, until_ms)

    def _dispatch(self, ev: SimEvent) -> None:
        body = ev.body
        if isinstance(body, TimerFire):
            if self._timer_gen.get((body.node, body.kind)) != body.generation:
                return
            if body.node == CLIENT:
                self._client_retry()
            elif body.node not in self.crashed:
                self._apply(body.node, body)
        elif isinstance(body, Deliver):
            m = body.msg
            if not self._link_up(m.src, m.dst):
                return
            if m.dst == CLIENT:
                self._client_receive(m)
            elif m.dst not in self.crashed:
                if self.trace_messages:
                    self.trace.append({"t": self.now, "kind": "deliver", "msg": type(m).__name__, "src": m.src, "dst": m.dst})
                self._apply(m.dst, body)
        elif isinstance(body, ClientSubmit):
            for t in body.tx_ids:
                if t not in self.submit_ms:
                    self.submit_ms[t] = self.now
                    self.outstanding[t] = self.now
            self.trace.append({"t": self.now, "kind": "submit", "n": len(body.tx_ids)})
            self._client_send(body.tx_ids)
            if (CLIENT, "client_retry") not in self._timer_gen:
                self._set_timer(CLIENT, "client_retry", self.params.client_retry_ms)
        else:
            self._fault(body)

    def _fault(self, f) -> None:
        if isinstance(f, CrashNode):
            node = self.leader() if f.node == LEADER_ALIAS else f.node
            if node is None or node in self.crashed:
                self.trace.append({"t": self.now, "kind": "CrashNode", "node": node, "noop": True})
                return
            self.crashed.add(node)
            for kind in ("election", "heartbeat", "batch"):
                self._timer_gen[(node, kind)] = self._timer_gen.get((node, kind), 0) + 1
            self.trace.append({"t": self.now, "kind": "CrashNode", "node": node})
        elif isinstance(f, RestartNode):
            node = f.node
            if node == LEADER_ALIAS:
                node = min(self.crashed) if self.crashed else None
            if node is None or node not in self.crashed:
                self.trace.append({"t": self.now, "kind": "RestartNode", "node": node, "noop": True})
                return
            self.crashed.discard(node)
            self.nodes[node] = self.nodes[node].restarted()
            self._set_timer(node, "election", None)
            self.trace.append({"t": self.now, "kind": "RestartNode", "node": node})
        elif isinstance(f, Partition):
            groups = [set(g) for g in f.groups]
            rest = set(self.ids) - set().union(*groups)
            if rest:
                groups.append(rest)
            for i, a in enumerate(groups):
                for b in groups[i + 1 :]:
                    for x in a:
                        for y in b:
                            self.severed.add(frozenset((x, y)))
            self.trace.append({"t": self.now, "kind": "Partition", "groups": [sorted(g) for g in groups]})
        elif isinstance(f, Heal):
            self.severed.clear()
            self.trace.append({"t": self.now, "kind": "Heal"})

    def _apply(self, node: str, event) -> None:
        res = self.raft.step(self.nodes[node], event, self.now)
        self.nodes[node] = res.state
        for note in res.notes:
            note = {"t": self.now, **note}
            self.trace.append(note)
            if note["kind"] == "commit" and "acks" in note:
                idx = note["index"]
                if idx not in self.committed:
                    e = res.state.log[idx - 1]
                    self.committed[idx] = CommittedEntry(idx, e, self.now, tuple(note["acks"]))
                    for t in e.batch:
                        self.commit_ms.setdefault(t, self.now)
        for kind, delay in res.timers:
            self._set_timer(node, kind, delay)
        for m in res.messages:
            if m.dst == CLIENT or self._link_up(m.src, m.dst):
                self._send(m)

    # client

    def _client_send(self, tx_ids: Sequence[str]) -> None:
        ids = tuple(t for t in tx_ids if t in self.outstanding)
        if ids:
            self._send(ClientRequest(CLIENT, self.client_target, ids))

    def _client_receive(self, m: ClientReply) -> None:
        if m.redirect:
            if m.leader_hint and m.leader_hint != self.client_target:
                self.client_target = m.leader_hint
                self._client_send(list(self.outstanding))
            return
        for t in m.committed:
            if self.outstanding.pop(t, None) is not None:
                self._client_progress += 1

    def _client_retry(self) -> None:
        if self.outstanding:
            if self._client_progress == self._client_last_progress:
                i = self.ids.index(self.client_target)
                self.client_target = self.ids[(i + 1) % len(self.ids)]
            self._client_last_progress = self._client_progress
            self._client_send(list(self.outstanding))
        self._set_timer(CLIENT, "client_retry", self.params.client_retry_ms)

    def result(self) -> SimResult:
        return SimResult(
            trace=self.trace,
            logs={i: s.committed() for i, s in self.nodes.items()},
            committed=[self.committed[i] for i in sorted(self.committed)],
            submit_ms=dict(self.submit_ms),
            commit_ms=dict(self.commit_ms),
            final_states=dict(self.nodes),
            until_ms=self.now,
        )


def fault_from_json(d: dict):
    kind = d["kind"]
    if kind not in FAULT_KINDS:
        raise ValueError(f"unknown fault kind {kind!r}")
    if kind in ("CrashNode", "RestartNode"):
        return CrashNode(d["node"]) if kind == "CrashNode" else RestartNode(d["node"])
    if kind == "Partition":
        return Partition(tuple(tuple(g) for g in d["groups"]))
    return Heal()


def fault_to_json(at_ms: int, f) -> dict:
    d = {"at_ms": at_ms, "kind": type(f).__name__}
    if isinstance(f, (CrashNode, RestartNode)):
        d["node"] = f.node
    elif isinstance(f, Partition):
        d["groups"] = [list(g) for g in f.groups]
    return d


def load_script(path: str | Path) -> List[Tuple[int, object]]:
    return [(int(d["at_ms"]), fault_from_json(d)) for d in json.loads(Path(path).read_text())]


def run_simulation(
    cluster_size: int,
    event_script: Sequence[Tuple[int, object]],
    tx_workload: Sequence[Tuple[int, Union[str, Sequence[str]]]],
    seed: int,
    until_ms: Optional[int] = None,
    params: Optional[NetworkParams] = None,
    raft: Optional[Raft] = None,
    trace_messages: bool = False,
) -> SimResult:
    sim = Simulation(cluster_size, seed, params, raft, trace_messages)
    for at, fault in event_script:
        sim.inject_fault(at, fault)
    last = 0
    for at, ids in tx_workload:
        sim.submit(at, (ids,) if isinstance(ids, str) else ids)
        last = max(last, at)
    for at, _ in event_script:
        last = max(last, at)
    sim.run(until_ms if until_ms is not None else last + 10_000)
    return sim.result()


# -- trace audit (reads only the trace) --------------------------------------


@dataclass
class TraceAudit:
    election_violations: List[str]
    log_matching_violations: List[str]

    @property
    def ok(self) -> bool:
        return not self.election_violations and not self.log_matching_violations


def audit_trace(trace: Iterable[dict]) -> TraceAudit:
    """Election safety and committed-entry agreement, checked from notes alone."""
    leaders: Dict[int, set] = {}
    committed: Dict[int, Tuple[int, str, str, int]] = {}
    elec, logm = [], []
    for ev in trace:
        if ev["kind"] == "leader":
            leaders.setdefault(ev["term"], set()).add(ev["node"])
        elif ev["kind"] == "commit":
            key = (ev["term"], ev["digest"])
            prior = committed.get(ev["index"])
            if prior is None:
                committed[ev["index"]] = (*key, ev["node"], ev["t"])
            elif prior[:2] != key:
                logm.append(f"index {ev['index']}: {ev['node']}@{ev['t']} has {key}, {prior[2]}@{prior[3]} had {prior[:2]}")
    for term, ns in sorted(leaders.items()):
        if len(ns) > 1:
            elec.append(f"term {term}: leaders {sorted(ns)}")
    return TraceAudit(elec, logm)


def check_log_matching(logs: Dict[str, Sequence[Entry]]) -> List[str]:
    """Pairwise prefix agreement over final committed logs."""
    bad = []
    ids = sorted(logs)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            la, lb = logs[a], logs[b]
            for k in range(min(len(la), len(lb))):
                if la[k] != lb[k]:
                    bad.append(f"{a}/{b} differ at index {k + 1}")
                    break
    return bad


@dataclass
class Scenario:
    cluster_size: int
    seed: int
    script: List[Tuple[int, object]]
    workload: List[Tuple[int, str]]
    last_fault_ms: int
    until_ms: int


def random_scenario(cluster_size: int, seed: int, n_txs: Tuple[int, int] = (10, 30), settle_ms: int = 8000) -> Scenario:
    """Crash and partition episodes that never exceed f = (n-1)//2 faulty nodes at once."""
    rng = random.Random(f"scenario/{cluster_size}/{seed}")
    ids = node_ids(cluster_size)
    f = (cluster_size - 1) // 2
    script: List[Tuple[int, object]] = []
    t = 800
    for _ in range(rng.randint(1, 3)):
        start = t + rng.randint(100, 1500)
        dur = rng.randint(200, 3000)
        if rng.random() < 0.5:
            if rng.random() < 0.4:
                victims = [LEADER_ALIAS]
            else:
                victims = rng.sample(ids, rng.randint(1, f))
            for v in victims:
                script.append((start, CrashNode(v)))
                script.append((start + dur, RestartNode(v)))
        else:
            minority = tuple(sorted(rng.sample(ids, rng.randint(1, f))))
            script.append((start, Partition((minority,))))
            script.append((start + dur, Heal()))
        t = start + dur
    horizon = t + 1000
    k = rng.randint(*n_txs)
    workload = sorted((rng.randint(300, horizon), f"s{seed}-tx{i}") for i in range(k))
    return Scenario(cluster_size, seed, script, workload, t, t + settle_ms)


def run_scenario(sc: Scenario, params: Optional[NetworkParams] = None) -> SimResult:
    return run_simulation(sc.cluster_size, sc.script, sc.workload, sc.seed, until_ms=sc.until_ms, params=params)
