"""Replica-cluster simulation: profile, exchange signatures, vote, conclude.

Every replica profiles its own copy of the program, broadcasts the encrypted
signature to all peers, matches what it receives against its local version,
and shares its votes. A tampered replica is isolated when a strict majority
of participating nodes vote Mismatch against it.

The round runs as four synchronous phases with barriers in between, so the
in-process transcript is a deterministic function of (config, scenario)
regardless of whether node work runs sequentially or on threads.
"""

from __future__ import annotations

import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .cfg import ControlFlowGraph, Mutation, mutate, parse_dot, parse_graphml, serialize_dot, validate_cfg
from .arborescence import peel_edge_disjoint
from .errors import CfsigError, MalformedPlaintextError, ScenarioError, TransportError
from .matcher import Outcome, match_signatures
from .signature import (
    Cipher,
    EncryptedSignature,
    HashAlgorithm,
    ProcessSignature,
    build_signature,
    decrypt,
    encrypt,
)

NodeId = int

FRAME_MAGIC = b"CFS1"
MSG_ENVELOPE = 1
MSG_VOTE = 2
NO_SUBJECT = 0xFFFF
_HEADER = struct.Struct("!4sBHHI")


# ---------------------------------------------------------------------------
# Wire framing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Frame:
    msg_type: int
    sender: NodeId
    subject: NodeId | None
    payload: bytes

    def encode(self) -> bytes:
        subject = NO_SUBJECT if self.subject is None else self.subject
        return _HEADER.pack(
            FRAME_MAGIC, self.msg_type, self.sender, subject, len(self.payload)
        ) + self.payload


def decode_frame(data: bytes) -> Frame:
    if len(data) < _HEADER.size:
        raise TransportError("frame shorter than header")
    magic, msg_type, sender, subject, length = _HEADER.unpack_from(data)
    if magic != FRAME_MAGIC:
        raise TransportError(f"bad frame magic {magic!r}")
    if len(data) != _HEADER.size + length:
        raise TransportError("frame length mismatch")
    if msg_type not in (MSG_ENVELOPE, MSG_VOTE):
        raise TransportError(f"unknown message type {msg_type}")
    payload = data[_HEADER.size:]
    return Frame(msg_type, sender, None if subject == NO_SUBJECT else subject, payload)


def envelope_frame(sender: NodeId, enc: EncryptedSignature) -> Frame:
    payload = bytes([enc.cipher.wire_tag, enc.key_id & 0xFF]) + enc.payload
    return Frame(MSG_ENVELOPE, sender, None, payload)


def vote_frame(sender: NodeId, subject: NodeId, outcome: Outcome) -> Frame:
    verdict_byte = 0 if outcome is Outcome.MATCH else 1
    return Frame(MSG_VOTE, sender, subject, bytes([verdict_byte]))


def envelope_from_frame(frame: Frame) -> EncryptedSignature:
    if frame.msg_type != MSG_ENVELOPE or len(frame.payload) < 2:
        raise TransportError("not a signature envelope frame")
    cipher = Cipher.from_wire_tag(frame.payload[0])
    return EncryptedSignature(cipher, frame.payload[1], frame.payload[2:])


# ---------------------------------------------------------------------------
# Messages and round records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SignatureEnvelope:
    sender: NodeId
    process_label: str
    payload: EncryptedSignature


@dataclass(frozen=True)
class VoteMessage:
    sender: NodeId
    subject: NodeId
    verdict: Outcome

    def __post_init__(self) -> None:
        if self.sender == self.subject:
            raise ValueError("a node never votes about its own signature")


@dataclass(frozen=True)
class Verdict:
    kind: str  # Clean | IntrusionAt | Inconclusive
    nodes: frozenset[NodeId] = frozenset()

    def __str__(self) -> str:
        if self.kind == "IntrusionAt":
            return "INTRUSION node=" + ",".join(str(i) for i in sorted(self.nodes))
        return self.kind.upper()


@dataclass(frozen=True)
class ConsensusRound:
    process_label: str
    local_digests: dict[NodeId, tuple[str, ...] | None]
    votes: tuple[VoteMessage, ...]
    verdict: Verdict


@dataclass(frozen=True)
class PhaseTimings:
    parse_s: float
    extract_s: float
    hash_s: float
    total_s: float


@dataclass(frozen=True)
class ClusterConfig:
    n: int
    algorithm: HashAlgorithm = HashAlgorithm.MD5
    cipher: Cipher = Cipher.SHIFT_BYTE
    key: int = 7
    transport: str = "inprocess"  # inprocess | socket
    timeout_ms: int = 5000

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ScenarioError(f"replication factor must be >= 2, got {self.n}")
        if self.timeout_ms <= 0:
            raise ScenarioError("timeout must be positive")
        if self.transport not in ("inprocess", "socket"):
            raise ScenarioError(f"unknown transport {self.transport!r}")


def conclude_round(n_participating: int, votes: list[VoteMessage]) -> Verdict:
    """Per-subject strict-majority tally with fail-safe Inconclusive.

    A node lands in the intrusion set when more than half of the
    participating nodes voted Mismatch against it. Mismatch votes that form
    no majority anywhere escalate to Inconclusive rather than being dropped.
    """
    mismatch_voters: dict[NodeId, set[NodeId]] = {}
    for v in votes:
        if v.verdict is Outcome.MISMATCH:
            mismatch_voters.setdefault(v.subject, set()).add(v.sender)
    if not mismatch_voters:
        return Verdict("Clean")
    flagged = frozenset(
        subject
        for subject, voters in mismatch_voters.items()
        if len(voters) * 2 > n_participating
    )
    if flagged:
        return Verdict("IntrusionAt", flagged)
    return Verdict("Inconclusive")


# ---------------------------------------------------------------------------
# Replica node state machine
# ---------------------------------------------------------------------------


class ReplicaNode:
    """One simulated datanode; holds its own state, talks only in messages."""

    def __init__(self, node_id: NodeId, config: ClusterConfig):
        self.id = node_id
        self.config = config
        self.signatures: dict[str, ProcessSignature] = {}
        self.timings: dict[str, PhaseTimings] = {}
        self.profiling_failed: dict[str, str] = {}
        self.decrypt_failures: list[tuple[NodeId, str]] = []
        self.own_votes: list[VoteMessage] = []
        self.received_votes: list[VoteMessage] = []

    def run_profiling(self, process_label: str, cfg_text: str, fmt: str = "dot") -> ProcessSignature | None:
        """Parse, validate, peel, and hash; cache the signature per process."""
        t0 = time.perf_counter()
        try:
            t = time.perf_counter()
            graph = parse_dot(cfg_text) if fmt == "dot" else parse_graphml(cfg_text)
            report = validate_cfg(graph)
            if not report.ok:
                raise CfsigError(
                    "invalid CFG: " + ", ".join(str(v) for v in report.violations)
                )
            parse_s = time.perf_counter() - t
            t = time.perf_counter()
            arbs = peel_edge_disjoint(graph)
            extract_s = time.perf_counter() - t
            t = time.perf_counter()
            sig = build_signature(arbs, self.config.algorithm, process_label)
            hash_s = time.perf_counter() - t
        except CfsigError as exc:
            self.profiling_failed[process_label] = str(exc)
            return None
        self.timings[process_label] = PhaseTimings(
            parse_s, extract_s, hash_s, time.perf_counter() - t0
        )
        self.signatures[process_label] = sig
        return sig

    def broadcast_signature(self, process_label: str) -> list[SignatureEnvelope]:
        """One envelope per peer; empty when profiling failed (abstention)."""
        sig = self.signatures.get(process_label)
        if sig is None:
            return []
        enc = encrypt(sig, self.config.cipher, self.config.key)
        return [
            SignatureEnvelope(self.id, process_label, enc)
            for _ in range(self.config.n - 1)
        ]

    def handle_envelope(self, envelope: SignatureEnvelope) -> VoteMessage:
        """Decrypt and match a peer signature against the local version."""
        try:
            remote = decrypt(envelope.payload, self.config.key)
        except MalformedPlaintextError as exc:
            self.decrypt_failures.append((envelope.sender, str(exc)))
            return VoteMessage(self.id, envelope.sender, Outcome.MISMATCH)
        label = envelope.process_label or remote.source_label
        local = self.signatures.get(label)
        if local is None:
            self.decrypt_failures.append((envelope.sender, "no local signature"))
            return VoteMessage(self.id, envelope.sender, Outcome.MISMATCH)
        verdict = match_signatures(local, remote)
        return VoteMessage(self.id, envelope.sender, verdict.outcome)

    def conclude(self, process_label: str, participating: set[NodeId]) -> ConsensusRound:
        votes = sorted(
            set(self.own_votes) | set(self.received_votes),
            key=lambda v: (v.sender, v.subject),
        )
        verdict = conclude_round(len(participating), votes)
        sig = self.signatures.get(process_label)
        return ConsensusRound(
            process_label,
            {self.id: sig.digests if sig else None},
            tuple(votes),
            verdict,
        )


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------


class InProcessTransport:
    """Deterministic per-node FIFO queues; never fails."""

    def __init__(self, n: int):
        self._inboxes: dict[NodeId, list[bytes]] = {i: [] for i in range(n)}
        self._lock = threading.Lock()

    def send(self, receiver: NodeId, frame_bytes: bytes) -> None:
        with self._lock:
            self._inboxes[receiver].append(frame_bytes)

    def drain(self, receiver: NodeId) -> list[bytes]:
        with self._lock:
            out = self._inboxes[receiver]
            self._inboxes[receiver] = []
        return out

    def close(self) -> None:
        pass


class SocketTransport:
    """Loopback TCP transport; one connection per frame, length-framed."""

    def __init__(self, n: int):
        import socket

        self._socket = socket
        self._inboxes: dict[NodeId, list[bytes]] = {i: [] for i in range(n)}
        self._lock = threading.Lock()
        self._servers = {}
        self.ports: dict[NodeId, int] = {}
        self._threads = []
        self._closing = False
        for i in range(n):
            srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            srv.bind(("127.0.0.1", 0))
            srv.listen(16)
            self._servers[i] = srv
            self.ports[i] = srv.getsockname()[1]
            th = threading.Thread(target=self._serve, args=(i, srv), daemon=True)
            th.start()
            self._threads.append(th)

    def _serve(self, node: NodeId, srv) -> None:
        while not self._closing:
            try:
                conn, _ = srv.accept()
            except OSError:
                return
            chunks = []
            while True:
                data = conn.recv(65536)
                if not data:
                    break
                chunks.append(data)
            conn.close()
            frame = b"".join(chunks)
            if frame:
                with self._lock:
                    self._inboxes[node].append(frame)

    def send(self, receiver: NodeId, frame_bytes: bytes) -> None:
        try:
            with self._socket.create_connection(
                ("127.0.0.1", self.ports[receiver]), timeout=2.0
            ) as conn:
                conn.sendall(frame_bytes)
        except OSError as exc:
            raise TransportError(f"peer {receiver} unreachable: {exc}") from exc

    def drain(self, receiver: NodeId) -> list[bytes]:
        with self._lock:
            out = self._inboxes[receiver]
            self._inboxes[receiver] = []
        return out

    def pending(self, receiver: NodeId) -> int:
        with self._lock:
            return len(self._inboxes[receiver])

    def close(self) -> None:
        self._closing = True
        for srv in self._servers.values():
            try:
                srv.close()
            except OSError:
                pass


# ---------------------------------------------------------------------------
# Scenario driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    process_label: str
    graph: ControlFlowGraph
    tamper: tuple[NodeId, Mutation] | None = None
    dead: NodeId | None = None


def parse_scenario_file(path: str | Path) -> tuple[ClusterConfig, Scenario]:
    """Parse the plain-text scenario format (``key=value`` lines).

    Keys: ``n``, ``fixture`` (path relative to the scenario file), optional
    ``tamper=<node>:<mutation-spec>``, ``alg``, ``cipher``, ``key``,
    ``dead=<node>``, ``timeout_ms``.
    """
    path = Path(path)
    fields: dict[str, str] = {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ScenarioError(f"bad scenario line {line!r}")
        fields[key.strip()] = value.strip()

    known = {"n", "fixture", "tamper", "alg", "cipher", "key", "dead", "timeout_ms"}
    unknown = set(fields) - known
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        n = int(fields["n"])
        fixture = fields["fixture"]
    except KeyError as exc:
        raise ScenarioError(f"scenario missing required key {exc}") from exc
    except ValueError as exc:
        raise ScenarioError(f"bad n value: {exc}") from exc

    fixture_path = path.parent / fixture
    try:
        fixture_text = fixture_path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read fixture {fixture_path}: {exc}") from exc
    try:
        if fixture_path.suffix == ".graphml":
            graph = parse_graphml(fixture_text)
        else:
            graph = parse_dot(fixture_text)
    except CfsigError as exc:
        raise ScenarioError(f"fixture does not parse: {exc}") from exc

    tamper = None
    if "tamper" in fields:
        node_text, sep, mut_text = fields["tamper"].partition(":")
        if not sep:
            raise ScenarioError("tamper must look like <node>:<mutation-spec>")
        try:
            tamper_node = int(node_text)
            mutation = Mutation.parse(mut_text)
        except (ValueError, CfsigError) as exc:
            raise ScenarioError(f"bad tamper spec: {exc}") from exc
        if not 0 <= tamper_node < n:
            raise ScenarioError(f"tamper node {tamper_node} out of range for n={n}")
        tamper = (tamper_node, mutation)

    dead = None
    if "dead" in fields:
        dead = int(fields["dead"])
        if not 0 <= dead < n:
            raise ScenarioError(f"dead node {dead} out of range for n={n}")

    try:
        config = ClusterConfig(
            n=n,
            algorithm=HashAlgorithm(fields.get("alg", "MD5")),
            cipher=Cipher(fields.get("cipher", "ShiftByte")),
            key=int(fields.get("key", "7")),
            timeout_ms=int(fields.get("timeout_ms", "5000")),
        )
    except ValueError as exc:
        raise ScenarioError(f"bad scenario value: {exc}") from exc
    label = fixture_path.stem
    return config, Scenario(label, graph, tamper, dead)


@dataclass
class RoundResult:
    consensus: ConsensusRound
    transcript: list[str]
    phase_seconds: dict[str, float]
    rounds_per_node: dict[NodeId, ConsensusRound] = field(default_factory=dict)

    def transcript_text(self) -> str:
        return "\n".join(self.transcript) + "\n"


def _await_delivery(transport, expected: dict[NodeId, int], timeout_s: float) -> None:
    """Block until socket frames have landed in the receivers' inboxes."""
    if not isinstance(transport, SocketTransport):
        return
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        if all(transport.pending(r) >= c for r, c in expected.items()):
            return
        time.sleep(0.005)


def _run_phase(actions: dict[NodeId, object], threaded: bool, timeout_s: float) -> set[NodeId]:
    """Run one phase; returns the node ids that completed within budget."""
    done: set[NodeId] = set()
    if not threaded:
        for node_id in sorted(actions):
            actions[node_id]()
            done.add(node_id)
        return done
    threads = {}
    finished: dict[NodeId, bool] = {}

    def wrap(nid: NodeId):
        actions[nid]()
        finished[nid] = True

    for nid in sorted(actions):
        th = threading.Thread(target=wrap, args=(nid,), daemon=True)
        threads[nid] = th
        th.start()
    deadline = time.monotonic() + timeout_s
    for nid in sorted(threads):
        threads[nid].join(max(deadline - time.monotonic(), 0.0))
        if finished.get(nid):
            done.add(nid)
    return done


def run_cluster_scenario(
    config: ClusterConfig, scenario: Scenario, threaded: bool = False
) -> RoundResult:
    """Boot n replicas, run one full detection round, return the verdict.

    The transcript logs every frame in a deterministic order (sorted by
    sender then receiver per phase), independent of thread scheduling.
    """
    n = config.n
    timeout_s = config.timeout_ms / 1000.0
    label = scenario.process_label
    nodes = [ReplicaNode(i, config) for i in range(n)]
    transport = (
        SocketTransport(n) if config.transport == "socket" else InProcessTransport(n)
    )

    inputs: dict[NodeId, str] = {}
    for i in range(n):
        graph = scenario.graph
        if scenario.tamper is not None and scenario.tamper[0] == i:
            graph = mutate(graph, scenario.tamper[1])
        inputs[i] = serialize_dot(graph)

    transcript = [
        f"scenario label={label} n={n} alg={config.algorithm.value} "
        f"cipher={config.cipher.value} key_id={config.key & 0xFF}"
    ]
    phase_seconds: dict[str, float] = {}
    live = {i for i in range(n) if i != scenario.dead}

    def dead_action():
        if threaded:
            time.sleep(timeout_s * 10)  # silent node: never completes the phase

    # Phase 1: profiling
    t0 = time.perf_counter()
    actions = {
        i: (dead_action if i not in live else
            (lambda node=nodes[i], text=inputs[i]: node.run_profiling(label, text)))
        for i in range(n)
    }
    live &= _run_phase(actions, threaded, timeout_s)
    phase_seconds["profile"] = time.perf_counter() - t0
    for i in range(n):
        if i not in live:
            transcript.append(f"profile node={i} status=silent")
        elif label in nodes[i].profiling_failed:
            transcript.append(f"profile node={i} status=failed")
        else:
            transcript.append(
                f"profile node={i} status=ok digests={len(nodes[i].signatures[label].digests)}"
            )

    # Phase 2: broadcast encrypted signatures (full mesh)
    t0 = time.perf_counter()
    envelope_frames: dict[NodeId, bytes] = {}

    def make_envelope(node: ReplicaNode):
        envs = node.broadcast_signature(label)
        if envs:
            envelope_frames[node.id] = envelope_frame(node.id, envs[0].payload).encode()

    actions = {
        i: (dead_action if i not in live else (lambda node=nodes[i]: make_envelope(node)))
        for i in range(n)
    }
    live &= _run_phase(actions, threaded, timeout_s)
    sends: list[tuple[NodeId, NodeId, bytes]] = []
    for sender in sorted(envelope_frames):
        if sender not in live:
            continue
        for receiver in range(n):
            if receiver != sender:
                sends.append((sender, receiver, envelope_frames[sender]))
    delivered: dict[NodeId, int] = {}
    for sender, receiver, frame_bytes in sends:
        try:
            transport.send(receiver, frame_bytes)
            delivered[receiver] = delivered.get(receiver, 0) + 1
            transcript.append(
                f"frame phase=signature from={sender} to={receiver} hex={frame_bytes.hex()}"
            )
        except TransportError as exc:
            transcript.append(
                f"frame phase=signature from={sender} to={receiver} error={exc}"
            )
    _await_delivery(transport, delivered, timeout_s)
    phase_seconds["broadcast"] = time.perf_counter() - t0

    # Phase 3: match received signatures and broadcast votes
    t0 = time.perf_counter()
    votes_by_node: dict[NodeId, list[VoteMessage]] = {}

    def match_and_vote(node: ReplicaNode):
        frames = sorted(
            (decode_frame(b) for b in transport.drain(node.id)),
            key=lambda f: f.sender,
        )
        if label not in node.signatures:
            votes_by_node[node.id] = []  # profiling failed: abstain from voting
            return
        votes = []
        for frame in frames:
            if frame.msg_type != MSG_ENVELOPE:
                continue
            env = SignatureEnvelope(frame.sender, label, envelope_from_frame(frame))
            votes.append(node.handle_envelope(env))
        node.own_votes.extend(votes)
        votes_by_node[node.id] = votes

    actions = {
        i: (dead_action if i not in live else (lambda node=nodes[i]: match_and_vote(node)))
        for i in range(n)
    }
    live &= _run_phase(actions, threaded, timeout_s)
    vote_sends: list[tuple[NodeId, NodeId, VoteMessage]] = []
    for sender in sorted(votes_by_node):
        if sender not in live:
            continue
        for vote in sorted(votes_by_node[sender], key=lambda v: v.subject):
            for receiver in range(n):
                if receiver != sender:
                    vote_sends.append((sender, receiver, vote))
    vote_sends.sort(key=lambda t: (t[0], t[1], t[2].subject))
    delivered = {}
    for sender, receiver, vote in vote_sends:
        frame_bytes = vote_frame(sender, vote.subject, vote.verdict).encode()
        try:
            transport.send(receiver, frame_bytes)
            delivered[receiver] = delivered.get(receiver, 0) + 1
            transcript.append(
                f"frame phase=vote from={sender} to={receiver} "
                f"subject={vote.subject} verdict={vote.verdict.value} hex={frame_bytes.hex()}"
            )
        except TransportError as exc:
            transcript.append(f"frame phase=vote from={sender} to={receiver} error={exc}")
    _await_delivery(transport, delivered, timeout_s)
    phase_seconds["votes"] = time.perf_counter() - t0

    # Phase 4: tally
    t0 = time.perf_counter()
    participating = {
        i for i in live if label in nodes[i].signatures
    }
    rounds: dict[NodeId, ConsensusRound] = {}

    def tally(node: ReplicaNode):
        for raw in transport.drain(node.id):
            frame = decode_frame(raw)
            if frame.msg_type != MSG_VOTE or frame.subject is None:
                continue
            outcome = Outcome.MATCH if frame.payload[0] == 0 else Outcome.MISMATCH
            node.received_votes.append(VoteMessage(frame.sender, frame.subject, outcome))
        rounds[node.id] = node.conclude(label, participating)

    actions = {
        i: (dead_action if i not in live else (lambda node=nodes[i]: tally(node)))
        for i in range(n)
    }
    live &= _run_phase(actions, threaded, timeout_s)
    phase_seconds["tally"] = time.perf_counter() - t0
    transport.close()

    if not live or not rounds:
        raise ScenarioError("no replica completed the round within the timeout")
    primary = rounds[min(rounds)]
    merged_digests = {
        i: (nodes[i].signatures[label].digests if label in nodes[i].signatures else None)
        for i in range(n)
    }
    primary = ConsensusRound(label, merged_digests, primary.votes, primary.verdict)
    transcript.append(f"verdict {primary.verdict}")
    return RoundResult(primary, transcript, phase_seconds, rounds)
