"""Management-system orchestration and master/slave coordination.

The management system (MS) talks to the master; the master coordinates the
slave. Chain additions, removals and rebalances all funnel through the same
two-phase barrier: the master computes the new allocation from the merged
traffic window, both balancers build the replacement bucket vector (prepare),
and only after the slave has confirmed the build does either side start
mapping traffic with it (commit). A prepare that times out is rolled back
and the previous generation stays in force.

Messages travel over a reliable in-order transport as length-prefixed JSON;
see ``encode_message`` for the wire layout. The in-process transport used by
tests delivers synchronously, so MS calls return their results directly; the
simulator swaps in a latency-delayed transport and the same state machines
run event-driven.
"""

from __future__ import annotations

import json
import struct
from collections import deque
from dataclasses import dataclass, field

from . import rebalance
from .balancer import Balancer
from .errors import (
    BarrierTimeout,
    ChainBalanceError,
    ConfigMismatch,
    DuplicateTags,
    LastChain,
    SlaveUnreachable,
    UnknownChain,
)
from .hashing import ChainId, HashParams
from .rebalance import TrafficWindow, WeightProfile

DEFAULT_BARRIER_TIMEOUT = 1.0

KIND_HANDSHAKE = "handshake"
KIND_ADD_CHAIN = "add_chain"
KIND_REMOVE_CHAIN = "remove_chain"
KIND_STATS_REQUEST = "stats_request"
KIND_STATS_REPLY = "stats_reply"
KIND_PATH_ACTIVE_REQUEST = "path_active_request"
KIND_PATH_ACTIVE_REPLY = "path_active_reply"
KIND_REBALANCE = "rebalance"
KIND_ALLOCATION_COMMIT = "allocation_commit"
KIND_ACK = "ack"

PHASE_PREPARE = "prepare"
PHASE_COMMIT = "commit"
PHASE_ABORT = "abort"

_ERROR_TYPES = {
    "DuplicateTags": DuplicateTags,
    "UnknownChain": UnknownChain,
    "LastChain": LastChain,
    "ConfigMismatch": ConfigMismatch,
    "SlaveUnreachable": SlaveUnreachable,
    "BarrierTimeout": BarrierTimeout,
}


# -- wire format -------------------------------------------------------------


@dataclass
class ControlMessage:
    kind: str
    payload: dict
    src: str = ""
    req_id: int = 0
    reply_to: int | None = None


def encode_message(msg: ControlMessage) -> bytes:
    """Serialize to the wire: 4-byte big-endian length, then UTF-8 JSON."""
    body = json.dumps(
        {
            "kind": msg.kind,
            "src": msg.src,
            "req_id": msg.req_id,
            "reply_to": msg.reply_to,
            "payload": msg.payload,
        },
        separators=(",", ":"),
    ).encode()
    return struct.pack(">I", len(body)) + body


def decode_message(data: bytes) -> tuple[ControlMessage, bytes]:
    """Decode one length-prefixed message; returns (message, remaining bytes)."""
    if len(data) < 4:
        raise ValueError("short read: missing length prefix")
    (length,) = struct.unpack(">I", data[:4])
    if len(data) < 4 + length:
        raise ValueError("short read: truncated body")
    obj = json.loads(data[4 : 4 + length])
    msg = ControlMessage(
        kind=obj["kind"],
        payload=obj["payload"],
        src=obj["src"],
        req_id=obj["req_id"],
        reply_to=obj["reply_to"],
    )
    return msg, data[4 + length :]


def chain_to_wire(chain: ChainId) -> list:
    return [chain.forward_tag, chain.reverse_tag]


def chain_from_wire(obj) -> ChainId:
    return ChainId(obj[0], obj[1])


def alloc_to_wire(alloc) -> list:
    return [[c.forward_tag, c.reverse_tag, n] for c, n in alloc]


def alloc_from_wire(obj) -> list:
    return [(ChainId(f, r), n) for f, r, n in obj]


def window_to_wire(window: TrafficWindow) -> dict:
    rows = sorted(
        (c.forward_tag, c.reverse_tag, n) for c, n in window.bytes.items()
    )
    return {"length": window.window_length, "bytes": [list(r) for r in rows]}


def window_from_wire(obj) -> TrafficWindow:
    return TrafficWindow(obj["length"], {ChainId(f, r): n for f, r, n in obj["bytes"]})


# -- transport ---------------------------------------------------------------


class Transport:
    """Reliable in-order delivery between named control endpoints."""

    def __init__(self):
        self.nodes: dict[str, object] = {}
        self.trace: list[tuple] = []

    def register(self, name: str, node):
        self.nodes[name] = node

    def send(self, src: str, dst: str, msg: ControlMessage):
        raise NotImplementedError

    def _record(self, src, dst, msg):
        self.trace.append((src, dst, msg.kind, msg.req_id, msg.reply_to))


class InstantTransport(Transport):
    """Synchronous delivery; every message still round-trips the wire codec."""

    def send(self, src, dst, msg):
        if dst not in self.nodes:
            raise SlaveUnreachable(f"no endpoint named {dst!r}")
        self._record(src, dst, msg)
        decoded, rest = decode_message(encode_message(msg))
        assert not rest
        self.nodes[dst].deliver(decoded)


class ManualScheduler:
    """Timeout scheduler for direct library use; fires only when told to."""

    def __init__(self):
        self.pending: list[list] = []

    def call_later(self, delay: float, fn):
        entry = [delay, fn, False]
        self.pending.append(entry)
        return entry

    def cancel(self, entry):
        entry[2] = True

    def fire_all(self):
        due, self.pending = self.pending, []
        for _, fn, cancelled in due:
            if not cancelled:
                fn()


# -- configuration -----------------------------------------------------------


@dataclass
class ClusterConfig:
    """Everything both balancers must agree on before traffic flows."""

    hash_seed: int
    bucket_count: int
    session_timeout: float
    window_length: float
    chains: tuple[ChainId, ...]

    def validate(self):
        if not self.chains:
            raise ValueError("at least one initial chain required")
        tags = [t for c in self.chains for t in (c.forward_tag, c.reverse_tag)]
        if len(set(tags)) != len(tags):
            raise ValueError("initial chains share a tag")
        if self.bucket_count < 64 * len(self.chains):
            raise ValueError(
                f"bucket_count {self.bucket_count} too small for "
                f"{len(self.chains)} chains (need >= 64 per chain)"
            )

    def hash_params(self) -> HashParams:
        return HashParams(self.hash_seed, self.bucket_count)

    def to_wire(self) -> dict:
        return {
            "hash_seed": self.hash_seed,
            "bucket_count": self.bucket_count,
            "session_timeout": self.session_timeout,
            "window_length": self.window_length,
            "chains": [chain_to_wire(c) for c in self.chains],
        }

    @classmethod
    def from_wire(cls, obj) -> "ClusterConfig":
        return cls(
            hash_seed=obj["hash_seed"],
            bucket_count=obj["bucket_count"],
            session_timeout=obj["session_timeout"],
            window_length=obj["window_length"],
            chains=tuple(chain_from_wire(c) for c in obj["chains"]),
        )

    def initial_allocation(self):
        """Equal split of the vector over the initial chains."""
        return rebalance.allocate_buckets(
            WeightProfile.uniform(self.chains), self.bucket_count
        )


class _Endpoint:
    """Shared request/reply bookkeeping for all control endpoints."""

    def __init__(self, name: str, transport: Transport):
        self.name = name
        self.transport = transport
        self._next_req = 1
        self._waiting: dict[int, object] = {}
        transport.register(name, self)

    def request(self, dst: str, kind: str, payload: dict, on_reply):
        req_id = self._next_req
        self._next_req += 1
        if on_reply is not None:
            self._waiting[req_id] = on_reply
        self.transport.send(
            self.name, dst, ControlMessage(kind, payload, self.name, req_id)
        )
        return req_id

    def reply(self, to_msg: ControlMessage, kind: str, payload: dict):
        self.transport.send(
            self.name,
            to_msg.src,
            ControlMessage(kind, payload, self.name, 0, reply_to=to_msg.req_id),
        )

    def ack(self, to_msg: ControlMessage, ok: bool = True, error: str = "", **extra):
        payload = {"ok": ok, "error": error}
        payload.update(extra)
        self.reply(to_msg, KIND_ACK, payload)

    def deliver(self, msg: ControlMessage):
        if msg.reply_to is not None:
            handler = self._waiting.pop(msg.reply_to, None)
            if handler is not None:
                handler(msg)
            return
        self.handle_request(msg)

    def handle_request(self, msg: ControlMessage):
        raise NotImplementedError


# -- slave -------------------------------------------------------------------


class SlaveAgent(_Endpoint):
    """Control-plane face of the slave balancer."""

    def __init__(self, name: str, transport: Transport):
        super().__init__(name, transport)
        self.balancer: Balancer | None = None
        self.config: ClusterConfig | None = None
        self.committed: list[int] = []
        self._staged = None  # (generation, vector, drain)

    def handle_request(self, msg):
        if msg.kind == KIND_HANDSHAKE:
            self._on_handshake(msg)
        elif self.balancer is None:
            self.ack(msg, ok=False, error="ConfigMismatch: slave not configured")
        elif msg.kind == KIND_ALLOCATION_COMMIT:
            self._on_allocation(msg)
        elif msg.kind == KIND_STATS_REQUEST:
            window = self.balancer.snapshot_window(msg.payload["now"])
            self.reply(msg, KIND_STATS_REPLY, {"window": window_to_wire(window)})
        elif msg.kind == KIND_PATH_ACTIVE_REQUEST:
            active = self.balancer.path_active(
                chain_from_wire(msg.payload["pair"]), msg.payload["now"]
            )
            self.reply(msg, KIND_PATH_ACTIVE_REPLY, {"active": active})
        else:
            self.ack(msg, ok=False, error=f"unexpected kind {msg.kind}")

    def _on_handshake(self, msg):
        cfg = ClusterConfig.from_wire(msg.payload["config"])
        if self.config is not None and self.config != cfg:
            self.ack(msg, ok=False, error="ConfigMismatch")
            return
        self.config = cfg
        self.balancer = Balancer("slave", cfg.hash_params(), cfg.session_timeout)
        self.balancer.apply_allocation(cfg.initial_allocation(), generation=0)
        self.committed = [0]
        self.ack(msg, generation=0)

    def _on_allocation(self, msg):
        phase = msg.payload["phase"]
        generation = msg.payload["generation"]
        if phase == PHASE_PREPARE:
            alloc = alloc_from_wire(msg.payload["alloc"])
            drain = msg.payload.get("drain")
            vector = self.balancer.stage_allocation(alloc, generation)
            self._staged = (generation, vector, chain_from_wire(drain) if drain else None)
            self.ack(msg, generation=generation)
        elif phase == PHASE_COMMIT:
            if self._staged is None or self._staged[0] != generation:
                self.ack(msg, ok=False, error=f"no staged vector for generation {generation}")
                return
            _, vector, drain = self._staged
            self._staged = None
            if drain is not None:
                self.balancer.install(vector, drain=drain)
            else:
                self.balancer.install(vector)
            self.committed.append(generation)
            self.ack(msg, generation=generation)
        elif phase == PHASE_ABORT:
            if self._staged is not None and self._staged[0] == generation:
                self._staged = None
            self.ack(msg, generation=generation)
        else:
            self.ack(msg, ok=False, error=f"unknown phase {phase}")


# -- master ------------------------------------------------------------------


@dataclass
class _PendingOp:
    kind: str
    request: ControlMessage
    pair: ChainId | None = None
    now: float = 0.0
    staged: object = None
    generation: int = 0
    timer: object = None
    extra: dict = field(default_factory=dict)


class MasterAgent(_Endpoint):
    """Master balancer control plane: owns allocation decisions.

    Requests from the MS are serialized through a FIFO so that window
    snapshots and generation numbers are well ordered. Calls toward the
    slave behave synchronously: each op waits for the slave's reply (or a
    timeout) before advancing.
    """

    def __init__(
        self,
        name: str,
        transport: Transport,
        scheduler=None,
        barrier_timeout: float = DEFAULT_BARRIER_TIMEOUT,
    ):
        super().__init__(name, transport)
        self.scheduler = scheduler if scheduler is not None else ManualScheduler()
        self.barrier_timeout = barrier_timeout
        self.balancer: Balancer | None = None
        self.config: ClusterConfig | None = None
        self.slave_name: str | None = None
        self.committed: list[int] = []
        self.on_commit = None  # hook: fn(generation, alloc, drain)
        self._queue: deque[_PendingOp] = deque()
        self._current: _PendingOp | None = None

    # -- request intake

    def handle_request(self, msg):
        if msg.kind == KIND_HANDSHAKE:
            self._on_handshake(msg)
        elif self.balancer is None:
            self.ack(msg, ok=False, error="ConfigMismatch: master not configured")
        elif msg.kind == KIND_PATH_ACTIVE_REQUEST:
            active = self.balancer.path_active(
                chain_from_wire(msg.payload["pair"]), msg.payload["now"]
            )
            self.reply(msg, KIND_PATH_ACTIVE_REPLY, {"active": active})
        elif msg.kind in (KIND_ADD_CHAIN, KIND_REMOVE_CHAIN, KIND_REBALANCE, KIND_STATS_REQUEST):
            op = _PendingOp(kind=msg.kind, request=msg, now=msg.payload["now"])
            if "pair" in msg.payload:
                op.pair = chain_from_wire(msg.payload["pair"])
            self._queue.append(op)
            self._advance()
        else:
            self.ack(msg, ok=False, error=f"unexpected kind {msg.kind}")

    def _on_handshake(self, msg):
        cfg = ClusterConfig.from_wire(msg.payload["config"])
        try:
            cfg.validate()
        except ValueError as exc:
            self.ack(msg, ok=False, error=f"ConfigMismatch: {exc}")
            return
        self.slave_name = msg.payload["slave"]

        def _slave_done(reply):
            if not reply.payload["ok"]:
                self.ack(msg, ok=False, error=reply.payload["error"])
                return
            self.config = cfg
            self.balancer = Balancer("master", cfg.hash_params(), cfg.session_timeout)
            self.balancer.apply_allocation(cfg.initial_allocation(), generation=0)
            self.committed = [0]
            self.ack(msg, generation=0)

        try:
            self.request(
                self.slave_name, KIND_HANDSHAKE, {"config": cfg.to_wire()}, _slave_done
            )
        except SlaveUnreachable as exc:
            self.ack(msg, ok=False, error=f"SlaveUnreachable: {exc}")

    # -- op pipeline

    def _advance(self):
        if self._current is not None or not self._queue:
            return
        self._current = self._queue.popleft()
        op = self._current
        try:
            self._validate_op(op)
        except ChainBalanceError as exc:
            self._finish(op, ok=False, error=f"{type(exc).__name__}: {exc}")
            return
        # every remaining op starts from the merged traffic window
        self.request(
            self.slave_name,
            KIND_STATS_REQUEST,
            {"now": op.now},
            lambda reply: self._with_window(op, reply),
        )

    def _validate_op(self, op):
        live = self.balancer.buckets.chains()
        if op.kind == KIND_ADD_CHAIN:
            used = {t for c in live for t in (c.forward_tag, c.reverse_tag)}
            used |= {t for c in self.balancer.draining for t in (c.forward_tag, c.reverse_tag)}
            if op.pair.forward_tag in used or op.pair.reverse_tag in used:
                raise DuplicateTags(f"tags of {op.pair} already in use")
            if self.config.bucket_count < 64 * (len(live) + 1):
                raise ChainBalanceError(
                    f"bucket vector too small for {len(live) + 1} chains"
                )
        elif op.kind == KIND_REMOVE_CHAIN:
            if op.pair not in live:
                raise UnknownChain(f"chain {op.pair} is not live")
            if len(live) < 2:
                raise LastChain("cannot remove the last chain")

    def _with_window(self, op, reply):
        slave_window = window_from_wire(reply.payload["window"])
        own_window = self.balancer.snapshot_window(op.now)
        merged = own_window.merged(slave_window)
        if op.kind == KIND_STATS_REQUEST:
            self._finish(op, window=merged)
            return

        profile = self.balancer.current_profile()
        # restrict to live chains and floor at 1 byte so a quiet window
        # cannot abort the operation
        usable = TrafficWindow(
            merged.window_length,
            {c: max(merged.bytes.get(c, 0), 1) for c in profile.probs},
        )
        drain = None
        if op.kind == KIND_ADD_CHAIN:
            new_profile = rebalance.add_chain(profile, usable, op.pair)
        elif op.kind == KIND_REMOVE_CHAIN:
            new_profile = rebalance.remove_chain(profile, usable, op.pair)
            drain = op.pair
        else:
            new_profile = rebalance.redistribute(profile, usable)
        alloc = rebalance.allocate_buckets(new_profile, self.config.bucket_count)
        if drain is not None:
            alloc = [(c, n) for c, n in alloc if c != drain]
        self._commit(op, alloc, drain)

    def _commit(self, op, alloc, drain):
        op.generation = self.committed[-1] + 1
        op.staged = self.balancer.stage_allocation(alloc, op.generation)
        op.extra["alloc"] = alloc
        op.extra["drain"] = drain
        payload = {
            "phase": PHASE_PREPARE,
            "generation": op.generation,
            "alloc": alloc_to_wire(alloc),
            "drain": chain_to_wire(drain) if drain else None,
        }
        op.timer = self.scheduler.call_later(
            self.barrier_timeout, lambda: self._on_barrier_timeout(op)
        )
        self.request(
            self.slave_name,
            KIND_ALLOCATION_COMMIT,
            payload,
            lambda reply: self._on_prepared(op, reply),
        )

    def _on_prepared(self, op, reply):
        if op is not self._current:
            return  # timed out and rolled back before the ack arrived
        self.scheduler.cancel(op.timer)
        if not reply.payload["ok"]:
            self._finish(op, ok=False, error=reply.payload["error"])
            return
        # both sides have built the vector: switch over
        drain = op.extra["drain"]
        if drain is not None:
            self.balancer.install(op.staged, drain=drain)
        else:
            self.balancer.install(op.staged)
        self.committed.append(op.generation)
        if self.on_commit is not None:
            self.on_commit(op.generation, op.extra["alloc"], drain)
        self.request(
            self.slave_name,
            KIND_ALLOCATION_COMMIT,
            {"phase": PHASE_COMMIT, "generation": op.generation},
            lambda reply: self._on_committed(op, reply),
        )

    def _on_committed(self, op, reply):
        if not reply.payload["ok"]:
            self._finish(op, ok=False, error=reply.payload["error"])
            return
        self._finish(op, generation=op.generation)

    def _on_barrier_timeout(self, op):
        if op is not self._current:
            return
        op.staged = None
        try:
            self.request(
                self.slave_name,
                KIND_ALLOCATION_COMMIT,
                {"phase": PHASE_ABORT, "generation": op.generation},
                None,
            )
        except SlaveUnreachable:
            pass
        self._finish(op, ok=False, error="BarrierTimeout")

    def _finish(self, op, ok=True, error="", window=None, generation=None):
        self._current = None
        if op.kind == KIND_STATS_REQUEST:
            if window is not None:
                self.reply(op.request, KIND_STATS_REPLY, {"window": window_to_wire(window)})
            else:
                self.ack(op.request, ok=False, error=error)
        else:
            extra = {} if generation is None else {"generation": generation}
            self.ack(op.request, ok=ok, error=error, **extra)
        self._advance()


# -- management system ---------------------------------------------------------


class ManagementSystem(_Endpoint):
    """Scenario-facing orchestrator; one per master/slave pair.

    With a synchronous transport every method returns its result; with a
    delayed transport the optional callback fires on completion instead and
    the method returns None.
    """

    def __init__(self, name: str, transport: Transport, master: str, slave: str):
        super().__init__(name, transport)
        self.master = master
        self.slave = slave
        self.known: set[ChainId] = set()

    def _call(self, dst, kind, payload, on_done):
        outcome = {}

        def _done(reply):
            outcome["reply"] = reply
            if on_done is not None:
                on_done(reply)

        self.request(dst, kind, payload, _done)
        return outcome.get("reply")

    @staticmethod
    def _check_ack(reply):
        if reply is None:
            return None
        if reply.kind == KIND_ACK and not reply.payload["ok"]:
            text = reply.payload["error"]
            name = text.split(":", 1)[0]
            raise _ERROR_TYPES.get(name, ChainBalanceError)(text)
        return reply

    def handshake(self, cfg: ClusterConfig, on_done=None):
        """Configure both balancers and build their generation-0 vectors."""
        cfg.validate()
        self.known |= set(cfg.chains)
        reply = self._call(
            self.master,
            KIND_HANDSHAKE,
            {"config": cfg.to_wire(), "slave": self.slave},
            on_done,
        )
        return self._check_ack(reply)

    def add_chain(self, pair: ChainId, now: float, on_done=None):
        """Bring a new chain into rotation at probability 1/(N+1)."""
        self.known.add(pair)
        reply = self._call(
            self.master,
            KIND_ADD_CHAIN,
            {"pair": chain_to_wire(pair), "now": now},
            on_done,
        )
        return self._check_ack(reply)

    def remove_chain(self, pair: ChainId, now: float, on_done=None):
        """Start the cool-down for a chain; poll path_active to reclaim it."""
        if pair not in self.known:
            raise UnknownChain(f"chain {pair} was never announced")
        reply = self._call(
            self.master,
            KIND_REMOVE_CHAIN,
            {"pair": chain_to_wire(pair), "now": now},
            on_done,
        )
        return self._check_ack(reply)

    def request_rebalance(self, now: float, on_done=None):
        """Ask the master to re-even the split using the latest window."""
        reply = self._call(self.master, KIND_REBALANCE, {"now": now}, on_done)
        return self._check_ack(reply)

    def poll_stats(self, now: float, on_done=None) -> TrafficWindow | None:
        """Merged per-chain byte counts from both balancers since last poll."""
        done = None
        if on_done is not None:
            done = lambda reply: on_done(window_from_wire(reply.payload["window"]))
        reply = self._call(self.master, KIND_STATS_REQUEST, {"now": now}, done)
        if reply is None:
            return None
        self._check_ack(reply)
        return window_from_wire(reply.payload["window"])

    def poll_path_active(self, pair: ChainId, now: float, on_done=None) -> bool | None:
        """OR of both balancers' views of whether the pair still has sessions."""
        if pair not in self.known:
            raise UnknownChain(f"chain {pair} was never announced")
        payload = {"pair": chain_to_wire(pair), "now": now}
        state = {}

        def _collect(reply):
            state.setdefault("answers", []).append(reply.payload["active"])
            if len(state["answers"]) == 2:
                state["result"] = any(state["answers"])
                if on_done is not None:
                    on_done(state["result"])

        self.request(self.master, KIND_PATH_ACTIVE_REQUEST, payload, _collect)
        self.request(self.slave, KIND_PATH_ACTIVE_REQUEST, payload, _collect)
        return state.get("result")
