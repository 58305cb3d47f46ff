"""One load-balancer node: session affinity plus bucket-vector mapping.

A balancer answers one question per packet: which chain carries this
session? Known active sessions keep their stored chain no matter what
happened to the bucket vector in between; everything else is a single
array read at hash(key) mod L. Re-shuffles replace the vector wholesale,
so affinity decisions and rebalancing never race on shared structures
beyond the swap itself.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from . import rebalance
from .errors import NoLiveChains, UnknownChain
from .hashing import BucketVector, ChainId, Endpoint, HashParams, build_buckets, canonical_key
from .rebalance import TrafficWindow, WeightProfile

DEFAULT_SESSION_TIMEOUT = 6.0
DEFAULT_WINDOW_LENGTH = 5.0

MASTER = "master"
SLAVE = "slave"


@dataclass
class SessionRecord:
    last_timestamp: float
    assigned: ChainId


@dataclass
class LogicalPacket:
    """Payload-less stand-in for a packet: endpoints, size, arrival time."""

    src: Endpoint
    dst: Endpoint
    bytes: int
    timestamp: float
    tag: int | None = None


class Balancer:
    """Session-aware mapper shared by the master and slave roles.

    Packet mapping and session-table access run under one lock; building a
    replacement bucket vector happens outside it and only the final swap
    synchronizes with the mapping path.
    """

    def __init__(
        self,
        role: str,
        params: HashParams,
        session_timeout: float = DEFAULT_SESSION_TIMEOUT,
    ):
        if role not in (MASTER, SLAVE):
            raise ValueError(f"role must be {MASTER!r} or {SLAVE!r}")
        self.role = role
        self.params = params
        self.session_timeout = session_timeout
        self.buckets: BucketVector | None = None
        self.table: dict = {}
        self.draining: set[ChainId] = set()
        self.counters: dict[ChainId, int] = {}
        self.window_start = 0.0
        self._lock = threading.Lock()

    # -- traffic path ------------------------------------------------------

    def map_packet(self, packet: LogicalPacket) -> ChainId:
        """Return the chain for this packet and account its bytes.

        An active session (last packet less than the timeout ago) keeps its
        stored chain, even one that is draining; anything else is mapped
        through the current bucket vector and recorded.
        """
        key = canonical_key(packet.src, packet.dst)
        now = packet.timestamp
        with self._lock:
            record = self.table.get(key)
            if record is not None and record.last_timestamp + self.session_timeout > now:
                record.last_timestamp = now
                chain = record.assigned
            else:
                if self.buckets is None:
                    raise NoLiveChains("no bucket vector installed")
                chain = self.buckets.lookup(key)
                self.table[key] = SessionRecord(now, chain)
            self.counters[chain] = self.counters.get(chain, 0) + packet.bytes
        return chain

    def reconcile(self, key, observed: ChainId, now: float):
        """Adopt the chain seen on a returning packet for this session.

        Master-side correction for the rare case where the slave assigned a
        session before this balancer learned of it (or after a re-shuffle
        diverged the two tables). Seeing the packet also refreshes the
        session timestamp.
        """
        if self.role != MASTER:
            raise ValueError("reconcile is a master-side operation")
        with self._lock:
            record = self.table.get(key)
            if record is None:
                self.table[key] = SessionRecord(now, observed)
            else:
                record.assigned = observed
                record.last_timestamp = now

    # -- vector management -------------------------------------------------

    def stage_allocation(self, alloc, generation: int) -> BucketVector:
        """Build (but do not install) the vector for a pending allocation."""
        return build_buckets(alloc, self.params, generation)

    def install(self, vector: BucketVector, drain: ChainId | None = None):
        """Swap in a prebuilt vector; optionally mark one chain as draining."""
        with self._lock:
            live = set(vector.chains())
            self.draining -= live
            if drain is not None:
                self.draining.add(drain)
            self.buckets = vector

    def apply_allocation(self, alloc, generation: int):
        """Build and atomically swap in a new bucket vector."""
        self.install(self.stage_allocation(alloc, generation))

    def begin_drain(self, victim: ChainId, alloc=None, generation: int | None = None):
        """Stop assigning new sessions to victim; old ones keep using it.

        When no coordinated allocation is supplied, the replacement vector
        is computed locally from the current slot proportions and the bytes
        seen so far in the current window.
        """
        if self.buckets is None or victim not in self.buckets.chains():
            raise UnknownChain(f"chain {victim} is not live")
        if generation is None:
            generation = self.buckets.generation + 1
        if alloc is None:
            profile = self.current_profile()
            window = TrafficWindow(
                0.0, {c: max(self.counters.get(c, 0), 1) for c in profile.probs}
            )
            survivors = rebalance.remove_chain(profile, window, victim)
            alloc = rebalance.allocate_buckets(survivors, self.params.bucket_count)
        self.install(self.stage_allocation(alloc, generation), drain=victim)

    def current_profile(self) -> WeightProfile:
        """Probabilities currently encoded in the bucket vector."""
        if self.buckets is None:
            raise NoLiveChains("no bucket vector installed")
        length = len(self.buckets)
        return WeightProfile(
            {chain: count / length for chain, count in self.buckets.counts().items()}
        )

    @property
    def generation(self) -> int:
        return -1 if self.buckets is None else self.buckets.generation

    # -- bookkeeping -------------------------------------------------------

    def path_active(self, chain: ChainId, now: float) -> bool:
        """True while any session assigned to this chain is still active."""
        with self._lock:
            return any(
                record.assigned == chain
                and record.last_timestamp + self.session_timeout > now
                for record in self.table.values()
            )

    def snapshot_window(self, now: float) -> TrafficWindow:
        """Return the bytes counted since the last snapshot and start anew."""
        with self._lock:
            window = TrafficWindow(now - self.window_start, dict(self.counters))
            self.counters = {}
            if self.buckets is not None:
                for chain in self.buckets.chains():
                    self.counters[chain] = 0
                    window.bytes.setdefault(chain, 0)
            self.window_start = now
        return window

    def expire_sessions(self, now: float) -> int:
        """Drop timed-out table entries; mapping behavior is unaffected."""
        with self._lock:
            dead = [
                key
                for key, record in self.table.items()
                if record.last_timestamp + self.session_timeout <= now
            ]
            for key in dead:
                del self.table[key]
        return len(dead)
