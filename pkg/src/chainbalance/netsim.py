"""Packet-level discrete-event simulation of the two-balancer testbed.

Topology (generated from the declared chains):

    client -- es1 -- lb1(master) -- es1 -- cs_i -- nf_i -- cs_i -- es2
                                                 -- lb2(slave) -- es2 -- server

Forward packets are mapped and tagged at the master, routed by tag to one
chain's switch, delivered untagged to the NF, re-tagged on the far side and
passed through the slave on their way to the server. Reverse packets mirror
this through the slave, which maps them with its own copy of the bucket
vector; the master observes them coming back and corrects its session table
if the two sides ever diverged.

The event loop is single threaded; all randomness lives in the traffic
generator, so a (scenario, seed) pair always produces the same run.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

from .balancer import LogicalPacket
from .control import (
    ClusterConfig,
    ManagementSystem,
    MasterAgent,
    SlaveAgent,
    Transport,
    decode_message,
    encode_message,
)
from .errors import EmptyTagStack, NeverConverged, NoRoute, SlaveUnreachable
from .hashing import ChainId, Endpoint, canonical_key
from .scenario import Scenario
from .traffic import generate_traffic

# -- event loop ---------------------------------------------------------------


class EventLoop:
    """Time-ordered callback queue; doubles as the control-plane scheduler."""

    def __init__(self):
        self.now = 0.0
        self._heap = []
        self._seq = 0

    def schedule(self, at: float, fn, *args):
        entry = [at, self._seq, fn, args, False]
        self._seq += 1
        heapq.heappush(self._heap, entry)
        return entry

    def call_later(self, delay: float, fn):
        return self.schedule(self.now + delay, fn)

    def cancel(self, entry):
        entry[4] = True

    def run(self, until: float | None = None):
        while self._heap:
            if until is not None and self._heap[0][0] > until:
                break
            at, _, fn, args, cancelled = heapq.heappop(self._heap)
            if cancelled:
                continue
            self.now = max(self.now, at)
            fn(*args)


class LatencyTransport(Transport):
    """Control messages delivered through the event loop after a fixed delay."""

    def __init__(self, loop: EventLoop, latency: float):
        super().__init__()
        self.loop = loop
        self.latency = latency

    def send(self, src, dst, msg):
        if dst not in self.nodes:
            raise SlaveUnreachable(f"no endpoint named {dst!r}")
        self._record(src, dst, msg)
        decoded, _ = decode_message(encode_message(msg))
        self.loop.schedule(self.loop.now + self.latency, self.nodes[dst].deliver, decoded)


# -- packets and tag handling ---------------------------------------------------


@dataclass
class Frame:
    """A packet in flight: endpoints, size, and its stack of routing tags."""

    src: Endpoint
    dst: Endpoint
    size: int
    session_id: int
    reverse: bool
    tags: list[int] = field(default_factory=list)
    key: object = None  # canonical session key, computed at the first balancer


def push_tag(frame: Frame, tag: int) -> Frame:
    frame.tags.append(tag)
    return frame


def pop_tag(frame: Frame) -> Frame:
    if not frame.tags:
        raise EmptyTagStack("pop on untagged packet")
    frame.tags.pop()
    return frame


@dataclass(frozen=True)
class TagRule:
    out_port: int
    action: str = "none"  # none | push | pop
    tag: int | None = None


class TagRouter:
    """Static (ingress port, outer tag) -> (egress port, tag action) rules."""

    def __init__(self, rules: dict[tuple[int, int | None], TagRule] | None = None):
        self.rules = dict(rules or {})

    def add(self, in_port: int, tag: int | None, out_port: int, action: str = "none",
            action_tag: int | None = None):
        self.rules[(in_port, tag)] = TagRule(out_port, action, action_tag)


def route(router: TagRouter, port: int, frame: Frame) -> tuple[int, Frame]:
    """Apply the matching rule; raises NoRoute when none exists."""
    top = frame.tags[-1] if frame.tags else None
    rule = router.rules.get((port, top))
    if rule is None:
        raise NoRoute(f"no rule for ingress {port}, tag {top}")
    if rule.action == "pop":
        pop_tag(frame)
    elif rule.action == "push":
        push_tag(frame, rule.tag)
    return rule.out_port, frame


# -- measurement ----------------------------------------------------------------


@dataclass
class ThroughputSeries:
    """Per-chain bytes bucketed into whole simulated seconds."""

    scenario: str
    seed: int
    chains: tuple[ChainId, ...]
    buckets: dict[ChainId, dict[int, int]] = field(default_factory=dict)

    def add(self, chain: ChainId, now: float, size: int):
        per_chain = self.buckets.setdefault(chain, {})
        second = int(now)
        per_chain[second] = per_chain.get(second, 0) + size

    def last_second(self) -> int:
        seconds = [s for per in self.buckets.values() for s in per]
        return max(seconds) if seconds else 0

    def bytes_at(self, chain: ChainId, second: int) -> int:
        return self.buckets.get(chain, {}).get(second, 0)

    def total_for(self, chain: ChainId, start: float = 0.0, stop: float = math.inf) -> int:
        return sum(
            n for sec, n in self.buckets.get(chain, {}).items() if start <= sec < stop
        )

    def csv_rows(self):
        """One row per (second, chain), stable order, for byte-identical output."""
        yield "time_s,chain_fwd_tag,bytes"
        order = sorted(self.chains, key=lambda c: c.forward_tag)
        for second in range(self.last_second() + 1):
            for chain in order:
                yield f"{second},{chain.forward_tag},{self.bytes_at(chain, second)}"


def measure_convergence(
    series: ThroughputSeries,
    live: list[ChainId],
    event_time: float,
    band: float,
    dwell: float = 2.0,
) -> float:
    """Seconds after event_time until every live chain's per-second share
    stays within +-band*(1/N) of 1/N for `dwell` consecutive seconds.

    Zero-traffic seconds never count as balanced, so the quiet tail of a run
    cannot fake convergence.
    """
    n = len(live)
    target = 1.0 / n
    first = max(0, math.ceil(event_time))
    dwell_secs = max(1, int(round(dwell)))
    last = series.last_second()

    def balanced(second: int) -> bool:
        total = sum(series.bytes_at(c, second) for c in live)
        if total <= 0:
            return False
        return all(
            abs(series.bytes_at(c, second) / total - target) <= band * target for c in live
        )

    for start in range(first, last - dwell_secs + 2):
        if all(balanced(s) for s in range(start, start + dwell_secs)):
            return start - event_time
    raise NeverConverged(
        f"no {dwell_secs}s window within +-{band:.0%} of 1/{n} after t={event_time}"
    )


def measure_drain(series: ThroughputSeries, victim: ChainId, event_time: float) -> float:
    """Seconds after event_time until the victim's per-second bytes hit 0 for good."""
    first = max(0, math.ceil(event_time))
    last = series.last_second()
    for start in range(first, last + 2):
        if all(series.bytes_at(victim, s) == 0 for s in range(start, last + 1)):
            return start - event_time
    raise NeverConverged(f"chain {victim} still carries traffic at t={last}")


# -- network nodes ----------------------------------------------------------------


class NfInstance:
    """A chain's network function: pass traffic through, optionally rate-limited.

    Capacity mode is a byte token bucket: each packet occupies the output for
    size/capacity seconds, so the sustained forwarded rate cannot exceed the
    configured capacity. Packets beyond the queue limit are dropped.
    """

    def __init__(self, name, chain, sim, mode="passthrough", capacity=0.0, queue_limit=0):
        self.name = name
        self.chain = chain
        self.sim = sim
        self.mode = mode
        self.capacity = capacity
        self.queue_limit = queue_limit
        self._busy_until = 0.0
        self._queued = 0

    def handle(self, frame: Frame, port: int, now: float):
        if frame.tags:
            self.sim.violation("tagged packet reached an NF", frame, now)
        out_port = 2 if port == 1 else 1
        if self.mode == "passthrough":
            self._forward(frame, out_port, now)
            return
        if self.queue_limit and self._queued >= self.queue_limit:
            self.sim.drop(frame, "queue_overflow", self.name, now)
            return
        start = max(now, self._busy_until)
        departure = start + frame.size / self.capacity
        self._busy_until = departure
        self._queued += 1
        self.sim.loop.schedule(departure, self._depart, frame, out_port)

    def _depart(self, frame, out_port):
        self._queued -= 1
        self._forward(frame, out_port, self.sim.loop.now)

    def _forward(self, frame, out_port, now):
        self.sim.note_nf(self.chain, frame, now)
        self.sim.transmit(self.name, out_port, frame)


class SwitchNode:
    """OpenFlow-style switch: forwards purely on (ingress port, outer tag)."""

    def __init__(self, name, router: TagRouter, sim):
        self.name = name
        self.router = router
        self.sim = sim

    def handle(self, frame: Frame, port: int, now: float):
        try:
            out_port, frame = route(self.router, port, frame)
        except NoRoute as exc:
            self.sim.drop(frame, f"no_route: {exc}", self.name, now)
            return
        self.sim.transmit(self.name, out_port, frame)


class HostNode:
    """Traffic endpoint; counts what finally arrives."""

    def __init__(self, name, sim):
        self.name = name
        self.sim = sim

    def handle(self, frame: Frame, port: int, now: float):
        if frame.tags:
            self.sim.violation("tagged packet delivered to a host", frame, now)
        self.sim.delivered(frame, now)


class BalancerNode:
    """Network adapter around one balancer.

    Untagged packets are new work: map the session, push the chain's tag and
    hand the packet back to the switch. Tagged packets already crossed the
    other balancer; strip the tag (the master also reconciles its table with
    the observed chain) and pass them along.
    """

    def __init__(self, name, agent, sim, is_master: bool):
        self.name = name
        self.agent = agent
        self.sim = sim
        self.is_master = is_master

    def handle(self, frame: Frame, port: int, now: float):
        balancer = self.agent.balancer
        if frame.key is None:
            frame.key = canonical_key(frame.src, frame.dst)
        if frame.tags:
            tag = frame.tags[-1]
            chain = (
                self.sim.chain_by_reverse.get(tag)
                if self.is_master
                else self.sim.chain_by_forward.get(tag)
            )
            if chain is None:
                self.sim.drop(frame, f"unknown tag {tag}", self.name, now)
                return
            pop_tag(frame)
            if self.is_master:
                record = balancer.table.get(frame.key)
                if record is not None and record.assigned != chain:
                    self.sim.note_reconcile(frame, record.assigned, chain, now)
                balancer.reconcile(frame.key, chain, now)
        else:
            packet = LogicalPacket(frame.src, frame.dst, frame.size, now)
            chain = balancer.map_packet(packet)
            self.sim.note_mapped(self, frame, chain, now)
            push_tag(frame, chain.forward_tag if self.is_master else chain.reverse_tag)
        self.sim.transmit(self.name, 1, frame)


# -- the simulation ----------------------------------------------------------------


@dataclass
class SessionTrace:
    first_seen: float
    master_chain: ChainId | None
    slave_chain: ChainId | None = None
    nf_chains: set = field(default_factory=set)
    reconciled: bool = False
    expiry_gap: bool = False
    last_master_seen: float = 0.0


@dataclass
class RunResult:
    scenario: Scenario
    series: ThroughputSeries
    events: list[dict]
    injected_bytes: int
    delivered_bytes: int
    dropped_bytes: int
    anomalies: list[dict]
    commits: list[dict]
    reclaims: dict[ChainId, float]
    session_starts: list[tuple[float, int, ChainId]]
    divergences: int
    reconciled_sessions: int
    vectors_equal: bool
    message_trace: list
    last_packet_on: dict[ChainId, float]

    @property
    def leftover_bytes(self) -> int:
        return self.injected_bytes - self.delivered_bytes - self.dropped_bytes

    @property
    def clean(self) -> bool:
        return not self.anomalies and self.vectors_equal and self.leftover_bytes == 0


class NetSim:
    """Wires the topology, runs the event loop, and keeps the books."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.loop = EventLoop()
        self.nodes: dict[str, object] = {}
        self.links: dict[tuple[str, int], tuple[str, int]] = {}
        self.latency = scenario.link_latency

        pairs = scenario.all_pairs()
        self.chain_by_forward = {c.forward_tag: c for c in pairs}
        self.chain_by_reverse = {c.reverse_tag: c for c in pairs}

        self.series = ThroughputSeries(scenario.name, scenario.seed, pairs)
        self.events: list[dict] = []
        self.anomalies: list[dict] = []
        self.commits: list[dict] = []
        self.reclaims: dict[ChainId, float] = {}
        self.session_starts: list[tuple[float, int, ChainId]] = []
        self.sessions: dict[int, SessionTrace] = {}
        self.last_packet_on: dict[ChainId, float] = {}
        self.injected_bytes = 0
        self.delivered_bytes = 0
        self.dropped_bytes = 0
        self.divergences = 0
        self.vectors_equal = True

        self._build_control()
        self._build_topology(pairs)

    # -- construction

    def _build_control(self):
        s = self.scenario
        self.transport = LatencyTransport(self.loop, s.control_latency)
        self.slave_agent = SlaveAgent("slave", self.transport)
        self.master_agent = MasterAgent("master", self.transport, scheduler=self.loop)
        self.ms = ManagementSystem("ms", self.transport, "master", "slave")
        self.master_agent.on_commit = self._on_commit

    def _build_topology(self, pairs):
        s = self.scenario
        es1, es2 = TagRouter(), TagRouter()
        # edge switch 1: ports 1/2 clients, 3 -> master, 4 <- master, 4+i -> chain i
        es1.add(1, None, 3)
        es1.add(2, None, 3)
        es1.add(4, None, 1)
        # edge switch 2: port 1 server, 3 -> slave, 4 <- slave, 4+i -> chain i
        es2.add(1, None, 3)
        es2.add(4, None, 1)
        for i, chain in enumerate(pairs, start=1):
            es1.add(4, chain.forward_tag, 4 + i)
            es1.add(4 + i, chain.reverse_tag, 3)
            es2.add(4, chain.reverse_tag, 4 + i)
            es2.add(4 + i, chain.forward_tag, 3)

        self.nodes["client"] = HostNode("client", self)
        self.nodes["server"] = HostNode("server", self)
        self.nodes["es1"] = SwitchNode("es1", es1, self)
        self.nodes["es2"] = SwitchNode("es2", es2, self)
        self.nodes["lb1"] = BalancerNode("lb1", self.master_agent, self, is_master=True)
        self.nodes["lb2"] = BalancerNode("lb2", self.slave_agent, self, is_master=False)

        self._cable("client", 1, "es1", 1)
        self._wire("es1", 3, "lb1", 1)
        self._wire("lb1", 1, "es1", 4)
        self._wire("es2", 3, "lb2", 1)
        self._wire("lb2", 1, "es2", 4)
        self._cable("es2", 1, "server", 1)

        for i, chain in enumerate(pairs, start=1):
            cs = TagRouter()
            cs.add(1, chain.forward_tag, 2, "pop")
            cs.add(2, None, 1, "push", chain.reverse_tag)
            cs.add(3, None, 4, "push", chain.forward_tag)
            cs.add(4, chain.reverse_tag, 3, "pop")
            cs_name, nf_name = f"cs{i}", f"nf{i}"
            self.nodes[cs_name] = SwitchNode(cs_name, cs, self)
            self.nodes[nf_name] = NfInstance(
                nf_name, chain, self,
                mode=s.nf_mode, capacity=s.nf_capacity, queue_limit=s.nf_queue_limit,
            )
            self._cable("es1", 4 + i, cs_name, 1)
            self._cable(cs_name, 2, nf_name, 1)
            self._cable(cs_name, 3, nf_name, 2)
            self._cable(cs_name, 4, "es2", 4 + i)

    def _wire(self, a, pa, b, pb):
        self.links[(a, pa)] = (b, pb)

    def _cable(self, a, pa, b, pb):
        self._wire(a, pa, b, pb)
        self._wire(b, pb, a, pa)

    # -- data plane plumbing

    def transmit(self, node: str, port: int, frame: Frame):
        dst, dst_port = self.links[(node, port)]
        target = self.nodes[dst]
        self.loop.schedule(self.loop.now + self.latency, self._arrive, target, frame, dst_port)

    def _arrive(self, target, frame, port):
        target.handle(frame, port, self.loop.now)

    def inject(self, frame: Frame):
        self.injected_bytes += frame.size
        origin = "server" if frame.reverse else "client"
        self.transmit(origin, 1, frame)

    def delivered(self, frame: Frame, now: float):
        self.delivered_bytes += frame.size

    def drop(self, frame: Frame, reason: str, where: str, now: float):
        self.dropped_bytes += frame.size
        kind = "drop" if reason == "queue_overflow" else "anomaly"
        record = {
            "t": round(now, 6), "event": kind, "reason": reason,
            "node": where, "session": frame.session_id,
        }
        self.events.append(record)
        if kind == "anomaly":
            self.anomalies.append(record)

    def violation(self, what: str, frame: Frame, now: float):
        record = {
            "t": round(now, 6), "event": "anomaly", "reason": what,
            "session": frame.session_id,
        }
        self.events.append(record)
        self.anomalies.append(record)

    # -- bookkeeping hooks

    def note_mapped(self, node: BalancerNode, frame: Frame, chain: ChainId, now: float):
        trace = self.sessions.get(frame.session_id)
        if node.is_master:
            if trace is None:
                self.sessions[frame.session_id] = SessionTrace(
                    first_seen=now, master_chain=chain, last_master_seen=now
                )
                self.session_starts.append((now, frame.session_id, chain))
                self.events.append(
                    {"t": round(now, 6), "event": "session_start",
                     "session": frame.session_id, "chain": chain.forward_tag}
                )
            else:
                if now >= trace.last_master_seen + self.scenario.session_timeout:
                    trace.expiry_gap = True
                trace.last_master_seen = now
                trace.master_chain = chain
        else:
            if trace is not None and trace.slave_chain is None:
                trace.slave_chain = chain
                if chain != trace.master_chain:
                    self.divergences += 1
                    self.events.append(
                        {"t": round(now, 6), "event": "divergence",
                         "session": frame.session_id,
                         "master_chain": trace.master_chain.forward_tag,
                         "slave_chain": chain.forward_tag}
                    )
            elif trace is None:
                # reverse packet arrived before any forward packet was mapped
                self.sessions[frame.session_id] = SessionTrace(
                    first_seen=now, master_chain=None, slave_chain=chain
                )
        if chain in self.reclaims and now > self.reclaims[chain]:
            self.violation(f"session mapped to reclaimed chain {chain}", frame, now)

    def note_reconcile(self, frame: Frame, old: ChainId, new: ChainId, now: float):
        trace = self.sessions.get(frame.session_id)
        if trace is not None:
            trace.reconciled = True
            trace.master_chain = new
        self.events.append(
            {"t": round(now, 6), "event": "reconcile", "session": frame.session_id,
             "old_chain": old.forward_tag, "new_chain": new.forward_tag}
        )

    def note_nf(self, chain: ChainId, frame: Frame, now: float):
        self.series.add(chain, now, frame.size)
        self.last_packet_on[chain] = now
        trace = self.sessions.get(frame.session_id)
        if trace is not None:
            trace.nf_chains.add(chain)
        if chain in self.reclaims and now > self.reclaims[chain]:
            self.violation(f"packet crossed reclaimed chain {chain}", frame, now)

    def _on_commit(self, generation, alloc, drain):
        record = {
            "t": round(self.loop.now, 6), "event": "commit", "generation": generation,
            "alloc": [[c.forward_tag, c.reverse_tag, n] for c, n in alloc],
            "drain": drain.forward_tag if drain else None,
        }
        self.commits.append(record)
        self.events.append(record)

    # -- run orchestration

    def run(self) -> RunResult:
        s = self.scenario
        cfg = ClusterConfig(
            hash_seed=s.hash_seed,
            bucket_count=s.bucket_count,
            session_timeout=s.session_timeout,
            window_length=s.window_length,
            chains=s.chains,
        )
        state = {}
        self.ms.handshake(
            cfg,
            on_done=lambda reply: state.update(
                done=True, ok=reply.payload["ok"], error=reply.payload.get("error")
            ),
        )
        self.loop.run()
        if not state.get("done"):
            raise RuntimeError("handshake did not complete")
        if not state["ok"]:
            raise RuntimeError(f"handshake failed: {state['error']}")

        packets = generate_traffic(s.traffic, s.seed)
        self._schedule_injections(packets)
        for action in s.actions:
            self.loop.schedule(action.at, self._fire_action, action)
        self.loop.schedule(1.0, self._sweep)
        # monitoring poll every window keeps op-time windows at most one
        # window long, so rebalancing math never sees stale transients
        self.loop.schedule(0.5 * s.window_length, self._stats_poll)
        self.loop.run(until=s.horizon)
        return self._finalize()

    def _stats_poll(self):
        now = self.loop.now

        def _got(window):
            rows = sorted(
                (c.forward_tag, int(n)) for c, n in window.bytes.items()
            )
            self.events.append(
                {"t": round(self.loop.now, 6), "event": "stats",
                 "window_s": round(window.window_length, 6), "bytes": rows}
            )

        self.ms.poll_stats(now, on_done=_got)
        nxt = now + self.scenario.window_length
        if nxt <= self.scenario.horizon:
            self.loop.schedule(nxt, self._stats_poll)

    def _schedule_injections(self, packets):
        cursor = {"i": 0}

        def _next():
            i = cursor["i"]
            if i >= len(packets):
                return
            planned = packets[i]
            cursor["i"] = i + 1
            frame = Frame(
                src=planned.src, dst=planned.dst, size=planned.size,
                session_id=planned.session_id, reverse=planned.reverse,
            )
            self.inject(frame)
            if cursor["i"] < len(packets):
                self.loop.schedule(packets[cursor["i"]].time, _next)

        if packets:
            self.loop.schedule(packets[0].time, _next)

    def _sweep(self):
        now = self.loop.now
        for agent in (self.master_agent, self.slave_agent):
            if agent.balancer is not None:
                agent.balancer.expire_sessions(now)
        if now + 1.0 <= self.scenario.horizon:
            self.loop.schedule(now + 1.0, self._sweep)

    def _fire_action(self, action):
        now = self.loop.now
        self.events.append(
            {"t": round(now, 6), "event": f"action_{action.op}",
             "pair": [action.pair.forward_tag, action.pair.reverse_tag] if action.pair else None}
        )
        done = lambda reply: self._action_done(action, reply)
        if action.op == "add":
            self.ms.add_chain(action.pair, now=now, on_done=done)
        elif action.op == "remove":
            self.ms.remove_chain(action.pair, now=now, on_done=done)
        else:
            self.ms.request_rebalance(now=now, on_done=done)

    def _action_done(self, action, reply):
        now = self.loop.now
        ok = reply.payload.get("ok", False)
        if not ok:
            self.violation(f"action {action.op} failed: {reply.payload.get('error')}",
                           Frame(None, None, 0, -1, False), now)
            return
        master_v = self.master_agent.balancer.buckets
        slave_v = self.slave_agent.balancer.buckets
        if master_v != slave_v:
            self.vectors_equal = False
        self.events.append(
            {"t": round(now, 6), "event": f"committed_{action.op}",
             "generation": reply.payload.get("generation"),
             "vectors_equal": master_v == slave_v}
        )
        if action.op == "remove":
            self._poll_path(action.pair)

    def _poll_path(self, pair):
        now = self.loop.now

        def _answer(active):
            if active:
                self.loop.schedule(
                    self.loop.now + self.scenario.poll_interval, self._poll_path, pair
                )
            else:
                self.reclaims[pair] = self.loop.now
                self.events.append(
                    {"t": round(self.loop.now, 6), "event": "reclaim",
                     "pair": [pair.forward_tag, pair.reverse_tag]}
                )

        self.ms.poll_path_active(pair, now=now, on_done=_answer)

    def _finalize(self) -> RunResult:
        reconciled = 0
        for sid, trace in self.sessions.items():
            if trace.reconciled:
                reconciled += 1
            if len(trace.nf_chains) > 1 and not trace.reconciled and not trace.expiry_gap:
                self.anomalies.append(
                    {"event": "anomaly", "reason": "session crossed multiple chains",
                     "session": sid,
                     "chains": sorted(c.forward_tag for c in trace.nf_chains)}
                )
            if (
                trace.slave_chain is not None
                and trace.master_chain is not None
                and trace.slave_chain != trace.master_chain
                and not trace.reconciled
            ):
                self.anomalies.append(
                    {"event": "anomaly", "reason": "unresolved master/slave divergence",
                     "session": sid}
                )
        return RunResult(
            scenario=self.scenario,
            series=self.series,
            events=self.events,
            injected_bytes=self.injected_bytes,
            delivered_bytes=self.delivered_bytes,
            dropped_bytes=self.dropped_bytes,
            anomalies=self.anomalies,
            commits=self.commits,
            reclaims=self.reclaims,
            session_starts=self.session_starts,
            divergences=self.divergences,
            reconciled_sessions=reconciled,
            vectors_equal=self.vectors_equal,
            message_trace=list(self.transport.trace),
            last_packet_on=dict(self.last_packet_on),
        )


def run(scenario: Scenario) -> RunResult:
    """Execute one scenario end to end."""
    return NetSim(scenario).run()
