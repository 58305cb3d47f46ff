"""Synthetic bidirectional session workloads for the simulator.

Sessions mimic fixed-rate HTTP fetches: a short client request followed by
a paced stream of response bytes from the server, finishing a configurable
duration after the session started. Everything is derived from one seed so
a profile always expands to the identical packet schedule.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .hashing import Endpoint

SERVER = Endpoint.parse("10.99.0.1", 80)


@dataclass(frozen=True)
class TrafficProfile:
    """Knobs for one workload: how many sessions, how fast, how big."""

    sessions: int
    rate: float  # session starts per second
    bytes_per_session: int  # total of both directions
    packet_size: int = 3000
    request_bytes: int = 400
    duration: float = 6.0  # seconds from first to last packet of a session
    duration_jitter: float = 0.5  # uniform spread around duration
    response_delay: float = 0.02  # server think time before the first reply byte
    start_offset: float = 0.0
    collide_fraction: float = 0.0  # stress toggle: share 4-tuples between sessions

    def validate(self):
        if self.sessions <= 0 or self.rate <= 0:
            raise ValueError("sessions and rate must be positive")
        if self.bytes_per_session <= self.request_bytes:
            raise ValueError("bytes_per_session must exceed request_bytes")
        if self.packet_size <= 0:
            raise ValueError("packet_size must be positive")
        if self.duration <= self.response_delay:
            raise ValueError("duration must exceed response_delay")


@dataclass(frozen=True)
class SessionSpec:
    """One planned session; packet times are fully determined by these fields."""

    session_id: int
    client: Endpoint
    server: Endpoint
    start: float
    request_bytes: int
    response_bytes: int
    packet_size: int
    duration: float
    response_delay: float


@dataclass(frozen=True)
class PlannedPacket:
    """A packet the generator will inject: where, when, how big."""

    time: float
    session_id: int
    src: Endpoint
    dst: Endpoint
    size: int
    reverse: bool


def _chunks(total: int, size: int) -> list[int]:
    n = math.ceil(total / size)
    sizes = [size] * (n - 1)
    sizes.append(total - size * (n - 1))
    return sizes


def plan_sessions(profile: TrafficProfile, seed: int, server: Endpoint = SERVER) -> list[SessionSpec]:
    """Lay out session start times, endpoints and durations for a profile."""
    profile.validate()
    rng = random.Random(seed)
    used: set[tuple[bytes, int]] = set()
    pool: list[Endpoint] = []
    specs = []
    for i in range(profile.sessions):
        if pool and rng.random() < profile.collide_fraction:
            client = rng.choice(pool)
        else:
            while True:
                address = bytes([10, 0, rng.randrange(256), 1 + rng.randrange(254)])
                port = rng.randrange(1024, 65536)
                if (address, port) not in used:
                    break
            used.add((address, port))
            client = Endpoint(address, port)
            pool.append(client)
        duration = profile.duration + rng.uniform(-profile.duration_jitter, profile.duration_jitter)
        specs.append(
            SessionSpec(
                session_id=i,
                client=client,
                server=server,
                start=profile.start_offset + i / profile.rate,
                request_bytes=profile.request_bytes,
                response_bytes=profile.bytes_per_session - profile.request_bytes,
                packet_size=profile.packet_size,
                duration=duration,
                response_delay=profile.response_delay,
            )
        )
    return specs


def session_packets(spec: SessionSpec) -> list[PlannedPacket]:
    """Expand one session into its forward request and paced reverse response."""
    packets = []
    for i, size in enumerate(_chunks(spec.request_bytes, spec.packet_size)):
        packets.append(
            PlannedPacket(
                time=spec.start + i * 1e-4,
                session_id=spec.session_id,
                src=spec.client,
                dst=spec.server,
                size=size,
                reverse=False,
            )
        )
    sizes = _chunks(spec.response_bytes, spec.packet_size)
    spacing = (spec.duration - spec.response_delay) / len(sizes)
    for i, size in enumerate(sizes):
        packets.append(
            PlannedPacket(
                time=spec.start + spec.response_delay + (i + 1) * spacing,
                session_id=spec.session_id,
                src=spec.server,
                dst=spec.client,
                size=size,
                reverse=True,
            )
        )
    return packets


def generate_traffic(profile: TrafficProfile, seed: int, server: Endpoint = SERVER) -> list[PlannedPacket]:
    """Full two-direction packet schedule for a profile, ordered by time."""
    packets: list[PlannedPacket] = []
    for spec in plan_sessions(profile, seed, server):
        packets.extend(session_packets(spec))
    packets.sort(key=lambda p: (p.time, p.session_id, p.reverse))
    return packets
