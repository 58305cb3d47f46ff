"""Direction-invariant session keying and the shared bucket vector.

Both balancers of a pair run this module with the same seed, so every
function here must be bit-for-bit deterministic across processes and
hosts: no per-process hash randomization, no library RNG.

Primitives:
    canonical_key — order the two endpoints of a flow into one key
    hash_key      — FNV-1a over the key bytes, finished with a 64-bit mixer
    build_buckets — fill slots per allocation, Fisher-Yates shuffle (SplitMix64)
    lookup        — slots[hash_key(k) mod L]
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass

from .errors import AllocationMismatch

MASK64 = 0xFFFF_FFFF_FFFF_FFFF

# FNV-1a 64-bit constants
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3

TAG_MIN = 2
TAG_MAX = 4094  # 12-bit field, 0/1 reserved, 4095 reserved

DEFAULT_BUCKET_COUNT = 1024


@dataclass(frozen=True, order=True)
class Endpoint:
    """One side of a flow: packed network address plus transport port."""

    address: bytes
    port: int

    def __post_init__(self):
        if len(self.address) not in (4, 16):
            raise ValueError(f"address must be 4 or 16 bytes, got {len(self.address)}")
        if not 0 < self.port <= 0xFFFF:
            raise ValueError(f"port out of range: {self.port}")

    @classmethod
    def parse(cls, address: str, port: int) -> "Endpoint":
        return cls(ipaddress.ip_address(address).packed, port)

    def __str__(self):
        return f"{ipaddress.ip_address(self.address)}:{self.port}"


@dataclass(frozen=True)
class SessionKey:
    """Canonically ordered endpoint pair; identical for both flow directions."""

    lo: Endpoint
    hi: Endpoint

    def __str__(self):
        return f"{self.lo}|{self.hi}"


@dataclass(frozen=True, order=True)
class ChainId:
    """Tag pair naming one chain instance: forward path tag, reverse path tag."""

    forward_tag: int
    reverse_tag: int

    def __post_init__(self):
        for tag in (self.forward_tag, self.reverse_tag):
            if not TAG_MIN <= tag <= TAG_MAX:
                raise ValueError(f"tag out of range [{TAG_MIN}, {TAG_MAX}]: {tag}")
        if self.forward_tag == self.reverse_tag:
            raise ValueError(f"forward and reverse tags must differ: {self.forward_tag}")

    def __str__(self):
        return f"({self.forward_tag},{self.reverse_tag})"


@dataclass(frozen=True)
class HashParams:
    """Shared hashing parameters: shuffle seed and bucket-vector length."""

    seed: int
    bucket_count: int = DEFAULT_BUCKET_COUNT

    def __post_init__(self):
        if self.bucket_count <= 0:
            raise ValueError("bucket_count must be positive")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must fit in 64 bits")


def canonical_key(a: Endpoint, b: Endpoint) -> SessionKey:
    """Build the direction-invariant key for the flow between a and b."""
    return SessionKey(a, b) if a <= b else SessionKey(b, a)


def _fmix64(h: int) -> int:
    # 64-bit finalizer; keeps low bits well distributed for mod-L indexing
    h ^= h >> 33
    h = (h * 0xFF51AFD7ED558CCD) & MASK64
    h ^= h >> 33
    h = (h * 0xC4CEB9FE1A85EC53) & MASK64
    h ^= h >> 33
    return h


def hash_key(key: SessionKey) -> int:
    """Map a session key to a 64-bit integer, identically on every host."""
    h = _FNV_OFFSET
    for ep in (key.lo, key.hi):
        for byte in ep.address:
            h = ((h ^ byte) * _FNV_PRIME) & MASK64
        h = ((h ^ (ep.port >> 8)) * _FNV_PRIME) & MASK64
        h = ((h ^ (ep.port & 0xFF)) * _FNV_PRIME) & MASK64
    return _fmix64(h)


class SplitMix64:
    """Tiny deterministic generator driving the bucket shuffle."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)


@dataclass(frozen=True)
class BucketVector:
    """Immutable array of chain ids; replaced wholesale, never mutated."""

    slots: tuple[ChainId, ...]
    seed: int
    generation: int

    def __len__(self):
        return len(self.slots)

    def lookup(self, key: SessionKey) -> ChainId:
        return self.slots[hash_key(key) % len(self.slots)]

    def chains(self) -> tuple[ChainId, ...]:
        """Distinct chains present, ordered by forward tag."""
        return tuple(sorted(set(self.slots)))

    def counts(self) -> dict[ChainId, int]:
        """Slot count per chain, ordered by forward tag."""
        out: dict[ChainId, int] = {}
        for c in sorted(set(self.slots)):
            out[c] = 0
        for c in self.slots:
            out[c] += 1
        return out


def build_buckets(
    alloc: list[tuple[ChainId, int]],
    params: HashParams,
    generation: int,
) -> BucketVector:
    """Fill one slot run per chain, then Fisher-Yates shuffle.

    The shuffle is driven by SplitMix64 seeded with seed XOR generation,
    with the swap index drawn as next() mod (i+1) for i from L-1 down to 1.
    Both balancers must call this with an identically ordered alloc to get
    bit-identical vectors.
    """
    total = sum(count for _, count in alloc)
    if total != params.bucket_count:
        raise AllocationMismatch(
            f"allocation sums to {total}, vector length is {params.bucket_count}"
        )
    if any(count < 0 for _, count in alloc):
        raise AllocationMismatch("negative slot count")
    ids = [chain for chain, _ in alloc]
    if len(set(ids)) != len(ids):
        raise AllocationMismatch("duplicate chain in allocation")

    slots: list[ChainId] = []
    for chain, count in alloc:
        slots.extend([chain] * count)

    rng = SplitMix64(params.seed ^ (generation & MASK64))
    for i in range(len(slots) - 1, 0, -1):
        j = rng.next() % (i + 1)
        slots[i], slots[j] = slots[j], slots[i]

    return BucketVector(tuple(slots), params.seed, generation)


def lookup(vector: BucketVector, key: SessionKey) -> ChainId:
    """Chain serving this session under the given vector."""
    return vector.lookup(key)
