import random

import pytest

from chainbalance.errors import AllocationMismatch
from chainbalance.hashing import (
    ChainId,
    Endpoint,
    HashParams,
    build_buckets,
    canonical_key,
    hash_key,
    lookup,
)

C1 = ChainId(2, 3)
C2 = ChainId(4, 5)


def random_endpoint(rng):
    return Endpoint(bytes(rng.randrange(256) for _ in range(4)), rng.randrange(1, 65536))


def test_canonical_key_symmetric():
    a = Endpoint.parse("10.0.0.1", 5000)
    b = Endpoint.parse("10.0.0.2", 80)
    assert canonical_key(a, b) == canonical_key(b, a)


def test_canonical_key_equal_endpoints():
    a = Endpoint.parse("10.0.0.1", 5000)
    key = canonical_key(a, a)
    assert key.lo == key.hi == a


def test_canonical_key_symmetric_randomized():
    rng = random.Random(7)
    for _ in range(1000):
        a, b = random_endpoint(rng), random_endpoint(rng)
        assert canonical_key(a, b) == canonical_key(b, a)


def test_endpoint_validation():
    with pytest.raises(ValueError):
        Endpoint(b"\x01\x02\x03", 80)
    with pytest.raises(ValueError):
        Endpoint(b"\x01\x02\x03\x04", 0)


def test_hash_key_deterministic():
    a = Endpoint.parse("192.168.1.10", 443)
    b = Endpoint.parse("10.1.0.1", 33000)
    key = canonical_key(a, b)
    assert hash_key(key) == hash_key(key)
    assert hash_key(canonical_key(a, b)) == hash_key(canonical_key(b, a))


def test_hash_key_occupancy():
    # 100k random keys into 1024 buckets: max occupancy <= 1.5x the mean
    rng = random.Random(123)
    buckets = [0] * 1024
    for _ in range(100_000):
        key = canonical_key(random_endpoint(rng), random_endpoint(rng))
        buckets[hash_key(key) % 1024] += 1
    mean = 100_000 / 1024
    assert max(buckets) <= 1.5 * mean


def test_hash_key_ipv6():
    a = Endpoint.parse("2001:db8::1", 443)
    b = Endpoint.parse("2001:db8::2", 5000)
    assert hash_key(canonical_key(a, b)) == hash_key(canonical_key(b, a))


def test_chain_id_validation():
    with pytest.raises(ValueError):
        ChainId(1, 3)  # tag 1 reserved
    with pytest.raises(ValueError):
        ChainId(4095, 2)
    with pytest.raises(ValueError):
        ChainId(6, 6)


def test_build_single_chain():
    params = HashParams(seed=9, bucket_count=8)
    vector = build_buckets([(C1, 8)], params, generation=0)
    assert vector.slots == (C1,) * 8


def test_build_multiset_and_determinism():
    params = HashParams(seed=11, bucket_count=8)
    v1 = build_buckets([(C1, 4), (C2, 4)], params, generation=3)
    v2 = build_buckets([(C1, 4), (C2, 4)], params, generation=3)
    assert v1.slots == v2.slots
    assert v1.slots.count(C1) == 4 and v1.slots.count(C2) == 4
    assert build_buckets([(C1, 4), (C2, 4)], params, generation=4).slots != v1.slots


def test_build_rejects_bad_allocation():
    params = HashParams(seed=1, bucket_count=8)
    with pytest.raises(AllocationMismatch):
        build_buckets([(C1, 3), (C2, 4)], params, generation=0)
    with pytest.raises(AllocationMismatch):
        build_buckets([(C1, 9), (C2, -1)], params, generation=0)
    with pytest.raises(AllocationMismatch):
        build_buckets([(C1, 4), (C1, 4)], params, generation=0)


def reference_shuffle(items, seed, generation):
    """Straight-line reimplementation of the specified shuffle."""
    mask = 0xFFFFFFFFFFFFFFFF
    state = (seed ^ generation) & mask
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        state = (state + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        draw = z ^ (z >> 31)
        j = draw % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def test_build_matches_reference_shuffle():
    params = HashParams(seed=42, bucket_count=8)
    vector = build_buckets([(C1, 3), (C2, 5)], params, generation=1)
    expected = reference_shuffle([C1] * 3 + [C2] * 5, 42, 1)
    assert list(vector.slots) == expected


def test_build_matches_reference_shuffle_large():
    params = HashParams(seed=2024, bucket_count=1024)
    alloc = [(C1, 341), (C2, 342), (ChainId(6, 7), 341)]
    vector = build_buckets(alloc, params, generation=5)
    expected = reference_shuffle([C1] * 341 + [C2] * 342 + [ChainId(6, 7)] * 341, 2024, 5)
    assert list(vector.slots) == expected


def test_lookup_single_chain():
    params = HashParams(seed=5, bucket_count=16)
    vector = build_buckets([(C1, 16)], params, generation=0)
    rng = random.Random(3)
    for _ in range(50):
        key = canonical_key(random_endpoint(rng), random_endpoint(rng))
        assert lookup(vector, key) == C1


def test_lookup_agrees_across_identical_vectors():
    params = HashParams(seed=77, bucket_count=64)
    alloc = [(C1, 32), (C2, 32)]
    master = build_buckets(alloc, params, generation=2)
    slave = build_buckets(alloc, params, generation=2)
    assert master == slave
    rng = random.Random(9)
    for _ in range(500):
        key = canonical_key(random_endpoint(rng), random_endpoint(rng))
        assert lookup(master, key) == lookup(slave, key)


def test_lookup_proportionality():
    # 50k uniform keys over a 50/50 allocation: each side gets 50% +- 2pp
    params = HashParams(seed=31, bucket_count=1024)
    vector = build_buckets([(C1, 512), (C2, 512)], params, generation=0)
    rng = random.Random(17)
    hits = {C1: 0, C2: 0}
    n = 50_000
    for _ in range(n):
        hits[lookup(vector, canonical_key(random_endpoint(rng), random_endpoint(rng)))] += 1
    assert abs(hits[C1] / n - 0.5) < 0.02
    assert abs(hits[C2] / n - 0.5) < 0.02


def test_lookup_direction_invariance():
    params = HashParams(seed=8, bucket_count=128)
    vector = build_buckets([(C1, 64), (C2, 64)], params, generation=1)
    rng = random.Random(21)
    for _ in range(1000):
        a, b = random_endpoint(rng), random_endpoint(rng)
        assert lookup(vector, canonical_key(a, b)) == lookup(vector, canonical_key(b, a))


def test_counts_and_chains():
    params = HashParams(seed=13, bucket_count=10)
    vector = build_buckets([(C2, 4), (C1, 6)], params, generation=0)
    assert vector.counts() == {C1: 6, C2: 4}
    assert vector.chains() == (C1, C2)
