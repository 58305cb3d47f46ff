"""Scenario files: the YAML schema driving simulator runs.

A scenario names the shared balancer parameters, the chain tag pairs, the
traffic profile, the NF behavior and a list of timed management actions.
See the README for the documented schema and a worked example.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from .errors import ParseError, ValidationError
from .hashing import ChainId
from .traffic import TrafficProfile

VALID_OPS = ("add", "remove", "rebalance")
NF_MODES = ("passthrough", "capacity")


@dataclass(frozen=True)
class Action:
    at: float
    op: str
    pair: ChainId | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    hash_seed: int
    bucket_count: int
    session_timeout: float
    window_length: float
    chains: tuple[ChainId, ...]
    traffic: TrafficProfile
    actions: tuple[Action, ...] = ()
    nf_mode: str = "passthrough"
    nf_capacity: float = 0.0
    nf_queue_limit: int = 0  # packets; 0 means unbounded
    horizon: float = 60.0
    link_latency: float = 0.001
    control_latency: float = 0.001
    poll_interval: float = 0.25

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)

    def all_pairs(self) -> tuple[ChainId, ...]:
        """Every chain the run can ever use: initial plus added ones."""
        pairs = list(self.chains)
        for action in self.actions:
            if action.op == "add":
                pairs.append(action.pair)
        return tuple(pairs)


def _require(mapping, key, kind, where):
    if key not in mapping:
        raise ValidationError(f"missing required field {key!r}", location=where)
    value = mapping[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ValidationError(
            f"field {key!r} must be {kind.__name__}, got {type(value).__name__}",
            location=where,
        )
    return value


def _parse_pair(obj, where) -> ChainId:
    if not isinstance(obj, (list, tuple)) or len(obj) != 2:
        raise ValidationError(f"tag pair must be a 2-item list, got {obj!r}", location=where)
    fwd, rev = obj
    if not isinstance(fwd, int) or not isinstance(rev, int):
        raise ValidationError(f"tags must be integers, got {obj!r}", location=where)
    try:
        return ChainId(fwd, rev)
    except ValueError as exc:
        raise ValidationError(str(exc), location=where)


def scenario_from_mapping(obj: dict, name_hint: str = "scenario") -> Scenario:
    """Validate a parsed mapping and build the Scenario, or raise with the field."""
    if not isinstance(obj, dict):
        raise ValidationError("scenario document must be a mapping", location=name_hint)
    name = obj.get("name", name_hint)

    chains = [_parse_pair(p, f"{name}.chains[{i}]") for i, p in enumerate(obj.get("chains", []))]
    if not chains:
        raise ValidationError("at least one chain required", location=f"{name}.chains")

    actions = []
    for i, entry in enumerate(obj.get("actions", []) or []):
        where = f"{name}.actions[{i}]"
        op = _require(entry, "op", str, where)
        if op not in VALID_OPS:
            raise ValidationError(f"op must be one of {VALID_OPS}, got {op!r}", location=where)
        at = _require(entry, "at", float, where)
        pair = None
        if op in ("add", "remove"):
            pair = _parse_pair(_require(entry, "pair", list, where), where)
        actions.append(Action(at=at, op=op, pair=pair))
    if actions != sorted(actions, key=lambda a: a.at):
        raise ValidationError("actions must be sorted by time", location=f"{name}.actions")

    declared = list(chains)
    for i, action in enumerate(actions):
        where = f"{name}.actions[{i}]"
        if action.op == "add":
            declared.append(action.pair)
        elif action.op == "remove":
            if action.pair not in declared:
                raise ValidationError(
                    f"remove of undeclared pair {action.pair}", location=where
                )
    tags = [t for c in declared for t in (c.forward_tag, c.reverse_tag)]
    if len(set(tags)) != len(tags):
        raise ValidationError("a tag is used by more than one chain", location=f"{name}")

    hashing = obj.get("hash", {})
    hash_seed = _require(hashing, "seed", int, f"{name}.hash")
    bucket_count = _require(hashing, "buckets", int, f"{name}.hash")
    if bucket_count < 64 * len(declared):
        raise ValidationError(
            f"{bucket_count} buckets is too small for {len(declared)} chains "
            "(need at least 64 per chain)",
            location=f"{name}.hash.buckets",
        )

    tr = obj.get("traffic", {})
    where = f"{name}.traffic"
    traffic = TrafficProfile(
        sessions=_require(tr, "sessions", int, where),
        rate=_require(tr, "rate", float, where),
        bytes_per_session=_require(tr, "bytes_per_session", int, where),
        packet_size=tr.get("packet_size", 3000),
        request_bytes=tr.get("request_bytes", 400),
        duration=float(tr.get("duration", 6.0)),
        duration_jitter=float(tr.get("duration_jitter", 0.5)),
        response_delay=float(tr.get("response_delay", 0.02)),
        start_offset=float(tr.get("start_offset", 0.0)),
        collide_fraction=float(tr.get("collide_fraction", 0.0)),
    )
    try:
        traffic.validate()
    except ValueError as exc:
        raise ValidationError(str(exc), location=where)

    nf = obj.get("nf", {}) or {}
    nf_mode = nf.get("mode", "passthrough")
    if nf_mode not in NF_MODES:
        raise ValidationError(f"nf.mode must be one of {NF_MODES}", location=f"{name}.nf.mode")
    nf_capacity = float(nf.get("capacity", 0.0))
    if nf_mode == "capacity" and nf_capacity <= 0:
        raise ValidationError("capacity mode needs nf.capacity > 0", location=f"{name}.nf.capacity")

    horizon = float(obj.get("horizon", 60.0))
    if horizon <= 0:
        raise ValidationError("horizon must be positive", location=f"{name}.horizon")
    for i, action in enumerate(actions):
        if not 0 <= action.at < horizon:
            raise ValidationError(
                f"action time {action.at} outside [0, horizon)", location=f"{name}.actions[{i}]"
            )

    return Scenario(
        name=name,
        seed=int(obj.get("seed", 1)),
        hash_seed=hash_seed,
        bucket_count=bucket_count,
        session_timeout=float(obj.get("session_timeout", 6.0)),
        window_length=float(obj.get("window", 5.0)),
        chains=tuple(chains),
        traffic=traffic,
        actions=tuple(actions),
        nf_mode=nf_mode,
        nf_capacity=nf_capacity,
        nf_queue_limit=int(nf.get("queue_limit", 0)),
        horizon=horizon,
        link_latency=float(obj.get("link_latency", 0.001)),
        control_latency=float(obj.get("control_latency", 0.001)),
        poll_interval=float(obj.get("poll_interval", 0.25)),
    )


def parse_scenario(path) -> Scenario:
    """Load and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}")
    try:
        obj = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML in {path}: {exc}")
    return scenario_from_mapping(obj, name_hint=path.stem)
