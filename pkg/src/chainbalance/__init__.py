"""Connection-affine load balancing for horizontally scaled NF chains."""

from .balancer import Balancer, LogicalPacket
from .control import ClusterConfig, InstantTransport, ManagementSystem, MasterAgent, SlaveAgent
from .hashing import BucketVector, ChainId, Endpoint, HashParams, SessionKey, canonical_key
from .rebalance import TrafficWindow, WeightProfile

__all__ = [
    "Balancer",
    "BucketVector",
    "ChainId",
    "ClusterConfig",
    "Endpoint",
    "HashParams",
    "InstantTransport",
    "LogicalPacket",
    "ManagementSystem",
    "MasterAgent",
    "SessionKey",
    "SlaveAgent",
    "TrafficWindow",
    "WeightProfile",
    "canonical_key",
]

__version__ = "0.1.0"
