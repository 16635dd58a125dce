"""Pipeline graph: kernels, channels, smart caches, memory ports, host plan.

Three variants share the schema:

* baseline     - every kernel reads and writes device global memory in
                 place; the host launches kernels one after another.
* channelized  - kernels run concurrently; each chain edge carries the
                 produced element stream through a blocking channel, which
                 also paces stencil consumers (they read ahead by the
                 maximum positive offset before emitting).  Stencil taps and
                 non-adjacent arrays still go through global memory.
* smartcache   - only dedicated per-array memory reader/writer kernels touch
                 global memory; windowing caches turn linear streams into
                 stencil tuples and sync buffers realign skewed streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from ..analyzer.ir import ArrayInfo

VARIANTS = ("baseline", "channelized", "smartcache")


@dataclass(frozen=True)
class SmartCacheSpec:
    """Geometry of one stream buffer.

    Stenciled streams derive everything from their linearized offsets:
    mpoff = max(offsets + {0}), mnoff = -min(offsets + {0}), and
    buffer_len = mpoff + mnoff + 1.  Sync-only streams have no stencil
    (empty offsets); their mpoff records the imposed alignment delay and
    buffer_len = mpoff + 1.
    """

    stream_id: str
    array: str
    size: int
    offsets: Tuple[int, ...]  # sorted linearized offsets; empty for sync-only
    mpoff: int
    mnoff: int
    buffer_len: int
    sync_only: bool
    boundary: str = "clamp"  # clamp | zero

    def to_json(self) -> dict:
        return {
            "streamId": self.stream_id,
            "array": self.array,
            "size": self.size,
            "offsets": list(self.offsets),
            "MPOff": self.mpoff,
            "MNOff": self.mnoff,
            "bufferLen": self.buffer_len,
            "syncOnly": self.sync_only,
            "boundary": self.boundary,
        }


# input bindings for compute kernels
@dataclass(frozen=True)
class GlobalIn:
    array: str
    kind: str = "global"


@dataclass(frozen=True)
class ChanElem:
    """Pointwise stream: the channel value is the (0,..,0) tap."""

    array: str
    channel: str
    kind: str = "chan_elem"


@dataclass(frozen=True)
class ChanSync:
    """Stenciled stream paced by a channel: pops run ahead of the emission
    index by `mpoff` so global taps are fresh; taps themselves read global."""

    array: str
    channel: str
    mpoff: int
    kind: str = "chan_sync"


@dataclass(frozen=True)
class TapsIn:
    """Smart-cache stencil stream: one scalar channel per offset.

    `channels` is ordered by ascending linearized offset; `layout` maps each
    original n-D offset to its position in that order.
    """

    array: str
    channels: Tuple[str, ...]
    offsets: Tuple[int, ...]  # sorted linearized offsets
    layout: Tuple[Tuple[Tuple[int, ...], int], ...] = ()
    kind: str = "taps"


@dataclass(frozen=True)
class OutBinding:
    array: str
    to_global: bool
    channels: Tuple[str, ...] = ()


@dataclass(frozen=True)
class KernelNode:
    """One simulator process: compute node, cache, sync, or memory mover."""

    name: str
    kind: str  # compute | fold | cache | sync | memread | memwrite
    node_name: Optional[str] = None  # IR node for compute/fold kernels
    inputs: Tuple[object, ...] = ()  # bindings for compute kernels
    outputs: Tuple[OutBinding, ...] = ()
    spec: Optional[SmartCacheSpec] = None  # cache/sync kernels
    in_channel: Optional[str] = None  # cache/sync/memwrite
    out_channels: Tuple[str, ...] = ()  # cache/sync/memread fan-out
    array: Optional[str] = None  # memread/memwrite target

    @property
    def mem_ports(self) -> Tuple[Tuple[str, str], ...]:
        """(array, direction) pairs this kernel owns."""
        ports: List[Tuple[str, str]] = []
        if self.kind == "memread":
            ports.append((self.array, "read"))
        elif self.kind == "memwrite":
            ports.append((self.array, "write"))
        elif self.kind in ("compute", "fold"):
            for b in self.inputs:
                if isinstance(b, (GlobalIn, ChanSync)):
                    ports.append((b.array, "read"))
            for b in self.outputs:
                if b.to_global:
                    ports.append((b.array, "write"))
            if self.kind == "fold":
                ports.append((f"<{self.name}.result>", "write"))
        return tuple(ports)


@dataclass(frozen=True)
class ChannelEdge:
    name: str
    producer: str  # kernel name
    consumer: str
    elem: str  # scalar type or "tuple[<n>]"
    capacity: int


@dataclass(frozen=True)
class HostOp:
    op: str  # to_device | to_host | launch | time_loop
    arrays: Tuple[str, ...] = ()
    kernels: Tuple[str, ...] = ()
    body: Tuple["HostOp", ...] = ()


@dataclass
class PipelineGraph:
    variant: str
    kernels: List[KernelNode]
    channels: List[ChannelEdge]
    smart_caches: List[SmartCacheSpec]
    host_plan: List[HostOp]
    arrays: Dict[str, ArrayInfo]
    step_inputs: FrozenSet[str]
    live_out: FrozenSet[str]
    written: FrozenSet[str]
    row_stride: int
    stream_size: int
    nt_param: Optional[str]
    recirculation: str = "global"
    default_capacity: int = 64
    ir_nodes: Dict[str, object] = field(default_factory=dict)

    def kernel(self, name: str) -> KernelNode:
        for k in self.kernels:
            if k.name == name:
                return k
        raise KeyError(name)

    def channel(self, name: str) -> ChannelEdge:
        for c in self.channels:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def mem_ports(self) -> List[Tuple[str, str, str]]:
        out = []
        for k in self.kernels:
            for arr, direction in k.mem_ports:
                out.append((k.name, arr, direction))
        return out

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "kernels": [
                {
                    "name": k.name,
                    "kind": k.kind,
                    "inputs": [_binding_json(b) for b in k.inputs],
                    "outputs": [
                        {"array": o.array, "global": o.to_global, "channels": list(o.channels)}
                        for o in k.outputs
                    ],
                    "memPorts": [list(p) for p in k.mem_ports],
                }
                for k in self.kernels
            ],
            "channels": [
                {"name": c.name, "from": c.producer, "to": c.consumer,
                 "elem": c.elem, "capacity": c.capacity}
                for c in self.channels
            ],
            "smartCaches": [s.to_json() for s in self.smart_caches],
            "hostPlan": [_hostop_json(op) for op in self.host_plan],
            "recirculation": self.recirculation,
            "rowStride": self.row_stride,
            "streamSize": self.stream_size,
        }

    def dump(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def _binding_json(b) -> dict:
    out = {"kind": b.kind, "array": b.array}
    if isinstance(b, (ChanElem, ChanSync)):
        out["channel"] = b.channel
    if isinstance(b, ChanSync):
        out["MPOff"] = b.mpoff
    if isinstance(b, TapsIn):
        out["channels"] = list(b.channels)
        out["offsets"] = list(b.offsets)
    return out


def _hostop_json(op: HostOp) -> dict:
    out = {"op": op.op}
    if op.arrays:
        out["arrays"] = list(op.arrays)
    if op.kernels:
        out["kernels"] = list(op.kernels)
    if op.body:
        out["body"] = [_hostop_json(b) for b in op.body]
    return out
