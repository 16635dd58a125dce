"""Per-kernel traffic counters and the aggregated simulation report.

Counts are per scalar element: one global access is one element read or
written in device global memory; one channel push carries one stream value
(a stencil tuple counts once).  Stall cycles count scheduler suspensions and
are schedule-dependent, so golden comparisons must exclude them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple


class KernelCounters:
    __slots__ = ("global_reads", "global_writes", "channel_pushes",
                 "channel_pops", "stall_cycles")

    def __init__(self) -> None:
        self.global_reads = 0
        self.global_writes = 0
        self.channel_pushes = 0
        self.channel_pops = 0
        self.stall_cycles = 0

    def to_json(self) -> dict:
        return {
            "globalReads": self.global_reads,
            "globalWrites": self.global_writes,
            "channelPushes": self.channel_pushes,
            "channelPops": self.channel_pops,
            "stallCycles": self.stall_cycles,
        }

    def comparable(self) -> dict:
        out = self.to_json()
        out.pop("stallCycles")
        return out


@dataclass
class SimReport:
    per_kernel: Dict[str, KernelCounters] = field(default_factory=dict)
    host_to_device_bytes: int = 0
    device_to_host_bytes: int = 0
    deadlock: Optional[Tuple[str, ...]] = None
    scheduler_steps: int = 0

    def kernel(self, name: str) -> KernelCounters:
        if name not in self.per_kernel:
            self.per_kernel[name] = KernelCounters()
        return self.per_kernel[name]

    @property
    def total_global_reads(self) -> int:
        return sum(c.global_reads for c in self.per_kernel.values())

    @property
    def total_global_writes(self) -> int:
        return sum(c.global_writes for c in self.per_kernel.values())

    @property
    def total_global_accesses(self) -> int:
        return self.total_global_reads + self.total_global_writes

    @property
    def total_channel_pushes(self) -> int:
        return sum(c.channel_pushes for c in self.per_kernel.values())

    @property
    def total_channel_pops(self) -> int:
        return sum(c.channel_pops for c in self.per_kernel.values())

    def to_json(self) -> dict:
        return {
            "perKernel": {k: c.to_json() for k, c in sorted(self.per_kernel.items())},
            "totals": {
                "globalReads": self.total_global_reads,
                "globalWrites": self.total_global_writes,
                "globalAccesses": self.total_global_accesses,
                "channelPushes": self.total_channel_pushes,
                "channelPops": self.total_channel_pops,
            },
            "hostTransfers": {
                "toDeviceBytes": self.host_to_device_bytes,
                "toHostBytes": self.device_to_host_bytes,
            },
            "accessUnit": "one scalar element per access",
            "deadlock": None if self.deadlock is None else list(self.deadlock),
            "schedulerSteps": self.scheduler_steps,
        }

    def comparable(self) -> dict:
        """Everything deterministic: counters without stalls or steps."""
        return {
            "perKernel": {k: c.comparable() for k, c in sorted(self.per_kernel.items())},
            "hostTransfers": {
                "toDeviceBytes": self.host_to_device_bytes,
                "toHostBytes": self.device_to_host_bytes,
            },
        }

    def dump(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"
