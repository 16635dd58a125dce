"""Deterministic execution of pipeline graphs over concrete grids.

Kernels, caches, sync buffers and memory movers each run as a cooperative
process; a launch group finishes when every process in it completes, and
channels must drain to empty (clean shutdown).  Host and device memories are
separate numpy stores; transfer ops copy between them and are the only way
data crosses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from ..analyzer.ir import FoldNode, compile_elemental
from ..errors import DeadlockDetected, ShapeMismatch, SimulationError
from ..frontend.nodes import FType
from .channel import _MISS, Channel, try_pop, try_push
from .report import SimReport
from .scheduler import Process, Scheduler

_DTYPES = {FType.REAL: np.float32, FType.INTEGER: np.int32, FType.LOGICAL: np.bool_}

F32 = np.float32


@dataclass
class SimConfig:
    capacity: Optional[int] = None  # None: per-graph default
    sched: str = "rr"  # rr | random
    seed: Optional[int] = None
    max_steps: int = 500_000_000


@dataclass
class RunResult:
    host: Dict[str, np.ndarray]
    device: Dict[str, np.ndarray]
    scalars: Dict[str, object]
    report: SimReport


def run_pipeline(graph, initial_arrays: Dict[str, np.ndarray], nt: int,
                 host_values: Dict[str, object],
                 config: Optional[SimConfig] = None) -> RunResult:
    """Execute the host plan for `nt` steps from host-side initial arrays."""
    config = config or SimConfig()
    if nt < 0:
        raise SimulationError("nt must be >= 0")

    host: Dict[str, np.ndarray] = {}
    for name, info in graph.arrays.items():
        if name not in initial_arrays:
            raise ShapeMismatch(f"initial array '{name}' missing")
        arr = initial_arrays[name]
        if tuple(arr.shape) != info.shape:
            raise ShapeMismatch(
                f"'{name}' has shape {tuple(arr.shape)}, expected {info.shape}"
            )
        host[name] = np.ascontiguousarray(arr, dtype=_DTYPES[info.ftype]).copy()

    device = {
        name: np.zeros(info.shape, dtype=_DTYPES[info.ftype])
        for name, info in graph.arrays.items()
    }
    scalars: Dict[str, object] = {}
    report = SimReport()
    sched = Scheduler(mode=config.sched, seed=config.seed, max_steps=config.max_steps)

    for op in graph.host_plan:
        _host_op(op, graph, host, device, scalars, nt, host_values, config, report, sched)

    report.scheduler_steps = sched.steps
    return RunResult(host=host, device=device, scalars=scalars, report=report)


def _host_op(op, graph, host, device, scalars, nt, host_values, config, report, sched):
    if op.op == "to_device":
        for arr in op.arrays:
            device[arr][...] = host[arr]
            report.host_to_device_bytes += host[arr].nbytes
    elif op.op == "to_host":
        for arr in op.arrays:
            host[arr][...] = device[arr]
            report.device_to_host_bytes += device[arr].nbytes
    elif op.op == "time_loop":
        for _ in range(nt):
            for inner in op.body:
                _host_op(inner, graph, host, device, scalars, nt, host_values,
                         config, report, sched)
    elif op.op == "launch":
        _launch(graph, op.kernels, device, scalars, host_values, config, report, sched)
    else:
        raise SimulationError(f"unknown host op '{op.op}'")


def _launch(graph, kernel_names, device, scalars, host_values, config, report, sched):
    capacity = config.capacity or graph.default_capacity
    channels: Dict[str, Channel] = {}
    needed = set()
    for kname in kernel_names:
        k = graph.kernel(kname)
        for b in k.inputs:
            if hasattr(b, "channel"):
                needed.add(b.channel)
        for o in k.outputs:
            needed.update(o.channels)
        if k.in_channel:
            needed.add(k.in_channel)
        needed.update(k.out_channels)
    for cname in sorted(needed):
        ch = Channel(cname, capacity)
        ch.bind(sched)
        channels[cname] = ch

    procs: List[Process] = []
    for kname in kernel_names:
        k = graph.kernel(kname)
        counters = report.kernel(kname)
        gen = _make_process(graph, k, device, scalars, host_values, channels, counters)
        procs.append(Process(kname, gen))

    try:
        stalls = sched.run(procs)
    except DeadlockDetected as ex:
        report.deadlock = ex.blocked
        for p in procs:
            report.kernel(p.name).stall_cycles += p.stalls
        raise
    for name, n in stalls.items():
        report.kernel(name).stall_cycles += n
    for cname, ch in channels.items():
        if ch.residual:
            raise SimulationError(
                f"channel '{cname}' holds {ch.residual} elements after shutdown"
            )


# --------------------------------------------------------------------------
# Process construction


def _make_process(graph, k, device, scalars, host_values, channels, counters):
    if k.kind == "memread":
        return _memread_proc(graph, k, device, channels, counters)
    if k.kind == "memwrite":
        return _memwrite_proc(graph, k, device, channels, counters)
    if k.kind == "cache":
        return _cache_proc(graph, k, channels, counters)
    if k.kind == "sync":
        return _sync_proc(graph, k, channels, counters)
    if k.kind in ("compute", "fold"):
        return _compute_proc(graph, k, device, scalars, host_values, channels, counters)
    raise SimulationError(f"unknown kernel kind '{k.kind}'")


def _memread_proc(graph, k, device, channels, counters):
    flat = device[k.array].reshape(-1)
    outs = [channels[c] for c in k.out_channels]
    size = graph.stream_size

    def proc():
        for p in range(size):
            v = flat[p]
            counters.global_reads += 1
            for ch in outs:
                if not try_push(ch, v):
                    yield from ch.push(v)
                counters.channel_pushes += 1

    return proc()


def _memwrite_proc(graph, k, device, channels, counters):
    flat = device[k.array].reshape(-1)
    ch = channels[k.in_channel]
    size = graph.stream_size

    def proc():
        for p in range(size):
            v = try_pop(ch)
            if v is _MISS:
                v = yield from ch.pop()
            counters.channel_pops += 1
            flat[p] = v
            counters.global_writes += 1

    return proc()


def _cache_proc(graph, k, channels, counters):
    spec = k.spec
    cin = channels[k.in_channel]
    outs = [channels[c] for c in k.out_channels]
    size = spec.size
    blen = spec.buffer_len
    offs = spec.offsets
    mpoff = spec.mpoff
    window = [None] * blen
    clamp = spec.boundary == "clamp"

    def proc():
        consumed = 0
        for p in range(size):
            target = min(p + mpoff, size - 1)
            while consumed <= target:
                v = try_pop(cin)
                if v is _MISS:
                    v = yield from cin.pop()
                counters.channel_pops += 1
                window[consumed % blen] = v
                consumed += 1
            for d, ch in zip(offs, outs):
                q = p + d
                if 0 <= q < size:
                    v = window[q % blen]
                elif clamp:
                    v = window[(0 if q < 0 else size - 1) % blen]
                else:
                    v = _zero_like(window[p % blen])
                if not try_push(ch, v):
                    yield from ch.push(v)
                counters.channel_pushes += 1

    return proc()


def _zero_like(v):
    if isinstance(v, np.bool_) or isinstance(v, bool):
        return np.bool_(False)
    if isinstance(v, (np.integer, int)):
        return np.int32(0)
    return F32(0.0)


def _sync_proc(graph, k, channels, counters):
    spec = k.spec
    cin = channels[k.in_channel]
    outs = [channels[c] for c in k.out_channels]
    size = spec.size
    blen = spec.buffer_len
    delay = spec.mpoff
    window = [None] * blen

    def proc():
        consumed = 0
        for p in range(size):
            target = min(p + delay, size - 1)
            while consumed <= target:
                v = try_pop(cin)
                if v is _MISS:
                    v = yield from cin.pop()
                counters.channel_pops += 1
                window[consumed % blen] = v
                consumed += 1
            v = window[p % blen]
            for ch in outs:
                if not try_push(ch, v):
                    yield from ch.push(v)
                counters.channel_pushes += 1

    return proc()


class _Cell:
    __slots__ = ("v",)


def _make_load(data, rank, lo0, lo1, counters):
    if rank == 2:
        def rd(off, idx, data=data):
            counters.global_reads += 1
            return data[idx[0] + off[0] - lo0, idx[1] + off[1] - lo1]
    else:
        def rd(off, idx, data=data):
            counters.global_reads += 1
            return data[idx[0] + off[0] - lo0]
    return rd


def _make_store(data, rank, lo0, lo1, counters):
    if rank == 2:
        def wr(value, idx, data=data):
            counters.global_writes += 1
            data[idx[0] - lo0, idx[1] - lo1] = value
    else:
        def wr(value, idx, data=data):
            counters.global_writes += 1
            data[idx[0] - lo0] = value
    return wr


def _compute_proc(graph, k, device, scalars, host_values, channels, counters):
    node = graph.ir_nodes[k.node_name]
    size = graph.stream_size
    stride = graph.row_stride
    bounds = node.bounds
    rank = len(bounds)
    lo0 = bounds[0][0]
    lo1 = bounds[1][0] if rank == 2 else 0

    # input access dispatch per array
    readers: Dict[str, Callable] = {}
    pointwise_cells: List[Tuple[Channel, _Cell]] = []
    taps_groups: List[Tuple[List[Channel], _Cell]] = []
    sync_pops: List[dict] = []

    for b in k.inputs:
        arr = b.array
        if b.kind == "global":
            readers[arr] = _make_load(device[arr], rank, lo0, lo1, counters)
        elif b.kind == "chan_elem":
            cell = _Cell()
            pointwise_cells.append((channels[b.channel], cell))

            def rd(off, idx, cell=cell):
                return cell.v
            readers[arr] = rd
        elif b.kind == "chan_sync":
            # the channel paces the kernel; taps re-read global memory
            sync_pops.append({"ch": channels[b.channel], "consumed": 0, "mpoff": b.mpoff})
            readers[arr] = _make_load(device[arr], rank, lo0, lo1, counters)
        elif b.kind == "taps":
            cell = _Cell()
            taps_groups.append(([channels[c] for c in b.channels], cell))
            layout = dict(b.layout)

            def rd(off, idx, cell=cell, layout=layout):
                return cell.v[layout[off]]
            readers[arr] = rd
        else:
            raise SimulationError(f"unknown binding kind '{b.kind}'")

    # output dispatch per array: optional global store plus channel fan-out
    writers: Dict[str, Callable] = {}
    pending_pushes: List[Tuple[List[Channel], list]] = []
    for o in k.outputs:
        sinks = [channels[c] for c in o.channels]
        store = _make_store(device[o.array], rank, lo0, lo1, counters) if o.to_global else None
        if sinks:
            box: list = []
            pending_pushes.append((sinks, box))

            def wr(off, value, idx, store=store, box=box):
                if store is not None:
                    store(value, idx)
                box.append(value)
        else:
            def wr(off, value, idx, store=store):
                if store is not None:
                    store(value, idx)
        writers[o.array] = wr

    def read(name, off, idx):
        return readers[name](off, idx)

    def write(name, off, value, idx):
        writers[name](off, value, idx)

    fn = compile_elemental(node, host_values, read, write)
    is_fold = isinstance(node, FoldNode)

    def proc():
        acc = None
        if is_fold:
            acc = _fold_init(node)
        for p in range(size):
            for state in sync_pops:
                ch = state["ch"]
                target = min(p + state["mpoff"], size - 1)
                while state["consumed"] <= target:
                    if try_pop(ch) is _MISS:
                        yield from ch.pop()
                    counters.channel_pops += 1
                    state["consumed"] += 1
            for ch, cell in pointwise_cells:
                v = try_pop(ch)
                if v is _MISS:
                    v = yield from ch.pop()
                cell.v = v
                counters.channel_pops += 1
            for chans_, cell in taps_groups:
                taps = []
                for ch in chans_:
                    v = try_pop(ch)
                    if v is _MISS:
                        v = yield from ch.pop()
                    counters.channel_pops += 1
                    taps.append(v)
                cell.v = taps
            if rank == 2:
                idx = (lo0 + p // stride, lo1 + p % stride)
            else:
                idx = (lo0 + p,)
            if is_fold:
                acc = fn(idx, {node.accumulator: acc})[node.accumulator]
            else:
                fn(idx)
            for sinks, box in pending_pushes:
                for value in box:
                    for ch in sinks:
                        if not try_push(ch, value):
                            yield from ch.push(value)
                        counters.channel_pushes += 1
                box.clear()
        if is_fold:
            scalars[f"{k.name}.{node.accumulator}"] = acc
            counters.global_writes += 1

    return proc()


def _fold_init(node: FoldNode):
    if node.init is not None:
        return F32(node.init)
    if node.combine_op == "+":
        return F32(0.0)
    if node.combine_op == "*":
        return F32(1.0)
    if node.combine_op == "min":
        return F32(np.inf)
    return F32(-np.inf)
