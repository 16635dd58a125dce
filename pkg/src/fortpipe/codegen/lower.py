"""Lowering from FunctionalIR to the three pipeline variants."""

from __future__ import annotations

from typing import Dict, List, Set, Tuple

from ..analyzer.ir import FoldNode, FunctionalIR, SeqNode
from ..errors import BudgetExceeded, CodegenError, NonLinearizableStencil
from .graph import (
    ChanElem,
    ChanSync,
    ChannelEdge,
    GlobalIn,
    HostOp,
    KernelNode,
    OutBinding,
    PipelineGraph,
    SmartCacheSpec,
    TapsIn,
    VARIANTS,
)

DEFAULT_CHANNEL_CAPACITY = 64
DEFAULT_BUFFER_BUDGET = 4096


def lower(ir: FunctionalIR, variant: str,
          capacity: int = DEFAULT_CHANNEL_CAPACITY,
          buffer_budget: int = DEFAULT_BUFFER_BUDGET,
          boundary: str = "clamp") -> PipelineGraph:
    """Lower the IR DAG to a pipeline graph of the requested variant."""
    if variant not in VARIANTS:
        raise CodegenError(f"unknown variant '{variant}' (one of {', '.join(VARIANTS)})")
    for n in ir.nodes:
        if isinstance(n, SeqNode):
            raise CodegenError(
                f"node '{n.name}' is sequential ({n.reason}); pipelines need "
                "a DAG of map/fold nodes"
            )
    if not ir.nodes:
        raise CodegenError("empty IR: nothing to lower")

    geom = _stream_geometry(ir)
    written = frozenset(a for n in ir.nodes for a in n.writes)

    if variant == "baseline":
        graph = _lower_baseline(ir, geom)
    elif variant == "channelized":
        graph = _lower_channelized(ir, geom, capacity)
    else:
        graph = _lower_smartcache(ir, geom, capacity, buffer_budget, boundary)

    graph.written = written
    graph.ir_nodes = {n.name: n for n in ir.nodes}
    _validate(graph)
    return graph


class _Geometry:
    def __init__(self, row_stride: int, size: int, bounds):
        self.row_stride = row_stride
        self.size = size
        self.bounds = bounds


def _stream_geometry(ir: FunctionalIR) -> _Geometry:
    bounds = None
    for n in ir.nodes:
        if bounds is None:
            bounds = n.bounds
        elif n.bounds != bounds:
            raise CodegenError(
                "all kernels must stream the same index box; "
                f"found {bounds} and {n.bounds}"
            )
    for arr, info in ir.arrays.items():
        if info.bounds != bounds:
            raise CodegenError(
                f"array '{arr}' bounds {info.bounds} differ from the "
                f"stream box {bounds}"
            )
    if len(bounds) == 1:
        return _Geometry(1, bounds[0][1] - bounds[0][0] + 1, bounds)
    if len(bounds) == 2:
        rows = bounds[0][1] - bounds[0][0] + 1
        cols = bounds[1][1] - bounds[1][0] + 1
        return _Geometry(cols, rows * cols, bounds)
    raise CodegenError(f"rank {len(bounds)} streams are not supported")


def linearize(offsets, row_stride: int, array: str) -> Tuple[int, ...]:
    """2D (dj, dk) offsets -> signed linear offsets dj*rowStride + dk.

    Column offsets must stay well inside one row stride so distinct 2D
    offsets never alias the same linear offset.
    """
    out: Set[int] = set()
    for off in offsets:
        if len(off) == 1:
            out.add(off[0])
            continue
        dj, dk = off
        if abs(dk) > max(1, (row_stride - 1) // 2):
            raise NonLinearizableStencil(array, off)
        out.add(dj * row_stride + dk)
    return tuple(sorted(out))


def tuple_layout(offsets, row_stride: int, array: str) -> Tuple[Tuple[Tuple[int, ...], int], ...]:
    """Position of each n-D offset inside the cache's emitted tuple."""
    lin = {}
    for off in offsets:
        if len(off) == 1:
            lin[off] = off[0]
        else:
            lin[off] = off[0] * row_stride + off[1]
    order = {d: i for i, d in enumerate(sorted(lin.values()))}
    return tuple(sorted((off, order[d]) for off, d in lin.items()))


def _zero(node) -> tuple:
    return tuple(0 for _ in node.ivars)


def _elem_type(ir: FunctionalIR, arr: str) -> str:
    return str(ir.arrays[arr].ftype)


def _producer_map(ir: FunctionalIR) -> Dict[Tuple[str, str], str]:
    """(consumer, array) -> producer node name, for dataflow edges."""
    return {(c, a): p for (p, c, a) in ir.edges}


# --------------------------------------------------------------------------
# Baseline


def _lower_baseline(ir: FunctionalIR, geom: _Geometry) -> PipelineGraph:
    kernels: List[KernelNode] = []
    for n in ir.nodes:
        inputs = tuple(GlobalIn(a) for a in sorted(n.reads))
        outputs = tuple(OutBinding(a, to_global=True) for a in n.writes)
        kernels.append(KernelNode(
            name=n.name, kind="fold" if isinstance(n, FoldNode) else "compute",
            node_name=n.name, inputs=inputs, outputs=outputs,
        ))
    plan_body = [HostOp("launch", kernels=(k.name,)) for k in kernels]
    return PipelineGraph(
        variant="baseline", kernels=kernels, channels=[], smart_caches=[],
        host_plan=_wrap_plan(ir, plan_body),
        arrays=dict(ir.arrays), step_inputs=ir.step_inputs, live_out=ir.live_out,
        written=frozenset(), row_stride=geom.row_stride, stream_size=geom.size,
        nt_param=ir.nt_param,
    )


def _wrap_plan(ir: FunctionalIR, body: List[HostOp]) -> List[HostOp]:
    return [HostOp("time_loop", body=tuple(body))]


# --------------------------------------------------------------------------
# Channelized


def _chain_edges(ir: FunctionalIR) -> Set[Tuple[str, str]]:
    """(producer, consumer) pairs that are adjacent in pipeline order."""
    names = [n.name for n in ir.nodes]
    pairs = set()
    for a, b in zip(names, names[1:]):
        if any(p == a and c == b for (p, c, _) in ir.edges):
            pairs.add((a, b))
    return pairs


def _lower_channelized(ir: FunctionalIR, geom: _Geometry, capacity: int) -> PipelineGraph:
    chain = _chain_edges(ir)
    producer_of = _producer_map(ir)
    channels: List[ChannelEdge] = []
    chan_in: Dict[Tuple[str, str], str] = {}  # (consumer, array) -> channel

    for (p, c, arr) in ir.edges:
        if (p, c) in chain:
            name = f"ch_{arr}_{p}_{c}"
            channels.append(ChannelEdge(name, p, c, _elem_type(ir, arr), capacity))
            chan_in[(c, arr)] = name

    kernels: List[KernelNode] = []
    for n in ir.nodes:
        zero = _zero(n)
        inputs: List[object] = []
        for arr in sorted(n.reads):
            ch = chan_in.get((n.name, arr))
            if ch is None:
                inputs.append(GlobalIn(arr))
            elif n.reads[arr] == frozenset({zero}):
                inputs.append(ChanElem(arr, ch))
            else:
                lin = linearize(n.reads[arr], geom.row_stride, arr)
                inputs.append(ChanSync(arr, ch, mpoff=max(max(lin), 0)))
        outputs: List[OutBinding] = []
        for arr in n.writes:
            outs = tuple(
                ch for (cc, aa), ch in sorted(chan_in.items())
                if aa == arr and (n.name, cc) in chain
            )
            consumers = {c for (p, c, a) in ir.edges if p == n.name and a == arr}
            via_global = bool(consumers - {cc for (cc, aa) in chan_in if aa == arr
                                           and (n.name, cc) in chain})
            needs_taps = any(
                ir.node(c).reads.get(arr, frozenset()) != frozenset({zero})
                for c in consumers
            )
            to_global = arr in ir.live_out or via_global or needs_taps
            outputs.append(OutBinding(arr, to_global=to_global, channels=outs))
        kernels.append(KernelNode(
            name=n.name, kind="fold" if isinstance(n, FoldNode) else "compute",
            node_name=n.name, inputs=tuple(inputs), outputs=tuple(outputs),
        ))

    plan_body = [HostOp("launch", kernels=tuple(k.name for k in kernels))]
    return PipelineGraph(
        variant="channelized", kernels=kernels, channels=channels, smart_caches=[],
        host_plan=_wrap_plan(ir, plan_body),
        arrays=dict(ir.arrays), step_inputs=ir.step_inputs, live_out=ir.live_out,
        written=frozenset(), row_stride=geom.row_stride, stream_size=geom.size,
        nt_param=ir.nt_param, default_capacity=capacity,
    )


# --------------------------------------------------------------------------
# Smart cache


def _lower_smartcache(ir: FunctionalIR, geom: _Geometry, capacity: int,
                      budget: int, boundary: str) -> PipelineGraph:
    producer_of = _producer_map(ir)
    channels: List[ChannelEdge] = []
    kernels: List[KernelNode] = []
    caches: List[SmartCacheSpec] = []
    readers: Dict[str, List[str]] = {}  # array -> fan-out channels
    writers: List[Tuple[str, str]] = []  # (array, channel)

    def add_channel(name: str, producer: str, consumer: str, elem: str) -> str:
        channels.append(ChannelEdge(name, producer, consumer, elem, capacity))
        return name

    # pass 1: per-consumer input chains and emission lags
    lag: Dict[str, int] = {}
    chain_info: Dict[Tuple[str, str], dict] = {}  # (consumer, array) -> chain
    for n in ir.nodes:
        zero = _zero(n)
        in_lags = []
        for arr in sorted(n.reads):
            producer = producer_of.get((n.name, arr))
            src_lag = 0 if producer is None else lag[producer]
            offs = n.reads[arr]
            lin = linearize(offs, geom.row_stride, arr)
            stenciled = offs != frozenset({zero})
            mpoff = max(max(lin), 0) if stenciled else 0
            mnoff = -min(min(lin), 0) if stenciled else 0
            chain_info[(n.name, arr)] = {
                "producer": producer, "stenciled": stenciled,
                "lin": lin, "mpoff": mpoff, "mnoff": mnoff,
                "src_lag": src_lag,
            }
            in_lags.append(src_lag + mpoff)
        lag[n.name] = max(in_lags, default=0)

    # pass 2: materialize readers, sync buffers, caches, kernels, writers.
    # Sync buffers sit on the raw element stream, upstream of any cache, so
    # every channel carries scalar elements; a cache emits one channel per
    # stencil offset.
    for n in ir.nodes:
        inputs: List[object] = []
        for arr in sorted(n.reads):
            info = chain_info[(n.name, arr)]
            producer = info["producer"]
            if producer is None:
                src_kernel = f"mem_read_{arr}"
                src_chan = f"ch_{arr}_read_{n.name}"
                readers.setdefault(arr, []).append(src_chan)
            else:
                src_kernel = producer
                src_chan = f"ch_{arr}_{producer}_{n.name}"
            elem = _elem_type(ir, arr)
            tail_chan, tail_kernel = src_chan, src_kernel

            chain_lag = info["src_lag"] + info["mpoff"]
            deficit = lag[n.name] - chain_lag
            if deficit > 0 and (producer is not None or info["stenciled"]):
                spec = SmartCacheSpec(
                    stream_id=f"sync_{arr}_{n.name}", array=arr, size=geom.size,
                    offsets=(), mpoff=deficit, mnoff=0,
                    buffer_len=deficit + 1, sync_only=True, boundary=boundary,
                )
                if spec.buffer_len > budget:
                    raise BudgetExceeded(spec.stream_id, spec.buffer_len, budget)
                caches.append(spec)
                sync_kernel = spec.stream_id
                add_channel(tail_chan, tail_kernel, sync_kernel, elem)
                sync_out = f"ch_{arr}_{sync_kernel}_{n.name}"
                kernels.append(KernelNode(
                    name=sync_kernel, kind="sync", spec=spec,
                    in_channel=tail_chan, out_channels=(sync_out,),
                ))
                tail_chan, tail_kernel = sync_out, sync_kernel

            if info["stenciled"]:
                spec = SmartCacheSpec(
                    stream_id=f"cache_{arr}_{n.name}", array=arr, size=geom.size,
                    offsets=info["lin"], mpoff=info["mpoff"], mnoff=info["mnoff"],
                    buffer_len=info["mpoff"] + info["mnoff"] + 1,
                    sync_only=False, boundary=boundary,
                )
                if spec.buffer_len > budget:
                    raise BudgetExceeded(spec.stream_id, spec.buffer_len, budget)
                caches.append(spec)
                cache_kernel = spec.stream_id
                add_channel(tail_chan, tail_kernel, cache_kernel, elem)
                tap_chans = tuple(
                    f"ch_{arr}_{cache_kernel}_{n.name}_{_off_tag(d)}"
                    for d in info["lin"]
                )
                for ch in tap_chans:
                    add_channel(ch, cache_kernel, n.name, elem)
                kernels.append(KernelNode(
                    name=cache_kernel, kind="cache", spec=spec,
                    in_channel=tail_chan, out_channels=tap_chans,
                ))
                inputs.append(TapsIn(
                    arr, tap_chans, info["lin"],
                    layout=tuple_layout(n.reads[arr], geom.row_stride, arr),
                ))
            else:
                add_channel(tail_chan, tail_kernel, n.name, elem)
                inputs.append(ChanElem(arr, tail_chan))

        outputs: List[OutBinding] = []
        for arr in n.writes:
            outs: List[str] = []
            for (p, c, a) in ir.edges:
                if p == n.name and a == arr:
                    outs.append(f"ch_{arr}_{n.name}_{c}")
            if arr in ir.live_out:
                wchan = f"ch_{arr}_{n.name}_write"
                writers.append((arr, wchan))
                outs.append(wchan)
            outputs.append(OutBinding(arr, to_global=False, channels=tuple(outs)))
        kernels.append(KernelNode(
            name=n.name, kind="fold" if isinstance(n, FoldNode) else "compute",
            node_name=n.name, inputs=tuple(inputs), outputs=tuple(outputs),
        ))

    reader_kernels = []
    for arr in sorted(readers):
        reader_kernels.append(KernelNode(
            name=f"mem_read_{arr}", kind="memread", array=arr,
            out_channels=tuple(readers[arr]),
        ))
    writer_kernels = []
    for arr, wchan in sorted(writers):
        name = f"mem_write_{arr}"
        add_channel(wchan, _writer_src(ir, arr), name, _elem_type(ir, arr))
        writer_kernels.append(KernelNode(
            name=name, kind="memwrite", array=arr, in_channel=wchan,
        ))

    all_kernels = reader_kernels + kernels + writer_kernels
    plan_body = [HostOp("launch", kernels=tuple(k.name for k in all_kernels))]
    return PipelineGraph(
        variant="smartcache", kernels=all_kernels, channels=channels,
        smart_caches=caches, host_plan=_wrap_plan(ir, plan_body),
        arrays=dict(ir.arrays), step_inputs=ir.step_inputs, live_out=ir.live_out,
        written=frozenset(), row_stride=geom.row_stride, stream_size=geom.size,
        nt_param=ir.nt_param, default_capacity=capacity,
    )


def _off_tag(d: int) -> str:
    return f"m{-d}" if d < 0 else f"p{d}"


def _writer_src(ir: FunctionalIR, arr: str) -> str:
    last = None
    for n in ir.nodes:
        if arr in n.writes:
            last = n.name
    return last


def _validate(graph: PipelineGraph) -> None:
    names = {k.name for k in graph.kernels}
    chans = {c.name for c in graph.channels}
    for c in graph.channels:
        if c.producer not in names or c.consumer not in names:
            raise CodegenError(f"channel '{c.name}' has a dangling endpoint")
        if c.capacity < 1:
            raise CodegenError(f"channel '{c.name}' capacity must be >= 1")
    referenced: Set[str] = set()
    for k in graph.kernels:
        for b in k.inputs:
            for ch in getattr(b, "channels", ()) or (
                (b.channel,) if hasattr(b, "channel") else ()
            ):
                if ch not in chans:
                    raise CodegenError(f"kernel '{k.name}' reads missing channel '{ch}'")
                referenced.add(ch)
        for o in k.outputs:
            for ch in o.channels:
                if ch not in chans:
                    raise CodegenError(f"kernel '{k.name}' writes missing channel '{ch}'")
                referenced.add(ch)
        if k.in_channel is not None:
            if k.in_channel not in chans:
                raise CodegenError(f"kernel '{k.name}' pops missing channel '{k.in_channel}'")
            referenced.add(k.in_channel)
        for ch in k.out_channels:
            if ch not in chans:
                raise CodegenError(f"kernel '{k.name}' pushes missing channel '{ch}'")
            referenced.add(ch)
    dangling = chans - referenced
    if dangling and graph.variant != "baseline":
        raise CodegenError(f"dangling channels: {sorted(dangling)}")
    if graph.variant == "smartcache":
        for k in graph.kernels:
            if k.kind in ("compute", "fold") and any(
                isinstance(b, (GlobalIn, ChanSync)) for b in k.inputs
            ):
                raise CodegenError(f"interior kernel '{k.name}' touches global memory")
