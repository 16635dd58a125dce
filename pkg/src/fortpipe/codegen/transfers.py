"""Host-device transfer scheduling and host-usage extraction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, List, Set, Tuple

from ..errors import CodegenError
from ..evaluator import find_time_loop
from ..frontend.nodes import ArrayRef, Assignment, ProgramAst, walk_exprs, walk_stmts
from .graph import HostOp, PipelineGraph


@dataclass(frozen=True)
class HostUse:
    """Which arrays the host program touches, split around the time loop."""

    init_writes: FrozenSet[str]
    loop_reads: FrozenSet[str]
    loop_writes: FrozenSet[str]
    final_reads: FrozenSet[str]


@dataclass(frozen=True)
class TransferSchedule:
    once_to_device: Tuple[str, ...]
    per_step_to_device: Tuple[str, ...]
    once_to_host: Tuple[str, ...]
    per_step_to_host: Tuple[str, ...]

    def to_json(self) -> dict:
        return {
            "onceToDevice": list(self.once_to_device),
            "perStepToDevice": list(self.per_step_to_device),
            "onceToHost": list(self.once_to_host),
            "perStepToHost": list(self.per_step_to_host),
        }


def host_use_from_ast(ast: ProgramAst) -> HostUse:
    main = ast.main
    split = find_time_loop(main)
    if split is None:
        raise CodegenError("program has no time loop; cannot derive host usage")
    idx, _ = split
    table = ast.symtabs[main.name]

    def arrays_read(stmts) -> Set[str]:
        out: Set[str] = set()
        for st in walk_stmts(stmts):
            if isinstance(st, Assignment):
                for e in walk_exprs(st.value):
                    if isinstance(e, ArrayRef) and table[e.name].rank:
                        out.add(e.name)
                if isinstance(st.target, ArrayRef):
                    for ix in st.target.indices:
                        for e in walk_exprs(ix):
                            if isinstance(e, ArrayRef):
                                out.add(e.name)
        return out

    def arrays_written(stmts) -> Set[str]:
        out: Set[str] = set()
        for st in walk_stmts(stmts):
            if isinstance(st, Assignment) and isinstance(st.target, ArrayRef):
                out.add(st.target.name)
        return out

    pre = main.body[:idx]
    post = main.body[idx + 1:]
    return HostUse(
        init_writes=frozenset(arrays_written(pre)),
        loop_reads=frozenset(),
        loop_writes=frozenset(),
        final_reads=frozenset(arrays_read(post)),
    )


def minimize_transfers(graph: PipelineGraph, host_use: HostUse) -> TransferSchedule:
    """Keep only the transfers some side actually observes.

    To device: only state the device reads before writing it, once when the
    host never rewrites it mid-run.  To host: only device-written arrays the
    host reads, once when it reads them only after the loop.  Scratch arrays
    regenerated on the device each step move in neither direction.
    """
    needed = set(graph.step_inputs)
    once_dev, step_dev = [], []
    for arr in sorted(needed):
        if arr in host_use.loop_writes:
            step_dev.append(arr)
        elif arr in host_use.init_writes:
            once_dev.append(arr)
        else:
            raise CodegenError(f"device consumes '{arr}' but the host never initializes it")

    written_back = _globally_written(graph)
    once_host, step_host = [], []
    for arr in sorted(host_use.final_reads | host_use.loop_reads):
        if arr not in graph.written:
            continue  # device never changes it; the host copy stays valid
        if arr not in written_back:
            raise CodegenError(
                f"host reads '{arr}' but the {graph.variant} pipeline never "
                "writes it back to global memory"
            )
        if arr in host_use.loop_reads:
            step_host.append(arr)
        else:
            once_host.append(arr)

    return TransferSchedule(
        once_to_device=tuple(once_dev),
        per_step_to_device=tuple(step_dev),
        once_to_host=tuple(once_host),
        per_step_to_host=tuple(step_host),
    )


def naive_schedule(graph: PipelineGraph, host_use: HostUse) -> TransferSchedule:
    """Transfer everything, every step, in both directions (the oracle)."""
    host_arrays = tuple(sorted(host_use.init_writes))
    return TransferSchedule(
        once_to_device=(),
        per_step_to_device=host_arrays,
        once_to_host=(),
        per_step_to_host=tuple(sorted(_globally_written(graph))),
    )


def _globally_written(graph: PipelineGraph) -> Set[str]:
    out: Set[str] = set()
    for k in graph.kernels:
        if k.kind == "memwrite":
            out.add(k.array)
        for b in k.outputs:
            if b.to_global:
                out.add(b.array)
    return out


def attach_schedule(graph: PipelineGraph, schedule: TransferSchedule) -> PipelineGraph:
    """Rebuild the host plan with the schedule's transfer ops in place."""
    launches: List[HostOp] = []
    for op in graph.host_plan:
        if op.op == "time_loop":
            launches = [o for o in op.body if o.op == "launch"]
    body: List[HostOp] = []
    if schedule.per_step_to_device:
        body.append(HostOp("to_device", arrays=schedule.per_step_to_device))
    body.extend(launches)
    if schedule.per_step_to_host:
        body.append(HostOp("to_host", arrays=schedule.per_step_to_host))

    plan: List[HostOp] = []
    if schedule.once_to_device:
        plan.append(HostOp("to_device", arrays=schedule.once_to_device))
    plan.append(HostOp("time_loop", body=tuple(body)))
    if schedule.once_to_host:
        plan.append(HostOp("to_host", arrays=schedule.once_to_host))
    graph.host_plan = plan
    return graph
