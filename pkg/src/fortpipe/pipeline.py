"""End-to-end driver: parse, refactor, analyze, lower, simulate.

Ties the stages together for the CLI and the test suite.  The host side of
a pipeline run is the actual program prelude/epilogue executed by the subset
evaluator, so initial data and final checksums come from the Fortran source
itself, not from a parallel reimplementation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .analyzer import FunctionalIR, build_ir
from .codegen import (
    HostUse,
    PipelineGraph,
    attach_schedule,
    host_use_from_ast,
    lower,
    minimize_transfers,
    naive_schedule,
)
from .errors import UsageError
from .evaluator import Cell, Evaluator, FArray
from .frontend import link_units, parse_source
from .frontend.linker import parameter_env
from .frontend.nodes import ProgramAst
from .refactor import RefactorReport, refactor_program
from .sim import RunResult, SimConfig, run_pipeline
from .swcorpus import ModelParams, render_corpus


@dataclass
class Compiled:
    original: ProgramAst
    refactored: ProgramAst
    report: RefactorReport
    ir: FunctionalIR
    host_use: HostUse


def compile_sources(sources: Sequence[Tuple[str, str]]) -> Compiled:
    """sources: (path, text) pairs -> fully analyzed program."""
    units = []
    for path, text in sources:
        units.extend(parse_source(text, path))
    original = link_units(units)
    refactored, report = refactor_program(original)
    ir = build_ir(refactored)
    host_use = host_use_from_ast(refactored)
    return Compiled(original, refactored, report, ir, host_use)


def compile_files(paths: Sequence[str]) -> Compiled:
    sources = [(str(p), Path(p).read_text()) for p in paths]
    return compile_sources(sources)


def compile_corpus(params: ModelParams) -> Compiled:
    return compile_sources(list(render_corpus(params).items()))


def build_graph(compiled: Compiled, variant: str, capacity: Optional[int] = None,
                budget: Optional[int] = None, schedule: str = "min") -> PipelineGraph:
    kwargs = {}
    if capacity is not None:
        kwargs["capacity"] = capacity
    if budget is not None:
        kwargs["buffer_budget"] = budget
    graph = lower(compiled.ir, variant, **kwargs)
    if schedule == "min":
        sched = minimize_transfers(graph, compiled.host_use)
    elif schedule == "naive":
        sched = naive_schedule(graph, compiled.host_use)
    else:
        raise UsageError(f"unknown transfer schedule '{schedule}'")
    return attach_schedule(graph, sched)


@dataclass
class HostContext:
    """Host program state around the offloaded time loop."""

    arrays: Dict[str, np.ndarray]
    values: Dict[str, object]
    nt: int
    _view: dict
    _finish: object

    def finish(self, device_arrays: Dict[str, np.ndarray]) -> Dict[str, object]:
        """Write results back into the host frame and run the epilogue."""
        for name, arr in device_arrays.items():
            slot = self._view.get(name)
            if isinstance(slot, FArray):
                slot.data[...] = arr
        return self._finish()


def host_context(compiled: Compiled, nt_override: Optional[int] = None) -> HostContext:
    """Run the host prelude; collect initial arrays, scalar values and NT."""
    ev = Evaluator(compiled.refactored)
    view, time_loop, finish = ev.split_host_run()
    arrays: Dict[str, np.ndarray] = {}
    values: Dict[str, object] = {}
    for name, slot in view.items():
        if isinstance(slot, FArray):
            arrays[name] = slot.data.copy()
        elif isinstance(slot, Cell):
            values[name] = slot.value
    main = compiled.refactored.main
    env = parameter_env(main)
    values.update(env)
    if nt_override is not None:
        nt = nt_override
    else:
        from .frontend.linker import fold_const

        nt = int(fold_const(time_loop.hi, {**env, **{
            k: v for k, v in values.items() if isinstance(v, int)
        }}))
    return HostContext(arrays=arrays, values=values, nt=nt, _view=view, _finish=finish)


def run_variant(compiled: Compiled, variant: str,
                nt_override: Optional[int] = None,
                capacity: Optional[int] = None,
                budget: Optional[int] = None,
                schedule: str = "min",
                config: Optional[SimConfig] = None) -> Tuple[RunResult, HostContext, PipelineGraph]:
    graph = build_graph(compiled, variant, capacity=capacity, budget=budget,
                        schedule=schedule)
    ctx = host_context(compiled, nt_override)
    result = run_pipeline(graph, ctx.arrays, ctx.nt, ctx.values, config)
    return result, ctx, graph


def ulp_diff(a: np.ndarray, b: np.ndarray) -> int:
    """Maximum distance in units-in-the-last-place between float32 arrays."""
    ai = a.astype(np.float32).view(np.int32).astype(np.int64)
    bi = b.astype(np.float32).view(np.int32).astype(np.int64)
    ai = np.where(ai < 0, np.int64(-(2 ** 31)) - ai, ai)
    bi = np.where(bi < 0, np.int64(-(2 ** 31)) - bi, bi)
    return int(np.abs(ai - bi).max()) if a.size else 0
