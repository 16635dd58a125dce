"""Closed-form prediction of simulator traffic counters.

Counts come from a static walk of each kernel's elemental body: executed
array reads and writes per element are region constants (interior vs ghost
ring when the body carries an index guard), so totals are just
region-size weighted sums.  Data-dependent branches must touch each array
equally often on both sides; anything else is rejected rather than guessed.
The result must match the measured SimReport exactly, field for field.
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

from ..analyzer.ir import FoldNode
from ..errors import CodegenError
from ..frontend.nodes import (
    ArrayRef,
    Assignment,
    BinOp,
    Call,
    Continue,
    Expr,
    IfThenElse,
    IntrinsicCall,
    Return,
    Stmt,
    UnaryOp,
)
from .report import SimReport

Counts = Dict[Tuple[str, str], int]  # (array, "r"/"w") -> per-element count


def _merge(a: Counts, b: Counts) -> Counts:
    out = dict(a)
    for key, v in b.items():
        out[key] = out.get(key, 0) + v
    return out


def _expr_counts(e: Expr) -> Counts:
    if isinstance(e, ArrayRef):
        counts: Counts = {(e.name, "r"): 1}
        for ix in e.indices:
            counts = _merge(counts, _expr_counts(ix))
        return counts
    if isinstance(e, BinOp):
        return _merge(_expr_counts(e.left), _expr_counts(e.right))
    if isinstance(e, UnaryOp):
        return _expr_counts(e.operand)
    if isinstance(e, IntrinsicCall):
        counts = {}
        for a in e.args:
            counts = _merge(counts, _expr_counts(a))
        return counts
    return {}


def _stmt_counts(st: Stmt) -> Counts:
    if isinstance(st, Assignment):
        counts = _expr_counts(st.value)
        if isinstance(st.target, ArrayRef):
            for ix in st.target.indices:
                counts = _merge(counts, _expr_counts(ix))
            counts = _merge(counts, {(st.target.name, "w"): 1})
        return counts
    if isinstance(st, IfThenElse):
        cond = _expr_counts(st.cond)
        then_c = _body_counts(st.then_body)
        else_c = _body_counts(st.else_body)
        if then_c != else_c:
            raise CodegenError(
                "access counts are data-dependent: branches of a condition "
                f"differ ({then_c} vs {else_c})"
            )
        return _merge(cond, then_c)
    if isinstance(st, (Return, Continue)):
        return {}
    raise CodegenError(f"cannot count statement {type(st).__name__}")


def _body_counts(body) -> Counts:
    counts: Counts = {}
    for st in body:
        counts = _merge(counts, _stmt_counts(st))
    return counts


def _region_counts(node) -> Tuple[Counts, Optional[Counts]]:
    """(interior counts, ghost counts or None when the body is unguarded)."""
    inner = [s for s in node.body if not isinstance(s, (Return, Continue))]
    if node.guard is not None and len(inner) == 1 and isinstance(inner[0], IfThenElse):
        guard = inner[0]
        cond = _expr_counts(guard.cond)
        if cond:
            raise CodegenError("index guard condition must not touch arrays")
        return _body_counts(guard.then_body), _body_counts(guard.else_body)
    return _body_counts(node.body), None


def _box_size(box) -> int:
    n = 1
    for lo, hi in box:
        n *= hi - lo + 1
    return n


def node_region_totals(node) -> Dict[Tuple[str, str], int]:
    """Executed accesses per array and mode for ONE launch of the kernel."""
    interior, ghost = _region_counts(node)
    total = _box_size(node.bounds)
    if ghost is None:
        return {key: v * total for key, v in interior.items()}
    n_int = _box_size(node.guard)
    n_ghost = total - n_int
    out: Dict[Tuple[str, str], int] = {}
    for key, v in interior.items():
        out[key] = out.get(key, 0) + v * n_int
    for key, v in ghost.items():
        out[key] = out.get(key, 0) + v * n_ghost
    return out


def count_accesses(graph, nt: int) -> SimReport:
    """Predict the SimReport for `nt` steps analytically (no transfers)."""
    report = SimReport()
    size = graph.stream_size
    for k in graph.kernels:
        c = report.kernel(k.name)
        if k.kind == "memread":
            fanout = len(k.out_channels)
            c.global_reads = size * nt
            c.channel_pushes = size * fanout * nt
        elif k.kind == "memwrite":
            c.channel_pops = size * nt
            c.global_writes = size * nt
        elif k.kind in ("cache", "sync"):
            c.channel_pops = size * nt
            c.channel_pushes = size * len(k.out_channels) * nt
        elif k.kind in ("compute", "fold"):
            node = graph.ir_nodes[k.node_name]
            totals = node_region_totals(node)
            _check_stream_writes(k, node, totals, size)
            global_read_arrays = {
                b.array for b in k.inputs if b.kind in ("global", "chan_sync")
            }
            pops = 0
            for b in k.inputs:
                if b.kind in ("chan_elem", "chan_sync"):
                    pops += size
                elif b.kind == "taps":
                    pops += size * len(b.channels)
            pushes = 0
            global_written = set()
            for o in k.outputs:
                writes = totals.get((o.array, "w"), 0)
                pushes += writes * len(o.channels)
                if o.to_global:
                    global_written.add(o.array)
            c.channel_pops = pops * nt
            c.channel_pushes = pushes * nt
            c.global_reads = nt * sum(
                v for (arr, mode), v in totals.items()
                if mode == "r" and arr in global_read_arrays
            )
            c.global_writes = nt * sum(
                v for (arr, mode), v in totals.items()
                if mode == "w" and arr in global_written
            )
            if isinstance(node, FoldNode):
                c.global_writes += nt  # the scalar result port
    return report


def _check_stream_writes(k, node, totals, size: int) -> None:
    for o in k.outputs:
        if o.channels and totals.get((o.array, "w"), 0) != size:
            raise CodegenError(
                f"kernel '{k.name}' must write '{o.array}' exactly once per "
                "element to stream it through a channel"
            )
