"""Map-fusion and map-fission rewrites over the FunctionalIR.

Fusion inlines the producer's elemental body into the consumer, once per
consumer tap offset; stencil offsets compose as the offset-sum set.  The
default cost rule fuses only when at most one of the two nodes carries a
non-zero stencil, which keeps the composed reach (and the eventual on-chip
window) small.  Fission undoes a recorded fusion.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Callable, Dict, FrozenSet, List, Optional, Set, Tuple

from ..errors import AnalyzerError
from ..frontend.nodes import (
    ArrayRef,
    Assignment,
    BinOp,
    Const,
    Expr,
    FType,
    IfThenElse,
    ScalarRef,
    Stmt,
    map_exprs_in_stmt,
)
from .ir import FunctionalIR, MapNode, Offset

Cost = Callable[[MapNode, MapNode], bool]


def default_fusion_cost(producer: MapNode, consumer: MapNode) -> bool:
    """Fuse only when at most one party reads through a non-zero stencil."""
    return not (producer.stenciled() and consumer.stenciled())


def rewrite_ir(ir: FunctionalIR, rules: Tuple[str, ...] = ("fuse",),
               cost: Cost = default_fusion_cost) -> FunctionalIR:
    """Apply the requested rules to fixpoint (bounded by node count squared)."""
    if "fuse" not in rules:
        return ir
    budget = max(1, len(ir.nodes)) ** 2
    changed = True
    while changed and budget > 0:
        budget -= 1
        changed = False
        for consumer in list(ir.nodes):
            pair = _fusable_producer(ir, consumer, cost)
            if pair is not None:
                ir = _fuse(ir, pair, consumer)
                changed = True
                break
    return ir


def _fusable_producer(ir: FunctionalIR, consumer, cost: Cost) -> Optional[MapNode]:
    if not isinstance(consumer, MapNode):
        return None
    producers = ir.producers_of(consumer.name)
    if len(producers) != 1:
        return None
    producer = ir.node(producers[0])
    if not isinstance(producer, MapNode):
        return None
    if set(ir.consumers_of(producer.name)) != {consumer.name}:
        return None
    if producer.bounds != consumer.bounds or producer.ivars != consumer.ivars:
        return None
    if producer.guard != consumer.guard:
        return None
    if not cost(producer, consumer):
        return None
    return producer


def _ivar_plus(ivar: str, total: int) -> Expr:
    if total == 0:
        return ScalarRef(ivar)
    op = "+" if total > 0 else "-"
    return BinOp(op, ScalarRef(ivar), Const(abs(total), FType.INTEGER))


def _shift_expr(e: Expr, ivars: Tuple[str, ...], delta: Offset) -> Expr:
    """Rewrite an expression to be evaluated at index + delta."""
    from ..frontend.nodes import FuncCall, IntrinsicCall, UnaryOp

    if isinstance(e, ArrayRef):
        new_ix = tuple(
            _ivar_plus(ivar, _offset_const(ix, ivar) + d)
            for ix, ivar, d in zip(e.indices, ivars, delta)
        )
        return replace(e, indices=new_ix)
    if isinstance(e, ScalarRef):
        if e.name in ivars:
            return _ivar_plus(e.name, delta[ivars.index(e.name)])
        return e
    if isinstance(e, BinOp):
        return replace(e, left=_shift_expr(e.left, ivars, delta),
                       right=_shift_expr(e.right, ivars, delta))
    if isinstance(e, UnaryOp):
        return replace(e, operand=_shift_expr(e.operand, ivars, delta))
    if isinstance(e, (IntrinsicCall, FuncCall)):
        return replace(e, args=tuple(_shift_expr(a, ivars, delta) for a in e.args))
    return e


def _offset_const(ix: Expr, ivar: str) -> int:
    if isinstance(ix, ScalarRef) and ix.name == ivar:
        return 0
    if isinstance(ix, BinOp) and ix.op in ("+", "-"):
        if isinstance(ix.left, ScalarRef) and ix.left.name == ivar and isinstance(ix.right, Const):
            return ix.right.value if ix.op == "+" else -ix.right.value
        if ix.op == "+" and isinstance(ix.right, ScalarRef) and ix.right.name == ivar \
                and isinstance(ix.left, Const):
            return ix.left.value
    raise AnalyzerError("non-affine index in elemental body")


def _shift_stmt(st: Stmt, ivars: Tuple[str, ...], delta: Offset) -> Stmt:
    if isinstance(st, Assignment):
        return replace(
            st,
            target=_shift_expr(st.target, ivars, delta),
            value=_shift_expr(st.value, ivars, delta),
        )
    if isinstance(st, IfThenElse):
        return replace(
            st,
            cond=_shift_expr(st.cond, ivars, delta),
            then_body=tuple(_shift_stmt(s, ivars, delta) for s in st.then_body),
            else_body=tuple(_shift_stmt(s, ivars, delta) for s in st.else_body),
        )
    return st


def _rename_stmt(st: Stmt, table: Dict[str, str]) -> Stmt:
    def fn(e: Expr) -> Expr:
        if isinstance(e, ScalarRef) and e.name in table:
            return replace(e, name=table[e.name])
        return e

    return map_exprs_in_stmt(st, fn)


def _tap_tag(delta: Offset) -> str:
    return "_".join(("m" + str(-d)) if d < 0 else ("p" + str(d)) for d in delta)


def _fuse(ir: FunctionalIR, producer: MapNode, consumer: MapNode) -> FunctionalIR:
    edge_arrays = sorted({a for (p, c, a) in ir.edges
                          if p == producer.name and c == consumer.name})
    ivars = producer.ivars
    zero: Offset = tuple(0 for _ in ivars)

    taps: Set[Offset] = set()
    for arr in edge_arrays:
        taps.update(consumer.reads.get(arr, frozenset()))
    taps = sorted(taps) or [zero]

    body: List[Stmt] = []
    temp_of: Dict[Tuple[str, Offset], str] = {}
    keep_stores = set(producer.writes) & set(ir.live_out)
    for delta in taps:
        tag = _tap_tag(delta)
        rename = {loc: f"{loc}__{producer.name}_{tag}" for loc in producer.local_types}
        for arr in producer.writes:
            temp_of[(arr, delta)] = f"{arr}__{tag}"
        for st in producer.body:
            st2 = _shift_stmt(st, ivars, delta) if delta != zero else st
            st2 = _rename_stmt(st2, rename)
            body.extend(_writes_to_temps(
                st2, set(producer.writes), delta, temp_of,
                keep=(keep_stores if delta == zero else set()),
            ))

    consumed = set(edge_arrays)
    for st in consumer.body:
        body.append(_edge_reads_to_temps(st, consumed, temp_of, ivars))

    new_reads: Dict[str, FrozenSet[Offset]] = {}
    for arr, offs in consumer.reads.items():
        if arr in consumed:
            continue
        new_reads[arr] = offs
    for delta in taps:
        for arr, offs in producer.reads.items():
            shifted = frozenset(tuple(o + d for o, d in zip(off, delta)) for off in offs)
            new_reads[arr] = new_reads.get(arr, frozenset()) | shifted

    local_types = dict(consumer.local_types)
    for delta in taps:
        tag = _tap_tag(delta)
        for loc, t in producer.local_types.items():
            local_types[f"{loc}__{producer.name}_{tag}"] = t
        for arr in producer.writes:
            local_types[f"{arr}__{tag}"] = producer.elem_types[arr]

    elem_types = dict(consumer.elem_types)
    elem_types.update(producer.elem_types)
    host_params = dict(consumer.host_params)
    host_params.update(producer.host_params)
    const_params = dict(consumer.const_params)
    const_params.update(producer.const_params)

    fused = MapNode(
        name=f"{producer.name}_{consumer.name}",
        ivars=ivars,
        bounds=producer.bounds,
        guard=producer.guard,
        body=tuple(body),
        reads=new_reads,
        writes=tuple(sorted(keep_stores | set(consumer.writes))),
        elem_types=elem_types,
        local_types=local_types,
        host_params=host_params,
        const_params=const_params,
        fused_from=(producer, consumer),
    )

    nodes = []
    for n in ir.nodes:
        if n.name == producer.name:
            continue
        nodes.append(fused if n.name == consumer.name else n)

    edges = []
    for (p, c, a) in ir.edges:
        if p == producer.name and c == consumer.name:
            continue
        p2 = fused.name if p in (producer.name, consumer.name) else p
        c2 = fused.name if c in (producer.name, consumer.name) else c
        edges.append((p2, c2, a))

    return FunctionalIR(
        nodes=nodes, edges=edges, arrays=ir.arrays, live_out=ir.live_out,
        step_inputs=ir.step_inputs, time_var=ir.time_var, nt_param=ir.nt_param,
    )


def fission_ir(ir: FunctionalIR, node_name: str) -> FunctionalIR:
    """Undo a recorded fusion, restoring the two original nodes."""
    node = ir.node(node_name)
    if not isinstance(node, MapNode) or node.fused_from is None:
        raise AnalyzerError(f"'{node_name}' carries no fusion record to split")
    producer, consumer = node.fused_from
    nodes: List[object] = []
    for n in ir.nodes:
        if n.name == node_name:
            nodes.append(producer)
            nodes.append(consumer)
        else:
            nodes.append(n)
    edges = []
    for (p, c, a) in ir.edges:
        p2 = _unfused_end(p, node_name, producer, consumer, a, True)
        c2 = _unfused_end(c, node_name, producer, consumer, a, False)
        edges.append((p2, c2, a))
    for arr in sorted(set(producer.writes) & set(consumer.reads)):
        edges.append((producer.name, consumer.name, arr))
    return FunctionalIR(nodes=nodes, edges=edges, arrays=ir.arrays,
                        live_out=ir.live_out, step_inputs=ir.step_inputs,
                        time_var=ir.time_var, nt_param=ir.nt_param)


def _unfused_end(name: str, fused: str, producer: MapNode, consumer: MapNode,
                 array: str, is_producer_end: bool) -> str:
    if name != fused:
        return name
    if is_producer_end:
        return consumer.name if array in consumer.writes else producer.name
    return producer.name if array in producer.reads else consumer.name


def _writes_to_temps(st: Stmt, written: Set[str], delta: Offset,
                     temp_of: Dict[Tuple[str, Offset], str],
                     keep: Set[str]) -> Tuple[Stmt, ...]:
    """Replace `arr(idx) = v` with a temp assignment; arrays in `keep` also
    get the real store (they must still materialize for later steps)."""
    if isinstance(st, Assignment) and isinstance(st.target, ArrayRef) \
            and st.target.name in written:
        temp = temp_of[(st.target.name, delta)]
        assign = Assignment(ScalarRef(temp), st.value)
        if st.target.name in keep:
            return (assign, Assignment(st.target, ScalarRef(temp)))
        return (assign,)
    if isinstance(st, IfThenElse):
        then_body = tuple(
            s2 for s in st.then_body for s2 in _writes_to_temps(s, written, delta, temp_of, keep)
        )
        else_body = tuple(
            s2 for s in st.else_body for s2 in _writes_to_temps(s, written, delta, temp_of, keep)
        )
        return (replace(st, then_body=then_body, else_body=else_body),)
    return (st,)


def _edge_reads_to_temps(st: Stmt, arrays: Set[str],
                         temp_of: Dict[Tuple[str, Offset], str],
                         ivars: Tuple[str, ...]) -> Stmt:
    def fn(e: Expr) -> Expr:
        if isinstance(e, ArrayRef) and e.name in arrays:
            delta = tuple(_offset_const(ix, ivar) for ix, ivar in zip(e.indices, ivars))
            return ScalarRef(temp_of[(e.name, delta)])
        return e

    return map_exprs_in_stmt(st, fn)
