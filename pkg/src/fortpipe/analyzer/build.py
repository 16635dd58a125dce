"""Lift the refactored program's time-step body into a FunctionalIR DAG."""

from __future__ import annotations

from dataclasses import replace
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from ..errors import AnalyzerError, IrTypeMismatch
from ..evaluator import find_time_loop
from ..frontend.linker import fold_const, parameter_env
from ..frontend.nodes import (
    ArrayRef,
    BinOp,
    Call,
    Const,
    Continue,
    DoLoop,
    Expr,
    FType,
    IfThenElse,
    ProgramAst,
    Return,
    ScalarRef,
    SourceUnit,
    Stmt,
    map_exprs_in_stmt,
    walk_exprs,
)
from .classify import NestInfo, classify_loop_nest
from .ir import ArrayInfo, Box, FoldNode, FunctionalIR, MapNode, SeqNode


def build_ir(ast: ProgramAst) -> FunctionalIR:
    """Each map/fold nest called from the time loop becomes one node."""
    main = ast.main
    split = find_time_loop(main)
    if split is None:
        return FunctionalIR(nodes=[], edges=[], arrays={}, live_out=frozenset())
    loop_idx, time_loop = split
    main_tab = ast.symtabs[main.name]

    nodes: List[object] = []
    for st in time_loop.body:
        if isinstance(st, Continue):
            continue
        assert isinstance(st, Call)
        callee = ast.unit(st.name)
        _check_arg_types(ast, main, callee, st)
        nodes.extend(_nodes_from_callee(ast, callee, st, main_tab))

    edges: List[Tuple[str, str, str]] = []
    last_writer: Dict[str, str] = {}
    for node in nodes:
        for arr in sorted(node.reads):
            if arr in last_writer:
                edges.append((last_writer[arr], node.name, arr))
        for arr in node.writes:
            last_writer[arr] = node.name

    arrays: Dict[str, ArrayInfo] = {}
    for node in nodes:
        for arr in sorted(set(node.reads) | set(node.writes)):
            if arr not in arrays:
                sym = main_tab[arr]
                arrays[arr] = ArrayInfo(arr, sym.ftype, sym.bounds)

    # step inputs: arrays read before any node writes them, i.e. state the
    # step consumes from the previous iteration
    written: Set[str] = set()
    step_inputs: Set[str] = set()
    for node in nodes:
        for arr in node.reads:
            if arr not in written:
                step_inputs.add(arr)
        written.update(node.writes)

    # arrays alive after a step: next step's inputs plus host epilogue reads
    live: Set[str] = set(step_inputs)
    for st in main.body[loop_idx + 1:]:
        for e in walk_exprs((st,)):
            if isinstance(e, (ScalarRef, ArrayRef)) and e.name in arrays:
                live.add(e.name)

    ir = FunctionalIR(
        nodes=nodes,
        edges=edges,
        arrays=arrays,
        live_out=frozenset(live),
        step_inputs=frozenset(step_inputs),
        time_var=time_loop.var,
        nt_param=_nt_name(time_loop),
    )
    _check_edge_types(ir)
    return ir


def _check_edge_types(ir: FunctionalIR) -> None:
    for (p, c, arr) in ir.edges:
        prod, cons = ir.node(p), ir.node(c)
        pt = getattr(prod, "elem_types", {}).get(arr, ir.arrays[arr].ftype)
        ct = getattr(cons, "elem_types", {}).get(arr, ir.arrays[arr].ftype)
        if pt is not ct:
            raise IrTypeMismatch(f"{p}->{c}:{arr}", str(pt), str(ct))


def _nt_name(time_loop: DoLoop) -> Optional[str]:
    if isinstance(time_loop.hi, ScalarRef):
        return time_loop.hi.name
    return None


def _check_arg_types(ast: ProgramAst, main: SourceUnit, callee: SourceUnit, call: Call) -> None:
    main_tab = ast.symtabs[main.name]
    callee_tab = ast.symtabs[callee.name]
    for dummy, actual in zip(callee.args, call.args):
        if isinstance(actual, (ScalarRef, ArrayRef)):
            at = main_tab[actual.name].ftype
            dt = callee_tab[dummy].ftype
            if at is not dt:
                raise IrTypeMismatch(f"{main.name}->{callee.name}:{dummy}", str(at), str(dt))


def _seq_node(name: str, body, reason: str) -> SeqNode:
    return SeqNode(name=name, body=tuple(body), reason=reason, reads={}, writes=())


def _nodes_from_callee(ast: ProgramAst, callee: SourceUnit, call: Call,
                       main_tab) -> List[object]:
    from ..frontend.nodes import Assignment

    body = [s for s in callee.body if not isinstance(s, (Return, Continue))]
    # leading scalar constant assignments initialize fold accumulators
    prologue: Dict[str, object] = {}
    while body and isinstance(body[0], Assignment) \
            and isinstance(body[0].target, ScalarRef) \
            and isinstance(body[0].value, Const):
        prologue[body[0].target.name] = body[0].value.value
        body = body[1:]
    if not body or not all(isinstance(s, DoLoop) for s in body):
        return [_seq_node(callee.name, callee.body, "kernel body is not a loop nest")]

    # dummy -> actual name substitution
    rename: Dict[str, str] = {}
    for dummy, actual in zip(callee.args, call.args):
        if isinstance(actual, (ScalarRef, ArrayRef)):
            rename[dummy] = actual.name
        else:
            raise AnalyzerError(
                f"call to '{callee.name}' passes an expression where the "
                f"analyzer needs a named argument"
            )

    callee_tab = ast.symtabs[callee.name]
    env = parameter_env(callee)

    used_inits = set()
    out: List[object] = []
    for pos, loop in enumerate(body):
        name = callee.name if len(body) == 1 else f"{callee.name}_{pos + 1}"
        node = _node_from_nest(ast, callee, name, loop, rename, env, main_tab,
                               callee_tab, prologue)
        if isinstance(node, FoldNode) and node.accumulator in _renamed(prologue, rename):
            used_inits.add(node.accumulator)
        out.append(node)
    leftover = set(_renamed(prologue, rename)) - used_inits
    if leftover:
        return [_seq_node(callee.name, callee.body,
                          f"prologue initializes non-accumulator scalars {sorted(leftover)}")]
    return out


def _renamed(prologue: Dict[str, object], rename: Dict[str, str]) -> Dict[str, object]:
    return {rename.get(k, k): v for k, v in prologue.items()}


def _substitute(st: Stmt, rename: Dict[str, str]) -> Stmt:
    def fn(e: Expr) -> Expr:
        if isinstance(e, ScalarRef) and e.name in rename:
            return replace(e, name=rename[e.name])
        if isinstance(e, ArrayRef) and e.name in rename:
            return replace(e, name=rename[e.name])
        return e

    return map_exprs_in_stmt(st, fn)


def _node_from_nest(ast, callee, name, loop, rename, env, main_tab, callee_tab,
                    prologue=None):
    cls, patterns, nest = classify_loop_nest(loop)

    if cls.kind == "sequential" or _has_nonunit_step(nest, env):
        reason = cls.reason if cls.kind == "sequential" else "non-unit loop step"
        sub_body = tuple(_substitute(s, rename) for s in (loop,))
        reads = {rename.get(p.array, p.array): p.offsets for p in patterns if p.mode == "read"}
        writes = tuple(sorted({rename.get(p.array, p.array) for p in patterns if p.mode == "write"}))
        return SeqNode(name=name, body=sub_body, reason=reason, reads=reads, writes=writes)

    locals_here = {
        nm for nm, sym in callee_tab.items()
        if sym.kind == "scalar" and nm not in callee.args
    }
    clashes = locals_here & set(rename.values())
    if clashes:
        raise AnalyzerError(
            f"binding '{callee.name}' aliases local name(s) {sorted(clashes)}"
        )

    bounds = _fold_box(nest, env)
    sub_body = tuple(_substitute(s, rename) for s in nest.body)
    guard, _ = _detect_guard(sub_body, nest.ivars, env)

    reads: Dict[str, FrozenSet] = {}
    writes: List[str] = []
    for p in patterns:
        arr = rename.get(p.array, p.array)
        if p.mode == "read":
            reads[arr] = p.offsets
        else:
            writes.append(arr)
    writes = sorted(set(writes))

    elem_types: Dict[str, FType] = {}
    for arr in set(reads) | set(writes):
        elem_types[arr] = main_tab[arr].ftype

    local_types: Dict[str, FType] = {}
    host_params: Dict[str, FType] = {}
    const_params: Dict[str, object] = dict(env)
    for nm in _scalar_names(sub_body, nest.ivars):
        if nm in const_params:
            continue  # callee parameter, value already known
        if nm in locals_here:
            local_types[nm] = callee_tab[nm].ftype  # per-element temporary
        elif nm in main_tab and main_tab[nm].rank == 0:
            host_params[nm] = main_tab[nm].ftype  # bound from the host frame
        else:
            raise AnalyzerError(f"cannot place scalar '{nm}' for kernel '{name}'")

    if cls.is_fold:
        acc = rename.get(cls.accumulator, cls.accumulator)
        local_types.setdefault(acc, callee_tab[cls.accumulator].ftype
                               if cls.accumulator in callee_tab else FType.REAL)
        host_params.pop(acc, None)
        local_types.setdefault(acc, FType.REAL)
        init = None
        if prologue and cls.accumulator in prologue:
            init = prologue[cls.accumulator]
        return FoldNode(
            name=name, ivars=nest.ivars, bounds=bounds,
            combine_op=cls.combine_op, accumulator=acc,
            body=sub_body, reads=reads, elem_types=elem_types,
            local_types=local_types, host_params=host_params,
            const_params=const_params, init=init,
        )
    return MapNode(
        name=name, ivars=nest.ivars, bounds=bounds, guard=guard,
        body=sub_body, reads=reads, writes=tuple(writes),
        elem_types=elem_types, local_types=local_types,
        host_params=host_params, const_params=const_params,
    )


def _scalar_names(body, ivars) -> Set[str]:
    names: Set[str] = set()
    for e in walk_exprs(body):
        if isinstance(e, ScalarRef) and e.name not in ivars:
            names.add(e.name)
    for st in body:
        for s in _walk(st):
            from ..frontend.nodes import Assignment

            if isinstance(s, Assignment) and isinstance(s.target, ScalarRef):
                names.add(s.target.name)
    return names


def _walk(st):
    yield st
    if isinstance(st, IfThenElse):
        for s in st.then_body:
            yield from _walk(s)
        for s in st.else_body:
            yield from _walk(s)
    elif isinstance(st, DoLoop):
        for s in st.body:
            yield from _walk(s)


def _has_nonunit_step(nest: NestInfo, env) -> bool:
    for _, _, step in nest.bounds:
        if step is not None:
            try:
                if int(fold_const(step, env)) != 1:
                    return True
            except Exception:
                return True
    return False


def _fold_box(nest: NestInfo, env) -> Box:
    out = []
    for lo, hi, _ in nest.bounds:
        out.append((int(fold_const(lo, env)), int(fold_const(hi, env))))
    return tuple(out)


def _detect_guard(body, ivars, env) -> Tuple[Optional[Box], bool]:
    """Recognize `if (interior box) then ... else ...` around the body."""
    inner = [s for s in body if not isinstance(s, (Return, Continue))]
    if len(inner) != 1 or not isinstance(inner[0], IfThenElse):
        return None, False
    st = inner[0]
    box: Dict[str, List[Optional[int]]] = {v: [None, None] for v in ivars}

    def collect(cond: Expr) -> bool:
        if isinstance(cond, BinOp) and cond.op == "and":
            return collect(cond.left) and collect(cond.right)
        if isinstance(cond, BinOp) and cond.op in (">=", "<="):
            if isinstance(cond.left, ScalarRef) and cond.left.name in box:
                try:
                    val = int(fold_const(cond.right, env))
                except Exception:
                    return False
                box[cond.left.name][0 if cond.op == ">=" else 1] = val
                return True
        return False

    if not collect(st.cond):
        return None, False
    if any(b[0] is None or b[1] is None for b in box.values()):
        return None, False
    return tuple((box[v][0], box[v][1]) for v in ivars), True
