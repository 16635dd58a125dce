"""Accelerator-readiness refactorings over a linked ProgramAst.

The pipeline order matters: loop normalization and explicit typing first,
then common-block elimination (so promoted arguments exist), then intent
inference (so promoted arguments receive intents), then modularization.
Each transform is a pure AST-to-AST function; `refactor_program` runs them
all and returns the new program plus an audit report.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Set, Tuple

from ..errors import ConflictingDeclaration, RefactorError
from ..frontend.dataflow import FirstAccessAnalysis
from ..frontend.linker import (
    fold_bounds,
    has_implicit_none,
    link_units,
    parameter_env,
)
from ..frontend.nodes import (
    ArrayRef,
    Call,
    CommonDecl,
    Const,
    Continue,
    Decl,
    DimensionDecl,
    DoLoop,
    Entity,
    Expr,
    FType,
    FuncCall,
    ImplicitNone,
    Intent,
    ProgramAst,
    ScalarRef,
    SourceUnit,
    Stmt,
    TypeDecl,
    UseDecl,
    map_body,
    map_exprs_in_stmt,
    walk_exprs,
)


@dataclass
class RefactorReport:
    """Audit trail of everything the refactoring pipeline changed."""

    implicit_decls_added: List[Tuple[str, str, str]] = field(default_factory=list)
    intents_inferred: Dict[Tuple[str, str], str] = field(default_factory=dict)
    common_vars_promoted: Dict[str, Dict[str, List[str]]] = field(default_factory=dict)
    common_vars_dropped: Dict[str, List[str]] = field(default_factory=dict)
    loops_normalized: int = 0
    renames: List[Tuple[str, str, str]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "implicitDeclsAdded": {
                "count": len(self.implicit_decls_added),
                "list": [
                    {"unit": u, "name": n, "type": t} for u, n, t in self.implicit_decls_added
                ],
            },
            "intentsInferred": {
                f"{u}.{a}": intent for (u, a), intent in sorted(self.intents_inferred.items())
            },
            "commonVarsPromoted": self.common_vars_promoted,
            "commonVarsDropped": self.common_vars_dropped,
            "loopsNormalized": self.loops_normalized,
            "renames": [
                {"unit": u, "from": old, "to": new} for u, old, new in self.renames
            ],
        }


# --------------------------------------------------------------------------
# Loop normalization


def normalize_loops(ast: ProgramAst, report: Optional[RefactorReport] = None) -> ProgramAst:
    """Turn label-terminated DO loops into structured END DO form."""
    count = 0

    def fix(st: Stmt):
        nonlocal count
        if isinstance(st, DoLoop) and st.term_label is not None:
            count += 1
            return replace(st, term_label=None, label=st.label)
        if isinstance(st, Continue) and st.label is not None:
            return None  # unreferenced now that GOTO is out of subset
        if getattr(st, "label", None) is not None:
            return replace(st, label=None)
        return st

    units = tuple(u.with_(body=map_body(u.body, fix)) for u in ast.units)
    if report is not None:
        report.loops_normalized += count
    return link_units(units)


# --------------------------------------------------------------------------
# Explicit typing


def make_types_explicit(ast: ProgramAst, report: Optional[RefactorReport] = None) -> ProgramAst:
    """Add IMPLICIT NONE everywhere and declare every implicit identifier."""
    new_units = []
    for unit in ast.units:
        table = ast.symtabs[unit.name]
        _check_retyping(unit)
        implicit = sorted(
            name for name, sym in table.items()
            if sym.origin == "implicit" and sym.kind != "parameter"
        )
        if implicit and has_implicit_none(unit):
            raise ConflictingDeclaration(
                unit.name, implicit[0], "undeclared identifier under IMPLICIT NONE"
            )
        decls = list(unit.decls)
        if not has_implicit_none(unit):
            decls.insert(0, ImplicitNone())
        for ftype in (FType.INTEGER, FType.REAL, FType.LOGICAL):
            names = [n for n in implicit if table[n].ftype is ftype]
            if names:
                decls.append(TypeDecl(ftype, tuple(Entity(n) for n in names)))
                if report is not None:
                    for n in names:
                        report.implicit_decls_added.append((unit.name, n, str(ftype)))
        new_units.append(unit.with_(decls=tuple(decls)))
    return link_units(tuple(new_units))


def _check_retyping(unit: SourceUnit) -> None:
    seen: Dict[str, FType] = {}
    for d in unit.decls:
        if isinstance(d, TypeDecl):
            for ent in d.entities:
                if ent.name in seen and seen[ent.name] is not d.ftype:
                    raise ConflictingDeclaration(
                        unit.name, ent.name,
                        f"declared both {seen[ent.name]} and {d.ftype}",
                    )
                seen[ent.name] = d.ftype


# --------------------------------------------------------------------------
# Common-block elimination


@dataclass(frozen=True)
class _Slot:
    block: str
    pos: int
    name: str  # canonical name (from the first unit declaring the block)
    ftype: FType
    dims: Optional[tuple]  # bound expressions, or None for scalars


def _collect_slots(ast: ProgramAst) -> List[_Slot]:
    slots: List[_Slot] = []
    seen_blocks: Set[str] = set()
    for unit in ast.units:
        table = ast.symtabs[unit.name]
        for d in unit.decls:
            if isinstance(d, CommonDecl) and d.block not in seen_blocks:
                seen_blocks.add(d.block)
                for pos, ent in enumerate(d.entities):
                    sym = table[ent.name]
                    dims = ent.dims
                    if dims is None and sym.rank:
                        dims = _find_dims(unit, ent.name)
                    slots.append(_Slot(d.block, pos, ent.name, sym.ftype, dims))
    return slots


def _find_dims(unit: SourceUnit, name: str) -> Optional[tuple]:
    for d in unit.decls:
        if isinstance(d, (TypeDecl, DimensionDecl)):
            for ent in d.entities:
                if ent.name == name and ent.dims is not None:
                    return ent.dims
    return None


def _unit_slot_names(unit: SourceUnit) -> Dict[str, Tuple[str, int]]:
    out: Dict[str, Tuple[str, int]] = {}
    for d in unit.decls:
        if isinstance(d, CommonDecl):
            for pos, ent in enumerate(d.entities):
                out[ent.name] = (d.block, pos)
    return out


def _referenced(unit: SourceUnit) -> Set[str]:
    names: Set[str] = set()
    for e in walk_exprs(unit.body):
        if isinstance(e, (ScalarRef, ArrayRef)):
            names.add(e.name)
    return names


def eliminate_common_blocks(ast: ProgramAst, report: Optional[RefactorReport] = None) -> ProgramAst:
    """Promote common variables into arguments across the full call tree."""
    slots = _collect_slots(ast)
    if not slots:
        return ast
    slot_order = {(s.block, s.pos): i for i, s in enumerate(slots)}
    slot_by_key = {(s.block, s.pos): s for s in slots}

    # per-unit: local name <-> slot key
    local_of: Dict[str, Dict[Tuple[str, int], str]] = {}
    key_of: Dict[str, Dict[str, Tuple[str, int]]] = {}
    for u in ast.units:
        key_of[u.name] = _unit_slot_names(u)
        local_of[u.name] = {v: k for k, v in key_of[u.name].items()}

    # directly used slots per unit
    used: Dict[str, Set[Tuple[str, int]]] = {}
    for u in ast.units:
        refs = _referenced(u)
        used[u.name] = {key_of[u.name][n] for n in refs if n in key_of[u.name]}

    # transitive need, bottom-up over the acyclic call graph
    need: Dict[str, Set[Tuple[str, int]]] = {}

    def compute_need(name: str, trail: Tuple[str, ...]) -> Set[Tuple[str, int]]:
        if name in need:
            return need[name]
        if name in trail:
            raise RefactorError(f"recursive call cycle through '{name}'")
        acc = set(used[name])
        for callee in ast.callees_of(name):
            acc |= compute_need(callee, trail + (name,))
        need[name] = acc
        return acc

    for u in ast.units:
        compute_need(u.name, ())

    promoted: Dict[str, List[Tuple[str, int]]] = {
        u.name: sorted(need[u.name], key=lambda k: slot_order[k]) for u in ast.units
    }

    # choose the per-unit visible name for each promoted slot
    naming: Dict[str, Dict[Tuple[str, int], str]] = {}
    for u in ast.units:
        table = ast.symtabs[u.name]
        names: Dict[Tuple[str, int], str] = {}
        for key in promoted[u.name]:
            slot = slot_by_key[key]
            local = local_of[u.name].get(key)
            if local is not None:
                names[key] = local
            elif slot.name in table and slot.name not in key_of[u.name]:
                renamed = f"{slot.name}_cmn_{slot.block or 'blank'}"
                names[key] = renamed
                if report is not None:
                    report.renames.append((u.name, slot.name, renamed))
            else:
                names[key] = slot.name
        naming[u.name] = names

    if report is not None:
        for slot in slots:
            block_map = report.common_vars_promoted.setdefault(slot.block, {})
            for u in ast.units:
                if (slot.block, slot.pos) in need[u.name] and u.kind != "program":
                    block_map.setdefault(u.name, []).append(naming[u.name][(slot.block, slot.pos)])
            if not any((slot.block, slot.pos) in need[u.name] for u in ast.units):
                report.common_vars_dropped.setdefault(slot.block, []).append(slot.name)

    new_units = []
    for u in ast.units:
        new_units.append(_rewrite_unit_commons(
            ast, u, promoted, naming, slot_by_key,
        ))
    return link_units(tuple(new_units))


def _dims_for_unit(unit: SourceUnit, slot: _Slot, owner_env: Dict[str, object]) -> Optional[tuple]:
    """Reuse symbolic bounds if the unit has matching parameters, else literals."""
    if slot.dims is None:
        return None
    env = parameter_env(unit)
    free: Set[str] = set()
    for lo, hi in slot.dims:
        for e in ((lo,) if lo is not None else ()) + (hi,):
            for sub in walk_exprs(e):
                if isinstance(sub, ScalarRef):
                    free.add(sub.name)
    if all(n in env and env[n] == owner_env.get(n) for n in free):
        return slot.dims
    folded = fold_bounds(slot.dims, owner_env)
    return tuple(
        (Const(lo, FType.INTEGER) if lo != 1 else None, Const(hi, FType.INTEGER))
        for lo, hi in folded
    )


def _rewrite_unit_commons(ast, unit, promoted, naming, slot_by_key) -> SourceUnit:
    keys = promoted[unit.name]
    names = naming[unit.name]
    own = _unit_slot_names(unit)

    # drop common declarations; strip promoted names from bare type decls
    promoted_locals = set(names.values()) | set(own)
    decls: List[Decl] = []
    for d in unit.decls:
        if isinstance(d, CommonDecl):
            continue
        if isinstance(d, (TypeDecl, DimensionDecl)):
            kept = tuple(e for e in d.entities if e.name not in promoted_locals)
            if not kept:
                continue
            d = replace(d, entities=kept)
        decls.append(d)

    owner_envs = {u.name: parameter_env(u) for u in ast.units}
    owner_env: Dict[str, object] = {}
    for u in ast.units:
        for d in u.decls:
            if isinstance(d, CommonDecl):
                owner_env = owner_envs[u.name]
                break
        if owner_env:
            break

    seen_decl: Set[str] = set()
    for key in keys:
        slot = slot_by_key[key]
        local = names[key]
        if local in seen_decl:
            continue
        seen_decl.add(local)
        dims = _dims_for_unit(unit, slot, owner_envs.get(_block_owner(ast, slot.block), {}))
        decls.append(TypeDecl(slot.ftype, (Entity(local, dims),)))

    # Body references to promoted storage always use the unit's own common
    # name, which is exactly the name chosen above; pass-through slots are
    # invisible to the body, so no reference rewriting is ever needed.
    body = unit.body

    # append promoted names at call sites
    def fix_calls(st: Stmt):
        if isinstance(st, Call) and _is_unit(ast, st.name):
            extra = tuple(
                _name_ref(naming[unit.name][k], slot_by_key[k]) for k in promoted[st.name]
            )
            return replace(st, args=st.args + extra)
        return st

    def fix_funcalls(e: Expr) -> Expr:
        if isinstance(e, FuncCall) and _is_unit(ast, e.name):
            extra = tuple(
                _name_ref(naming[unit.name][k], slot_by_key[k]) for k in promoted[e.name]
            )
            return replace(e, args=e.args + extra)
        return e

    body = map_body(body, fix_calls)
    body = tuple(map_exprs_in_stmt(st, fix_funcalls) for st in body)

    args = unit.args
    if unit.kind != "program":
        args = args + tuple(names[k] for k in keys)
    return unit.with_(args=args, decls=tuple(decls), body=body)


def _block_owner(ast: ProgramAst, block: str) -> str:
    for u in ast.units:
        for d in u.decls:
            if isinstance(d, CommonDecl) and d.block == block:
                return u.name
    return ast.units[0].name


def _is_unit(ast: ProgramAst, name: str) -> bool:
    return any(u.name == name for u in ast.units)


def _name_ref(name: str, slot: _Slot) -> Expr:
    return ScalarRef(name)


# --------------------------------------------------------------------------
# Intent inference


def infer_intents(ast: ProgramAst, report: Optional[RefactorReport] = None) -> ProgramAst:
    """Tag every dummy argument In, Out or InOut by first-access analysis."""
    order, cyclic = _topo_order(ast)
    intents: Dict[str, Dict[str, Intent]] = {}
    for name in cyclic:
        unit = ast.unit(name)
        intents[name] = {a: Intent.INOUT for a in unit.args}
    for name in order:
        unit = ast.unit(name)
        if unit.kind == "program":
            intents[name] = {}
            continue
        intents[name] = _infer_unit_intents(unit, intents)

    new_units = []
    for u in ast.units:
        pairs = tuple((a, intents[u.name][a]) for a in u.args)
        new_units.append(u.with_(intents=pairs))
        if report is not None:
            for a, i in pairs:
                report.intents_inferred[(u.name, a)] = str(i)
    return link_units(tuple(new_units))


def _topo_order(ast: ProgramAst) -> Tuple[List[str], Set[str]]:
    """Bottom-up order (callees first); cyclic units returned separately."""
    graph = {u.name: list(ast.callees_of(u.name)) for u in ast.units}
    state: Dict[str, int] = {}
    order: List[str] = []
    cyclic: Set[str] = set()

    def visit(n: str) -> None:
        state[n] = 1
        for m in graph[n]:
            s = state.get(m, 0)
            if s == 0:
                visit(m)
            elif s == 1:
                cyclic.add(m)
        state[n] = 2
        order.append(n)

    for u in ast.units:
        if state.get(u.name, 0) == 0:
            visit(u.name)
    return [n for n in order if n not in cyclic], cyclic


def _infer_unit_intents(unit: SourceUnit, known: Dict[str, Dict[str, Intent]]) -> Dict[str, Intent]:
    fa = FirstAccessAnalysis(known).run(unit.body)
    out: Dict[str, Intent] = {}
    for arg in unit.args:
        acc = fa.state.get(arg)
        if arg not in fa.written:
            out[arg] = Intent.IN  # never written (or untouched): read-only
        elif acc is not None and acc.first == "w":
            # every path that touches it writes first (reads only after)
            out[arg] = Intent.OUT
        else:
            out[arg] = Intent.INOUT
    return out


# --------------------------------------------------------------------------
# Modularization


def modularize_units(ast: ProgramAst, report: Optional[RefactorReport] = None) -> ProgramAst:
    """Wrap non-program units in modules; callers gain USE ... ONLY lists."""
    new_units = []
    for u in ast.units:
        module = u.module_name
        if u.kind != "program" and module is None:
            module = f"module_{u.name}"
        decls = tuple(d for d in u.decls if not isinstance(d, UseDecl))
        callees = ast.callees_of(u.name)
        uses = tuple(
            UseDecl(f"module_{c}", (c,)) for c in callees
        )
        new_units.append(u.with_(module_name=module, decls=uses + decls))
    return link_units(tuple(new_units))


# --------------------------------------------------------------------------
# Full pipeline


def refactor_program(ast: ProgramAst) -> Tuple[ProgramAst, RefactorReport]:
    """Run the whole refactoring pipeline; returns (new ast, report)."""
    report = RefactorReport()
    ast = normalize_loops(ast, report)
    ast = make_types_explicit(ast, report)
    ast = eliminate_common_blocks(ast, report)
    ast = infer_intents(ast, report)
    ast = modularize_units(ast, report)
    return ast, report
