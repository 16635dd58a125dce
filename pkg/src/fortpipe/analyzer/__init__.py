"""Dependence analysis, map/fold IR construction and rewrite rules."""

from .build import build_ir
from .classify import AccessPattern, LoopClass, classify_loop_nest, peel_nest
from .ir import (
    ArrayInfo,
    FoldNode,
    FunctionalIR,
    MapNode,
    SeqNode,
    compile_elemental,
    dump_ir,
    evaluate_ir,
    ir_to_json,
)
from .rewrite import default_fusion_cost, fission_ir, rewrite_ir

__all__ = [
    "AccessPattern",
    "LoopClass",
    "classify_loop_nest",
    "peel_nest",
    "build_ir",
    "FunctionalIR",
    "MapNode",
    "FoldNode",
    "SeqNode",
    "ArrayInfo",
    "compile_elemental",
    "evaluate_ir",
    "dump_ir",
    "ir_to_json",
    "rewrite_ir",
    "fission_ir",
    "default_fusion_cost",
]
