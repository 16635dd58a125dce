"""Refactoring pipeline: loop normalization, explicit typing, common-block
elimination, intent inference, modularization, and the F95 emitter."""

from .emit import emit_f95
from .transforms import (
    RefactorReport,
    eliminate_common_blocks,
    infer_intents,
    make_types_explicit,
    modularize_units,
    normalize_loops,
    refactor_program,
)

__all__ = [
    "RefactorReport",
    "normalize_loops",
    "make_types_explicit",
    "eliminate_common_blocks",
    "infer_intents",
    "modularize_units",
    "refactor_program",
    "emit_f95",
]
