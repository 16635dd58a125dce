"""Fixed-form FORTRAN 77 subset frontend: parser, linker, printers."""

from .linker import call_graph_is_acyclic, fold_const, implicit_type, link_units, parameter_env
from .parser import parse_free_source, parse_source
from .printer import expr_text, print_fixed

__all__ = [
    "parse_source",
    "parse_free_source",
    "link_units",
    "print_fixed",
    "expr_text",
    "implicit_type",
    "fold_const",
    "parameter_env",
    "call_graph_is_acyclic",
]
