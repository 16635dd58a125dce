"""The 2D shallow-water corpus: configs, Fortran sources, sequential oracle."""

from .config import ModelParams, load_params, params_from_dict, save_params
from .corpus import parse_corpus, render_corpus, write_corpus
from .fields import dump_state, read_field, write_field
from .model import (
    FIELD_NAMES,
    OUTPUT_FIELDS,
    assert_finite,
    dynamics_step,
    host_checksums,
    initial_state,
    reference_step,
    run_reference,
    shapiro_step,
    update_step,
)

__all__ = [
    "ModelParams", "load_params", "params_from_dict", "save_params",
    "parse_corpus", "render_corpus", "write_corpus",
    "dump_state", "read_field", "write_field",
    "FIELD_NAMES", "OUTPUT_FIELDS",
    "initial_state", "dynamics_step", "shapiro_step", "update_step",
    "reference_step", "run_reference", "host_checksums", "assert_finite",
]
