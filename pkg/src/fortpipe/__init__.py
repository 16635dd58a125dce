"""fortpipe: FORTRAN 77 subset to streaming-dataflow pipelines, with a
deterministic channel simulator and a sequential shallow-water oracle."""

__version__ = "0.1.0"
