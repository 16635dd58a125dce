"""Deterministic streaming-pipeline simulator: channels, scheduler, runner."""

from .channel import EOS, Channel, EndOfStream
from .counts import count_accesses
from .report import KernelCounters, SimReport
from .runner import RunResult, SimConfig, run_pipeline
from .scheduler import Process, Scheduler

__all__ = [
    "Channel",
    "EOS",
    "EndOfStream",
    "Process",
    "Scheduler",
    "SimConfig",
    "RunResult",
    "run_pipeline",
    "SimReport",
    "KernelCounters",
    "count_accesses",
]
