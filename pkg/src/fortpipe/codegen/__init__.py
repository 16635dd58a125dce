"""Pipeline lowering, kernel text emission and transfer scheduling."""

from .graph import (
    ChanElem,
    ChanSync,
    ChannelEdge,
    GlobalIn,
    HostOp,
    KernelNode,
    OutBinding,
    PipelineGraph,
    SmartCacheSpec,
    TapsIn,
    VARIANTS,
)
from .kernels import emit_kernels, kernel_file_name, load_kernel_text
from .lower import DEFAULT_BUFFER_BUDGET, DEFAULT_CHANNEL_CAPACITY, linearize, lower
from .transfers import (
    HostUse,
    TransferSchedule,
    attach_schedule,
    host_use_from_ast,
    minimize_transfers,
    naive_schedule,
)

__all__ = [
    "PipelineGraph",
    "KernelNode",
    "ChannelEdge",
    "SmartCacheSpec",
    "HostOp",
    "GlobalIn",
    "ChanElem",
    "ChanSync",
    "TapsIn",
    "OutBinding",
    "VARIANTS",
    "lower",
    "linearize",
    "emit_kernels",
    "kernel_file_name",
    "load_kernel_text",
    "DEFAULT_CHANNEL_CAPACITY",
    "DEFAULT_BUFFER_BUDGET",
    "HostUse",
    "TransferSchedule",
    "host_use_from_ast",
    "minimize_transfers",
    "naive_schedule",
    "attach_schedule",
]
