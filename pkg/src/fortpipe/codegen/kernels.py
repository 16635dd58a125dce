"""Kernel source emission in a C-subset dialect, plus a structural loader.

The emitted text is documentation of what each pipeline kernel does and a
structural artifact for tests: the loader re-parses parameter lists, channel
intrinsics and global-array references.  Baseline kernels index global
arrays only; channelized and smart-cache kernels use blocking
read_channel/write_channel intrinsics wherever a stream replaces memory.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Tuple

from ..analyzer.ir import FoldNode
from ..errors import CodegenError
from ..frontend.nodes import (
    ArrayRef,
    Assignment,
    BinOp,
    Const,
    Continue,
    FType,
    IfThenElse,
    IntrinsicCall,
    Return,
    ScalarRef,
    Stmt,
    UnaryOp,
)
from .graph import ChanElem, ChanSync, GlobalIn, PipelineGraph, TapsIn

_CTYPES = {FType.REAL: "float", FType.INTEGER: "int", FType.LOGICAL: "bool"}

_C_OPS = {
    "==": "==", "/=": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">=",
    "and": "&&", "or": "||", "+": "+", "-": "-", "*": "*", "/": "/",
}

_PREC = {
    "||": 1, "&&": 2,
    "==": 4, "!=": 4, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6,
}


class _BodyWriter:
    def __init__(self, kernel, node, graph: PipelineGraph):
        self.k = kernel
        self.node = node
        self.graph = graph
        self.read_mode: Dict[str, object] = {b.array: b for b in kernel.inputs}
        self.out_of: Dict[str, object] = {o.array: o for o in kernel.outputs}
        self.lines: List[str] = []

    def put(self, indent: int, text: str) -> None:
        self.lines.append("  " * indent + text)

    # -- expressions --------------------------------------------------------

    def expr(self, e, prec: int = 0) -> str:
        if isinstance(e, Const):
            if e.ftype is FType.LOGICAL:
                return "true" if e.value else "false"
            if e.ftype is FType.INTEGER:
                return str(int(e.value))
            return f"{float(e.value)!r}f"
        if isinstance(e, ScalarRef):
            return e.name
        if isinstance(e, ArrayRef):
            return self.array_read(e)
        if isinstance(e, UnaryOp):
            inner = self.expr(e.operand, 7)
            return f"!{inner}" if e.op == "not" else f"-{inner}"
        if isinstance(e, BinOp):
            op = _C_OPS[e.op] if e.op != "**" else None
            if op is None:
                return f"powf({self.expr(e.left)}, {self.expr(e.right)})"
            p = _PREC[op]
            left = self.expr(e.left, p)
            right = self.expr(e.right, p + 1)
            text = f"{left} {op} {right}"
            return f"({text})" if p < prec else text
        if isinstance(e, IntrinsicCall):
            args = ", ".join(self.expr(a) for a in e.args)
            fn = {"abs": "fabsf", "sqrt": "sqrtf", "min": "fminf",
                  "max": "fmaxf", "mod": "fmodf"}[e.name]
            return f"{fn}({args})"
        raise CodegenError(f"cannot emit expression {type(e).__name__}")

    def _index(self, ref: ArrayRef) -> str:
        parts = []
        for ix, ivar in zip(ref.indices, self.node.ivars):
            parts.append(self.expr(ix))
        if len(parts) == 1:
            return parts[0]
        return f"IDX({parts[0]}, {parts[1]})"

    def array_read(self, ref: ArrayRef) -> str:
        mode = self.read_mode.get(ref.name)
        if mode is None or isinstance(mode, (GlobalIn, ChanSync)):
            return f"{ref.name}[{self._index(ref)}]"
        if isinstance(mode, ChanElem):
            return f"{ref.name}_in"
        if isinstance(mode, TapsIn):
            layout = dict(mode.layout)
            off = tuple(_const_offset(ix, ivar) for ix, ivar in
                        zip(ref.indices, self.node.ivars))
            return f"t_{ref.name}_{layout[off]}"
        raise CodegenError(f"unknown binding for '{ref.name}'")

    # -- statements ----------------------------------------------------------

    def stmt(self, st: Stmt, indent: int) -> None:
        if isinstance(st, Assignment):
            if isinstance(st.target, ArrayRef):
                self.put(indent, f"out_{st.target.name} = {self.expr(st.value)};")
            else:
                self.put(indent, f"{st.target.name} = {self.expr(st.value)};")
        elif isinstance(st, IfThenElse):
            self.put(indent, f"if ({self.expr(st.cond)}) {{")
            for s in st.then_body:
                self.stmt(s, indent + 1)
            if st.else_body:
                self.put(indent, "} else {")
                for s in st.else_body:
                    self.stmt(s, indent + 1)
            self.put(indent, "}")
        elif isinstance(st, (Return, Continue)):
            pass
        else:
            raise CodegenError(f"cannot emit statement {type(st).__name__}")


def _const_offset(ix, ivar: str) -> int:
    if isinstance(ix, ScalarRef) and ix.name == ivar:
        return 0
    if isinstance(ix, BinOp) and isinstance(ix.right, Const):
        return ix.right.value if ix.op == "+" else -ix.right.value
    if isinstance(ix, BinOp) and isinstance(ix.left, Const) and ix.op == "+":
        return ix.left.value
    raise CodegenError("non-affine index in kernel body")


def _emit_compute(kernel, graph: PipelineGraph) -> str:
    node = graph.ir_nodes[kernel.node_name]
    w = _BodyWriter(kernel, node, graph)
    is_fold = isinstance(node, FoldNode)

    params: List[str] = []
    for b in kernel.inputs:
        if isinstance(b, (GlobalIn, ChanSync)):
            ctype = _CTYPES[node.elem_types[b.array]]
            params.append(f"__global const {ctype}* {b.array}")
    for o in kernel.outputs:
        if o.to_global:
            ctype = _CTYPES[node.elem_types[o.array]]
            params.append(f"__global {ctype}* {o.array}")
    for name in sorted(node.host_params):
        params.append(f"const {_CTYPES[node.host_params[name]]} {name}")

    lines: List[str] = []
    lines.append(f"// kernel {kernel.name} [{graph.variant}]")
    lines.append(f"__kernel void {kernel.name}({', '.join(params)})")
    lines.append("{")
    cols = graph.row_stride
    size = graph.stream_size
    lines.append(f"  const int COLS = {cols};")
    lines.append(f"  const int SIZE = {size};")
    for name, value in sorted(node.const_params.items()):
        ctype = "int" if isinstance(value, (int, bool)) else "float"
        suffix = "" if ctype == "int" else "f"
        lines.append(f"  const {ctype} {name} = {value}{suffix};")
    if is_fold:
        lines.append(f"  float {node.accumulator} = {_fold_seed(node)};")
    lines.append("  for (int p = 0; p < SIZE; ++p) {")
    lo0 = node.bounds[0][0]
    if len(node.bounds) == 2:
        lo1 = node.bounds[1][0]
        lines.append(f"    const int {node.ivars[0]} = {lo0} + p / COLS;")
        lines.append(f"    const int {node.ivars[1]} = {lo1} + p % COLS;")
    else:
        lines.append(f"    const int {node.ivars[0]} = {lo0} + p;")

    for b in kernel.inputs:
        if isinstance(b, ChanSync):
            lines.append(f"    // pace on the {b.array} stream, then window from memory")
            lines.append(f"    sync_ahead({b.channel}, p, {b.mpoff});")
        elif isinstance(b, ChanElem):
            ctype = _CTYPES[node.elem_types[b.array]]
            lines.append(f"    const {ctype} {b.array}_in = read_channel({b.channel});")
        elif isinstance(b, TapsIn):
            ctype = _CTYPES[node.elem_types[b.array]]
            for pos, ch in enumerate(b.channels):
                lines.append(f"    const {ctype} t_{b.array}_{pos} = read_channel({ch});")

    for name, ftype in sorted(node.local_types.items()):
        lines.append(f"    {_CTYPES[ftype]} {name};")
    for o in kernel.outputs:
        lines.append(f"    {_CTYPES[node.elem_types[o.array]]} out_{o.array};")

    for st in node.body:
        w.stmt(st, 2)
    lines.extend(w.lines)

    for o in kernel.outputs:
        if o.to_global:
            if len(node.bounds) == 2:
                lines.append(f"    {o.array}[p] = out_{o.array};")
            else:
                lines.append(f"    {o.array}[p] = out_{o.array};")
        for ch in o.channels:
            lines.append(f"    write_channel({ch}, out_{o.array});")
    lines.append("  }")
    if is_fold:
        lines.append(f"  result[0] = {node.accumulator};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _fold_seed(node: FoldNode) -> str:
    return {"+": "0.0f", "*": "1.0f", "min": "INFINITY", "max": "-INFINITY"}[node.combine_op]


def _emit_cache(kernel, graph: PipelineGraph) -> str:
    spec = kernel.spec
    lines = [
        f"// kernel {kernel.name} [{graph.variant}] "
        + ("sync buffer" if spec.sync_only else "stencil window buffer"),
        f"__kernel void {kernel.name}()",
        "{",
        f"  const int SIZE = {spec.size};",
        f"  const int MPOFF = {spec.mpoff};",
        f"  const int BUFLEN = {spec.buffer_len};",
        "  float win[BUFLEN];",
        "  int consumed = 0;",
        "  for (int p = 0; p < SIZE; ++p) {",
        "    while (consumed <= imin(p + MPOFF, SIZE - 1)) {",
        f"      win[consumed % BUFLEN] = read_channel({kernel.in_channel});",
        "      ++consumed;",
        "    }",
    ]
    if spec.sync_only:
        for ch in kernel.out_channels:
            lines.append(f"    write_channel({ch}, win[p % BUFLEN]);")
    else:
        for d, ch in zip(spec.offsets, kernel.out_channels):
            if spec.boundary == "clamp":
                pos = f"clampi(p + ({d}), 0, SIZE - 1) % BUFLEN"
            else:
                pos = f"(p + ({d})) % BUFLEN"
            lines.append(f"    write_channel({ch}, win[{pos}]);")
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _emit_mem(kernel, graph: PipelineGraph) -> str:
    arr = kernel.array
    ctype = _CTYPES[graph.arrays[arr].ftype]
    if kernel.kind == "memread":
        lines = [
            f"// kernel {kernel.name} [{graph.variant}] stream {arr} from global memory",
            f"__kernel void {kernel.name}(__global const {ctype}* {arr})",
            "{",
            f"  for (int p = 0; p < {graph.stream_size}; ++p) {{",
        ]
        for ch in kernel.out_channels:
            lines.append(f"    write_channel({ch}, {arr}[p]);")
    else:
        lines = [
            f"// kernel {kernel.name} [{graph.variant}] drain {arr} to global memory",
            f"__kernel void {kernel.name}(__global {ctype}* {arr})",
            "{",
            f"  for (int p = 0; p < {graph.stream_size}; ++p) {{",
            f"    {arr}[p] = read_channel({kernel.in_channel});",
        ]
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit_kernels(graph: PipelineGraph) -> Dict[str, str]:
    """Kernel name -> deterministic source text; files are <name>_<variant>.clk."""
    out: Dict[str, str] = {}
    for k in graph.kernels:
        if k.kind in ("compute", "fold"):
            out[k.name] = _emit_compute(k, graph)
        elif k.kind in ("cache", "sync"):
            out[k.name] = _emit_cache(k, graph)
        else:
            out[k.name] = _emit_mem(k, graph)
    return out


def kernel_file_name(kernel: str, variant: str) -> str:
    return f"{kernel}_{variant}.clk"


@dataclass(frozen=True)
class KernelText:
    """Structural view of one emitted kernel, for round-trip checks."""

    name: str
    params: Tuple[str, ...]
    channel_reads: int
    channel_writes: int
    global_arrays: Tuple[str, ...]


_SIG_RE = re.compile(r"__kernel\s+void\s+(\w+)\s*\(([^)]*)\)", re.S)
_GLOBAL_PARAM_RE = re.compile(r"__global\s+(?:const\s+)?\w+\s*\*\s*(\w+)")


def load_kernel_text(text: str) -> KernelText:
    m = _SIG_RE.search(text)
    if not m:
        raise CodegenError("no __kernel signature found")
    name = m.group(1)
    raw_params = [p.strip() for p in m.group(2).split(",") if p.strip()]
    globals_found = set(_GLOBAL_PARAM_RE.findall(text))
    body = text[m.end():]
    refs = {mm.group(1) for mm in re.finditer(r"\b(\w+)\s*\[", body)}
    global_refs = sorted(globals_found & refs)
    return KernelText(
        name=name,
        params=tuple(raw_params),
        channel_reads=len(re.findall(r"\bread_channel\s*\(", body)),
        channel_writes=len(re.findall(r"\bwrite_channel\s*\(", body)),
        global_arrays=tuple(global_refs),
    )
