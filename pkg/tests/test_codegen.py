"""Pipeline lowering: variant structure, cache geometry, transfers, kernels."""

import numpy as np
import pytest

from fortpipe.codegen import (
    ChanElem,
    ChanSync,
    GlobalIn,
    attach_schedule,
    linearize,
    lower,
    minimize_transfers,
)
from fortpipe.codegen.kernels import emit_kernels, kernel_file_name, load_kernel_text
from fortpipe.errors import BudgetExceeded, CodegenError, NonLinearizableStencil
from fortpipe.pipeline import build_graph

from .oracles import linear_offsets_5pt


class TestLowerBaseline:
    def test_structure(self, compiled8):
        graph = lower(compiled8.ir, "baseline")
        assert graph.variant == "baseline"
        assert len(graph.kernels) == 3
        assert graph.channels == []
        for k in graph.kernels:
            assert all(isinstance(b, GlobalIn) for b in k.inputs)
            assert all(o.to_global and not o.channels for o in k.outputs)

    def test_host_plan_sequential_launches(self, compiled8):
        graph = build_graph(compiled8, "baseline")
        ops = [op.op for op in graph.host_plan]
        assert ops == ["to_device", "time_loop", "to_host"]
        loop = graph.host_plan[1]
        assert [op.op for op in loop.body] == ["launch"] * 3
        assert [op.kernels for op in loop.body] == [("dyn",), ("shapiro",), ("update",)]


class TestLowerChannelized:
    def test_structure(self, compiled8):
        graph = lower(compiled8.ir, "channelized")
        assert len(graph.kernels) == 3
        pairs = {(c.producer, c.consumer) for c in graph.channels}
        assert pairs == {("dyn", "shapiro"), ("shapiro", "update")}
        loop = graph.host_plan[0]
        (launch,) = [op for op in loop.body if op.op == "launch"]
        assert set(launch.kernels) == {"dyn", "shapiro", "update"}

    def test_stencil_arrays_keep_memory_ports(self, compiled8):
        graph = lower(compiled8.ir, "channelized")
        shapiro = graph.kernel("shapiro")
        etan_in = next(b for b in shapiro.inputs if b.array == "etan")
        assert isinstance(etan_in, ChanSync)
        assert etan_in.mpoff == compiled8.ir.arrays["etan"].bounds[1][1] + 1  # row stride
        assert ("shapiro", "etan", "read") in [
            (k, a, d) for (k, a, d) in graph.mem_ports
        ]
        update = graph.kernel("update")
        eta_in = next(b for b in update.inputs if b.array == "eta")
        assert isinstance(eta_in, ChanElem)  # pointwise: channel only

    def test_nonadjacent_arrays_go_through_memory(self, compiled8):
        graph = lower(compiled8.ir, "channelized")
        update = graph.kernel("update")
        un_in = next(b for b in update.inputs if b.array == "un")
        assert isinstance(un_in, GlobalIn)


class TestLowerSmartCache:
    def test_only_movers_own_memory_ports(self, compiled8):
        graph = lower(compiled8.ir, "smartcache")
        for k in graph.kernels:
            if k.kind in ("compute", "fold", "cache", "sync"):
                assert not k.mem_ports, k.name

    def test_memport_count_is_heads_plus_tails(self, compiled8):
        graph = lower(compiled8.ir, "smartcache")
        readers = [k for k in graph.kernels if k.kind == "memread"]
        writers = [k for k in graph.kernels if k.kind == "memwrite"]
        assert {k.array for k in readers} == set(compiled8.ir.step_inputs)
        assert {k.array for k in writers} == set(
            compiled8.ir.live_out & frozenset(
                a for n in compiled8.ir.nodes for a in n.writes
            )
        )
        assert len(graph.mem_ports) == len(readers) + len(writers)
        assert len(readers) == 6 and len(writers) == 5

    def test_five_point_cache_spec_matches_linearization_oracle(self, compiled8):
        graph = lower(compiled8.ir, "smartcache")
        w = graph.row_stride
        spec = next(s for s in graph.smart_caches if s.stream_id == "cache_eta_dyn")
        assert set(spec.offsets) == linear_offsets_5pt(w)
        assert spec.mpoff == w
        assert spec.mnoff == w
        assert spec.buffer_len == 2 * w + 1
        assert not spec.sync_only

    def test_sync_buffers_realign_skewed_streams(self, compiled8):
        graph = lower(compiled8.ir, "smartcache")
        w = graph.row_stride
        sync_un = next(s for s in graph.smart_caches if s.stream_id == "sync_un_update")
        assert sync_un.sync_only
        assert sync_un.offsets == ()
        assert sync_un.mpoff == w  # the shapiro stage's stencil delay
        assert sync_un.buffer_len == w + 1

    def test_buffer_len_formula_for_stencilled_specs(self, compiled8):
        for variant in ("smartcache",):
            graph = lower(compiled8.ir, variant)
            for spec in graph.smart_caches:
                if spec.sync_only:
                    continue
                offs = set(spec.offsets) | {0}
                assert spec.buffer_len == max(offs) - min(offs) + 1
                assert spec.mpoff == max(offs)
                assert spec.mnoff == -min(offs)
                assert 0 in offs

    def test_budget_exceeded(self, compiled8):
        with pytest.raises(BudgetExceeded):
            lower(compiled8.ir, "smartcache", buffer_budget=5)

    def test_recirculation_flag_in_dump(self, compiled8):
        graph = lower(compiled8.ir, "smartcache")
        assert graph.to_json()["recirculation"] == "global"


class TestLinearize:
    def test_five_point_example(self):
        # (0:n+1) square grid, row stride n+2
        for n in (4, 8, 50):
            w = n + 2
            offs = linearize(
                {(0, 0), (0, 1), (0, -1), (1, 0), (-1, 0)}, w, "eta"
            )
            assert set(offs) == {-w, -1, 0, 1, w}

    def test_wide_column_offset_rejected(self):
        with pytest.raises(NonLinearizableStencil):
            linearize({(0, 5)}, 6, "a")

    def test_seq_node_rejected_by_lower(self):
        from fortpipe.analyzer import SeqNode

        from .test_analyzer import small_ir

        ir = small_ir(
            "      program main",
            "      real a",
            "      common /g/ a(10)",
            "      a(1) = 0.0",
            "      do 100 n = 1, 2",
            "        call f",
            "100   continue",
            "      end",
            "      subroutine f",
            "      real a",
            "      common /g/ a(10)",
            "      do 10 j = 2, 10",
            "        a(j) = a(j-1)",
            "10    continue",
            "      end",
        )
        assert isinstance(ir.nodes[0], SeqNode)
        with pytest.raises(CodegenError):
            lower(ir, "baseline")


class TestTransfers:
    def test_minimized_schedule_classes(self, compiled8):
        graph = lower(compiled8.ir, "baseline")
        host_use = compiled8.host_use
        sched = minimize_transfers(graph, host_use)
        assert "h0" in sched.once_to_device
        assert "eta" in sched.once_to_host
        assert set(sched.once_to_host) == {"eta", "u", "v", "h"}
        assert sched.per_step_to_device == ()
        assert sched.per_step_to_host == ()
        # scratch regenerated on the device moves in neither direction
        for arr in ("un", "vn", "etan"):
            assert arr not in sched.once_to_device
            assert arr not in sched.once_to_host

    def test_attach_schedule_shapes_plan(self, compiled8):
        graph = lower(compiled8.ir, "baseline")
        sched = minimize_transfers(graph, compiled8.host_use)
        graph = attach_schedule(graph, sched)
        assert [op.op for op in graph.host_plan] == ["to_device", "time_loop", "to_host"]
        assert set(graph.host_plan[0].arrays) == set(sched.once_to_device)

    def test_replay_equivalence_on_host_visible_arrays(self, compiled8):
        from fortpipe.pipeline import host_context
        from fortpipe.sim import run_pipeline

        ctx = host_context(compiled8)
        results = {}
        for mode in ("min", "naive"):
            graph = build_graph(compiled8, "smartcache", schedule=mode)
            results[mode] = run_pipeline(graph, ctx.arrays, ctx.nt, ctx.values)
        for arr in sorted(compiled8.host_use.final_reads):
            assert np.array_equal(results["min"].host[arr], results["naive"].host[arr]), arr
        assert (results["min"].report.host_to_device_bytes
                < results["naive"].report.host_to_device_bytes)


class TestKernelText:
    def test_baseline_has_no_channel_intrinsics(self, compiled8):
        graph = lower(compiled8.ir, "baseline")
        for name, text in emit_kernels(graph).items():
            kt = load_kernel_text(text)
            assert kt.channel_reads == 0 and kt.channel_writes == 0, name

    def test_smartcache_interior_kernels_have_no_global_references(self, compiled8):
        graph = lower(compiled8.ir, "smartcache")
        texts = emit_kernels(graph)
        for k in graph.kernels:
            if k.kind in ("compute", "fold"):
                kt = load_kernel_text(texts[k.name])
                assert kt.global_arrays == (), k.name
                assert kt.channel_reads > 0

    def test_channelized_update_signature_shrinks(self, compiled8):
        base = emit_kernels(lower(compiled8.ir, "baseline"))
        chan = emit_kernels(lower(compiled8.ir, "channelized"))
        nb = len(load_kernel_text(base["update"]).params)
        nc = len(load_kernel_text(chan["update"]).params)
        assert nc < nb

    def test_kernel_file_names(self):
        assert kernel_file_name("dyn", "smartcache") == "dyn_smartcache.clk"

    def test_emission_is_deterministic(self, compiled8):
        graph = lower(compiled8.ir, "smartcache")
        assert emit_kernels(graph) == emit_kernels(graph)
