"""Shallow-water model: oracle physics, corpus rendering, field format."""

import numpy as np
import pytest

from fortpipe.errors import CflViolation
from fortpipe.evaluator import Evaluator
from fortpipe.swcorpus import (
    ModelParams,
    dynamics_step,
    host_checksums,
    initial_state,
    parse_corpus,
    read_field,
    reference_step,
    render_corpus,
    run_reference,
    shapiro_step,
    update_step,
    write_field,
)

from .oracles import dynamics_f64

F = np.float32


def seeded_state(p, seed=0):
    """Random wet state respecting the ghost-ring invariants."""
    rng = np.random.default_rng(seed)
    state = initial_state(p)
    J, K = slice(1, p.ny + 1), slice(1, p.nx + 1)
    state["eta"][J, K] = rng.uniform(-0.4, 0.4, (p.ny, p.nx)).astype(np.float32)
    state["u"][J, K] = rng.uniform(-0.2, 0.2, (p.ny, p.nx)).astype(np.float32)
    state["v"][J, K] = rng.uniform(-0.2, 0.2, (p.ny, p.nx)).astype(np.float32)
    state["u"][:, p.nx] = 0.0
    state["v"][p.ny, :] = 0.0
    state["etan"] = state["eta"].copy()
    state["h"] = state["h0"] + state["eta"]
    state["wet"] = state["h"] > F(p.hmin)
    return state


class TestDynamics:
    def test_rest_state_is_fixed_point(self):
        p = ModelParams(nx=6, ny=6, nt=1, pulse_height=0.0)
        s = initial_state(p)
        un, vn, etan = dynamics_step(s["eta"], s["u"], s["v"], s["h"], p)
        assert not un.any() and not vn.any()
        assert np.array_equal(etan, s["eta"])

    def test_single_cell_hump_keeps_mirror_symmetry(self):
        p = ModelParams(nx=7, ny=7, nt=1, pulse_frac=0.01)  # one-cell pulse
        s = initial_state(p)
        assert s["eta"][4, 4] == F(1.0)
        un, vn, etan = dynamics_step(s["eta"], s["u"], s["v"], s["h"], p)
        J, K = slice(1, 8), slice(1, 8)
        e = etan[J, K]
        assert np.array_equal(e, e[::-1, :])
        assert np.array_equal(e, e[:, ::-1])
        # velocities are antisymmetric about the pulse in their own axis
        u = un[J, K]
        assert np.array_equal(u[:, :-1], -u[:, ::-1][:, 1:])

    def test_one_step_matches_float64_scalar_oracle(self):
        p = ModelParams(nx=8, ny=8, nt=1)
        s = seeded_state(p, seed=7)
        un, vn, etan = dynamics_step(s["eta"], s["u"], s["v"], s["h"], p)
        ref_un, ref_vn, ref_etan = dynamics_f64(
            s["eta"], s["u"], s["v"], s["h"], p.ny, p.nx, p.dt, p.dx, p.dy, p.g
        )
        for got, ref in ((un, ref_un), (vn, ref_vn), (etan, ref_etan)):
            scale = max(float(np.abs(ref).max()), 1e-30)
            rel = np.abs(got.astype(np.float64) - ref).max() / scale
            assert rel < 1e-6

    def test_mass_conserved_by_dynamics_substep(self):
        p = ModelParams(nx=16, ny=16, nt=1)
        s = seeded_state(p, seed=3)
        _, _, etan = dynamics_step(s["eta"], s["u"], s["v"], s["h"], p)
        J, K = slice(1, 17), slice(1, 17)
        before = float(s["eta"][J, K].astype(np.float64).sum())
        after = float(etan[J, K].astype(np.float64).sum())
        scale = float(np.abs(s["eta"][J, K]).astype(np.float64).sum()) or 1.0
        assert abs(after - before) / scale < 1e-6


class TestShapiro:
    def test_eps_zero_is_identity(self):
        p = ModelParams(nx=6, ny=6, nt=1)
        s = seeded_state(p)
        out = shapiro_step(s["etan"], s["wet"], 0.0, p.ny, p.nx)
        assert np.array_equal(out, s["etan"])

    def test_uniform_field_is_preserved(self):
        p = ModelParams(nx=6, ny=6, nt=1)
        s = initial_state(p)
        etan = np.full(p.shape, F(0.75), dtype=np.float32)
        out = shapiro_step(etan, s["wet"], p.eps, p.ny, p.nx)
        assert np.array_equal(out[1:-1, 1:-1], etan[1:-1, 1:-1])

    def test_checkerboard_scales_by_one_minus_two_eps(self):
        # hand evaluation: all four wet neighbours carry the opposite sign,
        # so (1-eps)*x + 0.25*eps*4*(-x) = (1-2*eps)*x
        p = ModelParams(nx=8, ny=8, nt=1)
        s = initial_state(p)
        jj, kk = np.mgrid[0:p.ny + 2, 0:p.nx + 2]
        etan = np.where((jj + kk) % 2 == 0, F(1.0), F(-1.0)).astype(np.float32)
        out = shapiro_step(etan, np.ones(p.shape, bool), 0.05, p.ny, p.nx)
        interior = out[2:-2, 2:-2]
        expect = etan[2:-2, 2:-2] * F(1.0 - 2 * 0.05)
        assert np.allclose(interior, expect, rtol=0, atol=1e-7)
        assert float(np.abs(interior).max()) == pytest.approx(0.9, abs=1e-6)

    def test_filter_is_convex_combination(self):
        p = ModelParams(nx=8, ny=8, nt=1)
        s = seeded_state(p, seed=5)
        out = shapiro_step(s["etan"], s["wet"], p.eps, p.ny, p.nx)
        J, K = slice(1, 9), slice(1, 9)
        lo = np.minimum.reduce([
            s["etan"][J, K], s["etan"][J, 2:10], s["etan"][J, 0:8],
            s["etan"][2:10, K], s["etan"][0:8, K],
        ])
        hi = np.maximum.reduce([
            s["etan"][J, K], s["etan"][J, 2:10], s["etan"][J, 0:8],
            s["etan"][2:10, K], s["etan"][0:8, K],
        ])
        assert (out[J, K] >= lo - 1e-7).all()
        assert (out[J, K] <= hi + 1e-7).all()


class TestUpdate:
    def test_depth_is_h0_plus_eta(self):
        p = ModelParams(nx=4, ny=4, nt=1)
        s = initial_state(p)
        eta = np.full(p.shape, F(0.5), np.float32)
        h, wet, u, v = update_step(eta, s["un"], s["vn"], s["h0"], p.hmin)
        assert float(h[2, 2]) == pytest.approx(10.5)
        assert wet.all()

    def test_dry_cell_zeroes_velocity(self):
        p = ModelParams(nx=4, ny=4, nt=1)
        s = initial_state(p)
        eta = np.full(p.shape, F(-10.05), np.float32)
        un = np.full(p.shape, F(1.0), np.float32)
        h, wet, u, v = update_step(eta, un, un, s["h0"], p.hmin)
        assert not wet.any()
        assert not u.any() and not v.any()

    def test_nt100_32x32_matches_committed_golden(self):
        p = ModelParams(nx=32, ny=32, nt=100)
        state = run_reference(p, nt=100)
        name, golden = read_field("tests/goldens/eta_32x32_nt100.f32")
        assert name == "eta"
        assert np.array_equal(state["eta"], golden)


class TestReference:
    def test_nt0_is_identity(self):
        p = ModelParams(nx=6, ny=6, nt=0)
        init = initial_state(p)
        out = run_reference(p, nt=0)
        assert all(np.array_equal(init[k], out[k]) for k in init)

    def test_lake_at_rest_stays_at_rest(self):
        p = ModelParams(nx=8, ny=8, nt=50, pulse_height=0.0)
        out = run_reference(p, nt=50)
        assert not out["eta"].any()
        assert not out["u"].any() and not out["v"].any()

    def test_surface_sum_drift_is_small(self):
        p = ModelParams(nx=64, ny=64, nt=1000)
        state = initial_state(p)
        J, K = slice(1, 65), slice(1, 65)
        target = float(state["eta"][J, K].astype(np.float64).sum())
        worst_substep = 0.0
        for _ in range(1000):
            before = float(state["eta"][J, K].astype(np.float64).sum())
            _, _, etan = dynamics_step(state["eta"], state["u"], state["v"], state["h"], p)
            after = float(etan[J, K].astype(np.float64).sum())
            worst_substep = max(worst_substep, abs(after - before) / abs(target))
            state = reference_step(state, p)
        assert worst_substep < 1e-6  # flux form telescopes to rounding noise
        drift = float(state["eta"][J, K].astype(np.float64).sum()) - target
        assert abs(drift) / abs(target) < 1e-4

    def test_cfl_violation_raises(self):
        with pytest.raises(CflViolation):
            ModelParams(nx=8, ny=8, nt=1, dt=0.2)


class TestCorpusText:
    def test_renders_about_190_lines(self):
        texts = render_corpus(ModelParams())
        total = sum(len(t.splitlines()) for t in texts.values())
        assert 150 <= total <= 230

    def test_render_is_deterministic(self):
        a = render_corpus(ModelParams(nx=16, ny=16, nt=4))
        b = render_corpus(ModelParams(nx=16, ny=16, nt=4))
        assert a == b

    def test_evaluator_run_matches_numpy_oracle_bitwise(self, params8):
        ast = parse_corpus(params8)
        res = Evaluator(ast).run()
        ref = run_reference(params8)
        for name in ("eta", "u", "v", "h", "un", "vn", "etan"):
            assert np.array_equal(res[name], ref[name]), name
        assert np.array_equal(res["wet"], ref["wet"])
        sums = host_checksums(ref, params8)
        assert F(res["seta"]) == sums["eta"]
        assert F(res["sh"]) == sums["h"]

    def test_committed_corpus_parses_and_links(self):
        from pathlib import Path

        from fortpipe.frontend import link_units, parse_source

        base = Path("corpus/sw2d")
        units = []
        for f in sorted(base.glob("*.f")):
            units.extend(parse_source(f.read_text(), str(f)))
        ast = link_units(units)
        assert {u.name for u in ast.units} == {"main", "dyn", "shapiro", "update"}


class TestFieldFormat:
    def test_write_read_round_trip(self, tmp_path):
        arr = np.arange(12, dtype=np.float32).reshape(3, 4) * F(0.5)
        path = tmp_path / "x.f32"
        write_field(path, "eta", arr)
        name, back = read_field(path)
        assert name == "eta"
        assert np.array_equal(arr, back)
        raw = path.read_bytes()
        header, blob = raw.split(b"\n", 1)
        assert b"float32 row-major little-endian" in header
        assert blob == arr.astype("<f4").tobytes()
