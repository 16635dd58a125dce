"""Subset evaluator semantics: loops, intrinsics, reference passing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fortpipe.errors import EvalError
from fortpipe.evaluator import Evaluator
from fortpipe.frontend import link_units, parse_source, print_fixed

F = np.float32


def run(*lines):
    src = "\n".join(lines) + "\n"
    return Evaluator(link_units(parse_source(src, "t.f"))).run()


class TestLoops:
    def test_zero_trip_loop(self):
        r = run(
            "      program main",
            "      n = 0",
            "      s = 0.0",
            "      do j = 1, n",
            "        s = s + 1.0",
            "      end do",
            "      end",
        )
        assert r["s"] == F(0.0)
        assert r["j"] == 1  # DO variable holds its initial value

    def test_negative_step_counts_down(self):
        r = run(
            "      program main",
            "      s = 0.0",
            "      do k = 8, 2, -3",
            "        s = s + 1.0",
            "      end do",
            "      end",
        )
        assert r["s"] == F(3.0)  # k = 8, 5, 2
        assert r["k"] == -1

    def test_trip_count_rounds_toward_zero(self):
        r = run(
            "      program main",
            "      s = 0.0",
            "      do j = 1, 6, 4",
            "        s = s + 1.0",
            "      end do",
            "      end",
        )
        assert r["s"] == F(2.0)  # j = 1, 5


class TestIntrinsics:
    def test_values(self):
        r = run(
            "      program main",
            "      a = abs(-2.5)",
            "      b = min(3.0, 1.5, 2.0)",
            "      c = max(1, 7)",
            "      d = sqrt(4.0)",
            "      e = mod(7.0, 2.0)",
            "      m = mod(-7, 2)",
            "      end",
        )
        assert r["a"] == F(2.5)
        assert r["b"] == F(1.5)
        assert r["c"] == 7
        assert r["d"] == F(2.0)
        assert r["e"] == F(1.0)
        assert r["m"] == -1  # truncation semantics, not Python modulo

    def test_integer_division_truncates(self):
        r = run(
            "      program main",
            "      i = 7 / 2",
            "      j = (-7) / 2",
            "      end",
        )
        assert r["i"] == 3
        assert r["j"] == -3

    def test_int_assignment_truncates_real(self):
        r = run(
            "      program main",
            "      i = 2.9",
            "      end",
        )
        assert r["i"] == 2


class TestReferences:
    def test_scalar_passed_by_reference(self):
        r = run(
            "      program main",
            "      x = 1.0",
            "      call bump(x)",
            "      end",
            "      subroutine bump(a)",
            "      a = a + 1.0",
            "      end",
        )
        assert r["x"] == F(2.0)

    def test_array_aliases_through_call(self):
        r = run(
            "      program main",
            "      real a",
            "      dimension a(3)",
            "      a(1) = 1.0",
            "      a(2) = 2.0",
            "      a(3) = 3.0",
            "      call dbl(a)",
            "      end",
            "      subroutine dbl(b)",
            "      real b(3)",
            "      do j = 1, 3",
            "        b(j) = b(j) * 2.0",
            "      end do",
            "      end",
        )
        assert list(r["a"]) == [F(2.0), F(4.0), F(6.0)]

    def test_function_result(self):
        r = run(
            "      program main",
            "      y = twice(3.0) + 1.0",
            "      end",
            "      real function twice(x)",
            "      twice = x * 2.0",
            "      end",
        )
        assert r["y"] == F(7.0)

    def test_common_shared_across_units(self):
        r = run(
            "      program main",
            "      common /c/ w",
            "      w = 5.0",
            "      call addone",
            "      end",
            "      subroutine addone",
            "      common /c/ w",
            "      w = w + 1.0",
            "      end",
        )
        assert r["w"] == F(6.0)

    def test_expression_actual_for_written_dummy_rejected_reads_fine(self):
        r = run(
            "      program main",
            "      y = 0.0",
            "      call f(1.0 + 2.0, y)",
            "      end",
            "      subroutine f(a, b)",
            "      b = a * 2.0",
            "      end",
        )
        assert r["y"] == F(6.0)

    def test_out_of_bounds_index_raises(self):
        with pytest.raises(EvalError):
            run(
                "      program main",
                "      real a",
                "      dimension a(3)",
                "      a(4) = 1.0",
                "      end",
            )


class TestFloat32Semantics:
    def test_every_operation_rounds_to_binary32(self):
        r = run(
            "      program main",
            "      x = 0.1",
            "      y = 0.2",
            "      z = x + y",
            "      end",
        )
        assert r["z"] == F(0.1) + F(0.2)
        assert r["z"] != np.float64(0.1) + np.float64(0.2)

    @given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, width=32),
           st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, width=32))
    @settings(max_examples=60, deadline=None)
    def test_arithmetic_matches_numpy_float32(self, a, b):
        r = run(
            "      program main",
            f"      x = {a!r}",
            f"      y = {b!r}",
            "      s = x + y",
            "      d = x - y",
            "      p = x * y",
            "      end",
        )
        x, y = F(a), F(b)
        assert r["s"] == x + y
        assert r["d"] == x - y
        assert r["p"] == x * y


class TestRoundTripProperty:
    @given(st.lists(st.sampled_from(["+", "-", "*", "/"]), min_size=1, max_size=6),
           st.lists(st.integers(min_value=1, max_value=9), min_size=7, max_size=7))
    @settings(max_examples=60, deadline=None)
    def test_random_expression_round_trips(self, ops, nums):
        expr = str(float(nums[0]))
        for i, op in enumerate(ops):
            expr += f" {op} {float(nums[i + 1])!r}"
        src = f"      program main\n      x = {expr}\n      end\n"
        units1 = parse_source(src, "t.f")
        units2 = parse_source(print_fixed(units1), "t.f")
        assert list(units1) == list(units2)
