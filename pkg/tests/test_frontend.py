"""Frontend: fixed-form parsing, linking, round-trip printing."""

import pytest

from fortpipe.errors import (
    DuplicateUnit,
    LinkError,
    NoProgramUnit,
    ParseError,
    UnresolvedCallee,
    UnsupportedFeature,
)
from fortpipe.frontend import (
    call_graph_is_acyclic,
    link_units,
    parse_source,
    print_fixed,
)
from fortpipe.frontend.nodes import (
    Assignment,
    Const,
    DoLoop,
    FType,
    IfThenElse,
)
from fortpipe.swcorpus import render_corpus


def parse_one(text, path="t.f"):
    return parse_source(text, path)


def wrap(body_lines):
    lines = ["      program main"] + body_lines + ["      end"]
    return "\n".join(lines) + "\n"


class TestParsing:
    def test_labeled_do_maps_to_loop_node(self):
        src = wrap([
            "      parameter (n = 4)",
            "      real a",
            "      dimension a(10)",
            "      do 10 j = 1, n",
            "        a(j) = 0.0",
            "10    continue",
        ])
        (unit,) = parse_one(src)
        loop = [s for s in unit.body if isinstance(s, DoLoop)][0]
        assert loop.term_label == 10
        assert loop.var == "j"
        assert loop.lo == Const(1, FType.INTEGER)
        assert loop.step is None

    def test_common_block_entry(self):
        src = wrap([
            "      real eta",
            "      common /grid/ eta(0:51,0:51)",
            "      eta(1,1) = 0.0",
        ])
        (unit,) = parse_one(src)
        blocks = unit.common_blocks
        assert len(blocks) == 1
        name, entities = blocks[0]
        assert name == "grid"
        assert entities[0].name == "eta"
        assert len(entities[0].dims) == 2

    def test_equivalence_is_unsupported(self):
        src = wrap(["      equivalence (a,b)"])
        with pytest.raises(UnsupportedFeature) as exc:
            parse_one(src)
        assert exc.value.feature == "EQUIVALENCE"

    def test_goto_and_io_unsupported(self):
        for stmt, feature in [
            ("      goto 10", "GOTO"),
            ("      write (6,*) x", "WRITE"),
            ("      read (5,*) x", "READ"),
        ]:
            with pytest.raises(UnsupportedFeature) as exc:
                parse_one(wrap([stmt]))
            assert exc.value.feature == feature

    def test_shared_terminal_label_builds_nested_loops(self):
        src = wrap([
            "      real a",
            "      dimension a(8,8)",
            "      do 10 j = 1, 8",
            "        do 10 k = 1, 8",
            "          a(j,k) = 1.0",
            "10    continue",
        ])
        (unit,) = parse_one(src)
        outer = [s for s in unit.body if isinstance(s, DoLoop)][0]
        assert outer.var == "j" and outer.term_label == 10
        inner = [s for s in outer.body if isinstance(s, DoLoop)][0]
        assert inner.var == "k" and inner.term_label == 10

    def test_logical_if_one_liner(self):
        src = wrap(["      x = 1.0", "      if (x .gt. 0.0) x = 2.0"])
        (unit,) = parse_one(src)
        st = unit.body[1]
        assert isinstance(st, IfThenElse)
        assert len(st.then_body) == 1 and not st.else_body

    def test_continuation_lines_join(self):
        src = wrap([
            "      x = 1.0 +",
            "     +    2.0",
        ])
        (unit,) = parse_one(src)
        assert isinstance(unit.body[0], Assignment)

    def test_non_continue_do_terminator_rejected(self):
        src = wrap([
            "      real a",
            "      dimension a(8)",
            "      do 10 j = 1, 8",
            "10    a(j) = 0.0",
        ])
        with pytest.raises(ParseError):
            parse_one(src)

    def test_negative_step_loop(self):
        src = wrap([
            "      real a",
            "      dimension a(8)",
            "      do 20 k = 8, 1, -1",
            "        a(k) = 0.0",
            "20    continue",
        ])
        (unit,) = parse_one(src)
        loop = unit.body[0]
        assert loop.step is not None

    def test_keyword_named_variable(self):
        src = wrap(["      end1 = 5.0"])
        (unit,) = parse_one(src)
        assert isinstance(unit.body[0], Assignment)


class TestLinking:
    def test_corpus_call_graph(self, params8):
        units = []
        for name, text in render_corpus(params8).items():
            units.extend(parse_source(text, name))
        ast = link_units(units)
        edges = set(ast.call_graph)
        assert edges == {("main", "dyn"), ("main", "shapiro"), ("main", "update")}
        assert call_graph_is_acyclic(ast)

    def test_unresolved_callee(self):
        src = wrap(["      call foo"])
        with pytest.raises(UnresolvedCallee) as exc:
            link_units(parse_one(src))
        assert exc.value.name == "foo"
        assert exc.value.caller == "main"

    def test_duplicate_unit(self):
        src = wrap([]) + "      subroutine s\n      end\n" * 2
        with pytest.raises(DuplicateUnit):
            link_units(parse_one(src))

    def test_no_program_unit(self):
        src = "      subroutine s\n      end\n"
        with pytest.raises(NoProgramUnit):
            link_units(parse_one(src))

    def test_array_arity_checked_post_link(self):
        src = wrap([
            "      real a",
            "      dimension a(4,4)",
            "      a(1,1) = a(2,2)",
        ])
        ast = link_units(parse_one(src))  # rank 2 everywhere: fine
        bad = wrap([
            "      real a",
            "      dimension a(4,4)",
            "      x = a(1,1,1)",
        ])
        with pytest.raises(LinkError):
            link_units(parse_one(bad))

    def test_implicit_typing_rule(self):
        src = wrap(["      jx = 1", "      moo = 2", "      x = 1.0"])
        ast = link_units(parse_one(src))
        tab = ast.symtabs["main"]
        assert str(tab["jx"].ftype) == "integer"
        assert str(tab["moo"].ftype) == "integer"
        assert str(tab["x"].ftype) == "real"
        assert tab["x"].origin == "implicit"


class TestRoundTrip:
    @pytest.mark.parametrize("fname", ["main.f", "dyn.f", "shapiro.f", "update.f"])
    def test_corpus_round_trip(self, params8, fname):
        text = render_corpus(params8)[fname]
        units1 = parse_source(text, fname)
        printed = print_fixed(units1)
        units2 = parse_source(printed, fname)
        assert list(units1) == list(units2)

    def test_round_trip_is_fixpoint(self, params8):
        text = render_corpus(params8)["dyn.f"]
        units1 = parse_source(text)
        p1 = print_fixed(units1)
        p2 = print_fixed(parse_source(p1))
        assert p1 == p2

    def test_expression_tree_preserved(self):
        src = wrap(["      x = 1.0 - (2.0 - 3.0)", "      y = (1.0 + 2.0) + 3.0"])
        units1 = parse_one(src)
        units2 = parse_source(print_fixed(units1))
        assert list(units1) == list(units2)

    def test_column_72_wrap_survives(self, params8):
        # force a long declaration line through the printer
        text = render_corpus(params8)["main.f"]
        units = parse_source(text)
        printed = print_fixed(units)
        assert all(len(line) <= 72 for line in printed.splitlines())
        assert list(parse_source(printed)) == list(units)
