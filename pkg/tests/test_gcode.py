from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from slcnc.errors import GCodeSyntaxError, UndeclaredResource, UnsupportedCommand
from slcnc.gcode import (
    Assignment,
    Linear,
    Rapid,
    RawProgram,
    ResourceDecl,
    WithBlock,
    parse_program,
    render_program,
)


def test_labelled_rapid():
    prog = parse_program("N10 G00 X3")
    (cmd,) = prog.commands
    assert cmd == Rapid({"X": 3.0}, label=10)
    assert cmd.line == 1


def test_linear_with_feed():
    (cmd,) = parse_program("G01 X3 F100").commands
    assert isinstance(cmd, Linear)
    assert cmd.targets == {"X": 3.0}
    assert cmd.feed == 100.0


def test_empty_program():
    prog = parse_program("")
    assert prog.commands == [] and not prog.is_concurrent


def test_rotary_word():
    (cmd,) = parse_program("G01 C90.0").commands
    assert cmd.targets == {"C": 90.0}


def test_comments_blank_lines_and_case():
    text = "(header)\n\n  g0 x1 y2 ; trailing\nN20 g1 X 3 Y 4 (cut) Z-0.5\n"
    a, b = parse_program(text).commands
    assert a == Rapid({"X": 1.0, "Y": 2.0})
    assert b == Linear({"X": 3.0, "Y": 4.0, "Z": -0.5}, label=20)
    assert (a.line, b.line) == (3, 4)


def test_juxtaposed_words():
    (cmd,) = parse_program("G01X3Y-4.5Z.5").commands
    assert cmd.targets == {"X": 3.0, "Y": -4.5, "Z": 0.5}


def test_modal_motion():
    cmds = parse_program("G01 X1\nX2\nG00 Y3\nZ4\n").commands
    assert [type(c) for c in cmds] == [Linear, Linear, Rapid, Rapid]


def test_assignment():
    (cmd,) = parse_program("X = 5").commands
    assert cmd == Assignment("X", 5.0)


def test_feed_alone_is_recorded():
    (cmd,) = parse_program("F200").commands
    assert cmd == Assignment("F", 200.0)


@pytest.mark.parametrize("text", ["G02 X1", "G1.5 X1", "M3", "T1 X2", "G17", "G01 X1e3"])
def test_unsupported(text):
    with pytest.raises(UnsupportedCommand) as info:
        parse_program("G00 X0\n" + text)
    assert info.value.line == 2


@pytest.mark.parametrize("text", ["G01 X1..2", "G01 X", "X1", "G01 X1 X2", "G01 X1 (open"])
def test_syntax_errors(text):
    with pytest.raises(GCodeSyntaxError):
        parse_program(text)


def test_threads_resources_and_with():
    text = """
RESOURCE Res_handoff IN shared_zone
THREAD A:
  G01 X10 Y10 F100
  WITH Res_handoff
    G01 X30
    G00 X10
  END
THREAD B:
  G01 X50 Y50
"""
    prog = parse_program(text)
    assert prog.is_concurrent
    assert prog.resources == [ResourceDecl("Res_handoff", "shared_zone")]
    a = prog.threads["A"]
    assert isinstance(a[1], WithBlock)
    assert a[1].resource == "Res_handoff"
    assert [type(c) for c in a[1].body] == [Linear, Rapid]
    assert prog.threads["B"] == [Linear({"X": 50.0, "Y": 50.0})]


def test_modes_are_per_thread():
    prog = parse_program("THREAD A:\nG00 X1\nTHREAD B:\nG01 X2\nY3\n")
    assert [type(c) for c in prog.threads["B"]] == [Linear, Linear]
    with pytest.raises(GCodeSyntaxError):
        parse_program("THREAD A:\nG00 X1\nTHREAD B:\nX2\n")


def test_undeclared_resource():
    with pytest.raises(UndeclaredResource) as info:
        parse_program("THREAD A:\nWITH lock\nG01 X1\nEND\n")
    assert info.value.name == "lock" and info.value.line == 2


def test_with_structure_errors():
    with pytest.raises(GCodeSyntaxError):
        parse_program("RESOURCE r\nTHREAD A:\nWITH r\nWITH r\nEND\nEND\n")
    with pytest.raises(GCodeSyntaxError):
        parse_program("RESOURCE r\nTHREAD A:\nWITH r\nG01 X1\n")
    with pytest.raises(GCodeSyntaxError):
        parse_program("END\n")
    with pytest.raises(GCodeSyntaxError):
        parse_program("THREAD A:\nTHREAD A:\n")


# -- round trip ----------------------------------------------------------------

num = st.floats(-1000, 1000, allow_nan=False).map(lambda v: round(v, 3))
targets = st.dictionaries(st.sampled_from("XYZABC"), num, min_size=1)
labels = st.one_of(st.none(), st.integers(0, 9999))
motion = st.one_of(
    st.builds(lambda t, n: Rapid(t, label=n), targets, labels),
    st.builds(lambda t, f, n: Linear(t, f, label=n), targets, st.one_of(st.none(), num), labels),
    st.builds(lambda v, x: Assignment(v, x), st.sampled_from("XYZABCF"), num),
)


@given(st.lists(motion, max_size=8))
def test_round_trip_sequential(cmds):
    prog = RawProgram(commands=cmds)
    assert parse_program(render_program(prog)) == prog


@given(st.lists(motion, max_size=4), st.lists(motion, max_size=4), st.lists(motion, max_size=3))
def test_round_trip_concurrent(a, b, inner):
    prog = RawProgram(
        threads={"A": a + [WithBlock("lock", inner)], "B": b},
        resources=[ResourceDecl("lock", "zone")],
    )
    assert parse_program(render_program(prog)) == prog
