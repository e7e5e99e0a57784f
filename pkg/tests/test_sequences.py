import math

import pytest
from hypothesis import given, settings, strategies as st

from nvpair.sequences import (Condition, Delay, PulseOp, PulseSequence,
                              SequenceSyntaxError, format_sequence,
                              parse_sequence)


def test_parse_basic_pulse():
    seq = parse_sequence("pi/2 AB 0+ phase=y\n")
    (op,) = seq.items
    assert op.angle_rad == pytest.approx(math.pi / 2)
    assert op.target == "AB" and op.transition == "0+"
    assert op.phase_rad == pytest.approx(math.pi / 2)


def test_parse_conditional_and_delay():
    seq = parse_sequence("pi A 0+ if mI=+1/2@A\nwait 2.5us\n")
    op, delay = seq.items
    assert op.condition == Condition("mI", 0.5, "A")
    assert delay.duration_s == pytest.approx(2.5e-6)
    assert seq.total_wait_s == pytest.approx(2.5e-6)
    assert seq.has_conditions()


def test_comments_and_blank_lines_ignored():
    seq = parse_sequence("# header\n\npi B dq  # trailing\n")
    assert len(seq.items) == 1


def test_syntax_errors_carry_position():
    with pytest.raises(SequenceSyntaxError) as exc:
        parse_sequence("pi A 0+\npulse B 0-\n")
    assert exc.value.line == 2
    with pytest.raises(SequenceSyntaxError):
        parse_sequence("wait 5 us\n")  # space before unit
    with pytest.raises(SequenceSyntaxError):
        parse_sequence("pi C 0+\n")
    with pytest.raises(SequenceSyntaxError):
        parse_sequence("pi A 0+ if mI=1/2@A\n")


_pulses = st.builds(
    PulseOp,
    angle_rad=st.one_of(st.just(math.pi), st.just(math.pi / 2),
                        st.floats(0.01, 6.2, allow_nan=False)),
    target=st.sampled_from(["A", "B", "AB"]),
    transition=st.sampled_from(["0+", "0-", "dq"]),
    phase_rad=st.one_of(st.just(0.0), st.just(math.pi / 2),
                        st.floats(-3.0, 3.0, allow_nan=False)),
    condition=st.one_of(
        st.none(),
        st.builds(Condition, kind=st.just("mI"),
                  value=st.sampled_from([0.5, -0.5]),
                  defect=st.sampled_from(["A", "B"])),
        st.builds(Condition, kind=st.just("mS"),
                  value=st.sampled_from([1.0, 0.0, -1.0]),
                  defect=st.sampled_from(["A", "B"]))))

_delays = st.builds(Delay, value=st.floats(0.0, 1e4, allow_nan=False),
                    unit=st.sampled_from(["ns", "us", "ms"]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.one_of(_pulses, _delays), max_size=8))
def test_parse_print_round_trip(items):
    text = format_sequence(PulseSequence(tuple(items)))
    once = format_sequence(parse_sequence(text))
    assert format_sequence(parse_sequence(once)) == once
    # semantic round trip: angles, targets, and conditions survive
    parsed = parse_sequence(once)
    assert len(parsed.items) == len(items)
    for orig, back in zip(items, parsed.items):
        if isinstance(orig, Delay):
            assert back.duration_s == pytest.approx(orig.duration_s)
        else:
            assert back.angle_rad == pytest.approx(orig.angle_rad)
            assert (back.target, back.transition) == (orig.target,
                                                      orig.transition)
            assert back.condition == orig.condition
