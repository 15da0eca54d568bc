import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hystab.errors import InconsistentInitialState, NoOverlap, NonFiniteInput
from hystab.hysteresis import (SignHysteresis, StaticMap, StopElement,
                               initial_state, is_clockwise, trace, update)


def drive(state, ys):
    out = []
    for y in ys:
        state, xi = update(state, y)
        out.append(xi)
    return state, np.array(out)


def test_sign_forward_branch():
    st_, xi = drive(SignHysteresis(1.0, 1.0, 1.0), np.linspace(0, 1, 11))
    assert xi[-1] == pytest.approx(2.0)


def test_sign_branch_flip():
    s = SignHysteresis(1.0, 1.0, 1.0, y_prev=1.0)
    s, xi = update(s, 0.9)
    assert xi == pytest.approx(-0.1)
    assert s.direction == -1.0


def test_sign_zero_increment_holds_direction():
    s = SignHysteresis(2.0, 0.5, -1.0, y_prev=0.3)
    s2, xi = update(s, 0.3)
    assert s2.direction == -1.0 and xi == pytest.approx(0.1)


def test_stop_saturates_and_reverses():
    s, xi = update(StopElement(1.0, 50.0, z=45.0), 10.0)
    assert xi == 50.0
    s, xi = update(StopElement(1.0, 50.0, z=50.0, y_prev=10.0), 0.0)
    assert xi == 40.0


def test_initial_states():
    assert initial_state("sign", {"gamma": 1, "h": 1}, 1.0, 0.0).direction == 1.0
    assert initial_state("sign", {"gamma": 1, "h": 1}, -1.0, 0.0).direction == -1.0
    assert initial_state("stop", {"c": 1, "h": 50}, 0.0).z == 0.0
    with pytest.raises(InconsistentInitialState):
        initial_state("sign", {"gamma": 1, "h": 1}, 5.0, 0.0)
    with pytest.raises(InconsistentInitialState):
        initial_state("stop", {"c": 1, "h": 1}, 1.5)
    # a zero-increment update reproduces xi0
    s = initial_state("sign", {"gamma": 2, "h": 1}, 3.0, 1.0)
    assert update(s, 1.0)[1] == 3.0


def test_non_finite_input():
    with pytest.raises(NonFiniteInput):
        update(SignHysteresis(1, 1), float("nan"))
    with pytest.raises(NonFiniteInput):
        update(StopElement(1, 1), float("inf"))


def test_static_table_and_sector():
    m = StaticMap(table=([-1.0, 0.0, 2.0], [-3.0, 0.0, 2.0]), sector=(1.0, 3.0))
    assert m.g(1.0) == pytest.approx(1.0)
    assert m.g(-2.0) == pytest.approx(-6.0)  # end-slope extrapolation
    with pytest.raises(ValueError):
        StaticMap(table=([-1.0, 1.0], [0.0, 2.0]))  # g(0) = 1
    with pytest.raises(ValueError):
        StaticMap(table=([-1.0, 0.0, 1.0], [-1.0, 0.0, 5.0]), sector=(0.0, 2.0))


def test_clockwise_examples():
    py, pxi, _ = trace(SignHysteresis(1, 1), [0.5, 1.0, 0.5, 0.0])
    assert is_clockwise(np.c_[py, pxi])
    py, pxi, _ = trace(StaticMap(1.0), [0.5, 1.0, 0.5, 0.0])
    assert is_clockwise(np.c_[py, pxi])
    # swap branches: counter-clockwise
    y = np.r_[np.linspace(0, 1, 11), np.linspace(1, 0, 11)]
    xi = np.r_[np.linspace(0, 1, 11) - 1, np.linspace(1, 0, 11) + 1]
    assert not is_clockwise(np.c_[y, xi])


def test_no_overlap():
    with pytest.raises(NoOverlap):
        is_clockwise([[0, 0], [1, 1], [2, 2]])


def test_trace_inserts_jump_sample():
    py, pxi, s = trace(SignHysteresis(1, 1, 1.0), [1.0, 0.5])
    assert list(py) == [0.0, 1.0, 1.0, 0.5]
    assert list(pxi) == [1.0, 2.0, 0.0, -0.5]


paths = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=60)


@settings(max_examples=200, deadline=None)
@given(paths, st.floats(0, 3), st.floats(0, 4))
def test_sign_band_containment(ys, gamma, h):
    s = SignHysteresis(gamma, h)
    for y in ys:
        s, xi = update(s, y)
        assert abs(xi - gamma * y) <= h * (1 + 1e-15) + 1e-15


@settings(max_examples=200, deadline=None)
@given(paths, st.floats(0.01, 50), st.floats(0.01, 4))
def test_stop_band_containment(ys, c, h):
    s = StopElement(c, h)
    for y in ys:
        s, xi = update(s, y)
        assert abs(xi) <= h


@settings(max_examples=200, deadline=None)
@given(paths, st.floats(0, 3))
def test_zero_height_equals_static_map(ys, gamma):
    _, a = drive(SignHysteresis(gamma, 0.0), ys)
    _, b = drive(StaticMap(gamma), ys)
    assert np.array_equal(a, b)


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(0, 3), st.floats(0, 2))
def test_monotone_segment_is_affine(y0, span, gamma, h):
    ys = y0 + np.linspace(0, span, 17)[1:]
    _, xi = drive(SignHysteresis(gamma, h, 0.0, y0), ys)
    assert np.allclose(xi, gamma * ys + h, rtol=0, atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(paths)
def test_deterministic(ys):
    for s in (SignHysteresis(1.3, 0.7), StopElement(4.0, 1.1)):
        assert np.array_equal(drive(s, ys)[1], drive(s, ys)[1])
