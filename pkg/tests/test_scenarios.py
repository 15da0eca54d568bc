import math

import numpy as np
import pytest

from hystab.errors import ConfigError
from hystab.lti import dc_gain, poles
from hystab.scenarios import (build_double_integrator, build_oscillator, build_preset,
                              build_second_order)
from hystab.simulate import Scenario, run


def test_double_integrator_literals():
    s = build_double_integrator()
    assert s.sys.A.tolist() == [[0.0, 1.0], [0.0, 0.0]]
    assert s.sys.B.tolist() == [0.0, 1.0] and s.sys.C.tolist() == [1.0, 0.0]
    assert (s.feedback.kind, s.feedback.gamma, s.feedback.h) == ("sign", 1.0, 1.0)
    assert dc_gain(s.sys) == math.inf
    assert np.all(poles(s.sys).poles == 0)


def test_second_order_literals():
    s = build_second_order()
    assert s.sys.A.tolist() == [[0.0, 1.0], [-1.0, -1.0]]
    assert s.sys.B.tolist() == [0.0, 1.0] and s.sys.C.tolist() == [0.0, 1.0]
    assert dc_gain(s.sys) == 0.0


def test_oscillator_printed_matrix():
    s = build_oscillator(101, damping_sign="as_printed", coupling_sign="as_printed")
    assert s.sys.A.tolist() == [[0, 0, 1, 0], [0, 0, 0, 1], [-100, -1, 0, 0],
                                [100, -100, 0, 0.01]]
    assert s.sys.B.tolist() == [0, 0, -1, 1]
    assert s.sys.C.tolist() == [1, -1, 0, 0]
    assert s.x0.tolist() == [1, 0, 0, 0]
    assert (s.feedback.h, s.dt) == (50.0, 1e-4)


def test_oscillator_default_variant():
    s = build_oscillator(99)
    assert s.sys.A[3, 3] == -0.01 and s.sys.B.tolist() == [0, 0, 1, -1]


def test_oscillator_poles():
    r99 = poles(build_oscillator(99).sys)
    assert r99.max_real < 0 and r99.classification == "hurwitz"
    r101 = poles(build_oscillator(101).sys)
    assert r101.v == 2 and r101.classification == "unstable"
    assert abs(poles(build_oscillator(100).sys).max_real) < 1e-2
    assert poles(build_oscillator(101, damping_sign="as_printed").sys).v == 2


def test_presets_roundtrip():
    for pid in ("double_integrator", "second_order", "oscillator"):
        s = build_preset(pid)
        assert Scenario.from_json(s.to_json()) == s


def test_preset_errors():
    with pytest.raises(ConfigError):
        build_preset("pendulum")
    with pytest.raises(ConfigError):
        build_oscillator(-1.0)
    with pytest.raises(ConfigError):
        build_oscillator(101, damping_sign="sideways")


def test_default_double_integrator_run_reaches_interval():
    traj, diag = run(build_double_integrator())
    assert diag.final_set_membership and abs(traj.x[-1, 1]) < 1e-3


def test_printed_damping_sign_is_anti_damping():
    # +0.01 on the (4,4) entry pushes the K=99 pair to the right half-plane
    r = poles(build_oscillator(99, damping_sign="as_printed").sys)
    assert r.max_real == pytest.approx(0.0025, rel=1e-3)
