import math

import numpy as np
import pytest
import scipy.signal
import sympy

from hystab.errors import ModelError, SingularAtS
from hystab.lti import (StateSpace, dc_gain, frequency_response, poles,
                        relative_degree_one, transfer_eval)

A1 = StateSpace([[0, 1], [0, 0]], [0, 1], [1, 0])
A2 = StateSpace([[0, 1], [-1, -1]], [0, 1], [0, 1])


def symbolic_G(sys):
    s = sympy.symbols("s")
    A = sympy.Matrix(sys.A.tolist()).applyfunc(sympy.nsimplify)
    B = sympy.Matrix(sys.B.tolist()).applyfunc(sympy.nsimplify)
    C = sympy.Matrix(sys.C.tolist()).applyfunc(sympy.nsimplify)
    G = sympy.simplify((C.T * (s * sympy.eye(sys.n) - A).inv() * B)[0])
    return sympy.lambdify(s, G, "numpy"), G, s


def test_double_integrator_transfer_matches_symbolic():
    f, G, s = symbolic_G(A1)
    assert sympy.simplify(G - 1 / s**2) == 0
    assert transfer_eval(A1, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert transfer_eval(A1, 2 + 1j) == pytest.approx(complex(f(2 + 1j)), rel=1e-12)


def test_second_order_transfer():
    f, G, s = symbolic_G(A2)
    assert sympy.simplify(G - s / (s**2 + s + 1)) == 0
    assert transfer_eval(A2, 0.0) == 0.0
    assert dc_gain(A2) == 0.0


def test_singular_at_pole():
    with pytest.raises(SingularAtS):
        transfer_eval(A1, 0.0)
    assert dc_gain(A1) == math.inf


def test_dc_gain_scalar():
    assert dc_gain(StateSpace([[-1.0]], [1.0], [1.0])) == pytest.approx(1.0)


def test_random_systems_against_ss2tf():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = rng.integers(1, 5)
        A = rng.normal(size=(n, n)) - 2 * np.eye(n)
        B, C = rng.normal(size=n), rng.normal(size=n)
        num, den = scipy.signal.ss2tf(A, B[:, None], C[None, :], [[0.0]])
        sys = StateSpace(A, B, C)
        for s in (0.3j, 1 + 2j, -0.1 + 5j):
            ref = np.polyval(num[0], s) / np.polyval(den, s)
            assert transfer_eval(sys, s) == pytest.approx(ref, rel=1e-9)
        assert transfer_eval(sys, 0.0).real == pytest.approx(dc_gain(sys), rel=1e-10)


def test_poles_reports():
    r1 = poles(A1)
    assert np.allclose(r1.poles, 0) and r1.classification == "marginal"
    r2 = poles(A2)
    ref = np.sort_complex(np.roots([1, 1, 1]))
    assert np.allclose(r2.poles, ref, atol=1e-14)
    assert r2.classification == "hurwitz" and r2.v == 0


def test_triangular_poles_are_diagonal():
    T = np.triu(np.arange(1.0, 17.0).reshape(4, 4)) * np.array([-1, 1, -1, 1])
    rep = poles(StateSpace(T, np.ones(4), np.ones(4)))
    assert np.allclose(np.sort(rep.poles.real), np.sort(np.diag(T)), atol=1e-12)
    assert rep.v == 2


def test_frequency_response_values():
    loc = frequency_response(A2, [1.0])
    assert loc.values[0] == pytest.approx(1.0 + 0j, abs=1e-14)
    loc = frequency_response(A2, [1.0], kind="sG")
    assert loc.values[0] == pytest.approx(1j, abs=1e-14)


def test_sG_is_jw_times_G():
    g = frequency_response(A2, (1e-2, 1e2, 300))
    sg = frequency_response(A2, (1e-2, 1e2, 300), kind="sG")
    assert np.allclose(sg.values, 1j * g.omega * g.values, rtol=1e-12, atol=0)


def test_conjugate_symmetry_and_rolloff():
    w = np.logspace(-2, 4, 50)
    g = np.array([transfer_eval(A2, 1j * x) for x in w])
    gm = np.array([transfer_eval(A2, -1j * x) for x in w])
    assert np.allclose(gm, np.conj(g), rtol=1e-12)
    assert abs(g[-1]) < 1e-3


def test_pole_on_axis_is_flagged():
    osc = StateSpace([[0, 1], [-4, 0]], [0, 1], [1, 0])
    loc = frequency_response(osc, [1.0, 2.0, 3.0])
    assert 2.0 in loc.flagged and 2.0 not in loc.omega
    assert np.all(np.isfinite(loc.values))
    assert np.all(np.diff(loc.omega) > 0)


def test_model_validation_and_roundtrip():
    with pytest.raises(ModelError):
        StateSpace([[1, 2]], [1], [1])
    with pytest.raises(ModelError):
        StateSpace([[1.0]], [np.nan], [1.0])
    assert StateSpace.from_dict(A2.to_dict()) == A2
    assert relative_degree_one(A2) and not relative_degree_one(A1)
