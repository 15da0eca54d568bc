"""Energy bookkeeping for the feedback operators.

The power flowing into the operator is ``w = ydot * xi`` and the supplied
energy along an input path is the line integral of ``xi dy``.  For each
operator the recoverable (stored) energy is known in closed form

* sign map and linear static map: ``gamma*y**2/2``
* stop element: ``z**2/(2c)``

so dissipation can be computed two ways: as supplied minus stored, and
directly from the operator's own loss mechanism (``h*|dy|`` for the sign
map, ``h*|plastic slip|`` for the stop).  :func:`operator_ledger` returns
both so callers can check that they agree.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import OpenPath
from .hysteresis import (DEADBAND, SignHysteresis, StaticMap, StopElement,
                         sign_direction, stop_state, table_eval)

__all__ = [
    "supply_rate", "path_energy", "cumulative_path_energy", "loop_area",
    "storage_value", "path_storage", "EnergyLedger", "operator_ledger",
    "DissipationReport", "verify_dissipation", "write_energy_csv",
]


def supply_rate(y_dot, xi):
    """Instantaneous power ``ydot * xi`` delivered to the operator."""
    return np.multiply(y_dot, xi)


def cumulative_path_energy(y, xi) -> np.ndarray:
    """Running trapezoidal integral of ``xi dy``, starting at 0.

    Samples sharing the same ``y`` (vertical jumps) contribute nothing.
    """
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    seg = 0.5 * (xi[1:] + xi[:-1]) * np.diff(y)
    return np.concatenate([[0.0], np.cumsum(seg)])


def path_energy(y, xi) -> float:
    """Trapezoidal line integral of ``xi dy`` along the sampled path."""
    return float(cumulative_path_energy(y, xi)[-1])


def loop_area(y, xi, tol: float = 1e-9) -> float:
    """Energy lost on a closed input cycle, ``oint xi dy``.

    Positive for clockwise loops.  ``y`` must end where it started.
    """
    y = np.asarray(y, dtype=float)
    scale = tol * (1 + np.abs(y).max())
    if abs(y[-1] - y[0]) > scale:
        raise OpenPath(f"cycle does not close in y: {y[0]} -> {y[-1]}")
    return path_energy(y, xi)


def storage_value(gamma: float, y: float, dissipated_so_far: float = 0.0) -> float:
    """Recoverable spring energy minus the energy already dissipated."""
    if dissipated_so_far < 0:
        raise ValueError("dissipated energy cannot be negative")
    return 0.5 * gamma * y * y - dissipated_so_far


def path_storage(gamma, y, supplied):
    """``gamma*y**2/2 - int xi dy`` along the traversed path.

    For the boundary sign map its time derivative is ``-h*|ydot|``.
    """
    return 0.5 * gamma * np.square(y) - supplied


@njit(cache=True, nogil=True)
def _ledger_kernel(code, gamma, h, c, d0, z0, y0, ys, ty, tg):
    # returns per-sample cumulative supplied, stored, loss (direct route)
    m = ys.size
    sup = np.zeros(m + 1)
    sto = np.zeros(m + 1)
    los = np.zeros(m + 1)
    d, z, yp = d0, z0, y0
    if code == 1:
        sto[0] = 0.5 * gamma * yp * yp
    elif code == 2:
        sto[0] = z * z / (2 * c)
    elif code == 0:
        sto[0] = 0.5 * gamma * yp * yp
    for k in range(m):
        y = ys[k]
        dy = y - yp
        if code == 1:
            d = sign_direction(d, dy, DEADBAND)
            w = 0.5 * gamma * (y * y - yp * yp) + h * d * dy
            loss = h * d * dy
            stored = 0.5 * gamma * y * y
        elif code == 2:
            z1 = stop_state(z, dy, c, h)
            dy_el = (z1 - z) / c
            dy_pl = dy - dy_el
            w = (z1 * z1 - z * z) / (2 * c) + z1 * dy_pl
            loss = z1 * dy_pl
            z = z1
            stored = z * z / (2 * c)
        elif code == 0:
            w = 0.5 * gamma * (y * y - yp * yp)
            loss = 0.0
            stored = 0.5 * gamma * y * y
        else:
            # tabulated map: exact integral of the interpolant
            w = 0.0
            a = yp
            lo = min(yp, y)
            hi = max(yp, y)
            pts = [lo]
            for j in range(ty.size):
                if lo < ty[j] < hi:
                    pts.append(ty[j])
            pts.append(hi)
            for j in range(len(pts) - 1):
                w += 0.5 * (table_eval(pts[j], ty, tg) + table_eval(pts[j + 1], ty, tg)) * (pts[j + 1] - pts[j])
            if y < a:
                w = -w
            loss = 0.0
            stored = sto[k] + w
        sup[k + 1] = sup[k] + w
        los[k + 1] = los[k] + loss
        sto[k + 1] = stored
        yp = y
    return sup, sto, los


@dataclass(frozen=True)
class EnergyLedger:
    """Cumulative energy balance sampled along an input path.

    ``supplied[k]`` is the work done on the operator up to sample ``k``,
    ``stored[k]`` its recoverable energy, and ``dissipated[k]`` the loss
    computed directly from the operator's loss mechanism.  The balance
    ``supplied - (stored - stored[0]) - dissipated`` should be zero.
    """

    supplied: np.ndarray
    stored: np.ndarray
    dissipated: np.ndarray

    @property
    def residual(self) -> np.ndarray:
        return self.supplied - (self.stored - self.stored[0]) - self.dissipated

    @property
    def scale(self) -> float:
        return 1.0 + float(np.max(np.abs(self.supplied)))


def _operator_code(state):
    if isinstance(state, SignHysteresis):
        return 1, state.gamma, state.h, 1.0, state.direction, 0.0
    if isinstance(state, StopElement):
        return 2, 0.0, state.h, state.c, 0.0, state.z
    if isinstance(state, StaticMap):
        return (0 if state.is_linear else 3), state.gamma, 0.0, 1.0, 0.0, 0.0
    raise TypeError(f"unsupported operator {type(state).__name__}")


def operator_ledger(state, ys) -> EnergyLedger:
    """Replay ``state`` along ``ys`` and tabulate its energy balance.

    Each increment is integrated exactly on the branch the operator takes for
    that increment, so the sign map's jump at a reversal contributes no
    energy.  Entry 0 is the initial state, entry ``k`` follows ``ys[k-1]``.
    """
    ys = np.ascontiguousarray(ys, dtype=float)
    code, gamma, h, c, d0, z0 = _operator_code(state)
    if code == 3:
        ty, tg = state.table
    else:
        ty = tg = np.zeros(2)
    sup, sto, los = _ledger_kernel(code, gamma, h, c, d0, z0, state.y_prev, ys,
                                   np.ascontiguousarray(ty), np.ascontiguousarray(tg))
    return EnergyLedger(sup, sto, los)


@dataclass(frozen=True)
class DissipationReport:
    max_violation: float
    """Largest ``V(t2) - V(t1) - int_{t1}^{t2} w dt`` over sampled pairs."""
    dissipated: float
    supplied: float
    rate_error: float | None
    """Max ``|dV/dt + h|ydot||`` off reversals (sign map only)."""
    passed: bool


def verify_dissipation(t, y, xi, gamma: float, h: float | None = None,
                       storage=None, tol: float = 1e-8,
                       rate_tol: float | None = None) -> DissipationReport:
    """Check the dissipation inequality on a sampled ``(t, y, xi)`` record.

    Parameters
    ----------
    t, y, xi : array_like
        Time stamps and operator input/output.  Vertical jumps should be
        present as repeated ``y`` samples (see :func:`hystab.hysteresis.trace`).
    gamma : float
        Slope of the recoverable part; storage defaults to ``gamma*y**2/2``.
    h : float, optional
        Loop half-height.  When given, the discrete rate of the
        path-dependent storage ``gamma*y**2/2 - int xi dy`` is compared with
        ``-h*|ydot|`` away from reversals.
    storage : array_like, optional
        Explicit storage samples (overrides ``gamma``).

    The inequality ``V(t2) - V(t1) <= int w`` for all ``t1 < t2`` is
    equivalent to the running loss ``supplied - (V - V0)`` never decreasing;
    ``max_violation`` is the largest decrease found.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    sup = cumulative_path_energy(y, xi)
    V = 0.5 * gamma * y**2 if storage is None else np.asarray(storage, dtype=float)
    loss = sup - (V - V[0])
    running_max = np.maximum.accumulate(loss)
    max_violation = float(np.max(running_max - loss))
    scale = tol * (1 + np.abs(sup).max())

    rate_error = None
    if h is not None:
        Vp = path_storage(gamma, y, sup)
        dt = np.diff(t)
        dy = np.diff(y)
        ok = dt > 0
        s = np.sign(dy)
        # skip samples adjacent to a reversal or a jump
        smooth = np.ones_like(ok)
        smooth[1:] &= s[1:] == s[:-1]
        smooth[:-1] &= s[:-1] == s[1:]
        smooth &= ok & (s != 0)
        if np.any(smooth):
            rate = np.diff(Vp)[smooth] / dt[smooth]
            expect = -h * np.abs(dy[smooth] / dt[smooth])
            rate_error = float(np.max(np.abs(rate - expect)))
        else:
            rate_error = 0.0
    passed = max_violation <= scale and loss[-1] >= -scale
    if rate_error is not None and rate_tol is not None:
        passed = passed and rate_error <= rate_tol
    return DissipationReport(max_violation, float(loss[-1]), float(sup[-1]),
                             rate_error, bool(passed))


def write_energy_csv(path, t, y, xi, w, V, dissipated):
    """Write the energy report with columns ``t,y,xi,w,V,dissipated``."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["t", "y", "xi", "w", "V", "dissipated"])
        for row in zip(t, y, xi, w, V, dissipated):
            out.writerow([repr(float(v)) for v in row])
