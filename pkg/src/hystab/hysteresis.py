"""Rate-independent feedback operators ``y -> xi``.

Three operators are provided:

* :class:`SignHysteresis` -- the boundary map ``xi = gamma*y + h*sign(dy)``
  with the sign held on zero increments,
* :class:`StopElement` -- a single Prandtl-Ishlinskii stop with reversal
  slope ``c`` and saturation ``h``,
* :class:`StaticMap` -- memoryless ``xi = g(y)``, linear or tabulated.

Every operator is an immutable value.  ``update(y_new)`` consumes only the
input increment, never a time step, so any monotone reparameterisation of
time yields the same ``(y, xi)`` path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np
from numba import njit

from .errors import InconsistentInitialState, NoOverlap, NonFiniteInput

__all__ = [
    "SignHysteresis", "StopElement", "StaticMap", "OperatorState",
    "update", "initial_state", "is_clockwise", "trace", "DEADBAND",
]

#: increments at or below this magnitude leave the sign memory unchanged
DEADBAND = 1e-12


@njit(cache=True, nogil=True)
def sign_direction(direction, dy, deadband):
    if abs(dy) <= deadband:
        return direction
    return 1.0 if dy > 0 else -1.0


@njit(cache=True, nogil=True)
def stop_state(z, dy, c, h):
    return min(max(z + c * dy, -h), h)


@njit(cache=True, nogil=True)
def table_eval(y, ty, tg):
    # piecewise-linear interpolation, linear extrapolation with end slopes
    m = ty.size
    if y <= ty[0]:
        return tg[0] + (y - ty[0]) * (tg[1] - tg[0]) / (ty[1] - ty[0])
    if y >= ty[m - 1]:
        return tg[m - 1] + (y - ty[m - 1]) * (tg[m - 1] - tg[m - 2]) / (ty[m - 1] - ty[m - 2])
    lo, hi = 0, m - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ty[mid] <= y:
            lo = mid
        else:
            hi = mid
    w = (y - ty[lo]) / (ty[hi] - ty[lo])
    return tg[lo] + w * (tg[hi] - tg[lo])


def _check_input(y):
    if not math.isfinite(y):
        raise NonFiniteInput(f"operator input must be finite, got {y}")


@dataclass(frozen=True)
class SignHysteresis:
    """Boundary clockwise hysteresis ``xi = gamma*y + h*direction``.

    ``direction`` is the sign of the last increment larger than
    :data:`DEADBAND`; 0 means no motion yet, which puts the output on the
    ``gamma*y`` midline.
    """

    gamma: float
    h: float
    direction: float = 0.0
    y_prev: float = 0.0

    kind = "sign"

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")
        if not self.h >= 0:
            raise ValueError("h must be non-negative")
        if self.direction not in (-1.0, 0.0, 1.0):
            raise ValueError("direction must be -1, 0 or +1")

    @property
    def xi(self) -> float:
        return self.gamma * self.y_prev + self.h * self.direction

    def update(self, y_new: float):
        _check_input(y_new)
        d = sign_direction(self.direction, y_new - self.y_prev, DEADBAND)
        state = replace(self, direction=float(d), y_prev=float(y_new))
        return state, state.xi

    def band(self, y: float) -> tuple[float, float]:
        return self.gamma * y - self.h, self.gamma * y + self.h


@dataclass(frozen=True)
class StopElement:
    """Single stop operator: ``z <- clamp(z + c*dy, -h, h)``, ``xi = z``."""

    c: float
    h: float
    z: float = 0.0
    y_prev: float = 0.0

    kind = "stop"

    def __post_init__(self):
        if not (self.c > 0 and self.h > 0):
            raise ValueError("stop element needs c > 0 and h > 0")
        if abs(self.z) > self.h:
            raise ValueError(f"|z| must not exceed h={self.h}")

    @property
    def xi(self) -> float:
        return self.z

    def update(self, y_new: float):
        _check_input(y_new)
        z = stop_state(self.z, y_new - self.y_prev, self.c, self.h)
        state = replace(self, z=float(z), y_prev=float(y_new))
        return state, state.xi

    def band(self, y: float) -> tuple[float, float]:
        return -self.h, self.h


@dataclass(frozen=True, eq=False)
class StaticMap:
    """Memoryless map ``xi = g(y)``.

    With ``table=None`` the map is linear, ``g(y) = gamma*y``.  A table
    ``(ys, gs)`` defines a piecewise-linear ``g`` (extrapolated with the end
    slopes); it must pass through the origin and, if ``sector=(alpha, beta)``
    is given, satisfy ``alpha*y**2 <= g(y)*y <= beta*y**2``.
    """

    gamma: float = 1.0
    table: tuple | None = None
    sector: tuple | None = None
    y_prev: float = 0.0

    kind = "static"

    def __post_init__(self):
        if self.table is None:
            if not self.gamma >= 0:
                raise ValueError("gamma must be non-negative")
            if self.sector is not None and not (self.sector[0] <= self.gamma <= self.sector[1]):
                raise ValueError(f"slope {self.gamma} outside sector {self.sector}")
            return
        ty = np.asarray(self.table[0], dtype=float)
        tg = np.asarray(self.table[1], dtype=float)
        if ty.ndim != 1 or ty.shape != tg.shape or ty.size < 2:
            raise ValueError("table needs two equal-length 1-D arrays with >= 2 nodes")
        if np.any(np.diff(ty) <= 0):
            raise ValueError("table abscissae must be strictly increasing")
        ty.setflags(write=False)
        tg.setflags(write=False)
        object.__setattr__(self, "table", (ty, tg))
        if abs(table_eval(0.0, ty, tg)) > 1e-12 * (1 + np.abs(tg).max()):
            raise ValueError("tabulated map must satisfy g(0) = 0")
        if self.sector is not None:
            lo, hi = self.sector
            probe = np.concatenate([ty, [ty[0] - 1.0, ty[-1] + 1.0]])
            probe = probe[probe != 0]
            ratio = np.array([table_eval(p, ty, tg) / p for p in probe])
            if np.any(ratio < lo - 1e-12) or np.any(ratio > hi + 1e-12):
                raise ValueError(f"tabulated map leaves sector {self.sector}")

    def __eq__(self, other):
        if not isinstance(other, StaticMap):
            return NotImplemented
        same_table = (self.table is None and other.table is None) or (
            self.table is not None and other.table is not None
            and np.array_equal(self.table[0], other.table[0])
            and np.array_equal(self.table[1], other.table[1]))
        return (self.gamma == other.gamma and same_table
                and self.sector == other.sector and self.y_prev == other.y_prev)

    @property
    def is_linear(self) -> bool:
        return self.table is None

    def g(self, y: float) -> float:
        if self.table is None:
            return self.gamma * y
        return float(table_eval(y, self.table[0], self.table[1]))

    @property
    def xi(self) -> float:
        return self.g(self.y_prev)

    def update(self, y_new: float):
        _check_input(y_new)
        state = replace(self, y_prev=float(y_new))
        return state, state.xi

    def band(self, y: float) -> tuple[float, float]:
        v = self.g(y)
        return v, v


OperatorState = Union[SignHysteresis, StopElement, StaticMap]


def update(state: OperatorState, y_new: float):
    """Advance ``state`` by the increment ``y_new - y_prev``; return ``(state, xi)``."""
    return state.update(y_new)


def initial_state(kind: str, params: dict, xi0: float | None = None,
                  y0: float = 0.0, tol: float = 1e-12) -> OperatorState:
    """Build an operator whose output at ``y0`` is ``xi0``.

    For the sign map ``xi0`` must lie on a branch (``gamma*y0 +- h``) or on
    the midline ``gamma*y0`` (direction 0).  For the stop ``|xi0| <= h``.
    ``xi0=None`` picks the neutral state (midline, ``z=0``, or ``g(y0)``).
    """
    _check_input(y0)
    if kind == "sign":
        gamma = float(params.get("gamma", 1.0))
        h = float(params.get("h", 1.0))
        if xi0 is None:
            return SignHysteresis(gamma, h, 0.0, y0)
        scale = tol * (1 + abs(xi0) + abs(gamma * y0) + h)
        for d in (1.0, -1.0, 0.0):
            if abs(gamma * y0 + h * d - xi0) <= scale:
                return SignHysteresis(gamma, h, d, y0)
        raise InconsistentInitialState(
            f"xi0={xi0} is not on the sign-hysteresis branches at y0={y0}")
    if kind == "stop":
        c = float(params.get("c", 1.0))
        h = float(params.get("h", 1.0))
        z = 0.0 if xi0 is None else float(xi0)
        if abs(z) > h * (1 + tol):
            raise InconsistentInitialState(f"|xi0|={abs(z)} exceeds h={h}")
        return StopElement(c, h, max(-h, min(h, z)), y0)
    if kind in ("static", "none"):
        gamma = 0.0 if kind == "none" else float(params.get("gamma", 1.0))
        table = params.get("table")
        state = StaticMap(gamma, table=table, sector=params.get("sector"), y_prev=y0)
        if xi0 is not None and abs(state.xi - xi0) > tol * (1 + abs(xi0)):
            raise InconsistentInitialState(
                f"memoryless map gives {state.xi} at y0={y0}, not {xi0}")
        return state
    raise ValueError(f"unknown operator kind {kind!r}")


def trace(state: OperatorState, ys):
    """Drive ``state`` along ``ys`` and return the exact piecewise-linear path.

    Breakpoints are inserted where the path is not linear between samples:
    the vertical jump at a sign reversal (a repeated ``y`` with the new
    branch value), the saturation onset of a stop element, and the knots of
    a tabulated map.  The
    trapezoidal integral of the returned path is therefore exact.

    Returns
    -------
    path_y, path_xi : ndarray
    state : final operator state
    """
    ys = np.asarray(ys, dtype=float)
    py = [state.y_prev]
    px = [state.xi]
    for y in ys:
        y0 = state.y_prev
        new, xi = state.update(float(y))
        if isinstance(state, SignHysteresis) and new.direction != state.direction:
            py.append(y0)
            px.append(state.gamma * y0 + state.h * new.direction)
        elif isinstance(state, StopElement):
            free = state.z + state.c * (y - y0)
            if abs(free) > state.h and new.z != state.z:
                y_sat = y0 + (new.z - state.z) / state.c
                py.append(y_sat)
                px.append(new.z)
        elif isinstance(state, StaticMap) and not state.is_linear:
            ty = state.table[0]
            knots = ty[(ty > min(y0, y)) & (ty < max(y0, y))]
            for k in (knots if y > y0 else knots[::-1]):
                py.append(float(k))
                px.append(state.g(k))
        py.append(float(y))
        px.append(xi)
        state = new
    return np.array(py), np.array(px), state


def _monotone_branch(y, xi):
    order = np.argsort(y, kind="stable")
    yu, idx = np.unique(y[order], return_index=True)
    return yu, xi[order][idx]


def is_clockwise(path, tol: float = 1e-9) -> bool:
    """Check that the rising branch lies on or above the falling branch.

    Parameters
    ----------
    path : array_like, shape (N, 2)
        ``(y, xi)`` samples with a single input reversal.  Repeated ``y``
        values (vertical jumps) are allowed.

    Raises
    ------
    NoOverlap
        If the two segments share no ``y`` interval.
    """
    p = np.asarray(path, dtype=float)
    y, xi = p[:, 0], p[:, 1]
    s = np.sign(np.diff(y))
    nz = np.flatnonzero(s)
    if nz.size == 0:
        raise NoOverlap("path has no motion")
    first = s[nz[0]]
    rev = nz[s[nz] != first]
    if rev.size == 0:
        raise NoOverlap("path has no reversal")
    r = rev[0]
    seg_a = slice(0, r)
    seg_b = slice(r, None)
    # the reversal sample itself closes the first segment; trailing jump
    # samples at the same y belong to the second
    last_a = r
    while last_a > 0 and y[last_a - 1] == y[r]:
        last_a -= 1
    seg_a = slice(0, last_a + 1)
    ya, xa = _monotone_branch(y[seg_a], xi[seg_a])
    yb, xb = _monotone_branch(y[seg_b], xi[seg_b])
    lo, hi = max(ya[0], yb[0]), min(ya[-1], yb[-1])
    if not hi > lo:
        raise NoOverlap("forward and backward segments share no y interval")
    grid = np.union1d(ya, yb)
    grid = grid[(grid >= lo) & (grid <= hi)]
    fa = np.interp(grid, ya, xa)
    fb = np.interp(grid, yb, xb)
    fwd, bwd = (fa, fb) if first > 0 else (fb, fa)
    scale = tol * (1 + np.abs(xi).max())
    return bool(np.all(fwd >= bwd - scale))
