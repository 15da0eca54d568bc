"""Fixed-step integration of the closed loop with hysteresis feedback.

The loop is ``xdot = A x + B u``, ``y = C^T x``, ``u = -xi[y]``.  The part of
the feedback that is linear and memoryless (``gamma*y`` of the sign map or of
a linear static map) is folded into the dynamics, ``A_eff = A - gamma B C^T``,
so it is integrated at full RK4 order.  The remaining hysteretic part ``xi_h``
(``h*direction``, the stop state ``z``, or a tabulated ``g``) is held
constant over each step, which makes one step an affine map
``x+ = P x - Gam xi_h`` with the RK4 (or Euler) propagators ``P`` and ``Gam``.

Branch selection for the sign map
---------------------------------
``delayed``
    The operator is updated with the increment ``y_k - y_{k-1}`` and the
    resulting branch is applied over the next step (one-step delayed sign).
``implicit``
    After the delayed update, the branch is re-chosen so that it agrees with
    the sign of ``ydot`` at the end of the step.  If neither branch is
    consistent the loop sticks: ``xi_h`` takes the interior value that gives
    ``ydot = 0``, i.e. the set-valued sign at zero rate.
``auto``
    ``implicit`` when ``C^T B = 0`` and ``delayed`` otherwise.  With
    ``C^T B != 0`` the rate ``ydot`` depends on ``xi`` itself and the delayed
    scheme breaks that algebraic loop; with ``C^T B = 0`` there is no such
    loop and the implicit choice removes the O(dt) chattering at sticking.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from numba import njit

from .energy import EnergyLedger, operator_ledger
from .errors import ConfigError, ModelError, NonFiniteState
from .hysteresis import (DEADBAND, SignHysteresis, StaticMap, StopElement,
                         initial_state, sign_direction, stop_state, table_eval)
from .lti import StateSpace, relative_degree_one

__all__ = [
    "FeedbackSpec", "Scenario", "Trajectory", "LimitCycle", "CycleDiagnostics",
    "Integrator", "Sample", "step", "run", "run_batch", "detect_limit_cycle",
    "converged_to_set", "growth_rate", "random_initial_states",
    "write_trajectory_csv",
]

SOLVERS = ("rk4_fixed", "euler_fixed")
BRANCHES = ("auto", "delayed", "implicit")
_KIND_CODE = {"static": 0, "none": 0, "sign": 1, "stop": 2}


@dataclass(frozen=True)
class FeedbackSpec:
    """Serializable description of the feedback operator."""

    kind: str = "sign"
    gamma: float = 1.0
    h: float = 1.0
    c: float = 1.0
    xi0: float | None = None
    table: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("sign", "stop", "static", "none"):
            raise ConfigError(f"unknown feedback kind {self.kind!r}")

    def operator(self, y0: float):
        params = {"gamma": self.gamma, "h": self.h, "c": self.c, "table": self.table}
        return initial_state(self.kind, params, self.xi0, y0)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "gamma": self.gamma, "h": self.h, "c": self.c,
             "xi0": self.xi0}
        if self.table is not None:
            d["table"] = [list(map(float, self.table[0])), list(map(float, self.table[1]))]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FeedbackSpec":
        if not isinstance(d, dict) or "kind" not in d:
            raise ConfigError("feedback must be an object with a 'kind' key")
        table = d.get("table")
        if table is not None:
            table = (tuple(table[0]), tuple(table[1]))
        try:
            return cls(kind=d["kind"], gamma=float(d.get("gamma", 1.0)),
                       h=float(d.get("h", 1.0)), c=float(d.get("c", 1.0)),
                       xi0=None if d.get("xi0") is None else float(d["xi0"]),
                       table=table)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad feedback entry: {exc}") from None


@dataclass(frozen=True, eq=False)
class Scenario:
    """A complete, serializable experiment."""

    sys: StateSpace
    feedback: FeedbackSpec
    x0: np.ndarray
    t_end: float
    dt: float
    solver: str = "rk4_fixed"
    branch: str = "auto"
    name: str = "scenario"
    seed: int | None = None
    invariant_set: tuple | None = None
    tail_fraction: float = 0.25
    set_tol: float = 1e-3
    cycle_floor: float = 1e-6
    blowup: float = 1e9
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        if x0.size != self.sys.n:
            raise ModelError(f"x0 has {x0.size} entries, model has n={self.sys.n}")
        if not np.all(np.isfinite(x0)):
            raise ModelError("x0 must be finite")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.t_end >= self.dt:
            raise ConfigError("t_end must be at least dt")
        if self.solver not in SOLVERS:
            raise ConfigError(f"solver must be one of {SOLVERS}")
        if self.branch not in BRANCHES:
            raise ConfigError(f"branch must be one of {BRANCHES}")
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        if self.invariant_set is not None:
            object.__setattr__(self, "invariant_set", tuple(map(float, self.invariant_set)))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        d = self.sys.to_dict()
        d.update({
            "name": self.name,
            "feedback": self.feedback.to_dict(),
            "x0": self.x0.tolist(),
            "t_end": self.t_end,
            "dt": self.dt,
            "solver": self.solver,
            "branch": self.branch,
            "seed": self.seed,
            "invariant_set": None if self.invariant_set is None else list(self.invariant_set),
            "tolerances": {"tail_fraction": self.tail_fraction, "set_tol": self.set_tol,
                           "cycle_floor": self.cycle_floor, "blowup": self.blowup},
            "meta": self.meta,
        })
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ConfigError("scenario must be a JSON object")
        sys = StateSpace.from_dict(d)
        if "feedback" not in d:
            raise ConfigError("missing 'feedback'")
        tol = d.get("tolerances") or {}
        try:
            return cls(
                sys=sys,
                feedback=FeedbackSpec.from_dict(d["feedback"]),
                x0=d.get("x0", [0.0] * sys.n),
                t_end=float(d["t_end"]),
                dt=float(d["dt"]),
                solver=d.get("solver", "rk4_fixed"),
                branch=d.get("branch", "auto"),
                name=d.get("name", "scenario"),
                seed=d.get("seed"),
                invariant_set=d.get("invariant_set"),
                tail_fraction=float(tol.get("tail_fraction", 0.25)),
                set_tol=float(tol.get("set_tol", 1e-3)),
                cycle_floor=float(tol.get("cycle_floor", 1e-6)),
                blowup=float(tol.get("blowup", 1e9)),
                meta=d.get("meta") or {},
            )
        except KeyError as exc:
            raise ConfigError(f"missing scenario key {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, (ConfigError, ModelError)):
                raise
            raise ConfigError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        return cls.from_dict(d)


def _propagators(A, B, dt, solver):
    n = A.shape[0]
    M = dt * A
    eye = np.eye(n)
    if solver == "euler_fixed":
        return eye + M, dt * B
    # classical RK4 applied to xdot = A x + B v with v held over the step
    M2 = M @ M
    M3 = M2 @ M
    P = eye + M + M2 / 2 + M3 / 6 + M3 @ M / 24
    Gam = dt * (eye + M / 2 + M2 / 6 + M3 / 24) @ B
    return P, Gam


@njit(cache=True, nogil=True)
def _advance(x, P, Gam, C, cAP, slope, code, implicit, gamma_lin, h, c,
             d, z, yp, ty, tg):
    y = 0.0
    for i in range(x.size):
        y += C[i] * x[i]
    dy = y - yp
    if code == 1:
        d = sign_direction(d, dy, DEADBAND)
        xh = h * d
        if implicit and h > 0:
            a = 0.0
            for i in range(x.size):
                a += cAP[i] * x[i]
            s_hi = a - slope * h
            s_lo = a + slope * h
            if slope > 0:
                if s_hi > 0:
                    xh = h
                    d = 1.0
                elif s_lo < 0:
                    xh = -h
                    d = -1.0
                else:
                    xh = a / slope
            else:
                hi_ok = s_hi > 0
                lo_ok = s_lo < 0
                if hi_ok and not lo_ok:
                    xh = h
                    d = 1.0
                elif lo_ok and not hi_ok:
                    xh = -h
                    d = -1.0
    elif code == 2:
        z = stop_state(z, dy, c, h)
        xh = z
    elif code == 3:
        xh = table_eval(y, ty, tg)
    else:
        xh = 0.0
    xn = P @ x - Gam * xh
    return xn, y, gamma_lin * y + xh, d, z


@njit(cache=True, nogil=True)
def _integrate(x0, n_steps, P, Gam, C, cAP, slope, code, implicit, gamma_lin,
               h, c, d, z, yp, ty, tg, blowup):
    n = x0.size
    X = np.empty((n_steps + 1, n))
    XI = np.empty(n_steps + 1)
    MEM = np.empty(n_steps + 1)
    x = x0.copy()
    last = n_steps
    blew = False
    for k in range(n_steps + 1):
        X[k] = x
        xn, y, xi, d, z = _advance(x, P, Gam, C, cAP, slope, code, implicit,
                                   gamma_lin, h, c, d, z, yp, ty, tg)
        XI[k] = xi
        MEM[k] = d if code == 1 else z
        yp = y
        if k == n_steps:
            break
        big = 0.0
        for i in range(n):
            v = abs(xn[i])
            if not v <= blowup:
                big = math.inf
                break
            if v > big:
                big = v
        if big > blowup:
            last = k
            blew = True
            break
        x = xn
    return X[:last + 1], XI[:last + 1], MEM[:last + 1], blew, d, z, yp


class Sample(NamedTuple):
    x: np.ndarray
    y: float
    xi: float
    u: float


class Integrator:
    """Precomputed one-step map for a scenario."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        sys = scenario.sys
        fb = scenario.feedback
        self.code = _KIND_CODE[fb.kind]
        if self.code == 0 and fb.table is not None:
            self.code = 3
        if fb.kind == "none":
            gamma_lin = 0.0
        elif self.code in (0, 1):
            gamma_lin = fb.gamma
        else:
            gamma_lin = 0.0
        self.gamma_lin = float(gamma_lin)
        A_eff = sys.A - self.gamma_lin * np.outer(sys.B, sys.C)
        self.P, self.Gam = _propagators(A_eff, sys.B, scenario.dt, scenario.solver)
        self.C = np.ascontiguousarray(sys.C)
        cA = sys.C @ A_eff
        self.cAP = np.ascontiguousarray(cA @ self.P)
        # ydot at the end of a step falls by `slope` per unit of xi_h
        self.slope = float(cA @ self.Gam + sys.C @ sys.B)
        branch = scenario.branch
        if branch == "auto":
            branch = "delayed" if relative_degree_one(sys) else "implicit"
        self.branch = branch
        self.implicit = branch == "implicit"
        if self.code == 3:
            self.ty = np.ascontiguousarray(fb.table[0], dtype=float)
            self.tg = np.ascontiguousarray(fb.table[1], dtype=float)
        else:
            self.ty = self.tg = np.zeros(2)
        self.h = float(fb.h) if fb.kind in ("sign", "stop") else 0.0
        self.c = float(fb.c)

    def initial_operator(self):
        y0 = float(self.C @ self.scenario.x0)
        return self.scenario.feedback.operator(y0)

    def _memory(self, op):
        if isinstance(op, SignHysteresis):
            return op.direction, 0.0, op.y_prev
        if isinstance(op, StopElement):
            return 0.0, op.z, op.y_prev
        if isinstance(op, StaticMap):
            return 0.0, 0.0, op.y_prev
        raise TypeError(f"unsupported operator {type(op).__name__}")

    def step(self, x, op):
        """Advance one step; return ``(x_next, op_next, sample_at_x)``."""
        x = np.ascontiguousarray(x, dtype=float)
        d, z, yp = self._memory(op)
        xn, y, xi, d, z = _advance(x, self.P, self.Gam, self.C, self.cAP, self.slope,
                                   self.code, self.implicit, self.gamma_lin, self.h,
                                   self.c, d, z, yp, self.ty, self.tg)
        if isinstance(op, SignHysteresis):
            op = replace(op, direction=float(d), y_prev=float(y))
        elif isinstance(op, StopElement):
            op = replace(op, z=float(z), y_prev=float(y))
        else:
            op = replace(op, y_prev=float(y))
        if not np.all(np.abs(xn) <= self.scenario.blowup):
            raise NonFiniteState(f"state left the blow-up bound: {xn}")
        return xn, op, Sample(x, float(y), float(xi), -float(xi))

    def integrate(self, x0=None, op=None, n_steps=None):
        x0 = self.scenario.x0 if x0 is None else np.asarray(x0, dtype=float)
        op = self.initial_operator() if op is None else op
        n_steps = self.scenario.n_steps if n_steps is None else n_steps
        d, z, yp = self._memory(op)
        return _integrate(np.ascontiguousarray(x0), n_steps, self.P, self.Gam, self.C,
                          self.cAP, self.slope, self.code, self.implicit,
                          self.gamma_lin, self.h, self.c, d, z, yp, self.ty, self.tg,
                          self.scenario.blowup)


def step(scenario: Scenario, x_k, op_state):
    """One fixed step of the closed loop (see :class:`Integrator`).

    The operator is updated with ``y_k`` and its output is held across the
    step.  Raises :class:`~hystab.errors.NonFiniteState` past the blow-up bound.
    """
    return Integrator(scenario).step(x_k, op_state)


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    xi: np.ndarray
    u: np.ndarray
    ledger: EnergyLedger
    reversal_times: np.ndarray
    memory: np.ndarray
    blew_up: bool = False

    @property
    def V(self) -> np.ndarray:
        return self.ledger.stored

    @property
    def dissipated(self) -> np.ndarray:
        return self.ledger.dissipated


@dataclass(frozen=True)
class LimitCycle:
    period: float
    amplitude: np.ndarray


@dataclass(frozen=True)
class CycleDiagnostics:
    bounded: bool
    limit_cycle: LimitCycle | None
    final_set_membership: bool | None
    growth_rate: float

    def to_dict(self) -> dict:
        lc = self.limit_cycle
        return {
            "bounded": self.bounded,
            "period": None if lc is None else lc.period,
            "amplitude": None if lc is None else lc.amplitude.tolist(),
            "growth_rate": self.growth_rate,
            "set_verdict": self.final_set_membership,
        }


def _reversal_times(t, y):
    dy = np.diff(y)
    s = np.sign(np.where(np.abs(dy) > DEADBAND, dy, 0.0))
    idx = np.flatnonzero(s)
    if idx.size < 2:
        return np.empty(0)
    flips = idx[1:][s[idx[1:]] != s[idx[:-1]]]
    return t[flips]


def growth_rate(t, x, windows: int = 20) -> float:
    """Exponential rate (1/s) fitted to the windowed maximum of ``||x||``."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x.reshape(len(t), -1), axis=1)
    if len(t) < 2 * windows:
        windows = max(2, len(t) // 2)
    edges = np.linspace(0, len(t), windows + 1).astype(int)
    tc, env = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            tc.append(t[a:b].mean())
            env.append(norm[a:b].max())
    env = np.maximum(np.array(env), 1e-300)
    if len(tc) < 2:
        return 0.0
    return float(np.polyfit(np.array(tc), np.log(env), 1)[0])


def detect_limit_cycle(t, x, tail_fraction: float = 0.25, index: int = 1,
                       floor: float = 1e-6) -> LimitCycle | None:
    """Estimate period and amplitude of a sustained oscillation in the tail.

    The period is the mean spacing of upward zero crossings of
    ``x[:, index] - mean``; the amplitude is half the peak-to-peak of every
    state.  Returns ``None`` if the signal amplitude is below ``floor`` or
    fewer than two full periods are visible.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
        index = 0
    start = int(len(t) * (1 - tail_fraction))
    tt, xx = t[start:], x[start:]
    if len(tt) < 4:
        return None
    amp = 0.5 * np.ptp(xx, axis=0)
    if amp[index] < floor:
        return None
    sig = xx[:, index] - xx[:, index].mean()
    up = np.flatnonzero((sig[:-1] < 0) & (sig[1:] >= 0))
    if up.size < 3:
        return None
    frac = -sig[up] / (sig[up + 1] - sig[up])
    tc = tt[up] + frac * (tt[up + 1] - tt[up])
    return LimitCycle(float(np.mean(np.diff(tc))), amp)


def converged_to_set(x, interval, tol: float = 1e-3, index: int = 0,
                     window: float = 0.05) -> bool:
    """True if the last ``window`` of samples lies in the segment set.

    The set is ``{x : x[index] in interval, x[j] = 0 for j != index}``,
    inflated by ``tol``.
    """
    if isinstance(x, Trajectory):
        x = x.x
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    k = max(1, int(math.ceil(len(x) * window)))
    tail = x[-k:]
    lo, hi = interval
    on_axis = np.all(np.abs(np.delete(tail, index, axis=1)) < tol)
    inside = np.all((tail[:, index] >= lo - tol) & (tail[:, index] <= hi + tol))
    return bool(on_axis and inside)


def run(scenario: Scenario) -> tuple[Trajectory, CycleDiagnostics]:
    """Integrate ``scenario`` to ``t_end`` or until the state blows up."""
    integ = Integrator(scenario)
    op0 = integ.initial_operator()
    X, XI, MEM, blew, *_ = integ.integrate(op=op0)
    t = scenario.dt * np.arange(len(X))
    y = X @ scenario.sys.C
    ledger = operator_ledger(op0, y)
    ledger = EnergyLedger(ledger.supplied[1:], ledger.stored[1:], ledger.dissipated[1:])
    traj = Trajectory(t=t, x=X, y=y, xi=XI, u=-XI, ledger=ledger,
                      reversal_times=_reversal_times(t, y), memory=MEM, blew_up=blew)
    cycle = None
    if not blew:
        cycle = detect_limit_cycle(t, X, scenario.tail_fraction,
                                   index=1 if scenario.sys.n > 1 else 0,
                                   floor=scenario.cycle_floor)
    membership = None
    if scenario.invariant_set is not None:
        membership = (not blew) and converged_to_set(X, scenario.invariant_set,
                                                     scenario.set_tol)
    diag = CycleDiagnostics(bounded=not blew, limit_cycle=cycle,
                            final_set_membership=membership,
                            growth_rate=growth_rate(t, X))
    return traj, diag


def random_initial_states(count: int, box: float, dim: int, seed: int) -> np.ndarray:
    """Uniform draws on ``[-box, box]^dim``, one row per run."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-box, box, size=(count, dim))


def run_batch(scenarios, workers: int = 1):
    """Run scenarios independently; results keep the input order."""
    scenarios = list(scenarios)
    if workers <= 1:
        return [run(s) for s in scenarios]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, scenarios))


def write_trajectory_csv(path, traj: Trajectory, stride: int = 1):
    """CSV with header ``t,x1..xn,y,xi,u,V,dissipated`` (every ``stride``-th row)."""
    n = traj.x.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + ["y", "xi", "u", "V", "dissipated"]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for k in range(0, len(traj.t), stride):
            row = [traj.t[k], *traj.x[k], traj.y[k], traj.xi[k], traj.u[k],
                   traj.ledger.stored[k], traj.ledger.dissipated[k]]
            out.writerow([repr(float(v)) for v in row])
