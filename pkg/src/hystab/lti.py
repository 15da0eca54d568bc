"""Single-input single-output state-space models.

The linear part of the closed loop is ``xdot = A x + B u``, ``y = C^T x``
with transfer function ``G(s) = C^T (sI - A)^{-1} B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import EigFailure, ModelError, SingularAtS

__all__ = [
    "StateSpace", "PoleReport", "FrequencyLocus", "transfer_eval", "dc_gain",
    "poles", "frequency_response", "default_grid", "relative_degree_one",
]

#: condition-number cap beyond which ``sI - A`` is treated as singular
COND_CAP = 1e12
#: |Re(lambda)| < MARGINAL_TOL * (1 + |lambda|) counts as on the jw axis
MARGINAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StateSpace:
    """SISO linear dynamics ``(A, B, C)``.

    ``B`` and ``C`` are stored as flat length-``n`` arrays.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float).reshape(-1)
        C = np.array(self.C, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise ModelError(f"A must be a non-empty square matrix, got shape {A.shape}")
        n = A.shape[0]
        if B.shape != (n,) or C.shape != (n,):
            raise ModelError(
                f"B and C must have {n} entries, got {B.size} and {C.size}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))
                and np.all(np.isfinite(C))):
            raise ModelError("model entries must be finite")
        for arr in (A, B, C):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def __eq__(self, other):
        if not isinstance(other, StateSpace):
            return NotImplemented
        return (np.array_equal(self.A, other.A) and np.array_equal(self.B, other.B)
                and np.array_equal(self.C, other.C))

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "StateSpace":
        try:
            return cls(d["A"], d["B"], d["C"])
        except KeyError as exc:
            raise ModelError(f"missing model key {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(str(exc)) from None

    def scaled_output(self, k: float) -> "StateSpace":
        """Return the system with transfer function ``k * G(s)``."""
        return StateSpace(self.A, self.B, k * self.C)


@dataclass(frozen=True)
class PoleReport:
    poles: np.ndarray
    v: int
    marginal: int
    classification: str

    @property
    def max_real(self) -> float:
        return float(np.max(self.poles.real))


@dataclass(frozen=True)
class FrequencyLocus:
    """Sampled frequency response.

    ``omega`` is strictly increasing and every entry of ``values`` is finite;
    grid points too close to a pole are listed in ``flagged`` instead.
    """

    omega: np.ndarray
    values: np.ndarray
    kind: str
    flagged: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def samples(self):
        return list(zip(self.omega.tolist(), self.values.tolist()))


def relative_degree_one(sys: StateSpace) -> bool:
    """True if the input acts directly on the output rate (``C^T B != 0``)."""
    return abs(float(sys.C @ sys.B)) > 1e-14 * (1 + np.abs(sys.C).max() * np.abs(sys.B).max())


def transfer_eval(sys: StateSpace, s: complex, cond_cap: float = COND_CAP) -> complex:
    """Evaluate ``G(s) = C^T (sI - A)^{-1} B`` by an LU solve.

    Raises
    ------
    SingularAtS
        If ``s`` is numerically an eigenvalue of ``A``.
    """
    M = s * np.eye(sys.n) - sys.A
    if np.linalg.cond(M) > cond_cap:
        raise SingularAtS(f"sI - A is singular at s={s}")
    lu = scipy.linalg.lu_factor(M.astype(complex), check_finite=False)
    x = scipy.linalg.lu_solve(lu, sys.B.astype(complex), check_finite=False)
    return complex(sys.C @ x)


def dc_gain(sys: StateSpace, cond_cap: float = COND_CAP) -> float:
    """Static gain ``G(0) = -C^T A^{-1} B``; ``math.inf`` when ``A`` is singular."""
    try:
        return transfer_eval(sys, 0.0, cond_cap).real
    except SingularAtS:
        return math.inf


def poles(sys: StateSpace, tol: float = MARGINAL_TOL) -> PoleReport:
    """Eigenvalues of ``A`` with a right-half-plane count and a stability class."""
    try:
        lam = np.linalg.eigvals(sys.A)
    except np.linalg.LinAlgError as exc:
        raise EigFailure(str(exc)) from None
    lam = np.sort_complex(lam)
    on_axis = np.abs(lam.real) < tol * (1 + np.abs(lam))
    v = int(np.sum((lam.real > 0) & ~on_axis))
    marginal = int(np.sum(on_axis))
    if v > 0:
        cls = "unstable"
    elif marginal > 0:
        cls = "marginal"
    else:
        cls = "hurwitz"
    return PoleReport(lam, v, marginal, cls)


def default_grid(lo: float = 1e-3, hi: float = 1e3, num: int = 2000) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), num)


def frequency_response(sys: StateSpace, grid=None, kind: str = "G",
                       pole_distance: float = 1e-9) -> FrequencyLocus:
    """Sample ``G(jw)`` (``kind="G"``) or ``jw G(jw)`` (``kind="sG"``).

    Parameters
    ----------
    grid : array_like or tuple, optional
        Explicit frequencies in rad/s, or ``(lo, hi, num)`` for a log grid.
        Defaults to 2000 log-spaced points on [1e-3, 1e3].
    pole_distance : float
        Points with ``|jw - lambda| < pole_distance * (1 + |lambda|)`` for
        some pole ``lambda`` are flagged and left out of the locus.
    """
    if kind not in ("G", "sG"):
        raise ValueError(f"kind must be 'G' or 'sG', got {kind!r}")
    if grid is None:
        omega = default_grid()
    elif isinstance(grid, tuple) and len(grid) == 3:
        omega = default_grid(*grid)
    else:
        omega = np.asarray(grid, dtype=float).reshape(-1)
    if omega.size == 0:
        raise ValueError("frequency grid is empty")
    omega = np.unique(omega)

    lam = np.linalg.eigvals(sys.A)
    s = 1j * omega
    near = np.abs(s[:, None] - lam[None, :]) < pole_distance * (1 + np.abs(lam[None, :]))
    bad = near.any(axis=1)
    keep = ~bad
    s_ok = s[keep]
    M = s_ok[:, None, None] * np.eye(sys.n) - sys.A
    rhs = np.broadcast_to(sys.B.astype(complex), (s_ok.size, sys.n))[..., None]
    X = np.linalg.solve(M, rhs)[..., 0]
    G = X @ sys.C
    if kind == "sG":
        G = s_ok * G
    finite = np.isfinite(G)
    flagged = np.concatenate([omega[bad], omega[keep][~finite]])
    return FrequencyLocus(omega[keep][finite], G[finite], kind, np.sort(flagged))
