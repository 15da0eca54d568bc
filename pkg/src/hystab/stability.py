"""Equilibrium sets and circle-criterion checks for the hysteresis loop.

The feedback ``xi = g(y) + h*sign-part`` is split into two parallel loops:
``phi_g`` closes the linear plant with the memoryless part ``g`` (sector
``[alpha, beta]``), and ``phi_h`` closes ``s G(s)`` with the relay part,
whose sector is unbounded, so its critical region shrinks to the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidSector, ModelError
from .lti import StateSpace, dc_gain, frequency_response, poles
from .simulate import FeedbackSpec

__all__ = [
    "GammaLine", "EquilibriumReport", "equilibrium", "CriticalDisk",
    "critical_disk", "CriterionVerdict", "circle_check",
    "transformed_loop_check", "winding_number", "feedback_sector",
]

TOUCH_TOL = 1e-6


@dataclass(frozen=True)
class GammaLine:
    """Steady-state line ``y + G(0) xi = 0`` in the ``(y, xi)`` plane."""

    orientation: str  # horizontal (xi = 0), vertical (y = 0) or sloped
    slope: float


@dataclass(frozen=True)
class EquilibriumReport:
    gamma_line: GammaLine
    xi0_range: tuple
    x0_points: list
    invariant_interval: tuple | None
    residual: float

    def to_dict(self) -> dict:
        return {
            "gamma_line": {"orientation": self.gamma_line.orientation,
                           "slope": _json_float(self.gamma_line.slope)},
            "xi0_range": [_json_float(v) for v in self.xi0_range],
            "x0_points": [p.tolist() for p in self.x0_points],
            "invariant_interval": None if self.invariant_interval is None
            else [_json_float(v) for v in self.invariant_interval],
            "residual": self.residual,
        }


def _json_float(v):
    if v is None or math.isfinite(v):
        return v
    return "inf" if v > 0 else "-inf"


def _band(fb: FeedbackSpec):
    """Parameters ``(gamma, h)`` of the set-valued steady-state map."""
    if fb.kind == "sign":
        return fb.gamma, fb.h
    if fb.kind == "stop":
        return 0.0, fb.h
    if fb.kind == "none":
        return 0.0, 0.0
    return fb.gamma, 0.0


def equilibrium(sys: StateSpace, feedback) -> EquilibriumReport:
    """Steady states of the loop closed by ``feedback``.

    At rest the operator output can be anywhere in its band
    ``gamma*y + [-h, h]``, so the steady states form a segment.  With
    nonsingular ``A`` the end points are ``x0 = A^{-1} B xi0`` for the extreme
    admissible ``xi0``; with singular ``A`` only ``xi0 = 0`` is possible and
    the segment runs along the null space of ``A``.
    """
    if isinstance(feedback, dict):
        feedback = FeedbackSpec.from_dict(feedback)
    gamma, h = _band(feedback)
    G0 = dc_gain(sys)
    if math.isinf(G0):
        line = GammaLine("horizontal", 0.0)
    elif G0 == 0:
        line = GammaLine("vertical", math.inf)
    else:
        line = GammaLine("sloped", -1.0 / G0)

    if math.isinf(G0):
        return _singular_equilibrium(sys, line, gamma, h)

    denom = 1.0 + gamma * G0
    if abs(denom) < 1e-12:
        raise ModelError("1 + gamma*G(0) = 0: steady states are not isolated")
    xi_hi = h / denom
    xis = sorted({-xi_hi, xi_hi}) if h > 0 else [0.0]
    points = []
    res = 0.0
    for xi0 in xis:
        x0 = np.linalg.solve(sys.A, sys.B * xi0)
        res = max(res, float(np.max(np.abs(sys.A @ x0 - sys.B * xi0))))
        points.append(x0)
    points.sort(key=lambda p: p[0])
    interval = (float(points[0][0]), float(points[-1][0]))
    return EquilibriumReport(line, (min(xis), max(xis)), points, interval, res)


def _singular_equilibrium(sys, line, gamma, h):
    ns = scipy.linalg.null_space(sys.A)
    if ns.shape[1] != 1:
        return EquilibriumReport(line, (0.0, 0.0), [], None, 0.0)
    v = ns[:, 0]
    cv = float(sys.C @ v)
    if abs(cv) < 1e-12:
        return EquilibriumReport(line, (0.0, 0.0), [], None, 0.0)
    v = v / cv  # unit output along the null direction
    # xi0 = 0 must lie in the band: |gamma*y| <= h
    y_max = math.inf if gamma == 0 else h / abs(gamma)
    if math.isinf(y_max):
        return EquilibriumReport(line, (0.0, 0.0), [], (-math.inf, math.inf), 0.0)
    points = sorted((v * y for y in {-y_max, y_max}), key=lambda p: p[0])
    res = max(float(np.max(np.abs(sys.A @ p))) for p in points)
    interval = (float(points[0][0]), float(points[-1][0]))
    return EquilibriumReport(line, (0.0, 0.0), points, interval, res)


@dataclass(frozen=True)
class CriticalDisk:
    """Forbidden region of the circle criterion in the locus plane."""

    kind: str  # disk, half_plane or point
    center: complex = 0j
    radius: float = 0.0
    boundary_re: float = 0.0

    @property
    def at(self) -> complex:
        return self.center

    def signed_distance(self, z):
        """Distance from ``z`` to the region; negative inside."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "half_plane":
            if self.boundary_re == -math.inf:
                return np.full(z.shape, math.inf)
            return z.real - self.boundary_re
        return np.abs(z - self.center) - self.radius

    def reference_point(self) -> complex | None:
        """A point inside the region, used for winding counts."""
        if self.kind == "half_plane":
            if self.boundary_re == -math.inf:
                return None
            return complex(self.boundary_re - 1.0, 0.0)
        return self.center


def critical_disk(alpha: float, beta: float) -> CriticalDisk:
    """Critical region ``D(alpha, beta)`` for the sector ``[alpha, beta]``.

    >>> critical_disk(0, 2)
    CriticalDisk(kind='half_plane', center=0j, radius=0.0, boundary_re=-0.5)
    >>> critical_disk(1, 1).at
    (-1+0j)
    """
    alpha, beta = float(alpha), float(beta)
    if math.isnan(alpha) or math.isnan(beta) or alpha < 0 or alpha > beta:
        raise InvalidSector(f"need 0 <= alpha <= beta, got [{alpha}, {beta}]")
    if alpha == beta:
        at = 0.0 if math.isinf(beta) else -1.0 / beta if beta > 0 else -math.inf
        if math.isinf(at):
            return CriticalDisk("half_plane", boundary_re=-math.inf)
        return CriticalDisk("point", center=complex(at, 0.0))
    if alpha == 0:
        return CriticalDisk("half_plane", boundary_re=-1.0 / beta)
    a, b = -1.0 / alpha, -1.0 / beta
    return CriticalDisk("disk", center=complex(0.5 * (a + b), 0.0), radius=0.5 * (b - a))


@dataclass(frozen=True)
class CriterionVerdict:
    loop: str
    status: str
    min_distance: float
    encirclements: int
    witness_omega: float | None
    note: str = ""

    def to_dict(self) -> dict:
        return {"loop": self.loop, "status": self.status,
                "min_distance": _json_float(self.min_distance),
                "witness_omega": self.witness_omega,
                "encirclements": self.encirclements, "note": self.note}


def winding_number(values, point: complex) -> int:
    """Counter-clockwise turns of the full Nyquist contour around ``point``.

    ``values`` is the locus for increasing positive frequency; the negative
    frequency half is its mirror image and both ends are joined directly,
    which closes the contour for a proper transfer function.
    """
    v = np.asarray(values, dtype=complex)
    contour = np.concatenate([np.conj(v[::-1]), v, np.conj(v[-1:])])
    ang = np.angle(contour - point)
    turns = np.diff(ang)
    turns = (turns + np.pi) % (2 * np.pi) - np.pi
    return int(round(turns.sum() / (2 * np.pi)))


def circle_check(sys: StateSpace, sector, grid=None, kind: str = "G",
                 loop: str = "phi_g", tol: float = TOUCH_TOL) -> CriterionVerdict:
    """Circle-criterion test of the locus of ``G`` (or ``s G``) against ``D(sector)``.

    Grid points next to imaginary-axis poles are skipped.  The stationary
    value at ``w = 0`` is checked separately when it is finite; a contact
    there is reported as touching with witness 0.
    """
    disk = critical_disk(*sector)
    rep = poles(sys)
    locus = frequency_response(sys, grid, kind)
    vals = locus.values
    if vals.size == 0:
        raise ModelError("frequency locus is empty")
    dist = disk.signed_distance(vals)
    i = int(np.argmin(dist))
    min_d, witness = float(dist[i]), float(locus.omega[i])

    G0 = dc_gain(sys)
    if math.isfinite(G0):
        stat = 0.0 if kind == "sG" else G0
        d0 = float(disk.signed_distance(complex(stat)))
        if d0 <= min_d:
            min_d, witness = d0, 0.0

    band = tol * (1.0 + float(np.max(np.abs(vals))))
    ref = disk.reference_point()
    # a winding count about a point the locus passes through means nothing
    clear = ref is not None and min_d > -band and (
        disk.kind != "point" or min_d > band)
    enc = winding_number(vals, ref) if clear else 0

    def verdict(status, note=""):
        return CriterionVerdict(loop, status, min_d, enc, witness, note)

    if rep.marginal > 0:
        return verdict("violated", "linear part has poles on the imaginary axis")
    if rep.v > 0:
        return verdict("inconclusive_unstable_linear",
                       f"linear part has {rep.v} right-half-plane poles")
    if min_d < -band:
        return verdict("violated", "locus enters the critical region")
    if enc != 0:
        return verdict("violated", f"locus encircles the critical region {enc} times")
    if min_d <= band:
        return verdict("touching", "locus touches the critical region")
    return verdict("satisfied")


def feedback_sector(fb: FeedbackSpec) -> tuple:
    """Sector of the memoryless part of ``fb``."""
    if fb.kind in ("stop", "none"):
        return (0.0, 0.0)
    if fb.kind == "static" and fb.table is not None:
        ty, tg = (np.asarray(a, dtype=float) for a in fb.table)
        nz = ty != 0
        ratios = tg[nz] / ty[nz]
        slopes = np.diff(tg) / np.diff(ty)
        both = np.concatenate([ratios, slopes[[0, -1]]])
        return (max(0.0, float(both.min())), float(both.max()))
    return (fb.gamma, fb.gamma)


def transformed_loop_check(sys: StateSpace, g_sector, h: float, grid=None) -> dict:
    """Check both parallel loops; return ``{phi_g, phi_h, overall}``."""
    if h < 0:
        raise ValueError("h must be non-negative")
    phi_g = circle_check(sys, g_sector, grid, "G", "phi_g")
    if h > 0:
        phi_h = circle_check(sys, (math.inf, math.inf), grid, "sG", "phi_h")
    else:
        phi_h = CriterionVerdict("phi_h", "satisfied", math.inf, 0, None,
                                 "no relay part")
    statuses = {phi_g.status, phi_h.status}
    if statuses == {"satisfied"} and poles(sys).classification == "hurwitz":
        overall = "absolutely_stable"
    elif statuses <= {"satisfied", "touching"}:
        overall = "bounded_output"
    else:
        overall = "not_established"
    return {"phi_g": phi_g, "phi_h": phi_h, "overall": overall}
