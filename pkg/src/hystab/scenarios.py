"""Ready-to-run example systems.

``double_integrator`` and ``second_order`` are two-state plants closed by a
sign hysteresis with ``gamma = h = 1``; ``oscillator`` is a pair of unit
masses with a destabilising cross coupling ``K`` and an internal spring
``g``, closed by a sign hysteresis, a stop element, or nothing.

With ``damping_sign="as_printed"`` the oscillator has ``+0.01`` in the (4,4)
position, and with ``coupling_sign="as_printed"`` the element force enters
as ``(0, 0, -1, 1)``.  Either sign makes that term feed energy into the
masses, so both default to ``"dissipative"`` (``-0.01`` and ``(0, 0, 1, -1)``).
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .lti import StateSpace
from .simulate import FeedbackSpec, Scenario

__all__ = [
    "PRESETS", "build_double_integrator", "build_second_order",
    "build_oscillator", "build_preset",
]

#: stop-element stiffness used by the oscillator preset
OSCILLATOR_STOP_C = 100.0


def build_double_integrator(gamma: float = 1.0, h: float = 1.0, **kw) -> Scenario:
    sys = StateSpace([[0.0, 1.0], [0.0, 0.0]], [0.0, 1.0], [1.0, 0.0])
    kw.setdefault("x0", (2.0, 0.0))
    kw.setdefault("invariant_set", (-1.02, 1.02))
    return _two_state("double_integrator", sys, gamma, h, kw)


def build_second_order(gamma: float = 1.0, h: float = 1.0, **kw) -> Scenario:
    sys = StateSpace([[0.0, 1.0], [-1.0, -1.0]], [0.0, 1.0], [0.0, 1.0])
    kw.setdefault("x0", (2.0, 0.0))
    kw.setdefault("invariant_set", (-1.0, 1.0))
    return _two_state("second_order", sys, gamma, h, kw)


def _two_state(name, sys, gamma, h, kw):
    xi0 = kw.pop("xi0", None)
    kind = kw.pop("feedback_kind", "sign")
    fb = FeedbackSpec(kind=kind, gamma=float(gamma), h=float(h), xi0=xi0)
    kw.setdefault("t_end", 50.0)
    kw.setdefault("dt", 1e-3)
    meta = {"preset": name, "gamma": float(gamma), "h": float(h)}
    return Scenario(sys=sys, feedback=fb, name=name, meta=meta, **kw)


def oscillator_model(K: float, g: float = 100.0, damping: float = 0.01,
                     damping_sign: str = "dissipative",
                     coupling_sign: str = "dissipative") -> StateSpace:
    """State ``(q1, q2, v1, v2)``, output ``q1 - q2``."""
    if damping_sign not in ("as_printed", "dissipative"):
        raise ConfigError("damping_sign must be 'as_printed' or 'dissipative'")
    if coupling_sign not in ("as_printed", "dissipative"):
        raise ConfigError("coupling_sign must be 'as_printed' or 'dissipative'")
    d = damping if damping_sign == "as_printed" else -damping
    A = np.array([
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [-g, g - K, 0.0, 0.0],
        [g, -g, 0.0, d],
    ])
    B = [0.0, 0.0, -1.0, 1.0]
    if coupling_sign == "dissipative":
        B = [0.0, 0.0, 1.0, -1.0]
    return StateSpace(A, B, [1.0, -1.0, 0.0, 0.0])


def build_oscillator(K: float, g: float = 100.0, h: float = 50.0,
                     feedback_kind: str = "sign", damping: float = 0.01,
                     c: float = OSCILLATOR_STOP_C,
                     damping_sign: str = "dissipative",
                     coupling_sign: str = "dissipative", **kw) -> Scenario:
    if not K > 0:
        raise ConfigError("K must be positive")
    sys = oscillator_model(K, g, damping, damping_sign, coupling_sign)
    xi0 = kw.pop("xi0", None)
    fb = FeedbackSpec(kind=feedback_kind, gamma=0.0, h=float(h), c=float(c), xi0=xi0)
    kw.setdefault("x0", (1.0, 0.0, 0.0, 0.0))
    kw.setdefault("t_end", 100.0)
    kw.setdefault("dt", 1e-4)
    meta = {"preset": "oscillator", "K": float(K), "g": float(g), "h": float(h),
            "c": float(c), "damping": float(damping), "damping_sign": damping_sign,
            "coupling_sign": coupling_sign}
    return Scenario(sys=sys, feedback=fb, name="oscillator", meta=meta, **kw)


PRESETS = {
    "double_integrator": build_double_integrator,
    "second_order": build_second_order,
    "oscillator": build_oscillator,
}


def build_preset(preset_id: str, **overrides) -> Scenario:
    """Build a preset by id; ``None`` overrides are ignored."""
    try:
        builder = PRESETS[preset_id]
    except KeyError:
        raise ConfigError(f"unknown preset {preset_id!r}; "
                          f"choose from {sorted(PRESETS)}") from None
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if preset_id == "oscillator":
        overrides.setdefault("K", 101.0)
    else:
        for key in ("K", "g", "c", "damping", "damping_sign", "coupling_sign"):
            overrides.pop(key, None)
    try:
        return builder(**overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
