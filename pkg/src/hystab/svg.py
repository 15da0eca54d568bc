"""Minimal polyline SVG plots (no plotting library needed)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

W, H, PAD = 480, 360, 48
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _bounds(arrays):
    v = np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays])
    v = v[np.isfinite(v)]
    if v.size == 0:
        return -1.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi - lo < 1e-12 * (1 + abs(hi)):
        lo, hi = lo - 1, hi + 1
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _thin(x, y, max_points=4000):
    step = max(1, len(x) // max_points)
    return x[::step], y[::step]


def plot(path, series, xlabel="", ylabel="", title="", markers=False):
    """Write ``series`` (a list of ``(x, y)`` pairs) to an SVG file."""
    xlo, xhi = _bounds([s[0] for s in series])
    ylo, yhi = _bounds([s[1] for s in series])

    def sx(v):
        return PAD + (v - xlo) / (xhi - xlo) * (W - 2 * PAD)

    def sy(v):
        return H - PAD - (v - ylo) / (yhi - ylo) * (H - 2 * PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" '
           'fill="none" stroke="black"/>']
    if xlo < 0 < xhi:
        out.append(f'<line x1="{sx(0):.2f}" y1="{PAD}" x2="{sx(0):.2f}" '
                   f'y2="{H - PAD}" stroke="#bbb"/>')
    if ylo < 0 < yhi:
        out.append(f'<line x1="{PAD}" y1="{sy(0):.2f}" x2="{W - PAD}" '
                   f'y2="{sy(0):.2f}" stroke="#bbb"/>')
    for k, (x, y) in enumerate(series):
        x, y = _thin(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        ok = np.isfinite(x) & np.isfinite(y)
        color = COLORS[k % len(COLORS)]
        if markers:
            for a, b in zip(x[ok], y[ok]):
                out.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" '
                           f'fill="none" stroke="{color}"/>')
        else:
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[ok], y[ok]))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                       'stroke-width="1"/>')
    out.append(f'<text x="{W / 2}" y="{PAD - 16}" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{H / 2}" transform="rotate(-90 14 {H / 2})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    for v, anchor in ((xlo, "start"), (xhi, "end")):
        out.append(f'<text x="{sx(v):.2f}" y="{H - PAD + 14}" font-size="10" '
                   f'text-anchor="{anchor}">{v:.3g}</text>')
    for v in (ylo, yhi):
        out.append(f'<text x="{PAD - 4}" y="{sy(v):.2f}" font-size="10" '
                   f'text-anchor="end">{v:.3g}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def phase_portrait(path, traj, i=0, j=1):
    plot(path, [(traj.x[:, i], traj.x[:, j])], f"x{i + 1}", f"x{j + 1}", "phase portrait")


def hysteresis_loop(path, traj):
    plot(path, [(traj.y, traj.xi)], "y", "xi", "operator input/output")


def nyquist(path, locus):
    v = locus.values
    plot(path, [(v.real, v.imag), (v.real, -v.imag)], "Re", "Im",
         f"locus ({locus.kind})")


def pole_map(path, lam):
    lam = np.asarray(lam)
    plot(path, [(lam.real, lam.imag)], "Re", "Im", "poles", markers=True)
