"""CSV and SVG emission for run results."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .simulate import Comparison, RunResult


def fmt(v: float) -> str:
    """17 significant digits; negative zero printed as ``0``."""
    v = float(v) + 0.0
    if math.isinf(v) or math.isnan(v):
        return ""
    return format(v, ".17g")


def _names(prefix, k):
    return [f"{prefix}{i + 1}" for i in range(k)]


def csv_header(r: RunResult) -> list[str]:
    m = r.scenario.m
    cols = r.columns
    head = ["t", *_names("y", m), *_names("ydot", m)]
    if "theta_norm" in cols:
        head += _names("xi", m)
    else:
        head += _names("z1_", m) + _names("z2_", m)
    head += _names("eta", cols["eta"].shape[1])
    head += [*_names("u", m), *_names("e", m), "phi", "funnel_radius", "occupancy"]
    head += ["theta_norm"] if "theta_norm" in cols else ["k0", "k1", "k2"]
    return head


def csv_rows(r: RunResult) -> list[list[str]]:
    cols = r.columns
    rows = []
    for k, t in enumerate(r.times):
        phi = float(cols["phi"][k])
        occ = phi * float(np.linalg.norm(cols["e"][k]))
        row = [fmt(t)]
        for name in ("y", "ydot", "ctrl", "eta", "u", "e"):
            row += [fmt(v) for v in cols[name][k]]
        row += [fmt(phi), "" if phi == 0.0 else fmt(1.0 / phi), fmt(occ)]
        if "theta_norm" in cols:
            row.append(fmt(cols["theta_norm"][k]))
        else:
            row += [fmt(v) for v in cols["gains"][k]]
        rows.append(row)
    return rows


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def render_csv(r: RunResult) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(csv_header(r))
    w.writerows(csv_rows(r))
    if not r.completed:
        buf.write(f"# status: {r.status}\n")
    return buf.getvalue()


def write_csv(r: RunResult, path) -> None:
    """One row per output sample; partial runs end with a ``# status`` line."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(r))


def write_pair_csv(c: Comparison, path) -> None:
    """Both runs side by side, columns prefixed ``a_`` and ``b_``."""
    n = min(len(c.a.times), len(c.b.times))
    ha, hb = csv_header(c.a)[1:], csv_header(c.b)[1:]
    ra, rb = csv_rows(c.a), csv_rows(c.b)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["t"] + [f"a_{h}" for h in ha] + [f"b_{h}" for h in hb])
        for k in range(n):
            w.writerow(ra[k] + rb[k][1:])
        for tag, r in (("a", c.a), ("b", c.b)):
            if not r.completed:
                fh.write(f"# status {tag}: {r.status}\n")


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

WIDTH, PANEL_H, MARGIN_L, MARGIN_R, MARGIN_T, GAP = 720, 240, 70, 20, 30, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


class _Panel:
    def __init__(self, top, t0, t1, lo, hi):
        self.top, self.t0, self.t1 = top, t0, t1
        if hi <= lo:
            lo, hi = lo - 1.0, hi + 1.0
        self.lo, self.hi = lo, hi
        self.w = WIDTH - MARGIN_L - MARGIN_R

    def x(self, t):
        return MARGIN_L + (t - self.t0) / (self.t1 - self.t0) * self.w

    def y(self, v):
        v = min(max(v, self.lo), self.hi)
        return self.top + (self.hi - v) / (self.hi - self.lo) * PANEL_H

    def path(self, ts, vs):
        pts = " ".join(f"{self.x(t):.2f},{self.y(v):.2f}" for t, v in zip(ts, vs))
        return pts

    def frame(self, title, ylabel):
        out = [
            f'<rect x="{MARGIN_L}" y="{self.top}" width="{self.w}" height="{PANEL_H}" '
            'fill="none" stroke="#333"/>',
            f'<text x="{MARGIN_L}" y="{self.top - 8}" font-size="13">{_esc(title)}</text>',
            f'<text x="14" y="{self.top + PANEL_H / 2:.1f}" font-size="12" '
            f'transform="rotate(-90 14 {self.top + PANEL_H / 2:.1f})">{_esc(ylabel)}</text>',
        ]
        for v in np.linspace(self.lo, self.hi, 5):
            yy = self.y(v)
            out.append(
                f'<line x1="{MARGIN_L - 4}" y1="{yy:.2f}" x2="{MARGIN_L}" y2="{yy:.2f}" stroke="#333"/>'
                f'<text x="{MARGIN_L - 6}" y="{yy + 4:.2f}" font-size="10" text-anchor="end">{v:.3g}</text>'
            )
        for t in np.linspace(self.t0, self.t1, 6):
            xx = self.x(t)
            out.append(
                f'<line x1="{xx:.2f}" y1="{self.top + PANEL_H}" x2="{xx:.2f}" y2="{self.top + PANEL_H + 4}" stroke="#333"/>'
                f'<text x="{xx:.2f}" y="{self.top + PANEL_H + 16}" font-size="10" text-anchor="middle">{t:.3g}</text>'
            )
        if self.lo < 0 < self.hi:
            out.append(
                f'<line x1="{MARGIN_L}" y1="{self.y(0):.2f}" x2="{MARGIN_L + self.w}" '
                f'y2="{self.y(0):.2f}" stroke="#bbb" stroke-dasharray="2,3"/>'
            )
        return out


def render_svg(runs: Union[RunResult, Comparison, Sequence[RunResult]]) -> str:
    """Two stacked panels: error with shaded funnel ``+-1/phi``, and input."""
    if isinstance(runs, RunResult):
        runs = [runs]
    elif isinstance(runs, Comparison):
        runs = [runs.a, runs.b]
    runs = list(runs)
    ref = runs[0]
    sim = ref.scenario.sim
    t0, t1 = 0.0, sim["t_end"]

    e_max = max((float(np.abs(r.columns["e"]).max()) for r in runs if len(r.times)), default=1.0)
    e_max = e_max or 1.0
    radii = [
        1.0 / p for r in runs for p in r.columns["phi"] if p > 0 and math.isfinite(1.0 / p)
    ]
    r_top = min(max(radii), 3.0 * e_max) if radii else e_max
    lim = 1.1 * max(e_max, r_top)
    u_all = [r.columns["u"] for r in runs if len(r.times)]
    u_lo = min((float(u.min()) for u in u_all), default=-1.0)
    u_hi = max((float(u.max()) for u in u_all), default=1.0)
    pad = 0.05 * (u_hi - u_lo or 1.0)

    p_err = _Panel(MARGIN_T, t0, t1, -lim, lim)
    p_u = _Panel(MARGIN_T + PANEL_H + GAP, t0, t1, u_lo - pad, u_hi + pad)
    height = MARGIN_T + 2 * PANEL_H + GAP + 90

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}" font-family="sans-serif">',
        f'<rect width="{WIDTH}" height="{height}" fill="white"/>',
    ]

    # funnel boundary from the first run; radius clipped at the panel edge
    ts = ref.times
    if len(ts):
        upper = [lim if p == 0 else min(1.0 / p, lim) for p in ref.columns["phi"]]
        poly = p_err.path(ts, upper) + " " + p_err.path(ts[::-1], [-v for v in upper[::-1]])
        parts.append(f'<polygon points="{poly}" fill="#e6e6e6" stroke="none"/>')
        parts.append(f'<polyline points="{p_err.path(ts, upper)}" fill="none" stroke="#555"/>')
        parts.append(
            f'<polyline points="{p_err.path(ts, [-v for v in upper])}" fill="none" stroke="#555"/>'
        )

    parts += p_err.frame("tracking error e(t) with funnel boundary ±1/phi(t)", "e")
    parts += p_u.frame("input u(t)", "u")

    for i, r in enumerate(runs):
        color = COLORS[i % len(COLORS)]
        for j in range(r.columns["e"].shape[1]):
            parts.append(
                f'<polyline points="{p_err.path(r.times, r.columns["e"][:, j])}" '
                f'fill="none" stroke="{color}" stroke-width="1.3"/>'
            )
            parts.append(
                f'<polyline points="{p_u.path(r.times, r.columns["u"][:, j])}" '
                f'fill="none" stroke="{color}" stroke-width="1.3"/>'
            )
        if not r.completed and r.status.t is not None:
            for p in (p_err, p_u):
                xx = p.x(r.status.t)
                parts.append(
                    f'<line class="breach" x1="{xx:.2f}" y1="{p.top}" x2="{xx:.2f}" '
                    f'y2="{p.top + PANEL_H}" stroke="{color}" stroke-dasharray="5,3"/>'
                )
        name = r.scenario.label or r.scenario.controller_type
        ly = height - 40 + 16 * (i // 2)
        lx = MARGIN_L + 300 * (i % 2)
        parts.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{color}" stroke-width="2"/>'
            f'<text x="{lx + 30}" y="{ly + 4}" font-size="12">{_esc(name)}</text>'
        )
    parts.append(
        f'<text x="{MARGIN_L + p_u.w / 2}" y="{p_u.top + PANEL_H + 32}" font-size="11" '
        'text-anchor="middle">t</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(runs, path) -> None:
    Path(path).write_text(render_svg(runs), encoding="utf-8")
