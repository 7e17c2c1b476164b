"""Dependency-free SVG plots built from line and band primitives.

Output is a pure function of the input arrays, so the bytes are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from html import escape

import numpy as np

from .verifier.conditions import check_complexity_curve
from .verifier.ensemble import Ensemble, jackknife_stderr
from .verifier.recursions import recursion_spec

__all__ = ["PLOT_KINDS", "Series", "Panel", "render_svg", "plot_measure_vs_k",
           "plot_min_measure_vs_T", "plot_recursion_slack", "plot_counterexample", "make_plot"]

PLOT_KINDS = ("measure_vs_k", "min_measure_vs_T", "recursion_slack", "counterexample")
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
W, H = 640, 400
ML, MR, MT, MB = 70, 20, 36, 50


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    markers: bool = False


@dataclass
class Panel:
    series: list
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlog: bool = False
    ylog: bool = False
    note: str = ""
    hlines: list = field(default_factory=list)


def _n(v: float) -> str:
    return f"{v:.2f}"


def _finite(x, y, log_x, log_y):
    ok = np.isfinite(x) & np.isfinite(y)
    if log_x:
        ok &= x > 0
    if log_y:
        ok &= y > 0
    return ok


class _Axis:
    def __init__(self, lo, hi, log, p0, p1):
        if log:
            lo, hi = math.log10(lo), math.log10(hi)
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        self.lo, self.hi, self.log, self.p0, self.p1 = lo, hi, log, p0, p1

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        if self.log:
            v = np.log10(v)
        return self.p0 + (v - self.lo) / (self.hi - self.lo) * (self.p1 - self.p0)

    def ticks(self):
        if self.log:
            lo, hi = math.floor(self.lo), math.ceil(self.hi)
            step = max(1, (hi - lo) // 6)
            return [(10.0 ** e, f"1e{e}") for e in range(lo, hi + 1, step)
                    if self.lo - 1e-9 <= e <= self.hi + 1e-9]
        span = self.hi - self.lo
        step = 10 ** math.floor(math.log10(span / 5))
        for m in (1, 2, 5, 10):
            if span / (m * step) <= 6:
                step *= m
                break
        start = math.ceil(self.lo / step) * step
        out = []
        v = start
        while v <= self.hi + 1e-12 * span:
            out.append((v, f"{v:.4g}"))
            v += step
        return out


def _panel_svg(p: Panel, y0: int) -> list:
    xs, ys = [], []
    for s in p.series:
        for yy in (s.y, s.lo, s.hi):
            if yy is None:
                continue
            ok = _finite(s.x, yy, p.xlog, p.ylog)
            xs.append(np.asarray(s.x)[ok])
            ys.append(np.asarray(yy)[ok])
    ys.extend(np.array([h]) for h in p.hlines)
    xa = np.concatenate(xs) if xs else np.array([1.0])
    ya = np.concatenate(ys) if ys else np.array([1.0])
    if xa.size == 0:
        xa = np.array([1.0])
    if ya.size == 0:
        ya = np.array([1.0])
    ax = _Axis(float(xa.min()), float(xa.max()), p.xlog, ML, W - MR)
    ay = _Axis(float(ya.min()), float(ya.max()), p.ylog, y0 + H - MB, y0 + MT)
    out = [f'<g font-family="sans-serif" font-size="11">',
           f'<rect x="{ML}" y="{y0 + MT}" width="{W - ML - MR}" height="{H - MT - MB}" '
           f'fill="none" stroke="#444"/>',
           f'<text x="{W / 2:.0f}" y="{y0 + 20}" text-anchor="middle" font-size="13">'
           f'{escape(p.title)}</text>',
           f'<text x="{W / 2:.0f}" y="{y0 + H - 12}" text-anchor="middle">{escape(p.xlabel)}</text>',
           f'<text x="16" y="{y0 + H / 2:.0f}" text-anchor="middle" '
           f'transform="rotate(-90 16 {y0 + H / 2:.0f})">{escape(p.ylabel)}</text>']
    for v, lab in ax.ticks():
        px = float(ax(v))
        out.append(f'<line x1="{_n(px)}" y1="{y0 + H - MB}" x2="{_n(px)}" y2="{y0 + H - MB + 4}" '
                   f'stroke="#444"/><text x="{_n(px)}" y="{y0 + H - MB + 16}" '
                   f'text-anchor="middle">{lab}</text>')
    for v, lab in ay.ticks():
        py = float(ay(v))
        out.append(f'<line x1="{ML - 4}" y1="{_n(py)}" x2="{ML}" y2="{_n(py)}" stroke="#444"/>'
                   f'<text x="{ML - 6}" y="{_n(py + 4)}" text-anchor="end">{lab}</text>')
    for h in p.hlines:
        py = float(ay(h))
        out.append(f'<line x1="{ML}" y1="{_n(py)}" x2="{W - MR}" y2="{_n(py)}" stroke="#888" '
                   f'stroke-dasharray="4 3"/>')
    for i, s in enumerate(p.series):
        col = COLORS[i % len(COLORS)]
        x = np.asarray(s.x, dtype=float)
        if s.lo is not None and s.hi is not None:
            ok = _finite(x, s.lo, p.xlog, p.ylog) & _finite(x, s.hi, p.xlog, p.ylog)
            if ok.any():
                top = [f"{_n(a)},{_n(b)}" for a, b in zip(ax(x[ok]), ay(np.asarray(s.hi)[ok]))]
                bot = [f"{_n(a)},{_n(b)}" for a, b in zip(ax(x[ok]), ay(np.asarray(s.lo)[ok]))]
                out.append(f'<polygon points="{" ".join(top + bot[::-1])}" fill="{col}" '
                           f'fill-opacity="0.2" stroke="none"/>')
        ok = _finite(x, s.y, p.xlog, p.ylog)
        if ok.any():
            pts = [f"{_n(a)},{_n(b)}" for a, b in zip(ax(x[ok]), ay(np.asarray(s.y)[ok]))]
            if s.markers:
                out.extend(f'<circle cx="{q.split(",")[0]}" cy="{q.split(",")[1]}" r="2.5" '
                           f'fill="{col}"/>' for q in pts)
            else:
                out.append(f'<polyline points="{" ".join(pts)}" fill="none" stroke="{col}" '
                           f'stroke-width="1.5"/>')
        if s.label:
            ly = y0 + MT + 14 + 14 * i
            out.append(f'<line x1="{W - MR - 150}" y1="{ly - 4}" x2="{W - MR - 130}" y2="{ly - 4}" '
                       f'stroke="{col}" stroke-width="2"/><text x="{W - MR - 126}" y="{ly}">'
                       f'{escape(s.label)}</text>')
    if p.note:
        out.append(f'<text x="{ML + 8}" y="{y0 + MT + 16}">{escape(p.note)}</text>')
    out.append("</g>")
    return out


def render_svg(panels) -> str:
    """Stack ``panels`` vertically into one self-contained SVG document."""
    if isinstance(panels, Panel):
        panels = [panels]
    total = H * len(panels)
    body = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{total}" '
            f'viewBox="0 0 {W} {total}">', f'<rect width="{W}" height="{total}" fill="white"/>']
    for i, p in enumerate(panels):
        body.extend(_panel_svg(p, i * H))
    body.append("</svg>")
    return "\n".join(body) + "\n"


def _require(ens: Ensemble, *names):
    missing = [n for n in names if not ens.has_column(n)]
    if missing:
        raise KeyError(f"trace is missing column(s) {', '.join(missing)}")


def plot_measure_vs_k(ens: Ensemble) -> str:
    """Mean measure with a +-1 stderr band against ``k + 1`` on log-log axes."""
    _require(ens, "measure")
    k = ens.logged("measure")
    col = ens.column("measure")[:, k]
    m, se = col.mean(axis=0), jackknife_stderr(col) if ens.R > 1 else np.zeros(k.size)
    s = Series(k + 1.0, m, f"mean |Phi|, R={ens.R}", np.maximum(m - se, m * 1e-3), m + se)
    return render_svg(Panel([s], f"{ens.method}: stationarity measure", "k + 1", "|Phi(x^k)|",
                            xlog=True, ylog=True))


def plot_min_measure_vs_T(ens: Ensemble) -> str:
    """Running minimum of the mean squared measure at dyadic ``T`` with the fitted slope."""
    _require(ens, "measure")
    rep = check_complexity_curve(ens)
    T = np.asarray(rep.statistics["T"], dtype=float)
    y = np.asarray(rep.statistics["min_measure_sq"], dtype=float)
    slope = rep.statistics["slope"]
    b = np.polyfit(np.log(T), np.log(y), 1)[1]
    fit = Series(T, np.exp(b) * T ** slope, f"fit, slope {slope:.3f}")
    pts = Series(T, y, "min mean |Phi|^2", markers=True)
    return render_svg(Panel([pts, fit], f"{ens.method}: complexity curve", "T",
                            "min_{k<=T} E|Phi|^2", xlog=True, ylog=True,
                            note=f"slope = {slope:.3f}"))


def plot_recursion_slack(ens: Ensemble, name: str, constants: dict | None = None) -> str:
    """Mean of ``lhs - rhs`` per eligible ``k`` with a 5 stderr band; pass means below 0 + band."""
    spec = recursion_spec(name)
    c = dict(ens.constants)
    c.update(constants or {})
    tt = spec.terms(ens, c)
    resid = tt.lhs - spec.scale * tt.rhs()
    ok = tt.eligible & np.all(np.isfinite(resid), axis=0)
    k = np.flatnonzero(ok)
    r = resid[:, k]
    m = r.mean(axis=0)
    se = jackknife_stderr(r) if ens.R > 1 else np.zeros(k.size)
    s = Series(k.astype(float), m, "mean(lhs - rhs)", m - 5 * se, m + 5 * se)
    return render_svg(Panel([s], f"recursion {name}: slack", "k", "lhs - rhs", hlines=[0.0]))


def plot_counterexample(tr) -> str:
    """Iterates against ``1/(k+1)`` and the gradient pattern along the run."""
    k = np.asarray(tr.k, dtype=float)
    x = Series(k + 1, np.asarray(tr.x), "x^k", markers=k.size <= 200)
    ref = Series(k + 1, 1.0 / (k + 1), "1/(k+1)")
    g = Series(k + 1, np.abs(np.asarray(tr.grad)), "|f'(x^k)|", markers=True)
    top = Panel([x, ref], "counterexample iterates", "k + 1", "x^k", xlog=True, ylog=True)
    bottom = Panel([g], "counterexample gradients", "k + 1", "|f'(x^k)|", xlog=True)
    return render_svg([top, bottom])


def make_plot(kind: str, obj, recursion: str | None = None) -> str:
    if kind == "measure_vs_k":
        return plot_measure_vs_k(obj)
    if kind == "min_measure_vs_T":
        return plot_min_measure_vs_T(obj)
    if kind == "recursion_slack":
        if not recursion:
            raise ValueError("recursion_slack needs a recursion name")
        return plot_recursion_slack(obj, recursion)
    if kind == "counterexample":
        return plot_counterexample(obj)
    raise ValueError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
