"""Deterministic SVG figure emission.

Figures are written as self-contained vector files built by plain string
formatting: identical input tables always produce identical bytes. Each
figure embeds its plotted data as SVG comments so tests (and curious
readers) can recover the vertices without a rendering stack.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .analyze import fit_linear
from .errors import EmptyInput, MissingColumn

WIDTH, HEIGHT = 720, 480
MARGIN_LEFT, MARGIN_RIGHT = 70, 20
MARGIN_TOP, MARGIN_BOTTOM = 30, 50

PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]

PLOT_KINDS = ("line", "box", "regression")


@dataclass
class PlotSpec:
    kind: str
    x: str
    y: str
    out_path: str
    group_by: list = field(default_factory=list)
    title: str = ""
    log_x: bool = False

    def __post_init__(self):
        if self.kind not in PLOT_KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}")


def _fmt(v: float) -> str:
    return f"{v:.4f}"


class _Canvas:
    def __init__(self, title):
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        ]
        if title:
            self.parts.append(
                f'<text x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" '
                f'font-family="sans-serif" font-size="14">{title}</text>')

    def comment(self, text):
        self.parts.append(f"<!-- {text} -->")

    def add(self, element):
        self.parts.append(element)

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


class _Scale:
    def __init__(self, lo, hi, out_lo, out_hi, log=False):
        self.log = log
        if log:
            lo, hi = np.log10(lo), np.log10(hi)
        if hi == lo:
            lo, hi = lo - 1.0, hi + 1.0
        self.lo, self.hi = lo, hi
        self.out_lo, self.out_hi = out_lo, out_hi

    def __call__(self, v):
        if self.log:
            v = np.log10(v)
        frac = (v - self.lo) / (self.hi - self.lo)
        return self.out_lo + frac * (self.out_hi - self.out_lo)


def _axes(canvas, xscale, yscale, xlabel, ylabel):
    x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
    y0, y1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP
    canvas.add(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" '
               'stroke="black"/>')
    canvas.add(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" '
               'stroke="black"/>')
    canvas.add(f'<text x="{(x0 + x1) / 2:.0f}" y="{HEIGHT - 12}" '
               'text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">{xlabel}</text>')
    canvas.add(f'<text x="16" y="{(y0 + y1) / 2:.0f}" '
               'text-anchor="middle" font-family="sans-serif" '
               f'font-size="12" transform="rotate(-90 16 '
               f'{(y0 + y1) / 2:.0f})">{ylabel}</text>')


def _check_columns(table: pd.DataFrame, spec: PlotSpec):
    needed = [spec.x, spec.y] + list(spec.group_by)
    for col in needed:
        if col not in table.columns:
            raise MissingColumn(f"column {col!r} not in table")


def _group_keys(table, group_by):
    if not group_by:
        return [("all", table)]
    grouped = table.groupby(list(group_by), sort=True)
    return [("/".join(str(k) for k in (key if isinstance(key, tuple)
                                       else (key,))), g)
            for key, g in grouped]


def emit_plot(table: pd.DataFrame, spec: PlotSpec) -> str:
    """Render one figure; returns the output path."""
    if len(table) == 0:
        raise EmptyInput("empty table")
    _check_columns(table, spec)
    canvas = _Canvas(spec.title)
    if spec.kind == "line":
        _emit_line(table, spec, canvas)
    elif spec.kind == "box":
        _emit_box(table, spec, canvas)
    else:
        _emit_regression(table, spec, canvas)
    svg = canvas.render()
    with open(spec.out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return spec.out_path


def _emit_line(table, spec, canvas):
    xvals = table[spec.x].to_numpy(dtype=np.float64)
    yvals = table[spec.y].to_numpy(dtype=np.float64)
    xscale = _Scale(xvals.min(), xvals.max(), MARGIN_LEFT,
                    WIDTH - MARGIN_RIGHT, log=spec.log_x)
    yscale = _Scale(yvals.min(), yvals.max(), HEIGHT - MARGIN_BOTTOM,
                    MARGIN_TOP)
    _axes(canvas, xscale, yscale, spec.x, spec.y)
    for i, (key, group) in enumerate(_group_keys(table, spec.group_by)):
        series = group.sort_values(spec.x)
        xs = series[spec.x].to_numpy(dtype=np.float64)
        ys = series[spec.y].to_numpy(dtype=np.float64)
        canvas.comment("series " + key + ": " + " ".join(
            f"{_fmt(a)},{_fmt(b)}" for a, b in zip(xs, ys)))
        points = " ".join(f"{_fmt(xscale(a))},{_fmt(yscale(b))}"
                          for a, b in zip(xs, ys))
        color = PALETTE[i % len(PALETTE)]
        canvas.add(f'<polyline points="{points}" fill="none" '
                   f'stroke="{color}" stroke-width="1.5"/>')


def _emit_box(table, spec, canvas):
    groups = _group_keys(table, [spec.x])
    yvals = table[spec.y].to_numpy(dtype=np.float64)
    yscale = _Scale(yvals.min(), yvals.max(), HEIGHT - MARGIN_BOTTOM,
                    MARGIN_TOP)
    span = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    slot = span / len(groups)
    _axes(canvas, None, yscale, spec.x, spec.y)
    for i, (key, group) in enumerate(groups):
        vals = group[spec.y].to_numpy(dtype=np.float64)
        q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75])
        lo, hi = vals.min(), vals.max()
        canvas.comment(
            f"box {key}: min={_fmt(lo)} q1={_fmt(q1)} median={_fmt(med)} "
            f"q3={_fmt(q3)} max={_fmt(hi)}")
        cx = MARGIN_LEFT + slot * (i + 0.5)
        half = min(30.0, slot * 0.3)
        canvas.add(f'<line x1="{_fmt(cx)}" y1="{_fmt(yscale(lo))}" '
                   f'x2="{_fmt(cx)}" y2="{_fmt(yscale(hi))}" stroke="black"/>')
        canvas.add(f'<rect x="{_fmt(cx - half)}" y="{_fmt(yscale(q3))}" '
                   f'width="{_fmt(2 * half)}" '
                   f'height="{_fmt(yscale(q1) - yscale(q3))}" '
                   'fill="#a6cee3" stroke="black"/>')
        canvas.add(f'<line x1="{_fmt(cx - half)}" y1="{_fmt(yscale(med))}" '
                   f'x2="{_fmt(cx + half)}" y2="{_fmt(yscale(med))}" '
                   'stroke="black" stroke-width="1.5"/>')
        canvas.add(f'<text x="{_fmt(cx)}" y="{HEIGHT - 34}" '
                   'text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{key}</text>')


def _emit_regression(table, spec, canvas):
    xs = table[spec.x].to_numpy(dtype=np.float64)
    ys = table[spec.y].to_numpy(dtype=np.float64)
    slope, intercept = fit_linear(np.column_stack([xs, ys]))
    y_fit = np.array([intercept + slope * xs.min(),
                      intercept + slope * xs.max()])
    ylo = min(ys.min(), y_fit.min())
    yhi = max(ys.max(), y_fit.max())
    xscale = _Scale(xs.min(), xs.max(), MARGIN_LEFT, WIDTH - MARGIN_RIGHT,
                    log=spec.log_x)
    yscale = _Scale(ylo, yhi, HEIGHT - MARGIN_BOTTOM, MARGIN_TOP)
    _axes(canvas, xscale, yscale, spec.x, spec.y)
    canvas.comment(f"fit slope={slope!r} intercept={intercept!r}")
    canvas.comment("points " + " ".join(
        f"{_fmt(a)},{_fmt(b)}" for a, b in zip(xs, ys)))
    for a, b in zip(xs, ys):
        canvas.add(f'<circle cx="{_fmt(xscale(a))}" cy="{_fmt(yscale(b))}" '
                   'r="3" fill="#1f77b4" fill-opacity="0.6"/>')
    canvas.add(f'<line x1="{_fmt(xscale(xs.min()))}" '
               f'y1="{_fmt(yscale(y_fit[0]))}" '
               f'x2="{_fmt(xscale(xs.max()))}" '
               f'y2="{_fmt(yscale(y_fit[1]))}" '
               'stroke="#d62728" stroke-width="2"/>')
