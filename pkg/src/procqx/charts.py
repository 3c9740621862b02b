"""Self-contained SVG charts: ROC/PR lines, signed Shapley bars, ICE/PDP overlays."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

SVG_NS = "http://www.w3.org/2000/svg"
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2")
FONT = "font-family:Helvetica,Arial,sans-serif"

BAR_AXIS_PX = 600.0


def _f(v: float) -> str:
    return f"{v:.2f}"


def _svg(width: float, height: float) -> ET.Element:
    root = ET.Element("svg", xmlns=SVG_NS, width=_f(width), height=_f(height),
                      viewBox=f"0 0 {_f(width)} {_f(height)}")
    ET.SubElement(root, "rect", x="0", y="0", width=_f(width), height=_f(height), fill="white")
    return root


def _text(parent, x, y, content, size=12, anchor="middle", **extra):
    el = ET.SubElement(parent, "text", x=_f(x), y=_f(y), style=f"{FONT};font-size:{size}px",
                       **{"text-anchor": anchor}, **extra)
    el.text = content
    return el


def _render(root: ET.Element) -> str:
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n + 1)


def _tick_label(v: float) -> str:
    if abs(v) >= 1000:
        return f"{v:.0f}"
    if abs(v) >= 10:
        return f"{v:.1f}"
    return f"{v:.2f}"


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    color: Optional[str] = None
    dashed: bool = False
    marker_x: Optional[float] = None  # observed value to mark on the curve


class Frame:
    """Maps data coordinates into a fixed plotting rectangle."""

    def __init__(self, xlim, ylim, left=70.0, top=50.0, width=480.0, height=360.0):
        self.xlim = (float(xlim[0]), float(xlim[1]))
        self.ylim = (float(ylim[0]), float(ylim[1]))
        if self.xlim[0] == self.xlim[1]:
            self.xlim = (self.xlim[0] - 0.5, self.xlim[1] + 0.5)
        if self.ylim[0] == self.ylim[1]:
            self.ylim = (self.ylim[0] - 0.5, self.ylim[1] + 0.5)
        self.left, self.top, self.width, self.height = left, top, width, height

    def px(self, x: float) -> float:
        lo, hi = self.xlim
        return self.left + (x - lo) / (hi - lo) * self.width

    def py(self, y: float) -> float:
        lo, hi = self.ylim
        return self.top + self.height - (y - lo) / (hi - lo) * self.height


def line_chart(series: List[Series], title: str, xlabel: str, ylabel: str,
               xlim: Optional[Tuple[float, float]] = None, ylim: Optional[Tuple[float, float]] = None,
               diagonal: bool = False) -> str:
    if not series or any(len(s.x) == 0 for s in series):
        raise ValueError("cannot draw an empty curve")
    if xlim is None:
        xs = np.concatenate([np.asarray(s.x, float) for s in series])
        xlim = (xs.min(), xs.max())
    if ylim is None:
        ys = np.concatenate([np.asarray(s.y, float) for s in series])
        ylim = (ys.min(), ys.max())
    fr = Frame(xlim, ylim)
    root = _svg(fr.left + fr.width + 170, fr.top + fr.height + 60)
    _text(root, fr.left + fr.width / 2, 28, title, size=15)

    axes = ET.SubElement(root, "g", {"class": "axes", "stroke": "#333", "fill": "none"})
    ET.SubElement(axes, "rect", x=_f(fr.left), y=_f(fr.top), width=_f(fr.width), height=_f(fr.height))
    for t in _ticks(*fr.xlim):
        ET.SubElement(axes, "line", x1=_f(fr.px(t)), x2=_f(fr.px(t)), y1=_f(fr.top + fr.height),
                      y2=_f(fr.top + fr.height + 5))
        _text(root, fr.px(t), fr.top + fr.height + 18, _tick_label(t), size=10)
    for t in _ticks(*fr.ylim):
        ET.SubElement(axes, "line", x1=_f(fr.left - 5), x2=_f(fr.left), y1=_f(fr.py(t)), y2=_f(fr.py(t)))
        _text(root, fr.left - 8, fr.py(t) + 3, _tick_label(t), size=10, anchor="end")
    _text(root, fr.left + fr.width / 2, fr.top + fr.height + 40, xlabel)
    _text(root, 18, fr.top + fr.height / 2, ylabel,
          transform=f"rotate(-90 18 {_f(fr.top + fr.height / 2)})")

    if diagonal:
        ET.SubElement(root, "line", {"class": "reference", "x1": _f(fr.px(fr.xlim[0])), "y1": _f(fr.py(fr.ylim[0])),
                                     "x2": _f(fr.px(fr.xlim[1])), "y2": _f(fr.py(fr.ylim[1])),
                                     "stroke": "#999", "stroke-dasharray": "4 4"})

    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        pts = " L ".join(f"{_f(fr.px(x))},{_f(fr.py(y))}" for x, y in zip(s.x, s.y))
        attrs = {"class": "series", "d": "M " + pts, "fill": "none", "stroke": color, "stroke-width": "2"}
        if s.dashed:
            attrs["stroke-dasharray"] = "6 3"
        ET.SubElement(root, "path", attrs, **{"data-label": s.label})
        if s.marker_x is not None:
            my = float(np.interp(s.marker_x, np.asarray(s.x, float), np.asarray(s.y, float)))
            ET.SubElement(root, "circle", {"class": "observed", "cx": _f(fr.px(s.marker_x)), "cy": _f(fr.py(my)),
                                           "r": "4.5", "fill": color, "stroke": "black"})
        ly = fr.top + 14 + 18 * i
        lx = fr.left + fr.width + 14
        ET.SubElement(root, "line", x1=_f(lx), x2=_f(lx + 20), y1=_f(ly - 4), y2=_f(ly - 4), stroke=color,
                      **{"stroke-width": "2"})
        _text(root, lx + 26, ly, s.label, size=11, anchor="start")
    return _render(root)


def roc_svg(fpr, tpr, auroc: float) -> str:
    return line_chart([Series("ROC", fpr, tpr)], f"ROC curve (AUROC = {auroc:.3f})",
                      "False positive rate", "True positive rate", (0, 1), (0, 1), diagonal=True)


def pr_svg(recall, precision, auprc: float) -> str:
    # start the step curve at recall 0 with the first precision
    x = np.r_[0.0, np.repeat(np.asarray(recall, float), 2)[:-1]]
    y = np.repeat(np.asarray(precision, float), 2)
    return line_chart([Series("PR", x, y)], f"Precision-recall curve (AUPRC = {auprc:.3f})",
                      "Recall", "Precision", (0, 1), (0, 1))


def bar_scale(phis: Sequence[float]) -> Tuple[float, float, float]:
    """Axis domain (lo, hi) covering zero and every contribution, and px per unit."""
    phis = np.asarray(phis, float)
    lo, hi = min(0.0, float(phis.min())), max(0.0, float(phis.max()))
    if lo == hi:
        lo, hi = -1.0, 1.0
    return lo, hi, BAR_AXIS_PX / (hi - lo)


def shapley_svg(names: Sequence[str], values: Sequence[float], phis: Sequence[float],
                prediction: float, base_value: float, title: str = "Shapley values",
                subtitle: Optional[str] = None) -> str:
    """Horizontal signed bars sorted by |phi|, largest on top."""
    phis = np.asarray(phis, float)
    if phis.size == 0:
        raise ValueError("no contributions to draw")
    order = sorted(range(phis.size), key=lambda j: (-abs(phis[j]), j))
    lo, hi, scale = bar_scale(phis)
    left, top, row_h = 300.0, 70.0, 34.0
    zero_px = left + (0.0 - lo) * scale
    root = _svg(left + BAR_AXIS_PX + 60, top + row_h * len(order) + 60)
    _text(root, (left + BAR_AXIS_PX) / 2 + 30, 26, title, size=15)
    if subtitle is None:
        subtitle = f"prediction = {prediction:.3f}, base value = {base_value:.3f}"
    _text(root, (left + BAR_AXIS_PX) / 2 + 30, 48, subtitle, size=12)

    bars = ET.SubElement(root, "g", {"class": "bars"})
    for row, j in enumerate(order):
        y = top + row * row_h
        length = abs(phis[j]) * scale
        x = zero_px if phis[j] >= 0 else zero_px - length
        ET.SubElement(bars, "rect", {"class": "bar", "x": _f(x), "y": _f(y + 5), "width": _f(length),
                                     "height": _f(row_h - 10), "fill": "#2ca02c" if phis[j] >= 0 else "#d62728",
                                     "data-feature": names[j], "data-phi": repr(float(phis[j]))})
        _text(root, left - 10, y + row_h / 2 + 4, f"{names[j]} = {_tick_label(float(values[j]))}", size=12,
              anchor="end")
        label_x = x + length + 6 if phis[j] >= 0 else x - 6
        _text(root, label_x, y + row_h / 2 + 4, f"{phis[j]:+.3f}", size=11,
              anchor="start" if phis[j] >= 0 else "end")
    bottom = top + row_h * len(order)
    ET.SubElement(root, "line", {"class": "zero", "x1": _f(zero_px), "x2": _f(zero_px), "y1": _f(top - 4),
                                 "y2": _f(bottom + 4), "stroke": "#333"})
    for t in _ticks(lo, hi, 4):
        _text(root, left + (t - lo) * scale, bottom + 22, f"{t:+.3f}", size=10)
    _text(root, left + BAR_AXIS_PX / 2, bottom + 44, "contribution to the Passed score")
    return _render(root)


def importance_svg(names: Sequence[str], importance: Sequence[float]) -> str:
    imp = np.asarray(importance, float)
    return shapley_svg(names, imp, imp, float("nan"), float("nan"), "Mean |Shapley value| per feature",
                       subtitle="global importance over the explained instances")
