import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from procqx import charts
from procqx.evaluation import pr_auprc, roc_auroc

NS = {"svg": "http://www.w3.org/2000/svg"}


def _path_points(svg):
    root = ET.fromstring(svg)
    d = root.find(".//svg:path[@class='series']", NS).get("d")
    return [tuple(map(float, p.split(","))) for p in re.findall(r"-?[\d.]+,-?[\d.]+", d)]


def test_perfect_roc_passes_through_corner():
    curve, auc = roc_auroc([0.9, 0.8, 0.2, 0.1], ["Passed", "Passed", "Failed", "Failed"])
    svg = charts.roc_svg(curve.x, curve.y, auc)
    assert "AUROC = 1.000" in svg
    fr = charts.Frame((0, 1), (0, 1))
    corner = (fr.px(0.0), fr.py(1.0))
    assert corner in _path_points(svg)


def test_pr_title_and_parse():
    curve, auc = pr_auprc([0.9, 0.6, 0.5, 0.1], ["Passed", "Failed", "Passed", "Failed"])
    svg = charts.pr_svg(curve.x, curve.y, auc)
    ET.fromstring(svg)
    assert f"AUPRC = {auc:.3f}" in svg


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False).filter(lambda v: v == 0 or abs(v) > 1e-9), min_size=1, max_size=9))
def test_shapley_bars_proportional_to_abs_phi(phis):
    names = [f"f{j}" for j in range(len(phis))]
    svg = charts.shapley_svg(names, np.zeros(len(phis)), phis, 0.3, 0.5)
    root = ET.fromstring(svg)
    rects = root.findall(".//svg:rect[@class='bar']", NS)
    assert len(rects) == len(phis)
    # independent pixel mapping: the axis spans [min(0, phi), max(0, phi)] over 600 px
    lo, hi = min([0.0, *phis]), max([0.0, *phis])
    span = (hi - lo) or 2.0
    for r in rects:
        phi = float(r.get("data-phi"))
        assert abs(float(r.get("width")) - abs(phi) * 600.0 / span) <= 0.5
    lefts = [float(r.get("x")) for r in rects]
    rights = [float(r.get("x")) + float(r.get("width")) for r in rects]
    assert max(rights) - min(lefts) <= 600.0 + 0.5
    order = [abs(float(r.get("data-phi"))) for r in rects]
    assert order == sorted(order, reverse=True)


def test_shapley_svg_annotates_prediction_and_base():
    svg = charts.shapley_svg(["a", "b"], [1.0, 2.0], [0.1, -0.43], 0.14, 0.47)
    assert "prediction = 0.140" in svg and "base value = 0.470" in svg


def test_line_chart_marks_observed_value():
    svg = charts.line_chart([charts.Series("ice", [0, 1, 2], [0.1, 0.5, 0.2], marker_x=1.0)], "t", "x", "y")
    root = ET.fromstring(svg)
    assert len(root.findall(".//svg:circle[@class='observed']", NS)) == 1


def test_empty_curves_rejected():
    with pytest.raises(ValueError):
        charts.line_chart([charts.Series("e", [], [])], "t", "x", "y")
    with pytest.raises(ValueError):
        charts.shapley_svg([], [], [], 0.0, 0.0)


def test_svgs_are_self_contained():
    svg = charts.importance_svg(["a", "b", "c"], [0.3, 0.0, 0.1])
    ET.fromstring(svg)
    assert "href" not in svg and "<image" not in svg
