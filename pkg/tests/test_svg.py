import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from attractorlab import raydyn
from attractorlab.errors import EmptyData
from attractorlab.svg import attractor_fraction, emit_svg, grid_svg, path_svg

NS = {"s": "http://www.w3.org/2000/svg"}


def parse(doc):
    return ET.fromstring(doc.encode())


def test_single_cell_grid():
    root = parse(grid_svg([[0.3]], [0, 1], [0, 1]))
    assert len(root.findall(".//s:rect", NS)) == 1


def test_grid_grayscale_and_nan():
    vals = [[0.0, 1.0], [np.nan, 0.5]]
    root = parse(grid_svg(vals, [0, 1, 2], [0, 1, 2]))
    fills = [r.get("fill") for r in root.findall(".//s:rect", NS)]
    assert fills == ["rgb(0,0,0)", "rgb(255,255,255)", "rgb(128,128,128)"]
    assert root.get("viewBox") == "0 -2 2 2"
    with pytest.raises(EmptyData):
        grid_svg(np.zeros((0, 0)), [0], [0])


def test_path_vertices_and_domain_box():
    dom = raydyn.TrapeziumDomain(4.0, math.radians(30))
    path = raydyn.trace(dom, raydyn.RayState(0.3, 0.5, 1, 1, math.radians(10)), 3)
    root = parse(emit_svg(path, vertices=dom.vertices))
    ray = root.find(".//s:polyline[@class='ray']", NS)
    assert len(ray.get("points").split()) == 4
    x0, y0, w, h = map(float, root.get("viewBox").split())
    assert (w, h) == pytest.approx((4.0, 1.0))
    with pytest.raises(EmptyData):
        path_svg(np.zeros((0, 2)), dom.vertices)


def test_attractor_tail_is_compact():
    dom = raydyn.TrapeziumDomain(6.5, math.radians(30))
    path = raydyn.trace(dom, raydyn.RayState(0.3, 0.5, 1, 1, math.radians(10)), 400)
    hits = np.array([e.point for e in path.slope_events()])
    assert attractor_fraction(hits) < 0.01
    # a rigid periodic orbit never contracts
    sq = raydyn.TrapeziumDomain.rectangle(1.0)
    orbit = raydyn.trace(sq, raydyn.RayState(0.25, 0.5, 1, 1, math.pi / 4), 100).points()
    assert attractor_fraction(orbit) > 0.5


def test_sweep_svg_deterministic():
    cfg = raydyn.SweepConfig(length=4.0, n_iter=100)
    grid = raydyn.bifurcation_sweep([0.5, 0.6], [0.1, 0.2, 0.7], config=cfg)
    a, b = emit_svg(grid), emit_svg(raydyn.bifurcation_sweep([0.5, 0.6], [0.1, 0.2, 0.7], config=cfg))
    assert a == b
    root = parse(a)
    # corner cells carry NaN exponents and are left blank
    assert len(root.findall(".//s:rect", NS)) == 4
