import json
import math
import re
import xml.etree.ElementTree as ET

import pytest

from oracles import rect_polygon
from roadgame.check import Fixed, simulate
from roadgame.dynamics import DynamicsParams
from roadgame.fixtures import load_fixture
from roadgame.render import FRAMES_FORMAT, frame_count, render_frame, render_frames, write_frames
from roadgame.scenario import Scenario

NS = "{http://www.w3.org/2000/svg}"
P = DynamicsParams()


def _parse(svg):
    return ET.fromstring(svg.encode("utf-8"))


def _matrix(root):
    g = root.find(f"{NS}g")
    a, b, c, d, e, f = (float(v) for v in re.findall(r"-?[\d.]+(?:e-?\d+)?", g.get("transform")))
    return lambda x, y: (a * x + c * y + e, b * x + d * y + f)


def test_one_lanelet_polygon():
    root = _parse(render_frames(load_fixture("straight_one_lanelet"))[0])
    polys = [p for p in root.iter(f"{NS}polygon") if p.get("class") == "lanelet"]
    assert len(polys) == 1
    assert polys[0].get("data-id") == "100"


def test_three_lanelets_three_polygons():
    root = _parse(render_frames(load_fixture("three_lanelets"))[0])
    assert len([p for p in root.iter(f"{NS}polygon") if p.get("class") == "lanelet"]) == 3


def test_empty_scenario_renders_empty_canvas():
    svg = render_frame(Scenario("EMPTY", 1.0), 0)
    root = _parse(svg)
    assert root.tag == f"{NS}svg"
    assert not list(root.iter(f"{NS}polygon")) and not list(root.iter(f"{NS}rect"))


def test_ego_rect_at_recorded_pose():
    sc = load_fixture("corridor")
    tr = simulate(sc, Fixed(5), P, seed=0, horizon=10)
    frames = render_frames(sc, tr, P)
    assert len(frames) == 11
    for rec, svg in zip(tr.states, frames):
        root = _parse(svg)
        assert int(root.get("data-time-step")) == rec.time_step
        ego = [r for r in root.iter(f"{NS}rect") if r.get("class") == "ego"]
        assert len(ego) == 1
        r = ego[0]
        x, y, w, h = (float(r.get(k)) for k in ("x", "y", "width", "height"))
        deg, cx, cy = (float(v) for v in re.findall(r"-?[\d.]+", r.get("transform")))
        assert (cx, cy) == pytest.approx((rec.position.x, rec.position.y), abs=1e-6)
        assert (x + w / 2, y + h / 2) == pytest.approx((cx, cy), abs=1e-6)
        assert math.radians(deg) == pytest.approx(rec.orientation, abs=1e-6)
        # corners after rotate() and the world matrix equal the oracle box in pixels
        to_px = _matrix(root)
        th = math.radians(deg)
        mine = []
        for px, py in ((x + w, y + h), (x, y + h), (x, y), (x + w, y)):
            dx, dy = px - cx, py - cy
            mine.append(to_px(cx + dx * math.cos(th) - dy * math.sin(th), cy + dx * math.sin(th) + dy * math.cos(th)))
        ref = [to_px(*q) for q in rect_polygon(rec.position.x, rec.position.y, P.length, P.width, rec.orientation)]
        for a, b in zip(mine, ref):
            assert a == pytest.approx(b, abs=1e-3)
        vb = [float(v) for v in root.get("viewBox").split()]
        px, py = to_px(rec.position.x, rec.position.y)
        assert 0 <= px <= vb[2] and 0 <= py <= vb[3]


def test_frame_count_follows_obstacle_trajectory():
    sc = load_fixture("dynamic_trajectory")
    assert frame_count(sc, None) == 10
    frames = render_frames(sc)
    # ego drawn only in the first frame without a trajectory
    assert 'class="ego"' in frames[0] and 'class="ego"' not in frames[1]


def test_write_frames_and_determinism(tmp_path):
    sc = load_fixture("corridor")
    tr = simulate(sc, Fixed(4), P, seed=0, horizon=10)
    m1 = write_frames(sc, tmp_path / "a", tr, P)
    m2 = write_frames(sc, tmp_path / "b", tr, P)
    doc = json.loads(m1.read_text())
    assert doc["format"] == FRAMES_FORMAT
    assert [f["file"] for f in doc["frames"]] == [f"frame_{t:03d}.svg" for t in range(11)]
    for f in doc["frames"]:
        assert (tmp_path / "a" / f["file"]).read_bytes() == (tmp_path / "b" / f["file"]).read_bytes()
    assert m1.read_bytes() == m2.read_bytes()
