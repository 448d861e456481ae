import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_afr import geom2d as g2
from hybrid_afr.brep import CircleCurve, Cylinder, Line, apply_edge_round, edge_point, imprint_extrude, make_box
from hybrid_afr.errors import ExtractionMismatch, InvalidArgument, PlacementRejected
from hybrid_afr.featuregen import face_labels
from hybrid_afr.geomextract import (
    RigidTransform,
    angle_between,
    apply_transform,
    axis_of,
    circle_radius,
    circumcircle,
    extract_blind_hole,
    extract_circular_end_pocket,
    extract_dimensions,
    extract_model,
    feature_orientation,
    group_instances,
    linear_distance,
    stock_sizes,
    truth_report,
)
from hybrid_afr.taxonomy import STOCK


def face(solid, tag):
    return next(i for i, f in enumerate(solid.faces) if f.tag == tag)


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def triangle(a, b, base, at):
    """Triangle with sides (a, b, base) placed with its base along x from ``at``."""
    x = (base * base + b * b - a * a) / (2 * base)
    y = math.sqrt(b * b - x * x)
    return [(at[0], at[1]), (at[0] + base, at[1]), (at[0] + x, at[1] + y)]


# ---------------------------------------------------------------------------
# primitives


def test_linear_distance():
    assert linear_distance((0, 0, 0), (3, 4, 0)) == 5
    assert linear_distance((1, 2, 3), (1, 2, 3)) == 0
    assert linear_distance((1, 5, 2), (4, 0, 7)) == linear_distance((4, 0, 7), (1, 5, 2))


def test_circle_radius():
    assert circle_radius((0, 0), (3, 4)) == 5
    assert circle_radius((1, 1), (1, 1)) == 0


def test_angle_between():
    assert angle_between((1, 0, 0), (0, 1, 0)) == pytest.approx(math.pi / 2)
    assert angle_between((1, 0, 0), (1, 1, 0)) == pytest.approx(math.pi / 4)
    v = np.array([0.1, 0.7, 0.3])
    # cosine rounding past 1 is clamped rather than turned into nan
    assert 0.0 <= angle_between(v, 3 * v) < 1e-7
    assert angle_between(v, -v) == pytest.approx(math.pi)
    with pytest.raises(InvalidArgument):
        angle_between((0, 0, 0), (1, 0, 0))


def test_circumcircle_matches_generated_edges(sample_models):
    seen = 0
    for m in sample_models[:20]:
        s = m.solid
        for eid, e in enumerate(s.edges):
            if isinstance(e.curve, CircleCurve):
                p = [edge_point(s, eid, t) for t in (0.1, 0.45, 0.8)]
                ctr, r = circumcircle(*p)
                assert r == pytest.approx(e.curve.radius, rel=1e-9)
                assert circle_radius(e.curve.center, p[1]) == pytest.approx(r, rel=1e-9)
                assert np.allclose(ctr, e.curve.center, atol=1e-9)
                seen += 1
    assert seen > 20


def test_transform_validation():
    with pytest.raises(InvalidArgument):
        RigidTransform(rotation=np.diag([1.0, 1.0, 2.0]))
    with pytest.raises(InvalidArgument):
        RigidTransform(rotation=np.diag([1.0, 1.0, -1.0]))
    pts = np.random.default_rng(0).normal(size=(5, 3))
    assert np.array_equal(apply_transform(pts, RigidTransform()), pts)
    doubled = apply_transform(pts, RigidTransform(scale=2.0))
    assert np.allclose(np.ptp(doubled, axis=0), 2 * np.ptp(pts, axis=0))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rigid_transform_is_isometry(seed):
    rng = np.random.default_rng(seed)
    T = RigidTransform(random_rotation(rng), rng.normal(size=3) * 50)
    a, b = rng.normal(size=(2, 3)) * 20
    pa, pb = apply_transform([a, b], T)
    assert linear_distance(pa, pb) == pytest.approx(linear_distance(a, b), rel=1e-12)


@given(st.tuples(*[st.floats(-10, 10)] * 3).filter(lambda v: max(map(abs, v)) > 1e-3), st.floats(1e-3, 1e3))
def test_axis_choice_is_scale_free(v, c):
    assert axis_of(v) == axis_of(np.asarray(v) * c)


def test_axis_ties_prefer_z_then_x():
    assert axis_of((1, 1, 1)) == 2
    assert axis_of((1, 1, 0)) == 0
    assert axis_of((0, 1, 0)) == 1


# ---------------------------------------------------------------------------
# grouping


def two_holes():
    s = make_box(60, 40, 30)
    top = face(s, ("stock", 2, 1))
    s = imprint_extrude(s, top, [[g2.Circle((15.0, 20.0), 4.0, True)]], 12.0, "inward")
    s = imprint_extrude(s, top, [[g2.Circle((45.0, 20.0), 3.0, True)]], 7.0, "inward")
    return s, [c for c, _ in face_labels(s, {1: 12, 2: 12})]


def test_group_disjoint_holes():
    s, labels = two_holes()
    insts = group_instances(labels, s.face_adjacency)
    assert [i.cls for i in insts] == [12, 12]
    assert all(len(i.faces) == 2 for i in insts)
    depths = sorted(extract_blind_hole(s, i)["Depth"] for i in insts)
    assert depths == [7.0, 12.0]


def test_stock_faces_form_no_instance():
    s = make_box(10, 10, 10)
    assert group_instances([STOCK] * 6, s.face_adjacency) == []


def test_pocket_is_one_instance():
    s = make_box(60, 40, 30)
    s = imprint_extrude(s, face(s, ("stock", 2, 1)), [g2.rectangle(10, 10, 30, 25)], 8.0, "inward")
    (inst,) = group_instances(face_labels(s, {1: 14}), s.face_adjacency)
    assert len(inst.faces) == 5
    assert extract_dimensions(s, inst) == {"Length": 20.0, "Width": 15.0, "Depth": 8.0}


# ---------------------------------------------------------------------------
# a hybrid part with known dimensions


def test_blind_hole_analog():
    s = make_box(80, 50, 40)
    s = imprint_extrude(s, face(s, ("stock", 2, 1)), [[g2.Circle((39.76, 20.48), 5.92, True)]], 25.0, "inward")
    s = s.transformed(None, (-80.0, -10.0, -15.0))
    (inst,) = group_instances(face_labels(s, {1: 12}), s.face_adjacency)
    d = extract_blind_hole(s, inst)
    assert d["Radius"] == pytest.approx(5.92, rel=1e-12)
    assert d["Depth"] == pytest.approx(25.0, rel=1e-12)
    assert np.allclose(d["Center"], (-40.24, 10.48, 25.0), atol=1e-9)
    assert feature_orientation(s, inst) == "Upright"
    (row,) = extract_model(s, face_labels(s, {1: 12})).instances
    assert row.line() == "Blind Hole (12) | Radius = 5.92, Depth = 25.0, Center = (-40.24, 10.48, 25.0) | Upright"


@pytest.fixture(scope="module")
def hybrid_part():
    s = make_box(131.81, 69.69, 25)
    top = face(s, ("stock", 2, 1))
    s = imprint_extrude(s, top, [g2.polygon(triangle(6.77, 6.47, 8.7, (20.0, 20.0)))], 14.0, "outward")
    s = imprint_extrude(s, top, [g2.polygon(g2.regular_polygon((70.0, 35.0), 3.67, 6, 0.0))], 8.0, "outward")
    hexagon = g2.polygon(g2.regular_polygon((35.0, 12.5), 4.0, 6, 0.0))
    s = imprint_extrude(s, face(s, ("stock", 0, 1)), [hexagon], 131.81, "inward", through=True)
    edge = next(
        eid for eid, e in enumerate(s.edges)
        if isinstance(e.curve, Line) and all(abs(s.vertices[v][1]) < 1e-9 and abs(s.vertices[v][2]) < 1e-9
                                             for v in (e.start, e.end))
    )
    s = apply_edge_round(s, edge, 5.0)
    return s, face_labels(s, {1: 26, 2: 27, 3: 4, 4: 23})


def test_hybrid_part_dimensions(hybrid_part):
    s, labels = hybrid_part
    rep = {r.cls: r for r in extract_model(s, labels).instances}
    tri = rep[26].dimensions
    assert [tri[k] for k in ("Side-1", "Side-2", "Side-3")] == pytest.approx([6.47, 6.77, 8.7], rel=1e-12)
    assert tri["Depth"] == pytest.approx(14.0)
    assert rep[27].dimensions["Side"] == pytest.approx(3.67, rel=1e-12)
    assert rep[27].dimensions["Depth"] == pytest.approx(8.0)
    assert rep[4].orientation == "Tilted"
    assert rep[23].orientation == "None"
    assert rep[23].dimensions["Radius"] == pytest.approx(5.0)
    assert rep[23].line().startswith("Round (23) | Radius = 5.0, Face index (")


def test_hybrid_part_stock(hybrid_part):
    s, labels = hybrid_part
    st_ = stock_sizes(s, labels)
    assert st_.min_stock == pytest.approx((131.81, 69.69, 25.0), abs=1e-9)
    assert st_.max_stock == pytest.approx((131.81, 69.69, 39.0), abs=1e-9)
    assert st_.max_stock[2] - st_.min_stock[2] == pytest.approx(14.0)
    text = extract_model(s, labels).text()
    assert text.endswith("Stock | min [131.81 x 69.69 x 25] max [131.81 x 69.69 x 39]\n")


def test_no_additive_means_equal_stocks(sample_models):
    s = make_box(33, 44, 55)
    s = imprint_extrude(s, face(s, ("stock", 1, 0)), [[g2.Circle((10.0, 20.0), 3.0, True)]], 9.0, "inward")
    st_ = stock_sizes(s, face_labels(s, {1: 12}))
    assert st_.min_stock == st_.max_stock == pytest.approx((33, 44, 55))


# ---------------------------------------------------------------------------
# generator oracle


def test_matches_ground_truth(sample_models):
    for m in sample_models:
        assert extract_model(m.solid, m.labels).text() == truth_report(m.truth, m.labels).text()


def test_rigid_invariance(sample_models):
    rng = np.random.default_rng(5)
    for m in sample_models[:15]:
        R, t = random_rotation(rng), rng.normal(size=3) * 100
        moved = m.solid.transformed(R, t)
        for inst in group_instances(m.labels, m.solid.face_adjacency):
            a = extract_dimensions(m.solid, inst)
            b = extract_dimensions(moved, inst, frame=R)
            assert a.keys() == b.keys()
            for k in a:
                if k == "Center":
                    assert np.allclose(R @ np.asarray(a[k]) + t, b[k], atol=1e-9)
                elif k == "Face index":
                    assert a[k] == b[k]
                else:
                    assert b[k] == pytest.approx(a[k], rel=1e-9)
            assert feature_orientation(moved, inst, frame=R) == feature_orientation(m.solid, inst)


def test_end_pocket_depth_two_ways(sample_models):
    from hybrid_afr.featuregen import generate_model, model_seed

    seen = 0
    for i in range(400):
        m = generate_model(model_seed(0, i))
        for inst in group_instances(m.labels, m.solid.face_adjacency):
            if inst.cls != 16:
                continue
            d = extract_circular_end_pocket(m.solid, inst)["Depth"]
            for fi in inst.faces:
                if isinstance(m.solid.faces[fi].surface, Cylinder):
                    cs = [m.solid.edges[e].curve.center for e in m.solid.face_edges(fi)
                          if isinstance(m.solid.edges[e].curve, CircleCurve)]
                    assert linear_distance(cs[0], cs[1]) == pytest.approx(d, rel=1e-12)
                    seen += 1
        if seen >= 6:
            break
    assert seen >= 6


def test_extrusion_never_shrinks_max_stock(sample_models):
    rng = np.random.default_rng(2)
    done = 0
    for m in sample_models:
        classes = {f.instance: f.cls for f in m.truth.features}
        before = stock_sizes(m.solid, m.labels)
        host = int(rng.integers(0, 6))
        k, side = host // 2, host % 2
        fi = face(m.solid, ("stock", k, side))
        dims = m.truth.stock
        a, b = [dims[j] for j in range(3) if j != k]
        try:
            s2 = imprint_extrude(m.solid, fi, [[g2.Circle((a / 2, b / 2), 1.5, True)]], 6.0, "outward")
        except PlacementRejected:
            continue
        inst = max(classes) + 1
        after = stock_sizes(s2, face_labels(s2, {**classes, inst: 24}))
        assert after.min_stock == pytest.approx(before.min_stock)
        assert all(x >= y - 1e-12 for x, y in zip(after.max_stock, before.max_stock))
        done += 1
    assert done >= 3


# ---------------------------------------------------------------------------
# mismatches


def test_pocket_labelled_as_hole_is_mismatch():
    s = make_box(60, 40, 30)
    s = imprint_extrude(s, face(s, ("stock", 2, 1)), [g2.rectangle(10, 10, 30, 25)], 8.0, "inward")
    labels = face_labels(s, {1: 12})
    with pytest.raises(ExtractionMismatch):
        extract_model(s, labels)
    rep = extract_model(s, labels, strict=False)
    assert rep.instances == [] and len(rep.errors) == 1


def test_round_pocket_is_not_an_end_pocket():
    s = make_box(60, 40, 30)
    s = imprint_extrude(s, face(s, ("stock", 2, 1)), [[g2.Circle((20.0, 20.0), 5.0, True)]], 8.0, "inward")
    (inst,) = group_instances(face_labels(s, {1: 16}), s.face_adjacency)
    with pytest.raises(ExtractionMismatch):
        extract_circular_end_pocket(s, inst)
