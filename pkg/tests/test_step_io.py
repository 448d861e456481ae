import re

import pytest
from conftest import assert_isomorphic, fuzz_cases
from hypothesis import given
from hypothesis import strategies as st

from hybrid_afr import geom2d as g2
from hybrid_afr.brep import imprint_extrude, make_box
from hybrid_afr.errors import (
    DanglingReference,
    ReferenceCycle,
    StepError,
    StepSyntaxError,
    UnsupportedEntity,
)
from hybrid_afr.step_io import format_real, parse_sidecar, parse_step, read_step_file, write_step

ALLOWED = {
    "CARTESIAN_POINT", "DIRECTION", "VECTOR", "AXIS2_PLACEMENT_3D", "PLANE", "CYLINDRICAL_SURFACE",
    "LINE", "CIRCLE", "VERTEX_POINT", "EDGE_CURVE", "ORIENTED_EDGE", "EDGE_LOOP", "FACE_BOUND",
    "FACE_OUTER_BOUND", "ADVANCED_FACE", "CLOSED_SHELL", "MANIFOLD_SOLID_BREP",
}


def keywords(text):
    return re.findall(r"^#\d+=([A-Z_0-9]+)\(", text, re.M)


def holed():
    s = make_box(50, 40, 25)
    top = next(i for i, f in enumerate(s.faces) if f.tag == ("stock", 2, 1))
    return imprint_extrude(s, top, [[g2.Circle((20.0, 15.0), 5.0, True)]], 10.0, "inward")


def test_box_entity_counts():
    kw = keywords(write_step(make_box(30, 30, 30)))
    assert kw.count("ADVANCED_FACE") == 6
    assert kw.count("CLOSED_SHELL") == 1
    assert set(kw) <= ALLOWED


def test_blind_hole_has_one_cylinder():
    assert keywords(write_step(holed())).count("CYLINDRICAL_SURFACE") == 1


def test_header_sections():
    text = write_step(make_box(1, 2, 3))
    for key in ("ISO-10303-21;", "FILE_DESCRIPTION", "FILE_NAME", "FILE_SCHEMA(('AUTOMOTIVE_DESIGN'))", "DATA;"):
        assert key in text
    assert "\r" not in text


def test_write_parse_write_is_byte_identical(sample_models):
    for m in sample_models[:20]:
        text = write_step(m.solid)
        assert write_step(parse_step(text).solid) == text


def test_round_trip_isomorphic(sample_models):
    for m in sample_models:
        assert_isomorphic(m.solid, parse_step(write_step(m.solid)).solid)


def test_labels_round_trip(tmp_path, sample_models):
    m = sample_models[0]
    text, side = write_step(m.solid, m.labels)
    (tmp_path / "a.step").write_text(text)
    (tmp_path / "a.labels").write_text(side)
    doc = read_step_file(tmp_path / "a.step", tmp_path / "a.labels")
    assert list(doc.labels) == [tuple(x) for x in m.labels]
    assert side.splitlines()[0] == "face_id,class_index,instance_id"


def test_sidecar_must_cover_every_face(sample_models):
    m = sample_models[0]
    text, side = write_step(m.solid, m.labels)
    ids = parse_step(text).face_entity_ids
    short = "\n".join(side.splitlines()[:-1])
    with pytest.raises(StepError):
        parse_sidecar(short, ids)
    with pytest.raises(StepError):
        parse_sidecar(side + f"{ids[0]},3,1\n", ids)


def test_unsupported_entity_names_id():
    text = write_step(make_box(30, 30, 30))
    bad = re.sub(r"^#7=[A-Z_]+", "#7=WIDGET", text, flags=re.M)
    with pytest.raises(UnsupportedEntity) as ei:
        parse_step(bad)
    assert ei.value.entity_id == 7
    assert "#7" in str(ei.value)


def test_dangling_reference_names_id():
    text = write_step(make_box(30, 30, 30))
    bad = re.sub(r"^#99=.*\n", "", text, flags=re.M)
    assert bad != text
    with pytest.raises(DanglingReference) as ei:
        parse_step(bad)
    assert ei.value.entity_id == 99
    assert "#99" in str(ei.value)


def test_reference_cycle():
    text = write_step(make_box(30, 30, 30))
    bad = text.replace("#2=VERTEX_POINT('',#1);", "#2=VERTEX_POINT('',#2);")
    with pytest.raises(ReferenceCycle):
        parse_step(bad)


def test_syntax_error_position():
    text = write_step(make_box(30, 30, 30))
    bad = text.replace("#6=DIRECTION('',(0.,0.,1.));", "#6=DIRECTION('',(0.,0.,1.);")
    with pytest.raises(StepSyntaxError) as ei:
        parse_step(bad)
    assert ei.value.line == bad.split("\n").index("#6=DIRECTION('',(0.,0.,1.);") + 1
    assert ei.value.column >= 1


@pytest.mark.parametrize("data", [b"", b"\xff\xfe", "ISO-10303-21;", None, 42])
def test_garbage_is_structured(data):
    with pytest.raises(StepError):
        parse_step(data)


def test_fuzz_never_crashes():
    bases = [write_step(make_box(30, 30, 30)), write_step(holed())]
    for case in fuzz_cases(bases, 600, seed=11):
        try:
            parse_step(case)
        except StepError:
            pass


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_reals_survive_printing(x):
    # shortest round-trip text carries the full double, which is at least 15 significant digits of it
    assert float(format_real(x)) == x
