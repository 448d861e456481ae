import hashlib

import numpy as np
import pytest

from hybrid_afr import geom2d as g2
from hybrid_afr.brep import Solid, edge_convexity, imprint_extrude, make_box
from hybrid_afr.errors import ContainerError, InputError, OversizeGraph
from hybrid_afr.hiergraph import (
    CONVEXITY_CODE,
    HierGraph,
    batches_equal,
    build_hier_graph,
    deserialize_batches,
    graph_from_model,
    make_batches,
    normalize,
    read_hgb,
    serialize_batches,
    write_hgb,
)
from hybrid_afr.mesh import triangulate
from hybrid_afr.taxonomy import STOCK


def stock_labels(solid):
    return [(STOCK, 0)] * len(solid.faces)


def dummy(name, n_faces, n_facets):
    z = np.zeros
    return HierGraph(
        name, z((n_faces, 6)), z((n_faces, 3)), z(n_faces, np.int64), z(n_faces, np.int64),
        z((0, 2), np.int64), z(0, np.int64), z((n_facets, 4)), z((n_facets, 3)),
        z((0, 2), np.int64), np.zeros(n_facets, np.int64), True,
    )


def wl_hash(g, rounds=3):
    """Weisfeiler-Lehman colour histogram over the face level; blind to face numbering."""
    col = [f"{int(c)}|{np.round(f, 6).tolist()}" for c, f in zip(g.face_labels, g.face_feats)]
    nbr = [[] for _ in col]
    for (a, b), cv in zip(g.face_links, g.face_link_conv):
        nbr[a].append((b, int(cv)))
        nbr[b].append((a, int(cv)))
    for _ in range(rounds):
        col = [
            hashlib.sha1((col[i] + str(sorted((col[j], cv) for j, cv in nbr[i]))).encode()).hexdigest()
            for i in range(len(col))
        ]
    facets = sorted(np.round(g.facet_feats, 6).tolist())
    return sorted(col), facets


def test_box_counts():
    s = make_box(30, 20, 10)
    g = build_hier_graph(s, triangulate(s), stock_labels(s))
    assert (g.n_faces, len(g.face_links), g.n_facets) == (6, 12, 12)
    assert (g.face_link_conv == CONVEXITY_CODE["convex"]).all()


def test_blind_hole_faces():
    s = make_box(50, 40, 25)
    top = next(i for i, f in enumerate(s.faces) if f.tag == ("stock", 2, 1))
    h = imprint_extrude(s, top, [[g2.Circle((20.0, 15.0), 5.0, True)]], 10.0, "inward")
    g = graph_from_model(h, stock_labels(h))
    assert g.n_faces == 8


def test_missing_label():
    s = make_box(3, 3, 3)
    with pytest.raises(InputError):
        build_hier_graph(s, triangulate(s), stock_labels(s)[:-1])
    with pytest.raises(InputError):
        build_hier_graph(s, triangulate(s), [(STOCK, 0)] * 5 + [None])


def test_facet_planes_and_cross_links(sample_models):
    for m in sample_models:
        mesh = triangulate(m.solid)
        g = build_hier_graph(m.solid, mesh, m.labels)
        n, d = g.facet_feats[:, :3], g.facet_feats[:, 3]
        for k in range(3):
            pts = mesh.vertices[mesh.triangles[:, k]]
            assert np.abs(np.einsum("ij,ij->i", n, pts) - d).max() < 1e-9
        assert np.bincount(g.facet_parent, minlength=g.n_faces).sum() == g.n_facets
        assert (np.bincount(g.facet_parent, minlength=g.n_faces) > 0).all()


def test_link_convexity_matches_kernel(sample_models):
    for m in sample_models[:10]:
        g = build_hier_graph(m.solid, triangulate(m.solid), m.labels)
        code = {tuple(l): int(c) for l, c in zip(g.face_links.tolist(), g.face_link_conv)}
        for eid, (a, b) in m.solid.face_adjacency.items():
            key = (min(a, b), max(a, b))
            if key in code and a != b:
                kinds = {CONVEXITY_CODE[edge_convexity(m.solid, e)] for e, p in m.solid.face_adjacency.items()
                         if tuple(sorted(p)) == key}
                assert code[key] in kinds


def test_normalization(sample_models):
    m = sample_models[0]
    mesh = triangulate(m.solid)
    raw = build_hier_graph(m.solid, mesh, m.labels)
    g = normalize(raw, mesh.vertices)
    assert g.face_feats[:, 2].sum() == pytest.approx(1.0)
    assert g.facet_pos.min() >= 0 and g.facet_pos.max() <= 1
    assert normalize(g) is g
    assert (g.face_labels == raw.face_labels).all()
    box = make_box(40, 30, 20)
    gb = graph_from_model(box, stock_labels(box))
    top = next(i for i, f in enumerate(box.faces) if f.tag == ("stock", 2, 1))
    assert gb.face_pos[top].tolist() == [0.5, 0.5, 1.0]
    assert gb.facet_pos.max(axis=0).tolist() <= [1.0, 1.0, 1.0]


def test_normalization_ignores_placement(sample_models):
    m = sample_models[1]
    a = graph_from_model(m.solid, m.labels)
    b = graph_from_model(m.solid.transformed(None, (30.0, -10.0, 700.0)), m.labels)
    assert np.allclose(a.face_feats, b.face_feats, atol=1e-9)
    assert np.allclose(a.facet_feats, b.facet_feats, atol=1e-9)


def test_degenerate_bbox():
    g = dummy("flat", 2, 3)
    g = HierGraph(**{**g.__dict__, "normalized": False})
    with pytest.raises(InputError):
        normalize(g)


def test_face_relabelling_isomorphic(sample_models):
    rng = np.random.default_rng(0)
    for m in sample_models[:5]:
        perm = rng.permutation(len(m.solid.faces))
        s2 = Solid(m.solid.vertices, m.solid.edges, tuple(m.solid.faces[i] for i in perm), m.solid.recipe)
        l2 = [m.labels[i] for i in perm]
        assert wl_hash(graph_from_model(m.solid, m.labels)) == wl_hash(graph_from_model(s2, l2))


def test_batches_split_and_fill():
    assert len(make_batches([dummy("a", 100, 2900), dummy("b", 100, 2400)])) == 2
    (one,) = make_batches([dummy("a", 100, 1900), dummy("b", 100, 2800)])
    assert one.n_vertices == 4900


def test_batches_cover_input_and_respect_cap():
    rng = np.random.default_rng(1)
    graphs = [dummy(f"g{k}", 10, int(rng.integers(100, 3000))) for k in range(40)]
    batches = make_batches(graphs, seed=3)
    assert all(b.n_vertices < 5000 for b in batches)
    assert sorted(n for b in batches for n in b.names) == sorted(g.name for g in graphs)
    again = make_batches(graphs, seed=3)
    assert [b.names for b in batches] == [b.names for b in again]


def test_oversize_names_model():
    with pytest.raises(OversizeGraph, match="huge"):
        make_batches([dummy("huge", 10, 4990)])


def test_hgb_round_trip(tmp_path, sample_models):
    graphs = [graph_from_model(m.solid, m.labels, name=f"m{k}") for k, m in enumerate(sample_models[:12])]
    batches = make_batches(graphs)
    write_hgb(tmp_path / "x.hgb", batches)
    back = read_hgb(tmp_path / "x.hgb")
    assert len(back) == len(batches)
    assert all(batches_equal(a, b) for a, b in zip(batches, back))
    g0 = back[0].graph(0)
    assert g0.name == back[0].names[0]


def test_hgb_corruption_detected(sample_models):
    graphs = [graph_from_model(m.solid, m.labels, name=f"m{k}") for k, m in enumerate(sample_models[:3])]
    data = serialize_batches(make_batches(graphs))
    with pytest.raises(ContainerError):
        deserialize_batches(data[:-1] + bytes([data[-1] ^ 0xFF]))
    with pytest.raises(ContainerError):
        deserialize_batches(data[: len(data) // 2])
    with pytest.raises(ContainerError):
        deserialize_batches(b"XXXX" + data[4:])


def test_hgb_empty():
    data = serialize_batches([])
    assert data[:4] == b"HGB1"
    assert deserialize_batches(data) == []
