"""Two-level graphs (B-Rep faces over mesh facets), batching and the .hgb container.

Container layout (all integers little-endian)::

    header   magic "HGB1" | u32 version | u32 n_batches | u32 reserved | u32 crc32(previous 16 bytes)
    index    n_batches x 8 u64: n_graphs, n_faces, n_facets, n_face_links,
             n_facet_links, names_bytes, data_offset, data_length | u32 crc32(index)
    data     per batch: names (utf-8, '\\n' separated) then the arrays of
             ``_ARRAYS`` in order, raw little-endian | u32 crc32(section)

``data_offset`` counts from the start of the file.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, fields, replace
from typing import Optional, Sequence

import numpy as np

from .brep import EdgeConvexity, Plane, Solid, edge_convexity, face_area, face_centroid
from .errors import ContainerError, InputError, OversizeGraph
from .mesh import TriMesh
from .taxonomy import N_CLASSES

CONVEXITY_CODE = {EdgeConvexity.CONVEX: 0, EdgeConvexity.CONCAVE: 1, EdgeConvexity.SMOOTH: 2}
N_CONVEXITY = 3
FACE_FEATURES = 6  # plane, cylinder, area, centroid xyz
FACET_FEATURES = 4  # unit normal, offset
VERTEX_CAP = 5000


@dataclass(frozen=True)
class HierGraph:
    name: str
    face_feats: np.ndarray  # (F, 6)
    face_pos: np.ndarray  # (F, 3)
    face_labels: np.ndarray  # (F,)
    face_instances: np.ndarray  # (F,)
    face_links: np.ndarray  # (E1, 2), a < b
    face_link_conv: np.ndarray  # (E1,)
    facet_feats: np.ndarray  # (T, 4)
    facet_pos: np.ndarray  # (T, 3)
    facet_links: np.ndarray  # (E2, 2), a < b
    facet_parent: np.ndarray  # (T,)
    normalized: bool = False

    @property
    def n_faces(self) -> int:
        return int(self.face_feats.shape[0])

    @property
    def n_facets(self) -> int:
        return int(self.facet_feats.shape[0])

    @property
    def n_vertices(self) -> int:
        return self.n_faces + self.n_facets


def _pair_links(pairs: dict) -> tuple[np.ndarray, np.ndarray]:
    keys = sorted(pairs)
    links = np.asarray(keys, dtype=np.int64).reshape(-1, 2)
    conv = np.asarray([pairs[k] for k in keys], dtype=np.int64)
    return links, conv


def build_hier_graph(solid: Solid, mesh: TriMesh, labels: Sequence, name: str = "") -> HierGraph:
    """``labels`` holds a class index or a (class, instance) pair per face."""
    nf = len(solid.faces)
    if labels is None or len(labels) != nf:
        raise InputError(f"{name or 'model'}: {0 if labels is None else len(labels)} labels for {nf} faces")
    cls = np.zeros(nf, dtype=np.int64)
    inst = np.zeros(nf, dtype=np.int64)
    for k, lab in enumerate(labels):
        if lab is None:
            raise InputError(f"{name or 'model'}: face {k} has no label")
        c, i = (lab, 0) if np.isscalar(lab) else (lab[0], lab[1])
        if not 0 <= int(c) < N_CLASSES:
            raise InputError(f"{name or 'model'}: face {k} label {c} out of range")
        cls[k], inst[k] = int(c), int(i)

    feats = np.zeros((nf, FACE_FEATURES))
    for fi, f in enumerate(solid.faces):
        feats[fi, 0 if isinstance(f.surface, Plane) else 1] = 1.0
        feats[fi, 2] = face_area(solid, fi)
        feats[fi, 3:6] = face_centroid(solid, fi)

    pairs: dict[tuple[int, int], int] = {}
    for eid in sorted(solid.face_adjacency):
        a, b = solid.face_adjacency[eid]
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        if key not in pairs:
            pairs[key] = CONVEXITY_CODE[edge_convexity(solid, eid)]
    face_links, face_conv = _pair_links(pairs)

    tri = mesh.triangles
    v = mesh.vertices[tri]
    normals = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    cent = v.mean(axis=1)
    d = np.einsum("ij,ij->i", normals, cent)
    facet_feats = np.concatenate([normals, d[:, None]], axis=1)

    edge_owner: dict[tuple[int, int], int] = {}
    links = set()
    for t, (a, b, c) in enumerate(tri.tolist()):
        for p, q in ((a, b), (b, c), (c, a)):
            key = (min(p, q), max(p, q))
            other = edge_owner.pop(key, None)
            if other is None:
                edge_owner[key] = t
            else:
                links.add((min(other, t), max(other, t)))
    facet_links = np.asarray(sorted(links), dtype=np.int64).reshape(-1, 2)

    return HierGraph(
        name, feats, feats[:, 3:6].copy(), cls, inst, face_links, face_conv,
        facet_feats, cent, facet_links, mesh.face_ids.astype(np.int64).copy(), False,
    )


def normalize(graph: HierGraph, mesh_vertices: Optional[np.ndarray] = None) -> HierGraph:
    """Per-model scaling into the unit bounding box; a second call is a no-op."""
    if graph.normalized:
        return graph
    pts = mesh_vertices if mesh_vertices is not None else np.concatenate([graph.facet_pos, graph.face_pos])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    ext = hi - lo
    if not np.all(ext > 0) or not np.all(np.isfinite(ext)):
        raise InputError(f"{graph.name or 'model'}: degenerate bounding box")
    diag = float(np.linalg.norm(ext))
    face = graph.face_feats.copy()
    face[:, 2] = face[:, 2] / face[:, 2].sum()
    face[:, 3:6] = np.clip((face[:, 3:6] - lo) / ext, 0.0, 1.0)
    facet = graph.facet_feats.copy()
    facet[:, 3] = (facet[:, 3] - facet[:, :3] @ lo) / diag
    facet_pos = np.clip((graph.facet_pos - lo) / ext, 0.0, 1.0)
    return replace(graph, face_feats=face, face_pos=face[:, 3:6].copy(), facet_feats=facet, facet_pos=facet_pos, normalized=True)


def graph_from_model(solid: Solid, labels, name: str = "", step: Optional[float] = None) -> HierGraph:
    from .mesh import DEFAULT_STEP, triangulate

    mesh = triangulate(solid, DEFAULT_STEP if step is None else step)
    return normalize(build_hier_graph(solid, mesh, labels, name), mesh.vertices)


# ---------------------------------------------------------------------------
# batches


@dataclass(frozen=True)
class GraphBatch:
    names: tuple[str, ...]
    face_offsets: np.ndarray  # (G+1,)
    facet_offsets: np.ndarray  # (G+1,)
    face_feats: np.ndarray
    face_pos: np.ndarray
    face_labels: np.ndarray
    face_instances: np.ndarray
    face_links: np.ndarray
    face_link_conv: np.ndarray
    facet_feats: np.ndarray
    facet_pos: np.ndarray
    facet_links: np.ndarray
    facet_parent: np.ndarray

    @property
    def n_graphs(self) -> int:
        return len(self.names)

    @property
    def n_faces(self) -> int:
        return int(self.face_feats.shape[0])

    @property
    def n_facets(self) -> int:
        return int(self.facet_feats.shape[0])

    @property
    def n_vertices(self) -> int:
        return self.n_faces + self.n_facets

    def graph(self, g: int) -> HierGraph:
        f0, f1 = int(self.face_offsets[g]), int(self.face_offsets[g + 1])
        t0, t1 = int(self.facet_offsets[g]), int(self.facet_offsets[g + 1])
        fl = self.face_links
        mask = (fl[:, 0] >= f0) & (fl[:, 0] < f1)
        tl = self.facet_links
        tmask = (tl[:, 0] >= t0) & (tl[:, 0] < t1)
        return HierGraph(
            self.names[g], self.face_feats[f0:f1], self.face_pos[f0:f1], self.face_labels[f0:f1],
            self.face_instances[f0:f1], fl[mask] - f0, self.face_link_conv[mask],
            self.facet_feats[t0:t1], self.facet_pos[t0:t1], tl[tmask] - t0,
            self.facet_parent[t0:t1] - f0, True,
        )


def pack(graphs: Sequence[HierGraph]) -> GraphBatch:
    fo = np.zeros(len(graphs) + 1, dtype=np.int64)
    to = np.zeros(len(graphs) + 1, dtype=np.int64)
    for k, g in enumerate(graphs):
        fo[k + 1] = fo[k] + g.n_faces
        to[k + 1] = to[k] + g.n_facets

    def cat(attr, shape, dtype, shift=None):
        parts = []
        for k, g in enumerate(graphs):
            a = getattr(g, attr)
            if shift == "face":
                a = a + fo[k]
            elif shift == "facet":
                a = a + to[k]
            parts.append(a)
        if not parts:
            return np.zeros(shape, dtype=dtype)
        return np.concatenate(parts).astype(dtype, copy=False)

    return GraphBatch(
        tuple(g.name for g in graphs), fo, to,
        cat("face_feats", (0, FACE_FEATURES), np.float64), cat("face_pos", (0, 3), np.float64),
        cat("face_labels", (0,), np.int64), cat("face_instances", (0,), np.int64),
        cat("face_links", (0, 2), np.int64, "face"), cat("face_link_conv", (0,), np.int64),
        cat("facet_feats", (0, FACET_FEATURES), np.float64), cat("facet_pos", (0, 3), np.float64),
        cat("facet_links", (0, 2), np.int64, "facet"), cat("facet_parent", (0,), np.int64, "face"),
    )


def make_batches(graphs: Sequence[HierGraph], cap: int = VERTEX_CAP, seed: int = 0) -> list[GraphBatch]:
    """Seeded shuffle then first-fit packing with fewer than ``cap`` vertices per batch."""
    for g in graphs:
        if g.n_vertices >= cap:
            raise OversizeGraph(f"graph {g.name or '?'} has {g.n_vertices} vertices (cap {cap})")
    order = np.random.default_rng(np.random.SeedSequence([int(seed), 0xBA7C])).permutation(len(graphs))
    bins: list[list[int]] = []
    totals: list[int] = []
    for idx in order.tolist():
        n = graphs[idx].n_vertices
        for b in range(len(bins)):
            if totals[b] + n < cap:
                bins[b].append(idx)
                totals[b] += n
                break
        else:
            bins.append([idx])
            totals.append(n)
    return [pack([graphs[i] for i in b]) for b in bins]


# ---------------------------------------------------------------------------
# container

MAGIC = b"HGB1"
VERSION = 1
_ARRAYS = [
    ("face_offsets", "<i8", 1, "G1"), ("facet_offsets", "<i8", 1, "G1"),
    ("face_feats", "<f8", FACE_FEATURES, "F"), ("face_pos", "<f8", 3, "F"),
    ("face_labels", "<i8", 1, "F"), ("face_instances", "<i8", 1, "F"),
    ("face_links", "<i8", 2, "E1"), ("face_link_conv", "<i8", 1, "E1"),
    ("facet_feats", "<f8", FACET_FEATURES, "T"), ("facet_pos", "<f8", 3, "T"),
    ("facet_links", "<i8", 2, "E2"), ("facet_parent", "<i8", 1, "T"),
]
_IDX = struct.Struct("<8Q")


def _counts(b: GraphBatch) -> dict:
    return {"G1": b.n_graphs + 1, "F": b.n_faces, "T": b.n_facets, "E1": len(b.face_links), "E2": len(b.facet_links)}


def serialize_batches(batches: Sequence[GraphBatch]) -> bytes:
    for b in batches:
        if b.n_vertices >= VERTEX_CAP:
            raise OversizeGraph(f"batch with {b.n_vertices} vertices exceeds the cap")
    sections = []
    for b in batches:
        names = "\n".join(b.names).encode("utf-8")
        body = names + b"".join(np.ascontiguousarray(getattr(b, a), dtype=dt).tobytes() for a, dt, _, _ in _ARRAYS)
        sections.append((b, len(names), body))
    head = MAGIC + struct.pack("<III", VERSION, len(batches), 0)
    head += struct.pack("<I", zlib.crc32(head))
    offset = len(head) + _IDX.size * len(batches) + 4
    index = b""
    for b, nlen, body in sections:
        c = _counts(b)
        index += _IDX.pack(b.n_graphs, c["F"], c["T"], c["E1"], c["E2"], nlen, offset, len(body))
        offset += len(body) + 4
    out = head + index + struct.pack("<I", zlib.crc32(index))
    for _, _, body in sections:
        out += body + struct.pack("<I", zlib.crc32(body))
    return out


def deserialize_batches(data: bytes) -> list[GraphBatch]:
    data = bytes(data)
    if len(data) < 20:
        raise ContainerError("truncated header")
    if data[:4] != MAGIC:
        raise ContainerError("not an HGB container (bad magic)")
    version, n, _ = struct.unpack_from("<III", data, 4)
    if struct.unpack_from("<I", data, 16)[0] != zlib.crc32(data[:16]):
        raise ContainerError("header checksum mismatch")
    if version != VERSION:
        raise ContainerError(f"unsupported container version {version}")
    idx_end = 20 + _IDX.size * n
    if len(data) < idx_end + 4:
        raise ContainerError("truncated index")
    index = data[20:idx_end]
    if struct.unpack_from("<I", data, idx_end)[0] != zlib.crc32(index):
        raise ContainerError("index checksum mismatch")
    out = []
    for k in range(n):
        g, nf, nt, e1, e2, nlen, off, length = _IDX.unpack_from(index, k * _IDX.size)
        if off + length + 4 > len(data):
            raise ContainerError(f"batch {k} is truncated")
        body = data[off : off + length]
        if struct.unpack_from("<I", data, off + length)[0] != zlib.crc32(body):
            raise ContainerError(f"batch {k} checksum mismatch")
        counts = {"G1": g + 1, "F": nf, "T": nt, "E1": e1, "E2": e2}
        pos = nlen
        arrays = {}
        for name, dt, width, key in _ARRAYS:
            cnt = counts[key] * width
            nbytes = cnt * 8
            if pos + nbytes > length:
                raise ContainerError(f"batch {k} section too short")
            a = np.frombuffer(body, dtype=dt, count=cnt, offset=pos).astype(np.int64 if "i" in dt else np.float64)
            arrays[name] = a.reshape(-1, width) if width > 1 else a
            pos += nbytes
        if pos != length:
            raise ContainerError(f"batch {k} has trailing bytes")
        try:
            names = body[:nlen].decode("utf-8").split("\n") if g else []
        except UnicodeDecodeError:
            raise ContainerError(f"batch {k} has undecodable names") from None
        if len(names) != g:
            raise ContainerError(f"batch {k} name count mismatch")
        out.append(GraphBatch(tuple(names), **arrays))
    return out


def write_hgb(path, batches: Sequence[GraphBatch]) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_batches(batches))


def read_hgb(path) -> list[GraphBatch]:
    with open(path, "rb") as fh:
        return deserialize_batches(fh.read())


def batches_equal(a: GraphBatch, b: GraphBatch) -> bool:
    if a.names != b.names:
        return False
    for f in fields(GraphBatch):
        if f.name == "names":
            continue
        x, y = getattr(a, f.name), getattr(b, f.name)
        if x.shape != y.shape or x.dtype != y.dtype or x.tobytes() != y.tobytes():
            return False
    return True
