"""Facet meshes of kernel solids.

Each topological edge is discretised once so neighbouring faces share the
same boundary vertices and the mesh is watertight. Planar faces are
triangulated by ear clipping (holes are bridged into the outer loop),
cylindrical faces by a strip between their two arcs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .brep import CircleCurve, Cylinder, Line, Plane, Solid, arc_sweep, face_frame, face_normal_at
from .errors import MeshError

DEFAULT_STEP = math.pi / 12


@dataclass(frozen=True)
class TriMesh:
    vertices: np.ndarray  # (N, 3)
    triangles: np.ndarray  # (M, 3) int, counter-clockwise seen from outside
    face_ids: np.ndarray  # (M,) owning B-Rep face

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def triangle_normals(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def triangle_areas(self) -> np.ndarray:
        v = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    def triangle_centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)


def _arc_count(sweep: float, step: float) -> int:
    return max(1, math.ceil(abs(sweep) / step - 1e-6))


def _edge_polylines(solid: Solid, step: float, verts: list) -> list[list[int]]:
    """Mesh vertex ids along every edge, from its start to its end."""
    out = []
    for eid, e in enumerate(solid.edges):
        if isinstance(e.curve, Line):
            out.append([e.start, e.end])
            continue
        c = e.curve
        sweep = arc_sweep(solid, eid)
        n = _arc_count(sweep, step)
        ctr = np.asarray(c.center)
        ax = np.asarray(c.axis)
        r0 = np.asarray(solid.vertices[e.start]) - ctr
        ids = [e.start]
        for k in range(1, n):
            th = sweep * k / n
            p = ctr + r0 * math.cos(th) + np.cross(ax, r0) * math.sin(th) + ax * np.dot(ax, r0) * (1 - math.cos(th))
            verts.append(p)
            ids.append(len(verts) - 1)
        ids.append(e.end)
        out.append(ids)
    return out


def _loop_ids(loop, polylines) -> list[int]:
    ids: list[int] = []
    for eid, fwd in loop:
        pl = polylines[eid] if fwd else polylines[eid][::-1]
        ids.extend(pl[:-1])
    return ids


# ---------------------------------------------------------------------------
# ear clipping


def _cross2(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_cross(p, q, a, b) -> bool:
    d1, d2 = _cross2(p, q, a), _cross2(p, q, b)
    d3, d4 = _cross2(a, b, p), _cross2(a, b, q)
    return ((d1 > 1e-12 and d2 < -1e-12) or (d1 < -1e-12 and d2 > 1e-12)) and (
        (d3 > 1e-12 and d4 < -1e-12) or (d3 < -1e-12 and d4 > 1e-12)
    )


def _point_in_poly(q, pts) -> bool:
    inside = False
    n = len(pts)
    for k in range(n):
        a, b = pts[k], pts[(k + 1) % n]
        if (a[1] > q[1]) != (b[1] > q[1]):
            x = a[0] + (q[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if x > q[0]:
                inside = not inside
    return inside


def _bridge(outer: list[int], holes: list[list[int]], xy: dict) -> list[int]:
    """Splice holes into the outer loop through mutually visible vertex pairs."""
    poly = list(outer)
    holes = sorted(holes, key=lambda h: -max(xy[i][0] for i in h))
    for h_idx, hole in enumerate(holes):
        rest = holes[h_idx + 1 :]
        m_pos = max(range(len(hole)), key=lambda k: (xy[hole[k]][0], -xy[hole[k]][1]))
        M = xy[hole[m_pos]]
        edges = [(poly[k], poly[(k + 1) % len(poly)]) for k in range(len(poly))]
        for h in [hole] + rest:
            edges += [(h[k], h[(k + 1) % len(h)]) for k in range(len(h))]
        order = sorted(range(len(poly)), key=lambda k: math.dist(xy[poly[k]], M))
        chosen = None
        for k in order:
            V = xy[poly[k]]
            if math.dist(V, M) < 1e-12:
                continue
            if any(_segments_cross(M, V, xy[a], xy[b]) for a, b in edges):
                continue
            mid = ((M[0] + V[0]) / 2, (M[1] + V[1]) / 2)
            if not _point_in_poly(mid, [xy[i] for i in poly]):
                continue
            if any(_point_in_poly(mid, [xy[i] for i in h]) for h in rest):
                continue
            # the bridge must leave V inside its interior angle
            a, b = xy[poly[k - 1]], xy[poly[(k + 1) % len(poly)]]
            if _cross2(a, V, b) >= 0:
                if not (_cross2(a, V, M) > -1e-12 and _cross2(V, b, M) > -1e-12):
                    continue
            else:
                if _cross2(a, V, M) <= 1e-12 and _cross2(V, b, M) <= 1e-12:
                    continue
            chosen = k
            break
        if chosen is None:
            raise MeshError("no visible bridge for a face hole")
        hv = hole[m_pos:] + hole[: m_pos + 1]
        poly = poly[: chosen + 1] + hv + poly[chosen:]
    return poly


def ear_clip(poly: list[int], xy: dict) -> list[tuple[int, int, int]]:
    """Triangulate a simple counter-clockwise polygon (possibly with bridge seams)."""
    idx = list(poly)
    pts = np.array([xy[i] for i in idx], dtype=float)
    tris: list[tuple[int, int, int]] = []
    alive = list(range(len(idx)))
    scale = max(1.0, float(np.ptp(pts, axis=0).max())) if len(pts) else 1.0
    eps = 1e-12 * scale * scale
    n0 = len(pts)
    if n0 < 3 or abs(sum(_cross2(pts[0], pts[k], pts[k + 1]) for k in range(1, n0 - 1))) <= eps * n0:
        raise MeshError("degenerate (zero-area) loop")

    def is_ear(pos: int, strict: bool) -> bool:
        n = len(alive)
        ip, ic, inx = alive[pos - 1], alive[pos], alive[(pos + 1) % n]
        a, b, c = pts[ip], pts[ic], pts[inx]
        if _cross2(a, b, c) <= eps:
            return False
        others = np.array([k for k in alive if k not in (ip, ic, inx)], dtype=int)
        if others.size == 0:
            return True
        q = pts[others]
        same = (
            (np.abs(q - a).max(axis=1) < 1e-12)
            | (np.abs(q - b).max(axis=1) < 1e-12)
            | (np.abs(q - c).max(axis=1) < 1e-12)
        )
        q = q[~same]
        if q.size == 0:
            return True
        d1 = (b[0] - a[0]) * (q[:, 1] - a[1]) - (b[1] - a[1]) * (q[:, 0] - a[0])
        d2 = (c[0] - b[0]) * (q[:, 1] - b[1]) - (c[1] - b[1]) * (q[:, 0] - b[0])
        d3 = (a[0] - c[0]) * (q[:, 1] - c[1]) - (a[1] - c[1]) * (q[:, 0] - c[0])
        t = -eps if strict else eps
        inside = (d1 >= t) & (d2 >= t) & (d3 >= t) if strict else (d1 > t) & (d2 > t) & (d3 > t)
        return not bool(inside.any())

    while len(alive) > 3:
        found = False
        for strict in (True, False):
            for pos in range(len(alive)):
                if is_ear(pos, strict):
                    n = len(alive)
                    tris.append((idx[alive[pos - 1]], idx[alive[pos]], idx[alive[(pos + 1) % n]]))
                    del alive[pos]
                    found = True
                    break
            if found:
                break
        if not found:
            # only collinear remnants can remain here
            area = sum(_cross2(pts[alive[0]], pts[alive[k]], pts[alive[k + 1]]) for k in range(1, len(alive) - 1))
            if abs(area) <= eps * len(alive):
                return tris
            raise MeshError("ear clipping failed")
    if len(alive) == 3 and _cross2(pts[alive[0]], pts[alive[1]], pts[alive[2]]) > eps:
        tris.append((idx[alive[0]], idx[alive[1]], idx[alive[2]]))
    return tris


# ---------------------------------------------------------------------------


def _planar_tris(solid: Solid, fi: int, polylines, verts) -> list[tuple[int, int, int]]:
    face = solid.faces[fi]
    o, u, v, _ = face_frame(face)
    loops = [_loop_ids(lp, polylines) for lp in face.loops]
    xy = {}
    for lp in loops:
        for i in lp:
            d = np.asarray(verts[i]) - o
            xy[i] = (float(np.dot(d, u)), float(np.dot(d, v)))
    poly = _bridge(loops[0], loops[1:], xy) if len(loops) > 1 else loops[0]
    # duplicated ids from bridging need distinct keys for the clipper
    keyed = []
    xy2 = {}
    for k, i in enumerate(poly):
        keyed.append(k)
        xy2[k] = xy[i]
    return [(poly[a], poly[b], poly[c]) for a, b, c in ear_clip(keyed, xy2)]


def _cylinder_tris(solid: Solid, fi: int, polylines, verts) -> list[tuple[int, int, int]]:
    face = solid.faces[fi]
    s = face.surface
    assert isinstance(s, Cylinder)
    ax = np.asarray(s.axis)
    arcs = [eid for lp in face.loops for eid, _ in lp if isinstance(solid.edges[eid].curve, CircleCurve)]
    if len(arcs) != 2:
        raise MeshError(f"cylindrical face {fi} needs two arcs")
    rows = []
    for eid in arcs:
        pl = list(polylines[eid])
        if float(np.dot(solid.edges[eid].curve.axis, ax)) < 0:
            pl = pl[::-1]
        rows.append(pl)
    o = np.asarray(s.origin)
    h = [float(np.dot(np.asarray(verts[r[0]]) - o, ax)) for r in rows]
    if h[0] > h[1]:
        rows.reverse()
    b, t = rows
    if len(b) != len(t):
        raise MeshError("cylinder boundary arcs discretised differently")
    tris = []
    for k in range(len(b) - 1):
        tris.append((b[k], b[k + 1], t[k + 1]))
        tris.append((b[k], t[k + 1], t[k]))
    out = []
    for tri in tris:
        p = np.asarray([verts[i] for i in tri])
        if np.linalg.norm(np.cross(p[1] - p[0], p[2] - p[0])) < 1e-14:
            continue
        n = np.cross(p[1] - p[0], p[2] - p[0])
        if float(np.dot(n, face_normal_at(face, p.mean(axis=0)))) < 0:
            tri = (tri[0], tri[2], tri[1])
        out.append(tri)
    return out


def triangulate(solid: Solid, step: float = DEFAULT_STEP) -> TriMesh:
    if not step > 0:
        raise MeshError("angular step must be positive")
    verts: list = [np.asarray(p, dtype=float) for p in solid.vertices]
    polylines = _edge_polylines(solid, step, verts)
    tris: list[tuple[int, int, int]] = []
    owners: list[int] = []
    for fi, face in enumerate(solid.faces):
        if isinstance(face.surface, Plane):
            ft = _planar_tris(solid, fi, polylines, verts)
        else:
            ft = _cylinder_tris(solid, fi, polylines, verts)
        tris.extend(ft)
        owners.extend([fi] * len(ft))
    return TriMesh(np.asarray(verts, dtype=float), np.asarray(tris, dtype=np.int64).reshape(-1, 3), np.asarray(owners, dtype=np.int64))


# ---------------------------------------------------------------------------
# checks and queries


def is_watertight(mesh: TriMesh) -> bool:
    count: dict[tuple[int, int], int] = {}
    for a, b, c in mesh.triangles.tolist():
        for e in ((a, b), (b, c), (c, a)):
            count[e] = count.get(e, 0) + 1
    for (a, b), n in count.items():
        if n != 1 or count.get((b, a), 0) != 1:
            return False
    return True


def mesh_volume(mesh: TriMesh) -> float:
    v = mesh.vertices[mesh.triangles]
    return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)


def face_mesh_area(mesh: TriMesh, fi: int) -> float:
    return float(mesh.triangle_areas()[mesh.face_ids == fi].sum())


_RAY = np.array([0.5773, 0.6104, 0.5423])
_RAY = _RAY / np.linalg.norm(_RAY)


def contains_point(mesh: TriMesh, p) -> bool:
    """Ray-parity inside test against the facet mesh."""
    p = np.asarray(p, dtype=float)
    v = mesh.vertices[mesh.triangles]
    e1 = v[:, 1] - v[:, 0]
    e2 = v[:, 2] - v[:, 0]
    h = np.cross(_RAY, e2)
    a = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(a) > 1e-14
    f = np.where(ok, 1.0 / np.where(ok, a, 1.0), 0.0)
    s = p - v[:, 0]
    uu = f * np.einsum("ij,ij->i", s, h)
    q = np.cross(s, e1)
    vv = f * (q @ _RAY)
    t = f * np.einsum("ij,ij->i", e2, q)
    hit = ok & (uu >= 0) & (vv >= 0) & (uu + vv <= 1) & (t > 1e-12)
    return bool(hit.sum() % 2)
