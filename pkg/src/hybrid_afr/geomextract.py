"""Rule-based dimension, orientation and stock-size extraction.

Every rule reads the B-Rep geometry of one labelled feature instance
(surfaces, edge curves, vertex coordinates); nothing is taken from the
construction history.  Rules work in the model frame, a rotation whose
columns are the model axes in world coordinates (identity by default), so
dimensions are unchanged when the whole model is moved rigidly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .brep import CircleCurve, Cylinder, Plane, Solid, edge_convexity, face_normal_at, other_axes
from .errors import ExtractionMismatch, InvalidArgument
from .featuregen import notch_depth_axis
from .mesh import triangulate
from .taxonomy import ADDITIVE_CLASSES, NO_DEPTH_AXIS, STOCK, feature_class, label_name

PARALLEL_TOL = 1e-9


# ---------------------------------------------------------------------------
# measuring primitives


def linear_distance(p1, p2) -> float:
    return float(np.linalg.norm(np.asarray(p1, dtype=float) - np.asarray(p2, dtype=float)))


def circle_radius(center, point_on_rim) -> float:
    return linear_distance(center, point_on_rim)


def circumcircle(p1, p2, p3) -> tuple[np.ndarray, float]:
    """Centre and radius of the circle through three points (2-D or 3-D)."""
    a, b, c = (np.asarray(p, dtype=float) for p in (p1, p2, p3))
    if a.shape[0] == 2:
        a, b, c = (np.append(p, 0.0) for p in (a, b, c))
    u, v = b - a, c - a
    w = np.cross(u, v)
    ww = float(w @ w)
    if ww < 1e-24:
        raise InvalidArgument("points are collinear")
    ctr = a + (np.cross(w, u) * (v @ v) + np.cross(v, w) * (u @ u)) / (2.0 * ww)
    return ctr, linear_distance(ctr, a)


def angle_between(A, B) -> float:
    a = np.asarray(A, dtype=float)
    b = np.asarray(B, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise InvalidArgument("angle with a zero vector")
    return float(math.acos(max(-1.0, min(1.0, float(a @ b) / (na * nb)))))


@dataclass(frozen=True)
class RigidTransform:
    """p' = s R p + t."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    scale: float = 1.0

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        if R.shape != (3, 3) or not np.allclose(R.T @ R, np.eye(3), atol=1e-12, rtol=0):
            raise InvalidArgument("rotation must be orthonormal")
        if np.linalg.det(R) < 0:
            raise InvalidArgument("rotation must have determinant +1")
        if not self.scale > 0:
            raise InvalidArgument("scale must be positive")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))


def apply_transform(points, transform: RigidTransform) -> np.ndarray:
    P = np.asarray(points, dtype=float)
    return transform.scale * P @ transform.rotation.T + transform.translation


def axis_of(v, frame: Optional[np.ndarray] = None) -> int:
    """Model axis best aligned with ``v``; exact ties prefer Z, then X, then Y."""
    d = np.asarray(v, dtype=float)
    if frame is not None:
        d = np.asarray(frame, dtype=float).T @ d
    a = np.abs(d)
    best = max(a)
    for k in (2, 0, 1):
        if a[k] == best:
            return k
    raise InvalidArgument("direction is not finite")


# ---------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class FeatureInstance:
    cls: int
    faces: tuple[int, ...]
    adjacency: tuple[tuple[int, int], ...]
    instance_id: int

    @property
    def name(self) -> str:
        return label_name(self.cls)


def _split_label(lab) -> tuple[int, Optional[int]]:
    if isinstance(lab, (tuple, list)):
        return int(lab[0]), int(lab[1])
    return int(lab), None


def group_instances(labels: Sequence, face_adjacency: Mapping[int, tuple[int, int]]) -> list[FeatureInstance]:
    """Connected components of equally labelled non-stock faces.

    ``labels`` holds a class per face or a (class, instance) pair; when
    instance ids are present and agree within a component they are kept.
    """
    cls = [_split_label(lab)[0] for lab in labels]
    inst = [_split_label(lab)[1] for lab in labels]
    parent = list(range(len(cls)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    links: dict[tuple[int, int], None] = {}
    for a, b in face_adjacency.values():
        if a != b and cls[a] == cls[b] != STOCK:
            links[(min(a, b), max(a, b))] = None
            parent[find(a)] = find(b)
    comps: dict[int, list[int]] = {}
    for f, c in enumerate(cls):
        if c != STOCK:
            comps.setdefault(find(f), []).append(f)
    out = []
    for n, faces in enumerate(sorted(comps.values())):
        ids = {inst[f] for f in faces}
        iid = ids.pop() if len(ids) == 1 and None not in ids else n + 1
        fs = set(faces)
        adj = tuple(sorted(p for p in links if p[0] in fs))
        out.append(FeatureInstance(cls[faces[0]], tuple(faces), adj, iid))
    return out


class _View:
    """One instance seen in the model frame."""

    def __init__(self, solid: Solid, inst: FeatureInstance, frame: Optional[np.ndarray]):
        self.solid = solid
        self.inst = inst
        self.R = np.eye(3) if frame is None else np.asarray(frame, dtype=float)
        fs = set(inst.faces)
        self.planes: list[tuple[int, np.ndarray]] = []
        self.cyls: list[tuple[int, np.ndarray, float]] = []
        vids: set[int] = set()
        for fi in inst.faces:
            f = solid.faces[fi]
            vids |= solid.face_vertex_ids(fi)
            s = f.surface
            if isinstance(s, Plane):
                n = face_normal_at(f, np.asarray(s.origin))
                self.planes.append((fi, self.loc_dir(n)))
            elif isinstance(s, Cylinder):
                self.cyls.append((fi, self.loc_dir(s.axis), float(s.radius)))
        self.pts = np.array([self.loc(solid.vertices[v]) for v in sorted(vids)]).reshape(-1, 3)
        # circular edges: (edge id, centre, radius, faces using it, opening?)
        self.circles = []
        seen = set()
        for fi in inst.faces:
            for eid in solid.face_edges(fi):
                c = solid.edges[eid].curve
                if eid in seen or not isinstance(c, CircleCurve):
                    continue
                seen.add(eid)
                users = {u for u, _ in solid.edge_uses[eid]}
                self.circles.append((eid, self.loc(c.center), float(c.radius), users, not users <= fs))

    def loc(self, p) -> np.ndarray:
        return self.R.T @ np.asarray(p, dtype=float)

    def loc_dir(self, d) -> np.ndarray:
        return self.R.T @ np.asarray(d, dtype=float)

    def world(self, p) -> tuple[float, float, float]:
        w = self.R @ np.asarray(p, dtype=float)
        return (float(w[0]), float(w[1]), float(w[2]))

    def fail(self, why: str) -> ExtractionMismatch:
        return ExtractionMismatch(f"instance {self.inst.instance_id} ({self.inst.name}): {why}")

    def extent(self, k: int, pts: Optional[np.ndarray] = None) -> float:
        P = self.pts if pts is None else pts
        return float(P[:, k].max() - P[:, k].min())

    def face_pts(self, fi: int) -> np.ndarray:
        return np.array([self.loc(self.solid.vertices[v]) for v in sorted(self.solid.face_vertex_ids(fi))])

    def need(self, n_planes: Optional[int] = None, n_cyls: Optional[int] = None) -> None:
        if n_planes is not None and len(self.planes) != n_planes:
            raise self.fail(f"expected {n_planes} planar faces, found {len(self.planes)}")
        if n_cyls is not None and len(self.cyls) != n_cyls:
            raise self.fail(f"expected {n_cyls} cylindrical faces, found {len(self.cyls)}")


# ---------------------------------------------------------------------------
# shared rules


def _aligned(n: np.ndarray) -> Optional[int]:
    k = int(np.argmax(np.abs(n)))
    return k if abs(n[k]) > 1.0 - PARALLEL_TOL else None


def _perp(a: np.ndarray, b: np.ndarray) -> bool:
    return abs(float(a @ b)) < PARALLEL_TOL


def _floor_candidates(v: _View) -> list[tuple[int, np.ndarray]]:
    """Planes normal to every other planar face and parallel to every cylinder axis."""
    out = []
    for fi, n in v.planes:
        if all(_perp(n, m) for fj, m in v.planes if fj != fi) and all(
            abs(float(n @ ax)) > 1.0 - PARALLEL_TOL for _, ax, _ in v.cyls
        ):
            out.append((fi, n))
    return out


def _floor(v: _View) -> tuple[int, int]:
    cands = [(fi, n) for fi, n in _floor_candidates(v) if _aligned(n) is not None]
    if len(cands) != 1:
        raise v.fail(f"cannot identify a unique floor ({len(cands)} candidates)")
    fi, n = cands[0]
    return fi, _aligned(n)  # type: ignore[return-value]


def _common_axis(v: _View, normals: Sequence[np.ndarray]) -> int:
    """Axis shared by all walls (the direction they are swept along)."""
    for a in range(len(normals)):
        for b in range(a + 1, len(normals)):
            d = np.cross(normals[a], normals[b])
            nd = np.linalg.norm(d)
            if nd > 1e-6:
                k = _aligned(d / nd)
                if k is None or not all(_perp(n, d / nd) for n in normals):
                    raise v.fail("walls are not swept along a model axis")
                return k
    raise v.fail("walls are parallel")


def _projected(pts: np.ndarray, k: int, tol: float = 1e-7) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in pts:
        q = p.copy()
        q[k] = 0.0
        if not any(np.linalg.norm(q - r) < tol for r in out):
            out.append(q)
    return out


def _wall_width(v: _View, fi: int, k: int) -> float:
    pr = _projected(v.face_pts(fi), k)
    if len(pr) != 2:
        raise v.fail(f"face {fi} is not a straight wall along axis {k}")
    return linear_distance(pr[0], pr[1])


def _shape(v: _View, shape: str, k: int, walls: Sequence[int]) -> dict:
    b, c = other_axes(k)
    if shape == "circle":
        return {"Radius": v.cyls[0][2]}
    if shape == "rect":
        if len(walls) != 4:
            raise v.fail("rectangular profile needs four walls")
        return {"Length": v.extent(b), "Width": v.extent(c)}
    sides = [_wall_width(v, fi, k) for fi in walls]
    if shape == "tri":
        if len(sides) != 3:
            raise v.fail("triangular profile needs three walls")
        s = sorted(sides)
        return {"Side-1": s[0], "Side-2": s[1], "Side-3": s[2]}
    n = {"hex": 6, "pent": 5}[shape]
    if len(sides) != n or max(sides) - min(sides) > 1e-6 * max(sides):
        raise v.fail(f"profile is not a regular {n}-gon")
    return {"Side": float(np.mean(sides))}


def _circles(v: _View, opening: bool, face: Optional[int] = None) -> list[np.ndarray]:
    return [c[1] for c in v.circles if c[4] == opening and (face is None or face in c[3])]


def _arc_reach(v: _View, t: int, ctr: np.ndarray, r: float) -> float:
    """Distance along ``t`` from the open edge (farthest vertex) to the far side of an end arc."""
    far = float(np.max(np.abs(v.pts[:, t] - ctr[t])))
    return far + r


_SHAPE = {1: "circle", 2: "tri", 3: "rect", 4: "hex", 12: "circle", 13: "tri", 14: "rect", 15: "hex",
          24: "circle", 25: "rect", 26: "tri", 27: "hex", 28: "pent"}


# ---------------------------------------------------------------------------
# per-class rules: each returns (dimensions, depth axis in the model frame)


def _chamfer(v: _View):
    v.need(1, 0)
    fi, n = v.planes[0]
    a = next((q for q in range(3) if abs(n[q]) < PARALLEL_TOL), None)
    if a is None:
        raise v.fail("chamfer face does not run along a model axis")
    pr = _projected(v.face_pts(fi), a)
    if len(pr) != 2:
        raise v.fail("chamfer face is not a strip")
    p, q = pr
    i, j = other_axes(a)
    cands = []
    for x, y in ((q[i], p[j]), (p[i], q[j])):
        c = np.zeros(3)
        c[i], c[j] = x, y
        cands.append(c)
    c = max(cands, key=lambda c: float(n @ (c - p)))
    if float(n @ (c - p)) <= 0:
        raise v.fail("no removed corner on the outward side")
    ends = sorted((p, q), key=lambda e: abs(e[i] - c[i]), reverse=True)
    s1, s2 = linear_distance(ends[0], c), linear_distance(ends[1], c)
    ang = math.degrees(angle_between(ends[1] - ends[0], c - ends[0]))
    return {"Side-1": s1, "Side-2": s2, "Angle": ang}, None


def _round(v: _View):
    v.need(0, 1)
    fi, _, r = v.cyls[0]
    tangent = sorted(
        {u for eid in v.solid.face_edges(fi) for u, _ in v.solid.edge_uses[eid]
         if u != fi and edge_convexity(v.solid, eid) == "smooth"}
    )
    if len(tangent) != 2:
        raise v.fail(f"round blends {len(tangent)} faces, expected 2")
    return {"Radius": r, "Face index": (tangent[0], tangent[1])}, None


def _through_hole(v: _View):
    v.need(0, 1)
    _, ax, r = v.cyls[0]
    k = axis_of(ax)
    cs = sorted(_circles(v, True), key=lambda c: c[k])
    if len(cs) != 2:
        raise v.fail("through hole must meet the stock along two circles")
    return {"Radius": r, "Depth": linear_distance(cs[0], cs[1]), "Center": v.world(cs[1])}, k


def _passage(v: _View):
    v.need(None, 0)
    walls = [fi for fi, _ in v.planes]
    k = _common_axis(v, [n for _, n in v.planes])
    d = _shape(v, _SHAPE[v.inst.cls], k, walls)
    d["Depth"] = v.extent(k)
    return d, k


def _blind_hole(v: _View):
    v.need(1, 1)
    floor, k = _floor(v)
    _, _, r = v.cyls[0]
    top, bottom = _circles(v, True), _circles(v, False, floor)
    if len(top) != 1 or len(bottom) != 1:
        raise v.fail("blind hole needs one opening circle and one floor circle")
    return {"Radius": r, "Depth": linear_distance(bottom[0], top[0]), "Center": v.world(top[0])}, k


def _o_ring(v: _View):
    v.need(1, 2)
    floor, k = _floor(v)
    (fo, _, ro), (_, _, ri) = sorted(v.cyls, key=lambda c: -c[2])
    top = [c[1] for c in v.circles if c[4] and fo in c[3]]
    if len(top) != 1 or not ri < ro:
        raise v.fail("o-ring needs an outer opening circle and a smaller inner wall")
    return {"Radius": ro, "Width": ro - ri, "Depth": v.extent(k), "Center": v.world(top[0])}, k


def _pocket(v: _View):
    floor, k = _floor(v)
    walls = [fi for fi, _ in v.planes if fi != floor]
    d = _shape(v, _SHAPE[v.inst.cls], k, walls)
    d["Depth"] = v.extent(k)
    return d, k


def _circular_end_pocket(v: _View):
    v.need(3, 2)
    floor, k = _floor(v)
    n = next(m for fi, m in v.planes if fi == floor)
    radii = [r for _, _, r in v.cyls]
    if abs(radii[0] - radii[1]) > 1e-9 * max(radii):
        raise v.fail("end arcs differ in radius")
    ends = [[c[1] for c in v.circles if floor in c[3] and fc in c[3]] for fc, _, _ in v.cyls]
    if any(len(e) != 1 for e in ends):
        raise v.fail("each end arc must meet the floor once")
    length = linear_distance(ends[0][0], ends[1][0])
    if length < 1e-9:
        raise v.fail("end centres coincide; this is a circular pocket")
    top = _circles(v, True)
    if not top:
        raise v.fail("no opening arc")
    depth = float(np.max(np.abs((v.pts - top[0]) @ n)))
    return {"Width": 2.0 * radii[0], "Length": length, "Depth": depth}, k


def _through_slot(v: _View):
    cls = v.inst.cls
    v.need(3 if cls == 6 else 2, 0)
    o = _common_axis(v, [n for _, n in v.planes])
    if cls == 6:
        _, k = _floor(v)
        w = 3 - o - k
        return {"Width": v.extent(w), "Depth": v.extent(k), "Length": v.extent(o)}, k
    pr = _projected(v.pts, o)
    if len(pr) != 3:
        raise v.fail("V slot profile is not a triangle")
    k = None
    for q in other_axes(o):
        vals = sorted(p[q] for p in pr)
        if abs(vals[0] - vals[1]) < 1e-9 or abs(vals[1] - vals[2]) < 1e-9:
            k = q
    if k is None:
        raise v.fail("V slot has no opening edge on a model plane")
    s = sorted(linear_distance(pr[a], pr[(a + 1) % 3]) for a in range(3))
    return {"Side-1": s[0], "Side-2": s[1], "Side-3": s[2], "Depth": v.extent(k), "Length": v.extent(o)}, k


def _circular_thru_slot(v: _View):
    v.need(0, 1)
    _, ax, r = v.cyls[0]
    k = axis_of(ax)
    cs = sorted(_circles(v, True), key=lambda c: c[k])
    if len(cs) != 2:
        raise v.fail("slot arc must meet the stock at both ends")
    return {"Radius": r, "Depth": linear_distance(cs[0], cs[1]), "Center": v.world(cs[1])}, k


def _through_step(v: _View):
    cls = v.inst.cls
    v.need({8: 2, 9: 4, 10: 2}[cls], 0)
    a = _common_axis(v, [n for _, n in v.planes])
    i, j = other_axes(a)
    if cls != 10:
        dax = notch_depth_axis((i, j))
        wax = j if dax == i else i
        return {"Width": v.extent(wax), "Depth": v.extent(dax), "Length": v.extent(a)}, dax
    treads = [(fi, _aligned(n)) for fi, n in v.planes if _aligned(n) is not None]
    slants = [fi for fi, n in v.planes if _aligned(n) is None]
    if len(treads) != 1 or len(slants) != 1:
        raise v.fail("slanted step needs one tread and one slanted face")
    tread, dax = treads[0]
    wax = 3 - a - dax
    wb = v.extent(wax, v.face_pts(tread))
    p, q = _projected(v.face_pts(slants[0]), a)
    e = np.zeros(3)
    e[wax] = 1.0
    ang = angle_between(q - p, e)
    ang = min(ang, math.pi - ang)
    return {"Width": wb, "Depth": v.extent(dax), "Length": v.extent(a), "Angle": math.degrees(ang)}, dax


def _rect_blind_slot(v: _View):
    v.need(4, 0)
    cands = [(fi, _aligned(n)) for fi, n in _floor_candidates(v)]
    axes = sorted({k for _, k in cands if k is not None})
    if len(cands) != 2 or len(axes) != 2:
        raise v.fail("blind slot needs an end wall and a floor")
    k = notch_depth_axis(axes)
    t = axes[0] if axes[1] == k else axes[1]
    u = 3 - k - t
    return {"Width": v.extent(u), "Length": v.extent(t), "Depth": v.extent(k)}, k


def _u_blind_slot(v: _View):
    v.need(3, 1)
    _, ax, r = v.cyls[0]
    s = axis_of(ax)
    floors = [fi for fi, n in v.planes if _aligned(n) == s]
    sides = {_aligned(n) for fi, n in v.planes if fi not in floors}
    if len(floors) != 1 or len(sides) != 1 or None in sides:
        raise v.fail("slot needs two parallel side walls and a floor")
    u = sides.pop()
    t = 3 - s - u
    ctr = v.circles[0][1]
    reach = _arc_reach(v, t, ctr, r)
    if v.inst.cls == 18:
        return {"Radius": r, "Length": reach, "Depth": v.extent(s)}, s
    return {"Radius": r, "Length": v.extent(s), "Depth": reach}, t


def _blind_step(v: _View):
    cls = v.inst.cls
    if cls == 21:
        v.need(1, 1)
        floor, k = _floor(v)
        _, _, r = v.cyls[0]
        c = _circles(v, False, floor)
        if len(c) != 1:
            raise v.fail("quarter arc must meet the floor")
        return {"Radius": r, "Depth": v.extent(k), "Center": v.world(c[0])}, k
    if cls == 20:
        v.need(2, 0)
        floors = [(fi, _aligned(n)) for fi, n in v.planes if _aligned(n) is not None]
        walls = [fi for fi, n in v.planes if _aligned(n) is None]
        if len(floors) != 1 or len(walls) != 1:
            raise v.fail("triangular step needs a floor and one slanted wall")
        k = floors[0][1]
        b, c = other_axes(k)
        return {"Length": v.extent(b), "Width": v.extent(c), "Side": _wall_width(v, walls[0], k),
                "Depth": v.extent(k)}, k
    v.need(3, 0)
    axes = sorted(_aligned(n) for _, n in v.planes)  # type: ignore[type-var]
    if axes != [0, 1, 2]:
        raise v.fail("corner notch needs three mutually normal faces")
    k = notch_depth_axis(axes)
    b, c = other_axes(k)
    return {"Length": v.extent(b), "Width": v.extent(c), "Depth": v.extent(k)}, k


def _extrusion(v: _View):
    cap, k = _floor(v)
    cls = v.inst.cls
    walls = [fi for fi, _ in v.planes if fi != cap]
    d = _shape(v, _SHAPE[cls], k, walls)
    d["Depth"] = v.extent(k)
    if cls == 24:
        c = _circles(v, False, cap)
        if len(c) != 1:
            raise v.fail("cylindrical extrusion needs one cap circle")
        d["Center"] = v.world(c[0])
    return d, k


RULES = {0: _chamfer, 23: _round, 1: _through_hole, 7: _circular_thru_slot, 11: _o_ring, 12: _blind_hole,
         16: _circular_end_pocket, 17: _rect_blind_slot, 18: _u_blind_slot, 19: _u_blind_slot}
for _c in (2, 3, 4):
    RULES[_c] = _passage
for _c in (5, 6):
    RULES[_c] = _through_slot
for _c in (8, 9, 10):
    RULES[_c] = _through_step
for _c in (13, 14, 15):
    RULES[_c] = _pocket
for _c in (20, 21, 22):
    RULES[_c] = _blind_step
for _c in (24, 25, 26, 27, 28):
    RULES[_c] = _extrusion


# ---------------------------------------------------------------------------
# public extraction


DIMENSION_ORDER = ("Radius", "Length", "Width", "Side", "Side-1", "Side-2", "Side-3", "Depth", "Angle", "Center",
                   "Face index")


def ordered(dims: Mapping) -> dict:
    """Dimensions rearranged into report column order."""
    rank = {k: n for n, k in enumerate(DIMENSION_ORDER)}
    return {k: dims[k] for k in sorted(dims, key=lambda k: (rank.get(k, len(rank)), k))}


def _run(solid: Solid, inst: FeatureInstance, frame) -> tuple[dict, Optional[int]]:
    if inst.cls not in RULES:
        raise InvalidArgument(f"no extraction rule for class {inst.cls}")
    v = _View(solid, inst, frame)
    dims, k = RULES[inst.cls](v)
    for key, val in dims.items():
        if isinstance(val, float) and not val > 0:
            raise v.fail(f"{key} is not positive ({val})")
    return ordered(dims), k


def extract_dimensions(solid: Solid, inst: FeatureInstance, frame=None) -> dict:
    """Named dimensions of one instance, keys in report order."""
    return _run(solid, inst, frame)[0]


def extract_blind_hole(solid: Solid, inst: FeatureInstance, frame=None) -> dict:
    if inst.cls != 12:
        raise InvalidArgument("not a blind hole")
    return _blind_hole(_View(solid, inst, frame))[0]


def extract_circular_end_pocket(solid: Solid, inst: FeatureInstance, frame=None) -> dict:
    if inst.cls != 16:
        raise InvalidArgument("not a circular end pocket")
    return _circular_end_pocket(_View(solid, inst, frame))[0]


def depth_axis(solid: Solid, inst: FeatureInstance, frame=None) -> Optional[int]:
    if inst.cls in NO_DEPTH_AXIS:
        return None
    return _run(solid, inst, frame)[1]


def orientation_of_axis(k: Optional[int]) -> str:
    if k is None:
        return "None"
    return "Upright" if k == 2 else "Tilted"


def feature_orientation(solid: Solid, inst: FeatureInstance, frame=None) -> str:
    return orientation_of_axis(depth_axis(solid, inst, frame))


# ---------------------------------------------------------------------------
# stock sizes


@dataclass(frozen=True)
class BoundingBox:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    @property
    def dims(self) -> tuple[float, float, float]:
        return tuple(float(h - l) for l, h in zip(self.lo, self.hi))  # type: ignore[return-value]


@dataclass(frozen=True)
class StockSizes:
    min_box: BoundingBox
    max_box: BoundingBox

    @property
    def min_stock(self) -> tuple[float, float, float]:
        return self.min_box.dims

    @property
    def max_stock(self) -> tuple[float, float, float]:
        return self.max_box.dims


def _box(P: np.ndarray) -> BoundingBox:
    lo, hi = P.min(axis=0), P.max(axis=0)
    return BoundingBox(tuple(float(x) for x in lo), tuple(float(x) for x in hi))  # type: ignore[arg-type]


def stock_sizes(solid: Solid, labels: Sequence, frame=None, mesh=None) -> StockSizes:
    """Bounding boxes of the tessellation with and without additive-only vertices."""
    m = triangulate(solid) if mesh is None else mesh
    R = np.eye(3) if frame is None else np.asarray(frame, dtype=float)
    P = np.asarray(m.vertices) @ R
    cls = np.array([_split_label(lab)[0] for lab in labels])
    tri_add = np.isin(cls[m.face_ids], list(ADDITIVE_CLASSES))
    used_other = np.zeros(len(P), dtype=bool)
    used_other[np.asarray(m.triangles)[~tri_add].ravel()] = True
    return StockSizes(_box(P[used_other]), _box(P))


# ---------------------------------------------------------------------------
# reports


def _fmt(v) -> str:
    if isinstance(v, tuple):
        if all(isinstance(x, (int, np.integer)) for x in v):
            return "(" + ", ".join(str(int(x)) for x in v) + ")"
        return "(" + ", ".join(repr(round(float(x), 2)) for x in v) + ")"
    return repr(round(float(v), 2))


def _dims3(d) -> str:
    return "[" + " x ".join(f"{round(float(x), 2):g}" for x in d) + "]"


@dataclass
class InstanceReport:
    instance_id: int
    cls: int
    faces: tuple[int, ...]
    dimensions: dict
    orientation: str

    def line(self) -> str:
        dims = ", ".join(f"{k} {_fmt(v)}" if k == "Face index" else f"{k} = {_fmt(v)}"
                         for k, v in ordered(self.dimensions).items())
        return f"{label_name(self.cls)} | {dims} | {self.orientation}"

    def to_json(self) -> dict:
        return {
            "instance": self.instance_id,
            "class": self.cls,
            "name": feature_class(self.cls).display,
            "faces": list(self.faces),
            "dimensions": {k: list(v) if isinstance(v, tuple) else v for k, v in self.dimensions.items()},
            "orientation": self.orientation,
        }


@dataclass
class DimensionReport:
    instances: list[InstanceReport]
    stock: StockSizes
    errors: list[str] = field(default_factory=list)

    def text(self) -> str:
        lines = [r.line() for r in self.instances]
        lines += [f"! {e}" for e in self.errors]
        lines.append(f"Stock | min {_dims3(self.stock.min_stock)} max {_dims3(self.stock.max_stock)}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "instances": [r.to_json() for r in self.instances],
            "errors": list(self.errors),
            "min_stock": list(self.stock.min_stock),
            "max_stock": list(self.stock.max_stock),
        }


def extract_model(solid: Solid, labels: Sequence, frame=None, strict: bool = True) -> DimensionReport:
    """Group, dimension and orient every instance, then size the stock.

    With ``strict`` false, instances whose geometry contradicts their label
    are listed as errors instead of aborting the report.
    """
    reports = []
    errors = []
    for inst in group_instances(labels, solid.face_adjacency):
        try:
            dims, k = _run(solid, inst, frame)
        except ExtractionMismatch as exc:
            if strict:
                raise
            errors.append(str(exc))
            continue
        reports.append(InstanceReport(inst.instance_id, inst.cls, inst.faces, dims, orientation_of_axis(k)))
    reports.sort(key=lambda r: r.instance_id)
    return DimensionReport(reports, stock_sizes(solid, labels, frame), errors)


def truth_report(truth, labels: Sequence) -> DimensionReport:
    """The report a perfect extractor would print for a generated model."""
    faces: dict[int, list[int]] = {}
    for fi, lab in enumerate(labels):
        c, i = _split_label(lab)
        if c != STOCK and i is not None:
            faces.setdefault(i, []).append(fi)
    reports = [
        InstanceReport(f.instance, f.cls, tuple(faces.get(f.instance, ())), ordered(f.params), f.orientation)
        for f in sorted(truth.features, key=lambda f: f.instance)
    ]
    lo = (0.0, 0.0, 0.0)
    box_min = BoundingBox(lo, tuple(truth.min_stock()))  # type: ignore[arg-type]
    box_max = BoundingBox(lo, tuple(truth.max_stock()))  # type: ignore[arg-type]
    return DimensionReport(reports, StockSizes(box_min, box_max))
