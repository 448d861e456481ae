"""Restricted B-Rep kernel: axis-aligned stock plus swept-profile features.

Every solid produced here is a cuboid stock modified by a list of prisms.
A prism sweeps a planar profile (lines and arcs) along one world axis over
an interval; subtractive prisms remove material, additive ones sit on a
stock face. Faces of the result are computed exactly:

* each stock face is its rectangle minus the sections of the prisms that
  reach its plane;
* each prism contributes walls (profile boundary pieces swept over the
  interval) plus a floor or cap where the interval ends inside/outside
  the stock.

Shared edges are then merged into one topology. Prisms must not overlap
(checked with padded bounding boxes), which keeps every face exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Optional, Union

import numpy as np

from . import geom2d as g2
from .errors import GeometryError, InvalidArgument, PlacementRejected, TopologyError

Vec = tuple[float, float, float]

EXTENSION = 1.0  # how far open profiles reach past the stock
SMOOTH_TOL = 1e-6
PLANAR_TOL = 1e-9
VERTEX_TOL = 1e-6
DEFAULT_GAP = 0.5


def other_axes(k: int) -> tuple[int, int]:
    return tuple(a for a in (0, 1, 2) if a != k)  # type: ignore[return-value]


def frame_sign(k: int) -> int:
    """Sign of e_b x e_c along e_k for the sorted in-plane axes (b, c)."""
    return -1 if k == 1 else 1


def unit_axis(k: int, sign: float = 1.0) -> Vec:
    v = [0.0, 0.0, 0.0]
    v[k] = float(sign)
    return (v[0], v[1], v[2])


def lift(k: int, value: float, p: g2.Pt) -> Vec:
    b, c = other_axes(k)
    v = [0.0, 0.0, 0.0]
    v[k] = value
    v[b] = p[0]
    v[c] = p[1]
    return (v[0], v[1], v[2])


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0 or not np.isfinite(n):
        raise GeometryError("zero-length direction")
    return v / n


def _tup(v) -> Vec:
    return (float(v[0]), float(v[1]), float(v[2]))


# ---------------------------------------------------------------------------
# geometry carried by the topology


@dataclass(frozen=True)
class Plane:
    origin: Vec
    normal: Vec
    ref: Vec


@dataclass(frozen=True)
class Cylinder:
    origin: Vec
    axis: Vec
    radius: float
    ref: Vec


@dataclass(frozen=True)
class Line:
    origin: Vec
    direction: Vec


@dataclass(frozen=True)
class CircleCurve:
    """Circle in 3-D; arcs on it run counter-clockwise about ``axis``."""

    center: Vec
    axis: Vec
    radius: float
    ref: Vec


Surface = Union[Plane, Cylinder]
Curve = Union[Line, CircleCurve]


class EdgeConvexity:
    CONVEX = "convex"
    CONCAVE = "concave"
    SMOOTH = "smooth"
    ALL = ("convex", "concave", "smooth")


@dataclass(frozen=True)
class Edge:
    curve: Curve
    start: int
    end: int


OrientedEdge = tuple[int, bool]


@dataclass(frozen=True)
class Face:
    surface: Surface
    same_sense: bool
    loops: tuple[tuple[OrientedEdge, ...], ...]  # first loop is the outer bound
    tag: Optional[tuple] = None


@dataclass(frozen=True)
class Prism:
    axis: int
    profile: tuple  # region: tuple of loops, each a tuple of geom2d curves
    lo: float
    hi: float
    additive: bool = False
    instance: int = 0


@dataclass(frozen=True)
class Recipe:
    dims: Vec
    prisms: tuple[Prism, ...] = ()
    gap: float = DEFAULT_GAP


@dataclass(frozen=True, eq=False)
class Solid:
    vertices: tuple[Vec, ...]
    edges: tuple[Edge, ...]
    faces: tuple[Face, ...]
    recipe: Optional[Recipe] = field(default=None, compare=False)

    @cached_property
    def edge_uses(self) -> dict[int, list[tuple[int, bool]]]:
        """edge id -> [(face id, forward)] in face order."""
        uses: dict[int, list[tuple[int, bool]]] = {k: [] for k in range(len(self.edges))}
        for fi, f in enumerate(self.faces):
            for loop in f.loops:
                for eid, fwd in loop:
                    uses.setdefault(eid, []).append((fi, fwd))
        return uses

    @cached_property
    def face_adjacency(self) -> dict[int, tuple[int, int]]:
        """Shared edge id -> the two faces meeting there."""
        out = {}
        for eid, u in self.edge_uses.items():
            if len(u) == 2:
                out[eid] = (u[0][0], u[1][0])
        return out

    def face_edges(self, fi: int) -> list[int]:
        return [eid for loop in self.faces[fi].loops for eid, _ in loop]

    def face_vertex_ids(self, fi: int) -> set[int]:
        out: set[int] = set()
        for eid in self.face_edges(fi):
            e = self.edges[eid]
            out.add(e.start)
            out.add(e.end)
        return out

    def neighbors(self, fi: int) -> set[int]:
        out = set()
        for eid in self.face_edges(fi):
            for fj, _ in self.edge_uses[eid]:
                if fj != fi:
                    out.add(fj)
        return out

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        v = np.asarray(self.vertices)
        return v.min(axis=0), v.max(axis=0)

    def transformed(self, rotation=None, translation=(0.0, 0.0, 0.0)) -> "Solid":
        """Rigidly moved copy (the construction recipe is dropped)."""
        R = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        t = np.asarray(translation, dtype=float)

        def P(p):
            return _tup(R @ np.asarray(p) + t)

        def D(d):
            return _tup(R @ np.asarray(d))

        def curve(c):
            if isinstance(c, Line):
                return Line(P(c.origin), D(c.direction))
            return CircleCurve(P(c.center), D(c.axis), c.radius, D(c.ref))

        def surf(s):
            if isinstance(s, Plane):
                return Plane(P(s.origin), D(s.normal), D(s.ref))
            return Cylinder(P(s.origin), D(s.axis), s.radius, D(s.ref))

        return Solid(
            tuple(P(v) for v in self.vertices),
            tuple(Edge(curve(e.curve), e.start, e.end) for e in self.edges),
            tuple(replace(f, surface=surf(f.surface)) for f in self.faces),
            None,
        )


# ---------------------------------------------------------------------------
# curve / surface evaluation


def arc_sweep(solid: Solid, eid: int) -> float:
    e = solid.edges[eid]
    c = e.curve
    assert isinstance(c, CircleCurve)
    if e.start == e.end:
        return 2 * math.pi
    ctr = np.asarray(c.center)
    a = np.asarray(solid.vertices[e.start]) - ctr
    b = np.asarray(solid.vertices[e.end]) - ctr
    ax = np.asarray(c.axis)
    ang = math.atan2(float(np.dot(ax, np.cross(a, b))), float(np.dot(a, b)))
    return ang if ang > 1e-12 else ang + 2 * math.pi


def _rotate(v: np.ndarray, axis: np.ndarray, ang: float) -> np.ndarray:
    return v * math.cos(ang) + np.cross(axis, v) * math.sin(ang) + axis * np.dot(axis, v) * (1 - math.cos(ang))


def edge_point(solid: Solid, eid: int, t: float) -> np.ndarray:
    """Point at fraction ``t`` along an edge in its own direction."""
    e = solid.edges[eid]
    p0 = np.asarray(solid.vertices[e.start])
    if isinstance(e.curve, Line):
        return p0 + t * (np.asarray(solid.vertices[e.end]) - p0)
    c = e.curve
    ctr = np.asarray(c.center)
    return ctr + _rotate(p0 - ctr, np.asarray(c.axis), t * arc_sweep(solid, eid))


def edge_tangent(solid: Solid, eid: int, p: np.ndarray) -> np.ndarray:
    e = solid.edges[eid]
    if isinstance(e.curve, Line):
        return _unit(np.asarray(solid.vertices[e.end]) - np.asarray(solid.vertices[e.start]))
    c = e.curve
    return _unit(np.cross(np.asarray(c.axis), p - np.asarray(c.center)))


def face_normal_at(face: Face, p: np.ndarray) -> np.ndarray:
    s = face.surface
    if isinstance(s, Plane):
        n = np.asarray(s.normal, dtype=float)
    else:
        ax = np.asarray(s.axis)
        d = p - np.asarray(s.origin)
        n = _unit(d - np.dot(d, ax) * ax)
    return n if face.same_sense else -n


def edge_convexity(solid: Solid, edge_id: int) -> str:
    uses = solid.edge_uses.get(edge_id, [])
    if len(uses) != 2:
        raise TopologyError(f"edge {edge_id} is used by {len(uses)} faces, expected 2")
    (fa, fwd_a), (fb, _) = uses
    if not fwd_a:
        (fa, fwd_a), (fb, _) = uses[1], uses[0]
    p = edge_point(solid, edge_id, 0.5)
    t = edge_tangent(solid, edge_id, p)
    na = face_normal_at(solid.faces[fa], p)
    nb = face_normal_at(solid.faces[fb], p)
    ang = math.acos(max(-1.0, min(1.0, float(np.dot(na, nb)))))
    if ang < SMOOTH_TOL:
        return EdgeConvexity.SMOOTH
    wb = np.cross(nb, -t)
    return EdgeConvexity.CONVEX if float(np.dot(na, wb)) < 0 else EdgeConvexity.CONCAVE


# ---------------------------------------------------------------------------
# face measures


def face_frame(face: Face) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(origin, u, v, n) with n the outward normal of a planar face."""
    s = face.surface
    assert isinstance(s, Plane)
    n = np.asarray(s.normal, dtype=float) * (1 if face.same_sense else -1)
    u = _unit(s.ref)
    v = np.cross(n, u)
    return np.asarray(s.origin, dtype=float), u, v, n


def planar_region(solid: Solid, fi: int) -> g2.Region:
    face = solid.faces[fi]
    o, u, v, n = face_frame(face)

    def to2(p) -> g2.Pt:
        d = np.asarray(p) - o
        return (float(np.dot(d, u)), float(np.dot(d, v)))

    region = []
    for loop in face.loops:
        curves = []
        for eid, fwd in loop:
            e = solid.edges[eid]
            a, b = (e.start, e.end) if fwd else (e.end, e.start)
            pa, pb = to2(solid.vertices[a]), to2(solid.vertices[b])
            if isinstance(e.curve, Line):
                curves.append(g2.Seg(pa, pb))
            else:
                c = e.curve
                ccw = (float(np.dot(c.axis, n)) > 0) == fwd
                ctr = to2(c.center)
                if e.start == e.end:
                    curves.append(g2.Arc(ctr, c.radius, pa, pa, ccw))
                else:
                    curves.append(g2.Arc(ctr, c.radius, pa, pb, ccw))
        region.append(curves)
    return region


def _cylinder_patch(solid: Solid, fi: int) -> tuple[float, float, np.ndarray, np.ndarray, float]:
    """(radius, sweep, axis point at mid-height, mid-angle direction, height)."""
    face = solid.faces[fi]
    s = face.surface
    assert isinstance(s, Cylinder)
    ax = _unit(s.axis)
    o = np.asarray(s.origin)
    arcs = [eid for loop in face.loops for eid, _ in loop if isinstance(solid.edges[eid].curve, CircleCurve)]
    if len(arcs) != 2:
        raise GeometryError(f"cylindrical face {fi} is not bounded by two arcs")
    hs = [float(np.dot(np.asarray(solid.edges[k].curve.center) - o, ax)) for k in arcs]
    h = abs(hs[1] - hs[0])
    sweep = arc_sweep(solid, arcs[0])
    mid_axis = o + ax * 0.5 * (hs[0] + hs[1])
    pm = edge_point(solid, arcs[0], 0.5) - np.asarray(solid.edges[arcs[0]].curve.center)
    return s.radius, sweep, mid_axis, _unit(pm), h


def face_area(solid: Solid, fi: int) -> float:
    face = solid.faces[fi]
    if isinstance(face.surface, Plane):
        a, _ = g2.region_moments(planar_region(solid, fi))
        return abs(a)
    r, sweep, _, _, h = _cylinder_patch(solid, fi)
    return r * sweep * h


def face_centroid(solid: Solid, fi: int) -> np.ndarray:
    face = solid.faces[fi]
    if isinstance(face.surface, Plane):
        o, u, v, _ = face_frame(face)
        _, (cx, cy) = g2.region_moments(planar_region(solid, fi))
        return o + cx * u + cy * v
    r, sweep, mid, dirm, _ = _cylinder_patch(solid, fi)
    if sweep >= 2 * math.pi - 1e-12:
        return mid
    half = sweep / 2
    return mid + dirm * r * math.sin(half) / half


# ---------------------------------------------------------------------------
# construction: geometric edges before topology


@dataclass(frozen=True)
class _GEdge:
    kind: str  # "line" | "arc" | "circle"
    p0: Vec
    p1: Vec
    mid: Vec
    center: Vec = (0.0, 0.0, 0.0)
    axis: Vec = (0.0, 0.0, 0.0)
    radius: float = 0.0

    def reversed(self) -> "_GEdge":
        ax = (-self.axis[0], -self.axis[1], -self.axis[2])
        return _GEdge(self.kind, self.p1, self.p0, self.mid, self.center, ax, self.radius)

    def tangent_at_mid(self) -> np.ndarray:
        if self.kind == "line":
            return _unit(np.subtract(self.p1, self.p0))
        return _unit(np.cross(self.axis, np.subtract(self.mid, self.center)))


@dataclass
class _FaceSpec:
    surface: Surface
    same_sense: bool
    loops: list[list[_GEdge]]
    tag: tuple


def _lift_curve(k: int, value: float, c: g2.Curve2) -> _GEdge:
    mid = lift(k, value, c.midpoint())
    if isinstance(c, g2.Seg):
        return _GEdge("line", lift(k, value, c.a), lift(k, value, c.b), mid)
    ax = unit_axis(k, frame_sign(k) * (1 if c.ccw else -1))
    ctr = lift(k, value, c.center)
    if isinstance(c, g2.Circle):
        p = lift(k, value, c.seam)
        return _GEdge("circle", p, p, mid, ctr, ax, c.radius)
    return _GEdge("arc", lift(k, value, c.a), lift(k, value, c.b), mid, ctr, ax, c.radius)


def _line(p: Vec, q: Vec) -> _GEdge:
    return _GEdge("line", p, q, _tup((np.asarray(p) + np.asarray(q)) / 2))


def _planar_face(k: int, value: float, outward: int, region: g2.Region, tag: tuple) -> _FaceSpec:
    keep = outward == frame_sign(k)
    loops = []
    for loop in region:
        lp = loop if keep else g2.reverse_loop(loop)
        loops.append([_lift_curve(k, value, c) for c in lp])
    b, _ = other_axes(k)
    surf = Plane(lift(k, value, (0.0, 0.0)), unit_axis(k, outward), unit_axis(b))
    return _FaceSpec(surf, True, loops, tag)


def _orient(loop: list[_GEdge], normal_at, up: np.ndarray, want_positive: bool) -> list[_GEdge]:
    e0 = loop[0]
    n = normal_at(np.asarray(e0.mid))
    s = float(np.dot(np.cross(n, e0.tangent_at_mid()), up))
    if (s > 0) != want_positive:
        return [e.reversed() for e in reversed(loop)]
    return loop


def _wall_faces(pr: Prism, piece: g2.Curve2, t0: float, t1: float, tag: tuple) -> _FaceSpec:
    a = pr.axis
    i, j = other_axes(a)
    up = np.asarray(unit_axis(a))
    if isinstance(piece, g2.Seg):
        (x0, y0), (x1, y1) = piece.a, piece.b
        ln = math.hypot(x1 - x0, y1 - y0)
        nl = (-(y1 - y0) / ln, (x1 - x0) / ln)
        if pr.additive:
            nl = (-nl[0], -nl[1])
        n3 = [0.0, 0.0, 0.0]
        n3[i], n3[j] = nl
        r3 = [0.0, 0.0, 0.0]
        r3[i], r3[j] = (x1 - x0) / ln, (y1 - y0) / ln
        A, B = lift(a, t0, piece.a), lift(a, t0, piece.b)
        C, D = lift(a, t1, piece.b), lift(a, t1, piece.a)
        loop = [_line(A, B), _line(B, C), _line(C, D), _line(D, A)]
        surf = Plane(A, _tup(n3), _tup(r3))
        n_arr = np.asarray(n3)
        loop = _orient(loop, lambda p: n_arr, up, True)
        return _FaceSpec(surf, True, [loop], tag)
    same = piece.ccw == pr.additive
    ctr0 = np.asarray(lift(a, t0, piece.center))
    surf = Cylinder(_tup(ctr0), unit_axis(a), piece.radius, unit_axis(i))

    def normal_at(p: np.ndarray) -> np.ndarray:
        d = p - ctr0
        d = d - np.dot(d, up) * up
        d = _unit(d)
        return d if same else -d

    bottom = _lift_curve(a, t0, piece)
    top = _lift_curve(a, t1, piece)
    if isinstance(piece, g2.Circle):
        lb = _orient([bottom], normal_at, up, True)
        lt = _orient([top], normal_at, up, False)
        return _FaceSpec(surf, same, [lb, lt], tag)
    loop = [bottom, _line(bottom.p1, top.p1), top.reversed(), _line(top.p0, bottom.p0)]
    loop = _orient(loop, normal_at, up, True)
    return _FaceSpec(surf, same, [loop], tag)


def _bite_rect(k: int, o_axis: int, o_range: tuple[float, float], a_axis: int, a_range: tuple[float, float]) -> g2.Region:
    b, c = other_axes(k)
    lo = {o_axis: o_range[0], a_axis: a_range[0]}
    hi = {o_axis: o_range[1], a_axis: a_range[1]}
    return [g2.rectangle(lo[b], lo[c], hi[b], hi[c])]


def _stock_faces(recipe: Recipe) -> list[_FaceSpec]:
    L = recipe.dims
    out = []
    for k in (0, 1, 2):
        b, c = other_axes(k)
        rect = g2.Rect(0.0, 0.0, L[b], L[c])
        for side in (0, 1):
            v = 0.0 if side == 0 else L[k]
            bites: list[g2.Region] = []
            for pr in recipe.prisms:
                P = [list(lp) for lp in pr.profile]
                if pr.axis == k:
                    if pr.additive:
                        host = 1 if pr.lo >= L[k] - 1e-12 else 0
                        if host == side:
                            bites.append(P)
                    elif (side == 0 and pr.lo < 0) or (side == 1 and pr.hi > L[k]):
                        bites.append(P)
                    continue
                if pr.additive:
                    continue
                pi, pj = other_axes(pr.axis)
                idx = 0 if pi == k else 1
                o_axis = pj if idx == 0 else pi
                for u0, u1 in g2.line_section(P, idx, v):
                    bites.append(_bite_rect(k, o_axis, (u0, u1), pr.axis, (pr.lo, pr.hi)))
            outward = 1 if side == 1 else -1
            for region in g2.rect_minus(rect, bites):
                out.append(_planar_face(k, v, outward, region, ("stock", k, side)))
    return out


def _prism_faces(recipe: Recipe, pr: Prism) -> list[_FaceSpec]:
    L = recipe.dims
    a = pr.axis
    i, j = other_axes(a)
    tag = ("feature", pr.instance)
    P = [list(lp) for lp in pr.profile]
    out = []
    if pr.additive:
        t0, t1 = pr.lo, pr.hi
        for lp in P:
            for piece in lp:
                out.append(_wall_faces(pr, piece, t0, t1, tag))
        if pr.lo >= L[a] - 1e-12:
            out.append(_planar_face(a, pr.hi, 1, P, tag))
        else:
            out.append(_planar_face(a, pr.lo, -1, P, tag))
        return out
    rect = g2.Rect(0.0, 0.0, L[i], L[j])
    t0, t1 = max(pr.lo, 0.0), min(pr.hi, L[a])
    for lp in P:
        closed, chains = g2.clip_loop(lp, rect)
        for piece in [c for cl in closed for c in cl] + [c for ch in chains for c in ch]:
            out.append(_wall_faces(pr, piece, t0, t1, tag))
    if pr.lo > 0:
        for region in g2.rect_intersect(rect, P):
            out.append(_planar_face(a, pr.lo, 1, region, tag))
    if pr.hi < L[a]:
        for region in g2.rect_intersect(rect, P):
            out.append(_planar_face(a, pr.hi, -1, region, tag))
    return out


class _Assembler:
    def __init__(self) -> None:
        self.vertices: list[Vec] = []
        self._vkeys: dict[tuple[int, int, int], int] = {}
        self.edges: list[Edge] = []
        self._ekeys: dict[tuple, int] = {}
        self._edge_dir: list[tuple] = []
        self.use_count: list[int] = []

    @staticmethod
    def _cell(p) -> tuple[int, int, int]:
        return (round(p[0] / VERTEX_TOL), round(p[1] / VERTEX_TOL), round(p[2] / VERTEX_TOL))

    def vid(self, p: Vec) -> int:
        key = self._cell(p)
        hit = self._vkeys.get(key)
        if hit is not None:
            return hit
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    hit = self._vkeys.get((key[0] + dx, key[1] + dy, key[2] + dz))
                    if hit is not None and max(abs(np.subtract(self.vertices[hit], p))) <= VERTEX_TOL:
                        self._vkeys[key] = hit
                        return hit
        self.vertices.append(p)
        self._vkeys[key] = len(self.vertices) - 1
        return len(self.vertices) - 1

    def oriented(self, ge: _GEdge) -> OrientedEdge:
        v0, v1 = self.vid(ge.p0), self.vid(ge.p1)
        if ge.kind == "line":
            if v0 == v1:
                raise GeometryError("degenerate line edge")
            key: tuple = ("L", min(v0, v1), max(v0, v1))
        elif ge.kind == "arc":
            key = ("A", min(v0, v1), max(v0, v1), self._cell(ge.mid))
        else:
            key = ("C", v0, self._cell(ge.center), round(ge.radius / VERTEX_TOL))
        eid = self._ekeys.get(key)
        if eid is None:
            if ge.kind == "line":
                curve: Curve = Line(self.vertices[v0], _tup(_unit(np.subtract(self.vertices[v1], self.vertices[v0]))))
            else:
                ref = _unit(np.subtract(self.vertices[v0], ge.center))
                curve = CircleCurve(ge.center, ge.axis, ge.radius, _tup(ref))
            self.edges.append(Edge(curve, v0, v1))
            self.use_count.append(1)
            eid = len(self.edges) - 1
            self._ekeys[key] = eid
            return eid, True
        self.use_count[eid] += 1
        e = self.edges[eid]
        if ge.kind == "circle":
            fwd = float(np.dot(ge.axis, e.curve.axis)) > 0
        else:
            fwd = (v0, v1) == (e.start, e.end)
        return eid, fwd


def _assemble(specs: list[_FaceSpec], recipe: Optional[Recipe]) -> Solid:
    asm = _Assembler()
    faces = []
    for fs in specs:
        loops = tuple(tuple(asm.oriented(ge) for ge in loop) for loop in fs.loops)
        faces.append(Face(fs.surface, fs.same_sense, loops, fs.tag))
    solid = Solid(tuple(asm.vertices), tuple(asm.edges), tuple(faces), recipe)
    validate_topology(solid)
    return solid


def validate_topology(solid: Solid) -> None:
    """Closed 2-manifold: each edge used twice, once in each direction; loops closed."""
    for eid, uses in solid.edge_uses.items():
        if len(uses) != 2:
            raise TopologyError(f"edge {eid} used {len(uses)} times")
        if uses[0][1] == uses[1][1]:
            raise TopologyError(f"edge {eid} traversed in the same direction by both faces")
    for fi, f in enumerate(solid.faces):
        for loop in f.loops:
            ends = []
            for eid, fwd in loop:
                e = solid.edges[eid]
                ends.append((e.start, e.end) if fwd else (e.end, e.start))
            for k in range(len(ends)):
                if ends[k][1] != ends[(k + 1) % len(ends)][0]:
                    raise TopologyError(f"loop of face {fi} is not closed")


def build(recipe: Recipe) -> Solid:
    specs = _stock_faces(recipe)
    for pr in recipe.prisms:
        specs.extend(_prism_faces(recipe, pr))
    return _assemble(specs, recipe)


# ---------------------------------------------------------------------------
# placement bookkeeping


def prism_aabb(recipe: Recipe, pr: Prism) -> tuple[np.ndarray, np.ndarray]:
    L = recipe.dims
    i, j = other_axes(pr.axis)
    x0, y0, x1, y1 = g2.region_bbox([list(lp) for lp in pr.profile])
    lo = np.zeros(3)
    hi = np.zeros(3)
    lo[i], hi[i] = x0, x1
    lo[j], hi[j] = y0, y1
    lo[pr.axis], hi[pr.axis] = pr.lo, pr.hi
    if not pr.additive:
        lo = np.maximum(lo, 0.0)
        hi = np.minimum(hi, np.asarray(L))
    return lo, hi


def boxes_clash(a, b, gap: float) -> bool:
    return bool(np.all(a[0] < b[1] + gap) and np.all(b[0] < a[1] + gap))


def add_prism(solid_or_recipe: Union[Solid, Recipe], pr: Prism) -> Solid:
    recipe = solid_or_recipe.recipe if isinstance(solid_or_recipe, Solid) else solid_or_recipe
    if recipe is None:
        raise InvalidArgument("solid has no construction history; only kernel-built solids can be edited")
    box = prism_aabb(recipe, pr)
    if np.any(box[1] - box[0] <= 0):
        raise PlacementRejected("feature does not intersect the stock")
    for other in recipe.prisms:
        if boxes_clash(box, prism_aabb(recipe, other), recipe.gap):
            raise PlacementRejected(f"feature overlaps instance {other.instance}")
    return build(replace(recipe, prisms=recipe.prisms + (pr,)))


def region_tuple(region: Iterable[Iterable[g2.Curve2]]) -> tuple:
    return tuple(tuple(lp) for lp in region)


def oriented_region(region: g2.Region) -> g2.Region:
    """Make the first loop counter-clockwise and the rest clockwise."""
    out = []
    for k, lp in enumerate(region):
        a = g2.loop_area(lp)
        want_pos = k == 0
        out.append(lp if (a > 0) == want_pos else g2.reverse_loop(lp))
    return out


# ---------------------------------------------------------------------------
# public construction operations


def make_box(dx: float, dy: float, dz: float, gap: float = DEFAULT_GAP) -> Solid:
    dims = (float(dx), float(dy), float(dz))
    if not all(math.isfinite(d) and d > 0 for d in dims):
        raise InvalidArgument(f"box dimensions must be positive, got {dims}")
    return build(Recipe(dims, (), gap))


def _next_instance(recipe: Recipe) -> int:
    return 1 + max((p.instance for p in recipe.prisms), default=0)


def stock_side(solid: Solid, face_id: int) -> tuple[int, int]:
    tag = solid.faces[face_id].tag
    if not tag or tag[0] != "stock":
        raise InvalidArgument(f"face {face_id} is not a stock face")
    return tag[1], tag[2]


def imprint_extrude(
    solid: Solid,
    host_face_id: int,
    profile: g2.Region,
    depth: float,
    direction: str = "inward",
    *,
    through: bool = False,
    instance: Optional[int] = None,
) -> Solid:
    """Sweep a closed profile into (inward) or out of (outward) a planar stock face.

    ``profile`` is given in the host face's coordinates: the two world axes
    other than the face normal axis, in increasing order. Inward sweeps cut
    a blind pocket/hole of ``depth`` or, with ``through=True``, a passage
    across the whole stock. Outward sweeps add an extrusion.
    """
    if solid.recipe is None:
        raise InvalidArgument("solid has no construction history")
    recipe = solid.recipe
    k, side = stock_side(solid, host_face_id)
    L = recipe.dims
    b, c = other_axes(k)
    region = oriented_region([list(lp) for lp in profile])
    x0, y0, x1, y1 = g2.region_bbox(region)
    if not (x0 > 0 and y0 > 0 and x1 < L[b] and y1 < L[c]):
        raise PlacementRejected("profile is not strictly inside the host face")
    if not (depth > 0 and math.isfinite(depth)):
        raise InvalidArgument("depth must be positive")
    inst = _next_instance(recipe) if instance is None else instance
    direction = direction.lower()
    if direction == "inward":
        if through:
            if abs(depth - L[k]) > 1e-9:
                raise InvalidArgument("through cut depth must equal the stock extent")
            lo, hi = -EXTENSION, L[k] + EXTENSION
        else:
            if depth >= L[k]:
                raise InvalidArgument("blind depth must be smaller than the stock extent")
            lo, hi = (L[k] - depth, L[k] + EXTENSION) if side == 1 else (-EXTENSION, depth)
        pr = Prism(k, region_tuple(region), lo, hi, False, inst)
    elif direction == "outward":
        lo, hi = (L[k], L[k] + depth) if side == 1 else (-depth, 0.0)
        pr = Prism(k, region_tuple(region), lo, hi, True, inst)
    else:
        raise InvalidArgument(f"unknown direction {direction!r}")
    return add_prism(recipe, pr)


def corner_profile(ci: float, cj: float, di: int, dj: int, chain: list[g2.Curve2], m: float = EXTENSION) -> g2.Region:
    """Close a chain running from the j-side to the i-side of a profile corner.

    (ci, cj) is the corner, (di, dj) point into the material. ``chain``
    starts on the line j == cj and ends on the line i == ci; the loop is
    closed by points outside the stock and oriented counter-clockwise.
    """
    t1, t2 = chain[0].start, chain[-1].end
    pts = [t2, (ci - di * m, t2[1]), (ci - di * m, cj - dj * m), (t1[0], cj - dj * m), t1]
    loop = list(chain) + [g2.Seg(pts[k], pts[k + 1]) for k in range(4)]
    if g2.loop_area(loop) < 0:
        loop = g2.reverse_loop(loop)
    return [loop]


def box_edge_frame(solid: Solid, edge_id: int) -> tuple[int, float, float, int, int]:
    """(sweep axis, corner i, corner j, dir i, dir j) for an edge of the stock box."""
    if solid.recipe is None:
        raise InvalidArgument("solid has no construction history")
    e = solid.edges[edge_id]
    if not isinstance(e.curve, Line):
        raise InvalidArgument("edge is not straight")
    p, q = np.asarray(solid.vertices[e.start]), np.asarray(solid.vertices[e.end])
    L = solid.recipe.dims
    d = np.abs(q - p)
    a = int(np.argmax(d))
    i, j = other_axes(a)
    if d[i] > 1e-9 or d[j] > 1e-9:
        raise InvalidArgument("edge is not axis aligned")
    ci, cj = float(p[i]), float(p[j])
    on = lambda v, ext: abs(v) < 1e-9 or abs(v - ext) < 1e-9  # noqa: E731
    if not (on(ci, L[i]) and on(cj, L[j])):
        raise InvalidArgument("edge does not lie on a stock edge")
    if edge_convexity(solid, edge_id) != EdgeConvexity.CONVEX:
        raise InvalidArgument("edge is not convex")
    ci = 0.0 if abs(ci) < 1e-9 else L[i]
    cj = 0.0 if abs(cj) < 1e-9 else L[j]
    di = 1 if ci == 0.0 else -1
    dj = 1 if cj == 0.0 else -1
    return a, ci, cj, di, dj


def _edge_prism(solid: Solid, edge_id: int, size: float, rounded: bool, instance: Optional[int]) -> Solid:
    a, ci, cj, di, dj = box_edge_frame(solid, edge_id)
    recipe = solid.recipe
    assert recipe is not None
    L = recipe.dims
    i, j = other_axes(a)
    if not (size > 0 and size < min(L[i], L[j])):
        raise InvalidArgument("edge blend size must be positive and smaller than the adjacent faces")
    t1 = (ci + di * size, cj)
    t2 = (ci, cj + dj * size)
    if rounded:
        ctr = (ci + di * size, cj + dj * size)
        ccw = (t1[0] - ctr[0]) * (t2[1] - ctr[1]) - (t1[1] - ctr[1]) * (t2[0] - ctr[0]) > 0
        chain: list[g2.Curve2] = [g2.Arc(ctr, size, t1, t2, ccw)]
    else:
        chain = [g2.Seg(t1, t2)]
    region = corner_profile(ci, cj, di, dj, chain)
    inst = _next_instance(recipe) if instance is None else instance
    pr = Prism(a, region_tuple(region), -EXTENSION, L[a] + EXTENSION, False, inst)
    return add_prism(recipe, pr)


def apply_edge_round(solid: Solid, edge_id: int, radius: float, instance: Optional[int] = None) -> Solid:
    return _edge_prism(solid, edge_id, radius, True, instance)


def apply_edge_chamfer(solid: Solid, edge_id: int, setback: float, instance: Optional[int] = None) -> Solid:
    return _edge_prism(solid, edge_id, setback, False, instance)


def signed_volume_planar(solid: Solid) -> float:
    """Divergence-theorem volume; exact for all-planar solids (arcs sampled otherwise)."""
    from .mesh import triangulate, mesh_volume

    return mesh_volume(triangulate(solid))
