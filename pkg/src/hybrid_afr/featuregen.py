"""Randomised labelled models: cuboid stock plus 4-8 non-overlapping features.

Every feature is drawn with explicit parameters, so the ground truth for
each instance (its dimensions, depth axis and stock contribution) is known
exactly and travels with the model as a JSON record.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import geom2d as g2
from .brep import (
    EXTENSION,
    Prism,
    Recipe,
    Solid,
    boxes_clash,
    build,
    corner_profile,
    lift,
    oriented_region,
    other_axes,
    prism_aabb,
    region_tuple,
)
from .errors import AFRError, InvalidArgument
from .taxonomy import ADDITIVE_CLASSES, N_CLASSES, STOCK, feature_class

PAD = 1.0  # clearance between interior footprints and host-face edges
GAP = 1.0  # clearance between feature bounding boxes


class _Retry(Exception):
    """Sampled parameters do not fit; draw again."""


@dataclass
class FeatureRecord:
    instance: int
    cls: int
    params: dict
    depth_axis: Optional[int]
    host: Optional[tuple[int, int]] = None

    @property
    def orientation(self) -> str:
        if self.depth_axis is None:
            return "None"
        return "Upright" if self.depth_axis == 2 else "Tilted"

    def to_json(self) -> dict:
        return {
            "instance": self.instance,
            "class": self.cls,
            "name": feature_class(self.cls).name,
            "params": {k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()},
            "depth_axis": self.depth_axis,
            "orientation": self.orientation,
            "host": list(self.host) if self.host is not None else None,
        }

    @staticmethod
    def from_json(d: dict) -> "FeatureRecord":
        params = {k: tuple(v) if isinstance(v, list) else v for k, v in d["params"].items()}
        host = tuple(d["host"]) if d.get("host") is not None else None
        return FeatureRecord(d["instance"], d["class"], params, d["depth_axis"], host)


@dataclass
class GroundTruth:
    seed: int
    stock: tuple[float, float, float]
    features: list[FeatureRecord]
    dropped: list[int] = field(default_factory=list)
    regenerations: int = 0

    def max_stock(self) -> tuple[float, float, float]:
        ext = [[0.0, 0.0] for _ in range(3)]
        for f in self.features:
            if f.cls in ADDITIVE_CLASSES and f.host is not None:
                k, side = f.host
                ext[k][side] = max(ext[k][side], float(f.params["Depth"]))
        return tuple(self.stock[k] + ext[k][0] + ext[k][1] for k in range(3))  # type: ignore[return-value]

    def min_stock(self) -> tuple[float, float, float]:
        return tuple(self.stock)  # type: ignore[return-value]

    def to_json(self) -> str:
        d = {
            "seed": self.seed,
            "stock": list(self.stock),
            "min_stock": list(self.min_stock()),
            "max_stock": list(self.max_stock()),
            "features": [f.to_json() for f in self.features],
            "dropped_classes": list(self.dropped),
            "regenerations": self.regenerations,
        }
        return json.dumps(d, indent=1, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "GroundTruth":
        d = json.loads(text)
        feats = [FeatureRecord.from_json(f) for f in d["features"]]
        return GroundTruth(d["seed"], tuple(d["stock"]), feats, d["dropped_classes"], d["regenerations"])


# ---------------------------------------------------------------------------
# sampling helpers


class _Ctx:
    def __init__(self, dims, rng: np.random.Generator):
        self.L = dims
        self.rng = rng

    def uni(self, lo: float, hi: float) -> float:
        return round(float(self.rng.uniform(lo, hi)), 2)

    def pick(self, n: int) -> int:
        return int(self.rng.integers(n))

    def host(self) -> tuple[int, int]:
        return self.pick(3), self.pick(2)

    def plane(self, k: int, side: int) -> tuple[float, int]:
        """(host plane coordinate, inward sign)."""
        return (self.L[k], -1) if side == 1 else (0.0, 1)

    def place(self, lo_ext: float, hi_ext: float, length: float) -> float:
        """Centre coordinate keeping [c - lo_ext, c + hi_ext] inside [PAD, length - PAD]."""
        a, b = PAD + lo_ext, length - PAD - hi_ext
        if b <= a:
            raise _Retry()
        return self.uni(a, b)

    def blind_depth(self, k: int) -> float:
        return self.uni(0.2 * self.L[k], 0.8 * self.L[k])


def _pt(a: int, vals: dict) -> g2.Pt:
    i, j = other_axes(a)
    return (float(vals[i]), float(vals[j]))


def _poly(a: int, pts: list[dict]) -> g2.Region:
    return oriented_region([g2.polygon([_pt(a, p) for p in pts])])


def _arc_via(ctr: g2.Pt, r: float, p: g2.Pt, q: g2.Pt, via: g2.Pt) -> g2.Arc:
    arc = g2.Arc(ctr, r, p, q, True)
    m = arc.midpoint()
    if math.dist(m, via) > 1e-6 * max(1.0, r):
        arc = g2.Arc(ctr, r, p, q, False)
    return arc


def _loop_region(curves: list) -> g2.Region:
    return oriented_region([curves])


def _triangle(ctx: _Ctx, size: float) -> list[g2.Pt]:
    for _ in range(30):
        pts = [(ctx.uni(0, size), ctx.uni(0, size)) for _ in range(3)]
        sides = [math.dist(pts[k], pts[(k + 1) % 3]) for k in range(3)]
        if min(sides) < 2.0:
            continue
        ang = []
        for k in range(3):
            a, b, c = pts[k], pts[(k + 1) % 3], pts[(k + 2) % 3]
            u = (b[0] - a[0], b[1] - a[1])
            v = (c[0] - a[0], c[1] - a[1])
            cosv = (u[0] * v[0] + u[1] * v[1]) / (math.hypot(*u) * math.hypot(*v))
            ang.append(math.degrees(math.acos(max(-1.0, min(1.0, cosv)))))
        if min(ang) >= 20.0:
            return pts
    raise _Retry()


def _tri_sides(pts) -> dict:
    s = sorted(math.dist(pts[k], pts[(k + 1) % 3]) for k in range(3))
    return {"Side-1": s[0], "Side-2": s[1], "Side-3": s[2]}


def _footprint(ctx: _Ctx, cls_shape: str, k: int) -> tuple[Callable[[float, float], g2.Region], float, float, dict]:
    """Profile factory for an interior footprint centred anywhere, its half extents and dimension params."""
    b, c = other_axes(k)
    S = min(ctx.L[b], ctx.L[c])
    if cls_shape == "circle":
        r = ctx.uni(0.05 * S, 0.2 * S)
        return (lambda x, y: [[g2.Circle((x, y), r, True)]]), r, r, {"Radius": r}
    if cls_shape == "rect":
        lx = ctx.uni(0.1 * ctx.L[b], 0.4 * ctx.L[b])
        ly = ctx.uni(0.1 * ctx.L[c], 0.4 * ctx.L[c])
        f = lambda x, y: [g2.rectangle(x - lx / 2, y - ly / 2, x + lx / 2, y + ly / 2)]  # noqa: E731
        return f, lx / 2, ly / 2, {"Length": lx, "Width": ly}
    if cls_shape == "tri":
        pts = _triangle(ctx, ctx.uni(0.15 * S, 0.4 * S))
        cx = sum(p[0] for p in pts) / 3
        cy = sum(p[1] for p in pts) / 3
        rel = [(p[0] - cx, p[1] - cy) for p in pts]
        hx = max(abs(p[0]) for p in rel)
        hy = max(abs(p[1]) for p in rel)
        f = lambda x, y: oriented_region([g2.polygon([(x + p[0], y + p[1]) for p in rel])])  # noqa: E731
        return f, hx, hy, _tri_sides(pts)
    n = {"hex": 6, "pent": 5}[cls_shape]
    side = ctx.uni(0.05 * S, 0.2 * S)
    R = side / (2 * math.sin(math.pi / n))
    rot = float(ctx.rng.uniform(0, 2 * math.pi))
    f = lambda x, y: oriented_region([g2.polygon(g2.regular_polygon((x, y), R, n, rot))])  # noqa: E731
    return f, R, R, {"Side": side}


def _interior(ctx: _Ctx, shape: str, k: int):
    b, c = other_axes(k)
    make, hx, hy, params = _footprint(ctx, shape, k)
    x = ctx.place(hx, hx, ctx.L[b])
    y = ctx.place(hy, hy, ctx.L[c])
    return make(x, y), (x, y), params


# ---------------------------------------------------------------------------
# per-class builders: each returns (prism, params, depth axis, host)

_SHAPE = {1: "circle", 2: "tri", 3: "rect", 4: "hex", 12: "circle", 13: "tri", 14: "rect", 15: "hex",
          24: "circle", 25: "rect", 26: "tri", 27: "hex", 28: "pent"}


def _through(ctx: _Ctx, cls: int, inst: int):
    k = ctx.pick(3)
    region, (x, y), params = _interior(ctx, _SHAPE[cls], k)
    params["Depth"] = ctx.L[k]
    if cls == 1:
        params["Center"] = lift(k, ctx.L[k], (x, y))
    return Prism(k, region_tuple(region), -EXTENSION, ctx.L[k] + EXTENSION, False, inst), params, k, (k, 1)


def _blind(ctx: _Ctx, cls: int, inst: int):
    k, side = ctx.host()
    h, s_in = ctx.plane(k, side)
    d = ctx.blind_depth(k)
    if cls == 11:
        b, c = other_axes(k)
        S = min(ctx.L[b], ctx.L[c])
        ro = ctx.uni(0.08 * S, 0.2 * S)
        ri = ctx.uni(0.4 * ro, 0.8 * ro)
        x = ctx.place(ro, ro, ctx.L[b])
        y = ctx.place(ro, ro, ctx.L[c])
        region = [[g2.Circle((x, y), ro, True)], [g2.Circle((x, y), ri, False)]]
        params = {"Radius": ro, "Width": ro - ri, "Depth": d, "Center": lift(k, h, (x, y))}
    elif cls == 16:
        b, c = other_axes(k)
        S = min(ctx.L[b], ctx.L[c])
        R = ctx.uni(0.04 * S, 0.12 * S)
        Lc = ctx.uni(0.1 * S, 0.3 * S)
        th = float(ctx.rng.uniform(0, math.pi))
        dx, dy = 0.5 * Lc * math.cos(th), 0.5 * Lc * math.sin(th)
        x = ctx.place(abs(dx) + R, abs(dx) + R, ctx.L[b])
        y = ctx.place(abs(dy) + R, abs(dy) + R, ctx.L[c])
        region = oriented_region([g2.stadium((x - dx, y - dy), (x + dx, y + dy), R)])
        params = {"Width": 2 * R, "Length": Lc, "Depth": d}
    else:
        region, (x, y), params = _interior(ctx, _SHAPE[cls], k)
        params["Depth"] = d
        if cls == 12:
            params["Center"] = lift(k, h, (x, y))
    lo, hi = (h - d, h + EXTENSION) if side == 1 else (-EXTENSION, d)
    return Prism(k, region_tuple(region), lo, hi, False, inst), params, k, (k, side)


def _extrusion(ctx: _Ctx, cls: int, inst: int):
    k, side = ctx.host()
    h, s_in = ctx.plane(k, side)
    region, (x, y), params = _interior(ctx, _SHAPE[cls], k)
    d = ctx.uni(5.0, 20.0)
    params["Depth"] = d
    if cls == 24:
        params["Center"] = lift(k, h - s_in * d, (x, y))
    lo, hi = (h, h + d) if side == 1 else (-d, 0.0)
    return Prism(k, region_tuple(region), lo, hi, True, inst), params, k, (k, side)


def _edge_frame(ctx: _Ctx):
    a = ctx.pick(3)
    i, j = other_axes(a)
    ci = 0.0 if ctx.pick(2) == 0 else ctx.L[i]
    cj = 0.0 if ctx.pick(2) == 0 else ctx.L[j]
    return a, i, j, ci, cj, (1 if ci == 0 else -1), (1 if cj == 0 else -1)


def _edge_blend(ctx: _Ctx, cls: int, inst: int):
    a, i, j, ci, cj, di, dj = _edge_frame(ctx)
    s = ctx.uni(2.0, 8.0)
    t1, t2 = (ci + di * s, cj), (ci, cj + dj * s)
    if cls == 23:
        chain = [_arc_via((ci + di * s, cj + dj * s), s, t1, t2,
                          (ci + di * s * (1 - math.sqrt(0.5)), cj + dj * s * (1 - math.sqrt(0.5))))]
        params: dict = {"Radius": s}
    else:
        chain = [g2.Seg(t1, t2)]
        params = {"Side-1": s, "Side-2": s, "Angle": 45.0}
    region = corner_profile(ci, cj, di, dj, chain)
    stock_faces = ((i, 0 if ci == 0 else 1), (j, 0 if cj == 0 else 1))
    params["_blend_faces"] = stock_faces
    return Prism(a, region_tuple(region), -EXTENSION, ctx.L[a] + EXTENSION, False, inst), params, None, None


def _local_corner_loop(to2d, chain_pts: list, cw: float, cd: float, sw: int, sd: int) -> g2.Region:
    """Close a polyline running from the d == cd line to the w == cw line around a corner."""
    p1, p2 = chain_pts[0], chain_pts[-1]
    m = EXTENSION
    pts = list(chain_pts) + [(cw - sw * m, p2[1]), (cw - sw * m, cd - sd * m), (p1[0], cd - sd * m)]
    return oriented_region([g2.polygon([to2d(p) for p in pts])])


def notch_depth_axis(axes) -> int:
    """Depth axis for notches symmetric in two open directions: Z if present, else X."""
    return 2 if 2 in axes else 0


def _through_step(ctx: _Ctx, cls: int, inst: int):
    a, i, j, ci, cj, di, dj = _edge_frame(ctx)
    if cls == 10:
        dax = (i, j)[ctx.pick(2)]
    else:
        dax = notch_depth_axis((i, j))
    wax = j if dax == i else i
    cw, sw = (ci, di) if wax == i else (cj, dj)
    cd, sd = (ci, di) if dax == i else (cj, dj)
    D = ctx.uni(0.2 * ctx.L[dax], 0.8 * ctx.L[dax])
    W = ctx.uni(0.1 * ctx.L[wax], 0.4 * ctx.L[wax])

    def to2d(p):
        return _pt(a, {wax: p[0], dax: p[1]})

    if cls == 8:
        pts = [(cw + sw * W, cd), (cw + sw * W, cd + sd * D), (cw, cd + sd * D)]
        params = {"Width": W, "Depth": D}
    elif cls == 9:
        pts = [(cw + sw * W, cd), (cw + sw * W, cd + sd * D / 2), (cw + sw * W / 2, cd + sd * D / 2),
               (cw + sw * W / 2, cd + sd * D), (cw, cd + sd * D)]
        params = {"Width": W, "Depth": D}
    else:
        Wb = ctx.uni(0.3 * W, 0.8 * W)
        if Wb < 1.0 or W - Wb >= D:
            raise _Retry()
        pts = [(cw + sw * W, cd), (cw + sw * Wb, cd + sd * D), (cw, cd + sd * D)]
        params = {"Width": Wb, "Depth": D, "Angle": math.degrees(math.atan2(D, W - Wb))}
    params["Length"] = ctx.L[a]
    region = _local_corner_loop(to2d, pts, cw, cd, sw, sd)
    return Prism(a, region_tuple(region), -EXTENSION, ctx.L[a] + EXTENSION, False, inst), params, dax, None


def _through_slot(ctx: _Ctx, cls: int, inst: int):
    k, side = ctx.host()
    h, s_in = ctx.plane(k, side)
    b, c = other_axes(k)
    o, w = (b, c) if ctx.pick(2) == 0 else (c, b)
    m = EXTENSION
    W = ctx.uni(0.1 * ctx.L[w], 0.4 * ctx.L[w])
    d = ctx.blind_depth(k)
    w0 = ctx.place(0.0, W, ctx.L[w])
    w1 = w0 + W
    if cls == 5:
        wa = w0 + ctx.uni(0.2 * W, 0.8 * W)
        pts = [(w0, h - s_in * m), (w0, h), (wa, h + s_in * d), (w1, h), (w1, h - s_in * m)]
        tri = [(w0, h), (wa, h + s_in * d), (w1, h)]
        params = _tri_sides(tri)
    else:
        pts = [(w0, h - s_in * m), (w0, h + s_in * d), (w1, h + s_in * d), (w1, h - s_in * m)]
        params = {"Width": W}
    params["Depth"] = d
    params["Length"] = ctx.L[o]
    region = _poly(o, [{w: p[0], k: p[1]} for p in pts])
    return Prism(o, region_tuple(region), -EXTENSION, ctx.L[o] + EXTENSION, False, inst), params, k, (k, side)


def _open_u(ctx: _Ctx, a: int, u: int, t: int, t_edge: float, s_t: int, uc: float, r: float, straight: float):
    """U-shaped profile opening across the line t == t_edge, bottom arc centred ``straight`` inside."""
    m = EXTENSION

    def P(uu, tt):
        return _pt(a, {u: uu, t: tt})

    base = t_edge + s_t * straight
    p0, p1 = P(uc - r, t_edge - s_t * m), P(uc - r, base)
    p2, p3 = P(uc + r, base), P(uc + r, t_edge - s_t * m)
    arc = _arc_via(P(uc, base), r, p1, p2, P(uc, base + s_t * r))
    curves = [g2.Seg(p0, p1), arc, g2.Seg(p2, p3), g2.Seg(p3, p0)]
    return _loop_region(curves)


def _u_slot(ctx: _Ctx, cls: int, inst: int):
    if cls == 19:
        s_ax, t_ax = [int(v) for v in ctx.rng.permutation(3)[:2]]
        u_ax = 3 - s_ax - t_ax
        st = ctx.pick(2)
        t_edge, s_t = ctx.plane(t_ax, st)
        r = ctx.uni(0.05 * min(ctx.L[u_ax], ctx.L[t_ax]), 0.15 * min(ctx.L[u_ax], ctx.L[t_ax]))
        hh = ctx.uni(0.05 * ctx.L[t_ax], 0.4 * ctx.L[t_ax])
        if hh + r > 0.8 * ctx.L[t_ax]:
            raise _Retry()
        uc = ctx.place(r, r, ctx.L[u_ax])
        ss = ctx.pick(2)
        hs, _ = ctx.plane(s_ax, ss)
        ln = ctx.blind_depth(s_ax)
        region = _open_u(ctx, s_ax, u_ax, t_ax, t_edge, s_t, uc, r, hh)
        lo, hi = (hs - ln, hs + EXTENSION) if ss == 1 else (-EXTENSION, ln)
        params = {"Radius": r, "Length": ln, "Depth": hh + r}
        return Prism(s_ax, region_tuple(region), lo, hi, False, inst), params, t_ax, (s_ax, ss)
    k, side = ctx.host()
    h, s_in = ctx.plane(k, side)
    b, c = other_axes(k)
    t_ax, u_ax = (b, c) if ctx.pick(2) == 0 else (c, b)
    t_edge, s_t = ctx.plane(t_ax, ctx.pick(2))
    if cls == 17 and notch_depth_axis((k, t_ax)) != k:
        # an open-ended box notch is symmetric in its two open directions
        k, t_ax = t_ax, k
        (h, s_in), (t_edge, s_t) = (t_edge, s_t), (h, s_in)
        side = 0 if s_in == 1 else 1
        b, c = other_axes(k)
    S = min(ctx.L[b], ctx.L[c])
    if cls == 17:
        W = ctx.uni(0.1 * ctx.L[u_ax], 0.4 * ctx.L[u_ax])
        e = ctx.uni(0.1 * ctx.L[t_ax], 0.4 * ctx.L[t_ax])
        u0 = ctx.place(0.0, W, ctx.L[u_ax])
        m = EXTENSION
        pts = [(u0, t_edge - s_t * m), (u0, t_edge + s_t * e), (u0 + W, t_edge + s_t * e), (u0 + W, t_edge - s_t * m)]
        region = _poly(k, [{u_ax: p[0], t_ax: p[1]} for p in pts])
        params = {"Width": W, "Length": e}
    else:
        r = ctx.uni(0.05 * S, 0.15 * S)
        uc = ctx.place(r, r, ctx.L[u_ax])
        straight = 0.0 if cls == 7 else ctx.uni(0.05 * ctx.L[t_ax], 0.25 * ctx.L[t_ax])
        region = _open_u(ctx, k, u_ax, t_ax, t_edge, s_t, uc, r, straight)
        params = {"Radius": r}
        if cls == 18:
            params["Length"] = straight + r
        else:
            params["Center"] = lift(k, ctx.L[k], _pt(k, {u_ax: uc, t_ax: t_edge}))
    if cls == 7:
        params["Depth"] = ctx.L[k]
        lo, hi = -EXTENSION, ctx.L[k] + EXTENSION
    else:
        d = ctx.blind_depth(k)
        params["Depth"] = d
        lo, hi = (h - d, h + EXTENSION) if side == 1 else (-EXTENSION, d)
    return Prism(k, region_tuple(region), lo, hi, False, inst), params, k, (k, side)


def _blind_step(ctx: _Ctx, cls: int, inst: int):
    k, side = ctx.host()
    if cls == 22:
        k = 2  # a corner box notch opens three ways; depth is taken along Z
    h, s_in = ctx.plane(k, side)
    b, c = other_axes(k)
    cb = 0.0 if ctx.pick(2) == 0 else ctx.L[b]
    cc = 0.0 if ctx.pick(2) == 0 else ctx.L[c]
    db, dc = (1 if cb == 0 else -1), (1 if cc == 0 else -1)
    d = ctx.blind_depth(k)
    if cls == 21:
        r = ctx.uni(0.1 * min(ctx.L[b], ctx.L[c]), 0.4 * min(ctx.L[b], ctx.L[c]))
        t1, t2 = (cb + db * r, cc), (cb, cc + dc * r)
        via = (cb + db * r * math.sqrt(0.5), cc + dc * r * math.sqrt(0.5))
        chain: list = [_arc_via((cb, cc), r, t1, t2, via)]
        params: dict = {"Radius": r, "Depth": d, "Center": lift(k, h + s_in * d, (cb, cc))}
    else:
        lb = ctx.uni(0.1 * ctx.L[b], 0.4 * ctx.L[b])
        lc = ctx.uni(0.1 * ctx.L[c], 0.4 * ctx.L[c])
        t1, t2 = (cb + db * lb, cc), (cb, cc + dc * lc)
        if cls == 20:
            chain = [g2.Seg(t1, t2)]
            params = {"Length": lb, "Width": lc, "Side": math.hypot(lb, lc), "Depth": d}
        else:
            corner = (cb + db * lb, cc + dc * lc)
            chain = [g2.Seg(t1, corner), g2.Seg(corner, t2)]
            params = {"Length": lb, "Width": lc, "Depth": d}
    region = corner_profile(cb, cc, db, dc, chain)
    lo, hi = (h - d, h + EXTENSION) if side == 1 else (-EXTENSION, d)
    return Prism(k, region_tuple(region), lo, hi, False, inst), params, k, (k, side)


BUILDERS: dict[int, Callable] = {}
for _c in (0, 23):
    BUILDERS[_c] = _edge_blend
for _c in (1, 2, 3, 4):
    BUILDERS[_c] = _through
for _c in (5, 6):
    BUILDERS[_c] = _through_slot
for _c in (7, 17, 18, 19):
    BUILDERS[_c] = _u_slot
for _c in (8, 9, 10):
    BUILDERS[_c] = _through_step
for _c in (11, 12, 13, 14, 15, 16):
    BUILDERS[_c] = _blind
for _c in (20, 21, 22):
    BUILDERS[_c] = _blind_step
for _c in (24, 25, 26, 27, 28):
    BUILDERS[_c] = _extrusion


# ---------------------------------------------------------------------------
# models


STOCK_RANGE = (30.0, 70.0)
FEATURE_RANGE = (4, 8)
MAX_ATTEMPTS = 50


@dataclass
class GeneratedModel:
    solid: Solid
    labels: list[tuple[int, int]]  # (class, instance) per face
    truth: GroundTruth


def face_labels(solid: Solid, classes: dict[int, int]) -> list[tuple[int, int]]:
    out = []
    for f in solid.faces:
        if f.tag and f.tag[0] == "feature":
            out.append((classes[f.tag[1]], f.tag[1]))
        else:
            out.append((STOCK, 0))
    return out


def _blend_face_pair(solid: Solid, inst: int, stock_faces) -> tuple[int, int]:
    blend = [fi for fi, f in enumerate(solid.faces) if f.tag == ("feature", inst)]
    pair = []
    for fi in blend:
        for fj in sorted(solid.neighbors(fi)):
            tag = solid.faces[fj].tag
            if tag and tag[0] == "stock" and (tag[1], tag[2]) in stock_faces:
                pair.append(fj)
    if len(pair) != 2:
        raise _Retry()
    return tuple(sorted(pair))  # type: ignore[return-value]


def _try_place(ctx: _Ctx, recipe: Recipe, cls: int, inst: int):
    for _ in range(MAX_ATTEMPTS):
        try:
            pr, params, dax, host = BUILDERS[cls](ctx, cls, inst)
        except _Retry:
            continue
        box = prism_aabb(recipe, pr)
        if any(boxes_clash(box, prism_aabb(recipe, q), recipe.gap) for q in recipe.prisms):
            continue
        return pr, FeatureRecord(inst, cls, params, dax, host)
    return None


def _sample(seed_seq: np.random.SeedSequence, reported_seed: int) -> Optional[GeneratedModel]:
    rng = np.random.default_rng(seed_seq)
    ctx = _Ctx(None, rng)
    dims = tuple(round(float(rng.uniform(*STOCK_RANGE)), 2) for _ in range(3))
    ctx.L = dims
    n_target = int(rng.integers(FEATURE_RANGE[0], FEATURE_RANGE[1] + 1))
    recipe = Recipe(dims, (), GAP)
    records: list[FeatureRecord] = []
    dropped: list[int] = []
    for _ in range(n_target):
        cls = int(rng.integers(0, N_CLASSES - 1))
        placed = _try_place(ctx, recipe, cls, len(records) + 1)
        if placed is None:
            dropped.append(cls)
            continue
        pr, rec = placed
        recipe = Recipe(dims, recipe.prisms + (pr,), GAP)
        records.append(rec)
    if len(records) < FEATURE_RANGE[0]:
        return None
    try:
        solid = build(recipe)
        for rec in records:
            faces = rec.params.pop("_blend_faces", None)
            if faces is not None:
                pair = _blend_face_pair(solid, rec.instance, faces)
                if rec.cls == 23:
                    rec.params["Face index"] = pair
    except (AFRError, _Retry):
        return None
    classes = {r.instance: r.cls for r in records}
    truth = GroundTruth(reported_seed, dims, records, dropped)
    return GeneratedModel(solid, face_labels(solid, classes), truth)


def generate_model(seed: int) -> GeneratedModel:
    """Deterministic labelled model for ``seed``."""
    seed = int(seed)
    for attempt in range(1000):
        ss = np.random.SeedSequence(seed) if attempt == 0 else np.random.SeedSequence([seed, attempt])
        model = _sample(ss, seed)
        if model is not None:
            model.truth.regenerations = attempt
            return model
    raise AFRError(f"could not generate a valid model for seed {seed}")


def model_seed(seed: int, index: int) -> int:
    """Per-model sub-seed derived from the dataset seed."""
    state = np.random.SeedSequence([int(seed), int(index)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class GenSpec:
    seed: int = 0
    n_models: int = 2000
    stock_range: tuple[float, float] = STOCK_RANGE
    feature_range: tuple[int, int] = FEATURE_RANGE
    max_attempts: int = MAX_ATTEMPTS

    def __post_init__(self):
        if self.n_models < 1:
            raise InvalidArgument("n_models must be at least 1")
        if self.stock_range != STOCK_RANGE or self.feature_range != FEATURE_RANGE or self.max_attempts != MAX_ATTEMPTS:
            raise InvalidArgument("only the default stock/feature ranges are supported")


def split_assignment(seed: int, n: int) -> list[str]:
    order = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED])).permutation(n)
    n_train = int(round(0.6 * n))
    n_val = int(round(0.2 * n))
    out = [""] * n
    for rank, idx in enumerate(order):
        out[int(idx)] = "train" if rank < n_train else ("val" if rank < n_train + n_val else "test")
    return out


def model_name(index: int) -> str:
    return f"model_{index:05d}"


def _render(args) -> tuple:
    from .step_io import write_step

    index, seed = args
    sub = model_seed(seed, index)
    model = generate_model(sub)
    step, side = write_step(model.solid, model.labels, name=model_name(index))
    counts = [0] * N_CLASSES
    for cls, _ in model.labels:
        counts[cls] += 1
    return index, sub, step, side, model.truth.to_json(), counts, len(model.truth.features)


def iter_models(spec: GenSpec, workers: int = 1):
    jobs = [(i, spec.seed) for i in range(spec.n_models)]
    if workers <= 1:
        for j in jobs:
            yield _render(j)
        return
    import multiprocessing as mp

    with mp.get_context("spawn").Pool(workers) as pool:
        yield from pool.imap(_render, jobs, chunksize=max(1, len(jobs) // (workers * 8)))


class DatasetWriteError(AFRError):
    def __init__(self, message: str, manifest: dict):
        super().__init__(message)
        self.manifest = manifest


def _manifest(spec: GenSpec, rows: list[dict], counts: list[int]) -> dict:
    return {
        "seed": spec.seed,
        "n_models": spec.n_models,
        "models": rows,
        "class_face_counts": counts,
        "split_sizes": {s: sum(1 for r in rows if r["split"] == s) for s in ("train", "val", "test")},
    }


def generate_dataset(spec: GenSpec, out_dir, workers: int = 1) -> dict:
    """Write STEP files, label sidecars, ground truth and ``manifest.json``."""
    os.makedirs(out_dir, exist_ok=True)
    splits = split_assignment(spec.seed, spec.n_models)
    rows: list[dict] = []
    counts = [0] * N_CLASSES
    try:
        for index, sub, step, side, gt, c, n_feat in iter_models(spec, workers):
            name = model_name(index)
            for ext, text in ((".step", step), (".labels", side), (".gt.json", gt)):
                with open(os.path.join(out_dir, name + ext), "w", encoding="utf-8", newline="\n") as fh:
                    fh.write(text)
            rows.append({"path": name + ".step", "seed": sub, "n_features": n_feat, "split": splits[index]})
            counts = [a + b for a, b in zip(counts, c)]
    except OSError as exc:
        partial = _manifest(spec, rows, counts)
        try:
            write_manifest(partial, os.path.join(out_dir, "manifest.partial.json"))
        except OSError:
            pass
        raise DatasetWriteError(f"dataset write failed after {len(rows)} models: {exc}", partial) from exc
    manifest = _manifest(spec, rows, counts)
    write_manifest(manifest, os.path.join(out_dir, "manifest.json"))
    return manifest


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
