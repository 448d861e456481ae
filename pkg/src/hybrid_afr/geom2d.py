"""Planar regions bounded by line segments and circular arcs.

A region is a list of closed loops. Outer loops run counter-clockwise and
holes clockwise, so the region interior is always on the left of travel.
The kernel only ever clips regions against axis-aligned rectangles, which
keeps every split point exact when the profile is designed to cross the
rectangle at its own vertices or along axis-aligned segments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .errors import GeometryError

Pt = tuple[float, float]

TWO_PI = 2.0 * math.pi
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class Seg:
    a: Pt
    b: Pt

    def reversed(self) -> "Seg":
        return Seg(self.b, self.a)

    @property
    def start(self) -> Pt:
        return self.a

    @property
    def end(self) -> Pt:
        return self.b

    def point(self, t: float) -> Pt:
        return (self.a[0] + t * (self.b[0] - self.a[0]), self.a[1] + t * (self.b[1] - self.a[1]))

    def midpoint(self) -> Pt:
        return self.point(0.5)

    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])


@dataclass(frozen=True)
class Arc:
    """Circular arc from ``a`` to ``b`` about ``center``; ``ccw`` gives the sense."""

    center: Pt
    radius: float
    a: Pt
    b: Pt
    ccw: bool

    def reversed(self) -> "Arc":
        return Arc(self.center, self.radius, self.b, self.a, not self.ccw)

    @property
    def start(self) -> Pt:
        return self.a

    @property
    def end(self) -> Pt:
        return self.b

    @property
    def theta0(self) -> float:
        return math.atan2(self.a[1] - self.center[1], self.a[0] - self.center[0])

    @property
    def theta1(self) -> float:
        return math.atan2(self.b[1] - self.center[1], self.b[0] - self.center[0])

    @property
    def sweep(self) -> float:
        """Signed swept angle, positive when counter-clockwise."""
        d = (self.theta1 - self.theta0) % TWO_PI
        if d < 1e-12:
            d = TWO_PI
        return d if self.ccw else -((self.theta0 - self.theta1) % TWO_PI or TWO_PI)

    def angle_at(self, t: float) -> float:
        return self.theta0 + t * self.sweep

    def point(self, t: float) -> Pt:
        if t == 0.0:
            return self.a
        if t == 1.0:
            return self.b
        th = self.angle_at(t)
        return (self.center[0] + self.radius * math.cos(th), self.center[1] + self.radius * math.sin(th))

    def midpoint(self) -> Pt:
        return self.point(0.5)

    def param_of_angle(self, th: float) -> float:
        """Fraction along the arc of polar angle ``th`` (may exceed [0, 1])."""
        sw = self.sweep
        d = (th - self.theta0) % TWO_PI if sw > 0 else (self.theta0 - th) % TWO_PI
        return d / abs(sw)

    def length(self) -> float:
        return abs(self.sweep) * self.radius


@dataclass(frozen=True)
class Circle:
    """Full circle; its seam point sits at polar angle 0."""

    center: Pt
    radius: float
    ccw: bool

    def reversed(self) -> "Circle":
        return Circle(self.center, self.radius, not self.ccw)

    @property
    def seam(self) -> Pt:
        return (self.center[0] + self.radius, self.center[1])

    @property
    def start(self) -> Pt:
        return self.seam

    @property
    def end(self) -> Pt:
        return self.seam

    @property
    def sweep(self) -> float:
        return TWO_PI if self.ccw else -TWO_PI

    def point(self, t: float) -> Pt:
        th = t * self.sweep
        return (self.center[0] + self.radius * math.cos(th), self.center[1] + self.radius * math.sin(th))

    def midpoint(self) -> Pt:
        return self.point(0.5)

    def as_arc(self) -> Arc:
        return Arc(self.center, self.radius, self.seam, self.seam, self.ccw)

    def length(self) -> float:
        return TWO_PI * self.radius


Curve2 = Union[Seg, Arc, Circle]
Loop = list  # list[Curve2], closed chain
Region = list  # list[Loop]


# ---------------------------------------------------------------------------
# loop construction helpers


def polygon(points: list[Pt]) -> Loop:
    n = len(points)
    return [Seg(points[k], points[(k + 1) % n]) for k in range(n)]


def reverse_loop(loop: Loop) -> Loop:
    return [c.reversed() for c in reversed(loop)]


def rectangle(x0: float, y0: float, x1: float, y1: float) -> Loop:
    return polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def regular_polygon(center: Pt, circumradius: float, n: int, rotation: float) -> list[Pt]:
    return [
        (
            center[0] + circumradius * math.cos(rotation + TWO_PI * k / n),
            center[1] + circumradius * math.sin(rotation + TWO_PI * k / n),
        )
        for k in range(n)
    ]


def stadium(c1: Pt, c2: Pt, r: float) -> Loop:
    """Counter-clockwise slot outline with semicircular ends at c1 and c2."""
    dx, dy = c2[0] - c1[0], c2[1] - c1[1]
    L = math.hypot(dx, dy)
    ux, uy = dx / L, dy / L
    nx, ny = -uy, ux
    p1 = (c1[0] - r * nx, c1[1] - r * ny)
    p2 = (c2[0] - r * nx, c2[1] - r * ny)
    p3 = (c2[0] + r * nx, c2[1] + r * ny)
    p4 = (c1[0] + r * nx, c1[1] + r * ny)
    return [Seg(p1, p2), Arc(c2, r, p2, p3, True), Seg(p3, p4), Arc(c1, r, p4, p1, True)]


# ---------------------------------------------------------------------------
# measures


def _curve_green(c: Curve2) -> tuple[float, float, float]:
    """Return (∮x dy - y dx)/2, ∮x² dy / 2, -∮y² dx / 2 along one curve."""
    if isinstance(c, Seg):
        (x0, y0), (x1, y1) = c.a, c.b
        area = 0.5 * (x0 * y1 - x1 * y0)
        dy = y1 - y0
        dx = x1 - x0
        mx = 0.5 * dy * (x0 * x0 + x0 * x1 + x1 * x1) / 3.0
        my = -0.5 * dx * (y0 * y0 + y0 * y1 + y1 * y1) / 3.0
        return area, mx, my
    if isinstance(c, Circle):
        c = c.as_arc()
    cx, cy = c.center
    r = c.radius
    t0 = c.theta0
    t1 = t0 + c.sweep
    s0, s1 = math.sin(t0), math.sin(t1)
    k0, k1 = math.cos(t0), math.cos(t1)
    area = 0.5 * (r * r * (t1 - t0) + r * (cx * (s1 - s0) - cy * (k1 - k0)))

    def icos2(t: float) -> float:
        return t / 2.0 + math.sin(2 * t) / 4.0

    def isin2(t: float) -> float:
        return t / 2.0 - math.sin(2 * t) / 4.0

    def icos3(t: float) -> float:
        s = math.sin(t)
        return s - s ** 3 / 3.0

    def isin3(t: float) -> float:
        k = math.cos(t)
        return -k + k ** 3 / 3.0

    mx = 0.5 * r * (
        cx * cx * (s1 - s0) + 2 * cx * r * (icos2(t1) - icos2(t0)) + r * r * (icos3(t1) - icos3(t0))
    )
    my = 0.5 * r * (
        cy * cy * (-k1 + k0) + 2 * cy * r * (isin2(t1) - isin2(t0)) + r * r * (isin3(t1) - isin3(t0))
    )
    return area, mx, my


def region_moments(region: Region) -> tuple[float, Pt]:
    """Exact area and centroid of a region with line and arc boundaries."""
    A = Mx = My = 0.0
    for loop in region:
        for c in loop:
            a, mx, my = _curve_green(c)
            A += a
            Mx += mx
            My += my
    if abs(A) < 1e-300:
        raise GeometryError("zero-area region")
    return A, (Mx / A, My / A)


def loop_area(loop: Loop) -> float:
    return sum(_curve_green(c)[0] for c in loop)


# ---------------------------------------------------------------------------
# point classification

_RAY = (math.cos(0.3711), math.sin(0.3711))


def _ray_hits(q: Pt, c: Curve2) -> int:
    dx, dy = _RAY
    if isinstance(c, Seg):
        (x0, y0), (x1, y1) = c.a, c.b
        ex, ey = x1 - x0, y1 - y0
        den = dx * ey - dy * ex
        if abs(den) < 1e-300:
            return 0
        wx, wy = x0 - q[0], y0 - q[1]
        t = (wx * ey - wy * ex) / den  # along ray
        s = (wx * dy - wy * dx) / den  # along segment
        return int(t > 0 and 0.0 <= s < 1.0)
    cx, cy = c.center
    fx, fy = q[0] - cx, q[1] - cy
    b = fx * dx + fy * dy
    cc = fx * fx + fy * fy - c.radius * c.radius
    disc = b * b - cc
    if disc <= 0:
        return 0
    sq = math.sqrt(disc)
    hits = 0
    for t in (-b - sq, -b + sq):
        if t <= 0:
            continue
        if isinstance(c, Circle):
            hits += 1
            continue
        th = math.atan2(fy + t * dy, fx + t * dx)
        u = c.param_of_angle(th)
        if u < 1.0 - 1e-15:
            hits += 1
    return hits


def point_in_region(q: Pt, region: Region) -> bool:
    n = 0
    for loop in region:
        for c in loop:
            n += _ray_hits(q, c)
    return n % 2 == 1


# ---------------------------------------------------------------------------
# splitting against axis lines


def _line_hits(c: Curve2, axis: int, value: float) -> list[tuple[float, Pt]]:
    """Interior crossings of curve ``c`` with the line coord[axis] == value."""
    other = 1 - axis
    out: list[tuple[float, Pt]] = []
    if isinstance(c, Seg):
        a0, a1 = c.a[axis], c.b[axis]
        if a0 == a1:
            return out
        t = (value - a0) / (a1 - a0)
        if 0.0 < t < 1.0 and c.a[axis] != value and c.b[axis] != value:
            p = [0.0, 0.0]
            p[axis] = value
            o0, o1 = c.a[other], c.b[other]
            p[other] = o0 if o0 == o1 else o0 + t * (o1 - o0)
            out.append((t, (p[0], p[1])))
        return out
    arc = c.as_arc() if isinstance(c, Circle) else c
    d = value - arc.center[axis]
    r = arc.radius
    if abs(d) >= r - 1e-9 * max(1.0, r):
        return out  # misses or only touches the line
    h = math.sqrt(r * r - d * d)
    for sgn in (-1.0, 1.0):
        p = [0.0, 0.0]
        p[axis] = value
        p[other] = arc.center[other] + sgn * h
        pt = (p[0], p[1])
        if _near(pt, arc.a, 1e-9) or _near(pt, arc.b, 1e-9):
            continue
        th = math.atan2(pt[1] - arc.center[1], pt[0] - arc.center[0])
        u = arc.param_of_angle(th)
        if 1e-9 < u < 1.0 - 1e-9:
            out.append((u, pt))
    return out


def _near(p: Pt, q: Pt, tol: float = 1e-12) -> bool:
    return abs(p[0] - q[0]) <= tol * (1 + abs(p[0])) and abs(p[1] - q[1]) <= tol * (1 + abs(p[1]))


def _sub(c: Curve2, t0: float, p0: Pt, t1: float, p1: Pt) -> Curve2:
    if isinstance(c, Seg):
        return Seg(p0, p1)
    arc = c.as_arc() if isinstance(c, Circle) else c
    return Arc(arc.center, arc.radius, p0, p1, arc.ccw)


def split_curve(c: Curve2, cuts: list[tuple[float, Pt]]) -> list[Curve2]:
    if not cuts:
        return [c]
    cuts = sorted(cuts)
    pts = [(0.0, c.start)] + cuts + [(1.0, c.end)]
    return [_sub(c, pts[k][0], pts[k][1], pts[k + 1][0], pts[k + 1][1]) for k in range(len(pts) - 1)]


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    def classify(self, p: Pt, tol: float = BOUNDARY_TOL) -> int:
        """1 strictly inside, 0 on boundary, -1 outside."""
        x, y = p
        if x < self.x0 - tol or x > self.x1 + tol or y < self.y0 - tol or y > self.y1 + tol:
            return -1
        if (
            abs(x - self.x0) <= tol
            or abs(x - self.x1) <= tol
            or abs(y - self.y0) <= tol
            or abs(y - self.y1) <= tol
        ):
            return 0
        return 1

    @property
    def perimeter(self) -> float:
        return 2 * (self.x1 - self.x0) + 2 * (self.y1 - self.y0)

    def param(self, p: Pt) -> float:
        """Counter-clockwise arc-length position of a boundary point."""
        x, y = p
        w, h = self.x1 - self.x0, self.y1 - self.y0
        tol = BOUNDARY_TOL * (1 + max(abs(x), abs(y)))
        if abs(y - self.y0) <= tol and x < self.x1 - tol:
            return x - self.x0
        if abs(x - self.x1) <= tol and y < self.y1 - tol:
            return w + (y - self.y0)
        if abs(y - self.y1) <= tol and x > self.x0 + tol:
            return w + h + (self.x1 - x)
        if abs(x - self.x0) <= tol:
            return 2 * w + h + (self.y1 - y)
        raise GeometryError(f"point {p} is not on the rectangle boundary")

    def corners(self) -> list[tuple[float, Pt]]:
        w, h = self.x1 - self.x0, self.y1 - self.y0
        return [
            (0.0, (self.x0, self.y0)),
            (w, (self.x1, self.y0)),
            (w + h, (self.x1, self.y1)),
            (2 * w + h, (self.x0, self.y1)),
        ]

    def boundary_path(self, pa: Pt, pb: Pt) -> list[Seg]:
        """Counter-clockwise boundary segments from ``pa`` to ``pb``."""
        ta, tb = self.param(pa), self.param(pb)
        per = self.perimeter
        span = (tb - ta) % per
        if span < 1e-12:
            span = per
        pts = [pa]
        for tc, pc in self.corners():
            d = (tc - ta) % per
            if 1e-12 < d < span - 1e-12:
                pts.append((d, pc))  # type: ignore[arg-type]
        inner = sorted(pts[1:])
        chain = [pa] + [p for _, p in inner] + [pb]  # type: ignore[misc]
        return [Seg(chain[k], chain[k + 1]) for k in range(len(chain) - 1)]

    def loop(self) -> Loop:
        return rectangle(self.x0, self.y0, self.x1, self.y1)


def clip_loop(loop: Loop, rect: Rect) -> tuple[list[Loop], list[list[Curve2]]]:
    """Pieces of a closed loop lying inside ``rect``.

    Returns (closed loops entirely inside, open chains running from boundary
    to boundary). A piece running along the rectangle boundary is a design
    error and raises GeometryError.
    """
    pieces: list[tuple[Curve2, int]] = []
    for c in loop:
        cuts: list[tuple[float, Pt]] = []
        for axis, value in ((0, rect.x0), (0, rect.x1), (1, rect.y0), (1, rect.y1)):
            cuts.extend(_line_hits(c, axis, value))
        for sub in split_curve(c, cuts):
            if sub.length() < 1e-12:
                continue
            state = rect.classify(sub.midpoint())
            if state == 0:
                raise GeometryError("profile runs along the host boundary")
            pieces.append((sub, state))
    if all(s == 1 for _, s in pieces):
        return [[p for p, _ in pieces]], []
    if all(s == -1 for _, s in pieces):
        return [], []
    k0 = next(k for k in range(len(pieces)) if pieces[k][1] == 1 and pieces[k - 1][1] == -1)
    rot = pieces[k0:] + pieces[:k0]
    chains: list[list[Curve2]] = []
    cur: list[Curve2] = []
    for p, s in rot:
        if s == 1:
            cur.append(p)
        elif cur:
            chains.append(cur)
            cur = []
    if cur:
        chains.append(cur)
    return [], chains


def _walk(rect: Rect, chains: list[list[Curve2]]) -> list[Loop]:
    starts = [(rect.param(ch[0].start), k) for k, ch in enumerate(chains)]
    starts.sort()
    per = rect.perimeter
    used = [False] * len(chains)
    loops: list[Loop] = []
    for k0 in range(len(chains)):
        if used[k0]:
            continue
        loop: Loop = []
        k = k0
        while not used[k]:
            used[k] = True
            loop.extend(chains[k])
            pe = chains[k][-1].end
            te = rect.param(pe)
            nxt = min(starts, key=lambda s: (s[0] - te) % per if (s[0] - te) % per > 1e-12 else per)
            loop.extend(rect.boundary_path(pe, chains[nxt[1]][0].start))
            k = nxt[1]
        if k != k0:
            raise GeometryError("inconsistent boundary events while tracing region")
        loops.append(loop)
    return loops


def _assemble(outers: list[Loop], holes: list[Loop]) -> list[Region]:
    regions: list[Region] = [[o] for o in outers]
    for h in holes:
        probe = h[0].midpoint()
        owners = [r for r in regions if point_in_region(probe, [r[0]])]
        if not owners:
            raise GeometryError("hole not contained in any outer loop")
        owner = min(owners, key=lambda r: loop_area(r[0]))
        owner.append(h)
    return regions


def rect_minus(rect: Rect, bites: list[Region]) -> list[Region]:
    """Connected components of ``rect`` with the (disjoint) bite regions removed."""
    chains: list[list[Curve2]] = []
    closed: list[Loop] = []
    for bite in bites:
        for loop in bite:
            cl, ch = clip_loop(loop, rect)
            closed.extend(reverse_loop(c) for c in cl)
            chains.extend(reverse_loop(c) for c in ch)
    outers = _walk(rect, chains) if chains else [rect.loop()]
    holes = []
    for c in closed:
        (outers if loop_area(c) > 0 else holes).append(c)
    return _assemble(outers, holes)


def rect_intersect(rect: Rect, region: Region) -> list[Region]:
    """Connected components of ``region`` clipped to ``rect``."""
    chains: list[list[Curve2]] = []
    closed: list[Loop] = []
    for loop in region:
        cl, ch = clip_loop(loop, rect)
        closed.extend(cl)
        chains.extend(ch)
    outers = _walk(rect, chains) if chains else []
    holes = []
    for c in closed:
        (outers if loop_area(c) > 0 else holes).append(c)
    if not outers:
        return []
    return _assemble(outers, holes)


def line_section(region: Region, axis: int, value: float) -> list[tuple[float, float]]:
    """Intervals of the other coordinate where the line coord[axis]==value lies in ``region``."""
    other = 1 - axis
    ts: list[float] = []
    for loop in region:
        for c in loop:
            for _, p in _line_hits(c, axis, value):
                ts.append(p[other])
            if abs(c.start[axis] - value) <= 1e-12 * (1 + abs(value)):
                ts.append(c.start[other])
    ts = sorted(set(ts))
    out: list[tuple[float, float]] = []
    for a, b in zip(ts, ts[1:]):
        if b - a < 1e-12:
            continue
        q = [0.0, 0.0]
        q[axis] = value
        q[other] = 0.5 * (a + b)
        if point_in_region((q[0], q[1]), region):
            if out and abs(out[-1][1] - a) < 1e-12:
                out[-1] = (out[-1][0], b)
            else:
                out.append((a, b))
    return out


def region_bbox(region: Region, samples: int = 16) -> tuple[float, float, float, float]:
    xs: list[float] = []
    ys: list[float] = []
    for loop in region:
        for c in loop:
            if isinstance(c, Seg):
                pts = [c.a, c.b]
            else:
                pts = [c.point(k / samples) for k in range(samples + 1)]
                arc = c.as_arc() if isinstance(c, Circle) else c
                for k in range(4):
                    th = k * math.pi / 2
                    if isinstance(c, Circle) or 0 <= arc.param_of_angle(th) <= 1:
                        pts.append((c.center[0] + c.radius * math.cos(th), c.center[1] + c.radius * math.sin(th)))
            for p in pts:
                xs.append(p[0])
                ys.append(p[1])
    return min(xs), min(ys), max(xs), max(ys)
