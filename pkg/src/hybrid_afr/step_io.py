"""Minimal ISO 10303-21 reader/writer for kernel solids, plus label sidecars."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .brep import CircleCurve, Cylinder, Edge, Face, Line, Plane, Solid, validate_topology
from .errors import (
    AFRError,
    DanglingReference,
    ReferenceCycle,
    StepError,
    StepStructureError,
    StepSyntaxError,
    UnsupportedEntity,
    UnsupportedGeometry,
)

SCHEMA = "AUTOMOTIVE_DESIGN"
SIDECAR_HEADER = "face_id,class_index,instance_id"
N_CLASSES = 30

SUPPORTED = frozenset(
    {
        "CARTESIAN_POINT",
        "DIRECTION",
        "VECTOR",
        "AXIS2_PLACEMENT_3D",
        "PLANE",
        "CYLINDRICAL_SURFACE",
        "LINE",
        "CIRCLE",
        "VERTEX_POINT",
        "EDGE_CURVE",
        "ORIENTED_EDGE",
        "EDGE_LOOP",
        "FACE_BOUND",
        "FACE_OUTER_BOUND",
        "ADVANCED_FACE",
        "CLOSED_SHELL",
        "MANIFOLD_SOLID_BREP",
    }
)


@dataclass(frozen=True)
class Ref:
    id: int


@dataclass(frozen=True)
class Enum:
    name: str


class Omitted:
    """The ``$`` / ``*`` placeholders."""

    def __init__(self, sym: str):
        self.sym = sym

    def __repr__(self) -> str:
        return self.sym

    def __eq__(self, other) -> bool:
        return isinstance(other, Omitted) and other.sym == self.sym

    def __hash__(self) -> int:
        return hash(self.sym)


@dataclass(frozen=True)
class StepEntity:
    id: int
    keyword: str
    args: tuple
    line: int = 0
    column: int = 0


Label = tuple[int, int]  # (class index, instance id)


@dataclass(frozen=True)
class StepDocument:
    solid: Solid
    face_entity_ids: tuple[int, ...]
    labels: Optional[tuple[Label, ...]] = None


# ---------------------------------------------------------------------------
# writing


def format_real(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise UnsupportedGeometry(f"non-finite real {x}")
    if x == 0:
        return "0."
    s = format(x, ".17G")
    if "E" in s:
        mant, exp = s.split("E")
        if "." not in mant:
            mant += "."
        return f"{mant}E{exp}"
    if "." not in s:
        s += "."
    return s


def _fmt_arg(a) -> str:
    if isinstance(a, Ref):
        return f"#{a.id}"
    if isinstance(a, Enum):
        return f".{a.name}."
    if isinstance(a, Omitted):
        return a.sym
    if isinstance(a, bool):
        return ".T." if a else ".F."
    if isinstance(a, float):
        return format_real(a)
    if isinstance(a, int):
        return str(a)
    if isinstance(a, str):
        return "'" + a.replace("'", "''") + "'"
    if isinstance(a, (list, tuple)):
        return "(" + ",".join(_fmt_arg(x) for x in a) + ")"
    raise StepError(f"cannot encode argument {a!r}")


class _Writer:
    def __init__(self) -> None:
        self.lines: list[str] = []
        self.memo: dict = {}

    def emit(self, keyword: str, args: Sequence) -> Ref:
        self.lines.append(f"{keyword}({','.join(_fmt_arg(a) for a in args)})")
        return Ref(len(self.lines))

    def point(self, p) -> Ref:
        return self.emit("CARTESIAN_POINT", ["", tuple(float(v) for v in p)])

    def direction(self, d) -> Ref:
        return self.emit("DIRECTION", ["", tuple(float(v) for v in d)])

    def axis2(self, origin, axis, ref) -> Ref:
        p = self.point(origin)
        a = self.direction(axis)
        r = self.direction(ref)
        return self.emit("AXIS2_PLACEMENT_3D", ["", p, a, r])

    def surface(self, s) -> Ref:
        if isinstance(s, Plane):
            return self.emit("PLANE", ["", self.axis2(s.origin, s.normal, s.ref)])
        if isinstance(s, Cylinder):
            return self.emit("CYLINDRICAL_SURFACE", ["", self.axis2(s.origin, s.axis, s.ref), float(s.radius)])
        raise UnsupportedGeometry(f"unsupported surface {type(s).__name__}")

    def curve(self, c) -> Ref:
        if isinstance(c, Line):
            p = self.point(c.origin)
            d = self.direction(c.direction)
            v = self.emit("VECTOR", ["", d, 1.0])
            return self.emit("LINE", ["", p, v])
        if isinstance(c, CircleCurve):
            return self.emit("CIRCLE", ["", self.axis2(c.center, c.axis, c.ref), float(c.radius)])
        raise UnsupportedGeometry(f"unsupported curve {type(c).__name__}")

    def vertex(self, solid: Solid, vid: int) -> Ref:
        key = ("v", vid)
        if key not in self.memo:
            self.memo[key] = self.emit("VERTEX_POINT", ["", self.point(solid.vertices[vid])])
        return self.memo[key]

    def edge(self, solid: Solid, eid: int) -> Ref:
        key = ("e", eid)
        if key not in self.memo:
            e = solid.edges[eid]
            v0 = self.vertex(solid, e.start)
            v1 = self.vertex(solid, e.end)
            c = self.curve(e.curve)
            self.memo[key] = self.emit("EDGE_CURVE", ["", v0, v1, c, True])
        return self.memo[key]

    def face(self, solid: Solid, fi: int) -> Ref:
        f = solid.faces[fi]
        bounds = []
        for k, loop in enumerate(f.loops):
            oes = [self.emit("ORIENTED_EDGE", ["", Omitted("*"), Omitted("*"), self.edge(solid, eid), bool(fwd)]) for eid, fwd in loop]
            lp = self.emit("EDGE_LOOP", ["", oes])
            bounds.append(self.emit("FACE_OUTER_BOUND" if k == 0 else "FACE_BOUND", ["", lp, True]))
        s = self.surface(f.surface)
        return self.emit("ADVANCED_FACE", ["", bounds, s, bool(f.same_sense)])


def _header(name: str) -> list[str]:
    return [
        "ISO-10303-21;",
        "HEADER;",
        "FILE_DESCRIPTION(('hybrid_afr solid'),'2;1');",
        f"FILE_NAME({_fmt_arg(name)},'',(''),(''),'hybrid_afr','','');",
        f"FILE_SCHEMA(('{SCHEMA}'));",
        "ENDSEC;",
        "DATA;",
    ]


def write_step(
    solid: Solid, labels: Optional[Sequence[Label]] = None, name: str = "model"
) -> Union[str, tuple[str, str]]:
    """Serialise ``solid``; with per-face ``labels`` also return the sidecar text."""
    w = _Writer()
    face_refs = [w.face(solid, fi) for fi in range(len(solid.faces))]
    shell = w.emit("CLOSED_SHELL", ["", face_refs])
    w.emit("MANIFOLD_SOLID_BREP", ["", shell])
    body = [f"#{k + 1}={line};" for k, line in enumerate(w.lines)]
    text = "\n".join(_header(name) + body + ["ENDSEC;", "END-ISO-10303-21;", ""])
    if labels is None:
        return text
    return text, write_sidecar([r.id for r in face_refs], labels)


def write_sidecar(face_entity_ids: Sequence[int], labels: Sequence[Label]) -> str:
    if len(labels) != len(face_entity_ids):
        raise StepError(f"{len(labels)} labels for {len(face_entity_ids)} faces")
    rows = [SIDECAR_HEADER]
    for fid, (cls, inst) in zip(face_entity_ids, labels):
        if not 0 <= int(cls) < N_CLASSES or int(inst) < 0:
            raise StepError(f"bad label ({cls}, {inst}) for face #{fid}")
        rows.append(f"{fid},{int(cls)},{int(inst)}")
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# tokenizing

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>/\*.*?\*/)
  | (?P<ref>\#[0-9]+)
  | (?P<string>'(?:[^']|'')*')
  | (?P<enum>\.[A-Za-z_][A-Za-z0-9_]*\.)
  | (?P<real>[+-]?[0-9]+\.[0-9]*(?:[Ee][+-]?[0-9]+)?)
  | (?P<int>[+-]?[0-9]+)
  | (?P<keyword>!?[A-Za-z_][A-Za-z0-9_\-]*)
  | (?P<sym>[()=;,$*])
    """,
    re.VERBOSE | re.DOTALL,
)


def _tokens(text: str):
    pos = 0
    line = 1
    line_start = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        if m is None:
            raise StepSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        val = m.group()
        col = pos - line_start + 1
        if kind not in ("ws", "comment"):
            yield kind, val, line, col
        nl = val.count("\n")
        if nl:
            line += nl
            line_start = pos + val.rfind("\n") + 1
        pos = m.end()
    yield "eof", "", line, pos - line_start + 1


class _Parser:
    def __init__(self, text: str):
        self.toks = list(_tokens(text))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None, val=None):
        t = self.toks[self.i]
        if (kind and t[0] != kind) or (val is not None and t[1] != val):
            want = val if val is not None else kind
            got = t[1] if t[0] != "eof" else "end of file"
            raise StepSyntaxError(f"expected {want!r}, found {got!r}", t[2], t[3])
        self.i += 1
        return t

    def skip_header(self):
        self.take("keyword", "ISO-10303-21")
        self.take("sym", ";")
        self.take("keyword", "HEADER")
        self.take("sym", ";")
        while not (self.peek()[0] == "keyword" and self.peek()[1] == "ENDSEC"):
            t = self.peek()
            if t[0] == "eof":
                raise StepSyntaxError("unterminated HEADER section", t[2], t[3])
            self.take("keyword")
            self.args()
            self.take("sym", ";")
        self.take("keyword", "ENDSEC")
        self.take("sym", ";")

    def args(self) -> tuple:
        self.take("sym", "(")
        out = []
        if self.peek()[:2] == ("sym", ")"):
            self.take()
            return ()
        while True:
            out.append(self.value())
            t = self.take("sym")
            if t[1] == ")":
                return tuple(out)
            if t[1] != ",":
                raise StepSyntaxError(f"expected ',' or ')', found {t[1]!r}", t[2], t[3])

    def value(self):
        kind, val, line, col = self.peek()
        if kind == "sym" and val == "(":
            return self.args()
        self.take()
        if kind == "ref":
            return Ref(int(val[1:]))
        if kind == "string":
            return val[1:-1].replace("''", "'")
        if kind == "enum":
            name = val[1:-1]
            if name in ("T", "F"):
                return name == "T"
            return Enum(name)
        if kind == "real":
            return float(val)
        if kind == "int":
            return int(val)
        if kind == "sym" and val in "$*":
            return Omitted(val)
        if kind == "keyword":
            return ("typed", val, self.args())
        raise StepSyntaxError(f"unexpected token {val!r}", line, col)

    def data(self) -> dict[int, StepEntity]:
        self.take("keyword", "DATA")
        self.take("sym", ";")
        ents: dict[int, StepEntity] = {}
        while True:
            kind, val, line, col = self.peek()
            if kind == "keyword" and val == "ENDSEC":
                self.take()
                self.take("sym", ";")
                break
            t = self.take("ref")
            eid = int(t[1][1:])
            self.take("sym", "=")
            k2, kw, l2, c2 = self.peek()
            if k2 == "sym" and kw == "(":
                raise UnsupportedEntity(f"complex entity #{eid} is not supported", eid)
            self.take("keyword")
            args = self.args()
            self.take("sym", ";")
            if eid in ents:
                raise StepSyntaxError(f"duplicate entity id #{eid}", line, col)
            ents[eid] = StepEntity(eid, kw.upper(), args, line, col)
        self.take("keyword", "END-ISO-10303-21")
        self.take("sym", ";")
        self.take("eof")
        return ents


def tokenize_entities(text: str) -> dict[int, StepEntity]:
    p = _Parser(text)
    p.skip_header()
    return p.data()


# ---------------------------------------------------------------------------
# resolving


def _refs(args) -> list[int]:
    out = []
    for a in args:
        if isinstance(a, Ref):
            out.append(a.id)
        elif isinstance(a, tuple):
            if len(a) == 3 and a[0] == "typed":
                out.extend(_refs(a[2]))
            else:
                out.extend(_refs(a))
    return out


def _check_graph(ents: dict[int, StepEntity]) -> None:
    for e in ents.values():
        if e.keyword not in SUPPORTED:
            raise UnsupportedEntity(f"unsupported entity #{e.id}={e.keyword}", e.id)
    for e in ents.values():
        for r in _refs(e.args):
            if r not in ents:
                raise DanglingReference(f"#{e.id} references missing #{r}", r)
    state: dict[int, int] = {}
    for root in ents:
        if root in state:
            continue
        stack = [(root, iter(_refs(ents[root].args)))]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
                continue
            st = state.get(nxt, 0)
            if st == 1:
                raise ReferenceCycle(f"reference cycle through #{nxt}", nxt)
            if st == 0:
                state[nxt] = 1
                stack.append((nxt, iter(_refs(ents[nxt].args))))


class _Resolver:
    def __init__(self, ents: dict[int, StepEntity]):
        self.ents = ents
        self.vertex_index: dict[int, int] = {}
        self.vertices: list = []
        self.edge_index: dict[int, int] = {}
        self.edges: list[Edge] = []

    def get(self, ref, *keywords: str) -> StepEntity:
        if not isinstance(ref, Ref):
            raise StepStructureError(f"expected a reference, got {ref!r}")
        e = self.ents[ref.id]
        if keywords and e.keyword not in keywords:
            raise StepStructureError(f"#{e.id} is {e.keyword}, expected {'/'.join(keywords)}", e.id)
        return e

    def arg(self, e: StepEntity, k: int):
        if k >= len(e.args):
            raise StepStructureError(f"#{e.id} {e.keyword} has too few arguments", e.id)
        return e.args[k]

    def real(self, e: StepEntity, k: int) -> float:
        v = self.arg(e, k)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise StepStructureError(f"#{e.id} argument {k} is not a finite number", e.id)
        return float(v)

    def triple(self, e: StepEntity) -> tuple[float, float, float]:
        v = self.arg(e, 1)
        if not isinstance(v, tuple) or len(v) != 3:
            raise StepStructureError(f"#{e.id} needs three coordinates", e.id)
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) for x in v):
            raise StepStructureError(f"#{e.id} has non-numeric coordinates", e.id)
        return (float(v[0]), float(v[1]), float(v[2]))

    def point(self, ref) -> tuple[float, float, float]:
        return self.triple(self.get(ref, "CARTESIAN_POINT"))

    def direction(self, ref) -> tuple[float, float, float]:
        e = self.get(ref, "DIRECTION")
        d = self.triple(e)
        n = math.sqrt(sum(x * x for x in d))
        if n == 0:
            raise StepStructureError(f"#{e.id} is a zero direction", e.id)
        if abs(n - 1.0) > 1e-12:
            d = (d[0] / n, d[1] / n, d[2] / n)
        return d

    def axis2(self, ref):
        e = self.get(ref, "AXIS2_PLACEMENT_3D")
        return self.point(self.arg(e, 1)), self.direction(self.arg(e, 2)), self.direction(self.arg(e, 3))

    def surface(self, ref):
        e = self.get(ref, "PLANE", "CYLINDRICAL_SURFACE")
        o, a, r = self.axis2(self.arg(e, 1))
        if e.keyword == "PLANE":
            return Plane(o, a, r)
        rad = self.real(e, 2)
        if rad <= 0:
            raise StepStructureError(f"#{e.id} has non-positive radius", e.id)
        return Cylinder(o, a, rad, r)

    def curve(self, ref):
        e = self.get(ref, "LINE", "CIRCLE")
        if e.keyword == "LINE":
            p = self.point(self.arg(e, 1))
            v = self.get(self.arg(e, 2), "VECTOR")
            return Line(p, self.direction(self.arg(v, 1)))
        o, a, r = self.axis2(self.arg(e, 1))
        rad = self.real(e, 2)
        if rad <= 0:
            raise StepStructureError(f"#{e.id} has non-positive radius", e.id)
        return CircleCurve(o, a, rad, r)

    def vertex(self, ref) -> int:
        e = self.get(ref, "VERTEX_POINT")
        if e.id not in self.vertex_index:
            self.vertex_index[e.id] = len(self.vertices)
            self.vertices.append(self.point(self.arg(e, 1)))
        return self.vertex_index[e.id]

    def edge(self, ref) -> int:
        e = self.get(ref, "EDGE_CURVE")
        if e.id not in self.edge_index:
            v0 = self.vertex(self.arg(e, 1))
            v1 = self.vertex(self.arg(e, 2))
            c = self.curve(self.arg(e, 3))
            if self.arg(e, 4) is not True:
                raise StepStructureError(f"#{e.id} must have same_sense .T.", e.id)
            self.edge_index[e.id] = len(self.edges)
            self.edges.append(Edge(c, v0, v1))
        return self.edge_index[e.id]

    def face(self, ref) -> Face:
        e = self.get(ref, "ADVANCED_FACE")
        bounds = self.arg(e, 1)
        if not isinstance(bounds, tuple) or not bounds:
            raise StepStructureError(f"#{e.id} has no bounds", e.id)
        outer, inner = [], []
        for b in bounds:
            be = self.get(b, "FACE_OUTER_BOUND", "FACE_BOUND")
            le = self.get(self.arg(be, 1), "EDGE_LOOP")
            oes = self.arg(le, 1)
            if not isinstance(oes, tuple) or not oes:
                raise StepStructureError(f"#{le.id} is an empty loop", le.id)
            loop = []
            for oref in oes:
                oe = self.get(oref, "ORIENTED_EDGE")
                fwd = self.arg(oe, 4)
                if not isinstance(fwd, bool):
                    raise StepStructureError(f"#{oe.id} orientation is not boolean", oe.id)
                loop.append((self.edge(self.arg(oe, 3)), fwd))
            flag = self.arg(be, 2)
            if not isinstance(flag, bool):
                raise StepStructureError(f"#{be.id} orientation is not boolean", be.id)
            if not flag:
                loop = [(eid, not fwd) for eid, fwd in reversed(loop)]
            (outer if be.keyword == "FACE_OUTER_BOUND" else inner).append(tuple(loop))
        if len(outer) != 1:
            raise StepStructureError(f"#{e.id} needs exactly one outer bound", e.id)
        sense = self.arg(e, 3)
        if not isinstance(sense, bool):
            raise StepStructureError(f"#{e.id} same_sense is not boolean", e.id)
        return Face(self.surface(self.arg(e, 2)), sense, tuple(outer + inner))


def _to_text(data: Union[str, bytes]) -> str:
    if isinstance(data, (bytes, bytearray, memoryview)):
        try:
            return bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise StepSyntaxError("input is not valid UTF-8 text", 1, exc.start + 1) from None
    if not isinstance(data, str):
        raise StepError(f"cannot parse object of type {type(data).__name__}")
    return data


def parse_step(data: Union[str, bytes], sidecar: Optional[Union[str, bytes]] = None) -> StepDocument:
    """Rebuild a solid (and optional labels) from STEP text.

    Every failure surfaces as a :class:`StepError` subclass.
    """
    try:
        ents = tokenize_entities(_to_text(data))
        _check_graph(ents)
        roots = [e for e in ents.values() if e.keyword == "MANIFOLD_SOLID_BREP"]
        if len(roots) != 1:
            raise StepStructureError(f"expected one MANIFOLD_SOLID_BREP, found {len(roots)}")
        res = _Resolver(ents)
        shell = res.get(res.arg(roots[0], 1), "CLOSED_SHELL")
        face_refs = res.arg(shell, 1)
        if not isinstance(face_refs, tuple) or not face_refs:
            raise StepStructureError(f"#{shell.id} has no faces", shell.id)
        faces = tuple(res.face(r) for r in face_refs)
        face_ids = tuple(r.id for r in face_refs)
        solid = Solid(tuple(res.vertices), tuple(res.edges), faces, None)
        validate_topology(solid)
        labels = parse_sidecar(sidecar, face_ids) if sidecar is not None else None
        return StepDocument(solid, face_ids, labels)
    except StepError:
        raise
    except AFRError as exc:
        raise StepStructureError(str(exc)) from None
    except (RecursionError, MemoryError, ValueError, TypeError, IndexError, KeyError, OverflowError) as exc:
        raise StepStructureError(f"malformed STEP data: {type(exc).__name__}") from None


def parse_sidecar(data: Union[str, bytes], face_entity_ids: Sequence[int]) -> tuple[Label, ...]:
    text = _to_text(data)
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != SIDECAR_HEADER:
        raise StepError("label sidecar header missing")
    table: dict[int, Label] = {}
    for n, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        try:
            fid, cls, inst = (int(p) for p in parts)
        except ValueError:
            raise StepError(f"bad sidecar row {n}: {ln!r}") from None
        if fid in table:
            raise StepError(f"face #{fid} labelled twice", fid)
        if not 0 <= cls < N_CLASSES or inst < 0:
            raise StepError(f"label out of range for face #{fid}", fid)
        table[fid] = (cls, inst)
    missing = [f for f in face_entity_ids if f not in table]
    if missing:
        raise StepError(f"face #{missing[0]} has no label", missing[0])
    extra = set(table) - set(face_entity_ids)
    if extra:
        raise StepError(f"label for unknown face #{min(extra)}", min(extra))
    return tuple(table[f] for f in face_entity_ids)


def read_step_file(path, labels_path=None) -> StepDocument:
    with open(path, "rb") as fh:
        data = fh.read()
    side = None
    if labels_path is not None:
        with open(labels_path, "rb") as fh:
            side = fh.read()
    return parse_step(data, side)


def canonical_signature(solid: Solid) -> tuple:
    """Order-independent summary used to compare topologies."""
    adj = sorted(tuple(sorted(p)) for p in solid.face_adjacency.values())
    return (len(solid.vertices), len(solid.edges), len(solid.faces), tuple(adj))


def max_vertex_deviation(a: Solid, b: Solid) -> float:
    va, vb = np.asarray(a.vertices), np.asarray(b.vertices)
    if va.shape != vb.shape:
        return math.inf
    return float(np.abs(va - vb).max()) if va.size else 0.0
