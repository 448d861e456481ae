import numpy as np
import pytest

from hybrid_afr import geom2d as g2
from hybrid_afr.brep import other_axes
from hybrid_afr.featuregen import generate_model


def inside_recipe(recipe, p, tol=0.0):
    """Membership straight from the construction recipe (independent of faces/edges)."""
    p = np.asarray(p, dtype=float)
    in_box = all(0.0 < p[k] < recipe.dims[k] for k in range(3))
    carved = False
    added = False
    for pr in recipe.prisms:
        i, j = other_axes(pr.axis)
        if not pr.lo < p[pr.axis] < pr.hi:
            continue
        if g2.point_in_region((float(p[i]), float(p[j])), [list(lp) for lp in pr.profile]):
            if pr.additive:
                added = True
            else:
                carved = True
    return added or (in_box and not carved)


@pytest.fixture(scope="session")
def sample_models():
    return [generate_model(s) for s in range(40)]


def _on_curve(solid, eid, x, tol=1e-7):
    from hybrid_afr.brep import Line

    e = solid.edges[eid]
    c = e.curve
    if isinstance(c, Line):
        a = np.asarray(solid.vertices[e.start])
        b = np.asarray(solid.vertices[e.end])
        ab = b - a
        s = np.dot(x - a, ab) / np.dot(ab, ab)
        return -tol < s < 1 + tol and np.linalg.norm(a + s * ab - x) < tol
    d = x - np.asarray(c.center)
    ax = np.asarray(c.axis)
    return abs(np.dot(d, ax)) < tol and abs(np.linalg.norm(d) - c.radius) < tol


def _chords(solid, mesh, fi, eid):
    """(chord midpoint, centroid of the triangle on it) for tessellated pieces of the edge."""
    V = np.asarray(mesh.vertices)
    on = {}
    out = []
    for ti in np.flatnonzero(mesh.face_ids == fi):
        ids = mesh.triangles[ti]
        for v in ids:
            if v not in on:
                on[v] = _on_curve(solid, eid, V[v])
        for k in range(3):
            a, b = ids[k], ids[(k + 1) % 3]
            if on[a] and on[b]:
                out.append((0.5 * (V[a] + V[b]), V[ids].mean(axis=0)))
    return out


def _snap(solid, eid, m):
    from hybrid_afr.brep import CircleCurve

    c = solid.edges[eid].curve
    if not isinstance(c, CircleCurve):
        return m
    ctr, ax = np.asarray(c.center), np.asarray(c.axis)
    d = m - ctr
    d -= np.dot(d, ax) * ax
    return ctr + c.radius * d / np.linalg.norm(d)


def _into_face(solid, mesh, fi, eid, p, t):
    """Unit direction in face ``fi`` at ``p``, normal to the edge, pointing onto the face."""
    from hybrid_afr.brep import face_normal_at

    n = face_normal_at(solid.faces[fi], p)
    w = np.cross(n, t)
    w /= np.linalg.norm(w)
    m, cen = min(_chords(solid, mesh, fi, eid), key=lambda mc: np.linalg.norm(mc[0] - p))
    return w if np.dot(cen - m, w) > 0 else -w


def _tangent_pair(solid, fa, fb):
    from hybrid_afr.brep import Cylinder, Plane

    sa, sb = solid.faces[fa].surface, solid.faces[fb].surface
    if isinstance(sa, Plane) and isinstance(sb, Cylinder):
        sa, sb = sb, sa
    if not (isinstance(sa, Cylinder) and isinstance(sb, Plane)):
        return False
    ax = np.asarray(sa.axis)
    n = np.asarray(sb.normal)
    if abs(np.dot(ax, n)) > 1e-9:
        return False
    dist = abs(np.dot(np.asarray(sa.origin) - np.asarray(sb.origin), n))
    return abs(dist - sa.radius) < 1e-9


def convexity_oracle(solid, mesh, recipe, eid, eps=1e-5):
    """Classify an edge by probing the material between its two faces."""
    from hybrid_afr.brep import edge_tangent

    fa, fb = solid.face_adjacency[eid]
    if _tangent_pair(solid, fa, fb):
        return "smooth"
    m, _ = _chords(solid, mesh, fa, eid)[0]
    p = _snap(solid, eid, m)
    t = edge_tangent(solid, eid, p)
    w = _into_face(solid, mesh, fa, eid, p, t) + _into_face(solid, mesh, fb, eid, p, t)
    w /= np.linalg.norm(w)
    return "convex" if inside_recipe(recipe, p + eps * w) else "concave"


def _curve_key(c):
    from hybrid_afr.brep import Line

    if isinstance(c, Line):
        return ("line",)
    return ("circle", c.radius, tuple(np.round(c.center, 6)))


def assert_isomorphic(a, b, tol=1e-9):
    """Faces correspond by position; each must carry the same surface and the same bounding geometry."""
    from hybrid_afr.brep import Plane

    assert (len(a.vertices), len(a.edges), len(a.faces)) == (len(b.vertices), len(b.edges), len(b.faces))
    for fa, fb in zip(a.faces, b.faces):
        sa, sb = fa.surface, fb.surface
        assert type(sa) is type(sb)
        if isinstance(sa, Plane):
            na = np.asarray(sa.normal) * (1 if fa.same_sense else -1)
            nb = np.asarray(sb.normal) * (1 if fb.same_sense else -1)
            assert np.abs(na - nb).max() < tol
            assert abs(np.dot(np.asarray(sa.origin) - np.asarray(sb.origin), na)) < tol
        else:
            assert abs(sa.radius - sb.radius) < tol
            assert abs(abs(np.dot(sa.axis, sb.axis)) - 1) < tol
            assert fa.same_sense == fb.same_sense
        assert len(fa.loops) == len(fb.loops)

    def ends(s, fi):
        out = []
        for loop in s.faces[fi].loops:
            for eid, fwd in loop:
                e = s.edges[eid]
                p, q = s.vertices[e.start], s.vertices[e.end]
                out.append((p, q) if fwd else (q, p))
        return out

    for fi in range(len(a.faces)):
        ea, eb = sorted(ends(a, fi)), sorted(ends(b, fi))
        assert len(ea) == len(eb)
        assert np.abs(np.asarray(ea) - np.asarray(eb)).max() < tol
    adj = lambda s: sorted(tuple(sorted(p)) for p in s.face_adjacency.values())  # noqa: E731
    assert adj(a) == adj(b)


_KEYWORDS = ["WIDGET", "CARTESIAN_POINT", "EDGE_LOOP", "CIRCLE", "B_SPLINE_CURVE", "ADVANCED_FACE"]
_JUNK = ["(", ")", "'", "#", "=", ";", ",", ".T.", ".X.", "$", "*", "1e999", "-0.", "#0", "#99999", "\x00", "é"]


def fuzz_cases(bases, n, seed=0):
    """Seeded malformed variants of valid STEP texts (bytes)."""
    import random
    import re

    rng = random.Random(seed)
    for k in range(n):
        text = rng.choice(bases)
        kind = k % 12
        b = text.encode()
        if kind == 0:
            b = b[: rng.randrange(len(b))]
        elif kind == 1:
            arr = bytearray(b)
            for _ in range(rng.randint(1, 8)):
                arr[rng.randrange(len(arr))] = rng.randrange(256)
            b = bytes(arr)
        elif kind == 2:
            i = rng.randrange(len(b))
            b = b[:i] + b[i + rng.randint(1, 200):]
        elif kind == 3:
            i = rng.randrange(len(b))
            b = b[:i] + rng.choice(_JUNK).encode() + b[i:]
        elif kind == 4:
            ids = re.findall(r"#(\d+)", text)
            old = rng.choice(ids)
            new = str(rng.choice([0, int(old) + 1, 99999, rng.randint(1, 400)]))
            b = re.sub(rf"#{old}\b", f"#{new}", text, count=rng.randint(1, 2)).encode()
        elif kind == 5:
            m = list(re.finditer(r"^#(\d+)=([A-Z_0-9]+)", text, re.M))
            hit = rng.choice(m)
            b = (text[: hit.start(2)] + rng.choice(_KEYWORDS) + text[hit.end(2):]).encode()
        elif kind == 6:
            lines = text.split("\n")
            i = rng.randrange(len(lines))
            del lines[i]
            b = "\n".join(lines).encode()
        elif kind == 7:
            b = bytes(rng.randrange(256) for _ in range(rng.randint(0, 300)))
        elif kind == 8:
            depth = rng.choice([10, 1000, 100000])
            b = text.replace("(0.,0.,1.)", "(" * depth + "0." + ")" * depth, 1).encode()
        elif kind == 9:
            m = list(re.finditer(r"^#(\d+)=[A-Z_]+\('',#(\d+)", text, re.M))
            hit = rng.choice(m)
            # point an entity at itself
            b = (text[: hit.start(2)] + hit.group(1) + text[hit.end(2):]).encode()
        elif kind == 10:
            nums = list(re.finditer(r"-?\d+\.\d*(?:E[-+]?\d+)?", text))
            hit = rng.choice(nums)
            b = (text[: hit.start()] + rng.choice(["nan", "1e400", "", "0.", "--1."]) + text[hit.end():]).encode()
        else:
            lines = text.split("\n")
            i, j = rng.randrange(len(lines)), rng.randrange(len(lines))
            lines[i], lines[j] = lines[j], lines[i]
            b = "\n".join(lines).encode()
        yield b


def brute_scores(pairs, n):
    """Tally one-vs-rest counts straight from raw (truth, prediction) pairs."""
    out = {}
    for c in range(n):
        tp = fp = fn = tn = 0
        for t, p in pairs:
            if t == c and p == c:
                tp += 1
            elif p == c:
                fp += 1
            elif t == c:
                fn += 1
            else:
                tn += 1
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out[c] = dict(tp=tp, fp=fp, fn=fn, tn=tn, precision=prec, recall=rec, f1=f1,
                      accuracy=(tp + tn) / len(pairs))
    present = [c for c in range(n) if out[c]["tp"] + out[c]["fn"]]
    macro = {k: sum(out[c][k] for c in present) / len(present) for k in ("precision", "recall", "f1", "accuracy")}
    correct = sum(1 for t, p in pairs if t == p)
    return out, macro, correct / len(pairs)


def pairs_from_counts(counts):
    return [(t, p) for t in range(len(counts)) for p in range(len(counts)) for _ in range(int(counts[t][p]))]


ACCEPTANCE: list[str] = []


def verdict(number, title, ok, detail=""):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
