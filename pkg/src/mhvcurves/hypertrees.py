"""CT hypertrees, checkerboard sphere triangulations and maximally degenerate MHV curves.

A hypertree on marked points 1..n is a list of 3-subsets (one per black component).
Its on-shell graph joins black component b to white megacircle w whenever w is in the
b-th triple.  Given target points q, every black component carries the unique Mobius
map sending its three nodes to the three targets; the remaining (torus) moduli are the
cycle coordinates of the on-shell graph.
"""

from __future__ import annotations

import cmath
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .scalars import INF, DegenerateError, Mobius, ProjPoint, cross_ratio, mobius_from_triple

MAX_CT_TRIPLES = 24


class ValidationError(ValueError):
    """Malformed combinatorial input."""


class InternalInconsistency(RuntimeError):
    """A step that cannot fail on valid input failed anyway."""


class NotMassless(ValueError):
    """A momentum matrix has rank 2."""


# ---------------------------------------------------------------- hypertrees


@dataclass(frozen=True)
class Hypertree:
    n: int
    triples: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        clean = []
        for t in self.triples:
            t = tuple(sorted(int(x) for x in t))
            if len(t) != 3 or len(set(t)) != 3:
                raise ValidationError(f"triple {t} does not have three distinct members")
            if t[0] < 1 or t[-1] > self.n:
                raise ValidationError(f"triple {t} leaves the label range 1..{self.n}")
            clean.append(t)
        object.__setattr__(self, "triples", tuple(clean))

    @property
    def d(self) -> int:
        return len(self.triples)

    @property
    def genus(self) -> int:
        return self.d - 1

    @classmethod
    def from_json(cls, obj: Mapping) -> "Hypertree":
        try:
            n = int(obj["n"])
            triples = [tuple(t) for t in obj["triples"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"hypertree JSON needs 'n' and 'triples': {exc}") from exc
        return cls(n, tuple(triples))

    def to_json(self) -> dict:
        return {"n": self.n, "triples": [list(t) for t in self.triples]}


@dataclass(frozen=True)
class CTVerdict:
    is_ct: bool
    violating: tuple[int, ...] | None = None  # 1-based triple indices

    def to_json(self) -> dict:
        if self.is_ct:
            return {"verdict": "CT"}
        return {"verdict": "not-CT", "violating": list(self.violating)}


def _subset_tables(ht: Hypertree):
    d = ht.d
    if d > MAX_CT_TRIPLES:
        raise ValidationError(f"subset scan supports at most {MAX_CT_TRIPLES} triples, got {d}")
    masks = [sum(1 << (x - 1) for x in t) for t in ht.triples]
    union = np.zeros(1 << d, dtype=np.uint64)
    size = np.zeros(1 << d, dtype=np.int64)
    for k, m in enumerate(masks):
        lo = 1 << k
        union[lo : 2 * lo] = union[:lo] | np.uint64(m)
        size[lo : 2 * lo] = size[:lo] + 1
    covered = _popcount(union)
    return size, covered


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    out = np.zeros(x.shape, dtype=np.int64)
    while True:
        nz = x != 0
        if not nz.any():
            return out
        out += nz
        x &= x - np.uint64(1)


def _mask_members(mask: int) -> tuple[int, ...]:
    return tuple(k + 1 for k in range(mask.bit_length()) if mask >> k & 1)


def check_ct(ht: Hypertree) -> CTVerdict:
    """Every nonempty set S of triples must cover at least |S| + 2 points."""
    size, covered = _subset_tables(ht)
    bad = np.nonzero((size > 0) & (covered < size + 2))[0]
    if bad.size == 0:
        return CTVerdict(True)
    best = bad[np.lexsort((bad, size[bad]))[0]]
    return CTVerdict(False, _mask_members(int(best)))


def is_irreducible(ht: Hypertree) -> bool:
    """A CT hypertree is irreducible when the covering bound is strict for 1 < |S| < d."""
    verdict = check_ct(ht)
    if not verdict.is_ct:
        raise ValidationError(f"hypertree is not CT (violating set {verdict.violating})")
    size, covered = _subset_tables(ht)
    middle = (size > 1) & (size < ht.d)
    return not bool(np.any(middle & (covered == size + 2)))


# ---------------------------------------------------------------- triangulations


@dataclass(frozen=True)
class Triangulation:
    n: int
    faces: tuple[tuple[int, int, int], ...]
    colors: tuple[str, ...]

    def __post_init__(self):
        if len(self.faces) != len(self.colors):
            raise ValidationError("faces and colors differ in length")
        for c in self.colors:
            if c not in ("black", "white"):
                raise ValidationError(f"face color must be black or white, got {c!r}")
        object.__setattr__(self, "faces", tuple(tuple(int(v) for v in f) for f in self.faces))

    @classmethod
    def from_json(cls, obj: Mapping) -> "Triangulation":
        try:
            n = int(obj["n"])
            faces = [tuple(f["v"]) for f in obj["faces"]]
            colors = [f["color"] for f in obj["faces"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"triangulation JSON needs 'n' and 'faces' with 'v'/'color': {exc}") from exc
        return cls(n, tuple(faces), tuple(colors))

    def to_json(self) -> dict:
        return {"n": self.n, "faces": [{"v": list(f), "color": c} for f, c in zip(self.faces, self.colors)]}

    def swapped(self) -> "Triangulation":
        flip = {"black": "white", "white": "black"}
        return Triangulation(self.n, self.faces, tuple(flip[c] for c in self.colors))

    def edge_faces(self) -> dict[tuple[int, int], list[int]]:
        out: dict[tuple[int, int], list[int]] = {}
        for k, f in enumerate(self.faces):
            for a, b in itertools.combinations(sorted(f), 2):
                out.setdefault((a, b), []).append(k)
        return out


def validate_triangulation(tri: Triangulation) -> None:
    """Checkerboard 2-sphere checks: labels, edge incidence, Euler characteristic, colors."""
    for k, f in enumerate(tri.faces):
        if len(f) != 3 or len(set(f)) != 3:
            raise ValidationError(f"face {k + 1} is not a triangle on three distinct vertices")
        if min(f) < 1 or max(f) > tri.n:
            raise ValidationError(f"face {k + 1} uses a vertex outside 1..{tri.n}")
    used = {v for f in tri.faces for v in f}
    if used != set(range(1, tri.n + 1)):
        raise ValidationError("some vertex lies on no face")
    ef = tri.edge_faces()
    for e, fs in ef.items():
        if len(fs) != 2:
            raise ValidationError(f"edge {e} lies on {len(fs)} faces instead of 2")
        if tri.colors[fs[0]] == tri.colors[fs[1]]:
            raise ValidationError(f"faces {fs[0] + 1} and {fs[1] + 1} share edge {e} and have the same color")
    chi = tri.n - len(ef) + len(tri.faces)
    if chi != 2:
        raise ValidationError(f"Euler characteristic is {chi}, not 2")
    for v in range(1, tri.n + 1):
        if not _link_is_cycle(tri, v):
            raise ValidationError(f"the link of vertex {v} is not a single cycle")


def _link_is_cycle(tri: Triangulation, v: int) -> bool:
    adj: dict[int, list[int]] = {}
    for f in tri.faces:
        if v in f:
            a, b = [x for x in f if x != v]
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
    if not adj:
        return False
    # a multigraph cycle: every vertex of degree 2 and connected
    if any(len(nb) != 2 for nb in adj.values()):
        return False
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == len(adj)


def from_triangulation(tri: Triangulation) -> tuple[Hypertree, Hypertree]:
    """Black and white faces of a checkerboard sphere as two hypertrees on the same vertices."""
    validate_triangulation(tri)
    black = Hypertree(tri.n, tuple(f for f, c in zip(tri.faces, tri.colors) if c == "black"))
    white = Hypertree(tri.n, tuple(f for f, c in zip(tri.faces, tri.colors) if c == "white"))
    for name, ht in (("black", black), ("white", white)):
        verdict = check_ct(ht)
        if not verdict.is_ct:
            raise InternalInconsistency(f"{name} faces fail the CT bound on {verdict.violating}")
    return black, white


def vertex_three_coloring(tri: Triangulation) -> dict[int, int]:
    """Colors 0, 1, 2 with every face rainbow; propagated across shared edges."""
    colors: dict[int, int] = {}
    ef = tri.edge_faces()
    neighbors: dict[int, list[int]] = {k: [] for k in range(len(tri.faces))}
    for fs in ef.values():
        if len(fs) == 2:
            neighbors[fs[0]].append(fs[1])
            neighbors[fs[1]].append(fs[0])
    for v, c in zip(sorted(tri.faces[0]), (0, 1, 2)):
        colors[v] = c
    queue = deque([0])
    done = {0}
    while queue:
        k = queue.popleft()
        f = tri.faces[k]
        known = [v for v in f if v in colors]
        if len(known) == 2:
            (missing,) = [v for v in f if v not in colors]
            colors[missing] = 3 - colors[known[0]] - colors[known[1]]
        if sorted(colors[v] for v in f) != [0, 1, 2]:
            raise ValidationError(f"face {k + 1} {f} cannot be 3-colored consistently")
        for j in neighbors[k]:
            if j not in done:
                done.add(j)
                queue.append(j)
    return colors


@dataclass(frozen=True)
class TrinityMatching:
    matching: dict[int, int]  # vertex -> face index (0-based into tri.faces)
    outer: int

    def to_json(self) -> dict:
        return {"outer_face": self.outer + 1, "matching": {str(v): k + 1 for v, k in sorted(self.matching.items())}}


def trinity_match(tri: Triangulation, outer: int | None = None) -> TrinityMatching:
    """Match interior vertices to interior white faces via a red arborescence and its dual tree.

    ``outer`` is a 0-based face index of a white face (default: the first white face).
    """
    validate_triangulation(tri)
    if outer is None:
        outer = tri.colors.index("white")
    if tri.colors[outer] != "white":
        raise ValidationError(f"outer face {outer + 1} is not white")
    palette = vertex_three_coloring(tri)
    outer_face = tri.faces[outer]
    root = min(outer_face)
    red = palette[root]
    ef = tri.edge_faces()

    # one arrow per white face W: from the red vertex of the black face across W's
    # green-blue edge to the red vertex of W
    arrows: list[tuple[int, int, int]] = []  # (source, target, white face)
    gb_edge: dict[int, tuple[int, int]] = {}
    for k, (f, c) in enumerate(zip(tri.faces, tri.colors)):
        if c != "white":
            continue
        (v,) = [x for x in f if palette[x] == red]
        e = tuple(sorted(x for x in f if palette[x] != red))
        gb_edge[k] = e
        (across,) = [j for j in ef[e] if j != k]
        (u,) = [x for x in tri.faces[across] if palette[x] == red]
        arrows.append((u, v, k))
    arrows.sort(key=lambda a: (a[0], a[1], a[2]))
    out_arrows: dict[int, list[tuple[int, int]]] = {}
    for u, v, k in arrows:
        out_arrows.setdefault(u, []).append((v, k))

    red_vertices = sorted(x for x, c in palette.items() if c == red)
    parent_face: dict[int, int] = {}
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v, k in out_arrows.get(u, []):
            if v not in seen:
                seen.add(v)
                parent_face[v] = k
                queue.append(v)
    if len(seen) != len(red_vertices):
        raise InternalInconsistency("red arborescence does not reach every red vertex")

    matching = dict(parent_face)
    crossed = set(parent_face.values())

    # uncrossed green-blue edges form a spanning tree on the green and blue vertices
    tree_adj: dict[int, list[tuple[int, int]]] = {}
    for k, (a, b) in gb_edge.items():
        if k in crossed or k == outer:
            continue
        tree_adj.setdefault(a, []).append((b, k))
        tree_adj.setdefault(b, []).append((a, k))
    roots = sorted(x for x in outer_face if x != root)
    gb_vertices = {x for x, c in palette.items() if c != red}
    reached = set(roots)
    for r in roots:
        queue = deque([r])
        while queue:
            x = queue.popleft()
            for y, k in sorted(tree_adj.get(x, [])):
                if y in reached:
                    continue
                reached.add(y)
                matching[y] = k
                queue.append(y)
    if reached != gb_vertices:
        raise InternalInconsistency("uncrossed green-blue edges do not span the green and blue vertices")

    _check_matching(tri, outer, matching)
    return TrinityMatching(matching, outer)


def _check_matching(tri: Triangulation, outer: int, matching: Mapping[int, int]) -> None:
    interior_v = set(range(1, tri.n + 1)) - set(tri.faces[outer])
    interior_w = {k for k, c in enumerate(tri.colors) if c == "white" and k != outer}
    if set(matching) != interior_v:
        raise InternalInconsistency("matching does not cover the interior vertices exactly")
    if set(matching.values()) != interior_w or len(set(matching.values())) != len(matching):
        raise InternalInconsistency("matching is not a bijection onto interior white faces")
    for v, k in matching.items():
        if v not in tri.faces[k]:
            raise InternalInconsistency(f"vertex {v} matched to non-incident face {k + 1}")


# ---------------------------------------------------------------- on-shell graphs


@dataclass(frozen=True)
class OnShellGraph:
    d: int
    n: int
    edges: tuple[tuple[int, int], ...]  # (black b, white w), 1-based

    @property
    def genus(self) -> int:
        return len(self.edges) - (self.d + self.n) + 1

    def whites_of(self, b: int) -> tuple[int, ...]:
        return tuple(sorted(w for bb, w in self.edges if bb == b))

    def to_json(self) -> dict:
        return {"black": self.d, "white": self.n, "edges": [list(e) for e in self.edges], "genus": self.genus}


def onshell_from_hypertree(ht: Hypertree) -> OnShellGraph:
    verdict = check_ct(ht)
    if not verdict.is_ct:
        raise ValidationError(f"hypertree is not CT (violating set {verdict.violating})")
    edges = tuple((b + 1, w) for b, t in enumerate(ht.triples) for w in t)
    return OnShellGraph(ht.d, ht.n, edges)


def cycle_basis(graph: OnShellGraph) -> list[list[tuple[str, int]]]:
    """Fundamental cycles of a BFS spanning tree, as closed vertex walks ('b'|'w', index).

    Each cycle starts at a black vertex and alternates black, white, black, ...
    """
    adj: dict[tuple[str, int], list[tuple[str, int]]] = {}
    for b, w in graph.edges:
        adj.setdefault(("b", b), []).append(("w", w))
        adj.setdefault(("w", w), []).append(("b", b))
    for nb in adj.values():
        nb.sort()
    start = ("w", 1) if ("w", 1) in adj else min(adj)
    parent = {start: None}
    depth = {start: 0}
    order = deque([start])
    tree = set()
    while order:
        x = order.popleft()
        for y in adj[x]:
            if y not in parent:
                parent[y] = x
                depth[y] = depth[x] + 1
                tree.add(frozenset((x, y)))
                order.append(y)
    cycles = []
    for b, w in graph.edges:
        x, y = ("b", b), ("w", w)
        if frozenset((x, y)) in tree:
            continue
        # path x -> lca <- y, closed by the edge y - x
        px, py = [x], [y]
        while px[-1] != py[-1]:
            if depth[px[-1]] >= depth[py[-1]]:
                px.append(parent[px[-1]])
            else:
                py.append(parent[py[-1]])
        walk = px + py[-2::-1]  # x ... lca ... y
        cycles.append(walk)
    return cycles


@dataclass(frozen=True)
class TorusCoordinates:
    cycles: tuple[tuple[tuple[str, int], ...], ...]
    values: tuple[complex, ...]

    def to_json(self) -> dict:
        return {
            "cycles": [[f"{k}{i}" for k, i in c] for c in self.cycles],
            "z": [_scalar_json(v) for v in self.values],
        }


def _scalar_json(v):
    v = complex(v)
    if abs(v.imag) <= 1e-15 * max(1.0, abs(v.real)):
        return v.real
    return [v.real, v.imag]


def _pdiff(p: ProjPoint, q: ProjPoint):
    return p.a * q.b - p.b * q.a


def torus_coordinates(ht: Hypertree, q: Sequence) -> TorusCoordinates:
    """Cycle coordinates: for each black vertex on a cycle entered at white q_in and left at
    q_out, with remaining white q_3, multiply (q_3 - q_out)/(q_3 - q_in).

    The product telescopes under any Mobius map applied to all q, so it is PGL2-invariant.
    """
    graph = onshell_from_hypertree(ht)
    qs = [ProjPoint.of(x) for x in q]
    if len(qs) != ht.n:
        raise ValidationError(f"expected {ht.n} points, got {len(qs)}")
    qs = [ProjPoint(*p.normalized()) for p in qs]
    values = []
    cycles = cycle_basis(graph)
    for walk in cycles:
        num, den = 1, 1
        for k, (kind, idx) in enumerate(walk):
            if kind != "b":
                continue
            w_in = walk[k - 1][1]
            w_out = walk[(k + 1) % len(walk)][1]
            (w3,) = [w for w in graph.whites_of(idx) if w not in (w_in, w_out)]
            num *= _pdiff(qs[w3 - 1], qs[w_out - 1])
            den *= _pdiff(qs[w3 - 1], qs[w_in - 1])
        if den == 0:
            raise DegenerateError("coincident targets on a black component")
        values.append(complex(num / den))
    return TorusCoordinates(tuple(tuple(c) for c in cycles), tuple(values))


def inverse_scattering(ht: Hypertree, q: Sequence) -> tuple[list[Mobius], TorusCoordinates]:
    """Recover the curve data over targets q: one Mobius map per black component and the
    torus coordinates.  Each black map sends (0, 1, inf) to the targets of its triple in
    increasing label order; each white megacircle maps to its own target."""
    qs = [ProjPoint.of(x) for x in q]
    if len(qs) != ht.n:
        raise ValidationError(f"expected {ht.n} points, got {len(qs)}")
    maps = []
    for t in ht.triples:
        try:
            maps.append(mobius_from_triple([ProjPoint(0), ProjPoint(1), INF], [qs[i - 1] for i in t]))
        except DegenerateError as exc:
            raise DegenerateError(f"black component {t} needs three distinct targets") from exc
    return maps, torus_coordinates(ht, qs)


def _chart_inverse(anchors: Sequence[ProjPoint]) -> Mobius:
    """Inverse of x -> [x : A ; B : C]; that map sends A, B, C to inf, 1, 0."""
    return mobius_from_triple([INF, ProjPoint(1), ProjPoint(0)], list(anchors))


def amplitude_pullback(ht: Hypertree, q: Sequence, chart: Sequence[Sequence[int]], step: float = 1e-6) -> float:
    """|det(d log z / d lambda)| for the chart lambda_k = [q_i : q_a ; q_b : q_c].

    All chart quadruples must share the anchors (a, b, c); the free points q_i move while
    the anchors stay fixed.  Returns inf on a singular Jacobian.
    """
    g = ht.genus
    if len(chart) != g:
        raise ValidationError(f"chart needs {g} quadruples, got {len(chart)}")
    anchors = {tuple(c[1:]) for c in chart}
    if len(anchors) != 1:
        raise ValidationError("chart quadruples must share their three anchors")
    (anchor,) = anchors
    free = [c[0] for c in chart]
    if len(set(free) | set(anchor)) != g + 3:
        raise ValidationError("chart indices must be distinct")
    qs = [ProjPoint.of(x) for x in q]
    anc = [qs[i - 1] for i in anchor]
    inv = _chart_inverse(anc)
    lam = [complex(cross_ratio(qs[i - 1], *anc).value()) for i in free]
    if any(not np.isfinite(abs(x)) for x in lam):
        raise DegenerateError("chart value at infinity; use another chart")

    def logz(lv):
        moved = list(qs)
        for i, x in zip(free, lv):
            moved[i - 1] = inv(ProjPoint(x))
        return np.array(torus_coordinates(ht, moved).values, dtype=complex)

    z0 = logz(lam)
    jac = np.zeros((g, g), dtype=complex)
    for k in range(g):
        h = step * max(1.0, abs(lam[k]))
        up = list(lam)
        dn = list(lam)
        up[k] += h
        dn[k] -= h
        jac[:, k] = (logz(up) - logz(dn)) / (2 * h) / z0
    det = abs(np.linalg.det(jac))
    if not np.isfinite(det):
        return float("inf")
    return float(det)


# ---------------------------------------------------------------- spinors


@dataclass(frozen=True)
class SpinorData:
    lam: dict
    lamt: dict
    coloring: tuple[str, ...]


def factor_rank_one(p, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """p = lam lamt^T for a rank <= 1 2x2 matrix, balanced at the largest entry."""
    p = np.asarray(p, dtype=complex)
    norm = np.abs(p).max()
    if abs(np.linalg.det(p)) > tol * max(norm, 1e-300) ** 2:
        raise NotMassless(f"momentum has det {np.linalg.det(p)} != 0: not massless")
    if norm == 0:
        return np.zeros(2, complex), np.zeros(2, complex)
    i, j = np.unravel_index(np.argmax(np.abs(p)), p.shape)
    root = cmath.sqrt(p[i, j])
    return p[:, j] / root, p[i, :] / root


def spinor_factorize(
    momenta: Mapping,
    vertices: Sequence[Sequence[tuple]] | None = None,
    tol: float = 1e-9,
) -> SpinorData:
    """Factor every momentum as lam lamt^T and color each trivalent vertex.

    ``vertices`` lists, per vertex, pairs (edge key, sign) with sum(sign * p) = 0.  A vertex is
    white when its three lam spinors are proportional and black when its lamt spinors are.
    """
    lam, lamt = {}, {}
    for key, p in momenta.items():
        try:
            lam[key], lamt[key] = factor_rank_one(p, tol)
        except NotMassless as exc:
            raise NotMassless(f"edge {key!r}: {exc}") from exc
    coloring = []
    for k, vert in enumerate(vertices or ()):
        total = sum(s * np.asarray(momenta[e], dtype=complex) for e, s in vert)
        scale = max(np.abs(np.asarray(momenta[e], dtype=complex)).max() for e, _ in vert)
        if np.abs(total).max() > tol * max(scale, 1.0):
            raise ValidationError(f"vertex {k + 1}: momentum conservation fails by {np.abs(total).max():.3g}")
        keys = [e for e, _ in vert]
        for a, b in itertools.combinations(keys, 2):
            pa, pb = np.asarray(momenta[a], complex), np.asarray(momenta[b], complex)
            if np.abs(pa.ravel()[:, None] * pb.ravel()[None, :] - pb.ravel()[:, None] * pa.ravel()[None, :]).max() <= tol * scale**2:
                raise ValidationError(f"vertex {k + 1}: momenta {a!r} and {b!r} are proportional")
        if _all_parallel([lam[e] for e in keys], tol):
            coloring.append("white")
        elif _all_parallel([lamt[e] for e in keys], tol):
            coloring.append("black")
        else:
            raise InternalInconsistency(f"vertex {k + 1}: neither spinor family is proportional")
    return SpinorData(lam, lamt, tuple(coloring))


def _all_parallel(vectors, tol) -> bool:
    for a, b in itertools.combinations(vectors, 2):
        scale = max(np.abs(a).max(), np.abs(b).max(), 1e-300) ** 2
        if abs(a[0] * b[1] - a[1] * b[0]) > 1e3 * tol * scale:
            return False
    return True
