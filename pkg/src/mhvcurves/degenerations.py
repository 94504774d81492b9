"""Dual graphs of nodal curves with line-bundle multidegrees.

Covers stability of multidegrees against the Oda-Seshadri polarization, the structural
obstructions to the MHV property, node cuts (channel factorizations), and the two
closed-form genus-1 scattering maps.
"""

from __future__ import annotations

import cmath
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .hypertrees import Hypertree, ValidationError, check_ct
from .scalars import ProjPoint, cross_ratio

MAX_STABILITY_VERTICES = 20
MAX_ENUMERATION_VERTICES = 12


@dataclass(frozen=True)
class Vertex:
    genus: int
    legs: frozenset[int]


@dataclass(frozen=True)
class DualGraph:
    vertices: tuple[Vertex, ...]
    edges: tuple[tuple[int, int], ...]  # 0-based endpoints, loops allowed

    def __post_init__(self):
        V = len(self.vertices)
        for u, v in self.edges:
            if not (0 <= u < V and 0 <= v < V):
                raise ValidationError(f"edge ({u + 1},{v + 1}) uses a missing vertex")
        seen: set[int] = set()
        for vert in self.vertices:
            if vert.genus < 0:
                raise ValidationError("vertex genus must be nonnegative")
            if seen & vert.legs:
                raise ValidationError(f"legs {sorted(seen & vert.legs)} appear on two vertices")
            seen |= vert.legs

    @classmethod
    def from_json(cls, obj: Mapping) -> "DualGraph":
        try:
            verts = tuple(Vertex(int(v.get("genus", 0)), frozenset(int(x) for x in v.get("legs", []))) for v in obj["vertices"])
            edges = tuple((int(u) - 1, int(v) - 1) for u, v in obj.get("edges", []))
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ValidationError(f"dual graph JSON needs 'vertices' and 'edges': {exc}") from exc
        return cls(verts, edges)

    def to_json(self) -> dict:
        return {
            "vertices": [{"genus": v.genus, "legs": sorted(v.legs)} for v in self.vertices],
            "edges": [[u + 1, v + 1] for u, v in self.edges],
        }

    @property
    def n(self) -> int:
        return sum(len(v.legs) for v in self.vertices)

    def edge_ends(self, i: int) -> int:
        """Edge ends at vertex i, loops counted twice."""
        return sum((u == i) + (v == i) for u, v in self.edges)

    def neighbors(self, i: int) -> set[int]:
        out = set()
        for u, v in self.edges:
            if u == i and v != i:
                out.add(v)
            elif v == i and u != i:
                out.add(u)
        return out


def _connected(graph: DualGraph, subset, removed: frozenset[int] = frozenset()) -> bool:
    subset = set(subset)
    if not subset:
        return False
    start = next(iter(subset))
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for k, (u, v) in enumerate(graph.edges):
            if k in removed:
                continue
            for a, b in ((u, v), (v, u)):
                if a == x and b in subset and b not in seen:
                    seen.add(b)
                    stack.append(b)
    return seen == subset


def _component_of(graph: DualGraph, start: int, removed: frozenset[int]) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for k, (u, v) in enumerate(graph.edges):
            if k in removed:
                continue
            for a, b in ((u, v), (v, u)):
                if a == x and b not in seen:
                    seen.add(b)
                    stack.append(b)
    return seen


def graph_genus(graph: DualGraph) -> int:
    """Arithmetic genus: sum of vertex genera + E - V + 1."""
    if not _connected(graph, range(len(graph.vertices))):
        raise ValidationError("dual graph is disconnected")
    return sum(v.genus for v in graph.vertices) + len(graph.edges) - len(graph.vertices) + 1


def subcurve_genus(graph: DualGraph, subset) -> int:
    subset = set(subset)
    inner = sum(1 for u, v in graph.edges if u in subset and v in subset)
    return sum(graph.vertices[i].genus for i in subset) + inner - len(subset) + 1


def connected_subsets(graph: DualGraph, proper: bool = True):
    """All connected vertex subsets, each produced once (extension by larger neighbors)."""
    V = len(graph.vertices)
    nbrs = [graph.neighbors(i) for i in range(V)]
    out = []

    def extend(subset: frozenset[int], frontier: frozenset[int], root: int, excluded: frozenset[int]):
        out.append(subset)
        frontier = set(frontier)
        excluded = set(excluded)
        while frontier:
            w = min(frontier)
            frontier.discard(w)
            new_front = (frontier | {x for x in nbrs[w] if x > root}) - subset - excluded - {w}
            extend(subset | {w}, frozenset(new_front), root, frozenset(excluded))
            excluded.add(w)

    for r in range(V):
        extend(frozenset({r}), frozenset(x for x in nbrs[r] if x > r), r, frozenset())
    if proper:
        out = [s for s in out if len(s) < V]
    return out


def theta_vector(graph: DualGraph, degrees: Sequence[int]) -> tuple[Fraction, ...]:
    """theta_i = -d_i + 4 l_i / (d n) + n (e_i - 2) / (2 d) for all-rational graphs."""
    if any(v.genus for v in graph.vertices):
        raise ValidationError("theta vectors are defined here for all-rational graphs only")
    _check_degrees(graph, degrees)
    d, n = sum(degrees), graph.n
    if d <= 0 or n <= 0:
        raise ValidationError("theta vector needs positive total degree and at least one leg")
    return tuple(
        Fraction(-di) + Fraction(4 * len(v.legs), d * n) + Fraction(n * (graph.edge_ends(i) - 2), 2 * d)
        for i, (v, di) in enumerate(zip(graph.vertices, degrees))
    )


def _check_degrees(graph: DualGraph, degrees: Sequence[int]) -> None:
    if len(degrees) != len(graph.vertices):
        raise ValidationError(f"multidegree has {len(degrees)} entries for {len(graph.vertices)} vertices")


@dataclass(frozen=True)
class StabilityReport:
    verdict: str  # "stable" | "strictly-semistable" | "unstable"
    witness: tuple[int, ...] | None = None  # 1-based vertices
    lhs: Fraction | None = None
    rhs: Fraction | None = None

    def to_json(self) -> dict:
        out = {"verdict": self.verdict}
        if self.witness is not None:
            out["witness"] = list(self.witness)
            out["degree"] = str(self.lhs)
            out["bound"] = str(self.rhs)
        return out


def stability_bound(graph: DualGraph, subset) -> Fraction:
    """g_Y - 1 + 2 n_Y / n for a subcurve Y."""
    n = graph.n
    legs = sum(len(graph.vertices[i].legs) for i in subset)
    return Fraction(subcurve_genus(graph, subset) - 1) + Fraction(2 * legs, n)


def check_stability(graph: DualGraph, degrees: Sequence[int], subsets=None) -> StabilityReport:
    """Compare d_Y with g_Y - 1 + 2 n_Y / n over all connected proper subcurves Y."""
    _check_degrees(graph, degrees)
    if len(graph.vertices) > MAX_STABILITY_VERTICES:
        raise ValidationError(f"stability scan supports at most {MAX_STABILITY_VERTICES} vertices")
    if graph.n == 0:
        raise ValidationError("stability needs at least one marked point")
    graph_genus(graph)
    if subsets is None:
        subsets = connected_subsets(graph)
    equality = None
    for Y in sorted(subsets, key=lambda s: (len(s), sorted(s))):
        lhs = Fraction(sum(degrees[i] for i in Y))
        rhs = stability_bound(graph, Y)
        wit = tuple(sorted(i + 1 for i in Y))
        if lhs < rhs:
            return StabilityReport("unstable", wit, lhs, rhs)
        if lhs == rhs and equality is None:
            equality = StabilityReport("strictly-semistable", wit, lhs, rhs)
    return equality or StabilityReport("stable")


def enumerate_multidegrees(graph: DualGraph, d: int, kind: str = "stable") -> list[tuple[int, ...]]:
    """All multidegrees of total degree d that are stable (or semistable), in decreasing lexicographic order."""
    if kind not in ("stable", "semistable", "strictly-semistable"):
        raise ValidationError(f"unknown kind {kind!r}")
    V = len(graph.vertices)
    if V > MAX_ENUMERATION_VERTICES:
        raise ValidationError(f"enumeration supports at most {MAX_ENUMERATION_VERTICES} vertices")
    graph_genus(graph)
    subsets = connected_subsets(graph)
    lo = [-d] * V
    hi = [2 * d] * V
    everything = frozenset(range(V))
    for Y in subsets:
        b = stability_bound(graph, Y)
        if len(Y) == 1:
            (i,) = Y
            lo[i] = max(lo[i], _ceil(b))
        if len(Y) == V - 1:
            (i,) = everything - Y
            hi[i] = min(hi[i], d - _ceil(b))
    out = []

    def rec(prefix: list[int], remaining: int):
        k = len(prefix)
        if k == V:
            if remaining == 0:
                out.append(tuple(prefix))
            return
        rest_lo = sum(lo[k + 1 :])
        rest_hi = sum(hi[k + 1 :])
        for x in range(lo[k], hi[k] + 1):
            if rest_lo <= remaining - x <= rest_hi:
                rec(prefix + [x], remaining - x)

    if V == 0:
        return []
    rec([], d)
    keep = []
    for deg in out:
        verdict = check_stability(graph, deg, subsets).verdict
        if kind == "stable" and verdict == "stable":
            keep.append(deg)
        elif kind == "semistable" and verdict != "unstable":
            keep.append(deg)
        elif kind == "strictly-semistable" and verdict == "strictly-semistable":
            keep.append(deg)
    return sorted(set(keep), reverse=True)


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


# ---------------------------------------------------------------- MHV structure


@dataclass(frozen=True)
class MHVReport:
    verdict: str  # "MHV" | "not-MHV" | "no-obstruction"
    rule: str | None = None
    detail: str = ""
    witness: tuple[int, ...] | None = None

    def to_json(self) -> dict:
        out = {"verdict": self.verdict}
        if self.rule:
            out["rule"] = self.rule
        if self.detail:
            out["detail"] = self.detail
        if self.witness is not None:
            out["witness"] = list(self.witness)
        return out


def bridges(graph: DualGraph) -> list[int]:
    out = []
    V = len(graph.vertices)
    for k, (u, v) in enumerate(graph.edges):
        if u == v:
            continue
        if len(_component_of(graph, 0, frozenset({k}))) != V:
            out.append(k)
    return out


def mhv_structural_check(graph: DualGraph, degrees: Sequence[int]) -> MHVReport:
    """Necessary conditions for an MHV multidegree, and a full verdict in the trivalent 0/1 case."""
    _check_degrees(graph, degrees)
    g = graph_genus(graph)
    n = graph.n
    if n != g + 3 or sum(degrees) != g + 1:
        raise ValidationError(f"need n = g+3 and total degree g+1; got g={g}, n={n}, d={sum(degrees)}")
    br = bridges(graph)
    if br:
        u, v = graph.edges[br[0]]
        return MHVReport("not-MHV", "separating-node", "a separating node splits the scattering map", (u + 1, v + 1))
    neg = [i + 1 for i, x in enumerate(degrees) if x < 0]
    if neg:
        return MHVReport("not-MHV", "negative-degree", "a component carries negative degree", tuple(neg))
    zero = [i for i, x in enumerate(degrees) if x == 0]
    seen: set[int] = set()
    for i in zero:
        if i in seen:
            continue
        comp = _restricted_component(graph, i, set(zero))
        seen |= comp
        legs = sum(len(graph.vertices[j].legs) for j in comp)
        if subcurve_genus(graph, comp) > 0 or legs >= 2:
            return MHVReport(
                "not-MHV",
                "degree-zero-subcurve",
                "a degree-0 connected subcurve has positive genus or at least two marked points",
                tuple(sorted(j + 1 for j in comp)),
            )
    for Y in connected_subsets(graph, proper=False):
        gY = subcurve_genus(graph, Y)
        dY = sum(degrees[i] for i in Y)
        nY = sum(len(graph.vertices[i].legs) for i in Y)
        wit = tuple(sorted(i + 1 for i in Y))
        if gY > 0 and dY <= gY:
            return MHVReport("not-MHV", "low-degree-subcurve", f"d_Y={dY} <= g_Y={gY}", wit)
        if dY == gY + 1 and nY > gY + 3:
            return MHVReport("not-MHV", "excess-legs", f"d_Y=g_Y+1 with {nY} > g_Y+3 legs", wit)
    trivalent = all(len(v.legs) + graph.edge_ends(i) == 3 for i, v in enumerate(graph.vertices))
    if trivalent and all(v.genus == 0 for v in graph.vertices) and set(degrees) <= {0, 1}:
        try:
            ht = hypertree_of_diagram(graph, degrees)
        except ValidationError as exc:
            return MHVReport("not-MHV", "hypertree-shape", str(exc))
        verdict = check_ct(ht)
        if verdict.is_ct:
            return MHVReport("MHV", None, "associated hypertree is CT")
        return MHVReport("not-MHV", "hypertree-not-CT", f"triples {list(verdict.violating)} violate the covering bound", verdict.violating)
    return MHVReport("no-obstruction", None, "necessary conditions hold; no full verdict outside the trivalent 0/1 case")


def _restricted_component(graph: DualGraph, start: int, allowed: set[int]) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for u, v in graph.edges:
            for a, b in ((u, v), (v, u)):
                if a == x and b in allowed and b not in seen:
                    seen.add(b)
                    stack.append(b)
    return seen


def hypertree_of_diagram(graph: DualGraph, degrees: Sequence[int]) -> Hypertree:
    """Triples of marked points reached from each degree-1 component through white trees."""
    white = {i for i, x in enumerate(degrees) if x == 0}
    label: dict[int, int] = {}
    for i in white:
        if i in label:
            continue
        comp = _restricted_component(graph, i, white)
        legs = sorted(x for j in comp for x in graph.vertices[j].legs)
        if len(legs) != 1:
            raise ValidationError(f"white tree {sorted(j + 1 for j in comp)} carries {len(legs)} marked points")
        for j in comp:
            label[j] = legs[0]
    triples = []
    for b, x in enumerate(degrees):
        if x != 1:
            continue
        members = list(graph.vertices[b].legs)
        for u, v in graph.edges:
            for a, w in ((u, v), (v, u)):
                if a == b and w in white:
                    members.append(label[w])
                elif a == b and w != b and w not in white:
                    raise ValidationError("two degree-1 components share a node")
        if len(members) != 3 or len(set(members)) != 3:
            raise ValidationError(f"component {b + 1} reaches marked points {sorted(members)}, not three distinct ones")
        triples.append(tuple(sorted(members)))
    return Hypertree(graph.n, tuple(triples))


def trivalent_from_hypertree(ht: Hypertree) -> tuple[DualGraph, tuple[int, ...]]:
    """Stable trivalent diagram of a hypertree: black components of degree 1, and for each
    marked point a chain of degree-0 rational components fanning out to its black components.
    A marked point on a single black component sits directly on it."""
    verts: list[Vertex] = []
    degrees: list[int] = []
    edges: list[tuple[int, int]] = []
    legs_on_black: dict[int, set[int]] = {b: set() for b in range(ht.d)}
    for b in range(ht.d):
        verts.append(Vertex(0, frozenset()))
        degrees.append(1)
    for w in range(1, ht.n + 1):
        blacks = [b for b, t in enumerate(ht.triples) if w in t]
        if not blacks:
            raise ValidationError(f"marked point {w} lies on no triple")
        if len(blacks) == 1:
            legs_on_black[blacks[0]].add(w)
            continue
        # a caterpillar of k-1 trivalent white vertices with k black neighbors and one leg
        k = len(blacks)
        chain = []
        for j in range(k - 1):
            verts.append(Vertex(0, frozenset({w}) if j == 0 else frozenset()))
            degrees.append(0)
            chain.append(len(verts) - 1)
        for a, b in zip(chain, chain[1:]):
            edges.append((a, b))
        if k == 2:
            edges.append((chain[0], blacks[0]))
            edges.append((chain[0], blacks[1]))
        else:
            edges.append((chain[0], blacks[0]))
            for j in range(1, k - 2):
                edges.append((chain[j], blacks[j]))
            edges.append((chain[-1], blacks[k - 2]))
            edges.append((chain[-1], blacks[k - 1]))
    for b, legs in legs_on_black.items():
        verts[b] = Vertex(0, frozenset(legs))
    return DualGraph(tuple(verts), tuple(edges)), tuple(degrees)


# ---------------------------------------------------------------- channel cuts


@dataclass(frozen=True)
class Cut:
    edges: tuple[int, ...]  # 1-based edge indices
    side_a: tuple[int, ...]  # 1-based vertices
    side_b: tuple[int, ...]
    channels: int
    case: str | None  # "I" | "II" | "invalid" | None for bridges

    def to_json(self) -> dict:
        return {"edges": list(self.edges), "A": list(self.side_a), "B": list(self.side_b), "channels": self.channels, "case": self.case}


def channel_factorizations(graph: DualGraph, degrees: Sequence[int]) -> list[Cut]:
    """Bridges and separating pairs of nodes, the latter classified by (n, g) on each side."""
    _check_degrees(graph, degrees)
    V = len(graph.vertices)
    E = len(graph.edges)
    everything = set(range(V))
    out: list[Cut] = []
    br = set(bridges(graph))
    for k in sorted(br):
        a = _component_of(graph, graph.edges[k][0], frozenset({k}))
        out.append(Cut((k + 1,), _one_based(a), _one_based(everything - a), 1, None))
    for k1, k2 in itertools.combinations(range(E), 2):
        if k1 in br or k2 in br:
            continue
        if graph.edges[k1][0] == graph.edges[k1][1] or graph.edges[k2][0] == graph.edges[k2][1]:
            continue
        removed = frozenset({k1, k2})
        a = _component_of(graph, graph.edges[k1][0], removed)
        if len(a) == V:
            continue
        b = everything - a
        if _excluded_side(graph, degrees, a) or _excluded_side(graph, degrees, b):
            continue
        out.append(Cut((k1 + 1, k2 + 1), _one_based(a), _one_based(b), 2, _classify(graph, a, b)))
    return out


def _one_based(s) -> tuple[int, ...]:
    return tuple(sorted(i + 1 for i in s))


def _excluded_side(graph: DualGraph, degrees, side) -> bool:
    if len(side) != 1:
        return False
    (i,) = side
    v = graph.vertices[i]
    return v.genus == 0 and len(v.legs) == 1 and degrees[i] == 0


def _classify(graph: DualGraph, a, b) -> str:
    na = sum(len(graph.vertices[i].legs) for i in a)
    nb = sum(len(graph.vertices[i].legs) for i in b)
    ga, gb = subcurve_genus(graph, a), subcurve_genus(graph, b)
    if (na == ga + 3 and nb == gb + 1) or (nb == gb + 3 and na == ga + 1):
        return "I"
    if na == ga + 2 and nb == gb + 2:
        return "II"
    return "invalid"


# ---------------------------------------------------------------- genus-1 closed forms


def _proj_z(z) -> ProjPoint:
    return ProjPoint.of(z)


def nodal_genus1_lambda(z, p: Sequence) -> ProjPoint:
    """[p1 + z/p1 : p2 + z/p2 ; p3 + z/p3 : p4 + z/p4], with z = inf allowed."""
    if len(p) != 4 or any(x == 0 for x in p):
        raise ValidationError("need four nonzero p values")
    zp = _proj_z(z)
    # scale the four entries by 1/z when needed: cross-ratios are affine invariant
    entries = [ProjPoint(zp.b * pi + zp.a / pi, 1) for pi in p]
    return cross_ratio(*entries)


def nodal_genus1_critical_points(p: Sequence) -> tuple[complex, complex]:
    root = cmath.sqrt(p[0] * p[1] * p[2] * p[3])
    return root, -root


def twochannel_genus1_lambda(z, p: Sequence) -> ProjPoint:
    """(z p4 - p1)(p2 - z p3) / (z (p2 - p1)(p4 - p3)), homogeneous in z."""
    if len(p) != 4:
        raise ValidationError("need four p values")
    p1, p2, p3, p4 = p
    k = (p2 - p1) * (p4 - p3)
    if k == 0:
        raise ValidationError("degenerate p values: p1 = p2 or p3 = p4")
    zp = _proj_z(z)
    z0, z1 = zp.a, zp.b
    return ProjPoint((z0 * p4 - z1 * p1) * (z1 * p2 - z0 * p3), z0 * z1 * k)


def twochannel_discriminant_roots(p: Sequence) -> tuple[complex, complex]:
    """Roots in lambda of the discriminant of p3 p4 z^2 + (lambda K - p2 p4 - p1 p3) z + p1 p2."""
    p1, p2, p3, p4 = p
    k = (p2 - p1) * (p4 - p3)
    c = p2 * p4 + p1 * p3
    r = 2 * cmath.sqrt(p1 * p2 * p3 * p4)
    return (c + r) / k, (c - r) / k


def twochannel_critical_points(p: Sequence) -> tuple[complex, complex]:
    p1, p2, p3, p4 = p
    r = cmath.sqrt(p1 * p2 / (p3 * p4))
    return r, -r
