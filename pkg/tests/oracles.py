"""Independent reference computations used by the tests.

Nothing here imports the code under test except for plain data containers.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction

import numpy as np
from scipy.integrate import quad

from mhvcurves.hypertrees import Triangulation


# ---------------------------------------------------------------- triangulations


def _bipyramid(k: int) -> tuple[int, list[tuple[int, int, int]], list[str]]:
    """Bipyramid over a 2k-gon: apexes 1, 2 and equator 3..2k+2."""
    ring = list(range(3, 2 * k + 3))
    faces, colors = [], []
    for i in range(2 * k):
        a, b = ring[i], ring[(i + 1) % (2 * k)]
        faces += [(1, a, b), (2, a, b)]
        c = "black" if i % 2 == 0 else "white"
        colors += [c, "white" if c == "black" else "black"]
    return 2 * k + 2, faces, colors


def _subdivide(n: int, faces, colors, k: int):
    """Replace face k = abc by seven faces around a new inner triangle xyz."""
    a, b, c = faces[k]
    col = colors[k]
    other = "white" if col == "black" else "black"
    x, y, z = n + 1, n + 2, n + 3
    new = [(a, b, z), (b, z, x), (b, c, x), (c, y, x), (c, a, y), (a, z, y), (x, y, z)]
    new_colors = [col, other, col, other, col, other, col]
    faces = faces[:k] + faces[k + 1 :] + new
    colors = colors[:k] + colors[k + 1 :] + new_colors
    return n + 3, faces, colors


def random_triangulation(rng: random.Random, max_vertices: int = 20) -> Triangulation:
    """Random checkerboard triangulation of the sphere with at most ``max_vertices`` vertices."""
    k = rng.randint(1, max(1, (max_vertices - 2) // 2))
    if k == 1:
        n, faces, colors = 3, [(1, 2, 3), (1, 2, 3)], ["black", "white"]
    else:
        n, faces, colors = _bipyramid(min(k, 4))
    while n + 3 <= max_vertices and rng.random() < 0.8:
        n, faces, colors = _subdivide(n, faces, colors, rng.randrange(len(faces)))
    perm = list(range(1, n + 1))
    rng.shuffle(perm)
    relabel = {i + 1: perm[i] for i in range(n)}
    faces = [tuple(relabel[v] for v in f) for f in faces]
    return Triangulation(n, tuple(faces), tuple(colors))


def augmenting_path_matching(left, adjacency) -> dict:
    """Maximum bipartite matching by repeated augmenting paths (Kuhn)."""
    match_right: dict = {}

    def try_assign(u, seen) -> bool:
        for w in adjacency.get(u, ()):
            if w in seen:
                continue
            seen.add(w)
            if w not in match_right or try_assign(match_right[w], seen):
                match_right[w] = u
                return True
        return False

    for u in left:
        try_assign(u, set())
    return {u: w for w, u in match_right.items()}


def interior_incidence(tri: Triangulation, outer: int):
    interior_v = sorted(set(range(1, tri.n + 1)) - set(tri.faces[outer]))
    interior_w = [k for k, c in enumerate(tri.colors) if c == "white" and k != outer]
    adj = {v: [k for k in interior_w if v in tri.faces[k]] for v in interior_v}
    return interior_v, interior_w, adj


# ---------------------------------------------------------------- elliptic quantities


def agm_by_quadrature(a: float, b: float) -> float:
    """pi / integral of dx / sqrt((x^2 + a^2)(x^2 + b^2)) over the real line."""
    val, _ = quad(lambda x: 1.0 / math.sqrt((x * x + a * a) * (x * x + b * b)), -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13)
    return math.pi / val


def elliptic_time(t0: float, t1: float, roots) -> float:
    """integral of dt / sqrt(f(t)) between two points of one real oval."""
    f = lambda x: float(np.prod([x - r for r in roots]))  # noqa: E731
    val, _ = quad(lambda x: 1.0 / math.sqrt(f(x)), t0, t1, epsabs=1e-13, epsrel=1e-12)
    return val


def chord_sum(a_coeffs, p1, p2):
    """Third intersection of the chord through p1, p2 on y^2 = x^3 + a2 x^2 + a1 x + a0.

    Returns (x3, y3); the reduced sum divisor of (p1 - inf) + (p2 - inf) is (x3, -y3) - inf.
    """
    a0, a1, a2 = a_coeffs
    (x1, y1), (x2, y2) = p1, p2
    m = (y2 - y1) / (x2 - x1)
    k = y1 - m * x1
    x3 = m * m - a2 - x1 - x2
    return x3, m * x3 + k


# ---------------------------------------------------------------- exact helpers


def random_fraction(rng: random.Random, lo: int = -9, hi: int = 9) -> Fraction:
    return Fraction(rng.randint(lo, hi), rng.randint(1, 5))
