"""Arithmetic kernel: polynomials, projective points, Mobius maps, cross-ratios, AGM.

Scalars are Python numbers (int, float, complex) or ``fractions.Fraction``.
Exact inputs stay exact through every operation here except ``agm``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Number
from typing import Iterable, Sequence

__all__ = [
    "Fraction",
    "Poly",
    "ProjPoint",
    "INF",
    "Mobius",
    "DegenerateError",
    "poly_divrem",
    "lagrange_interpolate",
    "cross_ratio",
    "mobius_from_triple",
    "agm",
    "is_exact",
]

DEFAULT_TOL = 1e-9


class DegenerateError(ValueError):
    """Raised when a chart or construction degenerates (coincident points, zero divisors)."""


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def _is_zero(x) -> bool:
    return x == 0


class Poly:
    """Univariate polynomial with coefficients in ascending degree order."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        c = list(coeffs)
        while c and _is_zero(c[-1]):
            c.pop()
        self.coeffs: tuple = tuple(c)

    @classmethod
    def z(cls) -> "Poly":
        return cls((0, 1))

    @classmethod
    def const(cls, c) -> "Poly":
        return cls((c,))

    @classmethod
    def from_roots(cls, roots: Iterable) -> "Poly":
        p = cls((1,))
        for r in roots:
            p = p * cls((-r, 1))
        return p

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def lead(self):
        return self.coeffs[-1] if self.coeffs else 0

    def coeff(self, k: int):
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __add__(self, other) -> "Poly":
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return Poly(self.coeff(k) + other.coeff(k) for k in range(n))

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly(-c for c in self.coeffs)

    def __sub__(self, other) -> "Poly":
        return self + (-_as_poly(other))

    def __rsub__(self, other) -> "Poly":
        return _as_poly(other) - self

    def __mul__(self, other) -> "Poly":
        if isinstance(other, Number):
            return Poly(c * other for c in self.coeffs)
        other = _as_poly(other)
        if self.is_zero() or other.is_zero():
            return Poly()
        out = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        out = Poly((1,))
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, Number):
            other = Poly((other,))
        if not isinstance(other, Poly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self) -> str:
        return f"Poly({list(self.coeffs)!r})"

    def deriv(self) -> "Poly":
        return Poly(k * c for k, c in enumerate(self.coeffs) if k > 0)

    def scale(self, c) -> "Poly":
        return Poly(a * c for a in self.coeffs)

    def monic(self) -> "Poly":
        if self.is_zero():
            raise DegenerateError("zero polynomial has no monic normalization")
        lc = self.lead()
        if all(is_exact(c) for c in self.coeffs):
            return Poly(Fraction(c) / lc for c in self.coeffs)
        return Poly(c / lc for c in self.coeffs)

    def truncate(self, n: int) -> "Poly":
        """Keep coefficients of degree < n."""
        return Poly(self.coeffs[:n])

    def norm_inf(self) -> float:
        return max((abs(c) for c in self.coeffs), default=0.0)

    def real(self) -> "Poly":
        return Poly(c.real if isinstance(c, complex) else c for c in self.coeffs)

    def divrem(self, other: "Poly"):
        return poly_divrem(self, other)


def _as_poly(x) -> Poly:
    if isinstance(x, Poly):
        return x
    if isinstance(x, Number):
        return Poly((x,))
    raise TypeError(f"cannot interpret {type(x).__name__} as a polynomial")


def _div(a, b):
    if is_exact(a) and is_exact(b):
        return Fraction(a) / b
    return a / b


def poly_divrem(a: Poly, b: Poly) -> tuple[Poly, Poly]:
    """Long division: returns (q, r) with a = b*q + r and deg r < deg b."""
    if b.is_zero():
        raise DegenerateError("polynomial division by zero")
    rem = list(a.coeffs)
    db = b.degree
    lb = b.lead()
    if len(rem) - 1 < db:
        return Poly(), Poly(rem)
    quo = [0] * (len(rem) - db)
    for k in range(len(rem) - 1 - db, -1, -1):
        c = _div(rem[k + db], lb)
        quo[k] = c
        if c != 0:
            for j, bc in enumerate(b.coeffs):
                rem[k + j] = rem[k + j] - c * bc
        # the leading term cancels by construction; pin it to avoid round-off residue
        rem[k + db] = 0 * rem[k + db]
    return Poly(quo), Poly(rem[:db])


def lagrange_interpolate(nodes: Sequence, values: Sequence) -> Poly:
    """Interpolating polynomial of degree <= len(nodes)-1."""
    if len(nodes) != len(values):
        raise ValueError("nodes and values differ in length")
    if not nodes:
        return Poly()
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            if nodes[i] == nodes[j]:
                raise DegenerateError(f"repeated interpolation nodes at positions {i + 1} and {j + 1}: {nodes[i]!r}")
    out = Poly()
    for k, (tk, vk) in enumerate(zip(nodes, values)):
        basis = Poly((1,))
        denom = 1
        for j, tj in enumerate(nodes):
            if j != k:
                basis = basis * Poly((-tj, 1))
                denom = denom * (tk - tj)
        out = out + basis.scale(_div(vk, denom))
    return out


@dataclass(frozen=True, eq=False)
class ProjPoint:
    """Point (a : b) of the projective line; the affine value is a/b, infinity is (1 : 0)."""

    a: object
    b: object = 1

    def __post_init__(self):
        if self.a == 0 and self.b == 0:
            raise DegenerateError("(0 : 0) is not a projective point")

    @classmethod
    def of(cls, x) -> "ProjPoint":
        if isinstance(x, ProjPoint):
            return x
        if isinstance(x, float) and math.isinf(x):
            return INF
        if isinstance(x, str) and x.strip().lower() in ("inf", "infinity", "oo"):
            return INF
        return cls(x, 1)

    def is_infinite(self, tol: float = 0.0) -> bool:
        if is_exact(self.b) or tol == 0.0:
            return self.b == 0
        return abs(self.b) <= tol * abs(self.a)

    def value(self):
        """Affine coordinate; float('inf') at infinity."""
        if self.b == 0:
            return math.inf
        return _div(self.a, self.b)

    def normalized(self) -> tuple:
        """Representative scaled to unit max-norm (floating) for numerical comparisons."""
        s = max(abs(self.a), abs(self.b))
        return (self.a / s, self.b / s)

    def close(self, other: "ProjPoint", tol: float = DEFAULT_TOL) -> bool:
        """Chordal closeness of two projective points."""
        other = ProjPoint.of(other)
        x0, x1 = self.normalized()
        y0, y1 = other.normalized()
        return abs(x0 * y1 - x1 * y0) <= tol

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProjPoint):
            try:
                other = ProjPoint.of(other)
            except Exception:
                return NotImplemented
        return self.a * other.b == self.b * other.a

    def __hash__(self):
        v = self.value()
        return hash(v) if not isinstance(v, complex) else hash((v.real, v.imag))

    def __repr__(self) -> str:
        if self.b == 0:
            return "ProjPoint(inf)"
        return f"ProjPoint({self.value()!r})"

    def conjugate(self) -> "ProjPoint":
        return ProjPoint(_conj(self.a), _conj(self.b))


def _conj(x):
    return x.conjugate() if isinstance(x, complex) else x


INF = ProjPoint(1, 0)


def _det(p: ProjPoint, q: ProjPoint):
    """Projective difference [p, q] proportional to p - q."""
    return p.a * q.b - p.b * q.a


@dataclass(frozen=True, eq=False)
class Mobius:
    """2x2 matrix ((a, b), (c, d)) acting by x -> (a x + b) / (c x + d)."""

    a: object
    b: object
    c: object
    d: object

    def __post_init__(self):
        det = self.det()
        if det == 0:
            raise DegenerateError("singular Mobius matrix")
        if not is_exact(det):
            scale = max(abs(self.a), abs(self.b), abs(self.c), abs(self.d)) ** 2
            if abs(det) <= 1e-14 * scale:
                raise DegenerateError("numerically singular Mobius matrix")

    @classmethod
    def identity(cls) -> "Mobius":
        return cls(1, 0, 0, 1)

    def det(self):
        return self.a * self.d - self.b * self.c

    def __call__(self, p):
        if isinstance(p, ProjPoint):
            return ProjPoint(self.a * p.a + self.b * p.b, self.c * p.a + self.d * p.b)
        return ProjPoint(self.a * p + self.b, self.c * p + self.d).value()

    def __matmul__(self, other: "Mobius") -> "Mobius":
        return Mobius(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "Mobius":
        return Mobius(self.d, -self.b, -self.c, self.a)

    def matrix(self) -> tuple:
        return ((self.a, self.b), (self.c, self.d))

    def same_as(self, other: "Mobius", tol: float = DEFAULT_TOL) -> bool:
        """Equality in PGL2 (up to scale)."""
        u = [self.a, self.b, self.c, self.d]
        v = [other.a, other.b, other.c, other.d]
        ku = max(range(4), key=lambda k: abs(u[k]))
        if v[ku] == 0:
            return False
        su, sv = u[ku], v[ku]
        return all(abs(x / su - y / sv) <= tol for x, y in zip(u, v))


def cross_ratio(a, b, c, d) -> ProjPoint:
    """[a:b; c:d] = (d - a)(b - c) / ((b - a)(d - c)), with infinity handled projectively.

    A single coincidence yields 0, 1 or infinity deterministically; an indeterminate 0/0
    (e.g. a = b and c = d) raises ``DegenerateError``.
    """
    a, b, c, d = (ProjPoint.of(x) for x in (a, b, c, d))
    pts = (a, b, c, d)
    if not all(is_exact(x) for p in pts for x in (p.a, p.b)):
        a, b, c, d = (ProjPoint(*p.normalized()) for p in pts)
    num = _det(d, a) * _det(b, c)
    den = _det(b, a) * _det(d, c)
    if is_exact(num) and is_exact(den):
        degenerate = num == 0 and den == 0
    else:
        degenerate = abs(num) <= 1e-24 and abs(den) <= 1e-24
    if degenerate:
        raise DegenerateError("cross-ratio is indeterminate: too many coincident points")
    return ProjPoint(num, den)


def _triple_to_frame(p, q, r) -> Mobius:
    """Mobius sending (0, 1, inf) to (p, q, r)."""
    p, q, r = (ProjPoint.of(x) for x in (p, q, r))
    # columns: image of inf is nu*r, image of 0 is mu*p, and nu*r + mu*p = q
    det = r.a * p.b - r.b * p.a
    if det == 0 or _det(p, q) == 0 or _det(q, r) == 0:
        raise DegenerateError("repeated points in a Mobius triple")
    nu = _div(q.a * p.b - q.b * p.a, det)
    mu = _div(r.a * q.b - r.b * q.a, det)
    return Mobius(nu * r.a, mu * p.a, nu * r.b, mu * p.b)


def mobius_from_triple(src: Sequence, dst: Sequence) -> Mobius:
    """The unique Mobius map with m(src[i]) = dst[i] for i = 0, 1, 2."""
    if len(src) != 3 or len(dst) != 3:
        raise ValueError("Mobius maps are determined by exactly three points")
    return _triple_to_frame(*dst) @ _triple_to_frame(*src).inverse()


def agm(a: float, b: float) -> float:
    """Arithmetic-geometric mean of two positive reals."""
    if not (a > 0 and b > 0):
        raise ValueError("agm needs positive arguments")
    a, b = float(a), float(b)
    for _ in range(100):
        if abs(a - b) <= 1e-15 * max(a, b):
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def agm_sequences(a: float, b: float, steps: int = 8) -> list[tuple[float, float]]:
    """The pairs (a_k, b_k) of the AGM iteration, starting from (max, min)."""
    a, b = max(a, b), min(a, b)
    out = [(a, b)]
    for _ in range(steps):
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        out.append((a, b))
    return out
