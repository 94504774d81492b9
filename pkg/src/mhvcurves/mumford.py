"""Mumford triples on y^2 = f(z), f monic of degree 2g+1.

A triple (U, V, W) with V^2 + U W = f describes the matrix M = [[V, U], [W, -V]] with
det(M) = -f.  Its eigenline over a marked point (z_i, y_i) has slope
q_i = (y_i - V(z_i)) / U(z_i), and the cross-ratios of these slopes are the scattering
chart.  U has roots t_1..t_g with V(t_k) = s_k: the finite points of the divisor.  The
slope function (y - V)/U has poles at the sheet-swapped points (t_k, -s_k) and at infinity,
so the line bundle of a triple is O(sum (t_k, -s_k) + inf).

Translation-invariant flows on the Jacobian act on triples through Lax fields indexed by a
scalar c; they are integrated here with RK4.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .scalars import DegenerateError, Poly, ProjPoint, cross_ratio, is_exact, lagrange_interpolate, poly_divrem

VALIDATE_TOL = 1e-9


class ChartExit(RuntimeError):
    """A computation left the (U, V, W) chart, i.e. reached the excluded theta locus."""

    def __init__(self, message: str, partial=None, time_reached: float | None = None):
        super().__init__(message)
        self.partial = partial
        self.time_reached = time_reached


class BasePointError(DegenerateError):
    """Slope 0/0 at a marked point."""


@dataclass(frozen=True)
class MarkedPoint:
    z: complex | float
    y: complex | float

    def flipped(self) -> "MarkedPoint":
        return MarkedPoint(self.z, -self.y)


@dataclass(frozen=True)
class HyperellipticCurve:
    """y^2 = prod (z - r) with marked points; ``kind`` is the real placement type "A" or "B"."""

    roots: tuple
    marked: tuple[MarkedPoint, ...] = ()
    kind: str | None = None
    f: Poly = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.roots) % 2 != 1 or len(self.roots) < 3:
            raise DegenerateError("f must have odd degree 2g+1 >= 3")
        rs = list(self.roots)
        for i in range(len(rs)):
            for j in range(i + 1, len(rs)):
                if abs(rs[i] - rs[j]) <= 1e-8:
                    raise DegenerateError(f"roots {i + 1} and {j + 1} collide")
        object.__setattr__(self, "f", Poly.from_roots(rs))
        zs = [p.z for p in self.marked]
        for i in range(len(zs)):
            for j in range(i + 1, len(zs)):
                if abs(zs[i] - zs[j]) <= 1e-12:
                    raise DegenerateError(f"marked points {i + 1} and {j + 1} share the same z")
        for k, p in enumerate(self.marked):
            fz = self.f(p.z)
            if abs(p.y * p.y - fz) > 1e-9 * max(1.0, abs(fz)):
                raise DegenerateError(f"marked point {k + 1} is not on the curve")

    @property
    def g(self) -> int:
        return (len(self.roots) - 1) // 2

    @property
    def n(self) -> int:
        return len(self.marked)

    def sqrt_f(self, x, sheet: int = 1):
        fx = self.f(x)
        if isinstance(x, complex) or (not is_exact(fx) and isinstance(fx, complex)):
            return sheet * cmath.sqrt(fx)
        if fx < 0:
            return sheet * cmath.sqrt(fx)
        return sheet * math.sqrt(fx)

    def point(self, x, sheet: int = 1) -> MarkedPoint:
        return MarkedPoint(x, self.sqrt_f(x, sheet))

    def with_marked(self, marked: Sequence[MarkedPoint], kind: str | None = None) -> "HyperellipticCurve":
        return HyperellipticCurve(self.roots, tuple(marked), self.kind if kind is None else kind)

    def flipped(self, indices) -> "HyperellipticCurve":
        """Apply the sheet involution to the marked points with the given 1-based indices."""
        idx = set(indices)
        return self.with_marked([p.flipped() if k + 1 in idx else p for k, p in enumerate(self.marked)])

    @classmethod
    def from_json(cls, obj: Mapping) -> "HyperellipticCurve":
        try:
            roots = [float(r) for r in obj["roots"]]
            entries = list(obj.get("marked", []))
            kind = obj.get("type")
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"curve JSON needs 'roots' (and optionally 'marked', 'type'): {exc}") from exc
        base = cls(tuple(roots))
        marked: list[MarkedPoint] = []
        pairs: dict = {}
        for k, e in enumerate(entries):
            if "x" in e:
                sheet = int(e.get("sheet", 1))
                if sheet not in (1, -1):
                    raise ValueError(f"marked[{k}].sheet must be 1 or -1")
                marked.append(base.point(float(e["x"]), sheet))
            elif "re" in e and "im" in e:
                key = e.get("conj_pair", k)
                z = complex(float(e["re"]), float(e["im"]))
                if key in pairs:
                    first = pairs[key]
                    if abs(first.z.conjugate() - z) > 1e-12:
                        raise ValueError(f"marked[{k}] is not the conjugate of its pair partner")
                    marked.append(MarkedPoint(z, first.y.conjugate()))
                    pairs[key] = None
                else:
                    sheet = int(e.get("sheet", 1))
                    p = MarkedPoint(z, sheet * cmath.sqrt(base.f(z)))
                    pairs[key] = p
                    marked.append(p)
            else:
                raise ValueError(f"marked[{k}] needs either 'x' or 're'/'im'")
        # a pair listed once stands for both of its points
        for key, first in pairs.items():
            if first is not None:
                marked.append(MarkedPoint(first.z.conjugate(), first.y.conjugate()))
        if kind not in (None, "A", "B"):
            raise ValueError("curve 'type' must be 'A' or 'B'")
        return cls(tuple(roots), tuple(marked), kind)

    def to_json(self) -> dict:
        marked = []
        for p in self.marked:
            if isinstance(p.z, complex) and p.z.imag != 0:
                marked.append({"re": p.z.real, "im": p.z.imag, "y": [complex(p.y).real, complex(p.y).imag]})
            else:
                y = complex(p.y)
                marked.append({"x": float(complex(p.z).real), "sheet": 1 if y.real >= 0 else -1})
        out = {"roots": [float(complex(r).real) for r in self.roots], "marked": marked}
        if self.kind:
            out["type"] = self.kind
        return out


@dataclass(frozen=True)
class MumfordTriple:
    U: Poly
    V: Poly
    W: Poly

    @property
    def g(self) -> int:
        return self.U.degree

    def to_json(self) -> dict:
        return {k: [_num_json(c) for c in getattr(self, k).coeffs] for k in ("U", "V", "W")}

    @classmethod
    def from_json(cls, obj: Mapping) -> "MumfordTriple":
        try:
            return cls(*(Poly(_num_parse(c) for c in obj[k]) for k in ("U", "V", "W")))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"triple JSON needs coefficient lists 'U', 'V', 'W': {exc}") from exc

    def points(self) -> list[tuple[complex, complex]]:
        """Finite points (t_k, V(t_k)) of the divisor."""
        ts = _roots(self.U)
        return [(t, self.V(t)) for t in ts]

    def negated(self) -> "MumfordTriple":
        return MumfordTriple(self.U, -self.V, self.W)


def _num_json(c):
    if isinstance(c, Fraction):
        return str(c)
    c = complex(c)
    if c.imag == 0:
        return c.real
    return [c.real, c.imag]


def _num_parse(c):
    if isinstance(c, str):
        return Fraction(c)
    if isinstance(c, (list, tuple)):
        return complex(c[0], c[1])
    return float(c)


def _roots(p: Poly) -> list[complex]:
    if p.degree <= 0:
        return []
    return list(np.roots([complex(c) for c in reversed(p.coeffs)]))


def _maybe_real(p: Poly, tol: float = 1e-9) -> Poly:
    if not all(is_exact(c) for c in p.coeffs):
        # a pinned exact leading 1 should not survive among floating coefficients
        p = Poly(float(c) if isinstance(c, Fraction) else c for c in p.coeffs)
    if not any(isinstance(c, complex) for c in p.coeffs):
        return p
    scale = max(1.0, p.norm_inf())
    if all(abs(complex(c).imag) <= tol * scale for c in p.coeffs):
        return Poly(complex(c).real for c in p.coeffs)
    return p


def mumford_from_points(curve: HyperellipticCurve, t: Sequence, s: Sequence, tol: float = VALIDATE_TOL, check: bool = True) -> MumfordTriple:
    """U = prod(z - t_k), V interpolates V(t_k) = s_k, W = (f - V^2)/U.

    ``check=False`` skips the on-curve and divisibility checks, for points already on the
    curve whose coefficients are too large for a meaningful double-precision remainder.
    """
    g = curve.g
    if len(t) != g or len(s) != g:
        raise DegenerateError(f"need {g} points, got {len(t)}")
    for k, (tk, sk) in enumerate(zip(t, s)):
        if not check:
            break
        ft = curve.f(tk)
        if abs(sk * sk - ft) > tol * max(1.0, abs(ft)):
            raise DegenerateError(f"point {k + 1} is off the curve: s^2 - f(t) = {sk * sk - ft}")
    U = Poly.from_roots(t)
    V = lagrange_interpolate(list(t), list(s)).truncate(g)
    W, rem = poly_divrem(curve.f - V * V, U)
    if check and rem.norm_inf() > tol * max(1.0, curve.f.norm_inf(), (V * V).norm_inf()):
        raise DegenerateError(f"(f - V^2) is not divisible by U (remainder {rem.norm_inf():.3g})")
    return MumfordTriple(_maybe_real(U), _maybe_real(V), _maybe_real(W))


def mumford_validate(M: MumfordTriple, curve: HyperellipticCurve) -> float:
    """||V^2 + U W - f||_inf / ||f||_inf, or inf when degrees or monic normalization fail."""
    g = curve.g
    if M.U.degree != g or M.W.degree != g + 1 or M.V.degree > g - 1:
        return math.inf
    if M.U.lead() != 1 or M.W.lead() != 1:
        if is_exact(M.U.lead()) or abs(M.U.lead() - 1) > 1e-12 or abs(M.W.lead() - 1) > 1e-12:
            return math.inf
    diff = M.V * M.V + M.U * M.W - curve.f
    num = diff.norm_inf()
    if is_exact(num) and num == 0:
        return 0.0
    return float(num / curve.f.norm_inf())


# ---------------------------------------------------------------- Lax flows


@dataclass(frozen=True)
class LaxTangent:
    dU: Poly
    dV: Poly
    dW: Poly
    c: object


def _div_linear(p: Poly, c) -> Poly:
    q, _ = poly_divrem(p, Poly((-c, 1)))
    return q


def lax_field(M: MumfordTriple, c, variant: str = "corrected") -> LaxTangent:
    """Tangent vector of the translation-invariant flow indexed by c.

    ``variant="printed"`` uses the coefficient -U(c)U in the V-equation instead of
    -U(c)U/2; it breaks V^2 + UW = f and is kept for comparison only.
    """
    U, V, W = M.U, M.V, M.W
    Uc, Vc, Wc = U(c), V(c), W(c)
    exact = all(is_exact(x) for x in (*U.coeffs, *V.coeffs, *W.coeffs, c))
    half = Fraction(1, 2) if exact else 0.5
    if variant == "corrected":
        k = half
    elif variant == "printed":
        k = 1
    else:
        raise ValueError(f"unknown Lax variant {variant!r}")
    dU = _div_linear(U.scale(Vc) - V.scale(Uc), c)
    dW = _div_linear(V.scale(Wc) - W.scale(Vc), c) + V.scale(Uc)
    dV = _div_linear(W.scale(Uc) - U.scale(Wc), c).scale(half) - U.scale(Uc * k)
    g = U.degree
    dU = dU.truncate(g)
    if variant == "corrected":
        dV = dV.truncate(g)
        dW = dW.truncate(g + 1)
    return LaxTangent(dU, dV, dW, c)


def conservation_defect(M: MumfordTriple, T: LaxTangent) -> Poly:
    """2 V dV + dU W + U dW: the derivative of V^2 + U W along the field."""
    return M.V * T.dV.scale(2) + T.dU * M.W + M.U * T.dW


def _pack(M: MumfordTriple, g: int) -> np.ndarray:
    u = [M.U.coeff(k) for k in range(g)]
    v = [M.V.coeff(k) for k in range(g)]
    w = [M.W.coeff(k) for k in range(g + 1)]
    return np.array(u + v + w, dtype=complex)


def _unpack(x: np.ndarray, g: int, real: bool) -> MumfordTriple:
    conv = (lambda a: float(a.real)) if real else complex
    u = [conv(a) for a in x[:g]] + [1.0]
    v = [conv(a) for a in x[g : 2 * g]]
    w = [conv(a) for a in x[2 * g :]] + [1.0]
    return MumfordTriple(Poly(u), Poly(v), Poly(w))


def _quotient_linear(p: list, c: complex) -> list:
    # synthetic division by (z - c), remainder dropped
    q = [0j] * (len(p) - 1)
    acc = 0j
    for k in range(len(p) - 1, 0, -1):
        acc = p[k] + c * acc
        q[k - 1] = acc
    return q


def _horner(p: list, c: complex) -> complex:
    acc = 0j
    for a in reversed(p):
        acc = acc * c + a
    return acc


def _field_vec(x: np.ndarray, g: int, c, real: bool) -> np.ndarray:
    """``lax_field`` (corrected variant) on packed coefficients, without building Polys."""
    c = complex(c)
    xs = x.tolist()
    U = xs[:g] + [1.0]
    V = xs[g : 2 * g] + [0j, 0j]
    W = xs[2 * g :] + [1.0]
    Uc, Vc, Wc = _horner(U, c), _horner(V, c), _horner(W, c)
    dU = _quotient_linear([U[k] * Vc - V[k] * Uc for k in range(g + 1)], c)
    dV = _quotient_linear([W[k] * Uc - (U[k] if k <= g else 0.0) * Wc for k in range(g + 2)], c)
    dW = _quotient_linear([V[k] * Wc - W[k] * Vc for k in range(g + 2)], c)
    out = dU[:g] + [0.5 * dV[k] - 0.5 * Uc * U[k] for k in range(g)] + [dW[k] + V[k] * Uc for k in range(g + 1)]
    return np.array(out, dtype=complex)


def _packed_residual(x: np.ndarray, g: int, f: np.ndarray) -> float:
    u = np.concatenate([x[:g], [1.0]])
    w = np.concatenate([x[2 * g :], [1.0]])
    diff = P.polyadd(P.polyadd(P.polymul(x[g : 2 * g], x[g : 2 * g]), P.polymul(u, w)), -f)
    return float(np.abs(diff).max() / np.abs(f).max())


def lax_flow(
    M: MumfordTriple, c, T: float, steps: int = 1000, max_halvings: int = 12, step_tol: float = 1e-11, local_tol: float = 1e-13
) -> MumfordTriple:
    """RK4 integration of the Lax field for time T; leading coefficients stay pinned at 1.

    Each of the ``steps`` intervals is split further until two checks hold.  Step doubling
    bounds the local error by ``local_tol`` (relative), and the result is Richardson
    extrapolated.  The flow preserves V^2 + UW = f, so a step may not move the relative
    residual of that identity by more than ``step_tol`` or produce non-finite values.
    If ``max_halvings`` splits do not suffice, the flow has left the chart and
    ``ChartExit`` carries the partial triple and the time reached.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    g = M.g
    real = not any(isinstance(a, complex) for a in (*M.U.coeffs, *M.V.coeffs, *M.W.coeffs, c))
    x = _pack(M, g)
    f = np.array([complex(a) for a in (M.V * M.V + M.U * M.W).coeffs])
    h = T / steps
    t = 0.0

    def rk4(x0, dt):
        k1 = _field_vec(x0, g, c, real)
        k2 = _field_vec(x0 + 0.5 * dt * k1, g, c, real)
        k3 = _field_vec(x0 + 0.5 * dt * k2, g, c, real)
        k4 = _field_vec(x0 + dt * k3, g, c, real)
        return x0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    def step(x0, dt):
        full = rk4(x0, dt)
        half = rk4(rk4(x0, dt / 2), dt / 2)
        if not np.all(np.isfinite(half)):
            return None
        if np.max(np.abs(half - full)) / 15 > local_tol * (1.0 + np.max(np.abs(half))):
            return None
        return half + (half - full) / 15

    def accept(x1, r0) -> float | None:
        if x1 is None or not np.all(np.isfinite(x1)):
            return None
        r1 = _packed_residual(x1, g, f)
        return r1 if r1 <= r0 + step_tol else None

    r = _packed_residual(x, g, f)
    for _ in range(steps):
        sub = 1
        while True:
            y, ry = x, r
            with np.errstate(all="ignore"):
                for _ in range(sub):
                    y1 = step(y, h / sub)
                    ry = accept(y1, ry)
                    if ry is None:
                        break
                    y = y1
            if ry is not None:
                x, r = y, ry
                break
            sub *= 2
            if sub > 2**max_halvings:
                raise ChartExit("Lax flow left the Mumford chart", _unpack(x, g, real), t)
        t += h
    return _unpack(x, g, real)


# ---------------------------------------------------------------- divisor arithmetic


def _cantor_reduce(u: Poly, v: Poly, f: Poly, g: int) -> tuple[Poly, Poly]:
    while u.degree > g:
        q, _ = poly_divrem(f - v * v, u)
        u = q.monic()
        _, v = poly_divrem(-v, u)
    return u, v


def _hermite_v(pts: list[tuple[complex, complex, int]], f: Poly) -> Poly:
    """Polynomial v with v(t) = s, and v'(t) = f'(t)/(2s) at double points."""
    nodes = []
    conds = []
    for t, s, mult in pts:
        if mult == 1:
            nodes.append(t)
            conds.append((t, s, None))
        elif mult == 2:
            if abs(s) < 1e-12:
                raise ChartExit("doubled Weierstrass point reduces to the hyperelliptic class")
            conds.append((t, s, f.deriv()(t) / (2 * s)))
            nodes.append(t)
        else:
            raise ChartExit("multiplicity above 2 is not supported")
    m = sum(p[2] for p in pts)
    A = np.zeros((m, m), dtype=complex)
    b = np.zeros(m, dtype=complex)
    row = 0
    for t, s, ds in conds:
        A[row] = [t**k for k in range(m)]
        b[row] = s
        row += 1
        if ds is not None:
            A[row] = [k * t ** (k - 1) if k else 0 for k in range(m)]
            b[row] = ds
            row += 1
    coeffs = np.linalg.solve(A, b)
    return Poly(list(coeffs))


def jacobian_add(M: MumfordTriple, increment, curve: HyperellipticCurve, tol: float = 1e-7) -> MumfordTriple:
    """Reduced divisor of D_M + increment, with D_M the finite divisor of M minus g*inf.

    ``increment`` is either another triple (its finite divisor minus g*inf) or a sequence of
    (x, y, sign) with sign = +1 adding (x, y) - inf and sign = -1 subtracting it.
    """
    pts = list(M.points())
    if isinstance(increment, MumfordTriple):
        pts += increment.points()
    else:
        for x, y, sign in increment:
            pts.append((complex(x), complex(y) if sign > 0 else -complex(y)))
    scale = max(1.0, max((abs(t) for t, _ in pts), default=1.0))
    # cancel (t, s) against (t, -s): their sum is the hyperelliptic class 2*inf
    remaining: list[list] = []
    for t, s in pts:
        for k, (t2, s2, m2) in enumerate(remaining):
            if abs(t - t2) <= tol * scale and abs(s + s2) <= tol * max(1.0, abs(s)):
                if m2 == 1:
                    remaining.pop(k)
                else:
                    remaining[k][2] -= 1
                break
            if abs(t - t2) <= tol * scale and abs(s - s2) <= tol * max(1.0, abs(s)):
                remaining[k][2] += 1
                break
        else:
            remaining.append([complex(t), complex(s), 1])
    if not remaining:
        raise ChartExit("the sum is the zero class, which lies on the theta locus")
    u = Poly.from_roots([t for t, _, m in remaining for _ in range(m)])
    v = _hermite_v([tuple(p) for p in remaining], curve.f)
    _, v = poly_divrem(v, u)
    u, v = _cantor_reduce(u, v, curve.f, curve.g)
    if u.degree < curve.g:
        raise ChartExit("the reduced divisor has fewer than g points: theta locus reached")
    W, rem = poly_divrem(curve.f - v * v, u)
    out = MumfordTriple(_maybe_real(u, 1e-8), _maybe_real(v.truncate(curve.g), 1e-8), _maybe_real(W, 1e-8))
    if mumford_validate(out, curve) > 1e-10:
        out = _polish(out, curve) or out
    if _scaled_residual(out, curve) > 1e-9:
        raise ChartExit("reduction lost accuracy (near the theta locus)")
    return out


def _scaled_residual(M: MumfordTriple, curve: HyperellipticCurve) -> float:
    """Residual of V^2 + UW = f against the size of the terms that cancel.

    A point far out on the curve makes V^2 and UW huge while f stays put, so a relative
    check against f alone would reject triples that are as accurate as doubles allow.
    """
    if M.U.degree != curve.g or M.W.degree != curve.g + 1:
        return math.inf
    vv, uw = M.V * M.V, M.U * M.W
    size = max(float(abs(vv.norm_inf())), float(abs(uw.norm_inf())), float(abs(curve.f.norm_inf())))
    return float(abs((vv + uw - curve.f).norm_inf())) / size


def _polish(M: MumfordTriple, curve: HyperellipticCurve) -> MumfordTriple | None:
    """Rebuild a slightly inaccurate triple from its points, snapping V(t) onto the curve."""
    ts = _roots(M.U)
    scale = max(1.0, max(abs(t) for t in ts))
    if any(abs(a - b) < 1e-6 * scale for a, b in itertools.combinations(ts, 2)):
        return None
    ss = []
    for t in ts:
        root = cmath.sqrt(curve.f(t))
        ss.append(root if abs(M.V(t) - root) <= abs(M.V(t) + root) else -root)
    try:
        out = mumford_from_points(curve, ts, ss, check=False)
    except DegenerateError:
        return None
    return MumfordTriple(_maybe_real(out.U, 1e-8), _maybe_real(out.V, 1e-8), _maybe_real(out.W, 1e-8))


# ---------------------------------------------------------------- scattering map


def scattering_slopes(M: MumfordTriple, curve: HyperellipticCurve, tol: float = 1e-10) -> tuple[ProjPoint, ...]:
    """Eigenline slopes (y_i - V(z_i)) / U(z_i) at the marked points."""
    out = []
    for k, p in enumerate(curve.marked):
        num = p.y - M.V(p.z)
        den = M.U(p.z)
        if abs(num) <= tol and abs(den) <= tol:
            raise BasePointError(f"slope is 0/0 at marked point {k + 1}: base point")
        out.append(ProjPoint(num, den))
    return tuple(out)


def default_quadruples(g: int) -> tuple[tuple[int, int, int, int], ...]:
    return tuple((i, g + 1, g + 2, g + 3) for i in range(1, g + 1))


def moduli_chart(q: Sequence, g: int, quadruples=None) -> tuple[ProjPoint, ...]:
    """lambda_k = [q_i : q_a ; q_b : q_c], by default with anchors (g+1, g+2, g+3)."""
    quads = default_quadruples(g) if quadruples is None else quadruples
    qs = [ProjPoint.of(x) for x in q]
    out = []
    for i, a, b, c in quads:
        anchors = [qs[a - 1], qs[b - 1], qs[c - 1]]
        for x, y in ((0, 1), (0, 2), (1, 2)):
            if anchors[x].close(anchors[y], 1e-14):
                raise DegenerateError(f"chart anchors {a},{b},{c} collide")
        out.append(cross_ratio(qs[i - 1], *anchors))
    return tuple(out)


def chart_point(M: MumfordTriple, curve: HyperellipticCurve, quadruples=None) -> np.ndarray:
    return np.array([complex(x.value()) for x in moduli_chart(scattering_slopes(M, curve), curve.g, quadruples)])


def default_flow_parameters(curve: HyperellipticCurve) -> list[complex]:
    """g flow parameters placed off the real axis and away from the marked points."""
    spread = max(1.0, max(abs(complex(r)) for r in curve.roots))
    return [complex(0.31 * spread * (k + 1), 2.0 * spread * (k + 1.5)) for k in range(curve.g)]


def amplitude_branch(M: MumfordTriple, curve: HyperellipticCurve, c: Sequence | None = None, quadruples=None) -> float:
    """Density of the invariant volume against the chart volume at M.

    With fields F_1..F_g for parameters c_1..c_g, the holomorphic differentials z^{j-1}dz/y
    pair with F_k to -c_k^{j-1}; dividing |Vandermonde(c)| by |det[dlambda_i(F_j)]| gives a
    value independent of c.  Returns inf on a singular chart differential.
    """
    g = curve.g
    cs = default_flow_parameters(curve) if c is None else list(c)
    if len(cs) != g or len(set(cs)) != g:
        raise ValueError(f"need {g} distinct flow parameters")
    quads = default_quadruples(g) if quadruples is None else quadruples
    z = [p.z for p in curve.marked]
    y = [p.y for p in curve.marked]
    Uz = np.array([M.U(x) for x in z], dtype=complex)
    Vz = np.array([M.V(x) for x in z], dtype=complex)
    if np.any(np.abs(Uz) < 1e-14):
        return math.inf
    q = (np.array(y, dtype=complex) - Vz) / Uz
    jac = np.zeros((g, g), dtype=complex)
    for j, cj in enumerate(cs):
        T = lax_field(M, cj)
        dU = np.array([T.dU(x) for x in z], dtype=complex)
        dV = np.array([T.dV(x) for x in z], dtype=complex)
        dq = (-dV * Uz - (np.array(y) - Vz) * dU) / Uz**2
        jac[:, j] = _chart_differential(q, dq, quads)
    det = abs(np.linalg.det(jac))
    vdm = abs(np.prod([cs[b] - cs[a] for a in range(g) for b in range(a + 1, g)])) if g > 1 else 1.0
    if det == 0 or not np.isfinite(det):
        return math.inf
    return float(vdm / det)


def _chart_differential(q: np.ndarray, dq: np.ndarray, quads) -> np.ndarray:
    """d lambda for lambda = (d-a)(b-c)/((b-a)(d-c)) over finite slopes (vectorized in trailing axes)."""
    out = []
    for i, a, b, c in quads:
        A, B, C, D = q[i - 1], q[a - 1], q[b - 1], q[c - 1]
        dA, dB, dC, dD = dq[i - 1], dq[a - 1], dq[b - 1], dq[c - 1]
        lam = (D - A) * (B - C) / ((B - A) * (D - C))
        dlog = (
            dA * (1 / (B - A) - 1 / (D - A))
            + dB * (1 / (B - C) - 1 / (B - A))
            + dC * (1 / (D - C) - 1 / (B - C))
            + dD * (1 / (D - A) - 1 / (D - C))
        )
        out.append(lam * dlog)
    return np.array(out)


def find_preimages_real(curve: HyperellipticCurve, target: Sequence[float], components=None, **kwargs):
    """Real preimages of a chart point, at most one per real component (see realscatter)."""
    from .realscatter import MCurve, find_preimages

    return find_preimages(MCurve(curve), target, components, **kwargs)
