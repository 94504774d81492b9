"""Real M-curves y^2 = prod(z - r_k) with 2g+1 real roots.

The real locus has g+1 ovals [r_1, r_2], ..., [r_{2g-1}, r_{2g}], [r_{2g+1}, inf).  A real
line-bundle class of degree d lies in the component of Pic^d(R) indexed by the set of ovals
carrying odd degree.  For a triple (U, V, W) the bundle is O(sum (t_k, -s_k) + inf), so its
component is the odd-count set of the t_k, toggled at the last oval.

Every component is covered (up to a measure-zero set) by chart pieces: multisets of g real
points on ovals with the right parities, plus, for g = 2 and even parity, a complex
conjugate pair.  Newton iteration on these pieces finds real preimages of chart points; the
pushforward of the translation-invariant volume gives the scattering probability densities.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import mpmath
import numpy as np
from scipy.spatial import cKDTree

from .mumford import (
    ChartExit,
    HyperellipticCurve,
    MarkedPoint,
    MumfordTriple,
    chart_point,
    default_flow_parameters,
    default_quadruples,
    jacobian_add,
    mumford_from_points,
    scattering_slopes,
    _chart_differential,
)
from .scalars import INF, DegenerateError, Mobius, ProjPoint, mobius_from_triple

HUISMAN_CHART = ((1, 3, 4, 5), (2, 3, 4, 5))


class PlacementError(ValueError):
    """Marked points are not placed as the real type requires."""


# ---------------------------------------------------------------- curve data


@dataclass(frozen=True)
class Oval:
    index: int
    lo: float
    hi: float  # math.inf for the last oval

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.hi)

    def contains(self, x: float, tol: float = 1e-12) -> bool:
        return self.lo - tol <= x <= self.hi + tol


@dataclass(frozen=True)
class OvalPoint:
    x: float
    sheet: int = 1

    @classmethod
    def infinity(cls) -> "OvalPoint":
        return cls(math.inf, 1)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.x)


@dataclass(frozen=True)
class ConjugatePair:
    z: complex


@dataclass(frozen=True, order=True)
class ComponentIndex:
    members: frozenset

    @classmethod
    def of(cls, items: Iterable[int]) -> "ComponentIndex":
        return cls(frozenset(int(i) for i in items))

    @classmethod
    def parse(cls, text: str, g: int) -> "ComponentIndex":
        t = text.strip().strip("{}").strip()
        if t.upper() == "H":
            return cls.of(range(1, g + 2))
        if t in ("", "empty"):
            return cls(frozenset())
        return cls.of(int(x) for x in t.split(",") if x.strip())

    def __str__(self) -> str:
        return "{" + ",".join(str(i) for i in sorted(self.members)) + "}"

    def xor(self, other: "ComponentIndex") -> "ComponentIndex":
        return ComponentIndex(self.members ^ other.members)


def huisman(g: int) -> ComponentIndex:
    return ComponentIndex.of(range(1, g + 2))


def all_components(g: int, d: int | None = None) -> list[ComponentIndex]:
    d = g + 1 if d is None else d
    out = []
    for r in range(g + 2):
        if r % 2 == d % 2:
            out += [ComponentIndex.of(c) for c in itertools.combinations(range(1, g + 2), r)]
    return sorted(out, key=lambda c: (-len(c.members), sorted(c.members)))


class MCurve:
    """A hyperelliptic curve with all roots real, with the placement type of its marked points."""

    def __init__(self, curve: HyperellipticCurve, check_placement: bool = True):
        roots = [complex(r) for r in curve.roots]
        if any(abs(r.imag) > 0 for r in roots):
            raise DegenerateError("an M-curve needs real roots")
        rs = sorted(r.real for r in roots)
        self.curve = HyperellipticCurve(tuple(rs), curve.marked, curve.kind)
        self.g = self.curve.g
        self.roots = tuple(rs)
        self.ovals = tuple(
            Oval(k + 1, rs[2 * k], rs[2 * k + 1] if k < self.g else math.inf) for k in range(self.g + 1)
        )
        if check_placement and curve.kind:
            self._check_placement()

    @classmethod
    def build(cls, roots: Sequence[float], marked: Sequence[tuple], kind: str | None = "A") -> "MCurve":
        """``marked`` holds (x, sheet) pairs or complex z for the first member of a conjugate pair."""
        base = HyperellipticCurve(tuple(sorted(float(r) for r in roots)))
        pts = []
        for m in marked:
            if isinstance(m, complex):
                p = MarkedPoint(m, base.sqrt_f(m))
                pts += [p, MarkedPoint(m.conjugate(), complex(p.y).conjugate())]
            else:
                pts.append(base.point(float(m[0]), int(m[1])))
        return cls(base.with_marked(pts, kind))

    @property
    def kind(self) -> str | None:
        return self.curve.kind

    def oval_of(self, x: float) -> int:
        for o in self.ovals:
            if o.contains(x):
                return o.index
        raise PlacementError(f"x = {x} lies in no oval")

    def _check_placement(self) -> None:
        g = self.g
        pts = self.curve.marked
        if len(pts) != g + 3:
            raise PlacementError(f"need {g + 3} marked points, got {len(pts)}")
        for k in range(g + 1):
            z = complex(pts[k].z)
            if z.imag != 0 or self.oval_of(z.real) != k + 1:
                raise PlacementError(f"marked point {k + 1} must lie on oval {k + 1}")
        tail = [complex(p.z) for p in pts[g + 1 :]]
        if self.kind == "A":
            for k, z in enumerate(tail):
                if z.imag != 0 or self.oval_of(z.real) != g + 1:
                    raise PlacementError(f"type A: marked point {g + 2 + k} must lie on oval {g + 1}")
        elif self.kind == "B":
            a, b = tail
            if a.imag == 0 or abs(a.conjugate() - b) > 1e-12:
                raise PlacementError("type B: the last two marked points must be a complex-conjugate pair")
        else:
            raise PlacementError(f"unknown placement type {self.kind!r}")

    def real_chart(self, lam: np.ndarray) -> np.ndarray:
        """Real coordinate of chart values: lambda itself (type A) or Im lambda (type B, Re = 1/2)."""
        lam = np.asarray(lam)
        if self.kind == "B":
            return lam.imag
        return lam.real


def ovals(mc: MCurve) -> list[Oval]:
    return list(mc.ovals)


def component_of_divisor(mc: MCurve, points: Sequence, d: int) -> ComponentIndex:
    """Odd-degree ovals of a real divisor; conjugate pairs count 2 and carry no parity."""
    counts = [0] * (mc.g + 2)
    degree = 0
    for p in points:
        if isinstance(p, ConjugatePair):
            degree += 2
            continue
        if isinstance(p, OvalPoint):
            k = mc.g + 1 if p.is_infinite else mc.oval_of(p.x)
        else:
            k = mc.oval_of(float(p))
        counts[k] += 1
        degree += 1
    if degree != d:
        raise ValueError(f"divisor has degree {degree}, expected {d}")
    comp = ComponentIndex.of(k for k in range(1, mc.g + 2) if counts[k] % 2)
    if len(comp.members) % 2 != d % 2:
        raise ValueError("parity violation: odd ovals disagree with the degree")
    return comp


def component_of_triple(mc: MCurve, M: MumfordTriple) -> ComponentIndex:
    """Component of O(sum (t_k, -s_k) + inf) for a real triple."""
    pts: list = [OvalPoint.infinity()]
    ts = sorted(M.points(), key=lambda p: (complex(p[0]).real, complex(p[0]).imag))
    used = [False] * len(ts)
    for k, (t, _) in enumerate(ts):
        if used[k]:
            continue
        t = complex(t)
        if abs(t.imag) <= 1e-9 * max(1.0, abs(t)):
            pts.append(OvalPoint(t.real))
            used[k] = True
        else:
            for j in range(k + 1, len(ts)):
                if not used[j] and abs(complex(ts[j][0]) - t.conjugate()) <= 1e-7 * max(1.0, abs(t)):
                    used[j] = True
                    break
            else:
                raise DegenerateError("triple is not real: unpaired complex point")
            used[k] = True
            pts.append(ConjugatePair(t))
    return component_of_divisor(mc, pts, mc.g + 1)


# ---------------------------------------------------------------- special points (genus 2)


def special_points_table(mc_or_placement, g: int = 2) -> dict[str, ComponentIndex | None]:
    """Components of the 16 classes P - K, K + p_i, P - p_i - p_j for genus 2.

    Accepts an MCurve or a placement list (oval index per marked point, None for each member
    of the conjugate pair).  P is the sum of the marked points and K the canonical class.
    """
    if isinstance(mc_or_placement, MCurve):
        mc = mc_or_placement
        if mc.g != 2:
            raise ValueError("the special-point table is for genus 2")
        placement = []
        for p in mc.curve.marked:
            z = complex(p.z)
            placement.append(mc.oval_of(z.real) if z.imag == 0 else None)
    else:
        placement = list(mc_or_placement)
        if g != 2:
            raise ValueError("the special-point table is for genus 2")
    n = len(placement)
    if n != 5:
        raise ValueError("genus 2 needs five marked points")
    conj = [i for i, o in enumerate(placement) if o is None]
    if len(conj) not in (0, 2):
        raise ValueError("conjugate pair markers must come in twos")

    def parity(idx) -> frozenset:
        out: set[int] = set()
        for i in idx:
            o = placement[i]
            if o is not None:
                out ^= {o}
        return frozenset(out)

    def real_class(idx) -> bool:
        inside = [i for i in idx if i in conj]
        return len(inside) in (0, 2)

    everything = range(n)
    P = parity(everything)
    table: dict[str, ComponentIndex | None] = {"delta": ComponentIndex(P)}
    for i in everything:
        table[f"delta_{i + 1}"] = ComponentIndex(parity([i])) if real_class([i]) else None
    for i, j in itertools.combinations(everything, 2):
        table[f"delta_{i + 1}{j + 1}"] = ComponentIndex(P ^ parity([i, j])) if real_class([i, j]) else None
    return table


# ---------------------------------------------------------------- charts on components


def invariant_density(t: Sequence, s: Sequence) -> float:
    """|det[t_i^(j-1) / s_i]|: the translation-invariant volume in (t, s) coordinates."""
    t = np.asarray(t, dtype=complex)
    s = np.asarray(s, dtype=complex)
    if np.any(np.abs(s) == 0):
        return math.inf
    g = len(t)
    mat = np.array([[t[i] ** j / s[i] for j in range(g)] for i in range(g)])
    return float(abs(np.linalg.det(mat)))


def huisman_point(mc: MCurve, points: Sequence[OvalPoint]) -> MumfordTriple:
    """Triple with t_k on oval k, k = 1..g (the remaining point of the divisor is at infinity)."""
    g = mc.g
    if len(points) != g:
        raise ValueError(f"need {g} oval points")
    for k, p in enumerate(points):
        if p.is_infinite or mc.oval_of(p.x) != k + 1:
            raise PlacementError(f"point {k + 1} must be a finite point of oval {k + 1}")
    t = [p.x for p in points]
    s = [mc.curve.sqrt_f(p.x, p.sheet) for p in points]
    return mumford_from_points(mc.curve, t, s)


@dataclass(frozen=True)
class Piece:
    """A chart piece: g real points on the given ovals, or ('conj', sign) for a conjugate pair."""

    ovals: tuple
    conj_sign: int = 0

    @property
    def is_conj(self) -> bool:
        return self.conj_sign != 0

    @property
    def symmetry(self) -> float:
        """Reciprocal of the number of parameter points per divisor."""
        if self.is_conj:
            return 1.0
        out = 1.0
        for o in set(self.ovals):
            out /= math.factorial(self.ovals.count(o))
        return out

    def box(self, g: int) -> list[tuple[float, float]]:
        if self.is_conj:
            return [(-math.pi / 2, math.pi / 2), (0.0, math.pi / 2)]
        return [(0.0, 2 * math.pi) if o <= g else (-math.pi, math.pi) for o in self.ovals]

    def __str__(self) -> str:
        if self.is_conj:
            return f"conj{'+' if self.conj_sign > 0 else '-'}"
        return "ovals" + "".join(str(o) for o in self.ovals)


def component_pieces(mc: MCurve, comp: ComponentIndex) -> list[Piece]:
    g = mc.g
    if len(comp.members) % 2 != (g + 1) % 2:
        raise ValueError(f"{comp} is not a component of Pic^{g + 1}")
    target = comp.members ^ {g + 1}
    out = []
    for ms in itertools.combinations_with_replacement(range(1, g + 2), g):
        odd = {o for o in set(ms) if ms.count(o) % 2}
        if odd == target:
            out.append(Piece(ms))
    if g == 2 and not target:
        out += [Piece((), 1), Piece((), -1)]
    return out


def _others_product(x: np.ndarray, roots: Sequence[float], skip: Sequence[int]) -> np.ndarray:
    out = np.ones_like(x, dtype=float)
    for k, r in enumerate(roots):
        if k not in skip:
            out = out * (x - r)
    return out


def oval_param(mc: MCurve, oval: int, theta: np.ndarray):
    """Smooth circle parametrization of an oval.

    Returns (x, y, w) with y = +-sqrt f(x) and w = |dx/dtheta| / |y| (smooth and positive).
    Bounded ovals use x = a + (b - a)(1 - cos theta)/2; the unbounded oval uses
    x = r + tan(theta/2)^2, reaching infinity at theta = +-pi.
    """
    theta = np.asarray(theta, dtype=float)
    rs = mc.roots
    g = mc.g
    if oval <= g:
        a, b = rs[2 * oval - 2], rs[2 * oval - 1]
        x = a + (b - a) * (1 - np.cos(theta)) / 2
        rest = -_others_product(x, rs, (2 * oval - 2, 2 * oval - 1))
        root = np.sqrt(np.maximum(rest, 0.0))
        y = (b - a) / 2 * np.sin(theta) * root
        w = 1.0 / root
    else:
        r = rs[-1]
        u = np.tan(theta / 2)
        x = r + u * u
        rest = _others_product(x, rs, (len(rs) - 1,))
        root = np.sqrt(rest)
        y = u * root
        w = (1 + u * u) / root
    return x, y, w


def _sqrt_f_upper(mc: MCurve, t: np.ndarray) -> np.ndarray:
    """sqrt f continuous on the upper half plane (product of principal roots)."""
    out = np.ones_like(t, dtype=complex)
    for r in mc.roots:
        out = out * np.sqrt(t - r)
    return out


def _conj_scale(mc: MCurve) -> tuple[float, float]:
    rs = mc.roots
    return 0.5 * (rs[0] + rs[-1]), max(1.0, rs[-1] - rs[0])


def piece_eval(mc: MCurve, piece: Piece, params: np.ndarray):
    """(t, s, weight) for parameters of shape (g, N); weight is the invariant density in parameters."""
    params = np.atleast_2d(np.asarray(params, dtype=float))
    g = mc.g
    N = params.shape[1]
    if piece.is_conj:
        c0, L = _conj_scale(mc)
        a, b = params
        alpha = c0 + L * np.tan(a)
        beta = L * np.tan(b)
        t1 = alpha + 1j * beta
        s1 = piece.conj_sign * _sqrt_f_upper(mc, t1)
        t = np.vstack([t1, np.conj(t1)])
        s = np.vstack([s1, np.conj(s1)])
        fabs = np.abs(s1) ** 2
        weight = 4 * beta / fabs * (L / np.cos(a) ** 2) * (L / np.cos(b) ** 2)
        return t, s, weight
    t = np.zeros((g, N), dtype=complex)
    s = np.zeros((g, N), dtype=complex)
    weight = np.ones(N)
    for k, o in enumerate(piece.ovals):
        x, y, w = oval_param(mc, o, params[k])
        t[k], s[k] = x, y
        weight = weight * w
    for i in range(g):
        for j in range(i + 1, g):
            weight = weight * np.abs(t[j] - t[i])
    return t, s, weight


def _lagrange_eval(t: np.ndarray, s: np.ndarray, x) -> tuple[np.ndarray, np.ndarray]:
    """U(x) and V(x) for U = prod(z - t_k), V(t_k) = s_k; t, s of shape (g, N)."""
    g = t.shape[0]
    U = np.ones(t.shape[1:], dtype=complex)
    for k in range(g):
        U = U * (x - t[k])
    V = np.zeros(t.shape[1:], dtype=complex)
    for k in range(g):
        term = s[k].astype(complex)
        for j in range(g):
            if j != k:
                term = term * (x - t[j]) / (t[k] - t[j])
        V = V + term
    return U, V


def slopes_from_ts(mc: MCurve, t: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Eigenline slopes at the marked points, up to one common translation per sample.

    With V/U = sum_k beta_k / (z - t_k), beta_k = s_k / U'(t_k), a far point t_k contributes
    the constant beta_k / t_k to every slope; dropping it keeps the differences accurate.
    Nearly coincident t_k fall back to the direct formula (y - V(z)) / U(z).
    """
    marked = mc.curve.marked
    g = t.shape[0]
    scale = 1.0 + max(abs(r) for r in mc.roots)
    close = np.zeros(t.shape[1:], dtype=bool)
    beta = []
    for k in range(g):
        d = np.ones(t.shape[1:], dtype=complex)
        for j in range(g):
            if j != k:
                d = d * (t[k] - t[j])
                close |= np.abs(t[k] - t[j]) < 1e-6 * scale
        beta.append(s[k] / np.where(d == 0, 1.0, d))
    far = np.abs(t) > 10 * scale
    q = []
    for p in marked:
        U, V = _lagrange_eval(t, s, p.z)
        direct = (p.y - V) / U
        split = p.y / U
        for k in range(g):
            near_term = -beta[k] / (p.z - t[k])
            far_term = beta[k] * p.z / (t[k] * (t[k] - p.z))
            split = split + np.where(far[k], far_term, near_term)
        q.append(np.where(close, direct, split))
    return np.array(q)


def chart_from_ts(mc: MCurve, t: np.ndarray, s: np.ndarray, quads=None) -> np.ndarray:
    quads = default_quadruples(mc.g) if quads is None else quads
    q = slopes_from_ts(mc, t, s)
    out = []
    for i, a, b, c in quads:
        A, B, C, D = q[i - 1], q[a - 1], q[b - 1], q[c - 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            out.append((D - A) * (B - C) / ((B - A) * (D - C)))
    return np.array(out)


def branch_from_ts(mc: MCurve, t: np.ndarray, s: np.ndarray, quads=None, cs=None) -> np.ndarray:
    """Vectorized amplitude branch: |Vandermonde(c)| / |det[dlambda_i(F_c_j)]|."""
    g = mc.g
    quads = default_quadruples(g) if quads is None else quads
    cs = default_flow_parameters(mc.curve) if cs is None else cs
    f = mc.curve.f
    marked = mc.curve.marked
    Uz, Vz, y = [], [], []
    for p in marked:
        U, V = _lagrange_eval(t, s, p.z)
        Uz.append(U)
        Vz.append(V)
        y.append(np.full(U.shape, p.y, dtype=complex))
    Uz, Vz, y = np.array(Uz), np.array(Vz), np.array(y)
    Wz = (y * y - Vz * Vz) / Uz
    q = (y - Vz) / Uz
    zs = np.array([p.z for p in marked], dtype=complex)[:, None]
    cols = []
    for c in cs:
        Uc, Vc = _lagrange_eval(t, s, c)
        Wc = (f(c) - Vc * Vc) / Uc
        dU = (Vc * Uz - Uc * Vz) / (zs - c)
        dV = 0.5 * (Uc * Wz - Wc * Uz) / (zs - c) - 0.5 * Uc * Uz
        dq = (-dV * Uz - (y - Vz) * dU) / Uz**2
        cols.append(_chart_differential(q, dq, quads))
    jac = np.moveaxis(np.array(cols), -1, 0)  # (N, g_c, g_lambda)
    det = np.abs(np.linalg.det(jac))
    vdm = 1.0
    for a in range(g):
        for b in range(a + 1, g):
            vdm *= abs(cs[b] - cs[a])
    with np.errstate(divide="ignore"):
        out = vdm / det
    # far-out or nearly coincident divisor points cancel badly in double precision
    scale = 1.0 + max(abs(r) for r in mc.roots)
    risky = np.max(np.abs(t), axis=0) > 1e3 * scale
    for i in range(g):
        for j in range(i + 1, g):
            risky |= np.abs(t[i] - t[j]) < 1e-3 * scale
    for k in np.nonzero(risky)[0]:
        out[k] = _branch_mp(mc, t[:, k], s[:, k], quads, cs)
    return out


def _branch_mp(mc: MCurve, t, s, quads, cs, dps: int = 60) -> float:
    """Extended-precision evaluation of one amplitude-branch value."""
    with mpmath.workdps(dps):
        f = lambda x: mpmath.fprod(x - r for r in mc.roots)  # noqa: E731
        ts = [mpmath.mpc(complex(x)) for x in t]
        ss = []
        for x, y in zip(ts, s):
            root = mpmath.sqrt(f(x))
            ss.append(root if abs(complex(root) - complex(y)) <= abs(complex(root) + complex(y)) else -root)
        g = len(ts)

        def UV(x):
            U = mpmath.fprod(x - tk for tk in ts)
            V = 0
            for k in range(g):
                term = ss[k]
                for j in range(g):
                    if j != k:
                        term *= (x - ts[j]) / (ts[k] - ts[j])
                V += term
            return U, V

        zs = [mpmath.mpc(complex(p.z)) for p in mc.curve.marked]
        ys = [mpmath.mpc(complex(p.y)) for p in mc.curve.marked]
        ys = [y if abs(y * y - f(z)) < 1e-12 else (1 if complex(y).real >= 0 else -1) * mpmath.sqrt(f(z)) for z, y in zip(zs, ys)]
        UVz = [UV(z) for z in zs]
        q = [(y - V) / U for y, (U, V) in zip(ys, UVz)]
        jac = mpmath.matrix(g, g)
        for col, c in enumerate(cs):
            c = mpmath.mpc(complex(c))
            Uc, Vc = UV(c)
            Wc = (f(c) - Vc * Vc) / Uc
            dq = []
            for z, y, (U, V) in zip(zs, ys, UVz):
                Wz = (y * y - V * V) / U
                dU = (Vc * U - Uc * V) / (z - c)
                dV = (Uc * Wz - Wc * U) / (z - c) / 2 - Uc * U / 2
                dq.append((-dV * U - (y - V) * dU) / U**2)
            for row, (i, a, b, cc) in enumerate(quads):
                A, B, C, D = q[i - 1], q[a - 1], q[b - 1], q[cc - 1]
                dA, dB, dC, dD = dq[i - 1], dq[a - 1], dq[b - 1], dq[cc - 1]
                lam = (D - A) * (B - C) / ((B - A) * (D - C))
                dlog = (
                    dA * (1 / (B - A) - 1 / (D - A))
                    + dB * (1 / (B - C) - 1 / (B - A))
                    + dC * (1 / (D - C) - 1 / (B - C))
                    + dD * (1 / (D - A) - 1 / (D - C))
                )
                jac[row, col] = lam * dlog
        det = abs(mpmath.det(jac))
        vdm = mpmath.fprod(abs(mpmath.mpc(complex(cs[b])) - mpmath.mpc(complex(cs[a]))) for a in range(g) for b in range(a + 1, g))
        return float(vdm / det) if det != 0 else math.inf


def _angle(x: np.ndarray) -> np.ndarray:
    return 2 * np.arctan(x)


def _wrap(d: np.ndarray) -> np.ndarray:
    return (d + np.pi) % (2 * np.pi) - np.pi


def chart_angles(mc: MCurve, piece: Piece, params: np.ndarray, quads=None) -> np.ndarray:
    t, s, _ = piece_eval(mc, piece, params)
    lam = chart_from_ts(mc, t, s, quads)
    return _angle(mc.real_chart(lam))


# ---------------------------------------------------------------- Newton on chart pieces


def _newton(mc: MCurve, piece: Piece, seeds: np.ndarray, target_angles: np.ndarray, quads=None, max_iter: int = 100, tol: float = 1e-13):
    """Damped Newton on wrapped chart angles, vectorized over seeds (shape (g, N)).

    ``target_angles`` has shape (g,) or (g, N).  Returns (params, residual norms).
    """
    g = mc.g
    P = np.array(seeds, dtype=float)
    tgt = np.broadcast_to(np.asarray(target_angles, dtype=float).reshape(g, -1), P.shape)
    box = piece.box(g)

    def clamp(X):
        if piece.is_conj:
            X[0] = np.clip(X[0], -math.pi / 2 + 1e-9, math.pi / 2 - 1e-9)
            X[1] = np.clip(X[1], 1e-12, math.pi / 2 - 1e-9)
        return X

    def resid(X, cols=slice(None)):
        with np.errstate(all="ignore"):
            r = _wrap(chart_angles(mc, piece, X, quads) - tgt[:, cols])
        return np.where(np.isfinite(r), r, 10.0)

    F = resid(P)
    norm = np.sqrt((F**2).sum(axis=0))
    h = 1e-7
    active = norm > tol
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        Pa, Fa = P[:, idx], F[:, idx]
        J = np.zeros((len(idx), g, g))
        for k in range(g):
            up, dn = Pa.copy(), Pa.copy()
            up[k] += h
            dn[k] -= h
            with np.errstate(all="ignore"):
                J[:, :, k] = (_wrap(resid(clamp(up), idx) - resid(clamp(dn), idx)) / (2 * h)).T
        J = np.where(np.isfinite(J), J, 0.0)
        step = -np.einsum("nij,nj->ni", np.linalg.pinv(J), Fa.T).T
        big = np.sqrt((step**2).sum(axis=0))
        step = step * np.minimum(1.0, 0.5 / np.maximum(big, 1e-300))
        na = norm[idx]
        lam = np.ones(len(idx))
        newP = Pa.copy()
        newF = Fa.copy()
        newN = na.copy()
        pending = np.ones(len(idx), dtype=bool)
        for _ in range(12):
            trial = clamp(Pa + lam * step)
            Ft = resid(trial, idx)
            Nt = np.sqrt((Ft**2).sum(axis=0))
            accept = pending & (Nt < na)
            newP[:, accept] = trial[:, accept]
            newF[:, accept] = Ft[:, accept]
            newN[accept] = Nt[accept]
            pending &= ~accept
            if not pending.any():
                break
            lam = np.where(pending, lam * 0.5, lam)
        stuck = pending
        P[:, idx] = newP
        F[:, idx] = newF
        norm[idx] = newN
        sub = active[idx]
        sub &= (newN > tol) & ~stuck
        active[idx] = sub
    return P, norm


def _seed_grid(piece: Piece, g: int, per_axis: int) -> np.ndarray:
    axes = []
    for lo, hi in piece.box(g):
        k = np.arange(per_axis)
        axes.append(lo + (hi - lo) * (k + 0.5) / per_axis)
    grid = np.meshgrid(*axes, indexing="ij")
    return np.array([a.ravel() for a in grid])


@dataclass(frozen=True)
class Preimage:
    component: ComponentIndex
    piece: Piece
    params: tuple
    triple: MumfordTriple
    residual: float

    def to_json(self) -> dict:
        return {
            "component": str(self.component),
            "piece": str(self.piece),
            "triple": self.triple.to_json(),
            "residual": self.residual,
        }


def _triple_from_params(mc: MCurve, piece: Piece, params: np.ndarray) -> MumfordTriple:
    t, s, _ = piece_eval(mc, piece, params.reshape(mc.g, 1))
    t, s = t[:, 0], s[:, 0]
    if piece.is_conj:
        return mumford_from_points(mc.curve, list(t), list(s), check=False)
    return mumford_from_points(mc.curve, [float(x.real) for x in t], [float(x.real) for x in s], check=False)


def _forward_cloud(mc: MCurve, piece: Piece, quads, sample: int):
    """Forward chart samples of a piece: (angles mod 2pi as (N, g), params as (g, N), tree)."""
    key = (piece, tuple(map(tuple, quads)) if quads is not None else None, sample)
    cache = mc.__dict__.setdefault("_clouds", {})
    if key not in cache:
        params = _seed_grid(piece, mc.g, sample)
        with np.errstate(all="ignore"):
            ang = chart_angles(mc, piece, params, quads)
        ok = np.all(np.isfinite(ang), axis=0)
        pts = np.minimum(np.mod(ang[:, ok].T, 2 * np.pi), 2 * np.pi - 1e-12)
        cache[key] = (params[:, ok], cKDTree(pts, boxsize=2 * np.pi))
    return cache[key]


def find_preimages(
    mc: MCurve,
    target: Sequence[float],
    components: Sequence[ComponentIndex] | None = None,
    quads=None,
    seeds: int = 16,
    sample: int | None = None,
    tol: float = 1e-8,
) -> list[Preimage]:
    """At most one real preimage of the chart point per component.

    Newton runs from the forward samples of each chart piece whose chart images lie nearest
    to the target; a candidate counts once its chart value matches to ``tol``.
    """
    g = mc.g
    if g not in (1, 2):
        raise ValueError("real preimage search supports g = 1 and g = 2")
    comps = all_components(g) if components is None else list(components)
    sample = sample or (2048 if g == 1 else 128)
    tgt = np.asarray(target, dtype=float)
    if tgt.shape != (g,):
        raise ValueError(f"target needs {g} chart coordinates")
    tgt_angles = _angle(tgt)
    out = []
    for comp in comps:
        best = None
        for piece in component_pieces(mc, comp):
            params, tree = _forward_cloud(mc, piece, quads, sample)
            k = min(seeds, tree.n)
            _, near = tree.query(np.mod(tgt_angles, 2 * np.pi), k=k)
            P, norm = _newton(mc, piece, params[:, np.atleast_1d(near)], tgt_angles, quads)
            for j in np.argsort(norm):
                if norm[j] > 1e-9:
                    break
                try:
                    M = _triple_from_params(mc, piece, P[:, j])
                    t, s_, _ = piece_eval(mc, piece, P[:, j].reshape(g, 1))
                    lam = mc.real_chart(chart_from_ts(mc, t, s_, quads)[:, 0])
                except (DegenerateError, ZeroDivisionError):
                    continue
                res = float(np.max(np.abs(lam - tgt) / np.maximum(1.0, np.abs(tgt))))
                if res < tol:
                    best = Preimage(comp, piece, tuple(P[:, j]), M, res)
                    break
            if best is not None:
                break
        if best is not None:
            out.append(best)
    return out


# ---------------------------------------------------------------- densities


@lru_cache(maxsize=64)
def _component_volume(roots: tuple, g: int, nodes: int) -> float:
    """Total invariant volume of the Huisman component (midpoint rule on the oval torus).

    All components are translates of each other, so this normalizes every component.
    """
    mc = MCurve(HyperellipticCurve(roots), check_placement=False)
    piece = Piece(tuple(range(1, g + 1)))
    axis = (np.arange(nodes) + 0.5) * 2 * np.pi / nodes
    grid = np.meshgrid(*([axis] * g), indexing="ij")
    params = np.array([a.ravel() for a in grid])
    _, _, w = piece_eval(mc, piece, params)
    return float(w.sum() * (2 * np.pi / nodes) ** g)


def component_volume(mc: MCurve, nodes: int | None = None) -> float:
    nodes = nodes or (4096 if mc.g == 1 else 256)
    return _component_volume(mc.roots, mc.g, nodes)


def piece_volume(mc: MCurve, piece: Piece, nodes: int = 256) -> float:
    """Invariant volume covered by one chart piece (midpoint rule in its parameters)."""
    g = mc.g
    axes = []
    widths = []
    for lo, hi in piece.box(g):
        axes.append(lo + (hi - lo) * (np.arange(nodes) + 0.5) / nodes)
        widths.append((hi - lo) / nodes)
    grid = np.meshgrid(*axes, indexing="ij")
    params = np.array([a.ravel() for a in grid])
    _, _, w = piece_eval(mc, piece, params)
    return float(np.nansum(w) * np.prod(widths) * piece.symmetry)


@dataclass
class DensityGrid:
    """Chart density on (RP^1)^g sampled at cell centers of a uniform grid in angle 2*atan(lambda)."""

    lambdas: tuple  # per axis, lambda values at cell centers
    rho: np.ndarray  # shape (res,) * g
    cell_area: np.ndarray  # lambda-measure of each cell
    quadruples: tuple
    normalization: float
    component: ComponentIndex
    flagged: int = 0

    @property
    def resolution(self) -> int:
        return len(self.lambdas[0])

    def mass(self) -> float:
        return float(np.sum(self.rho * self.cell_area))

    def rows(self):
        if len(self.lambdas) == 1:
            for lam, r in zip(self.lambdas[0], self.rho):
                yield (lam, r)
        else:
            for i, l1 in enumerate(self.lambdas[0]):
                for j, l2 in enumerate(self.lambdas[1]):
                    yield (l1, l2, self.rho[i, j])


def _cell_centers(res: int) -> tuple[np.ndarray, np.ndarray, float]:
    dphi = 2 * np.pi / res
    phi = -np.pi + (np.arange(res) + 0.5) * dphi
    lam = np.tan(phi / 2)
    area = (1 + lam * lam) / 2 * dphi
    return lam, area, dphi


def genus1_density(mc: MCurve, resolution: int = 512, component: ComponentIndex | None = None, quads=None) -> DensityGrid:
    """Pushforward of the normalized invariant measure of a genus-1 component to the chart line."""
    if mc.g != 1:
        raise ValueError("genus1_density needs g = 1")
    comp = component or huisman(1)
    (piece,) = component_pieces(mc, comp)
    lo, hi = piece.box(1)[0]
    fine = lo + (hi - lo) * (np.arange(8192) + 0.5) / 8192
    ang = np.unwrap(chart_angles(mc, piece, fine[None, :], quads)[0])
    turn = ang[-1] - ang[0]
    if abs(abs(turn) - 2 * np.pi) > 0.5:
        raise DegenerateError(f"chart map winds {turn / (2 * np.pi):.3f} times instead of once")
    lam, area, _ = _cell_centers(resolution)
    phi = _angle(lam)
    order = np.argsort(ang)
    a_sorted, f_sorted = ang[order], fine[order]
    shifted = a_sorted[0] + np.mod(phi - a_sorted[0], 2 * np.pi)
    seeds = np.interp(shifted, a_sorted, f_sorted)
    P, norm = _newton(mc, piece, seeds[None, :], phi[None, :], quads, max_iter=30)
    t, s, _ = piece_eval(mc, piece, P)
    Z = component_volume(mc)
    rho = branch_from_ts(mc, t, s, quads) / Z
    bad = (norm > 1e-9) | ~np.isfinite(rho)
    rho = np.where(bad, 0.0, rho)
    return DensityGrid((lam,), rho, area, tuple(quads or default_quadruples(1)), Z, comp, int(bad.sum()))


def genus2_density_grid(
    mc: MCurve,
    component: ComponentIndex | None = None,
    quads=HUISMAN_CHART,
    resolution: int = 48,
    sample: int = 160,
) -> DensityGrid:
    """Density on a resolution x resolution grid of (RP^1)^2, continued from forward samples."""
    if mc.g != 2:
        raise ValueError("genus2_density_grid needs g = 2")
    comp = component or huisman(2)
    lam, area1, _ = _cell_centers(resolution)
    L1, L2 = np.meshgrid(lam, lam, indexing="ij")
    targets = np.vstack([_angle(L1.ravel()), _angle(L2.ravel())])
    ncell = targets.shape[1]
    pieces = component_pieces(mc, comp)
    fwd_pts, fwd_params, fwd_piece = [], [], []
    for k, piece in enumerate(pieces):
        params = _seed_grid(piece, 2, sample)
        with np.errstate(all="ignore"):
            ang = chart_angles(mc, piece, params, quads)
        ok = np.all(np.isfinite(ang), axis=0)
        fwd_pts.append(np.mod(ang[:, ok].T, 2 * np.pi))
        fwd_params.append(params[:, ok].T)
        fwd_piece.append(np.full(ok.sum(), k))
    pts = np.vstack(fwd_pts)
    prm = np.vstack(fwd_params)
    pid = np.concatenate(fwd_piece)
    tree = cKDTree(np.minimum(pts, 2 * np.pi - 1e-12), boxsize=2 * np.pi)
    _, nearest = tree.query(np.mod(targets.T, 2 * np.pi), k=4)
    done = np.zeros(ncell, dtype=bool)
    sol_t = np.zeros((2, ncell), dtype=complex)
    sol_s = np.zeros((2, ncell), dtype=complex)
    for rank in range(nearest.shape[1]):
        for k, piece in enumerate(pieces):
            cand = nearest[:, rank]
            sel = np.nonzero(~done & (pid[cand] == k))[0]
            if sel.size == 0:
                continue
            P, norm = _newton(mc, piece, prm[cand[sel]].T, targets[:, sel], quads, max_iter=40)
            good = norm < 1e-10
            if good.any():
                t, s, _ = piece_eval(mc, piece, P[:, good])
                sol_t[:, sel[good]] = t
                sol_s[:, sel[good]] = s
                done[sel[good]] = True
    Z = component_volume(mc)
    rho = np.zeros(ncell)
    if done.any():
        with np.errstate(all="ignore"):
            rho[done] = branch_from_ts(mc, sol_t[:, done], sol_s[:, done], quads) / Z
    finite = np.isfinite(rho)
    rho = np.where(finite, rho, 0.0)
    area = np.outer(area1, area1)
    flagged = int((~done).sum() + (~finite).sum())
    return DensityGrid((lam, lam), rho.reshape(resolution, resolution), area, tuple(quads), Z, comp, flagged)


def density_at(mc: MCurve, component: ComponentIndex, target: Sequence[float], quads=None) -> float:
    """Normalized chart density at one chart point of a component (0 if it has no preimage)."""
    found = find_preimages(mc, target, [component], quads)
    if not found:
        return 0.0
    p = found[0]
    t, s, _ = piece_eval(mc, p.piece, np.array(p.params).reshape(mc.g, 1))
    return float(branch_from_ts(mc, t, s, quads)[0] / component_volume(mc))


# ---------------------------------------------------------------- Monte Carlo


@dataclass
class Histogram:
    counts: np.ndarray
    edges: np.ndarray  # bin edges in angle 2*atan(lambda), shared by every axis
    samples: int
    proposals: int
    envelope: float
    component: ComponentIndex

    def probabilities(self) -> np.ndarray:
        return self.counts / self.samples


def montecarlo_pushforward(
    mc: MCurve,
    component: ComponentIndex | None = None,
    samples: int = 100_000,
    seed: int = 0,
    bins: int = 32,
    quads=None,
    batch: int = 50_000,
) -> Histogram:
    """Rejection-sample the invariant measure on a component and histogram its chart image."""
    if samples < 1:
        raise ValueError("samples must be positive")
    g = mc.g
    comp = component or huisman(g)
    quads = (HUISMAN_CHART if g == 2 else default_quadruples(g)) if quads is None else quads
    pieces = component_pieces(mc, comp)
    measures = np.array([np.prod([hi - lo for lo, hi in p.box(g)]) for p in pieces])
    probs = measures / measures.sum()
    envelope = 0.0
    for p in pieces:
        _, _, w = piece_eval(mc, p, _seed_grid(p, g, 96 if g == 2 else 4096))
        envelope = max(envelope, float(np.nanmax(w * p.symmetry)))
    envelope *= 1.25
    edges = np.linspace(-np.pi, np.pi, bins + 1)
    while True:
        rng = np.random.default_rng(seed)
        accepted = []
        n_acc = 0
        proposals = 0
        overflow = None
        while n_acc < samples:
            which = rng.choice(len(pieces), size=batch, p=probs)
            u = rng.random(batch)
            for k, p in enumerate(pieces):
                sel = which == k
                m = int(sel.sum())
                if m == 0:
                    continue
                params = np.array([lo + (hi - lo) * rng.random(m) for lo, hi in p.box(g)])
                t, s, w = piece_eval(mc, p, params)
                w = w * p.symmetry
                if np.nanmax(w) > envelope:
                    overflow = float(np.nanmax(w))
                    break
                keep = u[sel] * envelope < w
                if keep.any():
                    with np.errstate(all="ignore"):
                        lam = mc.real_chart(chart_from_ts(mc, t[:, keep], s[:, keep], quads))
                    accepted.append(_angle(lam))
                    n_acc += int(keep.sum())
            if overflow is not None:
                break
            proposals += batch
        if overflow is None:
            break
        warnings.warn(f"rejection envelope {envelope:.4g} exceeded by {overflow:.4g}; retuning", RuntimeWarning)
        envelope = 1.5 * overflow
    ang = np.hstack(accepted)[:, :samples]
    ang = np.where(np.isfinite(ang), ang, np.pi)
    idx = np.clip(np.searchsorted(edges, ang, side="right") - 1, 0, bins - 1)
    counts = np.zeros((bins,) * g, dtype=np.int64)
    np.add.at(counts, tuple(idx), 1)
    return Histogram(counts, edges, samples, proposals, envelope, comp)


# ---------------------------------------------------------------- elementary transformations


def _pair_up(I) -> list[tuple[int, int]]:
    I = sorted(set(I))
    if len(I) % 2:
        raise ValueError("elementary transformations need an even index set")
    return [(I[k], I[k + 1]) for k in range(0, len(I), 2)]


def _anchor_map(p: list[ProjPoint], a: int, b: int, ref: int) -> Mobius:
    """Moebius map sending p_a to 0 and p_b to infinity (identity if they are there already)."""
    if p[a] == ProjPoint(0) and p[b] == INF:
        return Mobius.identity()
    return mobius_from_triple([p[a], p[b], p[ref]], [ProjPoint(0), INF, ProjPoint(1)])


def _cremona_pair(z: list[ProjPoint], q: list[ProjPoint], a: int, b: int) -> list[ProjPoint]:
    """Send z_a, q_a to 0 and z_b, q_b to infinity, then q_i -> z_i / q_i."""
    n = len(z)
    ref = next(i for i in range(n) if i not in (a, b))
    A = _anchor_map(z, a, b, ref)
    B = _anchor_map(q, a, b, ref)
    out = []
    for i in range(n):
        if i == a:
            out.append(ProjPoint(0))
        elif i == b:
            out.append(INF)
        else:
            zi, qi = A(z[i]), B(q[i])
            out.append(ProjPoint(zi.a * qi.b, zi.b * qi.a))
    return out


def elementary_cremona(z: Sequence, q: Sequence, I: Iterable[int]) -> tuple[ProjPoint, ...]:
    """Cremona involution of point configurations for an even set I of 1-based indices.

    For I = {a, b}: normalize z_a = q_a = 0, z_b = q_b = inf and replace q_i by z_i / q_i.
    Larger I are handled pair by pair.  The output is a configuration up to PGL2.
    """
    zs = [ProjPoint.of(x) for x in z]
    qs = [ProjPoint.of(x) for x in q]
    if len(zs) != len(qs):
        raise ValueError("z and q differ in length")
    for a, b in _pair_up(I):
        qs = _cremona_pair(zs, qs, a - 1, b - 1)
    return tuple(qs)


def elementary_action_divisor(M: MumfordTriple, curve: HyperellipticCurve, I: Iterable[int]) -> tuple[MumfordTriple, HyperellipticCurve]:
    """Bundle L - sum_{i in I} p_i + (|I|/2) h with the marked points p_i (i in I) sheet-swapped.

    On triples this adds sum (p_i - inf) to the finite divisor.
    """
    I = sorted(set(I))
    if len(I) % 2:
        raise ValueError("elementary transformations need an even index set")
    if not I:
        return M, curve
    inc = [(curve.marked[i - 1].z, curve.marked[i - 1].y, 1) for i in I]
    return jacobian_add(M, inc, curve), curve.flipped(I)


def parity_of_marked(mc: MCurve, I: Iterable[int]) -> ComponentIndex:
    out: set[int] = set()
    for i in I:
        z = complex(mc.curve.marked[i - 1].z)
        if z.imag == 0:
            out ^= {mc.oval_of(z.real)}
    return ComponentIndex(frozenset(out))
