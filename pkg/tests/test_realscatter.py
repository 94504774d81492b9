from __future__ import annotations

import itertools
import math
import random

import numpy as np
import pytest

from mhvcurves.mumford import (
    HyperellipticCurve,
    chart_point,
    lax_flow,
    moduli_chart,
    mumford_from_points,
    mumford_validate,
    scattering_slopes,
)
from mhvcurves.realscatter import (
    HUISMAN_CHART,
    ComponentIndex,
    ConjugatePair,
    MCurve,
    OvalPoint,
    PlacementError,
    all_components,
    branch_from_ts,
    chart_from_ts,
    component_of_divisor,
    component_of_triple,
    component_pieces,
    elementary_action_divisor,
    elementary_cremona,
    find_preimages,
    genus1_density,
    genus2_density_grid,
    huisman,
    huisman_point,
    invariant_density,
    montecarlo_pushforward,
    ovals,
    parity_of_marked,
    piece_eval,
    special_points_table,
)
from mhvcurves.scalars import INF, ProjPoint, cross_ratio

G2_ROOTS = (-2.0, -1.0, 0.0, 1.0, 2.0)
G2_MARKED = [(-1.5, 1), (0.5, 1), (3.0, 1), (4.0, -1), (6.0, 1)]


def mc_g2() -> MCurve:
    return MCurve.build(G2_ROOTS, G2_MARKED, "A")


def mc_g1() -> MCurve:
    return MCurve.build((-1.0, 0.0, 1.0), [(-0.5, 1), (2.0, 1), (3.0, 1), (5.0, -1)], "A")


def C(*xs) -> ComponentIndex:
    return ComponentIndex.of(xs)


def test_ovals_examples():
    mc = MCurve(HyperellipticCurve((0.0, 1.0, 2.0, 3.0, 4.0)))
    assert [(o.lo, o.hi) for o in ovals(mc)] == [(0, 1), (2, 3), (4, math.inf)]
    mc1 = MCurve(HyperellipticCurve((-1.0, 0.0, 1.0)))
    assert [(o.lo, o.hi) for o in ovals(mc1)] == [(-1, 0), (1, math.inf)]
    assert len(ovals(mc_g2())) == 3 and ovals(mc_g2())[-1].bounded is False
    with pytest.raises(Exception):
        MCurve(HyperellipticCurve((0.0, 1j, -1j)))


def test_placement_checks():
    with pytest.raises(PlacementError):
        MCurve.build(G2_ROOTS, [(0.5, 1), (-1.5, 1), (3.0, 1), (4.0, -1), (6.0, 1)], "A")
    with pytest.raises(PlacementError):
        MCurve.build(G2_ROOTS, [(-1.5, 1), (0.5, 1), (3.0, 1), (4.0, -1)], "A")
    b = MCurve.build(G2_ROOTS, [(-1.5, 1), (0.5, 1), (3.0, 1), 4 + 1j], "B")
    assert b.kind == "B" and b.curve.n == 5


def test_component_of_divisor_examples():
    mc = mc_g2()
    pts = [OvalPoint(-1.5, 1), OvalPoint(0.5, 1), OvalPoint(3.0, 1)]
    assert component_of_divisor(mc, pts, 3) == huisman(2)
    assert component_of_divisor(mc, [ConjugatePair(1 + 1j)], 2) == ComponentIndex.of(())
    two_one = [OvalPoint(-1.8, 1), OvalPoint(-1.2, -1), OvalPoint(5.0, 1)]
    assert component_of_divisor(mc, two_one, 3) == C(3)
    with pytest.raises(ValueError):
        component_of_divisor(mc, pts, 2)


def test_parity_homomorphism():
    rng = random.Random(6)
    mc = mc_g2()
    xs = {1: (-2.0, -1.0), 2: (0.0, 1.0), 3: (2.0, 9.0)}
    for _ in range(50):
        d1 = [OvalPoint(rng.uniform(*xs[rng.randint(1, 3)]), 1) for _ in range(rng.randint(1, 5))]
        d2 = [OvalPoint(rng.uniform(*xs[rng.randint(1, 3)]), 1) for _ in range(rng.randint(1, 5))]
        a = component_of_divisor(mc, d1, len(d1))
        b = component_of_divisor(mc, d2, len(d2))
        assert component_of_divisor(mc, d1 + d2, len(d1) + len(d2)) == a.xor(b)


TYPE_A = {
    huisman(2): ["delta", "delta_45", "delta_34", "delta_35"],
    C(1): ["delta_1", "delta_23", "delta_24", "delta_25"],
    C(2): ["delta_2", "delta_13", "delta_14", "delta_15"],
    C(3): ["delta_3", "delta_4", "delta_5", "delta_12"],
}
TYPE_B = {
    huisman(2): ["delta", "delta_45"],
    C(1): ["delta_1", "delta_23"],
    C(2): ["delta_2", "delta_13"],
    C(3): ["delta_3", "delta_12"],
}


def _invert(table):
    out = {}
    for comp, keys in table.items():
        for k in keys:
            out[k] = comp
    return out


def test_special_points_type_a():
    table = special_points_table(mc_g2())
    assert len(table) == 16
    assert table == _invert(TYPE_A)
    assert special_points_table([1, 2, 3, 3, 3]) == table


def test_special_points_type_b():
    mc = MCurve.build(G2_ROOTS, [(-1.5, 1), (0.5, 1), (3.0, 1), 4 + 1j], "B")
    table = special_points_table(mc)
    assert len(table) == 16
    real = {k: v for k, v in table.items() if v is not None}
    assert real == _invert(TYPE_B)
    assert sum(v is None for v in table.values()) == 8


def test_special_points_relabeling():
    placement = [1, 2, 3, 3, 3]
    base = special_points_table(placement)
    for perm in itertools.permutations(range(5)):
        moved = [placement[perm[i]] for i in range(5)]
        table = special_points_table(moved)
        inv = {perm[i]: i for i in range(5)}
        for key, comp in base.items():
            if key == "delta":
                assert table["delta"] == comp
                continue
            idx = sorted(inv[int(c) - 1] + 1 for c in key.split("_")[1])
            assert table["delta_" + "".join(map(str, idx))] == comp


def test_huisman_point_examples():
    mc = MCurve(HyperellipticCurve((0.0, 1.0, 2.0, 3.0, 4.0)))
    M = huisman_point(mc, [OvalPoint(0.5, 1), OvalPoint(2.5, -1)])
    assert mumford_validate(M, mc.curve) < 1e-12
    assert component_of_triple(mc, M) == huisman(2)
    M2 = huisman_point(mc, [OvalPoint(0.5, -1), OvalPoint(2.5, 1)])
    assert M2 != M and component_of_triple(mc, M2) == huisman(2)
    with pytest.raises(PlacementError):
        huisman_point(mc, [OvalPoint(2.5, 1), OvalPoint(0.5, 1)])


def test_huisman_points_have_no_base_points():
    mc = mc_g2()
    rng = random.Random(2)
    for _ in range(50):
        pts = [OvalPoint(rng.uniform(-2, -1), rng.choice((1, -1))), OvalPoint(rng.uniform(0, 1), rng.choice((1, -1)))]
        M = huisman_point(mc, pts)
        q = scattering_slopes(M, mc.curve)
        assert len(q) == 5


def test_invariant_density_examples():
    assert abs(invariant_density([0.3], [2.0]) - 0.5) < 1e-15
    assert abs(invariant_density([0.3, 1.7], [2.0, -0.5]) - 1.4) < 1e-12
    assert invariant_density([0.3, 1.7], [0.0, 1.0]) == math.inf


def test_invariant_density_is_flow_invariant():
    mc = MCurve(HyperellipticCurve((0.0, 1.0, 2.0, 3.0, 4.0)))
    M = huisman_point(mc, [OvalPoint(0.4, 1), OvalPoint(2.6, -1)])
    h = 1e-5

    def ts(N):
        t = np.sort(np.roots([complex(c) for c in reversed(N.U.coeffs)]).real)
        return t, np.array([N.V(x) for x in t]).real

    def flowed(t, signs, c, T):
        N = mumford_from_points(mc.curve, list(t), [mc.curve.sqrt_f(x, sg) for x, sg in zip(t, signs)])
        return ts(lax_flow(N, c, T, steps=400))[0]

    t0, s0 = ts(M)
    signs = np.sign(s0)
    for c in (0.7, 3.0):
        t1, s1 = ts(lax_flow(M, c, 0.2, steps=400))
        cols = []
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            cols.append((flowed(t0 + e, signs, c, 0.2) - flowed(t0 - e, signs, c, 0.2)) / (2 * h))
        jac = abs(np.linalg.det(np.array(cols).T))
        assert abs(invariant_density(t1, s1) * jac / invariant_density(t0, s0) - 1) < 1e-6


def test_genus1_density_fit_and_mass():
    mc = mc_g1()
    for comp in (huisman(1), ComponentIndex.of(())):
        grid = genus1_density(mc, resolution=512, component=comp)
        assert abs(grid.mass() - 1) < 1e-6
        lam, rho = grid.lambdas[0], grid.rho
        ok = (rho > 0) & (np.abs(lam) < 50)
        y = 1 / rho[ok] ** 2
        A = np.vander(lam[ok], 5)
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        rel = np.linalg.norm(A @ coef - y) / np.linalg.norm(y)
        assert rel < 1e-4
        roots = np.roots(coef)
        assert np.all(np.abs(roots.imag) > 1e-6)


def test_genus1_two_preimages():
    mc = mc_g1()
    rng = np.random.default_rng(3)
    for target in rng.normal(size=10) * 2:
        found = find_preimages(mc, [target])
        assert sorted(str(p.component) for p in found) == sorted(str(c) for c in (huisman(1), ComponentIndex.of(())))
        for p in found:
            assert p.residual < 1e-8
            assert component_of_triple(mc, p.triple) == p.component


def test_round_trip_recovers_triple():
    mc = mc_g2()
    M = huisman_point(mc, [OvalPoint(-1.3, 1), OvalPoint(0.6, -1)])
    lam = chart_point(M, mc.curve, HUISMAN_CHART).real
    (p,) = find_preimages(mc, lam, [huisman(2)], HUISMAN_CHART)
    for P, Q in ((M.U, p.triple.U), (M.V, p.triple.V), (M.W, p.triple.W)):
        assert np.allclose([complex(a) for a in P.coeffs], [complex(a) for a in Q.coeffs], atol=1e-8)


def _special_chart_points(mc: MCurve) -> list[np.ndarray]:
    """Angles of the boundary points {0, 1, inf}^2 and of the image o of the marked z's."""
    o = np.array([complex(x.value()).real for x in moduli_chart([p.z for p in mc.curve.marked], 2, HUISMAN_CHART)])
    pts = [2 * np.arctan(o)]
    pts += [np.array([a, b]) for a in (0, np.pi / 2, np.pi) for b in (0, np.pi / 2, np.pi)]
    return pts


def test_no_real_ramification():
    # det of the chart map in angle coordinates against the invariant volume; on the
    # Huisman component it stays away from 0, elsewhere it vanishes only at the images
    # of contracted curves, and at most linearly in the distance to them
    mc = mc_g2()
    special = _special_chart_points(mc)
    rng = np.random.default_rng(5)
    for comp in all_components(2):
        for piece in component_pieces(mc, comp):
            params = np.array([lo + (hi - lo) * rng.random(4000) for lo, hi in piece.box(2)])
            t, s, _ = piece_eval(mc, piece, params)
            with np.errstate(all="ignore"):
                br = branch_from_ts(mc, t, s, HUISMAN_CHART)
                lam = mc.real_chart(chart_from_ts(mc, t, s, HUISMAN_CHART))
            det = np.prod(2 / (1 + lam**2), axis=0) / br
            ok = np.isfinite(det)
            assert ok.sum() > 3900
            det, phi = det[ok], 2 * np.arctan(lam[:, ok])
            if comp == huisman(2):
                assert det.min() > 1e-6
            dist = np.min([np.max(np.abs((phi - p[:, None] + np.pi) % (2 * np.pi) - np.pi), axis=0) for p in special], axis=0)
            assert np.min(det / dist) > 0.05


def test_injectivity_pairs():
    mc = mc_g2()
    rng = random.Random(7)
    comp = huisman(2)
    seen = []
    for _ in range(30):
        M = huisman_point(mc, [OvalPoint(rng.uniform(-1.95, -1.05), rng.choice((1, -1))), OvalPoint(rng.uniform(0.05, 0.95), rng.choice((1, -1)))])
        seen.append((M, chart_point(M, mc.curve, HUISMAN_CHART)))
    assert component_of_triple(mc, seen[0][0]) == comp
    for (M1, l1), (M2, l2) in itertools.combinations(seen, 2):
        assert np.max(np.abs(l1 - l2)) > 1e-8


def test_genus2_grid_small():
    mc = mc_g2()
    g = genus2_density_grid(mc, resolution=32)
    assert np.all(g.rho > 0) and g.flagged == 0
    assert abs(g.mass() - 1) < 1e-2


def test_montecarlo_determinism_and_clt():
    mc = mc_g1()
    a = montecarlo_pushforward(mc, samples=20_000, seed=11, bins=16)
    b = montecarlo_pushforward(mc, samples=20_000, seed=11, bins=16)
    assert np.array_equal(a.counts, b.counts)
    grid = genus1_density(mc, resolution=16 * 32)
    p = (grid.rho * grid.cell_area).reshape(16, 32).sum(axis=1)
    errs = {}
    for n in (20_000, 80_000):
        reps = [montecarlo_pushforward(mc, samples=n, seed=s, bins=16).probabilities() for s in range(12)]
        errs[n] = np.sqrt(np.mean((np.array(reps) - p) ** 2))
    ratio = errs[20_000] / errs[80_000]
    assert 2 * 0.8 < ratio < 2 * 1.2


def test_montecarlo_matches_genus1_density_chi2():
    from scipy.stats import chi2

    mc = mc_g1()
    bins = 32
    h = montecarlo_pushforward(mc, samples=100_000, seed=3, bins=bins)
    grid = genus1_density(mc, resolution=bins * 16)
    p = (grid.rho * grid.cell_area).reshape(bins, 16).sum(axis=1)
    exp = p / p.sum() * h.samples
    keep = exp > 5
    stat = float(np.sum((h.counts[keep] - exp[keep]) ** 2 / exp[keep]))
    assert chi2.sf(stat, keep.sum() - 1) > 0.01


def test_cremona_example_and_involution():
    out = elementary_cremona([0, 2, 5, INF], [0, 3, 7, INF], [1, 4])
    from fractions import Fraction

    assert out == (ProjPoint(0), ProjPoint(Fraction(2, 3)), ProjPoint(Fraction(5, 7)), INF)
    q = [ProjPoint(x) for x in (0.3, 1.0, 2.5, -1.0, 4.0)]
    assert elementary_cremona([1, 2, 3, 4, 5], q, []) == tuple(q)
    rng = random.Random(1)
    for _ in range(20):
        z = [complex(rng.uniform(-3, 3), rng.uniform(-3, 3)) for _ in range(6)]
        q = [complex(rng.uniform(-3, 3), rng.uniform(-3, 3)) for _ in range(6)]
        I = sorted(rng.sample(range(1, 7), 2 * rng.randint(1, 3)))
        once = elementary_cremona(z, q, I)
        twice = elementary_cremona(z, once, I)
        for quad in itertools.combinations(range(6), 4):
            a = cross_ratio(*(ProjPoint.of(q[i]) for i in quad))
            b = cross_ratio(*(twice[i] for i in quad))
            assert a.close(b, 1e-10)


def test_action_parity_and_round_trip():
    mc = mc_g2()
    M = huisman_point(mc, [OvalPoint(-1.3, 1), OvalPoint(0.6, -1)])
    for I in ((4, 5), (1, 2), (2, 5), (1, 2, 3, 4)):
        N, flipped = elementary_action_divisor(M, mc.curve, I)
        mc2 = MCurve(flipped, check_placement=False)
        assert component_of_triple(mc2, N) == component_of_triple(mc, M).xor(parity_of_marked(mc, I))
        back, again = elementary_action_divisor(N, flipped, I)
        assert again == mc.curve
        for P, Q in ((M.U, back.U), (M.V, back.V), (M.W, back.W)):
            assert np.allclose([complex(a) for a in P.coeffs], [complex(a) for a in Q.coeffs], atol=1e-8)
    assert parity_of_marked(mc, (4, 5)) == ComponentIndex.of(())
    b = MCurve.build(G2_ROOTS, [(-1.5, 1), (0.5, 1), (3.0, 1), 4 + 1j], "B")
    assert parity_of_marked(b, (4, 5)) == ComponentIndex.of(())


def _random_curve_sample(rng: random.Random):
    base = HyperellipticCurve(G2_ROOTS)
    z = [complex(rng.uniform(-4, 4), rng.uniform(-4, 4)) for _ in range(5)]
    curve = base.with_marked([base.point(x, rng.choice((1, -1))) for x in z])
    t = [complex(rng.uniform(-3, 3), rng.uniform(-3, 3)) for _ in range(2)]
    M = mumford_from_points(curve, t, [curve.sqrt_f(x) for x in t])
    return curve, z, M


def test_action_matches_cremona():
    rng = random.Random(21)
    for _ in range(40):
        curve, z, M = _random_curve_sample(rng)
        I = sorted(rng.sample(range(1, 6), 2 * rng.randint(1, 2)))
        q = scattering_slopes(M, curve)
        N, flipped = elementary_action_divisor(M, curve, I)
        lhs = np.array([complex(x.value()) for x in moduli_chart(elementary_cremona(z, q, I), 2)])
        rhs = chart_point(N, flipped)
        assert np.max(np.abs(lhs - rhs) / np.maximum(1, np.abs(rhs))) < 1e-6
