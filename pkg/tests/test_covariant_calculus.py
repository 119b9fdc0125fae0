"""Sharp-product calculus: node frames, composition, inversion, brackets."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toeplitz_forge import constants, covariant_calculus as cc, geometry
from toeplitz_forge.series import PowerSeries
from toeplitz_forge.stationary_phase import wick_expand

PLANE = geometry.BargmannModel()
SPHERE = geometry.SphereModel()


def masked(block, deg):
    """Slice a jet block to total degree <= deg (quotient-ring comparison)."""
    b = np.array(block[: deg + 1, : deg + 1], dtype=complex)
    grid = np.add.outer(np.arange(deg + 1), np.arange(deg + 1))
    b[grid > deg] = 0.0
    return b


# -- node grids and frames ----------------------------------------------------


def test_node_grids():
    nodes = cc.node_grid(SPHERE)
    assert len(nodes) == 12
    theta = 2.0 * np.arctan(np.abs(nodes))
    want = (np.arange(12) + 0.5) * np.pi / 12
    assert np.allclose(theta, want, atol=1e-14)
    assert np.all(np.diff(np.abs(nodes)) > 0)
    plane_nodes = cc.node_grid(PLANE)
    assert len(plane_nodes) == 1 and plane_nodes[0] == 0


@given(
    st.complex_numbers(max_magnitude=0.3, allow_nan=False, allow_infinity=False),
    st.integers(min_value=0, max_value=11),
)
@settings(max_examples=60, deadline=None)
def test_frame_roundtrip(a, j):
    node = cc.node_grid(SPHERE)[j]
    x = cc.frame_to_chart(SPHERE, node, a)
    back = cc.chart_to_frame(SPHERE, node, x)
    assert abs(complex(back) - a) <= 1e-12 * (1 + abs(a))


def test_frame_bar_is_conjugate_twin():
    # on the real locus zbar = conj(x) the two offset maps must agree
    node = cc.node_grid(SPHERE)[9]
    x = 0.4 + 0.2j
    a = cc.chart_to_frame(SPHERE, node, x)
    bbar = cc.chart_to_frame_bar(SPHERE, node, np.conj(x))
    assert abs(np.conj(complex(a)) - complex(bbar)) <= 1e-14


def test_phase_cocycle_invariance():
    # Phi1 built from frame offsets at a node equals Phi1 at the global
    # points: the potential cocycle telescopes out of the four-point sum
    node = cc.node_grid(SPHERE)[8]
    rng = np.random.default_rng(5)
    for _ in range(5):
        a, b, c, d = (complex(*rng.uniform(-0.1, 0.1, 2)) for _ in range(4))
        x = cc.frame_to_chart(SPHERE, node, a)
        y = cc.frame_to_chart(SPHERE, node, b)
        # anti-offsets map through the inverse of chart_to_frame_bar
        wbar = (c + np.conj(node)) / (1.0 - node * c)
        zbar = (d + np.conj(node)) / (1.0 - node * d)
        got = SPHERE.phase_phi1(x, y, wbar, zbar)
        want = SPHERE.phase_phi1(a, b, c, d)
        assert abs(complex(got) - complex(want)) <= 1e-12


# -- builders -----------------------------------------------------------------


def test_euclid_symbol_node_values():
    x3 = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 1): 1.0}])
    want = np.array([geometry.SphereModel.euclid_coords(z)[2] for z in x3.nodes])
    assert np.max(np.abs(x3.node_values(0) - want)) == 0.0
    assert x3.rotation_invariant
    x2 = cc.symbol_from_euclid_poly(SPHERE, [{(0, 1, 0): 1.0}])
    assert not x2.rotation_invariant
    assert np.max(np.abs(x2.node_values(0))) <= 1e-15  # x2 = 0 on the meridian


def test_euclid_jets_match_exact_evaluator():
    sym = cc.symbol_from_euclid_poly(
        SPHERE, [{(1, 0, 1): 0.5, (0, 0, 2): 1.0}, {(0, 1, 0): 1.0j}]
    )
    rng = np.random.default_rng(2)
    for i in (0, 5, 11):
        node = sym.nodes[i]
        for _ in range(3):
            a = complex(*rng.uniform(-0.06, 0.06, 2))
            bb = complex(*rng.uniform(-0.06, 0.06, 2))
            x = cc.frame_to_chart(SPHERE, node, a)
            zbar = (bb + np.conj(node)) / (1.0 - node * bb)
            for k in range(2):
                jet = complex(sym.jet_eval(i, k, a, bb))
                exact = complex(sym.global_eval(k, x, zbar))
                assert abs(jet - exact) <= 1e-9


def test_pullback_jets_stay_tame_at_pole_nodes():
    # normal frames keep unit convergence radius even where the affine
    # chart coordinate is ~15; coefficients must stay O(1)
    x3 = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 1): 1.0}])
    top = np.max(np.abs(np.asarray(x3.jets[11].coeffs[0].coeffs)))
    assert top <= 2.5


def test_overlap_defect_small():
    x3 = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 1): 1.0}])
    assert cc.overlap_defect(x3) < 1e-9
    one = cc.unit_covariant(PLANE)
    assert cc.overlap_defect(one) == 0.0


def test_plane_poly_degree_guard():
    with pytest.raises(ValueError):
        cc.symbol_from_plane_poly(PLANE, [{(5, 5): 1.0}], order=6)


def test_rotation_invariant_evaluation():
    x3 = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 2): 1.0}])
    # invariance lets the locator derotate: values off the meridian match
    x = 0.3 * np.exp(1.1j)
    zbar = np.conj(0.32 * np.exp(1.05j))
    idx, a, bb = cc.frame_pair_offsets(x3, x, zbar)
    jet = complex(x3.jet_eval(int(idx), 0, a, bb))
    exact = complex(x3.global_eval(0, x, zbar))
    assert abs(jet - exact) <= 1e-10


# -- sharp product: flat-model oracles ---------------------------------------


def test_bargmann_wbar_sharp_y():
    f = cc.symbol_from_plane_poly(PLANE, [{(0, 1): 1.0}])
    g = cc.symbol_from_plane_poly(PLANE, [{(1, 0): 1.0}])
    p = cc.sharp_product(f, g, K=3)
    b0 = np.asarray(p.jets[0].coeffs[0].coeffs)
    assert abs(b0[1, 1] - 1.0) <= 1e-12
    b0[1, 1] = 0.0
    assert np.max(np.abs(b0)) <= 1e-12
    b1 = np.asarray(p.jets[0].coeffs[1].coeffs)
    assert abs(b1[0, 0] - 1.0) <= 1e-12
    b1[0, 0] = 0.0
    assert np.max(np.abs(b1)) <= 1e-12
    for k in (2, 3):
        assert np.max(np.abs(np.asarray(p.jets[0].coeffs[k].coeffs))) <= 1e-12


def test_bargmann_x_sharp_zbar_has_no_corrections():
    f = cc.symbol_from_plane_poly(PLANE, [{(1, 0): 1.0}])
    g = cc.symbol_from_plane_poly(PLANE, [{(0, 1): 1.0}])
    p = cc.sharp_product(f, g, K=3)
    b0 = np.asarray(p.jets[0].coeffs[0].coeffs)
    assert abs(b0[1, 1] - 1.0) <= 1e-12
    for k in (1, 2, 3):
        assert np.max(np.abs(np.asarray(p.jets[0].coeffs[k].coeffs))) <= 1e-12


def test_bargmann_unit_sharp_unit():
    one = cc.unit_covariant(PLANE)
    p = cc.sharp_product(one, one, K=4)
    vals = [complex(p.jets[0].coeffs[k].constant_term()) for k in range(5)]
    assert abs(vals[0] - 1.0) <= 1e-14
    assert max(abs(v) for v in vals[1:]) <= 1e-14


def test_bargmann_sharp_matches_closed_wick_form():
    # independent route: (f#g)_k = sum (1/n!) dzbar^n f_l dx^n g_j
    rng = np.random.default_rng(7)

    def rand_poly(deg, order):
        terms = {}
        for p in range(deg + 1):
            for q in range(deg + 1 - p):
                terms[(p, q)] = complex(rng.standard_normal(), rng.standard_normal())
        return cc.symbol_from_plane_poly(PLANE, [terms], order=order)

    for _ in range(3):
        f = rand_poly(4, 8)
        g = rand_poly(4, 8)
        engine = cc.sharp_product(f, g, K=6)
        closed = cc.bargmann_wick_product(f, g, K=6)
        for k in range(7):
            d = np.asarray(engine.jets[0].coeffs[k].coeffs) - np.asarray(
                closed.jets[0].coeffs[k].coeffs
            )
            assert np.max(np.abs(d)) < 1e-10


def test_closed_wick_rejects_sphere():
    x3 = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 1): 1.0}])
    with pytest.raises(ValueError):
        cc.bargmann_wick_product(x3, x3, K=2)


# -- sharp product: sphere ----------------------------------------------------


def test_sphere_unit_sharp_unit_alternating():
    # T(1)T(1) = (N/(N+1)) T(1): coefficients (-1)^k, constant across the
    # sphere (the strong engine invariant: rhoJ diagonal blocks are scalar)
    one = cc.unit_covariant(SPHERE, order=6)
    p = cc.sharp_product(one, one, K=3)
    for i in range(12):
        for k in range(4):
            block = np.array(p.jets[i].coeffs[k].coeffs, dtype=complex)
            block[0, 0] -= (-1.0) ** k
            assert np.max(np.abs(block)) < 1e-10


def test_sharp_preserves_rotation_invariance():
    f = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 1): 1.0}], order=6)
    g = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 2): 1.0}], order=6)
    assert cc.sharp_product(f, g, K=2).rotation_invariant
    h = cc.symbol_from_euclid_poly(SPHERE, [{(1, 0, 0): 1.0}], order=6)
    assert not cc.sharp_product(f, h, K=2).rotation_invariant


def test_sharp_zeroth_coefficient_is_pointwise_product():
    f = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 1): 1.0, (0, 0, 0): 0.2}], order=6)
    g = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 2): 0.7}], order=6)
    p = cc.sharp_product(f, g, K=2)
    for i in (0, 4, 10):
        want = complex(f.jets[i].coeffs[0].constant_term()) * complex(
            g.jets[i].coeffs[0].constant_term()
        )
        assert abs(complex(p.jets[i].coeffs[0].constant_term()) - want) < 1e-12


def test_dual_route_against_scalar_wick():
    # the family transport and the scalar moment contraction are
    # independent implementations of the same expansion; at a node's base
    # point they must agree to float noise
    cases = [
        (
            SPHERE,
            cc.symbol_from_euclid_poly(
                SPHERE, [{(0, 0, 0): 0.7, (0, 0, 1): 0.4}, {(0, 0, 2): 0.2}], order=8
            ),
            cc.symbol_from_euclid_poly(
                SPHERE, [{(0, 0, 1): 1.0, (0, 0, 0): -0.1}], order=8
            ),
            5,
        ),
        (
            PLANE,
            cc.symbol_from_plane_poly(
                PLANE, [{(0, 0): 1.0, (1, 1): 0.5, (2, 0): 0.3j}], order=8
            ),
            cc.symbol_from_plane_poly(PLANE, [{(1, 0): 1.0, (0, 2): -0.25}], order=8),
            0,
        ),
    ]
    K = 3
    for model, f, g, node in cases:
        prod = cc.sharp_product(f, g, K)
        order = 2 * K + 2
        phase2 = PowerSeries(
            np.ascontiguousarray(model.phase_phi1_series(0.0, 0.0, order).coeffs[:, :, 0, 0]),
            order,
        )
        rho2 = PowerSeries(
            np.ascontiguousarray(model.density_rho_series(0.0, 0.0, order).coeffs[:, :, 0, 0]),
            order,
        )
        fj = cc._jet_list(f, node, K)
        gj = cc._jet_list(g, node, K)
        for k in range(K + 1):
            acc = 0j
            for n in range(k + 1):
                for l in range(k - n + 1):
                    j = k - n - l
                    fl = PowerSeries.zero(2, order)
                    m = min(order, fj[l].order)
                    fl.coeffs[0, : m + 1] = np.asarray(fj[l].coeffs)[0, : m + 1]
                    gl = PowerSeries.zero(2, order)
                    gl.coeffs[: m + 1, 0] = np.asarray(gj[j].coeffs)[: m + 1, 0]
                    amp = fl * gl * rho2
                    acc += wick_expand(phase2, amp, n).coeffs[n]
            got = complex(prod.jets[node].coeffs[k].constant_term())
            assert abs(got - acc) < 1e-10


def test_associativity_both_geometries():
    # outputs at parameter degree p consume operand jet degrees <= p + n,
    # so a double product is exact only through degree order - K; compare
    # there
    rng = np.random.default_rng(11)
    for model, mk in ((PLANE, cc.symbol_from_plane_poly), (SPHERE, cc.symbol_from_euclid_poly)):
        syms = []
        for _ in range(3):
            if model.compact:
                terms = {
                    (0, 0, 0): complex(rng.standard_normal()),
                    (0, 0, 1): complex(rng.standard_normal()) * 0.5,
                    (0, 0, 2): complex(rng.standard_normal()) * 0.2,
                }
            else:
                terms = {
                    (0, 0): complex(rng.standard_normal()),
                    (1, 1): complex(rng.standard_normal()) * 0.5,
                    (2, 1): complex(rng.standard_normal()) * 0.2,
                }
            syms.append(mk(model, [terms], order=6))
        f, g, h = syms
        K, deg = 2, 2
        left = cc.sharp_product(cc.sharp_product(f, g, K), h, K)
        right = cc.sharp_product(f, cc.sharp_product(g, h, K), K)
        for i in range(len(f.nodes)):
            for k in range(K + 1):
                d = masked(left.jets[i].coeffs[k].coeffs, deg) - masked(
                    right.jets[i].coeffs[k].coeffs, deg
                )
                assert np.max(np.abs(d)) < 1e-8


def test_bergman_symbol_is_two_sided_unit():
    for model, mk in ((SPHERE, cc.symbol_from_euclid_poly), (PLANE, cc.symbol_from_plane_poly)):
        key = (0, 0, 1) if model.compact else (1, 1)
        ckey = (0, 0, 0) if model.compact else (0, 0)
        f = mk(model, [{key: 1.0, ckey: 0.5}], order=6)
        a = cc.bergman_symbol(model, K=2, order=6)
        K, deg = 2, 4
        for prod in (cc.sharp_product(a, f, K), cc.sharp_product(f, a, K)):
            for i in range(len(f.nodes)):
                for k in range(K + 1):
                    want = masked(cc._jet_list(f, i, K)[k].coeffs, deg)
                    got = masked(prod.jets[i].coeffs[k].coeffs, deg)
                    assert np.max(np.abs(got - want)) < 1e-10


def test_geometry_mismatch_raises():
    f = cc.unit_covariant(PLANE)
    g = cc.unit_covariant(SPHERE)
    with pytest.raises(ValueError, match="geometry mismatch"):
        cc.sharp_product(f, g, K=1)


def test_pair_cap_guard():
    one = cc.unit_covariant(SPHERE, order=6)
    with pytest.raises(ValueError, match="pair cap"):
        cc.sharp_product(one, one, K=3, pair_cap=6)


# -- bergman symbol -----------------------------------------------------------


def test_bergman_sphere_coefficients():
    a = cc.bergman_symbol(SPHERE, K=4, order=6)
    want = [1.0, 1.0, 0.0, 0.0, 0.0]
    for i in range(12):
        for k in range(5):
            block = np.array(a.jets[i].coeffs[k].coeffs, dtype=complex)
            block[0, 0] -= want[k]
            assert np.max(np.abs(block)) < 1e-10
    assert a.rotation_invariant
    assert a.global_eval is not None


def test_bergman_plane_coefficients():
    a = cc.bergman_symbol(PLANE, K=4, order=6)
    assert abs(complex(a.jets[0].coeffs[0].constant_term()) - 1.0) < 1e-14
    for k in range(1, 5):
        assert np.max(np.abs(np.asarray(a.jets[0].coeffs[k].coeffs))) < 1e-12


def test_bergman_sphere_summation_at_N3():
    # N (1 + 1/N) = N + 1: the exact reproducing-kernel diagonal S_3 = 4
    a = cc.bergman_symbol(SPHERE, K=4, order=6)
    N = 3
    total = N * sum(
        complex(a.jets[0].coeffs[k].constant_term()) * N ** (-k) for k in range(5)
    )
    assert abs(total - 4.0) < 1e-12


def test_bergman_uniqueness_via_second_symbol():
    # solve_sharp(f, f) recovers the same unit for any invertible f
    a = cc.bergman_symbol(SPHERE, K=3, order=6)
    f = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 0): 1.0, (0, 0, 1): 0.3}], order=6)
    g = cc.solve_sharp(f, f, K=3)
    for i in range(12):
        for k in range(4):
            d = np.asarray(g.jets[i].coeffs[k].coeffs) - np.asarray(
                a.jets[i].coeffs[k].coeffs
            )
            assert np.max(np.abs(d)) < 1e-9


# -- solve and inverse --------------------------------------------------------


def test_solve_round_trip_recovers_factor():
    f = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 0): 1.0, (0, 0, 1): 0.3}], order=6)
    g0 = cc.symbol_from_euclid_poly(
        SPHERE, [{(0, 0, 0): 1.0, (0, 0, 1): -0.2}, {(0, 0, 2): 0.1}], order=6
    )
    h = cc.sharp_product(f, g0, K=3)
    g = cc.solve_sharp(f, h, K=3)
    # k <= 1 coefficients are fully represented in g0's stored jets
    for i in range(12):
        for k in range(2):
            d = np.asarray(g.jets[i].coeffs[k].coeffs) - np.asarray(
                cc._jet_list(g0, i, 3)[k].coeffs
            )
            assert np.max(np.abs(d)) < 1e-10


def test_solve_trivial_scalars():
    f = cc.symbol_from_plane_poly(PLANE, [{(0, 0): 2.0}])
    g = cc.solve_sharp(f, f, K=3)
    vals = [complex(g.jets[0].coeffs[k].constant_term()) for k in range(4)]
    assert abs(vals[0] - 1.0) < 1e-14 and max(abs(v) for v in vals[1:]) < 1e-14


def test_sharp_inverse_of_bergman_is_bergman():
    a = cc.bergman_symbol(SPHERE, K=3, order=6)
    inv = cc.sharp_inverse(a, K=3)
    for k in range(4):
        d = np.asarray(inv.jets[0].coeffs[k].coeffs) - np.asarray(a.jets[0].coeffs[k].coeffs)
        assert np.max(np.abs(d)) < 1e-10


def test_sharp_inverse_plane_constant():
    f = cc.symbol_from_plane_poly(PLANE, [{(0, 0): 2.0}])
    inv = cc.sharp_inverse(f, K=3)
    vals = [complex(inv.jets[0].coeffs[k].constant_term()) for k in range(4)]
    assert abs(vals[0] - 0.5) < 1e-14 and max(abs(v) for v in vals[1:]) < 1e-14


def test_sharp_inverse_perturbative_consistency():
    # f = a + eps b: f^{-1} = a - eps (a#b#a-ish) + O(eps^2); the finite
    # difference (inv(eps) - a)/eps must be eps-stable to first order
    b = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 1): 1.0}], order=6)
    a = cc.bergman_symbol(SPHERE, K=2, order=6)

    def inv_at(eps):
        terms = [{(0, 0, 0): 1.0, (0, 0, 1): eps}, {(0, 0, 0): 1.0}]
        f = cc.symbol_from_euclid_poly(SPHERE, terms, order=6)
        return cc.sharp_inverse(f, K=2)

    slopes = []
    for eps in (1e-3, 1e-4):
        inv = inv_at(eps)
        d = (np.asarray(inv.jets[3].coeffs[0].coeffs) - np.asarray(a.jets[3].coeffs[0].coeffs)) / eps
        slopes.append(d)
    assert np.max(np.abs(slopes[0] - slopes[1])) < 1e-2


def test_sharp_inverse_vanishing_leading_term():
    f = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 0): 0.0}], order=6)
    with pytest.raises(ArithmeticError):
        cc.sharp_inverse(f, K=1)


def test_sharp_inverse_report_rows():
    f = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 0): 1.0, (0, 0, 1): 0.2}], order=6)
    rep = cc.sharp_inverse_report(f, K=2)
    assert len(rep.rows) == 3
    assert all(len(row) == 6 for row in rep.rows)
    assert rep.max_ratio == max(row[5] for row in rep.rows)
    assert all(np.isfinite(row[5]) for row in rep.rows)


# -- contravariant bracket ----------------------------------------------------


def test_contravariant_of_one_is_bergman():
    one = cc.unit_covariant(SPHERE, order=6)
    t = cc.contravariant_to_covariant(one, K=3)
    a = cc.bergman_symbol(SPHERE, K=3, order=6)
    for i in range(12):
        for k in range(4):
            d = np.asarray(t.jets[i].coeffs[k].coeffs) - np.asarray(a.jets[i].coeffs[k].coeffs)
            assert np.max(np.abs(d)) < 1e-10


def test_contravariant_x3_leading_jet_is_x3():
    x3 = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 1): 1.0}], order=6)
    t = cc.contravariant_to_covariant(x3, K=2)
    for i in range(12):
        d = masked(t.jets[i].coeffs[0].coeffs, 6) - masked(x3.jets[i].coeffs[0].coeffs, 6)
        assert np.max(np.abs(d)) < 1e-12


def test_contravariant_x3_full_expansion():
    # exact finite-rank check: the contravariant matrix of x3 is
    # diag (N-2j)/(N+2) while the covariant matrix of x3 is (N-2j)/(N+1),
    # so the transform multiplies x3 by (N+1)/(N+2) = 1 - 1/N + 2/N^2 - ...
    x3 = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 1): 1.0}], order=6)
    t = cc.contravariant_to_covariant(x3, K=3)
    gamma = [1.0, -1.0, 2.0, -4.0]
    base = x3.node_values(0)
    for k in range(4):
        assert np.max(np.abs(t.node_values(k) - gamma[k] * base)) < 1e-9


def test_contravariant_plane_abs_x_squared():
    f = cc.symbol_from_plane_poly(PLANE, [{(1, 1): 1.0}], order=6)
    t = cc.contravariant_to_covariant(f, K=3)
    b0 = np.asarray(t.jets[0].coeffs[0].coeffs)
    assert abs(b0[1, 1] - 1.0) < 1e-12
    b1 = np.asarray(t.jets[0].coeffs[1].coeffs)
    assert abs(b1[0, 0] - 1.0) < 1e-12
    for k in (2, 3):
        assert np.max(np.abs(np.asarray(t.jets[0].coeffs[k].coeffs))) < 1e-12


# -- degree invariance (the bracket sees only low jets) -----------------------


def test_wick_degree_check_both_geometries():
    f = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 0): 1.0, (0, 0, 1): 0.4}], order=6)
    g = cc.symbol_from_euclid_poly(SPHERE, [{(0, 0, 1): 1.0}, {(0, 0, 2): -0.3}], order=6)
    for k in range(4):
        assert cc.wick_degree_check(f, g, k, basepoint=4)
    fp = cc.symbol_from_plane_poly(PLANE, [{(0, 0): 1.0, (1, 1): 0.5}], order=6)
    gp = cc.symbol_from_plane_poly(PLANE, [{(2, 1): 1.0}], order=6)
    for k in range(4):
        assert cc.wick_degree_check(fp, gp, k)


def test_wick_degree_check_order_guard():
    f = cc.unit_covariant(SPHERE, order=4)
    with pytest.raises(ValueError):
        cc.wick_degree_check(f, f, k=4)


# -- normalized wrapper -------------------------------------------------------


def test_normalized_unit_is_unit():
    # convention: weighted kernels N^d Psi a(N); unit times unit gives unit
    one = cc.unit_covariant(SPHERE, order=6)
    p = cc.normalized_sharp(one, one, K=3)
    for i in range(12):
        for k in range(4):
            block = np.array(p.jets[i].coeffs[k].coeffs, dtype=complex)
            block[0, 0] -= 1.0 if k == 0 else 0.0
            assert np.max(np.abs(block)) < 1e-10


# -- class stability ----------------------------------------------------------


def test_class_stability_frozen_constant():
    rng = np.random.default_rng(20240502)
    grids = [(1.0, 3.0, 2), (1.0, 3.0, 4), (1.3, 6.6, 3)]

    def rand_symbol():
        terms = []
        for _ in range(3):
            tk = {}
            for e3 in range(3):
                if rng.uniform() < 0.7:
                    tk[(0, 0, e3)] = complex(rng.uniform(-1.0, 1.0))
            terms.append(tk or {(0, 0, 0): 0.0})
        return cc.symbol_from_euclid_poly(SPHERE, terms, order=6)

    checked = 0
    for _ in range(6):
        f, g = rand_symbol(), rand_symbol()
        if f.norm_estimate() < 1e-6 or g.norm_estimate() < 1e-6:
            continue
        for (r, R, m) in grids:
            res = cc.class_stability_check(f, g, K=2, r=r, R=R, m=m)
            assert res["ratio"] <= constants.SHARP_CLASS_C
            assert res["holds"]
            checked += 1
    assert checked >= 9


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
