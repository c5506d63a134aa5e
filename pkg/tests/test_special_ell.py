import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest

from conftest import one_per_family, seed_systems
from leveldelete.family_catalog import (Poly, RegimeError, energy, eta, fn_bn, make_system, norm_h, potential_V,
                                        prepotential, sample_window)
from leveldelete.krein_adler import build_modified, modified_poly, weight_sq
from leveldelete.special_ell import (A_factor, EllSystem, P_ell_n, P_ell_n_determinant, V_ell, V_ell_phi_ratio,
                                     c2_coeff, ell_weight_sq, f_b_ell, h_ell_n, intertwine_residual,
                                     make_ell_system, prepotential_w_ell, xi_ell, xi_ell_determinant)

SEEDS = seed_systems()
EXACT = seed_systems(exact=True)
FAMILIES = one_per_family()
SQRT_PI = math.sqrt(math.pi)

# exact Casoratian of the seed polynomials, divided by the route constant, in sympy
FROZEN_DISCRETE_XI = {
    ("MP a=1", 2): [Fraction(3, 8), 0, Fraction(1, 2)],
    ("MP a=1", 3): [0, Fraction(5, 12), 0, Fraction(1, 6)],
    ("CH a1=1,a2=2", 2): [Fraction(15, 56), 0, Fraction(1, 2)],
    ("CH a1=1,a2=2", 3): [0, Fraction(13, 42), 0, Fraction(1, 6)],
    ("W", 2): [Fraction(423, 64), Fraction(-5, 2), Fraction(1, 2)],
    ("W", 3): [Fraction(-4125, 256), Fraction(1163, 192), Fraction(-25, 24), Fraction(1, 6)],
}


def points(desc, count=20):
    lo, hi = sample_window(desc)
    return np.linspace(lo, hi, count + 2)[1:-1] + 0.013


class TestDeformingPolynomial:
    def test_examples(self):
        assert xi_ell(make_system("H"), 0) == Poly([1])
        assert xi_ell(make_system("H"), 2) == Poly([Fraction(1, 4), 0, Fraction(1, 2)])
        assert xi_ell(make_system("L", g=Fraction(3, 2)), 1) == Poly([-2, 1])

    def test_laguerre_first_degree_any_parameter(self):
        for g in (Fraction(1, 3), Fraction(7, 2)):
            assert xi_ell(make_system("L", g=g), 1) == Poly([-g - Fraction(1, 2), 1])

    @pytest.mark.parametrize("key", list(FROZEN_DISCRETE_XI))
    def test_discrete_frozen(self, key):
        label, ell = key
        ref = Poly([float(c) for c in FROZEN_DISCRETE_XI[key]])
        assert xi_ell(SEEDS[label], ell).allclose(ref, rtol=1e-13)

    @pytest.mark.parametrize("label", list(FAMILIES))
    def test_degree_and_routes(self, label):
        d = SEEDS[label]
        for ell in range(0, 5):
            a = xi_ell(d, ell)
            assert a.degree == ell
            assert a.allclose(xi_ell_determinant(d, ell), rtol=1e-10)

    @pytest.mark.parametrize("label", list(FAMILIES))
    def test_even_degree_has_no_zero_in_range(self, label):
        d = SEEDS[label]
        for ell in (2, 4):
            assert make_ell_system(d, ell).hermitian
            x = points(d, 200)
            vals = np.real(xi_ell(d, ell)(eta(d, x)))
            assert np.all(vals > 0) or np.all(vals < 0)

    def test_negative_degree_rejected(self):
        with pytest.raises(ValueError):
            xi_ell(make_system("H"), -1)


class TestEllSystem:
    def test_hermitian_only_for_even_degree(self):
        assert make_ell_system(make_system("H"), 2).hermitian
        assert not make_ell_system(make_system("H"), 3).hermitian

    def test_holds_deforming_polynomial(self):
        es = make_ell_system(make_system("H"), 2)
        assert isinstance(es, EllSystem) and es.xi_ell == xi_ell(es.desc, 2) and es.mu == 0


class TestPrepotentialAndPotential:
    def test_degree_zero_is_seed(self):
        d = make_system("L", g=1.5)
        x = points(d)
        assert np.allclose(prepotential_w_ell(d, 0, x), prepotential(d, x))
        mp_ = SEEDS["MP a=1"]
        z = points(mp_) + 0.1j
        assert np.allclose(V_ell(mp_, 0, z), potential_V(mp_, z))

    def test_hermite_at_origin(self):
        assert math.isclose(prepotential_w_ell(make_system("H"), 2, 0.0), math.log(4))

    def test_matches_deleted_weight(self):
        d = make_system("L", g=1.0)
        s = build_modified(d, (1, 2))
        x = points(d)
        diff = 2 * prepotential_w_ell(d, 2, x) - np.log(weight_sq(s, x))
        assert np.ptp(diff) <= 1e-12

    # the ratio form carries no explicit kappa power, so AW agreement checks it
    @pytest.mark.parametrize("label", ["MP a=1", "CH a1=1,a2=2", "W", "AW"])
    def test_potential_forms_agree(self, label):
        d = SEEDS[label]
        for ell in (1, 2, 3):
            z = points(d, 10) + 0.07j
            assert np.allclose(V_ell(d, ell, z), V_ell_phi_ratio(d, ell, z), rtol=1e-10)

    def test_second_order_coefficient(self):
        assert c2_coeff(make_system("H")) == Poly([Fraction(1, 4)])
        assert c2_coeff(make_system("L", g=1)) == Poly([0, 1])
        assert c2_coeff(make_system("J", g=1, h=1)) == Poly([1, 0, -1])
        with pytest.raises(RegimeError):
            c2_coeff(SEEDS["MP a=1"])


class TestFactorization:
    def test_hermite_example(self):
        h = make_system("H")
        assert A_factor(h, 2, 3) == 8
        assert f_b_ell(h, 2, 3) == (48, Fraction(1, 8))
        assert f_b_ell(h, 2, 3)[0] * f_b_ell(h, 2, 3)[1] == energy(h, 3)

    def test_laguerre_unchanged(self):
        d = make_system("L", g=Fraction(5, 2))
        for ell in range(4):
            for n in range(ell + 1, ell + 4):
                assert A_factor(d, ell, n) == 1
                assert f_b_ell(d, ell, n) == fn_bn(d, n)

    @pytest.mark.parametrize("label", list(FAMILIES))
    def test_degree_zero_reduces_to_seed(self, label):
        d = EXACT[label]
        for n in range(1, 6):
            ours, seed = f_b_ell(d, 0, n), fn_bn(d, n)
            assert np.allclose([complex(v) for v in ours], [complex(v) for v in seed], rtol=1e-14)


class TestModifiedPolynomials:
    @pytest.mark.parametrize("label", list(FAMILIES))
    def test_ground_level_is_one(self, label):
        d = SEEDS[label]
        for ell in range(0, 5):
            assert P_ell_n(d, ell, 0).allclose(Poly([1.0]), rtol=1e-10)

    def test_deleted_levels_vanish(self):
        h = make_system("H")
        assert P_ell_n(h, 2, 1).is_zero() and P_ell_n(h, 2, 2).is_zero()

    def test_hermite_example_proportional_to_wronskian(self):
        h = make_system("H")
        p = P_ell_n(h, 2, 3)
        w = modified_poly(build_modified(h, (1, 2)), 3)
        ratio = w.leading / p.leading
        assert p * ratio == w

    @pytest.mark.parametrize("label", list(FAMILIES))
    def test_backward_route_matches_determinant(self, label):
        d = SEEDS[label]
        for ell in (1, 2, 3, 4):
            for n in range(ell + 1, ell + 5):
                assert P_ell_n(d, ell, n).allclose(P_ell_n_determinant(d, ell, n), rtol=1e-9), (ell, n)


class TestNorms:
    def test_hermite_example(self):
        assert math.isclose(h_ell_n(make_system("H"), 2, 3), 384 * SQRT_PI, rel_tol=1e-14)

    def test_degree_zero_is_seed_norm(self):
        d = make_system("J", g=1.5, h=2.5)
        for n in range(5):
            assert math.isclose(h_ell_n(d, 0, n), norm_h(d, n), rel_tol=1e-14)

    @pytest.mark.parametrize("label,ell,n", [("H", 2, 3), ("L g=1", 2, 3), ("J g=1,h=2", 2, 4),
                                             ("MP a=1", 2, 3), ("W", 2, 4), ("AW", 4, 5)])
    def test_against_independent_quadrature(self, label, ell, n):
        d = SEEDS[label]
        p = P_ell_n(d, ell, n)
        lo, hi = d.x_range
        mp.mp.dps = 20

        def integrand(t):
            x = float(t)
            return float(ell_weight_sq(d, ell, x)) * abs(complex(p(eta(d, x)))) ** 2

        cut = (max(lo, -12.0), min(hi, 12.0)) if d.family.value in ("H", "MP", "CH", "L", "W") else (lo, hi)
        a = cut[0] + (1e-9 if cut[0] == lo else 0.0)
        b = cut[1] - (1e-9 if cut[1] == hi else 0.0)
        ref = float(mp.quad(integrand, np.linspace(a, b, 9).tolist()))
        assert math.isclose(h_ell_n(d, ell, n), ref, rel_tol=1e-8)

    def test_laguerre_example(self):
        d = make_system("L", g=Fraction(1))
        assert math.isclose(h_ell_n(d, 2, 3), 2 * 0.96931069971395408, rel_tol=1e-12)

    def test_odd_degree_rejected(self):
        with pytest.raises(RegimeError):
            h_ell_n(make_system("H"), 1, 3)

    def test_deleted_level_rejected(self):
        with pytest.raises(ValueError):
            h_ell_n(make_system("H"), 2, 1)


class TestIntertwining:
    def test_hermite_seed(self):
        assert intertwine_residual(make_system("H"), 0, 1, points(make_system("H"))) <= 1e-12

    def test_laguerre_example(self):
        d = make_system("L", g=1.0)
        assert intertwine_residual(d, 2, 3, points(d, 50)) <= 1e-8

    def test_askey_wilson_example(self):
        d = SEEDS["AW"]
        assert intertwine_residual(d, 2, 3, points(d)) <= 1e-8
