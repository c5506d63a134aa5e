import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from leveldelete.determinants import (NotPolynomialError, bareiss_det, casoratian, casoratian_nodes,
                                      casoratian_scaled, extract_polynomial, polynomial_degree_bound,
                                      wronskian_in_x, wronskian_poly)
from leveldelete.family_catalog import (DomainError, Poly, eta, ground_state, leading_coeff, make_system,
                                        poly_coeffs, varphi_ell)

H1, H2, H3 = (poly_coeffs(make_system("H"), n) for n in (1, 2, 3))


def _to_fraction(c):
    return Fraction(int(c.p), int(c.q))


class TestBareiss:
    def test_empty_is_one(self):
        assert bareiss_det([]) == 1

    @pytest.mark.parametrize("size", [1, 2, 3, 4, 5])
    def test_against_sympy(self, size):
        rng = random.Random(size)
        for _ in range(20):
            rows = [[Fraction(rng.randint(-6, 6), rng.randint(1, 4)) for _ in range(size)] for _ in range(size)]
            ref = sp.Matrix([[sp.Rational(v.numerator, v.denominator) for v in r] for r in rows]).det()
            assert bareiss_det(rows) == _to_fraction(ref)

    def test_zero_pivot_requires_swap(self):
        assert bareiss_det([[0, 1], [1, 0]]) == -1
        assert bareiss_det([[0, 0], [1, 2]]) == 0

    def test_polynomial_entries(self):
        e = Poly.eta()
        assert bareiss_det([[e, Poly([1])], [Poly([1]), e]]) == e * e - Poly([1])


class TestWronskian:
    def test_examples(self):
        assert wronskian_poly([]) == Poly([1])
        assert wronskian_poly([H1, H2]) == Poly([4, 0, 8])
        assert wronskian_poly([H2, H2]).is_zero()

    def test_three_hermite(self):
        z = sp.Symbol("z")
        ref = sp.wronskian([sp.hermite(1, z), sp.hermite(2, z), sp.hermite(3, z)], z)
        coeffs = sp.Poly(sp.expand(ref), z).all_coeffs()[::-1]
        assert wronskian_poly([H1, H2, H3]) == Poly([_to_fraction(c) for c in coeffs])

    def test_permutation_changes_sign_only(self):
        polys = [H1, H2, H3]
        base = wronskian_poly(polys)
        for perm in itertools.permutations(range(3)):
            parity = sum(1 for i, j in itertools.combinations(perm, 2) if i > j) % 2
            assert wronskian_poly([polys[k] for k in perm]) == base * (-1) ** parity

    def test_float_route_matches_exact(self):
        polys = [poly_coeffs(make_system("L", g=Fraction(3, 2)), n) for n in (1, 2, 4)]
        exact = wronskian_poly(polys).numeric()
        approx = wronskian_poly([p.to_float() for p in polys]).numeric()
        assert np.allclose(approx, exact, rtol=1e-10, atol=1e-12 * np.max(np.abs(exact)))

    def test_in_x_examples(self):
        h = make_system("H")
        assert wronskian_in_x(h, [H1, H2], 1.0) == 12
        assert wronskian_in_x(make_system("L", g=1), [], 0.7) == 1
        j = make_system("J", g=Fraction(1), h=Fraction(2))
        p1 = poly_coeffs(j, 1)
        assert np.isclose(wronskian_in_x(j, [p1], 0.4), float(p1(math.cos(0.8))))

    def test_in_x_chain_rule(self):
        lag = make_system("L", g=Fraction(1))
        ps = [poly_coeffs(lag, n) for n in (1, 2)]
        x = 1.3
        f = [lambda t, p=p: p.to_float()(t * t) for p in ps]
        dx = 1e-5
        d = [(fn(x + dx) - fn(x - dx)) / (2 * dx) for fn in f]
        direct = f[0](x) * d[1] - d[0] * f[1](x)
        assert np.isclose(wronskian_in_x(lag, ps, x), direct, rtol=1e-8)


class TestCasoratian:
    def test_examples(self):
        assert casoratian([], 0.4, 1.0) == 1
        assert casoratian([lambda z: z**2], 0.4, 3.0) == 9
        g0, x = 0.3, 0.7
        val = casoratian([lambda z: z, lambda z: z**2], g0, x)
        assert np.isclose(val, g0 * (x * x + g0 * g0 / 4), rtol=1e-14)

    def test_nodes(self):
        nodes = casoratian_nodes(3, 2.0, 0.5)
        assert np.allclose(nodes, [0.5 + 2j, 0.5, 0.5 - 2j])

    def test_vectorised(self):
        xs = np.array([0.1, 0.5 + 0.2j, -1.0])
        fs = [lambda z: z, lambda z: np.exp(z)]
        assert np.allclose(casoratian(fs, 0.7, xs), [casoratian(fs, 0.7, x) for x in xs])

    def test_conjugation(self):
        fs = [H1.to_float(), H2.to_float(), lambda z: np.exp(0.3 * z)]
        fs_star = [lambda z, f=f: np.conj(f(np.conj(z))) for f in fs]
        for x in (0.4 + 0.3j, -1.1 + 0.05j):
            assert np.isclose(np.conj(casoratian(fs, 0.8, np.conj(x))), casoratian(fs_star, 0.8, x))

    def test_permutation_changes_sign_only(self):
        fs = [lambda z: z + 1, lambda z: z**3, lambda z: np.cos(z)]
        base = casoratian(fs, 0.6, 0.3 + 0.1j)
        swapped = casoratian([fs[1], fs[0], fs[2]], 0.6, 0.3 + 0.1j)
        assert np.isclose(swapped, -base)

    def test_non_finite_value_names_node(self):
        with np.errstate(all="ignore"), pytest.raises(DomainError, match="non-finite"):
            casoratian([lambda z: 1 / (z - 0.5j)], 1.0, 0.5j)


class TestScaledCasoratian:
    def test_examples(self):
        val = casoratian_scaled([Poly([0, 1]), Poly([0, 0, 1])], 1e-3, 2.0)
        assert np.isclose(val, 4 + 2.5e-7, rtol=1e-14)
        assert np.isclose(casoratian_scaled([Poly([1]), Poly([0, 1])], 0.37, 1.2), 1.0)
        f = [lambda z: z**2]
        assert casoratian_scaled(f, 0.5, 3.0) == casoratian(f, 0.5, 3.0)

    def test_callable_and_polynomial_routes_agree(self):
        ps = [Poly([1.0, 2.0, -1.0]), Poly([0.5, 0.0, 0.0, 1.0])]
        x = 0.3 + 0.2j
        assert np.isclose(casoratian_scaled(ps, 0.5, x), casoratian_scaled([lambda z, p=p: p(z) for p in ps], 0.5, x))

    def test_rejects_zero_shift(self):
        with pytest.raises(ValueError):
            casoratian_scaled([Poly([0, 1])], 0.0, 1.0)


class TestExtraction:
    def test_ground_state_times_polynomial(self):
        d = make_system("H")
        p = poly_coeffs(d, 2)
        got = extract_polynomial(d, lambda x: ground_state(d, x) * p(eta(d, x)),
                                 lambda x: ground_state(d, x), 2)
        assert got.allclose(p.to_float(), rtol=1e-12)

    def test_single_column_casoratian(self):
        d = make_system("W", a1=1.0, a2=1.5, a3=2.0, a4=2.5)
        p = poly_coeffs(d, 3)
        got = extract_polynomial(d, lambda x: casoratian([lambda z: p(eta(d, z))], d.gamma, x), None, 3)
        assert got.allclose(p, rtol=1e-10)

    def test_deforming_polynomial_meixner_pollaczek(self):
        # exact Casoratian evaluated by sympy: eta^2/2 + 3/8
        d = make_system("MP", a=1.0)
        funcs = [lambda z, p=poly_coeffs(d, k): p(eta(d, z)) for k in (1, 2)]
        const = float(leading_coeff(d, 1) * leading_coeff(d, 2)) * 2
        got = extract_polynomial(d, lambda x: casoratian(funcs, d.gamma, x),
                                 lambda x: const * varphi_ell(d, 2, x), 2)
        assert got.allclose(Poly([0.375, 0.0, 0.5]), rtol=1e-12)

    def test_rejects_non_polynomial(self):
        d = make_system("H")
        with pytest.raises(NotPolynomialError, match="not a polynomial"):
            extract_polynomial(d, np.exp, None, 3)

    def test_returns_observed_degree(self):
        d = make_system("H")
        got = extract_polynomial(d, lambda x: 2 * x + 1, None, 6)
        assert got.degree == 1

    def test_degree_bound(self):
        assert polynomial_degree_bound([1, 2, 3]) == 3
        assert polynomial_degree_bound([]) == 0
