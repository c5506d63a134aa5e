"""Acceptance suite, one test group per numbered criterion.

Each group is tagged with ``@pytest.mark.criterion(k)``; the terminal summary
collapses the groups into a single PASS/FAIL line per criterion.
"""
import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest

from conftest import one_per_family, seed_systems
from leveldelete.determinants import casoratian, casoratian_scaled, wronskian_poly
from leveldelete.family_catalog import (Poly, energy, eta, norm_h, sample_window,
                                        shape_invariance_residual)
from leveldelete.krein_adler import (build_modified, dqm_modified_eigenfunction_sq, dqm_modified_V,
                                     modified_eigenfunction, modified_potential_U, prodV_residual,
                                     real_zeros_in_range, validate_deletion)
from leveldelete.special_ell import P_ell_n, f_b_ell, intertwine_residual, xi_ell, xi_ell_determinant
from leveldelete.verify import (count_sign_changes, difference_residual_dqm, gram_report,
                                interlacing_check, schrodinger_residual_qm, zero_window)

SEEDS = seed_systems()
EXACT = seed_systems(exact=True)
FAMILIES = one_per_family()
ORDINARY = [k for k, d in SEEDS.items() if d.regime == "ordinary"]
DISCRETE = [k for k, d in SEEDS.items() if d.regime == "discrete"]


def strip_points(desc, count=20):
    lo, hi = sample_window(desc)
    pts = np.linspace(lo, hi, count + 1)[:-1] + 0.37 * (hi - lo) / count
    return pts


def allowed_levels(deleted, count):
    return [n for n in range(len(deleted) + count + 1) if n not in deleted][:count]


def random_poly(rng, degree):
    coeffs = [Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(degree + 1)]
    if coeffs[-1] == 0:
        coeffs[-1] = Fraction(1)
    return Poly(coeffs)


def independent_polys(rng, count, max_degree=4, to_float=False):
    # distinct degrees keep every determinant generically non-zero
    out = [random_poly(rng, d) for d in rng.sample(range(max_degree + 1), count)]
    return [p.to_float() for p in out] if to_float else out


def rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


# --------------------------------------------------------------------- 1

def product_rule(levels):
    top = max(levels, default=0) + 2
    return all(math.prod(m - d for d in levels) >= 0 for m in range(top + 1))


@pytest.mark.criterion(1)
def test_admissibility_all_subsets_of_six():
    subsets = [s for r in range(7) for s in itertools.combinations(range(6), r)]
    assert len(subsets) == 64
    mismatched = [s for s in subsets if validate_deletion(s).admissible != product_rule(s)]
    print(f"criterion 1: {len(subsets)} subsets of 0..5, mismatches {mismatched}")
    assert not mismatched


@pytest.mark.criterion(1)
def test_admissibility_random_subsets_of_sixteen():
    rng = random.Random(20240611)
    trials = [tuple(rng.sample(range(16), rng.randint(0, 16))) for _ in range(200)]
    mismatched = [s for s in trials if validate_deletion(s).admissible != product_rule(s)]
    print(f"criterion 1: 200 random subsets of 0..15, "
          f"{sum(product_rule(s) for s in trials)} admissible, mismatches {len(mismatched)}")
    assert not mismatched


# --------------------------------------------------------------------- 2

@pytest.mark.criterion(2)
def test_wronskian_identities_exact():
    rng = random.Random(7)
    for _ in range(50):
        n = rng.randint(1, 3)
        fs = independent_polys(rng, n)
        g = random_poly(rng, rng.randint(0, 4))
        assert wronskian_poly([g * f for f in fs]) == g ** n * wronskian_poly(fs)

        m = rng.randint(0, 3)
        *base, gg, hh = independent_polys(rng, m + 2)
        lhs = wronskian_poly([wronskian_poly(base + [gg]), wronskian_poly(base + [hh])])
        assert lhs == wronskian_poly(base) * wronskian_poly(base + [gg, hh])


@pytest.mark.criterion(2)
def test_casoratian_identities_complex_points():
    rng = random.Random(11)
    nrng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(50):
        gamma = float(nrng.uniform(0.2, 1.5))
        n = rng.randint(1, 3)
        fs = independent_polys(rng, n, to_float=True)
        g = random_poly(rng, rng.randint(0, 4)).to_float()
        m = rng.randint(0, 2)
        *base, gg, hh = independent_polys(rng, m + 2, to_float=True)
        for x in nrng.normal(size=10) + 1j * nrng.normal(size=10):
            lhs = casoratian([lambda z, f=f: g(z) * f(z) for f in fs], gamma, x)
            shifts = math.prod(g(x + 0.5j * (n + 1 - 2 * j) * gamma) for j in range(1, n + 1))
            rhs = shifts * casoratian(fs, gamma, x)
            worst = max(worst, rel(lhs, rhs))

            inner = [lambda z, e=e: casoratian(base + [e], gamma, z) for e in (gg, hh)]
            lhs2 = casoratian(inner, gamma, x)
            rhs2 = casoratian(base, gamma, x) * casoratian(base + [gg, hh], gamma, x)
            worst = max(worst, rel(lhs2, rhs2))
    print(f"criterion 2: worst Casoratian identity residual {worst:.2e}")
    assert worst <= 1e-10


# --------------------------------------------------------------------- 3

@pytest.mark.criterion(3)
@pytest.mark.parametrize("n", [1, 2, 3])
def test_casoratian_degenerates_to_wronskian(n):
    rng = random.Random(100 + n)
    gammas = (1e-2, 1e-3, 1e-4)
    for trial in range(5):
        fs = independent_polys(rng, n)
        exact = wronskian_poly(fs)
        x = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        target = complex(exact.to_float()(x))
        if abs(target) < 1e-8:
            continue
        errs = [rel(complex(casoratian_scaled(fs, g, x)), target) for g in gammas]
        orders = [math.log10(a / b) for a, b in zip(errs, errs[1:]) if b > 1e-13]
        print(f"criterion 3: n={n} trial={trial} errors {['%.1e' % e for e in errs]} orders {orders}")
        # errors already at roundoff carry no order information
        assert all(o >= 1.0 for o in orders)
        assert errs[-1] <= 1e-6


# --------------------------------------------------------------------- 4

@pytest.mark.criterion(4)
@pytest.mark.parametrize("label", ORDINARY)
def test_deforming_polynomial_exact(label):
    desc = EXACT[label]
    for ell in range(1, 6):
        closed, det = xi_ell(desc, ell), xi_ell_determinant(desc, ell)
        assert closed.is_exact and closed == det, (label, ell)


@pytest.mark.criterion(4)
@pytest.mark.parametrize("label", DISCRETE)
def test_deforming_polynomial_discrete(label):
    desc = EXACT[label]
    for ell in range(1, 5):
        closed, det = xi_ell(desc, ell).numeric(), xi_ell_determinant(desc, ell).numeric()
        assert len(closed) == len(det) == ell + 1
        err = np.max(np.abs(closed - det)) / np.max(np.abs(closed))
        assert err <= 1e-10, (label, ell, err)


# --------------------------------------------------------------------- 5

QM_SETS = [(), (1, 2), (3, 4), (1, 2, 3, 4)]
DQM_SETS = [(), (1, 2)]
EIGEN_CASES = ([(k, d) for k in ORDINARY for d in QM_SETS]
               + [(k, d) for k in DISCRETE for d in DQM_SETS])


@pytest.mark.criterion(5)
@pytest.mark.parametrize("label,deleted", EIGEN_CASES)
def test_eigen_equation(label, deleted):
    desc = SEEDS[label]
    sysm = build_modified(desc, deleted)
    if desc.regime == "ordinary":
        reports = [schrodinger_residual_qm(sysm, n) for n in allowed_levels(deleted, 5)]
        assert all(r.tolerance <= 1e-6 for r in reports)
    else:
        reports = [difference_residual_dqm(sysm, n, strip_points(desc)) for n in allowed_levels(deleted, 4)]
        assert all(r.tolerance <= 1e-8 for r in reports)
    worst = max(r.max_residual for r in reports)
    print(f"criterion 5: {label} D={list(deleted)} worst residual {worst:.2e}")
    assert all(r.passed for r in reports), [r.to_dict() for r in reports if not r.passed]


# --------------------------------------------------------------------- 6

@pytest.mark.criterion(6)
@pytest.mark.parametrize("label,deleted", EIGEN_CASES)
def test_gram_and_norms(label, deleted):
    from leveldelete.special_ell import h_ell_n, make_ell_system

    desc = SEEDS[label]
    ell = len(deleted)
    levels = [n for n in [0, *range(ell + 1, ell + 6)] if n not in deleted]
    if not deleted:
        reports = gram_report(build_modified(desc, ()), levels, [norm_h(desc, n) for n in levels])
    else:
        reports = [r for r in gram_report(build_modified(desc, deleted), levels) if r.check != "norms"]
    if deleted == tuple(range(1, ell + 1)) and ell % 2 == 0:
        es = make_ell_system(desc, ell)
        reports += gram_report(es, levels, [h_ell_n(desc, ell, n) for n in levels])
    checks = {r.check for r in reports}
    assert "orthogonality" in checks and ("norms" in checks or deleted == (3, 4))
    assert all(r.tolerance <= (1e-8 if r.check == "orthogonality" else 1e-6) for r in reports)
    assert all(r.passed for r in reports), [r.to_dict() for r in reports if not r.passed]


# --------------------------------------------------------------------- 7

@pytest.mark.criterion(7)
@pytest.mark.parametrize("label", list(FAMILIES))
def test_factorization_constants(label):
    desc = EXACT[label]
    for ell in range(0, 5):
        for n in range(ell + 1, ell + 7):
            f, b = f_b_ell(desc, ell, n)
            e = energy(desc, n)
            if desc.regime == "ordinary":
                assert f * b == e, (ell, n)
            else:
                assert rel(complex(f * b), complex(e)) <= 1e-12, (ell, n)


@pytest.mark.criterion(7)
@pytest.mark.parametrize("label", list(FAMILIES))
def test_intertwining(label):
    desc = SEEDS[label]
    pts = strip_points(desc)
    worst = 0.0
    for ell in range(0, 5):
        for n in range(ell + 1, ell + 7):
            worst = max(worst, intertwine_residual(desc, ell, n, pts))
    print(f"criterion 7: {label} worst intertwining residual {worst:.2e}")
    assert worst <= 1e-8


# --------------------------------------------------------------------- 8

@pytest.mark.criterion(8)
@pytest.mark.parametrize("label", list(FAMILIES))
def test_sign_changes_of_modified_polynomials(label):
    desc = SEEDS[label]
    for ell in (0, 2, 4):
        for n in range(ell + 1, ell + 6):
            p = P_ell_n(desc, ell, n)
            zc = count_sign_changes(lambda x: np.real(p(eta(desc, x))), zero_window(desc, p))
            assert zc.stable and zc.count == n - ell, (ell, n, zc.count)


@pytest.mark.criterion(8)
@pytest.mark.parametrize("label", list(FAMILIES))
def test_deforming_polynomial_has_no_zeros(label):
    desc = SEEDS[label]
    for ell in (2, 4):
        assert real_zeros_in_range(desc, xi_ell(desc, ell)) == []
        assert build_modified(desc, range(1, ell + 1)).hermitian


@pytest.mark.criterion(8)
@pytest.mark.parametrize("label", list(FAMILIES))
def test_interlacing(label):
    desc = SEEDS[label]
    for j in range(0, 7):
        res = interlacing_check(desc, j)
        assert res.stable and res.holds, (j, res)


# --------------------------------------------------------------------- 9

PERMUTATION_SETS = [(1, 2), (2, 3), (1, 2, 4, 5)]


@pytest.mark.criterion(9)
@pytest.mark.parametrize("label", list(FAMILIES))
def test_order_independence(label):
    desc = SEEDS[label]
    pts = strip_points(desc)
    discrete = desc.regime == "discrete"
    worst = 0.0
    for deleted in PERMUTATION_SETS:
        perms = list(itertools.permutations(deleted))
        ref = build_modified(desc, deleted)
        levels = allowed_levels(deleted, 3)
        for order in perms[1:]:
            alt = build_modified(desc, deleted, order=order)
            if discrete:
                pairs = [(dqm_modified_V(ref, pts), dqm_modified_V(alt, pts))]
                pairs += [(dqm_modified_eigenfunction_sq(ref, n, pts), dqm_modified_eigenfunction_sq(alt, n, pts))
                          for n in levels]
            else:
                pairs = [(modified_potential_U(ref, pts), modified_potential_U(alt, pts))]
                pairs += [(modified_eigenfunction(ref, n, pts) ** 2, modified_eigenfunction(alt, n, pts) ** 2)
                          for n in levels]
            for a, b in pairs:
                worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300))))
    print(f"criterion 9: {label} worst permutation change {worst:.2e}")
    assert worst <= 1e-10


@pytest.mark.criterion(9)
@pytest.mark.parametrize("label", DISCRETE)
def test_potential_product_chain(label):
    desc = SEEDS[label]
    pts = strip_points(desc)
    for deleted in ((1, 2), (2, 3), (1, 2, 3, 4)):
        r = prodV_residual(build_modified(desc, deleted), pts)
        assert r <= 1e-8, (deleted, r)


# --------------------------------------------------------------------- 10

@pytest.mark.criterion(10)
@pytest.mark.parametrize("label", list(SEEDS))
def test_shape_invariance(label):
    desc = SEEDS[label]
    r = shape_invariance_residual(desc, strip_points(desc))
    tol = 1e-10 if desc.regime == "ordinary" else 1e-9
    print(f"criterion 10: {label} residual {r:.2e}")
    assert r <= tol
