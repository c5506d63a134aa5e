"""Closed forms for deleting the ``ell`` lowest excited levels ``{1, ..., ell}``.

In this case the deforming polynomial ``xi_ell`` is a seed polynomial of
degree ``ell`` with negated and shifted parameters, the deleted system is
intertwined with the seed at ``lambda + (ell+1) delta``, and the modified
eigenpolynomials ``P_{ell,n}`` follow from one application of a backward
shift.  Every closed form here has a determinant route in
:mod:`leveldelete.krein_adler` to be checked against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .determinants import extract_polynomial
from .family_catalog import (DomainError, Family, Poly, RegimeError, System, apply_backward,
                             deta, energy, eta, fn_bn, ground_state, hermite_sum, jacobi_sum,
                             laguerre_sum, leading_coeff, norm_h, pochhammer, poly_coeffs,
                             potential_V, potential_V_star, prepotential, prepotential_derivs,
                             qpochhammer, varphi)
from .krein_adler import SingularPotentialError, _casoratian_poly, _wronskian_levels, real_zeros_in_range

__all__ = [
    "EllSystem", "make_ell_system", "xi_ell", "xi_ell_determinant", "prepotential_w_ell",
    "V_ell", "V_ell_phi_ratio", "f_b_ell", "A_factor", "P_ell_n", "P_ell_n_determinant",
    "c2_coeff", "h_ell_n", "ell_weight_sq", "forward_ell", "backward_ell",
    "intertwine_residual",
]


@dataclass(frozen=True)
class EllSystem:
    """Seed system with levels ``1..ell`` deleted; the ground state survives."""

    desc: System
    ell: int
    xi_ell: Poly
    mu: int = 0

    @property
    def hermitian(self) -> bool:
        return self.ell % 2 == 0


def make_ell_system(desc: System, ell: int) -> EllSystem:
    xi = xi_ell(desc, ell)
    if ell % 2 == 0 and desc.regime == "ordinary" and real_zeros_in_range(desc, xi):
        raise SingularPotentialError(f"xi_{ell} vanishes in range")
    return EllSystem(desc, ell, xi)


def _is_exact(v) -> bool:
    return isinstance(v, (int, Fraction))


# ---------------------------------------------------------------------------
# Deforming polynomial
# ---------------------------------------------------------------------------

def _sinh_prod(desc: System, ell: int) -> float:
    return math.prod(math.sinh(-j * desc.gamma / 2) for j in range(1, ell + 1))


def xi_ell(desc: System, ell: int) -> Poly:
    """Deforming polynomial from its closed form in shifted-parameter seed polynomials."""
    if ell < 0:
        raise ValueError("ell must be non-negative")
    if ell == 0:
        return Poly.const(Fraction(1))
    f, p = desc.family, desc.par
    if f is Family.H:
        # H_l(i eta) / (2^l l! i^l): odd powers cancel against i^l
        h = hermite_sum(ell)
        c = [Fraction(0)] * (ell + 1)
        for k, v in enumerate(h):
            if v != 0:
                c[k] = v * (-1) ** ((ell - k) // 2) / (2**ell * math.factorial(ell))
        return Poly(c)
    if f is Family.L:
        return laguerre_sum(-p["g"] - ell - Fraction(1, 2) if _is_exact(p["g"]) else
                            -p["g"] - ell - 0.5, ell).compose_linear(-1)
    if f is Family.J:
        g, h = p["g"], p["h"]
        half = Fraction(1, 2) if _is_exact(g) and _is_exact(h) else 0.5
        jac = jacobi_sum(-g - ell - half, -h - ell - half, ell)
        return jac * ((-2) ** ell / pochhammer(g + h + 1, ell))
    dual = desc.dual(ell)
    base = poly_coeffs(dual, ell) / complex(leading_coeff(dual, ell))
    scale = _sinh_prod(desc, ell) if f is Family.AW else math.factorial(ell)
    return _realify(base / scale)


def _realify(p: Poly) -> Poly:
    c = np.asarray(p.numeric(), dtype=complex)
    if np.all(np.abs(c.imag) <= 1e-12 * max(np.max(np.abs(c)), 1e-300)):
        return Poly(c.real)
    return Poly(c)


def _route_constant(desc: System, ell: int):
    """``prod c_k`` times the family's factorial or sinh product, ``k = 1..ell``."""
    out = Fraction(1) if desc.exact else 1.0
    for k in range(1, ell + 1):
        out = out * leading_coeff(desc, k)
    if desc.family is Family.AW:
        return out * math.prod(_sinh_prod(desc, k) for k in range(1, ell + 1))
    return out * math.prod(math.factorial(k) for k in range(1, ell + 1))


def xi_ell_determinant(desc: System, ell: int) -> Poly:
    """Deforming polynomial from the Wronskian or Casoratian of ``P_1..P_ell``."""
    levels = tuple(range(1, ell + 1))
    const = _route_constant(desc, ell)
    if desc.regime == "ordinary":
        return _wronskian_levels(desc, levels) / const
    return _realify(_casoratian_poly(desc, levels) / complex(const))


def c2_coeff(desc: System) -> Poly:
    """Coefficient of the second derivative in the ordinary eigen-equation, in ``eta``."""
    if desc.regime != "ordinary":
        raise RegimeError("c2 is defined for ordinary families only")
    if desc.family is Family.H:
        return Poly.const(Fraction(1, 4))
    if desc.family is Family.L:
        return Poly.eta()
    return Poly((Fraction(1), 0, Fraction(-1)))


# ---------------------------------------------------------------------------
# Deformed prepotential and potential function
# ---------------------------------------------------------------------------

def prepotential_w_ell(desc: System, ell: int, x):
    """Ordinary deformed prepotential, defined up to an additive constant."""
    if desc.regime != "ordinary":
        raise RegimeError("the prepotential is an ordinary-regime object")
    v = np.real(xi_ell(desc, ell)(eta(desc, x)))
    if np.any(v == 0):
        raise SingularPotentialError(f"xi_{ell} vanishes at the evaluation point")
    return prepotential(desc.shift(ell), x) - np.log(np.abs(v))


def _xi_at(desc: System, xi: Poly, z):
    v = xi(eta(desc, z))
    if np.any(v == 0):
        raise SingularPotentialError("xi vanishes at a shifted evaluation point")
    return v


def V_ell(desc: System, ell: int, x):
    """Deformed potential function as ``kappa^ell`` times a xi ratio times the shifted seed ``V``."""
    if desc.regime != "discrete":
        raise RegimeError("V_ell is a discrete-regime object")
    z = np.asarray(x, dtype=complex)
    g, xi = desc.gamma, xi_ell(desc, ell)
    ratio = _xi_at(desc, xi, z + 0.5j * g) / _xi_at(desc, xi, z - 0.5j * g)
    return desc.kappa**ell * ratio * potential_V(desc.shift(ell), z)


def V_ell_phi_ratio(desc: System, ell: int, x):
    """The same potential function written with auxiliary-function ratios and the unshifted ``V``."""
    if desc.regime != "discrete":
        raise RegimeError("V_ell is a discrete-regime object")
    z = np.asarray(x, dtype=complex)
    g, xi = desc.gamma, xi_ell(desc, ell)
    ph = (varphi(desc, z - 0.5j * (ell + 1) * g) * varphi(desc, z - 0.5j * ell * g)
          / (varphi(desc, z) * varphi(desc, z - 0.5j * g)))
    ratio = _xi_at(desc, xi, z + 0.5j * g) / _xi_at(desc, xi, z - 0.5j * g)
    return ph * ratio * potential_V(desc, z - 0.5j * ell * g)


# ---------------------------------------------------------------------------
# Factorisation constants and norms
# ---------------------------------------------------------------------------

def A_factor(desc: System, ell: int, n: int):
    """Ratio ``f_{ell,n} / f_n``."""
    f = desc.family
    if f is Family.H:
        return (-2) ** ell * pochhammer(n - ell, ell)
    if f is Family.L:
        return Fraction(1)
    if f is Family.J:
        p = desc.par
        return Fraction(-2) ** -ell * pochhammer(n + p["g"] + p["h"] + 1, ell)
    if f is Family.MP:
        return Fraction(2) ** ell
    if f is Family.CH:
        return pochhammer(desc.b1 + n, ell)
    if f is Family.W:
        return (-1) ** ell * pochhammer(n - ell, ell) * pochhammer(desc.b1 + n, ell)
    q, b4 = desc.q, desc.b4
    return q ** (-ell * n / 2) * qpochhammer(q ** (n - ell), q, ell) * qpochhammer(b4 * q**n, q, ell)


def f_b_ell(desc: System, ell: int, n: int):
    """``(f_{ell,n}, b_{ell,n-1})``; their product is ``E_n``."""
    fn, bn = fn_bn(desc, n)
    a = A_factor(desc, ell, n)
    return fn * a, bn / a


def h_ell_n(desc: System, ell: int, n: int) -> float:
    """Squared norm of ``P_{ell,n}`` against :func:`ell_weight_sq` (even ``ell``)."""
    if ell % 2:
        raise RegimeError("odd ell gives a non-hermitian system; no norm is defined")
    if 1 <= n <= ell:
        raise ValueError(f"level {n} is deleted")
    f = desc.family
    h = norm_h(desc, n)
    if f is Family.AW:
        q, b4 = desc.q, desc.b4
        return h * q ** (-ell * n) * qpochhammer(q ** (n - ell), q, ell) * qpochhammer(b4 * q**n, q, ell)
    base = float(pochhammer(n - ell, ell))
    if f is Family.H:
        return h * base * 2**ell
    if f is Family.L:
        return h * base
    if f is Family.J:
        p = desc.par
        return h * base * 4.0**-ell * float(pochhammer(n + p["g"] + p["h"] + 1, ell))
    if f is Family.MP:
        return h * base * 2**ell
    return h * base * float(np.real(pochhammer(desc.b1 + n, ell)))


def ell_weight_sq(desc: System, ell: int, x):
    """Squared ground state of the deleted system on the real axis."""
    xi = xi_ell(desc, ell)
    if desc.regime == "ordinary":
        v = np.real(xi(eta(desc, x)))
        if np.any(v == 0):
            raise SingularPotentialError(f"xi_{ell} vanishes at the evaluation point")
        return ground_state(desc.shift(ell), x) ** 2 / v**2
    z = np.asarray(x, dtype=float).astype(complex)
    g = desc.gamma
    lo = xi(eta(desc, z - 0.5j * g))
    hi = xi(eta(desc, z + 0.5j * g))
    if np.any(lo * hi == 0):
        raise SingularPotentialError(f"xi_{ell} vanishes at a shifted point")
    out = desc.kappa ** (ell * (ell - 1) / 2) * ground_state(desc.shift(ell), np.real(z)) ** 2
    return out / np.real(lo * hi)


# ---------------------------------------------------------------------------
# Modified eigenpolynomials
# ---------------------------------------------------------------------------

def P_ell_n_determinant(desc: System, ell: int, n: int) -> Poly:
    """``P_{ell,n}`` from the determinant route, scaled by the route constant."""
    if n == 0:
        return Poly.const(Fraction(1) if desc.exact else 1.0)
    if 1 <= n <= ell or n < 0:
        return Poly()
    levels = tuple(range(1, ell + 1)) + (n,)
    const = _route_constant(desc, ell) * (-1) ** ell
    if desc.regime == "ordinary":
        return _wronskian_levels(desc, levels) / const
    return _realify(_casoratian_poly(desc, levels) / complex(const))


def _ordinary_B_factor(desc: System) -> Poly:
    # (phi0(lam+(l+1)d)/phi0(lam+l d)) * eta'(x) as a polynomial in eta
    if desc.family is Family.H:
        return Poly.const(Fraction(1))
    if desc.family is Family.L:
        return Poly.eta() * 2
    return Poly((Fraction(-1), 0, Fraction(1)))


def _ordinary_F_factor(desc: System) -> int:
    # (phi0(lam+l d)/phi0(lam+(l+1)d)) * eta'(x)
    return {Family.H: 1, Family.L: 2, Family.J: -4}[desc.family]


def P_ell_n(desc: System, ell: int, n: int) -> Poly:
    """``P_{ell,n}`` from the one-step backward-shift closed form; ``P_{ell,0} = 1``."""
    if n == 0:
        return Poly.const(Fraction(1) if desc.exact else 1.0)
    if n < 0 or n <= ell:
        return Poly()
    if ell == 0:
        return poly_coeffs(desc, n)
    xi = xi_ell(desc, ell)
    _, b = f_b_ell(desc, ell, n)
    if desc.regime == "ordinary":
        up = desc.shift(ell)
        m = n - ell
        pm = poly_coeffs(up, m)
        f_up = fn_bn(up, m)[0]
        num = xi * pm * energy(up, m) + c2_coeff(desc) * xi.deriv() * pm.deriv() * 4
        return num / (b * f_up)
    return _realify(backward_ell(desc, ell, poly_coeffs(desc.shift(ell + 1), n - ell - 1)) / complex(b))


def forward_ell(desc: System, ell: int, p: Poly) -> Poly:
    """Forward shift of the deleted system applied to a polynomial in ``eta``."""
    xi = xi_ell(desc, ell)
    if desc.regime == "ordinary":
        q, r = p.deriv().divmod(xi)
        if not r.is_zero() and max(abs(complex(c)) for c in r) > 1e-9 * max(
                abs(complex(c)) for c in p.deriv()):
            raise DomainError("derivative is not divisible by xi; input is not a modified eigenpolynomial")
        return q * _ordinary_F_factor(desc)
    g, k = desc.gamma, desc.kappa
    const = (-1) ** ell * k ** (ell * (ell + 1) / 4)

    def value(x):
        num = 1j * (p(eta(desc, x - 0.5j * g)) - p(eta(desc, x + 0.5j * g)))
        return const * num / (varphi(desc, x) * xi(eta(desc, x)))

    return _realify(extract_polynomial(desc, value, None, max(p.degree - ell - 1, 0)))


def backward_ell(desc: System, ell: int, p: Poly) -> Poly:
    """Backward shift of the deleted system applied to a polynomial in ``eta``."""
    xi = xi_ell(desc, ell)
    up = desc.shift(ell)
    if desc.regime == "ordinary":
        return xi * apply_backward(up, p) + _ordinary_B_factor(desc) * xi.deriv() * p
    g, k = desc.gamma, desc.kappa
    const = (-1) ** ell * k ** (-ell * (ell - 3) / 4)

    def value(x):
        lo, hi = x - 0.5j * g, x + 0.5j * g
        t1 = potential_V(up, x) * xi(eta(desc, hi)) * varphi(desc, lo) * p(eta(desc, lo))
        t2 = potential_V_star(up, x) * xi(eta(desc, lo)) * varphi(desc, hi) * p(eta(desc, hi))
        return const * -1j * (t1 - t2)

    return _realify(extract_polynomial(desc, value, None, max(p.degree, 0) + ell + 1))


# ---------------------------------------------------------------------------
# Intertwining
# ---------------------------------------------------------------------------

def intertwine_residual(desc: System, ell: int, n: int, x) -> float:
    """Worst relative residual of the forward and backward intertwining relations on ``x``.

    ``P_{ell,n}`` is taken from the determinant route so that neither side
    reuses the backward-shift closed form.  Ordinary families differentiate
    the factorised eigenfunctions analytically; discrete families apply the
    shifts exactly in the ground-state-conjugated (polynomial) form.
    """
    if n < ell + 1:
        raise ValueError("intertwining needs n >= ell + 1")
    x = np.asarray(x, dtype=float)
    P = P_ell_n_determinant(desc, ell, n)
    up1 = desc.shift(ell + 1)
    Pm = poly_coeffs(up1, n - ell - 1)
    fl, bl = f_b_ell(desc, ell, n)
    xi = xi_ell(desc, ell)
    if desc.regime == "ordinary":
        up = desc.shift(ell)
        e, e1 = eta(desc, x), deta(desc, x)
        xv, xd = np.real(xi(e)), np.real(xi.deriv()(e))
        pv, pd = np.real(P(e)), np.real(P.deriv()(e))
        w_up = prepotential_derivs(up, x)[0]
        g0 = ground_state(up, x)
        phi = g0 * pv / xv
        dphi = g0 * (w_up * pv / xv + pd * e1 / xv - pv * xd * e1 / xv**2)
        dw_ell = w_up - xd * e1 / xv
        fwd_lhs = dphi - dw_ell * phi
        g1 = ground_state(up1, x)
        tgt = g1 * np.real(Pm(e))
        fwd_rhs = float(fl) * tgt
        dtgt = g1 * (prepotential_derivs(up1, x)[0] * np.real(Pm(e)) + np.real(Pm.deriv()(e)) * e1)
        bwd_lhs = -dtgt - dw_ell * tgt
        bwd_rhs = float(bl) * phi
    else:
        g, k = desc.gamma, desc.kappa
        z = x.astype(complex)
        lo, hi = z - 0.5j * g, z + 0.5j * g
        fconst = (-1) ** ell * k ** (ell * (ell + 1) / 4)
        fwd_lhs = fconst * 1j * (P(eta(desc, lo)) - P(eta(desc, hi))) / (varphi(desc, z) * xi(eta(desc, z)))
        fwd_rhs = complex(fl) * Pm(eta(desc, z))
        up = desc.shift(ell)
        bconst = (-1) ** ell * k ** (-ell * (ell - 3) / 4)
        t1 = potential_V(up, z) * xi(eta(desc, hi)) * varphi(desc, lo) * Pm(eta(desc, lo))
        t2 = potential_V_star(up, z) * xi(eta(desc, lo)) * varphi(desc, hi) * Pm(eta(desc, hi))
        bwd_lhs = bconst * -1j * (t1 - t2)
        bwd_rhs = complex(bl) * P(eta(desc, z))
    r1 = np.max(np.abs(fwd_lhs - fwd_rhs)) / max(np.max(np.abs(fwd_rhs)), 1e-300)
    r2 = np.max(np.abs(bwd_lhs - bwd_rhs)) / max(np.max(np.abs(bwd_rhs)), 1e-300)
    return float(max(r1, r2))
