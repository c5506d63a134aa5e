"""Wronskians over polynomial rings and Casoratians under imaginary shifts."""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

from .family_catalog import (ConsistencyError, DomainError, Family, Poly, System,
                             deta, eta, eta_inverse)

__all__ = [
    "bareiss_det", "wronskian_poly", "wronskian_in_x", "casoratian",
    "casoratian_scaled", "casoratian_nodes", "extract_polynomial",
    "extraction_window", "polynomial_degree_bound", "NotPolynomialError",
]


class NotPolynomialError(ConsistencyError):
    """Sampled values are not a polynomial of the requested degree."""


def _is_zero(v) -> bool:
    return v.is_zero() if isinstance(v, Poly) else v == 0


def _div(a, b):
    if isinstance(a, Poly):
        return a.exact_div(b) if isinstance(b, Poly) else a / b
    return a / b


def bareiss_det(matrix):
    """Fraction-free determinant over any exact integral domain.

    Entries may be rationals or :class:`Poly`; every intermediate division
    is exact.  Rows are swapped when a pivot vanishes.
    """
    m = [list(row) for row in matrix]
    n = len(m)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if _is_zero(m[k][k]):
            swap = next((r for r in range(k + 1, n) if not _is_zero(m[r][k])), None)
            if swap is None:
                return m[k][k] * 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = _div(m[i][j] * m[k][k] - m[i][k] * m[k][j], prev)
        prev = m[k][k]
    return m[n - 1][n - 1] * sign


def wronskian_poly(polys: Sequence[Poly]) -> Poly:
    """Wronskian ``det(d^j f_k / d eta^j)`` as an exact polynomial in ``eta``.

    Exact coefficient lists use Bareiss elimination over the polynomial ring.
    Floating-point inputs are evaluated at Chebyshev nodes and refitted,
    since ring division of rounded polynomials is unstable.
    """
    polys = [p if isinstance(p, Poly) else Poly(p) for p in polys]
    n = len(polys)
    if n == 0:
        return Poly.const(1)
    if all(p.is_exact for p in polys):
        rows = [[p.deriv(j) for p in polys] for j in range(n)]
        det = bareiss_det(rows)
        return det if isinstance(det, Poly) else Poly.const(det)
    deg = max(0, sum(max(p.degree, 0) for p in polys) - n * (n - 1) // 2)
    nodes = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
    mats = np.array([[p.deriv(j)(nodes) for p in polys] for j in range(n)])
    vals = np.linalg.det(np.moveaxis(mats, -1, 0))
    return _interpolate_chebyshev(nodes, vals, deg, (-1.0, 1.0))


def wronskian_in_x(desc: System, polys: Sequence[Poly], x):
    """Wronskian in ``x`` of ``f_k(eta(x))``, via the chain rule factor ``eta'(x)^{n(n-1)/2}``."""
    n = len(polys)
    w = wronskian_poly(polys)
    return deta(desc, x) ** (n * (n - 1) // 2) * w(eta(desc, x))


def casoratian_nodes(n: int, gamma: float, x):
    """The ``n`` shifted arguments ``x + i(n+1-2j) gamma/2``, ``j = 1..n``, on a trailing axis."""
    j = np.arange(1, n + 1)
    return np.asarray(x)[..., None] + 0.5j * (n + 1 - 2 * j) * gamma


def casoratian(funcs: Sequence[Callable], gamma: float, x):
    """Casorati determinant ``i^{n(n-1)/2} det f_k(x + i(n+1-2j) gamma/2)``.

    Vectorised over ``x``; each function must accept complex arrays.
    Raises :class:`DomainError` naming the first node with a non-finite value.
    """
    n = len(funcs)
    x = np.asarray(x, dtype=complex)
    if n == 0:
        return np.ones_like(x)
    nodes = casoratian_nodes(n, gamma, x)
    cols = []
    for f in funcs:
        v = np.asarray(f(nodes), dtype=complex)
        bad = ~np.isfinite(v)
        if np.any(bad):
            raise DomainError(f"non-finite function value at node {nodes[bad].ravel()[0]}")
        cols.append(v)
    if n == 1:
        return cols[0][..., 0]
    mat = np.stack(cols, axis=-1)
    det = np.linalg.det(mat)
    return (1j ** (n * (n - 1) // 2)) * det


def _complete_homogeneous(nodes, degree: int):
    """``h[j, r]`` = complete homogeneous symmetric polynomial of degree ``r`` in the first ``j+1`` nodes."""
    n = nodes.shape[-1]
    h = np.zeros(nodes.shape[:-1] + (n, degree + 1), dtype=complex)
    h[..., :, 0] = 1.0
    for r in range(1, degree + 1):
        h[..., 0, r] = nodes[..., 0] ** r
    for j in range(1, n):
        for r in range(1, degree + 1):
            h[..., j, r] = h[..., j - 1, r] + nodes[..., j] * h[..., j, r - 1]
    return h


def _poly_divided_differences(p: Poly, nodes):
    # p[x_1..x_j] = sum_m c_m h_{m-j+1}(x_1..x_j); no cancellation for clustered nodes
    c = np.asarray(p.numeric(), dtype=complex)
    deg = max(len(c) - 1, 0)
    n = nodes.shape[-1]
    h = _complete_homogeneous(nodes, deg)
    out = np.zeros(nodes.shape, dtype=complex)
    for j in range(n):
        for m in range(j, len(c)):
            out[..., j] += c[m] * h[..., j, m - j]
    return out


def casoratian_scaled(funcs: Sequence, gamma: float, x):
    """``gamma^{-n(n-1)/2}`` times the Casoratian; tends to the Wronskian as ``gamma -> 0``.

    When every entry is a :class:`Poly` in ``x`` the determinant is taken on
    divided differences, which pulls the power of ``gamma`` out exactly and
    stays accurate for tiny ``gamma``.
    """
    if gamma == 0:
        raise ValueError("degenerate shift: gamma must be non-zero")
    n = len(funcs)
    if n and all(isinstance(f, Poly) for f in funcs):
        x = np.asarray(x, dtype=complex)
        nodes = casoratian_nodes(n, gamma, x)
        mat = np.stack([_poly_divided_differences(f, nodes) for f in funcs], axis=-1)
        return math.prod(math.factorial(k) for k in range(1, n)) * np.linalg.det(mat)
    return casoratian(funcs, gamma, x) / gamma ** (n * (n - 1) // 2)


def extraction_window(desc: System, degree: int) -> tuple[float, float]:
    """Interval of real ``eta`` values used as interpolation nodes."""
    f = desc.family
    if f in (Family.H, Family.MP, Family.CH):
        # narrow windows keep the low coefficients of high-degree fits accurate
        half = max(3.0, 0.5 * degree)
        return (-half, half)
    if f in (Family.L, Family.W):
        top = max(4.0, 2.0 * degree)
        return (top / 400.0, top)
    lo, hi = desc.x_range
    m = 0.05 * (hi - lo)
    a, b = float(eta(desc, lo + m)), float(eta(desc, hi - m))
    return (min(a, b), max(a, b))


def _interpolate_chebyshev(nodes, vals, degree, window) -> Poly:
    cheb = Chebyshev.fit(nodes, vals, degree, domain=list(window))
    return Poly(cheb.convert(kind=Polynomial, domain=[-1, 1], window=[-1, 1]).coef)


def extract_polynomial(desc: System, value_fn: Callable, known_prefactor: Callable | None,
                       degree_bound: int, rtol: float = 1e-8) -> Poly:
    """Recover ``p`` from samples of ``value_fn(x) = prefactor(x) * p(eta(x))``.

    Nodes are Chebyshev points in ``eta`` over :func:`extraction_window`,
    mapped back to real ``x``.  The fit is validated at twice as many
    interleaved nodes; a mismatch above ``rtol`` (relative to the sampled
    magnitude) raises :class:`NotPolynomialError`.  Trailing coefficients
    negligible at the window scale are dropped, so the returned degree is
    the observed one.
    """
    degree_bound = max(int(degree_bound), 0)
    window = extraction_window(desc, degree_bound)
    lo, hi = window
    k = degree_bound + 1

    def sample(etas):
        xs = eta_inverse(desc, etas)
        v = np.asarray(value_fn(xs), dtype=complex)
        if known_prefactor is not None:
            v = v / np.asarray(known_prefactor(xs), dtype=complex)
        return v

    t = np.cos(np.pi * (np.arange(k) + 0.5) / k)
    etas = 0.5 * (hi + lo) + 0.5 * (hi - lo) * t
    vals = sample(etas)
    cheb = Chebyshev.fit(etas, vals, degree_bound, domain=[lo, hi])

    m = 2 * k
    tv = np.cos(np.pi * (np.arange(m) + 0.25) / m)
    check = 0.5 * (hi + lo) + 0.5 * (hi - lo) * tv
    want = sample(check)
    scale = max(np.max(np.abs(vals)), np.max(np.abs(want)), 1e-300)
    err = np.max(np.abs(cheb(check) - want)) / scale
    if not err <= rtol:
        raise NotPolynomialError(
            f"{desc.family.value}: samples are not a polynomial of degree <= {degree_bound} "
            f"(relative validation residual {err:.3e})")

    # drop trailing modes only while the fit still validates
    c = cheb.coef
    if np.max(np.abs(c)) == 0:
        return Poly()
    top = len(c)
    while top > 1 and abs(c[top - 1]) <= 1e-9 * np.max(np.abs(c)):
        trial = Chebyshev(c[: top - 1], domain=[lo, hi])
        if np.max(np.abs(trial(check) - want)) / scale > rtol:
            break
        top -= 1
    cheb = Chebyshev(c[:top], domain=[lo, hi])
    coef = cheb.convert(kind=Polynomial, domain=[-1, 1], window=[-1, 1]).coef
    if np.all(np.abs(coef.imag) <= 1e-12 * np.max(np.abs(coef))):
        coef = coef.real
    return Poly(coef)


def polynomial_degree_bound(degrees: Sequence[int]) -> int:
    """Upper bound on the degree of a Wronskian-type determinant of polynomials."""
    n = len(degrees)
    return max(0, sum(degrees) - n * (n - 1) // 2)

