"""Numerical checks: quadrature, eigen-equation residuals, node counts, interlacing.

Every check produces a :class:`ResidualReport`, and a report passes exactly
when its residual is within tolerance.  Grids are fixed and nothing is
random, so repeated runs give identical reports.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .family_catalog import (DomainError, Family, Poly, System, energy, eta, eta_inverse,
                             norm_h, poly_coeffs, sample_window, shape_invariance_residual)
from .krein_adler import (DeletedLevelError, ModifiedSystem, build_modified, dqm_similarity_residual,
                          modified_eigenfunction, modified_poly, modified_potential_U,
                          prodV_residual, weight_sq)
from .special_ell import (EllSystem, P_ell_n, ell_weight_sq, h_ell_n, intertwine_residual,
                          xi_ell, xi_ell_determinant)

__all__ = [
    "QuadratureRule", "QuadratureError", "ResidualReport", "ZeroCount", "InterlacingResult",
    "build_quadrature", "gram_matrix", "gram_report", "schrodinger_residual_qm",
    "difference_residual_dqm", "count_sign_changes", "interlacing_check", "zero_window",
    "run_suite",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


class QuadratureError(RuntimeError):
    """The truncation search or the panel refinement did not converge."""


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    window: tuple[float, float]
    scheme: str

    def integrate(self, f: Callable) -> float:
        return float(np.sum(self.weights * f(self.nodes)))


def _panels(lo: float, hi: float, count: int):
    edges = np.linspace(lo, hi, count + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def _truncate(weight: Callable, lo: float, hi: float, start: float) -> tuple[float, float]:
    """Finite window outside of which ``weight`` is below ``1e-16`` of its maximum."""
    a = lo if math.isfinite(lo) else -abs(start)
    b = hi if math.isfinite(hi) else abs(start)
    for _ in range(60):
        inner_lo = lo if math.isfinite(lo) else a
        inner_hi = hi if math.isfinite(hi) else b
        grid = np.linspace(inner_lo, inner_hi, 4001)[1:-1]
        vals = np.abs(weight(grid))
        peak = np.max(vals)
        if not np.isfinite(peak) or peak <= 0:
            raise QuadratureError("weight is not positive and finite on the window")
        grow = False
        if not math.isfinite(lo) and abs(weight(np.array([a]))[0]) >= 1e-16 * peak:
            a *= 2
            grow = True
        if not math.isfinite(hi) and abs(weight(np.array([b]))[0]) >= 1e-16 * peak:
            b *= 2
            grow = True
        if not grow:
            return a, b
    raise QuadratureError("truncation search did not converge")


def build_quadrature(desc: System, weight: Callable, order: int = 256, rtol: float = 1e-10,
                     max_panels: int = 4096) -> QuadratureRule:
    """Composite 32-point Gauss-Legendre rule adapted to ``weight``.

    Infinite ends are truncated where the weight has decayed below 1e-16
    of its peak.  The panel count starts at ``order / 32`` and doubles until
    the integral of ``weight`` stops changing at relative level ``rtol``.
    """
    lo, hi = desc.x_range
    infinite = not (math.isfinite(lo) and math.isfinite(hi))
    if infinite:
        s = sample_window(desc)
        lo, hi = _truncate(weight, lo, hi, max(abs(s[0]), abs(s[1]), 1.0) / 4)
    count = max(1, math.ceil(order / 32))
    nodes, wts = _panels(lo, hi, count)
    prev = float(np.sum(wts * weight(nodes)))
    while count < max_panels:
        count *= 2
        nodes, wts = _panels(lo, hi, count)
        cur = float(np.sum(wts * weight(nodes)))
        if abs(cur - prev) <= rtol * abs(cur):
            return QuadratureRule(nodes, wts, (lo, hi),
                                  "truncated-infinite" if infinite else "gauss-legendre-panels")
        prev = cur
    raise QuadratureError(f"panel refinement did not converge to {rtol:g}")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

@dataclass
class ResidualReport:
    check: str
    max_residual: float
    tolerance: float
    passed: bool = field(init=False)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.max_residual = float(self.max_residual)
        self.passed = bool(self.max_residual <= self.tolerance)

    @property
    def indeterminate(self) -> bool:
        return bool(self.metadata.get("indeterminate", False))

    def to_dict(self) -> dict:
        d = asdict(self)
        if not math.isfinite(d["max_residual"]):
            d["max_residual"] = None
        return d


# ---------------------------------------------------------------------------
# Orthogonality
# ---------------------------------------------------------------------------

def _weight_and_polys(sys, levels):
    if isinstance(sys, EllSystem):
        return (lambda x: ell_weight_sq(sys.desc, sys.ell, x),
                [P_ell_n(sys.desc, sys.ell, n) for n in levels])
    return (lambda x: weight_sq(sys, x), [modified_poly(sys, n) for n in levels])


def gram_matrix(sys: ModifiedSystem | EllSystem, levels: Sequence[int],
                rule: QuadratureRule | None = None) -> np.ndarray:
    """``G[n, m] = integral of weight * P_n * P_m`` over the range."""
    desc = sys.desc
    for n in levels:
        deleted = sys.deletion.levels if isinstance(sys, ModifiedSystem) else range(1, sys.ell + 1)
        if n in deleted:
            raise DeletedLevelError(f"level {n} has been deleted")
    w, polys = _weight_and_polys(sys, levels)

    def vals(x):
        e = eta(desc, x)
        return np.array([np.real(p(e)) for p in polys])

    if rule is None:
        rule = build_quadrature(desc, lambda x: w(x) * np.sum(vals(x) ** 2, axis=0))
    pv = vals(rule.nodes)
    ww = rule.weights * w(rule.nodes)
    G = (pv * ww) @ pv.T
    return 0.5 * (G + G.T)


def gram_report(sys: ModifiedSystem | EllSystem, levels: Sequence[int],
                expected_diag: Sequence[float] | None = None,
                off_tol: float = 1e-8, diag_tol: float = 1e-6) -> list[ResidualReport]:
    G = gram_matrix(sys, levels)
    d = np.sqrt(np.abs(np.diag(G)))
    off = G / np.outer(d, d)
    np.fill_diagonal(off, 0.0)
    meta = {"family": sys.desc.family.value, "levels": list(levels)}
    out = [ResidualReport("orthogonality", float(np.max(np.abs(off), initial=0.0)), off_tol, meta)]
    if np.any(np.diag(G) <= 0):
        out.append(ResidualReport("positive-norms", math.inf, 0.0, meta))
    if expected_diag is not None:
        exp = np.asarray(expected_diag, dtype=float)
        rel = np.abs(np.diag(G) - exp) / np.abs(exp)
        out.append(ResidualReport("norms", float(np.max(rel)), diag_tol,
                                  dict(meta, computed=np.diag(G).tolist(), expected=exp.tolist())))
    return out


# ---------------------------------------------------------------------------
# Eigen-equation residuals
# ---------------------------------------------------------------------------

def _second_derivative(f: Callable, x: np.ndarray, h: float) -> np.ndarray:
    def stencil(s):
        return (-f(x + 2 * s) + 16 * f(x + s) - 30 * f(x) + 16 * f(x - s) - f(x - 2 * s)) / (12 * s * s)

    return (16 * stencil(h / 2) - stencil(h)) / 15


def schrodinger_residual_qm(sys: ModifiedSystem, n: int, gridsize: int = 400,
                            tolerance: float = 1e-6, h: float | None = None) -> ResidualReport:
    """Finite-difference residual of the deleted Schroedinger equation on an interior grid."""
    lo, hi = sample_window(sys.desc)
    if h is None:
        h = (hi - lo) / 2000
    x = np.linspace(lo + 2 * h, hi - 2 * h, gridsize)
    phi = lambda t: modified_eigenfunction(sys, n, t)
    f0 = phi(x)
    d2 = _second_derivative(phi, x, h)
    e = float(energy(sys.desc, n))
    res = -d2 + modified_potential_U(sys, x) * f0 - e * f0
    scale = (abs(e) + 1) * np.max(np.abs(f0))
    return ResidualReport(f"schrodinger[n={n}]", float(np.max(np.abs(res)) / scale), tolerance,
                          {"family": sys.desc.family.value, "deleted": list(sys.deletion.levels),
                           "n": n, "gridsize": gridsize, "h": h})


def difference_residual_dqm(sys: ModifiedSystem, n: int, points: Sequence[float] | None = None,
                            tolerance: float = 1e-8) -> ResidualReport:
    """Residual of the deleted difference equation; points at poles are skipped and listed."""
    if points is None:
        lo, hi = sample_window(sys.desc)
        points = np.linspace(lo, hi, 20) + 0.0137 * (hi - lo) / 20
        points = points[points < hi]
    worst, skipped = 0.0, []
    for x in points:
        try:
            worst = max(worst, dqm_similarity_residual(sys, n, float(x)))
        except DomainError:
            skipped.append(float(x))
    return ResidualReport(f"difference-equation[n={n}]", worst, tolerance,
                          {"family": sys.desc.family.value, "deleted": list(sys.deletion.levels),
                           "n": n, "points": len(points), "skipped": skipped})


# ---------------------------------------------------------------------------
# Zeros
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZeroCount:
    count: int
    stable: bool
    zeros: tuple[float, ...]


def _sign_change_zeros(f: Callable, lo: float, hi: float, samples: int) -> list[float]:
    x = np.linspace(lo, hi, samples)
    v = np.real(f(x))
    s = np.sign(v)
    zeros = []
    for i in np.nonzero(s[:-1] * s[1:] < 0)[0]:
        zeros.append(brentq(lambda t: float(np.real(f(np.array([t]))[0])), x[i], x[i + 1], xtol=1e-14))
    zeros.extend(float(t) for t in x[1:-1][s[1:-1] == 0])
    return sorted(zeros)


def count_sign_changes(f: Callable, window: tuple[float, float], samples: int = 2000,
                       margin: float = 1e-6) -> ZeroCount:
    """Bracketed, bisection-confirmed sign changes of ``f`` on ``window``.

    The count is stable when doubling ``samples`` does not change it.
    """
    lo, hi = window
    pad = margin * (hi - lo)
    lo, hi = lo + pad, hi - pad
    z1 = _sign_change_zeros(f, lo, hi, samples)
    z2 = _sign_change_zeros(f, lo, hi, 2 * samples)
    return ZeroCount(len(z1), len(z1) == len(z2), tuple(z1))


def zero_window(desc: System, p: Poly) -> tuple[float, float]:
    """Real-axis window containing every zero of ``p(eta(x))`` in range."""
    lo, hi = desc.x_range
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi
    roots = np.roots(np.asarray(p.numeric(), dtype=complex)[::-1]) if p.degree > 0 else np.array([])
    real = roots.real[np.abs(roots.imag) <= 1e-6 * np.maximum(1.0, np.abs(roots))]
    if desc.family in (Family.L, Family.W):
        real = real[real > 0]
    xs = np.abs(eta_inverse(desc, real)) if real.size else np.array([1.0])
    top = 1.2 * float(np.max(xs)) + 1.0
    return (lo if math.isfinite(lo) else -top, hi if math.isfinite(hi) else top)


@dataclass(frozen=True)
class InterlacingResult:
    holds: bool
    stable: bool
    zeros_lower: tuple[float, ...]
    zeros_upper: tuple[float, ...]


def interlacing_check(desc: System, j: int) -> InterlacingResult:
    """Zeros of the ``j``-th and ``(j+1)``-th seed eigenfunctions alternate."""
    pj, pk = poly_coeffs(desc, j), poly_coeffs(desc, j + 1)
    window = zero_window(desc, pk)
    fj = lambda x: np.real(pj(eta(desc, x)))
    fk = lambda x: np.real(pk(eta(desc, x)))
    a, b = count_sign_changes(fj, window), count_sign_changes(fk, window)
    za, zb = a.zeros, b.zeros
    holds = len(za) == j and len(zb) == j + 1 and all(zb[i] < za[i] < zb[i + 1] for i in range(j))
    return InterlacingResult(holds, a.stable and b.stable, za, zb)


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def _allowed(levels: Sequence[int], deleted: Sequence[int], count: int) -> list[int]:
    out, n = [], 0
    if levels:
        return [n for n in levels if n not in deleted]
    while len(out) < count:
        if n not in deleted:
            out.append(n)
        n += 1
    return out


def _is_prefix(levels: Sequence[int]) -> bool:
    return list(levels) == list(range(1, len(levels) + 1))


def run_suite(desc: System, deleted: Sequence[int], levels: Sequence[int] = (),
              force: bool = False, gridsize: int = 400,
              tolerance: float | None = None) -> list[ResidualReport]:
    """All checks that apply to one system and deletion set."""
    reports: list[ResidualReport] = []
    meta = {"family": desc.family.value, "params": {k: str(v) for k, v in desc.par.items()},
            "deleted": sorted(deleted)}
    sys = build_modified(desc, deleted, force=force)
    tol_q = 1e-6 if tolerance is None else tolerance
    tol_d = 1e-8 if tolerance is None else tolerance
    lo, hi = sample_window(desc)
    pts = np.linspace(lo, hi, 20) + 0.0137 * (hi - lo) / 20
    pts = pts[pts < hi]

    reports.append(ResidualReport("shape-invariance", shape_invariance_residual(desc, pts),
                                  1e-10 if desc.regime == "ordinary" else 1e-9, dict(meta)))
    herm = ResidualReport("hermiticity", float(len(sys.singular_points)) + (0.0 if sys.deletion.admissible else 1.0),
                          0.0, dict(meta, admissible=sys.deletion.admissible,
                                    singular_points=[complex(z).real for z in sys.singular_points]))
    reports.append(herm)
    if not herm.passed:
        return reports

    allowed = _allowed(levels, sys.deletion.levels, 5 if desc.regime == "ordinary" else 4)
    for n in allowed:
        if desc.regime == "ordinary":
            reports.append(schrodinger_residual_qm(sys, n, gridsize, tol_q))
        else:
            reports.append(difference_residual_dqm(sys, n, pts, tol_d))
    if desc.regime == "discrete" and sys.ell:
        reports.append(ResidualReport("potential-product-chain", prodV_residual(sys, pts), 1e-8, dict(meta)))
    expected = [norm_h(desc, n) for n in allowed] if not sys.ell else None
    reports.extend(gram_report(sys, allowed, expected))

    if sys.ell and _is_prefix(sys.deletion.levels):
        ell = sys.ell
        a, b = xi_ell(desc, ell), xi_ell_determinant(desc, ell)
        scale = max(abs(complex(c)) for c in a)
        diff = max(abs(complex(a[k] if k < len(a) else 0) - complex(b[k] if k < len(b) else 0))
                   for k in range(max(len(a), len(b))))
        reports.append(ResidualReport("deforming-polynomial-routes", diff / scale,
                                      0.0 if desc.exact and desc.regime == "ordinary" else 1e-10, dict(meta)))
        if ell % 2 == 0:
            ell_levels = [n for n in allowed if n == 0 or n > ell]
            es = EllSystem(desc, ell, a)
            reports.extend(r for r in gram_report(es, ell_levels, [h_ell_n(desc, ell, n) for n in ell_levels])
                           if r.check == "norms")
            for n in ell_levels:
                if n == 0:
                    continue
                p = P_ell_n(desc, ell, n)
                zc = count_sign_changes(lambda x: np.real(p(eta(desc, x))), zero_window(desc, p))
                reports.append(ResidualReport(f"zeros[n={n}]", abs(zc.count - (n - ell)), 0.0,
                                              dict(meta, n=n, count=zc.count, indeterminate=not zc.stable)))
        for n in [m for m in allowed if m > ell]:
            reports.append(ResidualReport(f"intertwining[n={n}]", intertwine_residual(desc, ell, n, pts),
                                          1e-8, dict(meta, n=n)))
    return reports
