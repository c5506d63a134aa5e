"""Seed families of exactly solvable Hamiltonians.

Seven shape invariant systems are supported.  Three live in ordinary quantum
mechanics (Hermite ``H``, Laguerre ``L``, Jacobi ``J``) and four in discrete
quantum mechanics with pure imaginary shifts (Meixner-Pollaczek ``MP``,
continuous Hahn ``CH``, Wilson ``W``, Askey-Wilson ``AW``).

A :class:`System` bundles a family with its parameter values.  Everything
else in this module is a pure function of a :class:`System`: the sinusoidal
coordinate, the potential function, the ground state, the spectrum, the
eigenpolynomials as :class:`Poly` coefficient vectors, the factorisation
constants and the norms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Iterable

import numpy as np
from scipy.special import loggamma

__all__ = [
    "Family", "System", "Poly", "make_system",
    "ParameterError", "DomainError", "RegimeError", "ConsistencyError",
    "eta", "eta_inverse", "deta", "d2eta", "eta_shift_identities",
    "varphi", "varphi_ell", "potential_V", "potential_V_star",
    "ground_state", "log_ground_state", "prepotential", "prepotential_derivs",
    "energy", "leading_coeff", "poly_coeffs", "fn_bn", "norm_h",
    "forward_shift", "backward_shift", "apply_backward", "shape_invariance_residual",
    "zero_mode_residual", "pochhammer", "hermite_sum", "laguerre_sum", "jacobi_sum",
    "difference_operator_matrix", "qpochhammer", "log_qpochhammer_inf",
    "sample_window",
]


class ParameterError(ValueError):
    """A parameter set violates the validity domain of its family."""


class DomainError(ValueError):
    """A function was evaluated at a singular point."""


class RegimeError(ValueError):
    """An operation was requested for the wrong regime."""


class ConsistencyError(RuntimeError):
    """Two routes to the same quantity disagree beyond tolerance."""


class Family(str, Enum):
    H = "H"
    L = "L"
    J = "J"
    MP = "MP"
    CH = "CH"
    W = "W"
    AW = "AW"

    @property
    def regime(self) -> str:
        return "ordinary" if self in _ORDINARY else "discrete"

    @property
    def param_names(self) -> tuple[str, ...]:
        return _PARAM_NAMES[self]


_ORDINARY = frozenset({Family.H, Family.L, Family.J})
_PARAM_NAMES = {
    Family.H: (),
    Family.L: ("g",),
    Family.J: ("g", "h"),
    Family.MP: ("a",),
    Family.CH: ("a1", "a2"),
    Family.W: ("a1", "a2", "a3", "a4"),
    Family.AW: ("a1", "a2", "a3", "a4", "q"),
}


def _is_exact(v) -> bool:
    return isinstance(v, Rational)


def _as_scalar(v):
    """Normalise a user parameter: ints stay exact, complex with zero imag become real."""
    if isinstance(v, bool):
        raise ParameterError("boolean is not a parameter value")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, Fraction):
        return v
    if isinstance(v, complex):
        return v.real if v.imag == 0 else v
    if isinstance(v, (float, np.floating)):
        return float(v)
    if isinstance(v, np.complexfloating):
        return _as_scalar(complex(v))
    if isinstance(v, Rational):
        return Fraction(v)
    raise ParameterError(f"unsupported parameter value {v!r}")


def _half(exact: bool):
    return Fraction(1, 2) if exact else 0.5


# ---------------------------------------------------------------------------
# Polynomials in the sinusoidal coordinate
# ---------------------------------------------------------------------------

def _zero_like(v):
    return Fraction(0) if _is_exact(v) else 0.0


class Poly:
    """Dense polynomial in ``eta``; ``coeffs[k]`` multiplies ``eta**k``.

    Coefficients are either exact rationals (:class:`fractions.Fraction`) or
    Python/NumPy floating-point numbers.  Trailing exact zeros are dropped, so
    the zero polynomial has an empty coefficient tuple and degree ``-inf``.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = ()):
        c = [_as_coeff(v) for v in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)

    @classmethod
    def eta(cls) -> "Poly":
        return cls((Fraction(0), Fraction(1)))

    @classmethod
    def const(cls, v) -> "Poly":
        return cls((v,))

    @property
    def degree(self):
        return len(self.coeffs) - 1 if self.coeffs else -math.inf

    @property
    def is_exact(self) -> bool:
        return all(_is_exact(v) for v in self.coeffs)

    @property
    def leading(self):
        return self.coeffs[-1] if self.coeffs else 0

    def is_zero(self) -> bool:
        return not self.coeffs

    def __len__(self):
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def __getitem__(self, k):
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else 0

    def __call__(self, x):
        if not self.coeffs:
            return 0 * x
        if isinstance(x, np.ndarray) or not (self.is_exact and _is_exact(x)):
            c = self.numeric()
            acc = np.zeros_like(np.asarray(x), dtype=np.result_type(c.dtype, np.asarray(x).dtype, float))
            acc = acc + c[-1]
            for v in c[-2::-1]:
                acc = acc * x + v
            return acc if isinstance(x, np.ndarray) else acc[()]
        acc = self.coeffs[-1]
        for v in self.coeffs[-2::-1]:
            acc = acc * x + v
        return acc

    def numeric(self) -> np.ndarray:
        """Coefficients as a float or complex NumPy array."""
        vals = [complex(v) if isinstance(v, complex) else v for v in self.coeffs]
        arr = np.array([float(v) if _is_exact(v) else v for v in vals])
        if arr.dtype == object:
            arr = arr.astype(complex)
        return arr

    def to_float(self) -> "Poly":
        return Poly(self.numeric())

    def real(self) -> "Poly":
        return Poly(np.real(self.numeric()))

    def __add__(self, other):
        other = _as_poly(other)
        n = max(len(self), len(other))
        return Poly(self[k] + other[k] for k in range(n))

    __radd__ = __add__

    def __neg__(self):
        return Poly(-v for v in self.coeffs)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly(v * other for v in self.coeffs)
        if not self.coeffs or not other.coeffs:
            return Poly()
        out = [_zero_like(self.coeffs[0] * other.coeffs[0])] * (len(self) + len(other) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out[i + j] + a * b
        return Poly(out)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Poly(v / scalar for v in self.coeffs)

    def __pow__(self, k: int):
        out = Poly.const(Fraction(1))
        for _ in range(k):
            out = out * self
        return out

    def deriv(self, m: int = 1) -> "Poly":
        c = list(self.coeffs)
        for _ in range(m):
            c = [k * c[k] for k in range(1, len(c))]
        return Poly(c)

    def compose_linear(self, scale, shift=0) -> "Poly":
        """Return ``p(scale * eta + shift)``."""
        lin = Poly((shift, scale))
        out = Poly()
        for v in reversed(self.coeffs):
            out = out * lin + Poly.const(v)
        return out

    def divmod(self, other: "Poly"):
        """Polynomial long division; returns ``(quotient, remainder)``."""
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = len(rem) - len(other)
        if dq < 0:
            return Poly(), Poly(rem)
        quo = [0] * (dq + 1)
        lead = other.leading
        for k in range(dq, -1, -1):
            t = rem[k + len(other) - 1] / lead
            quo[k] = t
            for j, b in enumerate(other.coeffs):
                rem[k + j] = rem[k + j] - t * b
        rem = rem[: len(other) - 1]
        return Poly(quo), Poly(rem)

    def exact_div(self, other: "Poly") -> "Poly":
        """Division known to be exact; a non-zero exact remainder is an error."""
        q, r = self.divmod(other)
        if r.is_exact and q.is_exact and not r.is_zero():
            raise ConsistencyError("inexact polynomial division in exact arithmetic")
        return q

    def trimmed(self, rtol: float = 1e-12) -> "Poly":
        """Drop trailing coefficients negligible relative to the largest one."""
        if self.is_exact or not self.coeffs:
            return self
        c = self.numeric()
        scale = np.max(np.abs(c))
        k = len(c)
        while k and abs(c[k - 1]) <= rtol * scale:
            k -= 1
        return Poly(c[:k])

    def allclose(self, other: "Poly", rtol: float = 1e-10) -> bool:
        a, b = self.numeric(), _as_poly(other).numeric()
        n = max(len(a), len(b))
        a = np.pad(a, (0, n - len(a)))
        b = np.pad(b, (0, n - len(b)))
        scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0), 1e-300)
        return bool(np.max(np.abs(a - b), initial=0.0) <= rtol * scale)

    def __eq__(self, other):
        if not isinstance(other, Poly):
            other = _as_poly(other)
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"Poly({list(self.coeffs)!r})"


def _as_coeff(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, np.generic):
        return v.item()
    return v


def _as_poly(v) -> Poly:
    return v if isinstance(v, Poly) else Poly.const(v)


# ---------------------------------------------------------------------------
# Special-function helpers
# ---------------------------------------------------------------------------

def pochhammer(a, n: int):
    """Rising factorial ``(a)_n``; exact for rational ``a``."""
    out = Fraction(1) if _is_exact(a) else 1.0
    for k in range(n):
        out = out * (a + k)
    return out


def qpochhammer(a, q, n: int):
    """Finite q-shifted factorial ``(a; q)_n``."""
    out = 1.0
    for k in range(n):
        out = out * (1 - a * q**k)
    return out


_QPOCH_CUTOFF = 1e-18


def log_qpochhammer_inf(a, q: float):
    """``log (a; q)_inf`` summed as ``log1p(-a q^k)`` until ``|a q^k| < 1e-18``.

    The dropped tail is bounded by about ``1e-18 / (1 - q)`` in absolute value.
    Vectorised over ``a``.
    """
    a = np.asarray(a, dtype=complex)
    amax = float(np.max(np.abs(a), initial=0.0))
    if amax == 0.0:
        return np.zeros_like(a)
    nterms = max(1, int(math.ceil(math.log(_QPOCH_CUTOFF / amax) / math.log(q))) + 1)
    qk = q ** np.arange(nterms)
    return np.sum(np.log1p(-a[..., None] * qk), axis=-1)


# ---------------------------------------------------------------------------
# System descriptor
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class System:
    """A seed family together with its parameter values.

    Instances are immutable and hashable.  Use :func:`make_system` to build a
    validated instance; the raw constructor skips validation and is used for
    the formally shifted parameter sets that appear in deforming polynomials.
    """

    family: Family
    params: tuple = ()
    validated: bool = False

    def _key(self):
        # 1.0 == Fraction(1) hashes alike; cached exact and float results must not mix
        return (self.family, tuple((type(v).__name__, v) for v in self.params), self.validated)

    def __eq__(self, other):
        return isinstance(other, System) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @property
    def par(self) -> dict:
        return dict(zip(self.family.param_names, self.params))

    @property
    def regime(self) -> str:
        return self.family.regime

    @property
    def exact(self) -> bool:
        return self.family in (Family.H, Family.L, Family.J, Family.MP) and all(
            _is_exact(v) for v in self.params)

    @property
    def q(self) -> float:
        return float(self.par["q"])

    @property
    def gamma(self) -> float:
        if self.regime == "ordinary":
            raise RegimeError("the shift unit is defined for discrete families only")
        return math.log(self.q) if self.family is Family.AW else 1.0

    @property
    def kappa(self):
        return 1.0 / self.q if self.family is Family.AW else 1

    @property
    def delta(self) -> tuple:
        f = self.family
        h = _half(True)
        return {Family.H: (), Family.L: (1,), Family.J: (1, 1), Family.MP: (h,),
                Family.CH: (h, h), Family.W: (h,) * 4, Family.AW: (h,) * 4}[f]

    @property
    def x_range(self) -> tuple[float, float]:
        f = self.family
        if f in (Family.H, Family.MP, Family.CH):
            return (-math.inf, math.inf)
        if f in (Family.L, Family.W):
            return (0.0, math.inf)
        if f is Family.J:
            return (0.0, math.pi / 2)
        return (0.0, math.pi)

    @property
    def avec(self) -> tuple:
        p = self.par
        if self.family is Family.MP:
            return (p["a"],)
        if self.family is Family.CH:
            return (p["a1"], p["a2"])
        return tuple(p[k] for k in ("a1", "a2", "a3", "a4"))

    @property
    def b1(self):
        if self.family is Family.CH:
            s = sum(self.avec)
            return 2 * s.real if isinstance(s, complex) else 2 * s
        if self.family is Family.W:
            s = sum(self.avec)
            return float(complex(s).real) if isinstance(s, complex) else s
        raise RegimeError("b1 is defined for CH and W only")

    @property
    def b4(self) -> float:
        if self.family is not Family.AW:
            raise RegimeError("b4 is defined for AW only")
        return complex(np.prod([complex(a) for a in self.avec])).real

    def _replace(self, params) -> "System":
        return System(self.family, tuple(params), validated=False)

    def shift(self, k) -> "System":
        """Parameters shifted by ``k`` units of the shape-invariance step."""
        if k == 0:
            return self
        f, p = self.family, self.par
        if f is Family.H:
            return self
        if f is Family.L:
            return self._replace((p["g"] + k,))
        if f is Family.J:
            return self._replace((p["g"] + k, p["h"] + k))
        if f is Family.AW:
            s = self.q ** (k / 2)
            return self._replace(tuple(a * s for a in self.avec) + (p["q"],))
        step = Fraction(k) / 2
        return self._replace(tuple(a + (step if _is_exact(a) else float(step)) for a in self.params))

    def dual(self, ell: int) -> "System":
        """The conjugate-negated, shifted parameter set ``-lambda* - (ell-1) delta``.

        For AW the parameters are ``a = q**lambda``, so the map reads
        ``a -> q**(-(ell-1)/2) / conj(a)``.
        """
        f = self.family
        if f is Family.AW:
            s = self.q ** (-(ell - 1) / 2)
            return self._replace(tuple(s / _conj(a) for a in self.avec) + (self.par["q"],))
        if f in (Family.MP, Family.CH, Family.W):
            step = Fraction(ell - 1, 2)
            return self._replace(tuple(-_conj(a) - (step if _is_exact(a) else float(step))
                                       for a in self.params))
        if f is Family.L:
            return self._replace((-self.par["g"] - (ell - 1),))
        if f is Family.J:
            return self._replace((-self.par["g"] - (ell - 1), -self.par["h"] - (ell - 1)))
        return self


def _conj(a):
    return a.conjugate() if isinstance(a, complex) else a


def _multiset_closed_under_conj(vals, tol=1e-12) -> bool:
    remaining = [complex(v) for v in vals]
    for v in [complex(v) for v in vals]:
        target = v.conjugate()
        idx = min(range(len(remaining)), key=lambda i: abs(remaining[i] - target))
        if abs(remaining[idx] - target) > tol * max(1.0, abs(target)):
            return False
        remaining.pop(idx)
    return True


def make_system(family, **params) -> System:
    """Build a validated :class:`System`.

    Raises :class:`ParameterError` naming the violated constraint when the
    parameters are missing, unexpected or outside the family's domain.
    """
    fam = Family(family) if not isinstance(family, Family) else family
    names = fam.param_names
    extra = set(params) - set(names)
    if extra:
        raise ParameterError(f"{fam.value}: unexpected parameter(s) {sorted(extra)}")
    missing = [n for n in names if n not in params]
    if missing:
        raise ParameterError(f"{fam.value}: missing parameter(s) {missing}")
    vals = tuple(_as_scalar(params[n]) for n in names)
    p = dict(zip(names, vals))

    def real_positive(name):
        v = p[name]
        if isinstance(v, complex) or not v > 0:
            raise ParameterError(f"{fam.value}: {name} must be real and > 0, got {v}")

    if fam is Family.L:
        real_positive("g")
    elif fam is Family.J:
        real_positive("g")
        real_positive("h")
    elif fam is Family.MP:
        real_positive("a")
    elif fam is Family.CH:
        for n in ("a1", "a2"):
            if not complex(p[n]).real > 0:
                raise ParameterError(f"CH: Re {n} must be > 0, got {p[n]}")
    elif fam is Family.W:
        for n in ("a1", "a2", "a3", "a4"):
            if not complex(p[n]).real > 0:
                raise ParameterError(f"W: Re {n} must be > 0, got {p[n]}")
        if not _multiset_closed_under_conj(vals):
            raise ParameterError("W: parameter set {a_i} must be closed under complex conjugation")
    elif fam is Family.AW:
        q = p["q"]
        if isinstance(q, complex) or not 0 < q < 1:
            raise ParameterError(f"AW: q must satisfy 0 < q < 1, got {q}")
        avals = vals[:4]
        for n, v in zip(names, avals):
            if not abs(complex(v)) < 1:
                raise ParameterError(f"AW: |{n}| must be < 1, got {v}")
        if not _multiset_closed_under_conj(avals):
            raise ParameterError("AW: parameter set {a_i} must be closed under complex conjugation")
        # floats suffice for q-series; keep a_i exact only as plain numbers
        vals = tuple(complex(v) if isinstance(v, complex) else float(v) for v in avals) + (float(q),)
    if fam in (Family.CH, Family.W):
        vals = tuple(v if isinstance(v, complex) or _is_exact(v) else float(v) for v in vals)
    return System(fam, vals, validated=True)


def _require(sys: System, regime: str):
    if sys.regime != regime:
        raise RegimeError(f"{sys.family.value} is {sys.regime}; operation needs a {regime} family")


# ---------------------------------------------------------------------------
# Coordinates and auxiliary functions
# ---------------------------------------------------------------------------

def eta(sys: System, x):
    """Sinusoidal coordinate: x (H, MP, CH), x**2 (L, W), cos 2x (J), cos x (AW)."""
    f = sys.family
    if f in (Family.H, Family.MP, Family.CH):
        return x
    if f in (Family.L, Family.W):
        return x * x
    if f is Family.J:
        return np.cos(2 * x)
    return np.cos(x)


def eta_inverse(sys: System, e):
    """A preimage of ``e`` under :func:`eta`, on the physical branch for real input in range."""
    f = sys.family
    e = np.asarray(e)
    if f in (Family.H, Family.MP, Family.CH):
        return e
    if f in (Family.L, Family.W):
        return np.sqrt(e.astype(complex)) if np.iscomplexobj(e) or np.any(e < 0) else np.sqrt(e)
    if f is Family.J:
        return np.arccos(e) / 2
    return np.arccos(e)


def deta(sys: System, x):
    f = sys.family
    _require(sys, "ordinary")
    if f is Family.H:
        return np.ones_like(np.asarray(x, dtype=float)) if isinstance(x, np.ndarray) else 1.0
    if f is Family.L:
        return 2 * x
    return -2 * np.sin(2 * x)


def d2eta(sys: System, x):
    f = sys.family
    _require(sys, "ordinary")
    if f is Family.H:
        return 0 * x
    if f is Family.L:
        return 2 + 0 * x
    return -4 * np.cos(2 * x)


def eta_shift_identities(sys: System, x, k: int):
    """Closed forms of ``eta(x - i k g/2) -/+/* eta(x + i k g/2)``; returns ``(diff, sum, prod)``."""
    _require(sys, "discrete")
    f, e, ph = sys.family, eta(sys, x), varphi(sys, x)
    if f is Family.AW:
        s = sys.gamma * k / 2
        return (-1j * ph * math.sinh(-s), 2 * e * math.cosh(s), e * e + math.sinh(s) ** 2)
    if f is Family.W:
        return (-1j * ph * k, 2 * e - k * k / 2, (e + k * k / 4) ** 2)
    return (-1j * ph * k, 2 * e, e * e + k * k / 4)


def varphi(sys: System, x):
    """Auxiliary function: 1 (MP, CH), 2x (W), 2 sin x (AW)."""
    _require(sys, "discrete")
    f = sys.family
    if f in (Family.MP, Family.CH):
        return np.ones_like(x) if isinstance(x, np.ndarray) else 1.0
    if f is Family.W:
        return 2 * x
    return 2 * np.sin(x)


def varphi_ell(sys: System, ell: int, x):
    """Product of shifted auxiliary functions carrying the non-polynomial part of a Casoratian."""
    g = sys.gamma
    out = varphi(sys, x) ** (ell // 2)
    for k in range(1, ell - 1):
        p = (ell - k) // 2
        if p:
            out = out * (varphi(sys, x - 0.5j * k * g) * varphi(sys, x + 0.5j * k * g)) ** p
    return out


def sample_window(sys: System) -> tuple[float, float]:
    """A finite real window in range where eigenfunctions are non-negligible."""
    f = sys.family
    if f in (Family.H, Family.MP, Family.CH):
        return (-6.0, 6.0)
    if f is Family.L:
        return (0.05, 6.0)
    if f is Family.W:
        return (0.05, 8.0)
    if f is Family.J:
        return (0.05, math.pi / 2 - 0.05)
    return (0.05, math.pi - 0.05)


# ---------------------------------------------------------------------------
# Potentials and ground states
# ---------------------------------------------------------------------------

def potential_V(sys: System, x):
    """Discrete potential function ``V(x)``; raises :class:`DomainError` at a pole."""
    _require(sys, "discrete")
    f = sys.family
    x = np.asarray(x, dtype=complex)
    if f is Family.MP:
        out = complex(sys.par["a"]) + 1j * x
    elif f is Family.CH:
        a1, a2 = (complex(a) for a in sys.avec)
        out = (a1 + 1j * x) * (a2 + 1j * x)
    elif f is Family.W:
        den = 2j * x * (2j * x + 1)
        if np.any(den == 0):
            raise DomainError("W potential: 2ix(2ix+1) vanishes")
        num = np.ones_like(x)
        for a in sys.avec:
            num = num * (complex(a) + 1j * x)
        out = num / den
    else:
        z = np.exp(1j * x)
        den = (1 - z * z) * (1 - sys.q * z * z)
        if np.any(den == 0):
            raise DomainError("AW potential: (1-e^{2ix})(1-q e^{2ix}) vanishes")
        num = np.ones_like(x)
        for a in sys.avec:
            num = num * (1 - complex(a) * z)
        out = num / den
    return out[()] if out.ndim == 0 else out


def potential_V_star(sys: System, x):
    """``V*(x) = conj(V(conj x))``."""
    return np.conj(potential_V(sys, np.conj(np.asarray(x, dtype=complex))))


def prepotential(sys: System, x):
    """Ordinary prepotential ``W(x)`` (log of the ground state)."""
    _require(sys, "ordinary")
    f, p = sys.family, sys.par
    if f is Family.H:
        return -x * x / 2
    xa = np.asarray(x)
    if np.isrealobj(xa):
        lo, hi = sys.x_range
        if np.any((xa <= lo) | (xa >= hi)):
            raise DomainError(f"{f.value} prepotential: real x must lie in the open range ({lo}, {hi})")
    if f is Family.L:
        if np.any(xa == 0):
            raise DomainError("L prepotential: log x is singular at x = 0")
        return -x * x / 2 + float(p["g"]) * np.log(x)
    s, c = np.sin(x), np.cos(x)
    if np.any(np.asarray(s) == 0) or np.any(np.asarray(c) == 0):
        raise DomainError("J prepotential: singular at the boundary")
    return float(p["g"]) * np.log(s) + float(p["h"]) * np.log(c)


def prepotential_derivs(sys: System, x):
    """First and second derivatives of the ordinary prepotential."""
    _require(sys, "ordinary")
    f, p = sys.family, sys.par
    if f is Family.H:
        return -x, -1.0 + 0 * x
    if f is Family.L:
        g = float(p["g"])
        return -x + g / x, -1.0 - g / (x * x)
    g, h = float(p["g"]), float(p["h"])
    s, c = np.sin(x), np.cos(x)
    return g * c / s - h * s / c, -g / (s * s) - h / (c * c)


def log_ground_state(sys: System, x):
    """Analytic logarithm of the ground state; real on the real axis."""
    if sys.regime == "ordinary":
        return prepotential(sys, x)
    f = sys.family
    x = np.asarray(x, dtype=complex)
    if f is Family.MP:
        a = complex(sys.par["a"])
        out = 0.5 * (loggamma(a + 1j * x) + loggamma(a - 1j * x))
    elif f is Family.CH:
        a1, a2 = (complex(a) for a in sys.avec)
        out = 0.5 * (loggamma(a1 + 1j * x) + loggamma(a2 + 1j * x)
                     + loggamma(a1.conjugate() - 1j * x) + loggamma(a2.conjugate() - 1j * x))
    elif f is Family.W:
        if np.any(x == 0):
            raise DomainError("W ground state: Gamma(2ix) is singular at x = 0")
        acc = -loggamma(2j * x) - loggamma(-2j * x)
        for a in sys.avec:
            acc = acc + loggamma(complex(a) + 1j * x) + loggamma(complex(a) - 1j * x)
        out = 0.5 * acc
    else:
        q = sys.q
        z = np.exp(1j * x)
        acc = log_qpochhammer_inf(z * z, q) + log_qpochhammer_inf(1 / (z * z), q)
        for a in sys.avec:
            acc = acc - log_qpochhammer_inf(complex(a) * z, q) - log_qpochhammer_inf(complex(a) / z, q)
        out = 0.5 * acc
    return out[()] if out.ndim == 0 else out


def ground_state(sys: System, x):
    """Ground-state wavefunction; real and positive for real ``x`` in range."""
    lg = log_ground_state(sys, x)
    if np.isrealobj(x):
        return np.exp(np.real(lg))
    return np.exp(lg)


def zero_mode_residual(sys: System, x) -> float:
    """Relative mismatch of the squared zero-mode relation at ``x`` (branch free)."""
    g = sys.gamma
    lo, hi = x - 0.5j * g, x + 0.5j * g
    lhs = potential_V_star(sys, lo) * np.exp(2 * log_ground_state(sys, lo))
    rhs = potential_V(sys, hi) * np.exp(2 * log_ground_state(sys, hi))
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    return float(np.max(np.abs(lhs - rhs) / scale))


# ---------------------------------------------------------------------------
# Spectrum and eigenpolynomials
# ---------------------------------------------------------------------------

def energy(sys: System, n: int):
    """Energy eigenvalue ``E_n``; exact for rational ordinary parameters."""
    f, p = sys.family, sys.par
    if f in (Family.H, Family.MP):
        return Fraction(2 * n)
    if f is Family.L:
        return Fraction(4 * n)
    if f is Family.J:
        return 4 * n * (n + p["g"] + p["h"])
    if f in (Family.CH, Family.W):
        return n * (n + sys.b1 - 1)
    q = sys.q
    return (q ** -n - 1) * (1 - sys.b4 * q ** (n - 1))


def leading_coeff(sys: System, n: int):
    """Ratio ``c_n`` of the standardised polynomial to its monic form."""
    f, p = sys.family, sys.par
    fac = math.factorial(n)
    if f is Family.H:
        return Fraction(2) ** n
    if f is Family.L:
        return Fraction((-1) ** n, fac)
    if f is Family.J:
        return pochhammer(n + p["g"] + p["h"], n) / (2**n * fac)
    if f is Family.MP:
        return Fraction(2) ** n / fac if _is_exact(p["a"]) else 2.0**n / fac
    if f is Family.CH:
        return pochhammer(n + sys.b1 - 1, n) / fac
    if f is Family.W:
        return (-1) ** n * pochhammer(n + sys.b1 - 1, n)
    return 2.0**n * qpochhammer(sys.b4 * sys.q ** (n - 1), sys.q, n)


def hermite_sum(n: int) -> Poly:
    """Physicists' Hermite polynomial from its explicit sum."""
    c = [Fraction(0)] * (n + 1)
    for m in range(n // 2 + 1):
        c[n - 2 * m] = Fraction((-1) ** m * math.factorial(n) * 2 ** (n - 2 * m),
                                math.factorial(m) * math.factorial(n - 2 * m))
    return Poly(c)


def laguerre_sum(alpha, n: int) -> Poly:
    """Generalised Laguerre polynomial from the terminating sum; any ``alpha``."""
    c = []
    for k in range(n + 1):
        c.append((-1) ** k * pochhammer(alpha + k + 1, n - k) / (math.factorial(n - k) * math.factorial(k)))
    return Poly(c)


def jacobi_sum(alpha, beta, n: int) -> Poly:
    """Jacobi polynomial from the terminating 2F1 sum; any ``alpha``, ``beta``."""
    exact = _is_exact(alpha) and _is_exact(beta)
    one = Fraction(1) if exact else 1.0
    half = Poly((one / 2, -one / 2))
    out = Poly()
    term = Poly.const(one)
    for k in range(n + 1):
        coef = (pochhammer(-n, k) * pochhammer(n + alpha + beta + 1, k)
                * pochhammer(alpha + k + 1, n - k)) / (math.factorial(n) * math.factorial(k))
        out = out + term * coef
        term = term * half
    return out


def _recurrence_poly(sys: System, n: int) -> Poly:
    f, p = sys.family, sys.par
    x = Poly.eta()
    one = Poly.const(Fraction(1))
    if n == 0:
        return one
    if f is Family.H:
        prev, cur = one, x * 2
        for k in range(1, n):
            prev, cur = cur, x * 2 * cur - prev * (2 * k)
        return cur
    if f is Family.L:
        a = p["g"] - _half(_is_exact(p["g"]))
        prev, cur = one, Poly((1 + a, -1))
        for k in range(1, n):
            prev, cur = cur, (Poly((2 * k + 1 + a, -1)) * cur - prev * (k + a)) / (k + 1)
        return cur
    if f is Family.J:
        hf = _half(_is_exact(p["g"]) and _is_exact(p["h"]))
        a, b = p["g"] - hf, p["h"] - hf
        prev, cur = one, Poly(((a - b) / 2, (a + b + 2) / 2))
        for k in range(1, n):
            s = 2 * k + a + b
            lin = Poly(((s + 1) * (a * a - b * b), (s + 1) * (s + 2) * s))
            nxt = (lin * cur - prev * (2 * (k + a) * (k + b) * (s + 2))) / (2 * (k + 1) * (k + a + b + 1) * s)
            prev, cur = cur, nxt
        return cur
    if f is Family.MP:
        a = p["a"]
        prev, cur = one, x * 2
        for k in range(1, n):
            prev, cur = cur, (x * 2 * cur - prev * (k + 2 * a - 1)) / (k + 1)
        return cur
    raise RegimeError(f"no three-term recurrence coded for {f.value}")


def _sampling_circle(sys: System) -> float:
    # keeps sample points clear of the poles of V and V*
    return 0.5 if sys.family is Family.AW else 1.0


def difference_operator_matrix(sys: System, nmax: int) -> np.ndarray:
    """Matrix of ``V(e^{gp}-1) + V*(e^{-gp}-1)`` on monomials ``eta^k``, ``k <= nmax``.

    Column ``k`` holds the coefficients of the image of ``eta**k``.  They are
    recovered by sampling on a circle in the complex ``eta`` plane, which is
    a unitary (perfectly conditioned) transform.
    """
    _require(sys, "discrete")
    m = 2 * (nmax + 1) + 4
    r = _sampling_circle(sys)
    etas = r * np.exp(2j * np.pi * (np.arange(m) + 0.5) / m)
    xs = eta_inverse(sys, etas).astype(complex)
    g = sys.gamma
    v, vs = potential_V(sys, xs), potential_V_star(sys, xs)
    em, ep = eta(sys, xs - 1j * g), eta(sys, xs + 1j * g)
    inv = (etas[:, None] ** -np.arange(m)[None, :]) / m
    out = np.zeros((nmax + 1, nmax + 1), dtype=complex)
    for k in range(nmax + 1):
        vals = v * (em**k - etas**k) + vs * (ep**k - etas**k)
        coef = vals @ inv
        spill = np.max(np.abs(coef[nmax + 1:]), initial=0.0)
        if spill > 1e-8 * max(1.0, np.max(np.abs(coef))):
            raise ConsistencyError(f"difference operator image of eta^{k} is not a polynomial")
        out[:, k] = coef[: nmax + 1]
    return out


def _difference_equation_poly(sys: System, n: int) -> Poly:
    M = difference_operator_matrix(sys, n)
    en = complex(energy(sys, n))
    for k in range(n + 1):
        ek = complex(energy(sys, k))
        if abs(M[k, k] - ek) > 1e-8 * max(1.0, abs(ek)):
            raise ConsistencyError(f"{sys.family.value}: diagonal of difference operator != E_{k}")
    c = np.zeros(n + 1, dtype=complex)
    c[n] = complex(leading_coeff(sys, n))
    for i in range(n - 1, -1, -1):
        gap = en - complex(energy(sys, i))
        if gap == 0:
            raise ConsistencyError(f"degenerate levels {i} and {n}: polynomial undetermined")
        c[i] = (M[i, i + 1:] @ c[i + 1:]) / gap
    return Poly(c)


@lru_cache(maxsize=4096)
def poly_coeffs(sys: System, n: int) -> Poly:
    """Eigenpolynomial ``P_n(eta)`` normalised by :func:`leading_coeff`.

    H, L, J and MP use three-term recurrences (exact for rational parameters);
    CH, W and AW solve the polynomial difference equation on monomials.
    Negative ``n`` yields the zero polynomial.
    """
    if n < 0:
        return Poly()
    if sys.family in (Family.H, Family.L, Family.J, Family.MP):
        return _recurrence_poly(sys, n)
    return _difference_equation_poly(sys, n)


def fn_bn(sys: System, n: int):
    """Factors ``(f_n, b_{n-1})`` of ``E_n``."""
    if n < 1:
        raise ValueError("f_n and b_{n-1} are defined for n >= 1")
    f, p = sys.family, sys.par
    if f is Family.H:
        return Fraction(2 * n), Fraction(1)
    if f is Family.L:
        return Fraction(-2), Fraction(-2 * n)
    if f is Family.J:
        return -2 * (n + p["g"] + p["h"]), Fraction(-2 * n)
    if f is Family.MP:
        return Fraction(2), Fraction(n)
    if f is Family.CH:
        return n + sys.b1 - 1, Fraction(n)
    if f is Family.W:
        return -n * (n + sys.b1 - 1), Fraction(-1)
    q = sys.q
    return (q ** (n / 2) * (q ** -n - 1) * (1 - sys.b4 * q ** (n - 1)), q ** (-n / 2))


def norm_h(sys: System, n: int) -> float:
    """Squared norm of ``P_n`` against the squared ground state."""
    f, p = sys.family, sys.par
    fac = math.factorial(n)
    if f is Family.H:
        return 2**n * fac * math.sqrt(math.pi)
    if f is Family.L:
        return math.gamma(n + float(p["g"]) + 0.5) / (2 * fac)
    if f is Family.J:
        g, h = float(p["g"]), float(p["h"])
        return math.exp(math.lgamma(n + g + 0.5) + math.lgamma(n + h + 0.5) - math.lgamma(n + g + h)) / (
            2 * fac * (2 * n + g + h))
    if f is Family.MP:
        a = float(p["a"])
        return 2 * math.pi * math.exp(math.lgamma(n + 2 * a)) / (fac * 2 ** (2 * a))
    if f is Family.CH:
        a = [complex(v) for v in sys.avec]
        b1 = float(sys.b1)
        lg = sum(loggamma(n + ai + aj.conjugate()) for ai in a for aj in a)
        val = 2 * math.pi * np.exp(lg - loggamma(n + b1 - 1)) / (fac * (2 * n + b1 - 1))
        return float(np.real(val))
    if f is Family.W:
        a = [complex(v) for v in sys.avec]
        b1 = float(sys.b1)
        lg = sum(loggamma(n + a[i] + a[j]) for i in range(4) for j in range(i + 1, 4))
        val = 2 * math.pi * fac * float(pochhammer(n + b1 - 1, n)) * np.exp(lg - loggamma(2 * n + b1))
        return float(np.real(val))
    q, b4 = sys.q, sys.b4
    a = [complex(v) for v in sys.avec]
    lq = log_qpochhammer_inf(b4 * q ** (2 * n), q) - log_qpochhammer_inf(q ** (n + 1), q)
    for i in range(4):
        for j in range(i + 1, 4):
            lq = lq - log_qpochhammer_inf(a[i] * a[j] * q**n, q)
    return float(np.real(2 * math.pi * qpochhammer(b4 * q ** (n - 1), q, n) * np.exp(lq)))


# ---------------------------------------------------------------------------
# Shift operators
# ---------------------------------------------------------------------------

def forward_shift(sys: System, n: int) -> Poly:
    """Forward shift operator applied to ``P_n(eta; lambda)``, as a polynomial in ``eta``."""
    from .determinants import extract_polynomial

    if n < 1:
        raise ValueError("forward shift needs n >= 1")
    pn = poly_coeffs(sys, n)
    f = sys.family
    if f is Family.H:
        return pn.deriv()
    if f is Family.L:
        # (phi0(g)/phi0(g+1)) d/dx = 2 d/d(eta)
        return pn.deriv() * 2
    if f is Family.J:
        # (phi0(g,h)/phi0(g+1,h+1)) d/dx = -4 d/d(eta)
        return pn.deriv() * -4
    g = sys.gamma

    def value(x):
        return 1j * (pn(eta(sys, x - 0.5j * g)) - pn(eta(sys, x + 0.5j * g))) / varphi(sys, x)

    return extract_polynomial(sys, value, None, n - 1)


def apply_backward(sys: System, pm: Poly) -> Poly:
    """Ordinary backward shift operator applied to an arbitrary polynomial in ``eta``."""
    if sys.regime != "ordinary":
        raise RegimeError("polynomial form of the backward shift is coded for ordinary families")
    f, p = sys.family, sys.par
    e = Poly.eta()
    if f is Family.H:
        return e * 2 * pm - pm.deriv()
    if f is Family.L:
        g = p["g"]
        return e * 2 * pm - e * 2 * pm.deriv() - pm * (2 * g + 1)
    g, h = p["g"], p["h"]
    one = Fraction(1) if _is_exact(g) and _is_exact(h) else 1.0
    lin = Poly(((2 * g + 1) * one / 2 - (2 * h + 1) * one / 2, (2 * g + 1) * one / 2 + (2 * h + 1) * one / 2))
    return Poly((one, 0, -one)) * pm.deriv() - lin * pm


def backward_shift(sys: System, n: int) -> Poly:
    """Backward shift operator applied to ``P_{n-1}(eta; lambda + delta)``."""
    from .determinants import extract_polynomial

    if n < 1:
        raise ValueError("backward shift needs n >= 1")
    pm = poly_coeffs(sys.shift(1), n - 1)
    if sys.regime == "ordinary":
        return apply_backward(sys, pm)
    g = sys.gamma

    def value(x):
        lo, hi = x - 0.5j * g, x + 0.5j * g
        return -1j * (potential_V(sys, x) * varphi(sys, lo) * pm(eta(sys, lo))
                      - potential_V_star(sys, x) * varphi(sys, hi) * pm(eta(sys, hi)))

    return extract_polynomial(sys, value, None, n)


def shape_invariance_residual(sys: System, x) -> float:
    """Residual of the shape-invariance relation at ``x`` (max over array input)."""
    nxt = sys.shift(1)
    if sys.regime == "ordinary":
        w1, w2 = prepotential_derivs(sys, x)
        v1, v2 = prepotential_derivs(nxt, x)
        e1 = float(energy(sys, 1))
        lhs = w1 * w1 - w2
        rhs = v1 * v1 + v2 + e1
        scale = np.maximum(np.abs(lhs), 1.0)
        return float(np.max(np.abs(lhs - rhs) / scale))
    g, k = sys.gamma, sys.kappa
    e1 = complex(energy(sys, 1))
    m = x - 0.5j * g
    lhs1 = potential_V(sys, m) * potential_V_star(sys, m)
    rhs1 = k * k * potential_V(nxt, x) * potential_V_star(nxt, x - 1j * g)
    lhs2 = potential_V(sys, x + 0.5j * g) + potential_V_star(sys, m)
    rhs2 = k * (potential_V(nxt, x) + potential_V_star(nxt, x)) - e1
    r1 = np.abs(lhs1 - rhs1) / np.maximum(np.abs(lhs1), 1.0)
    r2 = np.abs(lhs2 - rhs2) / np.maximum(np.maximum(np.abs(lhs2), abs(e1)), 1.0)
    return float(max(np.max(r1), np.max(r2)))
