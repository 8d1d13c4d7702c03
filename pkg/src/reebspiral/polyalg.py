"""Homogeneous polynomials in (u, v) with exact rational coefficients.

The coefficient of u^(k-m) v^m sits at index m. Coefficients are
``Fraction`` unless a float is supplied, in which case the polynomial (and
anything computed from it) is in float mode.

Conventions: {P, Q} = P_u Q_v - P_v Q_u, A = u d/dv - v d/du and
I = u^2 + v^2, so that {I, Q} = 2 A Q. On the unit circle A acts as
d/dtheta.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from numbers import Rational
from typing import Iterable, Sequence, Union

Number = Union[Fraction, float]


class PolyError(ValueError):
    """Input outside the domain of an operation."""


def _coerce(c) -> Number:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (bool,)):
        raise TypeError("booleans are not coefficients")
    if isinstance(c, Rational):
        return Fraction(c)
    if isinstance(c, str):
        c = c.strip()
        try:
            return Fraction(c)
        except ValueError:
            return float(c)
    if isinstance(c, float):
        return c
    raise TypeError(f"unsupported coefficient {c!r}")


@dataclass(frozen=True)
class HomPoly:
    coeffs: tuple

    def __init__(self, coeffs: Iterable):
        cs = tuple(_coerce(c) for c in coeffs)
        if not cs:
            raise PolyError("a homogeneous polynomial needs at least one coefficient")
        object.__setattr__(self, "coeffs", cs)

    # constructors

    @classmethod
    def zero(cls, k: int) -> "HomPoly":
        return cls([0] * (k + 1))

    @classmethod
    def monomial(cls, k: int, m: int, c=1) -> "HomPoly":
        """c u^(k-m) v^m."""
        if not 0 <= m <= k:
            raise PolyError(f"monomial index {m} outside 0..{k}")
        cs = [0] * (k + 1)
        cs[m] = c
        return cls(cs)

    @classmethod
    def invariant(cls, n: int) -> "HomPoly":
        """I^n = (u^2 + v^2)^n."""
        cs = [0] * (2 * n + 1)
        for i in range(n + 1):
            cs[2 * i] = comb(n, i)
        return cls(cs)

    @classmethod
    def parse(cls, text: str) -> "HomPoly":
        """Comma separated coefficients, e.g. ``1,0,-1/2``."""
        parts = [p for p in text.replace(" ", "").split(",")]
        if not parts or any(p == "" for p in parts):
            raise PolyError(f"cannot parse polynomial {text!r}")
        return cls(parts)

    # basic structure

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.coeffs)

    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coeffs)

    def to_float(self) -> "HomPoly":
        return HomPoly([float(c) for c in self.coeffs])

    def format(self) -> str:
        return ",".join(_fmt(c) for c in self.coeffs)

    def __str__(self) -> str:
        return self.format()

    def __call__(self, u, v):
        k = self.degree
        return sum(c * u ** (k - m) * v ** m for m, c in enumerate(self.coeffs))

    # arithmetic

    def _same_degree(self, other: "HomPoly"):
        if not isinstance(other, HomPoly):
            return NotImplemented
        if other.degree != self.degree:
            raise PolyError(f"degrees differ: {self.degree} and {other.degree}")
        return other

    def __add__(self, other):
        other = self._same_degree(other)
        if other is NotImplemented:
            return other
        return HomPoly([a + b for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        other = self._same_degree(other)
        if other is NotImplemented:
            return other
        return HomPoly([a - b for a, b in zip(self.coeffs, other.coeffs)])

    def __neg__(self):
        return HomPoly([-c for c in self.coeffs])

    def __mul__(self, other):
        if isinstance(other, HomPoly):
            out = [Fraction(0)] * (self.degree + other.degree + 1)
            for i, a in enumerate(self.coeffs):
                if a == 0:
                    continue
                for j, b in enumerate(other.coeffs):
                    out[i + j] += a * b
            res = HomPoly(out)
            return res if self.exact and other.exact else res.to_float()
        c = _coerce(other)
        return HomPoly([c * a for a in self.coeffs])

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, HomPoly):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def du(self) -> "HomPoly":
        k = self.degree
        if k == 0:
            return HomPoly([0])
        return HomPoly([(k - m) * self.coeffs[m] for m in range(k)])

    def dv(self) -> "HomPoly":
        k = self.degree
        if k == 0:
            return HomPoly([0])
        return HomPoly([(m + 1) * self.coeffs[m + 1] for m in range(k)])


def _fmt(c: Number) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return repr(float(c))


U = HomPoly([1, 0])
V = HomPoly([0, 1])
I = HomPoly.invariant(1)


def poisson_uv(P: HomPoly, Q: HomPoly) -> HomPoly:
    """{P, Q} = P_u Q_v - P_v Q_u; the zero polynomial of degree 0 when deg P + deg Q < 2."""
    if P.degree + Q.degree < 2:
        return HomPoly([0])
    # a constant factor has zero derivatives, which du/dv return as degree 0
    if P.degree == 0 or Q.degree == 0:
        return HomPoly.zero(P.degree + Q.degree - 2)
    return P.du() * Q.dv() - P.dv() * Q.du()


def a_operator(Q: HomPoly) -> HomPoly:
    """A Q = u Q_v - v Q_u."""
    if Q.degree == 0:
        return HomPoly.zero(0) if Q.exact else HomPoly([0.0])
    return U * Q.dv() - V * Q.du()


def a_matrix(k: int) -> list:
    """Matrix of A on P_k in the monomial basis (column m is A of u^(k-m) v^m)."""
    cols = [a_operator(HomPoly.monomial(k, m)).coeffs for m in range(k + 1)]
    return [[cols[c][r] for c in range(k + 1)] for r in range(k + 1)]


def exact_rank(rows: Sequence[Sequence]) -> int:
    """Rank of a matrix of rationals by fraction-exact elimination."""
    M = [[Fraction(x) for x in row] for row in rows]
    rank = 0
    n_cols = len(M[0]) if M else 0
    for col in range(n_cols):
        pivot = next((r for r in range(rank, len(M)) if M[r][col] != 0), None)
        if pivot is None:
            continue
        M[rank], M[pivot] = M[pivot], M[rank]
        for r in range(len(M)):
            if r != rank and M[r][col] != 0:
                f = M[r][col] / M[rank][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[rank])]
        rank += 1
    return rank


def circle_moment(a: int, b: int) -> Fraction:
    """(1/2pi) * integral of cos^a sin^b over the circle: (a-1)!!(b-1)!!/(a+b)!! for even a, b."""
    if a % 2 or b % 2:
        return Fraction(0)
    return Fraction(_double_factorial(a - 1) * _double_factorial(b - 1), _double_factorial(a + b))


def _double_factorial(n: int) -> int:
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def inner_product(Q1: HomPoly, Q2: HomPoly) -> Number:
    """Circle average of Q1 Q2, exact for rational inputs."""
    k1, k2 = Q1.degree, Q2.degree
    total = Fraction(0)
    for i, a in enumerate(Q1.coeffs):
        if a == 0:
            continue
        for j, b in enumerate(Q2.coeffs):
            if b == 0:
                continue
            total += a * b * circle_moment(k1 - i + k2 - j, i + j)
    return total


def circle_average(Q: HomPoly) -> Number:
    return inner_product(Q, HomPoly([1]))


def decompose(Q: HomPoly) -> tuple:
    """(Q0, c) with Q = Q0 + c I^(k/2) and Q0 of zero circle average; c = 0 for odd k."""
    k = Q.degree
    if k % 2:
        return Q, Fraction(0) if Q.exact else 0.0
    c = circle_average(Q)
    return Q - c * HomPoly.invariant(k // 2), c


def fourier_basis(k: int, m: int) -> tuple:
    """(C, S): homogeneous lifts of cos(m theta), sin(m theta) to degree k.

    Re and Im of (u + i v)^m times I^((k-m)/2); m must have the parity of k.
    """
    if m < 0 or m > k or (k - m) % 2:
        raise PolyError(f"no degree {k} lift of mode {m}")
    re = [0] * (m + 1)
    im = [0] * (m + 1)
    for r in range(m + 1):
        c = comb(m, r)
        # i^r
        if r % 4 == 0:
            re[r] = c
        elif r % 4 == 1:
            im[r] = c
        elif r % 4 == 2:
            re[r] = -c
        else:
            im[r] = -c
    lift = HomPoly.invariant((k - m) // 2)
    return HomPoly(re) * lift, HomPoly(im) * lift


def fourier_coefficients(Q: HomPoly) -> dict:
    """Mode m -> (a_m, b_m) with Q = sum a_m cos(m t) + b_m sin(m t) on the circle."""
    k = Q.degree
    out = {}
    for m in range(k % 2, k + 1, 2):
        C, S = fourier_basis(k, m)
        if m == 0:
            out[0] = (inner_product(Q, C), Fraction(0))
        else:
            out[m] = (2 * inner_product(Q, C), 2 * inner_product(Q, S))
    return out


def solve_cohomological(R: HomPoly, tol: float = 1e-12) -> HomPoly:
    """The unique Q of zero circle average with A Q = R.

    On the circle A is d/dtheta, so each mode m != 0 is divided by i m.
    """
    k = R.degree
    _, c = decompose(R)
    if (c != 0) if R.exact else abs(c) > tol:
        raise PolyError(f"R has circle average {c}; it is not in the range of A")
    Q = HomPoly.zero(k)
    if not R.exact:
        Q = Q.to_float()
    for m, (a, b) in fourier_coefficients(R).items():
        if m == 0:
            continue
        C, S = fourier_basis(k, m)
        # d/dt (a' cos + b' sin) = m b' cos - m a' sin
        Q = Q + C * (-b / m) + S * (a / m)
    return Q
