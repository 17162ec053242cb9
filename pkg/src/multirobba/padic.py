"""Capped-relative p-adic scalars.

A nonzero scalar is ``p**valuation * unit`` where ``unit`` is an integer
residue modulo ``p**precision`` that is prime to ``p``.  Two kinds of zero
exist: the exact zero (valuation ``INF``) and a zero known only to some
absolute precision ``k``, stored as valuation ``k`` with precision 0.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

from .errors import InvalidArgumentError, ParseError

INF = math.inf
DEFAULT_PREC = 40

Rational = Union[int, Fraction]


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


def check_prime(p: int) -> int:
    if not isinstance(p, int) or isinstance(p, bool) or not is_prime(p):
        raise InvalidArgumentError(f"{p!r} is not a prime")
    if p == 2:
        raise InvalidArgumentError("p = 2 is not supported; use an odd prime")
    return p


def vp(n: int, p: int) -> Union[int, float]:
    """Valuation of an integer; INF for zero."""
    if n == 0:
        return INF
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def vp_rational(x: Rational, p: int) -> Union[int, float]:
    x = Fraction(x)
    if x == 0:
        return INF
    return vp(x.numerator, p) - vp(x.denominator, p)


def balanced(x: int, m: int) -> int:
    """Representative of ``x mod m`` in ``(-m/2, m/2]``."""
    x %= m
    return x - m if 2 * x > m else x


class PadicScalar:
    __slots__ = ("prime", "valuation", "unit", "precision")

    def __init__(self, prime: int, valuation, unit: int, precision: int):
        self.prime = prime
        self.valuation = valuation
        self.unit = unit
        self.precision = precision

    # construction -----------------------------------------------------

    @classmethod
    def zero(cls, p: int) -> "PadicScalar":
        return cls(check_prime(p), INF, 0, 0)

    @classmethod
    def inexact_zero(cls, p: int, absprec: int) -> "PadicScalar":
        return cls(p, absprec, 0, 0)

    @classmethod
    def from_rational(cls, num: Rational, den: Rational = 1, p: int = 3,
                      prec: int = DEFAULT_PREC) -> "PadicScalar":
        check_prime(p)
        if den == 0:
            raise InvalidArgumentError("zero denominator")
        if prec < 1:
            raise InvalidArgumentError("precision must be positive")
        x = Fraction(num) / Fraction(den)
        if x == 0:
            return cls.zero(p)
        a, b = x.numerator, x.denominator
        va, vb = vp(a, p), vp(b, p)
        a //= p ** va
        b //= p ** vb
        m = p ** prec
        return cls(p, va - vb, a * pow(b, -1, m) % m, prec)

    @classmethod
    def from_int(cls, n: int, p: int, prec: int = DEFAULT_PREC) -> "PadicScalar":
        return cls.from_rational(n, 1, p, prec)

    # basic queries ----------------------------------------------------

    def is_zero(self) -> bool:
        return self.unit == 0

    def is_exact_zero(self) -> bool:
        return self.valuation == INF

    @property
    def absprec(self):
        """Absolute precision: the value is known modulo ``p**absprec``."""
        if self.valuation == INF:
            return INF
        return self.valuation + self.precision

    def lift(self) -> Fraction:
        """Canonical rational representative ``p**v * u`` (0 for zeros)."""
        if self.is_zero():
            return Fraction(0)
        return Fraction(self.prime) ** self.valuation * self.unit

    def lift_balanced(self) -> Fraction:
        if self.is_zero():
            return Fraction(0)
        u = balanced(self.unit, self.prime ** self.precision)
        return Fraction(self.prime) ** self.valuation * u

    # arithmetic -------------------------------------------------------

    def _coerce(self, other) -> "PadicScalar":
        if isinstance(other, PadicScalar):
            if other.prime != self.prime:
                raise InvalidArgumentError("mixing scalars over different primes")
            return other
        if isinstance(other, (int, Fraction)):
            prec = self.precision if self.precision > 0 else DEFAULT_PREC
            return PadicScalar.from_rational(other, 1, self.prime, max(prec, DEFAULT_PREC))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        p = self.prime
        if self.is_exact_zero():
            return other
        if other.is_exact_zero():
            return self
        absprec = min(self.absprec, other.absprec)
        nz = [x for x in (self, other) if not x.is_zero()]
        if not nz:
            return PadicScalar.inexact_zero(p, absprec)
        m = min(x.valuation for x in nz)
        if m >= absprec:
            return PadicScalar.inexact_zero(p, absprec)
        mod = p ** (absprec - m)
        s = sum(x.unit * p ** (x.valuation - m) for x in nz) % mod
        if s == 0:
            return PadicScalar.inexact_zero(p, absprec)
        k = vp(s, p)
        v = m + k
        return PadicScalar(p, v, (s // p ** k) % p ** (absprec - v), absprec - v)

    __radd__ = __add__

    def __neg__(self):
        if self.is_zero():
            return self
        m = self.prime ** self.precision
        return PadicScalar(self.prime, self.valuation, (-self.unit) % m, self.precision)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        p = self.prime
        if self.is_exact_zero() or other.is_exact_zero():
            return PadicScalar(p, INF, 0, 0)
        if self.is_zero() or other.is_zero():
            # O(p^k) times something of valuation w is O(p^(k+w))
            a, b = (self, other) if self.is_zero() else (other, self)
            return PadicScalar.inexact_zero(p, a.valuation + b.valuation)
        n = min(self.precision, other.precision)
        u = self.unit * other.unit % p ** n
        return PadicScalar(p, self.valuation + other.valuation, u, n)

    __rmul__ = __mul__

    def inverse(self) -> "PadicScalar":
        if self.is_zero():
            raise ZeroDivisionError("inverting a p-adic zero")
        m = self.prime ** self.precision
        return PadicScalar(self.prime, -self.valuation, pow(self.unit, -1, m), self.precision)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        out = PadicScalar.from_int(1, self.prime, max(self.precision, 1))
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # comparison -------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, (PadicScalar, int, Fraction)):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self):
        return hash((self.prime, self.valuation, self.unit, self.precision))

    def __repr__(self):
        if self.is_exact_zero():
            return f"PadicScalar(0, p={self.prime})"
        if self.is_zero():
            return f"PadicScalar(O({self.prime}^{self.valuation}))"
        return (f"PadicScalar({self.prime}^{self.valuation} * {self.unit} "
                f"mod {self.prime}^{self.precision})")

    # serialization ----------------------------------------------------

    def to_json(self) -> dict:
        v = "inf" if self.valuation == INF else int(self.valuation)
        return {"v": v, "u": str(self.unit), "N": int(self.precision)}

    @classmethod
    def from_json(cls, obj: dict, p: int) -> "PadicScalar":
        try:
            v, u, n = obj["v"], int(obj["u"]), int(obj["N"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad scalar {obj!r}") from exc
        check_prime(p)
        if v == "inf":
            return cls(p, INF, 0, 0)
        if not isinstance(v, int):
            raise ParseError(f"bad valuation {v!r}")
        if n < 0:
            raise ParseError("negative precision")
        if n == 0 or u % p ** n == 0:
            return cls.inexact_zero(p, v)
        if u % p == 0:
            raise ParseError("unit part divisible by p")
        return cls(p, v, u % p ** n, n)


def parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"cannot parse rational {text!r}") from exc
