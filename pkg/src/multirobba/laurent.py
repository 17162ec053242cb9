"""Sparse multivariate Laurent series truncated to an exponent box.

Coefficients are stored as integers with a common power-of-``p`` shift and a
common absolute precision (``INF`` when every coefficient is an exact element
of ``Z[1/p]``).  The public ``coeffs`` view hands out :class:`PadicScalar`
objects.  ``tail_valuation`` bounds the interval valuation of everything that
was discarded by truncation, relative to ``interval``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from .errors import (InvalidArgumentError, InvalidRadiusError, NotInvertibleInRegimeError,
                     ParseError, PreconditionError, RegimeError)
from .padic import (DEFAULT_PREC, INF, PadicScalar, balanced, check_prime, parse_rational,
                    vp)

ExponentVec = Tuple[int, ...]
RadiusVec = Tuple[Fraction, ...]

#: relative precision used when an exact computation has to become approximate
SERIES_PREC = 100
DEFAULT_BUDGET = 12


def _frac_str(x) -> str:
    if x == INF:
        return "inf"
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _parse_val(x):
    if x == "inf":
        return INF
    return parse_rational(str(x))


@dataclass(frozen=True)
class Box:
    lo: ExponentVec
    hi: ExponentVec

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise InvalidArgumentError("box corners of different lengths")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise InvalidArgumentError(f"empty box {self.lo}..{self.hi}")

    @classmethod
    def cube(cls, lo: int, hi: int, n: int) -> "Box":
        return cls((lo,) * n, (hi,) * n)

    @property
    def nvars(self) -> int:
        return len(self.lo)

    def contains(self, e: ExponentVec) -> bool:
        return all(a <= x <= b for a, x, b in zip(self.lo, e, self.hi))

    def covers(self, other: "Box") -> bool:
        return self.contains(other.lo) and self.contains(other.hi)

    def union(self, other: "Box") -> "Box":
        return Box(tuple(map(min, self.lo, other.lo)), tuple(map(max, self.hi, other.hi)))

    def minkowski(self, other: "Box") -> "Box":
        return Box(tuple(a + b for a, b in zip(self.lo, other.lo)),
                   tuple(a + b for a, b in zip(self.hi, other.hi)))

    def reflect(self) -> "Box":
        """The box ``-1 - self``, i.e. exponents paired with ``self`` by the residue."""
        return Box(tuple(-1 - b for b in self.hi), tuple(-1 - a for a in self.lo))

    def with_axis(self, axis: int, lo: int, hi: int) -> "Box":
        l, h = list(self.lo), list(self.hi)
        l[axis], h[axis] = lo, hi
        return Box(tuple(l), tuple(h))

    def shape(self) -> Tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    def size(self) -> int:
        n = 1
        for s in self.shape():
            n *= s
        return n

    def points(self) -> Iterator[ExponentVec]:
        return itertools.product(*(range(a, b + 1) for a, b in zip(self.lo, self.hi)))

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_json(cls, obj) -> "Box":
        try:
            return cls(tuple(int(x) for x in obj["lo"]), tuple(int(x) for x in obj["hi"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad box {obj!r}") from exc

    @classmethod
    def bounding(cls, exps: Iterable[ExponentVec], n: int) -> "Box":
        exps = list(exps)
        if not exps:
            return cls((0,) * n, (0,) * n)
        return cls(tuple(min(e[i] for e in exps) for i in range(n)),
                   tuple(max(e[i] for e in exps) for i in range(n)))


def parse_box(text: str, n: int) -> Box:
    """Parse ``"lo:hi"`` (same on every axis) or ``"lo1:hi1,lo2:hi2"``."""
    try:
        parts = [tuple(int(x) for x in piece.split(":")) for piece in text.split(",")]
    except ValueError as exc:
        raise ParseError(f"bad box {text!r}") from exc
    if any(len(q) != 2 for q in parts):
        raise ParseError(f"bad box {text!r}")
    if len(parts) == 1:
        parts = parts * n
    if len(parts) != n:
        raise ParseError(f"box {text!r} does not match {n} variables")
    return Box(tuple(a for a, _ in parts), tuple(b for _, b in parts))


def _check_radius(x) -> Fraction:
    x = Fraction(x)
    if x <= 0:
        raise InvalidRadiusError(f"radius {x} must be positive")
    return x


def parse_radii(text: str, n: Optional[int] = None) -> RadiusVec:
    vals = tuple(_check_radius(parse_rational(t)) for t in text.split(","))
    if n is not None:
        if len(vals) == 1:
            vals = vals * n
        if len(vals) != n:
            raise ParseError(f"radius {text!r} does not match {n} variables")
    return vals


@dataclass(frozen=True)
class MultiInterval:
    """Product of closed intervals ``[s_a, r_a]`` of radii, one per variable."""

    s: RadiusVec
    r: RadiusVec

    def __post_init__(self):
        object.__setattr__(self, "s", tuple(_check_radius(x) for x in self.s))
        object.__setattr__(self, "r", tuple(_check_radius(x) for x in self.r))
        if len(self.s) != len(self.r):
            raise InvalidArgumentError("interval ends of different lengths")
        if any(a > b for a, b in zip(self.s, self.r)):
            raise InvalidRadiusError("interval with s > r")

    @classmethod
    def point(cls, t: Sequence) -> "MultiInterval":
        return cls(tuple(t), tuple(t))

    @classmethod
    def uniform(cls, s, r, n: int) -> "MultiInterval":
        return cls((Fraction(s),) * n, (Fraction(r),) * n)

    @property
    def nvars(self) -> int:
        return len(self.s)

    def axis_corners(self, axis: int) -> Tuple[Fraction, ...]:
        a, b = self.s[axis], self.r[axis]
        return (a,) if a == b else (a, b)

    def corners(self) -> List[RadiusVec]:
        return [tuple(c) for c in itertools.product(*(self.axis_corners(i) for i in range(self.nvars)))]

    def scale_axis(self, axis: int, factor) -> "MultiInterval":
        s, r = list(self.s), list(self.r)
        s[axis] *= factor
        r[axis] *= factor
        return MultiInterval(tuple(s), tuple(r))

    def drop_axis(self, axis: int) -> Optional["MultiInterval"]:
        if self.nvars == 1:
            return None
        return MultiInterval(self.s[:axis] + self.s[axis + 1:], self.r[:axis] + self.r[axis + 1:])

    def only_axis(self, axis: int) -> "MultiInterval":
        return MultiInterval((self.s[axis],), (self.r[axis],))

    def contains_interval(self, other: "MultiInterval") -> bool:
        return all(a <= c and d <= b for a, b, c, d in zip(self.s, self.r, other.s, other.r))

    def below(self, bound) -> bool:
        return all(x < bound for x in self.r)

    def to_json(self) -> dict:
        return {"s": [_frac_str(x) for x in self.s], "r": [_frac_str(x) for x in self.r]}

    @classmethod
    def from_json(cls, obj) -> "MultiInterval":
        try:
            return cls(tuple(parse_rational(str(x)) for x in obj["s"]),
                       tuple(parse_rational(str(x)) for x in obj["r"]))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad interval {obj!r}") from exc


def parse_interval(text: str, n: int) -> MultiInterval:
    """``"s:r"`` or ``"s1:r1,s2:r2"``."""
    pieces = text.split(",")
    try:
        pairs = [tuple(parse_rational(x) for x in piece.split(":")) for piece in pieces]
    except ParseError:
        raise
    if any(len(q) != 2 for q in pairs):
        raise ParseError(f"bad interval {text!r}")
    if len(pairs) == 1:
        pairs = pairs * n
    if len(pairs) != n:
        raise ParseError(f"interval {text!r} does not match {n} variables")
    return MultiInterval(tuple(a for a, _ in pairs), tuple(b for _, b in pairs))


def _dot(t: Sequence, e: ExponentVec):
    return sum(a * b for a, b in zip(t, e))


def monomial_interval_valuation(e: ExponentVec, iv: MultiInterval):
    """``min`` over corners of ``e . t``; it splits as a sum over axes."""
    return sum(min(x * iv.s[i], x * iv.r[i]) for i, x in enumerate(e))


def _coeff_parts(c, p: int) -> Tuple[int, int, object]:
    """(shift, integer, absprec) for one coefficient."""
    if isinstance(c, PadicScalar):
        if c.prime != p:
            raise InvalidArgumentError("coefficient over a different prime")
        if c.is_zero():
            return 0, 0, c.absprec
        return c.valuation, balanced(c.unit, p ** c.precision), c.absprec
    if isinstance(c, bool):
        raise InvalidArgumentError("boolean coefficient")
    if isinstance(c, int):
        return 0, c, INF
    if isinstance(c, Fraction):
        if c == 0:
            return 0, 0, INF
        d = c.denominator
        k = vp(d, p)
        if d == p ** k:
            return -k, c.numerator, INF
        sc = PadicScalar.from_rational(c, 1, p, SERIES_PREC)
        return sc.valuation, balanced(sc.unit, p ** sc.precision), sc.absprec
    raise InvalidArgumentError(f"unsupported coefficient {c!r}")


class LaurentBoxSeries:
    __slots__ = ("prime", "vars", "box", "basis", "shift", "absprec", "tail_valuation",
                 "interval", "_t")

    def __init__(self, prime: int, vars: Sequence[str], box: Box, terms: Dict[ExponentVec, int],
                 shift: int = 0, absprec=INF, tail_valuation=INF, basis: str = "T",
                 interval: Optional[MultiInterval] = None, _trusted: bool = False):
        self.prime = prime
        self.vars = tuple(vars)
        self.box = box
        self.basis = basis
        self.shift = shift
        self.absprec = absprec
        self.tail_valuation = tail_valuation
        self.interval = interval
        if _trusted:
            self._t = terms
            return
        check_prime(prime)
        if basis not in ("T", "U"):
            raise InvalidArgumentError(f"unknown basis {basis!r}")
        if box.nvars != len(self.vars):
            raise InvalidArgumentError("box dimension does not match variables")
        if tail_valuation != INF and interval is None:
            raise InvalidArgumentError("a finite tail needs a declared interval")
        for e in terms:
            if len(e) != len(self.vars) or not box.contains(e):
                raise InvalidArgumentError(f"exponent {e} outside the box")
        self._t = _reduce_terms(terms, prime, shift, absprec)

    # construction -----------------------------------------------------

    @classmethod
    def from_terms(cls, p: int, vars: Sequence[str], terms: Dict, box: Optional[Box] = None,
                   basis: str = "T", tail_valuation=INF,
                   interval: Optional[MultiInterval] = None) -> "LaurentBoxSeries":
        check_prime(p)
        n = len(vars)
        parts = {}
        for e, c in terms.items():
            e = (e,) if isinstance(e, int) else tuple(e)
            parts[e] = _coeff_parts(c, p)
        if box is None:
            box = Box.bounding([e for e, q in parts.items() if q[1] != 0], n)
        nz = [q for q in parts.values() if q[1] != 0]
        shift = min((q[0] for q in nz), default=0)
        absprec = min((q[2] for q in parts.values()), default=INF)
        ints = {}
        for e, (s, c, _) in parts.items():
            if c:
                ints[e] = ints.get(e, 0) + c * p ** (s - shift)
        return cls(p, vars, box, ints, shift, absprec, tail_valuation, basis, interval)

    @classmethod
    def zero(cls, p: int, vars: Sequence[str], box: Optional[Box] = None, basis: str = "T"):
        n = len(vars)
        return cls(p, vars, box or Box((0,) * n, (0,) * n), {}, basis=basis)

    @classmethod
    def monomial(cls, p: int, vars: Sequence[str], e: ExponentVec, c=1, basis: str = "T"):
        e = tuple(e)
        return cls.from_terms(p, vars, {e: c}, Box(e, e), basis)

    @classmethod
    def constant(cls, p: int, vars: Sequence[str], c=1):
        return cls.monomial(p, vars, (0,) * len(vars), c)

    def _new(self, terms, shift=None, absprec=None, tail=None, box=None, basis=None,
             interval=None, reduce=True) -> "LaurentBoxSeries":
        shift = self.shift if shift is None else shift
        absprec = self.absprec if absprec is None else absprec
        if reduce:
            terms = _reduce_terms(terms, self.prime, shift, absprec)
        return LaurentBoxSeries(self.prime, self.vars, box or self.box, terms, shift, absprec,
                                self.tail_valuation if tail is None else tail,
                                basis or self.basis, interval or self.interval, _trusted=True)

    # views ------------------------------------------------------------

    @property
    def nvars(self) -> int:
        return len(self.vars)

    @property
    def terms(self) -> Dict[ExponentVec, int]:
        """Raw integer terms; the coefficient of ``e`` is ``p**shift * terms[e]``."""
        return self._t

    def coeff(self, e: ExponentVec) -> PadicScalar:
        e = tuple(e)
        c = self._t.get(e, 0)
        p = self.prime
        if c == 0:
            if self.absprec == INF:
                return PadicScalar.zero(p)
            return PadicScalar.inexact_zero(p, self.absprec)
        k = vp(c, p)
        v = self.shift + k
        if self.absprec == INF:
            u = c // p ** k
            n = max(DEFAULT_PREC, _ndigits(abs(u), p) + 1)
        else:
            n = self.absprec - v
            u = c // p ** k
        return PadicScalar(p, v, u % p ** n, n)

    def coeff_rational(self, e: ExponentVec) -> Fraction:
        return Fraction(self.prime) ** self.shift * self._t.get(tuple(e), 0)

    @property
    def coeffs(self) -> Dict[ExponentVec, PadicScalar]:
        return {e: self.coeff(e) for e in sorted(self._t)}

    def is_exact(self) -> bool:
        return self.absprec == INF and self.tail_valuation == INF

    def is_zero(self) -> bool:
        return not self._t

    def support(self) -> List[ExponentVec]:
        return sorted(self._t)

    def __len__(self):
        return len(self._t)

    def __repr__(self):
        body = " + ".join(f"{_frac_str(self.coeff_rational(e))}*{self.basis}^{list(e)}"
                          for e in self.support()) or "0"
        extra = "" if self.tail_valuation == INF else f" + tail(>= {_frac_str(self.tail_valuation)})"
        return f"<{body}{extra} over Q_{self.prime}>"

    def __eq__(self, other):
        if not isinstance(other, LaurentBoxSeries):
            return NotImplemented
        if (self.prime, self.vars, self.basis) != (other.prime, other.vars, other.basis):
            return False
        return (self - other).is_zero()

    __hash__ = None

    # valuations -------------------------------------------------------

    def _require_T(self):
        if self.basis != "T":
            raise InvalidArgumentError("valuations are defined in the T-basis")

    def _term_vps(self) -> Dict[ExponentVec, int]:
        p = self.prime
        return {e: vp(c, p) + self.shift for e, c in self._t.items()}

    def coefficient_valuation(self):
        """``min`` of the coefficient valuations (INF for the zero series)."""
        return min(self._term_vps().values(), default=INF)

    def gauss_valuation(self, t: Sequence, with_flag: bool = False):
        """``min_e v_p(a_e) + e . t``.

        With ``with_flag`` also returns whether the value is exact, i.e. not
        possibly affected by the tail or by coefficient precision.
        """
        self._require_T()
        t = tuple(_check_radius(x) for x in t)
        if len(t) != self.nvars:
            raise InvalidArgumentError("radius vector of wrong length")
        val = min((v + _dot(t, e) for e, v in self._term_vps().items()), default=INF)
        if not with_flag:
            return val
        exact = True
        if self.tail_valuation != INF:
            inside = self.interval is not None and self.interval.contains_interval(MultiInterval.point(t))
            exact = inside and val < self.tail_valuation
        if self.absprec != INF:
            floor = self.absprec + min(_dot(t, c) for c in _box_corners(self.box))
            exact = exact and val < floor
        return val, exact

    def interval_valuation(self, iv: MultiInterval):
        self._require_T()
        if iv.nvars != self.nvars:
            raise InvalidArgumentError("interval of wrong dimension")
        return self._interval_valuation_any_basis(iv)

    def _interval_valuation_any_basis(self, iv: MultiInterval):
        vps = self._term_vps()
        if not vps:
            return INF
        return min(min(v + _dot(c, e) for e, v in vps.items()) for c in iv.corners())

    def error_floor(self, iv: MultiInterval):
        """Lower bound for the interval valuation of the unknown part."""
        out = self.tail_valuation if (self.interval is None or self.interval == iv) else -INF
        if self.tail_valuation == INF:
            out = INF
        if self.absprec != INF:
            out = min(out, self.absprec + min(monomial_interval_valuation(e, iv)
                                               for e in _box_corners(self.box)))
        return out

    def certified_valuation(self, iv: MultiInterval):
        """Interval valuation that is guaranteed for the true (untruncated) value."""
        return min(self.interval_valuation(iv), self.error_floor(iv))

    def gauss_norm(self, t: Sequence) -> Fraction:
        """Exponent ``w`` with ``||f||_t = p**(-w)``, normalized by ``t/(p-1)``."""
        t = tuple(_check_radius(x) for x in t)
        return self.gauss_valuation(tuple(x / (self.prime - 1) for x in t))

    # truncation -------------------------------------------------------

    def prune(self, iv: MultiInterval, budget) -> "LaurentBoxSeries":
        """Drop what cannot matter at interval valuation ``budget``.

        Terms of valuation at least ``budget`` go to the tail, and the digits
        of the remaining coefficients beyond that level are rounded away
        (their contribution is also bounded by ``budget``).
        """
        keep, tail = {}, self.tail_valuation
        shift = self.shift
        p = self.prime
        corners = iv.corners()
        exact = self.absprec == INF
        for e, c in self._t.items():
            mono = min(_dot(cr, e) for cr in corners)
            v = vp(c, p) + shift
            w = v + mono
            if w >= budget:
                tail = min(tail, w)
                continue
            if exact:
                k = math.ceil(budget - mono) - shift
                m = p ** k
                if abs(c) >= m:
                    c2 = balanced(c, m)
                    if c2 != c:
                        tail = min(tail, budget)
                        c = c2
            keep[e] = c
        return self._new(keep, tail=tail, interval=iv, reduce=False)

    def cap_precision(self, iv: MultiInterval, budget) -> "LaurentBoxSeries":
        """Forget coefficient digits that cannot matter at interval valuation ``budget``."""
        if budget == INF:
            return self
        low = min(monomial_interval_valuation(e, iv) for e in _box_corners(self.box))
        need = math.ceil(budget - low) + 1
        if need >= self.absprec:
            return self
        return self._new(self._t, absprec=need)

    def restrict(self, box: Box, iv: Optional[MultiInterval] = None) -> "LaurentBoxSeries":
        """Truncate to ``box``; discarded terms are folded into the tail."""
        keep, tail = {}, self.tail_valuation
        p, shift = self.prime, self.shift
        for e, c in self._t.items():
            if box.contains(e):
                keep[e] = c
                continue
            if iv is None:
                raise InvalidArgumentError("truncating nonzero terms needs an interval")
            v = vp(c, p) + shift
            tail = min(tail, min(v + _dot(cr, e) for cr in iv.corners()))
        return self._new(keep, tail=tail, box=box, interval=iv or self.interval, reduce=False)

    def with_box(self, box: Box) -> "LaurentBoxSeries":
        for e in self._t:
            if not box.contains(e):
                raise InvalidArgumentError(f"exponent {e} outside {box}")
        return self._new(self._t, box=box, reduce=False)

    def with_tail(self, tail, interval: Optional[MultiInterval]) -> "LaurentBoxSeries":
        return self._new(self._t, tail=tail, interval=interval, reduce=False)

    # arithmetic -------------------------------------------------------

    def _check_compatible(self, other: "LaurentBoxSeries"):
        if (self.prime, self.vars, self.basis) != (other.prime, other.vars, other.basis):
            raise InvalidArgumentError("incompatible series (prime, variables or basis differ)")

    def _tail_interval(self, other: "LaurentBoxSeries"):
        ivs = {x.interval for x in (self, other) if x.tail_valuation != INF}
        if len(ivs) > 1:
            raise InvalidArgumentError("tails declared relative to different intervals")
        if ivs:
            return ivs.pop()
        return self.interval or other.interval

    def __add__(self, other):
        if isinstance(other, (int, Fraction, PadicScalar)):
            other = LaurentBoxSeries.from_terms(self.prime, self.vars, {(0,) * self.nvars: other},
                                                basis=self.basis)
        if not isinstance(other, LaurentBoxSeries):
            return NotImplemented
        self._check_compatible(other)
        iv = self._tail_interval(other)
        p = self.prime
        s = min(self.shift, other.shift)
        a = p ** (self.shift - s)
        b = p ** (other.shift - s)
        out = {e: c * a for e, c in self._t.items()}
        for e, c in other._t.items():
            out[e] = out.get(e, 0) + c * b
        return LaurentBoxSeries(p, self.vars, self.box.union(other.box), _reduce_terms(
            out, p, s, min(self.absprec, other.absprec)), s, min(self.absprec, other.absprec),
            min(self.tail_valuation, other.tail_valuation), self.basis, iv, _trusted=True)

    __radd__ = __add__

    def __neg__(self):
        return self._new({e: -c for e, c in self._t.items()}, reduce=False)

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, PadicScalar)):
            return self + (-other)
        if not isinstance(other, LaurentBoxSeries):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "LaurentBoxSeries":
        """Multiply by a scalar (int, Fraction or PadicScalar)."""
        s, ci, a = _coeff_parts(c, self.prime)
        if ci == 0:
            if a == INF:
                return self._new({}, reduce=False)
            return self._new({}, shift=0, absprec=min(self.absprec, a + self.coefficient_valuation()))
        vmin = self.coefficient_valuation()
        absprec = min(self.absprec + s + vp(ci, self.prime), a + vmin)
        tail = self.tail_valuation + s + vp(ci, self.prime)
        return self._new({e: x * ci for e, x in self._t.items()}, shift=self.shift + s,
                         absprec=absprec, tail=tail)

    def mul(self, other: "LaurentBoxSeries", target_box: Optional[Box] = None,
            iv: Optional[MultiInterval] = None) -> "LaurentBoxSeries":
        self._check_compatible(other)
        p = self.prime
        iv = iv or self._tail_interval(other)
        out: Dict[ExponentVec, int] = {}
        for e1, c1 in self._t.items():
            for e2, c2 in other._t.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        shift = self.shift + other.shift
        vf, vg = self.coefficient_valuation(), other.coefficient_valuation()
        absprec = min(self.absprec + vg, other.absprec + vf, self.absprec + other.absprec)
        tail = INF
        if self.tail_valuation != INF or other.tail_valuation != INF:
            wf = self._interval_valuation_any_basis(iv)
            wg = other._interval_valuation_any_basis(iv)
            tail = min(self.tail_valuation + wg, other.tail_valuation + wf,
                       self.tail_valuation + other.tail_valuation)
        box = self.box.minkowski(other.box)
        res = LaurentBoxSeries(p, self.vars, box, _reduce_terms(out, p, shift, absprec), shift,
                               absprec, tail, self.basis, iv, _trusted=True)
        if target_box is not None:
            res = res.restrict(target_box, iv)
        return res

    def __mul__(self, other):
        if isinstance(other, LaurentBoxSeries):
            return self.mul(other)
        if isinstance(other, (int, Fraction, PadicScalar)):
            return self.scale(other)
        return NotImplemented

    __rmul__ = __mul__

    def shift_exponent(self, e: ExponentVec) -> "LaurentBoxSeries":
        """Multiply by the monomial ``T^e``."""
        e = tuple(e)
        box = Box(tuple(a + b for a, b in zip(self.box.lo, e)),
                  tuple(a + b for a, b in zip(self.box.hi, e)))
        terms = {tuple(a + b for a, b in zip(k, e)): c for k, c in self._t.items()}
        tail = self.tail_valuation
        if tail != INF:
            tail = tail + monomial_interval_valuation(e, self.interval)
        return self._new(terms, box=box, tail=tail, reduce=False)

    def derivative(self, axis: int) -> "LaurentBoxSeries":
        lo, hi = list(self.box.lo), list(self.box.hi)
        lo[axis] -= 1
        hi[axis] -= 1
        terms = {}
        for e, c in self._t.items():
            if e[axis]:
                k = list(e)
                k[axis] -= 1
                terms[tuple(k)] = c * e[axis]
        return self._new(terms, box=Box(tuple(lo), tuple(hi)))

    def normalized(self) -> "LaurentBoxSeries":
        """Same value with the shift raised to the minimal coefficient valuation."""
        if not self._t:
            return self._new({}, shift=0, reduce=False)
        k = min(vp(c, self.prime) for c in self._t.values())
        if k == 0:
            return self
        d = self.prime ** k
        return self._new({e: c // d for e, c in self._t.items()}, shift=self.shift + k, reduce=False)

    # serialization ----------------------------------------------------

    def to_json(self) -> dict:
        out = {
            "p": self.prime,
            "vars": list(self.vars),
            "basis": self.basis,
            "box": self.box.to_json(),
            "tail_v": _frac_str(self.tail_valuation),
            "terms": [{"e": list(e), "c": self.coeff(e).to_json()} for e in self.support()],
        }
        if self.interval is not None and self.tail_valuation != INF:
            out["interval"] = self.interval.to_json()
        if self.is_exact():
            # exact values survive the roundtrip; scalars alone are capped
            for t in out["terms"]:
                t["x"] = str(self.coeff_rational(tuple(t["e"])))
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "LaurentBoxSeries":
        try:
            p = int(obj["p"])
            vars = [str(v) for v in obj["vars"]]
            basis = obj.get("basis", "T")
            box = Box.from_json(obj["box"])
            tail = _parse_val(obj.get("tail_v", "inf"))
            iv = MultiInterval.from_json(obj["interval"]) if "interval" in obj else None
            terms = {}
            exact = bool(obj["terms"]) and all("x" in t for t in obj["terms"])
            for t in obj["terms"]:
                e = tuple(int(x) for x in t["e"])
                if e in terms:
                    raise ParseError(f"duplicate exponent {e}")
                terms[e] = parse_rational(str(t["x"])) if exact else PadicScalar.from_json(t["c"], p)
                if exact and terms[e].denominator != p ** vp(terms[e].denominator, p):
                    raise ParseError(f"exact coefficient {t['x']} has a denominator prime to p")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed series: {exc}") from exc
        for e in terms:
            if len(e) != len(vars):
                raise ParseError(f"exponent {e} has wrong length")
            if not box.contains(e):
                raise ParseError(f"exponent {e} lies outside the box")
        f = cls.from_terms(p, vars, terms, box, basis)
        if tail != INF:
            if iv is None:
                raise ParseError("finite tail_v without an interval")
            f = f.with_tail(tail, iv)
        return f


def _ndigits(n: int, p: int) -> int:
    k = 0
    while n:
        n //= p
        k += 1
    return k


def _box_corners(box: Box) -> List[ExponentVec]:
    return [tuple(c) for c in itertools.product(*zip(box.lo, box.hi))]


def _reduce_terms(terms: Dict[ExponentVec, int], p: int, shift: int, absprec) -> Dict[ExponentVec, int]:
    if absprec == INF:
        return {e: c for e, c in terms.items() if c}
    k = absprec - shift
    if k <= 0:
        return {}
    m = p ** k
    out = {}
    for e, c in terms.items():
        c = balanced(c, m)
        if c:
            out[e] = c
    return out


# ---------------------------------------------------------------------------
# inversion in the dominant-monomial regime


def dominant_term(f: LaurentBoxSeries, iv: MultiInterval) -> ExponentVec:
    """Exponent of the term strictly dominating at every corner of ``iv``."""
    vps = f._term_vps()
    if not vps:
        raise NotInvertibleInRegimeError("zero series is not invertible")
    winner = None
    for c in iv.corners():
        vals = sorted(((v + _dot(c, e), e) for e, v in vps.items()))
        if len(vals) > 1 and vals[0][0] == vals[1][0]:
            raise NotInvertibleInRegimeError(f"no strictly dominant monomial at radius {c}")
        if winner is None:
            winner = vals[0][1]
        elif winner != vals[0][1]:
            raise NotInvertibleInRegimeError("dominant monomial changes across the interval")
    return winner


def series_invert(f: LaurentBoxSeries, iv: MultiInterval, target_box: Optional[Box] = None,
                  budget=DEFAULT_BUDGET) -> LaurentBoxSeries:
    """Inverse of ``f`` on the annulus ``iv`` up to interval valuation ``budget``.

    ``f = c T^e (1 + h)`` with ``v_iv(h) > 0``; the geometric series in ``-h``
    is summed until the remaining terms fall below the budget.
    """
    p = f.prime
    e0 = dominant_term(f, iv)
    c0 = f._t[e0]
    k0 = vp(c0, p)
    u0 = c0 // p ** k0
    v0 = f.shift + k0
    lead_val = -max(v0 + _dot(c, e0) for c in iv.corners())  # v_iv(c^-1 T^-e)
    round_tail = INF
    if f.absprec == INF:
        # exact input: use an integer approximant of 1/u and charge the error to the tail
        exact_inv = abs(u0) == 1
        if exact_inv:
            inv_u, rel = u0, INF
        else:
            rel = max(1, math.ceil(budget - lead_val) + 1)
            inv_u = pow(u0, -1, p ** rel)
            round_tail = rel + lead_val
            exact_inv = True  # the series itself stays exact; the tail carries the error
    else:
        exact_inv = False
        rel = f.absprec - v0
        inv_u = pow(u0, -1, p ** rel)
    # -h = 1 - f / (c T^e); its coefficients are p^(shift - v0) * (-c * inv_u)
    neg_e0 = tuple(-x for x in e0)
    h_terms = {}
    for e, c in f._t.items():
        if e == e0:
            continue
        h_terms[tuple(a + b for a, b in zip(e, neg_e0))] = -c * inv_u
    h_shift = f.shift - v0
    h_abs = INF
    if not exact_inv:
        vmin = min((vp(c, p) + f.shift for e, c in f._t.items() if e != e0), default=INF)
        h_abs = min(vmin - v0 + rel, f.absprec - v0)
    h = LaurentBoxSeries(p, f.vars, Box.bounding(h_terms, f.nvars) if h_terms else Box.cube(0, 0, f.nvars),
                         _reduce_terms(h_terms, p, h_shift, h_abs), h_shift, h_abs, INF, f.basis,
                         iv, _trusted=True)
    vh = h._interval_valuation_any_basis(iv)
    if h.is_zero():
        vh = INF
    if vh <= 0:
        raise NotInvertibleInRegimeError("series does not contract in this regime")
    one = LaurentBoxSeries(p, f.vars, Box.cube(0, 0, f.nvars), {(0,) * f.nvars: 1}, 0, INF, INF,
                           f.basis, iv, _trusted=True)
    total = one
    power = one
    local_budget = budget - lead_val
    k = 0
    while (k + 1) * vh < local_budget:
        power = _prune_any(power.mul(h, iv=iv), iv, local_budget)
        total = total + power
        k += 1
        if power.is_zero() and power.tail_valuation >= local_budget:
            break
    remainder = (k + 1) * vh
    total = total.with_tail(min(total.tail_valuation, remainder), iv)
    # multiply by c^-1 T^-e
    inv_c = LaurentBoxSeries(p, f.vars, Box(neg_e0, neg_e0), {neg_e0: inv_u}, -v0,
                             INF if exact_inv else -v0 + rel, INF,
                             f.basis, iv, _trusted=True)
    res = total.mul(inv_c, iv=iv)
    if round_tail != INF:
        res = res.with_tail(min(res.tail_valuation, round_tail), iv)
    # the input's own tail: (f + eps)^-1 - f^-1 ~ -eps / f^2
    if f.tail_valuation != INF:
        vf_max = max(v0 + _dot(c, e0) for c in iv.corners())
        res = res.with_tail(min(res.tail_valuation, f.tail_valuation - 2 * vf_max), iv)
    res = _prune_any(res, iv, budget)
    if target_box is not None:
        res = _restrict_any(res, target_box, iv)
    else:
        res = res._new(res._t, box=Box.bounding(res._t, f.nvars) if res._t else Box(neg_e0, neg_e0),
                       reduce=False)
    return res


def _prune_any(f: LaurentBoxSeries, iv: MultiInterval, budget) -> LaurentBoxSeries:
    return f.prune(iv, budget)


def _restrict_any(f: LaurentBoxSeries, box: Box, iv: MultiInterval) -> LaurentBoxSeries:
    return f.restrict(box, iv)


# ---------------------------------------------------------------------------
# substitution along one axis


def substitute_axis(f: LaurentBoxSeries, axis: int, image: Callable[[int], LaurentBoxSeries],
                    iv_out: Optional[MultiInterval] = None, tail_in=INF,
                    target_box: Optional[Box] = None, budget=None,
                    basis: Optional[str] = None) -> LaurentBoxSeries:
    """Replace ``T_axis^n`` by the univariate series ``image(n)``.

    ``tail_in`` is the input tail already transported to ``iv_out``.
    """
    p = f.prime
    groups: Dict[int, Dict[ExponentVec, int]] = {}
    for e, c in f._t.items():
        groups.setdefault(e[axis], {})[e] = c
    images = {n: image(n) for n in groups}
    if not images:
        box = target_box or f.box
        return LaurentBoxSeries(p, f.vars, box, {}, 0, f.absprec, tail_in, basis or f.basis,
                                iv_out, _trusted=True)
    s_img = min(g.shift for g in images.values())
    shift = f.shift + s_img
    out: Dict[ExponentVec, int] = {}
    absprec = INF
    tail = tail_in
    rest_iv = iv_out.drop_axis(axis) if iv_out is not None else None
    for n, grp in groups.items():
        g = images[n]
        scale = p ** (g.shift - s_img)
        img = [(k[0], c * scale) for k, c in g._t.items()]
        vmin_c = f.shift + min(vp(c, p) for c in grp.values())
        vimg = g.coefficient_valuation()
        absprec = min(absprec, f.absprec + vimg, g.absprec + vmin_c)
        if g.tail_valuation != INF:
            if rest_iv is None:
                vrest = vmin_c
            else:
                vrest = min(f.shift + vp(c, p) + monomial_interval_valuation(e[:axis] + e[axis + 1:], rest_iv)
                            for e, c in grp.items())
            tail = min(tail, g.tail_valuation + vrest)
        for e, c in grp.items():
            pre, post = e[:axis], e[axis + 1:]
            for k, ck in img:
                key = pre + (k,) + post
                out[key] = out.get(key, 0) + c * ck
    out = _reduce_terms(out, p, shift, absprec)
    box = Box.bounding(out, f.nvars) if out else f.box
    res = LaurentBoxSeries(p, f.vars, box, out, shift, absprec, tail, basis or f.basis,
                           iv_out, _trusted=True)
    if budget is not None and iv_out is not None:
        res = res.prune(iv_out, budget)
    if target_box is not None:
        res = res.restrict(target_box, iv_out)
    return res


def univariate(p: int, terms: Dict[int, int], shift: int = 0, absprec=INF, tail=INF,
               interval: Optional[MultiInterval] = None, basis: str = "T") -> LaurentBoxSeries:
    t = {(k,): c for k, c in terms.items() if c}
    box = Box.bounding(t, 1) if t else Box((0,), (0,))
    return LaurentBoxSeries(p, ("X",), box, _reduce_terms(t, p, shift, absprec), shift, absprec,
                            tail, basis, interval, _trusted=True)


# ---------------------------------------------------------------------------
# basis change T <-> U = 1 + T


@lru_cache(maxsize=4096)
def _binomial_power(n: int, sign: int) -> Tuple[Tuple[int, int], ...]:
    """Coefficients of ``(X + sign)^n`` for ``n >= 0``."""
    return tuple((j, comb(n, j) * sign ** (n - j)) for j in range(n + 1))


def basis_change(f: LaurentBoxSeries, to: str, iv: Optional[MultiInterval] = None,
                 target_box: Optional[Box] = None, budget=DEFAULT_BUDGET) -> LaurentBoxSeries:
    """Rewrite ``f`` in the other basis.

    Nonnegative exponents convert exactly.  A negative power of ``T = U - 1``
    (or of ``U = 1 + T``) is expanded with :func:`series_invert` in the
    target variable, which needs an interval ``iv`` of target radii.
    """
    if to not in ("T", "U"):
        raise InvalidArgumentError(f"unknown basis {to!r}")
    if to == f.basis:
        return f
    if f.tail_valuation != INF:
        raise PreconditionError("basis change of a series with a truncation tail is not supported")
    sign = -1 if to == "U" else 1  # T = U - 1, U = T + 1
    p = f.prime
    res = f
    for axis in range(f.nvars):
        has_neg = any(e[axis] < 0 for e in res._t)
        if has_neg and iv is None:
            raise RegimeError("negative exponents need an interval for the basis change")
        one_iv = iv.only_axis(axis) if iv is not None else None

        def image(n, one_iv=one_iv):
            if n >= 0:
                return univariate(p, dict(_binomial_power(n, sign)), basis=to)
            base = univariate(p, dict(_binomial_power(-n, sign)), basis=to, interval=one_iv)
            return series_invert(base, one_iv, budget=budget)

        res = substitute_axis(res, axis, image, iv_out=iv if has_neg else None,
                              tail_in=res.tail_valuation, budget=budget if has_neg else None,
                              basis=to)
    res = res._new(res._t, basis=to, reduce=False)
    if target_box is not None:
        res = res.restrict(target_box, iv)
    return res


# ---------------------------------------------------------------------------
# restriction maps between annuli


def compactness_profile(inner: MultiInterval, outer: MultiInterval, p: int,
                        degree_range: Iterable) -> Tuple[List[Tuple[ExponentVec, object]], object]:
    """Valuation gap ``v_inner(T^e) - v_outer(T^e)`` of the restriction map.

    ``degree_range`` holds exponent vectors or integers (an integer ``k``
    stands for the diagonal exponent ``(k, ..., k)``).
    """
    check_prime(p)
    if not outer.contains_interval(inner):
        raise InvalidArgumentError("inner interval is not contained in the outer one")
    out = []
    for d in degree_range:
        e = (d,) * inner.nvars if isinstance(d, int) else tuple(d)
        gap = monomial_interval_valuation(e, inner) - monomial_interval_valuation(e, outer)
        out.append((e, gap))
    return out, min((g for _, g in out), default=INF)
