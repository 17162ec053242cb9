"""Frobenius, its left inverse and the cyclotomic action on box series.

Every operator acts on one axis.  ``iv`` always names the interval of the
*input*; the output interval is ``iv`` with that axis divided by ``p`` for
``phi``, multiplied by ``p`` for ``psi`` and unchanged for ``gamma``.
Inputs whose exponents on the axis are nonnegative are handled exactly
when no interval is given (the polynomial regime).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from .errors import (InvalidArgumentError, NoConvergenceError, ParseError, PreconditionError,
                     RegimeError)
from .laurent import (DEFAULT_BUDGET, SERIES_PREC, Box, LaurentBoxSeries, MultiInterval,
                      monomial_interval_valuation, series_invert, substitute_axis, univariate)
from .padic import INF, check_prime, vp

Op = Callable[[LaurentBoxSeries], LaurentBoxSeries]


@dataclass(frozen=True)
class OperatorSpec:
    kind: str  # "phi", "psi" or "gamma"
    axis: int  # zero-based
    gamma_unit: Optional[int] = None
    regime: Optional[MultiInterval] = None

    def __post_init__(self):
        if self.kind not in ("phi", "psi", "gamma"):
            raise InvalidArgumentError(f"unknown operator {self.kind!r}")
        if self.kind == "gamma" and self.gamma_unit is None:
            raise InvalidArgumentError("gamma needs a unit")

    def describe(self) -> str:
        if self.kind == "gamma":
            return f"gamma:{self.axis + 1}:{self.gamma_unit}"
        return f"{self.kind}:{self.axis + 1}"


def parse_operator(text: str, nvars: int, regime: Optional[MultiInterval] = None) -> OperatorSpec:
    """Parse descriptors such as ``phi:1``, ``psi:2`` or ``gamma:1:4``."""
    parts = text.strip().split(":")
    if parts[0] not in ("phi", "psi", "gamma") or len(parts) not in (2, 3):
        raise ParseError(f"bad operator descriptor {text!r}")
    try:
        axis = int(parts[1]) - 1
        unit = int(parts[2]) if len(parts) == 3 else None
    except ValueError as exc:
        raise ParseError(f"bad operator descriptor {text!r}") from exc
    if not 0 <= axis < nvars:
        raise ParseError(f"axis {axis + 1} out of range for {nvars} variables")
    if (parts[0] == "gamma") != (unit is not None):
        raise ParseError(f"bad operator descriptor {text!r}")
    return OperatorSpec(parts[0], axis, unit, regime)


def gamma_generator(p: int) -> int:
    """The unit ``1 + p`` used as topological generator of each ``Z_p^x`` factor."""
    return 1 + p


# ---------------------------------------------------------------------------
# univariate tables


@lru_cache(maxsize=None)
def _phi_T(p: int) -> Dict[int, int]:
    return {k: comb(p, k) for k in range(1, p + 1)}


@lru_cache(maxsize=8192)
def phi_power(p: int, n: int) -> Dict[int, int]:
    """``((1+T)^p - 1)^n`` for ``n >= 0``."""
    if n == 0:
        return {0: 1}
    if n == 1:
        return dict(_phi_T(p))
    half = phi_power(p, n // 2)
    out = _poly_mul(half, half)
    if n % 2:
        out = _poly_mul(out, _phi_T(p))
    return out


def _poly_mul(a: Dict[int, int], b: Dict[int, int], cap: Optional[int] = None) -> Dict[int, int]:
    out: Dict[int, int] = {}
    for i, x in a.items():
        for j, y in b.items():
            k = i + j
            if cap is not None and k > cap:
                continue
            out[k] = out.get(k, 0) + x * y
    return {k: v for k, v in out.items() if v}


@lru_cache(maxsize=8192)
def psi_monomial(p: int, n: int) -> Tuple[Tuple[int, int], ...]:
    """``psi(T^n)`` as sorted ``(exponent, coefficient)`` pairs.

    For ``n >= 0`` this extracts the ``U``-exponents divisible by ``p`` from
    ``(U - 1)^n``.  For ``n = -m < 0`` it uses ``T^-m = phi(T^-m) q^m`` with
    ``q = phi(T)/T`` a polynomial, so ``psi(T^-m) = T^-m psi(q^m)``.
    """
    if n >= 0:
        out: Dict[int, int] = {}
        for m in range(n // p + 1):
            c = comb(n, p * m) * (-1) ** (n - p * m)
            for k in range(m + 1):
                out[k] = out.get(k, 0) + c * comb(m, k)
        return tuple(sorted((k, v) for k, v in out.items() if v))
    m = -n
    q = {k - 1: c for k, c in _phi_T(p).items()}
    qm = {0: 1}
    for _ in range(m):
        qm = _poly_mul(qm, q)
    out = {}
    for k, c in qm.items():
        for j, d in psi_monomial(p, k):
            out[j - m] = out.get(j - m, 0) + c * d
    return tuple(sorted((k, v) for k, v in out.items() if v))


def gen_binomial(a: int, k: int) -> int:
    num = 1
    for j in range(k):
        num *= a - j
    return num // math.factorial(k)


@lru_cache(maxsize=8192)
def gamma_power(p: int, a: int, n: int, cap: Optional[int]) -> Tuple[Dict[int, int], bool]:
    """``((1+T)^a - 1)^n`` for ``n >= 0`` truncated above degree ``cap``.

    Returns the coefficients and whether the truncation discarded anything.
    """
    exact_deg = a * n if a >= 0 else None
    if cap is None:
        if exact_deg is None:
            raise RegimeError("negative gamma units need a truncation degree")
        cap = exact_deg
    top = cap if a < 0 else min(cap, a)
    g = {k: gen_binomial(a, k) for k in range(1, top + 1)}
    g = {k: v for k, v in g.items() if v}
    out = {0: 1}
    base, m = g, n
    while m:
        if m & 1:
            out = _poly_mul(out, base, cap)
        m >>= 1
        if m:
            base = _poly_mul(base, base, cap)
    truncated = exact_deg is None or exact_deg > cap
    return out, truncated


# ---------------------------------------------------------------------------
# helpers


def _interval_for(f: LaurentBoxSeries, iv: Optional[MultiInterval]) -> Optional[MultiInterval]:
    if iv is None:
        return f.interval if f.tail_valuation != INF else None
    if f.tail_valuation != INF and f.interval != iv:
        raise InvalidArgumentError("input tail is declared relative to a different interval")
    return iv


def _has_negative(f: LaurentBoxSeries, axis: int) -> bool:
    return any(e[axis] < 0 for e in f.terms)


def _rest_min(f: LaurentBoxSeries, axis: int, iv: MultiInterval):
    rest = iv.drop_axis(axis)
    p = f.prime
    vals = []
    for e, c in f.terms.items():
        v = f.shift + vp(c, p)
        if rest is not None:
            v += monomial_interval_valuation(e[:axis] + e[axis + 1:], rest)
        vals.append(v)
    return min(vals, default=0)


def _check_axis(f: LaurentBoxSeries, axis: int):
    if not 0 <= axis < f.nvars:
        raise InvalidArgumentError(f"axis {axis} out of range")
    if f.basis != "T":
        raise InvalidArgumentError("operators act on T-basis series")


def _bound(p: int) -> Fraction:
    return Fraction(1, p - 1)


# ---------------------------------------------------------------------------
# phi


def apply_phi(f: LaurentBoxSeries, axis: int, target_box: Optional[Box] = None,
              budget=DEFAULT_BUDGET, iv: Optional[MultiInterval] = None) -> LaurentBoxSeries:
    """``T_axis -> (1 + T_axis)^p - 1``."""
    _check_axis(f, axis)
    p = f.prime
    iv = _interval_for(f, iv)
    neg = _has_negative(f, axis)
    if iv is None:
        if neg:
            raise RegimeError("negative exponents need a radius regime for phi")
        res = substitute_axis(f, axis, lambda n: univariate(p, phi_power(p, n)))
        res = res.with_box(f.box.with_axis(axis, f.box.lo[axis], p * f.box.hi[axis]).union(res.box))
        return res.restrict(target_box) if target_box is not None else res
    out_iv = iv.scale_axis(axis, Fraction(1, p))
    if (neg or f.tail_valuation != INF) and not out_iv.r[axis] < _bound(p):
        raise RegimeError(f"phi needs output radii below 1/(p-1) on axis {axis + 1}")
    ax_iv = out_iv.only_axis(axis)
    img_budget = budget - _rest_min(f, axis, out_iv)

    def image(n):
        if n >= 0:
            return univariate(p, phi_power(p, n)).prune(ax_iv, img_budget)
        return _phi_negative(p, -n, ax_iv, img_budget)

    return substitute_axis(f, axis, image, iv_out=out_iv, tail_in=f.tail_valuation,
                           target_box=target_box, budget=budget)


@lru_cache(maxsize=4096)
def _phi_negative(p: int, m: int, ax_iv: MultiInterval, budget) -> LaurentBoxSeries:
    base = univariate(p, phi_power(p, m), interval=ax_iv)
    return series_invert(base, ax_iv, budget=budget)


# ---------------------------------------------------------------------------
# psi


def apply_psi(f: LaurentBoxSeries, axis: int, target_box: Optional[Box] = None,
              iv: Optional[MultiInterval] = None) -> LaurentBoxSeries:
    """Left inverse of ``phi``: ``psi(U^j) = U^(j/p)`` if ``p | j`` and 0 otherwise."""
    _check_axis(f, axis)
    p = f.prime
    iv = _interval_for(f, iv)
    tail = INF
    out_iv = None
    if iv is not None:
        out_iv = iv.scale_axis(axis, p)
        if f.tail_valuation != INF:
            if not iv.r[axis] < _bound(p):
                raise RegimeError("psi transports a tail only for radii below 1/(p-1)")
            tail = f.tail_valuation - 1
    res = substitute_axis(f, axis, lambda n: univariate(p, dict(psi_monomial(p, n))),
                          iv_out=out_iv, tail_in=tail)
    lo, hi = f.box.lo[axis], f.box.hi[axis]
    new_lo = lo if lo < 0 else 0
    new_hi = hi // p if hi >= 0 else -((-hi + p - 1) // p)
    res = res.with_box(f.box.with_axis(axis, new_lo, new_hi).union(res.box))
    if target_box is not None:
        res = res.restrict(target_box, out_iv)
    return res


# ---------------------------------------------------------------------------
# gamma


def _gamma_rep(a, p: int) -> Tuple[int, object]:
    """Integer representative of a unit and the precision it carries."""
    if isinstance(a, bool):
        raise InvalidArgumentError("bad gamma unit")
    if isinstance(a, int):
        if a % p == 0:
            raise InvalidArgumentError(f"gamma unit {a} is not prime to p")
        return a, INF
    a = Fraction(a)
    if a.numerator % p == 0 or a.denominator % p == 0:
        raise InvalidArgumentError(f"gamma unit {a} is not a p-adic unit")
    m = p ** SERIES_PREC
    return a.numerator * pow(a.denominator, -1, m) % m, SERIES_PREC


def apply_gamma(f: LaurentBoxSeries, axis: int, a, target_box: Optional[Box] = None,
                budget=DEFAULT_BUDGET, iv: Optional[MultiInterval] = None) -> LaurentBoxSeries:
    """``T_axis -> (1 + T_axis)^a - 1`` for a unit ``a``."""
    _check_axis(f, axis)
    p = f.prime
    a, a_prec = _gamma_rep(a, p)
    iv = _interval_for(f, iv)
    neg = _has_negative(f, axis)
    if iv is None:
        if neg:
            raise RegimeError("negative exponents need a radius regime for gamma")
        if a < 0 or a_prec != INF:
            raise RegimeError("this gamma unit needs a radius regime (infinite expansion)")
        res = substitute_axis(f, axis, lambda n: univariate(p, gamma_power(p, a, n, None)[0]))
        res = res.with_box(f.box.with_axis(axis, f.box.lo[axis], a * f.box.hi[axis]).union(res.box))
        return res.restrict(target_box) if target_box is not None else res
    if neg and not iv.r[axis] < _bound(p):
        raise RegimeError(f"gamma on negative exponents needs radii below 1/(p-1) on axis {axis + 1}")
    ax_iv = iv.only_axis(axis)
    img_budget = budget - _rest_min(f, axis, iv)

    def image(n):
        if n >= 0:
            return _gamma_nonneg(p, a, a_prec, n, ax_iv, img_budget)
        return _gamma_negative(p, a, a_prec, -n, ax_iv, img_budget)

    return substitute_axis(f, axis, image, iv_out=iv, tail_in=f.tail_valuation,
                           target_box=target_box, budget=budget)


def _degree_cap(n: int, ax_iv: MultiInterval, budget) -> int:
    s = ax_iv.s[0]
    return n + max(0, math.ceil(Fraction(budget) / s)) + 1


@lru_cache(maxsize=4096)
def _gamma_nonneg(p: int, a: int, a_prec, n: int, ax_iv: MultiInterval, budget) -> LaurentBoxSeries:
    cap = _degree_cap(n, ax_iv, budget - 0) if (a < 0 or a_prec != INF or a * n > 4 * n + 400) else None
    coeffs, truncated = gamma_power(p, a, n, cap)
    tail = INF
    if truncated:
        tail = (cap + 1) * ax_iv.s[0]
    absprec = INF if a_prec == INF else a_prec - _ndig(cap or 1, p)
    g = univariate(p, coeffs, absprec=absprec, tail=tail, interval=ax_iv)
    return g.prune(ax_iv, budget)


@lru_cache(maxsize=4096)
def _gamma_negative(p: int, a: int, a_prec, m: int, ax_iv: MultiInterval, budget) -> LaurentBoxSeries:
    r = ax_iv.r[0]
    # truncate gamma(T)^m so that its tail survives the inversion (which costs 2 m r)
    base = _gamma_nonneg(p, a, a_prec, m, ax_iv, budget + 2 * m * r + 2)
    return series_invert(base, ax_iv, budget=budget)


def _ndig(n: int, p: int) -> int:
    k = 0
    while n:
        n //= p
        k += 1
    return k


# ---------------------------------------------------------------------------
# generic application


def apply_op(f: LaurentBoxSeries, spec: OperatorSpec, target_box: Optional[Box] = None,
             budget=DEFAULT_BUDGET, iv: Optional[MultiInterval] = None) -> LaurentBoxSeries:
    iv = iv or spec.regime
    if spec.kind == "phi":
        return apply_phi(f, spec.axis, target_box, budget, iv)
    if spec.kind == "psi":
        return apply_psi(f, spec.axis, target_box, iv)
    return apply_gamma(f, spec.axis, spec.gamma_unit, target_box, budget, iv)


# ---------------------------------------------------------------------------
# the psi = 0 part


def psi0_project(f: LaurentBoxSeries, axis: int, iv: Optional[MultiInterval] = None,
                 budget=DEFAULT_BUDGET) -> LaurentBoxSeries:
    """``f - phi(psi(f))``, which is killed by ``psi``."""
    g = apply_psi(f, axis, iv=iv)
    return f - apply_phi(g, axis, budget=budget, iv=g.interval if iv is not None else None)


def _u_power(p: int, nv: int, axis: int, i: int, vars) -> LaurentBoxSeries:
    e = [0] * nv
    terms = {}
    for k in range(i + 1):
        e[axis] = k
        terms[tuple(e)] = comb(i, k)
    return LaurentBoxSeries.from_terms(p, vars, terms)


def _u_inverse_power(f: LaurentBoxSeries, axis: int, i: int, iv: MultiInterval, budget) -> LaurentBoxSeries:
    """``(1 + T_axis)^-i`` as a series in ``T_axis`` (nonnegative powers)."""
    p = f.prime
    ax_iv = iv.only_axis(axis)
    cap = _degree_cap(0, ax_iv, budget - _rest_min(f, axis, iv))
    coeffs = {k: gen_binomial(-i, k) for k in range(cap + 1)}
    e0 = [0] * f.nvars
    terms = {}
    for k, c in coeffs.items():
        e0[axis] = k
        terms[tuple(e0)] = c
    g = LaurentBoxSeries.from_terms(p, f.vars, terms)
    return g.with_tail((cap + 1) * iv.s[axis], iv)


def psi0_decompose(f: LaurentBoxSeries, axis: int, iv: Optional[MultiInterval] = None,
                   budget=DEFAULT_BUDGET, tol=None) -> Dict[int, LaurentBoxSeries]:
    """Write ``f = sum_{i=1}^{p-1} (1+T)^i phi(g_i)`` when ``psi(f) = 0``.

    In the polynomial regime the ``g_i`` are read off in the ``U``-basis by
    collecting exponents congruent to ``i`` mod ``p``; otherwise
    ``g_i = psi((1+T)^-i f)``.
    """
    _check_axis(f, axis)
    p = f.prime
    iv = _interval_for(f, iv)
    psi_f = apply_psi(f, axis, iv=iv)
    if iv is None:
        if not psi_f.is_zero():
            raise PreconditionError("psi(f) is not zero")
    else:
        need = budget - 1 if tol is None else tol
        if psi_f.certified_valuation(psi_f.interval) < need and not psi_f.is_zero():
            if psi_f.interval_valuation(psi_f.interval) < need:
                raise PreconditionError("psi(f) is not zero within tolerance")
    if iv is None and not _has_negative(f, axis):
        from .laurent import basis_change  # local to keep the import graph flat
        fu = _axis_to_U(f, axis)
        parts: Dict[int, Dict] = {i: {} for i in range(1, p)}
        for e, c in fu.terms.items():
            j = e[axis]
            i = j % p
            if i == 0:
                raise PreconditionError("psi(f) is not zero")
            k = list(e)
            k[axis] = (j - i) // p
            parts[i][tuple(k)] = c
        out = {}
        for i, terms in parts.items():
            g = LaurentBoxSeries(p, f.vars, Box.bounding(terms, f.nvars), terms, fu.shift, fu.absprec)
            out[i] = _axis_from_U(g, axis)
        return out
    if iv is None:
        raise RegimeError("negative exponents need a radius regime")
    out = {}
    for i in range(1, p):
        w = _u_inverse_power(f, axis, i, iv, budget)
        prod = f.mul(w, iv=iv).prune(iv, budget)
        out[i] = apply_psi(prod, axis, iv=iv)
    return out


def _axis_to_U(f: LaurentBoxSeries, axis: int) -> LaurentBoxSeries:
    p = f.prime
    return substitute_axis(f, axis, lambda n: univariate(
        p, {j: comb(n, j) * (-1) ** (n - j) for j in range(n + 1)}))


def _axis_from_U(f: LaurentBoxSeries, axis: int) -> LaurentBoxSeries:
    p = f.prime
    return substitute_axis(f, axis, lambda n: univariate(p, {j: comb(n, j) for j in range(n + 1)}))


def psi0_recombine(parts: Dict[int, LaurentBoxSeries], axis: int, iv: Optional[MultiInterval] = None,
                   budget=DEFAULT_BUDGET) -> LaurentBoxSeries:
    """``sum_i (1+T)^i phi(g_i)``; ``iv`` is the interval of the ``g_i``."""
    total = None
    for i, g in sorted(parts.items()):
        ph = apply_phi(g, axis, budget=budget, iv=iv)
        term = ph.mul(_u_power(g.prime, g.nvars, axis, i, g.vars), iv=ph.interval)
        if iv is not None:
            term = term.prune(ph.interval, budget)
        total = term if total is None else total + term
    return total


# ---------------------------------------------------------------------------
# inverting gamma - 1 on a component


def gamma_minus_one_invert_on_component(y: LaurentBoxSeries, axis: int, i: int, a: int,
                                        budget=DEFAULT_BUDGET,
                                        iv: Optional[MultiInterval] = None,
                                        max_terms: int = 200) -> Tuple[LaurentBoxSeries, int]:
    """Solve ``(gamma_a - 1) x = y`` for ``y`` in ``(1+T)^i phi(R)``.

    With ``x = (1+T)^i phi(m)`` and ``b = (a-1) i / p`` one has
    ``(gamma - 1) x = (1+T)^i phi(((1+T)^b - 1)(1 + K) m)`` where
    ``K = (1+T)^b ((1+T)^b - 1)^-1 (gamma - 1)``; ``1 + K`` is inverted by a
    geometric series.  Returns ``x`` and the number of series terms used.
    """
    _check_axis(y, axis)
    p = y.prime
    if not 1 <= i < p:
        raise InvalidArgumentError("component index must lie in 1..p-1")
    if a % p != 1:
        raise PreconditionError("gamma must be congruent to 1 mod p to preserve components")
    if iv is None:
        raise RegimeError("the inverse needs a radius regime")
    if not iv.r[axis] < _bound(p):
        raise RegimeError("the inverse needs radii below 1/(p-1)")
    b = (a - 1) * i // p
    iv_m = iv.scale_axis(axis, p)
    # z with y = (1+T)^i phi(z)
    try:
        parts = psi0_decompose(y, axis, iv=None if y.is_exact() and not _has_negative(y, axis) else iv,
                               budget=budget)
    except PreconditionError as exc:
        raise PreconditionError(f"input is not killed by psi: {exc}") from exc
    for j, g in parts.items():
        if j != i and not g.is_zero():
            if g.interval is None or g.interval_valuation(g.interval) < budget:
                raise PreconditionError(f"input has a nonzero component {j} != {i}")
    z = parts[i]
    if z.interval is None:
        z = z.with_tail(INF, iv_m)
    # (1+T)^b - 1 and its inverse along the axis
    ax_iv = iv_m.only_axis(axis)
    ub = univariate(p, {k: comb(b, k) for k in range(1, b + 1)}, interval=ax_iv)
    inv_ub = series_invert(ub, ax_iv, budget=budget + 2)
    inv_ub = _embed_axis(inv_ub, z, axis)
    ub_frac = inv_ub + 1  # (1+T)^b / ((1+T)^b - 1)
    kappa = _contraction(p, a, ub_frac, iv_m, axis)
    if kappa <= 0:
        raise NoConvergenceError("1 + K is not a contraction perturbation in this regime")
    w = z.mul(inv_ub, iv=iv_m).prune(iv_m, budget)
    total = w
    term = w
    used = 1
    while True:
        if term.is_zero() and term.tail_valuation >= budget:
            break
        if term.certified_valuation(iv_m) >= budget:
            break
        if used >= max_terms:
            raise NoConvergenceError(f"no convergence within {max_terms} terms")
        bare = term.with_tail(INF, iv_m)
        g = apply_gamma(bare, axis, a, budget=budget, iv=iv_m) - bare
        nxt = -(g.mul(ub_frac, iv=iv_m).prune(iv_m, budget))
        # the previous tail passes through K, which gains at least kappa
        term = nxt.with_tail(min(nxt.tail_valuation, term.tail_valuation + kappa), iv_m)
        total = (total + term).prune(iv_m, budget)
        used += 1
    x = apply_phi(total, axis, budget=budget, iv=iv_m)
    x = x.mul(_u_power(p, y.nvars, axis, i, y.vars), iv=x.interval).prune(x.interval, budget)
    return x, used


def _contraction(p: int, a: int, ub_frac: LaurentBoxSeries, iv: MultiInterval, axis: int):
    """Lower bound for the valuation gain of ``K`` at the corners of ``iv``.

    ``(gamma - 1) T^e = T^e (a^e (1 + h)^e - 1)`` with ``h = gamma(T)/(aT) - 1``
    gains at least ``min(v_p(a - 1), v(h))`` for every integer ``e``.
    """
    g = gamma_power(p, a, 1, None)[0] if a > 0 else None
    if g is None:
        raise RegimeError("component inverse needs a positive integer unit")
    h = {k - 1: Fraction(c, a) for k, c in g.items() if k > 1}
    va = vp(a - 1, p)
    best = INF
    ax = iv.only_axis(axis)
    uf = ub_frac.restrict(ub_frac.box) if ub_frac.interval is None else ub_frac
    for c in ax.corners():
        t = c[0]
        vh = min((vp_frac(x, p) + k * t for k, x in h.items()), default=INF)
        vu = min((vp(x, p) + ub_frac.shift + e[axis] * t for e, x in ub_frac.terms.items()), default=INF)
        vu = min(vu, ub_frac.tail_valuation)
        best = min(best, min(va, vh) + vu)
    return best


def vp_frac(x: Fraction, p: int):
    return vp(x.numerator, p) - vp(x.denominator, p)


def _embed_axis(u: LaurentBoxSeries, like: LaurentBoxSeries, axis: int) -> LaurentBoxSeries:
    """Turn a univariate series into one in the variables of ``like`` along ``axis``."""
    n = like.nvars
    terms = {}
    for (k,), c in u.terms.items():
        e = [0] * n
        e[axis] = k
        terms[tuple(e)] = c
    lo = [0] * n
    hi = [0] * n
    lo[axis], hi[axis] = u.box.lo[0], u.box.hi[0]
    iv = None
    if u.interval is not None and like.interval is not None:
        iv = like.interval
    return LaurentBoxSeries(u.prime, like.vars, Box(tuple(lo), tuple(hi)), terms, u.shift, u.absprec,
                            u.tail_valuation if iv is not None else INF, "T", iv, _trusted=True)


# ---------------------------------------------------------------------------
# operator norms


def gamma_minus_one(axis: int, a: int, power: int = 1, budget=DEFAULT_BUDGET,
                    iv: Optional[MultiInterval] = None) -> Op:
    def op(f: LaurentBoxSeries) -> LaurentBoxSeries:
        for _ in range(power):
            g = apply_gamma(f, axis, a, budget=budget, iv=iv)
            f = g - f
            if iv is not None:
                f = f.prune(iv, budget)
        return f
    return op


def operator_norm_estimate(op, box: Box, iv: MultiInterval, p: int, vars: Sequence[str],
                           budget=DEFAULT_BUDGET, detail: bool = False):
    """Lower bound ``min_e v_iv(op(T^e)) - v_iv(T^e)`` over monomials of ``box``.

    ``op`` is a callable, an :class:`OperatorSpec` or a list of them
    (applied left to right).
    """
    check_prime(p)
    if isinstance(op, OperatorSpec):
        op = [op]
    if isinstance(op, (list, tuple)):
        specs = list(op)

        def op(f, specs=specs):
            cur_iv = iv
            for s in specs:
                f = apply_op(f, s, budget=budget, iv=cur_iv)
                cur_iv = f.interval or cur_iv
            return f
    rows = []
    for e in box.points():
        x = LaurentBoxSeries.monomial(p, vars, e).with_tail(INF, iv)
        x = LaurentBoxSeries(p, x.vars, x.box, x.terms, x.shift, x.absprec, INF, "T", iv, _trusted=True)
        y = op(x)
        out_iv = y.interval or iv
        gain = y.certified_valuation(out_iv) - monomial_interval_valuation(e, iv)
        rows.append((e, gain))
    best = min(g for _, g in rows)
    return (best, rows) if detail else best
