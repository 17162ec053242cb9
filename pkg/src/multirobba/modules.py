"""Finite free (phi, Gamma)-modules given by their structure matrices.

For each axis ``a`` the module carries ``Phi_a`` and ``Gamma_a``; column
``j`` is the image of the basis vector ``e_j`` under ``phi_a`` (resp. the
generator ``gamma_a``).  The semilinear action on coordinates is
``phi_a(x) = Phi_a . phi_a(x)`` and ``psi_a(x) = psi_a(Phi_a^-1 . x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .errors import (InvalidArgumentError, NotInvertibleInRegimeError, ParseError,
                     PreconditionError, ValidationError)
from .laurent import Box, LaurentBoxSeries, MultiInterval, series_invert
from .operators import apply_gamma, apply_phi, apply_psi, gamma_generator
from .padic import DEFAULT_PREC, INF, PadicScalar, check_prime, vp

Matrix = List[List[LaurentBoxSeries]]
Scalar = Union[int, Fraction, PadicScalar]


def _to_scalar(x: Scalar, p: int) -> PadicScalar:
    if isinstance(x, PadicScalar):
        return x
    return PadicScalar.from_rational(Fraction(x), 1, p, DEFAULT_PREC)


@dataclass
class Character:
    """A character of ``prod Q_p^x`` through its values at ``p_a`` and at the generator ``u_a = 1 + p``.

    ``exact_dp``/``exact_du`` keep rational values when the character was
    built from rationals, so that exact arithmetic stays available.
    """

    prime: int
    dp: Tuple[PadicScalar, ...]
    du: Tuple[PadicScalar, ...]
    exact_dp: Optional[Tuple[Fraction, ...]] = None
    exact_du: Optional[Tuple[Fraction, ...]] = None

    @classmethod
    def from_values(cls, p: int, dp: Sequence[Scalar], du: Sequence[Scalar]) -> "Character":
        check_prime(p)
        if len(dp) != len(du):
            raise InvalidArgumentError("dp and du have different lengths")
        for x in list(dp) + list(du):
            if not isinstance(x, PadicScalar) and Fraction(x) == 0:
                raise InvalidArgumentError("character values must be nonzero")
        ex = all(not isinstance(x, PadicScalar) for x in list(dp) + list(du))
        sd = tuple(_to_scalar(x, p) for x in dp)
        su = tuple(_to_scalar(x, p) for x in du)
        for x in su:
            if x.valuation != 0:
                raise InvalidArgumentError("the value at u must be a p-adic unit")
        return cls(p, sd, su,
                   tuple(Fraction(x) for x in dp) if ex else None,
                   tuple(Fraction(x) for x in du) if ex else None)

    @classmethod
    def trivial(cls, p: int, n: int) -> "Character":
        return cls.from_values(p, [1] * n, [1] * n)

    @property
    def nvars(self) -> int:
        return len(self.dp)

    def value_p(self, axis: int):
        return self.exact_dp[axis] if self.exact_dp is not None else self.dp[axis]

    def value_u(self, axis: int):
        return self.exact_du[axis] if self.exact_du is not None else self.du[axis]

    def __mul__(self, other: "Character") -> "Character":
        if self.exact_dp is not None and other.exact_dp is not None:
            return Character.from_values(self.prime, [a * b for a, b in zip(self.exact_dp, other.exact_dp)],
                                         [a * b for a, b in zip(self.exact_du, other.exact_du)])
        return Character(self.prime, tuple(a * b for a, b in zip(self.dp, other.dp)),
                         tuple(a * b for a, b in zip(self.du, other.du)))

    def inverse(self) -> "Character":
        if self.exact_dp is not None:
            return Character.from_values(self.prime, [1 / a for a in self.exact_dp],
                                         [1 / a for a in self.exact_du])
        return Character(self.prime, tuple(a.inverse() for a in self.dp),
                         tuple(a.inverse() for a in self.du))

    def to_json(self) -> dict:
        return {"dp": [x.to_json() for x in self.dp], "du": [x.to_json() for x in self.du]}

    @classmethod
    def from_json(cls, obj: dict, p: int) -> "Character":
        try:
            dp = [PadicScalar.from_json(x, p) for x in obj["dp"]]
            du = [PadicScalar.from_json(x, p) for x in obj["du"]]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad character: {exc}") from exc
        return cls.from_values(p, dp, du)


def parse_character(text: str, p: int, n: int) -> Character:
    """``dp=2,du=1`` with ``:`` separating per-axis values, e.g. ``dp=2:1,du=1:1``."""
    vals = {}
    for piece in text.split(","):
        if "=" not in piece:
            raise ParseError(f"bad character {text!r}")
        key, val = piece.split("=", 1)
        key = key.strip()
        if key not in ("dp", "du"):
            raise ParseError(f"bad character key {key!r}")
        try:
            xs = [Fraction(v) for v in val.split(":")]
        except (ValueError, ZeroDivisionError) as exc:
            raise ParseError(f"bad character value {val!r}") from exc
        if len(xs) == 1:
            xs = xs * n
        if len(xs) != n:
            raise ParseError(f"character {text!r} does not match {n} variables")
        vals[key] = xs
    return Character.from_values(p, vals.get("dp", [1] * n), vals.get("du", [1] * n))


# ---------------------------------------------------------------------------
# modules


@dataclass
class PhiGammaModule:
    prime: int
    vars: Tuple[str, ...]
    rank: int
    phi: List[Matrix]
    gamma: List[Matrix]
    regime: Optional[MultiInterval] = None
    basis_labels: Optional[List[str]] = None
    gamma_unit: Optional[int] = None

    def __post_init__(self):
        if self.gamma_unit is None:
            self.gamma_unit = gamma_generator(self.prime)
        if self.basis_labels is None:
            self.basis_labels = [f"e{i + 1}" for i in range(self.rank)]
        n = len(self.vars)
        if len(self.phi) != n or len(self.gamma) != n:
            raise InvalidArgumentError("one Phi and one Gamma matrix per variable")
        for mats in (self.phi, self.gamma):
            for m in mats:
                if len(m) != self.rank or any(len(r) != self.rank for r in m):
                    raise InvalidArgumentError("structure matrices must be rank x rank")

    @property
    def nvars(self) -> int:
        return len(self.vars)

    def is_constant(self) -> bool:
        return all(set(x.terms) <= {(0,) * self.nvars}
                   for mats in (self.phi, self.gamma) for m in mats for r in m for x in r)

    def is_polynomial(self) -> bool:
        return all(min((min(e) for e in x.terms), default=0) >= 0 and x.is_exact()
                   for mats in (self.phi, self.gamma) for m in mats for r in m for x in r)

    def constant_entries(self, kind: str, axis: int) -> List[List[Fraction]]:
        """Constant structure matrix as rationals (exact entries only)."""
        mats = self.phi if kind == "phi" else self.gamma
        out = []
        z = (0,) * self.nvars
        for row in mats[axis]:
            r = []
            for x in row:
                if set(x.terms) - {z}:
                    raise PreconditionError("structure matrix is not constant")
                if x.absprec != INF:
                    r.append(x.coeff(z) if x.terms else PadicScalar.zero(self.prime))
                else:
                    r.append(x.coeff_rational(z))
            out.append(r)
        return out

    def to_json(self) -> dict:
        def mat(m):
            return {"rows": self.rank, "cols": self.rank,
                    "entries": [[x.to_json() for x in row] for row in m]}
        return {"p": self.prime, "vars": list(self.vars), "rank": self.rank,
                "phi": [mat(m) for m in self.phi], "gamma": [mat(m) for m in self.gamma],
                "regime": self.regime.to_json() if self.regime is not None else None}

    @classmethod
    def from_json(cls, obj: dict) -> "PhiGammaModule":
        try:
            rank = int(obj["rank"])
            regime = MultiInterval.from_json(obj["regime"]) if obj.get("regime") else None
            mats = {}
            for key in ("phi", "gamma"):
                mats[key] = [[[LaurentBoxSeries.from_json(x) for x in row] for row in m["entries"]]
                             for m in obj[key]]
            p = obj.get("p")
            vars = obj.get("vars")
            if p is None or vars is None:
                first = next((x for m in mats["phi"] for row in m for x in row), None)
                if first is None:
                    raise ParseError("rank-0 module needs explicit p and vars")
                p, vars = first.prime, first.vars
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"bad module: {exc}") from exc
        if len(mats["phi"]) != len(vars):
            raise ParseError("need one Phi matrix per variable")
        return cls(int(p), tuple(vars), rank, mats["phi"], mats["gamma"], regime)


def _const(p: int, vars, c) -> LaurentBoxSeries:
    return LaurentBoxSeries.constant(p, vars, c)


def module_from_character(delta: Character, vars: Optional[Sequence[str]] = None,
                          regime: Optional[MultiInterval] = None) -> PhiGammaModule:
    n = delta.nvars
    vars = tuple(vars or [f"T{i + 1}" for i in range(n)])
    p = delta.prime
    phi = [[[_const(p, vars, delta.value_p(a))]] for a in range(n)]
    gamma = [[[_const(p, vars, delta.value_u(a))]] for a in range(n)]
    return PhiGammaModule(p, vars, 1, phi, gamma, regime, ["e_delta"])


def zero_module(p: int, n: int) -> PhiGammaModule:
    vars = tuple(f"T{i + 1}" for i in range(n))
    return PhiGammaModule(p, vars, 0, [[] for _ in range(n)], [[] for _ in range(n)])


def direct_sum(M: PhiGammaModule, N: PhiGammaModule) -> PhiGammaModule:
    if (M.prime, M.vars) != (N.prime, N.vars):
        raise InvalidArgumentError("modules over different rings")
    r = M.rank + N.rank
    zero = LaurentBoxSeries.zero(M.prime, M.vars)

    def blk(A, B):
        out = [[zero] * r for _ in range(r)]
        for i in range(M.rank):
            for j in range(M.rank):
                out[i][j] = A[i][j]
        for i in range(N.rank):
            for j in range(N.rank):
                out[M.rank + i][M.rank + j] = B[i][j]
        return out

    labels = list(M.basis_labels) + list(N.basis_labels)
    if len(set(labels)) < len(labels):
        labels = [f"{b}_{i + 1}" for i, b in enumerate(labels)]
    return PhiGammaModule(M.prime, M.vars, r,
                          [blk(a, b) for a, b in zip(M.phi, N.phi)],
                          [blk(a, b) for a, b in zip(M.gamma, N.gamma)],
                          M.regime or N.regime, labels)


def twist(M: PhiGammaModule, delta: Character) -> PhiGammaModule:
    """``M (x) R(delta)``."""
    if delta.nvars != M.nvars:
        raise InvalidArgumentError("character and module have different numbers of variables")
    phi = [[[x.scale(delta.value_p(a)) for x in row] for row in m] for a, m in enumerate(M.phi)]
    gamma = [[[x.scale(delta.value_u(a)) for x in row] for row in m] for a, m in enumerate(M.gamma)]
    return PhiGammaModule(M.prime, M.vars, M.rank, phi, gamma, M.regime, M.basis_labels, M.gamma_unit)


# ---------------------------------------------------------------------------
# matrices over series


def mat_mul(A: Matrix, B: Matrix, iv: Optional[MultiInterval] = None, budget=None) -> Matrix:
    n, k, m = len(A), len(B), len(B[0]) if B else 0
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = None
            for t in range(k):
                term = A[i][t].mul(B[t][j], iv=iv)
                acc = term if acc is None else acc + term
            if iv is not None and budget is not None:
                acc = acc.prune(iv, budget)
            row.append(acc)
        out.append(row)
    return out


def mat_map(f, A: Matrix) -> Matrix:
    return [[f(x) for x in row] for row in A]


def _minor(A: Matrix, i: int, j: int) -> Matrix:
    return [row[:j] + row[j + 1:] for k, row in enumerate(A) if k != i]


def mat_det(A: Matrix, iv=None) -> LaurentBoxSeries:
    if len(A) == 1:
        return A[0][0]
    acc = None
    for j in range(len(A)):
        term = A[0][j].mul(mat_det(_minor(A, 0, j), iv), iv=iv)
        if j % 2:
            term = -term
        acc = term if acc is None else acc + term
    return acc


def invert_series(x: LaurentBoxSeries, iv: Optional[MultiInterval], budget) -> LaurentBoxSeries:
    z = (0,) * x.nvars
    if set(x.terms) <= {z} and x.tail_valuation == INF:
        if not x.terms:
            raise NotInvertibleInRegimeError("zero is not invertible")
        c = x.coeff_rational(z) if x.absprec == INF else x.coeff(z)
        return LaurentBoxSeries.from_terms(x.prime, x.vars, {z: 1 / c})
    if iv is None:
        raise NotInvertibleInRegimeError("inverting a nonconstant entry needs a regime")
    return series_invert(x, iv, budget=budget)


def mat_inverse(A: Matrix, iv: Optional[MultiInterval] = None, budget=12) -> Matrix:
    """Inverse through the adjugate; the determinant is inverted in the regime."""
    n = len(A)
    if n == 0:
        return []
    det_inv = invert_series(mat_det(A, iv), iv, budget)
    if n == 1:
        return [[det_inv]]
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            c = mat_det(_minor(A, j, i), iv)
            if (i + j) % 2:
                c = -c
            out[i][j] = c.mul(det_inv, iv=iv)
    return out


def mat_transpose(A: Matrix) -> Matrix:
    return [list(r) for r in zip(*A)] if A else []


def dual_module(M: PhiGammaModule, budget=12) -> PhiGammaModule:
    """``Hom(M, R)`` with matrices ``(A^T)^-1``."""
    iv = M.regime
    phi = [mat_inverse(mat_transpose(m), iv, budget) for m in M.phi]
    gamma = [mat_inverse(mat_transpose(m), iv, budget) for m in M.gamma]
    labels = [f"{b}*" for b in M.basis_labels]
    return PhiGammaModule(M.prime, M.vars, M.rank, phi, gamma, M.regime, labels, M.gamma_unit)


def apply_module_operator(M: PhiGammaModule, kind: str, axis: int, x: List[LaurentBoxSeries],
                          iv: Optional[MultiInterval] = None, budget=12) -> List[LaurentBoxSeries]:
    """Semilinear action on a coordinate vector."""
    if len(x) != M.rank:
        raise InvalidArgumentError("vector length differs from the rank")
    col = [[c] for c in x]
    if kind == "phi":
        y = [[apply_phi(c, axis, budget=budget, iv=iv)] for c in x]
        return [r[0] for r in mat_mul(M.phi[axis], y)]
    if kind == "gamma":
        y = [[apply_gamma(c, axis, M.gamma_unit, budget=budget, iv=iv)] for c in x]
        return [r[0] for r in mat_mul(M.gamma[axis], y)]
    if kind == "psi":
        inv = mat_inverse(M.phi[axis], iv, budget)
        y = mat_mul(inv, col)
        return [apply_psi(r[0], axis, iv=iv) for r in y]
    raise InvalidArgumentError(f"unknown operator {kind!r}")


# ---------------------------------------------------------------------------
# validation


@dataclass
class Relation:
    name: str
    passed: bool
    valuation: object

    def to_json(self) -> dict:
        v = self.valuation
        return {"relation": self.name, "pass": self.passed,
                "valuation": "inf" if v == INF else str(Fraction(v))}


@dataclass
class ValidationReport:
    relations: List[Relation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.relations)

    def to_json(self) -> dict:
        return {"ok": self.ok, "relations": [r.to_json() for r in self.relations]}


def _residual(A: Matrix, B: Matrix, iv: Optional[MultiInterval]):
    worst = INF
    for ra, rb in zip(A, B):
        for a, b in zip(ra, rb):
            d = a - b
            if d.is_zero() and d.tail_valuation == INF:
                continue
            if iv is None:
                v = d.coefficient_valuation()
                if d.tail_valuation != INF:
                    v = min(v, d.tail_valuation)
            else:
                v = d.certified_valuation(iv) if not d.is_zero() else d.error_floor(iv)
            worst = min(worst, v)
    return worst


def validate_module(M: PhiGammaModule, tol=None, budget=12) -> ValidationReport:
    """Check that the structure matrices define commuting semilinear operators.

    ``tol=None`` asks for exact equality; otherwise a relation passes when
    its residual has valuation at least ``tol``.
    """
    rep = ValidationReport()
    if M.rank == 0:
        return rep
    iv = None if M.is_polynomial() else M.regime
    if iv is None and not M.is_polynomial():
        raise PreconditionError("a module with Laurent entries needs a regime")
    a = M.gamma_unit

    def ph(axis):
        return lambda x: apply_phi(x, axis, budget=budget, iv=iv) if iv is None else _phi_same(x, axis, iv, budget)

    def ga(axis):
        return lambda x: apply_gamma(x, axis, a, budget=budget, iv=iv)

    n = M.nvars

    def check(name, lhs, rhs):
        v = _residual(lhs, rhs, iv)
        ok = (v == INF) if tol is None else (v >= tol)
        rep.relations.append(Relation(name, ok, v))

    for x in range(n):
        for y in range(x + 1, n):
            check(f"phi{x + 1}phi{y + 1}",
                  mat_mul(M.phi[x], mat_map(ph(x), M.phi[y]), iv, budget),
                  mat_mul(M.phi[y], mat_map(ph(y), M.phi[x]), iv, budget))
            check(f"gamma{x + 1}gamma{y + 1}",
                  mat_mul(M.gamma[x], mat_map(ga(x), M.gamma[y]), iv, budget),
                  mat_mul(M.gamma[y], mat_map(ga(y), M.gamma[x]), iv, budget))
    for x in range(n):
        for y in range(n):
            check(f"phi{x + 1}gamma{y + 1}",
                  mat_mul(M.phi[x], mat_map(ph(x), M.gamma[y]), iv, budget),
                  mat_mul(M.gamma[y], mat_map(ga(y), M.phi[x]), iv, budget))
    return rep


def _phi_same(x: LaurentBoxSeries, axis: int, iv: MultiInterval, budget) -> LaurentBoxSeries:
    """``phi`` of an entry viewed on the module's own regime.

    Structure matrices are compared on one annulus, so ``phi`` is fed the
    entry on ``p * iv`` (it is a Laurent polynomial, so this is harmless)
    and produces its image on ``iv``.
    """
    src = iv.scale_axis(axis, x.prime)
    y = LaurentBoxSeries(x.prime, x.vars, x.box, x.terms, x.shift, x.absprec, INF, x.basis, src,
                         _trusted=True)
    return apply_phi(y, axis, budget=budget, iv=src)


# ---------------------------------------------------------------------------
# triangulation probe


@dataclass
class ProbeReport:
    h0_dim: int
    witnesses: List[List[str]]
    depth: int
    tol: int

    def to_json(self) -> dict:
        return {"h0_dim": self.h0_dim, "witnesses": self.witnesses, "depth": self.depth, "tol": self.tol}


def triangulation_probe(M: PhiGammaModule, delta: Character, depth: int = 10, prec: int = 20,
                        tol: Optional[int] = None) -> ProbeReport:
    """``H^0`` of ``M^dual (x) delta``: nonzero maps ``M -> R(delta)`` witness a sub/quotient."""
    from .herr import NestedBoxFamily, herr_h0_witnesses  # the Herr layer sits above this one
    N = twist(dual_module(M), delta)
    tol = prec - 4 if tol is None else tol
    fam = NestedBoxFamily(M.prime, M.nvars, depth, prec)
    dim, vecs = herr_h0_witnesses(N, fam, tol)
    return ProbeReport(dim, vecs, depth, tol)
