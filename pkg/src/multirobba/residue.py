"""Residues of top-degree forms and the pairing they induce."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .errors import (IncompleteFunctionalError, IndeterminateResidueError, InvalidArgumentError,
                     ParseError, TailContaminationError)
from .laurent import Box, ExponentVec, LaurentBoxSeries, basis_change, monomial_interval_valuation
from .padic import INF, PadicScalar, check_prime


@dataclass
class DifferentialForm:
    """``coefficient * dT_1 ^ ... ^ dT_n``.

    The tag ``"omega"`` marks a form written in the group variables
    ``c_a = 1 + T_a`` (the coefficient is then in the ``U``-basis); it is
    converted to the ``T`` coordinates before taking residues and scaled by
    ``normalization``.
    """

    coefficient: LaurentBoxSeries
    form_tag: str = "dT"
    normalization: int = 1

    def __post_init__(self):
        if self.form_tag not in ("dT", "omega"):
            raise InvalidArgumentError(f"unknown form tag {self.form_tag!r}")


def _minus_one(n: int) -> ExponentVec:
    return (-1,) * n


def residue(w, prec: Optional[int] = None) -> PadicScalar:
    """Coefficient of ``T^(-1,...,-1)``."""
    if isinstance(w, LaurentBoxSeries):
        w = DifferentialForm(w)
    f = w.coefficient
    if w.form_tag == "omega":
        if f.basis != "U":
            raise InvalidArgumentError("omega forms carry U-basis coefficients")
        f = basis_change(f, "T", iv=f.interval)
    elif f.basis != "T":
        raise InvalidArgumentError("dT forms carry T-basis coefficients")
    e = _minus_one(f.nvars)
    if not f.box.contains(e):
        raise IndeterminateResidueError("box does not contain the exponent (-1, ..., -1)")
    c = f.coeff(e)
    if f.tail_valuation != INF:
        # a dropped term a T^e with v_iv >= tail has v(a) >= tail - v_iv(T^e)
        cert = f.tail_valuation - monomial_interval_valuation(e, f.interval)
        need = prec if prec is not None else (c.absprec if c.absprec != INF else cert)
        if cert < need:
            raise TailContaminationError(
                f"tail certifies the residue only to valuation {cert}, {need} requested")
        c = c + PadicScalar.inexact_zero(f.prime, int(cert // 1))
    if w.normalization != 1:
        c = c * w.normalization
    return c


def pairing(f: LaurentBoxSeries, g: LaurentBoxSeries, prec: Optional[int] = None) -> PadicScalar:
    """``h(f, g) = res(f g dT)``."""
    prod = f.mul(g)
    if not prod.box.contains(_minus_one(prod.nvars)):
        prod = prod.with_box(prod.box.union(Box(_minus_one(prod.nvars), _minus_one(prod.nvars))))
    return residue(prod, prec)


# ---------------------------------------------------------------------------
# functionals and dual series


@dataclass
class Functional:
    """A linear form known through its values ``mu(T^m)`` on a box of monomials."""

    prime: int
    vars: Tuple[str, ...]
    box: Box
    values: Dict[ExponentVec, PadicScalar] = field(default_factory=dict)

    def __call__(self, m: ExponentVec) -> PadicScalar:
        m = tuple(m)
        if m not in self.values:
            if self.box.contains(m):
                return PadicScalar.zero(self.prime)
            raise IncompleteFunctionalError(f"functional not tabulated at {m}")
        return self.values[m]

    def to_json(self) -> dict:
        return {"box": self.box.to_json(),
                "values": [{"e": list(e), "v": self.values[e].to_json()} for e in sorted(self.values)]}

    @classmethod
    def from_json(cls, obj: dict, p: int, vars) -> "Functional":
        try:
            box = Box.from_json(obj["box"])
            vals = {tuple(int(x) for x in item["e"]): PadicScalar.from_json(item["v"], p)
                    for item in obj["values"]}
        except (KeyError, TypeError) as exc:
            raise ParseError(f"bad functional: {exc}") from exc
        for e in vals:
            if not box.contains(e):
                raise ParseError(f"functional value at {e} outside its box")
        return cls(p, tuple(vars), box, vals)


def functional_from_series(g: LaurentBoxSeries, box: Box) -> Functional:
    """Tabulate ``mu = h(., g)`` on the monomials of ``box``."""
    vals = {}
    n = g.nvars
    for m in box.points():
        e = tuple(-1 - x for x in m)
        c = g.coeff(e) if g.box.contains(e) else PadicScalar.zero(g.prime)
        if not c.is_exact_zero():
            vals[m] = c
    return Functional(g.prime, g.vars, box, vals)


def dual_series(mu: Functional, box: Box) -> LaurentBoxSeries:
    """``sum_{n in box} mu(T^(-1-n)) T^n``; the inverse of :func:`functional_from_series`."""
    need = box.reflect()
    if not mu.box.covers(need):
        raise IncompleteFunctionalError(f"functional box {mu.box} does not cover {need}")
    terms = {}
    for n in box.points():
        c = mu(tuple(-1 - x for x in n))
        if not c.is_zero() or not c.is_exact_zero():
            terms[n] = c
    return LaurentBoxSeries.from_terms(mu.prime, mu.vars, terms, box)


# ---------------------------------------------------------------------------
# perfectness


@dataclass
class GramReport:
    perfect: bool
    size: Tuple[int, int]
    witness: Optional[str] = None

    def to_json(self) -> dict:
        return {"perfect": self.perfect, "size": list(self.size), "witness": self.witness}


def gram_matrix(boxA: Box, boxB: Box, p: int) -> List[List[PadicScalar]]:
    vars = tuple(f"T{i + 1}" for i in range(boxA.nvars))
    rows = []
    for m in boxA.points():
        f = LaurentBoxSeries.monomial(p, vars, m)
        row = []
        for k in boxB.points():
            row.append(pairing(f, LaurentBoxSeries.monomial(p, vars, k)))
        rows.append(row)
    return rows


def perfectness_gram_check(boxA: Box, boxB: Box, p: int = 3) -> GramReport:
    """Check that the pairing between the two monomial boxes is a permutation matrix."""
    check_prime(p)
    if boxA.nvars != boxB.nvars:
        raise InvalidArgumentError("boxes of different dimension")
    gram = gram_matrix(boxA, boxB, p)
    pa, pb = list(boxA.points()), list(boxB.points())
    size = (len(pa), len(pb))
    if len(pa) != len(pb):
        return GramReport(False, size, f"shape {size[0]}x{size[1]} is not square")
    used = set()
    for i, row in enumerate(gram):
        ones = [j for j, c in enumerate(row) if not c.is_zero()]
        if len(ones) != 1 or row[ones[0]] != 1:
            return GramReport(False, size, f"row for T^{list(pa[i])} has {len(ones)} nonzero entries")
        used.add(ones[0])
    if len(used) != len(pb):
        return GramReport(False, size, "columns are not hit exactly once")
    return GramReport(True, size)


@dataclass
class ExactFormReport:
    axis: int
    residue: PadicScalar
    vanishes: bool

    def to_json(self) -> dict:
        return {"axis": self.axis + 1, "residue": self.residue.to_json(), "vanishes": self.vanishes}


def exact_form_residue_check(f: LaurentBoxSeries, axis: int) -> ExactFormReport:
    """The residue of ``d f / d T_axis`` must vanish."""
    if not 0 <= axis < f.nvars:
        raise InvalidArgumentError("axis out of range")
    d = f.derivative(axis)
    e = _minus_one(f.nvars)
    if not d.box.contains(e):
        # only the T_axis^0 terms of f could land on e, and they differentiate to zero
        d = d.with_box(d.box.union(Box(e, e)))
    r = residue(d)
    return ExactFormReport(axis, r, r.is_zero())
