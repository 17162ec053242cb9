"""Koszul complexes of the operators ``phi - 1``, ``psi - 1`` and ``gamma - 1``.

The complexes are built on the jet quotients of :mod:`multirobba.jets`,
on which every operator is an endomorphism, so no truncation happens
inside a complex and ``d o d = 0`` holds exactly.  A truncation depth
``N`` gives spaces of dimension ``(N+1)^n`` per module coordinate, and a
ladder of depths replaces the limit over shrinking annuli.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb, lcm
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from flint import fmpz_mat

from .errors import InvalidArgumentError, PreconditionError
from .jets import identity, jet, kron
from .laurent import Box
from .modules import Character, PhiGammaModule, twist
from .padic import INF, PadicScalar, vp
from .plinalg import PadicMatrix, block_matrix, kernel_basis, rank_with_tolerance

DEFAULT_HERR_PREC = 20
Level = Tuple[str, ...]


# ---------------------------------------------------------------------------
# rational matrices as (integer matrix, denominator)


@dataclass
class QMat:
    Z: fmpz_mat
    den: int = 1

    @property
    def shape(self) -> Tuple[int, int]:
        return self.Z.nrows(), self.Z.ncols()

    def __matmul__(self, other: "QMat") -> "QMat":
        return QMat(self.Z * other.Z, self.den * other.den)

    def __sub__(self, other: "QMat") -> "QMat":
        d = lcm(self.den, other.den)
        return QMat(self.Z * (d // self.den) - other.Z * (d // other.den), d)

    def __add__(self, other: "QMat") -> "QMat":
        d = lcm(self.den, other.den)
        return QMat(self.Z * (d // self.den) + other.Z * (d // other.den), d)

    def __neg__(self) -> "QMat":
        return QMat(-self.Z, self.den)

    def valuation(self, p: int):
        """Minimal ``p``-adic valuation of the entries (``INF`` for zero)."""
        v = INF
        for x in self.Z.entries():
            if x != 0:
                v = min(v, vp(int(x), p))
        return v if v == INF else v - vp(self.den, p)

    def sparse(self, p: int, workprec: int) -> Tuple[Dict[Tuple[int, int], int], int, object]:
        """``(data, shift, absprec)`` with ``self = p^shift * data``."""
        k = vp(self.den, p)
        u = self.den // p ** k
        n = self.Z.ncols()
        vals = self.Z.entries()
        if u == 1:
            data = {divmod(i, n): int(x) for i, x in enumerate(vals) if x != 0}
            return data, -k, INF
        mod = p ** workprec
        inv = pow(u, -1, mod)
        data = {}
        for i, x in enumerate(vals):
            if x != 0:
                c = int(x) * inv % mod
                data[divmod(i, n)] = c - mod if 2 * c > mod else c
        return data, -k, workprec - k


def qmat_from_rationals(rows: Sequence[Sequence[Fraction]]) -> QMat:
    d = 1
    for r in rows:
        for x in r:
            d = lcm(d, Fraction(x).denominator)
    m, n = len(rows), len(rows[0]) if rows else 0
    Z = fmpz_mat(m, n)
    for i, r in enumerate(rows):
        for j, x in enumerate(r):
            x = Fraction(x) * d
            if x:
                Z[i, j] = int(x)
    return QMat(Z, d)


def qkron(A: QMat, B: QMat) -> QMat:
    return QMat(kron(A.Z, B.Z), A.den * B.den)


def qid(n: int) -> QMat:
    return QMat(identity(n))


def _rational(x) -> Fraction:
    if isinstance(x, PadicScalar):
        return x.lift_balanced()
    return Fraction(x)


def _rat_inverse(M: List[List[Fraction]]) -> List[List[Fraction]]:
    n = len(M)
    A = [list(map(Fraction, r)) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(M)]
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c] != 0), None)
        if piv is None:
            raise PreconditionError("structure matrix is singular")
        A[c], A[piv] = A[piv], A[c]
        inv = 1 / A[c][c]
        A[c] = [x * inv for x in A[c]]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[c])]
    return [r[n:] for r in A]


# ---------------------------------------------------------------------------
# truncation families


@dataclass(frozen=True)
class NestedBoxFamily:
    """Truncation at depth ``N`` in every variable.

    Each Koszul degree uses the box ``[0, N]^n``; the growth margin is
    zero because the jet quotients make every operator an endomorphism.
    """

    prime: int
    nvars: int
    depth: int
    prec: int = DEFAULT_HERR_PREC
    growth: Tuple[int, ...] = ()

    def __post_init__(self):
        if self.depth < 0 or self.nvars < 0:
            raise InvalidArgumentError("depth and variable count must be nonnegative")
        if self.prime ** (self.prec + 2) >= 2 ** 62 and self.prec > 40:
            raise InvalidArgumentError("precision too large for the modular backend")

    @property
    def base_box(self) -> Box:
        return Box.cube(0, self.depth, self.nvars)

    def box(self, degree: int) -> Box:
        m = self.growth[degree] if degree < len(self.growth) else 0
        return Box.cube(0, self.depth + m, self.nvars)

    @property
    def space_dim(self) -> int:
        return (self.depth + 1) ** self.nvars

    def jet(self, a: int):
        return jet(self.prime, self.depth, a)

    def with_depth(self, depth: int) -> "NestedBoxFamily":
        return NestedBoxFamily(self.prime, self.nvars, depth, self.prec, self.growth)


def ladder(p: int, n: int, depths: Sequence[int], prec: int = DEFAULT_HERR_PREC) -> List[NestedBoxFamily]:
    return [NestedBoxFamily(p, n, d, prec) for d in depths]


# ---------------------------------------------------------------------------
# complexes


@dataclass
class KoszulOp:
    """An operator ``D`` given on each level of the source space.

    ``matrix(level)`` returns the matrix of ``D`` from ``level`` to
    ``target(level)``.
    """

    name: str
    matrix: Callable[[Level], QMat]
    target: Callable[[Level], Level] = lambda lv: lv


@dataclass
class Component:
    subset: Tuple[int, ...]
    level: Level
    offset: int
    size: int


@dataclass
class ChainComplexQp:
    prime: int
    dims: List[int]
    differentials: List[PadicMatrix]
    components: List[List[Component]]
    ops: List[str]
    metadata: dict = field(default_factory=dict)
    d2_residual_valuation: object = INF
    _label: Optional[Callable[[Level, int], str]] = None

    @property
    def length(self) -> int:
        return len(self.dims) - 1

    def basis_label(self, degree: int, index: int) -> str:
        for c in self.components[degree]:
            if c.offset <= index < c.offset + c.size:
                names = ",".join(self.ops[i] for i in c.subset) or "-"
                inner = self._label(c.level, index - c.offset) if self._label else str(index - c.offset)
                return f"{inner}[{names}]"
        raise IndexError(index)


def _level_of(ops: Sequence[KoszulOp], base: Level, S: Sequence[int]) -> Level:
    lv = base
    for i in S:
        lv = ops[i].target(lv)
    return lv


def _sign(S: Sequence[int], j: int) -> int:
    return -1 if sum(1 for i in S if i > j) % 2 else 1


def build_koszul(ops: Sequence[KoszulOp], space_dim: Callable[[Level], int], prime: int,
                 base_level: Level = (), workprec: int = 60, tol=None,
                 label: Optional[Callable[[Level, int], str]] = None,
                 metadata: Optional[dict] = None) -> ChainComplexQp:
    """Koszul complex ``sum_S ... -> sum_{j not in S} +- D_j`` with ``e_S -> e_{S+j}``.

    The operators must commute; the largest violation is measured exactly
    and the build is refused if it reaches below ``tol`` (any violation
    when ``tol`` is ``None``).
    """
    n = len(ops)
    cache: Dict[Tuple[int, Level], QMat] = {}

    def D(j: int, lv: Level) -> QMat:
        key = (j, lv)
        if key not in cache:
            cache[key] = ops[j].matrix(lv)
        return cache[key]

    # d o d = 0 reduces to D_i D_j = D_j D_i between matching levels
    resid = INF
    seen = set()
    for k in range(n + 1):
        for S in combinations(range(n), k):
            lv = _level_of(ops, base_level, S)
            for i in range(n):
                for j in range(i + 1, n):
                    if i in S or j in S or (i, j, lv) in seen:
                        continue
                    seen.add((i, j, lv))
                    lhs = D(i, ops[j].target(lv)) @ D(j, lv)
                    rhs = D(j, ops[i].target(lv)) @ D(i, lv)
                    resid = min(resid, (lhs - rhs).valuation(prime))
    if resid != INF and (tol is None or resid < tol):
        raise PreconditionError(f"operators do not commute: residual valuation {resid}")

    comps: List[List[Component]] = []
    dims = []
    for k in range(n + 1):
        row, off = [], 0
        for S in combinations(range(n), k):
            lv = _level_of(ops, base_level, S)
            sz = space_dim(lv)
            row.append(Component(S, lv, off, sz))
            off += sz
        comps.append(row)
        dims.append(off)

    sparse_cache: Dict[Tuple[int, Level], PadicMatrix] = {}

    def block(j: int, lv: Level) -> PadicMatrix:
        key = (j, lv)
        if key not in sparse_cache:
            Q = D(j, lv)
            data, shift, absprec = Q.sparse(prime, workprec)
            sparse_cache[key] = PadicMatrix(prime, Q.shape[0], Q.shape[1], data, shift, absprec)
        return sparse_cache[key]

    diffs = []
    for k in range(n):
        index = {c.subset: i for i, c in enumerate(comps[k + 1])}
        grid: List[List[Optional[PadicMatrix]]] = [[None] * len(comps[k]) for _ in comps[k + 1]]
        for ci, c in enumerate(comps[k]):
            for j in range(n):
                if j in c.subset:
                    continue
                T = tuple(sorted(c.subset + (j,)))
                B = block(j, c.level)
                if _sign(c.subset, j) < 0:
                    B = PadicMatrix(prime, B.nrows, B.ncols, {key: -x for key, x in B.data.items()},
                                    B.shift, B.absprec)
                grid[index[T]][ci] = B
        diffs.append(_assemble(prime, grid, [c.size for c in comps[k + 1]], [c.size for c in comps[k]]))
    return ChainComplexQp(prime, dims, diffs, comps, [o.name for o in ops], dict(metadata or {}),
                          resid, label)


def _assemble(p: int, grid, heights: List[int], widths: List[int]) -> PadicMatrix:
    if not heights or not widths or sum(heights) == 0 or sum(widths) == 0:
        return PadicMatrix(p, sum(heights), sum(widths), {})
    full = [[g if g is not None else PadicMatrix(p, h, w, {}) for g, w in zip(row, widths)]
            for row, h in zip(grid, heights)]
    full = [[b for b, w in zip(row, widths)] for row in full]
    return block_matrix(full)


def d2_residual(C: ChainComplexQp):
    """Valuation of ``d_{k+1} d_k`` computed from the assembled matrices."""
    v = INF
    for a, b in zip(C.differentials, C.differentials[1:]):
        if a.nrows and a.ncols and b.nrows:
            v = min(v, (b @ a).min_valuation())
    return v


# ---------------------------------------------------------------------------
# Herr complexes of a module


def _module_constants(M: PhiGammaModule, kind: str, axis: int) -> List[List[Fraction]]:
    return [[_rational(x) for x in row] for row in M.constant_entries(kind, axis)]


class _ModuleOps:
    """Operator matrices of a module on the per-axis jet levels."""

    def __init__(self, M: PhiGammaModule, fam: NestedBoxFamily):
        if fam.nvars != M.nvars or fam.prime != M.prime:
            raise InvalidArgumentError("module and truncation family disagree")
        self.M = M
        self.fam = fam
        self.J = fam.jet(M.gamma_unit)
        self.n = M.nvars
        self.r = M.rank
        self.constant = M.is_constant()
        self._mult: Dict[Tuple[int, ...], QMat] = {}

    def dim(self, lv: Level) -> int:
        d = self.r
        for x in lv:
            d *= self.J.level(x)
        return d

    def _axis_kron(self, lv_src: Level, axis: int, mat) -> QMat:
        out = None
        for b, x in enumerate(lv_src):
            m = mat if b == axis else identity(self.J.level(x))
            out = QMat(m) if out is None else QMat(kron(out.Z, m))
        return out if out is not None else qid(1)

    def _mult_poly(self, x) -> QMat:
        """Multiplication by a polynomial entry on ``B^n``."""
        dim = self.fam.space_dim
        acc = QMat(fmpz_mat(dim, dim))
        for e, c in sorted(x.terms.items()):
            if min(e) < 0:
                raise PreconditionError("jet models need polynomial structure matrices")
            key = tuple(e)
            if key not in self._mult:
                out = None
                for k in e:
                    m = self.J.mult(k)
                    out = m if out is None else kron(out, m)
                self._mult[key] = QMat(out)
            c = _rational(x.coeff(e)) if x.absprec != INF else x.coeff_rational(e)
            acc = acc + QMat(self._mult[key].Z * c.numerator, c.denominator)
        return acc

    def _semilinear(self, kind: str, axis: int, lv: Level, jet_mat, mat_rows=None) -> QMat:
        kern = self._axis_kron(lv, axis, jet_mat)
        if mat_rows is not None:
            return qkron(qmat_from_rationals(mat_rows), kern)
        # nonconstant entries: block (i, j) = mult(A_ij) . op
        mats = (self.M.phi if kind == "phi" else self.M.gamma)[axis]
        blocks = [[self._mult_poly(mats[i][j]) @ kern for j in range(self.r)] for i in range(self.r)]
        d = 1
        for row in blocks:
            for b in row:
                d = lcm(d, b.den)
        sz = kern.shape[0]
        Z = fmpz_mat(self.r * sz, self.r * kern.shape[1])
        for i, row in enumerate(blocks):
            for j, b in enumerate(row):
                s = d // b.den
                for (a, c), v in _entries(b.Z):
                    Z[i * sz + a, j * kern.shape[1] + c] = v * s
        return QMat(Z, d)

    def phi(self, axis: int) -> KoszulOp:
        rows = _module_constants(self.M, "phi", axis) if self.constant else None

        def mat(lv: Level) -> QMat:
            op = self._semilinear("phi", axis, lv, self.J.phiB, rows)
            return op - qid(op.shape[0])
        return KoszulOp(f"phi{axis + 1}", mat)

    def gamma(self, axis: int) -> KoszulOp:
        rows = _module_constants(self.M, "gamma", axis) if self.constant else None

        def mat(lv: Level) -> QMat:
            jm = self.J.gammaB if lv[axis] == "B" else self.J.gammaA
            op = self._semilinear("gamma", axis, lv, jm, rows)
            return op - qid(op.shape[0])
        return KoszulOp(f"gamma{axis + 1}", mat)

    def _phi_inverse_rows(self, axis: int) -> List[List[Fraction]]:
        if not self.constant:
            raise PreconditionError("psi complexes are built for constant structure matrices only")
        return _rat_inverse(_module_constants(self.M, "phi", axis))

    def psi_only(self, axis: int, lv: Level) -> QMat:
        """``psi_M`` from ``lv`` (axis at level ``B``) to the ``A`` level on that axis."""
        return qkron(qmat_from_rationals(self._phi_inverse_rows(axis)),
                     self._axis_kron(lv, axis, self.J.psiBA))

    def psi(self, axis: int) -> KoszulOp:
        def mat(lv: Level) -> QMat:
            if lv[axis] != "B":
                raise PreconditionError("psi applied twice on one axis")
            proj = qkron(qid(self.r), self._axis_kron(lv, axis, self.J.projBA))
            return self.psi_only(axis, lv) - proj

        def target(lv: Level) -> Level:
            return lv[:axis] + ("A",) + lv[axis + 1:]
        return KoszulOp(f"psi{axis + 1}", mat, target)

    def label(self, lv: Level, idx: int) -> str:
        dims = [self.J.level(x) for x in lv]
        exps = []
        for d in reversed(dims):
            idx, e = divmod(idx, d) if d else (idx, 0)
            exps.append(e)
        coord = idx
        exps.reverse()
        mono = "*".join(f"T{i + 1}^{e}" for i, e in enumerate(exps)) or "1"
        name = self.M.basis_labels[coord] if coord < len(self.M.basis_labels) else f"e{coord + 1}"
        return f"{name}*{mono}"


def _entries(Z: fmpz_mat):
    n = Z.ncols()
    for k, x in enumerate(Z.entries()):
        if x != 0:
            yield divmod(k, n), int(x)


def _base(n: int) -> Level:
    return ("B",) * n


def _complex(M: PhiGammaModule, fam: NestedBoxFamily, ops: List[KoszulOp], mo: _ModuleOps,
             kind: str) -> ChainComplexQp:
    meta = {"complex": kind, "depth": fam.depth, "p": fam.prime, "prec": fam.prec,
            "regime": "polynomial (jet quotient)", "rank": M.rank}
    if M.rank == 0:
        dims = [0] * (len(ops) + 1)
        diffs = [PadicMatrix(fam.prime, 0, 0, {}) for _ in ops]
        comps = [[Component(S, _base(M.nvars), 0, 0) for S in combinations(range(len(ops)), k)]
                 for k in range(len(ops) + 1)]
        return ChainComplexQp(fam.prime, dims, diffs, comps, [o.name for o in ops], meta)
    return build_koszul(ops, mo.dim, fam.prime, _base(M.nvars), workprec=fam.prec + 20,
                        label=mo.label, metadata=meta)


def build_herr_phi_gamma(M: PhiGammaModule, fam: NestedBoxFamily) -> ChainComplexQp:
    """Ops ``[phi_1 - 1, ..., phi_n - 1, gamma_1 - 1, ..., gamma_n - 1]``."""
    mo = _ModuleOps(M, fam)
    ops = [mo.phi(a) for a in range(M.nvars)] + [mo.gamma(a) for a in range(M.nvars)]
    return _complex(M, fam, ops, mo, "phi-gamma")


def build_psi_complexes(M: PhiGammaModule, fam: NestedBoxFamily) -> Tuple[ChainComplexQp, ChainComplexQp]:
    """``(C_psi, C_psi_gamma)``; here ``psi - 1`` stands for ``psi - pr`` into the ``A`` level."""
    mo = _ModuleOps(M, fam)
    psis = [mo.psi(a) for a in range(M.nvars)]
    gams = [mo.gamma(a) for a in range(M.nvars)]
    return (_complex(M, fam, psis, mo, "psi"), _complex(M, fam, psis + gams, mo, "psi-gamma"))


# ---------------------------------------------------------------------------
# the comparison map


@dataclass
class ComparisonMap:
    matrices: List[PadicMatrix]
    residual_valuation: object
    src: ChainComplexQp
    dst: ChainComplexQp


def comparison_map_psi(M: PhiGammaModule, fam: NestedBoxFamily,
                       Cphi: Optional[ChainComplexQp] = None,
                       Cpsi: Optional[ChainComplexQp] = None, tol=None) -> ComparisonMap:
    """``Psi`` on the component ``S`` is the product of ``-psi_a`` over the ``phi_a`` in ``S``."""
    mo = _ModuleOps(M, fam)
    n = M.nvars
    if Cphi is None:
        Cphi = build_herr_phi_gamma(M, fam)
    if Cpsi is None:
        Cpsi = build_psi_complexes(M, fam)[1]
    p = fam.prime
    ops_src = [mo.phi(a) for a in range(n)] + [mo.gamma(a) for a in range(n)]
    ops_dst = [mo.psi(a) for a in range(n)] + [mo.gamma(a) for a in range(n)]
    cache: Dict[Tuple[int, ...], QMat] = {}

    def Psi(S: Tuple[int, ...]) -> QMat:
        if S not in cache:
            lv = _base(n)
            out = qid(mo.dim(lv))
            for a in range(n):
                if a in S:
                    m = -mo.psi_only(a, lv)
                    out = m @ out
                    lv = lv[:a] + ("A",) + lv[a + 1:]
            cache[S] = out
        return cache[S]

    resid = INF
    if M.rank:
        base = _base(n)
        for k in range(2 * n + 1):
            for S in combinations(range(2 * n), k):
                lv_dst = _level_of(ops_dst, base, S)
                for j in range(2 * n):
                    if j in S:
                        continue
                    T = tuple(sorted(S + (j,)))
                    lhs = Psi(T) @ ops_src[j].matrix(base)
                    rhs = ops_dst[j].matrix(lv_dst) @ Psi(S)
                    resid = min(resid, (lhs - rhs).valuation(p))
    if resid != INF and (tol is None or resid < tol):
        raise PreconditionError(f"comparison map is not a chain map: residual valuation {resid}")
    mats = []
    workprec = fam.prec + 20
    for k in range(2 * n + 1):
        src = Cphi.components[k]
        dst = {c.subset: c for c in Cpsi.components[k]}
        grid = [[None] * len(src) for _ in Cpsi.components[k]]
        index = {c.subset: i for i, c in enumerate(Cpsi.components[k])}
        for ci, c in enumerate(src):
            if M.rank == 0:
                continue
            Q = Psi(c.subset)
            data, shift, absprec = Q.sparse(p, workprec)
            grid[index[c.subset]][ci] = PadicMatrix(p, Q.shape[0], Q.shape[1], data, shift, absprec)
        mats.append(_assemble(p, grid, [c.size for c in Cpsi.components[k]], [c.size for c in src]))
        del dst
    return ComparisonMap(mats, resid, Cphi, Cpsi)


# ---------------------------------------------------------------------------
# cohomology


def _fmt(v) -> str:
    if v == INF:
        return "inf"
    return str(Fraction(v))


@dataclass
class CohomologyReport:
    dims: List[Optional[int]]
    tol: object
    ladder: List[int]
    stable: List[bool]
    d2_residual_valuation: object
    history: List[List[Optional[int]]] = field(default_factory=list)
    ranks: List[Optional[int]] = field(default_factory=list)
    space_dims: List[int] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"dims": self.dims, "tol": _fmt(self.tol), "ladder": self.ladder, "stable": self.stable,
                "d2_residual_valuation": _fmt(self.d2_residual_valuation), "history": self.history,
                "space_dims": self.space_dims}


def default_tol(prec: int) -> int:
    return prec - 4


def _ranks(C: ChainComplexQp, tol, needed: Sequence[int], seed: int, threads: int) -> Dict[int, int]:
    def one(k):
        d = C.differentials[k]
        return k, rank_with_tolerance(d, tol, seed=seed) if d.nrows and d.ncols else 0

    ks = sorted(set(needed))
    if threads > 1 and len(ks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return dict(ex.map(one, ks))
    return dict(one(k) for k in ks)


def cohomology(C: ChainComplexQp, tol=None, degrees: Optional[Sequence[int]] = None,
               seed: int = 0, threads: int = 1) -> CohomologyReport:
    """``dim H^k = dim C^k - rank d_k - rank d_{k-1}`` with tolerance ranks."""
    if tol is None:
        tol = default_tol(C.metadata.get("prec", DEFAULT_HERR_PREC))
    if C.d2_residual_valuation < tol:
        raise PreconditionError(
            f"d o d has valuation {C.d2_residual_valuation}, below the tolerance {tol}")
    L = C.length
    degrees = list(range(L + 1)) if degrees is None else sorted(set(degrees))
    for k in degrees:
        if not 0 <= k <= L:
            raise InvalidArgumentError(f"degree {k} outside 0..{L}")
    needed = set()
    for k in degrees:
        if k < L:
            needed.add(k)
        if k > 0:
            needed.add(k - 1)
    rk = _ranks(C, tol, needed, seed, threads)
    dims: List[Optional[int]] = [None] * (L + 1)
    for k in degrees:
        dims[k] = C.dims[k] - rk.get(k, 0) - rk.get(k - 1, 0)
    ranks = [rk.get(k) for k in range(L)]
    depth = C.metadata.get("depth")
    return CohomologyReport(dims, tol, [depth] if depth is not None else [], [False] * (L + 1),
                            C.d2_residual_valuation, [list(dims)], ranks, list(C.dims))


def herr_cohomology(M: PhiGammaModule, fam: NestedBoxFamily, tol=None, degrees=None, seed: int = 0,
                    threads: int = 1) -> CohomologyReport:
    return cohomology(build_herr_phi_gamma(M, fam), tol, degrees, seed, threads)


def stabilization_experiment(M: PhiGammaModule, families: Sequence[NestedBoxFamily], tol=None,
                             degrees=None, seed: int = 0, threads: int = 1,
                             complex_kind: str = "phi-gamma") -> CohomologyReport:
    """Cohomology along a ladder; a degree is called stable when its last two dimensions agree."""
    if not families:
        raise InvalidArgumentError("empty ladder")

    def run(fam):
        if complex_kind == "phi-gamma":
            C = build_herr_phi_gamma(M, fam)
        elif complex_kind == "psi-gamma":
            C = build_psi_complexes(M, fam)[1]
        elif complex_kind == "psi":
            C = build_psi_complexes(M, fam)[0]
        else:
            raise InvalidArgumentError(f"unknown complex {complex_kind!r}")
        t = default_tol(fam.prec) if tol is None else tol
        return cohomology(C, t, degrees, seed, 1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reps = list(ex.map(run, families))
    else:
        reps = [run(f) for f in families]
    hist = [r.dims for r in reps]
    last = reps[-1]
    L = len(last.dims)
    stable = [len(hist) >= 2 and hist[-1][k] is not None and hist[-1][k] == hist[-2][k] for k in range(L)]
    d2 = min(r.d2_residual_valuation for r in reps)
    return CohomologyReport(last.dims, last.tol, [f.depth for f in families], stable, d2, hist,
                            last.ranks, last.space_dims)


# ---------------------------------------------------------------------------
# induced maps


@dataclass
class InducedMapReport:
    degree: int
    rank: int
    dim_src: int
    dim_dst: int

    @property
    def isomorphism(self) -> bool:
        return self.rank == self.dim_src == self.dim_dst

    def to_json(self) -> dict:
        return {"degree": self.degree, "rank": self.rank, "dim_src": self.dim_src,
                "dim_dst": self.dim_dst, "isomorphism": self.isomorphism}


def induced_map_ranks(F: ComparisonMap, tol, degrees: Optional[Sequence[int]] = None,
                      seed: int = 0) -> List[InducedMapReport]:
    """Rank of ``H^k(F)`` as ``rank [[F_k, d'_{k-1}], [d_k, 0]] - rank d_k - rank d'_{k-1}``."""
    C, D = F.src, F.dst
    p = C.prime
    L = C.length
    degrees = range(L + 1) if degrees is None else degrees
    hc = cohomology(C, tol, seed=seed)
    hd = cohomology(D, tol, seed=seed)
    out = []
    for k in degrees:
        Fk = F.matrices[k]
        dk = C.differentials[k] if k < L else PadicMatrix(p, 0, C.dims[k], {})
        dprev = D.differentials[k - 1] if k > 0 else PadicMatrix(p, D.dims[k], 0, {})
        rows = D.dims[k] + dk.nrows
        cols = C.dims[k] + dprev.ncols
        if rows == 0 or cols == 0:
            rb = 0
        else:
            grid = [[Fk, dprev if dprev.ncols else None], [dk if dk.nrows else None, None]]
            grid = [r for r, h in zip(grid, [D.dims[k], dk.nrows]) if h]
            widths = [C.dims[k], dprev.ncols]
            keep = [i for i, w in enumerate(widths) if w]
            heights = [h for h in [D.dims[k], dk.nrows] if h]
            grid = [[r[i] for i in keep] for r in grid]
            B = _assemble(p, grid, heights, [widths[i] for i in keep])
            rb = rank_with_tolerance(B, tol, seed=seed)
        r_dk = hc.ranks[k] if k < L else 0
        r_dp = hd.ranks[k - 1] if k > 0 else 0
        out.append(InducedMapReport(k, rb - r_dk - r_dp, hc.dims[k], hd.dims[k]))
    return out


# ---------------------------------------------------------------------------
# H^0 witnesses and specialization


def herr_h0_witnesses(M: PhiGammaModule, fam: NestedBoxFamily, tol, max_size: int = 250000,
                      seed: int = 0) -> Tuple[int, List[List[str]]]:
    C = build_herr_phi_gamma(M, fam)
    if C.dims[0] == 0:
        return 0, []
    d0 = C.differentials[0] if C.length else PadicMatrix(fam.prime, 0, C.dims[0], {})
    if d0.nrows * d0.ncols > max_size:
        return cohomology(C, tol, [0], seed).dims[0], []
    vecs = kernel_basis(d0, tol) if d0.nrows else [
        [PadicScalar.from_int(int(i == j), fam.prime) for i in range(C.dims[0])] for j in range(C.dims[0])]
    out = []
    for v in vecs:
        terms = []
        for i, x in enumerate(v):
            if not x.is_zero():
                terms.append(f"{x.lift_balanced()}*{C.basis_label(0, i)}")
        out.append(terms)
    return len(vecs), out


@dataclass
class SpecializationReport:
    twisted_h0: int
    eigenspace_dim: int
    depth: int
    tol: object

    @property
    def agree(self) -> bool:
        return self.twisted_h0 == self.eigenspace_dim

    def to_json(self) -> dict:
        return {"twisted_h0": self.twisted_h0, "eigenspace_dim": self.eigenspace_dim,
                "agree": self.agree, "depth": self.depth, "tol": _fmt(self.tol)}


def character_specialize(M: PhiGammaModule, eta: Character, fam: NestedBoxFamily, tol=None,
                         seed: int = 0) -> SpecializationReport:
    """Compare ``H^0 C_{psi,Gamma}(M(eta^-1))`` with the ``eta``-eigenspace of ``Gamma`` on ``H^0 C_psi(M)``.

    ``eta`` is a character of ``Gamma``: only its values at the generators
    are used.
    """
    if eta.nvars != M.nvars:
        raise InvalidArgumentError("character and module have different numbers of variables")
    tol = default_tol(fam.prec) if tol is None else tol
    p = M.prime
    eta_gamma = Character.from_values(p, [1] * M.nvars, [eta.value_u(a) for a in range(M.nvars)])
    # route 1: the complex of the twisted module
    Ctw = build_psi_complexes(twist(M, eta_gamma.inverse()), fam)[1]
    left = cohomology(Ctw, tol, [0], seed).dims[0]
    # route 2: a basis of H^0(C_psi(M)), then gamma - eta on it
    Cpsi = build_psi_complexes(M, fam)[0]
    mo = _ModuleOps(M, fam)
    base = _base(M.nvars)
    if Cpsi.length:
        vecs = kernel_basis(Cpsi.differentials[0], tol)
    else:
        vecs = [[PadicScalar.from_int(int(i == j), p) for i in range(Cpsi.dims[0])]
                for j in range(Cpsi.dims[0])]
    if not vecs:
        return SpecializationReport(left, 0, fam.depth, tol)
    K = qmat_from_rationals([[x.lift_balanced() for x in v] for v in vecs])
    cols = []
    for a in range(M.nvars):
        g = mo.gamma(a).matrix(base) + qid(mo.dim(base))
        c = Fraction(_rational(eta.value_u(a)))
        shifted = g - QMat(identity(mo.dim(base)) * c.numerator, c.denominator)
        cols.append(shifted @ QMat(K.Z.transpose(), K.den))
    stack = cols[0]
    for c in cols[1:]:
        Z = fmpz_mat(stack.shape[0] + c.shape[0], stack.shape[1])
        d = lcm(stack.den, c.den)
        for (i, j), v in _entries(stack.Z):
            Z[i, j] = v * (d // stack.den)
        for (i, j), v in _entries(c.Z):
            Z[stack.shape[0] + i, j] = v * (d // c.den)
        stack = QMat(Z, d)
    data, shift, absprec = stack.sparse(p, fam.prec + 20)
    # the kernel vectors are exact to the working precision; rank of the restriction
    A = PadicMatrix(p, stack.shape[0], stack.shape[1], data, shift, absprec)
    r = rank_with_tolerance(A, tol, seed=seed) if A.data else 0
    return SpecializationReport(left, len(vecs) - r, fam.depth, tol)


def koszul_from_matrices(mats: Sequence[Sequence[Sequence]], p: int, names=None) -> ChainComplexQp:
    """Koszul complex of explicit commuting square matrices on one space."""
    if not mats:
        raise InvalidArgumentError("use at least one operator")
    n = len(mats[0])
    qs = [qmat_from_rationals([[Fraction(x) for x in r] for r in m]) for m in mats]
    names = names or [f"D{i + 1}" for i in range(len(mats))]
    ops = [KoszulOp(nm, (lambda lv, q=q: q)) for nm, q in zip(names, qs)]
    return build_koszul(ops, lambda lv: n, p, (), metadata={"prec": DEFAULT_HERR_PREC})
