"""Linear algebra over Q_p with valuation-aware pivoting.

Matrices are stored sparsely as integers scaled by a common power of ``p``.
Small matrices go through a plain Gaussian elimination with full pivoting on
the entry of minimal valuation.  Large ones are handled by a modular
route: unit pivots are found mod ``p`` with FLINT, and the remaining Schur
complement is compressed by random projections before its invariants are
counted recursively.  Both routes count the Smith invariants of valuation
below the tolerance.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import IndeterminateRankError, InvalidArgumentError, ParseError
from .padic import INF, PadicScalar, balanced, check_prime, vp

try:  # FLINT gives fast dense arithmetic modulo word-sized moduli
    from flint import nmod_mat
except ImportError:  # pragma: no cover - the dependency is declared
    nmod_mat = None

FAST_THRESHOLD = 2500
OVERSAMPLE = 20
DEFAULT_MATRIX_PREC = 40


class PadicMatrix:
    """``p**shift * B`` with ``B`` an integer matrix given by its nonzero entries.

    ``absprec`` is the absolute precision of every entry (``INF`` when the
    entries are exact).
    """

    __slots__ = ("prime", "nrows", "ncols", "data", "shift", "absprec")

    def __init__(self, prime: int, nrows: int, ncols: int, data: Dict[Tuple[int, int], int],
                 shift: int = 0, absprec=INF):
        self.prime = prime
        self.nrows = nrows
        self.ncols = ncols
        self.data = {k: v for k, v in data.items() if v}
        self.shift = shift
        self.absprec = absprec

    @classmethod
    def from_rows(cls, p: int, rows: Sequence[Sequence]) -> "PadicMatrix":
        check_prime(p)
        m = len(rows)
        n = len(rows[0]) if m else 0
        parts = {}
        absprec = INF
        for i, row in enumerate(rows):
            if len(row) != n:
                raise InvalidArgumentError("ragged matrix")
            for j, x in enumerate(row):
                s, c, a = _entry_parts(x, p)
                absprec = min(absprec, a)
                if c:
                    parts[(i, j)] = (s, c)
        shift = min((s for s, _ in parts.values()), default=0)
        data = {k: c * p ** (s - shift) for k, (s, c) in parts.items()}
        return cls(p, m, n, data, shift, absprec)

    @classmethod
    def zeros(cls, p: int, m: int, n: int) -> "PadicMatrix":
        return cls(p, m, n, {})

    def entry(self, i: int, j: int) -> PadicScalar:
        c = self.data.get((i, j), 0)
        p = self.prime
        if c == 0:
            return PadicScalar.zero(p) if self.absprec == INF else PadicScalar.inexact_zero(p, self.absprec)
        k = vp(c, p)
        v = self.shift + k
        n = DEFAULT_MATRIX_PREC if self.absprec == INF else self.absprec - v
        return PadicScalar(p, v, (c // p ** k) % p ** n, n)

    def rows(self) -> List[List[PadicScalar]]:
        return [[self.entry(i, j) for j in range(self.ncols)] for i in range(self.nrows)]

    def dense_ints(self) -> List[List[int]]:
        out = [[0] * self.ncols for _ in range(self.nrows)]
        for (i, j), c in self.data.items():
            out[i][j] = c
        return out

    @property
    def min_abs_precision(self):
        return self.absprec

    def min_valuation(self):
        return min((self.shift + vp(c, self.prime) for c in self.data.values()), default=INF)

    def is_zero(self) -> bool:
        return not self.data

    def __matmul__(self, other: "PadicMatrix") -> "PadicMatrix":
        if self.ncols != other.nrows:
            raise InvalidArgumentError("shape mismatch")
        by_row: Dict[int, List[Tuple[int, int]]] = {}
        for (k, j), c in other.data.items():
            by_row.setdefault(k, []).append((j, c))
        out: Dict[Tuple[int, int], int] = {}
        for (i, k), a in self.data.items():
            for j, b in by_row.get(k, ()):
                out[(i, j)] = out.get((i, j), 0) + a * b
        va, vb = self.min_valuation(), other.min_valuation()
        absprec = min(self.absprec + vb, other.absprec + va)
        return PadicMatrix(self.prime, self.nrows, other.ncols, out, self.shift + other.shift, absprec)

    def transpose(self) -> "PadicMatrix":
        return PadicMatrix(self.prime, self.ncols, self.nrows,
                           {(j, i): c for (i, j), c in self.data.items()}, self.shift, self.absprec)

    def to_json(self) -> dict:
        return {"rows": self.nrows, "cols": self.ncols,
                "entries": [[x.to_json() for x in row] for row in self.rows()]}

    @classmethod
    def from_json(cls, obj: dict, p: int) -> "PadicMatrix":
        try:
            rows = [[PadicScalar.from_json(x, p) for x in row] for row in obj["entries"]]
            if len(rows) != int(obj["rows"]) or any(len(r) != int(obj["cols"]) for r in rows):
                raise ParseError("matrix shape does not match its entries")
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad matrix: {exc}") from exc
        if not rows:
            return cls(p, 0, int(obj["cols"]), {})
        return cls.from_rows(p, rows)


def _entry_parts(x, p: int):
    if isinstance(x, PadicScalar):
        if x.is_zero():
            return 0, 0, x.absprec
        return x.valuation, balanced(x.unit, p ** x.precision), x.absprec
    x = Fraction(x)
    if x == 0:
        return 0, 0, INF
    k = vp(x.denominator, p)
    if x.denominator == p ** k:
        return -k, x.numerator, INF
    sc = PadicScalar.from_rational(x, 1, p, DEFAULT_MATRIX_PREC)
    return sc.valuation, balanced(sc.unit, p ** sc.precision), sc.absprec


def vstack(blocks: Sequence[PadicMatrix]) -> PadicMatrix:
    return block_matrix([[b] for b in blocks])


def block_matrix(blocks: Sequence[Sequence[Optional[PadicMatrix]]]) -> PadicMatrix:
    """Assemble from a grid; ``None`` stands for a zero block."""
    p = next(b.prime for row in blocks for b in row if b is not None)
    heights = [next(b.nrows for b in row if b is not None) for row in blocks]
    widths = []
    for j in range(len(blocks[0])):
        widths.append(next(row[j].ncols for row in blocks if row[j] is not None))
    present = [b for row in blocks for b in row if b is not None]
    shift = min((b.shift for b in present if b.data), default=0)
    absprec = min(b.absprec for b in present)
    data = {}
    r0 = 0
    for i, row in enumerate(blocks):
        c0 = 0
        for j, b in enumerate(row):
            if b is not None:
                if b.nrows != heights[i] or b.ncols != widths[j]:
                    raise InvalidArgumentError("inconsistent block sizes")
                scale = p ** (b.shift - shift)
                for (a, c), x in b.data.items():
                    data[(r0 + a, c0 + c)] = x * scale
            c0 += widths[j]
        r0 += heights[i]
    return PadicMatrix(p, sum(heights), sum(widths), data, shift, absprec)


# ---------------------------------------------------------------------------
# elimination


@dataclass
class EchelonResult:
    rows: List[List[int]]  # eliminated matrix (integers mod p^K, scaled by p^shift)
    pivots: List[Tuple[int, int]]  # (row, column) in the original indexing
    pivot_valuations: List[int]
    shift: int
    modulus_exp: int

    def rank_below(self, tol) -> int:
        return sum(1 for v in self.pivot_valuations if v < tol)


def _working_ints(A: PadicMatrix, tol) -> Tuple[Dict[Tuple[int, int], int], int]:
    """Entries of ``A / p^shift`` modulo ``p^K`` with ``K = tol - shift``."""
    if tol > A.absprec:
        raise IndeterminateRankError(
            f"tolerance {tol} exceeds the precision {A.absprec} of the entries")
    return A.data, tol - A.shift


def row_echelon(A: PadicMatrix, prec=None) -> EchelonResult:
    """Full pivoting on the entry of minimal valuation, working modulo ``p^prec``."""
    p = A.prime
    if prec is None:
        prec = A.absprec if A.absprec != INF else A.shift + DEFAULT_MATRIX_PREC
    K = prec - A.shift
    rows = A.dense_ints()
    m, n = A.nrows, A.ncols
    if K <= 0:
        return EchelonResult(rows, [], [], A.shift, K)
    mod = p ** K
    rows = [[x % mod for x in r] for r in rows]
    rperm = list(range(m))
    cperm = list(range(n))
    pivots, vals = [], []
    for k in range(min(m, n)):
        best = None
        for i in range(k, m):
            ri = rows[i]
            for j in range(k, n):
                x = ri[j]
                if x:
                    v = vp(x, p)
                    if best is None or v < best[0]:
                        best = (v, i, j)
                        if v == 0:
                            break
            if best is not None and best[0] == 0:
                break
        if best is None:
            break
        v, i, j = best
        rows[k], rows[i] = rows[i], rows[k]
        rperm[k], rperm[i] = rperm[i], rperm[k]
        if j != k:
            for r in rows:
                r[k], r[j] = r[j], r[k]
            cperm[k], cperm[j] = cperm[j], cperm[k]
        piv = rows[k][k]
        unit_inv = pow(piv // p ** v, -1, mod)
        pk = p ** v
        prow = rows[k]
        for i2 in range(k + 1, m):
            x = rows[i2][k]
            if x:
                f = (x // pk) * unit_inv % mod
                r = rows[i2]
                for j2 in range(k, n):
                    if prow[j2]:
                        r[j2] = (r[j2] - f * prow[j2]) % mod
        pivots.append((rperm[k], cperm[k]))
        vals.append(v + A.shift)
    res = EchelonResult(rows, pivots, vals, A.shift, K)
    res._cperm = cperm  # type: ignore[attr-defined]
    return res


def rank_with_tolerance(A: PadicMatrix, tol, method: str = "auto", seed: int = 0) -> int:
    """Number of Smith invariants of valuation strictly below ``tol``."""
    if tol > A.absprec:
        raise IndeterminateRankError(
            f"tolerance {tol} exceeds the precision {A.absprec} of the entries")
    if not A.data:
        return 0
    K = tol - A.shift
    if K <= 0:
        return 0
    if method == "auto":
        method = "fast" if (A.nrows * A.ncols >= FAST_THRESHOLD and nmod_mat is not None
                            and A.prime ** K < 2 ** 62) else "pure"
    if method == "pure":
        return row_echelon(A, tol).rank_below(tol)
    if nmod_mat is None or A.prime ** K >= 2 ** 62:
        raise InvalidArgumentError("modular route unavailable at this precision")
    rng = random.Random(seed * 1000003 + A.nrows * 7919 + A.ncols)
    return _fast_rank(A.prime, A.nrows, A.ncols, A.data, K, rng)


def kernel_basis(A: PadicMatrix, tol) -> List[List[PadicScalar]]:
    """Basis of the approximate kernel: pivots of valuation ``>= tol`` count as zero.

    Each vector has a 1 in one free column, and ``A v`` has all entries of
    valuation at least ``tol``.
    """
    if tol > A.absprec:
        raise IndeterminateRankError("tolerance exceeds the precision of the entries")
    p = A.prime
    n = A.ncols
    if not A.data:
        return [[PadicScalar.from_int(int(i == j), p) for i in range(n)] for j in range(n)]
    ech = row_echelon(A, tol)
    r = ech.rank_below(tol)
    cperm = ech._cperm  # type: ignore[attr-defined]
    K = ech.modulus_exp
    mod = p ** K
    U = [[Fraction(x if 2 * x <= mod else x - mod) for x in row] for row in ech.rows[:r]]
    basis = []
    # working precision of the back substitution
    loss = sum(v - A.shift for v in ech.pivot_valuations[:r])
    prec = max(1, K + A.shift - 0) + loss + 1
    for free in range(r, n):
        x = [Fraction(0)] * n
        x[free] = Fraction(1)
        for k in range(r - 1, -1, -1):
            s = sum(U[k][j] * x[j] for j in range(k + 1, n) if U[k][j] and x[j])
            x[k] = -s / U[k][k]
        vec = [None] * n
        for pos, col in enumerate(cperm):
            vec[col] = x[pos]
        basis.append([PadicScalar.from_rational(v, 1, p, prec) if v else PadicScalar.zero(p) for v in vec])
    return basis


def exact_rank(rows: Sequence[Sequence]) -> int:
    """Rank over Q by exact fraction elimination; used as an oracle."""
    M = [[Fraction(x) for x in r] for r in rows]
    m = len(M)
    n = len(M[0]) if m else 0
    rank = 0
    col = 0
    for col in range(n):
        piv = next((i for i in range(rank, m) if M[i][col] != 0), None)
        if piv is None:
            continue
        M[rank], M[piv] = M[piv], M[rank]
        for i in range(m):
            if i != rank and M[i][col] != 0:
                f = M[i][col] / M[rank][col]
                M[i] = [a - f * b for a, b in zip(M[i], M[rank])]
        rank += 1
    return rank


# ---------------------------------------------------------------------------
# the modular route


def _to_nmod(m: int, n: int, data: Iterable[Tuple[Tuple[int, int], int]], mod: int):
    M = nmod_mat(m, n, mod)
    for (i, j), c in data:
        c %= mod
        if c:
            M[i, j] = c
    return M


def _pivot_columns(M, r: int) -> List[int]:
    R, rank = M.rref()
    n = M.ncols()
    cols = []
    j = 0
    for i in range(rank):
        while j < n and int(R[i, j]) == 0:
            j += 1
        cols.append(j)
        j += 1
    return cols


def _fast_rank(p: int, m: int, n: int, data: Dict[Tuple[int, int], int], K: int,
               rng: random.Random) -> int:
    """Invariants of valuation ``< K`` of an integral matrix known modulo ``p^K``."""
    if K <= 0 or not data or m == 0 or n == 0:
        return 0
    modK = p ** K
    data = {k: c % modK for k, c in data.items() if c % modK}
    if not data:
        return 0
    if m * n < FAST_THRESHOLD:
        A = PadicMatrix(p, m, n, data)
        return row_echelon(A, K).rank_below(K)
    Mp = _to_nmod(m, n, data.items(), p)
    r0 = Mp.rank()
    if r0 == 0:
        return _fast_rank(p, m, n, {k: c // p for k, c in data.items()}, K - 1, rng)
    if K == 1 or r0 == min(m, n):
        return r0
    C = _pivot_columns(Mp, r0)
    cpos = {c: k for k, c in enumerate(C)}
    sub = _to_nmod(r0, m, (((cpos[j], i), c) for (i, j), c in data.items() if j in cpos), p)
    R = _pivot_columns(sub, r0)
    rpos = {r: k for k, r in enumerate(R)}
    Rc = [i for i in range(m) if i not in rpos]
    Cc = [j for j in range(n) if j not in cpos]
    rcpos = {r: k for k, r in enumerate(Rc)}
    ccpos = {c: k for k, c in enumerate(Cc)}
    blocks = {"11": [], "12": [], "21": [], "22": []}
    for (i, j), c in data.items():
        key = ("1" if i in rpos else "2") + ("1" if j in cpos else "2")
        ii = rpos[i] if i in rpos else rcpos[i]
        jj = cpos[j] if j in cpos else ccpos[j]
        blocks[key].append(((ii, jj), c))
    A11 = _to_nmod(r0, r0, blocks["11"], modK)
    A11p = _to_nmod(r0, r0, blocks["11"], p)
    A11p_inv = A11p.inv()
    A12 = _to_nmod(r0, len(Cc), blocks["12"], modK)
    A21 = _to_nmod(len(Rc), r0, blocks["21"], modK)
    A22 = _to_nmod(len(Rc), len(Cc), blocks["22"], modK)
    full = min(len(Rc), len(Cc))
    rho = min(full, 2 * OVERSAMPLE)
    while True:
        if rho >= full:
            # no compression: the Schur complement itself
            if len(Cc) <= len(Rc):
                Y = _dixon(A11, A11p_inv, A12, p, K)
                S = A22 - A21 * Y
            else:
                # work with the transpose so the solve stays thin
                Y = _dixon(A11.transpose(), A11p_inv.transpose(), A21.transpose(), p, K)
                S = (A22.transpose() - A12.transpose() * Y)
            sub_data = _entries_dict(S)
            return r0 + _fast_rank(p, S.nrows(), S.ncols(), {k: c // p for k, c in sub_data.items()},
                                   K - 1, rng)
        Q = _random_nmod(len(Cc), rho, modK, rng)
        P = _random_nmod(rho, len(Rc), modK, rng)
        Y = _dixon(A11, A11p_inv, A12 * Q, p, K)
        SQ = A22 * Q - A21 * Y
        Sk = P * SQ
        sk_data = {k: c // p for k, c in _entries_dict(Sk).items()}
        r_s = _fast_rank(p, rho, rho, sk_data, K - 1, rng)
        if r_s <= rho - OVERSAMPLE:
            return r0 + r_s
        rho = min(full, 2 * rho)


def _random_nmod(m: int, n: int, mod: int, rng: random.Random):
    return nmod_mat(m, n, [rng.randrange(mod) for _ in range(m * n)], mod)


def _entries_dict(M) -> Dict[Tuple[int, int], int]:
    n = M.ncols()
    out = {}
    for k, c in enumerate(M.entries()):
        c = int(c)
        if c:
            out[divmod(k, n)] = c
    return out


def _dixon(A, Ainv_p, B, p: int, K: int):
    """``A^-1 B`` modulo ``p^K`` by p-adic lifting from the inverse mod ``p``."""
    modK = p ** K
    r, c = B.nrows(), B.ncols()
    resid = [int(x) for x in B.entries()]
    total = [0] * (r * c)
    pj = 1
    for _ in range(K):
        Rp = nmod_mat(r, c, [x % p for x in resid], p)
        X = Ainv_p * Rp
        xs = [int(x) for x in X.entries()]
        Xk = nmod_mat(r, c, xs, modK)
        AX = A * Xk
        ax = [int(x) for x in AX.entries()]
        resid = [((a - b) % modK) // p for a, b in zip(resid, ax)]
        total = [(t + pj * x) % modK for t, x in zip(total, xs)]
        pj *= p
    return nmod_mat(r, c, total, modK)
