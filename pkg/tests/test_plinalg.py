import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from multirobba.errors import IndeterminateRankError
from multirobba.padic import PadicScalar, vp
from multirobba.plinalg import (PadicMatrix, exact_rank, kernel_basis, rank_with_tolerance,
                                row_echelon)

P = 3


def M(rows, p=P):
    return PadicMatrix.from_rows(p, rows)


def eye(n):
    return [[int(i == j) for j in range(n)] for i in range(n)]


def test_echelon_examples():
    r = row_echelon(M(eye(4)), 20)
    assert r.pivot_valuations == [0] * 4
    r = row_echelon(M([[3, 1], [0, 3]]), 20)
    assert r.pivot_valuations[0] == 0
    assert r.pivots[0] == (0, 1)
    r = row_echelon(M([[0, 0], [0, 0]]), 20)
    assert r.rank_below(20) == 0


def test_rank_examples():
    assert all(rank_with_tolerance(M(eye(5)), t) == 5 for t in (1, 5, 20))
    D = M([[1, 0], [0, 3 ** 10]])
    assert rank_with_tolerance(D, 8) == 1
    assert rank_with_tolerance(D, 12) == 2


def test_tolerance_beyond_precision():
    A = M([[PadicScalar.from_int(1, P, 5), 0], [0, 1]])
    with pytest.raises(IndeterminateRankError):
        rank_with_tolerance(A, 8)
    with pytest.raises(IndeterminateRankError):
        kernel_basis(A, 8)


def apply(rows, v):
    return [sum(Fraction(a) * x.lift() for a, x in zip(r, v)) for r in rows]


def val(x):
    return float("inf") if x == 0 else vp(x, P)


def test_kernel_examples():
    K = kernel_basis(M([[0, 0], [0, 0]]), 10)
    assert [[x.lift() for x in v] for v in K] == eye(2)
    K = kernel_basis(M([[1, 1]]), 10)
    assert len(K) == 1
    v = [x.lift_balanced() for x in K[0]]
    assert v[0] == -v[1] != 0


def random_rank_matrix(rnd, m, n, r):
    L = [[rnd.randint(-5, 5) for _ in range(r)] for _ in range(m)]
    R = [[rnd.randint(-5, 5) for _ in range(n)] for _ in range(r)]
    return [[sum(L[i][k] * R[k][j] for k in range(r)) for j in range(n)] for i in range(m)]


def test_kernel_random_6x4_rank3():
    rnd = random.Random(2)
    done = 0
    while done < 20:
        A = random_rank_matrix(rnd, 6, 4, 3)
        if exact_rank(A) != 3:
            continue
        done += 1
        K = kernel_basis(M(A), 30)
        assert len(K) == 4 - exact_rank(A)
        for v in K:
            assert all(val(y) >= 30 for y in apply(A, v))


ints = st.integers(-30, 30)


@given(st.integers(1, 6).flatmap(lambda m: st.integers(1, 6).flatmap(
    lambda n: st.lists(st.lists(ints, min_size=n, max_size=n), min_size=m, max_size=m))),
    st.integers(1, 12))
def test_rank_nullity(rows, tol):
    A = M(rows)
    assert rank_with_tolerance(A, tol) + len(kernel_basis(A, tol)) == A.ncols


@given(st.lists(st.lists(ints, min_size=5, max_size=5), min_size=4, max_size=4))
def test_rank_matches_exact_for_large_tolerance(rows):
    # Smith invariant valuations of an integer matrix are bounded by the valuation of a nonzero minor
    bound = sum(vp(max(abs(x) for x in r) or 1, P) + 2 for r in rows) + 10
    assert rank_with_tolerance(M(rows), bound) == exact_rank(rows)


def test_rank_invariant_under_permutation_and_units():
    rnd = random.Random(7)
    units = [1, 2, 4, 5, 7, -1, -2]
    for _ in range(500):
        m, n = rnd.randint(1, 5), rnd.randint(1, 5)
        A = random_rank_matrix(rnd, m, n, rnd.randint(0, min(m, n)))
        A = [[x * 3 ** rnd.randint(0, 3) for x in r] for r in A]
        tol = rnd.randint(1, 8)
        base = rank_with_tolerance(M(A), tol)
        rp = rnd.sample(range(m), m)
        cp = rnd.sample(range(n), n)
        cs = [rnd.choice(units) for _ in range(n)]
        B = [[A[i][j] * cs[j] for j in cp] for i in rp]
        assert rank_with_tolerance(M(B), tol) == base
        C = [[A[i][j] for j in cp] for i in rp]
        assert rank_with_tolerance(M(C), tol) == base
        s = [rnd.choice(units) for _ in range(m)]
        D = [[s[i] * x for x in A[i]] for i in range(m)]
        assert rank_with_tolerance(M(D), tol) == base


@pytest.mark.parametrize("seed", range(4))
def test_fast_route_matches_pure(seed):
    rnd = random.Random(seed)
    m, n = 60, 55
    A = random_rank_matrix(rnd, m, n, 40)
    A = [[x * 3 ** rnd.choice([0, 0, 1, 2]) for x in r] for r in A]
    for i in range(m):
        A[i][0] += 3 ** 9 * rnd.randint(-2, 2)
    for tol in (1, 4, 12):
        assert rank_with_tolerance(M(A), tol, "fast", seed) == rank_with_tolerance(M(A), tol, "pure")
