import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from multirobba.laurent import LaurentBoxSeries, MultiInterval
from multirobba.modules import (Character, PhiGammaModule, apply_module_operator, direct_sum,
                                dual_module, mat_mul, module_from_character, parse_character,
                                triangulation_probe, twist, validate_module)
from multirobba.operators import apply_phi

P = 3
V1 = ("T1",)
V2 = ("T1", "T2")
C = Character.from_values


def const(c, vars=V2):
    return LaurentBoxSeries.constant(P, vars, c)


def mats_equal(A, B):
    return all(x == y for ra, rb in zip(A, B) for x, y in zip(ra, rb))


def random_commuting_module(rnd):
    """Constant structure matrices that are simultaneously diagonalizable over Z_(p)."""
    b, c = rnd.randint(-4, 4), rnd.randint(-4, 4)
    Pm = [[1, b], [c, 1 + b * c]]
    Pi = [[1 + b * c, -b], [-c, 1]]

    def conj(d):
        return [[sum(Pm[i][k] * d[k] * Pi[k][j] for k in range(2)) for j in range(2)] for i in range(2)]

    pick = lambda: [rnd.choice([1, 2, 4, 5, 3, 9, -1]) for _ in range(2)]
    phi = [[[const(x) for x in row] for row in conj(pick())] for _ in range(2)]
    gamma = [[[const(x) for x in row] for row in conj([rnd.choice([1, 4, 7, -2]) for _ in range(2)])]
             for _ in range(2)]
    return PhiGammaModule(P, V2, 2, phi, gamma)


def test_character_module_examples():
    M = module_from_character(Character.trivial(P, 2))
    assert all(m[0][0] == const(1) for m in M.phi + M.gamma)
    M = module_from_character(C(P, [3, 1], [1, 1]))
    assert M.phi[0][0][0] == const(3)
    assert validate_module(M).ok


def test_parse_character():
    d = parse_character("dp=2:1,du=1:4", P, 2)
    assert d.value_p(0) == 2 and d.value_u(1) == 4
    assert Character.from_json(d.to_json(), P).to_json() == d.to_json()


def _hand_relation(c):
    # Phi phi(Gamma) vs Gamma gamma(Phi) in the upper-right corner, expanded by hand:
    # c((1+T)^3 - 1) + T  against  (1+T)^4 - 1 + cT
    lhs = {1: 3 * c + 1, 2: 3 * c, 3: c}
    rhs = {1: 4 + c, 2: 6, 3: 4, 4: 1}
    return all(lhs.get(k, 0) == rhs.get(k, 0) for k in range(5))


@pytest.mark.parametrize("c", [0, 1, 2, 3, -5])
def test_validator_flags_unipotent_example(c):
    one, zero = const(1, V1), const(0, V1)
    T = LaurentBoxSeries.from_terms(P, V1, {(1,): 1})
    M = PhiGammaModule(P, V1, 2, [[[one, T], [zero, one]]], [[[one, T.scale(c)], [zero, one]]])
    rep = validate_module(M)
    rel = {r.name: r.passed for r in rep.relations}
    assert rel["phi1gamma1"] == _hand_relation(c) is False
    assert not rep.ok


def test_zero_tolerance_exact():
    M = random_commuting_module(random.Random(0))
    assert validate_module(M, tol=None).ok


def test_trivial_module_operators_reduce_to_ring():
    M = module_from_character(Character.trivial(P, 2))
    f = LaurentBoxSeries.from_terms(P, V2, {(2, 1): 5, (0, 3): -1})
    assert apply_module_operator(M, "phi", 0, [f])[0] == apply_phi(f, 0)


def test_psi_transport_rank_one():
    M = module_from_character(C(P, [3, 1], [1, 1]))
    f = LaurentBoxSeries.from_terms(P, V2, {(2, 1): 5, (0, 3): -1, (4, 0): 2})
    y = apply_module_operator(M, "phi", 0, [f])
    assert apply_module_operator(M, "psi", 0, y) == [f]


polys = st.dictionaries(st.tuples(st.integers(0, 4), st.integers(0, 4)), st.integers(-9, 9), max_size=4)


@settings(max_examples=25)
@given(st.integers(0, 10 ** 6), polys, polys, polys)
def test_module_level_identities(seed, a, b, g):
    rnd = random.Random(seed)
    M = random_commuting_module(rnd)
    m = [LaurentBoxSeries.from_terms(P, V2, a), LaurentBoxSeries.from_terms(P, V2, b)]
    f = LaurentBoxSeries.from_terms(P, V2, g)
    op = lambda k, ax, x: apply_module_operator(M, k, ax, x)
    # semilinearity
    fm = [f.mul(x) for x in m]
    phf = apply_phi(f, 0)
    assert op("phi", 0, fm) == [phf.mul(x) for x in op("phi", 0, m)]
    # psi transport
    for ax in (0, 1):
        assert op("psi", ax, op("phi", ax, m)) == m
    # operators on distinct axes commute, as do phi and gamma on the same axis
    assert op("phi", 0, op("phi", 1, m)) == op("phi", 1, op("phi", 0, m))
    assert op("gamma", 0, op("phi", 1, m)) == op("phi", 1, op("gamma", 0, m))
    assert op("gamma", 0, op("phi", 0, m)) == op("phi", 0, op("gamma", 0, m))


def test_twist_examples_and_functoriality():
    d1, d2 = C(P, [2, 3], [4, 1]), C(P, [5, 1], [7, 4])
    M = module_from_character(d1)
    T = twist(M, Character.trivial(P, 2))
    assert all(mats_equal(x, y) for x, y in zip(T.phi + T.gamma, M.phi + M.gamma))
    A, B = twist(M, d2), module_from_character(d1 * d2)
    assert all(mats_equal(x, y) for x, y in zip(A.phi + A.gamma, B.phi + B.gamma))
    N = random_commuting_module(random.Random(4))
    X, Y = twist(twist(N, d1), d2), twist(N, d1 * d2)
    assert all(mats_equal(x, y) for x, y in zip(X.phi + X.gamma, Y.phi + Y.gamma))


def test_twist_preserves_validity():
    rnd = random.Random(8)
    for _ in range(20):
        M = random_commuting_module(rnd)
        assert validate_module(M).ok
        d = C(P, [rnd.choice([1, 2, 3, 5]) for _ in range(2)], [rnd.choice([1, 4, 7]) for _ in range(2)])
        assert validate_module(twist(M, d)).ok


def test_dual_examples():
    triv = module_from_character(Character.trivial(P, 2))
    D = dual_module(triv)
    assert all(mats_equal(x, y) for x, y in zip(D.phi + D.gamma, triv.phi + triv.gamma))
    d = C(P, [3, 2], [4, 7])
    D, E = dual_module(module_from_character(d)), module_from_character(d.inverse())
    assert all(mats_equal(x, y) for x, y in zip(D.phi + D.gamma, E.phi + E.gamma))


def test_double_dual():
    rnd = random.Random(12)
    for _ in range(10):
        M = random_commuting_module(rnd)
        DD = dual_module(dual_module(M))
        assert all(mats_equal(x, y) for x, y in zip(DD.phi + DD.gamma, M.phi + M.gamma))


def test_dual_pairing_intertwines():
    # Phi^T (Phi^dual) = 1: the evaluation pairing is preserved by the transported action
    M = random_commuting_module(random.Random(3))
    D = dual_module(M)
    for A, B in zip(M.phi + M.gamma, D.phi + D.gamma):
        At = [list(r) for r in zip(*A)]
        prod = mat_mul(At, B)
        assert mats_equal(prod, [[const(1), const(0)], [const(0), const(1)]])


def test_module_json_roundtrip():
    M = random_commuting_module(random.Random(1))
    N = PhiGammaModule.from_json(M.to_json())
    assert N.to_json() == M.to_json()


def test_probe_examples():
    d = C(P, [2], [4])
    assert triangulation_probe(module_from_character(d), d).h0_dim >= 1
    triv = module_from_character(Character.trivial(P, 1))
    assert triangulation_probe(triv, C(P, [2], [1])).h0_dim == 0
    d1, d2 = C(P, [2], [1]), C(P, [5], [4])
    rep = triangulation_probe(direct_sum(module_from_character(d1), module_from_character(d2)), d1)
    assert rep.h0_dim == 1
    assert len(rep.witnesses[0]) == 1 and "_1*" in rep.witnesses[0][0]


def test_probe_dimension_settles():
    d = C(P, [2], [4])
    dims = [triangulation_probe(module_from_character(d), d, depth=k).h0_dim for k in (6, 10, 20, 30)]
    assert all(a <= b for a, b in zip(dims, dims[1:])) and dims[-1] == dims[-2]
