from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from multirobba.errors import InvalidArgumentError, InvalidRadiusError, ParseError
from multirobba.laurent import (Box, LaurentBoxSeries, MultiInterval, basis_change,
                                compactness_profile, parse_box, parse_interval, series_invert)
from multirobba.padic import INF, check_prime, vp_rational

P = 3
V2 = ("T1", "T2")


def S(terms, vars=V2, p=P, box=None, basis="T"):
    return LaurentBoxSeries.from_terms(p, vars, terms, box, basis)


def oracle_gauss(terms, t, p=P):
    """Independent evaluation straight from the definition."""
    vals = [vp_rational(F(c), p) + sum(F(a) * b for a, b in zip(e, t)) for e, c in terms.items() if c]
    return min(vals) if vals else INF


def test_gauss_valuation_examples():
    assert S({}).gauss_valuation((1, 1)) == INF
    assert S({(1, 0): 3, (0, 2): 1}).gauss_valuation((1, F(1, 2))) == 1
    assert S({(0, 0): 27}).gauss_valuation((F(1, 7), 5)) == 3


def test_interval_valuation_examples():
    f = S({(1,): 1, (-1,): 1}, vars=("T",))
    assert f.interval_valuation(MultiInterval((F(1, 2),), (F(2),))) == -2
    g = S({(1, -1): 1})
    assert g.interval_valuation(MultiInterval((F(1), F(1)), (F(2), F(2)))) == -1
    assert S({(0, 0): 9}).interval_valuation(MultiInterval.uniform(F(1), F(2), 2)) == 2


def test_gauss_norm_examples():
    T = S({(1,): 1}, vars=("T",))
    assert T.gauss_norm((2,)) == 1
    assert S({(0,): 1}, vars=("T",)).gauss_norm((1,)) == 0
    assert S({(-1,): 3}, vars=("T",)).gauss_norm((1,)) == F(1, 2)


def test_radius_must_be_positive():
    with pytest.raises(InvalidRadiusError):
        MultiInterval((F(0),), (F(1),))
    with pytest.raises(InvalidRadiusError):
        S({(1,): 1}, vars=("T",)).gauss_valuation((0,))


def test_p2_rejected_for_series():
    with pytest.raises(InvalidArgumentError):
        S({(0,): 1}, vars=("T",), p=2)


def test_arith_examples():
    f = S({(1, 0): 2, (0, -1): 5})
    assert f.mul(S({(0, 0): 1})) == f
    prod = S({(1, 0): 1}).mul(S({(0, 1): 1}))
    assert prod == S({(1, 1): 1}) and prod.tail_valuation == INF


def test_truncated_geometric_product():
    t = F(1, 3)
    iv = MultiInterval.point((t,))
    one_t = S({(0,): 1, (1,): 1}, vars=("T",))
    geo = S({(k,): (-1) ** k for k in range(6)}, vars=("T",))
    prod = one_t.mul(geo, target_box=Box((0,), (5,)), iv=iv)
    assert prod.terms == {(0,): 1}
    assert prod.tail_valuation == 6 * t


def test_series_invert_examples():
    iv = MultiInterval.point((F(1, 4),))
    one = S({(0,): 1}, vars=("T",))
    assert series_invert(one, iv) == one
    T = S({(1,): 1}, vars=("T",))
    inv = series_invert(T, iv)
    assert inv == S({(-1,): 1}, vars=("T",)) and inv.tail_valuation == INF
    f = S({(1,): 3, (3,): 1}, vars=("T",))
    g = series_invert(f, iv, budget=10)
    err = f.mul(g, iv=iv) - one
    assert err.certified_valuation(iv) >= 10 - 1


def test_basis_change_examples():
    T = S({(1,): 1}, vars=("T",))
    assert basis_change(T, "U") == S({(1,): 1, (0,): -1}, vars=("T",), basis="U")
    U2 = S({(2,): 1}, vars=("T",), basis="U")
    assert basis_change(U2, "T") == S({(2,): 1, (1,): 2, (0,): 1}, vars=("T",))


def test_basis_change_negative_multiply_back():
    # the expansion of T^-1 = (U - 1)^-1 lives on an annulus in the U variable
    iv = MultiInterval.uniform(F(1, 8), F(1, 4), 1)
    u = basis_change(S({(-1,): 1}, vars=("T",)), "U", iv=iv, budget=10)
    assert u.basis == "U"
    back = S({(1,): 1, (0,): -1}, vars=("T",), basis="U").mul(u, iv=iv)
    err = back - S({(0,): 1}, vars=("T",), basis="U")
    assert min(err._interval_valuation_any_basis(iv), err.error_floor(iv)) >= 9


def test_compactness_examples():
    iv = MultiInterval.uniform(F(1, 2), F(2), 1)
    rows, _ = compactness_profile(iv, iv, P, range(-3, 4))
    assert all(g == 0 for _, g in rows)
    inner = MultiInterval.uniform(F(1), F(1), 1)
    rows, _ = compactness_profile(inner, iv, P, [5, -5])
    assert [g for _, g in rows] == [F(5, 2), 5]


def test_json_roundtrip():
    iv = MultiInterval.uniform(F(1, 4), F(1, 2), 2)
    f = S({(1, -2): F(5, 9), (0, 3): 7}).with_tail(F(13, 2), iv)
    g = LaurentBoxSeries.from_json(f.to_json())
    assert g == f and g.tail_valuation == f.tail_valuation


def test_json_rejects_outside_box():
    obj = S({(1, 1): 1}).to_json()
    obj["box"] = {"lo": [0, 0], "hi": [0, 0]}
    with pytest.raises(ParseError):
        LaurentBoxSeries.from_json(obj)


def test_parsers():
    assert parse_box("-1:2", 2) == Box((-1, -1), (2, 2))
    assert parse_interval("1/4:1/2,1:2", 2) == MultiInterval((F(1, 4), F(1)), (F(1, 2), F(2)))
    with pytest.raises(ParseError):
        parse_box("1:2:3", 1)


def test_reflect():
    assert Box((0, 1), (2, 3)).reflect() == Box((-3, -4), (-1, -2))


# ---------------------------------------------------------------------------
# properties

coef = st.integers(-30, 30).map(lambda n: F(n) * F(3) ** 0) | st.fractions(max_denominator=27)
exps = st.tuples(st.integers(-4, 6), st.integers(-4, 6))
polys = st.dictionaries(exps, coef, max_size=6)
radii = st.tuples(st.fractions(min_value=F(1, 10), max_value=F(3), max_denominator=12),
                  st.fractions(min_value=F(1, 10), max_value=F(3), max_denominator=12))


@given(polys, polys, radii)
def test_gauss_multiplicative(a, b, t):
    f, g = S(a), S(b)
    assert f.mul(g).gauss_valuation(t) == f.gauss_valuation(t) + g.gauss_valuation(t)


@given(polys, polys, radii)
def test_ultrametric(a, b, t):
    f, g = S(a), S(b)
    assert (f + g).gauss_valuation(t) >= min(f.gauss_valuation(t), g.gauss_valuation(t))


@given(polys, radii)
def test_gauss_matches_definition(a, t):
    assert S(a).gauss_valuation(t) == oracle_gauss(a, t)


@given(polys, polys)
def test_addition_commutes(a, b):
    assert S(a) + S(b) == S(b) + S(a)
