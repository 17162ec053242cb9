import random
from fractions import Fraction as F
from math import comb

import pytest
from hypothesis import given, strategies as st

from multirobba.errors import ParseError, PreconditionError, RegimeError
from multirobba.laurent import Box, LaurentBoxSeries, MultiInterval
from multirobba.operators import (OperatorSpec, apply_gamma, apply_phi, apply_psi,
                                  gamma_minus_one, gamma_minus_one_invert_on_component,
                                  operator_norm_estimate, parse_operator, psi0_decompose,
                                  psi0_project, psi0_recombine)
from multirobba.padic import INF

P = 3
V1 = ("T",)
V2 = ("T1", "T2")


def S(terms, vars=V1, p=P):
    return LaurentBoxSeries.from_terms(p, vars, terms)


def binom_poly(n, sign=-1):
    """(1+T)^n + sign as a coefficient dict, straight from the binomial theorem."""
    d = {(k,): comb(n, k) for k in range(n + 1)}
    d[(0,)] += sign
    return {e: c for e, c in d.items() if c}


def test_phi_examples():
    assert apply_phi(S({(0,): 1}), 0) == S({(0,): 1})
    assert apply_phi(S({(1,): 1}), 0) == S(binom_poly(3))
    f = S({(1, 1): 1}, V2)
    assert apply_phi(f, 0) == S({(3, 1): 1, (2, 1): 3, (1, 1): 3}, V2)


def test_psi_examples():
    assert apply_psi(S({(0,): 1}), 0) == S({(0,): 1})
    assert apply_psi(apply_phi(S({(1,): 1}), 0), 0) == S({(1,): 1})
    assert apply_psi(S({(1,): 1}), 0) == S({(0,): -1})
    assert apply_psi(S({(-1,): 1}), 0) == S({(-1,): 1})


def test_gamma_examples():
    f = S({(1,): 1, (3,): 2})
    assert apply_gamma(f, 0, 1) == f
    assert apply_gamma(S({(1,): 1}), 0, 4) == S(binom_poly(4))


def test_psi_by_trace_oracle():
    # psi((1+T)^n) = (1+T)^(n/p) when p | n and 0 otherwise
    for n in range(0, 13):
        got = apply_psi(S(binom_poly(n, 0)), 0)
        want = S(binom_poly(n // P, 0)) if n % P == 0 else S({})
        assert got == want


def test_parse_operator():
    assert parse_operator("phi:1", 2) == OperatorSpec("phi", 0)
    assert parse_operator("gamma:2:4", 2) == OperatorSpec("gamma", 1, 4)
    for bad in ("phi:3", "gamma:1", "chi:1", "psi:x"):
        with pytest.raises(ParseError):
            parse_operator(bad, 2)


def rpoly(rnd, nv, deg, nt=8, lo=0):
    vars = V1 if nv == 1 else V2
    return S({tuple(rnd.randint(lo, deg) for _ in range(nv)): rnd.randint(-9, 9) for _ in range(nt)}, vars)


def test_gamma_phi_commute_random():
    rnd = random.Random(11)
    for _ in range(100):
        f = rpoly(rnd, 1, 12)
        assert apply_gamma(apply_phi(f, 0), 0, 4) == apply_phi(apply_gamma(f, 0, 4), 0)


polys2 = st.dictionaries(st.tuples(st.integers(0, 8), st.integers(0, 8)), st.integers(-20, 20), max_size=6)


@given(polys2)
def test_psi_phi_identity_property(d):
    f = S(d, V2)
    for axis in (0, 1):
        assert apply_psi(apply_phi(f, axis), axis) == f


@given(polys2)
def test_distinct_axis_commutation_property(d):
    f = S(d, V2)
    assert apply_phi(apply_phi(f, 0), 1) == apply_phi(apply_phi(f, 1), 0)
    assert apply_psi(apply_gamma(f, 0, 4), 1) == apply_gamma(apply_psi(f, 1), 0, 4)
    assert apply_phi(apply_psi(f, 1), 0) == apply_psi(apply_phi(f, 0), 1)


def test_operator_norm_examples():
    iv = MultiInterval.uniform(F(1, 4), F(1, 2), 1)
    box = Box((0,), (6,))
    assert operator_norm_estimate(lambda f: f, box, iv, P, V1) == 0
    assert operator_norm_estimate(lambda f: f.scale(3), box, iv, P, V1) == 1


def test_operator_norm_matches_brute_force():
    iv = MultiInterval.uniform(F(1, 4), F(1, 2), 1)
    box = Box((0,), (10,))
    op = gamma_minus_one(0, 4, 1, budget=20, iv=iv)
    est, rows = operator_norm_estimate(op, box, iv, P, V1, budget=20, detail=True)
    # brute force: exact (gamma - 1)(T^e) via the binomial theorem, valued at the corners
    for e, gain in rows:
        img = {}
        g = {(0,): 1}
        for _ in range(e[0]):
            g = _mul1(g, {k: v for k, v in binom_poly(4).items()})
        for k, v in g.items():
            img[k] = img.get(k, 0) + v
        img[e] = img.get(e, 0) - 1
        exact = S({k: v for k, v in img.items() if v}).interval_valuation(iv)
        assert gain <= exact - e[0] * iv.s[0] + 0  # certified value never overstates
    assert est == min(g for _, g in rows)


def _mul1(a, b):
    out = {}
    for (i,), x in a.items():
        for (j,), y in b.items():
            out[(i + j,)] = out.get((i + j,), 0) + x * y
    return out


def test_psi0_examples():
    h = S({(0,): 2, (2,): -1})
    f = apply_phi(h, 0).mul(S({(0,): 1, (1,): 1}))
    parts = psi0_decompose(f, 0)
    assert parts[1] == h and parts[2].is_zero()
    zero = psi0_decompose(S({}), 0)
    assert all(g.is_zero() for g in zero.values())
    U = S({(0,): 1, (1,): 1})
    assert psi0_project(U, 0) == U


def test_psi0_decompose_rejects_psi_nonzero():
    with pytest.raises(PreconditionError):
        psi0_decompose(S({(0,): 1}), 0)


def test_psi0_project_property_random():
    rnd = random.Random(3)
    for _ in range(100):
        f = rpoly(rnd, 1, 15)
        h = psi0_project(f, 0)
        assert apply_psi(h, 0).is_zero()
        assert psi0_recombine(psi0_decompose(h, 0), 0) == h


def test_component_inverse_examples():
    iv = MultiInterval.uniform(F(1, 12), F(1, 8), 1)
    budget = 10
    zero, _ = gamma_minus_one_invert_on_component(S({}), 0, 1, 4, budget, iv)
    assert zero.is_zero()
    for x0 in (S({(0,): 1, (1,): 1}), apply_phi(S({(1,): 1}), 0).mul(S({(0,): 1, (1,): 1}))):
        y = apply_gamma(x0, 0, 4) - x0
        x, used = gamma_minus_one_invert_on_component(y, 0, 1, 4, budget, iv)
        d = x - x0
        assert d.is_zero() or d.certified_valuation(x.interval) >= budget - 2
        assert used <= 200


def test_component_inverse_regime_guard():
    with pytest.raises(RegimeError):
        gamma_minus_one_invert_on_component(S({(1,): 1}), 0, 1, 4, 10,
                                            MultiInterval.uniform(F(1, 4), F(1, 2), 1))


def test_annulus_phi_psi_roundtrip():
    f = S({(-2,): 1, (1,): 2, (-1,): 5})
    ph = apply_phi(f, 0, iv=MultiInterval.uniform(F(3, 4), F(1), 1), budget=12)
    back = apply_psi(ph, 0)
    d = back - f
    assert d.is_zero() or d.certified_valuation(back.interval) >= 10
    # the norm identity v_t(phi f) = v_{pt}(f) for p t below the boundary radius
    assert ph.gauss_valuation((F(1, 4),)) == f.gauss_valuation((F(3, 4),))


@pytest.mark.parametrize("p", [3, 5])
def test_psi_phi_identity_degree30(p):
    rnd = random.Random(p)
    for k in range(200):
        axis = k % 2
        f = S({(rnd.randint(0, 30), rnd.randint(0, 30)): rnd.randint(-50, 50) for _ in range(4)}, V2, p)
        assert apply_psi(apply_phi(f, axis), axis) == f


@given(polys2)
def test_same_axis_psi_gamma_commute(d):
    f = S(d, V2)
    assert apply_psi(apply_gamma(f, 0, 4), 0) == apply_gamma(apply_psi(f, 0), 0, 4)


@given(polys2)
def test_phi_psi_plus_psi0_is_identity(d):
    f = S(d, V2)
    for axis in (0, 1):
        assert apply_phi(apply_psi(f, axis), axis) + psi0_project(f, axis) == f


def test_power_of_gamma_minus_one_contracts():
    iv = MultiInterval.uniform(F(1, 4), F(1, 2), 1)
    box = Box((0,), (10,))
    best = None
    for g in range(1, 33):
        v = operator_norm_estimate(gamma_minus_one(0, 4, g, budget=40, iv=iv), box, iv, P, V1, budget=40)
        if v > F(1, P - 1):
            best = g
            break
    assert best is not None
