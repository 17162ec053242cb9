"""Finite-dimensional quotients on which the operators act as endomorphisms.

Per axis and depth ``N`` we use

    B = Q_p[T] / (T^e * Phi_p(1+T)^f),   A = Q_p[T] / (T^f),

with ``f = (N+1) // p`` and ``e = N + 1 - (p-1) f``, so ``dim B = N + 1``
and ``e >= f``.  The ideal of ``B`` is stable under ``phi`` and ``gamma``
(``phi(T) = T Phi_p(1+T)`` and ``gamma`` fixes both factors up to units),
and ``psi`` maps it into ``T^f``; hence ``phi, gamma: B -> B``,
``psi: B -> A`` and the reduction ``B -> A`` are all well defined.
Everything is computed on the monomial basis ``1, T, ..., T^(N)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import List, Tuple

from flint import fmpz_mat, fmpz_poly

from .padic import check_prime

_X = fmpz_poly([0, 1])


def _cols_to_mat(cols: List[List[int]], nrows: int) -> fmpz_mat:
    M = fmpz_mat(nrows, len(cols))
    for j, col in enumerate(cols):
        for i, c in enumerate(col[:nrows]):
            if c:
                M[i, j] = c
    return M


def _coeffs(f: fmpz_poly, n: int) -> List[int]:
    c = [int(x) for x in f.coeffs()]
    return (c + [0] * n)[:n]


def psi_poly(p: int, j: int) -> fmpz_poly:
    """``psi(T^j)`` for the left inverse of ``T -> (1+T)^p - 1``; a polynomial with integer coefficients."""
    out = fmpz_poly([])
    for k in range(0, j + 1, p):
        c = comb(j, k) * (-1) ** (j - k)
        out += c * (_X + 1) ** (k // p)
    return out


@dataclass(frozen=True)
class Jet1D:
    prime: int
    depth: int
    a: int
    e: int
    f: int
    phiB: fmpz_mat
    gammaB: fmpz_mat
    psiBA: fmpz_mat
    gammaA: fmpz_mat
    projBA: fmpz_mat
    modulus: Tuple[int, ...]

    @property
    def dimB(self) -> int:
        return self.depth + 1

    @property
    def dimA(self) -> int:
        return self.f

    def reduce(self, g: fmpz_poly) -> List[int]:
        return _coeffs(g % fmpz_poly(list(self.modulus)), self.dimB)

    def mult(self, k: int) -> fmpz_mat:
        """Multiplication by ``T^k`` on ``B``."""
        M = fmpz_poly(list(self.modulus))
        return _cols_to_mat([_coeffs((_X ** (j + k)) % M, self.dimB) for j in range(self.dimB)], self.dimB)

    def level(self, name: str) -> int:
        return self.dimB if name == "B" else self.dimA


@lru_cache(maxsize=None)
def jet(p: int, depth: int, a: int) -> Jet1D:
    check_prime(p)
    n = depth + 1
    f = n // p
    e = n - (p - 1) * f
    cyc = ((_X + 1) ** p - 1) // _X
    M = _X ** e * cyc ** f
    phi_T = (_X + 1) ** p - 1
    gam_T = (_X + 1) ** a - 1
    phiB, gamB, psiBA, gamA, proj = [], [], [], [], []
    pw_phi = fmpz_poly([1])
    pw_gam = fmpz_poly([1])
    for j in range(n):
        phiB.append(_coeffs(pw_phi % M, n))
        gamB.append(_coeffs(pw_gam % M, n))
        psiBA.append(_coeffs(psi_poly(p, j), f))
        proj.append([int(i == j) for i in range(f)])
        pw_phi = (pw_phi * phi_T) % M
        pw_gam = (pw_gam * gam_T) % M
    Tf = _X ** f
    pw = fmpz_poly([1])
    for j in range(f):
        gamA.append(_coeffs(pw % Tf if f else fmpz_poly([]), f))
        pw = pw * gam_T
    return Jet1D(p, depth, a, e, f, _cols_to_mat(phiB, n), _cols_to_mat(gamB, n),
                 _cols_to_mat(psiBA, f), _cols_to_mat(gamA, f), _cols_to_mat(proj, f),
                 tuple(int(x) for x in M.coeffs()))


def kron(A: fmpz_mat, B: fmpz_mat) -> fmpz_mat:
    ra, ca, rb, cb = A.nrows(), A.ncols(), B.nrows(), B.ncols()
    out = fmpz_mat(ra * rb, ca * cb)
    bent = [(i, j, B[i, j]) for i in range(rb) for j in range(cb) if B[i, j] != 0]
    for i in range(ra):
        for j in range(ca):
            x = A[i, j]
            if x == 0:
                continue
            for k, l, y in bent:
                out[i * rb + k, j * cb + l] = x * y
    return out


def identity(n: int) -> fmpz_mat:
    M = fmpz_mat(n, n)
    for i in range(n):
        M[i, i] = 1
    return M
