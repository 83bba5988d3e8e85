"""Independent reference computations used across the test modules."""
from __future__ import annotations

import itertools
from fractions import Fraction


def solve_mod(A: list[list[int]], b: list[int], p: int) -> list[int] | None:
    """Plain Gauss-Jordan elimination over Z_p with Python ints."""
    n = len(A)
    M = [[x % p for x in row] + [bi % p] for row, bi in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col]), None)
        if piv is None:
            return None
        M[col], M[piv] = M[piv], M[col]
        inv = pow(M[col][col], -1, p)
        M[col] = [x * inv % p for x in M[col]]
        for r in range(n):
            if r != col and M[r][col]:
                f = M[r][col]
                M[r] = [(x - f * y) % p for x, y in zip(M[r], M[col])]
    return [M[i][n] for i in range(n)]


def monomials_upto(n: int, D: int) -> list[tuple]:
    return [a for a in itertools.product(range(D + 1), repeat=n) if sum(a) <= D]


def mono_eval(a, z, p: int) -> int:
    out = 1
    for ai, zi in zip(a, z):
        out = out * pow(zi, ai, p) % p
    return out


def dense_solve(black_box, monos: list[tuple], p: int, rng) -> dict | None:
    """Fit black_box on the given monomial basis from random points."""
    pts = [[rng.randrange(1, p) for _ in monos[0]] for _ in monos]
    A = [[mono_eval(a, z, p) for a in monos] for z in pts]
    x = solve_mod(A, [black_box(z) for z in pts], p)
    if x is None:
        return None
    return {a: c for a, c in zip(monos, x) if c}


def frac_mod(q: Fraction, p: int) -> int | None:
    if q.denominator % p == 0:
        return None
    return q.numerator * pow(q.denominator, -1, p) % p
