"""Rational reconstruction from modular images and the CRT.

Rationals are :class:`fractions.Fraction`.  Reconstruction functions return
``None`` on failure, which callers read as "more primes needed".
"""
from __future__ import annotations

from fractions import Fraction
from math import gcd, isqrt
from typing import NamedTuple, Optional

__all__ = [
    "ModularImage",
    "crt_pair",
    "default_threshold",
    "mqrr",
    "race",
    "race_and_accept",
    "rr_pair",
    "symmetric",
    "wang_rr",
]


class ModularImage(NamedTuple):
    residue: int
    modulus: int


def wang_rr(e: int, m: int) -> Optional[Fraction]:
    """Wang's reconstruction: n/d = e mod m with |n|, |d| <= sqrt(m/2)."""
    e %= m
    old_r, r = m, e
    old_t, t = 0, 1
    # loop while 2 r^2 > m
    while 2 * r * r > m:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_t, t = t, old_t - q * t
    if 2 * t * t > m or t == 0 or gcd(r, t) != 1:
        return None
    return Fraction(r, t)


def default_threshold(m: int, c: int = 10) -> int:
    """T = 2**c * ceil(log2 m)."""
    return (1 << c) * (m - 1).bit_length()


def mqrr(e: int, m: int, T: Optional[int] = None, c: int = 10) -> Optional[Fraction]:
    """Maximal quotient rational reconstruction.

    Returns the fraction attached to the largest EEA quotient exceeding ``T``,
    or ``None`` if there is none.
    """
    if T is None:
        T = default_threshold(m, c)
    e %= m
    if e == 0:
        return Fraction(0) if m > T else None
    n = d = 0
    old_t, t = 0, 1
    old_r, r = m, e
    while r != 0 and old_r > T:
        q = old_r // r
        if q > T:
            n, d, T = r, t, q
        old_r, r = r, old_r - q * r
        old_t, t = t, old_t - q * t
    if d == 0 or gcd(n, d) != 1:
        return None
    return Fraction(n, d)


def crt_pair(a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    """Combine (c1 mod p1) and (c2 mod p2) into (c3 mod p1*p2)."""
    c1, p1 = a
    c2, p2 = b
    p3 = p1 * p2
    m1 = pow(p2, -1, p1) * p2
    m2 = (1 - m1) % p3
    return (m1 * c1 + m2 * c2) % p3, p3


def rr_pair(e: int, m: int, c: int = 10) -> tuple[Optional[Fraction], Optional[Fraction]]:
    """(Wang result, MQRR result) for the image e mod m."""
    return wang_rr(e, m), mqrr(e, m, c=c)


def race(
    prev_pair: tuple,
    img: ModularImage | tuple[int, int],
    prev_img: ModularImage | tuple[int, int] | None = None,
    c: int = 10,
) -> tuple[Optional[Fraction], Optional[Fraction], Optional[Fraction]]:
    """One round of the Wang/MQRR race.

    Returns (wang, mqrr, accepted) where ``accepted`` is the accepted rational
    or None.  ``prev_pair`` holds the previous ring's results.
    """
    e, m = img
    prev = [g for g in prev_pair if g is not None]
    w, q = rr_pair(e, m, c)
    for g in (w, q):
        if g is not None and g in prev:
            return w, q, g
    if prev_img is not None and prev_img[1] < m and symmetric(*prev_img) == symmetric(e, m):
        return w, q, Fraction(symmetric(e, m))
    return w, q, None


def race_and_accept(
    prev_guess: Optional[Fraction] | tuple,
    img: ModularImage | tuple[int, int],
    prev_img: ModularImage | tuple[int, int] | None = None,
    c: int = 10,
) -> tuple[Optional[Fraction], bool]:
    """Race Wang against MQRR on the combined image ``img``.

    ``prev_guess`` is the previous ring's result, or a tuple holding both
    previous results.  A guess is accepted when either algorithm reproduces a
    previous result, or when the combined residue, read as a symmetric
    integer, did not move under the newest prime.  Otherwise the newest guess
    is returned unaccepted, preferring Wang's result.
    """
    prev = prev_guess if isinstance(prev_guess, tuple) else (prev_guess,)
    w, q, acc = race(prev, img, prev_img, c)
    if acc is not None:
        return acc, True
    return (w if w is not None else q), False


def symmetric(e: int, m: int) -> int:
    """Representative of e mod m in (-m/2, m/2]."""
    e %= m
    return e if 2 * e <= m else e - m


def bound(m: int) -> int:
    """Largest |n|, |d| Wang's algorithm can return for modulus m."""
    return isqrt(m // 2)
