"""Arithmetic in prime fields Z_p with p < 2**63.

The working prime is process-global: :func:`set_prime` switches it and every
:class:`FieldElement` operation reduces modulo the current value.  The
functional helpers ``ff_*`` additionally accept an explicit ``p`` so that
tests and kernels can work in a fixed field without touching the global.
"""
from __future__ import annotations

import threading
from typing import Union

__all__ = [
    "FieldElement",
    "PRIMES",
    "ff_add",
    "ff_div",
    "ff_inv",
    "ff_mul",
    "ff_neg",
    "ff_pow",
    "ff_sub",
    "get_prime",
    "is_prime",
    "nth_prime",
    "set_prime",
]

# Miller-Rabin with these bases is deterministic below 3.3 * 10**24.
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic primality test for n < 3.3e24."""
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _largest_primes(count: int, below: int) -> tuple[int, ...]:
    out = []
    n = below - 1 if below % 2 == 0 else below - 2
    while len(out) < count:
        if is_prime(n):
            out.append(n)
        n -= 2
    return tuple(out)


#: The 100 largest primes below 2**63, descending.
PRIMES: tuple[int, ...] = _largest_primes(100, 1 << 63)


def nth_prime(i: int) -> int:
    """Return the (i+1)-th largest prime below 2**63, 0 <= i < 100."""
    if not 0 <= i < len(PRIMES):
        raise IndexError(f"prime index {i} outside 0..{len(PRIMES) - 1}")
    return PRIMES[i]


_state = threading.local()
_global_prime = PRIMES[0]
_prime_lock = threading.Lock()


def set_prime(p: int) -> None:
    """Switch the ambient prime.  Callers must ensure no probe is in flight."""
    global _global_prime
    if not 2 <= p < (1 << 63):
        raise ValueError("prime must satisfy 2 <= p < 2**63")
    with _prime_lock:
        _global_prime = int(p)


def get_prime() -> int:
    return _global_prime


def _mod(p):
    return _global_prime if p is None else p


def _v(a) -> int:
    return a.value if isinstance(a, FieldElement) else int(a)


def ff_inv(a, p: int | None = None) -> int:
    """Inverse via the extended Euclidean algorithm; the inverse of 0 is 0."""
    p = _mod(p)
    a = _v(a) % p
    if a == 0:
        return 0
    old_r, r = p, a
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_t, t = t, old_t - q * t
    return old_t % p


def ff_add(a, b, p: int | None = None) -> "FieldElement":
    p = _mod(p)
    return FieldElement._raw((_v(a) + _v(b)) % p)


def ff_sub(a, b, p: int | None = None) -> "FieldElement":
    p = _mod(p)
    return FieldElement._raw((_v(a) - _v(b)) % p)


def ff_mul(a, b, p: int | None = None) -> "FieldElement":
    # Python ints give the double-width intermediate for free
    p = _mod(p)
    return FieldElement._raw(_v(a) * _v(b) % p)


def ff_div(a, b, p: int | None = None) -> "FieldElement":
    """a / b mod p, with division by zero defined as 0."""
    p = _mod(p)
    return FieldElement._raw(_v(a) * ff_inv(b, p) % p)


def ff_neg(a, p: int | None = None) -> "FieldElement":
    p = _mod(p)
    return FieldElement._raw(-_v(a) % p)


def ff_pow(a, e: int, p: int | None = None) -> "FieldElement":
    """a**e mod p by square-and-multiply; e must be non-negative."""
    if e < 0:
        raise ValueError("negative exponent")
    p = _mod(p)
    return FieldElement._raw(pow(_v(a) % p, e, p))


class FieldElement:
    """Residue modulo the ambient prime.

    Construction from ``int`` or a decimal string reduces modulo the current
    prime.  Results of arithmetic are reduced with respect to the prime that is
    active when the operation runs.
    """

    __slots__ = ("value",)

    def __init__(self, value: Union[int, str, "FieldElement"] = 0):
        if isinstance(value, FieldElement):
            value = value.value
        elif isinstance(value, str):
            value = int(value.strip())
        self.value = int(value) % _global_prime

    @classmethod
    def _raw(cls, value: int) -> "FieldElement":
        obj = cls.__new__(cls)
        obj.value = value
        return obj

    def __add__(self, other):
        return ff_add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return ff_sub(self, other)

    def __rsub__(self, other):
        return ff_sub(other, self)

    def __mul__(self, other):
        return ff_mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ff_div(self, other)

    def __rtruediv__(self, other):
        return ff_div(other, self)

    def __neg__(self):
        return ff_neg(self)

    def __pow__(self, e: int):
        if e < 0:
            return ff_pow(ff_inv(self), -e)
        return ff_pow(self, e)

    def inverse(self) -> "FieldElement":
        return FieldElement._raw(ff_inv(self))

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.value == other.value
        if isinstance(other, int):
            return self.value == other % _global_prime
        return NotImplemented

    def __hash__(self):
        return hash(self.value)

    def __int__(self):
        return self.value

    __index__ = __int__

    def __bool__(self):
        return self.value != 0

    def __repr__(self):
        return f"FieldElement({self.value})"

    def __str__(self):
        return str(self.value)
