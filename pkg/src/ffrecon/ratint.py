"""Rational-function interpolation over a single prime field.

The black box f(z_1..z_n) is probed along rays z = t * Y + s, where
Y = (1, y_2**o_2, ..., y_n**o_n) for an order tuple o and s is a shift.  A
Thiele continued fraction in t fixes the maximal degrees; afterwards every
t-degree coefficient is a polynomial in z_2..z_n (z_1 is restored by
homogeneity) that is interpolated with Zippel's algorithm, and the values it
needs come from small linear systems in t.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from . import _kernels as K
from .ffield import ff_inv
from .polyint import SingularSystem, SparsePolynomial, ZippelOptions, ZippelState, colex_key

__all__ = [
    "ProbeRequest",
    "RationalFunction",
    "RationalInterpolator",
    "ShiftScanner",
    "ThieleState",
    "UnluckyZero",
    "build_univariate_system",
    "interpolate_rational",
    "order_key",
    "probe_points",
    "shift_scan",
    "shift_subtraction",
    "taylor_shift",
    "thiele_eval",
    "thiele_feed",
    "thiele_to_rational",
]

RETRY_BUDGET = 3


class UnluckyZero(ArithmeticError):
    """A vanishing denominator in Thiele's recursion."""


# ------------------------------------------------------------- univariate utils


def _trim(a: list) -> list:
    while a and a[-1] == 0:
        a.pop()
    return a


def _uadd(a: list, b: list, p: int) -> list:
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, c in enumerate(b):
        out[i] = (out[i] + c) % p
    return out


def _umul_linear(a: list, c: int, p: int) -> list:
    """a(t) * (t - c)."""
    out = [0] * (len(a) + 1)
    for i, x in enumerate(a):
        out[i + 1] = (out[i + 1] + x) % p
        out[i] = (out[i] - c * x) % p
    return out


def _udivmod(a: list, b: list, p: int) -> tuple[list, list]:
    a = _trim(list(a))
    b = _trim(list(b))
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    inv = ff_inv(b[-1], p)
    q = [0] * max(len(a) - len(b) + 1, 0)
    while len(a) >= len(b) and a:
        c = a[-1] * inv % p
        shift = len(a) - len(b)
        q[shift] = c
        for i, x in enumerate(b):
            a[shift + i] = (a[shift + i] - c * x) % p
        _trim(a)
    return q, a


def _ugcd(a: list, b: list, p: int) -> list:
    a = _trim(list(a))
    b = _trim(list(b))
    while b:
        a, b = b, _udivmod(a, b, p)[1]
    if not a:
        return [1]
    inv = ff_inv(a[-1], p)
    return [x * inv % p for x in a]


def _ueval(a: Sequence[int], t: int, p: int) -> int:
    acc = 0
    for c in reversed(a):
        acc = (acc * t + c) % p
    return acc


# ---------------------------------------------------------------------- Thiele


@dataclass
class ThieleState:
    """Continued fraction b_0 + (t - t_1)/(b_1 + (t - t_2)/(b_2 + ...))."""

    p: int
    ts: list = field(default_factory=list)
    bs: list = field(default_factory=list)
    done: bool = False
    probes: int = 0


def thiele_eval(state: ThieleState, t: int) -> Optional[int]:
    """Value of the continued fraction at t, or None at a pole."""
    p = state.p
    if not state.bs:
        return None
    num, den = state.bs[-1], 1
    for i in range(len(state.bs) - 2, -1, -1):
        # b_i + (t - t_{i+1}) / (num/den)
        num, den = (state.bs[i] * num + (t - state.ts[i]) * den) % p, num
    if den == 0:
        return None
    return num * ff_inv(den, p) % p


def thiele_feed(state: ThieleState, t: int, f: int) -> bool:
    """Add f(t).  Returns True once the fraction reproduces a fresh probe."""
    if state.done:
        return True
    p = state.p
    t %= p
    f %= p
    state.probes += 1
    if state.bs and thiele_eval(state, t) == f:
        state.done = True
        return True
    if t in state.ts:
        raise SingularSystem("repeated Thiele point")
    b = f
    for tj, bj in zip(state.ts, state.bs):
        d = (b - bj) % p
        if d == 0:
            raise UnluckyZero("zero denominator in continued fraction")
        b = (t - tj) * ff_inv(d, p) % p
    state.ts.append(t)
    state.bs.append(b)
    return False


def thiele_to_rational(state: ThieleState) -> tuple[list[int], list[int]]:
    """Numerator and denominator coefficients in t (ascending).

    Common factors are removed and the lowest nonzero denominator coefficient
    is scaled to one.
    """
    p = state.p
    bs, ts = state.bs, state.ts
    if not bs:
        return [], [1]
    num, den = [bs[-1]], [1]
    for i in range(len(bs) - 2, -1, -1):
        num, den = _uadd([bs[i] * c % p for c in num], _umul_linear(den, ts[i], p), p), num
    num, den = _trim(num), _trim(den)
    g = _ugcd(num, den, p)
    if len(g) > 1:
        num = _udivmod(num, g, p)[0]
        den = _udivmod(den, g, p)[0]
    num, den = _trim(num), _trim(den)
    low = next(c for c in den if c)
    inv = ff_inv(low, p)
    return [c * inv % p for c in num], [c * inv % p for c in den]


def _degrees(num: list, den: list) -> tuple[int, int]:
    return len(num) - 1, len(den) - 1


# ------------------------------------------------------------ shift handling


def taylor_shift(terms: dict, s: Sequence[int], p: int) -> dict:
    """Expand P(z + s) for a sparse polynomial given as {exponents: coef}."""
    out = dict(terms)
    for i, si in enumerate(s):
        si %= p
        if si == 0:
            continue
        new: dict = {}
        pw_cache: dict = {}
        for a, c in out.items():
            e = a[i]
            if e == 0:
                new[a] = (new.get(a, 0) + c) % p
                continue
            if e not in pw_cache:
                pw_cache[e] = [comb(e, l) * pow(si, e - l, p) % p for l in range(e + 1)]
            row = pw_cache[e]
            pre, post = a[:i], a[i + 1 :]
            for l in range(e + 1):
                b = pre + (l,) + post
                new[b] = (new.get(b, 0) + c * row[l]) % p
        out = {a: c for a, c in new.items() if c}
    return out


def shift_subtraction(P: SparsePolynomial, s: Sequence[int], p: Optional[int] = None) -> dict:
    """Bucket P(z + s) - P(z) by total degree: {degree: SparsePolynomial}."""
    p = p if p is not None else P.p
    if p is None:
        raise ValueError("a modulus is required")
    shifted = taylor_shift({a: int(c) % p for a, c in P.terms.items()}, s, p)
    for a, c in P.terms.items():
        shifted[a] = (shifted.get(a, 0) - int(c)) % p
    buckets: dict = {}
    for a, c in shifted.items():
        if c:
            buckets.setdefault(sum(a), SparsePolynomial(P.n, None, p)).terms[a] = c
    return buckets


# ------------------------------------------------------------ rational function


class RationalFunction:
    """Numerator / denominator pair of sparse polynomials."""

    __slots__ = ("num", "den")

    def __init__(self, num: SparsePolynomial, den: SparsePolynomial):
        if den.is_zero():
            raise ZeroDivisionError("denominator is the zero polynomial")
        self.num = num
        self.den = den

    @property
    def n(self) -> int:
        return self.num.n

    @property
    def p(self) -> Optional[int]:
        return self.num.p

    def normalization_monomial(self) -> tuple:
        """Lowest-degree denominator monomial, colex-smallest among ties."""
        return min(self.den.terms, key=colex_key)

    def scaled(self, c) -> "RationalFunction":
        """Divide numerator and denominator by c."""
        p = self.p
        if p is not None:
            inv = ff_inv(int(c) % p, p)
            return RationalFunction(self.num.scale(inv), self.den.scale(inv))
        inv = Fraction(1) / Fraction(c)
        return RationalFunction(self.num.scale(inv), self.den.scale(inv))

    def normalized(self) -> "RationalFunction":
        c = self.den.terms[self.normalization_monomial()]
        out = self.scaled(c)
        if self.p is None:
            for poly in (out.num, out.den):
                for a, v in poly.terms.items():
                    poly.terms[a] = Fraction(v)
        return out

    def evaluate(self, point: Sequence[int]):
        p = self.p
        n = self.num.evaluate(point)
        d = self.den.evaluate(point)
        if p is not None:
            return n * ff_inv(d, p) % p
        return Fraction(n) / Fraction(d)

    def evaluate_mod(self, point: Sequence[int], p: int) -> Optional[int]:
        """Value modulo p of a function with rational coefficients (None at a pole)."""
        d = self.den.reduce(p).evaluate(point)
        if d == 0:
            return None
        return self.num.reduce(p).evaluate(point) * ff_inv(d, p) % p

    def reduce(self, p: int) -> "RationalFunction":
        return RationalFunction(self.num.reduce(p), self.den.reduce(p))

    def permute(self, perm: Sequence[int]) -> "RationalFunction":
        return RationalFunction(self.num.permute(perm), self.den.permute(perm))

    def to_string(self, names: Optional[Sequence[str]] = None) -> str:
        return f"({self.num.to_string(names)})/({self.den.to_string(names)})"

    __str__ = to_string

    def __repr__(self):
        return f"RationalFunction('{self.to_string()}')"

    def __eq__(self, other):
        if not isinstance(other, RationalFunction):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    @classmethod
    def parse(cls, text: str, names: Sequence[str]) -> "RationalFunction":
        text = text.strip()
        if not text.startswith("("):
            raise ValueError("expected '(numerator)/(denominator)'")
        depth = 0
        for i, ch in enumerate(text):
            depth += ch == "("
            depth -= ch == ")"
            if depth == 0:
                break
        num_txt = text[1:i]
        rest = text[i + 1 :].strip()
        if not (rest.startswith("/(") and rest.endswith(")")):
            raise ValueError("expected '(numerator)/(denominator)'")
        return cls(
            SparsePolynomial.parse(num_txt, names), SparsePolynomial.parse(rest[2:-1], names)
        )


# ------------------------------------------------------------- probe plumbing


def order_key(order: Sequence[int]) -> tuple[int, int, int]:
    """(stage, step, row) encoded by a Zippel order tuple."""
    last = -1
    for i, o in enumerate(order):
        if o != 1:
            last = i
    if last < 0:
        return (1, 1, 1)
    s = last + 1
    return (s, order[last], order[0] if s >= 2 else 1)


@dataclass(frozen=True)
class ProbeRequest:
    """``count`` probes along t * Y(order) + shift.  ``kind == 'point'`` asks
    for probes at uniformly random points instead (used for verification)."""

    order: tuple
    count: int
    shift: tuple
    kind: str = "t"

    @property
    def key(self) -> tuple:
        return (self.kind, self.shift, self.order)


def order_base(order: Sequence[int], anchors: Sequence[int], p: int) -> list[int]:
    return [1] + [pow(int(y), int(o), p) for y, o in zip(anchors, order)]


def probe_points(
    order: Sequence[int], ts: np.ndarray, anchors: Sequence[int], shift: Sequence[int], p: int
) -> np.ndarray:
    """Rows t_r * Y(order) + shift as a (len(ts), n) uint64 array."""
    base = np.array(order_base(order, anchors, p), dtype=np.uint64)
    n = base.shape[0]
    ctx = K.mont_context(p)
    tt = np.repeat(np.asarray(ts, dtype=np.uint64), n)
    bb = np.tile(base, len(ts))
    ss = np.tile(np.array([int(x) % p for x in shift], dtype=np.uint64), len(ts))
    pts = K.vec_add(K.vec_mul(tt, bb, *ctx), ss, ctx[0])
    return pts.reshape(len(ts), n)


def build_univariate_system(
    ts: Sequence[int],
    fs: Sequence[int],
    num_unknown: Sequence[int],
    den_unknown: Sequence[int],
    num_known: dict,
    den_known: dict,
    p: int,
) -> tuple[dict, dict]:
    """Solve for unknown t-coefficients at one z-point.

    Each probe gives sum_u n_u t^u - f sum_u d_u t^u = f sum_s d_s t^s - sum_s n_s t^s.
    Returns ({num degree: value}, {den degree: value}).
    """
    u = len(num_unknown) + len(den_unknown)
    if len(ts) < u:
        raise ValueError(f"{u} unknowns need at least {u} probes")
    ctx = K.mont_context(p)
    tv = np.array([int(t) % p for t in ts[:u]], dtype=np.uint64)
    fv = np.array([int(f) % p for f in fs[:u]], dtype=np.uint64)
    A = K.build_t_system(
        tv, fv, np.array(num_unknown, dtype=np.int64), np.array(den_unknown, dtype=np.int64), *ctx
    )
    rhs = _known_rhs(tv, fv, num_known, den_known, ctx)
    x, ok = K.gauss_solve(A, rhs, *ctx)
    if not ok:
        raise SingularSystem("singular univariate system")
    nn = len(num_unknown)
    return (
        {k: int(x[i]) for i, k in enumerate(num_unknown)},
        {k: int(x[nn + i]) for i, k in enumerate(den_unknown)},
    )


def _coef_vec(known: dict) -> np.ndarray:
    if not known:
        return np.zeros(1, dtype=np.uint64)
    v = np.zeros(max(known) + 1, dtype=np.uint64)
    for k, c in known.items():
        v[k] = np.uint64(int(c))
    return v


def _known_rhs(tv, fv, num_known: dict, den_known: dict, ctx) -> np.ndarray:
    kn = K.horner_many(_coef_vec(num_known), tv, *ctx)
    kd = K.horner_many(_coef_vec(den_known), tv, *ctx)
    return K.vec_sub(K.vec_mul(fv, kd, *ctx), kn, ctx[0])


# ------------------------------------------------------------ first-prime engine

NUM, DEN = 0, 1


@dataclass
class _Degree:
    side: int
    k: int
    kind: str  # "zippel" | "zero" | "norm"
    col: int = -1
    zs: Optional[ZippelState] = None
    final: bool = False
    poly: dict = field(default_factory=dict)  # P_k, homogeneous in n variables
    bucket: dict = field(default_factory=dict)  # B_k, shift contributions of higher degrees
    barr: Optional[tuple] = None
    fed: list = field(default_factory=list)  # (order, corrected value) pairs


class RationalInterpolator:
    """Feed-driven interpolation of one rational function over Z_p.

    Use :meth:`request` to learn which probes are needed next and
    :meth:`feed` to hand them over.  ``anchors`` are y_2..y_n; ``shift`` has n
    entries.  The result is the unshifted function normalized so that the
    shifted constant used during the run is one.
    """

    def __init__(self, n: int, p: int, anchors: Sequence[int], shift: Sequence[int]):
        if len(anchors) != n - 1 or len(shift) != n:
            raise ValueError("need n-1 anchors and n shift entries")
        self.n = n
        self.m = n - 1
        self.p = p
        self.ctx = K.mont_context(p)
        self.y = [int(a) % p for a in anchors]
        self.s = tuple(int(x) % p for x in shift)
        self.shifted = any(self.s)
        self.order1 = (1,) * self.m
        self.thiele = ThieleState(p)
        self.thiele_result: Optional[tuple[list, list]] = None
        self.phase = "thiele"
        self.retries = 0
        self.probes = 0
        self.degrees: list[_Degree] = []
        self.sides: tuple[list, list] = ([], [])
        self.orders: dict[tuple, int] = {}
        self.bases: list[list[int]] = []
        self.raw = np.zeros((0, 0), dtype=np.uint64)
        self.norm: Optional[tuple[int, int]] = None
        self._next: Optional[ProbeRequest] = None
        self._solved_cache = None
        self.result: Optional[RationalFunction] = None

    # ------------------------------------------------------------- interface
    @property
    def done(self) -> bool:
        return self.phase == "done"

    def request(self) -> Optional[ProbeRequest]:
        if self.phase == "thiele":
            return ProbeRequest(self.order1, 1, self.s)
        if self.phase == "done":
            return None
        return self._next

    def feed(self, req: ProbeRequest, ts: Sequence[int], fs: Sequence[int]) -> None:
        if self.phase == "done":
            return
        if self.phase == "thiele":
            self._feed_thiele(ts, fs)
        else:
            if req.order != self._next.order:
                raise ValueError("probes for an order that was not requested")
            self._feed_system(req.order, ts, fs)

    # ---------------------------------------------------------------- Thiele
    def _feed_thiele(self, ts, fs):
        for t, f in zip(ts, fs):
            self.probes += 1
            try:
                if thiele_feed(self.thiele, int(t), int(f)):
                    break
            except (UnluckyZero, SingularSystem):
                self.retries += 1
                if self.retries > RETRY_BUDGET:
                    raise UnluckyZero("retry budget for the Thiele stage exhausted")
                self.thiele = ThieleState(self.p)
                return
        if self.thiele.done:
            self._setup(*thiele_to_rational(self.thiele))

    def _setup(self, num: list, den: list):
        p = self.p
        self.thiele_result = (list(num), list(den))
        if den and den[0]:
            self.norm = (DEN, 0)
            c = den[0]
        elif num and num[0]:
            self.norm = (NUM, 0)
            c = num[0]
        else:
            raise ValueError("no constant term along the ray; a shift is required")
        inv = ff_inv(c, p)
        coefs = ([x * inv % p for x in num], [x * inv % p for x in den])
        col = 0
        row_vals = []
        for side in (NUM, DEN):
            for k in range(len(coefs[side]) - 1, -1, -1):
                val = coefs[side][k]
                if (side, k) == self.norm:
                    d = _Degree(side, k, "norm")
                elif val == 0:
                    d = _Degree(side, k, "zero")
                else:
                    zs = ZippelState(self.y, p, ZippelOptions(True, k))
                    d = _Degree(side, k, "zippel", col, zs)
                    col += 1
                    row_vals.append(val)
                self.sides[side].append(d)
                self.degrees.append(d)
        self.raw = np.zeros((16, max(col, 1)), dtype=np.uint64)
        self._add_row(self.order1, row_vals)
        self.phase = "system"
        self._advance()

    # ---------------------------------------------------------------- orders
    def _add_row(self, order, vals):
        r = len(self.bases)
        if r >= self.raw.shape[0]:
            grown = np.zeros((2 * self.raw.shape[0], self.raw.shape[1]), dtype=np.uint64)
            grown[:r] = self.raw
            self.raw = grown
        self.orders[order] = r
        self.bases.append(order_base(order, self.y, self.p))
        cols = [d.col for d in self._open()]
        self.raw[r, cols] = np.array(vals, dtype=np.uint64)

    def _open(self) -> list[_Degree]:
        return [d for d in self.degrees if d.kind == "zippel" and not d.final]

    def _blocked(self, d: _Degree) -> bool:
        if not self.shifted:
            return False
        return any(not e.final for e in self.sides[d.side] if e.k > d.k)

    # -------------------------------------------------------- shift buckets
    def _bucket_arrays(self, d: _Degree):
        if d.barr is None:
            terms = [(a, c) for a, c in d.bucket.items() if c]
            exps = np.array([a for a, _ in terms], dtype=np.int64).reshape(len(terms), self.n)
            coefs = np.array([c for _, c in terms], dtype=np.uint64)
            d.barr = (exps, coefs)
        return d.barr

    def _bucket_at(self, d: _Degree, rows: Sequence[int]) -> np.ndarray:
        exps, coefs = self._bucket_arrays(d)
        if exps.shape[0] == 0:
            return np.zeros(len(rows), dtype=np.uint64)
        bases = np.array([self.bases[r] for r in rows], dtype=np.uint64)
        return K.poly_eval_multi(exps, coefs, bases, *self.ctx)

    def _propagate(self, d: _Degree):
        """Add P_k(z + s) restricted to lower degrees into their buckets."""
        if not self.shifted or not d.poly:
            return
        lower = {e.k: e for e in self.sides[d.side] if e.k < d.k}
        p = self.p
        for a, c in taylor_shift(d.poly, self.s, p).items():
            deg = sum(a)
            if deg < d.k and deg in lower:
                b = lower[deg].bucket
                b[a] = (b.get(a, 0) + c) % p

    # --------------------------------------------------------------- solving
    def _finalize(self, d: _Degree):
        p = self.p
        if d.kind == "zippel":
            d.poly = {(d.k - sum(b),) + b: c for b, c in d.zs.result.items()}
        else:
            # the shifted value is known (0, or 1 for the normalization), so the
            # unshifted coefficient is that value minus the shift contributions
            base = {(0,) * self.n: 1} if d.kind == "norm" else {}
            poly = dict(base)
            for a, c in d.bucket.items():
                poly[a] = (poly.get(a, 0) - c) % p
            d.poly = {a: c for a, c in poly.items() if c}
        d.final = True
        self._propagate(d)
        self._solved_cache = None

    def _try_feed(self, d: _Degree) -> bool:
        """Feed cached values to an unblocked degree; True if it finished."""
        zs = d.zs
        while not zs.done:
            need = zs.needed()
            rows = [self.orders.get(o) for o in need]
            if any(r is None for r in rows):
                return False
            vals = K.vec_sub(self.raw[rows, d.col].copy(), self._bucket_at(d, rows), self.ctx[0])
            d.fed.extend(zip(need, (int(v) for v in vals)))
            zs.feed(vals)
        return True

    def _advance(self):
        changed = True
        while changed:
            changed = False
            for side in (NUM, DEN):
                for d in self.sides[side]:  # descending degree
                    if d.final:
                        continue
                    if self._blocked(d):
                        break
                    if d.kind != "zippel" or self._try_feed(d):
                        self._finalize(d)
                        changed = True
        if all(d.final for d in self.degrees):
            self._finish()
            return
        # serve the degree that is closest to its next step first: cheap degrees
        # finish early, which shrinks every later system and unblocks lower degrees
        best = None
        for side in (NUM, DEN):
            for d in self.sides[side]:
                if d.final:
                    continue
                if self._blocked(d):
                    break
                missing = [o for o in d.zs.needed() if o not in self.orders]
                if missing:
                    o = min(missing, key=order_key)
                    rank = (len(missing), order_key(o))
                    if best is None or rank < best[0]:
                        best = (rank, o)
        if best is None:
            raise RuntimeError("interpolation stalled without a pending order")
        self._next = ProbeRequest(best[1], len(self._open()), self.s)

    def _side_plan(self, side: int):
        """How to evaluate the shifted values of the final degrees on one side.

        Either the expanded form P_k + B_k is evaluated term by term, or the
        final P_j are evaluated at D+1 points of the ray and the t-coefficients
        are interpolated.  The second form wins when a high-degree polynomial
        with few terms expands into many shifted terms.
        """
        final = [d for d in self.sides[side] if d.final]
        wanted = [d for d in final if d.kind == "zippel"]
        if not wanted:
            return None
        expanded = sum(len(d.poly) + len(d.bucket) for d in wanted)
        top = max(d.k for d in final)
        compact = (top + 1) * sum(len(d.poly) for d in final)
        if self.shifted and compact < expanded:
            terms = [(a, c) for d in final for a, c in d.poly.items()]
            exps = np.array([a for a, _ in terms], dtype=np.int64).reshape(len(terms), self.n)
            coefs = np.array([c for _, c in terms], dtype=np.uint64)
            return ("ray", wanted, exps, coefs, top)
        exps, coefs, groups = [], [], []
        for g, d in enumerate(wanted):
            for part in (d.poly, d.bucket):
                for a, c in part.items():
                    exps.append(a)
                    coefs.append(c)
                    groups.append(g)
        return (
            "expanded",
            wanted,
            np.array(exps, dtype=np.int64).reshape(len(exps), self.n),
            np.array(coefs, dtype=np.uint64),
            np.array(groups, dtype=np.int64),
        )

    def _solved_values(self, base: list[int]) -> tuple[dict, dict]:
        """Shifted values of all degrees whose value is known at this point."""
        known: tuple[dict, dict] = ({}, {})
        for d in self.degrees:
            if d.kind == "norm":
                known[d.side][d.k] = 1
            elif d.kind == "zero":
                known[d.side][d.k] = 0
        if self._solved_cache is None:
            self._solved_cache = [self._side_plan(NUM), self._side_plan(DEN)]
        for plan in self._solved_cache:
            if plan is None:
                continue
            if plan[0] == "expanded":
                _, wanted, exps, coefs, groups = plan
                vals = K.poly_eval_grouped(
                    exps, coefs, groups, len(wanted), np.array(base, dtype=np.uint64), *self.ctx
                )
                for g, d in enumerate(wanted):
                    known[d.side][d.k] = int(vals[g])
            else:
                _, wanted, exps, coefs, top = plan
                ts = np.arange(1, top + 2, dtype=np.uint64)
                pts = self._ray_points(base, ts)
                vals = K.poly_eval_multi(exps, coefs, pts, *self.ctx)
                tc = K.interpolate_univariate(ts, vals, *self.ctx)
                for d in wanted:
                    known[d.side][d.k] = int(tc[d.k])
        return known

    def _ray_points(self, base: list[int], ts: np.ndarray) -> np.ndarray:
        n = self.n
        ctx = self.ctx
        tt = np.repeat(ts, n)
        bb = np.tile(np.array(base, dtype=np.uint64), ts.shape[0])
        ss = np.tile(np.array(self.s, dtype=np.uint64), ts.shape[0])
        return K.vec_add(K.vec_mul(tt, bb, *ctx), ss, ctx[0]).reshape(ts.shape[0], n)

    def _feed_system(self, order, ts, fs):
        opened = self._open()
        u = len(opened)
        self.probes += u
        base = order_base(order, self.y, self.p)
        num_known, den_known = self._solved_values(base)
        num_u = [d.k for d in opened if d.side == NUM]
        den_u = [d.k for d in opened if d.side == DEN]
        try:
            xn, xd = build_univariate_system(ts, fs, num_u, den_u, num_known, den_known, self.p)
        except SingularSystem:
            self.retries += 1
            if self.retries > RETRY_BUDGET:
                raise
            return  # same request again with fresh t values
        vals = [xn[d.k] if d.side == NUM else xd[d.k] for d in opened]
        self._add_row(order, vals)
        self._advance()

    def _finish(self):
        num, den = {}, {}
        for d in self.degrees:
            tgt = num if d.side == NUM else den
            tgt.update(d.poly)
        self.result = RationalFunction(
            SparsePolynomial(self.n, num, self.p), SparsePolynomial(self.n, den, self.p)
        )
        self.phase = "done"
        self._next = None

    # ------------------------------------------------------------ inspection
    def degree(self, side: int, k: int) -> _Degree:
        return next(d for d in self.sides[side] if d.k == k)

    def max_degrees(self) -> tuple[int, int]:
        return _degrees(*self.thiele_result)


# -------------------------------------------------------------- shift scanning


def _candidates(n: int) -> Iterator[tuple[int, ...]]:
    """Variable subsets to shift: none, then singletons from the last variable
    backwards, then pairs, and so on up to all variables."""
    for r in range(0, n + 1):
        yield from itertools.combinations(reversed(range(n)), r)


class ShiftScanner:
    """Find a shift touching as few variables as possible.

    The maximal t-degrees obtained with every variable shifted serve as the
    reference; a candidate is accepted when all functions reproduce them.
    ``full_shift`` provides the values used for shifted variables.
    """

    def __init__(self, n: int, p: int, full_shift: Sequence[int], n_funcs: int = 1):
        self.n = n
        self.m = n - 1
        self.p = p
        self.full = tuple(int(x) % p for x in full_shift)
        self.n_funcs = n_funcs
        self.baseline: Optional[list] = None
        self._cands = _candidates(n)
        self.current = self.full
        self.subset: tuple = tuple(range(n))
        self._reset()
        self.probes = 0
        self.accepted: Optional[tuple] = None
        self.retries = 0
        self.tried: list[tuple] = []

    def _reset(self):
        self.states = [ThieleState(self.p) for _ in range(self.n_funcs)]

    @property
    def done(self) -> bool:
        return self.accepted is not None

    def request(self) -> Optional[ProbeRequest]:
        if self.done:
            return None
        return ProbeRequest((1,) * self.m, 1, self.current)

    def feed(self, req: ProbeRequest, ts, fss: Sequence[Sequence[int]]) -> None:
        """``fss[j]`` holds the probe values of function j."""
        for i, t in enumerate(ts):
            self.probes += 1
            try:
                for st, fs in zip(self.states, fss):
                    if not st.done:
                        thiele_feed(st, int(t), int(fs[i]))
            except (UnluckyZero, SingularSystem):
                self.retries += 1
                if self.retries > RETRY_BUDGET:
                    raise UnluckyZero("retry budget for the shift scan exhausted")
                self._reset()
                return
            if all(st.done for st in self.states):
                break
        if all(st.done for st in self.states):
            self._conclude()

    def _conclude(self):
        degs = [_degrees(*thiele_to_rational(st)) for st in self.states]
        if self.baseline is None:
            self.baseline = degs
        elif degs == self.baseline:
            self.accepted = self.current
            return
        self.tried.append(self.subset)
        sub = next(self._cands)
        if len(sub) == self.n:
            self.accepted = self.full
            self.subset = sub
            return
        self.subset = sub
        self.current = tuple(self.full[i] if i in sub else 0 for i in range(self.n))
        self._reset()


# -------------------------------------------------------------- conveniences


def _drive(engine, black_box: Callable, anchors, p: int, rng: np.random.Generator) -> int:
    probes = 0
    while not engine.done:
        req = engine.request()
        ts = rng.integers(1, p, size=req.count, dtype=np.uint64)
        pts = probe_points(req.order, ts, anchors, req.shift, p)
        fs = [int(black_box([int(x) for x in row])) % p for row in pts]
        probes += len(fs)
        if isinstance(engine, ShiftScanner):
            engine.feed(req, ts, [fs])
        else:
            engine.feed(req, ts, fs)
    return probes


def _wrap_order(black_box: Callable, order: Optional[Sequence[int]]) -> Callable:
    if order is None:
        return black_box

    def wrapped(x):
        z = [0] * len(x)
        for i, v in enumerate(x):
            z[order[i]] = v
        return black_box(z)

    return wrapped


def interpolate_rational(
    black_box: Callable[[list[int]], int],
    n: int,
    p: int,
    shift: Optional[Sequence[int]] = None,
    anchors: Optional[Sequence[int]] = None,
    variable_order: Optional[Sequence[int]] = None,
    seed: int = 0,
    return_engine: bool = False,
):
    """Interpolate a rational black box over Z_p.

    ``variable_order[i]`` names the original variable used as internal
    variable i; the internal first variable is set to one and restored by
    homogeneity.  Without an explicit ``shift`` every variable is shifted by a
    distinct random value.  Returns (canonically normalized function, probes).
    """
    rng = np.random.default_rng(seed)
    if anchors is None:
        anchors = [int(x) for x in rng.integers(2, p, size=n - 1, dtype=np.uint64)]
    if shift is None:
        shift = [int(x) for x in rng.choice(np.arange(1, 1 << 16), size=n, replace=False)]
    bb = _wrap_order(black_box, variable_order)
    eng = RationalInterpolator(n, p, anchors, shift)
    probes = _drive(eng, bb, anchors, p, rng)
    res = eng.result.normalized()
    if variable_order is not None:
        res = res.permute(variable_order)
    if return_engine:
        return res, probes, eng
    return res, probes


def shift_scan(
    black_box: Callable[[list[int]], int],
    n: int,
    p: int,
    anchors: Optional[Sequence[int]] = None,
    seed: int = 0,
) -> tuple[tuple[int, ...], int]:
    """Return (shift, probes) with as few shifted variables as possible."""
    rng = np.random.default_rng(seed)
    if anchors is None:
        anchors = [int(x) for x in rng.integers(2, p, size=n - 1, dtype=np.uint64)]
    full = [int(x) for x in rng.choice(np.arange(1, 1 << 16), size=n, replace=False)]
    sc = ShiftScanner(n, p, full)
    probes = _drive(sc, black_box, anchors, p, rng)
    return sc.accepted, probes
