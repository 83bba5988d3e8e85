"""Sparse polynomials, Newton interpolation and Zippel's algorithm over Z_p."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels as K
from .ffield import ff_inv

__all__ = [
    "DenseNewtonResult",
    "NewtonState",
    "SingularSystem",
    "SparsePolynomial",
    "ZippelOptions",
    "ZippelState",
    "colex_key",
    "dense_newton_interpolate",
    "newton_feed",
    "newton_success_bound",
    "newton_to_canonical",
    "probability_bounds",
    "solve_shifted_vandermonde",
    "zippel_failure_bound",
    "zippel_interpolate",
]


class SingularSystem(ArithmeticError):
    """A linear system over Z_p turned out singular (unlucky points)."""


def colex_key(alpha: Sequence[int]):
    """Sort key: total degree first, then colexicographic (last position decides)."""
    return (sum(alpha), tuple(reversed(alpha)))


# ------------------------------------------------------------------ polynomials

_TERM_RE = re.compile(r"\s*([+-]?)\s*([^+-]+)")


def _fmt_coef(c) -> str:
    if isinstance(c, Fraction) and c.denominator != 1:
        return f"{c.numerator}/{c.denominator}"
    return str(int(c))


def _pack(a: Sequence[int], bits: int) -> int:
    k = 0
    for x in reversed(a):
        k = (k << bits) | x
    return k


def _unpack(k: int, bits: int, n: int) -> tuple:
    mask = (1 << bits) - 1
    out = []
    for _ in range(n):
        out.append(k & mask)
        k >>= bits
    return tuple(out)


class SparsePolynomial:
    """Map from exponent tuples to nonzero coefficients.

    Coefficients are Python ints (optionally reduced modulo ``p``) or
    :class:`Fraction`.  When ``p`` is set, arithmetic reduces modulo ``p``.
    """

    __slots__ = ("n", "terms", "p")

    def __init__(self, n: int, terms: Optional[dict] = None, p: Optional[int] = None):
        self.n = n
        self.p = p
        self.terms: dict[tuple[int, ...], object] = {}
        if terms:
            for a, c in terms.items():
                a = tuple(a)
                if len(a) != n:
                    raise ValueError(f"exponent {a} has length != {n}")
                if p is not None:
                    c = int(c) % p
                if c != 0:
                    self.terms[a] = c

    # construction helpers
    @classmethod
    def constant(cls, n: int, c, p: Optional[int] = None) -> "SparsePolynomial":
        return cls(n, {(0,) * n: c}, p)

    @classmethod
    def variable(cls, n: int, i: int, p: Optional[int] = None) -> "SparsePolynomial":
        a = [0] * n
        a[i] = 1
        return cls(n, {tuple(a): 1}, p)

    def copy(self) -> "SparsePolynomial":
        out = SparsePolynomial(self.n, None, self.p)
        out.terms = dict(self.terms)
        return out

    # queries
    def __len__(self) -> int:
        return len(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=-1)

    def min_degree(self) -> int:
        return min((sum(a) for a in self.terms), default=-1)

    def sorted_terms(self) -> list:
        return sorted(self.terms.items(), key=lambda kv: colex_key(kv[0]))

    def homogeneous_part(self, d: int) -> "SparsePolynomial":
        out = SparsePolynomial(self.n, None, self.p)
        out.terms = {a: c for a, c in self.terms.items() if sum(a) == d}
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparsePolynomial):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    # arithmetic
    def _norm(self, c):
        return c % self.p if self.p is not None else c

    def _put(self, terms: dict, a, c):
        c = terms.get(a, 0) + c
        if self.p is not None:
            c %= self.p
        if c == 0:
            terms.pop(a, None)
        else:
            terms[a] = c

    def __add__(self, other: "SparsePolynomial") -> "SparsePolynomial":
        out = self.copy()
        for a, c in other.terms.items():
            out._put(out.terms, a, c)
        return out

    def __neg__(self) -> "SparsePolynomial":
        out = SparsePolynomial(self.n, None, self.p)
        out.terms = {a: self._norm(-c) for a, c in self.terms.items()}
        return out

    def __sub__(self, other: "SparsePolynomial") -> "SparsePolynomial":
        return self + (-other)

    def scale(self, c) -> "SparsePolynomial":
        out = SparsePolynomial(self.n, None, self.p)
        for a, v in self.terms.items():
            w = self._norm(v * c)
            if w != 0:
                out.terms[a] = w
        return out

    def __mul__(self, other):
        if not isinstance(other, SparsePolynomial):
            return self.scale(other)
        p = self.p
        # pack exponent vectors into integers so that adding them is one add
        top = max((max(a, default=0) for a in self.terms), default=0)
        top += max((max(b, default=0) for b in other.terms), default=0)
        bits = max(top.bit_length(), 1)
        mine = [(_pack(a, bits), c) for a, c in self.terms.items()]
        theirs = [(_pack(b, bits), d) for b, d in other.terms.items()]
        out: dict = {}
        get = out.get
        for ka, c in mine:
            for kb, d in theirs:
                k = ka + kb
                out[k] = get(k, 0) + c * d
        res = SparsePolynomial(self.n, None, p)
        for k, v in out.items():
            if p is not None:
                v %= p
            if v != 0:
                res.terms[_unpack(k, bits, self.n)] = v
        return res

    __rmul__ = scale

    def __pow__(self, e: int) -> "SparsePolynomial":
        if e < 0:
            raise ValueError("negative exponent")
        result = SparsePolynomial.constant(self.n, 1, self.p)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def evaluate(self, point: Sequence[int]):
        """Evaluate at ``point`` (modulo p when the polynomial carries one)."""
        p = self.p
        acc = 0
        for a, c in self.terms.items():
            term = c
            for x, k in zip(point, a):
                if k:
                    term = term * (pow(x, k, p) if p is not None else x**k)
                    if p is not None:
                        term %= p
            acc += term
        return acc % p if p is not None else acc

    def reduce(self, p: int) -> "SparsePolynomial":
        """Image modulo p of a polynomial with rational coefficients."""
        out = {}
        for a, c in self.terms.items():
            if isinstance(c, Fraction):
                v = c.numerator * ff_inv(c.denominator % p, p) % p
            else:
                v = int(c) % p
            if v:
                out[a] = v
        res = SparsePolynomial(self.n, None, p)
        res.terms = out
        return res

    def permute(self, perm: Sequence[int]) -> "SparsePolynomial":
        """Return the polynomial with exponent position i moved to perm[i]."""
        out = SparsePolynomial(self.n, None, self.p)
        for a, c in self.terms.items():
            b = [0] * self.n
            for i, e in enumerate(a):
                b[perm[i]] = e
            out.terms[tuple(b)] = c
        return out

    # text form
    def to_string(self, names: Optional[Sequence[str]] = None) -> str:
        if names is None:
            names = [f"z{i + 1}" for i in range(self.n)]
        if not self.terms:
            return "0"
        parts = []
        for a, c in self.sorted_terms():
            neg = c < 0
            mag = -c if neg else c
            factors = []
            for name, e in zip(names, a):
                if e == 1:
                    factors.append(name)
                elif e > 1:
                    factors.append(f"{name}^{e}")
            if not factors:
                body = _fmt_coef(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = _fmt_coef(mag) + "*" + "*".join(factors)
            parts.append(("-" if neg else "+") + body)
        s = "".join(parts)
        return s[1:] if s.startswith("+") else s

    __str__ = to_string

    def __repr__(self):
        return f"SparsePolynomial({self.n}, '{self.to_string()}')"

    @classmethod
    def parse(
        cls, text: str, names: Optional[Sequence[str]] = None, n: Optional[int] = None
    ) -> "SparsePolynomial":
        """Parse the canonical rendering produced by :meth:`to_string`."""
        if names is None:
            if n is None:
                raise ValueError("need variable names or a count")
            names = [f"z{i + 1}" for i in range(n)]
        index = {nm: i for i, nm in enumerate(names)}
        nv = len(names)
        out = cls(nv)
        text = text.strip()
        if text == "0":
            return out
        pos = 0
        while pos < len(text):
            m = _TERM_RE.match(text, pos)
            if not m or m.end() == pos:
                raise ValueError(f"cannot parse term at {pos}: {text[pos:]!r}")
            sign = -1 if m.group(1) == "-" else 1
            coef: object = 1
            alpha = [0] * nv
            for fac in m.group(2).strip().split("*"):
                fac = fac.strip()
                if fac in index or "^" in fac:
                    name, _, e = fac.partition("^")
                    if name not in index:
                        raise ValueError(f"unknown variable {name!r}")
                    alpha[index[name]] += int(e) if e else 1
                elif "/" in fac:
                    num, den = fac.split("/")
                    coef = coef * Fraction(int(num), int(den))
                else:
                    coef = coef * int(fac)
            out._put(out.terms, tuple(alpha), sign * coef)
            pos = m.end()
        return out


# ---------------------------------------------------------- univariate Newton


@dataclass
class NewtonState:
    """Incremental univariate Newton interpolation over Z_p.

    ``coefs[i]`` is a_i for the basis prod_{j<i} (z - points[j]).  Once set, a
    coefficient never changes.  ``bound`` is an optional degree bound; with it
    the interpolation stops after bound + 1 points.
    """

    p: int
    eta: int = 1
    bound: Optional[int] = None
    points: list = field(default_factory=list)
    coefs: list = field(default_factory=list)
    zero_run: int = 0
    done: bool = False

    def degree_hint(self) -> int:
        return len(self.coefs) - 1 - self.zero_run


def newton_feed(state: NewtonState, y: int, value: int) -> bool:
    """Add the probe f(y) and return whether the interpolation has finished."""
    if state.done:
        return True
    p = state.p
    a = value % p
    for j, (yj, aj) in enumerate(zip(state.points, state.coefs)):
        diff = (y - yj) % p
        if diff == 0:
            raise SingularSystem("coincident Newton interpolation points")
        a = (a - aj) * ff_inv(diff, p) % p
    state.points.append(y % p)
    state.coefs.append(a)
    state.zero_run = state.zero_run + 1 if a == 0 else 0
    if state.zero_run >= state.eta:
        state.done = True
    elif state.bound is not None and len(state.coefs) >= state.bound + 1:
        state.done = True
    return state.done


def newton_to_canonical(state: NewtonState) -> SparsePolynomial:
    """Expand the Newton form into monomial coefficients."""
    p = state.p
    k = len(state.coefs) - state.zero_run
    acc: list[int] = []
    for i in range(k - 1, -1, -1):
        # acc = acc * (z - y_i) + a_i
        yi = state.points[i]
        new = [0] * (len(acc) + 1)
        for d, c in enumerate(acc):
            new[d + 1] = (new[d + 1] + c) % p
            new[d] = (new[d] - yi * c) % p
        new[0] = (new[0] + state.coefs[i]) % p
        acc = new
    return SparsePolynomial(1, {(d,): c for d, c in enumerate(acc)}, p)


# ------------------------------------------------------------ linear algebra


def solve_shifted_vandermonde(
    v: Sequence[int], probes: Sequence[int], p: int, degrees: Optional[Sequence] = None
) -> list[int]:
    """Solve sum_i c_i v_i**k = probes[k-1] (k = 1..T) in O(T**2).

    ``degrees`` names the monomials behind ``v``; it is only used to report
    which ones collide when the system is singular.
    """
    if len(v) != len(probes):
        raise ValueError("need as many probes as unknowns")
    if not v:
        return []
    ctx = K.mont_context(p)
    vv = np.array([x % p for x in v], dtype=np.uint64)
    pr = np.array([x % p for x in probes], dtype=np.uint64)
    c, ok = K.vandermonde_solve(vv, pr, *ctx)
    if not ok:
        raise SingularSystem(f"repeated or vanishing monomial values for {degrees or v}")
    return [int(x) for x in c]


# ---------------------------------------------------------------------- Zippel


@dataclass
class ZippelOptions:
    temporary_pruning: bool = True
    degree_bound: Optional[int] = None
    eta: int = 1


class ZippelState:
    """Feed-driven Zippel interpolation of a polynomial in m variables.

    Probe points are addressed by order tuples: order ``o`` stands for the
    point (y_1**o_1, ..., y_m**o_m).  At stage s, step j, row k the order is
    (k, ..., k, j, 1, ..., 1) with k repeated s-1 times, so every tuple maps to
    exactly one (stage, step, row).  Call :meth:`needed` for the orders of the
    current step and :meth:`feed` with the values in the same order.
    """

    def __init__(self, anchors: Sequence[int], p: int, options: Optional[ZippelOptions] = None):
        self.p = p
        self.ctx = K.mont_context(p)
        self.m = len(anchors)
        self.y = [int(a) % p for a in anchors]
        self.opt = options or ZippelOptions()
        self.result: Optional[dict] = None
        self.done = False
        self.probes = 0
        if self.m == 0:
            # a constant: one value at the empty order settles it
            self.stage = 0
            return
        self._start_stage(1, [()], [1], None)

    # stage bookkeeping
    def _start_stage(self, s: int, monos: list, vals: list, first_values: Optional[list]):
        """Enter stage s with monomials over the first s-1 variables."""
        self.stage = s
        self.monos = monos
        u = len(monos)
        self.v = np.array(vals, dtype=np.uint64)
        bound = self.opt.degree_bound
        self.limit = np.array(
            [bound - sum(a) + 1 if bound is not None else 1 << 30 for a in monos], dtype=np.int64
        )
        width = 4 if bound is None else max(1, min(bound + 2, 4))
        self.A = np.zeros((u, width), dtype=np.uint64)
        self.counts = np.zeros(u, dtype=np.int64)
        self.finished = np.zeros(u, dtype=bool)
        self.xs = np.zeros(width, dtype=np.uint64)
        self.step = 0
        if first_values is not None:
            self._advance(np.array(first_values, dtype=np.uint64))
        self._settle()

    def _grow(self):
        w = self.A.shape[1] * 2
        A = np.zeros((self.A.shape[0], w), dtype=np.uint64)
        A[:, : self.A.shape[1]] = self.A
        self.A = A
        xs = np.zeros(w, dtype=np.uint64)
        xs[: self.xs.shape[0]] = self.xs
        self.xs = xs

    def _advance(self, vals: np.ndarray):
        """Newton step for the unfinished monomials with their values at z_s = y_s**(step+1)."""
        j = self.step
        if j >= self.A.shape[1]:
            self._grow()
        self.xs[j] = np.uint64(pow(self.y[self.stage - 1], j + 1, self.p))
        idx = np.nonzero(~self.finished)[0]
        sub = np.ascontiguousarray(self.A[idx])
        new = K.newton_extend(sub, j, vals, self.xs, *self.ctx)
        self.A[idx, j] = new
        self.counts[idx] = j + 1
        self.step = j + 1
        zero = new == 0
        self.finished[idx[zero & (self.opt.eta == 1)]] = True
        if self.opt.eta > 1:
            self._eta_check(idx)
        self.finished[idx[self.counts[idx] >= self.limit[idx]]] = True

    def _eta_check(self, idx):
        eta = self.opt.eta
        j = self.step
        if j < eta:
            return
        tail = self.A[idx, j - eta : j]
        self.finished[idx[np.all(tail == 0, axis=1)]] = True

    def _settle(self):
        """Move on to the next stage(s) while the current one is complete."""
        while not self.done and bool(np.all(self.finished)):
            self._finish_stage()

    def _trailing_zeros(self, r: int) -> int:
        c = int(self.counts[r])
        z = 0
        while z < c and self.A[r, c - 1 - z] == 0:
            z += 1
        return z

    def _finish_stage(self):
        s = self.stage
        counts = self.counts.copy()
        for r in range(len(self.monos)):
            counts[r] -= self._trailing_zeros(r)
        canon = K.newton_to_monomial(self.A, counts, self.xs, *self.ctx)
        monos, coefs, vals = [], [], []
        ys = self.y[s - 1]
        p = self.p
        for r, a in enumerate(self.monos):
            for e in range(int(counts[r])):
                c = int(canon[r, e])
                if c:
                    monos.append(a + (e,))
                    coefs.append(c)
                    vals.append(int(self.v[r]) * pow(ys, e, p) % p)
        if s == self.m or not monos:
            pad = self.m - s
            self.result = {a + (0,) * pad: c for a, c in zip(monos, coefs)}
            self.done = True
            return
        # stage s+1 reuses these values as its first Newton point
        self._start_stage(s + 1, monos, vals, coefs)

    # public feed interface
    def _rows(self) -> int:
        if self.opt.temporary_pruning:
            return int(np.count_nonzero(~self.finished))
        return len(self.monos)

    def needed(self) -> list[tuple]:
        """Orders whose values the current step needs (empty once done)."""
        if self.done:
            return []
        if self.m == 0:
            return [()]
        s, j = self.stage, self.step + 1
        tail = (j,) + (1,) * (self.m - s)
        return [(k,) * (s - 1) + tail for k in range(1, self._rows() + 1)]

    def feed(self, values: Sequence[int]) -> bool:
        """Consume values for :meth:`needed` and return whether interpolation is done."""
        if self.done:
            return True
        if self.m == 0:
            v = int(values[0]) % self.p
            self.result = {(): v} if v else {}
            self.probes += 1
            self.done = True
            return True
        rows = self._rows()
        if len(values) != rows:
            raise ValueError(f"expected {rows} values, got {len(values)}")
        p = self.p
        pr = np.array([int(x) % p for x in values], dtype=np.uint64)
        self.probes += rows
        if self.stage == 1:
            self._advance(pr)
            self._settle()
            return self.done
        act = ~self.finished
        if self.opt.temporary_pruning:
            fin = np.nonzero(self.finished)[0]
            if fin.size:
                x = np.uint64(pow(self.y[self.stage - 1], self.step + 1, p))
                w = K.newton_eval(self.A[fin], self.counts[fin], self.xs, x, *self.ctx)
                pr = K.vec_sub(pr, K.power_sums(w, self.v[fin], rows, *self.ctx), self.ctx[0])
            sol, ok = K.vandermonde_solve(self.v[act], pr, *self.ctx)
            if not ok:
                raise SingularSystem("coincident monomial values in Zippel stage")
        else:
            full, ok = K.vandermonde_solve(self.v, pr, *self.ctx)
            if not ok:
                raise SingularSystem("coincident monomial values in Zippel stage")
            sol = full[act]
        self._advance(np.ascontiguousarray(sol))
        self._settle()
        return self.done

    def point(self, order: Sequence[int]) -> list[int]:
        return [pow(y, o, self.p) for y, o in zip(self.y, order)]

    def polynomial(self) -> SparsePolynomial:
        if not self.done:
            raise RuntimeError("interpolation not finished")
        return SparsePolynomial(self.m, self.result, self.p)


def zippel_interpolate(
    black_box: Callable[[list[int]], int],
    n: int,
    anchors: Sequence[int],
    p: int,
    temporary_pruning: bool = True,
    degree_bound: Optional[int] = None,
) -> tuple[SparsePolynomial, int]:
    """Interpolate a polynomial black box in n variables; returns (poly, probes)."""
    if len(anchors) != n:
        raise ValueError("one anchor per variable required")
    st = ZippelState(anchors, p, ZippelOptions(temporary_pruning, degree_bound))
    probes = 0
    while not st.done:
        orders = st.needed()
        vals = [black_box(st.point(o)) for o in orders]
        probes += len(vals)
        st.feed(vals)
    return st.polynomial(), probes


# ------------------------------------------------------- dense reference oracle


@dataclass
class DenseNewtonResult:
    poly: SparsePolynomial
    probes: int


def dense_newton_interpolate(
    black_box: Callable[[list[int]], int],
    n: int,
    p: int,
    bounds: Optional[Sequence[int]] = None,
    points: Optional[Sequence[Sequence[int]]] = None,
    eta: int = 1,
) -> DenseNewtonResult:
    """Recursive dense multivariate Newton interpolation (reference oracle).

    The innermost variable is z_1.  Each level keeps adding points until its
    Newton coefficient (a polynomial in the inner variables) vanishes, or
    until ``bounds[i] + 1`` points when a per-variable degree bound is given.
    Interpolation points default to 1, 2, 3, ... in every variable.
    """
    counter = [0]

    def pts(i: int, k: int) -> int:
        return points[i][k] % p if points is not None else k + 1

    def rec(level: int, fixed: list[int]) -> SparsePolynomial:
        # returns polynomial in z_1..z_{level+1}, padded to n variables
        if level < 0:
            counter[0] += 1
            return SparsePolynomial.constant(n, black_box(list(fixed)), p)
        coefs: list[SparsePolynomial] = []
        ys: list[int] = []
        zero_run = 0
        lim = bounds[level] + 1 if bounds is not None else None
        while True:
            y = pts(level, len(ys))
            val = rec(level - 1, [y] + fixed)
            a = val
            for yj, aj in zip(ys, coefs):
                a = (a - aj).scale(ff_inv((y - yj) % p, p))
            ys.append(y)
            coefs.append(a)
            zero_run = zero_run + 1 if a.is_zero() else 0
            if zero_run >= eta or (lim is not None and len(coefs) >= lim):
                break
        # canonical form: Horner in z_{level+1}
        zvar = SparsePolynomial.variable(n, level, p)
        acc = SparsePolynomial(n, None, p)
        for i in range(len(coefs) - 1, -1, -1):
            acc = acc * (zvar - SparsePolynomial.constant(n, ys[i], p)) + coefs[i]
        return acc

    poly = rec(n - 1, [])
    return DenseNewtonResult(poly, counter[0])


# ------------------------------------------------------------------ bounds


def newton_success_bound(D: int, eta: int, p: int) -> Fraction:
    """Lower bound 1 - (D+1) (D/p)**eta on early-termination success."""
    return 1 - (D + 1) * Fraction(D, p) ** eta


def zippel_failure_bound(n: int, D: int, T: int, p: int) -> Fraction:
    """Upper bound n D**2 T**2 / p on Zippel failure (vacuous when >= 1)."""
    return Fraction(n * D * D * T * T, p)


def probability_bounds(*args) -> Fraction:
    """Dispatch on arity: (D, eta, p) gives the Newton success bound,
    (n, D, T, p) the Zippel failure bound."""
    if len(args) == 3:
        return newton_success_bound(*args)
    if len(args) == 4:
        return zippel_failure_bound(*args)
    raise TypeError("expected (D, eta, p) or (n, D, T, p)")
