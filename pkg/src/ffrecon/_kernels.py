"""numba kernels for bulk arithmetic modulo a prime p < 2**63.

Scalars and arrays are plain ``uint64`` residues in standard form at the
boundaries.  Hot loops switch to Montgomery form internally so that every
product costs a single reduction.  Callers pass the context returned by
:func:`mont_context`.
"""
from __future__ import annotations

import numba as nb
import numpy as np
from numba import uint64

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_U0 = np.uint64(0)
_U1 = np.uint64(1)


def mont_context(p: int) -> tuple:
    """Return ``(p, pinv, r2)`` as uint64 scalars for the kernels below."""
    pinv = (-pow(p, -1, 1 << 64)) % (1 << 64)
    r2 = pow(2, 128, p)
    return np.uint64(p), np.uint64(pinv), np.uint64(r2)


@nb.njit(inline="always", cache=True)
def mul128(a, b):
    al = a & _M32
    ah = a >> _S32
    bl = b & _M32
    bh = b >> _S32
    p0 = al * bl
    p1 = al * bh
    p2 = ah * bl
    p3 = ah * bh
    mid = (p0 >> _S32) + (p1 & _M32) + (p2 & _M32)
    hi = p3 + (p1 >> _S32) + (p2 >> _S32) + (mid >> _S32)
    return hi, a * b


@nb.njit(inline="always", cache=True)
def redc(hi, lo, p, pinv):
    m = lo * pinv
    mh, _ = mul128(m, p)
    carry = _U1 if lo != _U0 else _U0
    r = hi + mh + carry
    if r >= p:
        r -= p
    return r


@nb.njit(inline="always", cache=True)
def mmul(a, b, p, pinv):
    """Montgomery product a*b/R mod p."""
    h, l = mul128(a, b)
    return redc(h, l, p, pinv)


@nb.njit(inline="always", cache=True)
def to_mont(a, p, pinv, r2):
    return mmul(a, r2, p, pinv)


@nb.njit(inline="always", cache=True)
def from_mont(a, p, pinv):
    return redc(_U0, a, p, pinv)


@nb.njit(inline="always", cache=True)
def mulmod(a, b, p, pinv, r2):
    """Standard-form product a*b mod p."""
    return mmul(mmul(a, b, p, pinv), r2, p, pinv)


@nb.njit(inline="always", cache=True)
def addmod(a, b, p):
    s = a + b
    if s >= p:
        s -= p
    return s


@nb.njit(inline="always", cache=True)
def submod(a, b, p):
    if a >= b:
        return a - b
    return a + (p - b)


@nb.njit(cache=True)
def invmod(a, p):
    """Inverse of a standard-form residue by the extended Euclidean algorithm; 0 maps to 0."""
    if a == _U0:
        return _U0
    old_r = np.int64(p)
    r = np.int64(a)
    old_t = np.int64(0)
    t = np.int64(1)
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_t, t = t, old_t - q * t
    if old_t < 0:
        old_t += np.int64(p)
    return np.uint64(old_t)


@nb.njit(cache=True)
def powmod(a, e, p, pinv, r2):
    """a**e mod p for standard-form a and non-negative integer e."""
    result = to_mont(_U1, p, pinv, r2)
    base = to_mont(a, p, pinv, r2)
    e = np.uint64(e)
    while e > _U0:
        if e & _U1:
            result = mmul(result, base, p, pinv)
        base = mmul(base, base, p, pinv)
        e >>= _U1
    return from_mont(result, p, pinv)


# ---------------------------------------------------------------- elementwise


@nb.njit(cache=True, nogil=True)
def vec_add(a, b, p):
    p = uint64(p)  # a Python int would be typed int64
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        out[i] = addmod(a[i], b[i], p)
    return out


@nb.njit(cache=True, nogil=True)
def vec_sub(a, b, p):
    p = uint64(p)  # a Python int would be typed int64
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        out[i] = submod(a[i], b[i], p)
    return out


@nb.njit(cache=True, nogil=True)
def vec_mul(a, b, p, pinv, r2):
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        out[i] = mulmod(a[i], b[i], p, pinv, r2)
    return out


@nb.njit(cache=True, nogil=True)
def vec_div(a, b, p, pinv, r2):
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        out[i] = mulmod(a[i], invmod(b[i], p), p, pinv, r2)
    return out


@nb.njit(cache=True, nogil=True)
def vec_pow(a, e, p, pinv, r2):
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        out[i] = powmod(a[i], e, p, pinv, r2)
    return out


@nb.njit(cache=True, nogil=True)
def vec_neg(a, p):
    p = uint64(p)  # a Python int would be typed int64
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        out[i] = _U0 if a[i] == _U0 else p - a[i]
    return out


# ------------------------------------------------------------- linear algebra


@nb.njit(cache=True)
def gauss_solve(A, b, p, pinv, r2):
    """Solve A x = b over Z_p.  Returns (x, ok); ok is False for a singular A."""
    u = A.shape[0]
    M = np.empty((u, u + 1), dtype=np.uint64)
    for i in range(u):
        for j in range(u):
            M[i, j] = to_mont(A[i, j], p, pinv, r2)
        M[i, u] = to_mont(b[i], p, pinv, r2)
    x = np.zeros(u, dtype=np.uint64)
    for col in range(u):
        piv = -1
        for r in range(col, u):
            if M[r, col] != _U0:
                piv = r
                break
        if piv < 0:
            return x, False
        if piv != col:
            for c in range(col, u + 1):
                tmp = M[piv, c]
                M[piv, c] = M[col, c]
                M[col, c] = tmp
        inv = to_mont(invmod(from_mont(M[col, col], p, pinv), p), p, pinv, r2)
        for c in range(col, u + 1):
            M[col, c] = mmul(M[col, c], inv, p, pinv)
        for r in range(col + 1, u):
            f = M[r, col]
            if f != _U0:
                for c in range(col, u + 1):
                    M[r, c] = submod(M[r, c], mmul(f, M[col, c], p, pinv), p)
    for i in range(u - 1, -1, -1):
        s = M[i, u]
        for c in range(i + 1, u):
            s = submod(s, mmul(M[i, c], x[c], p, pinv), p)
        x[i] = s
    for i in range(u):
        x[i] = from_mont(x[i], p, pinv)
    return x, True


@nb.njit(cache=True)
def vandermonde_solve(v, probes, p, pinv, r2):
    """Solve sum_i c_i v_i**k = probes[k-1] for k = 1..T (shifted transposed Vandermonde).

    Uses the master polynomial prod (z - v_m) and one synthetic division per
    row, O(T**2) time and O(T) space.  Returns (c, ok); ok is False when two
    v_i coincide or some v_i vanishes.
    """
    T = v.shape[0]
    c = np.zeros(T, dtype=np.uint64)
    vm = np.empty(T, dtype=np.uint64)
    pm = np.empty(T, dtype=np.uint64)
    for i in range(T):
        if v[i] == _U0:
            return c, False
        vm[i] = to_mont(v[i], p, pinv, r2)
        pm[i] = to_mont(probes[i], p, pinv, r2)
    if T == 1:
        c[0] = mulmod(probes[0], invmod(v[0], p), p, pinv, r2)
        return c, True
    # master polynomial d_0 + d_1 z + ... + d_T z^T, monic
    d = np.zeros(T + 1, dtype=np.uint64)
    d[0] = _U0 if vm[0] == _U0 else p - vm[0]
    d[1] = to_mont(_U1, p, pinv, r2)
    for i in range(1, T):
        # multiply by (z - v_i)
        d[i + 1] = d[i]
        for k in range(i, 0, -1):
            d[k] = submod(d[k - 1], mmul(vm[i], d[k], p, pinv), p)
        d[0] = submod(_U0, mmul(vm[i], d[0], p, pinv), p)
    for i in range(T):
        # B(z)/(z - v_i) = sum_k q_k z^k by synthetic division from the top;
        # s accumulates sum_k q_k probes[k] and t the derivative value B'(v_i)
        b = to_mont(_U1, p, pinv, r2)
        s = pm[T - 1]
        t = b
        for j in range(T - 1, 0, -1):
            b = addmod(d[j], mmul(vm[i], b, p, pinv), p)
            s = addmod(s, mmul(pm[j - 1], b, p, pinv), p)
            t = addmod(mmul(vm[i], t, p, pinv), b, p)
        den = mmul(t, vm[i], p, pinv)
        if den == _U0:
            return c, False
        inv = to_mont(invmod(from_mont(den, p, pinv), p), p, pinv, r2)
        c[i] = from_mont(mmul(s, inv, p, pinv), p, pinv)
    return c, True


# ---------------------------------------------------------- polynomial helpers


@nb.njit(cache=True)
def poly_eval_multi(exps, coefs, bases, p, pinv, r2):
    """Evaluate sum_t coefs[t] * prod_i bases[o, i]**exps[t, i] for every row o of bases."""
    T = exps.shape[0]
    m = exps.shape[1]
    n_pts = bases.shape[0]
    out = np.zeros(n_pts, dtype=np.uint64)
    if T == 0:
        return out
    maxe = 0
    for t in range(T):
        for i in range(m):
            if exps[t, i] > maxe:
                maxe = exps[t, i]
    cm = np.empty(T, dtype=np.uint64)
    for t in range(T):
        cm[t] = to_mont(coefs[t], p, pinv, r2)
    table = np.empty((m, maxe + 1), dtype=np.uint64)
    one = to_mont(_U1, p, pinv, r2)
    for o in range(n_pts):
        for i in range(m):
            table[i, 0] = one
            bm = to_mont(bases[o, i], p, pinv, r2)
            for e in range(1, maxe + 1):
                table[i, e] = mmul(table[i, e - 1], bm, p, pinv)
        acc = _U0
        for t in range(T):
            term = cm[t]
            for i in range(m):
                e = exps[t, i]
                if e != 0:
                    term = mmul(term, table[i, e], p, pinv)
            acc = addmod(acc, term, p)
        out[o] = from_mont(acc, p, pinv)
    return out


@nb.njit(cache=True)
def monomial_values(exps, base, p, pinv, r2):
    """prod_i base[i]**exps[t, i] for every row t of exps."""
    T = exps.shape[0]
    m = exps.shape[1]
    out = np.empty(T, dtype=np.uint64)
    maxe = 0
    for t in range(T):
        for i in range(m):
            if exps[t, i] > maxe:
                maxe = exps[t, i]
    table = np.empty((m, maxe + 1), dtype=np.uint64)
    one = to_mont(_U1, p, pinv, r2)
    for i in range(m):
        table[i, 0] = one
        bm = to_mont(base[i], p, pinv, r2)
        for e in range(1, maxe + 1):
            table[i, e] = mmul(table[i, e - 1], bm, p, pinv)
    for t in range(T):
        term = one
        for i in range(m):
            e = exps[t, i]
            if e != 0:
                term = mmul(term, table[i, e], p, pinv)
        out[t] = from_mont(term, p, pinv)
    return out


@nb.njit(cache=True)
def power_sums(w, v, T, p, pinv, r2):
    """out[k-1] = sum_b w_b * v_b**k for k = 1..T."""
    out = np.zeros(T, dtype=np.uint64)
    nb_ = w.shape[0]
    for b in range(nb_):
        vm = to_mont(v[b], p, pinv, r2)
        cur = to_mont(w[b], p, pinv, r2)
        for k in range(T):
            cur = mmul(cur, vm, p, pinv)
            out[k] = addmod(out[k], cur, p)
    for k in range(T):
        out[k] = from_mont(out[k], p, pinv)
    return out


@nb.njit(cache=True)
def newton_extend(A, count, vals, xs, p, pinv, r2):
    """Add one point to each row's Newton interpolation.

    A[r, :count] holds the Newton coefficients of row r for points xs[:count];
    vals[r] is the value at xs[count].  Writes A[r, count] and returns it.
    """
    rows = A.shape[0]
    k = count
    out = np.empty(rows, dtype=np.uint64)
    invs = np.empty(k, dtype=np.uint64)
    for j in range(k):
        invs[j] = to_mont(invmod(submod(xs[k], xs[j], p), p), p, pinv, r2)
    for r in range(rows):
        a = to_mont(vals[r], p, pinv, r2)
        for j in range(k):
            a = mmul(submod(a, to_mont(A[r, j], p, pinv, r2), p), invs[j], p, pinv)
        val = from_mont(a, p, pinv)
        A[r, k] = val
        out[r] = val
    return out


@nb.njit(cache=True)
def newton_eval(A, counts, xs, x, p, pinv, r2):
    """Evaluate each row's Newton polynomial (counts[r] coefficients) at x."""
    rows = A.shape[0]
    out = np.empty(rows, dtype=np.uint64)
    for r in range(rows):
        c = counts[r]
        if c == 0:
            out[r] = _U0
            continue
        acc = A[r, c - 1]
        for i in range(c - 2, -1, -1):
            acc = addmod(mulmod(acc, submod(x, xs[i], p), p, pinv, r2), A[r, i], p)
        out[r] = acc
    return out


@nb.njit(cache=True)
def newton_to_monomial(A, counts, xs, p, pinv, r2):
    """Expand each row's Newton form into monomial coefficients (row-wise)."""
    rows = A.shape[0]
    width = A.shape[1]
    out = np.zeros((rows, width), dtype=np.uint64)
    for r in range(rows):
        c = counts[r]
        if c == 0:
            continue
        # Horner in polynomial arithmetic: acc = acc*(z - xs[i]) + a_i
        acc = np.zeros(c, dtype=np.uint64)
        acc[0] = A[r, c - 1]
        deg = 0
        for i in range(c - 2, -1, -1):
            xi = xs[i]
            # multiply acc (degree deg) by (z - xi)
            acc[deg + 1] = acc[deg]
            for k in range(deg, 0, -1):
                acc[k] = submod(acc[k - 1], mulmod(xi, acc[k], p, pinv, r2), p)
            acc[0] = submod(_U0, mulmod(xi, acc[0], p, pinv, r2), p)
            deg += 1
            acc[0] = addmod(acc[0], A[r, i], p)
        for k in range(c):
            out[r, k] = acc[k]
    return out


@nb.njit(cache=True)
def build_t_system(ts, fs, num_deg, den_deg, p, pinv, r2):
    """Matrix of the homogenized univariate system for the unknown degrees.

    Row m holds t_m**k for unknown numerator degrees and -f_m t_m**k for
    unknown denominator degrees.
    """
    u = ts.shape[0]
    nn = num_deg.shape[0]
    nd = den_deg.shape[0]
    maxd = 0
    for i in range(nn):
        maxd = max(maxd, num_deg[i])
    for i in range(nd):
        maxd = max(maxd, den_deg[i])
    pw = np.empty(maxd + 1, dtype=np.uint64)
    A = np.empty((u, nn + nd), dtype=np.uint64)
    for m in range(u):
        pw[0] = _U1
        for k in range(1, maxd + 1):
            pw[k] = mulmod(pw[k - 1], ts[m], p, pinv, r2)
        for i in range(nn):
            A[m, i] = pw[num_deg[i]]
        for i in range(nd):
            v = mulmod(fs[m], pw[den_deg[i]], p, pinv, r2)
            A[m, nn + i] = submod(_U0, v, p)
    return A


@nb.njit(cache=True)
def horner_many(coefs, ts, p, pinv, r2):
    """Evaluate the univariate polynomial coefs[0] + coefs[1] t + ... at every t."""
    out = np.empty(ts.shape[0], dtype=np.uint64)
    d = coefs.shape[0]
    for m in range(ts.shape[0]):
        acc = _U0
        for k in range(d - 1, -1, -1):
            acc = addmod(mulmod(acc, ts[m], p, pinv, r2), coefs[k], p)
        out[m] = acc
    return out


@nb.njit(cache=True)
def poly_eval_grouped(exps, coefs, groups, ngroups, base, p, pinv, r2):
    """Per-group sums of coefs[t] * prod_i base[i]**exps[t, i] at a single point."""
    T = exps.shape[0]
    m = exps.shape[1]
    out = np.zeros(ngroups, dtype=np.uint64)
    if T == 0:
        return out
    maxe = 0
    for t in range(T):
        for i in range(m):
            if exps[t, i] > maxe:
                maxe = exps[t, i]
    table = np.empty((m, maxe + 1), dtype=np.uint64)
    one = to_mont(_U1, p, pinv, r2)
    for i in range(m):
        table[i, 0] = one
        bm = to_mont(base[i], p, pinv, r2)
        for e in range(1, maxe + 1):
            table[i, e] = mmul(table[i, e - 1], bm, p, pinv)
    for t in range(T):
        # standard-form coefficient times Montgomery powers stays in standard form
        term = coefs[t]
        for i in range(m):
            e = exps[t, i]
            if e != 0:
                term = mmul(term, table[i, e], p, pinv)
        g = groups[t]
        out[g] = addmod(out[g], term, p)
    return out


@nb.njit(cache=True)
def advance_powers(cur, vm, groups, ngroups, p, pinv):
    """cur[i] *= v[i] in place (vm holds v in Montgomery form), then per-group sums."""
    out = np.zeros(ngroups, dtype=np.uint64)
    for i in range(cur.shape[0]):
        c = mmul(cur[i], vm[i], p, pinv)
        cur[i] = c
        g = groups[i]
        out[g] = addmod(out[g], c, p)
    return out



@nb.njit(cache=True)
def interpolate_univariate(xs, ys, p, pinv, r2):
    """Monomial coefficients of the polynomial through (xs[i], ys[i]); xs distinct."""
    d = xs.shape[0]
    c = ys.copy()
    # divided differences
    for j in range(1, d):
        for i in range(d - 1, j - 1, -1):
            num = submod(c[i], c[i - 1], p)
            den = submod(xs[i], xs[i - j], p)
            c[i] = mulmod(num, invmod(den, p), p, pinv, r2)
    # Newton form to monomial form, Horner from the top
    out = np.zeros(d, dtype=np.uint64)
    out[0] = c[d - 1]
    deg = 0
    for i in range(d - 2, -1, -1):
        # out <- out * (x - xs[i]) + c[i]
        deg += 1
        for k in range(deg, 0, -1):
            out[k] = submod(out[k - 1], mulmod(out[k], xs[i], p, pinv, r2), p)
        out[0] = addmod(submod(_U0, mulmod(out[0], xs[i], p, pinv, r2), p), c[i], p)
    return out
