"""Expression black boxes, benchmark functions and the ``ffrecon`` command."""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .driver import (
    BlackBox,
    ReconstructionError,
    ReconstructionOptions,
    Reconstructor,
    StateFileError,
)
from .ffield import ff_inv, get_prime
from .polyint import SparsePolynomial
from .ratint import RationalFunction

__all__ = [
    "BENCHMARKS",
    "ExpressionBlackBox",
    "ExpressionError",
    "bench_config",
    "evaluate",
    "evaluate_batch",
    "evaluate_exact",
    "exact_check",
    "main",
    "parse",
    "run_bench",
    "to_rational",
]


class ExpressionError(ValueError):
    """Syntax or semantic error in an expression, with the offending position."""

    def __init__(self, msg: str, pos: int = -1):
        super().__init__(f"{msg} at position {pos}" if pos >= 0 else msg)
        self.pos = pos


# AST nodes are tuples:
#   ("num", int) ("var", index) ("neg", a) ("add"|"sub"|"mul"|"div", a, b) ("pow", a, int)
Expr = tuple

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m.group(1):
            out.append(("num", m.group(1), m.start(1)))
        elif m.group(2):
            out.append(("name", m.group(2), m.start(2)))
        elif m.group(3):
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise ExpressionError(f"unexpected character {ch!r}", m.start(3))
            out.append(("op", ch, m.start(3)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.toks = _tokenize(text)
        self.i = 0
        self.index = {name: i for i, name in enumerate(names)}

    def peek(self):
        return self.toks[self.i]

    def take(self, value: Optional[str] = None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            raise ExpressionError(f"expected {value!r}", tok[2])
        self.i += 1
        return tok

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = ("add" if op == "+" else "sub", node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = ("mul" if op == "*" else "div", node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[1] == "-" and self.peek()[0] == "op":
            self.take()
            return ("neg", self.unary())
        if self.peek()[1] == "+" and self.peek()[0] == "op":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            if self.peek()[1] == "-":
                raise ExpressionError("negative exponent", self.peek()[2])
            exp = self.power_exponent()
            return ("pow", base, exp)
        return base

    def power_exponent(self) -> int:
        pos = self.peek()[2]
        node = self.power()
        try:
            val = evaluate_exact(node, [])
        except (IndexError, ZeroDivisionError):
            raise ExpressionError("exponent must be a non-negative integer constant", pos)
        if val.denominator != 1 or val < 0:
            raise ExpressionError("exponent must be a non-negative integer constant", pos)
        return int(val)

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            return ("num", int(val))
        if kind == "name":
            if val not in self.index:
                raise ExpressionError(f"unknown variable {val!r}", pos)
            return ("var", self.index[val])
        if val == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ExpressionError(f"unexpected {val or 'end of input'!r}", pos)


def parse(text: str, names: Sequence[str]) -> Expr:
    """Parse ``text`` with variables ``names`` (index order)."""
    p = _Parser(text, names)
    node = p.expr()
    kind, val, pos = p.peek()
    if kind != "end":
        raise ExpressionError(f"unexpected {val!r}", pos)
    return node


def evaluate(expr: Expr, values: Sequence[int], p: Optional[int] = None) -> int:
    """Value in Z_p; a zero divisor gives 0."""
    p = get_prime() if p is None else p
    kind = expr[0]
    if kind == "num":
        return expr[1] % p
    if kind == "var":
        return int(values[expr[1]]) % p
    if kind == "neg":
        return -evaluate(expr[1], values, p) % p
    if kind == "pow":
        return pow(evaluate(expr[1], values, p), expr[2], p)
    a = evaluate(expr[1], values, p)
    b = evaluate(expr[2], values, p)
    if kind == "add":
        return (a + b) % p
    if kind == "sub":
        return (a - b) % p
    if kind == "mul":
        return a * b % p
    return a * ff_inv(b, p) % p


def evaluate_batch(expr: Expr, points: np.ndarray, p: int) -> np.ndarray:
    """Vectorized :func:`evaluate` over the rows of a (rows, n) uint64 array."""
    ctx = K.mont_context(p)
    pu = ctx[0]
    rows = points.shape[0]

    def rec(node):
        kind = node[0]
        if kind == "num":
            return np.full(rows, node[1] % p, dtype=np.uint64)
        if kind == "var":
            return np.ascontiguousarray(points[:, node[1]] % pu)
        if kind == "neg":
            return K.vec_neg(rec(node[1]), pu)
        if kind == "pow":
            return K.vec_pow(rec(node[1]), node[2], *ctx)
        a, b = rec(node[1]), rec(node[2])
        if kind == "add":
            return K.vec_add(a, b, pu)
        if kind == "sub":
            return K.vec_sub(a, b, pu)
        if kind == "mul":
            return K.vec_mul(a, b, *ctx)
        return K.vec_div(a, b, *ctx)

    return rec(expr)


def evaluate_exact(expr: Expr, values: Sequence) -> Fraction:
    """Exact rational value; raises ZeroDivisionError on a zero divisor."""
    kind = expr[0]
    if kind == "num":
        return Fraction(expr[1])
    if kind == "var":
        return Fraction(values[expr[1]])
    if kind == "neg":
        return -evaluate_exact(expr[1], values)
    if kind == "pow":
        return evaluate_exact(expr[1], values) ** expr[2]
    a = evaluate_exact(expr[1], values)
    b = evaluate_exact(expr[2], values)
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    return a / b


def to_rational(expr: Expr, n: int) -> RationalFunction:
    """Numerator/denominator pair over Q by polynomial arithmetic (no gcd)."""

    def rec(node) -> tuple[SparsePolynomial, SparsePolynomial]:
        kind = node[0]
        # integer coefficients throughout; Fractions only appear when normalizing
        one = SparsePolynomial.constant(n, 1)
        if kind == "num":
            return SparsePolynomial.constant(n, node[1]), one
        if kind == "var":
            return SparsePolynomial.variable(n, node[1]), one
        if kind == "neg":
            a, b = rec(node[1])
            return -a, b
        if kind == "pow":
            a, b = rec(node[1])
            return a ** node[2], b ** node[2]
        an, ad = rec(node[1])
        bn, bd = rec(node[2])
        if kind in ("add", "sub"):
            if ad == bd:
                num = an + bn if kind == "add" else an - bn
                return num, ad
            num = an * bd + bn * ad if kind == "add" else an * bd - bn * ad
            return num, ad * bd
        if kind == "mul":
            return an * bn, ad * bd
        if bn.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        return an * bd, ad * bn

    num, den = rec(expr)
    return RationalFunction(num, den).normalized()


class ExpressionBlackBox(BlackBox):
    """Black box for one or more parsed expressions."""

    def __init__(self, exprs: Sequence[Expr]):
        self.exprs = list(exprs)

    def evaluate(self, values):
        p = get_prime()
        return [evaluate(e, values, p) for e in self.exprs]

    def evaluate_batch(self, points):
        p = get_prime()
        pts = np.ascontiguousarray(points, dtype=np.uint64)
        return np.stack([evaluate_batch(e, pts, p) for e in self.exprs], axis=1)


# -------------------------------------------------------------- benchmarks


def _zs(k: int) -> list[str]:
    return [f"z{i}" for i in range(1, k + 1)]


_F2_BODY = "123456789109898799879870980*((1+z1+z2+z3+z4+z5)^{e}-1)/(z4-z2+z1^10*z2^10*z3^10*z4^10*z5^10)"

BENCHMARKS: dict[str, tuple[str, list[str]]] = {
    "f1": (
        "(" + "+".join(f"z{i}^20" for i in range(1, 21)) + ")/(("
        + "+".join(f"(z1*z2+z3*z4+z5*z6)^{i}" for i in range(1, 6)) + ")*z20^35)",
        _zs(20),
    ),
    "f2": (_F2_BODY.format(e=17), _zs(5)),
    "f3": (_F2_BODY.format(e=20), _zs(5)),
    "f4": ("(z1^100+z2^200+z3^300)/(z1*z2*z3*z4*z5+z1^4*z2^4*z3^4*z4^4*z5^4)", _zs(5)),
}

#: variable orders of the benchmark table, as original variable indices
BENCH_ORDERS = {
    "f1": [19] + list(range(19)),
    "f4": [2, 1, 0, 3, 4],
}


def bench_config(which: str) -> tuple[Expr, list[str]]:
    text, names = BENCHMARKS[which]
    return parse(text, names), names


@dataclass
class BenchReport:
    function: str
    probes: int
    primes: int
    wall_ms: float
    seed: int
    verified: bool
    prime_probes: list


def run_bench(which: str, scan: bool = False, order: Optional[Sequence[int]] = None,
              seed: int = 0, threads: int = 1, safe: bool = False) -> BenchReport:
    """Reconstruct a benchmark function and compare with its exact form."""
    expr, names = bench_config(which)
    opt = ReconstructionOptions(threads=threads, scan=scan, order=order, seed=seed, safe=safe)
    rec = Reconstructor(ExpressionBlackBox([expr]), len(names), opt)
    t0 = time.perf_counter()
    (res,) = rec.run()
    wall = (time.perf_counter() - t0) * 1000
    expected = to_rational(expr, len(names))
    return BenchReport(
        res.to_string(names), rec.probes, rec.prime_index, wall, seed, res == expected,
        list(rec.prime_probes),
    )


# --------------------------------------------------------------------- CLI


def _parse_order(text: Optional[str], names: list[str]) -> Optional[list[int]]:
    if not text:
        return None
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok in names:
            out.append(names.index(tok))
        elif tok.isdigit():
            out.append(int(tok) - 1)
        else:
            raise ExpressionError(f"unknown variable {tok!r} in order")
    if sorted(out) != list(range(len(names))):
        raise ExpressionError("order must list every variable exactly once")
    return out


def _read_exprs(arg: str) -> list[str]:
    if os.path.isfile(arg):
        with open(arg) as fh:
            return [line.strip() for line in fh if line.strip() and not line.startswith("#")]
    return [arg]


def _report(args, functions: list[str], rec: Reconstructor, wall_ms: float, verified: bool):
    if args.json:
        print(json.dumps({
            "function": functions[0] if len(functions) == 1 else functions,
            "probes": rec.probes,
            "primes": rec.prime_index,
            "wall_ms": round(wall_ms, 3),
            "seed": rec.opt.seed,
            "verified": verified,
        }))
    else:
        for f in functions:
            print(f)
        print(f"probes={rec.probes} primes={rec.prime_index} wall_ms={wall_ms:.1f}",
              file=sys.stderr)


def exact_check(exprs: Sequence[Expr], results: Sequence[RationalFunction], n: int,
                points: int = 3, seed: int = 0) -> bool:
    """Compare results with the expressions at random integer points over Q."""
    rng = np.random.default_rng(seed)
    checked = 0
    for _ in range(10 * points):
        z = [int(x) for x in rng.integers(-(10**6), 10**6, size=n)]
        try:
            want = [evaluate_exact(e, z) for e in exprs]
        except ZeroDivisionError:
            continue
        if any(r.den.evaluate(z) == 0 for r in results):
            continue
        if [r.evaluate(z) for r in results] != want:
            return False
        checked += 1
        if checked == points:
            return True
    return checked > 0


def _run(rec: Reconstructor, names: list[str], args, exprs: Sequence[Expr]) -> int:
    t0 = time.perf_counter()
    try:
        res = rec.run()
    except ReconstructionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    wall = (time.perf_counter() - t0) * 1000
    verified = exact_check(exprs, res, len(names), seed=rec.opt.seed)
    _report(args, [r.to_string(names) for r in res], rec, wall, verified)
    if not verified:
        print("error: result disagrees with the input expression", file=sys.stderr)
    return 0 if verified else 1


def _cmd_reconstruct(args) -> int:
    names = [v.strip() for v in args.vars.split(",") if v.strip()]
    texts = _read_exprs(args.expr)
    exprs = [parse(t, names) for t in texts]
    opt = ReconstructionOptions(
        threads=args.threads, scan=args.scan, safe=args.safe, seed=args.seed,
        order=_parse_order(args.order, names),
        tags=[args.tag] if args.tag and len(exprs) == 1 else
        ([f"{args.tag}{i + 1}" for i in range(len(exprs))] if args.tag else None),
        save_dir=args.save_dir,
        meta={"exprs": texts, "vars": names},
    )
    return _run(Reconstructor(ExpressionBlackBox(exprs), len(names), opt), names, args, exprs)


def _cmd_bench(args) -> int:
    _, names = bench_config(args.which)
    order = _parse_order(args.order, names)
    rep = run_bench(args.which, scan=args.scan, order=order, seed=args.seed, threads=args.threads)
    if args.json:
        print(json.dumps({
            "function": rep.function, "probes": rep.probes, "primes": rep.primes,
            "wall_ms": round(rep.wall_ms, 3), "seed": rep.seed, "verified": rep.verified,
        }))
    else:
        print(rep.function if len(rep.function) < 2000 else rep.function[:2000] + "...")
        print(f"probes={rep.probes} primes={rep.primes} per_prime={rep.prime_probes} "
              f"wall_ms={rep.wall_ms:.1f} verified={rep.verified}", file=sys.stderr)
    return 0 if rep.verified else 1


def _cmd_resume(args) -> int:
    from .driver import ReconstructionJob

    files = [f.strip() for f in args.files.split(",") if f.strip()]
    with open(files[0]) as fh:
        _, info = ReconstructionJob.loads(fh.read())
    meta = info["meta"]
    if "exprs" not in meta:
        print("error: state file carries no expression to resume", file=sys.stderr)
        return 2
    names = meta["vars"]
    exprs = [parse(t, names) for t in meta["exprs"]]
    opt = ReconstructionOptions(threads=args.threads, save_dir=args.save_dir)
    rec = Reconstructor(ExpressionBlackBox(exprs), len(names), opt).resume(files)
    return _run(rec, names, args, exprs)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ffrecon", description="Rational function reconstruction over Q")
    sub = ap.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("reconstruct", help="reconstruct expressions given as text or file")
    r.add_argument("--expr", required=True, help="expression, or a file with one per line")
    r.add_argument("--vars", required=True, help="comma-separated variable names")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--scan", action="store_true", help="search for a minimal shift")
    r.add_argument("--safe", action="store_true", help="full interpolation in every prime")
    r.add_argument("--tag", default=None)
    r.add_argument("--order", default=None, help="variable order, e.g. z3,z1,z2")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--save-dir", default=None, help="write state files after each prime")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=_cmd_reconstruct)

    b = sub.add_parser("bench", help="run a built-in benchmark function")
    b.add_argument("which", choices=sorted(BENCHMARKS))
    b.add_argument("--scan", action="store_true")
    b.add_argument("--order", default=None)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--threads", type=int, default=1)
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=_cmd_bench)

    s = sub.add_parser("resume", help="continue from saved state files")
    s.add_argument("--files", required=True, help="comma-separated state files")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--save-dir", default=None)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=_cmd_resume)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ExpressionError, StateFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
