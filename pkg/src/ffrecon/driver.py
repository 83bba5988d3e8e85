"""Reconstruction of rational functions over Q from a modular black box.

The first prime runs a complete interpolation.  Later primes only solve for
coefficients that have not been accepted yet, using the monomial support
from the first prime.  Coefficients are combined with the CRT and promoted
to rationals by racing Wang's algorithm against MQRR.  Every job finishes
with a probe of the rational result in a prime never used to interpolate it.
"""
from __future__ import annotations

import json
import logging
import os
import threading
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import IntEnum
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels as K
from .ffield import ff_inv, get_prime, nth_prime, PRIMES, set_prime
from .polyint import SingularSystem, SparsePolynomial, colex_key
from .ratint import (
    DEN,
    NUM,
    RETRY_BUDGET,
    ProbeRequest,
    RationalFunction,
    RationalInterpolator,
    ShiftScanner,
    build_univariate_system,
    probe_points,
)
from .ratrec import crt_pair, race

__all__ = [
    "BlackBox",
    "FunctionBlackBox",
    "LaterPrimeInterpolator",
    "ReconstructionError",
    "ReconstructionJob",
    "ReconstructionOptions",
    "Reconstructor",
    "StateFileError",
    "Verbosity",
    "as_black_box",
    "reconstruct",
    "state_file_name",
]

log = logging.getLogger("ffrecon")

STATE_VERSION = 1


class Verbosity(IntEnum):
    SILENT = 0
    IMPORTANT = 1
    CHATTY = 2


class ReconstructionError(RuntimeError):
    """The prime table ran out before every coefficient was accepted."""


class StateFileError(ValueError):
    """A state file is malformed or written by another format version."""


# ------------------------------------------------------------------ black box


class BlackBox:
    """Base class for probe providers.

    ``evaluate`` receives n residues modulo the ambient prime
    (:func:`ffrecon.ffield.get_prime`) and returns one residue per target
    function, always in the same order.  ``evaluate_batch`` may be overridden
    for vectorized evaluation of a (rows, n) uint64 array.  ``prime_changed``
    is called after every switch of the ambient prime.
    """

    def evaluate(self, values: Sequence[int]) -> Sequence[int]:
        raise NotImplementedError

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        rows = [[int(x) for x in self.evaluate([int(v) for v in row])] for row in points]
        return np.array(rows, dtype=np.uint64).reshape(len(rows), -1)

    def prime_changed(self) -> None:
        pass


class FunctionBlackBox(BlackBox):
    """Adapter for a plain callable ``fn(values, p)`` returning a residue or a list."""

    def __init__(self, fn: Callable):
        self.fn = fn

    def evaluate(self, values):
        out = self.fn(values, get_prime())
        if isinstance(out, (list, tuple, np.ndarray)):
            return [int(x) for x in out]
        return [int(out)]


def as_black_box(obj) -> BlackBox:
    if isinstance(obj, BlackBox):
        return obj
    if hasattr(obj, "evaluate"):
        return obj
    if callable(obj):
        return FunctionBlackBox(obj)
    raise TypeError("black box must be a BlackBox or a callable fn(values, p)")


# -------------------------------------------------------------------- options


@dataclass
class ReconstructionOptions:
    threads: int = 1
    scan: bool = False
    safe: bool = False
    #: order[i] is the original variable used as internal variable i
    order: Optional[Sequence[int]] = None
    seed: int = 0
    tags: Optional[Sequence[str]] = None
    save_dir: Optional[str] = None
    verbosity: Verbosity = Verbosity.SILENT
    max_primes: int = len(PRIMES)
    c: int = 10
    #: free-form data written into state files (the CLI stores its expression)
    meta: dict = field(default_factory=dict)


def state_file_name(tag: str, prime_counter: int, directory: str = "ff_save") -> str:
    return os.path.join(directory, f"{tag}_{prime_counter}.txt")


# ------------------------------------------------------------- later primes


class LaterPrimeInterpolator:
    """Solve for the unknown coefficients of a known support in a new prime.

    ``degrees`` maps (side, k) to (exponent array of shape (T, n), known
    values, known mask).  At order r the probes lie on t * (1, y_2**r, ...),
    every t-degree that still has at least r unknown coefficients enters the
    univariate system, and a degree with |U| unknowns is recovered from its
    first |U| values by a shifted Vandermonde solve.
    """

    def __init__(self, n: int, p: int, anchors: Sequence[int], degrees: dict):
        self.n = n
        self.m = n - 1
        self.p = p
        self.ctx = K.mont_context(p)
        self.y = np.array([int(a) % p for a in anchors], dtype=np.uint64)
        self.keys = list(degrees)
        self.exps = {}
        self.vvals = {}
        self.unknown = {}
        self.samples = {key: [] for key in self.keys}
        self.solution: dict = {}
        cur, vm, grp = [], [], []
        for g, key in enumerate(self.keys):
            exps, vals, mask = degrees[key]
            exps = np.ascontiguousarray(exps, dtype=np.int64)
            v = K.monomial_values(np.ascontiguousarray(exps[:, 1:]), self.y, *self.ctx)
            self.exps[key] = exps
            self.vvals[key] = v
            unk = np.nonzero(~mask)[0]
            self.unknown[key] = unk
            kn = np.nonzero(mask)[0]
            cur.append(np.asarray(vals, dtype=np.uint64)[kn])
            vm.append(v[kn])
            grp.append(np.full(kn.size, g, dtype=np.int64))
        self._cur = np.concatenate(cur) if cur else np.zeros(0, dtype=np.uint64)
        self._vm = self._to_mont(np.concatenate(vm) if vm else np.zeros(0, dtype=np.uint64))
        self._grp = np.concatenate(grp) if grp else np.zeros(0, dtype=np.int64)
        self.order = 0
        self.values = np.zeros(len(self.keys), dtype=np.uint64)
        self.retries = 0
        self.probes = 0
        self._step()
        self._check_done()

    def _to_mont(self, v: np.ndarray) -> np.ndarray:
        # Montgomery form is v * 2**64 mod p
        r = np.uint64((1 << 64) % self.p)
        return K.vec_mul(v, np.full(v.shape, r, dtype=np.uint64), *self.ctx)

    def _step(self):
        """Advance the known parts to the next order."""
        self.order += 1
        self.values = K.advance_powers(
            self._cur, self._vm, self._grp, max(len(self.keys), 1), self.ctx[0], self.ctx[1]
        )[: len(self.keys)]

    def _active(self) -> list:
        return [
            key for key in self.keys if key not in self.solution and len(self.unknown[key]) >= self.order
        ]

    def _check_done(self):
        for key in self.keys:
            if len(self.unknown[key]) == 0:
                self.solution.setdefault(key, {})

    @property
    def done(self) -> bool:
        return len(self.solution) == len(self.keys)

    def request(self) -> Optional[ProbeRequest]:
        if self.done:
            return None
        return ProbeRequest((self.order,) * self.m, len(self._active()), (0,) * self.n)

    def feed(self, req: ProbeRequest, ts, fs) -> None:
        p = self.p
        active = self._active()
        known = ({}, {})
        for g, key in enumerate(self.keys):
            if key not in active:
                known[key[0]][key[1]] = int(self.values[g])
        num_u = [k for s, k in active if s == NUM]
        den_u = [k for s, k in active if s == DEN]
        try:
            xn, xd = build_univariate_system(ts, fs, num_u, den_u, known[0], known[1], p)
        except SingularSystem:
            self.retries += 1
            if self.retries > RETRY_BUDGET:
                raise
            return
        self.probes += len(active)
        index = {key: g for g, key in enumerate(self.keys)}
        solved = []
        for key in active:
            raw = xn[key[1]] if key[0] == NUM else xd[key[1]]
            self.samples[key].append((raw - int(self.values[index[key]])) % p)
            if len(self.samples[key]) == len(self.unknown[key]):
                solved.append(key)
        for key in solved:
            unk = self.unknown[key]
            v = np.ascontiguousarray(self.vvals[key][unk])
            pr = np.array(self.samples[key], dtype=np.uint64)
            c, ok = K.vandermonde_solve(v, pr, *self.ctx)
            if not ok:
                raise SingularSystem(f"colliding monomial values in degree {key}")
            self.solution[key] = {int(i): int(x) for i, x in zip(unk, c)}
            # fold the solved part into the running sums at the current order
            cur = K.vec_mul(c, K.vec_pow(v, self.order, *self.ctx), *self.ctx)
            self._cur = np.concatenate([self._cur, cur])
            self._vm = np.concatenate([self._vm, self._to_mont(v)])
            self._grp = np.concatenate([self._grp, np.full(v.size, index[key], dtype=np.int64)])
        if not self.done:
            self._step()


# ----------------------------------------------------------------------- jobs


class ReconstructionJob:
    """State of one target function across primes.

    Coefficients are addressed by (side, exponents) in internal variable
    order and carry their own CRT image, so un-accepting a coefficient never
    mixes moduli.
    """

    PHASES = ("scan", "first", "crt", "verify", "done")

    def __init__(self, index: int, tag: str, n: int):
        self.index = index
        self.tag = tag
        self.n = n
        self.phase = "first"
        self.keys: list[tuple[int, tuple]] = []
        self.pos: dict = {}
        self.residue: list[int] = []
        self.modulus: list[int] = []
        self.prev_rr: list[tuple] = []
        self.accepted: list[Optional[Fraction]] = []
        self.norm: tuple = ()
        self.shift_mask: tuple = ()
        self.primes_used: list[int] = []
        self.prime: Optional[int] = None
        self.engine = None
        self.pending_unaccept = False
        self._queue: deque = deque()
        self._lock = threading.Lock()

    # -------------------------------------------------------- feed protocol
    def attach(self, engine, prime: int) -> None:
        self.engine = engine
        self.prime = prime
        self._queue.clear()

    def feed(self, prime: int, req: ProbeRequest, ts, fs) -> bool:
        """Queue probes; returns False when they are discarded."""
        if self.phase == "done" or self.engine is None:
            return False
        if prime != self.prime:
            log.warning("job %s: discarding probes for stale prime %d", self.tag, prime)
            return False
        self._queue.append((req, ts, fs))
        return True

    def interpolate(self) -> bool:
        """Drain the queue into the engine.  Returns immediately (False) when
        another call is already running."""
        if not self._lock.acquire(blocking=False):
            return False
        try:
            while self._queue:
                req, ts, fs = self._queue.popleft()
                if not self.engine.done:
                    self.engine.feed(req, ts, fs)
            return True
        finally:
            self._lock.release()

    # ----------------------------------------------------------- coefficients
    def _add_key(self, key, residue: int, modulus: int):
        self.pos[key] = len(self.keys)
        self.keys.append(key)
        self.residue.append(residue)
        self.modulus.append(modulus)
        self.prev_rr.append((None, None))
        self.accepted.append(None)

    def degrees(self) -> dict:
        """(side, k) -> list of coefficient indices."""
        out: dict = {}
        for i, (side, a) in enumerate(self.keys):
            out.setdefault((side, sum(a)), []).append(i)
        return out

    def absorb(self, values: dict, p: int, c: int) -> None:
        """Combine {coefficient index: residue mod p} into the images and race."""
        for i, val in values.items():
            if self.accepted[i] is not None:
                continue
            prev_img = (self.residue[i], self.modulus[i])
            if self.modulus[i] == 1:
                img = (val % p, p)
                prev_img = None
            else:
                img = crt_pair(prev_img, (val, p))
            self.residue[i], self.modulus[i] = img
            w, q, acc = race(self.prev_rr[i], img, prev_img, c)
            self.prev_rr[i] = (w, q)
            self.accepted[i] = acc
        self.primes_used.append(p)
        if all(a is not None for a in self.accepted):
            self.phase = "verify"

    def unaccept(self) -> None:
        ni = self.norm_index()
        for i in range(len(self.keys)):
            if i != ni:
                self.accepted[i] = None
        self.phase = "crt"

    def norm_index(self) -> int:
        return self.pos[(self.norm[1], self.norm[2])]

    def check_eligible(self) -> bool:
        return all(
            self.accepted[i] is not None or self.prev_rr[i][0] is not None
            for i in range(len(self.keys))
        )

    def guess_values(self) -> list[Fraction]:
        return [
            a if a is not None else self.prev_rr[i][0] for i, a in enumerate(self.accepted)
        ]

    def guess_at(self, point: Sequence[int], p: int) -> Optional[int]:
        """Value of the current guess at an internal-order point, None at a pole."""
        vals = self.guess_values()
        num = den = 0
        base = np.array([int(x) % p for x in point], dtype=np.uint64)
        if not self.keys:
            return None
        exps = np.array([a for _, a in self.keys], dtype=np.int64).reshape(len(self.keys), self.n)
        mono = K.monomial_values(exps, base, *K.mont_context(p))
        for i, (side, _) in enumerate(self.keys):
            g = vals[i]
            if g is None or g.denominator % p == 0:
                return None
            c = g.numerator % p * ff_inv(g.denominator, p) % p * int(mono[i]) % p
            if side == NUM:
                num = (num + c) % p
            else:
                den = (den + c) % p
        if den == 0:
            return None
        return num * ff_inv(den, p) % p

    def result(self) -> RationalFunction:
        num, den = {}, {}
        for (side, a), v in zip(self.keys, self.accepted):
            if v:
                (num if side == NUM else den)[a] = v
        return RationalFunction(SparsePolynomial(self.n, num), SparsePolynomial(self.n, den))

    def later_degrees(self, p: int) -> Optional[dict]:
        """Input for :class:`LaterPrimeInterpolator`, or None when no t-degree
        is fully known (then the prime needs a full shifted interpolation)."""
        out = {}
        full_known = False
        for key, idx in self.degrees().items():
            exps = np.array([self.keys[i][1] for i in idx], dtype=np.int64)
            vals = np.zeros(len(idx), dtype=np.uint64)
            mask = np.zeros(len(idx), dtype=bool)
            for j, i in enumerate(idx):
                a = self.accepted[i]
                if a is not None and a.denominator % p:
                    vals[j] = a.numerator % p * ff_inv(a.denominator, p) % p
                    mask[j] = True
            if mask.all() and vals.any():
                full_known = True
            out[key] = (exps, vals, mask)
        return out if full_known else None

    # ------------------------------------------------------------ first prime
    def absorb_first(self, res: RationalFunction, p: int, c: int, canonical_only: bool) -> None:
        """Pick the storage normalization and record the first images."""
        degs: dict = {}
        for side, poly in ((NUM, res.num), (DEN, res.den)):
            for a in poly.terms:
                degs.setdefault((side, sum(a)), []).append(a)
        single = [key for key, monos in degs.items() if len(monos) == 1]
        if single and not canonical_only:
            side, k = min(single, key=lambda key: (-key[0], key[1]))
            mono = degs[(side, k)][0]
            self.norm = ("single", side, mono)
        else:
            self.norm = ("canonical", DEN, res.normalization_monomial())
        self._seed_images(res, p, c)

    def _scaled_terms(self, res: RationalFunction, p: int) -> Optional[dict]:
        poly = res.num if self.norm[1] == NUM else res.den
        c = poly.terms.get(self.norm[2], 0)
        if c == 0:
            return None
        inv = ff_inv(c, p)
        out = {}
        for side, poly in ((NUM, res.num), (DEN, res.den)):
            for a, v in poly.terms.items():
                out[(side, a)] = v * inv % p
        return out

    def _seed_images(self, res: RationalFunction, p: int, c: int) -> None:
        terms = self._scaled_terms(res, p)
        for key in sorted(terms, key=lambda k: (k[0], colex_key(k[1]))):
            self._add_key(key, 0, 1)
        self.accepted[self.norm_index()] = Fraction(1)
        self.absorb({i: terms[key] for i, key in enumerate(self.keys)}, p, c)
        self.phase = "verify" if self.phase == "verify" else "crt"

    def absorb_full(self, res: RationalFunction, p: int, c: int) -> bool:
        """Images from a complete interpolation in a later prime."""
        terms = self._scaled_terms(res, p)
        if terms is None:
            log.warning("job %s: normalization monomial vanished in prime %d", self.tag, p)
            return False
        prior = 1
        for q in self.primes_used:
            prior *= q
        for key in terms:
            if key not in self.pos:
                # new monomial: it was zero in every earlier prime
                self._add_key(key, 0, prior)
        self.absorb({i: terms.get(key, 0) for i, key in enumerate(self.keys)}, p, c)
        return True

    # ------------------------------------------------------------ persistence
    def dumps(self, counter: int, probes: int, options: ReconstructionOptions) -> str:
        def frac(x):
            return "-" if x is None else str(x)

        lines = [
            f"ffrecon-state {STATE_VERSION}",
            f"tag {self.tag}",
            f"index {self.index}",
            f"prime_counter {counter}",
            f"n {self.n}",
            f"seed {options.seed}",
            f"probes {probes}",
            f"safe {int(options.safe)}",
            f"scan {int(options.scan)}",
            "order " + (" ".join(map(str, options.order)) if options.order is not None else "-"),
            "shift_mask " + " ".join(str(int(b)) for b in self.shift_mask),
            f"norm {self.norm[0]} {self.norm[1]} " + " ".join(map(str, self.norm[2])),
            f"phase {self.phase}",
            "primes " + " ".join(map(str, self.primes_used)),
            "meta " + json.dumps(options.meta, sort_keys=True),
            f"coefficients {len(self.keys)}",
        ]
        for i, (side, a) in enumerate(self.keys):
            w, q = self.prev_rr[i]
            lines.append(
                " ".join(
                    [str(side), ",".join(map(str, a)), str(self.residue[i]), str(self.modulus[i]),
                     frac(self.accepted[i]), frac(w), frac(q)]
                )
            )
        lines.append("end")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> tuple["ReconstructionJob", dict]:
        lines = text.splitlines()
        if not lines or lines[0] != f"ffrecon-state {STATE_VERSION}":
            raise StateFileError("unknown state file version")
        if lines[-1] != "end":
            raise StateFileError("truncated state file")
        head: dict = {}
        it = iter(lines[1:])
        try:
            for line in it:
                key, _, val = line.partition(" ")
                head[key] = val
                if key == "coefficients":
                    break
            job = cls(int(head["index"]), head["tag"], int(head["n"]))
            job.phase = head["phase"]
            if job.phase not in cls.PHASES:
                raise StateFileError(f"unknown phase {job.phase}")
            job.shift_mask = tuple(bool(int(x)) for x in head["shift_mask"].split())
            kind, side, mono = head["norm"].split(" ", 2)
            job.norm = (kind, int(side), tuple(int(x) for x in mono.split()))
            job.primes_used = [int(x) for x in head["primes"].split()]

            def frac(x):
                return None if x == "-" else Fraction(x)

            for _ in range(int(head["coefficients"])):
                side, exps, res, mod, acc, w, q = next(it).split()
                key = (int(side), tuple(int(x) for x in exps.split(",")) if exps else ())
                job._add_key(key, int(res), int(mod))
                i = len(job.keys) - 1
                job.accepted[i] = frac(acc)
                job.prev_rr[i] = (frac(w), frac(q))
            if next(it) != "end":
                raise StateFileError("coefficient count mismatch")
        except (KeyError, ValueError, StopIteration) as exc:
            if isinstance(exc, StateFileError):
                raise
            raise StateFileError(f"malformed state file: {exc}") from exc
        info = {
            "prime_counter": int(head["prime_counter"]),
            "seed": int(head["seed"]),
            "probes": int(head["probes"]),
            "safe": bool(int(head["safe"])),
            "scan": bool(int(head["scan"])),
            "order": None if head["order"] == "-" else [int(x) for x in head["order"].split()],
            "meta": json.loads(head["meta"]),
        }
        return job, info


# ------------------------------------------------------------- orchestration


class _ScanSlot:
    """Adapter feeding one shared shift scanner with every job's column."""

    def __init__(self, scanner: ShiftScanner, cols: list[int]):
        self.scanner = scanner
        self.cols = cols

    @property
    def done(self):
        return self.scanner.done

    def request(self):
        return self.scanner.request()

    def feed(self, req, ts, vals):
        self.scanner.feed(req, ts, [vals[:, c] for c in self.cols])


class _JobSlot:
    def __init__(self, job: ReconstructionJob, prime: int):
        self.job = job
        self.prime = prime

    @property
    def done(self):
        return self.job.engine.done

    def request(self):
        return self.job.engine.request()

    def feed(self, req, ts, vals):
        self.job.feed(self.prime, req, ts, vals[:, self.job.index])
        self.job.interpolate()


class Reconstructor:
    """Reconstruct every output of a black box over Q.

    >>> rec = Reconstructor(lambda z, p: z[0] * pow(z[1], -1, p) % p, 2)
    >>> [str(f) for f in rec.run()]
    ['(z1)/(z2)']
    """

    def __init__(self, black_box, n: int, options: Optional[ReconstructionOptions] = None,
                 n_functions: Optional[int] = None):
        self.bb = as_black_box(black_box)
        self.n = n
        self.opt = options or ReconstructionOptions()
        if self.opt.order is not None and sorted(self.opt.order) != list(range(n)):
            raise ValueError("variable order must be a permutation of range(n)")
        self.n_functions = n_functions
        self.jobs: list[ReconstructionJob] = []
        self.prime_index = 0
        self.probes = 0
        self.prime_probes: list[int] = []
        self.shift_mask: Optional[tuple] = None
        self.scan_probes = 0
        self.anchor_history: list[list[int]] = []  # anchors drawn per prime, for diagnostics
        self._pool: Optional[ThreadPoolExecutor] = None
        self._resumed = False
        self._prefetched = None
        level = {Verbosity.SILENT: logging.WARNING, Verbosity.IMPORTANT: logging.INFO,
                 Verbosity.CHATTY: logging.DEBUG}[Verbosity(self.opt.verbosity)]
        if self.opt.verbosity > Verbosity.SILENT:
            logging.basicConfig(format="%(name)s: %(message)s")
            log.setLevel(level)

    # ------------------------------------------------------------ evaluation
    def _evaluate(self, pts: np.ndarray) -> np.ndarray:
        order = self.opt.order
        if order is not None:
            orig = np.empty_like(pts)
            orig[:, list(order)] = pts
            pts = orig
        chunks = [pts]
        if self._pool is not None and pts.shape[0] > 1:
            chunks = [c for c in np.array_split(pts, self.opt.threads) if c.shape[0]]
            parts = list(self._pool.map(self.bb.evaluate_batch, chunks))
        else:
            parts = [self.bb.evaluate_batch(pts)]
        vals = np.concatenate([np.asarray(x, dtype=np.uint64).reshape(c.shape[0], -1)
                               for x, c in zip(parts, chunks)])
        if self.n_functions is None:
            self.n_functions = vals.shape[1]
        elif vals.shape[1] != self.n_functions:
            raise RuntimeError(
                f"black box returned {vals.shape[1]} values, expected {self.n_functions}"
            )
        self.probes += pts.shape[0]
        return vals

    @staticmethod
    def _draw(rng: np.random.Generator, count: int, p: int) -> np.ndarray:
        return rng.integers(1, p, size=count, dtype=np.uint64)

    def _run_slots(self, slots: list, p: int, anchors, rng) -> None:
        """Serve grouped probe requests until every slot is done."""
        while True:
            groups: dict = {}
            for slot in slots:
                if slot.done:
                    continue
                req = slot.request()
                g = groups.get(req.key)
                if g is None:
                    groups[req.key] = [req.count, req, [(slot, req)]]
                else:
                    g[0] = max(g[0], req.count)
                    g[2].append((slot, req))
            if not groups:
                return
            for count, req, members in groups.values():
                pre = self._prefetched
                if pre is not None and pre[0] == req.key and len(pre[1]) == count:
                    ts, vals = pre[1], pre[2]
                else:
                    ts = self._draw(rng, count, p)
                    vals = self._evaluate(probe_points(req.order, ts, anchors, req.shift, p))
                self._prefetched = None
                for slot, r in members:
                    slot.feed(r, ts, vals)

    # ------------------------------------------------------------------ setup
    def _init_jobs(self, count: int):
        tags = list(self.opt.tags) if self.opt.tags else []
        tags += [f"fun{i + 1}" for i in range(len(tags), count)]
        self.jobs = [ReconstructionJob(i, tags[i], self.n) for i in range(count)]

    def _shift_values(self, rng, p: int) -> list[int]:
        return [int(x) for x in self._draw(rng, self.n, p)]

    def _first_prime(self, p: int, rng) -> None:
        n = self.n
        anchors = [int(x) for x in self._draw(rng, n - 1, p)]
        self.anchor_history.append(anchors)
        full = self._shift_values(rng, p)
        if self.n_functions is None:
            # the first request of either the scan or the interpolation is one
            # probe on the unit ray; evaluate it now to learn the output count
            req = ProbeRequest((1,) * (n - 1), 1, tuple(full))
            ts = self._draw(rng, 1, p)
            vals = self._evaluate(probe_points(req.order, ts, anchors, req.shift, p))
            self._prefetched = (req.key, ts, vals)
        self._init_jobs(self.n_functions)
        shift = full
        if self.opt.scan:
            scanner = ShiftScanner(n, p, full, len(self.jobs))
            before = self.probes
            self._run_slots([_ScanSlot(scanner, list(range(len(self.jobs))))], p, anchors, rng)
            self.scan_probes = self.probes - before
            shift = list(scanner.accepted)
            log.info("shift scan: %s after %d probes", scanner.subset, self.scan_probes)
        self.shift_mask = tuple(bool(s) for s in shift)
        for job in self.jobs:
            job.shift_mask = self.shift_mask
            job.attach(RationalInterpolator(n, p, anchors, shift), p)
        self._run_slots([_JobSlot(job, p) for job in self.jobs], p, anchors, rng)
        for job in self.jobs:
            job.absorb_first(job.engine.result, p, self.opt.c, canonical_only=self.opt.safe)
            job.engine = None

    def _check_point(self, checkers: list, p: int, rng) -> tuple[list, dict]:
        for _ in range(16):
            pt = [int(x) for x in self._draw(rng, self.n, p)]
            guesses = {job.index: job.guess_at(pt, p) for job in checkers}
            if all(g is not None for g in guesses.values()):
                return pt, guesses
        return pt, guesses

    def _later_prime(self, p: int, rng) -> None:
        n = self.n
        anchors = [int(x) for x in self._draw(rng, n - 1, p)]
        self.anchor_history.append(anchors)
        shift_vals = self._shift_values(rng, p)
        active = [j for j in self.jobs if j.phase != "done"]
        checkers = [
            j for j in active
            if j.phase == "verify" or (not self.opt.safe and j.check_eligible())
        ]
        if checkers:
            pt, guesses = self._check_point(checkers, p, rng)
            f = self._evaluate(np.array([pt], dtype=np.uint64))[0]
            for job in checkers:
                ok = guesses[job.index] is not None and guesses[job.index] == int(f[job.index])
                if ok:
                    if job.phase != "verify":
                        for i, g in enumerate(job.guess_values()):
                            job.accepted[i] = g
                    job.phase = "done"
                    log.info("job %s verified in prime %d", job.tag, self.prime_index + 1)
                elif job.phase == "verify":
                    log.info("job %s: verification failed, un-accepting", job.tag)
                    job.unaccept()
        solvers = [j for j in active if j.phase == "crt"]
        slots, full_jobs = [], []
        shift = [v if m else 0 for v, m in zip(shift_vals, self.shift_mask)]
        for job in solvers:
            degs = None if self.opt.safe else job.later_degrees(p)
            if degs is None:
                job.attach(RationalInterpolator(n, p, anchors, shift), p)
                full_jobs.append(job)
            else:
                job.attach(LaterPrimeInterpolator(n, p, anchors, degs), p)
            slots.append(_JobSlot(job, p))
        self._run_slots(slots, p, anchors, rng)
        for job in solvers:
            eng = job.engine
            if job in full_jobs:
                job.absorb_full(eng.result, p, self.opt.c)
            else:
                idx = job.degrees()
                values = {}
                for key, sol in eng.solution.items():
                    for j, val in sol.items():
                        values[idx[key][j]] = val
                job.absorb(values, p, self.opt.c)
            job.engine = None

    # -------------------------------------------------------------- running
    def run(self) -> list[RationalFunction]:
        """Reconstruct all functions; results use the original variable order."""
        if self.opt.threads > 1:
            self._pool = ThreadPoolExecutor(max_workers=self.opt.threads)
        try:
            while not self.jobs or any(j.phase != "done" for j in self.jobs):
                if self.prime_index >= min(self.opt.max_primes, len(PRIMES)):
                    pending = [j.tag for j in self.jobs if j.phase != "done"]
                    raise ReconstructionError(
                        f"prime table exhausted after {self.prime_index} primes; "
                        f"unfinished jobs: {pending}"
                    )
                p = nth_prime(self.prime_index)
                set_prime(p)
                self.bb.prime_changed()
                rng = np.random.default_rng([self.opt.seed, self.prime_index])
                before = self.probes
                if self.prime_index == 0:
                    self._first_prime(p, rng)
                else:
                    self._later_prime(p, rng)
                self.prime_probes.append(self.probes - before)
                log.info("prime %d: %d probes", self.prime_index + 1, self.probes - before)
                self.prime_index += 1
                if self.opt.save_dir is not None:
                    self.save(self.opt.save_dir)
        finally:
            if self._pool is not None:
                self._pool.shutdown()
                self._pool = None
        return self.results()

    def results(self) -> list[RationalFunction]:
        out = []
        for job in self.jobs:
            res = job.result()
            if self.opt.order is not None:
                res = res.permute(self.opt.order)
            out.append(res.normalized())
        return out

    # --------------------------------------------------------- persistence
    def save(self, directory: str = "ff_save") -> list[str]:
        os.makedirs(directory, exist_ok=True)
        paths = []
        for job in self.jobs:
            path = state_file_name(job.tag, self.prime_index, directory)
            with open(path, "w") as fh:
                fh.write(job.dumps(self.prime_index, self.probes, self.opt))
            paths.append(path)
        return paths

    def resume(self, paths: Sequence[str]) -> "Reconstructor":
        """Load saved jobs; :meth:`run` then continues after their last prime."""
        jobs, infos = [], []
        for path in paths:
            with open(path) as fh:
                job, info = ReconstructionJob.loads(fh.read())
            if job.n != self.n:
                raise StateFileError(f"{path}: variable count {job.n} != {self.n}")
            jobs.append(job)
            infos.append(info)
        counters = {i["prime_counter"] for i in infos}
        if len(counters) != 1:
            raise StateFileError("state files come from different primes")
        jobs.sort(key=lambda j: j.index)
        self.jobs = jobs
        self.n_functions = len(jobs)
        self.prime_index = counters.pop()
        self.probes = max(i["probes"] for i in infos)
        self.opt.seed = infos[0]["seed"]
        self.opt.safe = infos[0]["safe"]
        self.opt.scan = infos[0]["scan"]
        self.opt.order = infos[0]["order"]
        self.opt.meta = infos[0]["meta"]
        self.shift_mask = jobs[0].shift_mask
        self._resumed = True
        return self


def reconstruct(black_box, n: int, options: Optional[ReconstructionOptions] = None,
                **kwargs) -> list[RationalFunction]:
    """Convenience wrapper: ``reconstruct(bb, n, scan=True, seed=3)``."""
    opt = options or ReconstructionOptions(**kwargs)
    return Reconstructor(black_box, n, opt).run()
