import threading
from fractions import Fraction

import numpy as np
import pytest

from ffrecon.driver import (
    BlackBox,
    ReconstructionError,
    ReconstructionJob,
    ReconstructionOptions,
    Reconstructor,
    StateFileError,
    reconstruct,
    state_file_name,
)
from ffrecon.ffield import PRIMES, ff_inv, get_prime
from ffrecon.ratint import RationalInterpolator, probe_points

WORKED = "(3*z1+7*z2)/(z1+z2+4*z1*z2)"


def worked(z, p):
    z1, z2 = z
    return (3 * z1 + 7 * z2) * ff_inv(z1 + z2 + 4 * z1 * z2, p) % p


class Counting(BlackBox):
    """Wraps fn(values, p) and counts every evaluation."""

    def __init__(self, fn, outputs=1):
        self.fn = fn
        self.calls = 0
        self.primes = []
        self.outputs = outputs

    def evaluate(self, values):
        self.calls += 1
        out = self.fn(values, get_prime())
        return out if isinstance(out, list) else [out]

    def prime_changed(self):
        self.primes.append(get_prime())


def test_worked_example_over_q():
    bb = Counting(worked)
    rec = Reconstructor(bb, 2)
    (res,) = rec.run()
    assert str(res) == WORKED
    # one full interpolation, then a single verification probe
    assert len(rec.prime_probes) == 2 and rec.prime_probes[1] == 1
    assert rec.probes == bb.calls == sum(rec.prime_probes)
    assert bb.primes == list(PRIMES[:2])


def test_zero_function_and_multiple_outputs():
    def fn(z, p):
        return [0, worked(z, p), 5 * ff_inv(7, p) % p]

    res = reconstruct(fn, 2)
    assert [str(r) for r in res] == ["(0)/(1)", WORKED, "(5/7)/(1)"]


def test_rational_coefficients_need_several_primes():
    big = Fraction(123456789109898799879870980, 7)

    def fn(z, p):
        c = big.numerator % p * ff_inv(big.denominator, p) % p
        return c * z[0] * ff_inv(1 + z[1], p) % p

    rec = Reconstructor(fn, 2)
    (res,) = rec.run()
    assert res.num.terms == {(1, 0): big}
    assert rec.prime_index >= 3


def test_variable_order_and_threads():
    plain = reconstruct(worked, 2)
    reordered = reconstruct(worked, 2, order=[1, 0])
    threaded = reconstruct(worked, 2, threads=3)
    assert plain == reordered == threaded
    with pytest.raises(ValueError):
        Reconstructor(worked, 2, ReconstructionOptions(order=[0, 0]))


def test_scan_gives_same_result():
    rec = Reconstructor(worked, 2, ReconstructionOptions(scan=True))
    (res,) = rec.run()
    assert str(res) == WORKED
    assert rec.scan_probes > 0 and sum(rec.shift_mask) == 1


def test_safe_mode():
    normal = Reconstructor(worked, 2)
    safe = Reconstructor(worked, 2, ReconstructionOptions(safe=True))
    assert normal.run() == safe.run()
    assert safe.probes >= normal.probes
    # every prime draws fresh anchors
    anchors = [tuple(a) for a in safe.anchor_history]
    assert len(set(anchors)) == len(anchors) >= 2


def test_determinism_under_seed():
    runs = []
    for _ in range(2):
        bb = Counting(lambda z, p: (z[0] * z[1] + 3) * ff_inv(z[2] + 2 * z[0] ** 2, p) % p)
        rec = Reconstructor(bb, 3, ReconstructionOptions(seed=11))
        runs.append((rec.run(), rec.prime_probes, rec.anchor_history))
    assert runs[0] == runs[1]


def test_output_length_drift():
    calls = [0]

    def fn(z, p):
        calls[0] += 1
        v = worked(z, p)
        return [v] if calls[0] < 6 else [v, v]

    with pytest.raises(RuntimeError, match="expected 1"):
        Reconstructor(fn, 2).run()


def test_prime_table_exhaustion():
    big = Fraction(10**80 + 1, 3)

    def fn(z, p):
        return big.numerator % p * ff_inv(big.denominator, p) % p

    with pytest.raises(ReconstructionError, match="exhausted"):
        Reconstructor(fn, 1, ReconstructionOptions(max_primes=2)).run()


# ---------------------------------------------------------------- feed queue


def _record_worked(p=509):
    """Run the worked example once and keep every (request, ts, values)."""
    rng = np.random.default_rng(4)
    anchors = [10]
    eng = RationalInterpolator(2, p, anchors, (4, 1))
    log = []
    while not eng.done:
        req = eng.request()
        ts = rng.integers(1, p, size=req.count, dtype=np.uint64)
        fs = [worked([int(x) for x in row], p) for row in probe_points(req.order, ts, anchors, req.shift, p)]
        log.append((req, ts, fs))
        eng.feed(req, ts, fs)
    return log, eng


def test_feed_everything_then_interpolate_once():
    log, ref = _record_worked()
    assert sum(len(fs) for _, _, fs in log) == 12
    job = ReconstructionJob(0, "fun1", 2)
    job.attach(RationalInterpolator(2, 509, [10], (4, 1)), 509)
    for req, ts, fs in log:
        assert job.feed(509, req, ts, fs)
    assert not job.engine.done
    assert job.interpolate()
    assert job.engine.done and job.engine.result == ref.result


def test_interpolate_empty_queue_and_stale_prime():
    job = ReconstructionJob(0, "fun1", 2)
    eng = RationalInterpolator(2, 509, [10], (4, 1))
    job.attach(eng, 509)
    assert job.interpolate() and eng.probes == 0 and eng.phase == "thiele"
    req = eng.request()
    assert not job.feed(503, req, [3], [1])
    assert len(job._queue) == 0


def test_single_active_interpolate():
    log, _ = _record_worked()
    job = ReconstructionJob(0, "fun1", 2)
    job.attach(RationalInterpolator(2, 509, [10], (4, 1)), 509)
    for item in log:
        job.feed(509, *item)
    gate = threading.Event()
    release = threading.Event()
    real_feed = job.engine.feed

    def slow_feed(*a):
        gate.set()
        release.wait(5)
        real_feed(*a)

    job.engine.feed = slow_feed
    results = []
    t = threading.Thread(target=lambda: results.append(job.interpolate()))
    t.start()
    gate.wait(5)
    assert job.interpolate() is False  # the other call is active
    release.set()
    t.join()
    assert results == [True] and job.engine.done


# -------------------------------------------------------------- persistence


def test_state_file_name():
    assert state_file_name("fun1", 4) == "ff_save/fun1_4.txt"


def _saved_run(tmp_path, fn, n, stop_after=1, **kw):
    full = Reconstructor(fn, n, ReconstructionOptions(**kw))
    want = full.run()
    part = Reconstructor(fn, n, ReconstructionOptions(max_primes=stop_after, **kw))
    part.opt.save_dir = str(tmp_path)
    try:
        part.run()
    except ReconstructionError:
        pass
    return want, full


def test_save_and_resume_worked_example(tmp_path):
    want, full = _saved_run(tmp_path, worked, 2)
    path = tmp_path / "fun1_1.txt"
    assert path.exists()
    text = path.read_text()
    assert text.startswith("ffrecon-state 1\ntag fun1\n") and text.endswith("end\n")
    rec = Reconstructor(worked, 2).resume([str(path)])
    assert rec.run() == want and rec.probes == full.probes


def test_resume_done_job(tmp_path):
    rec = Reconstructor(worked, 2, ReconstructionOptions(save_dir=str(tmp_path)))
    want = rec.run()
    last = state_file_name("fun1", rec.prime_index, str(tmp_path))
    again = Reconstructor(worked, 2).resume([last])
    assert again.run() == want and again.probes == rec.probes


def test_resume_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("ffrecon-state 99\nend\n")
    with pytest.raises(StateFileError):
        Reconstructor(worked, 2).resume([str(bad)])
    Reconstructor(worked, 2, ReconstructionOptions(save_dir=str(tmp_path))).run()
    good = (tmp_path / "fun1_1.txt").read_text()
    (tmp_path / "trunc.txt").write_text(good.rsplit("\n", 3)[0] + "\n")
    with pytest.raises(StateFileError):
        Reconstructor(worked, 2).resume([str(tmp_path / "trunc.txt")])
    with pytest.raises(StateFileError):
        Reconstructor(worked, 3).resume([str(tmp_path / "fun1_1.txt")])


def test_job_state_roundtrip():
    rec = Reconstructor(worked, 2)
    rec.run()
    text = rec.jobs[0].dumps(rec.prime_index, rec.probes, rec.opt)
    job, info = ReconstructionJob.loads(text)
    assert job.dumps(rec.prime_index, rec.probes, rec.opt) == text
    assert info["prime_counter"] == rec.prime_index and info["probes"] == rec.probes
    assert job.result() == rec.jobs[0].result()


@pytest.mark.slow
def test_safe_mode_costs_more_on_f2():
    from ffrecon.cli import run_bench

    normal = run_bench("f2")
    safe = run_bench("f2", safe=True)
    assert normal.verified and safe.verified and safe.function == normal.function
    assert safe.probes >= normal.probes
    # every prime but the verification one is a full interpolation
    assert all(n == safe.prime_probes[0] for n in safe.prime_probes[:-1])
