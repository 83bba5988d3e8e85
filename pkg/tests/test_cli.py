import json
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffrecon.cli import (
    BENCHMARKS,
    ExpressionError,
    bench_config,
    evaluate,
    evaluate_batch,
    evaluate_exact,
    exact_check,
    main,
    parse,
    run_bench,
    to_rational,
)
from ffrecon.ffield import PRIMES
from ffrecon.ratint import RationalFunction

from ._oracles import frac_mod

WORKED = "(3*z1+7*z2)/(z1+z2+4*z1*z2)"
BIG = 123456789109898799879870980


def test_parse_worked_example():
    e = parse(WORKED, ["z1", "z2"])
    assert e[0] == "div"
    assert evaluate(e, [1, 10], 509) == 221


def test_big_literal_preserved():
    e = parse(f"{BIG}*(1+z1)", ["z1"])
    assert e[1] == ("num", BIG)
    assert evaluate(("num", BIG), [], 509) == BIG % 509
    assert evaluate_exact(e, [1]) == 2 * BIG


def test_single_variable():
    assert evaluate(parse("z1", ["z1"]), [7], 509) == 7


@pytest.mark.parametrize(
    "text,pos",
    [("z1^-1", 3), ("z1^z2", 3), ("z1 + ", 4), ("3*(z1", 5), ("x1", 0), ("z1 z2", 3), ("2^1.5", 3)],
)
def test_parse_errors(text, pos):
    with pytest.raises(ExpressionError) as err:
        parse(text, ["z1", "z2"])
    assert err.value.pos == pos


def test_precedence():
    names = ["a", "b"]
    assert evaluate_exact(parse("-a^2", names), [3, 0]) == -9
    assert evaluate_exact(parse("2^3^2", names), [0, 0]) == 512
    assert evaluate_exact(parse("a-b-1", names), [5, 2]) == 2
    assert evaluate_exact(parse("a/b/2", names), [8, 2]) == 2
    assert evaluate_exact(parse("a+b*a^2", names), [2, 3]) == 14


def test_division_by_zero_is_zero():
    assert evaluate(parse("1/(z1-z1)", ["z1"]), [3], 509) == 0


def test_to_rational_normalizes():
    r = to_rational(parse("(6*z1)/(2*z1+4*z2)", ["z1", "z2"]), 2)
    assert r.to_string() == "(3*z1)/(z1+2*z2)"


def test_render_parse_fixpoint():
    r = to_rational(parse(WORKED, ["z1", "z2"]), 2)
    text = r.to_string()
    again = RationalFunction.parse(text, ["z1", "z2"])
    assert again == r and again.to_string() == text
    assert to_rational(parse(text, ["z1", "z2"]), 2) == r


@st.composite
def expressions(draw, depth=0):
    names = ["x", "y", "z"]
    if depth >= 3 or draw(st.integers(0, 3)) == 0:
        if draw(st.booleans()):
            return str(draw(st.integers(0, 10**30)))
        return draw(st.sampled_from(names))
    op = draw(st.sampled_from(["+", "-", "*", "/", "^", "neg"]))
    a = draw(expressions(depth=depth + 1))
    if op == "neg":
        return f"-({a})"
    if op == "^":
        return f"({a})^{draw(st.integers(0, 4))}"
    b = draw(expressions(depth=depth + 1))
    return f"({a}){op}({b})"


@settings(max_examples=1000)
@given(expressions(), st.lists(st.integers(-(10**6), 10**6), min_size=3, max_size=3),
       st.sampled_from([509, PRIMES[0], PRIMES[50]]))
def test_evaluator_matches_exact(text, z, p):
    e = parse(text, ["x", "y", "z"])
    try:
        exact = evaluate_exact(e, z)
    except ZeroDivisionError:
        return
    want = frac_mod(exact, p)
    if want is None:
        return
    try:
        got = evaluate(e, [v % p for v in z], p)
    except ZeroDivisionError:
        return
    # an intermediate divisor can vanish mod p even when the exact value exists
    pts = np.array([[v % p for v in z]], dtype=np.uint64)
    batch = int(evaluate_batch(e, pts, p)[0])
    assert batch == got
    if _no_modular_pole(e, z, p):
        assert got == want


def _no_modular_pole(e, z, p):
    kind = e[0]
    if kind in ("num", "var"):
        return True
    if kind in ("neg", "pow"):
        return _no_modular_pole(e[1], z, p)
    if kind == "div" and evaluate_exact(e[2], z).numerator % p == 0:
        return False
    return _no_modular_pole(e[1], z, p) and _no_modular_pole(e[2], z, p)


def test_exact_check():
    e = parse(WORKED, ["z1", "z2"])
    good = to_rational(e, 2)
    bad = RationalFunction.parse("(3*z1+7*z2)/(z1+z2+5*z1*z2)", ["z1", "z2"])
    assert exact_check([e], [good], 2)
    assert not exact_check([e], [bad], 2)


def test_benchmark_expressions_parse():
    for which in BENCHMARKS:
        expr, names = bench_config(which)
        assert len(names) in (5, 20)
    expr, _ = bench_config("f2")
    want = evaluate_exact(expr, [1, 2, 3, 4, 5])
    assert evaluate(expr, [1, 2, 3, 4, 5], 509) == want.numerator * pow(want.denominator, -1, 509) % 509


def test_run_bench_f1_reordered():
    rep = run_bench("f1", scan=True, order=[19] + list(range(19)))
    assert rep.verified and rep.primes == 2
    assert rep.probes == sum(rep.prime_probes)


# ------------------------------------------------------------------ commands


def test_cli_reconstruct(capsys):
    assert main(["reconstruct", "--expr", WORKED, "--vars", "z1,z2"]) == 0
    out, err = capsys.readouterr()
    assert out.strip() == WORKED
    assert "probes=13" in err


def test_cli_json_and_file(tmp_path, capsys):
    f = tmp_path / "exprs.txt"
    f.write_text(f"# two functions\n{WORKED}\nz1^2/(1+z2)\n")
    assert main(["reconstruct", "--expr", str(f), "--vars", "z1,z2", "--json", "--scan", "--threads", "2"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["function"] == [WORKED, "(z1^2)/(1+z2)"]
    assert rep["verified"] is True and set(rep) == {"function", "probes", "primes", "wall_ms", "seed", "verified"}


def test_cli_order_and_errors(capsys):
    assert main(["reconstruct", "--expr", WORKED, "--vars", "z1,z2", "--order", "z2,z1"]) == 0
    assert capsys.readouterr().out.strip() == WORKED
    assert main(["reconstruct", "--expr", "z1^-1", "--vars", "z1"]) == 2
    assert "negative exponent" in capsys.readouterr().err


def test_cli_save_and_resume(tmp_path, capsys):
    save = tmp_path / "ff_save"
    assert main(["reconstruct", "--expr", WORKED, "--vars", "z1,z2", "--tag", "fun", "--save-dir", str(save)]) == 0
    full = capsys.readouterr().out
    assert (save / "fun_1.txt").exists() and (save / "fun_2.txt").exists()
    assert main(["resume", "--files", str(save / "fun_1.txt")]) == 0
    assert capsys.readouterr().out == full


def test_cli_bench(capsys):
    assert main(["bench", "f4", "--scan", "--order", "z3,z2,z1,z4,z5", "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["verified"] and rep["primes"] == 2
