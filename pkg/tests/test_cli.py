"""Command-line surface."""

import io
import json
from contextlib import redirect_stderr, redirect_stdout
from fractions import Fraction

import pytest

from starexp.cli import main, read_records
from starexp.fps import TruncatedSeries


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


def test_validate_su2_fl():
    code, out, _ = run("validate", "--builtin", "su2_fl", "--order", "8")
    assert code == 0 and "FAILED" not in out


def test_validate_failure_exit_one(tmp_path):
    spec = tmp_path / "bad.spec"
    # flipped epsilon against the declared constants
    text = (
        "dim = 3\nC 1 2 3 = -2*i\nC 2 3 1 = -2*i\nC 1 3 2 = 2*i\n"
        "phi 1 2 = i*d3\nphi 1 3 = -i*d2\nphi 2 1 = -i*d3\nphi 2 3 = i*d1\nphi 3 1 = i*d2\nphi 3 2 = -i*d1\n"
    )
    for a in (1, 2, 3):
        text += f"phi {a} {a} = sqrt(1 + d1^2 + d2^2 + d3^2)\n"
    spec.write_text(text)
    code, out, _ = run("validate", "--spec", str(spec), "--order", "5")
    assert code == 1 and "FAILED" in out


def test_example_dl_l2():
    code, out, _ = run("example-dl", "--l", "2", "--order", "8")
    want = " + ".join(["k"] + [f"k^{m}" for m in range(2, 9)]) + " + O(9)"
    assert code == 0
    assert out.count(want) == 2 and "match" in out


def test_example_dl_quote():
    code, out, _ = run("example-dl", "--l", "3", "--order", "6", "--quote-paper")
    assert code == 0 and "cited" in out


def test_example_dl_small_l():
    assert run("example-dl", "--l", "0", "--order", "4")[0] == 0
    assert run("example-dl", "--l", "1", "--order", "4")[0] == 0


def test_kseries_abelian_records_roundtrip():
    code, out, _ = run("kseries", "--builtin", "abelian", "--order", "4", "--format", "records")
    assert code == 0
    header, comps = read_records(out.splitlines())
    assert header["kind"] == "kseries" and header["order"] == 4
    assert comps == [TruncatedSeries.variable(6, 4, a) + TruncatedSeries.variable(6, 4, 3 + a) for a in range(3)]


@pytest.mark.parametrize("cmd", ["kseries", "dseries", "coproduct"])
def test_records_roundtrip_su2(cmd):
    code, out, _ = run(cmd, "--builtin", "su2_sym", "--order", "4", "--kappa", "1/2", "--format", "records")
    assert code == 0
    header, comps = read_records(out.splitlines())
    again = "".join(
        json.dumps({"record": "term", "component": i + 1, **rec}, sort_keys=True) + "\n"
        for i, c in enumerate(comps)
        for rec in c.to_records()
    )
    assert again == "".join(line + "\n" for line in out.splitlines()[1:])


def test_output_is_deterministic():
    a = run("dseries", "--builtin", "su2_fl", "--order", "4")
    b = run("dseries", "--builtin", "su2_fl", "--order", "4")
    assert a == b


def test_coproduct_kappa_zero_primitive():
    code, out, _ = run("coproduct", "--builtin", "su2_fl", "--order", "3", "--kappa", "0")
    assert code == 0 and "primitive=[True, True, True]" in out


def test_ode_and_crosscheck():
    code, out, _ = run("ode", "--builtin", "su2_fl", "--k", "0.05,0.05,0.05", "--q", "0.05,0.05,0.05", "--steps", "200")
    assert code == 0 and "closed" in out
    code, out, _ = run("crosscheck", "--builtin", "su2_fl", "--samples", "2", "--steps", "200", "--format", "records")
    assert code == 0
    rows = [json.loads(line) for line in out.splitlines()]
    assert rows[0]["passed"] and len(rows) == 3


def test_export_roundtrip(tmp_path):
    code, out, _ = run("export", "--builtin", "su2_sym", "--kappa", "1/3")
    assert code == 0 and "kappa = 1/3" in out
    path = tmp_path / "sym.spec"
    path.write_text(out)
    a = run("dseries", "--spec", str(path), "--order", "4", "--format", "records")[1]
    b = run("dseries", "--builtin", "su2_sym", "--kappa", "1/3", "--order", "4", "--format", "records")[1]
    assert read_records(a.splitlines())[1] == read_records(b.splitlines())[1]


@pytest.mark.parametrize(
    "argv",
    [
        ["validate"],
        ["validate", "--builtin", "su2_fl", "--spec", "x.spec"],
        ["kseries", "--builtin", "abelian", "--order", "1"],
        ["kseries", "--builtin", "nope"],
        ["ode", "--builtin", "su2_fl", "--k", "0.1,0.1", "--q", "0,0,0"],
        ["validate", "--spec", "/nonexistent.spec"],
        ["coproduct", "--builtin", "abelian", "--component", "7"],
    ],
)
def test_usage_errors_exit_two(argv):
    code, _, err = run(*argv)
    assert code == 2 and err.strip()


def test_bad_spec_file_exit_two(tmp_path):
    path = tmp_path / "bad.spec"
    path.write_text("dim = 1\nphi 1 1 = d1\n")
    code, _, err = run("validate", "--spec", str(path))
    assert code == 2 and len(err.strip().splitlines()) == 1


def test_computation_error_exit_three():
    # samples far outside the domain of sqrt(1 - kappa^2 q^2)
    code, _, err = run("ode", "--builtin", "su2_fl", "--k", "0,0,0", "--q", "0,2,0", "--steps", "2")
    assert code == 3 and "error" in err
