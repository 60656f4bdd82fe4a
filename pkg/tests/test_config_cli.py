import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest

from revuzlab.cli import main
from revuzlab.config import builtin_names, load_scenario, parse_scenario
from revuzlab.errors import AsymmetricGenerator, ConfigError

FIXTURES = Path(__file__).parent / "fixtures"


def _rows(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


# -- scenario loading -----------------------------------------------------------------

def test_builtins_load():
    names = builtin_names()
    assert {"c2", "c2_killed", "cycle16", "path9", "path9_killed", "path17_bm"} <= set(names)
    for name in names:
        sc = load_scenario(name)
        assert sc.chain.n >= 2 and sc.measures


def test_path17_scenario_shape():
    sc = load_scenario("path17_bm")
    assert sc.chain.conservative
    assert [len(V) for V in sc.nests] == [5, 9, 13, 17]
    assert [int(m.support.sum()) for m in sc.sequence] == [9, 7, 5, 3, 1]
    np.testing.assert_array_equal(sc.sequence[-1].weights, sc.limit.weights)
    assert sc.chain.Q[0, 1] == pytest.approx(17**2)


def test_asymmetric_spec_names_pair():
    with pytest.raises(AsymmetricGenerator) as info:
        load_scenario(FIXTURES / "asymmetric.json")
    assert set(info.value.pair) == {"b", "c"}


def test_parse_errors_carry_location():
    with pytest.raises(ConfigError, match="line 5 column 3"):
        load_scenario(FIXTURES / "broken.json")
    with pytest.raises(ConfigError, match="rates"):
        parse_scenario({"states": ["a"], "m": [1.0]})
    with pytest.raises(ConfigError, match="measures.mu"):
        parse_scenario({"generator": {"kind": "path", "k": 3}, "measures": {"mu": {"9": 1}}})
    with pytest.raises(ConfigError, match="generator.kind"):
        parse_scenario({"generator": {"kind": "torus"}})
    with pytest.raises(FileNotFoundError):
        load_scenario("no_such_scenario")


# -- exit codes ------------------------------------------------------------------------

def test_spec_check_exit_codes(capsys):
    assert main(["spec-check", "--scenario", "c2"]) == 0
    assert "chapman_kolmogorov" in capsys.readouterr().out
    assert main(["spec-check", "--scenario", str(FIXTURES / "asymmetric.json")]) == 2
    assert "not m-symmetric" in capsys.readouterr().err
    assert main(["spec-check", "--scenario", str(FIXTURES / "missing.json")]) == 1
    assert main(["spec-check", "--scenario", str(FIXTURES / "broken.json")]) == 2
    assert "line 5" in capsys.readouterr().err


def test_asymmetric_message_names_pair(capsys):
    main(["spec-check", "--scenario", str(FIXTURES / "asymmetric.json")])
    err = capsys.readouterr().err
    assert "'b'" in err and "'c'" in err


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as info:
        main(["verify"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["potential", "--scenario", "c2", "--alpha-grid", "x,y"])
    assert info.value.code == 1


def test_corrupted_kernel_fails_verification(capsys):
    code = main(["verify", "--scenario", str(FIXTURES / "corrupted_kernel.json"),
                 "--suite", "kernel"])
    assert code == 3
    assert "FAIL" in capsys.readouterr().out


# -- outputs -----------------------------------------------------------------------------

def test_potential_csv(tmp_path):
    assert main(["potential", "--scenario", "c2", "--alpha-grid", "1", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "potential.csv").read_text()
    assert text.startswith("# revuzlab potential scenario=c2 config_hash=")
    assert "seed=0" in text.splitlines()[0]
    rows = {(r["measure"], r["state"]): float(r["potential"]) for r in _rows(text)}
    assert rows[("delta_a", "a")] == pytest.approx(4 / 3)
    assert rows[("delta_a", "b")] == pytest.approx(2 / 3)


def test_trace_occupation_equals_time(tmp_path):
    dump = tmp_path / "paths.jsonl"
    assert main(["simulate", "--scenario", "path9", "--paths", "2", "--horizon", "3",
                 "--out", str(tmp_path), "--dump-paths", str(dump)]) == 0
    rows = _rows((tmp_path / "trace.csv").read_text())
    for r in rows:
        assert float(r["occupation"]) == pytest.approx(float(r["t"]), abs=1e-12)
    assert len(dump.read_text().splitlines()) == 2


def test_revuz_rows_match_potential(tmp_path):
    assert main(["simulate", "--scenario", "c2", "--mode", "revuz", "--paths", "20000",
                 "--out", str(tmp_path)]) == 0
    for r in _rows((tmp_path / "revuz.csv").read_text()):
        err = abs(float(r["estimate"]) - float(r["exact"]))
        assert err <= 3 * float(r["stderr"]) + 1e-4


def test_simulate_is_byte_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        main(["simulate", "--scenario", "cycle16", "--paths", "4", "--seed", "3", "--out", str(d)])
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    main(["simulate", "--scenario", "cycle16", "--paths", "4", "--seed", "4", "--out", str(a)])
    assert (a / "trace.csv").read_bytes() != (b / "trace.csv").read_bytes()


def test_converge_scaled_gap_column(tmp_path):
    assert main(["converge", "--scenario", "c2", "--paths", "4000", "--out", str(tmp_path)]) == 0
    rows = _rows((tmp_path / "converge.csv").read_text())
    gaps = [float(r["gap"]) for r in rows]
    np.testing.assert_allclose(gaps, [4 / 3 / n for n in range(1, 6)], rtol=1e-12)


def test_converge_constant_sequence_is_zero(tmp_path):
    assert main(["converge", "--scenario", str(FIXTURES / "constant_sequence.json"),
                 "--paths", "500", "--out", str(tmp_path)]) == 0
    for r in _rows((tmp_path / "converge.csv").read_text()):
        assert float(r["gap"]) == 0.0 and float(r["moment"]) == 0.0


def test_verify_writes_json_reports(tmp_path):
    assert main(["verify", "--scenario", "c2", "--suite", "kac", "--paths", "5000",
                 "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "kac.json").read_text())
    assert rep["header"]["seed"] == 0 and len(rep["header"]["config_hash"]) == 16
    assert rep["verdict"] == "PASS"
    assert rep["rows"][0]["exact"] == pytest.approx(32 / 9)


def test_suite_needs_inputs(capsys):
    assert main(["verify", "--scenario", "cycle16", "--suite", "theorem1.4"]) == 2
