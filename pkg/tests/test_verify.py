import json
import math
import warnings

import numpy as np
import pytest

from revuzlab import families
from revuzlab.errors import AssumptionNotVerified, NotConservative
from revuzlab.measures import dirac, mollified_dirac, potential, scaled, uniform
from revuzlab.verify import (
    DEFAULT_ALPHA_GRID,
    best_theorem3_bound,
    perturbed_heat_kernel,
    revuz_cases,
    theorem3_rhs,
    verify_kac,
    verify_kernel_identities,
    verify_revuz,
    verify_theorem3,
    verify_theorem_1_3,
    verify_theorem_1_4,
)

T_GRID = np.logspace(-2, 1, 10)


def test_kernel_identities_c2(c2):
    rep = verify_kernel_identities(c2, T_GRID, DEFAULT_ALPHA_GRID)
    assert rep.passed
    names = {r["identity"] for r in rep.rows}
    assert {"chapman_kolmogorov", "resolvent_identity", "part_domination"} <= names


def test_kernel_identities_random(rng):
    chain = families.random_chain(30, rng, killing=True)
    assert verify_kernel_identities(chain, T_GRID, np.logspace(-1, 1, 10)).passed


def test_corrupted_kernel_is_named(c2):
    rep = verify_kernel_identities(c2, T_GRID, DEFAULT_ALPHA_GRID,
                                   heat=perturbed_heat_kernel((0, 1), 1e-6))
    assert not rep.passed
    failed = {r["identity"] for r in rep.failures()}
    assert "symmetry" in failed and "chapman_kolmogorov" in failed


def test_revuz_suite_and_zero_row(c2, c2_measures):
    zero = dirac(c2, "a", mass=0.0)
    cases = revuz_cases(c2, ["a"], [1.0], {"one": 1.0}, {"delta_a": c2_measures["delta_a"],
                                                          "zero": zero})
    rep = verify_revuz(c2, cases, 20_000, seed=0)
    assert rep.passed
    zrow = [r for r in rep.rows if "zero" in r["case"]][0]
    assert zrow["estimate"] == zrow["exact"] == 0.0


def test_kac_suite(c2_killed):
    a, b = dirac(c2_killed, "a"), dirac(c2_killed, "b")
    cases = [("aa", "a", a, a), ("ab", "a", a, b), ("a0", "a", a, dirac(c2_killed, "a", 0.0))]
    rep = verify_kac(c2_killed, cases, 20_000, seed=1)
    assert rep.passed
    assert rep.rows[0]["exact"] == pytest.approx(32 / 9)
    # r_1 arithmetic on the unkilled chain: r(a,b) U_a(b) + r(a,a) U_b(a)
    r = np.array([[4 / 3, 2 / 3], [2 / 3, 4 / 3]])
    assert rep.rows[1]["exact"] == pytest.approx(r[0, 0] * r[0, 1] + r[0, 1] * r[1, 0])
    assert rep.rows[2]["exact"] == 0.0


def test_theorem3_rhs_and_minimum(c2):
    mu = dirac(c2, "a")
    T, a = 1.0, 0.5
    u1 = potential(c2, 1.0, mu).sup_norm
    expected = 4 * math.exp(2 * T) * (1 - math.exp(-a * T)) * 2 * u1**2
    assert theorem3_rhs(c2, mu, mu, a, T) == pytest.approx(expected)
    nu = dirac(c2, "b")
    best, arg = best_theorem3_bound(c2, mu, nu, T)
    assert all(best <= theorem3_rhs(c2, mu, nu, x, T) for x in DEFAULT_ALPHA_GRID)
    assert arg in DEFAULT_ALPHA_GRID


def test_theorem3_equal_measures_give_zero_lhs(c2):
    mu = dirac(c2, "a")
    rep = verify_theorem3(c2, mu, mu, [1.0], [0.5], N=2000, seed=0)
    assert rep.passed and rep.rows[0]["lhs"] == 0.0


def test_theorem3_c2_small(c2):
    rep = verify_theorem3(c2, dirac(c2, "a"), dirac(c2, "b"), [0.25, 4.0], [0.5, 2.0],
                          N=20_000, seed=3)
    assert rep.passed
    ratios = [r["ratio"] for r in rep.rows if "ratio" in r]
    assert ratios and all(0 < q <= 1 for q in ratios)


def test_theorem_1_3_constant_sequence(path9):
    mu = dirac(path9, 4)
    rep = verify_theorem_1_3(path9, [mu, mu], mu, 1.0, N=900, seed=0)
    assert rep.passed
    assert all(r["moment"] == 0.0 for r in rep.rows if r["check"] == "moment")


def test_theorem_1_3_warns_without_assumption(c2):
    mu = dirac(c2, "a")
    fam = scaled(mu, [0.5, 0.75])
    with pytest.warns(AssumptionNotVerified):
        rep = verify_theorem_1_3(c2, fam, mu, 1.0, N=2000, seed=0)
    bound_row = [r for r in rep.rows if r["check"] == "bound_nonincreasing"][0]
    assert bound_row["verdict"] == "INFO"


def test_theorem_1_4_requires_conservative(c2_killed):
    mu = dirac(c2_killed, "a")
    with pytest.raises(NotConservative):
        verify_theorem_1_4(c2_killed, [mu], mu, [["a", "b"]], 1.0, 0.1, "a", N=10)


def test_theorem_1_4_trivial_sequence(path9):
    mu = dirac(path9, 4)
    nests = [[3, 4, 5], list(range(9))]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = verify_theorem_1_4(path9, [mu, mu], mu, nests, 1.0, 0.05, 4, N=2000, seed=0)
    assert rep.passed
    probs = [r["probability"] for r in rep.rows if r["check"] == "exceedance"]
    assert probs == [0.0, 0.0]
    full = [r for r in rep.rows if r["check"] == "exit_full_space_zero"][0]
    assert full["probability"] == 0.0


def test_theorem_1_4_small_experiment(path9):
    mu = dirac(path9, 4)
    fam = mollified_dirac(path9, 4, [5, 3, 1])
    nests = [[3, 4, 5], list(range(1, 8)), list(range(9))]
    rep = verify_theorem_1_4(path9, fam, mu, nests, 1.0, 0.3, 4, N=5000, seed=2)
    dec = [r for r in rep.rows if r["check"] == "decomposition"]
    assert all(r["verdict"] == "PASS" for r in dec)
    assert rep.passed


def test_report_serialisation_is_deterministic(c2):
    a = verify_theorem3(c2, dirac(c2, "a"), uniform(c2), [1.0], [1.0], N=3000, seed=9)
    b = verify_theorem3(c2, dirac(c2, "a"), uniform(c2), [1.0], [1.0], N=3000, seed=9)
    assert a.to_json() == b.to_json()
    assert json.loads(a.to_json())["verdict"] in ("PASS", "FAIL")
    assert a.to_table().startswith("theorem3 on c2:")
