import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg

from revuzlab import families
from revuzlab.chain import (
    build_chain,
    chain_from_rates,
    dirichlet_energy,
    heat_kernel,
    integrated_decay,
    kill_transform,
    part_chain,
    resolvent_kernel,
)
from revuzlab.errors import (
    AsymmetricGenerator,
    EmptySubset,
    NegativeAlpha,
    NegativeRate,
    NonpositiveTime,
    NonpositiveWeight,
    ZeroAlphaOnConservativeChain,
)

seeds = st.integers(0, 2**32 - 1)
sizes = st.integers(2, 12)


def _expm_density(chain, t):
    # independent oracle: matrix exponential of the raw generator, divided by m
    return linalg.expm(t * chain.Q) / chain.m[None, :]


def _inverse_density(chain, alpha):
    return np.linalg.inv(alpha * np.eye(chain.n) - chain.Q) / chain.m[None, :]


# -- two-state closed forms ----------------------------------------------------------

def test_c2_spectrum(c2):
    np.testing.assert_allclose(c2.eigenvalues, [0.0, 2.0], atol=1e-14)
    assert c2.conservative


@pytest.mark.parametrize("t", [0.01, 0.5, 1.0, 3.0])
def test_c2_heat_kernel_closed_form(c2, t):
    p = heat_kernel(c2, t)
    e = math.exp(-2 * t)
    np.testing.assert_allclose(p.values, [[1 + e, 1 - e], [1 - e, 1 + e]], atol=1e-14)
    assert p.entry("a", "b") == pytest.approx(1 - e, abs=1e-14)


def test_c2_resolvent_closed_form(c2):
    # r_a(x, x) = 1/a + 1/(a + 2), r_a(x, y) = 1/a - 1/(a + 2)
    for a in (0.25, 1.0, 4.0):
        r = resolvent_kernel(c2, a).values
        np.testing.assert_allclose(np.diag(r), 1 / a + 1 / (a + 2), rtol=1e-13)
        assert r[0, 1] == pytest.approx(1 / a - 1 / (a + 2), rel=1e-13)
    np.testing.assert_allclose(resolvent_kernel(c2, 1.0).values,
                               [[4 / 3, 2 / 3], [2 / 3, 4 / 3]], rtol=1e-13)


def test_killed_c2_zero_resolvent_is_shifted(c2, c2_killed):
    np.testing.assert_allclose(resolvent_kernel(c2_killed, 0.0).values,
                               resolvent_kernel(c2, 1.0).values, rtol=1e-13)


# -- oracles on random chains ---------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(seeds, sizes, st.booleans(), st.floats(0.01, 5.0))
def test_heat_kernel_matches_expm(seed, n, killing, t):
    chain = families.random_chain(n, seed, killing=killing)
    np.testing.assert_allclose(heat_kernel(chain, t).values, _expm_density(chain, t),
                               rtol=1e-9, atol=1e-11)


@settings(max_examples=30, deadline=None)
@given(seeds, sizes, st.booleans(), st.floats(0.05, 20.0))
def test_resolvent_matches_dense_inverse(seed, n, killing, alpha):
    chain = families.random_chain(n, seed, killing=killing)
    np.testing.assert_allclose(resolvent_kernel(chain, alpha).values,
                               _inverse_density(chain, alpha), rtol=1e-9, atol=1e-11)


@settings(max_examples=25, deadline=None)
@given(seeds, sizes, st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_semigroup_and_symmetry(seed, n, t, s):
    chain = families.random_chain(n, seed, killing=bool(seed % 2))
    pt, ps, pts = (heat_kernel(chain, u).values for u in (t, s, t + s))
    np.testing.assert_allclose(pts, (pt * chain.m) @ ps, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(pt, pt.T, atol=1e-13)
    assert pt.min() >= 0.0
    assert ((pt * chain.m).sum(axis=1) <= 1 + 1e-12).all()


def test_eigenfunctions_orthonormal_in_l2m(rng):
    chain = families.random_chain(15, rng, killing=True)
    phi = chain.eigenfunctions
    np.testing.assert_allclose(phi.T @ (chain.m[:, None] * phi), np.eye(chain.n), atol=1e-12)


def test_integrated_decay_limits():
    lam = np.array([0.0, 1e-300, 1.0, 50.0])
    d = integrated_decay(lam, 0.3)
    assert d[0] == 0.3
    assert d[2] == pytest.approx(-math.expm1(-0.3))
    assert d[3] == pytest.approx((1 - math.exp(-15)) / 50)


# -- transforms -----------------------------------------------------------------------

def test_kill_transform_shifts_resolvent(rng):
    chain = families.random_chain(10, rng)
    killed = kill_transform(chain, 0.7)
    np.testing.assert_allclose(killed.eigenvalues, chain.eigenvalues + 0.7)
    np.testing.assert_allclose(resolvent_kernel(killed, 0.3).values,
                               resolvent_kernel(chain, 1.0).values, rtol=1e-12)
    np.testing.assert_allclose(heat_kernel(killed, 2.0).values,
                               math.exp(-1.4) * heat_kernel(chain, 2.0).values, rtol=1e-12)
    np.testing.assert_allclose(killed.killing, 0.7)
    assert kill_transform(chain, 0.0) is chain


def test_part_chain_is_dominated(rng):
    chain = families.random_chain(12, rng)
    D = chain.states[:5]
    sub = part_chain(chain, D)
    assert sub.n == 5 and not sub.conservative
    for t in (0.1, 1.0, 5.0):
        full = heat_kernel(chain, t).values[:5, :5]
        assert (heat_kernel(sub, t).values <= full + 1e-13).all()
    with pytest.raises(EmptySubset):
        part_chain(chain, [])


# -- Dirichlet form ----------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(seeds, sizes)
def test_dirichlet_energy_edge_sum(seed, n):
    chain = families.random_chain(n, seed, killing=True)
    f = np.random.default_rng(seed).normal(size=n)
    off = chain.Q - np.diag(np.diag(chain.Q))
    edge = 0.5 * np.sum(chain.m[:, None] * off * (f[:, None] - f[None, :]) ** 2)
    kill = np.sum(chain.killing * chain.m * f**2)
    assert dirichlet_energy(chain, f, f) == pytest.approx(edge + kill, rel=1e-10, abs=1e-12)
    assert dirichlet_energy(chain, f, f, order=1) == pytest.approx(
        edge + kill + np.sum(chain.m * f**2), rel=1e-10)


def test_dirichlet_energy_symmetric_and_constant_kernel(c2):
    f, g = np.array([1.0, -2.0]), np.array([0.3, 4.0])
    assert dirichlet_energy(c2, f, g) == dirichlet_energy(c2, g, f)
    assert dirichlet_energy(c2, 1.0, 1.0) == 0.0


# -- validation ----------------------------------------------------------------------

def test_asymmetric_generator_names_pair():
    with pytest.raises(AsymmetricGenerator) as info:
        chain_from_rates(["a", "b", "c"], [1, 1, 1],
                         [("a", "b", 1.0), ("b", "a", 1.0), ("b", "c", 2.0), ("c", "b", 1.0)])
    assert set(info.value.pair) == {"b", "c"}


@pytest.mark.parametrize("m", [[1.0, 0.0], [1.0, -2.0], [1.0, np.nan]])
def test_nonpositive_weight(m):
    with pytest.raises(NonpositiveWeight):
        build_chain(m, [[-1, 1], [1, -1]])


def test_negative_rates():
    with pytest.raises(NegativeRate):
        build_chain([1, 1], [[1, -1], [-1, 1]])
    with pytest.raises(NegativeRate):
        # diagonal larger than the off-diagonal total: negative killing
        build_chain([1, 1], [[-0.5, 1], [1, -1]])
    with pytest.raises(NegativeRate):
        chain_from_rates([0, 1], [1, 1], [(0, 1, 1), (1, 0, 1)], killing=[-1, 0])


def test_time_and_alpha_errors(c2, c2_killed):
    with pytest.raises(NonpositiveTime):
        heat_kernel(c2, 0.0)
    with pytest.raises(NegativeAlpha):
        resolvent_kernel(c2, -0.1)
    with pytest.raises(ZeroAlphaOnConservativeChain):
        resolvent_kernel(c2, 0.0)
    resolvent_kernel(c2_killed, 0.0)


def test_arrays_are_read_only(c2):
    with pytest.raises(ValueError):
        c2.Q[0, 0] = 5.0
