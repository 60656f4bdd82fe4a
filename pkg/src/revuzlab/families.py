"""Ready-made chains: cycles, paths, birth-death chains and random chains."""
from __future__ import annotations

import numpy as np

from .chain import Chain, build_chain, chain_from_rates

__all__ = [
    "two_state",
    "cycle",
    "path",
    "birth_death",
    "reflected_bm_discretization",
    "random_chain",
]


def two_state(m=(0.5, 0.5), rate: float = 1.0, killing=None) -> Chain:
    """The chain ``C2`` on states ``a, b`` with ``Q = [[-r, r], [r, -r]]``."""
    rates = [("a", "b", rate), ("b", "a", rate)]
    return chain_from_rates(("a", "b"), m, rates, killing=killing, name="c2")


def cycle(k: int, rate: float = 1.0, killing=None) -> Chain:
    """Nearest-neighbour walk on the ``k``-cycle with uniform unit weights."""
    if k < 2:
        raise ValueError("a cycle needs at least 2 states")
    rates = []
    for i in range(k):
        j = (i + 1) % k
        if k == 2 and i == 1:
            break
        rates += [(i, j, rate), (j, i, rate)]
    return chain_from_rates(range(k), np.ones(k), rates, killing=killing, name=f"cycle{k}")


def path(k: int, rate: float = 1.0, weight: float = 1.0, killing=None) -> Chain:
    """Nearest-neighbour walk on ``0, ..., k-1`` reflected at both ends."""
    rates = []
    for i in range(k - 1):
        rates += [(i, i + 1, rate), (i + 1, i, rate)]
    return chain_from_rates(range(k), np.full(k, float(weight)), rates,
                            killing=killing, name=f"path{k}")


def birth_death(k: int, up, down, killing=None) -> Chain:
    """Birth-death chain with ``up[i]`` = rate ``i -> i+1`` and ``down[i]`` = rate ``i+1 -> i``.

    The symmetrising measure is fixed by detailed balance,
    ``m(i+1) / m(i) = up[i] / down[i]``, with ``m(0) = 1``.
    """
    up = np.broadcast_to(np.asarray(up, dtype=float), (k - 1,))
    down = np.broadcast_to(np.asarray(down, dtype=float), (k - 1,))
    if np.any(up <= 0) or np.any(down <= 0):
        raise ValueError("birth and death rates must be positive")
    m = np.concatenate([[1.0], np.cumprod(up / down)])
    rates = []
    for i in range(k - 1):
        rates += [(i, i + 1, up[i]), (i + 1, i, down[i])]
    return chain_from_rates(range(k), m, rates, killing=killing, name=f"birth_death{k}")


def reflected_bm_discretization(k: int, interval=(0.0, 1.0), killing=None) -> Chain:
    """Cell-centred discretisation of reflected Brownian motion on ``interval``.

    ``k`` cells of width ``h`` carry weight ``m = h`` and neighbouring cells
    exchange at rate ``1/h**2`` (``k**2`` on the unit interval), so the
    Dirichlet form is ``sum h ((f(x+h) - f(x)) / h)**2``, the discrete
    ``int |f'|^2``.  PCAFs of unit point masses then approximate Brownian
    local times.
    """
    a, b = interval
    h = (b - a) / k
    rate = 1.0 / h**2
    rates = []
    for i in range(k - 1):
        rates += [(i, i + 1, rate), (i + 1, i, rate)]
    return chain_from_rates(range(k), np.full(k, h), rates, killing=killing,
                            name=f"path{k}_bm")


def random_chain(n: int, rng, *, edge_prob: float = 0.3, killing: bool = False,
                 weight_range=(0.5, 2.0), rate_range=(0.1, 2.0)) -> Chain:
    """Random connected m-symmetric chain.

    Symmetric conductances ``c(x, y)`` sit on a random spanning tree plus
    extra random edges; rates are ``Q(x, y) = c(x, y) / m(x)``.
    """
    rng = np.random.default_rng(rng)
    m = rng.uniform(*weight_range, size=n)
    C = np.zeros((n, n))
    order = rng.permutation(n)
    for pos in range(1, n):
        i, j = order[pos], order[rng.integers(pos)]
        C[i, j] = C[j, i] = rng.uniform(*rate_range)
    extra = np.triu(rng.random((n, n)) < edge_prob, 1) & (C == 0)
    vals = rng.uniform(*rate_range, size=(n, n))
    C[extra] = vals[extra]
    C = np.triu(C, 1)
    C = C + C.T
    Q = C / m[:, None]
    kill = np.zeros(n)
    if killing:
        kill = rng.uniform(0.0, 1.0, size=n) * (rng.random(n) < 0.5)
        kill[rng.integers(n)] = rng.uniform(0.2, 1.0)
    np.fill_diagonal(Q, -(Q.sum(axis=1) + kill))
    return build_chain(m, Q, name=f"random{n}")
