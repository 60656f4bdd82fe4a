"""Finite m-symmetric Markov chains and their exact kernels.

A chain lives on ``n`` labelled states with a reference measure ``m`` and a
rate matrix ``Q`` satisfying ``m(x) Q(x, y) = m(y) Q(y, x)``.  Row deficits
``-sum_y Q(x, y)`` are killing rates.  Conjugating by ``diag(m)**0.5`` turns
``Q`` into a symmetric matrix, so every kernel below comes from one
symmetric eigendecomposition::

    p_t(x, y) = sum_k exp(-lam_k t) phi_k(x) phi_k(y)
    r_a(x, y) = sum_k phi_k(x) phi_k(y) / (a + lam_k)

with ``phi_k`` orthonormal in ``L^2(m)``.  Kernels are densities with
respect to ``m``, not transition probabilities.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy import linalg

from .errors import (
    AsymmetricGenerator,
    EmptySubset,
    NegativeAlpha,
    NegativeRate,
    NonpositiveTime,
    NonpositiveWeight,
    NumericalBreakdown,
    ZeroAlphaOnConservativeChain,
)

SYMMETRY_RTOL = 1e-12
CLAMP_TOL = 1e-10

__all__ = [
    "Chain",
    "KernelMatrix",
    "build_chain",
    "chain_from_rates",
    "heat_kernel",
    "resolvent_kernel",
    "kill_transform",
    "part_chain",
    "dirichlet_energy",
    "integrated_decay",
]


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class Chain:
    """Validated m-symmetric chain with a cached spectral decomposition.

    Instances are immutable; build them with :func:`build_chain` or
    :func:`chain_from_rates` rather than calling the constructor directly.

    Attributes
    ----------
    states : tuple
        State labels, in matrix order.
    m : ndarray, shape (n,)
        Reference measure.
    Q : ndarray, shape (n, n)
        Rate matrix including the killing on the diagonal.
    killing : ndarray, shape (n,)
        Row deficits ``-Q.sum(axis=1)``; all zero iff the chain is conservative.
    eigenvalues : ndarray, shape (n,)
        Eigenvalues of ``-Q`` in ascending order (all >= 0).
    eigenfunctions : ndarray, shape (n, n)
        Column ``k`` is ``phi_k`` evaluated at each state.
    """

    def __init__(self, states, m, Q, killing, eigenvalues, eigenfunctions, name=None):
        self.states = tuple(states)
        self.m = _readonly(m)
        self.Q = _readonly(Q)
        self.killing = _readonly(killing)
        self.eigenvalues = _readonly(eigenvalues)
        self.eigenfunctions = _readonly(eigenfunctions)
        self.name = name
        self._index = {s: i for i, s in enumerate(self.states)}

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        kind = "conservative" if self.conservative else "sub-Markov"
        return f"<Chain{tag} n={self.n} {kind}>"

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def conservative(self) -> bool:
        return not np.any(self.killing > 0)

    @property
    def exit_rates(self) -> np.ndarray:
        """Total holding rate ``-Q(x, x)`` per state."""
        return -np.diag(self.Q)

    @property
    def spectral_gap_min(self) -> float:
        """Smallest eigenvalue of ``-Q``; zero for conservative chains."""
        return float(self.eigenvalues[0])

    def index(self, label: Hashable) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"unknown state {label!r}") from None

    def mask(self, subset) -> np.ndarray:
        """Boolean indicator of ``subset`` (labels, or a boolean array)."""
        if isinstance(subset, np.ndarray) and subset.dtype == bool:
            if subset.shape != (self.n,):
                raise ValueError("boolean subset has the wrong length")
            return subset.copy()
        out = np.zeros(self.n, dtype=bool)
        for s in subset:
            out[self.index(s)] = True
        return out

    def as_vector(self, f) -> np.ndarray:
        """Coerce a state function (array, dict or callable on labels) to an array."""
        if isinstance(f, dict):
            v = np.zeros(self.n)
            for k, val in f.items():
                v[self.index(k)] = val
            return v
        if callable(f):
            return np.array([f(s) for s in self.states], dtype=float)
        v = np.asarray(f, dtype=float)
        if v.ndim == 0:
            return np.full(self.n, float(v))
        if v.shape != (self.n,):
            raise ValueError(f"state function has shape {v.shape}, expected ({self.n},)")
        return v

    def spectral_kernel(self, weights) -> np.ndarray:
        """Assemble ``sum_k w_k phi_k(x) phi_k(y)`` for per-mode weights ``w``."""
        phi = self.eigenfunctions
        K = (phi * weights) @ phi.T
        return 0.5 * (K + K.T)


@dataclass(frozen=True)
class KernelMatrix:
    """Kernel density with respect to ``m``, tagged by time or rate."""

    kind: str  # "time" or "alpha"
    param: float
    values: np.ndarray
    states: tuple

    def entry(self, x, y) -> float:
        i, j = self.states.index(x), self.states.index(y)
        return float(self.values[i, j])


def integrated_decay(lam, delta):
    """``int_0^delta exp(-lam s) ds`` elementwise, with the ``lam = 0`` limit."""
    lam = np.asarray(lam, dtype=float)
    x = lam * delta
    safe = np.where(x > 0, lam, 1.0)
    return np.where(x > 0, -np.expm1(-x) / safe, float(delta))


def _clamp(K):
    low = K.min()
    if low < -CLAMP_TOL * max(1.0, np.abs(K).max()):
        raise NumericalBreakdown(f"kernel entry {low:.3e} is structurally negative")
    K[K < 0] = 0.0
    return K


def _decompose(m, Q):
    sq = np.sqrt(m)
    S = sq[:, None] * Q / sq[None, :]
    S = 0.5 * (S + S.T)
    lam, V = linalg.eigh(-S)
    scale = max(1.0, float(np.abs(np.diag(Q)).max(initial=0.0)))
    if lam[0] < -1e-9 * scale:
        raise NumericalBreakdown(f"generator has negative spectrum ({lam[0]:.3e})")
    lam[np.abs(lam) <= 1e-12 * scale] = 0.0
    return lam, V / sq[:, None]


def build_chain(m, Q, states: Sequence | None = None, name: str | None = None) -> Chain:
    """Validate a weight vector and rate matrix and return a :class:`Chain`.

    The diagonal of ``Q`` is taken as given; any row deficit is killing.

    Raises
    ------
    NonpositiveWeight, NegativeRate, AsymmetricGenerator
    """
    m = np.asarray(m, dtype=float).ravel()
    Q = np.array(Q, dtype=float)
    n = m.size
    if n < 1:
        raise ValueError("a chain needs at least one state")
    if Q.shape != (n, n):
        raise ValueError(f"rate matrix has shape {Q.shape}, expected ({n}, {n})")
    states = tuple(range(n)) if states is None else tuple(states)
    if len(states) != n or len(set(states)) != n:
        raise ValueError("state labels must be unique and match the weight vector")
    if not np.all(np.isfinite(m)) or np.any(m <= 0):
        bad = states[int(np.argmin(m))]
        raise NonpositiveWeight(f"weight at state {bad!r} is not positive")
    off = Q.copy()
    np.fill_diagonal(off, 0.0)
    if np.any(off < 0):
        i, j = np.argwhere(off < 0)[0]
        raise NegativeRate(f"rate {states[i]!r}->{states[j]!r} is negative")
    scale = max(1.0, float(off.max(initial=0.0)))
    killing = -Q.sum(axis=1)
    killing[np.abs(killing) <= 1e-14 * scale] = 0.0
    if np.any(killing < 0):
        i = int(np.argmin(killing))
        raise NegativeRate(f"diagonal at state {states[i]!r} exceeds the off-diagonal total")

    flux = m[:, None] * off
    resid = np.abs(flux - flux.T)
    ref = max(float(flux.max(initial=0.0)), np.finfo(float).tiny)
    if resid.max(initial=0.0) > SYMMETRY_RTOL * ref:
        i, j = np.unravel_index(np.argmax(resid), resid.shape)
        raise AsymmetricGenerator((states[i], states[j]), float(resid[i, j] / ref))

    lam, phi = _decompose(m, Q)
    return Chain(states, m, Q, killing, lam, phi, name=name)


def chain_from_rates(states, m, rates: Iterable, killing=None, name=None) -> Chain:
    """Build a chain from sparse ``(from, to, rate)`` triplets.

    Repeated triplets for the same pair are summed.  ``killing`` is an
    optional per-state array of killing rates.
    """
    states = tuple(states)
    idx = {s: i for i, s in enumerate(states)}
    n = len(states)
    Q = np.zeros((n, n))
    for src, dst, r in rates:
        if src == dst:
            raise ValueError(f"self-loop triplet at state {src!r}")
        if src not in idx or dst not in idx:
            raise KeyError(f"triplet ({src!r}, {dst!r}) names an unknown state")
        Q[idx[src], idx[dst]] += float(r)
    kill = np.zeros(n) if killing is None else np.asarray(killing, dtype=float)
    if kill.shape != (n,):
        raise ValueError("killing must have one entry per state")
    if np.any(kill < 0):
        raise NegativeRate("killing rates must be nonnegative")
    np.fill_diagonal(Q, -(Q.sum(axis=1) + kill))
    return build_chain(m, Q, states=states, name=name)


def heat_kernel(chain: Chain, t: float) -> KernelMatrix:
    """Transition density ``p_t`` with respect to ``m``."""
    if not t > 0:
        raise NonpositiveTime(f"time must be positive, got {t!r}")
    K = chain.spectral_kernel(np.exp(-chain.eigenvalues * t))
    return KernelMatrix("time", float(t), _clamp(K), chain.states)


def resolvent_kernel(chain: Chain, alpha: float) -> KernelMatrix:
    """Potential density ``r_alpha = int_0^inf exp(-alpha t) p_t dt``.

    ``alpha = 0`` is only allowed on strictly sub-Markov chains.
    """
    if alpha < 0:
        raise NegativeAlpha(f"alpha must be nonnegative, got {alpha!r}")
    denom = alpha + chain.eigenvalues
    if denom[0] <= 0:
        raise ZeroAlphaOnConservativeChain(
            "0-potential diverges: chain has a zero eigenvalue; kill it first"
        )
    K = chain.spectral_kernel(1.0 / denom)
    return KernelMatrix("alpha", float(alpha), _clamp(K), chain.states)


def kill_transform(chain: Chain, alpha: float) -> Chain:
    """Add an independent exponential killing clock of rate ``alpha``.

    The result has generator ``Q - alpha I`` and heat kernel
    ``exp(-alpha t) p_t``; its beta-resolvent is the original
    ``(alpha + beta)``-resolvent.
    """
    if alpha < 0:
        raise NegativeAlpha(f"alpha must be nonnegative, got {alpha!r}")
    if alpha == 0:
        return chain
    Q = chain.Q - alpha * np.eye(chain.n)
    name = f"{chain.name}+kill({alpha:g})" if chain.name else None
    return Chain(chain.states, chain.m, Q, chain.killing + alpha,
                 chain.eigenvalues + alpha, chain.eigenfunctions, name=name)


def part_chain(chain: Chain, D) -> Chain:
    """Part of the chain on ``D``: the process killed on leaving ``D``."""
    mask = chain.mask(D)
    if not mask.any():
        raise EmptySubset("part_chain needs a nonempty subset")
    if mask.all():
        return chain
    keep = np.flatnonzero(mask)
    states = [chain.states[i] for i in keep]
    name = f"{chain.name}|part" if chain.name else None
    return build_chain(chain.m[keep], chain.Q[np.ix_(keep, keep)], states=states, name=name)


def dirichlet_energy(chain: Chain, f, g, order: int = 0) -> float:
    """Dirichlet form ``E(f, g) = -sum_x m(x) f(x) (Q g)(x)``.

    ``order=1`` gives ``E_1(f, g) = E(f, g) + sum_x f(x) g(x) m(x)``.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    f = chain.as_vector(f)
    g = chain.as_vector(g)
    # symmetrised for exact (f, g) symmetry under round-off
    val = -0.5 * (np.dot(chain.m * f, chain.Q @ g) + np.dot(chain.m * g, chain.Q @ f))
    if order:
        val += float(np.sum(f * g * chain.m))
    return float(val)
