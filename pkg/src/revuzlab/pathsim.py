"""Path sampling, PCAFs along paths, and Monte Carlo estimators.

For a measure ``mu`` with density ``f = d mu / d m`` the associated PCAF is
``A_t = int_0^t f(X_s) ds``.  Paths of a finite chain are piecewise
constant, so every functional here is integrated exactly per sojourn; the
only error left in an estimate is Monte Carlo variance (plus an explicit,
bounded truncation tail for infinite-horizon functionals).

Replicas are simulated together: one vectorised loop advances every live
path by one sojourn, and observers accumulate per-path functionals.  Paths
are split into fixed-size blocks, each with its own child of
``SeedSequence(seed)``, so results depend only on ``(seed, N)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg

from .chain import Chain, resolvent_kernel
from .errors import ConservativeChain, MismatchedPaths, NegativeDensity
from .measures import MeasureVec, potential

BLOCK_SIZE = 1 << 14

__all__ = [
    "PathRecord",
    "PCAFSeries",
    "MCEstimate",
    "CoupledSample",
    "sample_path",
    "sample_paths",
    "shift_path",
    "exit_time",
    "pcaf_along",
    "pcaf_restricted",
    "sup_diff",
    "coupled_sup_diffs",
    "mc_revuz_functional",
    "exact_revuz_functional",
    "revuz_horizon",
    "mc_product_infinity",
    "exact_product_infinity",
    "mc_sup_diff_moment",
    "exact_second_moment",
    "dump_paths",
]


# -- records ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PathRecord:
    """One sampled trajectory.

    ``states[0]`` is the start; ``states[i]`` is occupied on
    ``[jump_times[i-1], jump_times[i])``.  ``lifetime`` is the killing time
    or ``inf`` if the path survived to ``horizon``.  States are indices
    into ``chain.states``.
    """

    start: int
    jump_times: np.ndarray
    states: np.ndarray
    lifetime: float
    horizon: float
    seed: object = None
    chain: Chain = field(default=None, repr=False)

    @property
    def end(self) -> float:
        """Time up to which the path is known: ``min(lifetime, horizon)``."""
        return min(self.lifetime, self.horizon)

    @property
    def killed(self) -> bool:
        return math.isfinite(self.lifetime)

    @property
    def labels(self) -> list:
        return [self.chain.states[i] for i in self.states]

    def holding_times(self) -> np.ndarray:
        """Sojourn lengths, the last one truncated at :attr:`end`."""
        edges = np.concatenate([[0.0], self.jump_times, [self.end]])
        return np.diff(edges)

    def state_at(self, t: float):
        """State index at time ``t``, or ``None`` after the lifetime."""
        if t >= self.lifetime:
            return None
        return int(self.states[np.searchsorted(self.jump_times, t, side="right")])

    def to_json_line(self) -> str:
        labels = self.labels if self.chain is not None else self.states.tolist()
        return json.dumps({
            "start": labels[0],
            "jump_times": self.jump_times.tolist(),
            "states": labels,
            "lifetime": None if not self.killed else self.lifetime,
            "horizon": self.horizon,
            "seed": self.seed,
        })


@dataclass(frozen=True, eq=False)
class PCAFSeries:
    """Continuous piecewise-linear ``t -> A_t`` along one path."""

    breakpoints: np.ndarray
    values: np.ndarray
    path: PathRecord = field(repr=False)

    def __call__(self, t):
        return np.interp(t, self.breakpoints, self.values)

    @property
    def slopes(self) -> np.ndarray:
        dt = np.diff(self.breakpoints)
        dv = np.diff(self.values)
        return np.divide(dv, dt, out=np.zeros_like(dv), where=dt > 0)


@dataclass(frozen=True)
class MCEstimate:
    """Sample mean with its standard error ``stdev / sqrt(count)``.

    ``bias_bound`` is a deterministic bound on any truncation bias.
    """

    mean: float
    stderr: float
    count: int
    seed: object
    bias_bound: float = 0.0

    @classmethod
    def from_samples(cls, samples, seed, bias_bound=0.0) -> "MCEstimate":
        s = np.asarray(samples, dtype=float)
        n = s.size
        se = float(s.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(float(s.mean()), se, int(n), seed, float(bias_bound))

    def agrees_with(self, exact: float, k: float = 3.0) -> bool:
        """Two-sided ``|mean - exact| <= k * stderr + bias_bound``."""
        return abs(self.mean - exact) <= k * self.stderr + self.bias_bound


# -- simulation engine -----------------------------------------------------------

def _jump_table(chain: Chain):
    """Padded per-state target lists and cumulative jump probabilities.

    Target ``-1`` is the cemetery.  Padding entries carry cumulative
    probability 2 so a uniform in [0, 1) never selects them.
    """
    n = chain.n
    Q = chain.Q
    rows = []
    for x in range(n):
        nb = np.flatnonzero(Q[x] > 0)
        nb = nb[nb != x]
        t = list(nb)
        w = list(Q[x, nb])
        if chain.killing[x] > 0:
            t.append(-1)
            w.append(chain.killing[x])
        rows.append((t, w))
    d = max(1, max(len(t) for t, _ in rows))
    targets = np.full((n, d), -1, dtype=np.int64)
    cum = np.full((n, d), 2.0)
    for x, (t, w) in enumerate(rows):
        if not t:
            continue
        c = np.cumsum(w) / np.sum(w)
        c[-1] = 1.0
        targets[x, :len(t)] = t
        cum[x, :len(t)] = c
    return targets, cum


def _run(chain: Chain, starts, horizon: float, rng, observers):
    """Advance all paths sojourn by sojourn; return lifetimes."""
    targets, cum = _jump_table(chain)
    rates = chain.exit_rates
    N = len(starts)
    idx = np.arange(N)
    state = np.array(starts, dtype=np.int64)
    t = np.zeros(N)
    lifetime = np.full(N, np.inf)
    while idx.size:
        r = rates[state]
        e = rng.standard_exponential(idx.size)
        hold = np.full(idx.size, np.inf)
        live = r > 0
        hold[live] = e[live] / r[live]
        t_next = t + hold
        t_end = np.minimum(t_next, horizon)
        for ob in observers:
            ob.segment(idx, state, t, t_end)
        go = t_next < horizon
        idx, state, t = idx[go], state[go], t_next[go]
        if not idx.size:
            break
        u = rng.random(idx.size)
        choice = (cum[state] < u[:, None]).sum(axis=1)
        nxt = targets[state, choice]
        dead = nxt < 0
        if dead.any():
            lifetime[idx[dead]] = t[dead]
            keep = ~dead
            idx, nxt, t = idx[keep], nxt[keep], t[keep]
        state = nxt
    for ob in observers:
        ob.finish(lifetime)
    return lifetime


def _simulate(chain, starts, horizon, seed, make_observers):
    """Run ``starts`` in seeded blocks; return per-block observer lists."""
    starts = np.asarray(starts, dtype=np.int64)
    nblocks = max(1, -(-starts.size // BLOCK_SIZE))
    children = np.random.SeedSequence(seed).spawn(nblocks)
    out = []
    for b, ss in enumerate(children):
        chunk = starts[b * BLOCK_SIZE:(b + 1) * BLOCK_SIZE]
        obs = make_observers(chunk.size)
        _run(chain, chunk, horizon, np.random.default_rng(ss), obs)
        out.append(obs)
    return out


class _SupDiffObserver:
    """Running ``sup_{t <= T} |A_t - B_t|`` for several density differences."""

    def __init__(self, N, diff, T):
        self.diff = np.ascontiguousarray(diff.T)  # (n, J)
        self.T = T
        self.acc = np.zeros((N, diff.shape[0]))
        self.sup = np.zeros((N, diff.shape[0]))

    def segment(self, idx, states, t0, t1):
        dt = np.clip(np.minimum(t1, self.T) - t0, 0.0, None)
        a = self.acc[idx] + self.diff[states] * dt[:, None]
        self.acc[idx] = a
        self.sup[idx] = np.maximum(self.sup[idx], np.abs(a))

    def finish(self, lifetime):
        pass


class _DiscountedObserver:
    """``int_0^H exp(-alpha t) w(X_t) dt`` per path for several weights."""

    def __init__(self, N, weights, alpha):
        self.w = np.ascontiguousarray(weights.T)
        self.alpha = alpha
        self.acc = np.zeros((N, weights.shape[0]))

    def segment(self, idx, states, t0, t1):
        a = self.alpha
        piece = np.exp(-a * t0) * -np.expm1(-a * (t1 - t0)) / a
        self.acc[idx] += self.w[states] * piece[:, None]

    def finish(self, lifetime):
        pass


class _TotalObserver:
    """Plain time integrals ``int_0^H w(X_t) dt`` per path."""

    def __init__(self, N, weights):
        self.w = np.ascontiguousarray(weights.T)
        self.acc = np.zeros((N, weights.shape[0]))

    def segment(self, idx, states, t0, t1):
        self.acc[idx] += self.w[states] * (t1 - t0)[:, None]

    def finish(self, lifetime):
        pass


class _ExitObserver:
    """Indicator of ``tau_V <= T`` for several subsets ``V``."""

    def __init__(self, N, masks, T):
        self.outside = np.ascontiguousarray(~masks.T)
        self.T = T
        self.exited = np.zeros((N, masks.shape[0]), dtype=bool)

    def segment(self, idx, states, t0, t1):
        hit = self.outside[states] & (t0 <= self.T)[:, None]
        self.exited[idx] |= hit

    def finish(self, lifetime):
        self.exited |= (lifetime <= self.T)[:, None]


class _Recorder:
    def __init__(self, N):
        self.pieces = [[] for _ in range(N)]
        self.lifetime = None

    def segment(self, idx, states, t0, t1):
        for i, s, a in zip(idx.tolist(), states.tolist(), t0.tolist()):
            self.pieces[i].append((a, s))

    def finish(self, lifetime):
        self.lifetime = lifetime

    def records(self, chain, horizon, seed):
        out = []
        for i, pcs in enumerate(self.pieces):
            times = np.array([a for a, _ in pcs[1:]])
            states = np.array([s for _, s in pcs], dtype=np.int64)
            out.append(PathRecord(int(states[0]), times, states, float(self.lifetime[i]),
                                  float(horizon), seed, chain))
        return out


# -- single paths ----------------------------------------------------------------

def sample_path(chain: Chain, x, horizon: float, rng=None) -> PathRecord:
    """Sample one path from state ``x`` up to ``horizon`` (or its lifetime).

    ``rng`` is a seed or a :class:`numpy.random.Generator`; integer seeds
    are recorded on the path.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    seed = rng if isinstance(rng, (int, np.integer)) else None
    gen = np.random.default_rng(rng)
    rec = _Recorder(1)
    _run(chain, [chain.index(x)], float(horizon), gen, [rec])
    return rec.records(chain, horizon, seed)[0]


def sample_paths(chain: Chain, x, horizon: float, N: int, seed=0) -> list:
    """``N`` paths from ``x`` drawn exactly as the batched estimators draw them."""
    recs = _simulate(chain, np.full(N, chain.index(x)), float(horizon), seed,
                     lambda n: [_Recorder(n)])
    out = []
    for (r,) in recs:
        out += r.records(chain, horizon, seed)
    return out


def shift_path(path: PathRecord, t: float) -> PathRecord:
    """The path seen from time ``t`` on (``theta_t``), with times relabelled from 0."""
    if not 0 <= t <= path.end:
        raise ValueError("shift time must lie in [0, end]")
    k = int(np.searchsorted(path.jump_times, t, side="right"))
    times = path.jump_times[k:] - t
    return PathRecord(int(path.states[k]), times, path.states[k:].copy(),
                      path.lifetime - t, path.horizon - t, path.seed, path.chain)


def exit_time(path: PathRecord, E) -> float:
    """First time the path is outside ``E`` (killing counts as leaving)."""
    mask = path.chain.mask(E)
    outside = np.flatnonzero(~mask[path.states])
    if outside.size:
        i = outside[0]
        return 0.0 if i == 0 else float(path.jump_times[i - 1])
    return path.lifetime


# -- PCAFs ------------------------------------------------------------------------

def _density_vector(path, f):
    if isinstance(f, MeasureVec):
        f = f.density
    f = np.asarray(f, dtype=float) if path.chain is None else path.chain.as_vector(f)
    if np.any(f < 0):
        raise NegativeDensity("PCAF density must be nonnegative")
    return f


def pcaf_along(path: PathRecord, f) -> PCAFSeries:
    """``A_t = int_0^t f(X_s) ds`` along ``path`` (``f`` a density or a measure).

    Breakpoints are 0, the jump times, the lifetime if killed, and the
    horizon; ``A`` is constant after the lifetime.
    """
    f = _density_vector(path, f)
    end = path.end
    bp = np.concatenate([[0.0], path.jump_times, [end]])
    inc = f[path.states] * np.diff(bp)
    vals = np.concatenate([[0.0], np.cumsum(inc)])
    if end < path.horizon:
        bp = np.append(bp, path.horizon)
        vals = np.append(vals, vals[-1])
    return PCAFSeries(bp, vals, path)


def pcaf_restricted(path: PathRecord, f, E) -> PCAFSeries:
    """``B_t = int_0^t 1_E(X_s) dA_s``, i.e. the PCAF of ``f * 1_E``."""
    f = _density_vector(path, f)
    return pcaf_along(path, np.where(path.chain.mask(E), f, 0.0))


def sup_diff(A: PCAFSeries, B: PCAFSeries, T: float) -> float:
    """Exact ``sup_{0 <= t <= T} |A_t - B_t|`` for PCAFs on the same path.

    ``A - B`` is piecewise linear, so its extremes sit at breakpoints or ``T``.
    """
    if A.path is not B.path and not (
            A.breakpoints.shape == B.breakpoints.shape
            and np.array_equal(A.breakpoints, B.breakpoints)):
        raise MismatchedPaths("PCAFs were built along different paths")
    if T > A.path.horizon:
        raise ValueError("T exceeds the path horizon")
    pts = np.append(A.breakpoints[A.breakpoints <= T], T)
    return float(np.abs(A(pts) - B(pts)).max())


# -- Monte Carlo estimators ------------------------------------------------------

@dataclass
class CoupledSample:
    """Per-path output of :func:`coupled_sup_diffs`.

    ``sup_abs[i, j]`` is ``sup_{t <= T} |A^j_t - B^j_t|`` on path ``i``;
    ``exited[i, k]`` flags ``tau_{V_k} <= T``; ``start[i]`` is the start index.
    """

    start: np.ndarray
    sup_abs: np.ndarray
    exited: np.ndarray | None
    seed: object

    def moment(self, j: int, start=None) -> MCEstimate:
        sel = slice(None) if start is None else self.start == start
        return MCEstimate.from_samples(self.sup_abs[sel, j] ** 2, self.seed)

    def exceedance(self, j: int, eps: float, start=None) -> MCEstimate:
        sel = slice(None) if start is None else self.start == start
        return MCEstimate.from_samples(self.sup_abs[sel, j] > eps, self.seed)

    def exit_probability(self, k: int, start=None) -> MCEstimate:
        sel = slice(None) if start is None else self.start == start
        return MCEstimate.from_samples(self.exited[sel, k], self.seed)


def coupled_sup_diffs(chain: Chain, starts, T: float, pairs, seed=0, nests=None) -> CoupledSample:
    """Pathwise sup-differences of coupled PCAF pairs along shared paths.

    ``starts`` is a sequence of start labels, one per replica.  Every pair
    ``(mu, nu)`` in ``pairs`` is evaluated along the same paths, and
    optionally the exit indicators of ``nests`` by time ``T``.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    start_idx = np.array([chain.index(s) for s in starts], dtype=np.int64)
    diff = np.array([mu.density - nu.density for mu, nu in pairs]).reshape(len(pairs), chain.n)
    masks = None if nests is None else np.array([chain.mask(V) for V in nests])

    def make(n):
        obs = [_SupDiffObserver(n, diff, T)]
        if masks is not None:
            obs.append(_ExitObserver(n, masks, T))
        return obs

    blocks = _simulate(chain, start_idx, float(T), seed, make)
    sup = np.concatenate([b[0].sup for b in blocks])
    exited = None if masks is None else np.concatenate([b[1].exited for b in blocks])
    return CoupledSample(start_idx, sup, exited, seed)


def exact_revuz_functional(chain: Chain, x, alpha: float, g, mu: MeasureVec) -> float:
    """``sum_y r_alpha(x, y) g(y) mu(y)``."""
    r = resolvent_kernel(chain, alpha).values[chain.index(x)]
    return float(r @ (chain.as_vector(g) * mu.weights))


def revuz_horizon(chain: Chain, alpha: float, g, mu: MeasureVec, eps_abs: float = 1e-3):
    """Truncation horizon and tail bound for the discounted functional.

    ``H = log(max(1, U * 100 / eps_abs)) / alpha`` with ``U`` the sup of the
    alpha-potential of ``g mu``; the discarded tail is at most
    ``exp(-alpha H) U``.
    """
    gm = MeasureVec(chain.as_vector(g) * mu.weights, chain)
    U = potential(chain, alpha, gm).sup_norm
    if U == 0:
        return 0.0, 0.0
    H = math.log(max(1.0, U * 100.0 / eps_abs)) / alpha
    return H, math.exp(-alpha * H) * U


def mc_revuz_functional(chain: Chain, x, alpha: float, g, mu: MeasureVec, N: int,
                        seed=0, eps_abs: float = 1e-3) -> MCEstimate:
    """Estimate ``E_x[int_0^inf exp(-alpha t) g(X_t) dA_t]`` for the PCAF of ``mu``.

    Compare with :func:`exact_revuz_functional`.  The horizon comes from
    :func:`revuz_horizon` and the tail bound is stored as ``bias_bound``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    H, tail = revuz_horizon(chain, alpha, g, mu, eps_abs)
    if H == 0:
        return MCEstimate(0.0, 0.0, int(N), seed, 0.0)
    w = (chain.as_vector(g) * mu.density)[None, :]
    blocks = _simulate(chain, np.full(N, chain.index(x)), H, seed,
                       lambda n: [_DiscountedObserver(n, w, alpha)])
    vals = np.concatenate([b[0].acc[:, 0] for b in blocks])
    return MCEstimate.from_samples(vals, seed, tail)


def exact_product_infinity(chain: Chain, x, mu: MeasureVec, nu: MeasureVec) -> float:
    """``E_x[A_inf B_inf]`` from the two-term 0-resolvent formula."""
    r0 = resolvent_kernel(chain, 0.0).values
    u_mu = r0 @ mu.weights
    u_nu = r0 @ nu.weights
    row = r0[chain.index(x)]
    return float(row @ (u_mu * nu.weights) + row @ (u_nu * mu.weights))


def mc_product_infinity(chain: Chain, x, mu: MeasureVec, nu: MeasureVec, N: int,
                        seed=0) -> MCEstimate:
    """Estimate ``E_x[A_inf B_inf]`` on a strictly sub-Markov chain."""
    if chain.spectral_gap_min <= 0:
        raise ConservativeChain("A_inf diverges without killing; use kill_transform first")
    w = np.array([mu.density, nu.density])
    blocks = _simulate(chain, np.full(N, chain.index(x)), math.inf, seed,
                       lambda n: [_TotalObserver(n, w)])
    acc = np.concatenate([b[0].acc for b in blocks])
    return MCEstimate.from_samples(acc[:, 0] * acc[:, 1], seed)


def mc_sup_diff_moment(chain: Chain, x, T: float, mu: MeasureVec, nu: MeasureVec,
                       N: int, seed=0) -> MCEstimate:
    """Estimate ``E_x[sup_{t <= T} |A_t - B_t|^2]`` with both PCAFs on one path."""
    sample = coupled_sup_diffs(chain, [x] * N, T, [(mu, nu)], seed)
    return sample.moment(0)


def _simplex_integrals(a, b, T):
    # int int_{s + u <= T} exp(-a s - b u) = f[0, a, b] for f(z) = exp(-T z),
    # read off exp(-T J) with J upper bidiagonal (Opitz); exact at a = b and a, b = 0.
    J = np.zeros(a.shape + (3, 3))
    J[..., 0, 1] = J[..., 1, 2] = 1.0
    J[..., 1, 1] = a
    J[..., 2, 2] = b
    return linalg.expm(-T * J)[..., 0, 2]


@lru_cache(maxsize=64)
def _simplex_table(lam_bytes: bytes, T: float) -> np.ndarray:
    lam = np.frombuffer(lam_bytes)
    A, B = np.meshgrid(lam, lam, indexing="ij")
    I = _simplex_integrals(A, B, T)
    I.setflags(write=False)
    return I


def exact_second_moment(chain: Chain, x, T: float, mu: MeasureVec) -> float:
    """Exact ``E_x[A_T^2]`` for the PCAF of ``mu``.

    Uses ``E_x[A_T^2] = 2 sum_{k,l} phi_k(x) <phi_k phi_l, mu> <phi_l, mu> I_kl``
    with ``I_kl = int_0^T exp(-lam_k s) int_0^{T-s} exp(-lam_l u) du ds``.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    lam = chain.eigenvalues
    phi = chain.eigenfunctions
    w = mu.weights
    W = phi.T @ (w[:, None] * phi)
    c = phi.T @ w
    I = _simplex_table(np.ascontiguousarray(lam, dtype=float).tobytes(), float(T))
    val = 2.0 * phi[chain.index(x)] @ ((I * W) @ c)
    return float(max(val, 0.0))


def dump_paths(paths, fh) -> None:
    """Write paths as JSON lines (one object per path)."""
    for p in paths:
        fh.write(p.to_json_line() + "\n")
