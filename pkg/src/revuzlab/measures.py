"""Measures on a chain's state space and their alpha-potentials.

The alpha-potential of a measure ``mu`` is ``U_a mu(x) = sum_y r_a(x, y) mu(y)``.
Everything here is exact linear algebra on top of :mod:`revuzlab.chain`.

On a finite space every finite measure has a bounded 1-potential, so the
class checks below are informational; the convergence checkers report
numeric trend tables and decide pass/fail against a tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chain import Chain, integrated_decay, resolvent_kernel
from .errors import NestNotIncreasing, NestUnionIncomplete

DEFAULT_TOLERANCE = 1e-6

__all__ = [
    "MeasureVec",
    "PotentialVec",
    "GapNorms",
    "measure",
    "dirac",
    "uniform",
    "zero_measure",
    "potential",
    "restrict_measure",
    "potential_gap",
    "short_time_energy",
    "energy_integral",
    "total_variation",
    "mollified_dirac",
    "scaled",
    "perturbed",
    "check_assumption_strong",
    "check_assumption_general",
    "check_conditions_A",
    "check_conditions_B",
    "AssumptionReport",
    "GeneralAssumptionReport",
    "ConditionsReport",
]


@dataclass(frozen=True, eq=False)
class MeasureVec:
    """Nonnegative measure given by its mass at each state of ``chain``."""

    weights: np.ndarray
    chain: Chain = field(repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.chain.n,):
            raise ValueError(f"measure has shape {w.shape}, expected ({self.chain.n},)")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("measure weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def density(self) -> np.ndarray:
        """Radon-Nikodym derivative ``d mu / d m``."""
        return self.weights / self.chain.m

    @property
    def support(self) -> np.ndarray:
        return self.weights > 0

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def __add__(self, other: "MeasureVec") -> "MeasureVec":
        return MeasureVec(self.weights + other.weights, self.chain)

    def __mul__(self, c: float) -> "MeasureVec":
        return MeasureVec(float(c) * self.weights, self.chain)

    __rmul__ = __mul__

    def as_dict(self) -> dict:
        return {s: float(w) for s, w in zip(self.chain.states, self.weights) if w > 0}


@dataclass(frozen=True)
class PotentialVec:
    alpha: float
    values: np.ndarray

    @property
    def sup_norm(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))


class GapNorms(tuple):
    """``(sup_norm, ess_sup_norm)`` of a potential difference."""

    __slots__ = ()

    def __new__(cls, sup_norm, ess_sup_norm):
        return super().__new__(cls, (float(sup_norm), float(ess_sup_norm)))

    @property
    def sup_norm(self) -> float:
        return self[0]

    @property
    def ess_sup_norm(self) -> float:
        return self[1]


def measure(chain: Chain, masses) -> MeasureVec:
    """Measure from a ``{state: mass}`` mapping or a full weight array."""
    return MeasureVec(chain.as_vector(masses), chain)


def dirac(chain: Chain, x, mass: float = 1.0) -> MeasureVec:
    w = np.zeros(chain.n)
    w[chain.index(x)] = mass
    return MeasureVec(w, chain)


def uniform(chain: Chain, subset=None, mass: float = 1.0) -> MeasureVec:
    """Total ``mass`` spread evenly over the states of ``subset`` (default: all)."""
    mask = np.ones(chain.n, bool) if subset is None else chain.mask(subset)
    if not mask.any():
        return zero_measure(chain)
    return MeasureVec(np.where(mask, mass / mask.sum(), 0.0), chain)


def zero_measure(chain: Chain) -> MeasureVec:
    return MeasureVec(np.zeros(chain.n), chain)


def potential(chain: Chain, alpha: float, mu: MeasureVec) -> PotentialVec:
    """alpha-potential ``U_alpha mu``."""
    r = resolvent_kernel(chain, alpha).values
    return PotentialVec(float(alpha), r @ mu.weights)


def restrict_measure(mu: MeasureVec, E) -> MeasureVec:
    """``mu^E``: mass of ``mu`` outside ``E`` set to zero."""
    mask = mu.chain.mask(E)
    return MeasureVec(np.where(mask, mu.weights, 0.0), mu.chain)


def _ess_sup(values, mask) -> float:
    # L^inf norm w.r.t. a measure with support `mask`; inf over C > 0 gives 0 when null
    return float(np.abs(values[mask]).max(initial=0.0))


def potential_gap(chain: Chain, alpha: float, mu: MeasureVec, nu: MeasureVec) -> GapNorms:
    """Sup norm of ``U_a mu - U_a nu`` over all states and over ``supp(mu + nu)``.

    The maximum principle for differences of potentials says the two agree.
    """
    r = resolvent_kernel(chain, alpha).values
    diff = r @ (mu.weights - nu.weights)
    return GapNorms(np.abs(diff).max(initial=0.0), _ess_sup(diff, mu.support | nu.support))


def short_time_energy(chain: Chain, mu: MeasureVec, K, delta: float) -> float:
    """``sup_{x in K} int_0^delta sum_{y in K} p_t(x, y) mu(y) dt`` (exact)."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    mask = chain.mask(K)
    if not mask.any():
        return 0.0
    k = chain.spectral_kernel(integrated_decay(chain.eigenvalues, delta))
    vals = k[np.ix_(mask, mask)] @ mu.weights[mask]
    return float(max(vals.max(), 0.0))


def energy_integral(chain: Chain, mu: MeasureVec, nu: MeasureVec | None = None) -> float:
    """``int U_1 mu d nu`` (``nu`` defaults to ``mu``)."""
    nu = mu if nu is None else nu
    return float(potential(chain, 1.0, mu).values @ nu.weights)


def total_variation(mu: MeasureVec, nu: MeasureVec, E=None) -> float:
    """``sum_x |mu(x) - nu(x)|``, optionally over ``E`` only."""
    d = np.abs(mu.weights - nu.weights)
    if E is not None:
        d = d[mu.chain.mask(E)]
    return float(d.sum())


# -- measure-sequence generators ------------------------------------------------

def mollified_dirac(chain: Chain, center, widths: Sequence[int], mass: float = 1.0):
    """Mass ``mass`` spread evenly over windows of the given widths around ``center``.

    Windows are taken in state order and clipped at the ends; width 1 is the
    point mass at ``center`` itself.
    """
    c = chain.index(center)
    out = []
    for w in widths:
        if w < 1:
            raise ValueError("window widths must be >= 1")
        lo = max(0, c - (w - 1) // 2)
        hi = min(chain.n, lo + w)
        lo = max(0, hi - w)
        mask = np.zeros(chain.n, bool)
        mask[lo:hi] = True
        out.append(uniform(chain, mask, mass))
    return out


def scaled(mu: MeasureVec, factors: Sequence[float]):
    return [mu * f for f in factors]


def perturbed(mu: MeasureVec, noise_seed: int, scales=(1.0, 0.5, 0.25, 0.125, 0.0625)):
    """``mu + s * xi`` for each scale ``s``, with one fixed random measure ``xi``.

    ``xi`` has total mass ``mu.total_mass`` (or 1 for the zero measure).
    """
    rng = np.random.default_rng(noise_seed)
    xi = rng.random(mu.chain.n)
    xi *= (mu.total_mass or 1.0) / xi.sum()
    return [MeasureVec(mu.weights + s * xi, mu.chain) for s in scales]


# -- assumption and sufficient-condition checkers ----------------------------------

@dataclass
class AssumptionReport:
    """Per-n gaps ``||U_1 mu_n - U_1 mu||`` in ``L^inf(mu_n + mu)`` and in sup norm."""

    rows: list
    tolerance: float
    decreasing: bool
    passed: bool

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r["gap"] for r in self.rows])

    def to_dict(self) -> dict:
        return {"rows": self.rows, "tolerance": self.tolerance,
                "decreasing": self.decreasing, "passed": self.passed}


@dataclass
class GeneralAssumptionReport:
    nests: list
    per_nest: list
    passed: bool

    def to_dict(self) -> dict:
        return {"nests": self.nests, "passed": self.passed,
                "per_nest": [r.to_dict() for r in self.per_nest]}


@dataclass
class ConditionsReport:
    """Outcome of a sufficient-condition check; ``conditions`` maps name -> details."""

    conditions: dict
    passed: bool

    def violators(self, name: str):
        return self.conditions[name].get("violators", [])

    def to_dict(self) -> dict:
        return {"conditions": self.conditions, "passed": self.passed}


def _nonincreasing(values, slack=1e-12) -> bool:
    v = np.asarray(values, dtype=float)
    return bool(np.all(np.diff(v) <= slack * max(1.0, np.abs(v).max(initial=0.0))))


def check_assumption_strong(chain: Chain, mus, mu: MeasureVec,
                            tolerance: float = DEFAULT_TOLERANCE) -> AssumptionReport:
    """Tabulate the 1-potential gaps of a measure sequence against its limit.

    Membership in the class of finite measures with bounded 1-potential is
    automatic here; the bound ``||U_1 mu_n||`` is reported with each row.
    Passes when the gaps are nonincreasing and the last one is within
    ``tolerance``.
    """
    mus = list(mus)
    if not mus:
        raise ValueError("need at least one measure in the sequence")
    r1 = resolvent_kernel(chain, 1.0).values
    u = r1 @ mu.weights
    rows = []
    for n, mun in enumerate(mus, start=1):
        un = r1 @ mun.weights
        diff = un - u
        rows.append({
            "n": n,
            "gap": _ess_sup(diff, mun.support | mu.support),
            "sup_gap": float(np.abs(diff).max()),
            "potential_bound": float(un.max()),
            "in_S00": True,
        })
    gaps = [r["gap"] for r in rows]
    dec = _nonincreasing(gaps)
    return AssumptionReport(rows, tolerance, dec, dec and gaps[-1] <= tolerance)


def _validate_nests(chain: Chain, nests):
    masks = [chain.mask(V) for V in nests]
    if not masks:
        raise NestNotIncreasing("need at least one nest")
    for k in range(1, len(masks)):
        if np.any(masks[k - 1] & ~masks[k]):
            raise NestNotIncreasing(f"nest {k} is not contained in nest {k + 1}")
    if not masks[-1].all():
        missing = [chain.states[i] for i in np.flatnonzero(~masks[-1])]
        raise NestUnionIncomplete(f"nests do not cover states {missing}")
    return masks


def check_assumption_general(chain: Chain, mus, mu: MeasureVec, nests,
                             tolerance: float = DEFAULT_TOLERANCE) -> GeneralAssumptionReport:
    """Run :func:`check_assumption_strong` on the restrictions to each nest ``V_k``."""
    masks = _validate_nests(chain, nests)
    mus = list(mus)
    per = []
    for V in masks:
        per.append(check_assumption_strong(
            chain, [restrict_measure(m_, V) for m_ in mus], restrict_measure(mu, V), tolerance))
    labels = [[chain.states[i] for i in np.flatnonzero(V)] for V in masks]
    return GeneralAssumptionReport(labels, per, all(r.passed for r in per))


def _short_time_table(chain, mus, K, deltas):
    """sup_n of the short-time functional on ``K`` per delta, plus the linear bound."""
    deltas = sorted(float(d) for d in deltas)
    table = [max(short_time_energy(chain, m_, K, d) for m_ in mus) for d in deltas]
    fmax = max(float(m_.density.max(initial=0.0)) for m_ in mus)
    # int_0^d sum_y p_s(x, y) m(y) f(y) ds <= d ||f||_inf certifies the limit 0
    ok = _nonincreasing(table[::-1]) and all(
        v <= d * fmax * (1 + 1e-9) + 1e-15 for v, d in zip(table, deltas))
    return {"deltas": deltas, "values": table, "density_bound": fmax, "passed": bool(ok)}


def check_conditions_A(chain: Chain, mus, mu: MeasureVec, K0, deltas,
                       tolerance: float = DEFAULT_TOLERANCE) -> ConditionsReport:
    """Check the weak-convergence sufficient conditions (A1)-(A4).

    (A1) holds on any finite chain.  (A2) uses total variation, which is
    equivalent to weak convergence on a finite space.  (A3) is an exact
    support check against ``K0``.  (A4) tabulates the sup over ``n`` of the
    short-time functional on the whole space over ``deltas``.
    """
    mus = list(mus)
    K0 = chain.mask(K0)
    tv = [total_variation(m_, mu) for m_ in mus]
    violators = []
    for n, m_ in enumerate(mus, start=1):
        violators += [(n, chain.states[i]) for i in np.flatnonzero(m_.support & ~K0)]
    violators += [("mu", chain.states[i]) for i in np.flatnonzero(mu.support & ~K0)]
    conds = {
        "A1": {"passed": True, "note": "finite state space: heat kernel jointly continuous"},
        "A2": {"passed": bool(tv[-1] <= tolerance), "total_variation": tv},
        "A3": {"passed": not violators, "violators": violators},
        "A4": _short_time_table(chain, mus, np.ones(chain.n, bool), deltas),
    }
    return ConditionsReport(conds, all(c["passed"] for c in conds.values()))


def check_conditions_B(chain: Chain, mus, mu: MeasureVec, deltas, nests=None,
                       tolerance: float = DEFAULT_TOLERANCE) -> ConditionsReport:
    """Check the vague-convergence sufficient conditions (B1)-(B3).

    Compacts are the nests (default: the whole space).  (B2) asks the total
    variation restricted to every nest to vanish; (B3) tabulates the
    short-time functional restricted to each nest.
    """
    mus = list(mus)
    masks = _validate_nests(chain, nests) if nests is not None else [np.ones(chain.n, bool)]
    b2 = []
    b3 = []
    for V in masks:
        tv = [total_variation(m_, mu, V) for m_ in mus]
        b2.append({"nest_size": int(V.sum()), "total_variation": tv,
                   "passed": bool(tv[-1] <= tolerance)})
        b3.append(_short_time_table(chain, mus, V, deltas))
    violators = [k + 1 for k, row in enumerate(b2) if not row["passed"]]
    conds = {
        "B1": {"passed": True, "note": "finite state space: heat kernel jointly continuous"},
        "B2": {"passed": not violators, "per_nest": b2, "violators": violators},
        "B3": {"passed": all(r["passed"] for r in b3), "per_nest": b3},
    }
    return ConditionsReport(conds, all(c["passed"] for c in conds.values()))
