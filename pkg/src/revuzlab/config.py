"""Scenario files: a chain plus named measures, a measure sequence and nests.

A scenario is a JSON object.  The chain is given either explicitly::

    {"states": ["a", "b"], "m": [0.5, 0.5],
     "rates": [["a", "b", 1.0], ["b", "a", 1.0]], "killing": [0, 0]}

or by a generator such as ``{"generator": {"kind": "path", "k": 9}}``
(kinds: ``path``, ``cycle``, ``birth_death``, ``reflected_bm``).

Optional keys: ``measures`` (name -> sparse ``{state: mass}``), ``sequence``
(``mollified_dirac`` / ``scaled`` / ``perturbed`` / ``explicit``), ``limit``
(name of the limit measure), ``nests`` (list of state lists, or
``{"kind": "windows", "center": c, "widths": [...]}``), ``params``
(defaults for experiment parameters) and ``kernel_perturbation``
(``{"entry": [i, j], "size": s}``, fault injection for the identity suite).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import families
from .chain import Chain, chain_from_rates
from .errors import ConfigError
from .measures import MeasureVec, mollified_dirac, perturbed, scaled

BUILTIN_PACKAGE = "revuzlab.scenarios"

__all__ = ["Scenario", "load_scenario", "parse_scenario", "builtin_names"]


@dataclass
class Scenario:
    name: str
    chain: Chain
    measures: dict = field(default_factory=dict)
    sequence: list | None = None
    limit: MeasureVec | None = None
    nests: list | None = None
    params: dict = field(default_factory=dict)
    kernel_perturbation: dict | None = None
    raw: dict = field(default_factory=dict, repr=False)


def builtin_names() -> list:
    files = resources.files(BUILTIN_PACKAGE).iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


def load_scenario(source) -> Scenario:
    """Load a scenario from a file path or a built-in name.

    Raises ``FileNotFoundError`` for unknown sources and :class:`ConfigError`
    for malformed content (with line/column or field path).
    """
    p = Path(source)
    if p.is_file():
        text = p.read_text()
        origin = str(p)
    elif str(source) in builtin_names():
        text = resources.files(BUILTIN_PACKAGE).joinpath(f"{source}.json").read_text()
        origin = f"builtin:{source}"
    else:
        raise FileNotFoundError(f"no scenario file or built-in named {source!r}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, where=f"{origin}: line {exc.lineno} column {exc.colno}") from None
    return parse_scenario(raw, default_name=p.stem)


def _state(chain: Chain, key, where):
    # JSON object keys are strings; integer-labelled chains need conversion
    if key in chain._index:
        return key
    try:
        k = int(key)
    except (TypeError, ValueError):
        k = None
    if k is not None and k in chain._index:
        return k
    raise ConfigError(f"unknown state {key!r}", where=where)


def _measure(chain, spec, where) -> MeasureVec:
    if isinstance(spec, list):
        if len(spec) != chain.n:
            raise ConfigError(f"expected {chain.n} weights", where=where)
        w = np.asarray(spec, dtype=float)
    elif isinstance(spec, dict):
        w = np.zeros(chain.n)
        for k, v in spec.items():
            w[chain.index(_state(chain, k, f"{where}.{k}"))] += float(v)
    else:
        raise ConfigError("measure must be an object of state: mass pairs or a list", where=where)
    try:
        return MeasureVec(w, chain)
    except ValueError as exc:
        raise ConfigError(str(exc), where=where) from None


def _chain(raw) -> Chain:
    name = raw.get("name")
    gen = raw.get("generator")
    killing = raw.get("killing")
    if gen is not None:
        kind = gen.get("kind")
        try:
            if kind == "path":
                return _renamed(families.path(int(gen["k"]), gen.get("rate", 1.0),
                                               gen.get("weight", 1.0), killing=killing), name)
            if kind == "cycle":
                return _renamed(families.cycle(int(gen["k"]), gen.get("rate", 1.0),
                                                killing=killing), name)
            if kind == "birth_death":
                return _renamed(families.birth_death(int(gen["k"]), gen["up"], gen["down"],
                                                      killing=killing), name)
            if kind == "reflected_bm":
                return _renamed(families.reflected_bm_discretization(
                    int(gen["k"]), tuple(gen.get("interval", (0.0, 1.0))), killing=killing), name)
        except KeyError as exc:
            raise ConfigError(f"missing field {exc.args[0]!r}", where="generator") from None
        raise ConfigError(f"unknown generator kind {kind!r}", where="generator.kind")
    for key in ("states", "m", "rates"):
        if key not in raw:
            raise ConfigError("missing required field", where=key)
    states = [tuple(s) if isinstance(s, list) else s for s in raw["states"]]
    rates = raw["rates"]
    for i, tr in enumerate(rates):
        if not (isinstance(tr, list) and len(tr) == 3):
            raise ConfigError("rate entries must be [from, to, rate]", where=f"rates[{i}]")
    try:
        return chain_from_rates(states, raw["m"], rates, killing=killing, name=name)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]), where="rates") from None


def _renamed(chain, name):
    if name:
        chain.name = name
    return chain


def _sequence(chain, spec, measures):
    kind = spec.get("kind")
    if kind == "mollified_dirac":
        center = _state(chain, spec["center"], "sequence.center")
        return mollified_dirac(chain, center, spec["widths"], spec.get("mass", 1.0))
    if kind in ("scaled", "perturbed"):
        base = spec.get("base")
        if base not in measures:
            raise ConfigError(f"unknown base measure {base!r}", where="sequence.base")
        if kind == "scaled":
            return scaled(measures[base], spec["factors"])
        kw = {"scales": spec["scales"]} if "scales" in spec else {}
        return perturbed(measures[base], int(spec.get("noise_seed", 0)), **kw)
    if kind == "explicit":
        return [_measure(chain, s, f"sequence.measures[{i}]")
                for i, s in enumerate(spec["measures"])]
    raise ConfigError(f"unknown sequence kind {kind!r}", where="sequence.kind")


def _nests(chain, spec):
    if isinstance(spec, dict):
        if spec.get("kind") != "windows":
            raise ConfigError("only 'windows' nests are generated", where="nests.kind")
        c = chain.index(_state(chain, spec["center"], "nests.center"))
        out = []
        for w in spec["widths"]:
            lo = max(0, c - (w - 1) // 2)
            hi = min(chain.n, lo + w)
            lo = max(0, hi - w)
            out.append([chain.states[i] for i in range(lo, hi)])
        return out
    return [[_state(chain, s, f"nests[{k}]") for s in V] for k, V in enumerate(spec)]


def parse_scenario(raw: dict, default_name: str = "scenario") -> Scenario:
    """Build a :class:`Scenario` from decoded JSON."""
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a JSON object", where="<root>")
    chain = _chain(raw)
    name = raw.get("name") or default_name
    chain.name = chain.name or name
    measures = {k: _measure(chain, v, f"measures.{k}")
                for k, v in raw.get("measures", {}).items()}
    sequence = None
    if "sequence" in raw:
        try:
            sequence = _sequence(chain, raw["sequence"], measures)
        except KeyError as exc:
            raise ConfigError(f"missing field {exc.args[0]!r}", where="sequence") from None
    limit = None
    if "limit" in raw:
        if raw["limit"] not in measures:
            raise ConfigError(f"unknown measure {raw['limit']!r}", where="limit")
        limit = measures[raw["limit"]]
    nests = _nests(chain, raw["nests"]) if "nests" in raw else None
    return Scenario(name, chain, measures, sequence, limit, nests, dict(raw.get("params", {})),
                    raw.get("kernel_perturbation"), raw)
