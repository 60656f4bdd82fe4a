"""Command-line experiment runner.

Subcommands: ``spec-check``, ``potential``, ``simulate``, ``verify``,
``converge``.  Exit codes: 0 pass, 1 usage/IO error, 2 validation failure,
3 verification FAIL.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chain import kill_transform
from .config import load_scenario
from .errors import ConfigError, RevuzLabError
from .io import config_hash, csv_text, header_line, json_text
from .measures import check_assumption_strong, potential, zero_measure
from .pathsim import (
    coupled_sup_diffs,
    dump_paths,
    exact_revuz_functional,
    mc_revuz_functional,
    pcaf_along,
    sample_paths,
)
from .verify import (
    DEFAULT_ALPHA_GRID,
    best_theorem3_bound,
    perturbed_heat_kernel,
    revuz_cases,
    verify_kac,
    verify_kernel_identities,
    verify_revuz,
    verify_theorem3,
    verify_theorem_1_3,
    verify_theorem_1_4,
)

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_FAIL = 0, 1, 2, 3
KERNEL_T_GRID = tuple(np.round(np.logspace(-2, 1, 10), 12))
SUITES = ("kernel", "revuz", "kac", "theorem3", "theorem1.3", "theorem1.4")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _grid(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("grid must be nonempty")
    return vals


def _common(p):
    p.add_argument("--scenario", required=True, help="built-in name or path to a JSON scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=None, metavar="N")
    p.add_argument("--alpha-grid", type=_grid, default=None)
    p.add_argument("--t-grid", type=_grid, default=None)
    p.add_argument("--out", default=None, metavar="DIR")
    p.add_argument("--tolerance", type=float, default=None)


def build_parser():
    parser = _Parser(prog="revuzlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"revuzlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("spec-check", help="validate a scenario and run kernel identities")
    _common(p)
    p = sub.add_parser("potential", help="alpha-potentials of the named measures")
    _common(p)
    p.add_argument("--measure", action="append", default=None)
    p = sub.add_parser("simulate", help="PCAF traces or Revuz estimator rows")
    _common(p)
    p.add_argument("--mode", choices=("trace", "revuz"), default="trace")
    p.add_argument("--x", default=None, help="start state (default: scenario param)")
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--dump-paths", default=None, metavar="FILE")
    p = sub.add_parser("verify", help="run verification suites")
    _common(p)
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    p = sub.add_parser("converge", help="per-n convergence table")
    _common(p)
    return parser


def _config(args, scenario):
    cfg = {k: v for k, v in vars(args).items() if k not in ("out", "dump_paths")}
    cfg["scenario_content"] = scenario.raw
    return cfg


def _emit(args, name, text):
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)
    else:
        sys.stdout.write(text)


def _state_arg(chain, value):
    if value is None:
        return None
    if value in chain.states:
        return value
    try:
        v = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"unknown state {value!r}", where="--x") from None
    if v not in chain.states:
        raise ConfigError(f"unknown state {value!r}", where="--x")
    return v


def _param_measure(sc, key):
    name = sc.params.get(key)
    if name is None:
        return None
    if name not in sc.measures:
        raise ConfigError(f"unknown measure {name!r}", where=f"params.{key}")
    return sc.measures[name]


def _x(sc, args=None):
    x = _state_arg(sc.chain, getattr(args, "x", None)) if args is not None else None
    if x is None:
        x = sc.params.get("x", sc.chain.states[0])
        x = _state_arg(sc.chain, x)
    return x


# -- commands ---------------------------------------------------------------------

def cmd_spec_check(args, sc):
    chain = sc.chain
    print(f"scenario {sc.name}: n={chain.n} conservative={chain.conservative} "
          f"lambda_min={chain.spectral_gap_min:.6g} lambda_max={chain.eigenvalues[-1]:.6g}")
    print(f"measures: {', '.join(sc.measures) or '-'}; "
          f"sequence length: {len(sc.sequence) if sc.sequence else 0}")
    report = _kernel_report(args, sc)
    print(report.to_table(), end="")
    if args.out:
        _emit(args, "spec_check.json",
              json_text(json.loads(report.to_json()), _header(args, sc, "spec-check")))
    return EXIT_OK if report.passed else EXIT_FAIL


def _header(args, sc, command):
    return {"command": command, "scenario": sc.name,
            "config_hash": config_hash(_config(args, sc)), "seed": args.seed}


def _kernel_report(args, sc):
    kw = {}
    if sc.kernel_perturbation:
        kp = sc.kernel_perturbation
        kw["heat"] = perturbed_heat_kernel(kp["entry"], kp.get("size", 1e-6))
    if args.tolerance is not None:
        kw["tol"] = args.tolerance
    return verify_kernel_identities(sc.chain, args.t_grid or KERNEL_T_GRID,
                                    args.alpha_grid or DEFAULT_ALPHA_GRID,
                                    scenario=sc.name, **kw)


def cmd_potential(args, sc):
    names = args.measure or list(sc.measures)
    for n in names:
        if n not in sc.measures:
            raise ConfigError(f"unknown measure {n!r}", where="--measure")
    rows = []
    for name in names:
        for a in args.alpha_grid or [1.0]:
            u = potential(sc.chain, a, sc.measures[name]).values
            rows += [{"measure": name, "alpha": float(a), "state": s, "potential": float(v)}
                     for s, v in zip(sc.chain.states, u)]
    head = header_line("potential", sc.name, _config(args, sc), args.seed)
    _emit(args, "potential.csv", csv_text(["measure", "alpha", "state", "potential"], rows, head))
    return EXIT_OK


def cmd_simulate(args, sc):
    chain = sc.chain
    head = header_line("simulate", sc.name, _config(args, sc), args.seed)
    if args.mode == "trace":
        x = _x(sc, args)
        horizon = args.horizon or float(sc.params.get("T", 1.0))
        paths = sample_paths(chain, x, horizon, args.paths or 3, args.seed)
        names = list(sc.measures)
        cols = ["path", "t", "state", "occupation"] + [f"A_{n}" for n in names]
        rows = []
        for i, p in enumerate(paths):
            occ = pcaf_along(p, np.ones(chain.n))
            series = [pcaf_along(p, sc.measures[n]) for n in names]
            for k, t in enumerate(occ.breakpoints):
                st = p.state_at(t) if t < p.end else None
                row = {"path": i, "t": float(t),
                       "state": "" if st is None else chain.states[st],
                       "occupation": float(occ.values[k])}
                row.update({f"A_{n}": float(s.values[k]) for n, s in zip(names, series)})
                rows.append(row)
        _emit(args, "trace.csv", csv_text(cols, rows, head))
        if args.dump_paths:
            with open(args.dump_paths, "w") as fh:
                dump_paths(paths, fh)
        return EXIT_OK

    N = args.paths or 10_000
    rows = []
    cell = 0
    for name, mu in sc.measures.items():
        for x in chain.states:
            for a in args.alpha_grid or [1.0]:
                est = mc_revuz_functional(chain, x, a, 1.0, mu, N, [args.seed, cell])
                rows.append({"scenario": sc.name, "measure": name, "x": x, "alpha": float(a),
                             "estimate": est.mean, "stderr": est.stderr, "N": est.count,
                             "seed": f"{args.seed}/{cell}",
                             "exact": exact_revuz_functional(chain, x, a, 1.0, mu)})
                cell += 1
    cols = ["scenario", "measure", "x", "alpha", "estimate", "stderr", "N", "seed", "exact"]
    _emit(args, "revuz.csv", csv_text(cols, rows, head))
    return EXIT_OK


def _suites_for(sc, wanted):
    chain = sc.chain
    have_pair = _param_measure(sc, "mu") is not None and _param_measure(sc, "nu") is not None
    ok = {
        "kernel": True,
        "revuz": bool(sc.measures),
        "kac": bool(sc.measures),
        "theorem3": have_pair,
        "theorem1.3": sc.sequence is not None and sc.limit is not None,
        "theorem1.4": (sc.sequence is not None and sc.limit is not None
                       and sc.nests is not None and chain.conservative),
    }
    if wanted != "all":
        if not ok[wanted]:
            raise ConfigError(f"scenario lacks the inputs for suite {wanted!r}", where="--suite")
        return [wanted]
    return [s for s in SUITES if ok[s]]


def _run_suite(suite, args, sc):
    chain = sc.chain
    N = args.paths or 100_000
    T = float(sc.params.get("T", 1.0))
    x = _x(sc)
    if suite == "kernel":
        return _kernel_report(args, sc)
    if suite == "revuz":
        first = sc.chain.states[int(np.argmax(next(iter(sc.measures.values())).weights))]
        tests = {"one": 1.0, f"1_{first}": {first: 1.0}}
        xs = chain.states if chain.n <= 2 else [x]
        cases = revuz_cases(chain, xs, args.alpha_grid or [0.5, 1.0, 2.0], tests, sc.measures)
        return verify_revuz(chain, cases, N, args.seed, sc.name)
    if suite == "kac":
        killed = chain if chain.spectral_gap_min > 0 else kill_transform(chain, 1.0)
        mu = _param_measure(sc, "mu") or next(iter(sc.measures.values()))
        nu = _param_measure(sc, "nu") or mu
        cases = [("mu,mu", x, mu, mu), ("mu,nu", x, mu, nu), ("mu,0", x, mu, zero_measure(chain))]
        return verify_kac(killed, cases, N, args.seed, f"{sc.name} (killed)"
                          if killed is not chain else sc.name)
    if suite == "theorem3":
        return verify_theorem3(chain, _param_measure(sc, "mu"), _param_measure(sc, "nu"),
                               args.alpha_grid or [0.25, 1.0, 4.0],
                               args.t_grid or [0.5, 1.0, 2.0], None, N, args.seed, sc.name)
    if suite == "theorem1.3":
        return verify_theorem_1_3(chain, sc.sequence, sc.limit, T, None, N, args.seed,
                                  args.alpha_grid or DEFAULT_ALPHA_GRID, scenario=sc.name)
    if suite == "theorem1.4":
        eps = float(sc.params.get("epsilon", 0.05))
        return verify_theorem_1_4(chain, sc.sequence, sc.limit, sc.nests, T, eps, x, N,
                                  args.seed, tolerance=args.tolerance or 0.05, scenario=sc.name)
    raise ValueError(suite)


def cmd_verify(args, sc):
    status = EXIT_OK
    head = _header(args, sc, "verify")
    for suite in _suites_for(sc, args.suite):
        report = _run_suite(suite, args, sc)
        text = report.to_table()
        print(text, end="")
        if args.out:
            _emit(args, f"{suite}.json", json_text(json.loads(report.to_json()), head))
            _emit(args, f"{suite}.txt", text)
        if not report.passed:
            status = EXIT_FAIL
    return status


def cmd_converge(args, sc):
    if sc.sequence is None or sc.limit is None:
        raise ConfigError("scenario has no measure sequence and limit", where="sequence")
    chain = sc.chain
    mus, mu = sc.sequence, sc.limit
    N = args.paths or 100_000
    T = float(sc.params.get("T", 1.0))
    assumption = check_assumption_strong(chain, mus, mu)
    starts = [s for s in chain.states for _ in range(max(1, N // chain.n))]
    sample = coupled_sup_diffs(chain, starts, T, [(m_, mu) for m_ in mus], [args.seed, 0])
    if sc.nests is not None and chain.conservative:
        eps = float(sc.params.get("epsilon", 0.05))
        px = coupled_sup_diffs(chain, [_x(sc)] * N, T, [(m_, mu) for m_ in mus], [args.seed, 1])
    rows = []
    for j in range(len(mus)):
        ests = [sample.moment(j, chain.index(s)) for s in chain.states]
        k = int(np.argmax([e.mean for e in ests]))
        bound, a = best_theorem3_bound(chain, mus[j], mu, T, args.alpha_grid or DEFAULT_ALPHA_GRID)
        row = {"n": j + 1, "gap": assumption.rows[j]["gap"],
               "sup_gap": assumption.rows[j]["sup_gap"], "moment": ests[k].mean,
               "stderr": ests[k].stderr, "argmax_x": chain.states[k],
               "theorem3_bound": bound, "best_alpha": a}
        if sc.nests is not None and chain.conservative:
            p = px.exceedance(j, eps)
            row.update({"exceed_prob": p.mean, "exceed_stderr": p.stderr})
        rows.append(row)
    cols = list(rows[0])
    head = header_line("converge", sc.name, _config(args, sc), args.seed)
    _emit(args, "converge.csv", csv_text(cols, rows, head))
    return EXIT_OK


COMMANDS = {
    "spec-check": cmd_spec_check,
    "potential": cmd_potential,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "converge": cmd_converge,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.scenario)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RevuzLabError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args, sc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RevuzLabError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
