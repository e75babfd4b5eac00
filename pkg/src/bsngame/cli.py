"""Command-line entry point: ``bsngame simulate|sweep|verify``.

Exit codes: 0 ran to completion, 1 usage or configuration error,
2 a verification threshold was not met.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .engine import run_baseline, run_disg, sweep
from .scenario import ScenarioError, load_scenario
from .traceio import TraceFormatError, atomic_write_text, dumps_json, final_profile, write_trace
from .verify import (
    EquilibriumReport,
    InstanceTooLarge,
    brute_force_ne,
    check_ce,
    check_profile,
    condition_flags,
    deviation_powers,
    uniform_grid,
)

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 1, 2


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _check_run_args(args, scenario) -> None:
    if args.max_iters < 1:
        raise ConfigError("--max-iters must be >= 1")
    phi, n = args.lock_threshold, scenario.n_channels
    if not phi <= 1.0 or (n > 1 and not phi > 1.0 / n):
        raise ConfigError(f"--lock-threshold must lie in (1/N, 1] = ({1.0 / n:g}, 1], got {phi}")


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    _check_run_args(args, scenario)
    if args.baseline:
        trace = run_baseline(scenario, args.seed, args.max_iters)
    else:
        trace = run_disg(scenario, args.seed, args.max_iters, args.lock_threshold)
    out = Path(args.out)
    summary_path = Path(args.summary) if args.summary else out.with_suffix(".summary.json")
    positions = {"positions_m": [list(u.position) for u in scenario.users]}
    write_trace(trace, out, summary_path, positions)
    s = trace.summary()
    status = "converged" if trace.converged else "not converged"
    if args.baseline:
        status = "baseline"
    it = trace.convergence_iter if trace.converged else "-"
    print(f"{status} iter={it} avg_sinr_db={s['avg_sinr_db_last_quartile']:.2f} (last quartile)")
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    _check_run_args(args, scenario)
    if args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    agg = sweep(scenario, args.seeds, args.max_iters, args.lock_threshold, jobs=args.jobs)
    if args.out:
        atomic_write_text(args.out, dumps_json(agg))
    if args.seeds == 1:
        r = agg["runs"][0]
        print(
            f"seed {r['seed']}: converged={r['converged']} iter={r['convergence_iter']} "
            f"distinct={r['distinct_channels']} gap_db={r['gap_db']:.2f}"
        )
    print(
        f"seeds={agg['seeds']} convergence_rate={agg['convergence_rate']:.3f} "
        f"distinct_rate={agg['distinct_convergence_rate']:.3f} "
        f"mean_gap_db={agg['mean_gap_db']:.2f} min_gap_db={agg['min_gap_db']:.2f}"
    )
    return EXIT_OK


def _grid(spec: str | None, scenario):
    """Returns (powers, description) for a --power-grid value."""
    if spec is None:
        powers = deviation_powers(scenario)
        return powers, {"kind": "action-set", "size": int(len(powers))}
    if spec == "levels":
        if scenario.levels_array is None:
            raise ConfigError("--power-grid levels needs power_levels_mw in the scenario")
        return scenario.levels_array, {"kind": "levels", "size": int(len(scenario.levels_array))}
    if spec.startswith("uniform:"):
        try:
            k = int(spec.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad --power-grid {spec!r}") from None
        if k < 2:
            raise ConfigError("uniform grid needs at least 2 points")
        parts = [uniform_grid(scenario, k)]
        if scenario.levels_array is not None:
            parts.append(scenario.levels_array)
        powers = np.unique(np.concatenate(parts))
        return powers, {"kind": f"levels+uniform:{k}", "size": int(len(powers))}
    raise ConfigError(f"--power-grid must be 'levels' or 'uniform:K', got {spec!r}")


def cmd_verify(args) -> int:
    scenario = load_scenario(args.scenario)
    powers, desc = _grid(args.power_grid, scenario)
    desc.update(p_min_mw=scenario.p_min, p_max_mw=scenario.p_max)
    report = EquilibriumReport(power_grid=desc)
    if args.trace:
        profile = final_profile(args.trace, scenario.n_users)
        chk = check_profile(scenario, profile, powers)
        report.candidate = profile
        report.candidate_check = chk
        report.ce = check_ce({tuple(profile): 1.0}, scenario, powers)
        report.conditions = condition_flags(scenario, profile)
        passed = chk.max_relative_improvement <= args.eps
        print(
            f"max_improvement={chk.max_improvement:.6g} relative={chk.max_relative_improvement:.6g} "
            f"eps={args.eps:g} -> {'PASS' if passed else 'FAIL'}"
        )
    else:
        try:
            ne = brute_force_ne(scenario, powers)
        except InstanceTooLarge as exc:
            raise ConfigError(f"{exc} (pass --trace to check a single profile)") from None
        report.ne_profiles = ne
        for p in ne:
            print(" ".join(f"{a.channel}:{a.power:g}" for a in p))
        passed = bool(ne)
        print(f"{len(ne)} pure equilibria -> {'PASS' if passed else 'FAIL'}")
    if args.out:
        atomic_write_text(args.out, dumps_json(report.to_dict()))
    return EXIT_OK if passed else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bsngame", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_opts(sp):
        sp.add_argument("--scenario", required=True, help="scenario JSON path, or builtin:default")
        sp.add_argument("--max-iters", type=int, default=500)
        sp.add_argument("--lock-threshold", type=float, default=0.9)

    sim = sub.add_parser("simulate", help="run one simulation and write a trace")
    run_opts(sim)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--baseline", action="store_true", help="fixed random channel at p_max, no learning")
    sim.add_argument("--out", required=True, help="trace CSV path")
    sim.add_argument("--summary", help="summary JSON path (default: <out>.summary.json)")
    sim.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="learning vs baseline over seeds 0..K-1")
    run_opts(sw)
    sw.add_argument("--seeds", type=int, default=100)
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--out", help="aggregate JSON path")
    sw.set_defaults(func=cmd_sweep)

    ver = sub.add_parser("verify", help="equilibrium checks")
    ver.add_argument("--scenario", required=True)
    ver.add_argument("--trace", help="check the final profile of this trace CSV")
    ver.add_argument("--power-grid", help="'levels' or 'uniform:K' (default: the scenario's action set)")
    ver.add_argument("--eps", type=float, default=1e-6, help="max relative improvement allowed")
    ver.add_argument("--out", help="report JSON path")
    ver.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, TraceFormatError, ConfigError) as exc:
        print(f"bsngame: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
