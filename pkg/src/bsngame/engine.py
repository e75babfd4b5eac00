"""Synchronous game rounds for the learning mode and the fixed-channel baseline."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .game import user_best_powers, user_utilities
from .learning import RegretState, select_channel, update_round
from .radio import interference_matrix, to_db
from .scenario import Scenario

log = logging.getLogger(__name__)

DISG = "disg"
BASELINE = "baseline"


@dataclass(frozen=True)
class RoundRecord:
    iteration: int
    channels: np.ndarray  # channel ids, per user
    powers: np.ndarray  # mW
    sinr: np.ndarray  # linear
    utility: np.ndarray
    max_omega: np.ndarray
    locked: np.ndarray
    observation: np.ndarray  # (M, N) interference-plus-noise, mW

    @property
    def sinr_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.sinr)

    @property
    def mean_sinr(self) -> float:
        return float(self.sinr.mean())


@dataclass
class SettleResult:
    powers: np.ndarray
    iterations: int
    residual: float
    converged: bool


@dataclass
class Trace:
    scenario_fingerprint: str
    seed: int
    mode: str
    lock_threshold: float | None
    max_iterations: int
    records: list[RoundRecord] = field(default_factory=list)
    lock_iter: int | None = None
    convergence_iter: int | None = None
    settle: SettleResult | None = None
    feasibility_violations: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.convergence_iter is not None

    @property
    def final(self) -> RoundRecord:
        return self.records[-1]

    @property
    def final_assignment(self) -> list[int]:
        return [int(c) for c in self.final.channels]

    @property
    def distinct_channels(self) -> bool:
        ch = self.final_assignment
        return len(set(ch)) == len(ch)

    def summary(self) -> dict:
        powers = self.settle.powers if self.settle is not None else self.final.powers
        out = {
            "seed": self.seed,
            "mode": self.mode,
            "scenario_fingerprint": self.scenario_fingerprint,
            "lock_threshold": self.lock_threshold,
            "max_iterations": self.max_iterations,
            "rounds": len(self.records),
            "converged": self.converged,
            "lock_iter": self.lock_iter,
            "convergence_iter": self.convergence_iter,
            "final_assignment": self.final_assignment,
            "distinct_channels": self.distinct_channels,
            "final_powers_mw": [float(p) for p in powers],
            "avg_sinr_db": average_sinr(self, 1.0),
            "avg_sinr_db_last_quartile": average_sinr(self, 0.25),
            "feasibility_violations": dict(self.feasibility_violations),
        }
        if self.settle is not None:
            out["settle"] = {
                "iterations": self.settle.iterations,
                "residual_mw": self.settle.residual,
                "converged": self.settle.converged,
            }
        if self.mode == BASELINE:
            out["baseline_rule"] = "uniform random channel fixed at round 1, p_max every round, no learning"
        return out


def _noise_only(scenario: Scenario) -> np.ndarray:
    return np.repeat(scenario.eta[:, None], scenario.n_channels, axis=1)


def _violations(scenario: Scenario, own_interference: np.ndarray) -> tuple[int, int]:
    xi_i = own_interference * scenario.xi
    cap = int(np.count_nonzero(xi_i > 2.0 * scenario.tau * scenario.gamma0))
    monotone = int(np.count_nonzero(xi_i >= scenario.tau * scenario.gamma0 * scenario.gains))
    return cap, monotone


def _weight_ratio_violations(scenario: Scenario) -> int:
    return int(np.count_nonzero(scenario.tau * scenario.gamma0**2 < 2.0 * scenario.p_max * scenario.xi))


def settle_powers(
    scenario: Scenario,
    assignment,
    tolerance: float = 1e-9,
    max_rounds: int = 100,
    initial=None,
) -> SettleResult:
    """Simultaneous best-power iteration on a fixed channel assignment.

    ``assignment`` holds channel ids. ``iterations`` counts the updates needed
    to reach the returned point; hitting ``max_rounds`` is reported through
    ``converged=False`` together with the last residual.
    """
    m = scenario.n_users
    idx = np.arange(m)
    ch = np.array([scenario.channel_index(c) for c in assignment], dtype=int)
    p = np.full(m, scenario.p_max) if initial is None else np.asarray(initial, dtype=float).copy()
    residual = math.inf
    for k in range(max_rounds + 1):
        own = interference_matrix(scenario, ch, p)[idx, ch]
        new = user_best_powers(scenario, own)[0]
        residual = float(np.max(np.abs(new - p)))
        if residual < tolerance:
            return SettleResult(powers=p, iterations=k, residual=residual, converged=True)
        p = new
    log.warning("settle_powers: no fixed point after %d rounds, residual %.3g mW", max_rounds, residual)
    return SettleResult(powers=p, iterations=max_rounds, residual=residual, converged=False)


def run_disg(
    scenario: Scenario,
    seed: int = 0,
    max_iterations: int = 500,
    lock_threshold: float = 0.9,
    settle_tolerance: float = 1e-9,
) -> Trace:
    """Run the learning game for ``max_iterations`` synchronous rounds.

    Each round every user picks a channel from its regret state, sets the best
    power for that channel against what it observed last round (noise only in
    round one), and then observes interference on all channels. Once every
    user is locked the remaining rounds are the power-settling phase; the run
    counts as converged when the powers stop moving.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    m, n = scenario.n_users, scenario.n_channels
    idx = np.arange(m)
    channel_ids = np.asarray(scenario.channels)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(m)]
    states = [RegretState(i, n, lock_threshold) for i in range(m)]

    trace = Trace(
        scenario_fingerprint=scenario.fingerprint(),
        seed=seed,
        mode=DISG,
        lock_threshold=lock_threshold,
        max_iterations=max_iterations,
    )
    cap_total = monotone_total = 0
    prev_obs = _noise_only(scenario)
    prev_power = None
    for t in range(1, max_iterations + 1):
        ch = np.array([select_channel(s, r) for s, r in zip(states, rngs)], dtype=int)
        locked = np.array([s.locked for s in states])

        power = user_best_powers(scenario, prev_obs[idx, ch])[0]
        obs = interference_matrix(scenario, ch, power)
        own = obs[idx, ch]
        u_actual = user_utilities(scenario, power, own)
        alt_power = user_best_powers(scenario, obs)[0]
        counterfactual = user_utilities(scenario, alt_power, obs)
        counterfactual[idx, ch] = u_actual
        for i, st in enumerate(states):
            update_round(st, float(u_actual[i]), counterfactual[i])

        n_cap, n_mono = _violations(scenario, own)
        cap_total += n_cap
        monotone_total += n_mono

        trace.records.append(
            RoundRecord(
                iteration=t,
                channels=channel_ids[ch],
                powers=power,
                sinr=scenario.gains * power / own,
                utility=u_actual,
                max_omega=np.array([s.max_probability for s in states]),
                locked=locked,
                observation=obs,
            )
        )

        if locked.all():
            if trace.lock_iter is None:
                trace.lock_iter = t
            if (
                trace.convergence_iter is None
                and prev_power is not None
                and t > trace.lock_iter
                and np.max(np.abs(power - prev_power)) < settle_tolerance
            ):
                trace.convergence_iter = t
        prev_obs = obs
        prev_power = power

    trace.feasibility_violations = {
        "interference_cap": cap_total,
        "weight_ratio": _weight_ratio_violations(scenario),
        "monotone_response": monotone_total,
    }
    if trace.lock_iter is not None:
        trace.settle = settle_powers(
            scenario, trace.final_assignment, tolerance=settle_tolerance, initial=trace.final.powers
        )
    if cap_total or monotone_total:
        log.info("seed %d: interference conditions violated (cap=%d, monotone=%d)", seed, cap_total, monotone_total)
    return trace


def run_baseline(scenario: Scenario, seed: int = 0, iterations: int = 500) -> Trace:
    """Comparator without the game: random fixed channel, p_max, no learning."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    m, n = scenario.n_users, scenario.n_channels
    idx = np.arange(m)
    rng = np.random.default_rng(seed)
    ch = rng.integers(n, size=m)
    power = np.full(m, scenario.p_max)
    obs = interference_matrix(scenario, ch, power)
    own = obs[idx, ch]
    u = user_utilities(scenario, power, own)
    sinr = scenario.gains * power / own
    ids = np.asarray(scenario.channels)[ch]
    n_cap, n_mono = _violations(scenario, own)

    trace = Trace(
        scenario_fingerprint=scenario.fingerprint(),
        seed=seed,
        mode=BASELINE,
        lock_threshold=None,
        max_iterations=iterations,
    )
    ones = np.ones(m)
    true = np.ones(m, dtype=bool)
    for t in range(1, iterations + 1):
        trace.records.append(
            RoundRecord(t, ids, power, sinr, u, ones, true, obs)
        )
    trace.feasibility_violations = {
        "interference_cap": n_cap * iterations,
        "weight_ratio": _weight_ratio_violations(scenario),
        "monotone_response": n_mono * iterations,
    }
    return trace


def average_sinr(trace: Trace, window: float = 1.0) -> float:
    """Mean SINR in dB over the trailing ``window`` fraction of rounds.

    Averaging happens in the linear domain (per round across users, then
    across rounds); the dB conversion is applied to the final mean.
    """
    if not trace.records:
        raise ValueError("empty trace")
    if not 0 < window <= 1:
        raise ValueError(f"window must lie in (0, 1], got {window}")
    n = len(trace.records)
    k = math.ceil(window * n)
    per_round = [r.mean_sinr for r in trace.records[n - k:]]
    return to_db(float(np.mean(per_round)))


def compare_seed(scenario: Scenario, seed: int, max_iterations: int = 500, lock_threshold: float = 0.9) -> dict:
    """One learning run and one baseline run on the same seed, summarised."""
    d = run_disg(scenario, seed, max_iterations, lock_threshold)
    b = run_baseline(scenario, seed, max_iterations)
    d_db = average_sinr(d, 0.25)
    b_db = average_sinr(b, 0.25)
    return {
        "seed": seed,
        "converged": d.converged,
        "lock_iter": d.lock_iter,
        "convergence_iter": d.convergence_iter,
        "distinct_channels": d.distinct_channels,
        "final_assignment": d.final_assignment,
        "disg_avg_sinr_db": d_db,
        "baseline_avg_sinr_db": b_db,
        "gap_db": d_db - b_db,
        "baseline_collision": not b.distinct_channels,
    }


def sweep(scenario: Scenario, seeds: int, max_iterations: int = 500, lock_threshold: float = 0.9, jobs: int = 1) -> dict:
    """Run :func:`compare_seed` for seeds 0..seeds-1 and aggregate.

    With ``jobs > 1`` seeds run in worker processes; results are still
    ordered by seed.
    """
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(compare_seed, scenario, s, max_iterations, lock_threshold) for s in range(seeds)]
            runs = [f.result() for f in futs]
    else:
        runs = [compare_seed(scenario, s, max_iterations, lock_threshold) for s in range(seeds)]
    gaps = [r["gap_db"] for r in runs]
    return {
        "scenario_fingerprint": scenario.fingerprint(),
        "seeds": seeds,
        "max_iterations": max_iterations,
        "lock_threshold": lock_threshold,
        "convergence_rate": sum(r["converged"] for r in runs) / seeds,
        "distinct_convergence_rate": sum(r["converged"] and r["distinct_channels"] for r in runs) / seeds,
        "mean_gap_db": float(np.mean(gaps)),
        "min_gap_db": float(np.min(gaps)),
        "all_gaps_positive": all(g > 0 for g in gaps),
        "runs": runs,
    }
