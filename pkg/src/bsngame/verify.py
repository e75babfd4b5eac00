"""Brute-force equilibrium oracles.

Nothing here re-derives the model: costs and interference come from
:mod:`bsngame.game` and :mod:`bsngame.radio`, so any disagreement with the
engine can only come from the search, never from a second copy of a formula.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .game import check_feasibility, user_utilities, utility_values
from .radio import Action, InterferenceObservation, interference_matrix, profile_arrays
from .scenario import NEAREST_LEVEL, Scenario

MAX_ENUMERATION = 10**8
DEFAULT_GRID = 512


class InstanceTooLarge(ValueError):
    pass


def uniform_grid(scenario: Scenario, size: int = DEFAULT_GRID) -> np.ndarray:
    return np.linspace(scenario.p_min, scenario.p_max, size)


def deviation_powers(scenario: Scenario, grid_size: int = DEFAULT_GRID, include_grid: bool | None = None) -> np.ndarray:
    """Sorted power set a user may deviate to.

    By default this is the user's action set: the discrete levels in
    nearest-level mode, levels plus a uniform grid in continuous mode.
    ``include_grid=True`` forces the grid in regardless of mode.
    """
    if include_grid is None:
        include_grid = scenario.snap_mode != NEAREST_LEVEL
    parts = []
    if scenario.levels_array is not None:
        parts.append(scenario.levels_array)
    if include_grid or not parts:
        parts.append(uniform_grid(scenario, grid_size))
    return np.unique(np.concatenate(parts))


def _deviation_costs(scenario: Scenario, i: int, obs_i: np.ndarray, powers: np.ndarray) -> np.ndarray:
    """Cost of user i for every (channel, power) pair; shape (N, len(powers))."""
    return _cost(scenario, i, powers[None, :], obs_i[:, None])


def _cost(scenario: Scenario, i: int, p, interference):
    return utility_values(scenario.tau[i], scenario.xi[i], scenario.gamma0[i], scenario.gains[i], p, interference)


@dataclass
class ProfileCheck:
    max_improvement: float  # absolute, utility units
    max_relative_improvement: float
    per_user_improvement: list[float]
    per_user_relative: list[float]
    best_deviation: list[tuple[int, float]]  # (channel id, power) per user

    def to_dict(self) -> dict:
        return {
            "max_improvement": self.max_improvement,
            "max_relative_improvement": self.max_relative_improvement,
            "per_user_improvement": self.per_user_improvement,
            "per_user_relative": self.per_user_relative,
            "best_deviation": [list(d) for d in self.best_deviation],
        }


def check_profile(scenario: Scenario, profile, powers=None) -> ProfileCheck:
    """Largest cost reduction any single user can get by changing its own action.

    Every user is scanned over all channels and ``powers`` (default
    :func:`deviation_powers`). Zero means the profile is an equilibrium at
    that resolution.
    """
    powers = deviation_powers(scenario) if powers is None else np.unique(np.asarray(powers, dtype=float))
    ch, pw = profile_arrays(scenario, profile)
    obs = interference_matrix(scenario, ch, pw)
    current = user_utilities(scenario, pw, obs[np.arange(scenario.n_users), ch])
    imp, rel, best = [], [], []
    for i in range(scenario.n_users):
        costs = _deviation_costs(scenario, i, obs[i], powers)
        j, k = np.unravel_index(int(np.argmin(costs)), costs.shape)
        gain = max(float(current[i] - costs[j, k]), 0.0)
        imp.append(gain)
        rel.append(gain / float(current[i]))
        best.append((int(scenario.channels[j]), float(powers[k])))
    return ProfileCheck(
        max_improvement=max(imp),
        max_relative_improvement=max(rel),
        per_user_improvement=imp,
        per_user_relative=rel,
        best_deviation=best,
    )


def _profile_from_codes(scenario: Scenario, codes, levels) -> list[Action]:
    n_lv = len(levels)
    return [Action(scenario.channels[c // n_lv], float(levels[c % n_lv])) for c in codes]


def brute_force_ne(scenario: Scenario, power_levels=None, chunk: int = 200_000) -> list[list[Action]]:
    """All pure equilibria over channels x ``power_levels``, by exhaustive search.

    A profile qualifies when no user can strictly lower its own cost with
    any unilateral change of channel and level. Results are in lexicographic
    order of (channel index, level index) per user.
    """
    levels = scenario.levels_array if power_levels is None else np.asarray(power_levels, dtype=float)
    if levels is None:
        raise ValueError("brute_force_ne needs power levels (scenario has none)")
    m, n, n_lv = scenario.n_users, scenario.n_channels, len(levels)
    n_act = n * n_lv
    total = n_act**m
    if total > MAX_ENUMERATION:
        raise InstanceTooLarge(
            f"{n}^{m} * {n_lv}^{m} = {total:.3g} profiles exceeds {MAX_ENUMERATION:.0e}; "
            "use check_profile on a candidate profile instead"
        )
    act_ch = np.repeat(np.arange(n), n_lv)
    act_pw = np.tile(levels, n)
    coupling = scenario.coupling
    found = []
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        # digit u of the base-n_act code is user u's action, user 0 most significant
        acts = np.stack([(codes // n_act ** (m - 1 - u)) % n_act for u in range(m)], axis=1)
        ch, pw = act_ch[acts], act_pw[acts]
        onehot = (ch[:, :, None] == np.arange(n)[None, None, :]) * pw[:, :, None]  # (B, M, N)
        # obs[b, i, j] = eta_i + sum_k coupling[k, i] * tx[b, k, j]
        obs = scenario.eta[None, :, None] + np.einsum("ki,bkj->bij", coupling, onehot)
        is_ne = np.ones(len(codes), dtype=bool)
        for i in range(m):
            obs_i = obs[:, i, :]  # (B, N)
            own = obs_i[np.arange(len(codes)), ch[:, i]]
            cur = _cost(scenario, i, pw[:, i], own)
            dev = _cost(scenario, i, levels[None, None, :], obs_i[:, :, None])
            is_ne &= cur <= dev.reshape(len(codes), -1).min(axis=1)
        for row in acts[is_ne]:
            found.append(_profile_from_codes(scenario, row, levels))
    return found


@dataclass
class CEResult:
    eps: float  # absolute, utility units, floored at 0
    eps_relative: float
    worst: tuple | None  # (user, (channel, power), (channel', power'))


def _normalise(distribution) -> list[tuple[tuple[Action, ...], float]]:
    items = list(distribution.items()) if isinstance(distribution, dict) else list(distribution)
    items = [(tuple(p), float(w)) for p, w in items]
    total = sum(w for _, w in items)
    if any(w < 0 for _, w in items) or not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError(f"distribution must be non-negative and sum to 1 (got {total!r})")
    return items


def check_ce(distribution, scenario: Scenario, powers=None) -> CEResult:
    """Largest expected gain from a swap deviation under a joint distribution.

    For each user i and each action a it plays with positive probability,
    the gain of replacing a by a' everywhere is
    ``sum over profiles with i playing a of w * (u_i(a, rest) - u_i(a', rest))``.
    The result is the maximum over (i, a, a'), floored at zero; zero means
    every correlated-equilibrium inequality holds. Deviations range over all
    channels and ``powers`` (default :func:`deviation_powers`).
    """
    items = _normalise(distribution)
    powers = deviation_powers(scenario) if powers is None else np.unique(np.asarray(powers, dtype=float))
    m = scenario.n_users
    gains: dict[tuple[int, Action], np.ndarray] = {}
    base: dict[tuple[int, Action], float] = {}
    for profile, w in items:
        if w == 0:
            continue
        ch, pw = profile_arrays(scenario, profile)
        obs = interference_matrix(scenario, ch, pw)
        current = user_utilities(scenario, pw, obs[np.arange(m), ch])
        for i in range(m):
            key = (i, profile[i])
            dev = _deviation_costs(scenario, i, obs[i], powers)
            g = w * (current[i] - dev)
            if key in gains:
                gains[key] += g
                base[key] += w * current[i]
            else:
                gains[key] = g
                base[key] = w * float(current[i])
    eps, rel, worst = 0.0, 0.0, None
    for key in sorted(gains, key=lambda k: (k[0], k[1].channel, k[1].power)):
        g = gains[key]
        j, k = np.unravel_index(int(np.argmax(g)), g.shape)
        if g[j, k] > eps:
            eps = float(g[j, k])
            worst = (key[0], (key[1].channel, key[1].power), (scenario.channels[j], float(powers[k])))
        rel = max(rel, float(g[j, k]) / base[key])
    return CEResult(eps=eps, eps_relative=max(rel, 0.0), worst=worst)


def empirical_distribution(records) -> dict[tuple[Action, ...], float]:
    """Joint-action frequencies over a sequence of round records."""
    counts: dict[tuple[Action, ...], int] = {}
    for r in records:
        key = tuple(Action(int(c), float(p)) for c, p in zip(r.channels, r.powers))
        counts[key] = counts.get(key, 0) + 1
    n = sum(counts.values())
    return {k: v / n for k, v in counts.items()}


@dataclass
class EquilibriumReport:
    power_grid: dict
    ne_profiles: list[list[Action]] = field(default_factory=list)
    candidate: list[Action] | None = None
    candidate_check: ProfileCheck | None = None
    ce: CEResult | None = None
    conditions: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        out: dict = {
            "power_grid": self.power_grid,
            "ne_profiles": [[[a.channel, a.power] for a in p] for p in self.ne_profiles],
        }
        if self.candidate is not None:
            out["candidate"] = [[a.channel, a.power] for a in self.candidate]
        if self.candidate_check is not None:
            out["candidate_check"] = self.candidate_check.to_dict()
        if self.ce is not None:
            out["ce"] = {
                "eps": self.ce.eps,
                "eps_relative": self.ce.eps_relative,
                "worst": None if self.ce.worst is None else [self.ce.worst[0], list(self.ce.worst[1]), list(self.ce.worst[2])],
            }
        if self.conditions:
            out["conditions"] = self.conditions
        return out


def condition_flags(scenario: Scenario, profile) -> list[dict]:
    """Interference and weight conditions for each user at a profile."""
    ch, pw = profile_arrays(scenario, profile)
    obs = interference_matrix(scenario, ch, pw)
    out = []
    for i in range(scenario.n_users):
        rep = check_feasibility(scenario, InterferenceObservation(i, tuple(float(x) for x in obs[i])), i)
        j = int(ch[i])
        out.append({"user": i, "interference_cap_ok": rep.interference_cap_ok[j], "weight_ratio_ok": rep.weight_ratio_ok, "monotone_response_ok": rep.monotone_response_ok[j]})
    return out


def all_profiles(scenario: Scenario, levels) -> itertools.product:
    """Every joint (channel, level) profile; only sensible for tiny instances."""
    acts = [Action(c, float(p)) for c in scenario.channels for p in levels]
    return itertools.product(acts, repeat=scenario.n_users)
