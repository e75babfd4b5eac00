"""Per-user cost, closed-form best power, and best response over channels.

Cost of user i at power p under interference-plus-noise I:

    u = tau * (gamma0 - G p / I)**2 + xi * p

Users minimise u. For a fixed channel the unconstrained minimiser is

    p* = gamma0 I / G - xi I**2 / (2 tau G**2)

which is then clamped to [p_min, p_max] and, in nearest-level mode, moved to
whichever adjacent discrete level has the lower cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .radio import InterferenceObservation
from .scenario import CONTINUOUS, NEAREST_LEVEL, Scenario, feasibility_ratio_ok


class InfeasibleWeights(ValueError):
    """tau/xi is below 2 p_max / gamma0**2, so no interior optimum is guaranteed."""


@dataclass(frozen=True)
class PowerChoice:
    power: float
    raw_power: float
    clamped: bool
    snapped: bool
    negative_raw: bool  # interference above 2 tau gamma0 G / xi


@dataclass(frozen=True)
class BestResponse:
    channel: int
    power: float
    utility: float
    raw_power: float
    clamped: bool
    snapped: bool
    negative_raw: bool = False


@dataclass(frozen=True)
class FeasibilityReport:
    user: int
    interference_cap_ok: tuple[bool, ...]  # I <= 2 tau gamma0 / xi, per channel
    weight_ratio_ok: bool  # tau/xi >= 2 p_max / gamma0**2
    monotone_response_ok: tuple[bool, ...]  # I < tau gamma0 G / xi, per channel

    @property
    def all_ok(self) -> bool:
        return self.weight_ratio_ok and all(self.interference_cap_ok) and all(self.monotone_response_ok)


def utility_values(tau, xi, gamma0, gain, p, interference):
    """Vectorised cost; all arguments broadcast."""
    return tau * (gamma0 - gain * p / interference) ** 2 + xi * p


def utility(scenario: Scenario, i: int, p: float, interference: float) -> float:
    u = scenario.users[i]
    return float(utility_values(u.tau, u.xi, u.gamma0, scenario.gains[i], p, interference))


def raw_best_power(gamma0, interference, gain, tau, xi):
    return gamma0 * interference / gain - xi * interference**2 / (2.0 * tau * gain**2)


def best_power_array(gamma0, interference, gain, tau, xi, p_min, p_max, snap=CONTINUOUS, levels=None):
    """Array form of :func:`best_power`.

    Returns ``(power, raw, clamped, snapped, negative_raw)`` arrays broadcast
    over the inputs. Weight feasibility is not re-checked here.
    """
    gamma0, interference, gain, tau, xi = np.broadcast_arrays(
        *(np.asarray(x, dtype=float) for x in (gamma0, interference, gain, tau, xi))
    )
    raw = raw_best_power(gamma0, interference, gain, tau, xi)
    negative = raw < 0
    clamped_val = np.clip(raw, p_min, p_max)
    clamped_val = np.where(negative, p_min, clamped_val)
    clamped = clamped_val != raw
    if snap == NEAREST_LEVEL:
        lv = np.asarray(levels, dtype=float)
        hi = np.clip(np.searchsorted(lv, clamped_val, side="left"), 0, len(lv) - 1)
        lo = np.clip(np.searchsorted(lv, clamped_val, side="right") - 1, 0, len(lv) - 1)
        u_lo = utility_values(tau, xi, gamma0, gain, lv[lo], interference)
        u_hi = utility_values(tau, xi, gamma0, gain, lv[hi], interference)
        power = np.where(u_lo <= u_hi, lv[lo], lv[hi])
        snapped = power != clamped_val
    elif snap == CONTINUOUS:
        power = clamped_val
        snapped = np.zeros_like(clamped)
    else:
        raise ValueError(f"unknown snap mode {snap!r}")
    return power, raw, clamped, snapped, negative


def best_power(gamma0, interference, gain, tau, xi, p_min, p_max, snap=CONTINUOUS, levels=None) -> PowerChoice:
    """Cost-minimising transmit power on one channel.

    Raises :class:`InfeasibleWeights` when ``tau/xi < 2 p_max / gamma0**2``
    (this includes ``tau == 0``). A negative unconstrained optimum, which
    happens once the interference exceeds ``2 tau gamma0 G / xi``, is not an
    error: ``p_min`` is returned and ``negative_raw`` is set.
    """
    if not (gamma0 > 0 and interference > 0 and gain > 0 and xi > 0 and tau >= 0):
        raise ValueError("best_power needs positive gamma0, interference, gain, xi and tau >= 0")
    if not feasibility_ratio_ok(tau, xi, gamma0, p_max):
        raise InfeasibleWeights(
            f"tau/xi = {tau / xi:g} is below 2*p_max/gamma0^2 = {2 * p_max / gamma0**2:g}"
        )
    power, raw, clamped, snapped, negative = best_power_array(
        gamma0, interference, gain, tau, xi, p_min, p_max, snap, levels
    )
    return PowerChoice(
        power=float(power),
        raw_power=float(raw),
        clamped=bool(clamped),
        snapped=bool(snapped),
        negative_raw=bool(negative),
    )


def user_best_powers(scenario: Scenario, interference: np.ndarray, users=None):
    """Best power for each user against each entry of an interference array.

    ``interference`` has the user axis first; ``users`` selects which users
    the rows belong to (default: all, in order).
    """
    idx = np.arange(scenario.n_users) if users is None else np.asarray(users)
    extra = (slice(None),) + (None,) * (np.ndim(interference) - 1)
    return best_power_array(
        scenario.gamma0[idx][extra],
        interference,
        scenario.gains[idx][extra],
        scenario.tau[idx][extra],
        scenario.xi[idx][extra],
        scenario.p_min,
        scenario.p_max,
        scenario.snap_mode,
        scenario.levels_array,
    )


def user_utilities(scenario: Scenario, power, interference, users=None):
    idx = np.arange(scenario.n_users) if users is None else np.asarray(users)
    extra = (slice(None),) + (None,) * (np.ndim(interference) - 1)
    return utility_values(
        scenario.tau[idx][extra],
        scenario.xi[idx][extra],
        scenario.gamma0[idx][extra],
        scenario.gains[idx][extra],
        power,
        interference,
    )


def check_feasibility(scenario: Scenario, observation: InterferenceObservation, i: int) -> FeasibilityReport:
    u = scenario.users[i]
    g = scenario.gains[i]
    obs = np.asarray(observation.values, dtype=float)
    # Multiplied through by xi so xi never appears in a denominator.
    cap = obs * u.xi <= 2.0 * u.tau * u.gamma0
    monotone = obs * u.xi < u.tau * u.gamma0 * g
    return FeasibilityReport(
        user=i,
        interference_cap_ok=tuple(bool(x) for x in cap),
        weight_ratio_ok=feasibility_ratio_ok(u.tau, u.xi, u.gamma0, scenario.p_max),
        monotone_response_ok=tuple(bool(x) for x in monotone),
    )


def best_response(scenario: Scenario, observation: InterferenceObservation, i: int) -> BestResponse:
    """Minimum-cost (channel, power) for user i given what it observes.

    Ties go to the lowest channel index.
    """
    if len(observation.values) != scenario.n_channels:
        raise ValueError("observation must cover every channel")
    u = scenario.users[i]
    if not feasibility_ratio_ok(u.tau, u.xi, u.gamma0, scenario.p_max):
        raise InfeasibleWeights(f"user {i}: tau/xi below 2*p_max/gamma0^2")
    obs = np.asarray(observation.values, dtype=float)
    power, raw, clamped, snapped, negative = best_power_array(
        u.gamma0, obs, scenario.gains[i], u.tau, u.xi,
        scenario.p_min, scenario.p_max, scenario.snap_mode, scenario.levels_array,
    )
    cost = utility_values(u.tau, u.xi, u.gamma0, scenario.gains[i], power, obs)
    j = int(np.argmin(cost))
    return BestResponse(
        channel=scenario.channels[j],
        power=float(power[j]),
        utility=float(cost[j]),
        raw_power=float(raw[j]),
        clamped=bool(clamped[j]),
        snapped=bool(snapped[j]),
        negative_raw=bool(negative[j]),
    )
