"""Link gain, same-channel interference, SINR and dB conversion.

Everything here works in linear units (mW, ratios). Channels are
non-overlapping: only users on the same channel interfere with each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scenario import Scenario


@dataclass(frozen=True)
class Action:
    channel: int  # channel id, not index
    power: float  # mW


StrategyProfile = Sequence[Action]


@dataclass(frozen=True)
class InterferenceObservation:
    """Aggregate interference-plus-noise seen by one user on every channel."""

    user: int
    values: tuple[float, ...]  # mW, in scenario channel order


def link_gain(s: float, d: float, delta: float) -> float:
    if not (s > 0 and d > 0 and delta > 0):
        raise ValueError(f"link_gain needs positive inputs, got s={s}, d={d}, delta={delta}")
    return s / d**delta


def to_db(x: float) -> float:
    if not x > 0:
        raise ValueError(f"cannot convert non-positive ratio {x} to dB")
    return 10.0 * math.log10(x)


def profile_arrays(scenario: Scenario, profile: StrategyProfile) -> tuple[np.ndarray, np.ndarray]:
    """Channel indices and powers of a profile as arrays."""
    if len(profile) != scenario.n_users:
        raise ValueError(f"profile has {len(profile)} actions for {scenario.n_users} users")
    ch = np.array([scenario.channel_index(a.channel) for a in profile], dtype=int)
    pw = np.array([float(a.power) for a in profile])
    return ch, pw


def interference_matrix(scenario: Scenario, ch: np.ndarray, power: np.ndarray) -> np.ndarray:
    """I[i, j]: noise plus same-channel interference at user i on channel j.

    ``ch`` holds channel indices. Computed for every channel, including the
    ones a user is not currently on, because that is what each user observes.
    """
    m, n = scenario.n_users, scenario.n_channels
    tx = np.zeros((m, n))
    tx[np.arange(m), ch] = power
    return scenario.eta[:, None] + scenario.coupling.T @ tx


def interference(scenario: Scenario, profile: StrategyProfile, i: int, j: int) -> float:
    """Noise plus interference (mW) at user i on channel id j."""
    scenario.channel_index(j)  # raises on unknown channel
    total = scenario.users[i].eta
    for k, a in enumerate(profile):
        if k != i and a.channel == j:
            total += scenario.coupling[k, i] * a.power
    return float(total)


def observe(scenario: Scenario, profile: StrategyProfile, i: int) -> InterferenceObservation:
    vals = tuple(interference(scenario, profile, i, c) for c in scenario.channels)
    return InterferenceObservation(user=i, values=vals)


def sinr(scenario: Scenario, profile: StrategyProfile, i: int) -> float:
    a = profile[i]
    return float(scenario.gains[i] * a.power / interference(scenario, profile, i, a.channel))
