"""Regret-matching channel selection for a single user.

Each user keeps, per channel j, the running sum of
``u(actual round action) - u(channel j at its best power)``. The regret for j
is that sum divided by the round count, floored at zero; the mixed strategy is
the regret vector normalised to one (uniform when every regret is zero).

Channel choice goes through three phases: explore every channel once in
random order, then sample from the mixed strategy, and lock permanently once
the channel just played is the most probable one, its probability (after
that round's update) has reached ``lock_threshold``, and it was a best channel
in that round (no counterfactual cost below the actual one). The first two
conditions stop a user committing on the strength of rounds in which it never
saw the channel occupied; the third stops users that herd onto the same
channel from locking there while an emptier one was visibly better.

Channels are addressed by index (0..N-1) throughout this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class RegretStateError(RuntimeError):
    pass


@dataclass
class RegretState:
    user: int
    n_channels: int
    lock_threshold: float = 0.9
    t: int = 0
    cumulative_diff: np.ndarray = field(default=None)
    visited: np.ndarray = field(default=None)
    omega: np.ndarray = field(default=None)
    locked: bool = False
    locked_channel: int | None = None
    last_channel: int | None = None
    last_was_best: bool = True  # played channel had the lowest cost last round

    def __post_init__(self):
        n = self.n_channels
        if n < 1:
            raise ValueError("need at least one channel")
        if not self.lock_threshold <= 1.0 or (n > 1 and not self.lock_threshold > 1.0 / n):
            raise ValueError(f"lock_threshold must lie in (1/N, 1], got {self.lock_threshold} for N={n}")
        if self.cumulative_diff is None:
            self.cumulative_diff = np.zeros(n)
        if self.visited is None:
            self.visited = np.zeros(n, dtype=bool)
        if self.omega is None:
            self.omega = np.full(n, 1.0 / n)

    @property
    def max_probability(self) -> float:
        return float(self.omega.max())


def regrets(state: RegretState) -> np.ndarray:
    if state.t < 1:
        raise RegretStateError("regret is undefined before the first round")
    return np.maximum(state.cumulative_diff / state.t, 0.0)


def regret(state: RegretState, j: int) -> float:
    return float(regrets(state)[j])


def mixed_strategy(regret_vec) -> np.ndarray:
    r = np.asarray(regret_vec, dtype=float)
    if np.any(r < 0):
        raise ValueError("regrets must be non-negative")
    total = r.sum()
    if total > 0:
        return r / total
    return np.full(len(r), 1.0 / len(r))


def update_round(state: RegretState, actual_utility: float, counterfactual) -> RegretState:
    """Fold one round into the state.

    ``counterfactual[j]`` is the cost the user would have had on channel j at
    that channel's best power; the entry for the channel actually played must
    equal ``actual_utility``.
    """
    cf = np.asarray(counterfactual, dtype=float)
    if cf.shape != (state.n_channels,):
        raise ValueError(f"counterfactual has shape {cf.shape}, expected ({state.n_channels},)")
    state.t += 1
    state.last_was_best = bool(actual_utility <= cf.min())
    state.cumulative_diff += actual_utility - cf
    if not state.locked:
        state.omega = mixed_strategy(regrets(state))
    return state


def _lock(state: RegretState, j: int) -> None:
    state.locked = True
    state.locked_channel = j
    omega = np.zeros(state.n_channels)
    omega[j] = 1.0
    state.omega = omega


def select_channel(state: RegretState, rng: np.random.Generator) -> int:
    if state.locked:
        return state.locked_channel
    unvisited = np.flatnonzero(~state.visited)
    if unvisited.size:
        j = int(unvisited[rng.integers(unvisited.size)])
    elif (
        state.last_channel is not None
        and state.last_was_best
        and int(np.argmax(state.omega)) == state.last_channel
        and state.omega[state.last_channel] >= state.lock_threshold
    ):
        j = state.last_channel
        _lock(state, j)
        return j
    else:
        cdf = np.cumsum(state.omega)
        j = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        j = min(j, state.n_channels - 1)
    state.visited[j] = True
    state.last_channel = j
    return j
