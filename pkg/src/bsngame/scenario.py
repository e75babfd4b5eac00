"""Scenario description: users, geometry, radio constants and game weights.

A scenario is loaded once from JSON and never mutated afterwards, so a single
instance can be shared by any number of simulation runs.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

CONTINUOUS = "continuous"
NEAREST_LEVEL = "nearest-level"
SNAP_MODES = (CONTINUOUS, NEAREST_LEVEL)

MIN_SEPARATION_M = 0.01

USER_DEFAULTS = {
    "s": 1.0,
    "d": 0.5,
    "eta_mw": 2.6e-7,
    "gamma0": 1e9,
    "tau": 1.0,
    "xi": 1e-4,
}

DEFAULT_LEVELS_MW = (29.04, 32.67, 36.3, 42.24, 46.2, 50.69, 55.18, 57.42)

BUILTIN_PREFIX = "builtin:"


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be read, parsed or validated.

    ``problems`` holds one message per violated invariant.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class UserConfig:
    id: int
    position: tuple[float, float]
    s: float = USER_DEFAULTS["s"]
    d: float = USER_DEFAULTS["d"]
    eta: float = USER_DEFAULTS["eta_mw"]
    gamma0: float = USER_DEFAULTS["gamma0"]
    tau: float = USER_DEFAULTS["tau"]
    xi: float = USER_DEFAULTS["xi"]


@dataclass(frozen=True)
class Scenario:
    users: tuple[UserConfig, ...]
    channels: tuple[int, ...]
    p_min: float
    p_max: float
    delta: float
    power_levels: tuple[float, ...] | None = None
    snap_mode: str = NEAREST_LEVEL
    placement: tuple[tuple[float, float], int] | None = field(default=None, compare=False)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def channel_index(self, channel: int) -> int:
        try:
            return self.channels.index(channel)
        except ValueError:
            raise KeyError(f"channel {channel} is not in {list(self.channels)}") from None

    # Vectorised per-user constants, in user order.

    @cached_property
    def gains(self) -> np.ndarray:
        from .radio import link_gain

        return np.array([link_gain(u.s, u.d, self.delta) for u in self.users])

    @cached_property
    def eta(self) -> np.ndarray:
        return np.array([u.eta for u in self.users])

    @cached_property
    def gamma0(self) -> np.ndarray:
        return np.array([u.gamma0 for u in self.users])

    @cached_property
    def tau(self) -> np.ndarray:
        return np.array([u.tau for u in self.users])

    @cached_property
    def xi(self) -> np.ndarray:
        return np.array([u.xi for u in self.users])

    @cached_property
    def distances(self) -> np.ndarray:
        pos = np.array([u.position for u in self.users], dtype=float)
        diff = pos[:, None, :] - pos[None, :, :]
        return np.sqrt((diff**2).sum(axis=-1))

    @cached_property
    def coupling(self) -> np.ndarray:
        """``coupling[k, i]`` is S_k / v_ki^delta, the gain of user k's signal at
        user i's control node. The diagonal is zero."""
        s = np.array([u.s for u in self.users])
        with np.errstate(divide="ignore"):
            c = s[:, None] / self.distances**self.delta
        np.fill_diagonal(c, 0.0)
        return c

    @cached_property
    def levels_array(self) -> np.ndarray | None:
        if self.power_levels is None:
            return None
        return np.asarray(self.power_levels, dtype=float)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "users": [
                {
                    "id": u.id,
                    "position": list(u.position),
                    "s": u.s,
                    "d": u.d,
                    "eta_mw": u.eta,
                    "gamma0": u.gamma0,
                    "tau": u.tau,
                    "xi": u.xi,
                }
                for u in self.users
            ],
            "channels": list(self.channels),
            "p_min_mw": self.p_min,
            "p_max_mw": self.p_max,
            "delta": self.delta,
            "snap_mode": self.snap_mode,
        }
        if self.power_levels is not None:
            out["power_levels_mw"] = list(self.power_levels)
        return out

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_changes(self, **changes) -> "Scenario":
        """Copy with top-level fields replaced, re-validated."""
        data = {
            "users": self.users,
            "channels": self.channels,
            "p_min": self.p_min,
            "p_max": self.p_max,
            "delta": self.delta,
            "power_levels": self.power_levels,
            "snap_mode": self.snap_mode,
        }
        data.update(changes)
        scn = Scenario(**data)
        validate(scn)
        return scn


def pairwise_distance(scenario: Scenario, i: int, k: int) -> float:
    """Euclidean distance in meters between the control nodes of users i and k."""
    m = scenario.n_users
    if not (0 <= i < m and 0 <= k < m):
        raise IndexError(f"user index out of range for M={m}: {i}, {k}")
    if i == k:
        raise ValueError("pairwise_distance needs two distinct users")
    (xi, yi), (xk, yk) = scenario.users[i].position, scenario.users[k].position
    dist = math.hypot(xi - xk, yi - yk)
    if dist < MIN_SEPARATION_M:
        raise ScenarioError(f"users {i} and {k} are {dist:g} m apart (< {MIN_SEPARATION_M} m)")
    return dist


def feasibility_ratio_ok(tau: float, xi: float, gamma0: float, p_max: float) -> bool:
    """Weight condition tau/xi >= 2 p_max / gamma0**2, written without dividing by xi."""
    return tau * gamma0**2 >= 2.0 * p_max * xi


def validate(scn: Scenario) -> None:
    problems: list[str] = []
    if scn.n_users < 1:
        problems.append("need at least one user (M >= 1)")
    if scn.n_channels < 1:
        problems.append("need at least one channel (N >= 1)")
    if len(set(scn.channels)) != scn.n_channels:
        problems.append(f"channel identifiers must be distinct: {list(scn.channels)}")
    if not scn.p_min > 0:
        problems.append(f"p_min_mw must be > 0, got {scn.p_min}")
    if not scn.p_min <= scn.p_max:
        problems.append(f"p_min_mw ({scn.p_min}) must not exceed p_max_mw ({scn.p_max})")
    if not scn.delta > 0:
        problems.append(f"delta must be > 0, got {scn.delta}")
    if scn.snap_mode not in SNAP_MODES:
        problems.append(f"snap_mode must be one of {SNAP_MODES}, got {scn.snap_mode!r}")
    if scn.power_levels is not None:
        lv = list(scn.power_levels)
        if not lv:
            problems.append("power_levels_mw must not be empty when given")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            problems.append("power_levels_mw must be strictly increasing")
        out = [p for p in lv if not scn.p_min <= p <= scn.p_max]
        if out:
            problems.append(f"power levels outside [p_min, p_max]: {out}")
    elif scn.snap_mode == NEAREST_LEVEL:
        problems.append("snap_mode 'nearest-level' requires power_levels_mw")

    ids = [u.id for u in scn.users]
    if len(set(ids)) != len(ids):
        problems.append(f"user ids must be distinct: {ids}")
    for u in scn.users:
        for name in ("d", "s", "eta", "gamma0", "xi"):
            v = getattr(u, name)
            if not v > 0:
                problems.append(f"user {u.id}: {name} must be > 0, got {v}")
        if not u.tau >= 0:
            problems.append(f"user {u.id}: tau must be >= 0, got {u.tau}")
        if u.tau >= 0 and u.xi > 0 and u.gamma0 > 0 and scn.p_max > 0:
            if not feasibility_ratio_ok(u.tau, u.xi, u.gamma0, scn.p_max):
                problems.append(
                    f"user {u.id}: weight feasibility violated, tau/xi = {u.tau / u.xi:g} "
                    f"< 2*p_max/gamma0^2 = {2 * scn.p_max / u.gamma0**2:g}"
                )
    for a in range(scn.n_users):
        for b in range(a + 1, scn.n_users):
            (xa, ya), (xb, yb) = scn.users[a].position, scn.users[b].position
            dist = math.hypot(xa - xb, ya - yb)
            if dist < MIN_SEPARATION_M:
                problems.append(
                    f"users {scn.users[a].id} and {scn.users[b].id} are {dist:g} m apart "
                    f"(minimum {MIN_SEPARATION_M} m)"
                )
    if problems:
        raise ScenarioError(problems)


def _number(obj: dict, key: str, where: str, default=None) -> float:
    if key not in obj:
        if default is None:
            raise ScenarioError(f"{where}: missing required field {key!r}")
        return float(default)
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{where}: field {key!r} must be a number, got {v!r}")
    return float(v)


def _random_positions(m: int, field_wh, seed: int) -> list[tuple[float, float]]:
    w, h = (float(x) for x in field_wh)
    rng = np.random.default_rng(seed)
    pts = rng.uniform([0.0, 0.0], [w, h], size=(m, 2))
    return [(float(x), float(y)) for x, y in pts]


def scenario_from_dict(data: dict[str, Any]) -> Scenario:
    """Build and validate a scenario from its parsed JSON form."""
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a JSON object")
    users_raw = data.get("users")
    if not isinstance(users_raw, list):
        raise ScenarioError("'users' must be an array of user objects")
    channels = data.get("channels")
    if not isinstance(channels, list) or not all(
        isinstance(c, int) and not isinstance(c, bool) for c in channels
    ):
        raise ScenarioError("'channels' must be an array of integers")

    placement = data.get("placement")
    placed = None
    if placement is not None:
        try:
            fw = placement["field"]
            seed = int(placement["seed"])
            placed = _random_positions(len(users_raw), fw, seed)
            placement = ((float(fw[0]), float(fw[1])), seed)
        except (KeyError, TypeError, ValueError, IndexError):
            raise ScenarioError("'placement' must look like {\"field\": [w, h], \"seed\": int}") from None

    users = []
    for n, u in enumerate(users_raw):
        if not isinstance(u, dict):
            raise ScenarioError(f"users[{n}] must be an object")
        where = f"users[{n}]"
        uid = u.get("id", n)
        if isinstance(uid, bool) or not isinstance(uid, int):
            raise ScenarioError(f"{where}: 'id' must be an integer")
        if "position" in u:
            pos = u["position"]
            if (
                not isinstance(pos, list)
                or len(pos) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pos)
            ):
                raise ScenarioError(f"{where}: 'position' must be [x, y]")
            position = (float(pos[0]), float(pos[1]))
        elif placed is not None:
            position = placed[n]
        else:
            raise ScenarioError(f"{where}: no 'position' and no top-level 'placement'")
        users.append(
            UserConfig(
                id=uid,
                position=position,
                s=_number(u, "s", where, USER_DEFAULTS["s"]),
                d=_number(u, "d", where, USER_DEFAULTS["d"]),
                eta=_number(u, "eta_mw", where, USER_DEFAULTS["eta_mw"]),
                gamma0=_number(u, "gamma0", where, USER_DEFAULTS["gamma0"]),
                tau=_number(u, "tau", where, USER_DEFAULTS["tau"]),
                xi=_number(u, "xi", where, USER_DEFAULTS["xi"]),
            )
        )

    levels = data.get("power_levels_mw")
    if levels is not None:
        if not isinstance(levels, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in levels
        ):
            raise ScenarioError("'power_levels_mw' must be an array of numbers")
        levels = tuple(float(x) for x in levels)
    snap = data.get("snap_mode", NEAREST_LEVEL if levels is not None else CONTINUOUS)

    scn = Scenario(
        users=tuple(users),
        channels=tuple(channels),
        p_min=_number(data, "p_min_mw", "scenario"),
        p_max=_number(data, "p_max_mw", "scenario"),
        delta=_number(data, "delta", "scenario"),
        power_levels=levels,
        snap_mode=snap,
        placement=placement,
    )
    validate(scn)
    return scn


def load_scenario(path) -> Scenario:
    """Read a JSON scenario file.

    ``builtin:<name>`` loads one of the scenarios shipped with the package
    (``builtin:default``, ``builtin:two_user``).
    """
    path = str(path)
    if path.startswith(BUILTIN_PREFIX):
        name = path[len(BUILTIN_PREFIX):]
        res = resources.files("bsngame") / "data" / f"{name}.json"
        if not res.is_file():
            raise ScenarioError(f"no built-in scenario named {name!r}")
        text = res.read_text()
    else:
        p = Path(path)
        if not p.is_file():
            raise ScenarioError(f"scenario file not found: {path}")
        text = p.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"cannot parse scenario JSON: {exc}") from None
    return scenario_from_dict(data)
