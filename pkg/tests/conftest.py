import pytest

from bsngame.scenario import DEFAULT_LEVELS_MW, load_scenario, scenario_from_dict


def make_scenario(positions, channels=(11, 12), snap_mode="nearest-level", levels=DEFAULT_LEVELS_MW, **top):
    """Scenario dict -> Scenario with library defaults for every user field."""
    users = []
    for n, pos in enumerate(positions):
        u = {"id": n, "position": list(pos)}
        if isinstance(pos, dict):
            u = {"id": n, **pos}
        users.append(u)
    data = {
        "users": users,
        "channels": list(channels),
        "p_min_mw": top.pop("p_min_mw", 29.04),
        "p_max_mw": top.pop("p_max_mw", 57.42),
        "delta": top.pop("delta", 2.4),
        "snap_mode": snap_mode,
    }
    if levels is not None:
        data["power_levels_mw"] = list(levels)
    data.update(top)
    return scenario_from_dict(data)


@pytest.fixture(scope="session")
def default_scenario():
    return load_scenario("builtin:default")


@pytest.fixture(scope="session")
def two_user():
    return load_scenario("builtin:two_user")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
