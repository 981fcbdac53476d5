import pathlib

import pytest

SCENARIO_DIR = pathlib.Path(__file__).resolve().parents[1] / "scenarios"

# The eight-step reference task used across the suite.
TASK_EDGES = [(1, 2), (1, 3), (2, 4), (3, 4), (4, 5), (5, 6), (5, 7), (6, 8), (7, 8)]
TASK_VERTICES = 8
EXEC_TIMES = {
    "R1": [2, 6, 4, 2, 6, 4, 2, 6],
    "R2": [2, 6, 4, 2, 6, 4, 2, 6],
    "R3": [2, 6, 4, 2, 6, 4, 2, 6],
    "F": [1, 3, 2, 1, 3, 2, 1, 3],
    "C": [0.5, 1.5, 1, 0.5, 1.5, 1, 0.5, 1.5],
}
NODES = ("R1", "R2", "R3", "F", "C")


def scenario_text(name: str) -> str:
    return (SCENARIO_DIR / name).read_text(encoding="utf-8")


@pytest.fixture
def three_robots() -> str:
    return scenario_text("three_robots.scn")


@pytest.fixture
def three_robots_comm_only() -> str:
    return scenario_text("three_robots_comm_only.scn")


@pytest.fixture
def minimal() -> str:
    return scenario_text("minimal.scn")
