import sys
from pathlib import Path

import numpy as np
import pytest

from hiercat.hierarchy import Hierarchy

sys.path.insert(0, str(Path(__file__).parent))


def fig2_hierarchy() -> Hierarchy:
    """Three top classes with three children each (leaves 2.1 .. 2.9)."""
    return Hierarchy.from_children_counts([[3, 3, 3]], 3)


def toy_table(rng: np.random.Generator):
    """Leaf embeddings that realise the worked toy reduction.

    Children 2.1, 2.2, 2.4, 2.5 share one location and 2.3, 2.6 another;
    the children of 1.3 sit symmetrically around their own mean, far away.
    A random rotation, scale and shift is applied to the whole picture,
    plus a little jitter.
    """
    from hiercat.embedding import EmbeddingTable, aggregate_up

    A = np.array([0.0, 0.0])
    B = np.array([1.0, 0.0])
    C = np.array([6.0, 4.0])
    angles = np.array([0.0, 2.0, 4.0]) * np.pi / 3.0 + rng.uniform(0, 2 * np.pi)
    tri = C + 0.3 * np.column_stack([np.cos(angles), np.sin(angles)])
    leaves = np.vstack([A, A, B, A, A, B, tri])
    leaves = leaves + rng.normal(scale=0.005, size=leaves.shape)
    theta = rng.uniform(0, 2 * np.pi)
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    leaves = rng.uniform(0.1, 10.0) * leaves @ rot.T + rng.normal(scale=5.0, size=2)
    h = fig2_hierarchy()
    return h, aggregate_up(EmbeddingTable(2, {2: leaves}), h)


@pytest.fixture
def fig2():
    return fig2_hierarchy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed at the end of the session
CRITERIA: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
    CRITERIA.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
