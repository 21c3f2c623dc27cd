import itertools

import numpy as np
import pytest

from bethepoly.graph import FactorGraph


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def naive_z(g: FactorGraph) -> float:
    """Partition function by an explicit loop over assignments (independent of the library's enumeration)."""
    total = 0.0
    for assignment in itertools.product((0, 1), repeat=g.num_edges):
        w = 1.0
        for f in g.factors:
            idx = sum(assignment[e] << j for j, e in enumerate(g.incidence[f]))
            w *= g.tables[f][idx]
        total += w
    return total


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one ``criterion N: PASS|FAIL`` line; lines are echoed again in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
