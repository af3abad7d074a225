import os
from pathlib import Path

import numpy as np
import pytest

from randinv.core import make_random_fn

DATA = Path(__file__).resolve().parent.parent / "data"

# criterion id -> (title, [outcomes]); filled by the acceptance module
_CRITERIA: dict[str, tuple[str, list[bool]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("acceptance")
    if mark is None or call.when != "call":
        return
    cid, title = mark.args
    entry = _CRITERIA.setdefault(cid, (title, []))
    entry[1].append(call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: int(c.split(".")[0])):
        title, outcomes = _CRITERIA[cid]
        status = "PASS" if all(outcomes) else "FAIL"
        terminalreporter.write_line(f"{status}  criterion {cid}: {title} ({sum(outcomes)}/{len(outcomes)} checks)")


@pytest.fixture
def ex22():
    """Two inputs: xi_1 = u1 surely, xi_2 = (2/3, 1/3)."""
    return make_random_fn(["1", "2"], ["u1", "u2"], [[1.0, 0.0], [2 / 3, 1 / 3]])


def random_stochastic(rng: np.random.Generator, n: int, m: int, alpha: float = 1.0) -> np.ndarray:
    return rng.dirichlet(np.full(m, alpha), size=n)


def random_fn(rng, n, m, alpha=1.0, prefix=("a", "u")):
    X = random_stochastic(rng, n, m, alpha)
    return make_random_fn([f"{prefix[0]}{i}" for i in range(n)], [f"{prefix[1]}{j}" for j in range(m)], X)


@pytest.fixture
def nprng():
    return np.random.default_rng(int(os.environ.get("RANDINV_TEST_SEED", "12345")))
