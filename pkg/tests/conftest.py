import numpy as np
import pytest

from liberation import measures
from liberation.verify import two_atom_custom


@pytest.fixture(scope="session")
def equal04():
    return measures.preset("equal", alpha=0.4)


@pytest.fixture(scope="session")
def equal0():
    return measures.preset("equal", alpha=0.0)


@pytest.fixture(scope="session")
def free_ab():
    return measures.preset("free", alpha=0.2, beta=0.6)


@pytest.fixture(scope="session")
def custom2():
    return two_atom_custom()


@pytest.fixture(scope="session")
def haar0():
    return measures.preset("haar", alpha=0.0, beta=0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion, in criterion order."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", []))
            if "criterion" in props and rep.when == "call":
                lines.append((props["criterion"], outcome, props.get("title", "")))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, outcome, title in sorted(lines, key=lambda x: (float(x[0]), x[2])):
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{mark} criterion {num}: {title}")
