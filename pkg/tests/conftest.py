"""Shared fixtures: the three-asset stocks/bonds/bills example used throughout."""

import numpy as np
import pytest

from qdfolio import Portfolio, estimates_from_moments

# Annual percent moments of the classic stocks/bonds/T-bills allocation example.
TOY_MEANS_PCT = [15.876, 12.324, 8.748]
TOY_STDS_PCT = [16.603, 13.801, 0.759]
TOY_CORR = [
    [1.0, 0.341, -0.081],
    [0.341, 1.0, 0.050],
    [-0.081, 0.050, 1.0],
]
# Moderate-risk-aversion optimal weights for that example.
TOY_W0 = (0.581, 0.228, 0.191)


@pytest.fixture(scope="session")
def toy_est():
    return estimates_from_moments(TOY_MEANS_PCT, TOY_STDS_PCT, TOY_CORR)


@pytest.fixture(scope="session")
def toy_w0():
    return Portfolio(weights=np.array(TOY_W0))


ACCEPTANCE_LABELS = {
    1: "toy-example reproduction (20 seeds, both fitness functions)",
    2: "reference-portfolio arithmetic vs independent oracle",
    3: "MV solver equivalence with exhaustive grid search",
    4: "higher-dimensional synthetic experiment and robustness sweep",
    5: "property suites (recombine, shrinkage, audit, hulls, niches, determinism)",
    6: "selection procedure fixture traces",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion."""
    import re

    verdicts = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", getattr(rep, "nodeid", ""))
            if m and getattr(rep, "when", "call") == "call":
                n = int(m.group(1))
                verdicts[n] = status == "passed" and verdicts.get(n, True)
    if not verdicts:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for n in sorted(verdicts):
        verdict = "PASS" if verdicts[n] else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {verdict} - {ACCEPTANCE_LABELS.get(n, '')}")
