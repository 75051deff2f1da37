"""Shared fixtures and the acceptance-criteria reporter.

Acceptance tests register one line per criterion through ``acceptance_report``;
the terminal summary prints them so a plain ``pytest`` run shows each
criterion's pass/fail and measured value.
"""
import numpy as np
import pytest

import gridhedge as gh

_ACCEPTANCE_LINES = []


def record_criterion(name: str, passed: bool, detail: str) -> None:
    _ACCEPTANCE_LINES.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE_LINES:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{status}  {name}: {detail}")


@pytest.fixture
def demo_grid():
    """Two correlated microgrids used by the bundled case studies."""
    return gh.GridEnsemble(
        params=(gh.GbmParams(0.006, 0.03), gh.GbmParams(0.005, 0.04)),
        corr=gh.CorrelationMatrix.pairwise(0.6),
        demands=np.array([20.0, 25.0]),
        battery_unit_kw=1.0,
    )


@pytest.fixture
def single_grid():
    return gh.GridEnsemble(
        params=(gh.GbmParams(0.006, 0.03),),
        corr=gh.CorrelationMatrix.identity(1),
        demands=np.array([20.0]),
        battery_unit_kw=1.0,
    )
