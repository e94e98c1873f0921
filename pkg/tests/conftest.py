import functools

import numpy as np
import pytest

from hpfcm.benchcli import build_problem, config_from_dict


@functools.lru_cache(maxsize=None)
def rotated_problem(angle, p, h, k=0, refine="cut"):
    cfg = config_from_dict({"problem": {"angle_deg": float(angle)},
                            "discretization": {"p": p, "h": h, "k": k, "refine": refine}})
    return build_problem(cfg)


@functools.lru_cache(maxsize=None)
def plate_problem(h, k, p=2, sizing="absolute"):
    cfg = config_from_dict({"problem": {"kind": "perforated-plate"},
                            "discretization": {"p": p, "h": h, "k": k, "sizing": sizing}})
    return build_problem(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One line per acceptance criterion, printed at the end of the run.
ACCEPTANCE_LINES = {}


def record(criterion, passed, detail):
    status = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
    ACCEPTANCE_LINES[criterion] = f"[{status}] criterion {criterion}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
