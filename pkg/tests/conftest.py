import os
import re

import hypothesis
import pytest

hypothesis.settings.register_profile("assocpipe", max_examples=60, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "assocpipe"))

SAMPLE_HEADER = [
    ("frame.time_relative", "0.000000000"),
    ("frame.time", "2017 Apr 12 07:49:36.18828 EDT"),
    ("ip.dst", "63.237.205.194"),
    ("ip.len", "1500"),
    ("ip.proto", "6"),
    ("ip.src", "133.40.77.44"),
    ("tcp.dstport", "55428"),
    ("tcp.flags", "0x00000010"),
    ("tcp.srcport", "80"),
]


@pytest.fixture
def sample_header():
    return list(SAMPLE_HEADER)


# One PASS/FAIL line per acceptance criterion in the terminal summary.
_criteria: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m or report.when == "teardown" or (report.when == "setup" and report.passed):
        return
    n = int(m.group(1))
    props = dict(report.user_properties)
    outcome = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
    if _criteria.get(n, ("",))[0] == "FAIL":
        return  # parametrized criteria fail if any instance fails
    _criteria[n] = (outcome, f"{m.group(2).replace('_', ' ')}  {props.get('detail', '')}".rstrip())


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        outcome, text = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {outcome}  {text}")
