"""Pure mock sub-tools for fully offline pipeline tests."""

from __future__ import annotations

import os


def mock_echo_tool(payload: str) -> str:
    """Return the payload verbatim."""
    return payload


def mock_fail_tool(mode: str = "value") -> None:
    """Raise a deterministic exception of the requested flavor."""
    if mode == "import":
        raise ImportError("mock module 'nonexistent_helper' is not importable")
    if mode == "value":
        raise ValueError("mock invalid value supplied")
    if mode == "timeout":
        while True:  # runs until the sandbox wall-clock limit fires
            pass
    raise ValueError(f"unknown failure mode {mode!r}")


def mock_flaky_tool(payload: str, fail_times: int, counter_file: str = "flaky_counter.txt") -> str:
    """Fail ``fail_times`` times, then echo the payload.

    Attempt state persists in ``counter_file`` relative to the working
    directory so repeated executions in one scratch directory observe the
    failure sequence in order.
    """
    count = 0
    if os.path.exists(counter_file):
        with open(counter_file, "r", encoding="utf-8") as fh:
            count = int(fh.read().strip() or "0")
    count += 1
    with open(counter_file, "w", encoding="utf-8") as fh:
        fh.write(str(count))
    if count <= fail_times:
        raise ValueError(f"flaky failure {count} of {fail_times}")
    return payload
