"""Mock tools importable by sandboxed scripts in offline pipeline tests.

``flaky`` fails a scripted number of times before succeeding, sequenced
through a counter file in the script's working directory so repair attempts
of the same tool run observe the progression.
"""

from __future__ import annotations

import os


class MockImportFailure(ImportError):
    pass


class MockValueFailure(ValueError):
    pass


def echo(payload: str) -> str:
    """Return the payload verbatim."""
    return payload


def fail(mode: str = "value") -> None:
    """Raise a deterministic exception of the requested flavor."""
    if mode == "import":
        raise MockImportFailure("mock module 'nonexistent_helper' is not importable")
    if mode == "value":
        raise MockValueFailure("mock invalid value supplied")
    if mode == "timeout":
        while True:  # burns wall clock until the sandbox limit kills it
            pass
    raise ValueError(f"unknown failure mode {mode!r}")


def flaky(payload: str, fail_times: int, counter_file: str = "flaky_counter.txt") -> str:
    """Fail ``fail_times`` times, then echo the payload.

    The attempt count persists in ``counter_file`` relative to the working
    directory, so successive executions in one scratch dir step through the
    failure sequence deterministically.
    """
    count = 0
    if os.path.exists(counter_file):
        with open(counter_file, "r", encoding="utf-8") as fh:
            count = int(fh.read().strip() or "0")
    count += 1
    with open(counter_file, "w", encoding="utf-8") as fh:
        fh.write(str(count))
    if count <= fail_times:
        raise MockValueFailure(f"flaky failure {count} of {fail_times}")
    return payload
