import numpy as np
import pytest

from rbsched import env as E


def small_config(**kw) -> E.EnvConfig:
    n = kw.pop("num_users", 2)
    profiles = kw.pop("profiles", [E.PROFILE_TABLE[E.ProfileLabel.NORMAL]] * n)
    return E.EnvConfig(num_users=n, profiles=profiles, **kw)


def put_jobs(state: E.EnvState, jobs):
    """Replace the queue with ``(user, remaining, ttl)`` jobs, keeping ledgers consistent."""
    state.queue = []
    for user, remaining, ttl in jobs:
        job = E.Job(state.next_job_id, user, remaining, ttl, remaining)
        state.next_job_id += 1
        state.users[user].lifetime_requested += remaining
        state.queue.append(job)
    return state.queue


@pytest.fixture
def default_config():
    return E.EnvConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
