"""Shared fixtures.

The criterion cache is session-scoped so the expensive simulation runs
(gradient-flow decay, the paired budget runs, the spectral sweep) are
computed once and shared between the acceptance tests and the unit tests
that probe the same trajectories.
"""
import pytest

from chbsim import verify


@pytest.fixture(scope="session")
def crit_cache():
    return verify.Cache()


@pytest.fixture(scope="session")
def budget_runs(crit_cache):
    """((coarse, fine), model, (relax, settle)) from the disc/Lima pipeline."""
    return crit_cache.fetch("budget_runs", verify._budget_runs)
