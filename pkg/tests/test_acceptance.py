"""Acceptance gate: the ten numbered verification criteria, one test each.

Each test delegates to the corresponding check in ``chbsim.verify`` (the same
code behind ``python3 -m chbsim.cli verify``) and prints its one-line summary
so the measured numbers appear in the test log.  The session-scoped cache in
``conftest.py`` shares expensive simulation runs between criteria.
"""
import pytest

from chbsim import verify


def _check(crit_cache, fn):
    res = fn(crit_cache)
    print(res.line())
    assert res.passed, res.line()


def test_criterion_01_brinkman_oracle_equivalence(crit_cache):
    _check(crit_cache, verify.criterion_1)


def test_criterion_02_constant_force_exactness(crit_cache):
    _check(crit_cache, verify.criterion_2)


def test_criterion_03_gradient_flow_energy_decay(crit_cache):
    _check(crit_cache, verify.criterion_3)


def test_criterion_04_mass_ledgers(crit_cache):
    _check(crit_cache, verify.criterion_4)


def test_criterion_05_energy_budget_residual(crit_cache):
    _check(crit_cache, verify.criterion_5)


def test_criterion_06_manufactured_solution_convergence(crit_cache):
    _check(crit_cache, verify.criterion_6)


def test_criterion_07_k_uniform_bound_echo(crit_cache):
    _check(crit_cache, verify.criterion_7)


def test_criterion_08_assumption_checker(crit_cache):
    _check(crit_cache, verify.criterion_8)


def test_criterion_09_gronwall_certificates(crit_cache):
    _check(crit_cache, verify.criterion_9)


def test_criterion_10_deterministic_outputs(crit_cache):
    _check(crit_cache, verify.criterion_10)
