"""Acceptance suite: every checked claim at its pinned tolerance, one
pass/fail line per criterion (run with -s to watch them stream)."""

import pytest

from uavmec import acceptance
from uavmec.runner import solve_report


@pytest.fixture(scope="module")
def stock(table1_cfg):
    report, inst = solve_report(table1_cfg)
    return table1_cfg, report, inst


def _check(result):
    print(result.line())
    assert result.passed, result.line()


def test_criterion_1_convexity(stock):
    cfg, _, _ = stock
    _check(acceptance.criterion_convexity(cfg, samples=1000))


def test_criterion_2_closed_form_consistency(stock):
    cfg, _, _ = stock
    _check(acceptance.criterion_closed_form_consistency(cfg, trials=100))


def test_criterion_3_oracle_equivalence(stock):
    cfg, _, _ = stock
    _check(acceptance.criterion_oracle_equivalence(cfg))


def test_criterion_4_kkt_at_optimum(stock):
    cfg, report, inst = stock
    _check(acceptance.criterion_kkt(cfg, report, inst))


def test_criterion_5_strong_duality(stock):
    cfg, report, inst = stock
    _check(acceptance.criterion_strong_duality(cfg, report, inst))


def test_criterion_6_convergence(stock):
    cfg, _, _ = stock
    _check(acceptance.criterion_convergence(cfg))


def test_criterion_7_trend_reproduction(stock):
    cfg, _, _ = stock
    _check(acceptance.criterion_trends(cfg))


def test_criterion_8_derived_constants(stock):
    cfg, _, _ = stock
    _check(acceptance.criterion_derived_constants(cfg))


def test_criterion_9_determinism(stock):
    cfg, _, _ = stock
    _check(acceptance.criterion_determinism(cfg))
