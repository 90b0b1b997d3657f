import random

import pytest

from app.core.error_handling import BudgetExceededError, ParseError, RankMismatchError
from app.models.reports import TauEstimate
from app.services.automorphism import Automorphism, compose, conjugation
from app.services.cayley_oracle import CayleyOracle
from app.services.translen import TranslationLengthEstimator
from app.services.word_core import ReducedWord


@pytest.fixture(scope="module")
def ball():
    return CayleyOracle.build_ball(2, 3)


def test_first_layers(ball):
    assert ball.layers[:2] == [1, 7]
    assert ball.radius == 3
    assert len(ball) == sum(ball.layers)
    assert len(CayleyOracle.sphere(ball, 1)) == 7


def test_exact_norms(ball, twist, fibonacci, swap):
    assert CayleyOracle.exact_norm(ball, Automorphism.identity(2)) == 0
    assert CayleyOracle.exact_norm(ball, conjugation(ReducedWord.parse("ab", 2))) == 0
    assert CayleyOracle.exact_norm(ball, twist) == 1
    assert CayleyOracle.exact_norm(ball, swap) == 1
    assert CayleyOracle.exact_norm(ball, fibonacci) == 2


def test_norm_is_conjugation_invariant(ball, twist):
    inner = conjugation(ReducedWord.parse("Ba", 2))
    assert CayleyOracle.exact_norm(ball, compose(inner, twist)) == CayleyOracle.exact_norm(ball, twist)


def test_rank_mismatch(ball):
    with pytest.raises(RankMismatchError):
        CayleyOracle.exact_norm(ball, Automorphism.identity(3))


def test_layers_do_not_depend_on_workers(ball):
    parallel = CayleyOracle.build_ball(2, 3, workers=3)
    assert parallel.layers == ball.layers
    assert CayleyOracle.distance_table_digest(parallel) == CayleyOracle.distance_table_digest(ball)


def test_node_budget():
    with pytest.raises(BudgetExceededError) as excinfo:
        CayleyOracle.build_ball(2, 2, node_budget=5)
    assert excinfo.value.details["completed_radius"] == 0


def test_snapshot_round_trip(tmp_path, ball):
    target = tmp_path / "ball.jsonl"
    CayleyOracle.save_ball(ball, target)
    loaded = CayleyOracle.load_ball(target)
    assert loaded.table == ball.table
    assert loaded.layers == ball.layers
    assert loaded.convention == "symmetrized"


def test_snapshot_rejects_unknown_format(tmp_path):
    target = tmp_path / "bad.jsonl"
    target.write_text('{"format": "other", "version": 1}\n')
    with pytest.raises(ParseError):
        CayleyOracle.load_ball(target)


def test_verify_tau_bounds(ball, twist, fibonacci):
    twist_report = CayleyOracle.verify_tau_bounds(ball, twist, TauEstimate(lower=0.25, method="case2_upg"))
    assert twist_report.norm == 1
    assert twist_report.entries
    assert twist_report.violations == 0

    fibonacci_report = CayleyOracle.verify_tau_bounds(ball, fibonacci, TauEstimate(lower=0.69, method="case1_exponential"))
    assert fibonacci_report.violations == 0


def test_verify_tau_bounds_flags_impossible_lower_bound(ball, twist):
    report = CayleyOracle.verify_tau_bounds(ball, twist, TauEstimate(lower=5.0, method="case2_upg"))
    assert report.violations == len(report.entries) > 0


@pytest.mark.slow
def test_radius_five_ball_confirms_fixture_estimates(twist, fibonacci):
    index = CayleyOracle.build_ball(2, 5)
    assert CayleyOracle.build_ball(2, 5, workers=4).layers == index.layers
    for phi in (twist, fibonacci):
        estimate = TranslationLengthEstimator.tau_estimate(phi, constant=4, rng=random.Random(0), index=index)
        report = CayleyOracle.verify_tau_bounds(index, phi, estimate)
        assert report.entries
        assert report.violations == 0
        assert estimate.lower <= estimate.upper
