import random

import pytest

from app.core.error_handling import PreconditionError
from app.services.automorphism import Automorphism, Generator, Move, generator_set
from app.services.cancellation import CancellationAnalyzer


def test_identity_has_no_cancellation():
    assert CancellationAnalyzer.bcc_estimate(Automorphism.identity(2), 5) == 0


def test_twist_cancellation_constant(twist):
    assert CancellationAnalyzer.bcc_estimate(twist, 6) == 1
    assert CancellationAnalyzer.bcc_estimate(Automorphism.parse(["aB", "b"]), 6) == 1


def test_permutations_and_inversions_have_no_cancellation():
    for label, g in generator_set(3):
        if label.op != "twist":
            assert CancellationAnalyzer.bcc_estimate(g, 4) == 0


def test_profile_is_monotone_and_bounded(fibonacci):
    profile = CancellationAnalyzer.bcc_profile(fibonacci, 6)
    assert profile == sorted(profile)
    longest_image = max(len(image) for image in fibonacci.images)
    assert all(value <= longest_image * depth for depth, value in enumerate(profile, start=1))


def test_profile_needs_positive_depth(twist):
    with pytest.raises(PreconditionError):
        CancellationAnalyzer.bcc_profile(twist, 0)


def test_is_stabilized():
    assert CancellationAnalyzer.is_stabilized([0, 1, 1, 1])
    assert not CancellationAnalyzer.is_stabilized([1, 1, 2])
    assert not CancellationAnalyzer.is_stabilized([1, 1])


def test_lemma1_constants_rank_two():
    report = CancellationAnalyzer.lemma1_constants(2, 5)
    assert report.per_generator["twist(1,2)"] == 1
    assert report.per_generator["permutation(1,2)"] == 0
    assert report.symmetrized["twist(1,2)"] == 2
    assert report.lemma1_word_constant == 2
    assert report.lemma1_cyclic_constant == 4
    assert report.stabilized
    assert not report.certified


def test_lemma1_constants_are_monotone_in_depth():
    shallow = CancellationAnalyzer.lemma1_constants(2, 3)
    deep = CancellationAnalyzer.lemma1_constants(2, 6, workers=2)
    for label, value in shallow.per_generator.items():
        assert value <= deep.per_generator[label]


def test_certified_constant_holds_exhaustively():
    report = CancellationAnalyzer.lemma1_constants(2, 5, certify_samples=100, maxlen=16, rng=random.Random(3), exhaustive_length=5)
    assert report.certified
    assert report.doublings == 0
    assert report.lemma1_cyclic_constant == 4


def test_verify_lemma1_identity_generator_with_zero_constant():
    identity = [Generator(Move("permutation", 1, 2), Automorphism.identity(2))]
    assert CancellationAnalyzer.verify_lemma1(2, 0, 200, 20, random.Random(0), generators=identity) == []


def test_verify_lemma1_with_report_constant():
    assert CancellationAnalyzer.verify_lemma1(2, 4, 300, 30, random.Random(11), exhaustive_length=5) == []


def test_verify_lemma1_rejects_negative_constant():
    with pytest.raises(PreconditionError):
        CancellationAnalyzer.verify_lemma1(2, -1, 1, 5)


def test_zero_constant_is_violated_by_twists():
    violations = CancellationAnalyzer.verify_lemma1(2, 0, 0, 0, exhaustive_length=3)
    assert violations
    assert all(v.alpha_after > v.alpha_before for v in violations)


def test_straight_line_bounds():
    report = CancellationAnalyzer.lemma1_constants(2, 5)
    assert CancellationAnalyzer.verify_word_bounds(2, report.symmetrized, 300, 30, random.Random(5)) == []


def test_sharpness_probe_shape():
    result = CancellationAnalyzer.sharpness_probe(2, 1, 0, 0, exhaustive_length=3)
    assert result["probe_constant"] == 0
    assert result["violations"] > 0
    assert result["possibly_non_sharp"] is False
    assert CancellationAnalyzer.sharpness_probe(2, 0, 10, 5)["probe_constant"] is None


@pytest.mark.slow
def test_depth_eight_constant_certifies_rank_two():
    report = CancellationAnalyzer.lemma1_constants(
        2, 8, certify_samples=10_000, maxlen=40, rng=random.Random(8), exhaustive_length=8
    )
    assert report.certified
    assert report.lemma1_cyclic_constant == 4
    assert CancellationAnalyzer.verify_lemma1(2, report.lemma1_cyclic_constant, 10_000, 40, random.Random(9)) == []


@pytest.mark.slow
def test_depth_eight_constant_certifies_rank_three():
    report = CancellationAnalyzer.lemma1_constants(3, 8, certify_samples=1_000, maxlen=40, rng=random.Random(8))
    assert report.certified
    assert CancellationAnalyzer.verify_lemma1(3, report.lemma1_cyclic_constant, 1_000, 40, random.Random(9)) == []
