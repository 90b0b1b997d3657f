import random

import numpy as np
import pytest

from app.core.error_handling import NotAnAutomorphismError, ParseError, PreconditionError
from app.services.automorphism import (
    Automorphism,
    GeneratorWord,
    Move,
    abelianization_matrix,
    apply,
    apply_cyclic,
    compose,
    conjugation,
    determinant,
    embed_aut_to_out,
    evaluate,
    generator_set,
    invert_automorphism,
    is_automorphism,
    is_inner,
    nielsen_decompose,
    outer_canonical,
    outer_equal,
    power_automorphism,
    random_automorphism,
    symmetric_generator_set,
)
from app.services.word_core import CyclicWord, ReducedWord, alpha, random_reduced_word


def test_apply(twist):
    assert apply(twist, ReducedWord.parse("aa", 2)).format() == "abab"
    assert apply(twist, ReducedWord.parse("aB", 2)).format() == "a"
    assert apply(Automorphism.identity(2), ReducedWord.parse("aBBa", 2)).format() == "aBBa"


def test_compose_applies_right_factor_first(twist, swap):
    composed = compose(twist, swap)
    assert [image.format() for image in composed.images] == ["b", "ab"]
    word = ReducedWord.parse("aBab", 2)
    assert apply(composed, word) == apply(twist, apply(swap, word))


def test_apply_cyclic_lengths_follow_fibonacci(fibonacci):
    c = CyclicWord.parse("a", 2)
    lengths = []
    for _ in range(8):
        c = apply_cyclic(fibonacci, c)
        lengths.append(len(c))
    assert lengths == [1, 2, 3, 5, 8, 13, 21, 34]


def test_dehn_twist_powers_grow_alpha():
    g = Automorphism.parse(["a", "ba"])
    b = ReducedWord.parse("b", 2)
    for k in (1, 2, 10, 50):
        assert alpha(apply(power_automorphism(g, k), b)) == k


def test_invert_automorphism(twist, swap, fibonacci):
    assert [image.format() for image in invert_automorphism(twist).images] == ["aB", "b"]
    assert invert_automorphism(swap) == swap
    for phi in (twist, fibonacci, compose(fibonacci, twist)):
        assert compose(phi, invert_automorphism(phi)) == Automorphism.identity(2)


@pytest.mark.parametrize(
    "images",
    [["ab", "b"], ["b", "ab"], ["ba", "a"], ["AB", "B"], ["a", "b"], ["bc", "a", "c"]],
)
def test_nielsen_decompose_evaluates_back(images):
    phi = Automorphism.parse(images)
    assert evaluate(nielsen_decompose(phi), phi.rank) == phi


def test_nielsen_decompose_lengths(twist):
    assert nielsen_decompose(twist).moves == (Move("twist", 1, 2),)
    assert len(nielsen_decompose(Automorphism.identity(3))) == 0


def test_non_automorphism_is_rejected():
    squares = Automorphism.parse(["aa", "b"])
    assert not is_automorphism(squares)
    with pytest.raises(NotAnAutomorphismError):
        nielsen_decompose(squares)


def test_generator_word_inverse(twist):
    word = GeneratorWord((Move("twist", 1, 2), Move("inversion", 2)))
    assert compose(evaluate(word, 2), evaluate(word.inverse(), 2)) == Automorphism.identity(2)
    assert GeneratorWord.from_json(word.to_json()) == word


def test_outer_canonical_identifies_inner_automorphisms(twist):
    inner = conjugation(ReducedWord.parse("ba", 2))
    assert is_inner(inner)
    assert not is_inner(twist)
    assert outer_canonical(compose(inner, twist)) == outer_canonical(twist)
    assert outer_equal(Automorphism.identity(2), conjugation(ReducedWord.parse("a", 2)))


def test_outer_equal_distinguishes_twists(twist):
    other = Automorphism.parse(["a", "ba"])
    assert not outer_equal(twist, other)
    assert outer_equal(twist, twist)


def test_outer_canonical_minimizes_total_length(twist, rng):
    for _ in range(20):
        letters = [rng.choice([1, -1, 2, -2]) for _ in range(6)]
        inner = conjugation(ReducedWord.from_letters(letters, 2))
        canonical = outer_canonical(compose(inner, twist))
        assert canonical.automorphism().total_length() == 3


def test_generator_set_sizes():
    assert len(generator_set(2)) == 5
    assert len(symmetric_generator_set(2)) == 7
    assert len(symmetric_generator_set(3)) == 18
    labels = [label.label() for label, _ in symmetric_generator_set(2)]
    assert "twist(1,2)^-1" in labels


def test_generator_set_needs_rank_two():
    with pytest.raises(PreconditionError):
        generator_set(1)


def test_abelianization_and_determinant(fibonacci, twist):
    assert abelianization_matrix(fibonacci).tolist() == [[0, 1], [1, 1]]
    assert determinant(abelianization_matrix(fibonacci)) == -1
    assert determinant(abelianization_matrix(twist)) == 1
    assert determinant(np.array([[1, 2, 3], [0, 1, 4], [5, 6, 0]])) == 1


def test_embed_aut_to_out(twist):
    outer = embed_aut_to_out(twist)
    assert outer.rank == 3
    assert outer.canonical_images[2].format() == "c"


def test_from_json_wraps_bad_payloads():
    with pytest.raises(ParseError):
        Automorphism.from_json({"rank": 2})
    with pytest.raises(ParseError):
        Automorphism.from_json({"rank": 2, "images": ["a"]})
    phi = Automorphism.from_json({"rank": 2, "images": [[1, 2], [2]]})
    assert phi.to_json() == {"rank": 2, "images": ["ab", "b"]}


def test_random_automorphism_is_seeded():
    first, word = random_automorphism(2, 8, random.Random(3))
    second, _ = random_automorphism(2, 8, random.Random(3))
    assert first == second
    assert len(word) == 8
    assert evaluate(word, 2) == first
    assert abs(determinant(abelianization_matrix(first))) == 1


def test_abelianization_of_composition_is_matrix_product(rng):
    for _ in range(100):
        rank = rng.choice([2, 3, 4])
        phi, _ = random_automorphism(rank, 8, rng)
        psi, _ = random_automorphism(rank, 8, rng)
        expected = abelianization_matrix(phi) @ abelianization_matrix(psi)
        assert np.array_equal(abelianization_matrix(compose(phi, psi)), expected)


def test_apply_cyclic_ignores_the_chosen_rotation(rng):
    for _ in range(100):
        rank = rng.choice([2, 3])
        phi, _ = random_automorphism(rank, 6, rng)
        necklace = CyclicWord.from_letters(random_reduced_word(rank, rng.randint(1, 10), rng).letters, rank)
        image = apply_cyclic(phi, necklace)
        for rotation in necklace.rotations():
            assert CyclicWord.from_letters(apply(phi, rotation).letters, rank) == image


def test_embedded_inner_automorphism_is_not_inner():
    by_a = conjugation(ReducedWord.parse("a", 2))
    assert is_inner(by_a)
    embedded = embed_aut_to_out(by_a)
    assert embedded != embed_aut_to_out(Automorphism.identity(2))
    assert not is_inner(embedded.automorphism())


@pytest.mark.slow
def test_nielsen_round_trip_on_random_automorphisms():
    rng = random.Random(11)
    for _ in range(500):
        rank = rng.choice([2, 3, 4])
        phi, _ = random_automorphism(rank, rng.randint(1, 20), rng)
        assert evaluate(nielsen_decompose(phi), rank) == phi
