import random

import pytest

from app.core.error_handling import ParseError, RankMismatchError
from app.services.word_core import (
    CyclicWord,
    ReducedWord,
    alpha,
    alpha_tilde,
    cancellation_count,
    concat,
    cyclic_reduce,
    enumerate_necklaces,
    free_reduce,
    invert,
    least_rotation,
    max_power,
    power,
    random_reduced_word,
)


def w(text, rank=2):
    return ReducedWord.parse(text, rank)


@pytest.mark.parametrize(
    "left, right, expected",
    [("ab", "BA", ""), ("ab", "b", "abb"), ("abA", "aB", "a")],
)
def test_concat(left, right, expected):
    assert concat(w(left), w(right)).format() == expected


def test_concat_rank_mismatch():
    with pytest.raises(RankMismatchError):
        concat(w("a", 2), w("a", 3))


@pytest.mark.parametrize("text, expected", [("", ""), ("ab", "BA"), ("aBa", "AbA")])
def test_invert(text, expected):
    assert invert(w(text)).format() == expected
    assert concat(w(text), invert(w(text))).is_identity()


@pytest.mark.parametrize("left, right, expected", [("ab", "BA", 2), ("ab", "b", 0), ("ab", "BBA", 1)])
def test_cancellation_count(left, right, expected):
    assert cancellation_count(w(left), w(right)) == expected
    assert len(concat(w(left), w(right))) == len(w(left)) + len(w(right)) - 2 * expected


@pytest.mark.parametrize(
    "text, necklace, conjugator",
    [("abA", "b", "a"), ("ab", "ab", ""), ("aabAA", "b", "aa"), ("", "", "")],
)
def test_cyclic_reduce(text, necklace, conjugator):
    c, u = cyclic_reduce(w(text))
    assert c.format() == necklace
    assert u.format() == conjugator


def test_cyclic_reduce_is_idempotent_on_cyclic_words():
    c, u = cyclic_reduce(w("ab"))
    again, conjugator = cyclic_reduce(c.as_word())
    assert again == c
    assert conjugator.is_identity()


def test_necklace_stored_as_least_rotation():
    assert CyclicWord.parse("ba", 2).letters == (1, 2)
    assert CyclicWord.parse("Bab", 2).format() == "a"
    assert CyclicWord.parse("bab", 2).format() == "abb"
    assert least_rotation([3, 1, 2]) == 1


def test_conjugation_leaves_necklace_unchanged(rng):
    for _ in range(200):
        x = random_reduced_word(3, rng.randint(0, 6), rng)
        word = random_reduced_word(3, rng.randint(1, 12), rng)
        conjugated = concat(concat(x, word), invert(x))
        assert cyclic_reduce(conjugated)[0] == cyclic_reduce(word)[0]


@pytest.mark.parametrize("text, expected", [("baaaa", 4), ("a", 1), ("ababa", 2), ("", 0), ("bab", 1)])
def test_alpha(text, expected):
    assert alpha(w(text)) == expected
    assert alpha(invert(w(text))) == expected


@pytest.mark.parametrize("text, expected", [("ba", 1), ("baaaa", 4), ("bab", 2), ("abab", 2)])
def test_alpha_tilde(text, expected):
    assert alpha_tilde(CyclicWord.parse(text, 2)) == expected


def test_alpha_tilde_of_empty_necklace():
    assert alpha_tilde(CyclicWord((), 2)) == 0


def test_alpha_of_dehn_twist_images():
    for k in range(1, 201):
        assert alpha(w("b" + "a" * k)) == k


def test_alpha_of_explicit_powers(rng):
    for _ in range(50):
        base = random_reduced_word(2, rng.randint(1, 5), rng)
        if base.letters[0] == -base.letters[-1]:
            continue
        p = rng.randint(1, 6)
        assert alpha(power(base, p)) >= p


def test_max_power_numpy_path_matches_python_path():
    long_sequence = (1, 2) * 50
    assert max_power(long_sequence) == 50
    assert max_power(long_sequence, cyclic=True) == 50
    assert max_power((1, 2) * 10) == 10
    assert max_power([1, -2, 1, -2, 3] * 20) == 20


def test_free_reduce_matches_pairwise_cancellation(rng):
    for _ in range(500):
        letters = [rng.choice([1, -1, 2, -2]) for _ in range(rng.randint(0, 60))]
        expected = list(letters)
        changed = True
        while changed:
            changed = False
            for k in range(len(expected) - 1):
                if expected[k] == -expected[k + 1]:
                    del expected[k:k + 2]
                    changed = True
                    break
        assert free_reduce(letters) == tuple(expected)


def test_random_reduced_word_has_requested_length():
    word = random_reduced_word(3, 40, random.Random(1))
    assert len(word) == 40


def test_enumerate_necklaces_rank_two():
    necklaces = enumerate_necklaces(2, 2)
    assert len(necklaces) == 12
    assert len(set(necklaces)) == 12


def test_parse_rejects_invalid_letter():
    with pytest.raises(ParseError) as excinfo:
        ReducedWord.parse("ab1", 2)
    assert excinfo.value.column == 3


def test_letters_outside_rank_are_rejected():
    with pytest.raises(ValueError):
        ReducedWord((3,), 2)


def test_concat_is_associative(rng):
    for _ in range(300):
        u, v, x = (random_reduced_word(3, rng.randint(0, 12), rng) for _ in range(3))
        assert concat(concat(u, v), x) == concat(u, concat(v, x))


@pytest.mark.slow
def test_free_reduce_on_long_random_letter_strings(rng):
    for _ in range(10_000):
        letters = [rng.choice([1, -1, 2, -2, 3, -3]) for _ in range(rng.randint(0, 200))]
        expected = list(letters)
        k = 0
        while k < len(expected) - 1:
            if expected[k] == -expected[k + 1]:
                del expected[k:k + 2]
                k = max(k - 1, 0)
            else:
                k += 1
        reduced = free_reduce(letters)
        assert reduced == tuple(expected)
        assert all(reduced[i] != -reduced[i + 1] for i in range(len(reduced) - 1))


def test_parse_keeps_the_requested_rank():
    assert ReducedWord.parse("ab", 3).rank == 3
    assert ReducedWord.parse("", 4).rank == 4
    assert CyclicWord.parse("ab", 3).rank == 3
    with pytest.raises(RankMismatchError):
        concat(w("ab"), w("ab", 3))
