"""Freely reduced and cyclically reduced words in F_n.

Letters are signed generator indices: ``+i`` is x_i and ``-i`` its inverse.
Text uses ``a..z`` for generators and ``A..Z`` for inverses, so text I/O is
limited to rank 26; the JSON encoding is a plain list of signed integers.
"""
from __future__ import annotations

import itertools
import logging
import random
import string
from dataclasses import dataclass
from typing import Hashable, Iterable, Iterator, List, Sequence, Tuple

import numpy as np

from ..core.error_handling import ParseError, RankMismatchError

logger = logging.getLogger(__name__)

Letter = int

TEXT_RANK_LIMIT = 26
# Below this length the pure-Python scan beats numpy call overhead.
_NUMPY_THRESHOLD = 64


def letter_key(letter: Letter) -> int:
    """Total order a < A < b < B < ... used for canonical rotations."""
    return 2 * abs(letter) + (0 if letter > 0 else 1)


def letter_to_char(letter: Letter) -> str:
    char = string.ascii_lowercase[abs(letter) - 1]
    return char if letter > 0 else char.upper()


def char_to_letter(char: str) -> Letter:
    if char in string.ascii_lowercase:
        return string.ascii_lowercase.index(char) + 1
    if char in string.ascii_uppercase:
        return -(string.ascii_uppercase.index(char) + 1)
    raise ValueError(f"Invalid letter {char!r}")


def free_reduce(letters: Iterable[int]) -> Tuple[int, ...]:
    """Stack reduction; also tightens edge paths, which use the same encoding."""
    stack: List[int] = []
    for letter in letters:
        if stack and stack[-1] == -letter:
            stack.pop()
        else:
            stack.append(letter)
    return tuple(stack)


def is_reduced(letters: Sequence[int]) -> bool:
    return all(letters[k] != -letters[k + 1] for k in range(len(letters) - 1))


def _check_rank(letters: Sequence[int], rank: int) -> None:
    for letter in letters:
        if letter == 0 or abs(letter) > rank:
            raise ValueError(f"Letter {letter} outside rank {rank}")


def least_rotation(keys: Sequence[int]) -> int:
    """Start index of the lexicographically least rotation (two-pointer scan)."""
    n = len(keys)
    i, j, k = 0, 1, 0
    while i < n and j < n and k < n:
        a = keys[(i + k) % n]
        b = keys[(j + k) % n]
        if a == b:
            k += 1
            continue
        if a > b:
            i += k + 1
        else:
            j += k + 1
        if i == j:
            j += 1
        k = 0
    return min(i, j) if n else 0


@dataclass(frozen=True)
class ReducedWord:
    """A freely reduced word; the empty tuple is the identity."""

    letters: Tuple[int, ...]
    rank: int

    def __post_init__(self) -> None:
        _check_rank(self.letters, self.rank)
        if not is_reduced(self.letters):
            raise ValueError(f"Word {self.letters} is not freely reduced")

    @classmethod
    def from_letters(cls, letters: Iterable[int], rank: int) -> "ReducedWord":
        return cls(free_reduce(letters), rank)

    @classmethod
    def identity(cls, rank: int) -> "ReducedWord":
        return cls((), rank)

    @classmethod
    def generator(cls, index: int, rank: int) -> "ReducedWord":
        return cls((index,), rank)

    @classmethod
    def parse(cls, text: str, rank: int) -> "ReducedWord":
        text = text.strip()
        letters = []
        for column, char in enumerate(text, start=1):
            try:
                letters.append(char_to_letter(char))
            except ValueError:
                raise ParseError(f"Invalid letter {char!r}", line=1, column=column, source=text)
        return cls.from_letters(letters, rank)

    @classmethod
    def from_json(cls, values: Sequence[int], rank: int) -> "ReducedWord":
        return cls.from_letters((int(value) for value in values), rank)

    def to_json(self) -> List[int]:
        return list(self.letters)

    def format(self) -> str:
        if self.rank > TEXT_RANK_LIMIT:
            raise ValueError(f"Text encoding supports rank <= {TEXT_RANK_LIMIT}")
        return "".join(letter_to_char(letter) for letter in self.letters)

    def __str__(self) -> str:
        return self.format() if self.rank <= TEXT_RANK_LIMIT else str(self.to_json())

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[int]:
        return iter(self.letters)

    def is_identity(self) -> bool:
        return not self.letters

    def sort_key(self) -> Tuple[int, Tuple[int, ...]]:
        return len(self.letters), tuple(letter_key(letter) for letter in self.letters)


@dataclass(frozen=True)
class CyclicWord:
    """A cyclically reduced necklace stored as its least rotation."""

    letters: Tuple[int, ...]
    rank: int

    def __post_init__(self) -> None:
        _check_rank(self.letters, self.rank)
        if not is_reduced(self.letters) or (len(self.letters) > 1 and self.letters[0] == -self.letters[-1]):
            raise ValueError(f"Necklace {self.letters} is not cyclically reduced")
        keys = [letter_key(letter) for letter in self.letters]
        if least_rotation(keys) != 0:
            raise ValueError(f"Necklace {self.letters} is not in canonical rotation")

    @classmethod
    def from_letters(cls, letters: Iterable[int], rank: int) -> "CyclicWord":
        reduced = free_reduce(letters)
        depth = _peel_depth(reduced)
        core = reduced[depth:len(reduced) - depth]
        start = least_rotation([letter_key(letter) for letter in core])
        return cls(core[start:] + core[:start], rank)

    @classmethod
    def parse(cls, text: str, rank: int) -> "CyclicWord":
        word = ReducedWord.parse(text, rank)
        return cls.from_letters(word.letters, word.rank)

    def as_word(self) -> ReducedWord:
        return ReducedWord(self.letters, self.rank)

    def rotations(self) -> Iterator[ReducedWord]:
        for start in range(len(self.letters)):
            yield ReducedWord(self.letters[start:] + self.letters[:start], self.rank)

    def format(self) -> str:
        return self.as_word().format()

    def to_json(self) -> List[int]:
        return list(self.letters)

    def __str__(self) -> str:
        return str(self.as_word())

    def __len__(self) -> int:
        return len(self.letters)


def _require_same_rank(u_rank: int, v_rank: int) -> None:
    if u_rank != v_rank:
        raise RankMismatchError(u_rank, v_rank)


def _peel_depth(letters: Sequence[int]) -> int:
    n = len(letters)
    depth = 0
    while depth < n - 1 - depth and letters[depth] == -letters[n - 1 - depth]:
        depth += 1
    return depth


def concat(u: ReducedWord, v: ReducedWord) -> ReducedWord:
    """Free reduction of the concatenation u·v."""
    _require_same_rank(u.rank, v.rank)
    return ReducedWord(free_reduce(itertools.chain(u.letters, v.letters)), u.rank)


def invert(w: ReducedWord) -> ReducedWord:
    return ReducedWord(tuple(-letter for letter in reversed(w.letters)), w.rank)


def power(w: ReducedWord, p: int) -> ReducedWord:
    if p < 0:
        return power(invert(w), -p)
    return ReducedWord(free_reduce(w.letters * p), w.rank)


def cancellation_count(u: ReducedWord, v: ReducedWord) -> int:
    """Number of letter pairs cancelled when forming u·v."""
    return (len(u) + len(v) - len(concat(u, v))) // 2


def cyclic_reduce(w: ReducedWord) -> Tuple[CyclicWord, ReducedWord]:
    """Return the necklace of w and the conjugator c with w = c·core·c⁻¹.

    ``core`` is the unrotated cyclically reduced middle of w; the necklace is
    its least rotation.
    """
    depth = _peel_depth(w.letters)
    conjugator = ReducedWord(w.letters[:depth], w.rank)
    core = w.letters[depth:len(w.letters) - depth]
    return CyclicWord.from_letters(core, w.rank), conjugator


def _longest_true_run(mask: np.ndarray) -> int:
    if not mask.any():
        return 0
    padded = np.concatenate(([0], mask.astype(np.int8), [0]))
    steps = np.diff(padded)
    starts = np.flatnonzero(steps == 1)
    ends = np.flatnonzero(steps == -1)
    return int((ends - starts).max())


def _max_power_python(seq: Sequence[Hashable], window: int, cyclic: bool) -> int:
    n = len(seq)
    text = list(seq) * 2 if cyclic else list(seq)
    best = 1
    for period in range(1, window + 1):
        if window // period <= best:
            break
        run = 0
        longest = 0
        for k in range(len(text) - period):
            if text[k] == text[k + period]:
                run += 1
                if run > longest:
                    longest = run
            else:
                run = 0
        best = max(best, min(longest + period, window) // period)
    return best if n else 0


def _max_power_numpy(seq: Sequence[int], window: int, cyclic: bool) -> int:
    values = np.asarray(seq, dtype=np.int64)
    if cyclic:
        values = np.concatenate((values, values))
    best = 1
    for period in range(1, window + 1):
        if window // period <= best:
            break
        longest = _longest_true_run(values[:-period] == values[period:])
        best = max(best, min(longest + period, window) // period)
    return best


def max_power(seq: Sequence[Hashable], cyclic: bool = False) -> int:
    """Largest p such that some subword of ``seq`` is a p-th power.

    A run of m positions with seq[k] == seq[k + d] spans m + d letters of
    period d, i.e. a power of exponent (m + d) // d.  In cyclic mode the
    sequence is doubled and windows are capped at its length, which covers
    exactly the subwords of all rotations.
    """
    n = len(seq)
    if n == 0:
        return 0
    if n >= _NUMPY_THRESHOLD and isinstance(seq[0], (int, np.integer)):
        return _max_power_numpy(seq, n, cyclic)
    return _max_power_python(seq, n, cyclic)


def alpha(w: ReducedWord) -> int:
    """max{|p| : u^p is a subword of w}; 0 for the empty word."""
    return max_power(w.letters)


def alpha_tilde(c: CyclicWord) -> int:
    """Max of alpha over the rotations of the necklace."""
    return max_power(c.letters, cyclic=True)


def random_reduced_word(rank: int, length: int, rng: random.Random) -> ReducedWord:
    letters: List[int] = []
    choices = [i for i in range(1, rank + 1)] + [-i for i in range(1, rank + 1)]
    while len(letters) < length:
        letter = rng.choice(choices)
        if letters and letters[-1] == -letter:
            continue
        letters.append(letter)
    return ReducedWord(tuple(letters), rank)


def random_cyclic_word(rank: int, max_length: int, rng: random.Random) -> CyclicWord:
    """Random necklace of length between 1 and max_length."""
    while True:
        word = random_reduced_word(rank, rng.randint(1, max_length), rng)
        necklace, _ = cyclic_reduce(word)
        if necklace.letters:
            return necklace


def enumerate_reduced_words(rank: int, length: int) -> Iterator[Tuple[int, ...]]:
    """All reduced letter tuples of exactly the given length, in a fixed order."""
    alphabet = [letter for i in range(1, rank + 1) for letter in (i, -i)]
    if length == 0:
        yield ()
        return

    def extend(prefix: Tuple[int, ...]) -> Iterator[Tuple[int, ...]]:
        if len(prefix) == length:
            yield prefix
            return
        for letter in alphabet:
            if prefix and prefix[-1] == -letter:
                continue
            yield from extend(prefix + (letter,))

    yield from extend(())


def enumerate_necklaces(rank: int, max_length: int) -> List[CyclicWord]:
    """Every nonempty necklace of length at most max_length, deduplicated."""
    seen = set()
    necklaces = []
    for length in range(1, max_length + 1):
        for letters in enumerate_reduced_words(rank, length):
            if length > 1 and letters[0] == -letters[-1]:
                continue
            necklace = CyclicWord.from_letters(letters, rank)
            if necklace not in seen:
                seen.add(necklace)
                necklaces.append(necklace)
    logger.debug(f"Enumerated {len(necklaces)} necklaces of rank {rank} up to length {max_length}")
    return necklaces
