"""Automorphisms of F_n as generator-image tuples.

Composition follows function order: ``compose(phi, psi)`` applies psi first,
so ``apply(compose(phi, psi), w) == apply(phi, apply(psi, w))``.  A
``GeneratorWord`` [m1, ..., mk] evaluates to m1 ∘ ... ∘ mk.
"""
from __future__ import annotations

import hashlib
import json
import logging
import random
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Iterable, List, Literal, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ..core.config import settings
from ..core.error_handling import (
    NotAnAutomorphismError,
    ParseError,
    PlateauCapError,
    PreconditionError,
    RankMismatchError,
)
from .word_core import CyclicWord, ReducedWord, free_reduce, letter_key

logger = logging.getLogger(__name__)

MoveOp = Literal["permutation", "inversion", "twist"]
_OP_ORDER = {"permutation": 0, "inversion": 1, "twist": 2}


@dataclass(frozen=True)
class Move:
    """A label from Y ∪ Y⁻¹; only twists have distinct formal inverses."""

    op: MoveOp
    i: int
    j: Optional[int] = None
    inverse: bool = False

    def inverted(self) -> "Move":
        if self.op == "twist":
            return Move(self.op, self.i, self.j, not self.inverse)
        return self

    def to_json(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"op": self.op, "i": self.i}
        if self.j is not None:
            payload["j"] = self.j
        if self.inverse:
            payload["inverse"] = True
        return payload

    @classmethod
    def from_json(cls, payload: Dict[str, Any]) -> "Move":
        return cls(payload["op"], int(payload["i"]), payload.get("j"), bool(payload.get("inverse", False)))

    def label(self) -> str:
        if self.op == "permutation":
            return f"permutation({self.i},{self.j})"
        if self.op == "inversion":
            return f"inversion({self.i})"
        return f"twist({self.i},{self.j})" + ("^-1" if self.inverse else "")

    def sort_key(self) -> Tuple[int, int, int, int]:
        return _OP_ORDER[self.op], self.i, self.j or 0, int(self.inverse)


@dataclass(frozen=True)
class GeneratorWord:
    moves: Tuple[Move, ...] = ()

    def __len__(self) -> int:
        return len(self.moves)

    def inverse(self) -> "GeneratorWord":
        return GeneratorWord(tuple(move.inverted() for move in reversed(self.moves)))

    def to_json(self) -> List[Dict[str, Any]]:
        return [move.to_json() for move in self.moves]

    @classmethod
    def from_json(cls, payload: Sequence[Dict[str, Any]]) -> "GeneratorWord":
        return cls(tuple(Move.from_json(item) for item in payload))


@dataclass(frozen=True)
class Automorphism:
    rank: int
    images: Tuple[ReducedWord, ...]

    def __post_init__(self) -> None:
        if len(self.images) != self.rank:
            raise ValueError(f"Expected {self.rank} images, got {len(self.images)}")
        for image in self.images:
            if image.rank != self.rank:
                raise RankMismatchError(self.rank, image.rank)

    @classmethod
    def identity(cls, rank: int) -> "Automorphism":
        return cls(rank, tuple(ReducedWord.generator(i, rank) for i in range(1, rank + 1)))

    @classmethod
    def from_letters(cls, images: Iterable[Iterable[int]], rank: int) -> "Automorphism":
        return cls(rank, tuple(ReducedWord.from_letters(image, rank) for image in images))

    @classmethod
    def parse(cls, images: Sequence[str], rank: Optional[int] = None) -> "Automorphism":
        rank = rank or len(images)
        return cls(rank, tuple(ReducedWord.parse(image, rank) for image in images))

    @classmethod
    def from_json(cls, payload: Dict[str, Any]) -> "Automorphism":
        try:
            rank = int(payload["rank"])
            images = payload["images"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"Automorphism JSON needs 'rank' and 'images': {exc}")
        try:
            if all(isinstance(image, str) for image in images):
                return cls.parse(images, rank)
            return cls(rank, tuple(ReducedWord.from_json(image, rank) for image in images))
        except ValueError as exc:
            raise ParseError(f"Invalid automorphism images: {exc}")

    def to_json(self) -> Dict[str, Any]:
        if self.rank <= 26:
            return {"rank": self.rank, "images": [image.format() for image in self.images]}
        return {"rank": self.rank, "images": [image.to_json() for image in self.images]}

    def __str__(self) -> str:
        return "(" + ", ".join(f"x{i + 1}->{image}" for i, image in enumerate(self.images)) + ")"

    @cached_property
    def letter_images(self) -> Dict[int, Tuple[int, ...]]:
        table: Dict[int, Tuple[int, ...]] = {}
        for i, image in enumerate(self.images, start=1):
            table[i] = image.letters
            table[-i] = tuple(-letter for letter in reversed(image.letters))
        return table

    def total_length(self) -> int:
        return sum(len(image) for image in self.images)


class Generator(NamedTuple):
    label: Move
    automorphism: Automorphism


class OuterClass(NamedTuple):
    """Conjugation-minimal, lexicographically least image tuple."""

    rank: int
    canonical_images: Tuple[ReducedWord, ...]

    def automorphism(self) -> Automorphism:
        return Automorphism(self.rank, self.canonical_images)

    def to_json(self) -> Dict[str, Any]:
        return self.automorphism().to_json()

    def digest(self) -> str:
        payload = json.dumps([image.to_json() for image in self.canonical_images], separators=(",", ":"))
        return hashlib.sha256(f"{self.rank}:{payload}".encode()).hexdigest()


def _require_same_rank(left: int, right: int) -> None:
    if left != right:
        raise RankMismatchError(left, right)


def _apply_letters(phi: Automorphism, letters: Iterable[int]) -> Tuple[int, ...]:
    table = phi.letter_images
    stack: List[int] = []
    for letter in letters:
        for image_letter in table[letter]:
            if stack and stack[-1] == -image_letter:
                stack.pop()
            else:
                stack.append(image_letter)
    return tuple(stack)


def apply(phi: Automorphism, w: ReducedWord) -> ReducedWord:
    """Substitute each letter by its image and freely reduce."""
    _require_same_rank(phi.rank, w.rank)
    return ReducedWord(_apply_letters(phi, w.letters), w.rank)


def apply_cyclic(phi: Automorphism, c: CyclicWord) -> CyclicWord:
    _require_same_rank(phi.rank, c.rank)
    return CyclicWord.from_letters(_apply_letters(phi, c.letters), c.rank)


def compose(phi: Automorphism, psi: Automorphism) -> Automorphism:
    _require_same_rank(phi.rank, psi.rank)
    return Automorphism(phi.rank, tuple(ReducedWord(_apply_letters(phi, image.letters), phi.rank) for image in psi.images))


def power_automorphism(phi: Automorphism, k: int) -> Automorphism:
    if k < 0:
        return power_automorphism(invert_automorphism(phi), -k)
    result = Automorphism.identity(phi.rank)
    base = phi
    while k:
        if k & 1:
            result = compose(result, base)
        k >>= 1
        if k:
            base = compose(base, base)
    return result


def conjugation(w: ReducedWord) -> Automorphism:
    """Inner automorphism x ↦ w x w⁻¹."""
    rank = w.rank
    inverse = tuple(-letter for letter in reversed(w.letters))
    return Automorphism(
        rank,
        tuple(ReducedWord.from_letters(w.letters + (i,) + inverse, rank) for i in range(1, rank + 1)),
    )


def move_automorphism(move: Move, rank: int) -> Automorphism:
    images = [(i,) for i in range(1, rank + 1)]
    if not 1 <= move.i <= rank or (move.j is not None and not 1 <= move.j <= rank):
        raise ValueError(f"Move {move.label()} outside rank {rank}")
    if move.op == "permutation":
        images[move.i - 1], images[move.j - 1] = images[move.j - 1], images[move.i - 1]
    elif move.op == "inversion":
        images[move.i - 1] = (-move.i,)
    else:
        if move.i == move.j:
            raise ValueError("Twist needs i != j")
        images[move.i - 1] = (move.i, -move.j if move.inverse else move.j)
    return Automorphism.from_letters(images, rank)


def evaluate(word: GeneratorWord, rank: int) -> Automorphism:
    result = Automorphism.identity(rank)
    for move in word.moves:
        result = compose(result, move_automorphism(move, rank))
    return result


# --- Nielsen reduction -------------------------------------------------------

class _Step(NamedTuple):
    kind: int  # 0: T_i <- T_i T_j^e, 1: T_i <- T_j^e T_i
    i: int
    j: int
    e: int

    def key(self) -> Tuple[int, int, int, int]:
        return self.kind, self.i, self.j, 0 if self.e > 0 else 1

    def expand(self) -> List[Move]:
        if self.kind == 0:
            return [Move("twist", self.i, self.j, inverse=self.e < 0)]
        # x_i -> x_j^e x_i equals inversion(i) ∘ (x_i -> x_i x_j^-e) ∘ inversion(i)
        return [Move("inversion", self.i), Move("twist", self.i, self.j, inverse=self.e > 0), Move("inversion", self.i)]


def _boundary_cancel(left: Sequence[int], right: Sequence[int]) -> int:
    limit = min(len(left), len(right))
    count = 0
    while count < limit and left[-1 - count] == -right[count]:
        count += 1
    return count


def _inverse_letters(letters: Sequence[int]) -> Tuple[int, ...]:
    return tuple(-letter for letter in reversed(letters))


def _step_reduction(images: List[Tuple[int, ...]], step: _Step) -> int:
    target = images[step.i - 1]
    other = images[step.j - 1] if step.e > 0 else _inverse_letters(images[step.j - 1])
    if step.kind == 0:
        cancelled = _boundary_cancel(target, other)
    else:
        cancelled = _boundary_cancel(other, target)
    return 2 * cancelled - len(other)


def _apply_step(images: List[Tuple[int, ...]], step: _Step) -> List[Tuple[int, ...]]:
    target = images[step.i - 1]
    other = images[step.j - 1] if step.e > 0 else _inverse_letters(images[step.j - 1])
    updated = list(images)
    updated[step.i - 1] = free_reduce(target + other) if step.kind == 0 else free_reduce(other + target)
    return updated


def _candidate_steps(rank: int) -> List[_Step]:
    steps = [
        _Step(kind, i, j, e)
        for kind in (0, 1)
        for i in range(1, rank + 1)
        for j in range(1, rank + 1)
        if i != j
        for e in (1, -1)
    ]
    return sorted(steps, key=_Step.key)


def _best_step(images: List[Tuple[int, ...]], candidates: List[_Step]) -> Tuple[Optional[_Step], int]:
    best: Optional[_Step] = None
    best_gain = 0
    for step in candidates:
        gain = _step_reduction(images, step)
        if gain > best_gain:
            best, best_gain = step, gain
    return best, best_gain


def _is_signed_permutation(images: List[Tuple[int, ...]]) -> bool:
    return all(len(image) == 1 for image in images) and len({abs(image[0]) for image in images}) == len(images)


def _signed_permutation_word(images: List[Tuple[int, ...]]) -> List[Move]:
    rank = len(images)
    perm = [0] + [abs(image[0]) for image in images]
    transpositions = []
    for k in range(1, rank + 1):
        if perm[k] != k:
            m = perm.index(k)
            perm[k], perm[m] = perm[m], perm[k]
            transpositions.append(Move("permutation", min(k, m), max(k, m)))
    moves = list(reversed(transpositions))
    moves.extend(Move("inversion", k) for k in range(1, rank + 1) if images[k - 1][0] < 0)
    return moves


def _nielsen_steps(phi: Automorphism) -> Tuple[List[_Step], List[Tuple[int, ...]]]:
    images = [image.letters for image in phi.images]
    candidates = _candidate_steps(phi.rank)
    steps: List[_Step] = []
    while not _is_signed_permutation(images):
        if any(not image for image in images):
            raise NotAnAutomorphismError(
                f"Image tuple collapsed to the identity; {phi} is not an automorphism",
                details={"images": [list(image) for image in images]},
            )
        step, gain = _best_step(images, candidates)
        if step is not None:
            images = _apply_step(images, step)
            steps.append(step)
            continue
        # No strictly reducing move: look one length-preserving move ahead.
        for first in candidates:
            if _step_reduction(images, first) != 0:
                continue
            trial = _apply_step(images, first)
            second, _ = _best_step(trial, candidates)
            if second is not None:
                images = _apply_step(trial, second)
                steps.extend([first, second])
                break
        else:
            total = sum(len(image) for image in images)
            raise NotAnAutomorphismError(
                f"Nielsen reduction stalled at total length {total} > {phi.rank}",
                details={"images": [list(image) for image in images], "total_length": total},
            )
    return steps, images


def nielsen_decompose(phi: Automorphism) -> GeneratorWord:
    """Greedy Nielsen reduction; the result evaluates to phi exactly in Aut(F_n)."""
    steps, final_images = _nielsen_steps(phi)
    moves = _signed_permutation_word(final_images)
    for step in reversed(steps):
        moves.extend(move.inverted() for move in reversed(step.expand()))
    return GeneratorWord(tuple(moves))


def is_automorphism(phi: Automorphism) -> bool:
    try:
        _nielsen_steps(phi)
    except NotAnAutomorphismError:
        return False
    return True


def invert_automorphism(phi: Automorphism) -> Automorphism:
    return evaluate(nielsen_decompose(phi).inverse(), phi.rank)


# --- Outer classes -----------------------------------------------------------

def _alphabet(rank: int) -> List[int]:
    return sorted((letter for i in range(1, rank + 1) for letter in (i, -i)), key=letter_key)


def _conjugated_total(images: Sequence[Tuple[int, ...]], letter: int) -> int:
    total = 0
    for image in images:
        if not image:
            continue
        front = image[0] == letter
        back = image[-1] == -letter
        total += len(image) + 2 - 2 * (front + back)
    return total


def _conjugate_by_letter(images: Sequence[Tuple[int, ...]], letter: int) -> Tuple[Tuple[int, ...], ...]:
    """Images of x ↦ letter⁻¹ · phi(x) · letter."""
    return tuple(free_reduce((-letter,) + image + (letter,)) for image in images)


def _tuple_key(images: Sequence[Tuple[int, ...]]) -> Tuple[Tuple[int, Tuple[int, ...]], ...]:
    return tuple((len(image), tuple(letter_key(letter) for letter in image)) for image in images)


def outer_canonical(phi: Automorphism, plateau_cap: Optional[int] = None) -> OuterClass:
    """Conjugation-canonical representative of the outer class of phi.

    Steepest descent over single-letter conjugations reaches the global
    minimum of the total image length (convex along tree geodesics); the
    minimizing set is then explored breadth first and the least tuple kept.
    """
    plateau_cap = plateau_cap or settings.PLATEAU_CAP
    alphabet = _alphabet(phi.rank)
    current = tuple(image.letters for image in phi.images)
    total = sum(len(image) for image in current)
    while True:
        best_letter, best_total = None, total
        for letter in alphabet:
            candidate = _conjugated_total(current, letter)
            if candidate < best_total:
                best_letter, best_total = letter, candidate
        if best_letter is None:
            break
        current = _conjugate_by_letter(current, best_letter)
        total = best_total

    seen = {current}
    queue = deque([current])
    while queue:
        state = queue.popleft()
        for letter in alphabet:
            if _conjugated_total(state, letter) != total:
                continue
            neighbour = _conjugate_by_letter(state, letter)
            if neighbour not in seen:
                seen.add(neighbour)
                queue.append(neighbour)
                if len(seen) > plateau_cap:
                    raise PlateauCapError(
                        f"Conjugation plateau exceeds {plateau_cap} states",
                        details={"plateau_cap": plateau_cap},
                    )
    canonical = min(seen, key=_tuple_key)
    return OuterClass(phi.rank, tuple(ReducedWord(image, phi.rank) for image in canonical))


def outer_equal(phi: Automorphism, psi: Automorphism) -> bool:
    _require_same_rank(phi.rank, psi.rank)
    return outer_canonical(phi) == outer_canonical(psi)


def is_inner(phi: Automorphism) -> bool:
    return outer_canonical(phi) == outer_canonical(Automorphism.identity(phi.rank))


# --- Generating sets ---------------------------------------------------------

def generator_set(n: int) -> List[Generator]:
    """Y: transpositions, inversions, and right twists x_i ↦ x_i x_j."""
    if n < 2:
        raise PreconditionError(f"Generating set needs rank >= 2, got {n}")
    labels = [Move("permutation", i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    labels += [Move("inversion", i) for i in range(1, n + 1)]
    labels += [Move("twist", i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i != j]
    return [Generator(label, move_automorphism(label, n)) for label in labels]


def symmetric_generator_set(n: int) -> List[Generator]:
    """Y ∪ Y⁻¹ with self-inverse elements listed once."""
    generators = generator_set(n)
    inverses = [
        Generator(label.inverted(), move_automorphism(label.inverted(), n))
        for label, _ in generators
        if label.op == "twist"
    ]
    return generators + inverses


def random_automorphism(n: int, steps: int, rng: random.Random) -> Tuple[Automorphism, GeneratorWord]:
    generators = symmetric_generator_set(n)
    moves = tuple(rng.choice(generators).label for _ in range(steps))
    word = GeneratorWord(moves)
    return evaluate(word, n), word


def embed_aut_to_out(phi: Automorphism) -> OuterClass:
    """Extend phi by x_{n+1} ↦ x_{n+1} and take the outer class in Out(F_{n+1})."""
    rank = phi.rank + 1
    images = tuple(ReducedWord(image.letters, rank) for image in phi.images) + (ReducedWord.generator(rank, rank),)
    return outer_canonical(Automorphism(rank, images))


def extend_automorphism(phi: Automorphism) -> Automorphism:
    rank = phi.rank + 1
    images = tuple(ReducedWord(image.letters, rank) for image in phi.images) + (ReducedWord.generator(rank, rank),)
    return Automorphism(rank, images)


# --- Homology ----------------------------------------------------------------

def abelianization_matrix(phi: Automorphism) -> np.ndarray:
    """Column i holds the signed generator counts of phi(x_i)."""
    matrix = np.zeros((phi.rank, phi.rank), dtype=np.int64)
    for i, image in enumerate(phi.images):
        for letter in image.letters:
            matrix[abs(letter) - 1, i] += 1 if letter > 0 else -1
    return matrix


def determinant(matrix: np.ndarray) -> int:
    """Exact integer determinant (Bareiss elimination)."""
    m = [[int(value) for value in row] for row in matrix]
    n = len(m)
    sign, previous = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if m[r][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for r in range(k + 1, n):
            for c in range(k + 1, n):
                m[r][c] = (m[r][c] * m[k][k] - m[r][k] * m[k][c]) // previous
        previous = m[k][k]
    return sign * m[n - 1][n - 1] if n else 1
