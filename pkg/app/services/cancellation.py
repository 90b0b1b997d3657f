"""Bounded-cancellation constants for Nielsen generators and their certificates.

Cancellation between φ(u) and φ(v) for a reduced product u·v equals the common
prefix of φ(u⁻¹) and φ(v), where u⁻¹ and v start with different letters.  So
the estimate only needs the images of boundary words of length at most L:
sorting them lexicographically, the longest common prefix between two words
with different first letters is attained by some adjacent pair.
"""
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from ..core.config import settings
from ..core.error_handling import BudgetExceededError, PreconditionError
from ..models.reports import CancellationReport, Lemma1Violation
from .automorphism import (
    Automorphism,
    Generator,
    apply,
    apply_cyclic,
    symmetric_generator_set,
)
from .word_core import (
    CyclicWord,
    alpha,
    alpha_tilde,
    enumerate_necklaces,
    random_cyclic_word,
    random_reduced_word,
)

logger = logging.getLogger(__name__)


def _boundary_images(phi: Automorphism, depth: int) -> List[Tuple[int, int, Tuple[int, ...]]]:
    """(word length, first letter, image) for every nonempty reduced word of length ≤ depth."""
    table = phi.letter_images
    alphabet = [letter for i in range(1, phi.rank + 1) for letter in (i, -i)]
    entries: List[Tuple[int, int, Tuple[int, ...]]] = []
    frontier: List[Tuple[int, int, List[int]]] = []
    for letter in alphabet:
        image = list(table[letter])
        frontier.append((letter, letter, image))
        entries.append((1, letter, tuple(image)))
    for length in range(2, depth + 1):
        next_frontier = []
        for first, last, image in frontier:
            for letter in alphabet:
                if letter == -last:
                    continue
                extended = list(image)
                for image_letter in table[letter]:
                    if extended and extended[-1] == -image_letter:
                        extended.pop()
                    else:
                        extended.append(image_letter)
                next_frontier.append((first, letter, extended))
                entries.append((length, first, tuple(extended)))
        frontier = next_frontier
    return entries


def _common_prefix(u: Sequence[int], v: Sequence[int]) -> int:
    limit = min(len(u), len(v))
    k = 0
    while k < limit and u[k] == v[k]:
        k += 1
    return k


def _max_cross_prefix(entries: Iterable[Tuple[int, Tuple[int, ...]]]) -> int:
    ordered = sorted(entries, key=lambda entry: entry[1])
    best = 0
    for (first_a, image_a), (first_b, image_b) in zip(ordered, ordered[1:]):
        if first_a != first_b:
            best = max(best, _common_prefix(image_a, image_b))
    return best


def _necklace_text(c: CyclicWord) -> str:
    return c.format() if c.rank <= 26 else str(c.to_json())


class CancellationAnalyzer:
    """Service for bounded-cancellation constants and the alpha-tilde suites built on them."""

    STABILIZATION_WINDOW = 3
    MAX_DOUBLINGS = 3

    @staticmethod
    def bcc_profile(phi: Automorphism, depth: int) -> List[int]:
        """Cancellation estimates for every search depth 1..depth (monotone)."""
        if depth < 1:
            raise PreconditionError(f"Search depth must be at least 1, got {depth}")
        entries = _boundary_images(phi, depth)
        profile = []
        for limit in range(1, depth + 1):
            profile.append(_max_cross_prefix((first, image) for length, first, image in entries if length <= limit))
        return profile

    @classmethod
    def bcc_estimate(cls, phi: Automorphism, depth: Optional[int] = None) -> int:
        """
        Estimate the bounded-cancellation constant C(φ).

        Args:
            phi: Automorphism to probe
            depth: Longest boundary word considered, defaults to settings.BCC_DEPTH

        Returns:
            Largest cancellation between φ(u) and φ(v) over reduced products u·v
            with |u|, |v| ≤ depth
        """
        return cls.bcc_profile(phi, depth or settings.BCC_DEPTH)[-1]

    @classmethod
    def is_stabilized(cls, profile: Sequence[int], window: Optional[int] = None) -> bool:
        window = window or cls.STABILIZATION_WINDOW
        return len(profile) >= window and len(set(profile[-window:])) == 1

    @staticmethod
    def verify_lemma1(
        n: int,
        constant: int,
        samples: int,
        maxlen: int,
        rng: Optional[random.Random] = None,
        generators: Optional[Sequence[Generator]] = None,
        exhaustive_length: int = 0,
    ) -> List[Lemma1Violation]:
        """
        Check alpha_tilde(g[w]) ≤ alpha_tilde([w]) + C over sampled necklaces.

        Args:
            n: Rank
            constant: Cyclic constant C under test
            samples: Random necklaces of length ≤ maxlen
            maxlen: Longest sampled necklace
            rng: Random source, seeded from settings.SEED when omitted
            generators: Generators to apply, defaults to the symmetrized Nielsen set
            exhaustive_length: Also check every necklace up to this length

        Returns:
            One Lemma1Violation per (necklace, generator) pair that breaks the bound
        """
        if constant < 0:
            raise PreconditionError(f"Constant must be non-negative, got {constant}")
        rng = rng or random.Random(settings.SEED)
        generators = list(generators) if generators is not None else symmetric_generator_set(n)
        words = enumerate_necklaces(n, exhaustive_length) if exhaustive_length else []
        words += [random_cyclic_word(n, maxlen, rng) for _ in range(samples)]

        violations = []
        for c in words:
            before = alpha_tilde(c)
            for label, g in generators:
                after = alpha_tilde(apply_cyclic(g, c))
                if after > before + constant:
                    violations.append(
                        Lemma1Violation(
                            generator=label.label(),
                            word=_necklace_text(c),
                            alpha_before=before,
                            alpha_after=after,
                            constant=constant,
                        )
                    )
        logger.debug(f"Checked {len(words)} necklaces against {len(generators)} generators: {len(violations)} violations")
        return violations

    @staticmethod
    def verify_word_bounds(
        n: int,
        symmetrized: Dict[str, int],
        samples: int,
        maxlen: int,
        rng: Optional[random.Random] = None,
    ) -> List[Lemma1Violation]:
        """Straight-line check α(w) − C_g ≤ α([[g(w)]]) ≤ α(w) + C_g for twists."""
        rng = rng or random.Random(settings.SEED)
        twists = [(label, g) for label, g in symmetric_generator_set(n) if label.op == "twist"]
        violations = []
        for _ in range(samples):
            w = random_reduced_word(n, rng.randint(1, maxlen), rng)
            before = alpha(w)
            for label, g in twists:
                constant = symmetrized[label.label()]
                after = alpha(apply(g, w))
                if abs(after - before) > constant:
                    violations.append(
                        Lemma1Violation(
                            generator=label.label(),
                            word=w.format() if n <= 26 else str(w.to_json()),
                            alpha_before=before,
                            alpha_after=after,
                            constant=constant,
                            kind="word",
                        )
                    )
        return violations

    @classmethod
    def certify_cyclic_constant(
        cls,
        n: int,
        word_constant: int,
        samples: int,
        maxlen: int,
        rng: Optional[random.Random] = None,
        exhaustive_length: int = 0,
    ) -> Tuple[int, int]:
        """Start from 2·C̃ and double until verify_lemma1 finds no violation.

        Returns the certified constant and the number of doublings used.
        """
        rng = rng or random.Random(settings.SEED)
        constant = 2 * word_constant
        for doublings in range(cls.MAX_DOUBLINGS + 1):
            violations = cls.verify_lemma1(n, constant, samples, maxlen, rng, exhaustive_length=exhaustive_length)
            if not violations:
                return constant, doublings
            logger.warning(f"Cyclic constant {constant} violated on {len(violations)} samples, doubling")
            constant = max(1, 2 * constant)
        raise BudgetExceededError(
            f"Cyclic constant not certified after {cls.MAX_DOUBLINGS} doublings",
            details={"rank": n, "word_constant": word_constant, "last_constant": constant},
        )

    @classmethod
    def lemma1_constants(
        cls,
        n: int,
        depth: Optional[int] = None,
        certify_samples: int = 0,
        maxlen: int = 40,
        rng: Optional[random.Random] = None,
        exhaustive_length: int = 0,
        workers: Optional[int] = None,
    ) -> CancellationReport:
        """
        Compute C(g) for every generator and the constants C̃ and C.

        Args:
            n: Rank
            depth: Boundary-word search depth, defaults to settings.BCC_DEPTH
            certify_samples: Random necklaces used to certify C; 0 skips certification
            maxlen: Longest sampled necklace
            rng: Random source for certification
            exhaustive_length: Also check every necklace up to this length
            workers: Threads used for the per-generator searches

        Returns:
            CancellationReport with per-generator values and stabilization flags
        """
        if n < 2:
            raise PreconditionError(f"Rank must be at least 2, got {n}")
        depth = depth or settings.BCC_DEPTH
        workers = workers or settings.WORKERS
        generators = symmetric_generator_set(n)

        with ThreadPoolExecutor(max_workers=workers) as executor:
            profiles = list(executor.map(lambda generator: cls.bcc_profile(generator.automorphism, depth), generators))

        per_generator = {label.label(): profile[-1] for (label, _), profile in zip(generators, profiles)}
        depth_profile = {label.label(): profile for (label, _), profile in zip(generators, profiles)}
        symmetrized = {}
        for label, _ in generators:
            if label.op == "twist":
                symmetrized[label.label()] = 2 * max(per_generator[label.label()], per_generator[label.inverted().label()])
        word_constant = max(symmetrized.values())
        stabilized = all(cls.is_stabilized(profile) for profile in profiles)
        if not stabilized:
            logger.warning(f"Cancellation estimates not stabilized at depth {depth}")

        cyclic_constant, doublings = 2 * word_constant, 0
        if certify_samples or exhaustive_length:
            cyclic_constant, doublings = cls.certify_cyclic_constant(
                n, word_constant, certify_samples, maxlen, rng, exhaustive_length=exhaustive_length
            )

        logger.info(f"Rank {n}, depth {depth}: C~ = {word_constant}, C = {cyclic_constant}")
        return CancellationReport(
            rank=n,
            search_depth=depth,
            per_generator=per_generator,
            depth_profile=depth_profile,
            symmetrized=symmetrized,
            lemma1_word_constant=word_constant,
            lemma1_cyclic_constant=cyclic_constant,
            stabilized=stabilized,
            certified=bool(certify_samples or exhaustive_length),
            certification_samples=certify_samples,
            doublings=doublings,
        )

    @classmethod
    def sharpness_probe(
        cls,
        n: int,
        constant: int,
        samples: int,
        maxlen: int,
        rng: Optional[random.Random] = None,
        exhaustive_length: int = 0,
    ) -> Dict[str, object]:
        """Run verify_lemma1 with C − 1; no violation means C may not be sharp."""
        if constant < 1:
            return {"probe_constant": None, "violations": 0, "possibly_non_sharp": False}
        violations = cls.verify_lemma1(n, constant - 1, samples, maxlen, rng, exhaustive_length=exhaustive_length)
        if not violations:
            logger.warning(f"No violation found for C - 1 = {constant - 1}; C = {constant} may not be sharp")
        return {
            "probe_constant": constant - 1,
            "violations": len(violations),
            "possibly_non_sharp": not violations,
        }
