"""Certified lower and empirical upper bounds on translation lengths in Out(F_n)."""
import logging
import math
import random
import threading
from typing import List, Optional, Tuple

import numpy as np
from cachetools import LRUCache, cached

from ..core.config import settings
from ..core.error_handling import (
    ApplicationError,
    InconclusiveError,
    NoWitnessFoundError,
    NotCertifiedExponentialError,
    NotFoundWithinBudgetError,
    PreconditionError,
)
from ..models.reports import CancellationReport, DoublingViolation, GrowthClassification, GrowthEvidence, TauEstimate
from .cayley_oracle import BallIndex, CayleyOracle
from .automorphism import (
    Automorphism,
    abelianization_matrix,
    apply_cyclic,
    compose,
    extend_automorphism,
    is_inner,
    nielsen_decompose,
    outer_canonical,
    power_automorphism,
    symmetric_generator_set,
)
from .cancellation import CancellationAnalyzer
from .word_core import CyclicWord, alpha_tilde, enumerate_necklaces, random_cyclic_word

logger = logging.getLogger(__name__)

EXPONENTIAL_R2 = 0.999
SLOPE_TOLERANCE = 0.02
POWER_ITERATIONS = 200
POWER_TOLERANCE = 1e-12
MIN_FIT_POINTS = 4
RANDOM_WITNESSES = 50


def _r_squared(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Slope and coefficient of determination of a least-squares line."""
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sum((y - (slope * x + intercept)) ** 2))
    total = float(np.sum((y - y.mean()) ** 2))
    return float(slope), 1.0 if total == 0 else 1.0 - residual / total


def _test_classes(rank: int, with_products: bool) -> List[CyclicWord]:
    classes = [CyclicWord.from_letters((i,), rank) for i in range(1, rank + 1)]
    if with_products:
        for i in range(1, rank + 1):
            for j in range(i + 1, rank + 1):
                classes.append(CyclicWord.from_letters((i, j), rank))
                classes.append(CyclicWord.from_letters((i, -j), rank))
    return classes


def _length_sequence(
    phi: Automorphism, k_max: int, length_budget: int, with_products: bool
) -> Tuple[List[int], List[int]]:
    classes = _test_classes(phi.rank, with_products)
    ks, lengths = [], []
    for k in range(1, k_max + 1):
        classes = [apply_cyclic(phi, c) for c in classes]
        longest = max(len(c) for c in classes)
        ks.append(k)
        lengths.append(longest)
        if longest > length_budget:
            break
    return ks, lengths


def _power_iteration(matrix: np.ndarray) -> float:
    vector = np.ones(matrix.shape[0])
    estimate = 0.0
    for _ in range(POWER_ITERATIONS):
        product = matrix @ vector
        norm = float(np.linalg.norm(product))
        if norm == 0.0:
            return 0.0
        previous, estimate = estimate, norm / float(np.linalg.norm(vector))
        vector = product / norm
        if previous and abs(estimate - previous) <= POWER_TOLERANCE * estimate:
            break
    return estimate


def _exact(matrix: np.ndarray) -> np.ndarray:
    return np.array([[int(value) for value in row] for row in matrix], dtype=object)


def _is_unipotent(matrix: np.ndarray) -> bool:
    n = matrix.shape[0]
    identity = _exact(np.eye(n, dtype=np.int64))
    shifted = matrix - identity
    product = identity
    for _ in range(n):
        product = product @ shifted
    return not np.any(product != 0)


def _exact_power(matrix: np.ndarray, s: int) -> np.ndarray:
    base = _exact(matrix)
    result = _exact(np.eye(matrix.shape[0], dtype=np.int64))
    for _ in range(s):
        result = result @ base
    return result


def _witness_candidates(rank: int, rng: random.Random) -> List[CyclicWord]:
    candidates = _test_classes(rank, with_products=True)
    seen = set(candidates)
    for _ in range(RANDOM_WITNESSES):
        c = random_cyclic_word(rank, 6, rng)
        if c not in seen:
            seen.add(c)
            candidates.append(c)
    return candidates


def _alpha_table(phi_s: Automorphism, c: CyclicWord, k_max: int) -> List[Tuple[int, int]]:
    table = []
    current = c
    for k in range(1, k_max + 1):
        current = apply_cyclic(phi_s, current)
        table.append((k, alpha_tilde(current)))
    return table


_report_lock = threading.Lock()


@cached(cache=LRUCache(maxsize=16), lock=_report_lock)
def default_cancellation_report(n: int, depth: int) -> CancellationReport:
    return CancellationAnalyzer.lemma1_constants(n, depth)


class TranslationLengthEstimator:
    """Service bracketing translation lengths of outer automorphism classes."""

    @classmethod
    def finite_order_period(cls, phi: Automorphism, torsion_cap: Optional[int] = None, length_budget: Optional[int] = None) -> Optional[int]:
        """
        Least s ≤ torsion_cap with phi^s inner, or None.

        Automorphisms that stretch homology return None at once. Only powers
        acting trivially on homology are compared with the identity class.

        Args:
            phi: Representative of the outer class
            torsion_cap: Largest period tested, defaults to settings.TORSION_CAP
            length_budget: Powers with longer images are not canonicalized

        Returns:
            The period, or None when no power up to the cap is inner
        """
        torsion_cap = torsion_cap or settings.TORSION_CAP
        length_budget = length_budget or settings.UPPER_LENGTH_BUDGET
        if cls.lambda_lower_abelian(phi) > 1.0:
            return None
        identity = _exact(np.eye(phi.rank, dtype=np.int64))
        matrix = _exact(abelianization_matrix(phi))
        current_matrix = identity
        for s in range(1, torsion_cap + 1):
            current_matrix = current_matrix @ matrix
            if np.any(current_matrix != identity):
                continue
            representative = power_automorphism(phi, s)
            if representative.total_length() > length_budget:
                logger.debug(f"phi^{s} acts trivially on homology but exceeds the length budget")
                continue
            if is_inner(representative):
                return s
        return None

    @classmethod
    def growth_classify(
        cls,
        phi: Automorphism,
        k_max: Optional[int] = None,
        length_budget: Optional[int] = None,
        torsion_cap: Optional[int] = None,
    ) -> GrowthClassification:
        """
        Classify the growth of conjugacy-class lengths under iteration.

        Args:
            phi: Representative of the outer class
            k_max: Number of iterations, defaults to settings.GROWTH_K_MAX
            length_budget: Stop iterating once a class exceeds this length
            torsion_cap: Largest period tested for finite order

        Returns:
            GrowthClassification with the fitted evidence

        Raises:
            InconclusiveError: Too few points, or bounded growth without a detected period
        """
        k_max = k_max or settings.GROWTH_K_MAX
        length_budget = length_budget or settings.GROWTH_LENGTH_BUDGET

        period = cls.finite_order_period(phi, torsion_cap)
        if period is not None:
            logger.info(f"{phi} has finite order {period} in Out(F_{phi.rank})")
            return GrowthClassification(verdict="finite_order", period=period)

        certified_lambda = cls.lambda_lower_abelian(phi)
        ks, lengths = _length_sequence(phi, k_max, length_budget, with_products=False)
        if certified_lambda <= 1.0 and len(set(lengths)) == 1:
            ks, lengths = _length_sequence(phi, k_max, length_budget, with_products=True)
        evidence = GrowthEvidence(k_values=ks, lengths=lengths)
        if certified_lambda <= 1.0 and len(set(lengths)) == 1:
            raise InconclusiveError(
                "Class lengths stay bounded but no period was found below the torsion cap",
                details={"torsion_cap": torsion_cap or settings.TORSION_CAP},
                partial=evidence,
            )

        tail = len(ks) // 2
        x = np.array(ks[tail:], dtype=float)
        y = np.array(lengths[tail:], dtype=float)
        if len(x) < MIN_FIT_POINTS:
            if certified_lambda > 1.0:
                logger.info(f"Growth of {phi}: exponential from homology, {len(ks)} iterations fit the budget")
                return GrowthClassification(verdict="exponential", lambda_hat=certified_lambda, evidence=evidence)
            raise InconclusiveError(
                f"Only {len(ks)} iterations fit in the length budget {length_budget}",
                details={"k_max": k_max, "length_budget": length_budget},
                partial=evidence,
            )
        exp_slope, r2_exp = _r_squared(x, np.log(y))
        loglog_slope, r2_poly = _r_squared(np.log(x), np.log(y))
        evidence.tail_start = ks[tail]
        evidence.r2_exponential = r2_exp
        evidence.r2_polynomial = r2_poly
        evidence.exponential_slope = exp_slope
        evidence.loglog_slope = loglog_slope

        if certified_lambda > 1.0 or (r2_exp >= EXPONENTIAL_R2 and r2_exp >= r2_poly and exp_slope > 0):
            classification = GrowthClassification(verdict="exponential", lambda_hat=math.exp(exp_slope), evidence=evidence)
        else:
            classification = GrowthClassification(
                verdict="polynomial", degree=max(1, round(loglog_slope)), evidence=evidence
            )
        logger.info(f"Growth of {phi}: {classification.verdict}")
        return classification

    @staticmethod
    def lambda_lower_abelian(phi: Automorphism) -> float:
        """Spectral radius of the action on H_1, floored at 1.

        An integer matrix whose eigenvalues all have modulus ≤ 1 is
        quasi-unipotent, so any value above 1 here is a genuine stretch factor.
        """
        matrix = abelianization_matrix(phi).astype(float)
        radius = float(np.max(np.abs(np.linalg.eigvals(matrix))))
        if radius <= 1.0 + 1e-9:
            return 1.0
        return max(1.0, min(_power_iteration(matrix), radius))

    @classmethod
    def tau_lower_exponential(cls, phi: Automorphism, lam: Optional[float] = None) -> TauEstimate:
        """τ(O) ≥ log λ / log 2, since one generator at most doubles cyclic length."""
        lam = lam if lam is not None else cls.lambda_lower_abelian(phi)
        if lam <= 1.0:
            raise NotCertifiedExponentialError(
                f"No certified stretch factor above 1 for {phi}", details={"lambda": lam}
            )
        lower = math.log(lam) / math.log(2)
        logger.info(f"Exponential lower bound {lower:.6f} from lambda {lam:.10f}")
        return TauEstimate(
            lower=lower,
            method="case1_exponential",
            lambda_lower=lam,
            certificate={"lambda_source": "abelianization spectral radius", "lambda": lam},
        )

    @staticmethod
    def verify_doubling(
        n: int,
        samples: int,
        maxlen: int,
        rng: Optional[random.Random] = None,
        exhaustive_length: int = 0,
    ) -> List[DoublingViolation]:
        """Check ℓ(g[w]) ≤ 2ℓ([w]) for every symmetrized generator."""
        rng = rng or random.Random(settings.SEED)
        words = enumerate_necklaces(n, exhaustive_length) if exhaustive_length else []
        words += [random_cyclic_word(n, maxlen, rng) for _ in range(samples)]
        violations = []
        for c in words:
            for label, g in symmetric_generator_set(n):
                image = apply_cyclic(g, c)
                if len(image) > 2 * len(c):
                    violations.append(
                        DoublingViolation(
                            generator=label.label(),
                            word=c.format(),
                            length_before=len(c),
                            length_after=len(image),
                        )
                    )
        return violations

    @staticmethod
    def quasi_unipotent_power(matrix: np.ndarray, s_max: Optional[int] = None) -> Optional[int]:
        """Least s ≤ s_max with (A^s − I)^n = 0, computed in exact integers."""
        s_max = s_max or settings.TORSION_CAP
        base = _exact(matrix)
        current = base
        for s in range(1, s_max + 1):
            if _is_unipotent(current):
                return s
            current = current @ base
        return None

    @classmethod
    def upg_power(cls, phi: Automorphism, s_max: Optional[int] = None, classification: Optional[GrowthClassification] = None) -> int:
        """Least s such that phi^s acts unipotently on homology."""
        if classification is not None and classification.verdict != "polynomial":
            raise PreconditionError(f"upg_power needs polynomial growth, got {classification.verdict}")
        if cls.lambda_lower_abelian(phi) > 1.0:
            raise PreconditionError(f"{phi} grows exponentially on homology")
        s = cls.quasi_unipotent_power(abelianization_matrix(phi), s_max)
        if s is None:
            raise NotFoundWithinBudgetError(
                f"No unipotent power up to {s_max or settings.TORSION_CAP}",
                details={"s_max": s_max or settings.TORSION_CAP},
            )
        return s

    @staticmethod
    def find_cyclic_witness(
        phi_s: Automorphism, k_max: int, rng: Optional[random.Random] = None
    ) -> Tuple[CyclicWord, float, int, List[Tuple[int, int]]]:
        """Necklace whose alpha-tilde grows at least linearly under phi_s."""
        rng = rng or random.Random(settings.SEED)
        candidates = _witness_candidates(phi_s.rank, rng)
        for c in candidates:
            table = _alpha_table(phi_s, c, k_max)
            ks = np.array([k for k, _ in table], dtype=float)
            values = np.array([value for _, value in table], dtype=float)
            slope = float(np.polyfit(ks, values, 1)[0])
            if slope < 1 - SLOPE_TOLERANCE:
                continue
            intercept = int(min(value - k for k, value in table))
            logger.debug(f"Witness {c}: slope {slope:.4f}, intercept {intercept}")
            return c, slope, intercept, table
        raise NoWitnessFoundError(
            "No necklace with linearly growing alpha-tilde", details={"candidates": len(candidates), "k_max": k_max}
        )

    @classmethod
    def tau_lower_polynomial(
        cls,
        phi: Automorphism,
        constant: Optional[int] = None,
        k_max: Optional[int] = None,
        s: Optional[int] = None,
        rng: Optional[random.Random] = None,
        report: Optional[CancellationReport] = None,
        depth: Optional[int] = None,
    ) -> TauEstimate:
        """
        Lower bound 1/(C·s) from a necklace whose alpha-tilde grows under phi^s.

        Each generator raises alpha-tilde by at most C, and alpha-tilde of the
        witness grows by at least one per application of phi^s, so
        ‖phi^{sk}‖ ≥ (k + b − alpha-tilde(w)) / C.

        Args:
            phi: Polynomially growing automorphism
            constant: Cyclic cancellation constant C; computed when omitted
            k_max: Iterations per witness candidate, defaults to settings.WITNESS_K_MAX
            s: Unipotent power, computed when omitted
            rng: Random source for extra witness candidates
            report: CancellationReport the constant comes from
            depth: Search depth of the default CancellationReport

        Returns:
            TauEstimate with the witness and its (k, alpha-tilde) table
        """
        k_max = k_max or settings.WITNESS_K_MAX
        period = cls.finite_order_period(phi)
        if period is not None:
            raise PreconditionError(f"{phi} has finite order {period} in Out(F_{phi.rank})")
        s = s or cls.upg_power(phi)
        notes = []
        if constant is None:
            report = report or default_cancellation_report(phi.rank, depth or settings.BCC_DEPTH)
            constant = report.lemma1_cyclic_constant
        if report is not None and not report.stabilized:
            notes.append(f"certified-at-depth-{report.search_depth}")
        if constant < 1:
            raise PreconditionError(f"Cancellation constant must be positive, got {constant}")

        phi_s = power_automorphism(phi, s)
        witness, slope, intercept, table = cls.find_cyclic_witness(phi_s, k_max, rng)
        lower = 1.0 / (constant * s)
        logger.info(f"Polynomial lower bound 1/({constant}*{s}) = {lower:.6f}, witness {witness}")
        return TauEstimate(
            lower=lower,
            method="case2_upg",
            cancellation_constant=constant,
            upg_power=s,
            certificate={
                "witness": witness.format(),
                "fitted_slope": slope,
                "intercept": intercept,
                "alpha_tilde_start": alpha_tilde(witness),
                "table": [list(row) for row in table],
                "search_depth": report.search_depth if report else None,
            },
            notes=notes,
        )

    @staticmethod
    def tau_upper(
        phi: Automorphism,
        k_max: Optional[int] = None,
        length_budget: Optional[int] = None,
        index: Optional[BallIndex] = None,
    ) -> float:
        """min over k of ‖phi^k‖/k, with ‖·‖ bounded by a Nielsen decomposition.

        ``index`` may be a BallIndex; exact norms replace decomposition lengths
        for powers inside the ball.
        """
        k_max = k_max or settings.UPPER_K_MAX
        length_budget = length_budget or settings.UPPER_LENGTH_BUDGET
        best = math.inf
        current = Automorphism.identity(phi.rank)
        for k in range(1, k_max + 1):
            composed = compose(current, phi)
            if k > 1 and composed.total_length() > length_budget:
                logger.debug(f"Upper bound search stopped at k={k}: length {composed.total_length()}")
                break
            current = outer_canonical(composed).automorphism()
            norm = CayleyOracle.exact_norm(index, current) if index is not None else None
            if norm is None:
                norm = len(nielsen_decompose(current))
            if norm / k < best:
                best = norm / k
                logger.debug(f"Upper bound improved to {best:.6f} at k={k}")
        return 0.0 if best is math.inf else best

    @classmethod
    def tau_estimate(
        cls,
        phi: Automorphism,
        constant: Optional[int] = None,
        rng: Optional[random.Random] = None,
        index: Optional[BallIndex] = None,
        k_max: Optional[int] = None,
        length_budget: Optional[int] = None,
        depth: Optional[int] = None,
    ) -> TauEstimate:
        """Dispatch on growth type and bracket τ(O)."""
        growth = cls.growth_classify(phi, k_max, length_budget)
        if growth.verdict == "finite_order":
            return TauEstimate(
                lower=0.0, upper=0.0, method="finite_order", certificate={"period": growth.period}
            )

        upper = cls.tau_upper(phi, index=index)
        try:
            if growth.verdict == "exponential":
                estimate = cls.tau_lower_exponential(phi)
            else:
                estimate = cls.tau_lower_polynomial(phi, constant=constant, rng=rng, depth=depth)
        except ApplicationError as exc:
            partial = TauEstimate(
                lower=0.0,
                upper=upper,
                method="case1_exponential" if growth.verdict == "exponential" else "case2_upg",
                certified=False,
                notes=[exc.message],
            )
            raise InconclusiveError(
                f"Lower bound not certified: {exc.message}", details={"verdict": growth.verdict}, partial=partial
            )
        estimate.upper = upper
        if upper < estimate.lower:
            logger.error(f"Upper bound {upper} below certified lower bound {estimate.lower}")
        estimate.certificate["growth"] = growth.model_dump(mode="json")
        estimate.notes.append("per-instance bound only")
        return estimate

    @classmethod
    def tau_estimate_aut(cls, phi: Automorphism, constant: Optional[int] = None, rng: Optional[random.Random] = None) -> TauEstimate:
        """Estimate for an element of Aut(F_n) through its image in Out(F_{n+1})."""
        return cls.tau_estimate(extend_automorphism(phi), constant=constant, rng=rng)

    @staticmethod
    def dehn_twist_bound(k: int, constant: int) -> float:
        """‖g^k‖ ≥ (k − 1)/C for the twist x_2 ↦ x_2 x_1, from α(g^k(x_2)) = k."""
        return (k - 1) / constant

    @classmethod
    def recheck_certificate(cls, phi: Automorphism, estimate: TauEstimate) -> List[str]:
        """Re-verify a stored estimate from its certificate, without searching.

        Returns the list of failed checks (empty when the certificate holds).
        """
        failures = []
        if estimate.upper is not None and estimate.upper < estimate.lower - 1e-9:
            failures.append(f"upper {estimate.upper} below lower {estimate.lower}")
        if estimate.method == "finite_order":
            period = int(estimate.certificate.get("period", 0))
            if period < 1 or not is_inner(power_automorphism(phi, period)):
                failures.append(f"phi^{period} is not inner")
            if estimate.lower != 0.0:
                failures.append("finite-order estimate with positive lower bound")
        elif estimate.method == "case1_exponential":
            lam = estimate.lambda_lower or 0.0
            if lam <= 1.0 or lam > cls.lambda_lower_abelian(phi) * (1 + 1e-9):
                failures.append(f"lambda {lam} is not certified by the homology action")
            elif abs(estimate.lower - math.log(lam) / math.log(2)) > 1e-9:
                failures.append("lower bound does not equal log2(lambda)")
        else:
            s = estimate.upg_power or 0
            constant = estimate.cancellation_constant or 0
            if s < 1 or not _is_unipotent(_exact_power(abelianization_matrix(phi), s)):
                failures.append(f"phi^{s} does not act unipotently on homology")
            if constant < 1 or abs(estimate.lower - 1.0 / (constant * max(s, 1))) > 1e-9:
                failures.append("lower bound does not equal 1/(C*s)")
            stored = [tuple(row) for row in estimate.certificate.get("table", [])]
            witness = estimate.certificate.get("witness")
            if not witness or not stored:
                failures.append("certificate carries no witness table")
            elif s >= 1:
                recomputed = _alpha_table(power_automorphism(phi, s), CyclicWord.parse(witness, phi.rank), len(stored))
                if recomputed != stored:
                    failures.append("witness table does not reproduce")
                elif float(np.polyfit([k for k, _ in stored], [a for _, a in stored], 1)[0]) < 1 - SLOPE_TOLERANCE:
                    failures.append("witness slope below 1")
        return failures
