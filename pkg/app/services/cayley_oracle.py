"""Exact word norms in Out(F_n) by breadth-first enumeration of Cayley balls."""
import hashlib
import json
import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from cachetools import LRUCache, cached

from ..core.config import settings
from ..core.error_handling import BudgetExceededError, ParseError, PreconditionError, RankMismatchError
from ..models.reports import TauBoundEntry, TauBoundReport, TauEstimate
from .automorphism import (
    Automorphism,
    Generator,
    OuterClass,
    compose,
    outer_canonical,
    symmetric_generator_set,
)
from .word_core import ReducedWord

logger = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "outfn-ball"
SNAPSHOT_VERSION = 1
GENERATING_SET_CONVENTION = "symmetrized"
NUMERIC_SLACK = 1e-9

_canonical_lock = threading.Lock()


@cached(cache=LRUCache(maxsize=settings.CANONICAL_CACHE_SIZE), key=lambda phi: (phi.rank, phi.images), lock=_canonical_lock)
def canonical_class(phi: Automorphism) -> OuterClass:
    return outer_canonical(phi)


@dataclass
class BallIndex:
    """Outer classes within ``radius`` of the identity, keyed by canonical digest."""

    rank: int
    radius: int
    table: Dict[str, int] = field(default_factory=dict)
    classes: Dict[str, OuterClass] = field(default_factory=dict)
    layers: List[int] = field(default_factory=list)
    convention: str = GENERATING_SET_CONVENTION

    def __len__(self) -> int:
        return len(self.table)


def _expand(node: OuterClass, generators: List[Generator]) -> List[Tuple[str, OuterClass]]:
    representative = node.automorphism()
    neighbours = []
    for _, generator in generators:
        neighbour = canonical_class(compose(representative, generator))
        neighbours.append((neighbour.digest(), neighbour))
    return neighbours


def _check_collision(index: BallIndex, digest: str, candidate: OuterClass) -> None:
    known = index.classes.get(digest)
    if known is not None and known != candidate:
        raise PreconditionError(f"Digest collision on {digest}", details={"digest": digest})


class CayleyOracle:
    """Service for exact word norms from breadth-first Cayley balls."""

    @staticmethod
    def build_ball(
        n: int,
        radius: Optional[int] = None,
        node_budget: Optional[int] = None,
        workers: Optional[int] = None,
    ) -> BallIndex:
        """
        Breadth-first search from the identity over the symmetrized generators.

        Each layer is expanded in parallel; neighbours are merged in frontier
        order, so the table does not depend on the number of workers.

        Args:
            n: Rank
            radius: Ball radius, defaults to settings.ORACLE_RADIUS
            node_budget: Maximum number of classes, defaults to settings.ORACLE_NODE_BUDGET
            workers: Threads used for frontier expansion, defaults to settings.WORKERS

        Returns:
            BallIndex with exact distances and layer sizes

        Raises:
            BudgetExceededError: The node budget ran out; details carry the completed radius
        """
        if n < 2:
            raise PreconditionError(f"Rank must be at least 2, got {n}")
        radius = settings.ORACLE_RADIUS if radius is None else radius
        node_budget = node_budget or settings.ORACLE_NODE_BUDGET
        workers = workers or settings.WORKERS
        generators = symmetric_generator_set(n)

        identity = canonical_class(Automorphism.identity(n))
        index = BallIndex(rank=n, radius=0)
        index.table[identity.digest()] = 0
        index.classes[identity.digest()] = identity
        index.layers.append(1)
        frontier = [identity]

        with ThreadPoolExecutor(max_workers=workers) as executor:
            for distance in range(1, radius + 1):
                expansions = executor.map(lambda node: _expand(node, generators), frontier)
                next_frontier = []
                for neighbours in expansions:
                    for digest, neighbour in neighbours:
                        if settings.DEBUG:
                            _check_collision(index, digest, neighbour)
                        if digest in index.table:
                            continue
                        index.table[digest] = distance
                        index.classes[digest] = neighbour
                        next_frontier.append(neighbour)
                        if len(index.table) > node_budget:
                            raise BudgetExceededError(
                                f"Node budget {node_budget} exhausted while building radius {distance}",
                                details={"completed_radius": distance - 1, "nodes": len(index.table), "layers": index.layers},
                            )
                index.layers.append(len(next_frontier))
                index.radius = distance
                frontier = next_frontier
                logger.debug(f"Radius {distance}: {len(next_frontier)} new classes, {len(index.table)} total")

        logger.info(f"Built Out(F_{n}) ball of radius {index.radius}: layers {index.layers}")
        return index

    @staticmethod
    def exact_norm(index: BallIndex, phi: Union[Automorphism, OuterClass]) -> Optional[int]:
        """Word norm of the outer class of phi, or None outside the ball."""
        if phi.rank != index.rank:
            raise RankMismatchError(index.rank, phi.rank)
        outer = phi if isinstance(phi, OuterClass) else canonical_class(phi)
        return index.table.get(outer.digest())

    @staticmethod
    def sphere(index: BallIndex, r: int) -> List[OuterClass]:
        return [index.classes[digest] for digest, distance in index.table.items() if distance == r]

    @classmethod
    def verify_tau_bounds(
        cls, index: BallIndex, phi: Automorphism, estimate: TauEstimate, k_max: Optional[int] = None
    ) -> TauBoundReport:
        """Check ‖O^k‖ ≥ ⌈k·lower⌉ and ‖O^k‖ ≤ k·‖O‖ for every power inside the ball."""
        k_max = k_max or max(1, 2 * index.radius)
        norm = cls.exact_norm(index, phi)
        report = TauBoundReport(norm=norm, radius=index.radius)
        current = Automorphism.identity(phi.rank)
        for k in range(1, k_max + 1):
            current = canonical_class(compose(current, phi)).automorphism()
            norm_k = cls.exact_norm(index, current)
            if norm_k is None:
                continue
            required = math.ceil(k * estimate.lower - NUMERIC_SLACK)
            allowed = k * norm if norm is not None else None
            ok = norm_k >= required and (allowed is None or norm_k <= allowed)
            report.entries.append(TauBoundEntry(k=k, norm=norm_k, required_lower=required, allowed_upper=allowed, ok=ok))
            report.ratios.append((k, norm_k / k))
            if not ok:
                report.violations += 1
                logger.error(f"Norm bound violated at k={k}: ‖O^k‖ = {norm_k}, required {required}, allowed {allowed}")
        return report

    @staticmethod
    def save_ball(index: BallIndex, path: Union[str, Path]) -> None:
        """JSON-lines snapshot: a header line, then one canonical tuple per line."""
        header = {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "rank": index.rank,
            "radius": index.radius,
            "layers": index.layers,
            "generating_set": index.convention,
        }
        ordered = sorted(index.table.items(), key=lambda item: (item[1], item[0]))
        with open(path, "w") as handle:
            handle.write(json.dumps(header, sort_keys=True) + "\n")
            for digest, distance in ordered:
                images = [image.to_json() for image in index.classes[digest].canonical_images]
                handle.write(json.dumps({"distance": distance, "images": images}, sort_keys=True) + "\n")
        logger.info(f"Saved {len(index)} classes to {path}")

    @staticmethod
    def load_ball(path: Union[str, Path]) -> BallIndex:
        lines = Path(path).read_text().splitlines()
        if not lines:
            raise ParseError("Empty ball snapshot", source=str(path))
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise ParseError(f"Invalid snapshot header: {exc.msg}", line=1, column=exc.colno, source=str(path))
        if header.get("format") != SNAPSHOT_FORMAT or header.get("version") != SNAPSHOT_VERSION:
            raise ParseError(f"Unsupported snapshot format {header.get('format')} v{header.get('version')}", line=1, source=str(path))
        rank = int(header["rank"])
        index = BallIndex(
            rank=rank,
            radius=int(header["radius"]),
            layers=list(header["layers"]),
            convention=header.get("generating_set", GENERATING_SET_CONVENTION),
        )
        for number, line in enumerate(lines[1:], start=2):
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"Invalid snapshot row: {exc.msg}", line=number, column=exc.colno, source=str(path))
            outer = OuterClass(rank, tuple(ReducedWord.from_json(image, rank) for image in row["images"]))
            index.table[outer.digest()] = int(row["distance"])
            index.classes[outer.digest()] = outer
        return index

    @staticmethod
    def distance_table_digest(index: BallIndex) -> str:
        payload = json.dumps(sorted(index.table.items()), separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()
