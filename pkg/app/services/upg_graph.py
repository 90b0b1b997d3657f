"""Filtered graph maps with f(E_i) = E_i·u_i, and their iteration.

Edge paths use the word encoding of ``word_core``: ``+i`` is E_i and ``-i``
its reverse Ē_i, so tightening a path is free reduction.  Representatives
are loaded from JSON fixtures; constructing them is not attempted here.
"""
from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.config import settings
from ..core.error_handling import (
    BudgetExceededError,
    InvalidFixtureError,
    NoWitnessFoundError,
    NotFoundWithinBudgetError,
    PreconditionError,
)
from ..models.reports import (
    ClosedFormRow,
    FixtureViolation,
    SplittingResult,
    ValidationReport,
    WitnessCertificate,
)
from .word_core import free_reduce, max_power

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures"
INVERSE_PREFIX = "~"
SLOPE_TOLERANCE = 0.02
SPLITTING_PERSISTENCE = 5


@dataclass(frozen=True)
class EdgePath:
    edges: Tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.edges)

    def inverse(self) -> "EdgePath":
        return EdgePath(tuple(-edge for edge in reversed(self.edges)))

    def is_tight(self) -> bool:
        return all(self.edges[k] != -self.edges[k + 1] for k in range(len(self.edges) - 1))


@dataclass(frozen=True)
class ExceptionalPath:
    """E_i υ^power Ē_j; a negative power means ῡ^|power|."""

    i: int
    j: int
    power: int
    nielsen_loop: Tuple[int, ...]
    l: int
    s: int

    def edges(self) -> EdgePath:
        block = self.nielsen_loop if self.power >= 0 else tuple(-edge for edge in reversed(self.nielsen_loop))
        return EdgePath((self.i,) + block * abs(self.power) + (-self.j,))


@dataclass(frozen=True)
class NielsenPathRecord:
    path: EdgePath
    indivisible: bool


@dataclass(frozen=True)
class FilteredGraphMap:
    vertices: Tuple[str, ...]
    names: Tuple[str, ...]
    origins: Tuple[str, ...]
    termini: Tuple[str, ...]
    suffixes: Tuple[Tuple[int, ...], ...]

    @property
    def edge_count(self) -> int:
        return len(self.names)

    @classmethod
    def from_json(cls, payload: Dict[str, Any]) -> "FilteredGraphMap":
        vertices = tuple(str(vertex) for vertex in payload.get("vertices", []))
        edges = payload.get("edges")
        if not isinstance(edges, list) or not edges:
            raise InvalidFixtureError("Graph map needs a non-empty 'edges' list")
        names: List[str] = []
        for index, edge in enumerate(edges, start=1):
            name = str(edge.get("name", ""))
            if not name or name.startswith(INVERSE_PREFIX) or name in names:
                raise InvalidFixtureError(f"Edge {index} has a missing, reserved or duplicate name {name!r}", index)
            names.append(name)
        lookup = {name: index for index, name in enumerate(names, start=1)}

        origins, termini, suffixes = [], [], []
        for index, edge in enumerate(edges, start=1):
            origin, terminus = str(edge.get("from")), str(edge.get("to"))
            if origin not in vertices or terminus not in vertices:
                raise InvalidFixtureError(f"Edge {names[index - 1]} has a dangling endpoint", index)
            origins.append(origin)
            termini.append(terminus)
            suffix = []
            for token in edge.get("suffix", []):
                bare = token[len(INVERSE_PREFIX):] if token.startswith(INVERSE_PREFIX) else token
                if bare not in lookup:
                    raise InvalidFixtureError(f"Suffix of {names[index - 1]} names unknown edge {token!r}", index)
                suffix.append(-lookup[bare] if token.startswith(INVERSE_PREFIX) else lookup[bare])
            suffixes.append(tuple(suffix))
        return cls(vertices, tuple(names), tuple(origins), tuple(termini), tuple(suffixes))

    def to_json(self) -> Dict[str, Any]:
        return {
            "vertices": list(self.vertices),
            "edges": [
                {
                    "name": name,
                    "from": self.origins[index],
                    "to": self.termini[index],
                    "suffix": self.tokens(EdgePath(self.suffixes[index])),
                }
                for index, name in enumerate(self.names)
            ],
        }

    def origin(self, edge: int) -> str:
        return self.origins[edge - 1] if edge > 0 else self.termini[-edge - 1]

    def terminus(self, edge: int) -> str:
        return self.termini[edge - 1] if edge > 0 else self.origins[-edge - 1]

    def token(self, edge: int) -> str:
        return self.names[edge - 1] if edge > 0 else INVERSE_PREFIX + self.names[-edge - 1]

    def tokens(self, path: EdgePath) -> List[str]:
        return [self.token(edge) for edge in path.edges]

    def parse_path(self, tokens: Sequence[str]) -> EdgePath:
        lookup = {name: index for index, name in enumerate(self.names, start=1)}
        edges = []
        for position, token in enumerate(tokens):
            inverse = token.startswith(INVERSE_PREFIX)
            bare = token[len(INVERSE_PREFIX):] if inverse else token
            if bare not in lookup:
                raise InvalidFixtureError(f"Unknown edge {token!r}", position)
            edges.append(-lookup[bare] if inverse else lookup[bare])
        path = EdgePath(tuple(edges))
        if not self.is_path(path):
            raise InvalidFixtureError(f"Edges {list(tokens)} are not consecutive")
        return path

    def is_path(self, path: EdgePath) -> bool:
        return all(self.terminus(a) == self.origin(b) for a, b in zip(path.edges, path.edges[1:]))

    def is_closed(self, path: EdgePath) -> bool:
        return not path.edges or self.origin(path.edges[0]) == self.terminus(path.edges[-1])

    def image(self, edge: int) -> Tuple[int, ...]:
        if edge > 0:
            return (edge,) + self.suffixes[edge - 1]
        return tuple(-e for e in reversed(self.suffixes[-edge - 1])) + (edge,)


def load_fixture(source: Union[str, Path]) -> FilteredGraphMap:
    """Load a graph map from a JSON file or a shipped fixture name."""
    path = Path(source)
    if not path.exists():
        path = FIXTURE_DIR / f"{source}.json"
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError:
        raise InvalidFixtureError(f"Fixture not found: {source}")
    except json.JSONDecodeError as exc:
        raise InvalidFixtureError(f"Fixture {path.name} is not valid JSON: {exc.msg} at line {exc.lineno}")
    return FilteredGraphMap.from_json(payload)


def dump_fixture(graph_map: FilteredGraphMap, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(graph_map.to_json(), indent=2) + "\n")


def _connected(graph_map: FilteredGraphMap) -> bool:
    if not graph_map.vertices:
        return False
    parent = {vertex: vertex for vertex in graph_map.vertices}

    def find(vertex: str) -> str:
        while parent[vertex] != vertex:
            parent[vertex] = parent[parent[vertex]]
            vertex = parent[vertex]
        return vertex

    for origin, terminus in zip(graph_map.origins, graph_map.termini):
        parent[find(origin)] = find(terminus)
    return len({find(vertex) for vertex in graph_map.vertices}) == 1


def validate_upg_rep(graph_map: FilteredGraphMap) -> ValidationReport:
    """Check the filtration conditions on every suffix path u_i."""
    violations: List[FixtureViolation] = []
    if not _connected(graph_map):
        violations.append(FixtureViolation(condition="connectivity", message="graph is not connected"))
    for i, suffix in enumerate(graph_map.suffixes, start=1):
        path = EdgePath(suffix)
        if any(abs(edge) >= i for edge in suffix):
            violations.append(
                FixtureViolation(index=i, condition="lower_stratum", message=f"lower-stratum violation at i={i}")
            )
        if not graph_map.is_path(path):
            violations.append(
                FixtureViolation(index=i, condition="incidence", message=f"u_{i} is not an edge path")
            )
        elif suffix and (graph_map.origin(suffix[0]) != graph_map.termini[i - 1] or not graph_map.is_closed(path)):
            violations.append(
                FixtureViolation(index=i, condition="closed_suffix", message=f"u_{i} is not closed at the terminal vertex of E_{i}")
            )
        if not path.is_tight():
            violations.append(FixtureViolation(index=i, condition="tight", message=f"u_{i} is not tight"))
        if suffix and suffix[0] == -i:
            violations.append(
                FixtureViolation(index=i, condition="image_tight", message=f"f(E_{i}) = E_{i}·u_{i} is not tight")
            )
    report = ValidationReport(
        valid=not violations,
        edge_count=graph_map.edge_count,
        vertex_count=len(graph_map.vertices),
        violations=violations,
    )
    if violations:
        logger.warning(f"Graph map failed validation: {[v.message for v in violations]}")
    return report


def require_valid(graph_map: FilteredGraphMap) -> None:
    report = validate_upg_rep(graph_map)
    if not report.valid:
        first = report.violations[0]
        raise InvalidFixtureError(first.message, first.index)


def apply_map(graph_map: FilteredGraphMap, path: EdgePath) -> EdgePath:
    """One application of f followed by tightening."""
    return EdgePath(free_reduce(itertools.chain.from_iterable(graph_map.image(edge) for edge in path.edges)))


def iterate_path(graph_map: FilteredGraphMap, path: EdgePath, k: int, length_cap: Optional[int] = None) -> EdgePath:
    """[[f^k(γ)]], tightening after each application."""
    if k < 0:
        raise PreconditionError(f"Iteration count must be non-negative, got {k}")
    length_cap = length_cap or settings.PATH_LENGTH_CAP
    current = EdgePath(free_reduce(path.edges))
    for step in range(k):
        current = apply_map(graph_map, current)
        if len(current) > length_cap:
            raise BudgetExceededError(
                f"Path length {len(current)} exceeds cap {length_cap} after {step + 1} iterations",
                details={"iterations": step + 1, "length": len(current), "cap": length_cap},
            )
    return current


def path_alpha(path: EdgePath) -> int:
    return max_power(path.edges)


# --- Nielsen paths and exceptional paths ------------------------------------

def is_nielsen(graph_map: FilteredGraphMap, path: EdgePath) -> bool:
    return bool(path.edges) and apply_map(graph_map, path) == path


def nielsen_record(graph_map: FilteredGraphMap, path: EdgePath, k_check: int = 10) -> NielsenPathRecord:
    """Confirm [[f^k(σ)]] = σ for k ≤ k_check and test indivisibility."""
    for k in range(1, k_check + 1):
        if iterate_path(graph_map, path, k) != path:
            raise PreconditionError(f"{graph_map.tokens(path)} is not a Nielsen path (moved at k={k})")
    divisible = any(
        is_nielsen(graph_map, EdgePath(path.edges[:cut])) and is_nielsen(graph_map, EdgePath(path.edges[cut:]))
        for cut in range(1, len(path))
    )
    return NielsenPathRecord(path, indivisible=not divisible)


def _root(edges: Tuple[int, ...]) -> Tuple[Tuple[int, ...], int]:
    n = len(edges)
    for size in range(1, n + 1):
        if n % size == 0 and edges[:size] * (n // size) == edges:
            return edges[:size], n // size
    return edges, 1


def linear_edges(graph_map: FilteredGraphMap) -> Dict[int, Tuple[Tuple[int, ...], int]]:
    """Edges with u_i = υ^l for a Nielsen loop υ that is cyclically tight."""
    linear = {}
    for i, suffix in enumerate(graph_map.suffixes, start=1):
        if not suffix:
            continue
        loop, exponent = _root(suffix)
        if loop[-1] == -loop[0] or not is_nielsen(graph_map, EdgePath(loop)):
            continue
        linear[i] = (loop, exponent)
    return linear


def exceptional_path(graph_map: FilteredGraphMap, i: int, j: int, power: int) -> ExceptionalPath:
    """Build E_i υ^power Ē_j, reading υ, l and s off the map."""
    linear = linear_edges(graph_map)
    if i not in linear or j not in linear:
        raise InvalidFixtureError(f"E_{i} and E_{j} must both map to themselves times a power of a Nielsen loop")
    (loop_i, l), (loop_j, s) = linear[i], linear[j]
    if loop_i != loop_j:
        raise InvalidFixtureError(f"E_{i} and E_{j} twist around different Nielsen loops")
    if j > i:
        raise InvalidFixtureError(f"Exceptional path needs j <= i, got i={i}, j={j}")
    candidate = ExceptionalPath(i, j, power, loop_i, l, s)
    if not candidate.edges().is_tight():
        raise InvalidFixtureError(f"E_{i} υ^{power} Ē_{j} is not tight")
    return candidate


def exceptional_closed_form(e: ExceptionalPath, k: int) -> ExceptionalPath:
    """[[f^k(E_i υ^r Ē_j)]] = E_i υ^{k(l−s)+r} Ē_j."""
    return ExceptionalPath(e.i, e.j, k * (e.l - e.s) + e.power, e.nielsen_loop, e.l, e.s)


def _read_power(path: EdgePath, e: ExceptionalPath) -> Optional[int]:
    edges = path.edges
    if len(edges) < 2 or edges[0] != e.i or edges[-1] != -e.j:
        return None
    middle = edges[1:-1]
    loop = e.nielsen_loop
    if not middle:
        return 0
    for sign, block in ((1, loop), (-1, tuple(-edge for edge in reversed(loop)))):
        if len(middle) % len(block) == 0 and block * (len(middle) // len(block)) == middle:
            return sign * (len(middle) // len(block))
    return None


def closed_form_table(graph_map: FilteredGraphMap, e: ExceptionalPath, k_max: int = 50) -> List[ClosedFormRow]:
    """Compare the closed form with actual iteration for k = 0..k_max."""
    rows = []
    current = e.edges()
    for k in range(k_max + 1):
        if k:
            current = apply_map(graph_map, current)
        predicted = exceptional_closed_form(e, k)
        rows.append(
            ClosedFormRow(
                k=k,
                closed_form_power=predicted.power,
                iterated_power=_read_power(current, e),
                match=current == predicted.edges(),
            )
        )
    return rows


# --- Splittings --------------------------------------------------------------

def _match_exceptional(
    edges: Tuple[int, ...], start: int, linear: Dict[int, Tuple[Tuple[int, ...], int]]
) -> int:
    """Length of the longest E_a υ^m Ē_b starting at ``start`` (0 if none)."""
    head = edges[start]
    if head <= 0 or head not in linear:
        return 0
    loop = linear[head][0]
    best = 0
    for block in (loop, tuple(-edge for edge in reversed(loop))):
        position = start + 1
        while True:
            if position < len(edges):
                tail = -edges[position]
                if tail > 0 and tail in linear and linear[tail][0] == loop and (tail != head or position > start + 1):
                    best = max(best, position + 1 - start)
            if edges[position:position + len(block)] == block:
                position += len(block)
            else:
                break
    return best


def greedy_parse(graph_map: FilteredGraphMap, path: EdgePath) -> List[EdgePath]:
    """Split into single edges and exceptional paths, longest match first."""
    linear = linear_edges(graph_map)
    pieces = []
    position = 0
    while position < len(path.edges):
        size = _match_exceptional(path.edges, position, linear) or 1
        pieces.append(EdgePath(path.edges[position:position + size]))
        position += size
    return pieces


def is_splitting(graph_map: FilteredGraphMap, pieces: Sequence[EdgePath], k_check: int = SPLITTING_PERSISTENCE) -> bool:
    """Iterated pieces concatenate without cancellation for k = 1..k_check."""
    current = list(pieces)
    for _ in range(k_check):
        current = [apply_map(graph_map, piece) for piece in current]
        nonempty = [piece for piece in current if piece.edges]
        if any(left.edges[-1] == -right.edges[0] for left, right in zip(nonempty, nonempty[1:])):
            return False
    return True


def detect_splitting(
    graph_map: FilteredGraphMap, sigma: EdgePath, k_max: Optional[int] = None
) -> SplittingResult:
    """Least M such that [[f^M(σ)]] parses into a splitting that persists."""
    k_max = settings.SPLITTING_K_MAX if k_max is None else k_max
    if not graph_map.is_closed(sigma) or not sigma.is_tight():
        raise PreconditionError("detect_splitting needs a closed tight path")
    current = sigma
    for iterations in range(k_max + 1):
        if iterations:
            current = apply_map(graph_map, current)
        pieces = greedy_parse(graph_map, current)
        if is_splitting(graph_map, pieces):
            logger.debug(f"Splitting found after {iterations} iterations: {len(pieces)} pieces")
            return SplittingResult(
                iterations=iterations,
                decomposition=[graph_map.tokens(piece) for piece in pieces],
                persisted_through=iterations + SPLITTING_PERSISTENCE,
            )
    raise NotFoundWithinBudgetError(
        f"No persistent splitting within {k_max} iterations", details={"k_max": k_max}
    )


# --- Witness search ----------------------------------------------------------

def _candidate_loops(graph_map: FilteredGraphMap) -> List[EdgePath]:
    loops: List[EdgePath] = []
    seen = set()

    def add(path: EdgePath) -> None:
        if path.edges and path not in seen and graph_map.is_path(path) and graph_map.is_closed(path):
            seen.add(path)
            loops.append(path)

    for i in range(1, graph_map.edge_count + 1):
        add(EdgePath((i,)))
    for i in range(1, graph_map.edge_count + 1):
        add(EdgePath(free_reduce(graph_map.image(i) + (-i,))))
    basics = list(loops)
    for size in (2, 3):
        for combo in itertools.product(basics, repeat=size):
            for signs in itertools.product((1, -1), repeat=size):
                edges: Tuple[int, ...] = ()
                for sign, loop in zip(signs, combo):
                    edges += loop.edges if sign > 0 else loop.inverse().edges
                add(EdgePath(free_reduce(edges)))
    return loops


def growth_table(graph_map: FilteredGraphMap, path: EdgePath, k_max: int) -> List[Tuple[int, int]]:
    table = []
    current = path
    for k in range(1, k_max + 1):
        current = apply_map(graph_map, current)
        table.append((k, path_alpha(current)))
    return table


def find_witness(graph_map: FilteredGraphMap, k_max: Optional[int] = None) -> Tuple[EdgePath, WitnessCertificate]:
    """First candidate loop whose path-alpha grows with slope ≥ 1 under f."""
    k_max = k_max or settings.WITNESS_ITERATIONS
    require_valid(graph_map)
    candidates = _candidate_loops(graph_map)
    for path in candidates:
        table = growth_table(graph_map, path, k_max)
        ks = np.array([k for k, _ in table], dtype=float)
        alphas = np.array([value for _, value in table], dtype=float)
        slope = float(np.polyfit(ks, alphas, 1)[0])
        if slope < 1 - SLOPE_TOLERANCE:
            continue
        nearest = round(slope)
        reported = float(nearest) if abs(slope - nearest) <= SLOPE_TOLERANCE * nearest else slope
        intercept = int(min(value - k for k, value in table))
        logger.info(f"Witness {graph_map.tokens(path)}: slope {reported}, intercept {intercept}")
        return path, WitnessCertificate(
            path=graph_map.tokens(path), slope=reported, intercept=intercept, k_max=k_max, table=table
        )
    raise NoWitnessFoundError(
        "No candidate loop grows linearly; the map may have finite order or the search budget is too small",
        details={"candidates": len(candidates), "k_max": k_max},
    )
