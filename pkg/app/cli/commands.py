import argparse
import logging
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import ValidationError

from ..core.error_handling import (
    EXIT_INCONCLUSIVE,
    EXIT_OK,
    EXIT_VIOLATION,
    InconclusiveError,
    InvalidFixtureError,
    NoWitnessFoundError,
    NotFoundWithinBudgetError,
    ParseError,
    PreconditionError,
)
from ..models.reports import ExperimentConfig, SuiteResult, TauEstimate, VerifySummary
from ..services import upg_graph
from ..services.automorphism import (
    Automorphism,
    Move,
    abelianization_matrix,
    determinant,
    invert_automorphism,
    move_automorphism,
    nielsen_decompose,
    outer_canonical,
    power_automorphism,
    symmetric_generator_set,
)
from ..services.cancellation import CancellationAnalyzer
from ..services.cayley_oracle import BallIndex, CayleyOracle
from ..services.io import (
    automorphisms_from_payload,
    dumps_report,
    load_automorphisms,
    load_certificate,
    load_json_file,
    parse_inline_automorphism,
    write_csv,
    write_report,
)
from ..services.translen import TranslationLengthEstimator
from ..services.word_core import ReducedWord, alpha, alpha_tilde, cyclic_reduce, enumerate_necklaces, invert

logger = logging.getLogger(__name__)

OVERRIDABLE = (
    "rank",
    "seed",
    "out",
    "workers",
    "k_max",
    "length_budget",
    "bcc_depth",
    "samples",
    "maxlen",
    "exhaustive_length",
    "constant_offset",
    "oracle_radius",
    "node_budget",
    "certificate",
)
CLOSED_FORM_K_MAX = 50


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """ExperimentConfig from --config, overridden by explicit flags."""
    payload: Dict[str, Any] = {}
    if getattr(args, "config", None):
        payload = load_json_file(args.config)
        if not isinstance(payload, dict):
            raise ParseError("Config must be a JSON object", source=args.config)
    overrides = {key: getattr(args, key) for key in OVERRIDABLE if getattr(args, key, None) is not None}
    try:
        return ExperimentConfig(**{**payload, **overrides})
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise ParseError(f"Invalid experiment config field {field}: {first['msg']}", source=getattr(args, "config", "") or "")


def collect_inputs(args: argparse.Namespace, config: ExperimentConfig) -> List[Automorphism]:
    inputs: List[Automorphism] = []
    for path in getattr(args, "aut", []) or []:
        inputs.extend(load_automorphisms(path))
    for text in getattr(args, "images", []) or []:
        inputs.append(parse_inline_automorphism(text))
    if config.automorphisms:
        inputs.extend(automorphisms_from_payload(config.automorphisms))
    return inputs


def default_inputs(rank: int) -> List[Automorphism]:
    """The twist x_1 ↦ x_1 x_2, plus a ↦ b, b ↦ ab in rank 2."""
    twist = Automorphism.from_letters([(1, 2)] + [(i,) for i in range(2, rank + 1)], rank)
    if rank == 2:
        return [twist, Automorphism.parse(["b", "ab"], 2)]
    return [twist]


def _emit(payload: Any) -> None:
    sys.stdout.write(dumps_report(payload))


def cmd_word(args: argparse.Namespace) -> int:
    word = ReducedWord.parse(args.word, args.rank)
    necklace, conjugator = cyclic_reduce(word)
    _emit(
        {
            "word": word.format(),
            "length": len(word),
            "inverse": invert(word).format(),
            "necklace": necklace.format(),
            "cyclic_length": len(necklace),
            "conjugator": conjugator.format(),
            "alpha": alpha(word),
            "alpha_tilde": alpha_tilde(necklace),
        }
    )
    return EXIT_OK


def cmd_aut(args: argparse.Namespace) -> int:
    config = load_config(args)
    inputs = collect_inputs(args, config)
    if not inputs:
        raise PreconditionError("No automorphism given; use --aut or --images")
    results = []
    for phi in inputs:
        target = power_automorphism(phi, args.power)
        decomposition = nielsen_decompose(target)
        matrix = abelianization_matrix(target)
        results.append(
            {
                "input": phi.to_json(),
                "power": args.power,
                "images": target.to_json(),
                "decomposition": decomposition.to_json(),
                "decomposition_length": len(decomposition),
                "outer_canonical": outer_canonical(target).to_json(),
                "abelianization": matrix.tolist(),
                "determinant": determinant(matrix),
                "inverse": invert_automorphism(target).to_json(),
            }
        )
    _emit(results)
    return EXIT_OK


def cmd_bcc(args: argparse.Namespace) -> int:
    config = load_config(args)
    report = CancellationAnalyzer.lemma1_constants(
        config.rank,
        config.bcc_depth,
        certify_samples=config.samples,
        maxlen=config.maxlen,
        rng=random.Random(config.seed),
        exhaustive_length=config.exhaustive_length,
        workers=config.workers,
    )
    write_report(report, config.out, f"bcc_rank{config.rank}_L{config.bcc_depth}.json")
    _emit(report)
    return EXIT_OK


def _run_tau(item: Tuple[int, Automorphism], config: ExperimentConfig) -> Tuple[str, Optional[TauEstimate], str]:
    index, phi = item
    try:
        estimate = TranslationLengthEstimator.tau_estimate(
            phi,
            rng=random.Random(config.seed + index),
            k_max=config.k_max,
            length_budget=config.length_budget,
            depth=config.bcc_depth,
        )
        return "ok", estimate, ""
    except InconclusiveError as exc:
        partial = exc.partial if isinstance(exc.partial, TauEstimate) else None
        return "inconclusive", partial, exc.message


def _growth_rows(estimate: Optional[TauEstimate]) -> List[List[Any]]:
    if estimate is None:
        return []
    evidence = estimate.certificate.get("growth", {}).get("evidence", {})
    alphas = {int(k): value for k, value in estimate.certificate.get("table", [])}
    ks = evidence.get("k_values", [])
    lengths = evidence.get("lengths", [])
    rows = [[k, length, alphas.get(k)] for k, length in zip(ks, lengths)]
    rows += [[k, None, value] for k, value in sorted(alphas.items()) if k not in set(ks)]
    return rows


def cmd_tau(args: argparse.Namespace) -> int:
    """Bracket τ for every input; exit 0 iff none is inconclusive."""
    config = load_config(args)
    inputs = collect_inputs(args, config)
    if not inputs:
        raise PreconditionError("No automorphism given; use --aut, --images or the config file")
    with ThreadPoolExecutor(max_workers=config.workers) as executor:
        results = list(executor.map(lambda item: _run_tau(item, config), enumerate(inputs)))

    summary = []
    for index, (phi, (status, estimate, message)) in enumerate(zip(inputs, results)):
        certificate = {"index": index, "input": phi.to_json(), "status": status, "estimate": estimate, "message": message}
        write_report(certificate, config.out, f"tau_{index}.json")
        write_csv(_growth_rows(estimate), ["k", "L_k", "alpha_tilde_k"], Path(config.out) / f"tau_{index}_growth.csv")
        summary.append(
            {
                "index": index,
                "status": status,
                "lower": estimate.lower if estimate else None,
                "upper": estimate.upper if estimate else None,
                "method": estimate.method if estimate else None,
            }
        )
    _emit(summary)
    return EXIT_INCONCLUSIVE if any(status != "ok" for status, _, _ in results) else EXIT_OK


def _suite(name: str, checked: int, failures: int, warning: Optional[str] = None) -> SuiteResult:
    if warning:
        logger.warning(f"{name}: {warning}")
    return SuiteResult(name=name, checked=checked, failures=failures, warning=warning)


def _check_twist_powers(index: BallIndex, rank: int, constant: int) -> Tuple[int, int]:
    """Compare exact norms of twist powers inside the ball with (k − 1)/C."""
    if constant < 1:
        return 0, 0
    twist = move_automorphism(Move("twist", 2, 1), rank)
    checked = failures = 0
    for k in range(1, index.radius + 1):
        norm = CayleyOracle.exact_norm(index, power_automorphism(twist, k))
        if norm is None:
            continue
        checked += 1
        if norm < TranslationLengthEstimator.dehn_twist_bound(k, constant) - 1e-9:
            failures += 1
    return checked, failures


def cmd_verify(args: argparse.Namespace) -> int:
    """Cyclic and straight-line cancellation, doubling and oracle suites; exit 2 on any failure."""
    config = load_config(args)
    rank = config.rank
    summary = VerifySummary()
    report = CancellationAnalyzer.lemma1_constants(rank, config.bcc_depth, workers=config.workers)
    constant = max(0, report.lemma1_cyclic_constant + config.constant_offset)
    summary.details["cancellation"] = report.model_dump(mode="json")
    summary.details["checked_constant"] = constant

    words = config.samples + (len(enumerate_necklaces(rank, config.exhaustive_length)) if config.exhaustive_length else 0)
    empty = "empty suite" if words == 0 else None
    generator_count = len(symmetric_generator_set(rank))

    violations = CancellationAnalyzer.verify_lemma1(
        rank, constant, config.samples, config.maxlen, random.Random(config.seed), exhaustive_length=config.exhaustive_length
    )
    summary.suites.append(_suite("lemma1_cyclic", words * generator_count, len(violations), empty))
    summary.details["lemma1_violations"] = [v.model_dump(mode="json") for v in violations[:20]]
    if words:
        summary.details["sharpness"] = CancellationAnalyzer.sharpness_probe(
            rank, constant, config.samples, config.maxlen, random.Random(config.seed), exhaustive_length=config.exhaustive_length
        )

    symmetrized = {label: max(0, value + config.constant_offset) for label, value in report.symmetrized.items()}
    word_violations = CancellationAnalyzer.verify_word_bounds(rank, symmetrized, config.samples, config.maxlen, random.Random(config.seed))
    summary.suites.append(_suite("lemma1_word", config.samples * len(symmetrized), len(word_violations), empty))

    doubling = TranslationLengthEstimator.verify_doubling(
        rank, config.samples, config.maxlen, random.Random(config.seed), exhaustive_length=config.exhaustive_length
    )
    summary.suites.append(_suite("doubling", words * generator_count, len(doubling), empty))

    if config.oracle_radius:
        index = CayleyOracle.build_ball(rank, config.oracle_radius, config.node_budget, config.workers)
        inputs = collect_inputs(args, config) or default_inputs(rank)
        checked = failures = 0
        bound_reports = []
        for position, phi in enumerate(inputs):
            status, estimate, _ = _run_tau((position, phi), config)
            if estimate is None:
                continue
            bounds = CayleyOracle.verify_tau_bounds(index, phi, estimate)
            checked += len(bounds.entries)
            failures += bounds.violations
            bound_reports.append({"input": phi.to_json(), "status": status, "lower": estimate.lower, "bounds": bounds})
        summary.suites.append(_suite("oracle_bounds", checked, failures))
        twist_checked, twist_failures = _check_twist_powers(index, rank, constant)
        summary.suites.append(_suite("dehn_twist", twist_checked, twist_failures, None if twist_checked else "empty suite"))
        summary.details["oracle"] = {"layers": index.layers, "radius": index.radius, "reports": bound_reports}

    if config.certificate:
        payload = load_certificate(config.certificate)
        phi = Automorphism.from_json(payload["input"])
        if payload["estimate"] is None:
            summary.suites.append(_suite("certificate", 0, 0, "certificate carries no estimate"))
        else:
            failed = TranslationLengthEstimator.recheck_certificate(phi, TauEstimate(**payload["estimate"]))
            summary.suites.append(_suite("certificate", 1, len(failed)))
            summary.details["certificate_failures"] = failed

    summary.passed = all(suite.failures == 0 for suite in summary.suites)
    write_report(summary, config.out, "verify_summary.json")
    _emit({"passed": summary.passed, "suites": summary.suites})
    return EXIT_OK if summary.passed else EXIT_VIOLATION


def _exceptional_pairs(graph_map: upg_graph.FilteredGraphMap) -> List[Tuple[int, int]]:
    linear = upg_graph.linear_edges(graph_map)
    return [
        (i, j)
        for i in sorted(linear)
        for j in sorted(linear)
        if j < i and linear[i][0] == linear[j][0]
    ]


def cmd_upg(args: argparse.Namespace) -> int:
    """Validate a fixture, find a witness and compare closed forms with iteration."""
    config = load_config(args)
    source = args.fixture or config.fixture or "dehn_twist"
    graph_map = upg_graph.load_fixture(source)
    validation = upg_graph.validate_upg_rep(graph_map)

    if args.action == "validate":
        _emit(validation)
        return EXIT_OK if validation.valid else EXIT_VIOLATION
    if not validation.valid:
        first = validation.violations[0]
        raise InvalidFixtureError(first.message, first.index)

    if args.action == "iterate":
        if not args.path:
            raise PreconditionError("iterate needs --path")
        result = upg_graph.iterate_path(graph_map, graph_map.parse_path(args.path.split(",")), args.k)
        _emit({"k": args.k, "path": graph_map.tokens(result), "length": len(result), "path_alpha": upg_graph.path_alpha(result)})
        return EXIT_OK
    if args.action == "witness":
        _, certificate = upg_graph.find_witness(graph_map)
        _emit(certificate)
        return EXIT_OK
    if args.action == "split":
        if not args.path:
            raise PreconditionError("split needs --path")
        _emit(upg_graph.detect_splitting(graph_map, graph_map.parse_path(args.path.split(","))))
        return EXIT_OK

    report: Dict[str, Any] = {"fixture": source, "validation": validation}
    exit_code = EXIT_OK
    try:
        path, certificate = upg_graph.find_witness(graph_map)
        report["witness"] = certificate
        try:
            report["splitting"] = upg_graph.detect_splitting(graph_map, path)
        except NotFoundWithinBudgetError as exc:
            report["splitting_error"] = exc.message
    except NoWitnessFoundError as exc:
        report["witness_error"] = exc.message
        exit_code = EXIT_INCONCLUSIVE

    k_max = args.k_max or CLOSED_FORM_K_MAX
    closed_forms = {}
    mismatches = 0
    rows = []
    for i, j in _exceptional_pairs(graph_map):
        e = upg_graph.exceptional_path(graph_map, i, j, 0)
        table = upg_graph.closed_form_table(graph_map, e, k_max)
        mismatches += sum(1 for row in table if not row.match)
        closed_forms[f"E{i}-E{j}"] = {"l": e.l, "s": e.s, "rows": table}
        rows.extend([f"E{i}-E{j}", row.k, row.closed_form_power, row.iterated_power, row.match] for row in table)
    report["closed_forms"] = closed_forms
    report["closed_form_mismatches"] = mismatches

    name = Path(source).stem
    write_report(report, config.out, f"upg_{name}.json")
    write_csv(rows, ["pair", "k", "closed_form_power", "iterated_power", "match"], Path(config.out) / f"upg_{name}_closed_form.csv")
    _emit({"fixture": source, "valid": True, "witness": report.get("witness"), "closed_form_mismatches": mismatches})
    if mismatches:
        return EXIT_VIOLATION
    return exit_code


def cmd_oracle(args: argparse.Namespace) -> int:
    config = load_config(args)
    if args.action == "build":
        index = CayleyOracle.build_ball(config.rank, config.oracle_radius, config.node_budget, config.workers)
        Path(config.out).mkdir(parents=True, exist_ok=True)
        target = Path(config.out) / f"ball_rank{config.rank}_R{index.radius}.jsonl"
        CayleyOracle.save_ball(index, target)
        _emit(
            {
                "rank": index.rank,
                "radius": index.radius,
                "layers": index.layers,
                "nodes": len(index),
                "digest": CayleyOracle.distance_table_digest(index),
                "snapshot": str(target),
            }
        )
        return EXIT_OK

    index = (
        CayleyOracle.load_ball(args.ball)
        if args.ball
        else CayleyOracle.build_ball(config.rank, config.oracle_radius, config.node_budget, config.workers)
    )
    inputs = collect_inputs(args, config)
    if not inputs:
        raise PreconditionError("No automorphism given; use --aut or --images")
    norms = [{"input": phi.to_json(), "norm": CayleyOracle.exact_norm(index, phi)} for phi in inputs]
    _emit({"radius": index.radius, "norms": norms})
    return EXIT_OK
