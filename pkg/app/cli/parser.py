import argparse

from ..core.config import settings
from . import commands


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="ExperimentConfig JSON file")
    common.add_argument("--seed", type=int, help="Seed for randomized suites")
    common.add_argument("--out", help="Directory for report files")
    common.add_argument("--workers", type=int, help="Worker threads")
    common.add_argument("--rank", type=int, help="Rank n of F_n")
    common.add_argument("--log-level", dest="log_level", help="Override LOG_LEVEL")
    return common


def _input_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--aut", action="append", default=[], help="JSON file with automorphism(s)")
    parser.add_argument(
        "--images", action="append", default=[], help="Inline automorphism, comma-separated images, e.g. ab,b"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outfn",
        description=f"{settings.APP_NAME} v{settings.APP_VERSION}",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    common = _common_options()
    subparsers = parser.add_subparsers(dest="command", required=True)

    word = subparsers.add_parser("word", parents=[common], help="Statistics of a word")
    word.add_argument("word", help="Word in a..z / A..Z letters")
    word.set_defaults(handler=commands.cmd_word)

    aut = subparsers.add_parser("aut", parents=[common], help="Decompose and canonicalize automorphisms")
    _input_options(aut)
    aut.add_argument("--power", type=int, default=1, help="Work with phi^power")
    aut.set_defaults(handler=commands.cmd_aut)

    bcc = subparsers.add_parser("bcc", parents=[common], help="Bounded-cancellation constants")
    bcc.add_argument("--depth", dest="bcc_depth", type=int, help="Boundary word search depth L")
    bcc.add_argument("--samples", type=int, help="Random necklaces used to certify C")
    bcc.add_argument("--maxlen", type=int, help="Longest sampled necklace")
    bcc.add_argument("--exhaustive", dest="exhaustive_length", type=int, help="Check every necklace up to this length")
    bcc.set_defaults(handler=commands.cmd_bcc)

    tau = subparsers.add_parser("tau", parents=[common], help="Bracket translation lengths")
    _input_options(tau)
    tau.add_argument("--k-max", dest="k_max", type=int, help="Growth iterations")
    tau.add_argument("--length-budget", dest="length_budget", type=int, help="Longest class during growth fits")
    tau.add_argument("--depth", dest="bcc_depth", type=int, help="Cancellation search depth")
    tau.set_defaults(handler=commands.cmd_tau)

    verify = subparsers.add_parser("verify", parents=[common], help="Run the verification suites")
    _input_options(verify)
    verify.add_argument("--depth", dest="bcc_depth", type=int, help="Cancellation search depth")
    verify.add_argument("--samples", type=int, help="Random necklaces per suite")
    verify.add_argument("--maxlen", type=int, help="Longest sampled necklace")
    verify.add_argument("--exhaustive", dest="exhaustive_length", type=int, help="Check every necklace up to this length")
    verify.add_argument("--offset", dest="constant_offset", type=int, help="Add to C before checking (e.g. -1)")
    verify.add_argument("--radius", dest="oracle_radius", type=int, help="Oracle ball radius, 0 skips the oracle")
    verify.add_argument("--certificate", help="tau certificate to re-check")
    verify.set_defaults(handler=commands.cmd_verify)

    upg = subparsers.add_parser("upg", parents=[common], help="Validate and iterate graph-map fixtures")
    upg.add_argument("action", nargs="?", default="report", choices=["report", "validate", "iterate", "witness", "split"])
    upg.add_argument("--fixture", help="Fixture name or JSON path")
    upg.add_argument("--path", help="Comma-separated edge path, ~E is the reverse of E")
    upg.add_argument("--k", type=int, default=1, help="Iterations for 'iterate'")
    upg.add_argument("--k-max", dest="k_max", type=int, help="Iterations for closed-form tables")
    upg.set_defaults(handler=commands.cmd_upg)

    oracle = subparsers.add_parser("oracle", parents=[common], help="Cayley ball ground truth")
    oracle.add_argument("action", choices=["build", "norm"])
    _input_options(oracle)
    oracle.add_argument("--radius", dest="oracle_radius", type=int, help="Ball radius")
    oracle.add_argument("--node-budget", dest="node_budget", type=int, help="Maximum number of classes")
    oracle.add_argument("--ball", help="Ball snapshot to load instead of building")
    oracle.set_defaults(handler=commands.cmd_oracle)

    return parser
