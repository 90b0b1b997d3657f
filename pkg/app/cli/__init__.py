import logging
from typing import Optional, Sequence

from ..core.config import settings
from ..core.error_handling import register_exception_handlers
from .parser import build_parser

logger = logging.getLogger(__name__)


@register_exception_handlers
def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments and dispatch to a subcommand; returns the exit code."""
    args = build_parser().parse_args(argv)
    if args.log_level:
        logging.getLogger("app").setLevel(args.log_level.upper())
    logger.debug(f"{settings.APP_NAME} {settings.APP_VERSION} ({settings.APP_ENV}): {args.command}")
    return args.handler(args)
