"""JSON and CSV codecs shared by the CLI and the services."""
import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

from pydantic import BaseModel

from ..core.config import settings
from ..core.error_handling import ParseError
from .automorphism import Automorphism

logger = logging.getLogger(__name__)


def round_floats(value: Any, digits: Optional[int] = None) -> Any:
    """Round every float to ``digits`` significant digits, recursively."""
    digits = digits or settings.FLOAT_DIGITS
    if isinstance(value, float):
        return float(f"{value:.{digits}g}")
    if isinstance(value, dict):
        return {key: round_floats(item, digits) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(item, digits) for item in value]
    return value


def to_jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, dict):
        return {key: to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    return value


def dumps_report(value: Any) -> str:
    """Deterministic JSON text: sorted keys, rounded floats."""
    return json.dumps(round_floats(to_jsonable(value)), sort_keys=True, indent=2) + "\n"


def write_report(value: Any, directory: Union[str, Path], name: str) -> Path:
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    target = path / name
    target.write_text(dumps_report(value))
    logger.info(f"Wrote {target}")
    return target


def write_csv(rows: Iterable[Sequence[Any]], headers: Sequence[str], path: Union[str, Path]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(headers)
        for row in rows:
            writer.writerow(["" if cell is None else round_floats(cell) for cell in row])
    return target


def load_json_file(path: Union[str, Path]) -> Any:
    """Parse a JSON file, reporting syntax errors with line and column."""
    source = Path(path)
    try:
        text = source.read_text()
    except OSError as exc:
        raise ParseError(f"Cannot read {source}: {exc.strerror}", source=str(source))
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"Invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno, source=str(source))


def automorphisms_from_payload(payload: Any) -> List[Automorphism]:
    """Accept one automorphism object, a list of them, or {"automorphisms": [...]}."""
    if isinstance(payload, dict) and "automorphisms" in payload:
        payload = payload["automorphisms"]
    if isinstance(payload, dict):
        payload = [payload]
    if not isinstance(payload, list):
        raise ParseError("Expected an automorphism object or a list of them")
    return [Automorphism.from_json(item) for item in payload]


def load_automorphisms(path: Union[str, Path]) -> List[Automorphism]:
    return automorphisms_from_payload(load_json_file(path))


def parse_inline_automorphism(text: str, rank: Optional[int] = None) -> Automorphism:
    """``"ab,b"`` is the automorphism a ↦ ab, b ↦ b."""
    images = [image.strip() for image in text.split(",")]
    try:
        return Automorphism.parse(images, rank or len(images))
    except ValueError as exc:
        raise ParseError(f"Invalid automorphism {text!r}: {exc}")


def load_certificate(path: Union[str, Path]) -> Dict[str, Any]:
    payload = load_json_file(path)
    if not isinstance(payload, dict) or "estimate" not in payload or "input" not in payload:
        raise ParseError("Certificate needs 'input' and 'estimate' fields", source=str(path))
    return payload
