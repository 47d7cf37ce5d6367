"""Machine-readable command output."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any

SCHEMA_VERSION = "1.0"

_SCALAR = {"type": ["number", "integer", "string", "boolean", "null"]}

OUTPUT_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "rerand-power output record",
    "type": "object",
    "required": ["schema_version", "command", "inputs", "result", "mc", "warnings"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"type": "string"},
        "inputs": {
            "type": "object",
            "additionalProperties": {"anyOf": [_SCALAR, {"type": "array", "items": _SCALAR}]},
        },
        "result": {"type": "object"},
        "mc": {
            "anyOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["method", "draws", "seed"],
                    "additionalProperties": False,
                    "properties": {
                        "method": {"enum": ["monte_carlo", "integration"]},
                        "draws": {"type": "integer", "minimum": 1},
                        "seed": {"type": "integer"},
                    },
                },
            ]
        },
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
}


def _jsonable(value: Any) -> Any:
    # JSON has no infinity; thresholds of complete randomization are encoded as strings
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _restore(value: Any) -> Any:
    if value in ("inf", "-inf", "nan"):
        return float(value)
    if isinstance(value, dict):
        return {k: _restore(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_restore(v) for v in value]
    return value


@dataclass
class OutputRecord:
    command: str
    inputs: dict[str, Any]
    result: dict[str, Any]
    mc: dict[str, Any] | None = None
    warnings: list[str] = field(default_factory=list)
    schema_version: str = SCHEMA_VERSION

    def to_dict(self) -> dict[str, Any]:
        return _jsonable(asdict(self))

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> OutputRecord:
        data = _restore(json.loads(text))
        return cls(**data)
