"""CSV emission and JSON config round-tripping."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from typing import Any, Iterable, Sequence, TextIO

from .covariance import CovarianceSpec, SignalSpec
from .errors import InvalidSpec
from .experiments import ExperimentConfig, SweepRow

SWEEP_COLUMNS = tuple(f.name for f in dataclasses.fields(SweepRow))

_NESTED = {"covariance": CovarianceSpec, "signal": SignalSpec}
_TUPLE_FIELDS = {"seeds", "p_grid", "spike_vector", "values"}


def format_value(value: Any) -> str:
    """17 significant digits for floats; empty for None."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def emit_csv(
    rows: Sequence[Any], dest: TextIO, columns: Sequence[str] | None = None
) -> None:
    """Header plus one line per dataclass row, '\\n' terminated."""
    if not rows:
        raise ValueError("nothing to emit")
    columns = tuple(columns or (f.name for f in dataclasses.fields(rows[0])))
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(getattr(row, c)) for c in columns])


def csv_text(rows: Sequence[Any], columns: Sequence[str] | None = None) -> str:
    buf = io.StringIO()
    emit_csv(rows, buf, columns)
    return buf.getvalue()


def _parse_field(kind: Any, text: str) -> Any:
    if text == "":
        return None
    kind = str(kind)
    if kind.startswith("int"):
        return int(text)
    if kind.startswith("float"):
        return float(text)
    return text


def parse_sweep_csv(text: str) -> list[SweepRow]:
    """Inverse of :func:`emit_csv` for sweep rows."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != SWEEP_COLUMNS:
        raise InvalidSpec(f"unexpected header {header}")
    types = {f.name: f.type for f in dataclasses.fields(SweepRow)}
    return [
        SweepRow(**{name: _parse_field(types[name], cell) for name, cell in zip(header, line)})
        for line in reader
    ]


def rows_to_json(rows: Iterable[Any]) -> str:
    def clean(v: Any) -> Any:
        return None if isinstance(v, float) and not math.isfinite(v) else v

    return json.dumps(
        [{k: clean(v) for k, v in dataclasses.asdict(r).items()} for r in rows], indent=1
    ) + "\n"


def config_to_dict(config: ExperimentConfig) -> dict[str, Any]:
    def plain(v: Any) -> Any:
        if isinstance(v, (tuple, list)):
            return [plain(x) for x in v]
        if isinstance(v, dict):
            return {k: plain(x) for k, x in v.items()}
        return v

    return plain(dataclasses.asdict(config))


def _build(cls: type, data: dict[str, Any], where: str) -> Any:
    if not isinstance(data, dict):
        raise InvalidSpec(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise InvalidSpec(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for key, value in data.items():
        if key in _NESTED:
            value = _build(_NESTED[key], value, f"{where}.{key}")
        elif key == "r2mae":
            value = tuple(tuple(float(x) for x in pair) for pair in value)
        elif key in _TUPLE_FIELDS and value is not None:
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise InvalidSpec(f"{where}: {exc}") from exc


def config_from_dict(data: dict[str, Any]) -> ExperimentConfig:
    """Build a config, rejecting unknown keys at every level."""
    return _build(ExperimentConfig, data, "config")


def load_configs(text: str) -> list[ExperimentConfig]:
    """A JSON object or a list of objects."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"invalid JSON: {exc}") from exc
    items = data if isinstance(data, list) else [data]
    if not items:
        raise InvalidSpec("empty config list")
    return [config_from_dict(item) for item in items]


def dump_configs(configs: Sequence[ExperimentConfig]) -> str:
    return json.dumps([config_to_dict(c) for c in configs], indent=1) + "\n"
