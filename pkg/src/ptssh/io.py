"""Artifact writers and readers.

CSV files start with the resolved run configuration as ``#``-prefixed INI
lines, followed by a header row and data.  Numbers are written with 17
significant digits so identical runs give identical bytes.  JSON artifacts
carry the same configuration under the ``"provenance"`` key.
"""
from __future__ import annotations

import configparser
import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np

__all__ = [
    "fmt",
    "format_header",
    "parse_header",
    "read_config",
    "write_csv",
    "read_csv",
    "write_json",
    "jsonable",
]


def fmt(value) -> str:
    """Format one CSV cell; floats use ``.17g``."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if v == 0.0:
            v = 0.0  # drop the sign of negative zero
        return format(v, ".17g")
    return str(value)


def _ini_value(value) -> str:
    if isinstance(value, (list, tuple)):
        return ", ".join(_ini_value(v) for v in value)
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return fmt(value)


def format_header(config: Mapping[str, Mapping]) -> str:
    """Render ``{section: {key: value}}`` as ``#``-prefixed INI lines."""
    lines = []
    for section, items in config.items():
        lines.append(f"# [{section}]")
        for key, value in items.items():
            if value is None:
                continue
            lines.append(f"# {key} = {_ini_value(value)}")
    return "\n".join(lines) + "\n"


def _parse_ini(text: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text)
    return {s: dict(cp[s]) for s in cp.sections()}


def parse_header(lines: Iterable[str]) -> dict:
    """Inverse of :func:`format_header`: read leading ``#`` lines as INI."""
    body = []
    for line in lines:
        if not line.startswith("#"):
            break
        body.append(line[1:].strip())
    return _parse_ini("\n".join(body))


def read_config(path) -> dict:
    """Load a run configuration from an INI file or from a previous artifact.

    CSV artifacts contribute their ``#`` header, JSON artifacts their
    ``"provenance"`` object.  Values are returned as strings.
    """
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("#"):
        return parse_header(stripped.splitlines())
    if stripped.startswith("{"):
        prov = json.loads(text).get("provenance", {})
        return {s: {k: _ini_value(v) for k, v in items.items()} for s, items in prov.items()}
    return _parse_ini(text)


def write_csv(target, config: Mapping, columns: list[str], rows: Iterable[Iterable]) -> None:
    """Write header comments, the column row and ``rows`` to ``target`` (path or stream)."""
    buf = io.StringIO()
    buf.write(format_header(config))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    _emit(target, buf.getvalue())


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    """Return ``(config, columns, rows)`` from a CSV artifact."""
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    config = parse_header(lines)
    data = [ln for ln in lines if not ln.startswith("#")]
    reader = csv.reader(data)
    columns = next(reader)
    return config, columns, [row for row in reader]


def jsonable(value):
    """Convert numpy scalars/arrays and non-finite floats for JSON (NaN -> null)."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def write_json(target, payload: Mapping, config: Optional[Mapping] = None) -> None:
    doc = dict(payload)
    if config is not None:
        doc["provenance"] = config
    _emit(target, json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n")


def _emit(target, text: str) -> None:
    if hasattr(target, "write"):
        target.write(text)
        return
    Path(target).write_text(text)

