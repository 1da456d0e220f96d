"""CSV and JSON serialization with a reproducibility header."""

import csv
import io
import json
import os
from dataclasses import dataclass

import numpy as np
import scipy

from . import __version__

HEADER_PREFIX = "# "


def format_number(value):
    """17 significant digits, locale independent; integers and strings pass through."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


@dataclass(frozen=True)
class Provenance:
    config_hash: str
    seed: object = None

    @property
    def versions(self):
        return {"micromaser": __version__, "numpy": np.__version__, "scipy": scipy.__version__}

    def as_dict(self):
        return {"config_sha256": self.config_hash, "versions": self.versions, "seed": self.seed}

    def lines(self):
        versions = ", ".join(f"{name}={version}" for name, version in self.versions.items())
        return [
            f"{HEADER_PREFIX}config_sha256: {self.config_hash}",
            f"{HEADER_PREFIX}versions: {versions}",
            f"{HEADER_PREFIX}seed: {self.seed}",
        ]


def to_plain(value):
    """Recursively convert numpy values and complex numbers ([re, im]) to JSON types."""
    if isinstance(value, dict):
        return {str(key): to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def dumps_json(payload, provenance):
    document = {"meta": provenance.as_dict(), "data": to_plain(payload)}
    return json.dumps(document, indent=2, sort_keys=True, allow_nan=True) + "\n"


def kraus_to_json(kraus):
    return {"labels": list(kraus.labels), "operators": [to_plain(op) for op in kraus.operators]}


def superop_to_json(superop):
    return {"shape": list(superop.shape), "entries": to_plain(superop)}


def dumps_csv(columns, rows, provenance, extra=None):
    """Header block, optional ``extra`` key-value comment lines, then the table."""
    buffer = io.StringIO()
    for line in provenance.lines():
        buffer.write(line + "\n")
    for key, value in (extra or {}).items():
        buffer.write(f"{HEADER_PREFIX}{key}: {format_number(value)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_number(row[column]) for column in columns])
    return buffer.getvalue()


def read_csv(path):
    """Rows of a CSV written by ``dumps_csv`` as dicts of strings; [] if the file is absent."""
    if not os.path.exists(path):
        return [], None
    with open(path, newline="", encoding="utf-8") as handle:
        lines = [line for line in handle if not line.startswith(HEADER_PREFIX)]
    if not lines:
        return [], None
    reader = csv.DictReader(lines)
    return list(reader), reader.fieldnames


def write_text(path, text):
    """Write atomically so an interrupted run never leaves a truncated file."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    temporary = f"{path}.partial"
    with open(temporary, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
    os.replace(temporary, path)
