"""Reproducible CSV/JSON emission with an embedded metadata block.

Every file produced by the CLI starts with the package version, a hash of
the fully resolved configuration, and the seed, so a run can be replayed
from its own output.  Floats are written with shortest round-trip precision
and no timestamps appear anywhere, which keeps identical invocations byte
identical.
"""

from __future__ import annotations

import contextlib
import csv
import hashlib
import io
import json
import math
import sys

import numpy as np

PACKAGE_VERSION = "0.1.0"


def fmt(value) -> str:
    """Round-trip text form of a scalar."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def jsonable(value):
    """Recursively convert to JSON-encodable values.

    Non-finite floats are not valid strict JSON; infinities become the
    strings "inf"/"-inf" and NaN becomes null.
    """
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if value is None or isinstance(value, str):
        return value
    return str(value)


def config_hash(config: dict) -> str:
    blob = json.dumps(jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def metadata(config: dict, seed: int | None = None) -> dict:
    meta = {
        "version": PACKAGE_VERSION,
        "config_hash": config_hash(config),
        "config": jsonable(config),
    }
    if seed is not None:
        meta["seed"] = int(seed)
    return meta


def comment_block(meta: dict) -> str:
    """Metadata as '# key=value' comment lines preceding a CSV header."""
    lines = []
    flat = dict(meta)
    config = flat.pop("config", None)
    for key in sorted(flat):
        lines.append(f"# {key}={fmt(flat[key])}")
    if config is not None:
        blob = json.dumps(jsonable(config), sort_keys=True, separators=(",", ":"))
        lines.append(f"# config={blob}")
    return "\n".join(lines) + "\n"


def write_csv(stream: io.TextIOBase, header: list[str], rows, meta: dict | None = None):
    if meta:
        stream.write(comment_block(meta))
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def write_json(stream: io.TextIOBase, payload: dict):
    json.dump(jsonable(payload), stream, indent=2, sort_keys=True)
    stream.write("\n")


@contextlib.contextmanager
def open_out(path: str | None):
    """Writable text stream at ``path``, or stdout when the path is None."""
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            yield handle
