"""CSV output with a reproducibility header."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence


def config_hash(config: Mapping) -> str:
    """SHA-256 of the canonical JSON form of a configuration mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence],
              metadata: Mapping[str, object] | None = None) -> Path:
    """Write ``rows`` under ``header``; ``metadata`` becomes leading ``# key: value`` lines.

    Floats are written with ``repr`` so the files round-trip exactly and are
    byte-identical across reruns.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for k, v in (metadata or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())
    return path


def write_dict_rows(path: str | Path, rows: Sequence[Mapping], metadata=None,
                    header: Sequence[str] | None = None) -> Path:
    header = list(header or (rows[0].keys() if rows else []))
    return write_csv(path, header, ([r.get(k, "") for k in header] for r in rows), metadata)


def read_csv(path: str | Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Inverse of ``write_csv``: returns ``(metadata, rows)``."""
    meta, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# "):
            k, _, v = line[2:].partition(": ")
            meta[k] = v
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))
