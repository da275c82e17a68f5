"""File formats: states as JSON documents, shot records as TSV tables.

States round-trip exactly: matrix entries are written as shortest exact
decimal representations (never more than 17 significant digits), so the
parsed doubles are bit-identical to the saved ones.  Record files are
one line per observed outcome with a header carrying the scheme hash,
shot count and seed, so a certification run can refuse data produced
for a different scheme.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg import DensityOperator, as_state
from .observables import SettingsCover, setting_from_names
from .shots import ShotRecord

STATE_FORMAT = "boundkey-state"
STATE_VERSION = 1
RECORDS_FORMAT = "boundkey-records"
RECORDS_VERSION = 1


def state_document(rho: DensityOperator) -> dict:
    """The JSON-ready document for a state."""
    flat = rho.mat.reshape(-1)
    return {
        "format": STATE_FORMAT,
        "version": STATE_VERSION,
        "dims": list(rho.dims),
        "labels": list(rho.labels),
        "matrix": [[float(z.real), float(z.imag)] for z in flat],
    }


def state_from_document(doc: dict) -> DensityOperator:
    """Parse and validate a state document."""
    if not isinstance(doc, dict):
        raise ValueError("state document must be a JSON object")
    if doc.get("format") != STATE_FORMAT:
        raise ValueError(f"not a state document (format={doc.get('format')!r})")
    if doc.get("version") != STATE_VERSION:
        raise ValueError(f"unsupported state document version {doc.get('version')!r}")
    dims = tuple(int(d) for d in doc["dims"])
    total = int(np.prod(dims))
    entries = doc["matrix"]
    if len(entries) != total * total:
        raise ValueError(
            f"matrix has {len(entries)} entries, dims {dims} require {total * total}"
        )
    flat = np.array([complex(re, im) for re, im in entries])
    labels = doc.get("labels")
    return as_state(flat.reshape(total, total), dims, labels and tuple(labels))


def save_state(rho: DensityOperator, path) -> None:
    Path(path).write_text(json.dumps(state_document(rho)) + "\n")


def load_state(path) -> DensityOperator:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return state_from_document(doc)


def scheme_hash(scheme: SettingsCover) -> str:
    """Stable digest of a scheme: setting names plus reconstruction
    weights rounded to 12 decimals."""
    h = hashlib.sha256()
    for s in scheme.settings:
        h.update(s.name().encode())
        h.update(b"\0")
    for coeff in scheme.coefficients:
        h.update(np.round(np.asarray(coeff, dtype=float), 12).tobytes())
    return h.hexdigest()


def _format_outcome(outcome: tuple[int, int, int, int]) -> str:
    return "".join(f"{s:+d}" for s in outcome)


def _parse_outcome(text: str) -> tuple[int, int, int, int]:
    if len(text) != 8:
        raise ValueError(f"outcome field {text!r} is not four signed digits")
    signs = []
    for i in range(0, 8, 2):
        token = text[i : i + 2]
        if token not in ("+1", "-1"):
            raise ValueError(f"outcome field {text!r} contains {token!r}")
        signs.append(1 if token == "+1" else -1)
    return tuple(signs)


def save_records(
    records: Sequence[ShotRecord], path, seed: int, scheme_digest: str
) -> None:
    """Write shot records as TSV: one line per observed outcome."""
    shots = {rec.shots for rec in records}
    if len(shots) > 1:
        raise ValueError(f"records carry mixed shot counts {sorted(shots)}")
    lines = [
        f"# {RECORDS_FORMAT} {RECORDS_VERSION}",
        f"# scheme={scheme_digest} shots={records[0].shots if records else 0} seed={seed}",
    ]
    for rec in records:
        name = rec.setting.name()
        for outcome, count in sorted(rec.counts.items()):
            count = int(count) if float(count).is_integer() else count
            lines.append(f"{name}\t{_format_outcome(outcome)}\t{count}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_records(path) -> tuple[list[ShotRecord], dict]:
    """Read a records file back into ShotRecords plus its header metadata."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith(f"# {RECORDS_FORMAT} "):
        raise ValueError(f"{path}: not a records file")
    version = lines[0].split()[-1]
    if version != str(RECORDS_VERSION):
        raise ValueError(f"{path}: unsupported records version {version!r}")
    if len(lines) < 2 or not lines[1].startswith("# "):
        raise ValueError(f"{path}: missing metadata header")
    meta = {}
    for token in lines[1][2:].split():
        key, _, value = token.partition("=")
        if not _:
            raise ValueError(f"{path}: malformed metadata token {token!r}")
        meta[key] = value

    tables: dict[str, dict] = {}
    for ln, line in enumerate(lines[2:], start=3):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ValueError(f"{path}:{ln}: expected 3 tab-separated fields")
        name, outcome_text, count_text = fields
        outcome = _parse_outcome(outcome_text)
        count = float(count_text)
        if count < 0:
            raise ValueError(f"{path}:{ln}: negative count")
        table = tables.setdefault(name, {})
        if outcome in table:
            raise ValueError(f"{path}:{ln}: duplicate outcome for setting {name!r}")
        table[outcome] = int(count) if count.is_integer() else count

    records = []
    for name, table in tables.items():
        setting = setting_from_names(name)
        records.append(ShotRecord(setting, table, float(sum(table.values()))))
    return records, meta
