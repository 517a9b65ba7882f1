"""Canonical JSON reports.

Reports never embed timestamps or environment details, so identical inputs
and seeds produce byte-identical files.
"""

import json
from pathlib import Path

SCHEMA_VERSION = 1


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)


def write_report(path, command, payload):
    doc = {"schema_version": SCHEMA_VERSION, "command": command}
    doc.update(payload)
    text = canonical_json(doc) + "\n"
    Path(path).write_text(text)
    return path


def read_report(path):
    return json.loads(Path(path).read_text())
