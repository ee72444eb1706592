"""Malformed-file corpus shared by the io tests and the acceptance suite."""
import json
from pathlib import Path

from celltrack import io

MALFORMED = Path(__file__).parent / "data" / "malformed"

READERS = {
    "labelmap": io.read_labelmap,
    "tracktable": io.read_tracktable,
    "model": io.read_model,
    "sequence": io.read_sequence,
}


def manifest():
    return json.loads((MALFORMED / "manifest.json").read_text())


def rejection(name, entry):
    """Return the exception raised when reading ``name`` (or None if accepted)."""
    try:
        READERS[entry["reader"]](MALFORMED / name)
    except Exception as exc:  # noqa: BLE001 - the caller checks the class
        return exc
    return None
