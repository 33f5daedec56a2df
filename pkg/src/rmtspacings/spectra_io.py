"""JSON-Lines interchange of spectra.

One record per line::

    {"matrix_id": "goe-0000", "dim": 3, "eigenvalues": [-1.5, 0.25, 2.0], "meta": {}}

Floats are written with ``repr`` precision, so a write/read round trip is
bit-exact. Keys are sorted and separators fixed, so identical inputs give
byte-identical files.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from rmtspacings.errors import ParseError, SchemaError
from rmtspacings.spectrum import Spectrum


@dataclass(frozen=True)
class SpectrumRecord:
    matrix_id: str
    spectrum: Spectrum
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        vals = self.spectrum.values
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"{self.matrix_id}: non-finite eigenvalue")
        rec = {
            "matrix_id": self.matrix_id,
            "dim": self.spectrum.dim,
            "eigenvalues": [float(v) for v in vals],
            "meta": self.meta,
        }
        return json.dumps(rec, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_spectra(path, records) -> int:
    records = sorted(records, key=lambda r: r.matrix_id)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(rec.to_json())
            fh.write("\n")
    return len(records)


def parse_record(line: str, lineno: int = 0) -> SpectrumRecord:
    try:
        d = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})", row=lineno) from None
    for key in ("matrix_id", "dim", "eigenvalues"):
        if key not in d:
            raise SchemaError(f"line {lineno}: missing field {key!r}")
    vals = np.asarray(d["eigenvalues"], dtype=np.float64)
    if vals.ndim != 1 or vals.size != d["dim"]:
        raise SchemaError(f"line {lineno}: {vals.size} eigenvalues but dim={d['dim']}")
    if not all(math.isfinite(v) for v in vals):
        raise SchemaError(f"line {lineno}: non-finite eigenvalue")
    if vals.size > 1 and np.any(np.diff(vals) < 0):
        raise SchemaError(f"line {lineno}: eigenvalues are not ascending")
    return SpectrumRecord(str(d["matrix_id"]), Spectrum(vals), d.get("meta") or {})


def read_spectra(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            if line.strip():
                out.append(parse_record(line, lineno))
    return out
