"""File formats.

Record files (``.ctr``) are a 24-byte little-endian header followed by
float32 I/Q pairs, shot-major then channel then sample::

    magic      4s   b"CTRC"
    version    u16  1
    channels   u16
    rate       f64  samples per second
    length     u32  samples per shot
    shots      u32

Operators and kernels are JSON with complex numbers as ``[re, im]`` pairs;
Pauli transfer matrices and Pauli decompositions are CSV.
"""

import csv
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"CTRC"
VERSION = 1
HEADER = struct.Struct("<4sHHdII")


class RecordFormatError(ValueError):
    pass


@dataclass
class RecordSet:
    samples: np.ndarray     # (shots, channels, length) complex64
    sample_rate: float

    @property
    def shots(self):
        return self.samples.shape[0]

    @property
    def channels(self):
        return self.samples.shape[1]

    @property
    def length(self):
        return self.samples.shape[2]

    def channel(self, c):
        return self.samples[:, c, :]


def persist_records(records, path, sample_rate=None):
    """Write a ``RecordSet`` (or a (shots, channels, length) array)."""
    if isinstance(records, RecordSet):
        sample_rate = records.sample_rate if sample_rate is None else sample_rate
        records = records.samples
    if sample_rate is None:
        raise ValueError("sample_rate is required")
    data = np.asarray(records)
    if data.ndim == 2:
        data = data[:, None, :]
    if data.ndim != 3:
        raise ValueError("records must be (shots, channels, length)")
    data = np.ascontiguousarray(data, dtype=np.complex64)
    shots, chans, length = data.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, chans, float(sample_rate), length, shots))
        fh.write(data.view(np.float32).astype("<f4", copy=False).tobytes())


def load_records(path):
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise RecordFormatError("file shorter than the record header")
    magic, version, chans, rate, length, shots = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise RecordFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise RecordFormatError(f"unsupported record format version {version}")
    expected = HEADER.size + shots * chans * length * 8
    if len(raw) != expected:
        raise RecordFormatError(f"file has {len(raw)} bytes, header implies {expected} (truncated?)")
    flat = np.frombuffer(raw, dtype="<f4", offset=HEADER.size).astype(np.float32)
    samples = flat.view(np.complex64).reshape(shots, chans, length)
    return RecordSet(samples, rate)


def export_records_csv(records, path):
    """Long-format CSV (shot, channel, sample, i, q); meant for small sets."""
    data = records.samples if isinstance(records, RecordSet) else np.asarray(records)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["shot", "channel", "sample", "i", "q"])
        for (s, c, j), z in np.ndenumerate(data):
            w.writerow([s, c, j, repr(float(z.real)), repr(float(z.imag))])


# -- JSON ------------------------------------------------------------------

def complex_to_json(a):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def complex_from_json(obj):
    a = np.asarray(obj, dtype=float)
    if a.shape[-1] != 2:
        raise ValueError("expected trailing [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def save_operator(op, path):
    Path(path).write_text(json.dumps({"dim": int(np.shape(op)[0]), "entries": complex_to_json(op)}))


def load_operator(path):
    d = json.loads(Path(path).read_text())
    op = complex_from_json(d["entries"])
    if op.shape != (d["dim"], d["dim"]):
        raise ValueError("operator entries do not match dim")
    return op


def save_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- CSV -------------------------------------------------------------------

def write_ptm_csv(ptm, labels, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([""] + list(labels))
        for lab, row in zip(labels, np.asarray(ptm)):
            w.writerow([lab] + [f"{v:.12g}" for v in row])


def read_ptm_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    labels = rows[0][1:]
    return np.array([[float(v) for v in r[1:]] for r in rows[1:]]), labels


def write_pauli_csv(labels, values, stderr, path, ideal=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pauli", "value", "stderr"] + (["ideal"] if ideal is not None else []))
        for i, lab in enumerate(labels):
            row = [lab, f"{values[i]:.12g}", f"{stderr[i]:.12g}"]
            if ideal is not None:
                row.append(f"{ideal[i]:.12g}")
            w.writerow(row)
