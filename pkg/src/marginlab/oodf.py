"""Labeled embedding sets and the OODF interchange format.

Binary layout (all little-endian):

    offset 0   magic   b"OODF"
    offset 4   version u8, currently 1
    offset 5   N       u32
    offset 9   D       u32
    offset 13  f32[N*D]  features, row-major
    ...        i32[N]    labels
    ...        u8[N]     OOD flags: 0 = in-distribution, 1 = OOD,
                         0xFF = not applicable

CSV files with a ``label,flag,f0,...,f{D-1}`` header are accepted on input
(flag 255 means "not applicable"). Writers always emit the binary form.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .numeric import require_finite

MAGIC = b"OODF"
VERSION = 1
FLAG_NA = 0xFF


@dataclass
class EmbeddingSet:
    """N feature vectors with integer class labels and optional OOD flags."""

    features: np.ndarray          # (N, D) float64
    labels: np.ndarray            # (N,) int
    ood_flags: np.ndarray | None = None   # (N,) bool, or None when n/a

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels length must match feature rows")
        require_finite(self.features, "features")
        if self.ood_flags is not None:
            self.ood_flags = np.asarray(self.ood_flags, dtype=bool)
            if self.ood_flags.shape != (self.features.shape[0],):
                raise ValueError("ood flag length must match feature rows")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_ids(self) -> np.ndarray:
        return np.unique(self.labels)

    def rows_of_class(self, label: int) -> np.ndarray:
        return np.nonzero(self.labels == label)[0]


def write_oodf(dataset: EmbeddingSet, path) -> None:
    n, d = dataset.features.shape
    flags = np.full(n, FLAG_NA, dtype=np.uint8)
    if dataset.ood_flags is not None:
        flags = dataset.ood_flags.astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<BII", VERSION, n, d))
        fh.write(dataset.features.astype("<f4").tobytes(order="C"))
        fh.write(dataset.labels.astype("<i4").tobytes())
        fh.write(flags.tobytes())


def read_embedding_set(path) -> EmbeddingSet:
    """Read either a binary OODF file or its CSV alternative."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] == MAGIC:
        return _parse_binary(raw, str(path))
    return _parse_csv(raw, str(path))


def _parse_binary(raw: bytes, name: str) -> EmbeddingSet:
    def take(offset: int, count: int, what: str) -> bytes:
        if offset + count > len(raw):
            raise FormatError(
                f"{name}: truncated at byte {len(raw)}, "
                f"need {offset + count} for {what}"
            )
        return raw[offset : offset + count]

    version, n, d = struct.unpack("<BII", take(4, 9, "header"))
    if version != VERSION:
        raise FormatError(f"{name}: unsupported OODF version {version}")
    off = 13
    feat = np.frombuffer(take(off, 4 * n * d, "features"), dtype="<f4")
    off += 4 * n * d
    labels = np.frombuffer(take(off, 4 * n, "labels"), dtype="<i4")
    off += 4 * n
    flags = np.frombuffer(take(off, n, "flags"), dtype=np.uint8)
    off += n
    if off != len(raw):
        raise FormatError(f"{name}: {len(raw) - off} trailing bytes at offset {off}")
    return EmbeddingSet(
        features=feat.astype(np.float64).reshape(n, d),
        labels=labels.astype(np.int64),
        ood_flags=_flags_to_bools(flags, name),
    )


def _parse_csv(raw: bytes, name: str) -> EmbeddingSet:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{name}: neither OODF magic nor UTF-8 CSV "
                          f"(byte {exc.start})") from None
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or header[:2] != ["label", "flag"]:
        raise FormatError(f"{name}: CSV header must start with 'label,flag'")
    d = len(header) - 2
    labels, flags, rows = [], [], []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != d + 2:
            raise FormatError(f"{name}: line {lineno}: expected {d + 2} fields, "
                              f"got {len(row)}")
        try:
            labels.append(int(row[0]))
            flags.append(int(row[1]))
            rows.append([float(v) for v in row[2:]])
        except ValueError as exc:
            raise FormatError(f"{name}: line {lineno}: {exc}") from None
    feats = np.asarray(rows, dtype=np.float64).reshape(len(rows), d)
    return EmbeddingSet(
        features=feats,
        labels=np.asarray(labels, dtype=np.int64),
        ood_flags=_flags_to_bools(np.asarray(flags, dtype=np.uint16), name),
    )


def _flags_to_bools(flags: np.ndarray, name: str) -> np.ndarray | None:
    if flags.size == 0 or np.all(flags == FLAG_NA):
        return None
    if np.any(flags == FLAG_NA):
        raise FormatError(f"{name}: OOD flags mix 0/1 with not-applicable")
    bad = ~np.isin(flags, (0, 1))
    if np.any(bad):
        raise FormatError(f"{name}: OOD flag {int(flags[bad][0])} is not 0, 1 "
                          f"or {FLAG_NA}")
    return flags.astype(bool)
