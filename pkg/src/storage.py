"""Model and rotation files.

CEMB layout (little-endian):

    prefix  <4sH        magic, version
    v1      <iIQ        period, d, |V|                                  trained models
    v2      <HiiIQ      flags (bit 0 = aligned), period, frame_period, d, |V|   aligned models
    token   u8 kind (0 word, 1 citation), u32 length + UTF-8 surface, u64 count, d x f32 vector

Vectors live as float64 in memory and are stored as float32.
"""

import logging
import struct
from pathlib import Path
from typing import List, Tuple

import numpy as np

from errors import ModelFormatError
from models import EmbeddingModel, Rotation, TokenKind, VocabEntry, Vocabulary

logger = logging.getLogger(__name__)

MAGIC = b"CEMB"
VERSION_TRAINED = 1
VERSION_ALIGNED = 2
FLAG_ALIGNED = 0x1

_PREFIX = struct.Struct("<4sH")
_TRAINED = struct.Struct("<iIQ")
_ALIGNED = struct.Struct("<HiiIQ")
_KIND = struct.Struct("<B")
_LENGTH = struct.Struct("<I")
_COUNT = struct.Struct("<Q")

_KIND_CODES = {TokenKind.WORD: 0, TokenKind.CITATION: 1}
_CODE_KINDS = {code: kind for kind, code in _KIND_CODES.items()}


def _header(model: EmbeddingModel) -> bytes:
    d, n = model.dim, len(model.vocab)
    if not model.aligned:
        return _PREFIX.pack(MAGIC, VERSION_TRAINED) + _TRAINED.pack(model.period, d, n)
    frame = model.frame_period if model.frame_period is not None else model.period
    return _PREFIX.pack(MAGIC, VERSION_ALIGNED) + _ALIGNED.pack(FLAG_ALIGNED, model.period, frame, d, n)


def save_model(model: EmbeddingModel, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    vectors = model.input_vectors.astype("<f4")

    with open(path, "wb") as f:
        f.write(_header(model))
        for entry, row in zip(model.vocab.entries, vectors):
            surface = entry.surface.encode("utf-8")
            f.write(_KIND.pack(_KIND_CODES[entry.kind]))
            f.write(_LENGTH.pack(len(surface)))
            f.write(surface)
            f.write(_COUNT.pack(entry.count))
            f.write(row.tobytes())
    logger.debug(f"Wrote {path}: period {model.period}, |V|={len(model.vocab)}, d={model.dim}")


class _Reader:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise ModelFormatError(f"{self.path}: truncated at byte {self.offset}")
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: struct.Struct):
        return fmt.unpack(self.take(fmt.size))


def load_model(path: Path) -> EmbeddingModel:
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    magic, version = reader.unpack(_PREFIX)
    if magic != MAGIC:
        raise ModelFormatError(f"{path}: bad magic {magic!r}")
    if version == VERSION_TRAINED:
        flags = 0
        period, d, n = reader.unpack(_TRAINED)
        frame = period
    elif version == VERSION_ALIGNED:
        flags, period, frame, d, n = reader.unpack(_ALIGNED)
    else:
        raise ModelFormatError(f"{path}: unsupported version {version}")

    entries: List[VocabEntry] = []
    rows = np.empty((n, d), dtype=np.float64)
    for i in range(n):
        (code,) = reader.unpack(_KIND)
        if code not in _CODE_KINDS:
            raise ModelFormatError(f"{path}: unknown token kind {code}")
        (length,) = reader.unpack(_LENGTH)
        surface = reader.take(length).decode("utf-8")
        (count,) = reader.unpack(_COUNT)
        rows[i] = np.frombuffer(reader.take(4 * d), dtype="<f4")
        entries.append(VocabEntry(surface=surface, kind=_CODE_KINDS[code], count=count))
    if reader.offset != len(reader.data):
        raise ModelFormatError(f"{path}: {len(reader.data) - reader.offset} trailing bytes")

    aligned = bool(flags & FLAG_ALIGNED)
    return EmbeddingModel(
        period=period,
        vocab=Vocabulary(entries=entries, total_tokens=sum(e.count for e in entries)),
        input_vectors=rows,
        aligned=aligned,
        frame_period=frame if aligned else None,
    )


def export_text(model: EmbeddingModel, path: Path) -> None:
    """word2vec text format"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{len(model.vocab)} {model.dim}\n")
        for entry, row in zip(model.vocab.entries, model.input_vectors):
            f.write(entry.surface + " " + " ".join(f"{x:.9g}" for x in row) + "\n")


def import_text(path: Path) -> Tuple[List[str], np.ndarray]:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            raise ModelFormatError(f"{path}: expected '|V| d' header")
        n, d = int(header[0]), int(header[1])
        surfaces = []
        matrix = np.empty((n, d), dtype=np.float64)
        for i in range(n):
            fields = f.readline().split()
            if len(fields) != d + 1:
                raise ModelFormatError(f"{path}: line {i + 2} has {len(fields)} fields, expected {d + 1}")
            surfaces.append(fields[0])
            matrix[i] = [float(x) for x in fields[1:]]
    return surfaces, matrix


def save_rotation(rotation: Rotation, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = rotation.matrix
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{matrix.shape[0]}\n")
        for row in matrix:
            f.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_rotation(path: Path) -> Rotation:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    try:
        d = int(lines[0])
        matrix = np.array([[float(x) for x in lines[1 + i].split()] for i in range(d)])
    except (ValueError, IndexError) as e:
        raise ModelFormatError(f"{path}: malformed rotation file") from e
    if matrix.shape != (d, d):
        raise ModelFormatError(f"{path}: expected a {d}x{d} matrix")
    return Rotation(matrix=matrix)
