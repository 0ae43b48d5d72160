"""Per-token vector providers and fixed-shape sentence tensors.

Two provider kinds feed the classifier: static lookup tables (one vector per
vocabulary token, text format) and contextual stores (per-sentence token
matrices, SEMB binary format). Both assemble 60-row sentence tensors with
zero padding above the real token count.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Protocol, TextIO

import numpy as np

from .corpus import LabeledSentence
from .errors import EmbeddingError, SembFormatError

__all__ = [
    "SENTENCE_ROWS",
    "SentenceTensor",
    "StaticEmbeddingTable",
    "ContextualStore",
    "load_static_vectors",
    "save_static_vectors",
    "embed_static",
    "embed_contextual",
    "read_semb",
    "write_semb",
    "StaticProvider",
    "ContextualProvider",
    "load_provider",
]

# Fixed row count of the convolution input space.
SENTENCE_ROWS = 60

SEMB_MAGIC = b"SEMB"
SEMB_VERSION = 1


@dataclass
class SentenceTensor:
    """A rows x dim matrix of token vectors, zero-padded above real_length."""

    values: np.ndarray
    real_length: int
    oov_count: int = 0

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("sentence tensor must be 2-D")
        if not 0 < self.real_length <= self.values.shape[0]:
            raise ValueError(
                f"real_length {self.real_length} outside (0, {self.values.shape[0]}]"
            )
        if not np.isfinite(self.values).all():
            raise ValueError("sentence tensor contains NaN/Inf")
        if self.real_length < self.values.shape[0] and np.any(
            self.values[self.real_length :]
        ):
            raise ValueError("padding rows beyond real_length must be zero")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass
class StaticEmbeddingTable:
    """Token -> fixed vector lookup, context independent."""

    dim: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)

    def __contains__(self, token: str) -> bool:
        return token in self.entries

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class ContextualStore:
    """Sentence-id -> (T x dim) float32 token matrices plus provenance meta."""

    dim: int
    meta: str = ""
    records: dict[str, np.ndarray] = field(default_factory=dict)

    def validate(self) -> None:
        for sid, mat in self.records.items():
            if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] != self.dim:
                raise EmbeddingError(
                    f"record {sid!r}: shape {mat.shape} incompatible with dim {self.dim}"
                )
            if not np.isfinite(mat).all():
                raise EmbeddingError(f"record {sid!r} contains NaN/Inf")


def _is_count_dim_header(fields: list[str]) -> bool:
    if len(fields) != 2:
        return False
    try:
        int(fields[0]), int(fields[1])
    except ValueError:
        return False
    return True


def load_static_vectors(stream: TextIO | str | Path) -> StaticEmbeddingTable:
    """Parse a `token v1 ... vd` text file, inferring dim from the first entry.

    A first line of exactly two integers is treated as a count/dim header and
    skipped. Any dimension mismatch or unparsable float is fatal and names
    the offending line.
    """
    if isinstance(stream, (str, Path)):
        with open(stream, "r", encoding="utf-8") as fh:
            return load_static_vectors(fh)

    entries: dict[str, np.ndarray] = {}
    dim: int | None = None
    for line_num, line in enumerate(stream, start=1):
        fields = line.rstrip("\n").split(" ")
        fields = [f for f in fields if f != ""]
        if not fields:
            continue
        if line_num == 1 and _is_count_dim_header(fields):
            continue
        token, raw = fields[0], fields[1:]
        if dim is None:
            if not raw:
                raise EmbeddingError(f"line {line_num}: no vector components")
            dim = len(raw)
        if len(raw) != dim:
            raise EmbeddingError(
                f"line {line_num}: expected {dim} components, got {len(raw)}"
            )
        try:
            vec = np.array([float(x) for x in raw], dtype=np.float64)
        except ValueError:
            raise EmbeddingError(f"line {line_num}: unparsable float") from None
        if not np.isfinite(vec).all():
            raise EmbeddingError(f"line {line_num}: NaN/Inf component")
        entries[token] = vec
    if dim is None:
        raise EmbeddingError("no embedding entries in stream")
    return StaticEmbeddingTable(dim=dim, entries=entries)


def save_static_vectors(table: StaticEmbeddingTable, path: str | Path) -> None:
    """Write a table back to the single-space text format (repr precision)."""
    with open(path, "w", encoding="utf-8") as fh:
        for token, vec in table.entries.items():
            fh.write(token + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def embed_static(
    tokens: Iterable[str], table: StaticEmbeddingTable, rows: int = SENTENCE_ROWS
) -> SentenceTensor:
    """Stack per-token vectors into a fixed-shape tensor.

    Out-of-vocabulary tokens map to the zero vector and are counted; tokens
    beyond the row budget are dropped.
    """
    tokens = list(tokens)
    if not tokens:
        raise EmbeddingError("cannot embed an empty token list")
    values = np.zeros((rows, table.dim), dtype=np.float64)
    length = min(len(tokens), rows)
    oov = 0
    for i in range(length):
        vec = table.entries.get(tokens[i])
        if vec is None:
            oov += 1
        else:
            values[i] = vec
    return SentenceTensor(values=values, real_length=length, oov_count=oov)


def embed_contextual(
    sentence_id: str, store: ContextualStore, rows: int = SENTENCE_ROWS
) -> SentenceTensor:
    """Copy a stored token matrix into a fixed-shape tensor."""
    mat = store.records.get(sentence_id)
    if mat is None:
        raise EmbeddingError(f"unknown sentence id {sentence_id}")
    length = min(mat.shape[0], rows)
    values = np.zeros((rows, store.dim), dtype=np.float64)
    values[:length] = mat[:length]
    return SentenceTensor(values=values, real_length=length)


# --- SEMB binary interchange -------------------------------------------------
#
# Little-endian layout:
#   magic "SEMB" | u32 version | u32 dim | u32 meta_len | meta utf-8 bytes
#   | u64 record_count | records
# record: u32 id_len | id utf-8 | u32 T | T*dim float32 row-major


class _Reader:
    def __init__(self, fh: BinaryIO):
        self.fh = fh
        self.offset = 0

    def read(self, n: int, what: str) -> bytes:
        buf = self.fh.read(n)
        if len(buf) != n:
            raise SembFormatError(self.offset, f"truncated while reading {what}")
        self.offset += n
        return buf

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.read(4, what))[0]

    def u64(self, what: str) -> int:
        return struct.unpack("<Q", self.read(8, what))[0]


def read_semb(stream: BinaryIO | str | Path) -> ContextualStore:
    """Load a SEMB stream; any structural violation is fatal with its offset."""
    if isinstance(stream, (str, Path)):
        with open(stream, "rb") as fh:
            return read_semb(fh)

    r = _Reader(stream)
    magic = r.read(4, "magic")
    if magic != SEMB_MAGIC:
        raise SembFormatError(0, f"bad magic {magic!r}")
    version = r.u32("version")
    if version != SEMB_VERSION:
        raise SembFormatError(4, f"unsupported version {version}")
    dim = r.u32("dim")
    if dim < 1:
        raise SembFormatError(8, f"dim must be >= 1, got {dim}")
    meta_len = r.u32("meta_len")
    meta = r.read(meta_len, "meta").decode("utf-8")
    count = r.u64("record_count")

    records: dict[str, np.ndarray] = {}
    for i in range(count):
        rec_at = r.offset
        id_len = r.u32("id_len")
        sid = r.read(id_len, "id").decode("utf-8")
        if sid in records:
            raise SembFormatError(rec_at, f"duplicate record id {sid!r}")
        t = r.u32("T")
        if t < 1:
            raise SembFormatError(rec_at, f"record {sid!r}: T must be >= 1")
        payload = r.read(4 * t * dim, f"record {sid!r} payload")
        mat = np.frombuffer(payload, dtype="<f4").reshape(t, dim).copy()
        if not np.isfinite(mat).all():
            raise SembFormatError(rec_at, f"record {sid!r} contains NaN/Inf")
        records[sid] = mat

    trailing = stream.read(1)
    if trailing:
        raise SembFormatError(
            r.offset, f"declared {count} records but stream has trailing bytes"
        )
    return ContextualStore(dim=dim, meta=meta, records=records)


def write_semb(store: ContextualStore, stream: BinaryIO | str | Path) -> None:
    """Write a store in SEMB format, records in insertion order."""
    if isinstance(stream, (str, Path)):
        with open(stream, "wb") as fh:
            write_semb(store, fh)
            return

    store.validate()
    meta = store.meta.encode("utf-8")
    stream.write(SEMB_MAGIC)
    stream.write(struct.pack("<I", SEMB_VERSION))
    stream.write(struct.pack("<I", store.dim))
    stream.write(struct.pack("<I", len(meta)))
    stream.write(meta)
    stream.write(struct.pack("<Q", len(store.records)))
    for sid, mat in store.records.items():
        sid_b = sid.encode("utf-8")
        stream.write(struct.pack("<I", len(sid_b)))
        stream.write(sid_b)
        stream.write(struct.pack("<I", mat.shape[0]))
        stream.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())


# --- Providers ----------------------------------------------------------------


class EmbeddingProvider(Protocol):
    """Anything that maps a sentence to a fixed-shape tensor."""

    @property
    def dim(self) -> int: ...

    def describe(self) -> str: ...

    def embed(self, sentence: LabeledSentence) -> SentenceTensor: ...


class StaticProvider:
    """Embeds sentences token-by-token from a static lookup table."""

    def __init__(self, table: StaticEmbeddingTable, source: str = ""):
        self.table = table
        self.source = source

    @property
    def dim(self) -> int:
        return self.table.dim

    def describe(self) -> str:
        return f"static:{self.source or '<memory>'} (dim={self.dim}, vocab={len(self.table)})"

    def embed(self, sentence: LabeledSentence) -> SentenceTensor:
        return embed_static(sentence.tokens, self.table)


class ContextualProvider:
    """Embeds sentences by id lookup in a precomputed contextual store."""

    def __init__(self, store: ContextualStore, source: str = ""):
        self.store = store
        self.source = source

    @property
    def dim(self) -> int:
        return self.store.dim

    def describe(self) -> str:
        return (
            f"contextual:{self.source or '<memory>'} "
            f"(dim={self.dim}, records={len(self.store.records)}, meta={self.store.meta!r})"
        )

    def embed(self, sentence: LabeledSentence) -> SentenceTensor:
        return embed_contextual(sentence.id, self.store)


def load_provider(spec: str) -> StaticProvider | ContextualProvider:
    """Build a provider from a `static:path` or `contextual:path` string."""
    kind, sep, path = spec.partition(":")
    if not sep or not path:
        raise EmbeddingError(f"provider spec {spec!r} is not kind:path")
    if kind == "static":
        return StaticProvider(load_static_vectors(path), source=path)
    if kind == "contextual":
        return ContextualProvider(read_semb(path), source=path)
    raise EmbeddingError(f"unknown provider kind {kind!r} (want static or contextual)")
