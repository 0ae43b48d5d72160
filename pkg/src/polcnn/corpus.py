"""Corpus ingestion, segmentation, tokenization, and splitting.

Two ingest routes produce the same in-memory shape: expert-coded CSV exports
(one coded sentence per row) and directories of plain-text press briefings
(segmented here). Corpora are immutable once built and interchange as
JSON-lines with keys id, text, label, source, date.
"""

from __future__ import annotations

import csv
import json
import math
import random
import re
from collections import Counter
from dataclasses import dataclass
from datetime import date as _date
from pathlib import Path
from typing import Iterator, Optional, TextIO

from .errors import IngestError, RecordError

__all__ = [
    "DOMAIN_CODES",
    "LabeledSentence",
    "Corpus",
    "SplitResult",
    "segment_sentences",
    "tokenize",
    "ingest_manifesto_csv",
    "ingest_briefings",
    "split_corpus",
    "label_distribution",
    "read_corpus_jsonl",
    "write_corpus_jsonl",
]

DOMAIN_CODES = (1, 2, 3, 4, 5, 6, 7)

# Sentinel codes that mark a row as uncoded: "000" plus heading markers.
_UNCODED_CODES = {"000", "h"}

# Abbreviations that never end a sentence, compared lowercase with their dot.
ABBREVIATIONS = frozenset(
    {"dr.", "mr.", "mrs.", "p.m.", "a.m.", "e.g.", "i.e.", "no.", "st."}
)

_TERMINAL = re.compile(r"[.!?]+(?=\s+[A-Z0-9])")
_TRAILING_WORD = re.compile(r"(\S+)$")


@dataclass(frozen=True)
class LabeledSentence:
    """One sentence with an optional domain code 1-7 and source metadata."""

    id: str
    text: str
    tokens: tuple[str, ...]
    label: Optional[int] = None
    source: str = ""
    date: Optional[str] = None

    def __post_init__(self):
        if self.label is not None and self.label not in DOMAIN_CODES:
            raise ValueError(f"label {self.label!r} outside domains 1-7")
        if self.text.strip() and not self.tokens:
            raise ValueError(f"sentence {self.id!r}: non-blank text but no tokens")
        if self.date is not None:
            _date.fromisoformat(self.date)

    @classmethod
    def from_text(
        cls,
        id: str,
        text: str,
        label: Optional[int] = None,
        source: str = "",
        date: Optional[str] = None,
    ) -> "LabeledSentence":
        return cls(id=id, text=text, tokens=tuple(tokenize(text)), label=label, source=source, date=date)


@dataclass(frozen=True)
class Corpus:
    """An ordered, immutable collection of sentences with unique ids."""

    sentences: tuple[LabeledSentence, ...]
    name: str = ""
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        seen = set()
        for s in self.sentences:
            if s.id in seen:
                raise ValueError(f"duplicate sentence id {s.id!r}")
            seen.add(s.id)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[LabeledSentence]:
        return iter(self.sentences)

    def labeled(self) -> tuple[LabeledSentence, ...]:
        return tuple(s for s in self.sentences if s.label is not None)

    @property
    def labeled_count(self) -> int:
        return sum(1 for s in self.sentences if s.label is not None)

    def ids(self) -> set[str]:
        return {s.id for s in self.sentences}


@dataclass(frozen=True)
class SplitResult:
    """Disjoint train/validation/test partition of a corpus's labeled subset."""

    train: Corpus
    validation: Corpus
    test: Corpus
    seed: int


def segment_sentences(text: str) -> list[str]:
    """Split a document into sentences.

    A run of ``.!?`` ends a sentence when followed by whitespace and an
    uppercase letter or digit, unless the word it terminates is a known
    abbreviation. The concatenation of the result preserves every
    non-whitespace character of the input.
    """
    sentences: list[str] = []
    start = 0
    for m in _TERMINAL.finditer(text):
        w = _TRAILING_WORD.search(text, start, m.end())
        if w is not None and w.group(1).lower() in ABBREVIATIONS:
            continue
        piece = text[start : m.end()].strip()
        if piece:
            sentences.append(piece)
        start = m.end()
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def tokenize(sentence: str) -> list[str]:
    """Lowercase and split a sentence into word and punctuation tokens.

    Leading and trailing punctuation of each whitespace-separated chunk
    becomes its own single-character token; internal characters (hyphens,
    apostrophes, dots in abbreviations) stay attached.
    """
    tokens: list[str] = []
    for chunk in sentence.lower().split():
        head: list[str] = []
        while chunk and not chunk[0].isalnum():
            head.append(chunk[0])
            chunk = chunk[1:]
        tail: list[str] = []
        while chunk and not chunk[-1].isalnum():
            tail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(head)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(tail))
    return tokens


def _parse_code(code: str) -> Optional[int]:
    """Map a CMP category code to its domain, or None for uncoded rows.

    Raises ValueError for codes that are neither a 3-digit category, an
    uncoded sentinel, nor a heading marker.
    """
    code = code.strip()
    if code.lower() in _UNCODED_CODES:
        return None
    if re.fullmatch(r"[1-7]\d\d(\.\d+)?", code):
        return int(code[0])
    raise ValueError(f"unparsable code {code!r}")


def ingest_manifesto_csv(
    stream: TextIO | str | Path,
    name: str = "manifesto",
    skip_bad_rows: bool = False,
) -> Corpus:
    """Read a coded-sentence CSV (header ``text,code``) into a Corpus.

    The domain label is the leading digit of the 3-digit category code;
    code 000 and heading rows stay in the corpus unlabeled. Malformed rows
    raise RecordError with their line number, or are dropped when
    skip_bad_rows is set.
    """
    if isinstance(stream, (str, Path)):
        with open(stream, "r", encoding="utf-8", newline="") as fh:
            return ingest_manifesto_csv(fh, name=name, skip_bad_rows=skip_bad_rows)

    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("empty stream: missing text,code header") from None
    if [h.strip().lower() for h in header] != ["text", "code"]:
        raise IngestError(f"expected header text,code, got {header!r}")

    sentences: list[LabeledSentence] = []
    for row in reader:
        line = reader.line_num
        try:
            if len(row) != 2:
                raise RecordError(line, f"expected 2 columns, got {len(row)}")
            text, code = row
            if not text.strip():
                raise RecordError(line, "empty text field")
            try:
                label = _parse_code(code)
            except ValueError as e:
                raise RecordError(line, str(e)) from None
        except RecordError:
            if skip_bad_rows:
                continue
            raise
        sentences.append(
            LabeledSentence.from_text(
                id=f"{name}:{line:06d}", text=text, label=label, source=name
            )
        )
    return Corpus(tuple(sentences), name=name, provenance="manifesto-csv ingest")


_BRIEFING_NAME = re.compile(r"^(?P<source>.+)_(?P<date>\d{4}-\d{2}-\d{2})\.txt$")


def ingest_briefings(directory: str | Path, name: str = "briefings") -> Corpus:
    """Segment every ``<source>_<YYYY-MM-DD>.txt`` under a directory.

    Every sentence becomes an unlabeled record carrying the file's source
    and date. Unreadable files and filenames that do not match the pattern
    are fatal.
    """
    directory = Path(directory)
    files = sorted(directory.glob("*.txt"))
    if not directory.is_dir():
        raise IngestError(f"not a directory: {directory}")
    if not files:
        raise IngestError(f"no .txt briefing files in {directory}")

    sentences: list[LabeledSentence] = []
    for path in files:
        m = _BRIEFING_NAME.match(path.name)
        if m is None:
            raise IngestError(
                f"briefing filename {path.name!r} does not match <source>_<YYYY-MM-DD>.txt"
            )
        source, day = m.group("source"), m.group("date")
        try:
            _date.fromisoformat(day)
        except ValueError:
            raise IngestError(f"briefing filename {path.name!r} has invalid date {day!r}") from None
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as e:
            raise IngestError(f"cannot read briefing {path}: {e}") from e
        for i, sent in enumerate(segment_sentences(text), start=1):
            sentences.append(
                LabeledSentence.from_text(
                    id=f"{source}_{day}#{i:05d}", text=sent, source=source, date=day
                )
            )
    return Corpus(tuple(sentences), name=name, provenance=f"briefings ingest of {directory}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _largest_remainder(
    group_sizes: dict[int, int], target: int, cap: dict[int, int]
) -> dict[int, int]:
    """Apportion `target` items over groups proportionally to their sizes."""
    total = sum(group_sizes.values())
    quota = {c: n * target / total for c, n in group_sizes.items()}
    alloc = {c: min(int(math.floor(q)), cap[c]) for c, q in quota.items()}
    leftover = target - sum(alloc.values())
    order = sorted(group_sizes, key=lambda c: (-(quota[c] - math.floor(quota[c])), c))
    while leftover > 0:
        progressed = False
        for c in order:
            if leftover == 0:
                break
            if alloc[c] < cap[c]:
                alloc[c] += 1
                leftover -= 1
                progressed = True
        if not progressed:
            break
    return alloc


def split_corpus(corpus: Corpus, seed: int) -> SplitResult:
    """Stratified 70/15/15 split of the labeled subset, deterministic per seed.

    Each class contributes 15% of its sentences to test and to validation
    via largest-remainder rounding, so overall |test| and |validation| both
    equal round(0.15 * N) while staying within one sentence of the per-class
    share. Unlabeled sentences are excluded.
    """
    labeled = corpus.labeled()
    if not labeled:
        raise ValueError(f"corpus {corpus.name!r} has no labeled sentences")

    by_class: dict[int, list[LabeledSentence]] = {}
    for s in labeled:
        by_class.setdefault(s.label, []).append(s)

    rng = random.Random(seed)
    for c in sorted(by_class):
        rng.shuffle(by_class[c])

    n = len(labeled)
    sizes = {c: len(v) for c, v in by_class.items()}
    test_target = _round_half_up(0.15 * n)
    val_target = _round_half_up(0.15 * n)
    test_alloc = _largest_remainder(sizes, test_target, cap=sizes)
    val_alloc = _largest_remainder(
        sizes, val_target, cap={c: sizes[c] - test_alloc[c] for c in sizes}
    )

    parts: dict[str, list[LabeledSentence]] = {"train": [], "validation": [], "test": []}
    for c in sorted(by_class):
        group = by_class[c]
        t, v = test_alloc[c], val_alloc[c]
        parts["test"].extend(group[:t])
        parts["validation"].extend(group[t : t + v])
        parts["train"].extend(group[t + v :])

    def sub(part: str) -> Corpus:
        return Corpus(
            tuple(parts[part]),
            name=f"{corpus.name}/{part}",
            provenance=f"{part} split of {corpus.name!r}, seed {seed}",
        )

    return SplitResult(train=sub("train"), validation=sub("validation"), test=sub("test"), seed=seed)


def label_distribution(corpus: Corpus) -> dict[int, float]:
    """Fraction of labeled sentences per domain; fractions sum to 1."""
    counts = Counter(s.label for s in corpus if s.label is not None)
    total = sum(counts.values())
    if total == 0:
        raise ValueError(f"corpus {corpus.name!r} has no labeled sentences")
    return {c: counts[c] / total for c in sorted(counts)}


def write_corpus_jsonl(corpus: Corpus, path: str | Path) -> None:
    """Write the canonical JSON-lines interchange file."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in corpus:
            fh.write(
                json.dumps(
                    {"id": s.id, "text": s.text, "label": s.label, "source": s.source, "date": s.date},
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_corpus_jsonl(path: str | Path, name: str | None = None) -> Corpus:
    """Read the canonical JSON-lines interchange file; tokens are recomputed."""
    path = Path(path)
    sentences: list[LabeledSentence] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                sentences.append(
                    LabeledSentence.from_text(
                        id=rec["id"],
                        text=rec["text"],
                        label=rec["label"],
                        source=rec.get("source") or "",
                        date=rec.get("date"),
                    )
                )
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
                raise RecordError(line_num, f"bad corpus record: {e}") from None
    return Corpus(tuple(sentences), name=name or path.stem, provenance=f"loaded from {path}")
