"""Corpus-to-SEMB export with subword-to-word alignment."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .semb import write_semb_records
from .tokenizer import TOKENIZER_RULES_VERSION, tokenize


@dataclass
class ExportSpec:
    corpus_path: str | Path
    encoder: str  # model id or local directory
    output_path: str | Path
    layer: int | str = "last"  # "last" or an index into hidden_states
    log_path: Optional[str | Path] = None  # default: <output>.skipped.log

    def __post_init__(self):
        if not self.encoder:
            raise ValueError("encoder identifier must be non-empty")


@dataclass
class ExportResult:
    written: int
    skipped: list[tuple[str, str]]  # (sentence id, reason)
    hidden_size: int
    meta: str


def _read_corpus(path: str | Path) -> list[tuple[str, str]]:
    sentences = []
    seen = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                sid, text = rec["id"], rec["text"]
            except (KeyError, json.JSONDecodeError) as e:
                raise ValueError(f"{path}: line {line_num}: bad corpus record: {e}") from None
            if sid in seen:
                raise ValueError(f"{path}: line {line_num}: duplicate sentence id {sid!r}")
            seen.add(sid)
            sentences.append((sid, text))
    return sentences


def _pick_layer(outputs, layer) -> torch.Tensor:
    if layer == "last":
        return outputs.hidden_states[-1]
    return outputs.hidden_states[int(layer)]


def _encode_words(tokenizer, model, words: list[str], layer) -> Optional[np.ndarray]:
    """One vector per word, mean-pooled over its subword pieces.

    Returns None when any word ends up with no subwords (alignment failure,
    e.g. characters the encoder's normalizer strips entirely).
    """
    enc = tokenizer(
        words,
        is_split_into_words=True,
        return_tensors="pt",
        truncation=True,
    )
    word_ids = enc.word_ids()
    with torch.no_grad():
        outputs = model(**enc, output_hidden_states=True)
    hidden = _pick_layer(outputs, layer)[0]  # (subwords, hidden)

    buckets: dict[int, list[int]] = {}
    for pos, wid in enumerate(word_ids):
        if wid is not None:
            buckets.setdefault(wid, []).append(pos)
    if set(buckets) != set(range(len(words))):
        return None

    rows = [hidden[buckets[w]].mean(dim=0) for w in range(len(words))]
    return torch.stack(rows).to(torch.float32).numpy()


def export_contextual(spec: ExportSpec) -> ExportResult:
    """Encode every corpus sentence and write one SEMB record each.

    Sentences whose subword-to-word alignment fails are skipped with a
    warning line in the sidecar log; everything else is written in corpus
    order. Inference runs in deterministic eval mode on a single thread so
    identical specs produce byte-identical files.
    """
    sentences = _read_corpus(spec.corpus_path)
    tokenizer = AutoTokenizer.from_pretrained(spec.encoder)
    model = AutoModel.from_pretrained(spec.encoder)
    model.eval()
    hidden_size = model.config.hidden_size
    meta = (
        f"encoder={spec.encoder};layer={spec.layer};"
        f"tokenizer={TOKENIZER_RULES_VERSION};subword_pooling=mean"
    )

    old_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    skipped: list[tuple[str, str]] = []
    records: list[tuple[str, np.ndarray]] = []
    try:
        for sid, text in sentences:
            words = tokenize(text)
            if not words:
                skipped.append((sid, "no word tokens"))
                continue
            mat = _encode_words(tokenizer, model, words, spec.layer)
            if mat is None:
                skipped.append((sid, "subword alignment failed"))
                continue
            if mat.shape != (len(words), hidden_size):
                skipped.append((sid, f"unexpected vector shape {mat.shape}"))
                continue
            records.append((sid, mat))
    finally:
        torch.set_num_threads(old_threads)

    written = write_semb_records(spec.output_path, hidden_size, meta, records)

    log_path = Path(spec.log_path) if spec.log_path else Path(str(spec.output_path) + ".skipped.log")
    if skipped:
        log_path.write_text(
            "".join(f"{sid}\t{reason}\n" for sid, reason in skipped), encoding="utf-8"
        )
    elif log_path.exists():
        log_path.unlink()
    return ExportResult(written=written, skipped=skipped, hidden_size=hidden_size, meta=meta)
