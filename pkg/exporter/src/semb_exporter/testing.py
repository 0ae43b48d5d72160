"""Helpers for tests and offline environments: a tiny local encoder.

Real exports point `--encoder` at a proper pretrained checkpoint (a local
snapshot directory or a hub id where network access exists). These helpers
build a small randomly initialized BERT with a character-level WordPiece
vocabulary so the full export path can run hermetically.
"""

from __future__ import annotations

import string
from pathlib import Path

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]

COMMON_WORDS = [
    "the", "a", "of", "and", "to", "in", "we", "on", "for", "new",
    "bank", "river", "interest", "rates", "parliament", "health",
    "schools", "taxes", "housing", "policy", "government", "people",
]


def _vocab() -> list[str]:
    letters = list(string.ascii_lowercase) + list(string.digits)
    pieces = letters + ["##" + c for c in letters]
    punct = list(".,!?;:'\"()-")
    return SPECIALS + pieces + punct + COMMON_WORDS


def build_tiny_encoder(
    path: str | Path, seed: int = 0, hidden_size: int = 32, layers: int = 2
) -> Path:
    """Create and save a small random BERT encoder + tokenizer under `path`."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizerFast

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    vocab = _vocab()
    vocab_file = path / "vocab.txt"
    vocab_file.write_text("\n".join(vocab) + "\n", encoding="utf-8")
    # model_max_length must stay within max_position_embeddings so oversized
    # sentences truncate cleanly (and get skipped) instead of crashing
    tokenizer = BertTokenizerFast(
        vocab_file=str(vocab_file), do_lower_case=True, model_max_length=128
    )
    tokenizer.save_pretrained(path)

    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        num_hidden_layers=layers,
        num_attention_heads=2,
        intermediate_size=hidden_size * 2,
        max_position_embeddings=128,
    )
    model = BertModel(config)
    model.eval()
    model.save_pretrained(path)
    return path
