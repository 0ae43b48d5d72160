"""Bundled synthetic fixtures for tests, benchmarks, and demo runs.

Two deterministic generators:

* separable: every class has its own marker tokens, so a static-embedding
  model can reach 100% train accuracy.
* polysemy: every sentence is a permutation of one fixed token multiset and
  the label is an arbitrary hidden variable, so token identity and local
  order carry no class signal. The contextual store encodes that hidden
  variable in its vectors (as a context-sensitive encoder would), while any
  static table is label-uninformative by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, LabeledSentence
from .embeddings import ContextualStore, StaticEmbeddingTable

__all__ = ["separable_fixture", "PolysemyFixture", "polysemy_fixture"]

_FILLERS = ("the", "people", "support", "policy", "in", "our", "country", "now")


def _random_table(tokens, dim: int, rng: np.random.Generator) -> StaticEmbeddingTable:
    entries = {t: rng.normal(0.0, 1.0, dim) / np.sqrt(dim) for t in tokens}
    return StaticEmbeddingTable(dim=dim, entries=entries)


def separable_fixture(
    seed: int = 0, per_class: int = 10, dim: int = 16
) -> tuple[Corpus, StaticEmbeddingTable]:
    """A 7-class corpus whose classes are revealed by unique marker tokens."""
    rng = np.random.default_rng([882_001, seed])
    markers = {c: (f"marker{c}a", f"marker{c}b") for c in range(1, 8)}
    sentences = []
    for c in range(1, 8):
        for i in range(per_class):
            words = list(markers[c] * 2) + list(_FILLERS[:4])
            rng.shuffle(words)
            text = " ".join(words)
            sentences.append(
                LabeledSentence.from_text(
                    id=f"sep-{c}-{i:03d}", text=text, label=c, source="separable-fixture"
                )
            )
    vocab = [t for pair in markers.values() for t in pair] + list(_FILLERS)
    table = _random_table(vocab, dim, rng)
    return (
        Corpus(tuple(sentences), name="separable", provenance=f"synthetic separable fixture, seed {seed}"),
        table,
    )


@dataclass
class PolysemyFixture:
    source: Corpus
    target: Corpus
    static_tables: dict[str, StaticEmbeddingTable]  # two independent tables
    contextual_stores: dict[str, ContextualStore]  # "clean" and "noisy"


# One fixed multiset; every sentence is a permutation of it.
_POLY_TOKENS = (
    "bank", "river", "note", "charge", "current", "interest",
    "field", "wave", "stock", "bond", "scale", "pitch",
)


def polysemy_fixture(
    seed: int = 0,
    per_class: int = 30,
    target_per_class: int = 10,
    dim: int = 16,
) -> PolysemyFixture:
    """Corpora where only context (not tokens) decides the label.

    The contextual stores add a class-dependent direction to every token
    vector of a sentence, mimicking how a context-sensitive encoder shifts
    token representations; the "noisy" store attenuates and perturbs that
    signal. Static tables see identical token multisets for every class.
    """
    rng = np.random.default_rng([882_002, seed])

    def build_corpus(tag: str, count_per_class: int, start: int = 0) -> Corpus:
        sentences = []
        for c in range(1, 8):
            for i in range(count_per_class):
                words = list(_POLY_TOKENS)
                rng.shuffle(words)
                sentences.append(
                    LabeledSentence.from_text(
                        id=f"poly-{tag}-{c}-{start + i:03d}",
                        text=" ".join(words),
                        label=c,
                        source=f"polysemy-{tag}",
                    )
                )
        return Corpus(
            tuple(sentences),
            name=f"polysemy-{tag}",
            provenance=f"synthetic polysemy fixture ({tag}), seed {seed}",
        )

    source = build_corpus("src", per_class)
    target = build_corpus("tgt", target_per_class)

    tables = {
        "w2v-like": _random_table(_POLY_TOKENS, dim, np.random.default_rng([882_003, seed])),
        "glove-like": _random_table(_POLY_TOKENS, dim, np.random.default_rng([882_004, seed])),
    }

    base = tables["w2v-like"].entries
    class_dirs = np.random.default_rng([882_005, seed]).normal(0.0, 1.0, (8, dim))
    class_dirs /= np.linalg.norm(class_dirs, axis=1, keepdims=True)

    def build_store(noise_scale: float, signal_scale: float, tag: str) -> ContextualStore:
        noise_rng = np.random.default_rng([882_006, seed, int(noise_scale * 1000)])
        records = {}
        for corpus in (source, target):
            for s in corpus:
                mat = np.stack([base[t] for t in s.tokens])
                mat = mat + signal_scale * class_dirs[s.label]
                if noise_scale:
                    mat = mat + noise_scale * noise_rng.normal(0.0, 1.0, mat.shape)
                records[s.id] = mat.astype(np.float32)
        return ContextualStore(
            dim=dim, meta=f"synthetic contextual fixture ({tag}), seed {seed}", records=records
        )

    stores = {
        "clean": build_store(noise_scale=0.0, signal_scale=1.0, tag="clean"),
        "noisy": build_store(noise_scale=0.35, signal_scale=0.6, tag="noisy"),
    }
    return PolysemyFixture(source=source, target=target, static_tables=tables, contextual_stores=stores)
