"""Sentence-level political topic classification with a convolutional network.

Train 7-domain sentence classifiers on expert-coded manifesto sentences over
static or precomputed contextual embeddings, then apply them unchanged to a
second corpus of press briefings.
"""

__version__ = "0.1.0"

TOKENIZER_RULES_VERSION = "ws-punct-v1"
