"""Export contextual token embeddings from pretrained encoders to SEMB files.

Reads the canonical corpus JSON-lines format, re-tokenizes each sentence with
the classifier's word-tokenization rules, encodes with a huggingface
transformer, mean-pools subword vectors into one vector per word token, and
writes one SEMB record per sentence.
"""

from .export import ExportResult, ExportSpec, export_contextual
from .tokenizer import TOKENIZER_RULES_VERSION, tokenize
from . import testing

__version__ = "0.1.0"

__all__ = [
    "ExportSpec",
    "ExportResult",
    "export_contextual",
    "tokenize",
    "TOKENIZER_RULES_VERSION",
    "testing",
]
