"""Word tokenization matching the classifier's rules, version ws-punct-v1.

The SEMB contract is word-aligned: record row counts must equal the
classifier tokenizer's token counts. This is an independent implementation
of the same published rules (lowercase; leading/trailing punctuation of each
whitespace chunk becomes its own token; internal characters stay attached),
and the version string travels in the SEMB meta header so consumers can
detect drift.
"""

TOKENIZER_RULES_VERSION = "ws-punct-v1"


def tokenize(sentence: str) -> list[str]:
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
