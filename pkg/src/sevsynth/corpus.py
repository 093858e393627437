"""Corpus ingestion, whitespace tokenization, and document-frequency statistics.

Corpora are UTF-8 text files, one sentence per line; the zero-based line
index is the sentence id. Tokenization is a plain Unicode-whitespace word
split, so CJK corpora must be pre-segmented upstream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


@dataclass(frozen=True)
class TokenizedSentence:
    """Ordered word tokens of one sentence."""

    tokens: tuple[str, ...]
    sentence_id: int | None = None

    def __post_init__(self) -> None:
        for tok in self.tokens:
            if not tok or tok != tok.strip() or any(ch.isspace() for ch in tok):
                raise ValueError(f"invalid token {tok!r}: tokens must be non-empty and whitespace-free")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class ParallelPair:
    """A source sentence aligned with its anchor-language counterpart."""

    source: TokenizedSentence
    target: TokenizedSentence

    def __post_init__(self) -> None:
        if not self.source.tokens or not self.target.tokens:
            raise ValueError("parallel pair sides must be non-empty")


def tokenize(text: str, sentence_id: int | None = None) -> TokenizedSentence:
    """Split on maximal runs of Unicode whitespace, preserving token order."""
    return TokenizedSentence(tokens=tuple(text.split()), sentence_id=sentence_id)


def load_corpus(path: str | Path) -> list[TokenizedSentence]:
    """Read a one-sentence-per-line UTF-8 corpus; line index becomes sentence_id."""
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            sentences.append(tokenize(line.rstrip("\n"), sentence_id=i))
    return sentences


def load_parallel(source_path: str | Path, target_path: str | Path) -> list[ParallelPair]:
    """Read two line-aligned corpus files of equal length into pairs."""
    source = load_corpus(source_path)
    target = load_corpus(target_path)
    if len(source) != len(target):
        raise ValueError(
            f"parallel corpus line counts differ: {len(source)} ({source_path}) vs {len(target)} ({target_path})"
        )
    return [ParallelPair(source=s, target=t) for s, t in zip(source, target)]


@dataclass(frozen=True)
class IdfTable:
    """Smoothed inverse document frequencies over a sentence corpus.

    idf(t) = ln((1 + N) / (1 + df(t))); tokens never seen get df = 0,
    i.e. idf = ln(1 + N).
    """

    doc_count: int
    df: dict[str, int] = field(default_factory=dict)

    def idf(self, token: str) -> float:
        return math.log((1 + self.doc_count) / (1 + self.df.get(token, 0)))

    def save(self, path: str | Path) -> None:
        payload = {"doc_count": self.doc_count, "df": self.df}
        Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "IdfTable":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(doc_count=int(payload["doc_count"]), df={str(k): int(v) for k, v in payload["df"].items()})


def build_idf(corpus: Sequence[TokenizedSentence] | Iterable[TokenizedSentence]) -> IdfTable:
    """Count, for every token, the number of sentences containing it at least once."""
    df: dict[str, int] = {}
    n = 0
    for sentence in corpus:
        n += 1
        for token in set(sentence.tokens):
            df[token] = df.get(token, 0) + 1
    if n == 0:
        raise ValueError("empty corpus")
    return IdfTable(doc_count=n, df=df)


def tfidf_weight(token: str, sentence: TokenizedSentence, idf: IdfTable) -> float:
    """Raw occurrence count of the token in the sentence times its smoothed idf."""
    tf = sentence.tokens.count(token)
    return tf * idf.idf(token)
