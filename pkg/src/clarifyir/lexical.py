"""Tokenization, inverted index, and first-stage ranking (BM25 / query likelihood).

The index is immutable after build; scoring and search are safe for
concurrent readers.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import Document

INDEX_FORMAT = "CLARIFYIR-IDX v1"

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75
DEFAULT_MU = 2000.0

# alphanumeric runs; underscore and any punctuation separate tokens
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

TokenStream = list  # list[str], lowercase, no empty tokens


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class InvertedIndex:
    """Postings plus the per-document and collection statistics BM25/QL need."""

    postings: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    doc_len: dict[str, int] = field(default_factory=dict)
    ordinal: dict[str, int] = field(default_factory=dict)
    total_len: int = 0

    @property
    def n_docs(self) -> int:
        return len(self.doc_len)

    @property
    def avg_len(self) -> float:
        return self.total_len / self.n_docs if self.n_docs else 0.0

    def df(self, token: str) -> int:
        return len(self.postings.get(token, ()))

    def cf(self, token: str) -> int:
        return sum(tf for _, tf in self.postings.get(token, ()))

    def tf(self, token: str, doc_id: str) -> int:
        for d, f in self.postings.get(token, ()):
            if d == doc_id:
                return f
        return 0


def build_index(corpus: list[Document]) -> InvertedIndex:
    """Index a corpus; duplicate document ids are an error."""
    index = InvertedIndex()
    seen: set[str] = set()
    for doc in sorted(corpus, key=lambda d: d.ordinal):
        if doc.id in seen:
            raise ValueError(f"duplicate document id '{doc.id}'")
        seen.add(doc.id)
        tokens = tokenize(doc.text)
        index.doc_len[doc.id] = len(tokens)
        index.ordinal[doc.id] = doc.ordinal
        index.total_len += len(tokens)
        for token, tf in sorted(Counter(tokens).items()):
            index.postings.setdefault(token, []).append((doc.id, tf))
    return index


def bm25_score(
    index: InvertedIndex,
    query: list[str],
    doc_id: str,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> float:
    """Okapi BM25 with the +1-floored Robertson idf (never negative)."""
    if doc_id not in index.doc_len:
        raise KeyError(f"unknown document id '{doc_id}'")
    length = index.doc_len[doc_id]
    avg = index.avg_len
    score = 0.0
    for token in query:
        df = index.df(token)
        if df == 0:
            continue
        tf = index.tf(token, doc_id)
        if tf == 0:
            continue
        idf = math.log(1.0 + (index.n_docs - df + 0.5) / (df + 0.5))
        score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * length / avg))
    return score


def ql_score(
    index: InvertedIndex,
    fields: list[tuple[list[str], float]],
    doc_id: str,
    mu: float = DEFAULT_MU,
) -> float:
    """Dirichlet-smoothed query likelihood over weighted text fields.

    Weights are normalized to sum to 1. Query tokens absent from the whole
    collection are skipped: with cf=0 they would contribute log 0 to every
    document equally, so dropping them preserves the ranking.
    """
    if doc_id not in index.doc_len:
        raise KeyError(f"unknown document id '{doc_id}'")
    if mu <= 0:
        raise ValueError("mu must be positive")
    total_weight = sum(w for _, w in fields)
    if total_weight <= 0 or any(w < 0 for _, w in fields):
        raise ValueError("field weights must be non-negative and sum to a positive value")

    length = index.doc_len[doc_id]
    collection_size = index.total_len
    score = 0.0
    for tokens, weight in fields:
        if weight == 0:
            continue
        part = 0.0
        for token in tokens:
            cf = index.cf(token)
            if cf == 0:
                continue
            tf = index.tf(token, doc_id)
            part += math.log((tf + mu * cf / collection_size) / (length + mu))
        score += (weight / total_weight) * part
    return score


def _sort_ranked(scores: dict[str, float], index: InvertedIndex) -> list[tuple[str, float]]:
    # score desc, ties by ascending corpus ordinal
    return sorted(scores.items(), key=lambda kv: (-kv[1], index.ordinal[kv[0]]))


def search(
    index: InvertedIndex,
    query: list[str],
    k: int = 100,
    model: str = "bm25",
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    mu: float = DEFAULT_MU,
) -> list[tuple[str, float]]:
    """Rank documents for a query; top-k, score desc, ties by ordinal.

    bm25 mode scores only documents containing at least one query token;
    ql mode scores the whole collection.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if model == "bm25":
        avg = index.avg_len
        scores: dict[str, float] = {}
        for token in query:
            plist = index.postings.get(token)
            if not plist:
                continue
            df = len(plist)
            idf = math.log(1.0 + (index.n_docs - df + 0.5) / (df + 0.5))
            for doc_id, tf in plist:
                length = index.doc_len[doc_id]
                contrib = idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * length / avg))
                scores[doc_id] = scores.get(doc_id, 0.0) + contrib
    elif model == "ql":
        scores = {d: ql_score(index, [(query, 1.0)], d, mu=mu) for d in index.doc_len}
    else:
        raise ValueError(f"unknown retrieval model '{model}'")
    return _sort_ranked(scores, index)[:k]


def ql_rank(
    index: InvertedIndex,
    fields: list[tuple[list[str], float]],
    k: int = 100,
    mu: float = DEFAULT_MU,
) -> list[tuple[str, float]]:
    """Weighted-field QL ranking over the whole collection."""
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = {d: ql_score(index, fields, d, mu=mu) for d in index.doc_len}
    return _sort_ranked(scores, index)[:k]


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Persist as JSON; all payload values are integers so reloaded scores
    are bit-identical."""
    payload = {
        "format": INDEX_FORMAT,
        "total_len": index.total_len,
        "doc_len": index.doc_len,
        "ordinal": index.ordinal,
        "postings": {t: [[d, f] for d, f in plist] for t, plist in index.postings.items()},
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8")


def load_index(path: str | Path) -> InvertedIndex:
    with Path(path).open("r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != INDEX_FORMAT:
        raise ValueError(f"{path}: expected index format '{INDEX_FORMAT}', got '{payload.get('format')}'")
    return InvertedIndex(
        postings={t: [(d, int(f)) for d, f in plist] for t, plist in payload["postings"].items()},
        doc_len={d: int(v) for d, v in payload["doc_len"].items()},
        ordinal={d: int(v) for d, v in payload["ordinal"].items()},
        total_len=int(payload["total_len"]),
    )
