"""Document identifiers, identifier trie, and constrained beam search.

Documents are represented by short token sequences (doc number, first five
words, or top-5 tf-idf keywords). A trie over those sequences restricts
beam-search expansions so every generated sequence maps back to exactly one
document. Tries and trained scorers are immutable after construction;
per-facet searches are independent.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Protocol

from .dataset import Document, Qrels
from .lexical import InvertedIndex, tokenize

SCORER_FORMAT = "CLARIFYIR-SCORER v1"
SEP_TOKEN = "[SEP]"
_START = "<s>"

DEFAULT_BEAM_SIZE = 15
DEFAULT_KEYWORDS = 5
DEFAULT_LAMBDAS = (0.4, 0.2, 0.4)

# Lucene's classic English stopword list; applied only in keyword
# extraction, never in indexing.
STOPWORDS = frozenset(
    """a an and are as at be but by for if in into is it no not of on or such
    that the their then there these they this to was will with""".split()
)


class IdentifierStrategy(str, Enum):
    DOC_N = "doc_n"
    DOC_F5 = "doc_f5"
    DOC_K = "doc_k"


@dataclass(frozen=True)
class Identifier:
    """A document's identifier token sequence.

    The ordinal rides along so trie collision handling and tie-breaks do
    not need a separate corpus join.
    """

    doc_id: str
    tokens: tuple[str, ...]
    ordinal: int


class SequenceScorer(Protocol):
    """Pluggable next-token log-probability source for constrained decoding.

    Implementations must be deterministic given (context, prefix, allowed)
    and stateless per call; returned keys are a subset of `allowed` and a
    missing key means log-probability -inf.
    """

    def next_token_logprobs(
        self, context: list[str], prefix: list[str], allowed: set[str]
    ) -> dict[str, float]: ...


def extract_keywords(doc: Document, corpus_stats: InvertedIndex, k: int = DEFAULT_KEYWORDS) -> list[str]:
    """Top-k document tokens by tf-idf (tf * ln(N/df)), stopwords removed.

    Ties break lexicographically; fewer than k tokens are returned when the
    document has fewer distinct eligible tokens.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if doc.id not in corpus_stats.doc_len:
        raise KeyError(f"document '{doc.id}' is not indexed")
    counts = Counter(t for t in tokenize(doc.text) if t not in STOPWORDS)
    if not counts:
        raise ValueError(f"document '{doc.id}' has no eligible tokens for an identifier")
    n = corpus_stats.n_docs
    scored = sorted(
        ((tf * math.log(n / corpus_stats.df(tok)), tok) for tok, tf in counts.items()),
        key=lambda st: (-st[0], st[1]),
    )
    return [tok for _, tok in scored[:k]]


def make_identifier(doc: Document, strategy: IdentifierStrategy, corpus_stats: InvertedIndex) -> Identifier:
    """Build the identifier for one document under the given strategy."""
    strategy = IdentifierStrategy(strategy)
    if strategy is IdentifierStrategy.DOC_N:
        tokens = (f"d{doc.ordinal}",)
    elif strategy is IdentifierStrategy.DOC_F5:
        words = tokenize(doc.text)[:5]
        if not words:
            raise ValueError(f"document '{doc.id}' has no tokens for a first-words identifier")
        tokens = tuple(words)
    else:
        tokens = tuple(extract_keywords(doc, corpus_stats, k=DEFAULT_KEYWORDS))
    return Identifier(doc.id, tokens, doc.ordinal)


def build_identifier_table(
    corpus: list[Document], corpus_stats: InvertedIndex, strategy: IdentifierStrategy
) -> list[Identifier]:
    """Identifiers for a whole corpus, in ascending-ordinal order."""
    return [make_identifier(d, strategy, corpus_stats) for d in sorted(corpus, key=lambda d: d.ordinal)]


def save_identifier_table(identifiers: list[Identifier], strategy: IdentifierStrategy, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for ident in identifiers:
            fh.write(
                json.dumps(
                    {"doc_id": ident.doc_id, "tokens": list(ident.tokens), "strategy": IdentifierStrategy(strategy).value},
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_identifier_table(path: str | Path, ordinal_of: Mapping[str, int]) -> tuple[list[Identifier], IdentifierStrategy]:
    """Read the identifier table; ordinals are rejoined from the corpus."""
    identifiers: list[Identifier] = []
    strategy: IdentifierStrategy | None = None
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            row_strategy = IdentifierStrategy(rec["strategy"])
            if strategy is None:
                strategy = row_strategy
            elif strategy is not row_strategy:
                raise ValueError(f"{path}: line {lineno}: mixed identifier strategies")
            if rec["doc_id"] not in ordinal_of:
                raise KeyError(f"{path}: line {lineno}: document '{rec['doc_id']}' not in corpus")
            identifiers.append(Identifier(rec["doc_id"], tuple(rec["tokens"]), ordinal_of[rec["doc_id"]]))
    if strategy is None:
        raise ValueError(f"{path}: identifier table is empty")
    return identifiers, strategy


class _TrieNode:
    __slots__ = ("children", "terminal")

    def __init__(self) -> None:
        self.children: dict[str, _TrieNode] = {}
        self.terminal: str | None = None


class IdentifierTrie:
    """Token trie over document identifiers; one terminal per document."""

    def __init__(self) -> None:
        self.root = _TrieNode()
        self.doc_count = 0
        self.depth = 0

    def _insert(self, tokens: tuple[str, ...], doc_id: str) -> None:
        node = self.root
        for tok in tokens:
            node = node.children.setdefault(tok, _TrieNode())
        node.terminal = doc_id
        self.doc_count += 1
        self.depth = max(self.depth, len(tokens))

    def _node(self, prefix: list[str] | tuple[str, ...]) -> _TrieNode:
        node = self.root
        for tok in prefix:
            child = node.children.get(tok)
            if child is None:
                raise KeyError(f"prefix {list(prefix)!r} is not a valid path in the trie")
            node = child
        return node

    def has_identifier(self, tokens: tuple[str, ...]) -> bool:
        try:
            return self._node(tokens).terminal is not None
        except KeyError:
            return False

    def allowed_next(self, prefix: list[str] | tuple[str, ...]) -> tuple[set[str], str | None]:
        """Continuation tokens of `prefix` plus its terminal doc id, if any."""
        node = self._node(prefix)
        return set(node.children), node.terminal

    def resolve(self, tokens: list[str] | tuple[str, ...]) -> str:
        """Map a complete identifier sequence to its owning document id."""
        try:
            node = self._node(tokens)
        except KeyError:
            raise KeyError(f"sequence {list(tokens)!r} is not in the identifier trie") from None
        if node.terminal is None:
            raise KeyError(f"sequence {list(tokens)!r} is an incomplete identifier")
        return node.terminal

    def identifiers(self) -> list[tuple[tuple[str, ...], str]]:
        """All (token sequence, doc_id) pairs, in insertion-independent sorted order."""
        out: list[tuple[tuple[str, ...], str]] = []

        def walk(node: _TrieNode, prefix: tuple[str, ...]) -> None:
            if node.terminal is not None:
                out.append((prefix, node.terminal))
            for tok in sorted(node.children):
                walk(node.children[tok], prefix + (tok,))

        walk(self.root, ())
        return out


def build_trie(identifiers: Iterable[Identifier]) -> IdentifierTrie:
    """Insert identifiers in ascending-ordinal order, deduplicating collisions.

    A later-inserted duplicate sequence gets the document-number token
    "d<ordinal>" appended (repeatedly, if the suffixed form still collides)
    so the sequence -> doc_id map stays a bijection.
    """
    trie = IdentifierTrie()
    for ident in sorted(identifiers, key=lambda i: i.ordinal):
        tokens = ident.tokens
        if not tokens:
            raise ValueError(f"identifier for '{ident.doc_id}' has no tokens")
        while trie.has_identifier(tokens):
            tokens = tokens + (f"d{ident.ordinal}",)
        trie._insert(tokens, ident.doc_id)
    return trie


def make_training_targets(
    facet_id: str,
    qrels: Qrels,
    identifiers: Mapping[str, Identifier],
    top_n: int = 5,
) -> list[str]:
    """Concatenate the identifiers of the top-n relevant documents.

    Documents are ordered by grade descending, ordinal ascending, and the
    identifier sequences are joined with the literal "[SEP]" token.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    relevant = {d: g for d, g in qrels.relevant(facet_id).items() if d in identifiers}
    if not relevant:
        raise ValueError(f"facet '{facet_id}' has no relevant documents with identifiers")
    ordered = sorted(relevant.items(), key=lambda dg: (-dg[1], identifiers[dg[0]].ordinal))
    target: list[str] = []
    for doc_id, _ in ordered[:top_n]:
        if target:
            target.append(SEP_TOKEN)
        target.extend(identifiers[doc_id].tokens)
    return target


class ReferenceScorer:
    """Interpolated bigram/unigram/context-overlap sequence scorer.

    Stands in for a trained neural decoder: log[l1*P_bigram(tok|prev)
    + l2*P_unigram(tok) + l3*overlap(tok, context)], add-1 smoothed and
    renormalized over the allowed token set.
    """

    def __init__(
        self,
        lambdas: tuple[float, float, float],
        bigram: dict[str, dict[str, int]],
        unigram: dict[str, int],
        total_tokens: int,
    ):
        self.lambdas = tuple(float(x) for x in lambdas)
        self.bigram = bigram
        self.unigram = unigram
        self.total_tokens = total_tokens
        self.vocab_size = len(unigram)
        self._bigram_totals = {prev: sum(nexts.values()) for prev, nexts in bigram.items()}

    def next_token_logprobs(
        self, context: list[str], prefix: list[str], allowed: set[str]
    ) -> dict[str, float]:
        if not allowed:
            return {}
        l1, l2, l3 = self.lambdas
        prev = prefix[-1] if prefix else _START
        prev_nexts = self.bigram.get(prev, {})
        prev_total = self._bigram_totals.get(prev, 0)
        ctx_counts = Counter(context)
        v = self.vocab_size
        denom_overlap = len(context) + len(allowed)

        masses: dict[str, float] = {}
        for tok in sorted(allowed):
            p_bigram = (prev_nexts.get(tok, 0) + 1) / (prev_total + v)
            p_unigram = (self.unigram.get(tok, 0) + 1) / (self.total_tokens + v)
            overlap = (1 + ctx_counts.get(tok, 0)) / denom_overlap
            masses[tok] = l1 * p_bigram + l2 * p_unigram + l3 * overlap
        total = sum(masses[tok] for tok in sorted(masses))
        return {tok: math.log(mass / total) for tok, mass in masses.items()}

    def save(self, path: str | Path) -> None:
        payload = {
            "format": SCORER_FORMAT,
            "lambdas": list(self.lambdas),
            "bigram": self.bigram,
            "unigram": self.unigram,
            "total_tokens": self.total_tokens,
        }
        Path(path).write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ReferenceScorer":
        with Path(path).open("r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != SCORER_FORMAT:
            raise ValueError(f"{path}: expected scorer format '{SCORER_FORMAT}', got '{payload.get('format')}'")
        return cls(
            lambdas=tuple(payload["lambdas"]),
            bigram={p: {t: int(n) for t, n in nexts.items()} for p, nexts in payload["bigram"].items()},
            unigram={t: int(n) for t, n in payload["unigram"].items()},
            total_tokens=int(payload["total_tokens"]),
        )


def train_reference_scorer(
    pairs: list[tuple[list[str], list[str]]],
    lambdas: tuple[float, float, float] = DEFAULT_LAMBDAS,
) -> ReferenceScorer:
    """Count target n-grams from (context, target) pairs."""
    if not pairs:
        raise ValueError("training pairs must be non-empty")
    if len(lambdas) != 3 or any(l < 0 for l in lambdas) or abs(sum(lambdas) - 1.0) > 1e-9:
        raise ValueError("lambdas must be three non-negative weights summing to 1")
    bigram: dict[str, dict[str, int]] = {}
    unigram: dict[str, int] = {}
    total = 0
    for _, target in pairs:
        if not target:
            raise ValueError("training targets must be non-empty token lists")
        prev = _START
        for tok in target:
            bigram.setdefault(prev, {})
            bigram[prev][tok] = bigram[prev].get(tok, 0) + 1
            unigram[tok] = unigram.get(tok, 0) + 1
            total += 1
            prev = tok
    return ReferenceScorer(lambdas, bigram, unigram, total)


def constrained_beam_search(
    scorer: SequenceScorer,
    context: list[str],
    trie: IdentifierTrie,
    beam_size: int = DEFAULT_BEAM_SIZE,
    max_len: int | None = None,
) -> list[tuple[list[str], float]]:
    """Beam search restricted to identifier-trie paths.

    A hypothesis whose prefix completes an identifier emits that sequence
    (and keeps expanding if the trie continues past it). Scores are raw
    sums of token log-probabilities; no length normalization. Returns up to
    beam_size completed sequences, score descending, ties in lexicographic
    token order.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    if trie.doc_count == 0:
        return []
    if max_len is None:
        max_len = trie.depth

    completed: list[tuple[tuple[str, ...], float]] = []
    active: list[tuple[tuple[str, ...], float, _TrieNode]] = [((), 0.0, trie.root)]
    while active:
        expansions: list[tuple[tuple[str, ...], float, _TrieNode]] = []
        for prefix, score, node in active:
            if len(prefix) >= max_len or not node.children:
                continue
            logps = scorer.next_token_logprobs(context, list(prefix), set(node.children))
            for tok in sorted(node.children):
                logp = logps.get(tok)
                if logp is None or logp == -math.inf:
                    continue
                child = node.children[tok]
                hypothesis = (prefix + (tok,), score + logp, child)
                if child.terminal is not None:
                    completed.append((hypothesis[0], hypothesis[1]))
                if child.children:
                    expansions.append(hypothesis)
        expansions.sort(key=lambda h: (-h[1], h[0]))
        active = expansions[:beam_size]

    completed.sort(key=lambda h: (-h[1], h[0]))
    return [(list(tokens), score) for tokens, score in completed[:beam_size]]


def rank_candidates(
    beams: list[tuple[list[str], float]],
    trie: IdentifierTrie,
    first_stage: list[tuple[str, float]],
    ordinal_of: Mapping[str, int],
) -> list[tuple[str, float]]:
    """Merge generated sequences with the first-stage candidate list.

    Documents reached by any beam are ranked by their best sequence score
    (ties by first-stage rank, then ordinal); remaining first-stage
    candidates follow in first-stage order with a -inf sentinel score.
    """
    best: dict[str, float] = {}
    for tokens, score in beams:
        doc_id = trie.resolve(tokens)  # raises if the constraint was violated
        if doc_id not in best or score > best[doc_id]:
            best[doc_id] = score
    stage_rank = {doc_id: i for i, (doc_id, _) in enumerate(first_stage)}
    generated = sorted(
        best.items(),
        key=lambda ds: (-ds[1], stage_rank.get(ds[0], math.inf), ordinal_of.get(ds[0], math.inf)),
    )
    ranking = list(generated)
    seen = set(best)
    for doc_id, _ in first_stage:
        if doc_id not in seen:
            ranking.append((doc_id, -math.inf))
            seen.add(doc_id)
    return ranking
