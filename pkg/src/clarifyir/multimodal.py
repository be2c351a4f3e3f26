"""Embedding store, image selection, weak VEQ/TEQ labels, reference classifier.

VEQ (visually-enhanced question): attaching images improves downstream
retrieval; TEQ (text-enhanced): it does not. Weak labels come from the
sign of the mean nDCG@{1,3,5} difference between an image-augmented and a
text-only retrieval run.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lexical import tokenize

EMBEDDING_FORMAT = "MELON-EMB v1"
CLASSIFIER_FORMAT = "CLARIFYIR-NBC v1"

VEQ = "VEQ"
TEQ = "TEQ"

_UNKNOWN = "<unk>"


@dataclass
class EmbeddingStore:
    """id -> unit-L2-norm vector, all of one dimensionality."""

    dim: int
    vectors: dict[str, np.ndarray]

    def __contains__(self, key: str) -> bool:
        return key in self.vectors

    def get(self, key: str) -> np.ndarray:
        if key not in self.vectors:
            raise KeyError(f"no embedding stored for id '{key}'")
        return self.vectors[key]


@dataclass(frozen=True)
class WeakLabelRecord:
    question_id: str
    deltas: tuple[float, ...]  # per-facet nDCG differences
    mean_delta: float
    label: str  # VEQ iff mean_delta > 0


def hash_embed(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic feature-hash embedding of character 3-grams.

    Each 3-gram of the lowercased text lands in one of `dim` buckets with a
    +/-1 sign, both taken from a seeded keyed hash; the result is
    L2-normalized.
    """
    if dim < 8:
        raise ValueError("dim must be >= 8")
    lowered = text.lower()
    if len(lowered) < 3:
        raise ValueError(f"text {text!r} yields no character 3-grams")
    key = seed.to_bytes(8, "little", signed=True)
    vec = np.zeros(dim, dtype=np.float64)
    for i in range(len(lowered) - 2):
        gram = lowered[i : i + 3]
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8, key=key).digest()
        value = int.from_bytes(digest, "little")
        sign = 1.0 if value & 1 else -1.0
        vec[(value >> 1) % dim] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError(f"text {text!r} hashed to the zero vector")
    return vec / norm


def load_embeddings(path: str | Path) -> EmbeddingStore:
    """Read the text embedding file: header line, then "<id>\\t<floats>" rows."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        parts = header.split()
        if len(parts) != 3 or " ".join(parts[:2]) != EMBEDDING_FORMAT:
            raise ValueError(f"{path}: expected header '{EMBEDDING_FORMAT} <dim>', got '{header}'")
        dim = int(parts[2])
        if dim < 1:
            raise ValueError(f"{path}: dimension must be positive, got {dim}")
        vectors: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            fields = line.split()
            key, values = fields[0], fields[1:]
            if key in vectors:
                raise ValueError(f"{path}: line {lineno}: duplicate id '{key}'")
            if len(values) != dim:
                raise ValueError(f"{path}: line {lineno}: expected {dim} floats, got {len(values)}")
            vec = np.array([float(v) for v in values], dtype=np.float64)
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:
                raise ValueError(f"{path}: line {lineno}: zero vector for id '{key}'")
            vectors[key] = vec / norm
    return EmbeddingStore(dim, vectors)


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"{EMBEDDING_FORMAT} {store.dim}\n")
        for key in sorted(store.vectors):
            floats = " ".join(repr(float(v)) for v in store.vectors[key])
            fh.write(f"{key}\t{floats}\n")


def select_images(
    store: EmbeddingStore,
    question_id: str,
    candidate_image_ids: list[str],
    k: int = 1,
) -> list[str]:
    """Rank candidate images by cosine similarity to the question, top-k.

    Vectors are unit-norm, so cosine is a dot product; ties break toward
    the lexicographically smaller image id.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    query = store.get(question_id)
    scored = [(-float(np.dot(query, store.get(img))), img) for img in candidate_image_ids]
    scored.sort()
    return [img for _, img in scored[:k]]


def weak_label(tor_metrics: tuple[float, float, float], mur_metrics: tuple[float, float, float]) -> tuple[float, str]:
    """Label a sample from nDCG@{1,3,5} of text-only vs image-augmented runs.

    Returns (delta, label) with delta = mean(mur) - mean(tor); VEQ iff
    delta > 0, otherwise (including exact ties) TEQ.
    """
    for v in (*tor_metrics, *mur_metrics):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"nDCG value {v} outside [0, 1]")
    delta = sum(mur_metrics) / len(mur_metrics) - sum(tor_metrics) / len(tor_metrics)
    return delta, (VEQ if delta > 0 else TEQ)


def save_weak_labels(records: list[WeakLabelRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({"question_id": rec.question_id, "delta": rec.mean_delta, "label": rec.label}) + "\n")


def load_weak_labels(path: str | Path) -> dict[str, str]:
    labels: dict[str, str] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            labels[rec["question_id"]] = rec["label"]
    return labels


class ReferenceClassifier:
    """Multinomial naive Bayes over tokenize(query + question) unigrams.

    Likelihoods are add-alpha smoothed and normalized per class over the
    vocabulary plus one unknown-token bucket; tokens outside the vocabulary
    are skipped at classification time, so an all-unknown input falls back
    to the class priors. Posterior ties resolve to TEQ (attaching no image
    is the conservative failure mode).
    """

    def __init__(self, alpha: float, class_counts: dict[str, int], token_counts: dict[str, dict[str, int]]):
        self.alpha = alpha
        self.class_counts = class_counts
        self.token_counts = token_counts
        self.vocabulary = sorted({t for counts in token_counts.values() for t in counts})
        self._vocab_set = set(self.vocabulary)
        total = sum(class_counts.values())
        self._log_prior = {c: math.log(n / total) for c, n in class_counts.items()}
        self._log_like: dict[str, dict[str, float]] = {}
        v = len(self.vocabulary) + 1  # +1 unknown bucket
        for label in (VEQ, TEQ):
            counts = token_counts.get(label, {})
            denom = sum(counts.values()) + alpha * v
            table = {tok: math.log((counts.get(tok, 0) + alpha) / denom) for tok in self.vocabulary}
            table[_UNKNOWN] = math.log(alpha / denom)
            self._log_like[label] = table

    def log_posteriors(self, tokens: list[str]) -> dict[str, float]:
        known = [t for t in tokens if t in self._vocab_set]
        out = {}
        for label in (VEQ, TEQ):
            table = self._log_like[label]
            out[label] = self._log_prior[label] + sum(table[t] for t in known)
        return out

    def save(self, path: str | Path) -> None:
        payload = {
            "format": CLASSIFIER_FORMAT,
            "alpha": self.alpha,
            "class_counts": self.class_counts,
            "token_counts": self.token_counts,
        }
        Path(path).write_text(json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ReferenceClassifier":
        with Path(path).open("r", encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("format") != CLASSIFIER_FORMAT:
            raise ValueError(f"{path}: expected classifier format '{CLASSIFIER_FORMAT}', got '{payload.get('format')}'")
        return cls(
            alpha=float(payload["alpha"]),
            class_counts={c: int(n) for c, n in payload["class_counts"].items()},
            token_counts={c: {t: int(n) for t, n in counts.items()} for c, counts in payload["token_counts"].items()},
        )


def train_classifier(samples: list[tuple[str, str, str]], alpha: float = 1.0) -> ReferenceClassifier:
    """Fit the naive Bayes model on (topic query, question text, label) samples."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    class_counts: dict[str, int] = {}
    token_counts: dict[str, dict[str, int]] = {VEQ: {}, TEQ: {}}
    for query, question, label in samples:
        if label not in (VEQ, TEQ):
            raise ValueError(f"unknown class label '{label}'")
        class_counts[label] = class_counts.get(label, 0) + 1
        counts = token_counts[label]
        for tok in tokenize(query + " " + question):
            counts[tok] = counts.get(tok, 0) + 1
    if len(class_counts) < 2:
        raise ValueError("training set must contain both VEQ and TEQ samples")
    return ReferenceClassifier(alpha, class_counts, token_counts)


def classify_question(classifier: ReferenceClassifier, query: str, question: str) -> tuple[str, float]:
    """Argmax-posterior label plus the posterior of the returned label."""
    tokens = tokenize(query + " " + question)
    logs = classifier.log_posteriors(tokens)
    label = VEQ if logs[VEQ] > logs[TEQ] else TEQ
    low = min(logs.values())
    weights = {c: math.exp(lp - low) for c, lp in logs.items()}
    return label, weights[label] / sum(weights.values())
