"""Deterministic synthetic benchmark: 200 documents, 25 topics, 50 facets.

Construction guarantees used by the end-to-end checks:

* every document has a unique top-keyword identifier (keyword vocabularies
  are disjoint across documents);
* each facet has exactly one relevant document whose keywords are seeded
  into the facet's answer (train facets) or only into the image aspects
  (validation/test facets), so image-aspect context strictly helps there;
* per topic, two short distractor documents share the topic token and
  outrank the relevant documents under query-only BM25.

Content is fixed; only the split assignment depends on the seed.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import dataset as ds

EMBED_DIM = 8
N_TOPICS = 25
FILLERS = 100


def _keywords(uid: str) -> list[str]:
    return [f"kw{uid}{s}" for s in "abcde"]


def build_benchmark() -> tuple[ds.Dataset, list[ds.Document], ds.Qrels, list[str]]:
    """Build the in-memory dataset, corpus, qrels and embedding file lines."""
    topics: list[ds.Topic] = []
    facets: list[ds.Facet] = []
    questions: list[ds.ClarifyingQuestion] = []
    answers: list[ds.AnswerRecord] = []
    corpus: list[ds.Document] = []
    qrels = ds.Qrels()
    embedding_lines = [f"MELON-EMB v1 {EMBED_DIM}"]

    ordinal = 0
    for t in range(N_TOPICS):
        topic_id = f"T{t:02d}"
        topic_token = f"topic{t:02d}"
        topics.append(ds.Topic(topic_id, f"{topic_token} information"))

        for j in range(2):
            uid = f"{t:02d}{j}"
            kw = _keywords(uid)
            facet_id = f"F{uid}"
            doc_id = f"D{uid}"
            facets.append(ds.Facet(facet_id, topic_id, f"find material covering {kw[0]}"))
            # tf profile 3/2/2/1/1 pins the keyword order: kw[0] first,
            # then kw[1] < kw[2] and kw[3] < kw[4] lexicographically
            text = (
                f"{topic_token} {kw[0]} {kw[0]} {kw[0]} {kw[1]} {kw[1]} "
                f"{kw[2]} {kw[2]} {kw[3]} {kw[4]}"
            )
            corpus.append(ds.Document(doc_id, ordinal, text))
            ordinal += 1
            qrels.by_facet[facet_id] = {doc_id: 2}

            question_id = f"Q{uid}"
            good_img = f"img{uid}good"
            alt_img = f"img{uid}alt"
            questions.append(
                ds.ClarifyingQuestion(
                    question_id,
                    topic_id,
                    f"would you like more details on one {topic_token} option",
                    source="set1" if j == 0 else "set2",
                    multimodal=True,
                    images=(
                        ds.ImageRecord(good_img, f"https://example.invalid/{good_img}.jpg", f"{kw[0]} {kw[1]} {kw[2]}"),
                        ds.ImageRecord(alt_img, f"https://example.invalid/{alt_img}.jpg", f"zz{uid}x zz{uid}y"),
                    ),
                )
            )
            # question aligned with its good image, alternates orthogonal
            embedding_lines.append(f"Q{uid}\t1 0 0 0 0 0 0 0")
            embedding_lines.append(f"{good_img}\t0.9 0.1 0 0 0 0 0 0")
            embedding_lines.append(f"{alt_img}\t0 1 0 0 0 0 0 0")

        for j in range(2):
            uid = f"{t:02d}{j}"
            doc_id = f"X{uid}"
            # short documents with the topic token rank above the relevant
            # ones under query-only BM25
            text = f"{topic_token} jk{uid}a jk{uid}a jk{uid}b"
            corpus.append(ds.Document(doc_id, ordinal, text))
            ordinal += 1

    for i in range(FILLERS):
        corpus.append(ds.Document(f"Z{i:03d}", ordinal, f"aa{i:03d}x aa{i:03d}y aa{i:03d}z"))
        ordinal += 1

    dataset = ds.Dataset(topics, facets, questions, answers)
    return dataset, corpus, qrels, embedding_lines


def seed_answers(
    dataset: ds.Dataset, assignment: dict[str, str]
) -> ds.Dataset:
    """Attach one answer per facet: train answers carry the relevant
    document's top keywords, validation/test answers are deliberately vague."""
    answers: list[ds.AnswerRecord] = []
    for facet in dataset.facets:
        uid = facet.id[1:]
        kw = _keywords(uid)
        question_id = f"Q{uid}"
        if assignment[facet.id] == "train":
            text = f"yes i mean the one with {kw[0]} and {kw[1]}"
        else:
            text = "yes exactly that one please"
        answers.append(ds.AnswerRecord(facet.topic_id, facet.id, question_id, text))
    return ds.Dataset(list(dataset.topics), list(dataset.facets), list(dataset.questions), answers)


def write_benchmark(out_dir: str | Path, seed: int = 13, ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)) -> dict[str, Path]:
    """Write dataset, corpus, qrels, embeddings and split files; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset, corpus, qrels, embedding_lines = build_benchmark()
    assignment = ds.split_facets(dataset, ratios, seed)
    dataset = seed_answers(dataset, assignment)

    paths = {
        "dataset": out / "dataset.json",
        "corpus": out / "corpus.jsonl",
        "qrels": out / "qrels.txt",
        "embeddings": out / "embeddings.txt",
        "split": out / "split.json",
    }
    ds.save_dataset(dataset, paths["dataset"])
    ds.save_corpus(corpus, paths["corpus"])
    ds.save_qrels(qrels, paths["qrels"])
    paths["embeddings"].write_text("\n".join(embedding_lines) + "\n", encoding="utf-8")
    ds.save_split(assignment, paths["split"])
    return paths


def write_config(
    out_dir: str | Path,
    benchmark_paths: dict[str, Path],
    mode: str,
    eval_split: str = "all",
    seed: int = 13,
    **overrides,
) -> Path:
    """Write a run config for the synthetic benchmark; returns its path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shared = benchmark_paths["dataset"].parent  # index/identifiers/scorer are shared across modes
    config = {
        "dataset": str(benchmark_paths["dataset"]),
        "corpus": str(benchmark_paths["corpus"]),
        "qrels": str(benchmark_paths["qrels"]),
        "embeddings": str(benchmark_paths["embeddings"]),
        "split": str(benchmark_paths["split"]),
        "index_path": str(shared / "index.json"),
        "identifier_table": str(shared / "identifiers.jsonl"),
        "scorer_path": str(shared / "scorer.json"),
        "output_dir": str(out),
        "seed": seed,
        "mode": mode,
        "eval_split": eval_split,
        "identifier_strategy": "doc_k",
        "images_per_question": 1,
    }
    config.update({k: (str(v) if isinstance(v, Path) else v) for k, v in overrides.items()})
    path = out / "config.json"
    path.write_text(json.dumps(config, indent=1, sort_keys=True), encoding="utf-8")
    return path
