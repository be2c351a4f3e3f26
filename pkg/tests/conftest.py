"""Shared fixtures: hand corpora and the synthetic end-to-end benchmark."""

from __future__ import annotations

from pathlib import Path

import pytest

from clarifyir import dataset as ds
from clarifyir import harness, lexical, synthetic

BENCH_SEED = 13


@pytest.fixture
def two_doc_index():
    docs = [ds.Document("d1", 0, "cat sat"), ds.Document("d2", 1, "dog sat sat")]
    return docs, lexical.build_index(docs)


@pytest.fixture
def tiny_dataset() -> ds.Dataset:
    topics = [ds.Topic("t1", "bike repair")]
    facets = [ds.Facet("f1", "t1", "fix a skipping chain")]
    questions = [
        ds.ClarifyingQuestion(
            "q1",
            "t1",
            "do you want to see the parts",
            source="set1",
            multimodal=True,
            images=(ds.ImageRecord("i1", "https://example.invalid/i1.jpg", "bike chain closeup"),),
        )
    ]
    answers = [ds.AnswerRecord("t1", "f1", "q1", "yes the chain part")]
    return ds.Dataset(topics, facets, questions, answers)


@pytest.fixture(scope="session")
def benchmark(tmp_path_factory) -> dict:
    """Synthetic benchmark with all shared artifacts built once per session."""
    root = tmp_path_factory.mktemp("benchmark")
    paths = synthetic.write_benchmark(root / "data", seed=BENCH_SEED)
    build_cfg_path = synthetic.write_config(root / "build", paths, mode="original_query", seed=BENCH_SEED)
    build_cfg = harness.load_config(build_cfg_path)
    harness.step_index(build_cfg)
    harness.step_identifiers(build_cfg)
    harness.step_train_scorer(build_cfg)
    return {"root": root, "paths": paths, "build_config": build_cfg}


def make_run_config(benchmark: dict, name: str, mode: str, **overrides) -> harness.ExperimentConfig:
    path = synthetic.write_config(
        Path(benchmark["root"]) / name, benchmark["paths"], mode=mode, seed=BENCH_SEED, **overrides
    )
    return harness.load_config(path)
