"""Acceptance suite: one test per criterion, each printing a pass line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines as they
pass. Criterion 6 is conditional on the released dataset files (see
test_melon.py for the environment variables).
"""

import math
import random
import time

import pytest

from clarifyir import dataset as ds
from clarifyir import evaluation as ev
from clarifyir import genret, harness, lexical
from clarifyir import multimodal as mm

import numpy as np

from conftest import make_run_config
from test_evaluation import brute_force_metrics, random_case, t_sf_oracle
from test_genret import HashScorer, enumerate_paths, random_identifiers
from test_melon import needs_melon

import test_melon


def ok(n: int, text: str) -> None:
    print(f"PASS  criterion {n}: {text}")


def test_criterion_01_metric_oracle_equivalence():
    start = time.perf_counter()
    rng = random.Random(11)
    for _ in range(1000):
        ranking, grades, g_max = random_case(rng)
        record = ev.evaluate_ranking(ranking, grades, g_max)
        oracle = brute_force_metrics(ranking, grades, g_max)
        for name in ev.METRIC_NAMES:
            assert abs(record[name] - oracle[name]) <= 1e-9, name

    hand = ev.evaluate_ranking(["d0", "d1"], {"d1": 1}, g_max=1)
    assert abs(hand["ndcg@3"] - 1 / math.log2(3)) <= 1e-9
    assert abs(ev.evaluate_ranking(["d1"], {"d1": 1}, g_max=1)["err@1"] - 0.5) <= 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0, f"took {elapsed:.1f}s"
    ok(1, f"1000 random fixtures match the brute-force metric oracle within 1e-9 ({elapsed:.2f}s)")


def test_criterion_02_beam_exhaustive_equivalence():
    start = time.perf_counter()
    for seed in range(200):
        rng = random.Random(seed)
        trie = genret.build_trie(random_identifiers(rng, max_leaves=50, max_depth=6))
        scorer = HashScorer(seed)
        beams = genret.constrained_beam_search(scorer, [], trie, beam_size=trie.doc_count)
        assert beams == enumerate_paths(trie, scorer)[: trie.doc_count]
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    ok(2, f"200 random tries: beam ordering equals exhaustive enumeration exactly ({elapsed:.2f}s)")


def test_criterion_03_constraint_soundness():
    emitted = resolved = 0
    for seed in range(300):
        rng = random.Random(10_000 + seed)
        trie = genret.build_trie(random_identifiers(rng, max_leaves=30, max_depth=6))
        beam = rng.randint(1, max(1, trie.doc_count))  # narrow beams exercise pruning
        for sequence, _ in genret.constrained_beam_search(HashScorer(seed), ["c"], trie, beam_size=beam):
            emitted += 1
            trie.resolve(sequence)  # raises on any constraint violation
            resolved += 1
    assert emitted > 0
    assert resolved == emitted
    ok(3, f"{resolved}/{emitted} emitted sequences resolve in the trie (zero tolerance)")


def test_criterion_04_bm25_fixture():
    docs = [ds.Document("d1", 0, "cat sat"), ds.Document("d2", 1, "dog sat sat")]
    index = lexical.build_index(docs)
    hand = math.log(1 + (2 - 2 + 0.5) / (2 + 0.5)) * (1 * (1.2 + 1)) / (1 + 1.2 * (1 - 0.75 + 0.75 * (2 / 2.5)))
    assert abs(lexical.bm25_score(index, ["sat"], "d1") - hand) <= 1e-6
    assert [d for d, _ in lexical.search(index, ["sat"], k=100)] == ["d2", "d1"]
    ok(4, f"two-document corpus: score(d1)={hand:.6f} reproduced within 1e-6, ranking [d2, d1]")


def test_criterion_05_split_reproduction():
    data = ds.Dataset([ds.Topic("t", "q")], [ds.Facet(f"f{i:04d}", "t", "x") for i in range(1070)], [], [])
    first = ds.split_facets(data, (0.8, 0.1, 0.1), seed=42)
    counts = {name: sum(1 for v in first.values() if v == name) for name in ds.SPLIT_NAMES}
    assert counts == {"train": 856, "validation": 107, "test": 107}
    assert ds.split_facets(data, (0.8, 0.1, 0.1), seed=42) == first
    ok(5, "1070 facets at 0.8/0.1/0.1 split exactly 856/107/107; same seed is identical")


@needs_melon
def test_criterion_06_released_dataset_checks():
    melon = ds.load_dataset(test_melon.MELON_PATH)
    stats = ev.dataset_stats(melon)
    assert (stats.topics, stats.facets, stats.questions) == (298, 1070, 4969)
    assert (stats.set1_questions, stats.set2_questions) == (3365, 1604)
    assert (stats.images, stats.answers) == (14869, 18533)
    answers = ev.answer_stats(list(melon.answers))
    assert answers.avg_terms == pytest.approx(10.76, abs=0.01)
    assert answers.std_terms == pytest.approx(4.73, abs=0.01)
    assert answers.pct_yes_no == pytest.approx(3.06, abs=0.01)
    assert answers.vocabulary_size == 8622
    ok(6, "released dataset reproduces the published counts and answer statistics")


def test_criterion_07_weak_labeling():
    assert mm.weak_label((0.4, 0.4, 0.4), (0.5, 0.5, 0.5))[1] == "VEQ"
    assert mm.weak_label((0.4, 0.4, 0.4), (0.4, 0.4, 0.4))[1] == "TEQ"
    assert mm.weak_label((0.45, 0.45, 0.45), (0.6, 0.3, 0.3))[1] == "TEQ"
    rng = random.Random(21)
    agree = 0
    for _ in range(500):
        tor = tuple(rng.random() for _ in range(3))
        mur = tuple(rng.random() for _ in range(3))
        _, label = mm.weak_label(tor, mur)
        expected = "VEQ" if (sum(mur) - sum(tor)) / 3 > 0 else "TEQ"
        agree += label == expected
    assert agree == 500
    ok(7, "labels VEQ/TEQ/TEQ on the constructed triples; 500/500 randomized sign agreements")


def test_criterion_08_image_selection():
    rng = np.random.default_rng(31)
    for _ in range(1000):
        dim = 8
        n = int(rng.integers(1, 7))
        vectors = {"q": rng.normal(size=dim)}
        for i in range(n):
            vectors[f"i{i}"] = rng.normal(size=dim)
        vectors = {k: v / np.linalg.norm(v) for k, v in vectors.items()}
        store = mm.EmbeddingStore(dim, vectors)
        candidates = [f"i{i}" for i in range(n)]
        chosen = mm.select_images(store, "q", candidates, k=1)
        brute = sorted(candidates, key=lambda c: (-float(np.dot(vectors["q"], vectors[c])), c))[0]
        assert chosen == [brute]
    # explicit tie: identical vectors resolve to the smaller id
    store = mm.EmbeddingStore(2, {"q": np.array([1.0, 0.0]), "zz": np.array([1.0, 0.0]), "aa": np.array([1.0, 0.0])})
    assert mm.select_images(store, "q", ["zz", "aa"], k=1) == ["aa"]
    ok(8, "1000 random stores: top-1 equals brute-force cosine argmax; ties pick the smaller id")


def test_criterion_09_end_to_end_memorization(benchmark):
    start = time.perf_counter()
    train_config = make_run_config(benchmark, "acc9_train", mode="gen_rerank_text_only", eval_split="train")
    train_report = harness.run_experiment(train_config)
    assert train_report.macro["p@1"] == 1.0

    mrr = {}
    for mode in ("original_query", "gen_rerank_text_only", "gen_rerank_multimodal"):
        config = make_run_config(benchmark, f"acc9_{mode}", mode=mode, eval_split="all")
        mrr[mode] = harness.run_experiment(config).macro["mrr"]
    assert mrr["gen_rerank_multimodal"] >= mrr["gen_rerank_text_only"] >= mrr["original_query"]
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    ok(
        9,
        "train-facet P@1 = 1.00; macro-MRR ordering "
        f"{mrr['gen_rerank_multimodal']:.3f} >= {mrr['gen_rerank_text_only']:.3f} >= "
        f"{mrr['original_query']:.3f} ({elapsed:.1f}s)",
    )


def test_criterion_10_significance():
    a = [0.9, 0.8, 0.7, 0.85, 0.95]
    b = [0.5, 0.4, 0.45, 0.5, 0.6]
    result = ev.paired_t_test(a, b, comparisons=1)
    diffs = [x - y for x, y in zip(a, b)]
    mean = sum(diffs) / len(diffs)
    var = sum((d - mean) ** 2 for d in diffs) / (len(diffs) - 1)
    t = mean / math.sqrt(var / len(diffs))
    independent_p = 2 * t_sf_oracle(abs(t), len(diffs) - 1)
    assert abs(result.p_raw - independent_p) <= 1e-6
    identical = ev.paired_t_test(a, a)
    assert identical.p_raw == 1.0
    ok(10, f"fixed 5-point fixture: p={result.p_raw:.9f} matches the independent oracle within 1e-6")


def test_criterion_11_report_determinism(benchmark):
    config = make_run_config(benchmark, "acc11", mode="gen_rerank_multimodal", eval_split="all")
    harness.run_experiment(config)
    first = config.report_body_file().read_bytes()
    harness.run_experiment(config)
    second = config.report_body_file().read_bytes()
    assert first == second
    ok(11, f"re-running the same config yields byte-identical report bodies ({len(first)} bytes)")
