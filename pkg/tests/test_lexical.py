import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clarifyir import dataset as ds
from clarifyir import lexical

# hand-derived from the closed formula: idf = ln(1.2), tf=1, len=2, avg=2.5
BM25_D1_SAT = math.log(1.2) * (1 * 2.2) / (1 + 1.2 * (0.25 + 0.75 * 0.8))


def test_tokenize_rules():
    assert lexical.tokenize("Bike repair!") == ["bike", "repair"]
    assert lexical.tokenize("") == []
    assert lexical.tokenize("USS-Cole 2000") == ["uss", "cole", "2000"]
    assert lexical.tokenize("under_score") == ["under", "score"]
    assert all(tok for tok in lexical.tokenize("  ... a..b ! "))


class TestBuildIndex:
    def test_direct_counts(self, two_doc_index):
        _, index = two_doc_index
        assert index.df("sat") == 2
        assert index.doc_len["d2"] == 3
        assert index.avg_len == 2.5
        assert index.cf("sat") == 3

    def test_empty_corpus_allowed(self):
        index = lexical.build_index([])
        assert index.n_docs == 0
        assert lexical.search(index, ["x"], k=5) == []

    def test_duplicate_doc_id(self):
        docs = [ds.Document("d1", 0, "a"), ds.Document("d1", 1, "b")]
        with pytest.raises(ValueError, match="duplicate document id"):
            lexical.build_index(docs)

    def test_rebuild_identical(self, two_doc_index):
        docs, index = two_doc_index
        again = lexical.build_index(docs)
        assert again.postings == index.postings
        assert again.doc_len == index.doc_len


class TestBm25:
    def test_hand_fixture(self, two_doc_index):
        _, index = two_doc_index
        assert lexical.bm25_score(index, ["sat"], "d1") == pytest.approx(BM25_D1_SAT, abs=1e-9)

    def test_absent_token_contributes_zero(self, two_doc_index):
        _, index = two_doc_index
        base = lexical.bm25_score(index, ["sat"], "d1")
        assert lexical.bm25_score(index, ["sat", "zebra"], "d1") == base

    def test_empty_query_scores_zero(self, two_doc_index):
        _, index = two_doc_index
        assert lexical.bm25_score(index, [], "d1") == 0.0
        assert lexical.bm25_score(index, [], "d2") == 0.0

    def test_unknown_doc(self, two_doc_index):
        _, index = two_doc_index
        with pytest.raises(KeyError):
            lexical.bm25_score(index, ["sat"], "nope")

    def test_monotone_in_tf(self):
        # component formula with everything but tf frozen
        k1, b, length, avg, idf = 1.2, 0.75, 5, 5.0, 0.4
        values = [idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * length / avg)) for tf in range(1, 12)]
        assert all(nxt >= prev for prev, nxt in zip(values, values[1:]))


class TestSearch:
    def test_ranking_fixture(self, two_doc_index):
        _, index = two_doc_index
        ranked = lexical.search(index, ["sat"], k=100)
        assert [d for d, _ in ranked] == ["d2", "d1"]

    def test_k_prefix(self, two_doc_index):
        _, index = two_doc_index
        assert lexical.search(index, ["sat"], k=1) == lexical.search(index, ["sat"], k=100)[:1]

    def test_no_hits_empty(self, two_doc_index):
        _, index = two_doc_index
        assert lexical.search(index, ["zebra"], k=10) == []

    def test_scores_match_pointwise_formula(self, two_doc_index):
        _, index = two_doc_index
        for doc_id, score in lexical.search(index, ["sat", "dog"], k=10):
            assert score == pytest.approx(lexical.bm25_score(index, ["sat", "dog"], doc_id), abs=1e-12)

    def test_tie_broken_by_ordinal(self):
        docs = [ds.Document("b", 1, "same text"), ds.Document("a", 0, "same text")]
        index = lexical.build_index(docs)
        ranked = lexical.search(index, ["same"], k=10)
        assert [d for d, _ in ranked] == ["a", "b"]
        assert ranked[0][1] == ranked[1][1]


class TestQl:
    def test_hand_fixture(self, two_doc_index):
        _, index = two_doc_index
        # (tf + mu*cf/|C|) / (len + mu) with cf=3, |C|=5, mu=10
        assert lexical.ql_score(index, [(["sat"], 1.0)], "d1", mu=10) == pytest.approx(math.log(7 / 12), abs=1e-12)
        assert lexical.ql_score(index, [(["sat"], 1.0)], "d2", mu=10) == pytest.approx(math.log(8 / 13), abs=1e-12)

    def test_duplicate_fields_halved(self, two_doc_index):
        _, index = two_doc_index
        single = lexical.ql_score(index, [(["sat"], 1.0)], "d1", mu=10)
        double = lexical.ql_score(index, [(["sat"], 0.5), (["sat"], 0.5)], "d1", mu=10)
        assert double == pytest.approx(single, abs=1e-12)

    def test_weight_normalization(self, two_doc_index):
        _, index = two_doc_index
        a = lexical.ql_score(index, [(["sat"], 2.0), (["dog"], 2.0)], "d2", mu=10)
        b = lexical.ql_score(index, [(["sat"], 0.5), (["dog"], 0.5)], "d2", mu=10)
        assert a == pytest.approx(b, abs=1e-12)

    def test_bad_weights(self, two_doc_index):
        _, index = two_doc_index
        with pytest.raises(ValueError):
            lexical.ql_score(index, [(["sat"], 0.0)], "d1", mu=10)
        with pytest.raises(ValueError):
            lexical.ql_score(index, [(["sat"], -1.0), (["dog"], 2.0)], "d1", mu=10)

    def test_ql_search_covers_all_docs(self, two_doc_index):
        _, index = two_doc_index
        ranked = lexical.search(index, ["sat"], k=10, model="ql", mu=10)
        assert len(ranked) == 2
        assert [d for d, _ in ranked] == ["d2", "d1"]

    def test_ql_rank_weighted_fields(self, two_doc_index):
        _, index = two_doc_index
        ranked = lexical.ql_rank(index, [(["cat"], 2.0), (["sat"], 1.0)], k=10, mu=10)
        assert ranked[0][0] == "d1"


class TestPersistence:
    def test_round_trip_scores_bit_faithful(self, two_doc_index, tmp_path):
        _, index = two_doc_index
        path = tmp_path / "index.json"
        lexical.save_index(index, path)
        loaded = lexical.load_index(path)
        for doc in ("d1", "d2"):
            assert lexical.bm25_score(loaded, ["sat", "dog"], doc) == lexical.bm25_score(index, ["sat", "dog"], doc)
            assert lexical.ql_score(loaded, [(["sat"], 1.0)], doc) == lexical.ql_score(index, [(["sat"], 1.0)], doc)

    def test_version_header_checked(self, tmp_path):
        path = tmp_path / "index.json"
        path.write_text('{"format": "SOMETHING-ELSE v9"}')
        with pytest.raises(ValueError, match="CLARIFYIR-IDX v1"):
            lexical.load_index(path)


def brute_force_bm25(doc_tokens: dict[str, list[str]], query: list[str], doc_id: str, k1=1.2, b=0.75) -> float:
    """Straight-line re-derivation from raw token lists (test oracle)."""
    n = len(doc_tokens)
    avg = sum(len(toks) for toks in doc_tokens.values()) / n
    score = 0.0
    for token in query:
        df = sum(1 for toks in doc_tokens.values() if token in toks)
        tf = doc_tokens[doc_id].count(token)
        if df == 0 or tf == 0:
            continue
        idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
        score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(doc_tokens[doc_id]) / avg))
    return score


def brute_force_ql(doc_tokens: dict[str, list[str]], query: list[str], doc_id: str, mu: float) -> float:
    total = sum(len(toks) for toks in doc_tokens.values())
    score = 0.0
    for token in query:
        cf = sum(toks.count(token) for toks in doc_tokens.values())
        if cf == 0:
            continue
        tf = doc_tokens[doc_id].count(token)
        score += math.log((tf + mu * cf / total) / (len(doc_tokens[doc_id]) + mu))
    return score


corpora = st.dictionaries(
    keys=st.sampled_from([f"doc{i}" for i in range(8)]),
    values=st.lists(st.sampled_from("abcdef"), min_size=1, max_size=8),
    min_size=1,
    max_size=8,
)
queries = st.lists(st.sampled_from("abcdefgh"), min_size=0, max_size=5)


@settings(max_examples=200, deadline=None)
@given(doc_tokens=corpora, query=queries)
def test_bm25_matches_brute_force(doc_tokens, query):
    """Exact formula agreement with an independent recomputation, 1e-9."""
    docs = [ds.Document(d, i, " ".join(toks)) for i, (d, toks) in enumerate(sorted(doc_tokens.items()))]
    index = lexical.build_index(docs)
    for doc_id in doc_tokens:
        expected = brute_force_bm25(doc_tokens, query, doc_id)
        assert lexical.bm25_score(index, query, doc_id) == pytest.approx(expected, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(doc_tokens=corpora, query=queries, mu=st.sampled_from([0.5, 10.0, 2000.0]))
def test_ql_matches_brute_force(doc_tokens, query, mu):
    docs = [ds.Document(d, i, " ".join(toks)) for i, (d, toks) in enumerate(sorted(doc_tokens.items()))]
    index = lexical.build_index(docs)
    for doc_id in doc_tokens:
        expected = brute_force_ql(doc_tokens, query, doc_id, mu)
        assert lexical.ql_score(index, [(query, 1.0)], doc_id, mu=mu) == pytest.approx(expected, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(doc_tokens=corpora, query=queries, k=st.integers(min_value=1, max_value=10))
def test_search_prefix_and_order(doc_tokens, query, k):
    """search(k) is a prefix of search(k'); ordering is score desc, ordinal asc."""
    docs = [ds.Document(d, i, " ".join(toks)) for i, (d, toks) in enumerate(sorted(doc_tokens.items()))]
    index = lexical.build_index(docs)
    full = lexical.search(index, query, k=len(docs) + 5)
    assert lexical.search(index, query, k=k) == full[:k]
    keys = [(-score, index.ordinal[doc]) for doc, score in full]
    assert keys == sorted(keys)
    assert len({d for d, _ in full}) == len(full)


@settings(max_examples=50, deadline=None)
@given(doc_tokens=corpora)
def test_rebuild_deterministic(doc_tokens):
    docs = [ds.Document(d, i, " ".join(toks)) for i, (d, toks) in enumerate(sorted(doc_tokens.items()))]
    a, b = lexical.build_index(docs), lexical.build_index(docs)
    assert a.postings == b.postings and a.doc_len == b.doc_len and a.total_len == b.total_len


def test_index_stats_vs_counter(two_doc_index):
    docs, index = two_doc_index
    counts = Counter()
    for doc in docs:
        counts.update(set(lexical.tokenize(doc.text)))
    for token, df in counts.items():
        assert index.df(token) == df
