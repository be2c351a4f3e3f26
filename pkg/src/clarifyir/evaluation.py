"""Ranking metrics, macro aggregation, paired significance tests, corpus stats.

All operations are pure and safe to call concurrently. Metric definitions:

* P@k    = |{top-k with grade > 0}| / k
* RR     = 1 / rank of first grade > 0 (0 if none)
* DCG@k  = sum_{r<=k} (2^g_r - 1) / log2(r + 1); nDCG@k = DCG@k / IDCG@k
* ERR@k  = sum_{r<=k} (1/r) R_r prod_{i<r} (1 - R_i), R = (2^g - 1) / 2^g_max

Unjudged documents count as grade 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import stats as scipy_stats

from .dataset import AnswerRecord, Dataset
from .lexical import tokenize

METRIC_NAMES = (
    "mrr",
    "p@1",
    "p@3",
    "p@5",
    "ndcg@1",
    "ndcg@3",
    "ndcg@5",
    "err@1",
    "err@3",
    "err@5",
)

CUTOFFS = (1, 3, 5)

SIGNIFICANCE_ALPHA = 0.001

MetricsRecord = dict  # metric name -> value in [0, 1]


@dataclass(frozen=True)
class SignificanceResult:
    t_statistic: float
    p_raw: float
    p_adjusted: float  # min(1, p_raw * comparisons)
    significant: bool  # adjusted p < SIGNIFICANCE_ALPHA


@dataclass(frozen=True)
class AnswerStats:
    avg_terms: float
    std_terms: float
    median_terms: float
    max_terms: int
    pct_yes_no: float  # percentage in [0, 100]
    vocabulary_size: int


@dataclass(frozen=True)
class DatasetStats:
    topics: int
    facets: int
    questions: int
    set1_questions: int
    set2_questions: int
    images: int
    answers: int
    avg_questions_per_topic: float
    std_questions_per_topic: float
    avg_terms_per_question: float
    std_terms_per_question: float
    avg_images_per_question: float
    std_images_per_question: float
    avg_answers_per_question: float
    std_answers_per_question: float


def _population_std(values: list[float], mean: float) -> float:
    if not values:
        return 0.0
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


def _gain(grade: int, exponential: bool) -> float:
    return (2.0**grade - 1.0) if exponential else float(grade)


def _dcg(grades: list[int], k: int, exponential: bool) -> float:
    return sum(_gain(g, exponential) / math.log2(r + 1) for r, g in enumerate(grades[:k], start=1))


def evaluate_ranking(
    ranking: list[str],
    grades: dict[str, int],
    g_max: int,
    exponential_gain: bool = True,
) -> MetricsRecord:
    """Compute the full metric record for one ranked list against graded judgments."""
    if len(set(ranking)) != len(ranking):
        raise ValueError("ranking contains duplicate document ids")
    observed_max = max(grades.values(), default=0)
    if g_max < observed_max:
        raise ValueError(f"g_max {g_max} is below the maximum observed grade {observed_max}")

    ranked_grades = [grades.get(d, 0) for d in ranking]
    record: MetricsRecord = {}

    rr = 0.0
    for rank, g in enumerate(ranked_grades, start=1):
        if g > 0:
            rr = 1.0 / rank
            break
    record["mrr"] = rr

    ideal = sorted(grades.values(), reverse=True)
    for k in CUTOFFS:
        record[f"p@{k}"] = sum(1 for g in ranked_grades[:k] if g > 0) / k
        idcg = _dcg(ideal, k, exponential_gain)
        dcg = _dcg(ranked_grades, k, exponential_gain)
        record[f"ndcg@{k}"] = dcg / idcg if idcg > 0 else 0.0

        err = 0.0
        continue_prob = 1.0
        for rank, g in enumerate(ranked_grades[:k], start=1):
            satisfy = (2.0**g - 1.0) / (2.0**g_max) if g_max > 0 else 0.0
            err += continue_prob * satisfy / rank
            continue_prob *= 1.0 - satisfy
        record[f"err@{k}"] = err

    return record


def macro_average(per_facet: list[MetricsRecord]) -> MetricsRecord:
    """Arithmetic mean of each metric over facets."""
    if not per_facet:
        raise ValueError("cannot average an empty list of metric records")
    keys = per_facet[0].keys()
    return {k: sum(rec[k] for rec in per_facet) / len(per_facet) for k in keys}


def paired_t_test(a: list[float], b: list[float], comparisons: int = 1) -> SignificanceResult:
    """Two-tailed paired t-test with Bonferroni adjustment.

    Zero-variance differences are handled as limits: all-zero differences
    give t=0, p=1; a constant nonzero difference gives |t| -> inf, p -> 0.
    """
    if len(a) != len(b):
        raise ValueError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least 2 observations")
    if comparisons < 1:
        raise ValueError("comparisons must be >= 1")

    diffs = [x - y for x, y in zip(a, b)]
    mean_d = sum(diffs) / n
    var_d = sum((d - mean_d) ** 2 for d in diffs) / (n - 1)

    if var_d == 0.0:
        if mean_d == 0.0:
            t_stat, p_raw = 0.0, 1.0
        else:
            t_stat, p_raw = math.copysign(math.inf, mean_d), 0.0
    else:
        t_stat = mean_d / math.sqrt(var_d / n)
        p_raw = 2.0 * float(scipy_stats.t.sf(abs(t_stat), df=n - 1))

    p_adjusted = min(1.0, p_raw * comparisons)
    return SignificanceResult(t_stat, p_raw, p_adjusted, p_adjusted < SIGNIFICANCE_ALPHA)


def answer_stats(answers: list[AnswerRecord]) -> AnswerStats:
    """Length, yes/no rate and vocabulary statistics of an answer collection.

    A yes/no answer is one whose tokenization is exactly one token equal to
    "yes" or "no". Standard deviation is the population std.
    """
    if not answers:
        raise ValueError("answer list is empty")
    term_counts: list[int] = []
    vocabulary: set[str] = set()
    yes_no = 0
    for a in answers:
        tokens = tokenize(a.text)
        term_counts.append(len(tokens))
        vocabulary.update(tokens)
        if len(tokens) == 1 and tokens[0] in ("yes", "no"):
            yes_no += 1
    avg = sum(term_counts) / len(term_counts)
    ordered = sorted(term_counts)
    mid = len(ordered) // 2
    median = float(ordered[mid]) if len(ordered) % 2 == 1 else (ordered[mid - 1] + ordered[mid]) / 2.0
    return AnswerStats(
        avg_terms=avg,
        std_terms=_population_std([float(c) for c in term_counts], avg),
        median_terms=median,
        max_terms=max(term_counts),
        pct_yes_no=100.0 * yes_no / len(answers),
        vocabulary_size=len(vocabulary),
    )


def dataset_stats(dataset: Dataset) -> DatasetStats:
    """Counts and per-question/per-topic averages of a loaded dataset."""
    questions_per_topic = {t.id: 0 for t in dataset.topics}
    for q in dataset.questions:
        questions_per_topic[q.topic_id] += 1
    answers_per_question = {q.id: 0 for q in dataset.questions}
    for a in dataset.answers:
        answers_per_question[a.question_id] += 1

    terms = [float(len(tokenize(q.text))) for q in dataset.questions]
    images = [float(len(q.images)) for q in dataset.questions]
    qpt = [float(c) for c in questions_per_topic.values()]
    apq = [float(c) for c in answers_per_question.values()]

    def avg(values: list[float]) -> float:
        return sum(values) / len(values) if values else 0.0

    avg_terms, avg_images, avg_qpt, avg_apq = avg(terms), avg(images), avg(qpt), avg(apq)
    return DatasetStats(
        topics=len(dataset.topics),
        facets=len(dataset.facets),
        questions=len(dataset.questions),
        set1_questions=sum(1 for q in dataset.questions if q.source == "set1"),
        set2_questions=sum(1 for q in dataset.questions if q.source == "set2"),
        images=sum(len(q.images) for q in dataset.questions),
        answers=len(dataset.answers),
        avg_questions_per_topic=avg_qpt,
        std_questions_per_topic=_population_std(qpt, avg_qpt),
        avg_terms_per_question=avg_terms,
        std_terms_per_question=_population_std(terms, avg_terms),
        avg_images_per_question=avg_images,
        std_images_per_question=_population_std(images, avg_images),
        avg_answers_per_question=avg_apq,
        std_answers_per_question=_population_std(apq, avg_apq),
    )


def metrics_tsv(rows: list[tuple[str, MetricsRecord]]) -> str:
    """Render macro metric records as TSV, values x100 with two decimals."""
    header = "system\t" + "\t".join(METRIC_NAMES)
    lines = [header]
    for system, record in rows:
        cells = [f"{100.0 * record[m]:.2f}" for m in METRIC_NAMES]
        lines.append(system + "\t" + "\t".join(cells))
    return "\n".join(lines) + "\n"
