"""End-to-end experiment orchestration: build steps, retrieval runs, reports.

A run iterates the dataset's (facet, question, answer) samples, builds a
mode-dependent ranking per sample, averages metrics per facet, and writes a
deterministic report. Facet iterations are independent; all writes go to
the per-run output directory.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import dataset as ds
from . import evaluation as ev
from . import genret
from . import lexical
from . import multimodal as mm

log = logging.getLogger(__name__)

MODES = ("original_query", "lexical_baseline", "gen_rerank_text_only", "gen_rerank_multimodal")
CLASSIFICATION_MODES = ("off", "oracle_weak_labels", "reference_classifier")
FIRST_STAGE_MODELS = ("bm25", "ql")
FIRST_STAGE_TEXTS = ("query", "query_question_answer")
TRIE_SCOPES = ("candidates", "corpus")
EVAL_SPLITS = ("train", "validation", "test", "all")

ARTIFACT_VERSIONS = {
    "index": lexical.INDEX_FORMAT,
    "scorer": genret.SCORER_FORMAT,
    "embeddings": mm.EMBEDDING_FORMAT,
    "classifier": mm.CLASSIFIER_FORMAT,
}


class HarnessError(RuntimeError):
    """Runtime failure with a short machine-parsable code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class ExperimentConfig:
    """One experiment run; loaded from a single JSON file, one file per run."""

    dataset: Path
    corpus: Path
    qrels: Path
    output_dir: Path
    embeddings: Path | None = None
    split: Path | None = None
    index_path: Path | None = None
    identifier_table: Path | None = None
    scorer_path: Path | None = None
    weak_labels: Path | None = None
    classifier_path: Path | None = None
    baseline_report: Path | None = None
    seed: int = 13
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    bm25_k1: float = lexical.DEFAULT_K1
    bm25_b: float = lexical.DEFAULT_B
    ql_mu: float = lexical.DEFAULT_MU
    ql_weights: tuple[float, float, float] = (2.0, 1.0, 1.0)  # query, question, answer
    identifier_strategy: str = "doc_k"
    beam_size: int = genret.DEFAULT_BEAM_SIZE
    first_stage_k: int = 100
    first_stage_model: str = "bm25"
    first_stage_text: str = "query"
    trie_scope: str = "candidates"
    scorer_lambdas: tuple[float, float, float] = genret.DEFAULT_LAMBDAS
    mode: str = "original_query"
    classification: str = "off"
    images_per_question: int = 1
    eval_split: str = "test"

    def __post_init__(self) -> None:
        for name in ("seed", "beam_size", "first_stage_k", "images_per_question"):
            if not isinstance(getattr(self, name), int):
                raise HarnessError("config", f"{name} must be an integer")
        if self.mode not in MODES:
            raise HarnessError("config", f"mode must be one of {MODES}, got '{self.mode}'")
        if self.classification not in CLASSIFICATION_MODES:
            raise HarnessError("config", f"classification must be one of {CLASSIFICATION_MODES}")
        if self.first_stage_model not in FIRST_STAGE_MODELS:
            raise HarnessError("config", f"first_stage_model must be one of {FIRST_STAGE_MODELS}")
        if self.first_stage_text not in FIRST_STAGE_TEXTS:
            raise HarnessError("config", f"first_stage_text must be one of {FIRST_STAGE_TEXTS}")
        if self.trie_scope not in TRIE_SCOPES:
            raise HarnessError("config", f"trie_scope must be one of {TRIE_SCOPES}")
        if self.eval_split not in EVAL_SPLITS:
            raise HarnessError("config", f"eval_split must be one of {EVAL_SPLITS}")
        if self.beam_size < 1:
            raise HarnessError("config", "beam_size must be >= 1")
        if self.first_stage_k < 1:
            raise HarnessError("config", "first_stage_k must be >= 1")
        if not 0 <= self.images_per_question <= 3:
            raise HarnessError("config", "images_per_question must be between 0 and 3")
        genret.IdentifierStrategy(self.identifier_strategy)  # raises on bad value

    # artifact locations default to well-known names under output_dir
    def split_file(self) -> Path:
        return self.split or self.output_dir / "split.json"

    def index_file(self) -> Path:
        return self.index_path or self.output_dir / "index.json"

    def identifier_file(self) -> Path:
        return self.identifier_table or self.output_dir / "identifiers.jsonl"

    def scorer_file(self) -> Path:
        return self.scorer_path or self.output_dir / "scorer.json"

    def weak_label_file(self) -> Path:
        return self.weak_labels or self.output_dir / "weak_labels.jsonl"

    def classifier_file(self) -> Path:
        return self.classifier_path or self.output_dir / "classifier.json"

    def rankings_file(self) -> Path:
        return self.output_dir / "rankings.jsonl"

    def report_file(self) -> Path:
        return self.output_dir / "report.json"

    def report_body_file(self) -> Path:
        return self.output_dir / "report_body.json"

    def metrics_file(self) -> Path:
        return self.output_dir / "metrics.tsv"

    def echo(self) -> dict:
        """Every config field, with paths as strings, for the report body."""
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, Path):
                out[key] = str(value)
            elif isinstance(value, tuple):
                out[key] = list(value)
            else:
                out[key] = value
        return out


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a config JSON file; relative paths resolve against its directory."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise HarnessError("config", f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise HarnessError("config", f"{path}: line {exc.lineno}: {exc.msg}") from None
    base = path.parent

    def as_path(key: str, required: bool = False) -> Path | None:
        value = raw.pop(key, None)
        if value is None:
            if required:
                raise HarnessError("config", f"{path}: missing required path '{key}'")
            return None
        p = Path(value)
        return p if p.is_absolute() else (base / p)

    kwargs: dict = {
        "dataset": as_path("dataset", required=True),
        "corpus": as_path("corpus", required=True),
        "qrels": as_path("qrels", required=True),
        "output_dir": as_path("output_dir", required=True),
    }
    for key in (
        "embeddings",
        "split",
        "index_path",
        "identifier_table",
        "scorer_path",
        "weak_labels",
        "classifier_path",
        "baseline_report",
    ):
        kwargs[key] = as_path(key)
    for key in ("split_ratios", "ql_weights", "scorer_lambdas"):
        if key in raw:
            kwargs[key] = tuple(raw.pop(key))
    known = {
        "seed",
        "bm25_k1",
        "bm25_b",
        "ql_mu",
        "identifier_strategy",
        "beam_size",
        "first_stage_k",
        "first_stage_model",
        "first_stage_text",
        "trie_scope",
        "mode",
        "classification",
        "images_per_question",
        "eval_split",
    }
    for key in list(raw):
        if key not in known:
            raise HarnessError("config", f"{path}: unknown config field '{key}'")
        kwargs[key] = raw.pop(key)
    return ExperimentConfig(**kwargs)


@dataclass
class RunReport:
    config: dict
    provenance: dict
    per_facet: dict[str, dict]
    macro: dict
    skipped_facets: list[dict]
    sample_count: int
    significance: dict | None = None

    def body(self) -> dict:
        return {
            "config": self.config,
            "provenance": self.provenance,
            "per_facet": self.per_facet,
            "macro": self.macro,
            "skipped_facets": self.skipped_facets,
            "sample_count": self.sample_count,
            "significance": self.significance,
        }

    def body_bytes(self) -> bytes:
        return json.dumps(self.body(), sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def _require_file(path: Path, what: str) -> Path:
    if not path.exists():
        raise HarnessError("missing-artifact", f"{what} not found at {path}; build it first")
    return path


@dataclass
class _Workspace:
    """Everything a retrieval run needs, loaded once."""

    config: ExperimentConfig
    data: ds.Dataset
    corpus: list[ds.Document]
    qrels: ds.Qrels
    split: dict[str, str]
    index: lexical.InvertedIndex
    identifiers: dict[str, genret.Identifier] | None = None
    scorer: genret.ReferenceScorer | None = None
    store: mm.EmbeddingStore | None = None
    weak_labels: dict[str, str] | None = None
    classifier: mm.ReferenceClassifier | None = None
    corpus_trie: genret.IdentifierTrie | None = None

    @property
    def ordinal_of(self) -> dict[str, int]:
        return self.index.ordinal


def _load_workspace(config: ExperimentConfig, need_genret: bool, need_images: bool) -> _Workspace:
    data = ds.load_dataset(_require_file(config.dataset, "dataset"))
    corpus = ds.load_corpus(_require_file(config.corpus, "corpus"))
    qrels = ds.load_qrels(_require_file(config.qrels, "qrels"))
    split = ds.load_split(_require_file(config.split_file(), "split file"))
    index = lexical.load_index(_require_file(config.index_file(), "inverted index"))
    ws = _Workspace(config, data, corpus, qrels, split, index)

    if need_genret:
        idents, _ = genret.load_identifier_table(
            _require_file(config.identifier_file(), "identifier table"), index.ordinal
        )
        ws.identifiers = {i.doc_id: i for i in idents}
        ws.scorer = genret.ReferenceScorer.load(_require_file(config.scorer_file(), "reference scorer"))
        if config.trie_scope == "corpus":
            ws.corpus_trie = genret.build_trie(idents)
    if need_images:
        if config.embeddings is None:
            raise HarnessError("missing-artifact", "mode needs image selection but no embeddings path is configured")
        ws.store = mm.load_embeddings(_require_file(config.embeddings, "embedding file"))
    if config.classification == "oracle_weak_labels":
        ws.weak_labels = mm.load_weak_labels(_require_file(config.weak_label_file(), "weak-label file"))
    elif config.classification == "reference_classifier":
        ws.classifier = mm.ReferenceClassifier.load(_require_file(config.classifier_file(), "classifier"))
    return ws


def _eval_facets(ws: _Workspace) -> tuple[list[ds.Facet], list[dict]]:
    """Facets of the configured split that have positive judgments and samples."""
    chosen: list[ds.Facet] = []
    skipped: list[dict] = []
    for facet in ws.data.facets:
        split_name = ws.split.get(facet.id)
        if split_name is None:
            skipped.append({"facet_id": facet.id, "reason": "not in split assignment"})
            continue
        if ws.config.eval_split != "all" and split_name != ws.config.eval_split:
            continue
        if not ws.qrels.relevant(facet.id):
            skipped.append({"facet_id": facet.id, "reason": "no positive relevance judgments"})
            log.warning("skipping facet %s: no positive relevance judgments", facet.id)
            continue
        if not ws.data.answers_for_facet(facet.id):
            skipped.append({"facet_id": facet.id, "reason": "no question/answer samples"})
            log.warning("skipping facet %s: no question/answer samples", facet.id)
            continue
        chosen.append(facet)
    return chosen, skipped


def _first_stage_query(config: ExperimentConfig, topic: ds.Topic, question: ds.ClarifyingQuestion, answer: ds.AnswerRecord) -> list[str]:
    if config.mode == "original_query" or config.first_stage_text == "query":
        return lexical.tokenize(topic.query)
    return lexical.tokenize(topic.query) + lexical.tokenize(question.text) + lexical.tokenize(answer.text)


def _first_stage_ranking(
    ws: _Workspace, topic: ds.Topic, question: ds.ClarifyingQuestion, answer: ds.AnswerRecord
) -> list[tuple[str, float]]:
    config = ws.config
    if config.mode == "lexical_baseline" and config.first_stage_model == "ql":
        fields = [
            (lexical.tokenize(topic.query), config.ql_weights[0]),
            (lexical.tokenize(question.text), config.ql_weights[1]),
            (lexical.tokenize(answer.text), config.ql_weights[2]),
        ]
        return lexical.ql_rank(ws.index, fields, k=config.first_stage_k, mu=config.ql_mu)
    if config.mode == "lexical_baseline":
        query = (
            lexical.tokenize(topic.query) + lexical.tokenize(question.text) + lexical.tokenize(answer.text)
        )
    else:
        query = _first_stage_query(config, topic, question, answer)
    return lexical.search(
        ws.index, query, k=config.first_stage_k, model=config.first_stage_model,
        k1=config.bm25_k1, b=config.bm25_b, mu=config.ql_mu,
    )


def _question_label(ws: _Workspace, topic: ds.Topic, question: ds.ClarifyingQuestion) -> str | None:
    config = ws.config
    if config.classification == "off":
        return None
    if config.classification == "oracle_weak_labels":
        label = ws.weak_labels.get(question.id)
        if label is None:
            log.warning("question %s has no weak label; treating as TEQ", question.id)
            return mm.TEQ
        return label
    label, _ = mm.classify_question(ws.classifier, topic.query, question.text)
    return label


def _selected_aspect_tokens(ws: _Workspace, question: ds.ClarifyingQuestion) -> list[str]:
    config = ws.config
    if not question.multimodal or not question.images or config.images_per_question == 0:
        return []
    candidates = [img.id for img in question.images]
    k = min(config.images_per_question, len(candidates))
    chosen = mm.select_images(ws.store, question.id, candidates, k=k)
    aspect_by_id = {img.id: img.aspect for img in question.images}
    tokens: list[str] = []
    for image_id in chosen:
        tokens.extend(lexical.tokenize(aspect_by_id[image_id]))
    return tokens


def _gen_rerank(
    ws: _Workspace, context: list[str], first_stage: list[tuple[str, float]]
) -> list[tuple[str, float]]:
    config = ws.config
    if config.trie_scope == "corpus":
        trie = ws.corpus_trie
    else:
        candidate_ids = [doc_id for doc_id, _ in first_stage]
        trie = genret.build_trie([ws.identifiers[d] for d in candidate_ids if d in ws.identifiers])
    beams = genret.constrained_beam_search(ws.scorer, context, trie, beam_size=config.beam_size)
    return genret.rank_candidates(beams, trie, first_stage, ws.ordinal_of)


def _sample_ranking(
    ws: _Workspace, topic: ds.Topic, question: ds.ClarifyingQuestion, answer: ds.AnswerRecord, label: str | None
) -> tuple[list[tuple[str, float]], bool]:
    """Ranking for one sample; returns (ranking, images_attached)."""
    config = ws.config
    first_stage = _first_stage_ranking(ws, topic, question, answer)
    if config.mode in ("original_query", "lexical_baseline"):
        return first_stage, False

    context = (
        lexical.tokenize(topic.query) + lexical.tokenize(question.text) + lexical.tokenize(answer.text)
    )
    attached = False
    if config.mode == "gen_rerank_multimodal" and (label is None or label == mm.VEQ):
        aspect_tokens = _selected_aspect_tokens(ws, question)
        if aspect_tokens:
            context = context + aspect_tokens
            attached = True
    return _gen_rerank(ws, context, first_stage), attached


def run_retrieval(config: ExperimentConfig) -> list[dict]:
    """Produce per-sample rankings for the configured mode and eval split."""
    need_genret = config.mode in ("gen_rerank_text_only", "gen_rerank_multimodal")
    need_images = config.mode == "gen_rerank_multimodal" and config.images_per_question > 0
    ws = _load_workspace(config, need_genret, need_images)
    facets, skipped = _eval_facets(ws)

    records: list[dict] = []
    label_cache: dict[str, str | None] = {}
    for facet in facets:
        topic = ws.data.topic_by_id[facet.topic_id]
        for answer in ws.data.answers_for_facet(facet.id):
            question = ws.data.question_by_id[answer.question_id]
            if question.id not in label_cache:
                label_cache[question.id] = _question_label(ws, topic, question)
            label = label_cache[question.id]
            ranking, attached = _sample_ranking(ws, topic, question, answer, label)
            records.append(
                {
                    "facet_id": facet.id,
                    "question_id": question.id,
                    "label": label,
                    "images_attached": attached,
                    "ranking": [[doc_id, None if score == -math.inf else score] for doc_id, score in ranking],
                }
            )
    records.append({"_skipped": skipped})
    return records


def save_rankings(records: list[dict], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def load_rankings(path: Path) -> tuple[list[dict], list[dict]]:
    samples: list[dict] = []
    skipped: list[dict] = []
    with path.open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "_skipped" in rec:
                skipped.extend(rec["_skipped"])
            else:
                samples.append(rec)
    return samples, skipped


def evaluate_rankings(
    config: ExperimentConfig, samples: list[dict], skipped: list[dict], qrels: ds.Qrels
) -> RunReport:
    """Aggregate per-sample rankings into the per-facet/macro report."""
    g_max = qrels.max_grade()
    log.info("evaluating with g_max=%d from qrels; unjudged documents count as grade 0", g_max)
    by_facet: dict[str, list[dict]] = {}
    for rec in samples:
        ranking = [doc_id for doc_id, _ in rec["ranking"]]
        grades = qrels.grades(rec["facet_id"])
        record = ev.evaluate_ranking(ranking, grades, g_max=g_max)
        by_facet.setdefault(rec["facet_id"], []).append(record)

    per_facet = {fid: ev.macro_average(recs) for fid, recs in sorted(by_facet.items())}
    if not per_facet:
        raise HarnessError("empty-run", "no facet produced any evaluated sample")
    macro = ev.macro_average(list(per_facet.values()))

    significance = None
    if config.baseline_report is not None:
        baseline_body = read_report_body(_require_file(config.baseline_report, "baseline report"))
        significance = {
            metric: {
                "t": result.t_statistic,
                "p_raw": result.p_raw,
                "p_adjusted": result.p_adjusted,
                "significant": result.significant,
            }
            for metric, result in compare_per_facet(per_facet, baseline_body["per_facet"]).items()
        }

    return RunReport(
        config=config.echo(),
        provenance={"seed": config.seed, "artifact_versions": dict(ARTIFACT_VERSIONS)},
        per_facet=per_facet,
        macro=macro,
        skipped_facets=sorted(skipped, key=lambda s: s["facet_id"]),
        sample_count=len(samples),
        significance=significance,
    )


def write_report(config: ExperimentConfig, report: RunReport) -> None:
    config.output_dir.mkdir(parents=True, exist_ok=True)
    body = report.body_bytes()
    config.report_body_file().write_bytes(body)
    wrapper = {
        "body_sha256": hashlib.sha256(body).hexdigest(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "body": report.body(),
    }
    config.report_file().write_text(json.dumps(wrapper, indent=1, sort_keys=True, ensure_ascii=False), encoding="utf-8")
    config.metrics_file().write_text(ev.metrics_tsv([(config.mode, report.macro)]), encoding="utf-8")


def read_report_body(path: Path) -> dict:
    with Path(path).open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    return data["body"] if "body" in data else data


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Retrieve, evaluate and write the full report for one config."""
    records = run_retrieval(config)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    save_rankings(records, config.rankings_file())
    samples = [r for r in records if "_skipped" not in r]
    skipped = next(r["_skipped"] for r in records if "_skipped" in r)
    qrels = ds.load_qrels(config.qrels)
    report = evaluate_rankings(config, samples, skipped, qrels)
    write_report(config, report)
    return report


def compare_per_facet(
    per_facet_a: dict[str, dict], per_facet_b: dict[str, dict]
) -> dict[str, ev.SignificanceResult]:
    """Paired t-test per metric over per-facet values of two runs."""
    if set(per_facet_a) != set(per_facet_b):
        raise HarnessError("facet-mismatch", "the two runs evaluate different facet sets")
    facets = sorted(per_facet_a)
    if not facets:
        raise HarnessError("facet-mismatch", "no facets to compare")
    metrics_a = set(per_facet_a[facets[0]])
    metrics_b = set(per_facet_b[facets[0]])
    if metrics_a != metrics_b:
        raise HarnessError("facet-mismatch", "the two runs report different metric columns")
    metrics = [m for m in ev.METRIC_NAMES if m in metrics_a]
    out: dict[str, ev.SignificanceResult] = {}
    for metric in metrics:
        a = [per_facet_a[f][metric] for f in facets]
        b = [per_facet_b[f][metric] for f in facets]
        out[metric] = ev.paired_t_test(a, b, comparisons=len(metrics))
    return out


def compare_runs(report_a: dict, report_b: dict) -> dict[str, ev.SignificanceResult]:
    """Compare two report bodies (as loaded by read_report_body)."""
    return compare_per_facet(report_a["per_facet"], report_b["per_facet"])


# --- build steps -----------------------------------------------------------


def step_split(config: ExperimentConfig) -> dict[str, str]:
    data = ds.load_dataset(_require_file(config.dataset, "dataset"))
    assignment = ds.split_facets(data, config.split_ratios, config.seed)
    config.split_file().parent.mkdir(parents=True, exist_ok=True)
    ds.save_split(assignment, config.split_file())
    return assignment


def step_index(config: ExperimentConfig) -> lexical.InvertedIndex:
    corpus = ds.load_corpus(_require_file(config.corpus, "corpus"))
    index = lexical.build_index(corpus)
    config.index_file().parent.mkdir(parents=True, exist_ok=True)
    lexical.save_index(index, config.index_file())
    return index


def step_identifiers(config: ExperimentConfig) -> list[genret.Identifier]:
    corpus = ds.load_corpus(_require_file(config.corpus, "corpus"))
    index = lexical.load_index(_require_file(config.index_file(), "inverted index"))
    strategy = genret.IdentifierStrategy(config.identifier_strategy)
    table = genret.build_identifier_table(corpus, index, strategy)
    config.identifier_file().parent.mkdir(parents=True, exist_ok=True)
    genret.save_identifier_table(table, strategy, config.identifier_file())
    return table


def step_train_scorer(config: ExperimentConfig) -> genret.ReferenceScorer:
    """Train the reference scorer on train-split (context, target) pairs."""
    data = ds.load_dataset(_require_file(config.dataset, "dataset"))
    qrels = ds.load_qrels(_require_file(config.qrels, "qrels"))
    split = ds.load_split(_require_file(config.split_file(), "split file"))
    index = lexical.load_index(_require_file(config.index_file(), "inverted index"))
    idents, _ = genret.load_identifier_table(
        _require_file(config.identifier_file(), "identifier table"), index.ordinal
    )
    by_doc = {i.doc_id: i for i in idents}

    pairs: list[tuple[list[str], list[str]]] = []
    for facet in data.facets:
        if split.get(facet.id) != "train" or not qrels.relevant(facet.id):
            continue
        relevant_with_ids = {d: g for d, g in qrels.relevant(facet.id).items() if d in by_doc}
        if not relevant_with_ids:
            log.warning("train facet %s has no relevant documents with identifiers", facet.id)
            continue
        target = genret.make_training_targets(facet.id, qrels, by_doc, top_n=5)
        topic = data.topic_by_id[facet.topic_id]
        for answer in data.answers_for_facet(facet.id):
            question = data.question_by_id[answer.question_id]
            context = (
                lexical.tokenize(topic.query)
                + lexical.tokenize(question.text)
                + lexical.tokenize(answer.text)
            )
            pairs.append((context, target))
    if not pairs:
        raise HarnessError("empty-run", "no training pairs: check split, qrels and identifier coverage")
    scorer = genret.train_reference_scorer(pairs, config.scorer_lambdas)
    config.scorer_file().parent.mkdir(parents=True, exist_ok=True)
    scorer.save(config.scorer_file())
    return scorer


def step_weak_labels(config: ExperimentConfig) -> list[mm.WeakLabelRecord]:
    """Generate VEQ/TEQ labels by running the reranker with and without
    image-aspect context tokens and comparing mean nDCG@{1,3,5}."""
    ws = _load_workspace(config, need_genret=True, need_images=True)
    g_max = ws.qrels.max_grade()
    answers_by_question: dict[str, list[ds.AnswerRecord]] = {}
    for answer in ws.data.answers:
        answers_by_question.setdefault(answer.question_id, []).append(answer)

    records: list[mm.WeakLabelRecord] = []
    for question in ws.data.questions:
        topic = ws.data.topic_by_id[question.topic_id]
        aspect_tokens = _selected_aspect_tokens(ws, question)
        deltas: list[float] = []
        for answer in answers_by_question.get(question.id, []):
            if not ws.qrels.relevant(answer.facet_id):
                continue
            base_context = (
                lexical.tokenize(topic.query)
                + lexical.tokenize(question.text)
                + lexical.tokenize(answer.text)
            )
            first_stage = lexical.search(
                ws.index,
                _first_stage_query(config, topic, question, answer),
                k=config.first_stage_k,
                model=config.first_stage_model,
                k1=config.bm25_k1,
                b=config.bm25_b,
                mu=config.ql_mu,
            )
            grades = ws.qrels.grades(answer.facet_id)

            def ndcg_triple(context: list[str]) -> tuple[float, float, float]:
                ranking = _gen_rerank(ws, context, first_stage)
                record = ev.evaluate_ranking([d for d, _ in ranking], grades, g_max=g_max)
                return (record["ndcg@1"], record["ndcg@3"], record["ndcg@5"])

            tor = ndcg_triple(base_context)
            mur = ndcg_triple(base_context + aspect_tokens) if aspect_tokens else tor
            delta, _ = mm.weak_label(tor, mur)
            deltas.append(delta)
        if not deltas:
            log.warning("question %s has no judged samples; skipping weak label", question.id)
            continue
        mean_delta = sum(deltas) / len(deltas)
        label = mm.VEQ if mean_delta > 0 else mm.TEQ
        records.append(mm.WeakLabelRecord(question.id, tuple(deltas), mean_delta, label))

    config.weak_label_file().parent.mkdir(parents=True, exist_ok=True)
    mm.save_weak_labels(records, config.weak_label_file())
    return records


def step_train_classifier(config: ExperimentConfig) -> mm.ReferenceClassifier:
    data = ds.load_dataset(_require_file(config.dataset, "dataset"))
    labels = mm.load_weak_labels(_require_file(config.weak_label_file(), "weak-label file"))
    samples = []
    for question in data.questions:
        label = labels.get(question.id)
        if label is None:
            continue
        topic = data.topic_by_id[question.topic_id]
        samples.append((topic.query, question.text, label))
    if not samples:
        raise HarnessError("empty-run", "no labeled questions to train the classifier on")
    classifier = mm.train_classifier(samples)
    config.classifier_file().parent.mkdir(parents=True, exist_ok=True)
    classifier.save(config.classifier_file())
    return classifier
