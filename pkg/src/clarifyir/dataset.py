"""Data model and ingestion: conversation dataset, document corpus, qrels, splits.

All loaded structures are immutable after construction and safe for
concurrent reads. Loading itself is single-threaded per file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

MAX_IMAGES_PER_QUESTION = 3
SPLIT_NAMES = ("train", "validation", "test")

QUESTION_SOURCES = ("set1", "set2")


class DatasetError(ValueError):
    """Schema or referential-integrity failure while loading dataset files."""


@dataclass(frozen=True)
class Topic:
    id: str
    query: str


@dataclass(frozen=True)
class Facet:
    id: str
    topic_id: str
    description: str


@dataclass(frozen=True)
class ImageRecord:
    id: str
    url: str
    aspect: str


@dataclass(frozen=True)
class ClarifyingQuestion:
    id: str
    topic_id: str
    text: str
    source: str  # "set1" | "set2"
    multimodal: bool
    images: tuple[ImageRecord, ...] = ()


@dataclass(frozen=True)
class AnswerRecord:
    topic_id: str
    facet_id: str
    question_id: str
    text: str


@dataclass(frozen=True)
class Document:
    id: str
    ordinal: int
    text: str
    title: str | None = None


class Dataset:
    """Cross-linked view over topics, facets, questions and answers.

    Construction does not validate; use :func:`load_dataset` for strict
    ingestion or :func:`validate_dataset` for report-style checking.
    """

    def __init__(
        self,
        topics: list[Topic],
        facets: list[Facet],
        questions: list[ClarifyingQuestion],
        answers: list[AnswerRecord],
    ):
        self.topics = tuple(topics)
        self.facets = tuple(facets)
        self.questions = tuple(questions)
        self.answers = tuple(answers)
        self.topic_by_id = {t.id: t for t in self.topics}
        self.facet_by_id = {f.id: f for f in self.facets}
        self.question_by_id = {q.id: q for q in self.questions}
        self._answers_by_facet: dict[str, list[AnswerRecord]] = {}
        for a in self.answers:
            self._answers_by_facet.setdefault(a.facet_id, []).append(a)

    def answers_for_facet(self, facet_id: str) -> list[AnswerRecord]:
        return list(self._answers_by_facet.get(facet_id, []))

    def counts(self) -> tuple[int, int, int, int]:
        return (len(self.topics), len(self.facets), len(self.questions), len(self.answers))


@dataclass
class Qrels:
    """Graded relevance judgments: facet_id -> doc_id -> grade >= 0."""

    by_facet: dict[str, dict[str, int]] = field(default_factory=dict)

    def grades(self, facet_id: str) -> dict[str, int]:
        return self.by_facet.get(facet_id, {})

    def relevant(self, facet_id: str) -> dict[str, int]:
        return {d: g for d, g in self.grades(facet_id).items() if g > 0}

    def max_grade(self) -> int:
        top = 0
        for grades in self.by_facet.values():
            for g in grades.values():
                top = max(top, g)
        return top


@dataclass(frozen=True)
class Finding:
    code: str
    message: str


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def add(self, code: str, message: str) -> None:
        self.findings.append(Finding(code, message))


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise DatasetError(f"{where}: missing field '{key}'")
    return obj[key]


def dataset_from_dict(data: dict) -> Dataset:
    """Build and strictly validate a Dataset from the parsed JSON object."""
    for section in ("topics", "facets", "questions", "answers"):
        if section not in data or not isinstance(data[section], list):
            raise DatasetError(f"dataset: missing or non-array section '{section}'")

    topics = []
    seen_topics: set[str] = set()
    for i, rec in enumerate(data["topics"]):
        where = f"topics[{i}]"
        tid = str(_require(rec, "id", where))
        query = str(_require(rec, "query", where))
        if tid in seen_topics:
            raise DatasetError(f"{where}: duplicate topic id '{tid}'")
        if not query:
            raise DatasetError(f"{where}: empty query")
        seen_topics.add(tid)
        topics.append(Topic(tid, query))

    facets = []
    seen_facets: set[str] = set()
    for i, rec in enumerate(data["facets"]):
        where = f"facets[{i}]"
        fid = str(_require(rec, "id", where))
        topic_id = str(_require(rec, "topic_id", where))
        if fid in seen_facets:
            raise DatasetError(f"{where}: duplicate facet id '{fid}'")
        if topic_id not in seen_topics:
            raise DatasetError(f"{where}: unknown topic_id '{topic_id}'")
        seen_facets.add(fid)
        facets.append(Facet(fid, topic_id, str(_require(rec, "description", where))))

    questions = []
    seen_questions: set[str] = set()
    seen_images: set[str] = set()
    for i, rec in enumerate(data["questions"]):
        where = f"questions[{i}]"
        qid = str(_require(rec, "id", where))
        topic_id = str(_require(rec, "topic_id", where))
        source = str(_require(rec, "source", where))
        multimodal = bool(_require(rec, "multimodal", where))
        if qid in seen_questions:
            raise DatasetError(f"{where}: duplicate question id '{qid}'")
        if topic_id not in seen_topics:
            raise DatasetError(f"{where}: unknown topic_id '{topic_id}'")
        if source not in QUESTION_SOURCES:
            raise DatasetError(f"{where}: source must be one of {QUESTION_SOURCES}, got '{source}'")
        raw_images = rec.get("images", [])
        if not isinstance(raw_images, list):
            raise DatasetError(f"{where}: images must be an array")
        images = []
        for j, img in enumerate(raw_images):
            iwhere = f"{where}.images[{j}]"
            iid = str(_require(img, "id", iwhere))
            if iid in seen_images:
                raise DatasetError(f"{iwhere}: duplicate image id '{iid}'")
            seen_images.add(iid)
            images.append(
                ImageRecord(iid, str(_require(img, "url", iwhere)), str(_require(img, "aspect", iwhere)))
            )
        if not multimodal and images:
            raise DatasetError(f"{where}: multimodal=false but {len(images)} image(s) attached")
        if len(images) > MAX_IMAGES_PER_QUESTION:
            raise DatasetError(f"{where}: {len(images)} images exceed the limit of {MAX_IMAGES_PER_QUESTION}")
        seen_questions.add(qid)
        questions.append(
            ClarifyingQuestion(qid, topic_id, str(_require(rec, "text", where)), source, multimodal, tuple(images))
        )

    answers = []
    for i, rec in enumerate(data["answers"]):
        where = f"answers[{i}]"
        topic_id = str(_require(rec, "topic_id", where))
        facet_id = str(_require(rec, "facet_id", where))
        question_id = str(_require(rec, "question_id", where))
        if topic_id not in seen_topics:
            raise DatasetError(f"{where}: unknown topic_id '{topic_id}'")
        if facet_id not in seen_facets:
            raise DatasetError(f"{where}: unknown facet_id '{facet_id}'")
        if question_id not in seen_questions:
            raise DatasetError(f"{where}: unknown question_id '{question_id}'")
        answers.append(AnswerRecord(topic_id, facet_id, question_id, str(_require(rec, "text", where))))

    return Dataset(topics, facets, questions, answers)


def dataset_to_dict(dataset: Dataset) -> dict:
    """Inverse of :func:`dataset_from_dict` (round-trips exactly)."""
    return {
        "topics": [{"id": t.id, "query": t.query} for t in dataset.topics],
        "facets": [{"id": f.id, "topic_id": f.topic_id, "description": f.description} for f in dataset.facets],
        "questions": [
            {
                "id": q.id,
                "topic_id": q.topic_id,
                "text": q.text,
                "source": q.source,
                "multimodal": q.multimodal,
                "images": [{"id": i.id, "url": i.url, "aspect": i.aspect} for i in q.images],
            }
            for q in dataset.questions
        ],
        "answers": [
            {"topic_id": a.topic_id, "facet_id": a.facet_id, "question_id": a.question_id, "text": a.text}
            for a in dataset.answers
        ],
    }


def load_dataset(path: str | Path) -> Dataset:
    """Load and validate the single-JSON dataset file (UTF-8)."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise DatasetError(f"{path}: top-level value must be an object")
    return dataset_from_dict(data)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dataset_to_dict(dataset), ensure_ascii=False, indent=1), encoding="utf-8")


def load_corpus(path: str | Path) -> list[Document]:
    """Load the JSON-lines corpus: one {"id","ordinal","text","title"?} per line."""
    docs: list[Document] = []
    seen_ids: set[str] = set()
    seen_ordinals: set[int] = set()
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}: line {lineno}: {exc.msg}") from exc
            where = f"{path}: line {lineno}"
            doc_id = str(_require(rec, "id", where))
            ordinal = _require(rec, "ordinal", where)
            text = str(_require(rec, "text", where))
            if not isinstance(ordinal, int) or ordinal < 0:
                raise DatasetError(f"{where}: ordinal must be a non-negative integer")
            if doc_id in seen_ids:
                raise DatasetError(f"{where}: duplicate document id '{doc_id}'")
            if ordinal in seen_ordinals:
                raise DatasetError(f"{where}: duplicate ordinal {ordinal}")
            if not text:
                raise DatasetError(f"{where}: empty document text")
            seen_ids.add(doc_id)
            seen_ordinals.add(ordinal)
            title = rec.get("title")
            docs.append(Document(doc_id, ordinal, text, None if title is None else str(title)))
    return docs


def save_corpus(docs: list[Document], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for d in docs:
            rec: dict = {"id": d.id, "ordinal": d.ordinal, "text": d.text}
            if d.title is not None:
                rec["title"] = d.title
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_qrels(path: str | Path) -> Qrels:
    """Parse TREC-style 4-column qrels: "facet_id 0 doc_id grade" (column 2 ignored)."""
    qrels = Qrels()
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise DatasetError(f"{path}: line {lineno}: expected 4 whitespace-separated columns, got {len(parts)}")
            facet_id, _, doc_id, grade_s = parts
            try:
                grade = int(grade_s)
            except ValueError:
                raise DatasetError(f"{path}: line {lineno}: grade '{grade_s}' is not an integer") from None
            if grade < 0:
                raise DatasetError(f"{path}: line {lineno}: negative grade {grade}")
            grades = qrels.by_facet.setdefault(facet_id, {})
            if doc_id in grades:
                raise DatasetError(f"{path}: line {lineno}: duplicate pair ({facet_id}, {doc_id})")
            grades[doc_id] = grade
    return qrels


def save_qrels(qrels: Qrels, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for facet_id in sorted(qrels.by_facet):
            for doc_id in sorted(qrels.by_facet[facet_id]):
                fh.write(f"{facet_id} 0 {doc_id} {qrels.by_facet[facet_id][doc_id]}\n")


# Fisher-Yates driven by a fixed 64-bit linear congruential generator
# (Knuth MMIX constants), so split assignments never depend on the Python
# version's stdlib shuffle internals.
_LCG_MULT = 6364136223846793005
_LCG_INC = 1442695040888963407
_LCG_MASK = (1 << 64) - 1


class _Lcg:
    def __init__(self, seed: int):
        self.state = (seed ^ 0x9E3779B97F4A7C15) & _LCG_MASK

    def next_below(self, n: int) -> int:
        # modulo bias is negligible for n << 2^64 and irrelevant for
        # reproducibility, which is the only contract here
        self.state = (self.state * _LCG_MULT + _LCG_INC) & _LCG_MASK
        return (self.state >> 16) % n


def split_facets(
    dataset: Dataset,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> dict[str, str]:
    """Partition facet ids into train/validation/test deterministically.

    Counts are floor(N*r_train) / floor(N*r_val) / remainder. Facet ids
    are sorted lexicographically, then shuffled by a seeded LCG.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("ratios must be three positive fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    facet_ids = sorted(f.id for f in dataset.facets)
    n = len(facet_ids)
    if n < 3:
        raise ValueError(f"need at least 3 facets to populate all splits, got {n}")

    rng = _Lcg(seed)
    for i in range(n - 1, 0, -1):
        j = rng.next_below(i + 1)
        facet_ids[i], facet_ids[j] = facet_ids[j], facet_ids[i]

    # the 1e-9 guard keeps exact products (e.g. 1070*0.8) from flooring
    # one short due to binary float representation
    n_train = math.floor(n * ratios[0] + 1e-9)
    n_val = math.floor(n * ratios[1] + 1e-9)
    assignment: dict[str, str] = {}
    for i, fid in enumerate(facet_ids):
        if i < n_train:
            assignment[fid] = "train"
        elif i < n_train + n_val:
            assignment[fid] = "validation"
        else:
            assignment[fid] = "test"
    return assignment


def load_split(path: str | Path) -> dict[str, str]:
    with Path(path).open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise DatasetError(f"{path}: split file must be a JSON object")
    for fid, name in data.items():
        if name not in SPLIT_NAMES:
            raise DatasetError(f"{path}: facet '{fid}' has unknown split '{name}'")
    return dict(data)


def save_split(assignment: dict[str, str], path: str | Path) -> None:
    Path(path).write_text(json.dumps(assignment, sort_keys=True, indent=1), encoding="utf-8")


def validate_dataset(dataset: Dataset, qrels: Qrels, corpus: list[Document]) -> ValidationReport:
    """Cross-check dataset, qrels and corpus; empty report means consistent."""
    report = ValidationReport()

    seen_topic_ids: set[str] = set()
    for t in dataset.topics:
        if t.id in seen_topic_ids:
            report.add("duplicate-topic", f"topic id '{t.id}' appears more than once")
        seen_topic_ids.add(t.id)
        if not t.query:
            report.add("empty-query", f"topic '{t.id}' has an empty query")

    seen_facet_ids: set[str] = set()
    for f in dataset.facets:
        if f.id in seen_facet_ids:
            report.add("duplicate-facet", f"facet id '{f.id}' appears more than once")
        seen_facet_ids.add(f.id)
        if f.topic_id not in dataset.topic_by_id:
            report.add("dangling-topic", f"facet '{f.id}' references unknown topic '{f.topic_id}'")

    seen_question_ids: set[str] = set()
    seen_image_ids: set[str] = set()
    for q in dataset.questions:
        if q.id in seen_question_ids:
            report.add("duplicate-question", f"question id '{q.id}' appears more than once")
        seen_question_ids.add(q.id)
        if q.topic_id not in dataset.topic_by_id:
            report.add("dangling-topic", f"question '{q.id}' references unknown topic '{q.topic_id}'")
        if not q.multimodal and q.images:
            report.add("images-on-unimodal", f"question '{q.id}' is not multimodal but carries images")
        if len(q.images) > MAX_IMAGES_PER_QUESTION:
            report.add("image-count", f"question '{q.id}' has {len(q.images)} images (limit {MAX_IMAGES_PER_QUESTION})")
        for img in q.images:
            if img.id in seen_image_ids:
                report.add("duplicate-image", f"image id '{img.id}' appears more than once")
            seen_image_ids.add(img.id)

    for i, a in enumerate(dataset.answers):
        where = f"answer #{i}"
        if a.topic_id not in dataset.topic_by_id:
            report.add("dangling-topic", f"{where} references unknown topic '{a.topic_id}'")
        if a.facet_id not in dataset.facet_by_id:
            report.add("dangling-facet", f"{where} references unknown facet '{a.facet_id}'")
        if a.question_id not in dataset.question_by_id:
            report.add("dangling-question", f"{where} references unknown question '{a.question_id}'")

    corpus_ids = {d.id for d in corpus}
    seen_ordinals: set[int] = set()
    for d in corpus:
        if d.ordinal in seen_ordinals:
            report.add("duplicate-ordinal", f"document '{d.id}' reuses ordinal {d.ordinal}")
        seen_ordinals.add(d.ordinal)
        if not d.text:
            report.add("empty-document", f"document '{d.id}' has empty text")

    for facet_id, grades in qrels.by_facet.items():
        if facet_id not in dataset.facet_by_id:
            report.add("unknown-facet", f"qrels judge unknown facet '{facet_id}'")
        if grades and not any(g > 0 for g in grades.values()):
            report.add("no-positive-grade", f"facet '{facet_id}' has judgments but no grade > 0")
        for doc_id in grades:
            if doc_id not in corpus_ids:
                report.add("unknown-document", f"qrels for facet '{facet_id}' reference unknown document '{doc_id}'")

    return report
