"""
Analogy evaluation with 3CosAdd.

For "a : b :: c : ?" the answer is the word whose normalized input embedding
has the highest cosine with u_b - u_a + u_c, excluding a, b and c. Ties go to
the lowest vocabulary index. Questions with an out-of-vocabulary word are
skipped but stay in the accuracy denominators.
"""
import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import QuestionFormatError
from .model_io import ModelFile

logger = logging.getLogger(__name__)

SEMANTIC = "semantic"
SYNTACTIC = "syntactic"
DEFAULT_BATCH_SIZE = 256


@dataclass(frozen=True)
class AnalogyQuestion:
    a: str
    b: str
    c: str
    expected: str
    category: str

    @property
    def words(self) -> Tuple[str, str, str, str]:
        return (self.a, self.b, self.c, self.expected)

    def resolvable(self, index: Dict[str, int]) -> bool:
        return all(word in index for word in self.words)


def section_of(category: str) -> str:
    return SYNTACTIC if category.startswith("gram") else SEMANTIC


def display_name(category: str) -> str:
    """'gram3-comparative' -> 'comparative'."""
    if category.startswith("gram") and "-" in category:
        return category.split("-", 1)[1]
    return category


def load_questions(path) -> List[AnalogyQuestion]:
    """
    Parses the standard question file: ': category' headers, then four
    whitespace-separated words per line. Words are lowercased.
    """
    questions: List[AnalogyQuestion] = []
    category: Optional[str] = None
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith(":"):
                category = stripped[1:].strip()
                if not category:
                    raise QuestionFormatError("empty category header", line_number)
                continue
            parts = stripped.lower().split()
            if len(parts) != 4:
                raise QuestionFormatError(f"expected 4 words, got {len(parts)}", line_number)
            if category is None:
                raise QuestionFormatError("question before any ': category' header", line_number)
            questions.append(AnalogyQuestion(*parts, category=category))
    logger.info(f"Loaded {len(questions)} questions from {path}")
    return questions


@dataclass
class CategoryScore:
    name: str
    section: str
    correct: int = 0
    total: int = 0
    skipped: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0

    @property
    def display_name(self) -> str:
        return display_name(self.name)


@dataclass
class EvalReport:
    categories: List[CategoryScore] = field(default_factory=list)

    def _rollup(self, name: str, section: Optional[str]) -> CategoryScore:
        score = CategoryScore(name, section or "all")
        for c in self.categories:
            if section is None or c.section == section:
                score.correct += c.correct
                score.total += c.total
                score.skipped += c.skipped
        return score

    @property
    def semantic(self) -> CategoryScore:
        return self._rollup("Semantic", SEMANTIC)

    @property
    def syntactic(self) -> CategoryScore:
        return self._rollup("Syntactic", SYNTACTIC)

    @property
    def total(self) -> CategoryScore:
        return self._rollup("Total", None)

    @property
    def skipped(self) -> int:
        return self.total.skipped

    def rows(self) -> List[CategoryScore]:
        """Report order: semantic rollup then its categories, syntactic likewise, then the total."""
        rows = [self.semantic] + [c for c in self.categories if c.section == SEMANTIC]
        rows += [self.syntactic] + [c for c in self.categories if c.section == SYNTACTIC]
        return rows + [self.total]

    def to_dict(self) -> Dict:
        def entry(score: CategoryScore) -> Dict:
            data = asdict(score)
            data["accuracy"] = score.accuracy
            return data
        return {
            "categories": [entry(c) for c in self.categories],
            "semantic": entry(self.semantic),
            "syntactic": entry(self.syntactic),
            "total": entry(self.total),
            "skipped": self.skipped,
        }


def answer(model: ModelFile, question: AnalogyQuestion) -> Optional[int]:
    """Predicted word index, or None when the question is not resolvable."""
    if not question.resolvable(model.index):
        return None
    a, b, c = (model.index[w] for w in (question.a, question.b, question.c))
    normed = model.normalized
    scores = normed @ (normed[b] - normed[a] + normed[c])
    scores[[a, b, c]] = -np.inf
    return int(np.argmax(scores))


def evaluate(model: ModelFile, questions: Sequence[AnalogyQuestion],
             batch_size: int = DEFAULT_BATCH_SIZE) -> EvalReport:
    """
    Scores every question; resolvable ones are answered in batches with one
    matrix product per batch, in file order.
    """
    scores_by_category: Dict[str, CategoryScore] = {}
    resolved: List[Tuple[CategoryScore, int, int, int, int]] = []
    for q in questions:
        score = scores_by_category.get(q.category)
        if score is None:
            score = scores_by_category[q.category] = CategoryScore(q.category, section_of(q.category))
        score.total += 1
        if q.resolvable(model.index):
            resolved.append((score, *(model.index[w] for w in q.words)))
        else:
            score.skipped += 1

    normed = model.normalized
    for start in range(0, len(resolved), batch_size):
        batch = resolved[start:start + batch_size]
        ids = np.array([item[1:] for item in batch], dtype=np.int64)
        a, b, c, expected = ids.T
        targets = normed[b] - normed[a] + normed[c]
        sims = targets @ normed.T
        rows = np.arange(len(batch))
        sims[rows, a] = -np.inf
        sims[rows, b] = -np.inf
        sims[rows, c] = -np.inf
        predictions = np.argmax(sims, axis=1)
        for (score, *_), predicted, want in zip(batch, predictions, expected):
            if predicted == want:
                score.correct += 1

    report = EvalReport(list(scores_by_category.values()))
    if questions and report.skipped == report.total.total:
        logger.warning("Every question contains an out-of-vocabulary word")
    logger.info(
        f"Analogy accuracy: total {report.total.correct}/{report.total.total} "
        f"({report.total.accuracy:.2%}), skipped {report.skipped}"
    )
    return report


def most_similar(model: ModelFile, word: str, topn: int = 10) -> List[Tuple[str, float]]:
    """Nearest neighbours of `word` by cosine, excluding the word itself."""
    if word not in model.index:
        raise KeyError(f"'{word}' is not in the vocabulary")
    i = model.index[word]
    sims = model.normalized @ model.normalized[i]
    sims[i] = -np.inf
    order = np.argsort(-sims, kind="stable")[:topn]
    return [(model.words[j], float(sims[j])) for j in order]


def solve_analogy(model: ModelFile, a: str, b: str, c: str, topn: int = 1) -> List[Tuple[str, float]]:
    """Top candidates for a : b :: c : ?, ranked the same way `evaluate` ranks them."""
    missing = [w for w in (a, b, c) if w not in model.index]
    if missing:
        raise KeyError(f"not in the vocabulary: {', '.join(missing)}")
    ia, ib, ic = (model.index[w] for w in (a, b, c))
    normed = model.normalized
    sims = normed @ (normed[ib] - normed[ia] + normed[ic])
    sims[[ia, ib, ic]] = -np.inf
    order = np.argsort(-sims, kind="stable")[:topn]
    return [(model.words[j], float(sims[j])) for j in order]


@dataclass
class CategoryDelta:
    name: str
    baseline: CategoryScore
    candidate: CategoryScore

    @property
    def absolute(self) -> float:
        return self.candidate.accuracy - self.baseline.accuracy

    @property
    def relative(self) -> Optional[float]:
        if self.baseline.accuracy == 0:
            return None
        return self.absolute / self.baseline.accuracy


def compare_reports(baseline: EvalReport, candidate: EvalReport) -> List[CategoryDelta]:
    """Per-row accuracy deltas in report order; rows missing from one side count as zero."""
    candidate_rows = {row.name: row for row in candidate.rows()}
    deltas = []
    for row in baseline.rows():
        other = candidate_rows.get(row.name, CategoryScore(row.name, row.section, total=row.total))
        deltas.append(CategoryDelta(row.name, row, other))
    return deltas


def _fraction(score: CategoryScore) -> str:
    return f"{score.accuracy:.2%} ({score.correct}/{score.total})"


def format_report(report: EvalReport, fmt: str = "table") -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2)
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["category", "section", "correct", "total", "skipped", "accuracy"])
        for row in report.rows():
            writer.writerow([row.display_name, row.section, row.correct, row.total, row.skipped,
                             f"{row.accuracy:.6f}"])
        return buffer.getvalue()
    if fmt != "table":
        raise ValueError(f"Unknown report format {fmt!r}; expected table, csv or json")

    width = max([len(r.display_name) for r in report.rows()] + [len("Category")])
    lines = [f"{'Category':<{width}}  {'Accuracy (correct/total)'}", "-" * (width + 28)]
    for row in report.rows():
        lines.append(f"{row.display_name:<{width}}  {_fraction(row)}")
    lines.append(f"{'Skipped (OOV)':<{width}}  {report.skipped}")
    return "\n".join(lines)


def format_comparison(deltas: Sequence[CategoryDelta]) -> str:
    width = max([len(display_name(d.name)) for d in deltas] + [len("Category")])
    lines = [f"{'Category':<{width}}  {'Baseline':>22}  {'Candidate':>22}  Delta Acc (relative)"]
    for d in deltas:
        relative = f"{d.relative:.2%}" if d.relative is not None else "n/a"
        lines.append(
            f"{display_name(d.name):<{width}}  {_fraction(d.baseline):>22}  "
            f"{_fraction(d.candidate):>22}  {d.absolute:.2%} ({relative})"
        )
    return "\n".join(lines)
