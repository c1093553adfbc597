"""
Runs experiment recipes: every arm for every seed is trained on the same
corpus artifacts, saved with its sidecar, and scored on the analogy set.
Expectations compare total correct answers per seed.
"""
import os
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .audit import AuditLogger
from .corpus import DEFAULT_MIN_KEEP_COUNT, CorpusArtifacts, prepare_corpus
from .evaluator import AnalogyQuestion, EvalReport, evaluate, load_questions
from .model_io import save_model, save_sidecar, sidecar_path
from .recipes import Expectation, Recipe
from .trainer import TrainConfig, TrainResult, train
from .window_scheduler import schedule_table

logger = logging.getLogger(__name__)


def train_to_path(artifacts: CorpusArtifacts, config: TrainConfig, model_path: str, fmt: str = "bin",
                  audit: Optional[AuditLogger] = None) -> TrainResult:
    """Trains one model and writes it plus its `.yaml` sidecar."""
    directory = os.path.dirname(os.path.abspath(model_path))
    os.makedirs(directory, exist_ok=True)
    trained = train(artifacts, config, audit=audit)
    save_model(trained.to_model_file(), model_path, fmt)
    save_sidecar(config, trained.lfw_params, sidecar_path(model_path), trained.history,
                 schedule_table(config.schedule))
    return trained


@dataclass
class ArmResult:
    arm: str
    seed: int
    model_path: str
    seconds: float
    report: EvalReport

    @property
    def total_correct(self) -> int:
        return self.report.total.correct


@dataclass
class ExpectationOutcome:
    expectation: Expectation
    passing_seeds: List[int]
    failing_seeds: List[int]
    required: int

    @property
    def passed(self) -> bool:
        return len(self.passing_seeds) >= self.required


@dataclass
class RecipeResult:
    recipe: str
    arms: List[ArmResult] = field(default_factory=list)
    outcomes: List[ExpectationOutcome] = field(default_factory=list)
    overhead: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.outcomes if not o.expectation.soft)

    def correct(self, arm: str, seed: int) -> int:
        for result in self.arms:
            if result.arm == arm and result.seed == seed:
                return result.total_correct
        raise KeyError(f"no result for arm '{arm}' seed {seed}")

    def to_dict(self) -> Dict:
        return {
            "recipe": self.recipe,
            "passed": self.passed,
            "arms": [
                {
                    "arm": r.arm,
                    "seed": r.seed,
                    "model": r.model_path,
                    "seconds": round(r.seconds, 3),
                    "semantic": r.report.semantic.correct,
                    "syntactic": r.report.syntactic.correct,
                    "total": r.total_correct,
                    "questions": r.report.total.total,
                }
                for r in self.arms
            ],
            "expectations": [
                {
                    "expectation": str(o.expectation),
                    "soft": o.expectation.soft,
                    "passing_seeds": o.passing_seeds,
                    "failing_seeds": o.failing_seeds,
                    "passed": o.passed,
                }
                for o in self.outcomes
            ],
            "overhead": self.overhead,
        }


class ExperimentRunner:
    def __init__(self, audit: Optional[AuditLogger] = None, min_keep_count: int = DEFAULT_MIN_KEEP_COUNT,
                 workers: Optional[int] = None, model_format: str = "bin"):
        self.audit = audit
        self.min_keep_count = min_keep_count
        self.workers = workers
        self.model_format = model_format
        logger.info(f"ExperimentRunner initialized (min_keep_count={min_keep_count}, workers={workers or 'recipe'})")

    def run(self, recipe: Recipe, corpus, questions_path: str, output_dir: str,
            seeds: Optional[List[int]] = None, artifacts: Optional[CorpusArtifacts] = None) -> RecipeResult:
        """
        `corpus` is a path or iterable of lines; pass prebuilt `artifacts` to
        reuse a vocabulary across recipes.
        """
        seeds = list(seeds or recipe.seeds)
        os.makedirs(output_dir, exist_ok=True)
        if artifacts is None:
            artifacts = prepare_corpus(corpus, self.min_keep_count)
        questions: List[AnalogyQuestion] = load_questions(questions_path)

        result = RecipeResult(recipe.name)
        for seed in seeds:
            for arm in recipe.arms:
                result.arms.append(self._run_arm(recipe, arm.name, seed, artifacts, questions, output_dir))

        required = min(recipe.min_passing_seeds, len(seeds))
        for expectation in recipe.expectations:
            passing, failing = [], []
            for seed in seeds:
                left, right = result.correct(expectation.left, seed), result.correct(expectation.right, seed)
                (passing if expectation.holds(left, right) else failing).append(seed)
            outcome = ExpectationOutcome(expectation, passing, failing, required)
            result.outcomes.append(outcome)
            if not outcome.passed:
                level = logging.WARNING if expectation.soft else logging.ERROR
                logger.log(level, f"Expectation '{expectation}' failed on seeds {failing}")

        for arm in recipe.arms:
            if arm.baseline:
                result.overhead[arm.name] = self._mean_seconds(result, arm.name) / max(
                    self._mean_seconds(result, arm.baseline), 1e-9)
                if recipe.max_overhead and result.overhead[arm.name] > recipe.max_overhead:
                    logger.warning(f"{arm.name} took {result.overhead[arm.name]:.2f}x the time of {arm.baseline}, "
                                   f"above the {recipe.max_overhead}x budget")

        status = "SUCCESS" if result.passed else "FAILURE"
        logger.info(f"Recipe '{recipe.name}' finished: {status}")
        if self.audit:
            summary = "; ".join(f"{o.expectation}: {len(o.passing_seeds)}/{len(seeds)}" for o in result.outcomes)
            self.audit.log_event("RECIPE", f"{recipe.name}: {summary or 'no expectations'}", status)
        return result

    def _run_arm(self, recipe: Recipe, arm_name: str, seed: int, artifacts: CorpusArtifacts,
                 questions: List[AnalogyQuestion], output_dir: str) -> ArmResult:
        options = recipe.arm_config(recipe.arm(arm_name), seed)
        if self.workers:
            options["workers"] = self.workers
        config = TrainConfig.from_dict(options)
        logger.info(f"[{recipe.name}] arm '{arm_name}' seed {seed}")

        suffix = "bin" if self.model_format == "bin" else "txt"
        model_path = os.path.join(output_dir, f"{arm_name}_seed{seed}.{suffix}")
        trained = train_to_path(artifacts, config, model_path, self.model_format, self.audit)

        report = evaluate(trained.to_model_file(), questions)
        if self.audit:
            self.audit.log_evaluation(model_path, report.total.correct, report.total.total, report.skipped)
        return ArmResult(arm_name, seed, model_path, trained.seconds, report)

    @staticmethod
    def _mean_seconds(result: RecipeResult, arm: str) -> float:
        seconds = [r.seconds for r in result.arms if r.arm == arm]
        return sum(seconds) / len(seconds) if seconds else 0.0
