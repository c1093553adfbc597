import os
import json
import logging
from typing import Dict, List, Optional, Tuple

from mcp.server.fastmcp import FastMCP

from .audit import AuditLogger
from .config import PROJECT_ROOT, Settings
from .corpus import DEFAULT_MIN_KEEP_COUNT, build_vocabulary, prepare_corpus
from .evaluator import evaluate, format_report, load_questions, most_similar, solve_analogy
from .lfw_weights import LfwFormula, LfwParams, export_weight_curve
from .model_io import ModelFile, lfw_params_from_sidecar, load_model
from .recipes import RecipeLoader
from .runner import ExperimentRunner, train_to_path
from .trainer import TrainConfig

logger = logging.getLogger(__name__)


class ModelCache:
    """Keeps loaded models keyed by path and modification time."""

    def __init__(self, max_models: int = 4):
        self.max_models = max_models
        self._models: Dict[Tuple[str, float], ModelFile] = {}

    def get(self, path: str) -> ModelFile:
        path = os.path.abspath(path)
        key = (path, os.path.getmtime(path))
        model = self._models.get(key)
        if model is None:
            if len(self._models) >= self.max_models:
                self._models.pop(next(iter(self._models)))
            model = self._models[key] = load_model(path)
            logger.info(f"Loaded {path} ({model.vocab_size} x {model.dim})")
        return model


def resolve_lfw_params(formula: str, model_path: str = "",
                       params: Optional[Dict[str, float]] = None) -> LfwParams:
    """Parameters from a model sidecar, from explicit values, or the all-zero start."""
    if model_path:
        learned = lfw_params_from_sidecar(model_path)
        if learned is None:
            raise ValueError(f"{model_path} was trained without LFW weights")
        return learned
    if not formula:
        raise ValueError("give either a formula or a model path")
    resolved = LfwFormula.from_name(formula)
    if params:
        return LfwParams.from_dict(resolved, params)
    return LfwParams.zeros(resolved)


def _default_questions(settings: Settings, questions_path: str) -> str:
    return questions_path or os.path.join(settings.data_dir, "questions-words.txt")


def register_tools(mcp: FastMCP, settings: Settings, audit: AuditLogger,
                   loader: RecipeLoader, runner: ExperimentRunner):
    """Registers the embedding toolkit as MCP tools."""
    models = ModelCache()

    @mcp.tool(name="build_vocabulary")
    def build_vocabulary_tool(corpus_path: str, output_path: str = "",
                              min_count: int = DEFAULT_MIN_KEEP_COUNT) -> str:
        """
        Counts a whitespace-separated corpus and keeps words seen at least min_count times.

        Args:
            corpus_path: Path of the corpus file (e.g. text8).
            output_path: Optional path to write "word count" lines.
            min_count: Minimum count to keep a word (default 6, i.e. discard counts <= 5).
        """
        try:
            vocabulary = build_vocabulary(corpus_path, min_count)
            if output_path:
                vocabulary.save(output_path)
            return json.dumps({
                "vocab_size": len(vocabulary),
                "tokens": vocabulary.total_tokens,
                "most_frequent": list(zip(vocabulary.words[:10], vocabulary.counts[:10].tolist())),
                "saved_to": output_path or None,
            }, indent=2)
        except Exception as e:
            return f"Error: {e}"

    @mcp.tool()
    def train_model(corpus_path: str, output_path: str, model: str = "cbow", lfw: str = "none",
                    window: int = 15, window_strategy: str = "", epochs: int = 6, dim: int = 128,
                    negatives: int = 5, seed: int = 1, workers: int = 0,
                    min_count: int = DEFAULT_MIN_KEEP_COUNT, fmt: str = "bin") -> str:
        """
        Trains CBOW (optionally with LFW weights) or Skip-gram and saves the model with a .yaml sidecar.

        Args:
            corpus_path: Corpus file.
            output_path: Where to write the model.
            model: 'cbow' or 'skipgram'.
            lfw: 'none', 'eq3', 'eq4', 'eq5' or 'eq6' (CBOW only).
            window: Maximum window size r.
            window_strategy: 'fixed', 'random' or 'edws'; empty picks the model default.
            epochs: Number of epochs K.
            dim: Embedding dimension.
            negatives: Negative samples per positive.
            seed: Random seed.
            workers: Worker threads; 0 uses EMBEDDING_FORGE_THREADS.
            min_count: Vocabulary cutoff.
            fmt: 'bin' or 'text'.
        """
        try:
            config = TrainConfig(
                model=model, lfw=lfw, window=window, window_strategy=window_strategy or None,
                epochs=epochs, dim=dim, negatives=negatives, seed=seed,
                workers=workers or settings.threads,
            )
            artifacts = prepare_corpus(corpus_path, min_count)
            trained = train_to_path(artifacts, config, output_path, fmt, audit)
            return json.dumps({
                "model_path": output_path,
                "vocab_size": len(trained.words),
                "seconds": round(trained.seconds, 2),
                "lfw_params": trained.lfw_params.as_dict() if trained.lfw_params else {},
                "history": [
                    {"epoch": s.epoch, "window": s.window, "mean_loss": s.mean_loss,
                     "tokens_per_sec": round(s.tokens_per_sec)}
                    for s in trained.history
                ],
            }, indent=2)
        except Exception as e:
            return f"Error: {e}"

    @mcp.tool()
    def evaluate_model(model_path: str, questions_path: str = "", fmt: str = "json") -> str:
        """
        Scores a model on the analogy question set with 3CosAdd.

        Args:
            model_path: Text or binary model file.
            questions_path: Question file; defaults to questions-words.txt in the data directory.
            fmt: 'json', 'table' or 'csv'.
        """
        try:
            path = _default_questions(settings, questions_path)
            report = evaluate(models.get(model_path), load_questions(path))
            audit.log_evaluation(model_path, report.total.correct, report.total.total, report.skipped)
            return format_report(report, fmt)
        except Exception as e:
            return f"Error: {e}"

    @mcp.tool(name="most_similar")
    def most_similar_words(model_path: str, word: str, topn: int = 10) -> str:
        """
        Nearest neighbours of a word by cosine similarity.

        Args:
            model_path: Model file.
            word: Query word.
            topn: Number of neighbours.
        """
        try:
            return json.dumps(most_similar(models.get(model_path), word.lower(), topn), indent=2)
        except Exception as e:
            return f"Error: {e}"

    @mcp.tool(name="solve_analogy")
    def analogy(model_path: str, a: str, b: str, c: str, topn: int = 5) -> str:
        """
        Solves a : b :: c : ? (e.g. man : king :: woman : ?).

        Args:
            model_path: Model file.
            a: First word of the known pair.
            b: Second word of the known pair.
            c: First word of the query pair.
            topn: Number of candidates.
        """
        try:
            model = models.get(model_path)
            return json.dumps(solve_analogy(model, a.lower(), b.lower(), c.lower(), topn), indent=2)
        except Exception as e:
            return f"Error: {e}"

    @mcp.tool()
    def weight_curve(formula: str = "", window: int = 15, model_path: str = "",
                     params: Optional[Dict[str, float]] = None) -> str:
        """
        Normalized LFW weight per context distance.

        Args:
            formula: 'eq3'..'eq6'; may be omitted when model_path has a sidecar.
            window: Maximum distance r.
            model_path: Reads the learned formula and parameters from the model's sidecar.
            params: Explicit parameter values, e.g. {"alpha": 0.4, "beta": 0.1}.
        """
        try:
            lfw_params = resolve_lfw_params(formula, model_path, params)
            points = export_weight_curve(lfw_params.formula, lfw_params, window)
            return json.dumps({
                "formula": lfw_params.formula.cli_name,
                "params": lfw_params.as_dict(),
                "points": [p._asdict() for p in points],
            }, indent=2)
        except Exception as e:
            return f"Error: {e}"

    @mcp.tool()
    def list_recipes() -> str:
        """
        Lists the experiment recipes available to run_recipe.
        """
        recipes = loader.discover_recipes()
        return json.dumps([
            {"name": r.name, "description": r.description, "arms": [a.name for a in r.arms],
             "expectations": [str(e) for e in r.expectations], "seeds": r.seeds}
            for r in recipes
        ], indent=2)

    @mcp.tool()
    def run_recipe(name: str, corpus_path: str, output_dir: str, questions_path: str = "",
                   seeds: Optional[List[int]] = None) -> str:
        """
        Runs every arm of a recipe for each seed, evaluates and checks the expectations.
        Long-running: a full recipe on text8 takes hours.

        Args:
            name: Recipe name (see list_recipes).
            corpus_path: Corpus file.
            output_dir: Directory for models, sidecars and results.json.
            questions_path: Question file; defaults to the data directory copy.
            seeds: Overrides the recipe's seeds.
        """
        try:
            recipe = loader.get(name)
            result = runner.run(recipe, corpus_path, _default_questions(settings, questions_path),
                                output_dir, seeds)
            payload = json.dumps(result.to_dict(), indent=2)
            with open(os.path.join(output_dir, "results.json"), "w", encoding="utf-8") as f:
                f.write(payload)
            return payload
        except Exception as e:
            return f"Error: {e}"

    @mcp.tool()
    def get_guide() -> str:
        """
        Returns the agent manual (SKILL.md): workflows, tool usage and recipe format.
        """
        guide_path = os.path.join(PROJECT_ROOT, "SKILL.md")
        if not os.path.exists(guide_path):
            return "Error: SKILL.md not found in the project root."
        with open(guide_path, "r", encoding="utf-8") as f:
            return f.read()

