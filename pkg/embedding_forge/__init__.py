from .corpus import CorpusArtifacts, Vocabulary, build_vocabulary, prepare_corpus
from .evaluator import EvalReport, evaluate, load_questions
from .lfw_weights import LfwFormula, LfwParams
from .model_io import ModelFile, load_model, save_model
from .recipes import Recipe, RecipeLoader
from .runner import ExperimentRunner
from .trainer import TrainConfig, TrainResult, train
from .window_scheduler import WindowSchedule, WindowStrategy

__all__ = [
    "CorpusArtifacts", "Vocabulary", "build_vocabulary", "prepare_corpus",
    "EvalReport", "evaluate", "load_questions",
    "LfwFormula", "LfwParams",
    "ModelFile", "load_model", "save_model",
    "Recipe", "RecipeLoader", "ExperimentRunner",
    "TrainConfig", "TrainResult", "train",
    "WindowSchedule", "WindowStrategy",
]
