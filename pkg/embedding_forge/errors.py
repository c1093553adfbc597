from typing import Any, Dict, Optional


class ForgeError(Exception):
    """Base class for every error raised by embedding_forge."""


class CorpusError(ForgeError, ValueError):
    pass


class DegenerateVocabularyError(CorpusError):
    pass


class ContractViolation(ForgeError, ValueError):
    pass


class ScheduleError(ForgeError, ValueError):
    pass


class ConfigError(ForgeError, ValueError):
    pass


class RecipeError(ForgeError, ValueError):
    pass


class QuestionFormatError(ForgeError, ValueError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ModelFormatError(ForgeError, ValueError):
    def __init__(self, message: str, word_index: Optional[int] = None):
        if word_index is not None:
            message = f"{message} (word index {word_index})"
        super().__init__(message)
        self.word_index = word_index


class TrainingDivergedError(ForgeError, RuntimeError):
    """
    Raised when a loss or an embedding entry becomes NaN/Inf.
    `diagnostics` holds the last-step state needed to reproduce the failure.
    """
    def __init__(self, message: str, diagnostics: Dict[str, Any]):
        details = ", ".join(f"{k}={v}" for k, v in diagnostics.items())
        super().__init__(f"{message} [{details}]")
        self.diagnostics = diagnostics
