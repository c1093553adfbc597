"""
CBOW (+LFW) and Skip-gram (+EDWS) training with negative sampling.

Workers own disjoint center ranges of each epoch's token stream and update
the shared matrices without locks. LFW scalars are the exception: each worker
sums their gradients over `flush_every` positions and applies the mean under a
lock, reading a fresh snapshot for the next chunk. Only single-worker runs are
bit-reproducible.
"""
import math
import time
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from . import kernels
from .audit import AuditLogger
from .corpus import CorpusArtifacts, TokenStream
from .errors import ConfigError, DegenerateVocabularyError, TrainingDivergedError
from .lfw_weights import LfwFormula, LfwParams, keeps_nearest_weights
from .model_io import ModelFile
from .window_scheduler import WindowSchedule, WindowStrategy, epoch_window

logger = logging.getLogger(__name__)

DEFAULT_LEARNING_RATES = {"cbow": 0.05, "skipgram": 0.025}
DEFAULT_WINDOW_STRATEGIES = {"cbow": WindowStrategy.FIXED, "skipgram": WindowStrategy.RANDOM_DYNAMIC}
MAX_LFW_STEP_HALVINGS = 30


class ModelType(str, Enum):
    CBOW = "cbow"
    SKIPGRAM = "skipgram"


@dataclass
class TrainConfig:
    model: ModelType = ModelType.CBOW
    dim: int = 128
    window: int = 15
    window_strategy: Optional[WindowStrategy] = None
    epochs: int = 6
    edws_phases: int = 3
    lfw: Optional[LfwFormula] = None
    negatives: int = 5
    learning_rate: Optional[float] = None
    subsample: Optional[float] = None
    workers: int = 1
    seed: int = 1
    min_lr_fraction: float = 1e-4
    lfw_lr_scale: float = 0.1
    freeze_lfw: bool = False
    flush_every: int = 10_000

    def __post_init__(self):
        try:
            self.model = ModelType(self.model)
        except ValueError:
            raise ConfigError(f"Unknown model {self.model!r}; expected cbow or skipgram")
        if self.window_strategy is None:
            self.window_strategy = DEFAULT_WINDOW_STRATEGIES[self.model.value]
        self.window_strategy = WindowStrategy(self.window_strategy)
        if isinstance(self.lfw, str):
            self.lfw = None if self.lfw.lower() == "none" else LfwFormula.from_name(self.lfw)
        if self.learning_rate is None:
            self.learning_rate = DEFAULT_LEARNING_RATES[self.model.value]

        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.negatives < 1:
            raise ConfigError(f"negatives must be >= 1, got {self.negatives}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1 or self.workers < 1 or self.flush_every < 1:
            raise ConfigError("epochs, workers and flush_every must all be >= 1")
        if self.lfw is not None and self.model is not ModelType.CBOW:
            raise ConfigError("LFW weights apply to CBOW only")
        # validates EDWS divisibility early
        self.schedule

    @property
    def schedule(self) -> WindowSchedule:
        return WindowSchedule(self.window_strategy, self.window, self.epochs, self.edws_phases)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["model"] = self.model.value
        data["window_strategy"] = self.window_strategy.value
        data["lfw"] = self.lfw.cli_name if self.lfw is not None else "none"
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown training options: {sorted(unknown)}")
        return cls(**data)


@dataclass
class EmbeddingMatrices:
    input_matrix: np.ndarray
    output_matrix: np.ndarray

    @classmethod
    def initialize(cls, vocab_size: int, dim: int, seed: int) -> "EmbeddingMatrices":
        """Input rows uniform in [-0.5/d, 0.5/d], output rows zero."""
        rng = np.random.default_rng(seed)
        inp = ((rng.random((vocab_size, dim), dtype=np.float32) - np.float32(0.5)) / np.float32(dim))
        return cls(inp.astype(np.float32), np.zeros((vocab_size, dim), dtype=np.float32))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.input_matrix.shape

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.input_matrix).all() and np.isfinite(self.output_matrix).all())


@dataclass
class EpochStats:
    epoch: int
    window: int
    mean_loss: float
    examples: int
    tokens: int
    tokens_per_sec: float
    learning_rate: float
    lfw_params: Dict[str, float] = field(default_factory=dict)


@dataclass
class TrainResult:
    matrices: EmbeddingMatrices
    lfw_params: Optional[LfwParams]
    history: List[EpochStats]
    config: TrainConfig
    words: List[str]
    seconds: float

    def to_model_file(self) -> ModelFile:
        metadata = {"config": self.config.to_dict()}
        return ModelFile(list(self.words), self.matrices.input_matrix, metadata)


def decayed_learning_rate(initial: float, progress: float, floor_fraction: float = 1e-4) -> float:
    """Linear decay with processed fraction, never below floor_fraction * initial."""
    return max(initial * (1.0 - progress), initial * floor_fraction)


def sgd_step(matrix: np.ndarray, rows, gradient: np.ndarray, learning_rate: float) -> np.ndarray:
    """
    In-place v <- v - lr * g for each referenced row; one gradient may be
    shared by all rows. Returns the updated rows.
    """
    if not learning_rate > 0:
        raise ConfigError(f"learning rate must be > 0, got {learning_rate}")
    rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
    gradient = np.atleast_2d(np.asarray(gradient, dtype=np.float64))
    if gradient.shape[0] == 1 and len(rows) > 1:
        gradient = np.repeat(gradient, len(rows), axis=0)
    if gradient.shape != (len(rows), matrix.shape[1]):
        raise ConfigError(f"gradient shape {gradient.shape} does not match rows {len(rows)} x {matrix.shape[1]}")
    for row, grad in zip(rows, gradient):
        kernels.sgd_row(matrix, int(row), np.ascontiguousarray(grad), float(learning_rate))
    return matrix[rows]


class Trainer:
    def __init__(self, artifacts: CorpusArtifacts, config: TrainConfig,
                 matrices: Optional[EmbeddingMatrices] = None,
                 audit: Optional[AuditLogger] = None):
        self.config = config
        self.vocabulary = artifacts.vocabulary
        self.table = artifacts.negatives
        self.audit = audit

        if self.table.vocab_size != len(self.vocabulary):
            raise ConfigError(
                f"dimension mismatch: sampling table covers {self.table.vocab_size} words, "
                f"vocabulary has {len(self.vocabulary)}"
            )
        if self.table.distinct_words < 2:
            raise DegenerateVocabularyError("degenerate vocabulary: negative sampling needs at least two words")

        stream = artifacts.stream
        if stream.subsample != config.subsample:
            stream = TokenStream.from_vocabulary(stream.ids, self.vocabulary, config.subsample)
        self.stream = stream

        if matrices is None:
            matrices = EmbeddingMatrices.initialize(len(self.vocabulary), config.dim, config.seed)
        expected = (len(self.vocabulary), config.dim)
        if matrices.input_matrix.shape != expected or matrices.output_matrix.shape != expected:
            raise ConfigError(f"dimension mismatch: matrices {matrices.shape}, expected {expected}")
        self.matrices = matrices

        self.formula_code = int(config.lfw) if config.lfw is not None else kernels.UNIFORM
        self.lfw_params = LfwParams.zeros(config.lfw) if config.lfw is not None else None
        self._params = self.lfw_params.values if self.lfw_params is not None else np.zeros(0)

        self._lock = threading.Lock()
        self._rngs = [np.array([config.seed * 1_000_003 + worker], dtype=np.uint64)
                      for worker in range(config.workers)]
        self._epoch_done = 0
        self._last_lr = float(config.learning_rate)

    def run(self) -> TrainResult:
        config = self.config
        if self.audit:
            self.audit.log_training_start(config.model.value, config.to_dict())
        logger.info(
            f"Training {config.model.value} (lfw={config.lfw.cli_name if config.lfw else 'none'}, "
            f"window={config.window_strategy.value}:{config.window}, dim={config.dim}, "
            f"epochs={config.epochs}, workers={config.workers}) on {len(self.stream)} tokens"
        )
        started = time.perf_counter()
        history = []
        try:
            for epoch in range(1, config.epochs + 1):
                history.append(self._run_epoch(epoch))
        except TrainingDivergedError as e:
            logger.error(f"Training aborted: {e}")
            if self.audit:
                self.audit.log_divergence(e.diagnostics)
            raise
        seconds = time.perf_counter() - started

        params = self._current_params()
        if self.audit:
            self.audit.log_training_done(config.model.value, config.epochs, seconds,
                                         params.as_dict() if params else {})
        return TrainResult(self.matrices, params, history, config, list(self.vocabulary.words), seconds)

    def _current_params(self) -> Optional[LfwParams]:
        if self.lfw_params is None:
            return None
        with self._lock:
            return LfwParams(self.config.lfw, self._params)

    def _run_epoch(self, epoch: int) -> EpochStats:
        config = self.config
        ids = self.stream.epoch_ids(config.seed, epoch)
        window = epoch_window(config.schedule, epoch)
        mode = kernels.WINDOW_RANDOM if config.window_strategy is WindowStrategy.RANDOM_DYNAMIC else kernels.WINDOW_FIXED
        ranges = self.stream.partition(len(ids), config.workers)
        self._epoch_done = 0

        started = time.perf_counter()
        if config.workers == 1:
            results = [self._run_range(0, ids, *ranges[0], epoch, window, mode)]
        else:
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(self._run_range, worker, ids, lo, hi, epoch, window, mode)
                           for worker, (lo, hi) in enumerate(ranges)]
                results = [future.result() for future in futures]
        elapsed = max(time.perf_counter() - started, 1e-9)

        loss_sum = sum(loss for loss, _ in results)
        examples = sum(count for _, count in results)
        if not self.matrices.is_finite():
            raise TrainingDivergedError("non-finite embedding entries after epoch",
                                        self._diagnostics(epoch=epoch, window=window))

        params = self._current_params()
        stats = EpochStats(
            epoch=epoch,
            window=window,
            mean_loss=loss_sum / examples if examples else float("nan"),
            examples=examples,
            tokens=len(ids),
            tokens_per_sec=len(ids) / elapsed,
            learning_rate=self._last_lr,
            lfw_params=params.as_dict() if params else {},
        )
        param_text = " ".join(f"{k}={v:.5f}" for k, v in stats.lfw_params.items())
        logger.info(
            f"epoch {epoch}/{config.epochs} window={window} loss={stats.mean_loss:.5f} "
            f"{param_text + ' ' if param_text else ''}tokens/s={stats.tokens_per_sec:.0f} lr={stats.learning_rate:.6f}"
        )
        return stats

    def _run_range(self, worker: int, ids: np.ndarray, lo: int, hi: int,
                   epoch: int, window: int, mode: int) -> Tuple[float, int]:
        config = self.config
        rng = self._rngs[worker]
        inp, out = self.matrices.input_matrix, self.matrices.output_matrix
        n = max(len(ids), 1)
        loss_total, examples_total = 0.0, 0

        for chunk_start in range(lo, hi, config.flush_every):
            chunk_stop = min(hi, chunk_start + config.flush_every)
            with self._lock:
                progress = ((epoch - 1) + self._epoch_done / n) / config.epochs
                params = self._params.copy()
            lr = decayed_learning_rate(config.learning_rate, progress, config.min_lr_fraction)

            if config.model is ModelType.CBOW:
                grad_acc = np.zeros(len(params))
                loss, examples = kernels.train_cbow_chunk(
                    inp, out, ids, chunk_start, chunk_stop, self.table.table, config.negatives,
                    window, mode, self.formula_code, params, lr, rng, grad_acc)
            else:
                grad_acc = None
                loss, examples = kernels.train_skipgram_chunk(
                    inp, out, ids, chunk_start, chunk_stop, self.table.table, config.negatives,
                    window, mode, lr, rng)

            if not math.isfinite(loss):
                raise TrainingDivergedError("non-finite loss", self._diagnostics(
                    epoch=epoch, worker=worker, positions=f"{chunk_start}:{chunk_stop}", lr=lr, loss=loss))

            with self._lock:
                self._epoch_done += chunk_stop - chunk_start
                self._last_lr = lr
                if grad_acc is not None and len(grad_acc) and examples and not config.freeze_lfw:
                    self._apply_lfw_step(config.lfw_lr_scale * lr * grad_acc / examples)
            loss_total += loss
            examples_total += examples
        return loss_total, examples_total

    def _apply_lfw_step(self, step: np.ndarray):
        """
        Moves the LFW scalars by `step`. A step that would floor the distance-1
        weights is halved until it does not; caller holds the lock.
        """
        for _ in range(MAX_LFW_STEP_HALVINGS):
            candidate = self._params - step
            if keeps_nearest_weights(LfwParams(self.config.lfw, candidate)):
                self._params[:] = candidate
                return
            step = step / 2
        logger.debug(f"Dropped LFW step {step.tolist()}: nearest weights would fall under the floor")

    def _diagnostics(self, **context) -> Dict[str, Any]:
        diagnostics = dict(context)
        bad_rows = np.flatnonzero(~np.isfinite(self.matrices.input_matrix).all(axis=1))
        diagnostics["nonfinite_input_rows"] = [self.vocabulary.words[i] for i in bad_rows[:5]]
        if self.lfw_params is not None:
            diagnostics["lfw_params"] = LfwParams(self.config.lfw, self._params).as_dict()
        return diagnostics


def train_cbow(artifacts: CorpusArtifacts, config: TrainConfig,
               audit: Optional[AuditLogger] = None) -> TrainResult:
    if config.model is not ModelType.CBOW:
        raise ConfigError(f"train_cbow needs model=cbow, got {config.model.value}")
    return Trainer(artifacts, config, audit=audit).run()


def train_skipgram(artifacts: CorpusArtifacts, config: TrainConfig,
                   audit: Optional[AuditLogger] = None) -> TrainResult:
    if config.model is not ModelType.SKIPGRAM:
        raise ConfigError(f"train_skipgram needs model=skipgram, got {config.model.value}")
    return Trainer(artifacts, config, audit=audit).run()


def train(artifacts: CorpusArtifacts, config: TrainConfig,
          audit: Optional[AuditLogger] = None) -> TrainResult:
    if config.model is ModelType.CBOW:
        return train_cbow(artifacts, config, audit)
    return train_skipgram(artifacts, config, audit)
