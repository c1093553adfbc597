"""
Embedding persistence.

Text:    "vocab_size dim\n" then "word f1 ... fd\n" per word, 6 significant digits.
Binary:  "vocab_size dim\n" then per word: word bytes, a space, d little-endian
         float32 values and "\n" (the word2vec interchange layout).
Sidecar: YAML document next to the model (`<model path>.yaml`) holding the
         training config, LFW formula and final parameters, window schedule
         and per-epoch history.
"""
import os
import logging
import functools
import shutil
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

import numpy as np
import yaml

from .errors import ModelFormatError
from .lfw_weights import LfwFormula, LfwParams

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]
SIDECAR_SUFFIX = ".yaml"
_FLOAT32_LE = np.dtype("<f4")


@dataclass
class ModelFile:
    words: List[str]
    vectors: np.ndarray
    metadata: Optional[Dict[str, Any]] = None
    index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.words):
            raise ModelFormatError(
                f"{len(self.words)} words but vectors have shape {self.vectors.shape}"
            )
        self.index = {word: i for i, word in enumerate(self.words)}

    @property
    def vocab_size(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @functools.cached_property
    def normalized(self) -> np.ndarray:
        """Unit-length rows; all-zero rows stay zero."""
        norms = np.linalg.norm(self.vectors, axis=1, keepdims=True)
        return self.vectors / np.maximum(norms, np.finfo(np.float32).tiny)


def save_text(model: ModelFile, path: PathLike):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{model.vocab_size} {model.dim}\n")
        for word, vector in zip(model.words, model.vectors):
            f.write(word + " " + " ".join(f"{x:.6g}" for x in vector) + "\n")
    logger.info(f"Saved text model ({model.vocab_size} x {model.dim}) to {path}")


def _parse_header(line: bytes, path: PathLike):
    parts = line.split()
    if len(parts) != 2:
        raise ModelFormatError(f"{path}: header must be 'vocab_size dim', got {line[:80]!r}")
    try:
        vocab_size, dim = int(parts[0]), int(parts[1])
    except ValueError:
        raise ModelFormatError(f"{path}: non-integer header {line[:80]!r}")
    if vocab_size < 0 or dim < 1:
        raise ModelFormatError(f"{path}: invalid header sizes {vocab_size} x {dim}")
    return vocab_size, dim


def load_text(path: PathLike) -> ModelFile:
    words: List[str] = []
    with open(path, "rb") as f:
        vocab_size, dim = _parse_header(f.readline(), path)
        vectors = np.empty((vocab_size, dim), dtype=np.float32)
        for line in f:
            parts = line.decode("utf-8").split()
            if not parts:
                continue
            index = len(words)
            if index >= vocab_size:
                raise ModelFormatError(f"{path}: more records than the header's {vocab_size}", index)
            if len(parts) != dim + 1:
                raise ModelFormatError(f"{path}: expected {dim} values for {parts[0]!r}, got {len(parts) - 1}", index)
            try:
                vectors[index] = [float(x) for x in parts[1:]]
            except ValueError:
                raise ModelFormatError(f"{path}: unparseable value in record {parts[0]!r}", index)
            words.append(parts[0])
    if len(words) != vocab_size:
        raise ModelFormatError(f"{path}: header announces {vocab_size} records, found {len(words)}", len(words))
    return ModelFile(words, vectors, load_sidecar_if_present(path))


def save_binary(model: ModelFile, path: PathLike):
    with open(path, "wb") as f:
        f.write(f"{model.vocab_size} {model.dim}\n".encode("ascii"))
        for word, vector in zip(model.words, model.vectors):
            f.write(word.encode("utf-8") + b" ")
            f.write(np.ascontiguousarray(vector, dtype=_FLOAT32_LE).tobytes())
            f.write(b"\n")
    logger.info(f"Saved binary model ({model.vocab_size} x {model.dim}) to {path}")


def load_binary(path: PathLike) -> ModelFile:
    with open(path, "rb") as f:
        data = f.read()
    newline = data.find(b"\n")
    if newline < 0:
        raise ModelFormatError(f"{path}: missing header line")
    vocab_size, dim = _parse_header(data[:newline], path)
    record_bytes = dim * _FLOAT32_LE.itemsize

    words: List[str] = []
    vectors = np.empty((vocab_size, dim), dtype=np.float32)
    pos = newline + 1
    for index in range(vocab_size):
        # tolerate writers that omit the record-separating newline
        while pos < len(data) and data[pos:pos + 1] == b"\n":
            pos += 1
        space = data.find(b" ", pos)
        if space < 0:
            raise ModelFormatError(f"{path}: truncated before word", index)
        end = space + 1 + record_bytes
        if end > len(data):
            raise ModelFormatError(f"{path}: truncated inside vector", index)
        words.append(data[pos:space].decode("utf-8"))
        vectors[index] = np.frombuffer(data, dtype=_FLOAT32_LE, count=dim, offset=space + 1)
        pos = end
    return ModelFile(words, vectors, load_sidecar_if_present(path))


def detect_format(path: PathLike) -> str:
    """'text' when the first record parses as d+1 text fields, else 'bin'."""
    with open(path, "rb") as f:
        _, dim = _parse_header(f.readline(), path)
        first = f.readline()
    try:
        parts = first.decode("utf-8").split()
        if len(parts) == dim + 1:
            [float(x) for x in parts[1:]]
            return "text"
    except (UnicodeDecodeError, ValueError):
        pass
    return "bin"


def load_model(path: PathLike, fmt: Optional[str] = None) -> ModelFile:
    fmt = fmt or detect_format(path)
    if fmt == "text":
        return load_text(path)
    if fmt == "bin":
        return load_binary(path)
    raise ValueError(f"Unknown model format {fmt!r}; expected 'text' or 'bin'")


def save_model(model: ModelFile, path: PathLike, fmt: str = "bin"):
    if fmt == "text":
        save_text(model, path)
    elif fmt == "bin":
        save_binary(model, path)
    else:
        raise ValueError(f"Unknown model format {fmt!r}; expected 'text' or 'bin'")


def sidecar_path(model_path: PathLike) -> str:
    return os.fspath(model_path) + SIDECAR_SUFFIX


def save_sidecar(config, lfw_params, path: PathLike, history: Optional[List[Any]] = None,
                 schedule: Optional[List[int]] = None):
    """
    Writes the reproduction record for a run. `config` is a TrainConfig,
    `lfw_params` an LfwParams or None, `history` a list of EpochStats.
    """
    config_dict = config.to_dict()
    document: Dict[str, Any] = {
        "model": config_dict["model"],
        "lfw": {
            "formula": lfw_params.formula.cli_name if lfw_params is not None else "none",
            "params": lfw_params.as_dict() if lfw_params is not None else {},
        },
        "window": {
            "strategy": config_dict["window_strategy"],
            "max_window": config_dict["window"],
            "epochs": config_dict["epochs"],
            "phases": config_dict["edws_phases"],
            "per_epoch": list(schedule) if schedule is not None else None,
        },
        "config": config_dict,
    }
    if history:
        document["history"] = [
            {
                "epoch": s.epoch,
                "window": s.window,
                "mean_loss": float(s.mean_loss),
                "examples": int(s.examples),
                "tokens_per_sec": float(s.tokens_per_sec),
                "learning_rate": float(s.learning_rate),
                "lfw_params": dict(s.lfw_params),
            }
            for s in history
        ]
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(document, f, sort_keys=False)
    logger.info(f"Sidecar written to {path}")


def load_sidecar(path: PathLike) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        document = yaml.safe_load(f)
    if not isinstance(document, dict):
        raise ModelFormatError(f"{path}: sidecar is not a key-value document")
    return document


def load_sidecar_if_present(model_path: PathLike) -> Optional[Dict[str, Any]]:
    path = sidecar_path(model_path)
    if not os.path.exists(path):
        return None
    try:
        return load_sidecar(path)
    except (yaml.YAMLError, ModelFormatError) as e:
        logger.warning(f"Ignoring unreadable sidecar {path}: {e}")
        return None


def convert(in_path: PathLike, out_path: PathLike, fmt: str) -> ModelFile:
    """Re-saves a model in `fmt`, carrying the sidecar along."""
    model = load_model(in_path)
    save_model(model, out_path, fmt)
    source_sidecar = sidecar_path(in_path)
    if os.path.exists(source_sidecar):
        shutil.copyfile(source_sidecar, sidecar_path(out_path))
    return model


def lfw_params_from_sidecar(model_path: PathLike):
    """The learned LfwParams recorded next to a model, or None for non-LFW runs."""
    sidecar = load_sidecar_if_present(model_path)
    if not sidecar:
        raise ModelFormatError(f"{model_path}: no sidecar at {sidecar_path(model_path)}")
    lfw = sidecar.get("lfw") or {}
    if lfw.get("formula", "none") == "none":
        return None
    return LfwParams.from_dict(LfwFormula.from_name(lfw["formula"]), lfw.get("params") or {})
