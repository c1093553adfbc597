"""
Corpus ingestion: vocabulary construction, token streams, subsampling and the
negative-sampling table.

Input is Mahoney-preprocessed text (space-separated lowercase words, no
sentence markers), so the whole corpus is treated as one stream and windows
are truncated only at its two ends.
"""
import os
import re
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from .errors import CorpusError, DegenerateVocabularyError

logger = logging.getLogger(__name__)

# Words appearing no more than 5 times are discarded, i.e. keep count >= 6.
DEFAULT_MIN_KEEP_COUNT = 6
DEFAULT_SUBSAMPLE_THRESHOLD = 1e-5
DEFAULT_DISTORTION = 0.75
MAX_TABLE_SIZE = 100_000_000
TABLE_ENTRIES_PER_WORD = 200
READ_CHUNK_SIZE = 1 << 20

TextSource = Union[str, os.PathLike, Iterable[str]]


def iter_tokens(path: Union[str, os.PathLike], chunk_size: int = READ_CHUNK_SIZE) -> Iterator[str]:
    """
    Streams whitespace-separated tokens from a file in fixed-size byte chunks.
    A token cut by a chunk boundary is carried over to the next chunk. Bytes
    that are not valid UTF-8 raise CorpusError with their file offset.
    """
    carry = b""
    base = 0
    with open(path, "rb") as f:
        while True:
            chunk = f.read(chunk_size)
            if not chunk:
                break
            data = carry + chunk
            parts = data.split()
            # keep the trailing fragment unless the chunk ended on whitespace
            if parts and not data[-1:].isspace():
                carry = parts.pop()
            else:
                carry = b""
            for index, token in enumerate(parts):
                yield _decode_token(token, path, data, base, index)
            base += len(data) - len(carry)
    if carry:
        yield _decode_token(carry, path, carry, base, 0)


def _decode_token(token: bytes, path, data: bytes, base: int, index: int) -> str:
    try:
        return token.decode("utf-8")
    except UnicodeDecodeError as e:
        start = next(m.start() for i, m in enumerate(re.finditer(rb"\S+", data)) if i == index)
        raise CorpusError(
            f"{os.fspath(path)}: invalid UTF-8 at byte {base + start + e.start} in token {token!r}"
        ) from e


def _iter_source(text_source: TextSource) -> Iterator[str]:
    if isinstance(text_source, (str, os.PathLike)):
        yield from iter_tokens(text_source)
    else:
        for line in text_source:
            yield from line.split()


@dataclass
class Vocabulary:
    words: List[str]
    counts: np.ndarray
    index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.index = {word: i for i, word in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def get(self, word: str) -> Optional[int]:
        return self.index.get(word)

    @property
    def total_tokens(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / max(self.total_tokens, 1)

    def save(self, path: Union[str, os.PathLike]):
        """Writes one "word count" pair per line, descending count."""
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for word, count in zip(self.words, self.counts):
                f.write(f"{word} {int(count)}\n")

    @classmethod
    def load(cls, path: Union[str, os.PathLike]) -> "Vocabulary":
        words, counts = [], []
        with open(path, "r", encoding="utf-8") as f:
            for line_number, line in enumerate(f, start=1):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 2:
                    raise CorpusError(f"{path}: line {line_number} is not a 'word count' pair")
                words.append(parts[0])
                counts.append(int(parts[1]))
        if not words:
            raise CorpusError(f"{path}: vocabulary file is empty")
        return cls(words, np.array(counts, dtype=np.int64))


def build_vocabulary(text_source: TextSource, min_keep_count: int = DEFAULT_MIN_KEEP_COUNT) -> Vocabulary:
    """
    Counts every token and keeps the words seen at least `min_keep_count` times.
    Words are ordered by descending count, ties broken lexicographically.
    """
    counter: Counter = Counter(_iter_source(text_source))
    if not counter:
        raise CorpusError("Corpus is empty: no tokens found")

    kept = [(word, count) for word, count in counter.items() if count >= min_keep_count]
    if not kept:
        raise CorpusError(
            f"No word appears at least {min_keep_count} times "
            f"({len(counter)} distinct tokens). Lower min_keep_count."
        )
    kept.sort(key=lambda item: (-item[1], item[0]))

    vocabulary = Vocabulary([w for w, _ in kept], np.array([c for _, c in kept], dtype=np.int64))
    logger.info(
        f"Vocabulary: {len(vocabulary)} words kept of {len(counter)} distinct "
        f"(min_keep_count={min_keep_count}), {vocabulary.total_tokens} retained tokens"
    )
    return vocabulary


def encode_corpus(text_source: TextSource, vocabulary: Vocabulary) -> np.ndarray:
    """Maps tokens to vocabulary ids, dropping out-of-vocabulary tokens."""
    index = vocabulary.index
    ids = np.fromiter(
        (i for i in (index.get(token) for token in _iter_source(text_source)) if i is not None),
        dtype=np.int32,
    )
    logger.info(f"Encoded corpus: {len(ids)} tokens")
    return ids


def keep_probabilities(vocabulary: Vocabulary, threshold: Optional[float]) -> Optional[np.ndarray]:
    """
    Per-word probability of keeping one occurrence: min(1, sqrt(t/f) + t/f),
    the complement of the standard discard probability. None disables subsampling.
    """
    if threshold is None or threshold <= 0:
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = threshold / vocabulary.frequencies
        keep = np.sqrt(ratio) + ratio
    return np.clip(np.nan_to_num(keep, nan=1.0, posinf=1.0), 0.0, 1.0)


@dataclass
class TokenStream:
    ids: np.ndarray
    subsample: Optional[float] = None
    keep: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def from_vocabulary(cls, ids: np.ndarray, vocabulary: Vocabulary,
                        subsample: Optional[float] = None) -> "TokenStream":
        ids = np.asarray(ids, dtype=np.int32)
        if len(ids) and (ids.min() < 0 or ids.max() >= len(vocabulary)):
            raise CorpusError("Token stream contains ids outside the vocabulary")
        return cls(ids, subsample, keep_probabilities(vocabulary, subsample))

    def __len__(self) -> int:
        return len(self.ids)

    def epoch_ids(self, seed: int, epoch: int) -> np.ndarray:
        """Subsampled ids for one epoch; each occurrence is kept independently."""
        if self.keep is None:
            return self.ids
        rng = np.random.default_rng([seed, epoch])
        mask = rng.random(len(self.ids)) < self.keep[self.ids]
        return self.ids[mask]

    def partition(self, length: int, workers: int) -> List[Tuple[int, int]]:
        """Disjoint [start, stop) center ranges, one per worker."""
        bounds = np.linspace(0, length, workers + 1).astype(np.int64)
        return [(int(bounds[i]), int(bounds[i + 1])) for i in range(workers)]


class Position(NamedTuple):
    center: int
    word: int
    offsets: Tuple[int, ...]


def stream_positions(tokens: TokenStream, window: int, rng_seed: int = 0) -> Iterator[Position]:
    """
    Yields every center position with its context offsets 0 < |i| <= window,
    truncated at the two ends of the stream. The seed drives subsampling.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    ids = tokens.epoch_ids(rng_seed, 1)
    n = len(ids)
    for t in range(n):
        offsets = tuple(i for i in range(-window, window + 1) if i != 0 and 0 <= t + i < n)
        yield Position(t, int(ids[t]), offsets)


@dataclass
class NegativeSamplingTable:
    table: np.ndarray
    exponent: float
    vocab_size: int
    distinct_words: Optional[int] = None

    def __post_init__(self):
        if self.distinct_words is None:
            self.distinct_words = int(np.unique(self.table).size)

    @classmethod
    def build(cls, counts: np.ndarray, exponent: float = DEFAULT_DISTORTION,
              max_size: int = MAX_TABLE_SIZE) -> "NegativeSamplingTable":
        """
        Fills a lookup table where word w occupies a share proportional to
        count(w)^exponent. Size scales with the vocabulary up to `max_size`.
        """
        counts = np.asarray(counts, dtype=np.float64)
        if len(counts) == 0:
            raise DegenerateVocabularyError("degenerate vocabulary: no words to sample")
        weights = np.power(counts, exponent)
        cumulative = np.cumsum(weights / weights.sum())
        size = int(min(max_size, len(counts) * TABLE_ENTRIES_PER_WORD))
        positions = (np.arange(size, dtype=np.float64) + 0.5) / size
        table = np.searchsorted(cumulative, positions, side="right")
        table = np.minimum(table, len(counts) - 1).astype(np.int32)
        distinct = int(np.count_nonzero(np.bincount(table, minlength=len(counts))))
        return cls(table, exponent, len(counts), distinct)


def sample_negatives(table: NegativeSamplingTable, k: int, exclude: Optional[int],
                     rng: np.random.Generator) -> np.ndarray:
    """
    Draws k word ids from the distorted unigram distribution; draws equal to
    `exclude` are redrawn.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if exclude is not None and table.distinct_words <= 1 and int(table.table[0]) == exclude:
        raise DegenerateVocabularyError("degenerate vocabulary: only the excluded word can be sampled")

    draws = table.table[rng.integers(0, len(table.table), size=k)]
    if exclude is not None:
        hits = draws == exclude
        while hits.any():
            draws[hits] = table.table[rng.integers(0, len(table.table), size=int(hits.sum()))]
            hits = draws == exclude
    return draws.astype(np.int64)


@dataclass
class CorpusArtifacts:
    vocabulary: Vocabulary
    stream: TokenStream
    negatives: NegativeSamplingTable


def prepare_corpus(text_source: TextSource, min_keep_count: int = DEFAULT_MIN_KEEP_COUNT,
                   subsample: Optional[float] = None,
                   exponent: float = DEFAULT_DISTORTION) -> CorpusArtifacts:
    """Builds vocabulary, token stream and sampling table in two streaming passes."""
    if not isinstance(text_source, (str, os.PathLike)):
        # a generator cannot be read twice
        text_source = list(text_source)
    vocabulary = build_vocabulary(text_source, min_keep_count)
    ids = encode_corpus(text_source, vocabulary)
    stream = TokenStream.from_vocabulary(ids, vocabulary, subsample)
    table = NegativeSamplingTable.build(vocabulary.counts, exponent)
    return CorpusArtifacts(vocabulary, stream, table)
