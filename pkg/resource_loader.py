"""
Module for loading the external resources used by feature extraction.

This module reads word embeddings in the word2vec text format and the plain
text lexicons (negation markers, antonym pairs) consumed by the Attack-aware
feature groups.
"""
from dataclasses import dataclass, field
import logging
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)


class EmbeddingFormatError(ValueError):
    """Raised when an embedding file does not follow the word2vec text format."""


@dataclass(frozen=True)
class EmbeddingTable:
    """
    A fixed-dimension word embedding table.

    Attributes:
        dimension: Length of every vector
        vectors: Mapping from word to a float64 vector of length dimension
    """

    dimension: int
    vectors: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def lookup(self, word: str) -> Optional[np.ndarray]:
        """Return the vector for word, or None when the word is absent."""
        return self.vectors.get(word)


def load_embeddings(path: Union[str, Path]) -> EmbeddingTable:
    """
    Load embeddings in the word2vec text format.

    The first line is "<count> <dim>"; every following line is a token
    followed by dim space-separated reals. Duplicate words keep their first
    occurrence.

    Args:
        path: Path to the embedding file

    Returns:
        The loaded EmbeddingTable

    Raises:
        OSError: If the file cannot be read
        EmbeddingFormatError: If the header is malformed or a row has the wrong width
    """
    vectors: Dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().split()
        try:
            declared_count, dimension = (int(value) for value in header)
        except ValueError:
            raise EmbeddingFormatError(f"{path}: malformed header {' '.join(header)!r}, expected '<count> <dim>'")
        if dimension <= 0 or declared_count < 0:
            raise EmbeddingFormatError(f"{path}: header declares count={declared_count}, dim={dimension}")

        for line_number, line in enumerate(handle, start=2):
            parts = line.rstrip("\n").split(" ")
            parts = [part for part in parts if part]
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != dimension:
                raise EmbeddingFormatError(
                    f"{path}:{line_number}: word {word!r} has {len(values)} values, expected {dimension}"
                )
            if word in vectors:
                continue
            try:
                vectors[word] = np.asarray(values, dtype=np.float64)
            except ValueError:
                raise EmbeddingFormatError(f"{path}:{line_number}: non-numeric value for word {word!r}")

    if len(vectors) != declared_count:
        logger.warning("%s declares %d words but holds %d distinct words", path, declared_count, len(vectors))
    logger.info("Loaded %d embeddings of dimension %d from %s", len(vectors), dimension, path)
    return EmbeddingTable(dimension=dimension, vectors=vectors)


def save_embeddings(table: EmbeddingTable, path: Union[str, Path]) -> None:
    """Write an EmbeddingTable in the word2vec text format."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"{len(table)} {table.dimension}\n")
        for word, vector in table.vectors.items():
            handle.write(word + " " + " ".join(repr(float(value)) for value in vector) + "\n")


def _lexicon_lines(path: Union[str, Path]) -> Iterable[str]:
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line and not line.startswith("#"):
                yield line


def load_lexicon(path: Union[str, Path]) -> Tuple[str, ...]:
    """
    Load a one-word-per-line lexicon, keeping file order and dropping duplicates.

    Lines starting with "#" are comments.
    """
    words: List[str] = []
    for line in _lexicon_lines(path):
        word = line.split("\t")[0].strip().lower()
        if word not in words:
            words.append(word)
    return tuple(words)


def load_antonyms(path: Union[str, Path]) -> Dict[str, FrozenSet[str]]:
    """
    Load a two-column "word<TAB>antonym" lexicon as a symmetric antonym map.

    Raises:
        ValueError: If a line does not have exactly two tab-separated columns
    """
    pairs = []
    for line in _lexicon_lines(path):
        columns = [column.strip().lower() for column in line.split("\t")]
        if len(columns) != 2 or not all(columns):
            raise ValueError(f"{path}: antonym line {line!r} must be 'word<TAB>antonym'")
        pairs.append((columns[0], columns[1]))
    return antonym_map(pairs)


def antonym_map(pairs: Iterable[Tuple[str, str]]) -> Dict[str, FrozenSet[str]]:
    """Build a symmetric antonym map from (word, antonym) pairs."""
    mapping: Dict[str, set] = {}
    for word, antonym in pairs:
        mapping.setdefault(word, set()).add(antonym)
        mapping.setdefault(antonym, set()).add(word)
    return {word: frozenset(antonyms) for word, antonyms in mapping.items()}
