import logging
import math
from collections import Counter
from typing import Iterable, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from errors import EmptyVocabulary, NoNegativePool
from models import Sentence, TokenKind, VocabEntry, Vocabulary

logger = logging.getLogger(__name__)

NEGATIVE_POWER = 0.75


def build_vocab(sentences: Iterable[Sentence], min_count_word: int, min_count_citation: int) -> Vocabulary:
    """Count tokens in one pass and keep those meeting their kind's threshold"""
    if min_count_word < 1 or min_count_citation < 1:
        raise ValueError("min_count thresholds must be >= 1")

    counts: Counter = Counter()
    kinds = {}
    for sentence in sentences:
        for token in sentence.tokens:
            counts[token.surface] += 1
            kinds[token.surface] = token.kind

    entries = []
    for surface, count in counts.items():
        kind = kinds[surface]
        threshold = min_count_citation if kind == TokenKind.CITATION else min_count_word
        if count >= threshold:
            entries.append(VocabEntry(surface=surface, kind=kind, count=count))

    if not entries:
        raise EmptyVocabulary(
            f"No token survives min_count_word={min_count_word}, min_count_citation={min_count_citation}"
        )

    entries.sort(key=lambda e: (-e.count, e.surface))
    vocab = Vocabulary(entries=entries, total_tokens=sum(e.count for e in entries))
    n_citations = sum(1 for e in entries if e.kind == TokenKind.CITATION)
    logger.info(
        f"Vocabulary: {len(vocab)} tokens ({n_citations} citations), "
        f"{vocab.total_tokens} retained occurrences, {len(counts) - len(vocab)} dropped"
    )
    return vocab


def keep_probability(token_id: int, v: Vocabulary, t: float) -> float:
    """Subsampling keep probability; citations are never subsampled"""
    if t <= 0:
        raise ValueError("subsampling threshold must be > 0")
    entry = v.entries[token_id]
    if entry.kind == TokenKind.CITATION:
        return 1.0
    f = entry.count / v.total_tokens
    return min(1.0, math.sqrt(t / f) + t / f)


def keep_probabilities(v: Vocabulary, t: float) -> np.ndarray:
    """keep_probability for every id at once"""
    if t <= 0:
        raise ValueError("subsampling threshold must be > 0")
    f = v.counts() / float(v.total_tokens)
    keep = np.minimum(1.0, np.sqrt(t / f) + t / f)
    keep[v.citation_mask()] = 1.0
    return keep


class NegativeTable(BaseModel):
    """Cumulative count^0.75 mass over vocabulary ids; citation ids carry no mass"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    cumulative: np.ndarray

    @field_validator("cumulative")
    def validate_cumulative(cls, v):
        if v.ndim != 1 or len(v) == 0:
            raise ValueError("cumulative must be a nonempty vector")
        if np.any(np.diff(v) < 0):
            raise ValueError("cumulative must be non-decreasing")
        if abs(v[-1] - 1.0) > 1e-9:
            raise ValueError("cumulative must end at 1.0")
        return v

    def mass(self) -> np.ndarray:
        return np.diff(self.cumulative, prepend=0.0)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Inverse-CDF draws of vocabulary ids"""
        u = rng.random(size)
        return np.searchsorted(self.cumulative, u, side="right").astype(np.int64)


def build_negative_table(v: Vocabulary) -> NegativeTable:
    if len(v) < 1:
        raise NoNegativePool("empty vocabulary")
    weights = np.power(v.counts().astype(np.float64), NEGATIVE_POWER)
    weights[v.citation_mask()] = 0.0
    total = weights.sum()
    if total <= 0:
        raise NoNegativePool("vocabulary has no word tokens to draw negatives from")
    cumulative = np.minimum(np.cumsum(weights / total), 1.0)
    # trailing zero-mass ids must stay unreachable
    cumulative[np.flatnonzero(weights)[-1]:] = 1.0
    return NegativeTable(cumulative=cumulative)


def count_by_kind(v: Vocabulary) -> Tuple[int, int]:
    """(words, citations)"""
    citations = int(v.citation_mask().sum())
    return len(v) - citations, citations
