"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import logging
import re
import string
from collections import Counter
from collections.abc import Callable, Collection, Iterable, Sequence

import numpy as np
from pydantic import BaseModel, Field

from lib.core.core_schemas_errors import EmptySequenceError, UndefinedMetricError


logger = logging.getLogger(__name__)

Embedder = Callable[[list[str]], Sequence[np.ndarray]]

ARTICLES = re.compile(r"\b(a|an|the)\b")
PUNCTUATION = str.maketrans("", "", string.punctuation)


##################################################################################################################
#   ANSWER METRICS
##################################################################################################################

def normalize(answer: str) -> list[str]:
    """Lowercase, drop punctuation and articles, and split on whitespace.

    Examples:
        >>> normalize("The Eiffel Tower!")
        ['eiffel', 'tower']
    """
    text = answer.lower().translate(PUNCTUATION)
    return ARTICLES.sub(" ", text).split()


def exact_match(prediction: str, gold: str) -> int:
    """Return 1 when both answers normalize to the same tokens, else 0."""
    return int(normalize(prediction) == normalize(gold))


def token_f1(prediction: str, gold: str) -> float:
    """Token-overlap F1 of two answers, counting repeated tokens.

    Both empty scores 1; exactly one empty scores 0.
    """
    predicted, expected = normalize(prediction), normalize(gold)
    if not predicted and not expected:
        return 1.0
    if not predicted or not expected:
        return 0.0
    overlap = sum((Counter(predicted) & Counter(expected)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(predicted)
    recall = overlap / len(expected)
    return 2 * precision * recall / (precision + recall)


def pr_at_k(retrieved: Sequence[str], supporting: Collection[str], k: int) -> float:
    """Fraction of the supporting ids found among the first k retrieved ids.

    Raises:
        ValueError: If k is negative or there is no supporting id.
    """
    if k < 0:
        error_message = f"k must be non-negative, got {k}"
        raise ValueError(error_message)
    wanted = set(supporting)
    if not wanted:
        error_message = "PR@k needs at least one supporting id"
        raise ValueError(error_message)
    return len(wanted & set(retrieved[:k])) / len(wanted)


##################################################################################################################
#   SCHEMA METRICS
##################################################################################################################

class TokenVectors:
    """Memoizes token embeddings so each distinct token is embedded once."""

    def __init__(self, embedder: Embedder) -> None:
        self._embedder = embedder
        self._cache: dict[str, np.ndarray] = {}

    def matrix(self, tokens: Sequence[str]) -> np.ndarray:
        """Return one row per token."""
        missing = [token for token in dict.fromkeys(tokens) if token not in self._cache]
        if missing:
            for token, vector in zip(missing, self._embedder(missing), strict=True):
                self._cache[token] = np.asarray(vector, dtype=np.float64)
        return np.vstack([self._cache[token] for token in tokens])


def phrase_tokens(phrase: str) -> list[str]:
    """Split a schema phrase into lowercase tokens."""
    return phrase.lower().split()


def bertscore(reference: Sequence[str], candidate: Sequence[str], embedder: Embedder | TokenVectors) -> float:
    """Greedy-matching F1 between two token sequences.

    Recall averages, over reference tokens, the best dot product with a
    candidate token; precision does the same over candidate tokens. The score
    is their harmonic mean, or 0 when they sum to 0.

    Args:
        reference: Ground-truth tokens.
        candidate: Predicted tokens.
        embedder: Returns a unit vector per token.

    Returns:
        Score in [-1, 1].

    Raises:
        EmptySequenceError: If either sequence is empty.
    """
    if not reference or not candidate:
        error_message = "BertScore needs two non-empty token sequences"
        raise EmptySequenceError(error_message)
    vectors = embedder if isinstance(embedder, TokenVectors) else TokenVectors(embedder)
    similarity = vectors.matrix(reference) @ vectors.matrix(candidate).T
    recall = float(similarity.max(axis=1).mean())
    precision = float(similarity.max(axis=0).mean())
    if recall + precision == 0:
        return 0.0
    return 2 * recall * precision / (recall + precision)


def _phrase_set(phrases: Iterable[str], what: str) -> list[list[str]]:
    """Tokenize phrases for BERTScore matching, dropping duplicates and phrases without tokens.

    Args:
        phrases: Concept phrases.
        what: Name of the set, used in the error message.

    Raises:
        EmptySequenceError: If no phrase has a token.
    """
    tokenized = {" ".join(phrase_tokens(phrase)): phrase_tokens(phrase) for phrase in phrases}
    tokenized.pop("", None)
    if not tokenized:
        error_message = f"The {what} set is empty"
        raise EmptySequenceError(error_message)
    return list(tokenized.values())


def bs_recall(truth: Iterable[str], induced: Iterable[str], embedder: Embedder | TokenVectors) -> float:
    """Mean over induced phrases of the best BertScore against a ground-truth phrase.

    Duplicate phrases count once.

    Raises:
        EmptySequenceError: If either set is empty.
    """
    references = _phrase_set(truth, "ground-truth")
    candidates = _phrase_set(induced, "induced")
    vectors = embedder if isinstance(embedder, TokenVectors) else TokenVectors(embedder)
    best = [max(bertscore(reference, candidate, vectors) for reference in references) for candidate in candidates]
    return float(np.mean(best))


def bs_coverage(truth_sets: Iterable[Iterable[str]], induced_sets: Iterable[Iterable[str]], embedder: Embedder | TokenVectors) -> float:
    """BS-R applied to the unions of all ground-truth and all induced sets."""
    truth = [phrase for phrases in truth_sets for phrase in phrases]
    induced = [phrase for phrases in induced_sets for phrase in phrases]
    return bs_recall(truth, induced, embedder)


##################################################################################################################
#   CLASSIFICATION METRICS
##################################################################################################################

class ConfusionCounts(BaseModel):
    """Binary confusion counts; the positive class is "true segment"."""
    tp: int = Field(default=0, ge=0)
    fp: int = Field(default=0, ge=0)
    tn: int = Field(default=0, ge=0)
    fn: int = Field(default=0, ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_labels(cls, truth: Iterable[bool], predicted: Iterable[bool]) -> "ConfusionCounts":
        """Count (truth, prediction) label pairs."""
        counts = Counter(zip(truth, predicted, strict=True))
        return cls(
            tp=counts[(True, True)],
            fp=counts[(False, True)],
            tn=counts[(False, False)],
            fn=counts[(True, False)],
        )


def _ratio(numerator: int, denominator: int, name: str) -> float:
    """Divide two counts; a zero denominator logs a warning and gives 0."""
    if denominator == 0:
        logger.warning("%s has a zero denominator, counted as 0", name)
        return 0.0
    return numerator / denominator


def _check_defined(counts: ConfusionCounts) -> None:
    """Refuse confusion counts that are all zero.

    Raises:
        UndefinedMetricError: If every count is zero.
    """
    if counts.total == 0:
        error_message = "Metric is undefined when every confusion count is zero"
        raise UndefinedMetricError(error_message)


def balanced_accuracy(counts: ConfusionCounts, as_sum: bool = False) -> float:
    """Mean of the recalls of both classes.

    Args:
        counts: Confusion counts.
        as_sum: Return the plain sum of the two recalls (range [0, 2]) instead of their mean.

    Raises:
        UndefinedMetricError: If all counts are zero.
    """
    _check_defined(counts)
    positive_recall = _ratio(counts.tp, counts.tp + counts.fn, "TP/(TP+FN)")
    negative_recall = _ratio(counts.tn, counts.tn + counts.fp, "TN/(TN+FP)")
    total = positive_recall + negative_recall
    return total if as_sum else total / 2


def felm_f1(counts: ConfusionCounts) -> float:
    """F1 of the negative class (detecting false segments).

    Precision is TN/(TN+FN) and recall TN/(TN+FP).

    Raises:
        UndefinedMetricError: If all counts are zero.
    """
    _check_defined(counts)
    precision = _ratio(counts.tn, counts.tn + counts.fn, "TN/(TN+FN)")
    recall = _ratio(counts.tn, counts.tn + counts.fp, "TN/(TN+FP)")
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)
