"""Agreement metrics between predicted and reference scores.

LCC and SRCC compare id-aligned score vectors; ppref checks predicted
orderings against binary preference labels that survived annotator
screening.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.stats import rankdata

from latentmos.errors import InputError, UndefinedMetricError


@dataclass(frozen=True)
class ScoredSample:
    sample_id: str
    score: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise InputError(f"{self.sample_id}: non-finite score {self.score!r}")


class Vote(str, enum.Enum):
    A_SURE = "A_sure"
    A_UNSURE = "A_unsure"
    B_UNSURE = "B_unsure"
    B_SURE = "B_sure"

    @classmethod
    def parse(cls, text: str) -> "Vote":
        try:
            return cls(text.strip())
        except ValueError:
            choices = ", ".join(v.value for v in cls)
            raise InputError(f"unknown vote {text!r}; expected one of {choices}") from None


@dataclass(frozen=True)
class PreferenceAnnotation:
    pair_id: str
    id_a: str
    id_b: str
    votes: tuple[Vote, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "votes", tuple(v if isinstance(v, Vote) else Vote.parse(v) for v in self.votes)
        )
        if self.id_a == self.id_b:
            raise InputError(f"{self.pair_id}: a pair must compare two different samples")
        if not self.votes:
            raise InputError(f"{self.pair_id}: no votes")


@dataclass(frozen=True)
class PreferencePair:
    """Screened ordering: label ``"A"`` means id_a is preferred over id_b."""

    id_a: str
    id_b: str
    label: str

    def __post_init__(self) -> None:
        if self.label not in ("A", "B"):
            raise InputError(f"pair label must be 'A' or 'B', got {self.label!r}")
        if self.id_a == self.id_b:
            raise InputError(f"pair compares {self.id_a!r} with itself")


Scores = Union[Sequence[ScoredSample], Mapping[str, float]]


def as_score_map(scores: Scores) -> dict[str, float]:
    if isinstance(scores, Mapping):
        out = {str(k): float(v) for k, v in scores.items()}
        for k, v in out.items():
            if not math.isfinite(v):
                raise InputError(f"{k}: non-finite score {v!r}")
        return out
    out: dict[str, float] = {}
    for s in scores:
        if s.sample_id in out:
            raise InputError(f"duplicate sample id {s.sample_id!r}")
        out[s.sample_id] = float(s.score)
    return out


def _aligned(pred: Scores, truth: Scores) -> tuple[np.ndarray, np.ndarray]:
    p = as_score_map(pred)
    t = as_score_map(truth)
    if p.keys() != t.keys():
        missing = sorted(t.keys() - p.keys())
        extra = sorted(p.keys() - t.keys())
        raise InputError(f"sample ids differ: missing from predictions {missing}, unexpected {extra}")
    if len(t) < 2:
        raise UndefinedMetricError("correlation needs at least two samples")
    ids = list(t)
    return np.array([p[i] for i in ids]), np.array([t[i] for i in ids])


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedMetricError("correlation undefined for a constant score vector")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def lcc(pred: Scores, truth: Scores) -> float:
    """Pearson linear correlation of id-aligned scores."""
    return _pearson(*_aligned(pred, truth))


def srcc(pred: Scores, truth: Scores) -> float:
    """Spearman rank correlation; tied values share their average rank."""
    x, y = _aligned(pred, truth)
    return _pearson(rankdata(x, method="average"), rankdata(y, method="average"))


def screen_preferences(
    annotations: Iterable[PreferenceAnnotation], min_agree: int = 3
) -> list[PreferencePair]:
    """Keep pairs with a clear majority and no confident dissent.

    A is preferred when at least ``min_agree`` votes go to A (sure or not)
    and nobody votes B_sure; the mirrored rule yields B.  Other pairs are
    dropped.
    """
    if min_agree < 1:
        raise InputError(f"min_agree must be >= 1, got {min_agree!r}")
    pairs = []
    for ann in annotations:
        n = {v: 0 for v in Vote}
        for v in ann.votes:
            n[v] += 1
        a_votes = n[Vote.A_SURE] + n[Vote.A_UNSURE]
        b_votes = n[Vote.B_SURE] + n[Vote.B_UNSURE]
        if a_votes >= min_agree and n[Vote.B_SURE] == 0:
            pairs.append(PreferencePair(ann.id_a, ann.id_b, "A"))
        elif b_votes >= min_agree and n[Vote.A_SURE] == 0:
            pairs.append(PreferencePair(ann.id_a, ann.id_b, "B"))
    return pairs


def ppref_counts(pred: Scores, pairs: Sequence[PreferencePair]) -> tuple[int, int]:
    """(n_correct, n_all); a tied prediction never counts as correct."""
    p = as_score_map(pred)
    missing = sorted({i for pr in pairs for i in (pr.id_a, pr.id_b)} - p.keys())
    if missing:
        raise InputError(f"predictions missing for sample ids {missing}")
    correct = 0
    for pr in pairs:
        diff = p[pr.id_a] - p[pr.id_b]
        if (pr.label == "A" and diff > 0) or (pr.label == "B" and diff < 0):
            correct += 1
    return correct, len(pairs)


def ppref(pred: Scores, pairs: Sequence[PreferencePair]) -> float:
    """Fraction of preference pairs whose order the predictions reproduce."""
    correct, total = ppref_counts(pred, pairs)
    if total == 0:
        raise UndefinedMetricError("ppref undefined without preference pairs")
    return correct / total
