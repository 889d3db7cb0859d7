"""
Four-region user taxonomy on (topic Gini, normalized page Gini).

A user sits on the "high" side of an axis only when strictly above the
threshold; users exactly on a threshold fall on the low side.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .metrics import UserProfiles

# mean topic and page scores of a large real-world population; handy fixed thresholds
REFERENCE_THRESHOLDS = (0.818, 0.108)


class TaxonomyLabel(str, enum.Enum):
    MULTI_TOPIC_SE = "MultiTopicSE"          # high pages, low topics
    SINGLE_TOPIC_SE = "SingleTopicSE"        # high pages, high topics
    EXPOSURE_BY_INTEREST = "ExposureByInterest"  # low pages, high topics
    LOW_ACTIVITY_REGION = "LowActivityRegion"    # low pages, low topics

    def __str__(self) -> str:
        return self.value


LABELS = tuple(TaxonomyLabel)
_CODE = {lab: i for i, lab in enumerate(LABELS)}


@dataclass(frozen=True)
class TaxonomyThresholds:
    t_topics: float
    t_pages: float
    source: str = "explicit"

    def __post_init__(self):
        for name in ("t_topics", "t_pages"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.source not in ("explicit", "computed-from-data"):
            raise ValueError(f"unknown threshold source {self.source!r}")

    @classmethod
    def parse(cls, text: str) -> TaxonomyThresholds:
        """Parse ``"t_topics,t_pages"``."""
        try:
            a, b = (float(x) for x in text.split(","))
        except ValueError:
            raise ValueError(f"thresholds must be 't_topics,t_pages', got {text!r}") from None
        return cls(a, b, "explicit")

    def as_dict(self) -> dict:
        return {"t_topics": self.t_topics, "t_pages": self.t_pages, "source": self.source}


def _scored(profiles: UserProfiles) -> np.ndarray:
    if not profiles.has_topics:
        return np.zeros(len(profiles), dtype=bool)
    return profiles.topic_scored & ~np.isnan(profiles.gini_pages_norm)


def compute_thresholds(profiles: UserProfiles) -> TaxonomyThresholds:
    """Population means of both scores over users having both."""
    mask = _scored(profiles)
    n = int(mask.sum())
    if n == 0:
        raise ValueError("no user has both a topic and a page score")
    t_topics = math.fsum(profiles.gini_topics[mask]) / n
    t_pages = math.fsum(profiles.gini_pages_norm[mask]) / n
    return TaxonomyThresholds(t_topics, t_pages, "computed-from-data")


def classify_user(g_topics: float, g_pages_norm: float, th: TaxonomyThresholds) -> TaxonomyLabel:
    high_pages = g_pages_norm > th.t_pages
    high_topics = g_topics > th.t_topics
    if high_pages:
        return TaxonomyLabel.SINGLE_TOPIC_SE if high_topics else TaxonomyLabel.MULTI_TOPIC_SE
    return TaxonomyLabel.EXPOSURE_BY_INTEREST if high_topics else TaxonomyLabel.LOW_ACTIVITY_REGION


def classify_arrays(g_topics, g_pages_norm, th: TaxonomyThresholds) -> np.ndarray:
    """Vectorized :func:`classify_user`; returns integer codes into ``LABELS``."""
    hp = np.asarray(g_pages_norm) > th.t_pages
    ht = np.asarray(g_topics) > th.t_topics
    codes = np.full(hp.shape, _CODE[TaxonomyLabel.LOW_ACTIVITY_REGION], dtype=np.int8)
    codes[hp & ~ht] = _CODE[TaxonomyLabel.MULTI_TOPIC_SE]
    codes[hp & ht] = _CODE[TaxonomyLabel.SINGLE_TOPIC_SE]
    codes[~hp & ht] = _CODE[TaxonomyLabel.EXPOSURE_BY_INTEREST]
    return codes


@dataclass(frozen=True, eq=False)
class Classification:
    """Labels of the scored users plus per-label counts."""

    thresholds: TaxonomyThresholds
    user_ids: np.ndarray
    g_topics: np.ndarray
    g_pages_norm: np.ndarray
    codes: np.ndarray

    @property
    def labels(self) -> list[TaxonomyLabel]:
        return [LABELS[c] for c in self.codes.tolist()]

    @property
    def counts(self) -> dict[str, int]:
        bc = np.bincount(self.codes.astype(np.int64), minlength=len(LABELS))
        return {lab.value: int(c) for lab, c in zip(LABELS, bc)}

    def label_of(self, user_id: str) -> TaxonomyLabel:
        hit = np.flatnonzero(self.user_ids == user_id)
        if len(hit) == 0:
            raise KeyError(f"user {user_id!r} has no taxonomy label")
        return LABELS[self.codes[hit[0]]]

    def summary(self) -> dict:
        n = len(self.codes)
        counts = self.counts
        return {
            "thresholds": self.thresholds.as_dict(),
            "n_scored": n,
            "counts": counts,
            "fractions": {k: (v / n if n else 0.0) for k, v in counts.items()},
        }

    def to_csv(self, path) -> None:
        import pandas as pd

        pd.DataFrame(
            {
                "user_id": self.user_ids,
                "gini_topics": self.g_topics,
                "gini_pages_norm": self.g_pages_norm,
                "label": np.array([lab.value for lab in LABELS], dtype=object)[self.codes],
            }
        ).to_csv(path, index=False, float_format="%.6f", lineterminator="\n")

    def write_summary(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def classify_population(
    profiles: UserProfiles, th: TaxonomyThresholds | None = None
) -> Classification:
    """Label every user that has both scores.

    Thresholds default to the population means (:func:`compute_thresholds`).
    """
    mask = _scored(profiles)
    if th is None:
        th = compute_thresholds(profiles)
    if mask.any():
        gt, gp = profiles.gini_topics[mask], profiles.gini_pages_norm[mask]
    else:
        gt = gp = np.zeros(0)
    return Classification(th, profiles.users.tokens[mask], gt, gp, classify_arrays(gt, gp, th))
