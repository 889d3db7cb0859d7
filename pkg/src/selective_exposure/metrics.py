"""
Per-user activity and selective-exposure scores.

The Gini index used throughout is half the relative mean absolute
difference of a vector, taken over the full page (or topic) axis with the
zero entries included.  Because a user with fewer likes than there are
pages can never spread evenly, the raw page Gini is biased upward for
sparse users; :func:`gini_min` gives the smallest value reachable with a
given number of likes and :func:`normalized_gini` rescales against it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bipartite import (
    UserPageVector,
    UserPostIncidence,
    UserTopicVector,
    _post_rows,
    aggregate_by_page,
    build_user_post,
)
from .ingest import Dataset, IdIndex

SECONDS_PER_DAY = 86400.0

PROFILE_COLUMNS = (
    "user_id",
    "activity",
    "lifetime_days",
    "n_pages",
    "n_topics",
    "gini_topics",
    "gini_pages_raw",
    "gini_pages_min",
    "gini_pages_norm",
)


# ---------------------------------------------------------------------------
# Gini kernels


def _gini_sorted(ys: np.ndarray) -> np.ndarray:
    """Row-wise Gini of ascending-sorted, non-negative rows with positive sum.

    Uses the folded form ``sum_i (n + 1 - 2i) (y[n-i] - y[i-1])`` over the
    lower half, so every term is non-negative and a constant row gives
    exactly 0.  Rows are divided by their sum first, which makes a single
    spike ``[0, ..., 0, c]`` give exactly ``(n - 1) / n``.
    """
    n = ys.shape[1]
    z = ys / ys.sum(axis=1, keepdims=True)
    half = n // 2
    w = n + 1 - 2.0 * np.arange(1, half + 1)
    num = ((z[:, ::-1][:, :half] - z[:, :half]) * w).sum(axis=1)
    return num / (n * z.sum(axis=1))


def gini(values) -> float:
    """Gini index of a non-negative vector.

    Computed from the sorted values in O(n log n); equal to the
    double-sum definition ``sum |y_i - y_j| / (2 n^2 mean(y))``.

    Raises
    ------
    ValueError
        For an empty, negative, non-finite or all-zero input (the mean is zero).
    """
    y = np.asarray(values, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("gini of an empty vector is undefined")
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise ValueError("gini requires finite non-negative values")
    y = np.sort(y)
    if y[-1] == 0:
        raise ValueError("gini of an all-zero vector is undefined (zero mean)")
    return float(_gini_sorted(y[None, :])[0])


def gini_rows(matrix) -> np.ndarray:
    """Gini of every row of a non-negative matrix; ``nan`` for all-zero rows."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected a 2-D array")
    out = np.full(m.shape[0], np.nan)
    if m.shape[1] == 0:
        return out
    ys = np.sort(m, axis=1)
    ok = ys[:, -1] > 0
    if ok.any():
        out[ok] = _gini_sorted(ys[ok])
    return out


def gini_min(n_likes, n_pages):
    """Smallest page Gini reachable by ``n_likes`` likes over ``n_pages`` pages.

    ``(n_pages - n_likes) / n_pages`` when ``n_likes <= n_pages`` (one like on
    each of ``n_likes`` pages), ``0`` otherwise.  Accepts scalars or arrays.

    For ``n_likes > n_pages`` with ``n_pages`` not dividing ``n_likes`` the
    true integer minimum is slightly positive; this function still returns 0.
    """
    l = np.asarray(n_likes, dtype=np.int64)
    n = np.asarray(n_pages, dtype=np.int64)
    if np.any(l < 1) or np.any(n < 1):
        raise ValueError("n_likes and n_pages must be >= 1")
    out = np.where(l <= n, (n - l) / n, 0.0)
    return float(out) if out.ndim == 0 else out


def normalized_gini(g, g_min):
    """Rescale a Gini value to ``[0, 1]`` between its minimum and 1."""
    g = np.asarray(g, dtype=np.float64)
    g_min = np.asarray(g_min, dtype=np.float64)
    if np.any(g_min >= 1):
        raise ValueError("g_min must be < 1")
    out = (g - g_min) / (1.0 - g_min)
    return float(out) if out.ndim == 0 else out


def gini_pages_raw(upv: UserPageVector) -> np.ndarray:
    """Page Gini of every user over all ``n_pages`` pages.

    Uses integer arithmetic for the numerator so the only rounding is the
    final division.
    """
    n = upv.n_pages
    m = upv.n_pages_liked
    rows = np.repeat(np.arange(upv.n_users, dtype=np.int64), m)
    order = np.lexsort((upv.counts, rows))
    c = upv.counts[order]
    rank = np.arange(len(c), dtype=np.int64) - upv.indptr[rows] + 1
    weight = n - 2 * m[rows] + 2 * rank - 1
    if len(c) == 0:
        return np.zeros(0)
    num = np.add.reduceat(weight * c, upv.indptr[:-1])
    return num / (n * upv.totals)


def gini_pages_min(upv: UserPageVector) -> np.ndarray:
    return gini_min(upv.totals, upv.n_pages) if upv.n_users else np.zeros(0)


def gini_pages_norm(upv: UserPageVector) -> np.ndarray:
    return normalized_gini(gini_pages_raw(upv), gini_pages_min(upv)) if upv.n_users else np.zeros(0)


def gini_topics(utv: UserTopicVector) -> np.ndarray:
    """Topic Gini per user over all topics; ``nan`` when no liked post had a mixture."""
    return gini_rows(utv.weights)


# ---------------------------------------------------------------------------
# topic binarization


@dataclass(frozen=True)
class TopicEngagementRule:
    """Per-topic thresholds: the mean proportion of that topic over the corpus."""

    thresholds: np.ndarray
    n_posts: int

    def apply(self, proportions) -> np.ndarray:
        return np.asarray(proportions, dtype=np.float64) > self.thresholds


def binarize_topics(proportions) -> tuple[np.ndarray, TopicEngagementRule]:
    """Mark post ``i`` as treating topic ``t`` iff ``p[i, t]`` exceeds the topic's corpus mean.

    The comparison is strict, so a topic with the same proportion in every
    post is treated by none of them.
    """
    p = np.asarray(proportions, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] == 0:
        raise ValueError("need a non-empty posts x topics matrix")
    n = p.shape[0]
    means = np.array([math.fsum(col) / n for col in p.T])
    # the exact mean lies in [min, max]; clamp away the division rounding
    means = np.clip(means, p.min(axis=0), p.max(axis=0))
    rule = TopicEngagementRule(means, n)
    return rule.apply(p), rule


def _topics_union(upi: UserPostIncidence, treats: np.ndarray) -> np.ndarray:
    """Number of distinct treated topics across each user's liked posts.

    ``treats`` has one row per post of ``upi``.
    """
    out = np.zeros(upi.n_users, dtype=np.int64)
    t8 = treats.view(np.uint8) if treats.dtype == bool else treats.astype(np.uint8)
    for start, stop in upi.chunks():
        lo, hi = upi.indptr[start], upi.indptr[stop]
        offsets = upi.indptr[start:stop] - lo
        union = np.maximum.reduceat(t8[upi.posts[lo:hi]], offsets, axis=0)
        out[start:stop] = union.sum(axis=1)
    return out


def topics_per_user(
    upi: UserPostIncidence, treats: np.ndarray, post_mixture: np.ndarray | None = None
) -> np.ndarray:
    """Size of the union of topics treated by the posts each user liked.

    Parameters
    ----------
    treats : ndarray of bool, shape (n_mixtures, n_topics)
        Output of :func:`binarize_topics`.
    post_mixture : ndarray of int, optional
        Row of ``treats`` for every post (``-1`` = none); if omitted
        ``treats`` must have one row per post.
    """
    table, _ = _post_rows(np.asarray(treats, dtype=bool), post_mixture, upi.n_posts)
    return _topics_union(upi, table.astype(bool))


# ---------------------------------------------------------------------------
# activity and lifetime


def activity(upi: UserPostIncidence, user_id: str) -> int:
    """Number of likes of one user.  Unknown users raise ``KeyError``."""
    u = upi.user_index(user_id)
    return int(upi.indptr[u + 1] - upi.indptr[u])


def lifetimes(upi: UserPostIncidence) -> np.ndarray:
    """Days between first and last like, per user."""
    return (upi.last_seen - upi.first_seen) / SECONDS_PER_DAY


def lifetime(upi: UserPostIncidence, user_id: str) -> float:
    u = upi.user_index(user_id)
    return float((upi.last_seen[u] - upi.first_seen[u]) / SECONDS_PER_DAY)


def pages_per_user(upv: UserPageVector) -> np.ndarray:
    return upv.n_pages_liked


# ---------------------------------------------------------------------------
# profile table


@dataclass(frozen=True, eq=False)
class UserProfiles:
    """Column-wise per-user profile table.

    ``n_topics`` and ``gini_topics`` are ``None`` when no topic data was
    supplied; individual users without any mixture-bearing like have
    ``gini_topics = nan``.
    """

    users: IdIndex
    activity: np.ndarray
    lifetime_days: np.ndarray
    n_pages: np.ndarray
    gini_pages_raw: np.ndarray
    gini_pages_min: np.ndarray
    gini_pages_norm: np.ndarray
    n_topics: np.ndarray | None = None
    gini_topics: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.users)

    @property
    def has_topics(self) -> bool:
        return self.gini_topics is not None

    @property
    def topic_scored(self) -> np.ndarray:
        """Users with an available topic Gini."""
        if self.gini_topics is None:
            return np.zeros(len(self), dtype=bool)
        return ~np.isnan(self.gini_topics)

    def __getitem__(self, user_id: str) -> dict:
        u = self.users.index(user_id)
        row = {
            "user_id": user_id,
            "activity": int(self.activity[u]),
            "lifetime_days": float(self.lifetime_days[u]),
            "n_pages": int(self.n_pages[u]),
            "n_topics": None,
            "gini_topics": None,
            "gini_pages_raw": float(self.gini_pages_raw[u]),
            "gini_pages_min": float(self.gini_pages_min[u]),
            "gini_pages_norm": float(self.gini_pages_norm[u]),
        }
        if self.has_topics:
            row["n_topics"] = int(self.n_topics[u])
            g = float(self.gini_topics[u])
            row["gini_topics"] = None if math.isnan(g) else g
        return row

    def to_frame(self):
        import pandas as pd

        n = len(self)
        empty = np.full(n, np.nan)
        return pd.DataFrame(
            {
                "user_id": self.users.tokens,
                "activity": self.activity,
                "lifetime_days": self.lifetime_days,
                "n_pages": self.n_pages,
                "n_topics": pd.array(self.n_topics, dtype="Int64") if self.has_topics
                else pd.array([pd.NA] * n, dtype="Int64"),
                "gini_topics": self.gini_topics if self.has_topics else empty,
                "gini_pages_raw": self.gini_pages_raw,
                "gini_pages_min": self.gini_pages_min,
                "gini_pages_norm": self.gini_pages_norm,
            },
            columns=list(PROFILE_COLUMNS),
        )

    def to_csv(self, path) -> None:
        """Write the profile table; reals with 6 decimals, unavailable as empty."""
        self.to_frame().to_csv(path, index=False, float_format="%.6f", na_rep="", lineterminator="\n")


def _chunk_profile(upi, post_page, n_pages, topic_table, has_mixture, treats_table):
    upv = aggregate_by_page(upi, post_page, n_pages)
    g_raw = gini_pages_raw(upv)
    g_min = gini_min(upv.totals, n_pages)
    out = {
        "activity": upi.degree,
        "lifetime_days": lifetimes(upi),
        "n_pages": upv.n_pages_liked,
        "gini_pages_raw": g_raw,
        "gini_pages_min": g_min,
        "gini_pages_norm": normalized_gini(g_raw, g_min),
    }
    if topic_table is not None:
        offsets = upi.indptr[:-1]
        weights = np.add.reduceat(topic_table[upi.posts], offsets, axis=0)
        out["gini_topics"] = gini_rows(weights)
        out["n_topics"] = _topics_union(upi, treats_table)
    return out


def compute_profiles(dataset: Dataset, workers: int = 1) -> UserProfiles:
    """All per-user quantities for a dataset.

    Users are processed in fixed-size chunks (independent of ``workers``), so
    the result is bit-for-bit the same at any worker count.
    """
    upi = build_user_post(dataset.interactions)
    topic_table = has_mixture = treats_table = None
    if dataset.has_topics:
        props = dataset.mixtures.proportions
        topic_table, has_mixture = _post_rows(props, dataset.post_mixture, upi.n_posts)
        treats, _ = binarize_topics(props) if len(props) else (np.zeros(props.shape, bool), None)
        treats_table, _ = _post_rows(treats.astype(np.uint8), dataset.post_mixture, upi.n_posts)
        treats_table = treats_table.astype(np.uint8)

    def work(bounds):
        return _chunk_profile(
            upi.slice(*bounds), dataset.post_page, dataset.n_pages,
            topic_table, has_mixture, treats_table,
        )

    chunks = upi.chunks()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]

    def cat(key, dtype):
        if not parts:
            return np.zeros(0, dtype=dtype)
        return np.concatenate([p[key] for p in parts]).astype(dtype, copy=False)

    kw = {}
    if dataset.has_topics:
        kw = {"n_topics": cat("n_topics", np.int64), "gini_topics": cat("gini_topics", np.float64)}
    return UserProfiles(
        users=upi.users,
        activity=cat("activity", np.int64),
        lifetime_days=cat("lifetime_days", np.float64),
        n_pages=cat("n_pages", np.int64),
        gini_pages_raw=cat("gini_pages_raw", np.float64),
        gini_pages_min=cat("gini_pages_min", np.float64),
        gini_pages_norm=cat("gini_pages_norm", np.float64),
        **kw,
    )
