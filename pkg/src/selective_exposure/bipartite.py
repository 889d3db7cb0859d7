"""
User-post, user-page and user-topic incidence structures.

Everything is stored CSR-style: ``indptr[u]:indptr[u + 1]`` delimits the
entries of user ``u``.  Users without likes never appear.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import IdIndex, IngestError, InteractionLog

CACHE_FORMAT = "selective-exposure/user-post"
CACHE_VERSION = 1

# likes per work unit; fixed so results never depend on the worker count
CHUNK_LIKES = 1 << 18


@dataclass(frozen=True, eq=False)
class UserPostIncidence:
    """Binary user x post incidence with per-user first/last like time."""

    users: IdIndex
    n_posts: int
    indptr: np.ndarray
    posts: np.ndarray
    first_seen: np.ndarray
    last_seen: np.ndarray

    @property
    def n_users(self) -> int:
        return len(self.indptr) - 1

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def user_index(self, user_id: str) -> int:
        return self.users.index(user_id)

    def liked(self, user_id: str) -> np.ndarray:
        u = self.user_index(user_id)
        return self.posts[self.indptr[u]:self.indptr[u + 1]]

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_users, dtype=np.int64), self.degree)

    def slice(self, start: int, stop: int) -> UserPostIncidence:
        """Users ``start:stop`` as a standalone incidence (user tokens kept)."""
        lo, hi = self.indptr[start], self.indptr[stop]
        return UserPostIncidence(
            IdIndex(self.users.tokens[start:stop]),
            self.n_posts,
            self.indptr[start:stop + 1] - lo,
            self.posts[lo:hi],
            self.first_seen[start:stop],
            self.last_seen[start:stop],
        )

    def chunks(self, max_likes: int = CHUNK_LIKES) -> list[tuple[int, int]]:
        """Contiguous user ranges holding at most ``max_likes`` likes each.

        A single user with more likes than the limit gets a range of their own.
        """
        bounds = [0]
        n = self.n_users
        while bounds[-1] < n:
            start = bounds[-1]
            stop = int(np.searchsorted(self.indptr, self.indptr[start] + max_likes, side="right")) - 1
            bounds.append(min(max(stop, start + 1), n))
        return list(zip(bounds[:-1], bounds[1:]))


def build_user_post(interactions: InteractionLog) -> UserPostIncidence:
    """Build the user-post incidence from deduplicated interactions.

    Raises
    ------
    ValueError
        If the same (user, post) pair occurs twice.
    """
    user = np.asarray(interactions.user, dtype=np.int64)
    post = np.asarray(interactions.post, dtype=np.int64)
    ts = np.asarray(interactions.timestamp, dtype=np.int64)
    order = np.lexsort((post, user))
    user, post, ts = user[order], post[order], ts[order]
    if len(user) > 1 and np.any((user[1:] == user[:-1]) & (post[1:] == post[:-1])):
        raise ValueError("interactions contain duplicate (user, post) pairs")

    present, counts = np.unique(user, return_counts=True)
    indptr = np.zeros(len(present) + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    if len(user):
        starts = indptr[:-1]
        first = np.minimum.reduceat(ts, starts)
        last = np.maximum.reduceat(ts, starts)
    else:
        first = last = np.zeros(0, dtype=np.int64)
    users = interactions.users
    if len(present) != len(users):
        users = IdIndex(users.tokens[present])
    return UserPostIncidence(users, len(interactions.posts), indptr, post, first, last)


@dataclass(frozen=True, eq=False)
class UserPageVector:
    """Per-user like counts over pages (sparse, zero entries omitted)."""

    users: IdIndex
    n_pages: int
    indptr: np.ndarray
    pages: np.ndarray
    counts: np.ndarray

    @property
    def n_users(self) -> int:
        return len(self.indptr) - 1

    @property
    def n_pages_liked(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def totals(self) -> np.ndarray:
        if len(self.counts) == 0:
            return np.zeros(self.n_users, dtype=np.int64)
        return np.add.reduceat(self.counts, self.indptr[:-1])

    def as_dict(self, user_id: str) -> dict[int, int]:
        u = self.users.index(user_id)
        sl = slice(self.indptr[u], self.indptr[u + 1])
        return dict(zip(self.pages[sl].tolist(), self.counts[sl].tolist()))

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n_users, self.n_pages), dtype=np.int64)
        out[np.repeat(np.arange(self.n_users), self.n_pages_liked), self.pages] = self.counts
        return out


def aggregate_by_page(
    upi: UserPostIncidence, post_page: np.ndarray, n_pages: int | None = None
) -> UserPageVector:
    """Group each user's liked posts by page and count them.

    Parameters
    ----------
    upi : UserPostIncidence
    post_page : ndarray of int
        Page index of every post; negative for posts without a page.
    n_pages : int, optional
        Length of the page axis, defaults to ``post_page.max() + 1``.
    """
    post_page = np.asarray(post_page, dtype=np.int64)
    if n_pages is None:
        n_pages = int(post_page.max()) + 1 if len(post_page) else 0
    pg = post_page[upi.posts]
    if np.any(pg < 0):
        raise IngestError(f"{int((pg < 0).sum())} liked posts have no page assignment")

    key = np.sort(upi.row_ids() * n_pages + pg)
    if len(key):
        new = np.ones(len(key), dtype=bool)
        new[1:] = key[1:] != key[:-1]
        starts = np.flatnonzero(new)
        counts = np.diff(np.append(starts, len(key)))
        ukey = key[starts]
    else:
        counts = ukey = np.zeros(0, dtype=np.int64)
    rows, pages = np.divmod(ukey, n_pages) if n_pages else (ukey, ukey)
    indptr = np.searchsorted(rows, np.arange(upi.n_users + 1), side="left").astype(np.int64)
    return UserPageVector(upi.users, n_pages, indptr, pages, counts.astype(np.int64))


@dataclass(frozen=True, eq=False)
class UserTopicVector:
    """Dense per-user topic weights plus the number of liked posts that carried a mixture."""

    users: IdIndex
    weights: np.ndarray
    n_with_mixture: np.ndarray
    n_likes_without_mixture: int = 0

    @property
    def n_topics(self) -> int:
        return self.weights.shape[1]

    def row(self, user_id: str) -> np.ndarray:
        return self.weights[self.users.index(user_id)]


def _post_rows(proportions: np.ndarray, post_mixture: np.ndarray | None, n_posts: int):
    """Dense per-post topic table (zero rows where no mixture) and mask."""
    if post_mixture is None:
        if proportions.shape[0] != n_posts:
            raise ValueError("mixture table must have one row per post")
        return proportions, np.ones(n_posts, dtype=bool)
    has = post_mixture >= 0
    table = np.zeros((n_posts, proportions.shape[1]))
    table[has] = proportions[post_mixture[has]]
    return table, has


def aggregate_by_topic(
    upi: UserPostIncidence,
    proportions: np.ndarray,
    post_mixture: np.ndarray | None = None,
) -> UserTopicVector:
    """Sum the topic mixtures of each user's liked posts.

    Parameters
    ----------
    proportions : ndarray, shape (n_mixtures, n_topics)
    post_mixture : ndarray of int, optional
        Row of ``proportions`` for each post (``-1`` = no mixture).  When
        omitted ``proportions`` must have one row per post.

    Notes
    -----
    Sums run in ascending post order per user, so the result is the same
    however the users are split into chunks.
    """
    proportions = np.asarray(proportions, dtype=np.float64)
    table, has = _post_rows(proportions, post_mixture, upi.n_posts)
    k = proportions.shape[1]
    weights = np.zeros((upi.n_users, k))
    n_with = np.zeros(upi.n_users, dtype=np.int64)
    for start, stop in upi.chunks():
        lo, hi = upi.indptr[start], upi.indptr[stop]
        posts = upi.posts[lo:hi]
        offsets = upi.indptr[start:stop] - lo
        weights[start:stop] = np.add.reduceat(table[posts], offsets, axis=0)
        n_with[start:stop] = np.add.reduceat(has[posts].astype(np.int64), offsets)
    missing = int(upi.degree.sum() - n_with.sum())
    return UserTopicVector(upi.users, weights, n_with, missing)


# ---------------------------------------------------------------------------
# on-disk cache


def save_incidence(path, upi: UserPostIncidence) -> None:
    """Write the incidence to an ``.npz`` file with a format/version header."""
    with open(Path(path), "wb") as fh:
        np.savez(
            fh,
            format=np.array(CACHE_FORMAT),
            version=np.array(CACHE_VERSION),
            users=np.array(upi.users.tokens.tolist(), dtype=str),
            n_posts=np.array(upi.n_posts),
            indptr=upi.indptr,
            posts=upi.posts,
            first_seen=upi.first_seen,
            last_seen=upi.last_seen,
        )


def load_incidence(path) -> UserPostIncidence:
    with np.load(Path(path), allow_pickle=False) as z:
        if str(z["format"]) != CACHE_FORMAT:
            raise ValueError(f"{path} is not a user-post incidence cache")
        if int(z["version"]) != CACHE_VERSION:
            raise ValueError(f"{path}: unsupported cache version {int(z['version'])}")
        return UserPostIncidence(
            IdIndex(z["users"].astype(object)),
            int(z["n_posts"]),
            z["indptr"],
            z["posts"],
            z["first_seen"],
            z["last_seen"],
        )
