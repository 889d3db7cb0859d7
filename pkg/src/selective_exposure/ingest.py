"""
Reading interaction logs, post metadata and topic mixtures from disk.

All three inputs are plain CSV (interactions may also be JSONL).  String
identifiers are mapped to dense integer indices assigned in sorted token
order, so re-reading the same files always yields the same indices no
matter how rows are ordered on disk.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np
import pyarrow as pa
import pyarrow.compute as pc
from pyarrow import csv as pacsv

log = logging.getLogger(__name__)

INTERACTION_COLUMNS = ("user_id", "post_id", "timestamp")
POST_COLUMNS = ("post_id", "page_id")

SUM_TOLERANCE = 1e-6

_TOKEN_RE = r"^[A-Za-z0-9_-]+$"
_TIMESTAMP_RE = r"^[0-9]{1,18}$"
_token_match = re.compile(_TOKEN_RE).match


class IngestError(ValueError):
    """Fatal problem with an input file (bad header, broken invariant)."""


class InteractionRecord(NamedTuple):
    user_id: str
    post_id: str
    timestamp: int


@dataclass
class IngestStats:
    """Row accounting for one parsed file.

    ``rows == emitted + duplicates + malformed`` always holds.
    """

    rows: int = 0
    emitted: int = 0
    duplicates: int = 0
    malformed: int = 0

    def as_dict(self) -> dict:
        return {
            "rows": self.rows,
            "emitted": self.emitted,
            "duplicates": self.duplicates,
            "malformed": self.malformed,
        }


@dataclass(frozen=True, eq=False)
class IdIndex:
    """Bijection between string tokens and contiguous integer indices.

    Tokens are stored sorted; the index of a token is its rank.
    """

    tokens: np.ndarray

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> IdIndex:
        uniq = sorted(set(tokens))
        return cls(np.array(uniq, dtype=object))

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._lookup

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IdIndex):
            return NotImplemented
        return len(self) == len(other) and bool(np.all(self.tokens == other.tokens))

    @cached_property
    def _lookup(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tokens.tolist())}

    def index(self, token: str) -> int:
        try:
            return self._lookup[token]
        except KeyError:
            raise KeyError(f"unknown identifier {token!r}") from None

    def token(self, i: int) -> str:
        return self.tokens[i]

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        lookup = self._lookup
        return np.fromiter((lookup[t] for t in tokens), dtype=np.int64)


def _sorted_encode(arr: pa.Array) -> tuple[np.ndarray, np.ndarray]:
    """Dictionary-encode a string array with a sorted dictionary.

    Returns (sorted unique tokens as object array, int64 codes).
    """
    if len(arr) == 0:
        return np.array([], dtype=object), np.array([], dtype=np.int64)
    enc = pc.dictionary_encode(arr)
    order = pc.sort_indices(enc.dictionary).to_numpy()
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(len(order), dtype=np.int64)
    tokens = enc.dictionary.take(pa.array(order)).to_numpy(zero_copy_only=False)
    codes = rank[enc.indices.to_numpy(zero_copy_only=False)]
    return tokens.astype(object), codes


def _check_header(path: Path, expected: tuple[str, ...] | None = None) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    header = [h.strip() for h in first.lstrip("﻿").rstrip("\r\n").split(",")]
    if expected is not None and tuple(header) != expected:
        raise IngestError(
            f"{path}: header {','.join(header)!r} does not match {','.join(expected)!r}"
        )
    return header


def _read_string_csv(path: Path, columns: tuple[str, ...]) -> tuple[pa.Table, int]:
    """Read a CSV with all columns as strings; ragged rows are skipped and counted."""
    bad = []

    def on_invalid(row):
        bad.append(row.number)
        return "skip"

    table = pacsv.read_csv(
        path,
        read_options=pacsv.ReadOptions(block_size=1 << 24),
        parse_options=pacsv.ParseOptions(invalid_row_handler=on_invalid),
        convert_options=pacsv.ConvertOptions(
            column_types={c: pa.large_string() for c in columns},
            strings_can_be_null=False,
            quoted_strings_can_be_null=False,
        ),
    )
    return table, len(bad)


# ---------------------------------------------------------------------------
# interactions


@dataclass(frozen=True, eq=False)
class InteractionLog:
    """Deduplicated interactions, stored column-wise and sorted by (user, post).

    Iterating yields :class:`InteractionRecord` tuples.
    """

    users: IdIndex
    posts: IdIndex
    user: np.ndarray
    post: np.ndarray
    timestamp: np.ndarray
    stats: IngestStats = field(default_factory=IngestStats)

    def __len__(self) -> int:
        return len(self.user)

    def __iter__(self) -> Iterator[InteractionRecord]:
        ut, pt = self.users.tokens, self.posts.tokens
        for u, p, t in zip(self.user.tolist(), self.post.tolist(), self.timestamp.tolist()):
            yield InteractionRecord(ut[u], pt[p], t)

    @classmethod
    def from_arrays(
        cls,
        users: IdIndex,
        posts: IdIndex,
        user: np.ndarray,
        post: np.ndarray,
        timestamp: np.ndarray,
        stats: IngestStats | None = None,
    ) -> InteractionLog:
        """Sort, drop duplicate (user, post) pairs keeping the earliest like."""
        stats = stats if stats is not None else IngestStats(rows=len(user))
        user = np.asarray(user, dtype=np.int64)
        post = np.asarray(post, dtype=np.int64)
        timestamp = np.asarray(timestamp, dtype=np.int64)
        order = np.lexsort((timestamp, post, user))
        user, post, timestamp = user[order], post[order], timestamp[order]
        keep = np.ones(len(user), dtype=bool)
        if len(user) > 1:
            keep[1:] = (user[1:] != user[:-1]) | (post[1:] != post[:-1])
        dups = int(len(keep) - keep.sum())
        if dups:
            log.warning("dropped %d duplicate (user, post) likes", dups)
            user, post, timestamp = user[keep], post[keep], timestamp[keep]
        stats.duplicates += dups
        stats.emitted = len(user)
        return cls(users, posts, user, post, timestamp, stats)

    @classmethod
    def from_records(cls, records: Iterable[InteractionRecord | tuple]) -> InteractionLog:
        """Build from an in-memory stream of records (validated like file rows)."""
        stats = IngestStats()
        rows = []
        for rec in records:
            stats.rows += 1
            user_id, post_id, ts = rec
            if not _valid_row(user_id, post_id, ts):
                stats.malformed += 1
                continue
            rows.append((user_id, post_id, int(ts)))
        users = IdIndex.from_tokens(r[0] for r in rows)
        posts = IdIndex.from_tokens(r[1] for r in rows)
        return cls.from_arrays(
            users,
            posts,
            users.encode(r[0] for r in rows),
            posts.encode(r[1] for r in rows),
            np.fromiter((r[2] for r in rows), dtype=np.int64, count=len(rows)),
            stats,
        )

    def reindex_posts(self, posts: IdIndex) -> InteractionLog:
        """Re-express post codes against a larger post vocabulary."""
        remap = posts.encode(self.posts.tokens)
        post = remap[self.post]
        order = np.lexsort((self.timestamp, post, self.user))
        return InteractionLog(
            self.users, posts, self.user[order], post[order], self.timestamp[order], self.stats
        )


def _valid_row(user_id, post_id, ts) -> bool:
    if not isinstance(user_id, str) or not isinstance(post_id, str):
        return False
    if not _token_match(user_id) or not _token_match(post_id):
        return False
    if isinstance(ts, bool):
        return False
    if isinstance(ts, str):
        if not re.fullmatch(r"[0-9]{1,18}", ts):
            return False
        ts = int(ts)
    if not isinstance(ts, int):
        return False
    return ts >= 0


def _detect_format(path: Path) -> str:
    return "jsonl" if path.suffix.lower() in {".jsonl", ".ndjson", ".json"} else "csv"


def parse_interactions(path, format: str | None = None) -> tuple[InteractionLog, IngestStats]:
    """Parse an interaction log.

    Malformed rows (wrong field count, bad identifier, non-integer or negative
    timestamp) are skipped and counted; repeated (user, post) pairs keep the
    earliest timestamp and are counted as duplicates.

    Parameters
    ----------
    path : path-like
        ``interactions.csv`` with header ``user_id,post_id,timestamp``, or a
        JSONL file with one ``{"user_id", "post_id", "timestamp"}`` object
        per line.
    format : {'csv', 'jsonl'}, optional
        Guessed from the file suffix when omitted.

    Returns
    -------
    log : InteractionLog
    stats : IngestStats
    """
    path = Path(path)
    format = format or _detect_format(path)
    if format == "jsonl":
        return _parse_interactions_jsonl(path)
    if format != "csv":
        raise ValueError(f"unknown interaction format {format!r}")

    _check_header(path, INTERACTION_COLUMNS)
    table, ragged = _read_string_csv(path, INTERACTION_COLUMNS)
    stats = IngestStats(rows=table.num_rows + ragged, malformed=ragged)

    user_col = table.column("user_id").combine_chunks()
    post_col = table.column("post_id").combine_chunks()
    ts_col = table.column("timestamp").combine_chunks()
    ok = pc.and_(
        pc.and_(pc.match_substring_regex(user_col, _TOKEN_RE),
                pc.match_substring_regex(post_col, _TOKEN_RE)),
        pc.match_substring_regex(ts_col, _TIMESTAMP_RE),
    )
    n_ok = pc.sum(ok).as_py() or 0
    stats.malformed += table.num_rows - n_ok
    if n_ok < table.num_rows:
        user_col, post_col, ts_col = (pc.filter(c, ok) for c in (user_col, post_col, ts_col))

    user_tokens, user = _sorted_encode(user_col)
    post_tokens, post = _sorted_encode(post_col)
    timestamp = pc.cast(ts_col, pa.int64()).to_numpy(zero_copy_only=False)

    ilog = InteractionLog.from_arrays(
        IdIndex(user_tokens), IdIndex(post_tokens), user, post, timestamp, stats
    )
    return ilog, stats


def _parse_interactions_jsonl(path: Path) -> tuple[InteractionLog, IngestStats]:
    def records():
        try:
            fh = open(path, encoding="utf-8")
        except OSError as exc:
            raise IngestError(f"cannot read {path}: {exc}") from exc
        with fh:
            for line in fh:
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    yield obj["user_id"], obj["post_id"], obj["timestamp"]
                except (ValueError, KeyError, TypeError):
                    yield None, None, None

    ilog = InteractionLog.from_records(records())
    return ilog, ilog.stats


# ---------------------------------------------------------------------------
# post metadata


def _read_post_meta(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (sorted post tokens, matching page tokens)."""
    path = Path(path)
    _check_header(path, POST_COLUMNS)
    table, ragged = _read_string_csv(path, POST_COLUMNS)
    if ragged:
        raise IngestError(f"{path}: {ragged} rows do not have exactly two fields")
    posts = table.column("post_id").combine_chunks()
    pages = table.column("page_id").combine_chunks()
    for name, col in (("post_id", posts), ("page_id", pages)):
        bad = len(col) - (pc.sum(pc.match_substring_regex(col, _TOKEN_RE)).as_py() or 0)
        if bad:
            raise IngestError(f"{path}: {bad} invalid {name} values")
    post_tokens, post_codes = _sorted_encode(posts)
    page_tokens, page_codes = _sorted_encode(pages)

    order = np.lexsort((page_codes, post_codes))
    post_codes, page_codes = post_codes[order], page_codes[order]
    first = np.ones(len(post_codes), dtype=bool)
    first[1:] = post_codes[1:] != post_codes[:-1]
    same_post = ~first
    conflict = same_post & np.r_[False, page_codes[1:] != page_codes[:-1]]
    if conflict.any():
        bad_post = post_tokens[post_codes[np.flatnonzero(conflict)[0]]]
        raise IngestError(
            f"{path}: post {bad_post!r} is assigned to more than one page "
            f"({int(conflict.sum())} conflicting rows)"
        )
    return post_tokens, page_tokens[page_codes[first]]


def parse_post_meta(path) -> dict[str, str]:
    """Read ``posts.csv`` into a ``post_id -> page_id`` mapping.

    Identical repeated rows are accepted; a post listed under two different
    pages raises :class:`IngestError`.
    """
    posts, pages = _read_post_meta(path)
    return dict(zip(posts.tolist(), pages.tolist()))


# ---------------------------------------------------------------------------
# topic mixtures


@dataclass
class TopicStats:
    rows: int = 0
    stored: int = 0
    badsum: int = 0
    duplicates: int = 0

    def as_dict(self) -> dict:
        return {
            "rows": self.rows,
            "stored": self.stored,
            "badsum": self.badsum,
            "duplicates": self.duplicates,
        }


@dataclass(frozen=True, eq=False)
class TopicMixtures:
    """Post-by-topic proportion matrix; each row sums to one."""

    posts: IdIndex
    topics: tuple[str, ...]
    proportions: np.ndarray
    stats: TopicStats

    @property
    def n_topics(self) -> int:
        return len(self.topics)

    def row(self, post_id: str) -> np.ndarray:
        return self.proportions[self.posts.index(post_id)]


def parse_topic_mixtures(path) -> TopicMixtures:
    """Read ``topics.csv`` (header ``post_id,t0,...,t{K-1}``).

    Rows whose proportions fall outside ``[0, 1]`` or whose sum differs from
    one by more than 1e-6 are skipped and counted as ``badsum``.  Kept rows
    are divided by their sum.  A ragged row is fatal.
    """
    path = Path(path)
    header = _check_header(path)
    k = len(header) - 1
    expected = ("post_id",) + tuple(f"t{i}" for i in range(k))
    if k < 1 or tuple(header) != expected:
        raise IngestError(f"{path}: header must be post_id,t0,...,t{{K-1}}, got {header}")

    ragged = []

    def on_invalid(row):
        ragged.append(f"{row.text!r} has {row.actual_columns} fields, expected {row.expected_columns}")
        return "error"

    try:
        table = pacsv.read_csv(
            path,
            read_options=pacsv.ReadOptions(block_size=1 << 24),
            parse_options=pacsv.ParseOptions(invalid_row_handler=on_invalid),
            convert_options=pacsv.ConvertOptions(
                column_types={"post_id": pa.large_string(), **{c: pa.float64() for c in expected[1:]}},
                strings_can_be_null=False,
            ),
        )
    except pa.ArrowInvalid as exc:
        raise IngestError(f"{path}: {ragged[0] if ragged else exc}") from exc

    stats = TopicStats(rows=table.num_rows)
    post_col = table.column("post_id").combine_chunks()
    bad_ids = len(post_col) - (pc.sum(pc.match_substring_regex(post_col, _TOKEN_RE)).as_py() or 0)
    if bad_ids:
        raise IngestError(f"{path}: {bad_ids} invalid post_id values")
    if table.num_rows:
        props = np.column_stack(
            [table.column(c).to_numpy().astype(np.float64) for c in expected[1:]]
        )
    else:
        props = np.zeros((0, k))
    post_tokens, codes = _sorted_encode(post_col)

    with np.errstate(invalid="ignore"):
        in_range = np.all((props >= 0.0) & (props <= 1.0), axis=1)
    sums = props.sum(axis=1)
    ok = in_range & (np.abs(sums - 1.0) <= SUM_TOLERANCE)
    stats.badsum = int((~ok).sum())
    props, codes, sums = props[ok] / sums[ok, None], codes[ok], sums[ok]

    order = np.argsort(codes, kind="stable")
    props, codes = props[order], codes[order]
    first = np.ones(len(codes), dtype=bool)
    first[1:] = codes[1:] != codes[:-1]
    if not first.all():
        rep = np.flatnonzero(~first)
        if np.any(props[rep] != props[rep - 1]):
            bad = post_tokens[codes[rep[np.any(props[rep] != props[rep - 1], axis=1)][0]]]
            raise IngestError(f"{path}: post {bad!r} has conflicting topic mixtures")
        stats.duplicates = len(rep)
        props, codes = props[first], codes[first]
    stats.stored = len(codes)
    used = np.unique(codes)
    return TopicMixtures(IdIndex(post_tokens[used]), expected[1:], props, stats)


# ---------------------------------------------------------------------------
# assembled dataset


@dataclass(frozen=True, eq=False)
class Dataset:
    """Everything downstream analysis needs, indexed consistently.

    Attributes
    ----------
    interactions : InteractionLog
        Post codes refer to ``posts``.
    posts, pages : IdIndex
    post_page : ndarray of int64
        Page index of every post, ``-1`` for posts without metadata.
    mixtures : TopicMixtures or None
    post_mixture : ndarray of int64 or None
        Row of ``mixtures.proportions`` for every post, ``-1`` when absent.
    """

    interactions: InteractionLog
    posts: IdIndex
    pages: IdIndex
    post_page: np.ndarray
    mixtures: TopicMixtures | None = None
    post_mixture: np.ndarray | None = None

    @property
    def users(self) -> IdIndex:
        return self.interactions.users

    @property
    def n_pages(self) -> int:
        return len(self.pages)

    @property
    def has_topics(self) -> bool:
        return self.mixtures is not None

    def summary(self) -> dict:
        out = {
            "interactions": self.interactions.stats.as_dict(),
            "n_users": len(self.users),
            "n_posts": len(self.posts),
            "n_pages": self.n_pages,
        }
        if self.mixtures is not None:
            liked = np.unique(self.interactions.post)
            out["topics"] = self.mixtures.stats.as_dict()
            out["n_topics"] = self.mixtures.n_topics
            out["liked_posts_without_mixture"] = int((self.post_mixture[liked] < 0).sum())
        return out


def assemble(
    interactions: InteractionLog,
    post_tokens: np.ndarray,
    page_tokens: np.ndarray,
    mixtures: TopicMixtures | None = None,
) -> Dataset:
    """Join interactions with metadata under one post vocabulary.

    Raises :class:`IngestError` when a liked post has no page.
    """
    all_posts = set(post_tokens.tolist()) | set(interactions.posts.tokens.tolist())
    if mixtures is not None:
        all_posts |= set(mixtures.posts.tokens.tolist())
    posts = IdIndex.from_tokens(all_posts)
    pages = IdIndex.from_tokens(page_tokens.tolist())

    post_page = np.full(len(posts), -1, dtype=np.int64)
    post_page[posts.encode(post_tokens)] = pages.encode(page_tokens)

    ilog = interactions.reindex_posts(posts)
    missing = post_page[np.unique(ilog.post)] < 0
    if missing.any():
        example = posts.token(int(np.unique(ilog.post)[np.flatnonzero(missing)[0]]))
        raise IngestError(
            f"{int(missing.sum())} liked posts have no page assignment (e.g. {example!r})"
        )

    post_mixture = None
    if mixtures is not None:
        post_mixture = np.full(len(posts), -1, dtype=np.int64)
        post_mixture[posts.encode(mixtures.posts.tokens)] = np.arange(len(mixtures.posts))
        liked = np.unique(ilog.post)
        n_missing = int((post_mixture[liked] < 0).sum())
        if n_missing:
            log.warning("%d liked posts have no topic mixture; excluded from topic analysis", n_missing)
    return Dataset(ilog, posts, pages, post_page, mixtures, post_mixture)


def load_dataset(interactions, posts, topics=None, format: str | None = None) -> Dataset:
    """Parse the input files and join them into a :class:`Dataset`."""
    ilog, _ = parse_interactions(interactions, format)
    post_tokens, page_tokens = _read_post_meta(posts)
    mixtures = parse_topic_mixtures(topics) if topics is not None else None
    return assemble(ilog, post_tokens, page_tokens, mixtures)
