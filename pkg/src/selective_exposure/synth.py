"""
Synthetic interaction data with a known concentration parameter, and
brute-force reference implementations of the Gini quantities.

Generative model
----------------
* posts are dealt to pages in equal shares (sizes differ by at most one),
  in random order;
* each post's topic mixture is a symmetric Dirichlet draw (normalized
  independent Gamma(alpha) variates);
* each user gets a uniformly random home page and an activity from
  ``activity_law``;
* each like goes to the home page with probability ``loyalty``, otherwise to
  a uniformly random page, and hits a uniformly random post of that page the
  user has not liked yet (a full page is redrawn);
* timestamps are uniform over the horizon.

Everything is drawn from one ``numpy.random.Generator`` seeded by
``seed``, so the same config always produces byte-identical files.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd
import pyarrow as pa
from pyarrow import csv as pacsv

from .ingest import Dataset, IdIndex, InteractionLog, TopicMixtures, TopicStats, assemble

EPOCH_2010 = 1262304000


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 1000
    n_pages: int = 20
    n_posts: int = 2000
    n_topics: int = 10
    loyalty: float = 0.9
    topic_concentration: float = 1.0
    activity_law: str = "constant"
    activity: int = 10
    gamma: float = 2.0
    activity_min: int = 1
    activity_max: int = 1000
    time_horizon_days: float = 2190.0
    start_timestamp: int = EPOCH_2010
    seed: int = 0

    def __post_init__(self):
        for name in ("n_users", "n_pages", "n_posts", "n_topics"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.loyalty <= 1.0:
            raise ValueError("loyalty must lie in [0, 1]")
        if not self.topic_concentration > 0:
            raise ValueError("topic_concentration must be positive")
        if self.activity_law not in ("constant", "powerlaw"):
            raise ValueError("activity_law must be 'constant' or 'powerlaw'")
        if self.activity_law == "constant" and self.activity < 1:
            raise ValueError("activity must be >= 1")
        if self.activity_law == "powerlaw" and not 1 <= self.activity_min <= self.activity_max:
            raise ValueError("need 1 <= activity_min <= activity_max")
        if self.time_horizon_days < 0 or self.start_timestamp < 0:
            raise ValueError("time horizon and start timestamp must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @classmethod
    def from_mapping(cls, values: dict) -> SynthConfig:
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kw = {}
        for key, raw in values.items():
            if key not in types:
                raise ValueError(f"unknown synth option {key!r}")
            t = types[key]
            kw[key] = raw if not isinstance(raw, str) else (
                int(raw) if t in ("int", int) else float(raw) if t in ("float", float) else raw
            )
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> SynthConfig:
        """Read a flat ``key=value`` file (``#`` starts a comment)."""
        values = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"{path}: expected key=value, got {line!r}")
            values[key.strip()] = val.strip()
        return cls.from_mapping(values)

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in dataclasses.fields(self))


@dataclass(frozen=True, eq=False)
class SyntheticData:
    """Generated arrays; ids are the zero-padded indices."""

    config: SynthConfig
    post_page: np.ndarray
    mixtures: np.ndarray
    home: np.ndarray
    user: np.ndarray
    post: np.ndarray
    timestamp: np.ndarray

    def _tokens(self, prefix: str, n: int) -> np.ndarray:
        width = len(str(max(n - 1, 0)))
        return np.array([f"{prefix}{i:0{width}d}" for i in range(n)], dtype=object)

    @property
    def user_ids(self) -> np.ndarray:
        return self._tokens("u", self.config.n_users)

    @property
    def post_ids(self) -> np.ndarray:
        return self._tokens("p", self.config.n_posts)

    @property
    def page_ids(self) -> np.ndarray:
        return self._tokens("pg", self.config.n_pages)

    def to_dataset(self, with_topics: bool = True) -> Dataset:
        """In-memory equivalent of writing the files and loading them back."""
        cfg = self.config
        posts = IdIndex(self.post_ids)
        active = np.unique(self.user)
        users = IdIndex(self.user_ids[active])
        ilog = InteractionLog.from_arrays(
            users, posts, np.searchsorted(active, self.user), self.post, self.timestamp
        )
        mix = None
        if with_topics:
            props = self.mixtures / self.mixtures.sum(axis=1, keepdims=True)
            stats = TopicStats(rows=cfg.n_posts, stored=cfg.n_posts)
            mix = TopicMixtures(posts, tuple(f"t{i}" for i in range(cfg.n_topics)), props, stats)
        return assemble(ilog, self.post_ids, self.page_ids[self.post_page], mix)

    def write(self, out_dir) -> dict[str, Path]:
        """Write ``interactions.csv``, ``posts.csv`` and ``topics.csv``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "interactions": out / "interactions.csv",
            "posts": out / "posts.csv",
            "topics": out / "topics.csv",
        }
        opts = pacsv.WriteOptions(include_header=False, quoting_style="none")

        def write_csv(table, path):
            # pyarrow always quotes header names, so the header is written by hand
            with open(path, "wb") as fh:
                fh.write((",".join(table.column_names) + "\n").encode())
                pacsv.write_csv(table, fh, write_options=opts)

        uid = pa.array(self.user_ids.tolist(), pa.string())
        pid = pa.array(self.post_ids.tolist(), pa.string())
        pgid = pa.array(self.page_ids.tolist(), pa.string())

        inter = pa.table({
            "user_id": uid.take(pa.array(self.user)),
            "post_id": pid.take(pa.array(self.post)),
            "timestamp": pa.array(self.timestamp, pa.int64()),
        })
        write_csv(inter, paths["interactions"])
        write_csv(
            pa.table({"post_id": pid, "page_id": pgid.take(pa.array(self.post_page))}),
            paths["posts"],
        )
        frame = pd.DataFrame(self.mixtures, columns=[f"t{i}" for i in range(self.config.n_topics)])
        frame.insert(0, "post_id", self.post_ids)
        frame.to_csv(paths["topics"], index=False, float_format="%.12f", lineterminator="\n")
        (out / "synth.cfg").write_text(self.config.to_text(), encoding="utf-8")
        return paths


def _activities(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.activity_law == "constant":
        return np.full(cfg.n_users, cfg.activity, dtype=np.int64)
    ks = np.arange(cfg.activity_min, cfg.activity_max + 1, dtype=np.float64)
    p = ks ** -cfg.gamma
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(cfg.n_users), side="right")
    return ks[np.minimum(idx, len(ks) - 1)].astype(np.int64)


def _mixtures(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Dirichlet rows, rounded to 12 decimals so files round-trip exactly."""
    g = rng.standard_gamma(cfg.topic_concentration, size=(cfg.n_posts, cfg.n_topics))
    s = g.sum(axis=1)
    dead = s <= 0
    if dead.any():
        # tiny alpha can underflow every component; fall back to a one-hot row
        g[dead] = 0.0
        g[np.flatnonzero(dead), rng.integers(cfg.n_topics, size=int(dead.sum()))] = 1.0
        s = g.sum(axis=1)
    return np.round(g / s[:, None], 12)


def generate(config: SynthConfig) -> SyntheticData:
    """Draw one synthetic dataset.

    Raises
    ------
    ValueError
        When some user's activity cannot be met with distinct posts
        (more likes than the home page holds at loyalty 1, or more likes
        than there are posts).
    """
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    n_pages, n_posts = cfg.n_pages, cfg.n_posts

    post_page = rng.permutation(np.arange(n_posts, dtype=np.int64) % n_pages)
    page_posts = np.argsort(post_page, kind="stable")
    page_size = np.bincount(post_page, minlength=n_pages)
    page_start = np.concatenate(([0], np.cumsum(page_size)[:-1]))

    mixtures = _mixtures(cfg, rng)
    home = rng.integers(n_pages, size=cfg.n_users)
    act = _activities(cfg, rng)

    if cfg.loyalty == 1.0:
        short = act > page_size[home]
        if short.any():
            u = int(np.flatnonzero(short)[0])
            raise ValueError(
                f"infeasible: user {u} needs {act[u]} distinct posts but loyalty=1 confines "
                f"them to a home page with {page_size[home[u]]} posts"
            )
    elif act.max(initial=0) > n_posts:
        raise ValueError(f"infeasible: activity {act.max()} exceeds the {n_posts} available posts")

    n_likes = int(act.sum())
    user = np.repeat(np.arange(cfg.n_users, dtype=np.int64), act)
    to_home = rng.random(n_likes) < cfg.loyalty
    page = np.where(to_home, home[user], rng.integers(n_pages, size=n_likes))
    page = _resolve_overflow(user, page, page_size, n_pages, rng)
    post = _draw_posts(user, page, page_posts, page_start, page_size, n_posts, rng)

    span = int(round(cfg.time_horizon_days * 86400))
    ts = cfg.start_timestamp + rng.integers(0, span + 1, size=n_likes)

    order = np.lexsort((post, ts, user))
    return SyntheticData(cfg, post_page, mixtures, home, user[order], post[order], ts[order])


def _resolve_overflow(user, page, page_size, n_pages, rng, max_rounds=1000):
    """Move likes off (user, page) groups that ask for more posts than the page has."""
    for _ in range(max_rounds):
        key = user * n_pages + page
        order = np.argsort(key, kind="stable")
        sk = key[order]
        start = np.r_[True, sk[1:] != sk[:-1]]
        grp = np.cumsum(start) - 1
        rank = np.arange(len(sk)) - np.flatnonzero(start)[grp]
        over = rank >= page_size[page[order]]
        if not over.any():
            return page
        idx = order[over]
        page = page.copy()
        page[idx] = rng.integers(n_pages, size=len(idx))
    raise RuntimeError("could not place all likes on pages with free posts")


def _draw_posts(user, page, page_posts, page_start, page_size, n_posts, rng):
    """Uniform distinct posts within each (user, page) group.

    Groups asking for more than half a page take a prefix of a random
    permutation; the rest use rejection, which then needs few rounds.
    """
    n_pages = len(page_size)
    post = np.empty(len(user), dtype=np.int64)
    key = user * n_pages + page
    order = np.argsort(key, kind="stable")
    sk = key[order]
    starts = np.flatnonzero(np.r_[True, sk[1:] != sk[:-1]])
    sizes = np.diff(np.r_[starts, len(sk)])
    gpage = page[order[starts]]
    dense = 2 * sizes > page_size[gpage]
    for g in np.flatnonzero(dense).tolist():
        pg, c = gpage[g], sizes[g]
        pick = rng.permutation(page_size[pg])[:c]
        post[order[starts[g]:starts[g] + c]] = page_posts[page_start[pg] + pick]

    in_dense = np.repeat(dense, sizes)
    pending = np.sort(order[~in_dense])
    taken = np.zeros(0, dtype=np.int64)
    while len(pending):
        pg = page[pending]
        cand = page_posts[page_start[pg] + (rng.random(len(pending)) * page_size[pg]).astype(np.int64)]
        ckey = user[pending] * n_posts + cand
        # first occurrence among pending, and not already taken
        _, first = np.unique(ckey, return_index=True)
        ok = np.zeros(len(ckey), dtype=bool)
        ok[first] = True
        if len(taken):
            pos = np.searchsorted(taken, ckey)
            hit = (pos < len(taken)) & (taken[np.minimum(pos, len(taken) - 1)] == ckey)
            ok &= ~hit
        post[pending[ok]] = cand[ok]
        taken = np.union1d(taken, ckey[ok])
        pending = pending[~ok]
    return post


def generate_files(config: SynthConfig, out_dir) -> dict[str, Path]:
    return generate(config).write(out_dir)


# ---------------------------------------------------------------------------
# brute-force oracles


def brute_force_gini(values) -> float:
    """Gini from the literal double sum over all ordered pairs."""
    y = np.asarray(values, dtype=np.float64).ravel()
    n = y.size
    if n == 0 or n > 4096:
        raise ValueError("brute_force_gini supports 1 <= n <= 4096")
    mu = y.sum() / n
    if mu == 0:
        raise ValueError("gini of an all-zero vector is undefined (zero mean)")
    delta = np.abs(y[:, None] - y[None, :]).sum() / n**2
    return float(delta / (2 * mu))


def _allocations(n_likes: int, n_pages: int):
    """Every multiset of ``n_pages`` non-negative counts summing to ``n_likes``.

    The Gini index ignores order, so one representative per multiset covers
    every allocation of likes to pages.
    """

    def parts(remaining, slots, cap):
        if slots == 0:
            if remaining == 0:
                yield ()
            return
        for first in range(min(remaining, cap), -1, -1):
            if first * slots < remaining:
                break
            for rest in parts(remaining - first, slots - 1, first):
                yield (first,) + rest

    return parts(n_likes, n_pages, n_likes)


def _exact_gini(counts) -> Fraction:
    n = len(counts)
    total = sum(counts)
    diff = sum(abs(a - b) for a, b in itertools.product(counts, repeat=2))
    return Fraction(diff, 2 * n * total)


def brute_force_gini_min(n_likes: int, n_pages: int, exact: bool = False):
    """Minimum page Gini over every way to put ``n_likes`` likes on ``n_pages`` pages.

    Returns the float nearest to the exact rational minimum, or the
    :class:`~fractions.Fraction` itself with ``exact=True``.
    """
    if n_likes < 1 or n_pages < 1:
        raise ValueError("n_likes and n_pages must be >= 1")
    if n_likes > 16 or n_pages > 16:
        raise ValueError("brute_force_gini_min is limited to n_likes, n_pages <= 16")
    best = min(_exact_gini(a) for a in _allocations(n_likes, n_pages))
    return best if exact else float(best)
