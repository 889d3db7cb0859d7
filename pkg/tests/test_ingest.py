import json
import random

import numpy as np
import pytest

from selective_exposure.ingest import (
    IdIndex,
    IngestError,
    InteractionLog,
    InteractionRecord,
    load_dataset,
    parse_interactions,
    parse_post_meta,
    parse_topic_mixtures,
)

HEADER = "user_id,post_id,timestamp\n"


def test_duplicate_like_dropped(write):
    path = write("i.csv", HEADER + "u1,p1,10\nu1,p1,20\nu2,p1,5\n")
    log, stats = parse_interactions(path)
    assert len(log) == 2
    assert stats.duplicates == 1
    assert stats.rows == 3 and stats.emitted == 2 and stats.malformed == 0


def test_duplicate_keeps_earliest_timestamp(write):
    path = write("i.csv", HEADER + "u1,p1,20\nu1,p1,10\n")
    log, _ = parse_interactions(path)
    assert list(log) == [InteractionRecord("u1", "p1", 10)]


def test_header_only_file(write):
    log, stats = parse_interactions(write("i.csv", HEADER))
    assert len(log) == 0
    assert stats.rows == 0 and stats.emitted == 0


def test_negative_timestamp_is_malformed(write):
    path = write("i.csv", HEADER + "u1,p1,-5\nu1,p2,7\n")
    log, stats = parse_interactions(path)
    assert stats.malformed == 1
    assert list(log) == [InteractionRecord("u1", "p2", 7)]


@pytest.mark.parametrize(
    "row",
    ["u1,p1", "u1,p1,3,4", "u1,p1,abc", "u1,p1,1.5", "u 1,p1,3", "u1,,3", "u1,p1,"],
)
def test_malformed_rows_counted(write, row):
    path = write("i.csv", HEADER + row + "\nu9,p9,1\n")
    log, stats = parse_interactions(path)
    assert stats.malformed == 1
    assert stats.rows == 2
    assert len(log) == 1


def test_bad_header_is_fatal(write):
    with pytest.raises(IngestError):
        parse_interactions(write("i.csv", "user,post,ts\nu1,p1,1\n"))


def test_missing_file_is_fatal(tmp_path):
    with pytest.raises(IngestError):
        parse_interactions(tmp_path / "nope.csv")


def test_count_conservation(write):
    body = "u1,p1,1\nu1,p1,2\nu2,p1,-1\nu2,p2,x\nu3,p3,3\nu3,p3,3\n,p1,4\n"
    _, stats = parse_interactions(write("i.csv", HEADER + body))
    assert stats.rows == 7
    assert stats.emitted + stats.duplicates + stats.malformed == stats.rows
    assert (stats.emitted, stats.duplicates, stats.malformed) == (2, 2, 3)


def test_jsonl_matches_csv(write):
    rows = [("u2", "p1", 5), ("u1", "p2", 3), ("u1", "p1", 9), ("u1", "p2", 4)]
    csv_path = write("i.csv", HEADER + "".join(f"{u},{p},{t}\n" for u, p, t in rows))
    lines = [json.dumps({"user_id": u, "post_id": p, "timestamp": t}) for u, p, t in rows]
    lines.append("{not json")
    lines.append(json.dumps({"user_id": "u3", "post_id": "p1", "timestamp": -2}))
    jl_path = write("i.jsonl", "\n".join(lines) + "\n")
    a, sa = parse_interactions(csv_path)
    b, sb = parse_interactions(jl_path)
    assert list(a) == list(b)
    assert sa.duplicates == sb.duplicates == 1
    assert sb.malformed == 2


def test_reingestion_deterministic_under_row_order(write):
    rng = random.Random(0)
    rows = [f"u{rng.randrange(30)},p{rng.randrange(50)},{rng.randrange(10**6)}" for _ in range(400)]
    a, _ = parse_interactions(write("a.csv", HEADER + "\n".join(rows) + "\n"))
    rng.shuffle(rows)
    b, _ = parse_interactions(write("b.csv", HEADER + "\n".join(rows) + "\n"))
    assert a.users == b.users and a.posts == b.posts
    assert a.users.tokens.tolist() == sorted(a.users.tokens.tolist())
    for col in ("user", "post", "timestamp"):
        np.testing.assert_array_equal(getattr(a, col), getattr(b, col))


def test_id_index_bijection():
    idx = IdIndex.from_tokens(["b", "a", "c", "a"])
    assert idx.tokens.tolist() == ["a", "b", "c"]
    assert [idx.index(t) for t in "abc"] == [0, 1, 2]
    assert idx.token(2) == "c"
    with pytest.raises(KeyError):
        idx.index("zz")


def test_from_records_stream():
    log = InteractionLog.from_records(
        [("u1", "p1", 1), ("u1", "p1", 2), ("u2", "p1", -1), InteractionRecord("u2", "p2", 3)]
    )
    assert log.stats.as_dict() == {"rows": 4, "emitted": 2, "duplicates": 1, "malformed": 1}


# post metadata


def test_post_meta_basic(write):
    m = parse_post_meta(write("p.csv", "post_id,page_id\np1,A\np2,A\np3,B\n"))
    assert m == {"p1": "A", "p2": "A", "p3": "B"}
    assert len(set(m.values())) == 2


def test_post_meta_identical_duplicate(write):
    assert parse_post_meta(write("p.csv", "post_id,page_id\np1,A\np1,A\n")) == {"p1": "A"}


def test_post_meta_conflict_fatal(write):
    with pytest.raises(IngestError, match="more than one page"):
        parse_post_meta(write("p.csv", "post_id,page_id\np1,A\np1,B\n"))


# topic mixtures


def test_topics_direct_read(write):
    mix = parse_topic_mixtures(write("t.csv", "post_id,t0,t1\np1,0.7,0.3\n"))
    np.testing.assert_allclose(mix.row("p1"), [0.7, 0.3], rtol=0, atol=1e-15)
    assert mix.n_topics == 2


def test_topics_renormalized_within_tolerance(write):
    mix = parse_topic_mixtures(write("t.csv", "post_id,t0,t1\np1,0.5,0.5000004\n"))
    row = mix.row("p1")
    assert abs(row.sum() - 1.0) <= 2.3e-16
    assert row[1] > row[0]


def test_topics_bad_sum_skipped(write):
    mix = parse_topic_mixtures(write("t.csv", "post_id,t0,t1\np1,0.9,0.2\np2,0.4,0.6\n"))
    assert mix.stats.badsum == 1
    assert "p1" not in mix.posts and "p2" in mix.posts


def test_topics_ragged_row_fatal(write):
    with pytest.raises(IngestError):
        parse_topic_mixtures(write("t.csv", "post_id,t0,t1\np1,0.5,0.5\np2,1.0\n"))


def test_topics_bad_header_fatal(write):
    with pytest.raises(IngestError):
        parse_topic_mixtures(write("t.csv", "post_id,a,b\np1,0.5,0.5\n"))


def test_topics_conflicting_duplicate_fatal(write):
    with pytest.raises(IngestError):
        parse_topic_mixtures(write("t.csv", "post_id,t0,t1\np1,0.5,0.5\np1,0.4,0.6\n"))


# dataset assembly


def test_liked_post_without_page_is_fatal(write):
    inter = write("i.csv", HEADER + "u1,p1,0\nu1,p9,0\n")
    posts = write("p.csv", "post_id,page_id\np1,A\n")
    with pytest.raises(IngestError, match="no page"):
        load_dataset(inter, posts)


def test_posts_without_mixture_counted(write):
    inter = write("i.csv", HEADER + "u1,p1,0\nu1,p2,0\n")
    posts = write("p.csv", "post_id,page_id\np1,A\np2,A\n")
    topics = write("t.csv", "post_id,t0,t1\np1,0.5,0.5\n")
    ds = load_dataset(inter, posts, topics)
    assert ds.summary()["liked_posts_without_mixture"] == 1


def test_dataset_indices_consistent(tiny_files):
    ds = load_dataset(*tiny_files)
    assert ds.posts.tokens.tolist() == ["p1", "p2", "p3"]
    assert ds.pages.tokens.tolist() == ["A", "B"]
    assert ds.post_page.tolist() == [0, 0, 1]
    assert ds.post_mixture.tolist() == [0, 1, 2]
