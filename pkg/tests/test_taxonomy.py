import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selective_exposure.ingest import IdIndex
from selective_exposure.metrics import UserProfiles
from selective_exposure.taxonomy import (
    LABELS,
    REFERENCE_THRESHOLDS,
    TaxonomyLabel,
    TaxonomyThresholds,
    classify_arrays,
    classify_population,
    classify_user,
    compute_thresholds,
)

REFERENCE = TaxonomyThresholds(*REFERENCE_THRESHOLDS)


def profiles(g_topics, g_pages):
    n = len(g_topics)
    z = np.zeros(n)
    return UserProfiles(
        users=IdIndex(np.array([f"u{i}" for i in range(n)], dtype=object)),
        activity=np.ones(n, dtype=np.int64), lifetime_days=z, n_pages=np.ones(n, dtype=np.int64),
        gini_pages_raw=z, gini_pages_min=z, gini_pages_norm=np.asarray(g_pages, float),
        n_topics=np.ones(n, dtype=np.int64), gini_topics=np.asarray(g_topics, float),
    )


def test_thresholds_are_means():
    th = compute_thresholds(profiles([0.8, 0.9], [0.1, 0.3]))
    assert th.t_topics == pytest.approx(0.85, abs=1e-15)
    assert th.t_pages == pytest.approx(0.2, abs=1e-15)
    assert th.source == "computed-from-data"


def test_single_user_thresholds():
    th = compute_thresholds(profiles([0.37], [0.61]))
    assert (th.t_topics, th.t_pages) == (0.37, 0.61)


def test_unscored_users_excluded_from_thresholds():
    th = compute_thresholds(profiles([0.8, np.nan], [0.1, 0.9]))
    assert (th.t_topics, th.t_pages) == (0.8, 0.1)


def test_empty_population_fatal():
    with pytest.raises(ValueError):
        compute_thresholds(profiles([np.nan], [0.5]))


def test_reference_probe_users():
    assert classify_user(0.5, 0.5, REFERENCE) is TaxonomyLabel.MULTI_TOPIC_SE
    assert classify_user(0.9, 0.5, REFERENCE) is TaxonomyLabel.SINGLE_TOPIC_SE
    assert classify_user(0.9, 0.05, REFERENCE) is TaxonomyLabel.EXPOSURE_BY_INTEREST
    assert classify_user(0.5, 0.05, REFERENCE) is TaxonomyLabel.LOW_ACTIVITY_REGION


def test_boundary_goes_low():
    th = TaxonomyThresholds(0.5, 0.5)
    assert classify_user(0.5, 0.5, th) is TaxonomyLabel.LOW_ACTIVITY_REGION
    assert classify_user(0.5, 0.6, th) is TaxonomyLabel.MULTI_TOPIC_SE
    assert classify_user(0.6, 0.5, th) is TaxonomyLabel.EXPOSURE_BY_INTEREST


def test_one_user_per_quadrant():
    cls = classify_population(profiles([0.5, 0.9, 0.9, 0.5], [0.5, 0.5, 0.05, 0.05]), REFERENCE)
    assert cls.counts == {lab.value: 1 for lab in LABELS}
    assert cls.label_of("u2") is TaxonomyLabel.EXPOSURE_BY_INTEREST


def test_identical_users_share_label():
    cls = classify_population(profiles([0.4] * 5, [0.3] * 5))
    # thresholds equal the common scores: both axes on the low side
    assert set(cls.labels) == {TaxonomyLabel.LOW_ACTIVITY_REGION}


def test_empty_scored_set():
    cls = classify_population(profiles([np.nan, np.nan], [0.1, 0.2]), REFERENCE)
    assert sum(cls.counts.values()) == 0
    assert cls.summary()["n_scored"] == 0


def test_threshold_validation():
    with pytest.raises(ValueError):
        TaxonomyThresholds(1.2, 0.1)
    assert TaxonomyThresholds.parse("0.818,0.108") == REFERENCE
    with pytest.raises(ValueError):
        TaxonomyThresholds.parse("0.8")


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    gt, gp = rng.random(500), rng.random(500)
    gt[:10], gp[10:20] = 0.818, 0.108
    codes = classify_arrays(gt, gp, REFERENCE)
    assert [LABELS[c] for c in codes] == [classify_user(a, b, REFERENCE) for a, b in zip(gt, gp)]


unit = st.floats(0, 1, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(unit, unit), min_size=1, max_size=50))
def test_partition(scores):
    gt, gp = zip(*scores)
    cls = classify_population(profiles(gt, gp))
    assert sum(cls.counts.values()) == len(scores)
    assert len(cls.labels) == len(scores)


HIGH_PAGES = {TaxonomyLabel.MULTI_TOPIC_SE, TaxonomyLabel.SINGLE_TOPIC_SE}


@settings(max_examples=200, deadline=None)
@given(unit, unit, unit, unit, unit)
def test_raising_page_threshold_never_enters_high_pages(gt, gp, t_topics, t1, t2):
    lo, hi = sorted((t1, t2))
    before = classify_user(gt, gp, TaxonomyThresholds(t_topics, lo))
    after = classify_user(gt, gp, TaxonomyThresholds(t_topics, hi))
    if before not in HIGH_PAGES:
        assert after not in HIGH_PAGES


def test_outputs(tmp_path):
    cls = classify_population(profiles([0.5, 0.9], [0.5, 0.05]), REFERENCE)
    cls.to_csv(tmp_path / "t.csv")
    cls.write_summary(tmp_path / "s.json")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "user_id,gini_topics,gini_pages_norm,label"
    assert lines[1] == "u0,0.500000,0.500000,MultiTopicSE"
    import json

    s = json.loads((tmp_path / "s.json").read_text())
    assert s["counts"]["ExposureByInterest"] == 1 and s["fractions"]["MultiTopicSE"] == 0.5
    assert s["thresholds"] == {"t_topics": 0.818, "t_pages": 0.108, "source": "explicit"}
