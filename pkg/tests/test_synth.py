import hashlib
from fractions import Fraction

import numpy as np
import pytest

from selective_exposure.bipartite import aggregate_by_page, build_user_post
from selective_exposure.ingest import load_dataset
from selective_exposure.metrics import binarize_topics, gini, gini_min
from selective_exposure.synth import (
    SynthConfig,
    brute_force_gini,
    brute_force_gini_min,
    generate,
    generate_files,
)


def page_vectors(data):
    ds = data.to_dataset()
    return aggregate_by_page(build_user_post(ds.interactions), ds.post_page, ds.n_pages)


def test_full_loyalty_single_page():
    data = generate(SynthConfig(n_users=300, n_pages=8, n_posts=80, activity=5, loyalty=1.0, seed=4))
    upv = page_vectors(data)
    assert np.all(upv.n_pages_liked == 1)
    assert np.array_equal(upv.pages, data.home)


def test_zero_loyalty_one_page_equals_full_loyalty():
    cfg = dict(n_users=50, n_pages=1, n_posts=40, activity=6, seed=9)
    a = page_vectors(generate(SynthConfig(loyalty=0.0, **cfg)))
    b = page_vectors(generate(SynthConfig(loyalty=1.0, **cfg)))
    assert np.all(a.n_pages_liked == 1) and np.all(b.n_pages_liked == 1)
    assert np.array_equal(a.counts, b.counts)


def test_large_alpha_is_near_uniform():
    data = generate(SynthConfig(n_users=1, n_posts=10000, n_topics=4, topic_concentration=1000.0,
                                activity=1, seed=3))
    dev = np.abs(data.mixtures - 0.25).mean(axis=0)
    assert np.all(dev < 0.01)
    treats, _ = binarize_topics(data.mixtures)
    # about half of the posts sit above the mean in each topic, but only barely
    excess = (data.mixtures - data.mixtures.mean(axis=0))[treats]
    assert excess.max() < 0.05


def test_binary_incidence_and_activity():
    cfg = SynthConfig(n_users=500, n_pages=5, n_posts=100, activity=15, loyalty=0.8, seed=1)
    data = generate(cfg)
    key = data.user * cfg.n_posts + data.post
    assert len(np.unique(key)) == len(key)
    assert np.all(np.bincount(data.user, minlength=cfg.n_users) == 15)
    t0 = cfg.start_timestamp
    assert data.timestamp.min() >= t0
    assert data.timestamp.max() <= t0 + cfg.time_horizon_days * 86400


def test_saturated_pages():
    # activity equals the home page size: every user likes every home post
    cfg = SynthConfig(n_users=40, n_pages=4, n_posts=40, activity=10, loyalty=1.0, seed=2)
    upv = page_vectors(generate(cfg))
    assert np.all(upv.counts == 10)


def test_balanced_pages():
    data = generate(SynthConfig(n_pages=7, n_posts=100, seed=0))
    sizes = np.bincount(data.post_page, minlength=7)
    assert sizes.max() - sizes.min() <= 1


def test_powerlaw_activity_in_range():
    cfg = SynthConfig(n_users=3000, activity_law="powerlaw", activity_min=2, activity_max=50,
                      gamma=2.0, n_posts=2000, seed=8)
    act = np.bincount(generate(cfg).user, minlength=cfg.n_users)
    assert act.min() >= 2 and act.max() <= 50
    # heavier at the low end
    assert (act == 2).sum() > (act == 10).sum() > (act == 40).sum()


def test_infeasible_requests():
    with pytest.raises(ValueError, match="infeasible"):
        generate(SynthConfig(n_users=5, n_pages=10, n_posts=20, activity=5, loyalty=1.0))
    with pytest.raises(ValueError, match="infeasible"):
        generate(SynthConfig(n_users=5, n_posts=20, activity=25, loyalty=0.5))


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(loyalty=1.5)
    with pytest.raises(ValueError):
        SynthConfig(topic_concentration=0)
    with pytest.raises(ValueError):
        SynthConfig.from_mapping({"colour": "red"})


def test_config_file_roundtrip(tmp_path):
    cfg = SynthConfig(n_users=12, loyalty=0.25, activity_law="powerlaw", seed=2**63)
    path = tmp_path / "c.cfg"
    path.write_text("# comment\n" + cfg.to_text())
    assert SynthConfig.from_file(path) == cfg


def _digest(paths):
    return {k: hashlib.sha256(p.read_bytes()).hexdigest() for k, p in paths.items()}


def test_same_seed_identical_files(tmp_path):
    cfg = SynthConfig(n_users=400, activity_law="powerlaw", activity_max=100, seed=77)
    a = _digest(generate_files(cfg, tmp_path / "a"))
    b = _digest(generate_files(cfg, tmp_path / "b"))
    c = _digest(generate_files(SynthConfig(**{**cfg.__dict__, "seed": 78}), tmp_path / "c"))
    assert a == b
    assert a["interactions"] != c["interactions"]


def test_files_load_like_memory(tmp_path):
    data = generate(SynthConfig(n_users=200, n_posts=300, activity=7, seed=5))
    paths = data.write(tmp_path)
    disk = load_dataset(paths["interactions"], paths["posts"], paths["topics"])
    mem = data.to_dataset()
    assert disk.users == mem.users and disk.posts == mem.posts and disk.pages == mem.pages
    np.testing.assert_array_equal(disk.interactions.post, mem.interactions.post)
    np.testing.assert_array_equal(disk.post_page, mem.post_page)
    assert np.array_equal(disk.mixtures.proportions, mem.mixtures.proportions)


# brute-force oracles


def test_brute_force_gini_hand_values():
    assert brute_force_gini([1, 1, 1, 1]) == 0.0
    assert brute_force_gini([3, 1]) == 0.25
    rng = np.random.default_rng(0)
    for _ in range(50):
        y = rng.uniform(0, 10, size=rng.integers(1, 100))
        assert abs(brute_force_gini(y) - gini(y)) <= 1e-12
    with pytest.raises(ValueError):
        brute_force_gini([0.0, 0.0])


def test_brute_force_gini_min_values():
    assert brute_force_gini_min(3, 10) == 0.7
    assert brute_force_gini_min(3, 10, exact=True) == Fraction(7, 10)
    assert brute_force_gini_min(10, 10) == 0.0
    assert brute_force_gini_min(11, 10) > 0.0
    # [2,1,...,1] on 10 pages: 18 ordered unequal pairs / (2*10*11)
    assert brute_force_gini_min(11, 10, exact=True) == Fraction(18, 220)
    with pytest.raises(ValueError):
        brute_force_gini_min(30, 30)


@pytest.mark.parametrize("n_pages", range(1, 7))
def test_gini_min_formula_matches_enumeration(n_pages):
    for n_likes in range(1, n_pages + 1):
        assert gini_min(n_likes, n_pages) == brute_force_gini_min(n_likes, n_pages)
