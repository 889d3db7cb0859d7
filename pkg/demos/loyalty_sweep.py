"""
Page loyalty in synthetic data
==============================

The generator sends each like to the user's home page with probability
``loyalty`` and to a random page otherwise. Sweeping it shows how the
normalized page Gini tracks the planted concentration, and where it runs
out of room.
"""

from selective_exposure import SynthConfig, binned_average, compute_profiles, generate

for loyalty in (0.0, 0.25, 0.5, 0.75, 0.9, 1.0):
    cfg = SynthConfig(n_users=4000, n_pages=50, n_posts=5000, activity=50,
                      loyalty=loyalty, seed=1)
    prof = compute_profiles(generate(cfg).to_dataset(with_topics=False))
    print(f"loyalty {loyalty:4.2f}  mean normalized page gini {prof.gini_pages_norm.mean():.4f}"
          f"  mean pages {prof.n_pages.mean():5.2f}")

# With 50 likes on 50 pages the minimum is zero, so a fully loyal user scores
# exactly 49/50: the curve flattens near the top.
print("ceiling", 49 / 50)

# Activity matters too. Heavier users of the same loyalty reach more pages,
# but the count saturates once every page has been hit.
cfg = SynthConfig(n_users=4000, n_pages=20, n_posts=100_000, activity_law="powerlaw",
                  gamma=1.5, activity_min=5, activity_max=5000, loyalty=0.9, seed=2)
prof = compute_profiles(generate(cfg).to_dataset(with_topics=False))
curve = binned_average(prof.activity, prof.n_pages, "log", 8)
for lo, hi, m, c in zip(curve.low, curve.high, curve.mean, curve.count):
    print(f"activity {lo:7.1f}-{hi:7.1f}  users {c:5d}  mean pages {m:6.2f}")
