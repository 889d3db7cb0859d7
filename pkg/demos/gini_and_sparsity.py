"""
Gini on sparse page vectors
===========================

A user's likes spread over pages form a mostly-zero vector. The raw Gini of
such a vector is large just because the user cannot reach every page, so
the minimum achievable value is subtracted out before comparing users.
"""

import numpy as np

from selective_exposure import gini, gini_min, normalized_gini
from selective_exposure.synth import brute_force_gini, brute_force_gini_min

n_pages = 10

# Three likes over ten pages. Spreading them as thinly as possible still
# leaves seven empty pages.
spread = np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0])
piled = np.array([3, 0, 0, 0, 0, 0, 0, 0, 0, 0])
print("spread   raw gini", gini(spread))
print("piled    raw gini", gini(piled))

# The lower bound matches an exhaustive search over every allocation.
print("minimum  gini_min", gini_min(3, n_pages), "enumerated", brute_force_gini_min(3, n_pages))

# After normalization the spread user sits at zero and the piled one at one.
g0 = gini_min(3, n_pages)
print("normalized spread", normalized_gini(gini(spread), g0))
print("normalized piled ", normalized_gini(gini(piled), g0))

# Once a user has more likes than pages the bound is taken as zero, even
# when an even split is impossible. The true minimum is small but positive.
for n_likes in (10, 11, 15, 16):
    print(f"{n_likes:>3} likes  formula {gini_min(n_likes, n_pages):.4f}"
          f"  enumerated {brute_force_gini_min(n_likes, n_pages):.4f}")

# The fast kernel agrees with the literal pairwise sum.
rng = np.random.default_rng(0)
y = rng.pareto(1.2, size=200) * (rng.random(200) < 0.2)
print("fast vs pairwise", gini(y), brute_force_gini(y))
