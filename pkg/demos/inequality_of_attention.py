"""How unequal is attention in a follower network?

Builds the bundled synthetic population (5600 users with a heavy-tailed
follower distribution), then measures its concentration.

    python3 demos/inequality_of_attention.py
"""

import numpy as np

from attention_inequality.inequality import gini, log_bin, lorenz, top_share
from attention_inequality.synthetic import calibrated_population

pop = calibrated_population()
followers = pop.followers

print(f"users: {followers.size}, mean followers: {followers.mean():.0f}, median: {np.median(followers):.0f}")
print(f"Gini of followers: {gini(followers):.3f}")
for frac in (0.01, 0.1, 0.2):
    print(f"  top {frac:>4.0%} of users hold {top_share(followers, frac):.1%} of all follows")

# The Lorenz curve: what share of follows do the poorest x% of users hold?
curve = lorenz(followers)
for x in (0.5, 0.8, 0.99):
    print(f"  bottom {x:.0%} hold {np.interp(x, curve.pop_frac, curve.value_frac):.1%}")

# Tweets are far less concentrated than followers.
print(f"Gini of tweet counts: {gini(pop.statuses):.3f}")

print("\nlog-binned follower density (base 4):")
for b in log_bin(followers, base=4.0):
    if b.count:
        print(f"  [{b.bin_lo:>9.0f}, {b.bin_hi:>9.0f})  n={b.count:<5d} density={b.density:.2e}")
