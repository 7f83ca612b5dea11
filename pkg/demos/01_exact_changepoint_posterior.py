"""Exact posterior of a single change-point location.

When a series is short and carries one change-point, there is no need to
sample anything: the marginal likelihood of each candidate split can be
computed exactly with all segment models and parameters integrated out, and
normalising over the n-2 candidate positions gives the entire posterior.

Here we build a binary series that switches regime at position 120 and ask
for that posterior.
"""

import numpy as np

import bctseg as b

rng = np.random.default_rng(7)

# regime A favours staying on the previous symbol, regime B flips it
alpha = b.Alphabet.of_size(2)
stay = b.model_from_table(alpha, {"0": [0.85, 0.15], "1": [0.15, 0.85]})
flip = b.model_from_table(alpha, {"0": [0.25, 0.75], "1": [0.75, 0.25]})
spec = b.PiecewiseSpec(
    alphabet=alpha,
    depth=2,
    segments=(b.SegmentSpec(stay, 119), b.SegmentSpec(flip, 121)),
    seed=7,
)
x, truth = b.generate_piecewise(spec)
print(f"series: n={x.n} binary observations, true change-point at {truth[0]}")

params = b.BctHyperParams(m=2, depth=2)
post = b.exact_single_cp_posterior(x, params)
positions = np.arange(2, x.n)

peak = positions[np.argmax(post)]
print(f"posterior peak: {peak} with probability {post.max():.3f}")

# how much mass sits within +-10 of the peak?
window = (positions >= peak - 10) & (positions <= peak + 10)
print(f"mass within +-10 of the peak: {post[window].sum():.3f}")

print("\ntop five positions:")
for idx in np.argsort(post)[::-1][:5]:
    print(f"  p = {positions[idx]:4d}   probability {post[idx]:.4f}")
