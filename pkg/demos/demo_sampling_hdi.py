"""
Sampling intervals for a mean replicability rate
================================================

How wide is the 95% highest density interval of X/m when m replications share
a latent rate?  With rho = 0 the count is binomial; any rho > 0 leaves a
variance floor that no number of replications removes.
"""

import numpy as np

from replicability import SequenceParams, effective_sample_size, sampling_hdi
from replicability.discrim import intervals_separated, minimal_separable_pair, normal_interval_width
from replicability.seqmodels import pmf_vector, variance_floor

# %%
# Exact replications: two rates 0.6 apart are cleanly told apart at m = 50.
hi = sampling_hdi(SequenceParams(0.8, 0.0, 50))
lo = sampling_hdi(SequenceParams(0.2, 0.0, 50))
print("rho=0     mu=0.8:", (hi.lower, hi.upper), " mu=0.2:", (lo.lower, lo.upper),
      " separated:", intervals_separated(hi, lo))

# %%
# A modest intraclass correlation makes the same two rates indistinguishable.
hi = sampling_hdi(SequenceParams(0.8, 0.15, 50))
lo = sampling_hdi(SequenceParams(0.2, 0.15, 50))
print("rho=0.15  mu=0.8:", (hi.lower, hi.upper), " mu=0.2:", (lo.lower, lo.upper),
      " separated:", intervals_separated(hi, lo))

# %%
# The PMF itself: overdispersion spreads mass into both tails.
for rho in (0.0, 0.05, 0.25):
    p = pmf_vector(SequenceParams(0.5, rho, 10))
    print(f"rho={rho:<5} P(X=0..10) =", np.array2string(p, precision=3, suppress_small=True))

# %%
# Interval width as m grows: it settles at the floor instead of shrinking to zero.
for m in (5, 50, 500, 5000):
    w = sampling_hdi(SequenceParams(0.5, 0.1, m)).width
    print(f"m={m:<5} width={w:.3f}")
print("normal-theory limit:", round(normal_interval_width(SequenceParams(0.5, 0.1, 10 ** 6)), 3),
      " floor variance:", variance_floor(0.5, 0.1))

# %%
# Effective number of independent replications.
for m, rho in ((100, 0.10), (100, 0.20), (274, 0.10), (17, 0.175), (17, 0.373)):
    print(f"m={m:<4} rho={rho:<6} m_e={effective_sample_size(m, rho):.2f}")

# %%
# With 17 sites at rho = 0.175 the closest pair of rates that can be separated:
pair = minimal_separable_pair(17, 0.175)
print("minimal separable pair:", (pair.mu_low, pair.mu_high),
      "HDIs", (pair.hdi_low.lower, round(pair.hdi_low.upper, 3)),
      (round(pair.hdi_high.lower, 3), pair.hdi_high.upper))
