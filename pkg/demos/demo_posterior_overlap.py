"""
Posterior overlap of the mean rate
==================================

Given one observed count x out of m = 100 replications, the joint posterior
over (mu, rho) is computed on a midpoint grid.  Integrating out rho and
comparing the marginal posteriors of mu for two counts shows how much two very
different outcomes still overlap when rho is unknown.
"""

import numpy as np

from replicability.posterior2d import (
    PriorSpec, conditional_density, default_nodes, joint_posterior, marginal_mu, overlap,
    overlap_matrix,
)

# a coarse grid keeps the demo quick; the CLI defaults to 200 x 200
nodes = default_nodes(80)

# %%
# Marginal posterior of mu for 1 and 99 successes out of 100.
a = marginal_mu(joint_posterior(1, 100, PriorSpec("uniform"), nodes, nodes))
b = marginal_mu(joint_posterior(99, 100, PriorSpec("uniform"), nodes, nodes))
print("posterior means:", round(float(np.sum(a * nodes)), 3), round(float(np.sum(b * nodes)), 3))
print("overlap (uniform prior):", round(overlap(a, b), 3))

# %%
# The Jeffreys prior puts more weight near rho = 0 and lowers the overlap.
mat = overlap_matrix([0.01, 0.5, 0.99], 100, PriorSpec("jeffreys"), nodes, nodes)
print("overlap matrix (Jeffreys prior):")
print(np.array2string(mat, precision=3))

# %%
# Fixing rho instead of integrating it out: larger rho flattens the posterior.
fine = default_nodes(1000)
for rho in (0.05, 0.15, 0.25):
    d = conditional_density(20, 100, rho, fine)
    print(f"rho={rho}: posterior mode {fine[np.argmax(d)]:.3f}, peak density {d.max():.2f}")
