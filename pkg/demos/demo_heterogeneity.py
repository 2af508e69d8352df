"""
From effect-size heterogeneity to the intraclass correlation
=============================================================

Two mechanisms generate non-exact replications: the true effect varies across
populations, or the stimulus is delivered with a bias and noise.  Both map
onto a mean replicability rate mu and an intraclass correlation rho.
"""

from replicability.hetero import (
    DeliveryScenario, PopulationScenario, ex1_mu, ex1_rho, ex2_finite_n, ex2_mu_largen,
    ex2_rho_largen, panel_label,
)

# %%
# Population heterogeneity: theta is the mean effect, sigma its spread, se the
# within-study standard error.
print("theta  sigma   mu     rho    panel")
for sigma in (0.25, 0.5, 1.0):
    for theta in (0.1, 1.0, 2.5):
        s = PopulationScenario(theta, sigma, 1.0)
        rho = ex1_rho(s)
        print(f"{theta:5.2f} {sigma:6.2f} {ex1_mu(s):6.3f} {rho:6.3f}   {panel_label(rho)}")

# %%
# Shrinking the standard error (larger studies) raises rho sharply.
print("se = 0.1:", round(ex1_rho(PopulationScenario(1.0, 0.5, 0.1)), 3))

# %%
# Delivery heterogeneity: a one-sided exact binomial test on n subjects per lab.
s = DeliveryScenario(1.0, 0.0, 0.0, n=100)
print("critical count:", s.critical_count, " size of the test:", round(s.test_size, 4))
for bias, noise in ((0.0, 0.5), (0.5, 0.25), (-0.5, 1.0)):
    d = DeliveryScenario(1.0, bias, noise, n=100)
    mu_n, rho_n = ex2_finite_n(d)
    shown = "undefined" if rho_n is None else f"{rho_n:.3f}"
    print(f"bias={bias:+.2f} noise={noise:.2f}  large-n mu={ex2_mu_largen(d):.3f} "
          f"rho={ex2_rho_largen(d):.3f}   n=100 mu={mu_n:.3f} rho={shown}")
