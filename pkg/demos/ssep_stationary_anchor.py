"""Exclusion process at stationarity: the sharpest quantitative anchor.

At constant density p the product Bernoulli(p) measure is invariant, and the
expected quadratic variation of the density fluctuation field is available in
closed form at every lattice size and every observation gap h:

    (1/h) E (X(t+h, phi) - X(t, phi))^2
        = (2 p (1-p) / h) N^{-d} <phi, (I - S_N(h)) phi>,

with S_N the single-particle walk semigroup. As h -> 0 this tends to the
lattice Riemann form of the mobility pairing, which itself converges to
<grad phi, p(1-p) grad phi>. The script estimates the left side by kinetic
Monte Carlo and prints all three reference levels.
"""

import numpy as np

import fluctmob as fm

torus = fm.Torus(1, 32)
phi = fm.parse_trig("sin:1:1")
p = 0.5
t, h, replicas, seed = 0.1, 0.01, 2000, 5

params = fm.SsepParams(torus, fm.parse_trig(f"const:{p}", d=1))
record = fm.run_qv_experiment(params, t, h, phi, replicas, seed)

exact_h = fm.stationary_qv_reference(torus, p, phi, h)
closed_rate = fm.riemann_mobility(torus, fm.parse_trig(f"const:{p}", d=1), phi)
continuum = fm.mobility_reference("ssep", fm.parse_trig(f"const:{p}", d=1), phi)

print(f"KMC estimate          Q({t}, {h}) = {record.q_hat:.4f} +- {record.q_se:.4f}")
print(f"exact finite-h value          = {exact_h:.4f}   (within-path increments, any h)")
print(f"closed-form rate (h -> 0)     = {closed_rate:.4f}   (lattice Riemann form)")
print(f"continuum mobility pairing    = {continuum:.4f}   (= pi^2/2 at p = 1/2)")
print()
print(f"deviation from exact oracle: {abs(record.q_hat - exact_h) / record.q_se:.2f} standard errors")
print("note the visible h-damping: the finite-h value sits below the h->0 rate")
print(f"by the factor {exact_h / closed_rate:.4f}, exactly (1 - exp(lambda h)) / |lambda| h mode by mode.")
