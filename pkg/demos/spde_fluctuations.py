"""Conservative SPDE: correlated noise construction and the estimator's floors.

The fluctuating-hydrodynamics model drives the density with a mollified
Fourier noise field W_delta whose pointwise variance rate is the constant
F1(delta); the equation is stepped in Ito form with the explicit F1-weighted
correction. The script verifies the noise isometry by simulation, then runs
a small (eps, h) sweep of the regularized square-root model to show the
error-floor structure: shrinking h reduces the error until the combination
eps * delta^{-d-2} (and the fixed mollifier scale) takes over.
"""

import numpy as np

import fluctmob as fm

spec = fm.NoiseSpec(0.1)
print(f"mollified noise, delta = 0.1: retained modes |k| <= {spec.max_mode(1)}, "
      f"F1 = {spec.f1(1):.4f}, F3 = {spec.f3(1):.2f}")

rng = np.random.default_rng(0)
dt, draws = 0.01, 4000
samples = np.array([fm.make_noise_increment(spec, dt, 64, rng).values[0, 5] for _ in range(draws)])
print(f"single-point increment variance over {draws} draws: {samples.var():.5f} "
      f"vs F1 * dt = {spec.f1(1) * dt:.5f}")

phi = fm.parse_trig("sin:1:1")
rho0 = fm.parse_trig("const:0.5+cos:1:0.2")
print("\nregularized square-root coefficient, grid 128, t = 0.1:")
print(f"{'eps':>8} {'h':>6} {'Q_hat':>8} {'se':>6} {'|error|':>9}")
for j, eps in enumerate((1e-4, 2.5e-5)):
    params = fm.SpdeParams(1, 128, eps, rho0, spec, fm.SigmaReg("ssep", 16))
    for i, h in enumerate((0.01, 0.04)):
        record = fm.run_qv_experiment(params, 0.1, h, phi, 200, 4, experiment_index=10 * j + i)
        print(f"{eps:>8g} {h:>6} {record.q_hat:>8.3f} {record.q_se:>6.3f} {record.abs_error:>9.3f}")
print("\nerrors fall as h shrinks; the remaining floor tracks the noise"
      "\ncorrelation scale (mollifier transfer on the test-function mode).")
