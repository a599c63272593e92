"""Square-root (Dean-Kawasaki type) coefficient: the asymptotic QV identity.

With the irregular coefficient sigma(z) = sqrt(z) (weakly regularized near
zero) and constant unit density, the fluctuation field's quadratic variation
should approach <grad phi, grad phi> = 2 pi^2 as the window h, the noise
amplitude eps, and the noise correlation length delta all shrink together
(the scaling regime keeps eps * delta^{-d-2} small).

The script evaluates the estimator at two points of the regime. At a coarse
fixed delta the mollifier visibly suppresses the measured QV -- the transfer
factor on the k = +-1 modes is exp(-(2 pi delta)^2) -- while shrinking delta
closes most of the gap. Negative-density excursions are tracked and stay
rare throughout.
"""

import math

import fluctmob as fm
import numpy as np

phi = fm.parse_trig("sin:1:1")
one = fm.parse_trig("const:1", d=1)
target = 2 * math.pi**2

print(f"identity target: <grad phi, grad phi> = 2 pi^2 = {target:.4f}\n")
settings = [
    ("coarse noise", 0.1, 1e-4, 0.01, 64, 300),
    ("shrunk noise", 0.035, 5e-7, 0.002, 128, 300),
]
for label, delta, eps, h, grid, reps in settings:
    params = fm.SpdeParams(1, grid, eps, one, fm.NoiseSpec(delta), fm.SigmaReg("dk", 64))
    record = fm.run_qv_experiment(params, 0.1, h, phi, reps, 6)
    transfer = math.exp(-((2 * math.pi * delta) ** 2))
    print(f"{label}: delta={delta}, eps={eps:g}, h={h}  (eps*delta^-3 = {eps * delta**-3:.3g})")
    print(f"  Q = {record.q_hat:.3f} +- {record.q_se:.3f}  -> {100 * record.q_hat / target:.1f}% of target "
          f"(mode-1 mollifier transfer {transfer:.3f})")

# negative-density bookkeeping on a profile that grazes the vacuum: at desk
# noise amplitudes the truncated coefficient keeps the field nonnegative, and
# the tracker confirms it (fractions are exactly zero; they become positive
# only at much larger eps)
params = fm.SpdeParams(1, 64, 2e-2, fm.parse_trig("const:1+cos:1:0.95"), fm.NoiseSpec(0.1), fm.SigmaReg("dk", 64))
_, stats = fm.dk_truncated_run(params, (0.02,), np.random.default_rng(7))
print(f"\nnegative-density excursions at eps = 0.02 on a near-vacuum profile: "
      f"mean fraction {stats.mean_fraction:.2e}, max {stats.max_fraction:.2e}")
