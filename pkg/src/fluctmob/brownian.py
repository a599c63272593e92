"""Independent Brownian particles on the torus and their fluctuation field.

Particle increments are exact wrapped Gaussians (no time-stepping error); the
default generator convention is (1/2)Laplacian, i.e. per-coordinate increment
variance dt. The literal-diffusion variant (variance 2 dt) stays available
through `variance_scale`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import TrigExpr, require_density

BM_VARIANCE_TAGS = ("dt", "2dt")


def bm_variance_scale(tag: str) -> float:
    if tag == "dt":
        return 1.0
    if tag == "2dt":
        return 2.0
    raise ValueError(f"unknown bm_variance {tag!r}; expected one of {BM_VARIANCE_TAGS}")


@dataclass(frozen=True)
class ParticleEnsemble:
    """Positions of independent particles, wrapped into [0,1)^d."""

    positions: np.ndarray  # shape (count, d)

    def __post_init__(self) -> None:
        pos = np.array(self.positions, dtype=np.float64)
        if pos.ndim != 2:
            raise ValueError("positions must have shape (count, d)")
        if pos.size and (pos.min() < 0.0 or pos.max() >= 1.0):
            raise ValueError("positions must be wrapped into [0,1)")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]


def sample_initial_particles(
    count: int, rho0: TrigExpr, rng: np.random.Generator, d: int | None = None
) -> ParticleEnsemble:
    """Draw i.i.d. initial positions with density rho0 by rejection sampling.

    The uniform envelope bound is the conservative coefficient bound on
    max rho0, so acceptance is exact for trig densities in any dimension.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    require_density(rho0)
    dim = rho0.d if d is None else d
    if dim != rho0.d:
        raise ValueError("dimension mismatch")
    if count == 0:
        return ParticleEnsemble(np.zeros((0, dim)))
    if all(t.kind == "const" for t in rho0.terms):
        return ParticleEnsemble(rng.random((count, dim)))  # uniform density
    _, hi = rho0.bounds()
    accepted: list[np.ndarray] = []
    remaining = count
    while remaining > 0:
        batch = max(int(remaining / max(1.0 / hi, 1e-3)) + 16, remaining)
        cand = rng.random((batch, dim))
        keep = rng.random(batch) * hi < rho0(cand)
        got = cand[keep]
        if got.shape[0] > remaining:
            got = got[:remaining]
        accepted.append(got)
        remaining -= got.shape[0]
    return ParticleEnsemble(np.vstack(accepted))


def advance_particles(
    ens: ParticleEnsemble,
    dt: float,
    rng: np.random.Generator,
    variance_scale: float = 1.0,
) -> ParticleEnsemble:
    """Exact Brownian step: independent Gaussian increments, wrapped mod 1."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0 or ens.count == 0:
        return ens
    step = rng.standard_normal(ens.positions.shape) * np.sqrt(variance_scale * dt)
    return ParticleEnsemble(np.mod(ens.positions + step, 1.0))


def particle_fluctuation(ens: ParticleEnsemble, phi: TrigExpr, rho_bar: TrigExpr) -> float:
    """CLT-scaled deviation of the empirical phi-average from the mean field.

    sqrt(N) ( (1/N) sum_i phi(B_i) - <rho_bar, phi> ), the pairing computed
    through the exact trig integral so centering adds no quadrature error.
    `rho_bar` must already be evolved to the ensemble's time.
    """
    if ens.count == 0:
        return 0.0
    emp = float(np.mean(phi(ens.positions)))
    return float(np.sqrt(ens.count) * (emp - rho_bar.inner(phi)))


def fluctuation_increment(
    count: int,
    rho0: TrigExpr,
    variance_scale: float,
    t: float,
    h: float,
    phi: TrigExpr,
    center_t: float,
    center_th: float,
    rng: np.random.Generator,
) -> float:
    """Within-path increment of the particle fluctuation field, loop-fused.

    Same law as sampling, advancing, and pairing through the public
    operations, but without intermediate ensemble objects; used by the
    replica driver where millions of replicas make the bookkeeping visible.
    `center_t` / `center_th` are the exact pairings <rho_bar(.), phi>.
    """
    d = rho0.d
    if all(term.kind == "const" for term in rho0.terms):
        pos = rng.random((count, d))
    else:
        pos = np.array(sample_initial_particles(count, rho0, rng).positions)
    pos += np.sqrt(variance_scale * t) * rng.standard_normal((count, d))
    np.mod(pos, 1.0, out=pos)
    f1 = np.sqrt(count) * (float(np.mean(phi(pos))) - center_t)
    pos += np.sqrt(variance_scale * h) * rng.standard_normal((count, d))
    np.mod(pos, 1.0, out=pos)
    f2 = np.sqrt(count) * (float(np.mean(phi(pos))) - center_th)
    return float(f2 - f1)
