"""Quadratic-variation estimator, experiment driver, and rate fitting.

One experiment simulates R independent replicas of a chosen model, observes
each replica's fluctuation field at t and t+h (a within-path increment), and
estimates

    Q_hat = (1/h) * mean of squared increments,

to be compared against the mobility pairing <grad phi, m(rho_bar(t)) grad phi>.
Replica streams are derived from (root seed, experiment index, replica index)
through a splittable seed sequence, so results are independent of scheduling
and worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import brownian as bm
from . import fhd, ssep
from .analytic import heat_solve, mobility_reference
from .lattice import Torus, TrigExpr


@dataclass(frozen=True)
class EstimateRecord:
    """One estimator evaluation with its uncertainty and reference value."""

    model: str
    d: int
    n: int | None
    grid_m: int | None
    t: float
    h: float
    eps: float | None
    delta: float | None
    reg_n: int | None
    replicas: int
    q_hat: float
    q_se: float
    mobility_ref: float
    abs_error: float
    seed: int
    status: str = "ok"
    replicas_ok: int = 0
    replicas_aborted: int = 0

    def __post_init__(self) -> None:
        if self.replicas < 2:
            raise ValueError("need at least two replicas")
        if self.status == "ok" and self.q_se < 0:
            raise ValueError("standard error must be nonnegative")


def qv_estimate(increments, h: float) -> tuple[float, float]:
    """Mean squared increment over h and its standard error.

    q_hat = (1/h) mean(x_i^2), q_se = (1/h) std(x_i^2) / sqrt(R).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(increments, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need at least two increments")
    sq = x * x
    q_hat = float(sq.mean() / h)
    q_se = float(sq.std(ddof=1) / math.sqrt(sq.size) / h)
    return q_hat, q_se


def rate_fit(points) -> tuple[float, float, float]:
    """Least-squares slope of log(error) against log(scale).

    Returns (slope, intercept, r2); every scale and error must be positive.
    """
    pts = [(float(s), float(e)) for s, e in points]
    if len(pts) < 3:
        raise ValueError("need at least three points to fit a rate")
    if any(s <= 0 or e <= 0 for s, e in pts):
        raise ValueError("rate fit needs positive scales and errors")
    lx = np.log([s for s, _ in pts])
    ly = np.log([e for _, e in pts])
    design = np.vstack([lx, np.ones_like(lx)]).T
    (slope, intercept), res, *_ = np.linalg.lstsq(design, ly, rcond=None)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0
    else:
        ss_res = float(np.sum((design @ np.array([slope, intercept]) - ly) ** 2))
        r2 = 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), float(r2)


# -- model descriptions -------------------------------------------------------------


@dataclass(frozen=True)
class BrownianParams:
    """Independent-particle model: particle count, initial density, variance tag."""

    count: int
    rho0: TrigExpr
    bm_variance: str = "dt"

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("need at least one particle")
        bm.bm_variance_scale(self.bm_variance)


ModelParams = ssep.SsepParams | BrownianParams | fhd.SpdeParams


def model_tag(params: ModelParams) -> str:
    if isinstance(params, ssep.SsepParams):
        return "ssep"
    if isinstance(params, BrownianParams):
        return "brownian"
    if isinstance(params, fhd.SpdeParams):
        return "dk" if params.sigma.kind == "dk" else "spde"
    raise TypeError(f"unknown model parameters {type(params)!r}")


def model_mobility_kind(params: ModelParams) -> str:
    """Mobility paired with the model: z(1-z) for exclusion-type dynamics,
    z for independent particles and the Dean-Kawasaki coefficient."""
    tag = model_tag(params)
    return "ssep" if tag in ("ssep", "spde") else "bm"


def replica_rng(root_seed: int, experiment_index: int, replica_index: int) -> np.random.Generator:
    """Deterministic, scheduling-independent stream for one replica."""
    seq = np.random.SeedSequence(root_seed, spawn_key=(experiment_index, replica_index))
    return np.random.default_rng(seq)


def replica_increment(
    params: ModelParams,
    t: float,
    h: float,
    phi: TrigExpr,
    rho_t: TrigExpr,
    rho_th: TrigExpr,
    rng: np.random.Generator,
) -> float:
    """Within-path fluctuation increment X(t+h, phi) - X(t, phi) for one replica."""
    if isinstance(params, ssep.SsepParams):
        config = ssep.sample_initial(params, rng)
        config = ssep.advance(config, t, params.jump_weight, rng)
        f1 = ssep.fluctuation(config, phi, rho_t)
        config = ssep.advance(config, h, params.jump_weight, rng)
        f2 = ssep.fluctuation(config, phi, rho_th)
        return f2 - f1
    if isinstance(params, BrownianParams):
        scale = bm.bm_variance_scale(params.bm_variance)
        return bm.fluctuation_increment(
            params.count, params.rho0, scale, t, h, phi, rho_t.inner(phi), rho_th.inner(phi), rng
        )
    if isinstance(params, fhd.SpdeParams):
        states, _ = fhd.run_spde(params, (t, t + h), rng)
        f1 = fhd.spde_fluctuation(states[0], phi, rho_t)
        f2 = fhd.spde_fluctuation(states[1], phi, rho_th)
        return f2 - f1
    raise TypeError(f"unknown model parameters {type(params)!r}")


def _replica_chunk(args) -> tuple[int, np.ndarray, np.ndarray]:
    params, t, h, phi, rho_t, rho_th, root_seed, experiment_index, start, stop = args
    vals = np.empty(stop - start)
    aborted = np.zeros(stop - start, dtype=bool)
    for i in range(start, stop):
        rng = replica_rng(root_seed, experiment_index, i)
        try:
            vals[i - start] = replica_increment(params, t, h, phi, rho_t, rho_th, rng)
        except fhd.SpdeBlowupError:
            vals[i - start] = np.nan
            aborted[i - start] = True
    return start, vals, aborted


def simulate_increments(
    params: ModelParams,
    t: float,
    h: float,
    phi: TrigExpr,
    replicas: int,
    root_seed: int,
    experiment_index: int = 0,
    workers: int = 1,
    first_replica: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Replica increments plus an aborted-replica mask, in replica order.

    Covers replica indices [first_replica, replicas). Because streams are
    keyed by replica index, growing `replicas` extends a smaller run without
    changing its entries.
    """
    rho0 = params.rho0
    rho_t = heat_solve(rho0, t)
    rho_th = heat_solve(rho0, t + h)
    count = replicas - first_replica
    if workers <= 1:
        _, vals, aborted = _replica_chunk(
            (params, t, h, phi, rho_t, rho_th, root_seed, experiment_index, first_replica, replicas)
        )
        return vals, aborted
    chunk = max(1, math.ceil(count / (workers * 4)))
    jobs = []
    for start in range(first_replica, replicas, chunk):
        stop = min(start + chunk, replicas)
        jobs.append((params, t, h, phi, rho_t, rho_th, root_seed, experiment_index, start, stop))
    vals = np.empty(count)
    aborted = np.zeros(count, dtype=bool)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for start, chunk_vals, chunk_ab in pool.map(_replica_chunk, jobs):
            offset = start - first_replica
            vals[offset : offset + chunk_vals.size] = chunk_vals
            aborted[offset : offset + chunk_vals.size] = chunk_ab
    return vals, aborted


def run_qv_experiment(
    params: ModelParams,
    t: float,
    h: float,
    phi: TrigExpr,
    replicas: int,
    root_seed: int,
    experiment_index: int = 0,
    workers: int = 1,
    abort_tolerance: float = 0.01,
) -> EstimateRecord:
    """Estimate the QV of the model's fluctuation field and attach the reference.

    A record whose aborted-replica fraction exceeds `abort_tolerance` is
    marked invalid and carries NaN statistics instead of a silently biased
    average.
    """
    if not 0 < h < t:
        raise ValueError("need 0 < h < t")
    if replicas < 2:
        raise ValueError("need at least two replicas")
    vals, aborted = simulate_increments(params, t, h, phi, replicas, root_seed, experiment_index, workers)
    rho_t = heat_solve(params.rho0, t)
    ref = mobility_reference(model_mobility_kind(params), rho_t, phi)
    n_ab = int(aborted.sum())
    tag = model_tag(params)
    is_spde = isinstance(params, fhd.SpdeParams)
    common = dict(
        model=tag,
        d=params.torus.d if isinstance(params, ssep.SsepParams) else (params.d if is_spde else params.rho0.d),
        n=params.torus.n if isinstance(params, ssep.SsepParams) else (params.count if isinstance(params, BrownianParams) else None),
        grid_m=params.grid_m if is_spde else None,
        t=t,
        h=h,
        eps=params.eps if is_spde else None,
        delta=params.noise.delta if is_spde else None,
        reg_n=params.sigma.reg_n if is_spde else None,
        replicas=replicas,
        mobility_ref=ref,
        seed=root_seed,
        replicas_ok=replicas - n_ab,
        replicas_aborted=n_ab,
    )
    if n_ab > abort_tolerance * replicas or replicas - n_ab < 2:
        return EstimateRecord(q_hat=float("nan"), q_se=float("nan"), abs_error=float("nan"), status="invalid", **common)
    q_hat, q_se = qv_estimate(vals[~aborted], h)
    return EstimateRecord(q_hat=q_hat, q_se=q_se, abs_error=abs(q_hat - ref), status="ok", **common)
