"""Pseudo-spectral solver for the conservative fluctuating-hydrodynamics SPDE.

The equation is stepped in Ito form,

    d rho = (1/2) Laplacian rho dt
            - sqrt(eps) div( sigma_n(rho) dW_delta )
            + (eps/2) F1 div( sigma_n'(rho)^2 grad rho ) dt,

with W_delta the mollified-Fourier Brownian field. The noise mollifier is a
Gaussian multiplier theta(2 pi delta |k|) on complex exponentials, so the
pointwise variance constant F1 and gradient constant F3 are rapidly summable
and the realized field is spatially stationary. Time stepping is
Euler-Maruyama with the stiff heat term integrated implicitly by its spectral
multiplier; the divergence structure keeps the spatial mean exact to machine
precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .lattice import GridField, Torus, TrigExpr


class SpdeBlowupError(RuntimeError):
    """Raised when a trajectory leaves the representable range (solver blow-up)."""


# -- mollified Fourier noise -------------------------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian-mollified Fourier noise with correlation length delta.

    Mode k carries multiplier theta(2 pi delta |k|) with theta(r) =
    exp(-r^2/2); modes whose multiplier falls below `cutoff` are dropped.
    """

    delta: float
    cutoff: float = 1e-8

    def __post_init__(self) -> None:
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if not 0 < self.cutoff < 1:
            raise ValueError("cutoff must lie in (0,1)")

    def multiplier(self, k_norm: np.ndarray) -> np.ndarray:
        return np.exp(-0.5 * (2.0 * np.pi * self.delta * k_norm) ** 2)

    def max_mode(self, d: int) -> int:
        return _half_modes(self.delta, self.cutoff, d)[2]

    def f1(self, d: int) -> float:
        """Pointwise variance constant F1 = sum_k theta_k^2."""
        _, theta, _ = _half_modes(self.delta, self.cutoff, d)
        return float(1.0 + 2.0 * np.sum(theta**2))

    def f3(self, d: int) -> float:
        """Gradient variance constant F3 = sum_k (2 pi |k|)^2 theta_k^2."""
        modes, theta, _ = _half_modes(self.delta, self.cutoff, d)
        k2 = np.sum(modes.astype(np.float64) ** 2, axis=1)
        return float(2.0 * np.sum((2.0 * np.pi) ** 2 * k2 * theta**2))

    def gaussians_per_component(self, d: int) -> int:
        modes, _, _ = _half_modes(self.delta, self.cutoff, d)
        return 1 + 2 * modes.shape[0]


@lru_cache(maxsize=None)
def _half_modes(delta: float, cutoff: float, d: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Retained nonzero modes up to sign, their multipliers, and the mode cut.

    A representative of each +-k pair is kept (first nonzero component
    positive); k = 0 is handled separately by callers.
    """
    kmax = int(math.floor(math.sqrt(-2.0 * math.log(cutoff)) / (2.0 * math.pi * delta)))
    kmax = max(kmax, 0)
    rng_1d = np.arange(-kmax, kmax + 1)
    grids = np.meshgrid(*([rng_1d] * d), indexing="ij")
    modes = np.stack([g.reshape(-1) for g in grids], axis=1)
    norms = np.sqrt(np.sum(modes.astype(np.float64) ** 2, axis=1))
    theta = np.exp(-0.5 * (2.0 * np.pi * delta * norms) ** 2)
    keep = theta >= cutoff
    modes, theta = modes[keep], theta[keep]
    lead = np.zeros(modes.shape[0], dtype=bool)
    for row in range(modes.shape[0]):
        k = modes[row]
        nz = k[k != 0]
        lead[row] = nz.size > 0 and nz[0] > 0
    modes = np.ascontiguousarray(modes[lead])
    theta = np.ascontiguousarray(theta[lead])
    modes.setflags(write=False)
    theta.setflags(write=False)
    return modes, theta, kmax


def _realize_noise(
    spec: NoiseSpec, d: int, grid_m: int, dt: float, gauss: np.ndarray
) -> np.ndarray:
    """Map standard Gaussians to a real noise-increment field on the grid.

    `gauss` has shape (d, 1 + 2*n_half): one real amplitude for the constant
    mode, then (re, im) pairs for each retained half-space mode. Returns the
    d-component increment with per-point, per-component variance F1 * dt.
    """
    modes, theta, kmax = _half_modes(spec.delta, spec.cutoff, d)
    if grid_m < 4 * max(kmax, 1):
        raise ValueError(f"grid resolution {grid_m} under-resolves noise modes up to {kmax} (need >= {4 * max(kmax, 1)})")
    shape = (grid_m,) * d
    out = np.empty((d,) + shape)
    scale = math.sqrt(dt)
    for comp in range(d):
        spectrum = np.zeros(shape, dtype=np.complex128)
        spectrum[(0,) * d] = gauss[comp, 0]
        re = gauss[comp, 1::2]
        im = gauss[comp, 2::2]
        z = theta * (re + 1j * im) / math.sqrt(2.0)
        for row in range(modes.shape[0]):
            idx = tuple(int(k) % grid_m for k in modes[row])
            neg = tuple(int(-k) % grid_m for k in modes[row])
            spectrum[idx] = z[row]
            spectrum[neg] = np.conj(z[row])
        out[comp] = np.real(np.fft.ifftn(spectrum)) * grid_m**d * scale
    return out


def make_noise_increment(
    spec: NoiseSpec, dt: float, grid_m: int, rng: np.random.Generator, d: int = 1
) -> GridField:
    """Sample one increment of W_delta over dt, realized on the grid.

    Returns a d-component vector field; conjugate pairing of the complex
    modes makes it real, and the equal-multiplier construction makes the
    pointwise variance F1 * dt at every grid point.
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    gauss = rng.standard_normal((d, spec.gaussians_per_component(d)))
    field = _realize_noise(spec, d, grid_m, dt, gauss)
    return GridField(Torus(d, grid_m), field.reshape(d, -1))


# -- regularized square-root coefficients ------------------------------------------


def _smoothstep(u: np.ndarray) -> np.ndarray:
    return u * u * (3.0 - 2.0 * u)


def _smoothstep_deriv(u: np.ndarray) -> np.ndarray:
    return 6.0 * u * (1.0 - u)


SIGMA_KINDS = ("ssep", "dk")


@dataclass(frozen=True)
class SigmaReg:
    """C^1 truncation of a square-root noise coefficient.

    kind "ssep" regularizes sqrt(z (1-z)) and vanishes outside
    [1/(2n), 1 - 1/(2n)]; kind "dk" regularizes sqrt(z) and vanishes below
    1/(2n). On the ramp [1/(2n), 1/n] the target is multiplied by the cubic
    smoothstep, which matches value and derivative at both ends, so the
    derivative needed by the Ito correction is available in closed form.
    """

    kind: str
    reg_n: int

    def __post_init__(self) -> None:
        if self.kind not in SIGMA_KINDS:
            raise ValueError(f"unknown sigma kind {self.kind!r}; expected one of {SIGMA_KINDS}")
        if self.reg_n < 2:
            raise ValueError("regularization scale must satisfy n >= 2")

    @property
    def ramp_lo(self) -> float:
        return 0.5 / self.reg_n

    @property
    def ramp_hi(self) -> float:
        return 1.0 / self.reg_n

    def _target(self, z: np.ndarray) -> np.ndarray:
        zc = np.clip(z, 0.0, 1.0) if self.kind == "ssep" else np.maximum(z, 0.0)
        return np.sqrt(zc * (1.0 - zc)) if self.kind == "ssep" else np.sqrt(zc)

    def _target_deriv(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "ssep":
            zc = np.clip(z, 1e-300, 1.0 - 1e-16)
            return (1.0 - 2.0 * zc) / (2.0 * np.sqrt(zc * (1.0 - zc)))
        zc = np.maximum(z, 1e-300)
        return 0.5 / np.sqrt(zc)

    def _pieces(self, z: np.ndarray):
        a, b = self.ramp_lo, self.ramp_hi
        if self.kind == "ssep":
            dead = (z <= a) | (z >= 1.0 - a)
            lower = (z > a) & (z < b)
            upper = (z > 1.0 - b) & (z < 1.0 - a)
        else:
            dead = z <= a
            lower = (z > a) & (z < b)
            upper = np.zeros_like(dead)
        interior = ~(dead | lower | upper)
        return dead, lower, upper, interior

    def __call__(self, z) -> np.ndarray | float:
        z = np.asarray(z, dtype=np.float64)
        scalar = z.ndim == 0
        zz = np.atleast_1d(z)
        a, b = self.ramp_lo, self.ramp_hi
        dead, lower, upper, interior = self._pieces(zz)
        out = np.zeros_like(zz)
        out[interior] = self._target(zz[interior])
        if np.any(lower):
            u = (zz[lower] - a) / (b - a)
            out[lower] = _smoothstep(u) * self._target(zz[lower])
        if np.any(upper):
            u = ((1.0 - zz[upper]) - a) / (b - a)
            out[upper] = _smoothstep(u) * self._target(zz[upper])
        return float(out[0]) if scalar else out

    def derivative(self, z) -> np.ndarray | float:
        z = np.asarray(z, dtype=np.float64)
        scalar = z.ndim == 0
        zz = np.atleast_1d(z)
        a, b = self.ramp_lo, self.ramp_hi
        dead, lower, upper, interior = self._pieces(zz)
        out = np.zeros_like(zz)
        out[interior] = self._target_deriv(zz[interior])
        if np.any(lower):
            u = (zz[lower] - a) / (b - a)
            out[lower] = (
                _smoothstep_deriv(u) / (b - a) * self._target(zz[lower])
                + _smoothstep(u) * self._target_deriv(zz[lower])
            )
        if np.any(upper):
            u = ((1.0 - zz[upper]) - a) / (b - a)
            out[upper] = (
                -_smoothstep_deriv(u) / (b - a) * self._target(zz[upper])
                + _smoothstep(u) * self._target_deriv(zz[upper])
            )
        return float(out[0]) if scalar else out

    def sup_derivative(self) -> float:
        """Numerical sup of |sigma_n'| used by the step-size rule."""
        hi = 1.0 if self.kind == "ssep" else 1.5
        grid = np.linspace(0.0, hi, 16385)
        return float(np.max(np.abs(self.derivative(grid))))


# -- SPDE state and stepping ---------------------------------------------------------


@dataclass(frozen=True)
class SpdeParams:
    """Static data of one SPDE run."""

    d: int
    grid_m: int
    eps: float
    rho0: TrigExpr
    noise: NoiseSpec
    sigma: SigmaReg
    dt_max: float | None = None  # None -> stability rule

    def __post_init__(self) -> None:
        if self.rho0.d != self.d:
            raise ValueError("rho0 dimension mismatch")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        kmax = self.noise.max_mode(self.d)
        if self.grid_m < 4 * max(kmax, 1):
            raise ValueError(
                f"grid_m={self.grid_m} under-resolves the noise (mode cut {kmax}; need >= {4 * max(kmax, 1)})"
            )
        lo, hi = self.rho0.bounds()
        if self.sigma.kind == "ssep" and (lo <= 0.0 or hi >= 1.0):
            raise ValueError("ssep coefficient needs rho0 bounded away from 0 and 1")
        if self.sigma.kind == "dk" and lo <= 0.0:
            raise ValueError("dk coefficient needs rho0 bounded away from 0")


def default_grid(noise: NoiseSpec, d: int) -> int:
    return max(4 * noise.max_mode(d), 64)


def stability_dt(params: SpdeParams) -> float:
    """Step-size rule for the explicit transport terms.

    The implicit heat solve removes the parabolic constraint; the residual
    restriction comes from the Ito-correction transport, giving
    dt <= 0.1 delta^2 / (eps F3 sup|sigma_n'|^2 d), capped at 1e-3.
    """
    cap = 1e-3
    sup = params.sigma.sup_derivative()
    f3 = params.noise.f3(params.d)
    denom = params.eps * f3 * sup**2 * params.d
    if denom <= 0:
        return cap
    return min(0.1 * params.noise.delta**2 / denom, cap)


@dataclass(frozen=True)
class SpdeState:
    params: SpdeParams
    rho: np.ndarray  # shape (grid_m,) * d
    time: float

    def mean(self) -> float:
        return float(self.rho.mean())

    def fluct_pairing(self, phi: TrigExpr) -> float:
        """Grid quadrature of rho * phi (exact for resolved trig phi)."""
        pts = Torus(self.params.d, self.params.grid_m).points()
        return float(np.mean(self.rho.reshape(-1) * phi(pts)))


def initial_state(params: SpdeParams) -> SpdeState:
    grid = Torus(params.d, params.grid_m)
    rho = params.rho0.sample(grid).reshape((params.grid_m,) * params.d)
    return SpdeState(params, rho, 0.0)


@lru_cache(maxsize=None)
def _spectral_tools(d: int, m: int):
    k1 = np.fft.fftfreq(m, d=1.0 / m)
    ks = []
    k2 = np.zeros((m,) * d)
    dealias = np.ones((m,) * d, dtype=bool)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = m
        kj = k1.reshape(shape)
        ks.append(kj * np.ones((m,) * d))
        k2 = k2 + kj**2
        dealias &= np.abs(kj) <= m / 3.0
    karr = np.stack(ks)
    karr.setflags(write=False)
    k2.setflags(write=False)
    dealias.setflags(write=False)
    return karr, k2, dealias


def _apply_step(state: SpdeState, noise_inc: np.ndarray, dt: float) -> SpdeState:
    """One semi-implicit Euler-Maruyama step with a given noise increment.

    Nonlinear divergence terms are evaluated in physical space with spectral
    derivatives and dealiased by the 2/3 rule; the (1/2)Laplacian term is
    integrated implicitly through its Fourier multiplier. The zero mode of a
    divergence vanishes identically, so the spatial mean never moves.
    """
    p = state.params
    d, m = p.d, p.grid_m
    karr, k2, dealias = _spectral_tools(d, m)
    rho = state.rho
    # overflow/invalid raise no warnings here: non-finite values are the
    # blow-up signal and are caught below
    with np.errstate(over="ignore", invalid="ignore"):
        rho_hat = np.fft.fftn(rho)
        sig = p.sigma(rho)
        div_hat = np.zeros_like(rho_hat)
        if p.eps > 0:
            sqeps = math.sqrt(p.eps)
            ito = 0.5 * p.eps * p.noise.f1(d) * dt
            sigp2 = p.sigma.derivative(rho) ** 2
            for axis in range(d):
                grad_j = np.real(np.fft.ifftn(2j * np.pi * karr[axis] * rho_hat))
                flux_j = -sqeps * sig * noise_inc[axis] + ito * sigp2 * grad_j
                flux_hat = np.fft.fftn(flux_j)
                flux_hat[~dealias] = 0.0
                div_hat += 2j * np.pi * karr[axis] * flux_hat
        new_hat = (rho_hat + div_hat) / (1.0 + 0.5 * (2.0 * np.pi) ** 2 * k2 * dt)
        rho_new = np.real(np.fft.ifftn(new_hat))
    if not np.all(np.isfinite(rho_new)):
        raise SpdeBlowupError(f"non-finite field after step at t={state.time:g}")
    return replace(state, rho=rho_new, time=state.time + dt)


def spde_step(state: SpdeState, rng: np.random.Generator, dt: float | None = None) -> SpdeState:
    """Advance one time step, drawing the noise increment from `rng`."""
    p = state.params
    if dt is None:
        dt = stability_dt(p)
    gauss = rng.standard_normal((p.d, p.noise.gaussians_per_component(p.d)))
    noise_inc = _realize_noise(p.noise, p.d, p.grid_m, dt, gauss)
    return _apply_step(state, noise_inc, dt)


@dataclass(frozen=True)
class ViolationStats:
    """Fraction of grid points with rho < 0, tracked before coefficient flooring."""

    steps: int
    mean_fraction: float
    max_fraction: float


def run_spde(
    params: SpdeParams,
    times,
    rng: np.random.Generator,
    dt_scale: float = 1.0,
    track_violations: bool = False,
) -> tuple[list[SpdeState], ViolationStats | None]:
    """Evolve from t=0 and return states at the requested increasing times.

    Observation times are hit exactly by dividing each segment into an
    integer number of steps no longer than the stability limit.
    """
    times = [float(t) for t in times]
    if any(t2 <= t1 for t1, t2 in zip(times, times[1:])) or (times and times[0] < 0):
        raise ValueError("observation times must be increasing and nonnegative")
    dt_max = (params.dt_max if params.dt_max is not None else stability_dt(params)) * dt_scale
    state = initial_state(params)
    out: list[SpdeState] = []
    steps = 0
    viol_sum = 0.0
    viol_max = 0.0
    prev = 0.0
    for t_obs in times:
        seg = t_obs - prev
        if seg > 0:
            n_steps = max(1, math.ceil(seg / dt_max - 1e-12))
            dt = seg / n_steps
            for _ in range(n_steps):
                state = spde_step(state, rng, dt)
                if track_violations:
                    frac = float(np.mean(state.rho < 0.0))
                    viol_sum += frac
                    viol_max = max(viol_max, frac)
                steps += 1
        out.append(state)
        prev = t_obs
    stats = None
    if track_violations:
        stats = ViolationStats(steps, viol_sum / steps if steps else 0.0, viol_max)
    return out, stats


def spde_fluctuation(state: SpdeState, phi: TrigExpr, rho_bar: TrigExpr) -> float:
    """Rescaled deviation eps^{-1/2} ( <rho_eps, phi>_grid - <rho_bar, phi> ).

    The centering uses the exact trig integral; `rho_bar` must be evolved to
    the state's time.
    """
    eps = state.params.eps
    if eps <= 0:
        raise ValueError("fluctuation scaling needs eps > 0")
    return float((state.fluct_pairing(phi) - rho_bar.inner(phi)) / math.sqrt(eps))


def dk_truncated_run(
    params: SpdeParams, times, rng: np.random.Generator, dt_scale: float = 1.0
) -> tuple[list[SpdeState], ViolationStats]:
    """Weakly regularized square-root run for the asymptotic-identity study.

    Same stepper, dk coefficient with a large regularization scale; returns
    the requested snapshots together with negative-density statistics.
    """
    if params.sigma.kind != "dk":
        raise ValueError("dk_truncated_run expects a dk coefficient")
    states, stats = run_spde(params, times, rng, dt_scale, track_violations=True)
    assert stats is not None
    return states, stats
