"""Exact and spectral reference solvers.

Continuous heat flow on trig polynomials, the discrete random-walk semigroup
via lattice Fourier multipliers, the discrete Laplacian, and the two mobility
evaluations (exact quadrature reference and the lattice Riemann form) that
the quadratic-variation estimators are judged against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import GridField, Torus, TrigExpr, TrigTerm, jump_weight_value

MOBILITY_KINDS = ("ssep", "bm")


def mobility_value(kind: str, zeta: np.ndarray) -> np.ndarray:
    """Mobility function: zeta*(1-zeta) for exclusion dynamics, zeta for
    independent particles / Dean-Kawasaki."""
    if kind == "ssep":
        return zeta * (1.0 - zeta)
    if kind == "bm":
        return zeta
    raise ValueError(f"unknown mobility kind {kind!r}; expected one of {MOBILITY_KINDS}")


def heat_solve(rho0: TrigExpr, t: float) -> TrigExpr:
    """Evolve a trig polynomial by the (1/2)Laplacian heat semigroup, exactly.

    Mode k decays by exp(-2 pi^2 |k|^2 t); the constant term (total mass) is
    preserved.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    terms = []
    for term in rho0.terms:
        if term.kind == "const":
            terms.append(term)
        else:
            k2 = sum(k * k for k in term.mode)
            decay = math.exp(-2.0 * math.pi**2 * k2 * t)
            terms.append(TrigTerm(term.kind, term.mode, term.amplitude * decay))
    return TrigExpr(rho0.d, tuple(terms))


def discrete_laplacian(field: GridField, weight: float = 0.5) -> GridField:
    """Weighted lattice Laplacian (N^2 w) sum_j [f(x+e_j)+f(x-e_j)-2f(x)]."""
    if not field.is_scalar:
        raise ValueError("discrete_laplacian expects a scalar field")
    torus = field.torus
    grid = field.as_grid()
    acc = np.zeros_like(grid)
    for axis in range(torus.d):
        acc += np.roll(grid, -1, axis=axis) + np.roll(grid, +1, axis=axis) - 2.0 * grid
    acc *= weight * torus.n**2
    return GridField(torus, acc.reshape(-1))


def _walk_multipliers(torus: Torus, t: float, weight: float) -> np.ndarray:
    """Fourier multipliers of the single-particle walk semigroup on the lattice.

    The walk generator acts on mode k with eigenvalue
    2 w N^2 sum_j (cos(2 pi k_j / N) - 1); with w = 1/2 this is the generator
    whose continuum limit is (1/2)Laplacian.
    """
    n, d = torus.n, torus.d
    k1 = np.fft.fftfreq(n, d=1.0 / n)
    eig = np.zeros((n,) * d)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = n
        eig = eig + (np.cos(2.0 * np.pi * k1 / n) - 1.0).reshape(shape)
    return np.exp(t * 2.0 * weight * n**2 * eig)


@dataclass(frozen=True)
class DiscreteKernel:
    """Transition kernel G_N(t, .) of the single-particle random walk."""

    torus: Torus
    t: float
    weight: float
    values: GridField

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Convolve: (S_N(t) f)(y) = sum_x G_N(t, y-x) f(x)."""
        return semigroup_apply(self.torus, self.t, values, self.weight)


def discrete_semigroup(torus: Torus, t: float, weight: float = 0.5) -> DiscreteKernel:
    """Walk kernel at time t computed through the lattice Fourier transform."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    mult = _walk_multipliers(torus, t, weight)
    kernel = np.real(np.fft.ifftn(mult)).reshape(-1)
    return DiscreteKernel(torus, t, weight, GridField(torus, kernel))


def semigroup_apply(torus: Torus, t: float, values: np.ndarray, weight: float = 0.5) -> np.ndarray:
    """Apply S_N(t) to lattice samples without forming the kernel."""
    vals = np.asarray(values, dtype=np.float64).reshape((torus.n,) * torus.d)
    mult = _walk_multipliers(torus, t, weight)
    out = np.real(np.fft.ifftn(mult * np.fft.fftn(vals)))
    return out.reshape(-1)


def quadrature_resolution(rho: TrigExpr, phi: TrigExpr) -> int:
    """Grid resolution making equispaced quadrature of m(rho)|grad phi|^2 exact.

    The integrand is a trig polynomial of per-axis degree at most
    2*(max mode of rho) + 2*(max mode of phi); an equispaced rule is exact as
    soon as the points-per-axis count exceeds that degree.
    """
    s = rho.max_abs_mode() + phi.max_abs_mode()
    return max(8, 4 * s)


def mobility_reference(kind: str, rho_t: TrigExpr, phi: TrigExpr) -> float:
    """Exact integral of m(rho(t,x)) |grad phi(x)|^2 over the torus.

    Computed by equispaced quadrature at a resolution where the rule is exact
    for the trig integrand, so the reference contributes no discretization
    error of its own.
    """
    if rho_t.d != phi.d:
        raise ValueError("dimension mismatch")
    if kind == "ssep":
        lo, hi = rho_t.bounds()
        if lo < -1e-12 or hi > 1.0 + 1e-12:
            raise ValueError(f"ssep mobility needs rho in [0,1]; coefficient bounds give [{lo:g}, {hi:g}]")
    m = quadrature_resolution(rho_t, phi)
    quad = Torus(rho_t.d, m)
    pts = quad.points()
    grad = phi.gradient(pts)
    integrand = mobility_value(kind, rho_t(pts)) * np.sum(grad * grad, axis=1)
    return float(integrand.mean())


def riemann_mobility(torus: Torus, rho_t: TrigExpr, phi: TrigExpr, weight: float = 0.5) -> float:
    """Lattice Riemann form of the mobility pairing.

    N^{2-d} sum_x sum_z rho(x) (1 - rho(x+z)) p(z) [phi(x+z) - phi(x)]^2
    with p(+-e_j) = weight; converges to the exact mobility reference as the
    lattice refines.
    """
    if rho_t.d != torus.d or phi.d != torus.d:
        raise ValueError("dimension mismatch")
    rho = rho_t.sample(torus).reshape((torus.n,) * torus.d)
    ph = phi.sample(torus).reshape((torus.n,) * torus.d)
    total = 0.0
    for axis in range(torus.d):
        for shift in (-1, +1):
            rho_sh = np.roll(rho, shift, axis=axis)  # values at x+z for z = -shift*e_axis/n
            ph_sh = np.roll(ph, shift, axis=axis)
            total += weight * np.sum(rho * (1.0 - rho_sh) * (ph_sh - ph) ** 2)
    return float(torus.n ** (2 - torus.d) * total)


def riemann_pairing(torus: Torus, values: np.ndarray, phi: TrigExpr) -> float:
    """Lattice pairing N^{-d} sum_x f(x) phi(x)."""
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    return float(np.mean(vals * phi.sample(torus)))
