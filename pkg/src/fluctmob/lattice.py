"""Torus geometry, grid fields, and exact trigonometric polynomials.

The unit torus T^d carries a uniform lattice of n sites per dimension;
lattice sites are identified with the embedded points x = (i_1,...,i_d)/n.
Test functions and density profiles are trigonometric polynomials
(:class:`TrigExpr`), so gradients, Laplacians, and torus integrals are
available in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

JUMP_WEIGHT_TAGS = ("half", "inv2d")


def jump_weight_value(tag: str, d: int) -> float:
    """Per-direction exchange weight p(+-e_j) for a given convention tag.

    ``half`` is the default convention (w = 1/2, consistent with a (1/2)Delta
    hydrodynamic limit in every dimension); ``inv2d`` is the normalized kernel
    w = 1/(2d) kept as a sensitivity knob.
    """
    if tag == "half":
        return 0.5
    if tag == "inv2d":
        return 1.0 / (2 * d)
    raise ValueError(f"unknown jump_weight {tag!r}; expected one of {JUMP_WEIGHT_TAGS}")


@dataclass(frozen=True)
class Torus:
    """Discrete d-dimensional torus with n sites per dimension.

    Site indices are row-major with the last coordinate fastest; coordinate
    arithmetic wraps periodically.
    """

    d: int
    n: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError("torus dimension must be >= 1")
        if self.n < 2:
            raise ValueError("torus needs at least 2 sites per dimension")

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @property
    def n_sites(self) -> int:
        return self.n**self.d

    def site_index(self, coords) -> int:
        """Map integer coordinates (wrapped mod n) to the row-major site id."""
        coords = np.asarray(coords, dtype=np.int64)
        if coords.shape != (self.d,):
            raise ValueError(f"expected {self.d} coordinates, got shape {coords.shape}")
        idx = 0
        for c in coords % self.n:
            idx = idx * self.n + int(c)
        return idx

    def site_coords(self, index: int) -> tuple[int, ...]:
        """Inverse of :meth:`site_index` for indices in [0, n_sites)."""
        if not 0 <= index < self.n_sites:
            raise ValueError("site index out of range")
        return tuple(int(c) for c in np.unravel_index(index, (self.n,) * self.d))

    def neighbor(self, index: int, axis: int, step: int) -> int:
        """Site id after moving `step` lattice units along `axis` (periodic)."""
        coords = np.array(self.site_coords(index), dtype=np.int64)
        coords[axis] += step
        return self.site_index(coords)

    def points(self) -> np.ndarray:
        """Embedded site positions in [0,1)^d, shape (n_sites, d)."""
        return _points(self.d, self.n)

    def neighbor_table(self) -> np.ndarray:
        """Neighbor site ids, shape (2d, n_sites), int32.

        Row 2j holds the +e_j neighbor of every site, row 2j+1 the -e_j
        neighbor.
        """
        return _neighbor_table(self.d, self.n)


@lru_cache(maxsize=None)
def _points(d: int, n: int) -> np.ndarray:
    axes = np.indices((n,) * d).reshape(d, -1).T
    pts = axes.astype(np.float64) / n
    pts.setflags(write=False)
    return pts


@lru_cache(maxsize=None)
def _neighbor_table(d: int, n: int) -> np.ndarray:
    n_sites = n**d
    grid = np.arange(n_sites).reshape((n,) * d)
    rows = []
    for axis in range(d):
        rows.append(np.roll(grid, -1, axis=axis).reshape(-1))
        rows.append(np.roll(grid, +1, axis=axis).reshape(-1))
    table = np.array(rows, dtype=np.int32)
    table.setflags(write=False)
    return table


@dataclass(frozen=True)
class GridField:
    """Real field sampled on the torus lattice.

    `values` has shape (n_sites,) for scalar fields or (m, n_sites) for
    m-component vector fields. Entries must be finite; the stored array is a
    read-only copy.
    """

    torus: Torus
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim == 1:
            ok = vals.shape == (self.torus.n_sites,)
        elif vals.ndim == 2:
            ok = vals.shape[1] == self.torus.n_sites
        else:
            ok = False
        if not ok:
            raise ValueError(f"field shape {vals.shape} does not match torus with {self.torus.n_sites} sites")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite entries")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def is_scalar(self) -> bool:
        return self.values.ndim == 1

    def as_grid(self) -> np.ndarray:
        """Values reshaped to the (n,...,n) lattice layout."""
        shape = (self.torus.n,) * self.torus.d
        if self.is_scalar:
            return self.values.reshape(shape)
        return self.values.reshape((self.values.shape[0],) + shape)


def riemann_mean(field: GridField) -> float:
    """Lattice average N^{-d} sum_x f(x) of a scalar field."""
    if not field.is_scalar:
        raise ValueError("riemann_mean expects a scalar field")
    return float(field.values.mean())


_TERM_KINDS = ("const", "cos", "sin")


@dataclass(frozen=True)
class TrigTerm:
    kind: str
    mode: tuple[int, ...]
    amplitude: float

    def __post_init__(self) -> None:
        if self.kind not in _TERM_KINDS:
            raise ValueError(f"unknown term kind {self.kind!r}")
        object.__setattr__(self, "mode", tuple(int(k) for k in self.mode))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        if self.kind == "const":
            if any(self.mode):
                raise ValueError("const terms carry no mode")
        elif not any(self.mode):
            raise ValueError(f"{self.kind} term needs a nonzero mode; use const for the zero mode")


@dataclass(frozen=True)
class TrigExpr:
    """Trigonometric polynomial sum_i a_i * {1, cos, sin}(2 pi k_i . x) on T^d.

    Evaluation, gradient, Laplacian, torus mean, and L2 inner products are
    exact (closed form).
    """

    d: int
    terms: tuple[TrigTerm, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple(self.terms))
        for term in self.terms:
            if len(term.mode) != self.d:
                raise ValueError(f"term mode {term.mode} does not match dimension {self.d}")

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def constant(value: float, d: int = 1) -> "TrigExpr":
        return TrigExpr(d, (TrigTerm("const", (0,) * d, value),))

    @staticmethod
    def harmonic(kind: str, mode, amplitude: float) -> "TrigExpr":
        mode = tuple(int(k) for k in np.atleast_1d(mode))
        return TrigExpr(len(mode), (TrigTerm(kind, mode, amplitude),))

    def __add__(self, other: "TrigExpr") -> "TrigExpr":
        if self.d != other.d:
            raise ValueError("dimension mismatch")
        return TrigExpr(self.d, self.terms + other.terms)

    # -- exact calculus --------------------------------------------------------

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=np.float64)
        scalar_in = x.ndim == 1
        pts = x[None, :] if scalar_in else x
        if pts.shape[-1] != self.d:
            raise ValueError(f"points must have {self.d} components")
        out = np.zeros(pts.shape[0])
        for term in self.terms:
            if term.kind == "const":
                out += term.amplitude
            else:
                phase = 2.0 * np.pi * (pts @ np.array(term.mode, dtype=np.float64))
                out += term.amplitude * (np.cos(phase) if term.kind == "cos" else np.sin(phase))
        return float(out[0]) if scalar_in else out

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        scalar_in = x.ndim == 1
        pts = x[None, :] if scalar_in else x
        out = np.zeros((pts.shape[0], self.d))
        for term in self.terms:
            if term.kind == "const":
                continue
            k = np.array(term.mode, dtype=np.float64)
            phase = 2.0 * np.pi * (pts @ k)
            if term.kind == "cos":
                radial = -term.amplitude * 2.0 * np.pi * np.sin(phase)
            else:
                radial = term.amplitude * 2.0 * np.pi * np.cos(phase)
            out += radial[:, None] * k[None, :]
        return out[0] if scalar_in else out

    def laplacian(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=np.float64)
        scalar_in = x.ndim == 1
        pts = x[None, :] if scalar_in else x
        out = np.zeros(pts.shape[0])
        for term in self.terms:
            if term.kind == "const":
                continue
            k = np.array(term.mode, dtype=np.float64)
            phase = 2.0 * np.pi * (pts @ k)
            fac = -((2.0 * np.pi) ** 2) * float(k @ k) * term.amplitude
            out += fac * (np.cos(phase) if term.kind == "cos" else np.sin(phase))
        return float(out[0]) if scalar_in else out

    def mean(self) -> float:
        """Exact integral over T^d (volume one)."""
        return sum(t.amplitude for t in self.terms if t.kind == "const")

    def inner(self, other: "TrigExpr") -> float:
        """Exact L2(T^d) inner product with another trig polynomial."""
        if self.d != other.d:
            raise ValueError("dimension mismatch")
        total = 0.0
        for a in self.terms:
            for b in other.terms:
                total += _term_inner(a, b)
        return total

    def bounds(self) -> tuple[float, float]:
        """Conservative range bound: constant part +- sum of |amplitudes|."""
        const = self.mean()
        swing = sum(abs(t.amplitude) for t in self.terms if t.kind != "const")
        return const - swing, const + swing

    def max_abs_mode(self) -> int:
        """Largest |k_j| over all terms and components (0 for pure constants)."""
        mx = 0
        for t in self.terms:
            if t.kind != "const":
                mx = max(mx, max(abs(k) for k in t.mode))
        return mx

    # -- lattice sampling -------------------------------------------------------

    def sample(self, torus: Torus) -> np.ndarray:
        if torus.d != self.d:
            raise ValueError("dimension mismatch")
        return self(torus.points())

    def sample_field(self, torus: Torus) -> GridField:
        return GridField(torus, self.sample(torus))

    def gradient_sample(self, torus: Torus) -> np.ndarray:
        """Gradient at all lattice points, shape (n_sites, d)."""
        if torus.d != self.d:
            raise ValueError("dimension mismatch")
        return self.gradient(torus.points())


def _term_inner(a: TrigTerm, b: TrigTerm) -> float:
    if a.kind == "const" and b.kind == "const":
        return a.amplitude * b.amplitude
    if a.kind == "const" or b.kind == "const":
        return 0.0
    ka = np.array(a.mode)
    kb = np.array(b.mode)
    same = np.array_equal(ka, kb)
    opposite = np.array_equal(ka, -kb)
    if not (same or opposite):
        return 0.0
    if a.kind == "cos" and b.kind == "cos":
        return 0.5 * a.amplitude * b.amplitude
    if a.kind == "sin" and b.kind == "sin":
        return 0.5 * a.amplitude * b.amplitude * (1.0 if same else -1.0)
    return 0.0  # mixed cos/sin integrate to zero


def require_profile_in_unit_interval(expr: TrigExpr, name: str = "rho0") -> None:
    """Reject profiles whose conservative bounds leave [0, 1]."""
    lo, hi = expr.bounds()
    if lo < -1e-12 or hi > 1.0 + 1e-12:
        raise ValueError(f"{name} must take values in [0,1]; coefficient bounds give [{lo:g}, {hi:g}]")


def require_density(expr: TrigExpr, name: str = "rho0") -> None:
    """Reject probability densities with mass != 1 or a negative lower bound."""
    if abs(expr.mean() - 1.0) > 1e-12:
        raise ValueError(f"{name} must integrate to 1; constant term is {expr.mean():g}")
    lo, _ = expr.bounds()
    if lo < -1e-12:
        raise ValueError(f"{name} must be nonnegative; coefficient bound gives minimum {lo:g}")


# -- text grammar ----------------------------------------------------------------
#
# terms joined by '+'; term := "const:a" | "cos:k1,...,kd:a" | "sin:k1,...,kd:a".
# Example: "const:0.5+cos:1:0.25".


def parse_trig(text: str, d: int | None = None) -> TrigExpr:
    chunks = [c.strip() for c in text.strip().split("+")]
    if not chunks or chunks == [""]:
        raise ValueError("empty trig expression")
    parsed: list[tuple[str, tuple[int, ...] | None, float]] = []
    for pos, chunk in enumerate(chunks):
        parts = chunk.split(":")
        kind = parts[0].strip()
        try:
            if kind == "const":
                if len(parts) != 2:
                    raise ValueError("const term takes a single amplitude")
                parsed.append((kind, None, float(parts[1])))
            elif kind in ("cos", "sin"):
                if len(parts) != 3:
                    raise ValueError(f"{kind} term needs mode and amplitude")
                mode = tuple(int(k.strip()) for k in parts[1].split(","))
                parsed.append((kind, mode, float(parts[2])))
            else:
                raise ValueError(f"unknown term kind {kind!r}")
        except ValueError as exc:
            raise ValueError(f"bad trig term {chunk!r} at position {pos}: {exc}") from None
    mode_dims = {len(m) for _, m, _ in parsed if m is not None}
    if len(mode_dims) > 1:
        raise ValueError(f"inconsistent mode dimensions {sorted(mode_dims)} in {text!r}")
    if mode_dims:
        inferred = mode_dims.pop()
        if d is not None and d != inferred:
            raise ValueError(f"expression is {inferred}-dimensional, expected d={d}")
        d = inferred
    elif d is None:
        raise ValueError(f"dimension of {text!r} is ambiguous; pass d explicitly")
    terms = []
    for kind, mode, amp in parsed:
        terms.append(TrigTerm(kind, (0,) * d if mode is None else mode, amp))
    return TrigExpr(d, tuple(terms))


def format_trig(expr: TrigExpr) -> str:
    chunks = []
    for t in expr.terms:
        if t.kind == "const":
            chunks.append(f"const:{t.amplitude:.17g}")
        else:
            ks = ",".join(str(k) for k in t.mode)
            chunks.append(f"{t.kind}:{ks}:{t.amplitude:.17g}")
    return "+".join(chunks)
