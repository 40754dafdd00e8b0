"""Discrete fields on the periodic unit square and on thin vertical slabs.

Horizontal directions are Fourier-spectral on an even ``n1 x n2`` grid with
nodes ``(i/n1, j/n2)``.  The vertical direction uses Legendre-Gauss-Lobatto
(LGL) nodes, so both slab faces are grid nodes and vertical derivatives,
integrals and norms are exact for the degree-``m`` polynomial interpolant.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import legendre as L

TWO_PI = 2.0 * np.pi


# --------------------------------------------------------------------------
# horizontal spectral calculus on arrays whose last two axes are (x1, x2)
# --------------------------------------------------------------------------

@functools.lru_cache(maxsize=64)
def wavenumbers(n1: int, n2: int) -> tuple[np.ndarray, np.ndarray]:
    """Angular wavenumbers ``2 pi k`` broadcastable against an (n1, n2) grid."""
    k1 = TWO_PI * np.fft.fftfreq(n1, d=1.0 / n1)
    k2 = TWO_PI * np.fft.fftfreq(n2, d=1.0 / n2)
    return k1[:, None], k2[None, :]


def _check_even(n1: int, n2: int) -> None:
    if n1 < 2 or n2 < 2 or n1 % 2 or n2 % 2:
        raise ValueError(f"grid sizes must be even and >= 2, got ({n1}, {n2})")


def derivative_symbol(n1: int, n2: int, axis: int, order: int) -> np.ndarray:
    """Fourier multiplier of ``d^order / dx_axis^order``.

    The Nyquist mode is zeroed for odd orders so that derivatives of real
    fields stay real.
    """
    if axis not in (1, 2):
        raise ValueError(f"axis must be 1 or 2, got {axis!r}")
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= 6:
        raise ValueError(f"derivative order must be an integer in 1..6, got {order!r}")
    k1, k2 = wavenumbers(n1, n2)
    k = k1 if axis == 1 else k2
    sym = np.broadcast_to((1j * k) ** order, (n1, n2)).copy()
    if order % 2:
        if axis == 1:
            sym[n1 // 2, :] = 0.0
        else:
            sym[:, n2 // 2] = 0.0
    return sym


def laplacian_symbol(n1: int, n2: int, power: int = 1) -> np.ndarray:
    k1, k2 = wavenumbers(n1, n2)
    return (-(k1 ** 2 + k2 ** 2)) ** power


def apply_symbol(values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    """Multiply the horizontal spectrum of ``values`` by ``symbol``."""
    spec = np.fft.fft2(values, axes=(-2, -1))
    return np.fft.ifft2(spec * symbol, axes=(-2, -1)).real


def spectral_derivative(values: np.ndarray, axis: int, order: int = 1) -> np.ndarray:
    n1, n2 = values.shape[-2:]
    return apply_symbol(values, derivative_symbol(n1, n2, axis, order))


def spectral_laplacian(values: np.ndarray, power: int = 1) -> np.ndarray:
    n1, n2 = values.shape[-2:]
    return apply_symbol(values, laplacian_symbol(n1, n2, power))


def grid_points(n1: int, n2: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodal coordinates ``(y1, y2)`` with ``indexing='ij'``."""
    return np.meshgrid(np.arange(n1) / n1, np.arange(n2) / n2, indexing="ij")


# --------------------------------------------------------------------------
# PeriodicField2D
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PeriodicField2D:
    """Real scalar field on the periodic unit square.

    ``values[i, j]`` is the value at ``(i/n1, j/n2)``.  ``coeffs`` is the
    unnormalised forward FFT, so ``coeffs[0, 0] / (n1 n2)`` is the mean.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 2:
            raise ValueError(f"expected a 2D array, got shape {vals.shape}")
        if np.iscomplexobj(vals):
            raise TypeError("PeriodicField2D holds real values only")
        _check_even(*vals.shape)
        vals = np.array(vals, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, fn, n1: int, n2: int | None = None) -> "PeriodicField2D":
        n2 = n1 if n2 is None else n2
        y1, y2 = grid_points(n1, n2)
        return cls(np.broadcast_to(fn(y1, y2), (n1, n2)))

    @classmethod
    def from_coeffs(cls, coeffs: np.ndarray) -> "PeriodicField2D":
        vals = np.fft.ifft2(coeffs)
        return cls(vals.real)

    @classmethod
    def zeros(cls, n1: int, n2: int | None = None) -> "PeriodicField2D":
        return cls(np.zeros((n1, n1 if n2 is None else n2)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n1(self) -> int:
        return self.values.shape[0]

    @property
    def n2(self) -> int:
        return self.values.shape[1]

    @functools.cached_property
    def coeffs(self) -> np.ndarray:
        c = np.fft.fft2(self.values)
        c.setflags(write=False)
        return c

    def mean(self) -> float:
        return float(self.coeffs[0, 0].real / (self.n1 * self.n2))

    def norm(self) -> float:
        """L2(omega) norm; exact for band-limited fields."""
        return float(np.sqrt(np.mean(self.values ** 2)))

    def spectral_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)) / (self.n1 * self.n2))

    def derivative(self, axis: int, order: int = 1) -> "PeriodicField2D":
        return horizontal_derivative(self, axis, order)

    def laplacian(self, power: int = 1) -> "PeriodicField2D":
        return PeriodicField2D(spectral_laplacian(self.values, power))

    def __add__(self, other):
        if isinstance(other, PeriodicField2D):
            _same_grid(self, other)
            return PeriodicField2D(self.values + other.values)
        return PeriodicField2D(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, PeriodicField2D):
            _same_grid(self, other)
            return PeriodicField2D(self.values - other.values)
        return PeriodicField2D(self.values - other)

    def __neg__(self):
        return PeriodicField2D(-self.values)

    def __mul__(self, scalar):
        if isinstance(scalar, PeriodicField2D):
            _same_grid(self, scalar)
            return PeriodicField2D(self.values * scalar.values)
        return PeriodicField2D(self.values * float(scalar))

    __rmul__ = __mul__

    def allclose(self, other: "PeriodicField2D", atol: float = 1e-12) -> bool:
        return self.shape == other.shape and np.allclose(self.values, other.values, rtol=0, atol=atol)


def _same_grid(a: PeriodicField2D, b: PeriodicField2D) -> None:
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch: {a.shape} vs {b.shape}")


def horizontal_derivative(f: PeriodicField2D, axis: int, order: int = 1) -> PeriodicField2D:
    """Exact spectral derivative ``d^order f / dy_axis^order``."""
    sym = derivative_symbol(f.n1, f.n2, axis, order)
    return PeriodicField2D(np.fft.ifft2(f.coeffs * sym).real)


# --------------------------------------------------------------------------
# vertical LGL grid
# --------------------------------------------------------------------------

def lgl_nodes(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Legendre-Gauss-Lobatto nodes and weights on [-1, 1] (m+1 points)."""
    if m < 1:
        raise ValueError("need at least one vertical interval")
    interior = L.Legendre.basis(m).deriv().roots() if m > 1 else np.array([])
    x = np.concatenate(([-1.0], np.sort(interior.real), [1.0]))
    pm = L.legval(x, [0] * m + [1])
    w = 2.0 / (m * (m + 1) * pm ** 2)
    return x, w


@functools.lru_cache(maxsize=128)
def vertical_grid(m: int, a: float, b: float) -> "VerticalGrid":
    return VerticalGrid(m, float(a), float(b))


class VerticalGrid:
    """Degree-``m`` polynomial representation on LGL nodes of ``[a, b]``."""

    def __init__(self, m: int, a: float, b: float):
        if not b > a:
            raise ValueError(f"empty interval [{a}, {b}]")
        self.m, self.a, self.b = int(m), float(a), float(b)
        xi, w = lgl_nodes(self.m)
        self.xi = xi
        self.nodes = self._to_z(xi)
        self.lgl_weights = w * self.jacobian
        V = L.legvander(xi, self.m)
        self._vinv = np.linalg.inv(V)
        dleg = np.zeros((self.m + 1, self.m + 1))
        for j in range(self.m + 1):
            e = np.zeros(self.m + 1)
            e[j] = 1.0
            d = L.legder(e)
            dleg[: d.size, j] = d
        self.diff_matrix = (V @ dleg @ self._vinv) / self.jacobian
        gx, gw = L.leggauss(self.m + 2)
        self._gauss_eval = self.interp_matrix(self._to_z(gx))
        self._gauss_w = gw * self.jacobian

    @property
    def jacobian(self) -> float:
        return 0.5 * (self.b - self.a)

    @property
    def size(self) -> int:
        return self.m + 1

    def _to_z(self, xi):
        return self.a + (np.asarray(xi) + 1.0) * self.jacobian

    def _to_xi(self, z):
        return (np.asarray(z, dtype=float) - self.a) / self.jacobian - 1.0

    def interp_matrix(self, z: Sequence[float] | np.ndarray) -> np.ndarray:
        """Matrix mapping nodal values to values of the interpolant at ``z``."""
        return L.legvander(self._to_xi(np.atleast_1d(z)), self.m) @ self._vinv

    def legendre_coeffs(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        return _apply_along(self._vinv, values, axis)

    def derivative(self, values: np.ndarray, axis: int = 0, order: int = 1) -> np.ndarray:
        out = values
        for _ in range(order):
            out = _apply_along(self.diff_matrix, out, axis)
        return out

    def evaluate(self, values: np.ndarray, z, axis: int = 0) -> np.ndarray:
        return _apply_along(self.interp_matrix(z), values, axis)

    @functools.lru_cache(maxsize=32)
    def cumulative_matrix(self, weight: tuple[float, ...] = (1.0,), start: str = "lower") -> np.ndarray:
        """``Q[i, j] = int_{start}^{z_i} w(z) l_j(z) dz`` with ``l_j`` the nodal basis.

        ``weight`` holds power-basis coefficients of ``w`` in the physical
        coordinate ``z``; Gauss-Legendre quadrature of sufficient order makes
        the matrix exact.
        """
        if start not in ("lower", "upper"):
            raise ValueError(f"start must be 'lower' or 'upper', got {start!r}")
        wpoly = np.polynomial.Polynomial(weight)
        nq = (self.m + len(weight)) // 2 + 2
        gx, gw = L.leggauss(nq)
        z0 = self.a if start == "lower" else self.b
        Q = np.zeros((self.size, self.size))
        for i, zi in enumerate(self.nodes):
            half = 0.5 * (zi - z0)
            if half == 0.0:
                continue
            zq = z0 + (gx + 1.0) * half
            Q[i] = (gw * half * wpoly(zq)) @ self.interp_matrix(zq)
        return Q

    def integrate(self, values: np.ndarray, axis: int = 0, weight: tuple[float, ...] = (1.0,)) -> np.ndarray:
        """Exact ``int_a^b w(z) f(z) dz`` of the interpolant (vertical axis removed)."""
        row = self.cumulative_matrix(tuple(weight), "lower")[-1]
        return np.tensordot(row, values, axes=([0], [axis]))

    def cumulative(self, values: np.ndarray, axis: int = 0, weight: tuple[float, ...] = (1.0,),
                   start: str = "lower") -> np.ndarray:
        return _apply_along(self.cumulative_matrix(tuple(weight), start), values, axis)

    def sq_integral(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        """Exact ``int_a^b f(z)^2 dz`` of the interpolant."""
        at_gauss = _apply_along(self._gauss_eval, values, axis)
        return np.tensordot(self._gauss_w, at_gauss ** 2, axes=([0], [axis]))

    def inner(self, f: np.ndarray, g: np.ndarray, axis: int = 0) -> np.ndarray:
        fg = _apply_along(self._gauss_eval, f, axis) * _apply_along(self._gauss_eval, g, axis)
        return np.tensordot(self._gauss_w, fg, axes=([0], [axis]))

    def __repr__(self):
        return f"VerticalGrid(m={self.m}, a={self.a!r}, b={self.b!r})"


def _apply_along(mat: np.ndarray, values: np.ndarray, axis: int) -> np.ndarray:
    out = np.tensordot(mat, values, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis)


# --------------------------------------------------------------------------
# SlabField3D
# --------------------------------------------------------------------------

DOMAINS = ("fluid", "structure")


@dataclass(frozen=True, eq=False)
class SlabField3D:
    """Scalar or vector field on a slab ``(0,1)^2 x [a, b]``.

    ``values`` has shape ``(ncomp, m+1, n1, n2)``; axis 1 runs over the LGL
    nodes of ``grid`` from bottom to top.  ``domain`` records whether the
    slab lies below (``"fluid"``) or above (``"structure"``) the interface.
    """

    values: np.ndarray
    grid: VerticalGrid
    domain: str = "fluid"

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim == 3:
            vals = vals[None]
        if vals.ndim != 4:
            raise ValueError(f"expected (ncomp, m+1, n1, n2), got shape {vals.shape}")
        if vals.shape[1] != self.grid.size:
            raise ValueError(f"{vals.shape[1]} vertical values for a grid of {self.grid.size} nodes")
        if vals.shape[0] not in (1, 2, 3):
            raise ValueError(f"component count must be 1, 2 or 3, got {vals.shape[0]}")
        if self.domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}, got {self.domain!r}")
        _check_even(*vals.shape[2:])
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, fn, grid: VerticalGrid, n1: int, n2: int | None = None,
                      domain: str = "fluid", ncomp: int | None = None) -> "SlabField3D":
        """Sample ``fn(y1, y2, z)``; it may return a scalar array or a list of components."""
        n2 = n1 if n2 is None else n2
        y1, y2 = grid_points(n1, n2)
        z = grid.nodes[:, None, None]
        out = fn(y1[None], y2[None], z)
        if isinstance(out, (list, tuple)):
            arr = np.stack([np.broadcast_to(c, (grid.size, n1, n2)) for c in out])
        else:
            arr = np.broadcast_to(out, (grid.size, n1, n2))[None]
        if ncomp is not None and arr.shape[0] != ncomp:
            raise ValueError(f"function returned {arr.shape[0]} components, expected {ncomp}")
        return cls(arr, grid, domain)

    @classmethod
    def zeros(cls, grid: VerticalGrid, n1: int, n2: int | None = None, ncomp: int = 1,
              domain: str = "fluid") -> "SlabField3D":
        n2 = n1 if n2 is None else n2
        return cls(np.zeros((ncomp, grid.size, n1, n2)), grid, domain)

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def n1(self) -> int:
        return self.values.shape[2]

    @property
    def n2(self) -> int:
        return self.values.shape[3]

    def with_values(self, values: np.ndarray) -> "SlabField3D":
        return SlabField3D(values, self.grid, self.domain)

    def component(self, i: int) -> "SlabField3D":
        return self.with_values(self.values[i: i + 1])

    def trace(self, where: str = "top") -> np.ndarray:
        """Values on the bottom or top face, shape ``(ncomp, n1, n2)``."""
        if where not in ("top", "bottom"):
            raise ValueError(f"where must be 'top' or 'bottom', got {where!r}")
        return self.values[:, -1 if where == "top" else 0]

    def horizontal_derivative(self, axis: int, order: int = 1) -> "SlabField3D":
        return self.with_values(spectral_derivative(self.values, axis, order))

    def vertical_derivative(self, order: int = 1) -> "SlabField3D":
        return self.with_values(self.grid.derivative(self.values, axis=1, order=order))

    def evaluate(self, z) -> np.ndarray:
        """Interpolant at vertical positions ``z``: shape ``(ncomp, len(z), n1, n2)``."""
        return self.grid.evaluate(self.values, z, axis=1)

    def sq_norm_components(self) -> np.ndarray:
        """Exact squared L2 norm of each component."""
        return np.mean(self.grid.sq_integral(self.values, axis=1), axis=(-2, -1))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.sq_norm_components())))

    def __add__(self, other: "SlabField3D") -> "SlabField3D":
        _same_slab(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "SlabField3D") -> "SlabField3D":
        _same_slab(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar) -> "SlabField3D":
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "SlabField3D":
        return self.with_values(-self.values)


def _same_slab(a: SlabField3D, b: SlabField3D) -> None:
    if a.values.shape != b.values.shape or a.grid is not b.grid and (
            a.grid.m, a.grid.a, a.grid.b) != (b.grid.m, b.grid.a, b.grid.b):
        raise ValueError("slab fields live on different grids")
    if a.domain != b.domain:
        raise ValueError(f"slab orientation mismatch: {a.domain} vs {b.domain}")


def vertical_integral(f: SlabField3D, start: str = "lower", to: str = "endpoint",
                      weight: Iterable[float] = (1.0,), domain: str | None = None):
    """Weighted vertical integral ``int_{start}^{z} w(zeta) f(zeta) d zeta``.

    ``to="node"`` returns the cumulative integral at every node as a
    :class:`SlabField3D`; ``to="endpoint"`` integrates over the whole slab and
    returns a :class:`PeriodicField2D` (scalar input) or a tuple of them.
    ``weight`` is a polynomial in the vertical coordinate of degree <= 2,
    given by power-basis coefficients.
    """
    weight = tuple(float(c) for c in weight)
    if len(weight) > 3:
        raise ValueError("weight polynomial must have degree <= 2")
    if domain is not None and domain != f.domain:
        raise ValueError(f"slab orientation mismatch: field is {f.domain}, requested {domain}")
    if to == "node":
        return f.with_values(f.grid.cumulative(f.values, axis=1, weight=weight, start=start))
    if to != "endpoint":
        raise ValueError(f"to must be 'node' or 'endpoint', got {to!r}")
    total = f.grid.integrate(f.values, axis=1, weight=weight)
    if start == "upper":
        total = -total
    elif start != "lower":
        raise ValueError(f"start must be 'lower' or 'upper', got {start!r}")
    fields = tuple(PeriodicField2D(c) for c in total)
    return fields[0] if f.ncomp == 1 else fields


# --------------------------------------------------------------------------
# CSV serialisation
# --------------------------------------------------------------------------

def _header(n1, n2, m, domain, ncomp, extra=""):
    line = f"# {n1} {n2} {m} {domain} {ncomp}"
    return line + (f" {extra}" if extra else "")


def write_field_csv(path: str | Path, field, extra: str = "") -> Path:
    """Write a field as row-major nodal values.

    The first line is ``# n1 n2 m domain component``; the body holds
    ``ncomp * (m+1) * n1`` rows of ``n2`` comma-separated values, ordered by
    component, then vertical node (bottom to top), then x1 index.
    """
    path = Path(path)
    if isinstance(field, PeriodicField2D):
        header = _header(field.n1, field.n2, 0, "omega", 1, extra)
        body = field.values
    elif isinstance(field, SlabField3D):
        g = field.grid
        header = _header(field.n1, field.n2, field.m, field.domain, field.ncomp,
                         (f"{g.a!r} {g.b!r} " + extra).strip())
        body = field.values.reshape(-1, field.n2)
    else:
        raise TypeError(f"cannot serialise {type(field).__name__}")
    with open(path, "w") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, body, delimiter=",", fmt="%.17g")
    return path


def read_field_csv(path: str | Path):
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().lstrip("#").split()
    n1, n2, m = (int(x) for x in header[:3])
    domain, ncomp = header[3], int(header[4])
    body = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if domain == "omega":
        return PeriodicField2D(body.reshape(n1, n2))
    a, b = float(header[5]), float(header[6])
    return SlabField3D(body.reshape(ncomp, m + 1, n1, n2), vertical_grid(m, a, b), domain)
