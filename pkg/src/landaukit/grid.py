"""Periodic velocity grid, field containers, spectral transforms and quadrature.

The velocity box is ``[-L, L)^dim`` sampled with ``n`` points per axis.  All
transforms use the real-input layout of :func:`scipy.fft.rfftn`, with the last
axis halved.  Wavenumbers are angular, ``xi_k = pi * k / L``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

__all__ = [
    "VelocityGrid",
    "ScalarField",
    "SpectralField",
    "TensorField",
    "forward",
    "inverse",
    "weight_field",
    "integrate",
    "inner",
    "l2_norm",
    "gradient",
    "divergence",
    "laplacian",
    "apply_multiplier",
    "save_field",
    "load_field",
    "set_threads",
    "set_deterministic",
    "fft_workers",
    "FieldFormatError",
]

_MAGIC = b"LDNF"
_HEADER = struct.Struct("<4sIId12x")  # magic, dim, n, L, padding -> 32 bytes

_workers = 1
_deterministic = False


def set_threads(threads: int) -> None:
    """Set the number of FFT worker threads (ignored in deterministic mode)."""
    global _workers
    if threads < 1:
        raise ValueError("threads must be >= 1")
    _workers = int(threads)


def set_deterministic(flag: bool = True) -> None:
    """Force single-threaded transforms so repeated runs are bit-identical."""
    global _deterministic
    _deterministic = bool(flag)


def fft_workers() -> int:
    return 1 if _deterministic else _workers


def _fft_friendly(n: int) -> bool:
    """Even and free of prime factors above 3 (powers of two, 24, 48, 96, ...)."""
    if n % 2:
        return False
    for p in (2, 3):
        while n % p == 0:
            n //= p
    return n == 1


class FieldFormatError(ValueError):
    """Raised for malformed ``.ldnf`` files or mismatched field shapes."""


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform periodic grid on ``[-L, L)^dim``.

    Parameters
    ----------
    dim : int
        Velocity dimension, 1 or 3.
    n : int
        Points per axis: even, at least 8, with no prime factor above 3.
    L : float
        Half width of the box.
    """

    dim: int = 3
    n: int = 32
    L: float = 8.0

    def __post_init__(self):
        if self.dim not in (1, 3):
            raise ValueError(f"dim must be 1 or 3, got {self.dim}")
        n = int(self.n)
        if n < 8 or not _fft_friendly(n):
            raise ValueError(f"n must be an even 2^a 3^b >= 8, got {self.n}")
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "L", float(self.L))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.dim - 1) + (self.n // 2 + 1,)

    @cached_property
    def nodes(self) -> np.ndarray:
        """1D array of node coordinates ``-L + h k``."""
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def v(self) -> tuple[np.ndarray, ...]:
        """Sparse (broadcastable) coordinate arrays, one per axis."""
        return tuple(np.meshgrid(*([self.nodes] * self.dim), indexing="ij", sparse=True))

    @cached_property
    def speed2(self) -> np.ndarray:
        """|v|^2 on the full grid."""
        return sum(c**2 for c in self.v) * np.ones(self.shape)

    @cached_property
    def xi(self) -> tuple[np.ndarray, ...]:
        """Sparse angular wavenumbers in the real-transform layout."""
        full = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        half = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.h)
        axes = [full] * (self.dim - 1) + [half]
        return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))

    @cached_property
    def xi2(self) -> np.ndarray:
        return sum(k**2 for k in self.xi) * np.ones(self.spectral_shape)

    @cached_property
    def nyquist_free(self) -> np.ndarray:
        """Boolean mask that is False on every Nyquist plane.

        Odd-order multipliers are only consistent with real fields once the
        unpaired Nyquist modes are removed.
        """
        mask = np.ones(self.spectral_shape, dtype=bool)
        for axis in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[axis] = self.n // 2
            mask[tuple(idx)] = False
        return mask

    @cached_property
    def rfft_weights(self) -> np.ndarray:
        """Multiplicity of each stored mode in the full spectrum."""
        w = np.full(self.spectral_shape, 2.0)
        idx = [slice(None)] * self.dim
        idx[-1] = 0
        w[tuple(idx)] = 1.0
        idx[-1] = self.n // 2
        w[tuple(idx)] = 1.0
        return w

    @property
    def xi_max(self) -> float:
        """Largest |xi| present on the grid (box corner)."""
        return np.sqrt(self.dim) * np.pi / self.h

    @property
    def v_max(self) -> float:
        """Largest |v| present on the grid (box corner)."""
        return np.sqrt(self.dim) * self.L

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))

    def field(self, values, **kwargs) -> "ScalarField":
        return ScalarField(self, np.asarray(values, dtype=float).reshape(self.shape), **kwargs)

    def refined(self, factor: int = 2) -> "VelocityGrid":
        return VelocityGrid(self.dim, self.n * factor, self.L)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real field sampled on a :class:`VelocityGrid`.

    ``nonnegative=True`` marks a distribution function; construction then
    rejects values below ``-tol_neg`` (default ``1e-12 * max``).
    """

    grid: VelocityGrid
    values: np.ndarray
    nonnegative: bool = False
    tol_neg: float | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.size != self.grid.size:
            raise FieldFormatError(
                f"field has {values.size} values, grid expects {self.grid.size}"
            )
        values = values.reshape(self.grid.shape)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.nonnegative:
            tol = self.tol_neg
            if tol is None:
                tol = 1e-12 * max(float(np.max(np.abs(values))), 0.0)
            if values.min() < -tol:
                raise ValueError(
                    f"nonnegative field has min {values.min():.3e} < -{tol:.3e}"
                )

    def __add__(self, other):
        return ScalarField(self.grid, self.values + _vals(other, self.grid))

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - _vals(other, self.grid))

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * _vals(other, self.grid))

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def copy_values(self) -> np.ndarray:
        return np.array(self.values)


def _vals(other, grid):
    if isinstance(other, ScalarField):
        if other.grid != grid:
            raise FieldFormatError("grid mismatch")
        return other.values
    return other


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: VelocityGrid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != self.grid.spectral_shape:
            raise FieldFormatError(
                f"coefficients have shape {self.coeffs.shape}, expected "
                f"{self.grid.spectral_shape}"
            )

    def energy(self) -> float:
        """``h^dim * sum |f|^2`` evaluated on the Fourier side."""
        g = self.grid
        s = np.sum(g.rfft_weights * np.abs(self.coeffs) ** 2)
        return float(s * g.cell_volume / g.size)


_TENSOR_INDEX = {(0, 0): 0, (0, 1): 1, (0, 2): 2, (1, 1): 3, (1, 2): 4, (2, 2): 5}


@dataclass(frozen=True, eq=False)
class TensorField:
    """Symmetric matrix field storing the upper triangle only.

    ``components`` has shape ``(6, n, n, n)`` in 3D, ordered
    ``(00, 01, 02, 11, 12, 22)``, and ``(1, n)`` in 1D.
    """

    grid: VelocityGrid
    components: np.ndarray

    def __getitem__(self, ij: tuple[int, int]) -> np.ndarray:
        i, j = sorted(ij)
        if self.grid.dim == 1:
            return self.components[0]
        return self.components[_TENSOR_INDEX[(i, j)]]

    def matrix(self) -> np.ndarray:
        """Dense ``(..., 3, 3)`` view, for eigenvalue scans."""
        d = self.grid.dim
        out = np.empty(self.grid.shape + (d, d))
        for i in range(d):
            for j in range(d):
                out[..., i, j] = self[i, j]
        return out

    def contract(self, x: np.ndarray, y: np.ndarray | None = None) -> np.ndarray:
        """Pointwise ``sum_ij T_ij x_i y_j`` for vector fields ``x``, ``y``."""
        y = x if y is None else y
        d = self.grid.dim
        return sum(self[i, j] * x[i] * y[j] for i in range(d) for j in range(d))

    @staticmethod
    def index(i: int, j: int) -> int:
        return _TENSOR_INDEX[tuple(sorted((i, j)))]


def _rfftn(x):
    return sfft.rfftn(x, workers=fft_workers())


def _irfftn(c, shape):
    return sfft.irfftn(c, s=shape, workers=fft_workers())


def forward(f: ScalarField) -> SpectralField:
    if f.values.shape != f.grid.shape:
        raise FieldFormatError("size mismatch")
    return SpectralField(f.grid, _rfftn(f.values))


def inverse(F: SpectralField) -> ScalarField:
    return ScalarField(F.grid, _irfftn(F.coeffs, F.grid.shape))


def apply_multiplier(grid: VelocityGrid, values: np.ndarray, symbol) -> np.ndarray:
    """Return ``F^{-1}[symbol * F[values]]`` as a real array."""
    return _irfftn(symbol * _rfftn(values), grid.shape)


def gradient(grid: VelocityGrid, values: np.ndarray) -> np.ndarray:
    """Spectral gradient, shape ``(dim,) + grid.shape``."""
    fh = _rfftn(values) * grid.nyquist_free
    return np.stack([_irfftn(1j * k * fh, grid.shape) for k in grid.xi])


def divergence(grid: VelocityGrid, vec: np.ndarray) -> np.ndarray:
    acc = np.zeros(grid.spectral_shape, dtype=complex)
    for k, comp in zip(grid.xi, vec):
        acc += 1j * k * _rfftn(comp)
    return _irfftn(acc * grid.nyquist_free, grid.shape)


def laplacian(grid: VelocityGrid, values: np.ndarray) -> np.ndarray:
    return _irfftn(-grid.xi2 * _rfftn(values), grid.shape)


def weight_field(grid: VelocityGrid, l: float) -> ScalarField:
    """Japanese bracket weight ``(1 + |v|^2)^{l/2}``."""
    return ScalarField(grid, (1.0 + grid.speed2) ** (0.5 * l))


def integrate(f) -> float:
    """Midpoint (equivalently trapezoidal, on the torus) rule ``h^dim * sum f``."""
    if isinstance(f, ScalarField):
        return float(np.sum(f.values) * f.grid.cell_volume)
    raise TypeError("integrate expects a ScalarField")


def inner(f: ScalarField, g: ScalarField) -> float:
    if f.grid != g.grid:
        raise FieldFormatError("grid mismatch")
    return float(np.sum(f.values * g.values) * f.grid.cell_volume)


def l2_norm(f: ScalarField) -> float:
    return float(np.sqrt(np.sum(f.values**2) * f.grid.cell_volume))


def save_field(path, f: ScalarField) -> Path:
    """Write ``f`` as a 32-byte header followed by little-endian float64 values."""
    path = Path(path)
    g = f.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, g.dim, g.n, g.L))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    return path


def load_field(path) -> ScalarField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FieldFormatError(f"{path}: file shorter than header")
    magic, dim, n, L = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise FieldFormatError(f"{path}: bad magic {magic!r}")
    grid = VelocityGrid(dim, n, L)
    body = data[_HEADER.size:]
    if len(body) != 8 * grid.size:
        raise FieldFormatError(
            f"{path}: expected {8 * grid.size} payload bytes, found {len(body)}"
        )
    values = np.frombuffer(body, dtype="<f8").astype(float).reshape(grid.shape)
    return ScalarField(grid, values)
