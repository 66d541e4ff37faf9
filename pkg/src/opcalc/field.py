"""Periodic 1-D grids, real fields and Fourier-diagonal covariance operators.

The Fourier convention is unitary: the values handed to a
:class:`FourierCovariance` are the eigenvalues of the covariance matrix acting
on the vector of pixel values, with no extra volume factors. Scalar products
between fields, on the other hand, carry the pixel volume so that they
approximate integrals over the domain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DENSE_PIXELS = 4096


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    n_pixels: int
    length: float = 1.0

    def __post_init__(self):
        if int(self.n_pixels) != self.n_pixels or self.n_pixels < 2 or self.n_pixels % 2:
            raise ValueError(f"n_pixels must be an even integer >= 2, got {self.n_pixels}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")

    @property
    def pixel_volume(self) -> float:
        return self.length / self.n_pixels

    @property
    def coordinates(self) -> np.ndarray:
        return np.arange(self.n_pixels) * self.pixel_volume

    @property
    def harmonic_modes(self) -> np.ndarray:
        """Mode numbers of the real FFT, in units of the fundamental mode."""
        return np.arange(self.n_pixels // 2 + 1, dtype=float)


class Field:
    """Immutable real-valued field on a :class:`Grid1D`."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid1D, values):
        arr = np.array(values, dtype=float)
        if arr.shape != (grid.n_pixels,):
            raise ValueError(f"expected {grid.n_pixels} values, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    @classmethod
    def zeros(cls, grid: Grid1D) -> Field:
        return cls(grid, np.zeros(grid.n_pixels))

    @classmethod
    def full(cls, grid: Grid1D, value: float) -> Field:
        return cls(grid, np.full(grid.n_pixels, float(value)))

    def _check(self, other: Field):
        if self.grid != other.grid:
            raise GridMismatchError(f"{self.grid} != {other.grid}")

    def _binary(self, other, op):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, op(self.values, other.values))
        return Field(self.grid, op(self.values, float(other)))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return Field(self.grid, float(other) - self.values)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def exp(self) -> Field:
        return Field(self.grid, np.exp(self.values))

    def __eq__(self, other):
        return (
            isinstance(other, Field)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.grid, self.values.tobytes()))

    def __len__(self):
        return self.grid.n_pixels

    def __repr__(self):
        return f"Field({self.grid}, {np.array2string(self.values, threshold=6)})"


def inner(a: Field, b: Field) -> float:
    """Riemann-sum scalar product, ``sum(a * b) * pixel_volume``."""
    a._check(b)
    return float(np.dot(a.values, b.values) * a.grid.pixel_volume)


@dataclass(frozen=True)
class PowerSpectrum:
    """``P(k) = p0 * (1 + (k / k0)**2) ** (-gamma / 2)`` with k in fundamental-mode units."""

    p0: float = 4.0
    k0: float = 4.0
    gamma: float = 4.0

    def __post_init__(self):
        if not self.p0 > 0:
            raise ValueError("p0 must be positive")
        if not self.k0 > 0:
            raise ValueError("k0 must be positive")
        if not self.gamma >= 0:
            raise ValueError("gamma must be non-negative")

    def __call__(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return self.p0 * (1.0 + (k / self.k0) ** 2) ** (-self.gamma / 2.0)


class FourierCovariance:
    """Covariance operator diagonal in the harmonic basis of a periodic grid.

    Parameters
    ----------
    grid : Grid1D
    spectrum : PowerSpectrum or array_like
        Either a parametric spectrum or the explicit eigenvalue for each real-FFT
        mode (``n_pixels // 2 + 1`` entries). Explicit eigenvalues may be zero,
        which is allowed for sampling but not for inversion.
    """

    def __init__(self, grid: Grid1D, spectrum):
        self.grid = grid
        if isinstance(spectrum, PowerSpectrum):
            self.spectrum = spectrum
            eig = spectrum(grid.harmonic_modes)
        else:
            self.spectrum = None
            eig = np.array(spectrum, dtype=float)
            if eig.shape != grid.harmonic_modes.shape:
                raise ValueError(
                    f"need {grid.harmonic_modes.size} mode eigenvalues, got {eig.shape}"
                )
        if not np.all(np.isfinite(eig)) or np.any(eig < 0):
            raise ValueError("covariance eigenvalues must be finite and non-negative")
        eig.setflags(write=False)
        self.eigenvalues = eig

    @property
    def is_positive_definite(self) -> bool:
        return bool(np.all(self.eigenvalues > 0))

    def _apply_values(self, values: np.ndarray, eig: np.ndarray) -> np.ndarray:
        n = self.grid.n_pixels
        return np.fft.irfft(np.fft.rfft(values, axis=0) * eig.reshape((-1,) + (1,) * (values.ndim - 1)), n=n, axis=0)

    def apply(self, f: Field) -> Field:
        if f.grid != self.grid:
            raise GridMismatchError(f"{f.grid} != {self.grid}")
        return Field(self.grid, self._apply_values(f.values, self.eigenvalues))

    def apply_inverse(self, f: Field) -> Field:
        if f.grid != self.grid:
            raise GridMismatchError(f"{f.grid} != {self.grid}")
        return Field(self.grid, self.inverse_values(f.values))

    def inverse_values(self, values: np.ndarray) -> np.ndarray:
        if not self.is_positive_definite:
            raise np.linalg.LinAlgError("covariance is singular")
        return self._apply_values(np.asarray(values, dtype=float), 1.0 / self.eigenvalues)

    def sqrt_values(self, values: np.ndarray) -> np.ndarray:
        return self._apply_values(np.asarray(values, dtype=float), np.sqrt(self.eigenvalues))

    def dense(self) -> np.ndarray:
        n = self.grid.n_pixels
        if n > MAX_DENSE_PIXELS:
            raise ValueError(f"dense realization capped at {MAX_DENSE_PIXELS} pixels, got {n}")
        m = self._apply_values(np.eye(n), self.eigenvalues)
        return 0.5 * (m + m.T)

    def dense_inverse(self) -> np.ndarray:
        n = self.grid.n_pixels
        if n > MAX_DENSE_PIXELS:
            raise ValueError(f"dense realization capped at {MAX_DENSE_PIXELS} pixels, got {n}")
        m = self.inverse_values(np.eye(n))
        return 0.5 * (m + m.T)

    def full_eigenvalues(self) -> np.ndarray:
        """Eigenvalue for every one of the ``n_pixels`` complex Fourier modes."""
        n = self.grid.n_pixels
        k = np.abs(np.fft.fftfreq(n, d=1.0 / n)).astype(int)
        return self.eigenvalues[k]


def apply_covariance(cov: FourierCovariance, f: Field) -> Field:
    return cov.apply(f)


def dense_covariance(cov: FourierCovariance) -> np.ndarray:
    return cov.dense()


def sample_gaussian_field(cov: FourierCovariance, seed) -> Field:
    """Draw one realization of ``G(a, cov)``; the same seed gives the same field."""
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(cov.grid.n_pixels)
    return Field(cov.grid, cov.sqrt_values(white))
