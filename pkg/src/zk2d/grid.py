"""Periodic 2D grid, Fourier transform pair, and spectral calculus.

The computational domain is x in lx*[-pi, pi), y in ly*[-pi, pi), sampled on
an nx-by-ny grid with x varying along rows.  A real field f is represented
either by its samples (:class:`Field`) or by its Fourier-series coefficients
(:class:`SpectralField`) with respect to exp(i*(kx*x + ky*y)), where the
wavenumber of integer mode j is k = j/l.  Coefficients are stored in FFT
layout: index 0 is mode 0, index j is mode j for j < n/2, index n/2 is the
Nyquist mode +n/2, and index n-j is mode -j.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from zk2d.errors import ContractViolationError

# pocketfft thread pool; elementwise work stays single-threaded
_WORKERS = -1


def _fft2(a):
    return scipy.fft.fft2(a, workers=_WORKERS)


def _ifft2(a):
    return scipy.fft.ifft2(a, workers=_WORKERS)


@dataclass(frozen=True)
class GridSpec:
    """Geometry and mode counts of a periodic 2D grid.

    nx, ny are the numbers of Fourier modes (even, at least 4); lx, ly are
    the half-period scale factors, so the domain is lx*[-pi, pi) by
    ly*[-pi, pi) and the cell sizes are dx = 2*pi*lx/nx, dy = 2*pi*ly/ny.
    """

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        for n, name in ((self.nx, "nx"), (self.ny, "ny")):
            if n < 4 or n % 2 != 0:
                raise ContractViolationError(f"{name} must be even and >= 4, got {n}")
        if not (self.lx > 0 and self.ly > 0):
            raise ContractViolationError("lx and ly must be positive")

    @property
    def dx(self) -> float:
        return 2.0 * np.pi * self.lx / self.nx

    @property
    def dy(self) -> float:
        return 2.0 * np.pi * self.ly / self.ny

    @property
    def area(self) -> float:
        return (2.0 * np.pi * self.lx) * (2.0 * np.pi * self.ly)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def x_nodes(self) -> np.ndarray:
        """Sample abscissae lx*(-pi + 2*pi*j/nx), j = 0..nx-1."""
        return self.lx * (-np.pi + 2.0 * np.pi * np.arange(self.nx) / self.nx)

    def y_nodes(self) -> np.ndarray:
        return self.ly * (-np.pi + 2.0 * np.pi * np.arange(self.ny) / self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """2D coordinate arrays (X, Y) with x varying along rows."""
        return np.meshgrid(self.x_nodes(), self.y_nodes(), indexing="ij")

    def kx_modes(self) -> np.ndarray:
        """Integer mode numbers along x in FFT layout, Nyquist = +nx/2."""
        return _mode_numbers(self.nx)

    def ky_modes(self) -> np.ndarray:
        return _mode_numbers(self.ny)

    def kx(self) -> np.ndarray:
        """Wavenumbers j/lx in FFT layout."""
        return self.kx_modes() / self.lx

    def ky(self) -> np.ndarray:
        return self.ky_modes() / self.ly

    def wavenumber_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.kx(), self.ky(), indexing="ij")

    def refined(self, factor: int) -> "GridSpec":
        return GridSpec(self.nx * factor, self.ny * factor, self.lx, self.ly)


def _mode_numbers(n: int) -> np.ndarray:
    j = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    j[n // 2] = n // 2
    return j


@dataclass
class Field:
    """Real-space samples of one scalar state on a grid."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ContractViolationError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


@dataclass
class SpectralField:
    """Fourier-series coefficients of one scalar state, FFT mode layout."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != self.grid.shape:
            raise ContractViolationError(
                f"coeffs shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())


def forward(f: Field) -> SpectralField:
    """Fourier-series coefficients of a real field.

    Normalized so the mode-0 coefficient equals the mean of f.
    """
    raw = np.fft.ifftshift(f.values)
    coeffs = _fft2(raw) / (f.grid.nx * f.grid.ny)
    return SpectralField(f.grid, coeffs)


def inverse(F: SpectralField) -> Field:
    """Real samples of a spectral field (conjugate symmetry assumed)."""
    raw = _ifft2(F.coeffs * (F.grid.nx * F.grid.ny))
    return Field(F.grid, np.fft.fftshift(raw.real))


def derivative(F: SpectralField, mx: int, my: int) -> SpectralField:
    """Spectral derivative d^mx/dx^mx d^my/dy^my.

    Coefficients are multiplied by (i*kx)^mx (i*ky)^my; the Nyquist mode of
    any odd-order factor is zeroed so real fields stay real.
    """
    if mx < 0 or my < 0:
        raise ContractViolationError("derivative orders must be non-negative")
    g = F.grid
    kx = g.kx()
    ky = g.ky()
    mult_x = (1j * kx) ** mx
    mult_y = (1j * ky) ** my
    if mx % 2 == 1:
        mult_x[g.nx // 2] = 0.0
    if my % 2 == 1:
        mult_y[g.ny // 2] = 0.0
    return SpectralField(g, F.coeffs * np.outer(mult_x, mult_y))


def quadrature(f: Field) -> float:
    """Integral of f over the periodic domain (mean times area).

    Exact for trigonometric polynomials resolved by the grid.
    """
    return float(np.mean(f.values)) * f.grid.area


def refine(F: SpectralField, factor: int) -> SpectralField:
    """Zero-pad the spectrum onto a grid `factor` times finer per direction.

    The refined field interpolates the original samples; the Nyquist
    coefficient is split between modes +-n/2 to keep the result real.
    """
    if factor < 1 or int(factor) != factor:
        raise ContractViolationError(f"refine factor must be an integer >= 1, got {factor}")
    if factor == 1:
        return F.copy()
    c = _pad_axis(F.coeffs, F.grid.nx, F.grid.nx * factor, axis=0)
    c = _pad_axis(c, F.grid.ny, F.grid.ny * factor, axis=1)
    return SpectralField(F.grid.refined(factor), c)


def _pad_axis(c: np.ndarray, n: int, n_new: int, axis: int) -> np.ndarray:
    shape = list(c.shape)
    shape[axis] = n_new
    out = np.zeros(shape, dtype=np.complex128)
    src = np.moveaxis(c, axis, 0)
    dst = np.moveaxis(out, axis, 0)
    half = n // 2
    dst[:half] = src[:half]
    dst[half] = 0.5 * src[half]
    dst[n_new - half] = 0.5 * src[half]
    dst[n_new - half + 1 :] = src[half + 1 :]
    return out


def restrict(F: SpectralField, factor: int) -> SpectralField:
    """Drop padded modes; inverse of :func:`refine` on its image."""
    if factor < 1 or int(factor) != factor:
        raise ContractViolationError(f"restrict factor must be an integer >= 1, got {factor}")
    if factor == 1:
        return F.copy()
    g = F.grid
    if g.nx % factor or g.ny % factor:
        raise ContractViolationError("grid is not divisible by the restrict factor")
    c = _unpad_axis(F.coeffs, g.nx // factor, axis=0)
    c = _unpad_axis(c, g.ny // factor, axis=1)
    return SpectralField(GridSpec(g.nx // factor, g.ny // factor, g.lx, g.ly), c)


def _unpad_axis(c: np.ndarray, n: int, axis: int) -> np.ndarray:
    src = np.moveaxis(c, axis, 0)
    half = n // 2
    shape = list(src.shape)
    shape[0] = n
    out = np.zeros(shape, dtype=np.complex128)
    out[:half] = src[:half]
    out[half] = src[half] + src[src.shape[0] - half]
    out[half + 1 :] = src[src.shape[0] - half + 1 :]
    return np.moveaxis(out, 0, axis)


def tail_indicator(F: SpectralField) -> float:
    """Relative size of the highest-frequency coefficients.

    Maximum modulus over modes with |jx| > nx/3 or |jy| > ny/3, divided by
    the maximum modulus overall.  Serves as a spatial-resolution error proxy.
    """
    mag = np.abs(F.coeffs)
    peak = mag.max()
    if peak == 0.0:
        return 0.0
    mask = _tail_mask(F.grid)
    return float(mag[mask].max() / peak)


def _tail_mask(g: GridSpec) -> np.ndarray:
    jx = np.abs(g.kx_modes())
    jy = np.abs(g.ky_modes())
    return (jx[:, None] > g.nx / 3.0) | (jy[None, :] > g.ny / 3.0)


def dealias_mask(g: GridSpec) -> np.ndarray:
    """2/3-rule mask: True on modes kept by the filter."""
    jx = np.abs(g.kx_modes())
    jy = np.abs(g.ky_modes())
    return (jx[:, None] <= g.nx / 3.0) & (jy[None, :] <= g.ny / 3.0)


def apply_dealias(F: SpectralField) -> SpectralField:
    return SpectralField(F.grid, F.coeffs * dealias_mask(F.grid))


def phase_shift(F: SpectralField, sx: float, sy: float) -> SpectralField:
    """Exact band-limited translation: samples of f(x - sx, y - sy).

    Multiplies coefficients by exp(-i*(kx*sx + ky*sy)); the Nyquist mode is
    attenuated by cos(k*s), the projection of the shifted cosine back onto
    the representable space.
    """
    g = F.grid
    px = np.exp(-1j * g.kx() * sx)
    px[g.nx // 2] = np.cos(g.kx()[g.nx // 2] * sx)
    py = np.exp(-1j * g.ky() * sy)
    py[g.ny // 2] = np.cos(g.ky()[g.ny // 2] * sy)
    return SpectralField(g, F.coeffs * np.outer(px, py))


def conjugate_symmetry_defect(F: SpectralField) -> float:
    """Relative sup defect of coeffs(-k) = conj(coeffs(k))."""
    c = F.coeffs
    mirrored = np.roll(c[::-1, ::-1], (1, 1), axis=(0, 1))
    scale = np.abs(c).max()
    if scale == 0.0:
        return 0.0
    return float(np.abs(c - np.conj(mirrored)).max() / scale)


def evaluate_on_points(F: SpectralField, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Band-limited evaluation on the tensor grid of points x cross y.

    Direct Fourier-series summation, factorized per axis; the Nyquist mode
    is evaluated as a cosine (the real-field interpretation of the single
    stored +n/2 coefficient).  Exact at the grid nodes.
    """
    g = F.grid
    ax = _eval_matrix(np.asarray(x, dtype=np.float64), g.kx_modes(), g.lx)
    ay = _eval_matrix(np.asarray(y, dtype=np.float64), g.ky_modes(), g.ly)
    return np.real(ax @ F.coeffs @ ay.T)


def _eval_matrix(pts: np.ndarray, modes: np.ndarray, scale: float) -> np.ndarray:
    phase = np.outer(pts / scale, modes)
    a = np.exp(1j * phase)
    a[:, modes.size // 2] = np.cos(phase[:, modes.size // 2])
    return a
