"""Sampled scalar fields, intensity maps and speckle statistics.

All arrays are double precision.  A 2D field is stored as ``samples[iy, ix]``
so that axis 1 runs along x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import GridMismatchError, UndefinedWidthError

__all__ = [
    "Grid",
    "ComplexField",
    "IntensityMap",
    "intensity",
    "total_power",
    "speckle_contrast",
    "autocorrelation_width",
    "AutocovarianceAccumulator",
    "line_profile",
]


@dataclass(frozen=True)
class Grid:
    """Uniform, sample-centred grid.

    Sample ``i`` sits at ``(i - n // 2) * dx`` on every axis, so the grid is
    symmetric under ``i -> (n - i) % n`` (the reflection ``x -> -x``).

    Parameters
    ----------
    n : int
        Samples per axis; even and at least 8.
    dx : float
        Sample pitch in metres.
    dims : int
        1 or 2.
    """

    n: int
    dx: float
    dims: int = 1

    def __post_init__(self):
        if self.dims not in (1, 2):
            raise ValueError(f"dims must be 1 or 2, got {self.dims}")
        if int(self.n) != self.n or self.n < 8 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 8, got {self.n}")
        if not (self.dx > 0 and math.isfinite(self.dx)):
            raise ValueError(f"dx must be positive, got {self.dx}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "dx", float(self.dx))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dims

    @property
    def size(self) -> int:
        return self.n**self.dims

    @property
    def extent(self) -> float:
        return self.n * self.dx

    @property
    def center_index(self) -> int:
        return self.n // 2

    @property
    def cell(self) -> float:
        """Quadrature weight of one sample, ``dx**dims``."""
        return self.dx**self.dims

    def axis(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.dx

    def coordinates(self):
        """Coordinate array (1D) or ``(X, Y)`` pair (2D)."""
        x = self.axis()
        if self.dims == 1:
            return x
        return np.meshgrid(x, x, indexing="xy")

    def radius(self) -> np.ndarray:
        if self.dims == 1:
            return np.abs(self.axis())
        X, Y = self.coordinates()
        return np.hypot(X, Y)

    def frequencies(self) -> np.ndarray:
        """Unshifted FFT frequencies (cycles per metre) along one axis."""
        return np.fft.fftfreq(self.n, self.dx)

    def reflect_index(self, i):
        """Index of ``-x`` for the sample at index ``i``."""
        return (self.n - np.asarray(i)) % self.n

    def with_dx(self, dx: float) -> "Grid":
        return Grid(self.n, dx, self.dims)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Complex scalar field sampled on a :class:`Grid`."""

    grid: Grid
    samples: np.ndarray
    wavelength: float

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.complex128)
        if s.shape != self.grid.shape:
            raise GridMismatchError(f"samples shape {s.shape} does not match grid {self.grid.shape}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        object.__setattr__(self, "samples", _readonly(s))
        object.__setattr__(self, "wavelength", float(self.wavelength))

    def replace_samples(self, samples, grid: Grid | None = None) -> "ComplexField":
        return ComplexField(grid or self.grid, samples, self.wavelength)


@dataclass(frozen=True, eq=False)
class IntensityMap:
    """Non-negative intensity sampled on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise GridMismatchError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("intensity values must be finite and non-negative")
        object.__setattr__(self, "values", _readonly(v))


def intensity(f: ComplexField) -> IntensityMap:
    """``|E|**2`` on the same grid."""
    s = f.samples
    return IntensityMap(f.grid, s.real**2 + s.imag**2)


def total_power(m: IntensityMap) -> float:
    """Integrated intensity, ``sum(values) * dx**dims`` (compensated sum)."""
    return math.fsum(m.values.ravel()) * m.grid.cell


def _stack(maps: IntensityMap | Sequence[IntensityMap]) -> tuple[Grid, np.ndarray]:
    if isinstance(maps, IntensityMap):
        maps = [maps]
    maps = list(maps)
    if not maps:
        raise ValueError("no intensity maps given")
    grid = maps[0].grid
    for m in maps[1:]:
        if m.grid != grid:
            raise GridMismatchError("intensity maps live on different grids")
    return grid, np.stack([m.values for m in maps])


def _roi_mask(grid: Grid, roi) -> np.ndarray:
    if roi is None:
        return np.ones(grid.shape, dtype=bool)
    mask = np.asarray(roi, dtype=bool)
    if mask.shape != grid.shape:
        raise GridMismatchError(f"roi shape {mask.shape} does not match grid {grid.shape}")
    if not mask.any():
        raise ValueError("region of interest is empty")
    return mask


def speckle_contrast(maps: Sequence[IntensityMap], roi=None) -> float:
    """Contrast ``std(I) / mean(I)`` pooled over every frame and ROI sample.

    Parameters
    ----------
    maps : sequence of IntensityMap
        At least two frames on a common grid.
    roi : bool array, optional
        Region of interest; the whole grid by default.
    """
    grid, stack = _stack(maps)
    if stack.shape[0] < 2:
        raise ValueError("speckle_contrast needs at least two frames")
    mask = _roi_mask(grid, roi)
    samples = stack[:, mask].ravel()
    mean = samples.mean()
    if mean == 0:
        return 0.0
    return float(samples.std() / mean)


def line_profile(m: IntensityMap, mode: str = "integrate") -> np.ndarray:
    """Profile along x.

    For a 2D map, ``mode="integrate"`` sums over y (a line detector with tall
    pixels) and ``mode="cut"`` takes the row through y = 0.  1D maps are
    returned unchanged.
    """
    if m.grid.dims == 1:
        return np.array(m.values)
    if mode == "integrate":
        return m.values.sum(axis=0) * m.grid.dx
    if mode == "cut":
        return np.array(m.values[m.grid.center_index])
    raise ValueError(f"unknown profile mode {mode!r}")


# Below this many samples of half width the lag grid is too coarse for linear
# interpolation; the band-limited interpolant is evaluated on a finer lag grid.
_REFINE_BELOW = 10.0
_FINE_STEPS_PER_SAMPLE = 16


class AutocovarianceAccumulator:
    """Streaming estimate of the intensity autocovariance width.

    Frames are added in batches; only Fourier-domain sums are kept, so long
    ensembles of large maps fit in memory.  :func:`autocorrelation_width` is
    the one-shot wrapper.

    Parameters
    ----------
    grid : Grid
    roi : bool array, optional
        Samples that take part; the whole grid by default.
    max_lag : int, optional
        Largest lag (in samples) searched for the half maximum; ``n // 2`` by
        default.
    """

    def __init__(self, grid: Grid, roi=None, max_lag=None):
        self.grid = grid
        self.mask = _roi_mask(grid, roi)
        n, d = grid.n, grid.dims
        if max_lag is None:
            max_lag = n // 2
        self.max_lag = int(min(max(max_lag, 2), n - 1))
        self.npad = sfft.next_fast_len(n + self.max_lag, real=True)
        self.axes = tuple(range(-d, 0))
        self.pad_shape = (self.npad,) * d
        self.w = self.mask.astype(float)
        self.frames = 0
        self.shift = None  # provisional mean, limits cancellation
        self.sum_values = 0.0
        self.sum_spec = None
        self.sum_power = None

    def add(self, values) -> "AutocovarianceAccumulator":
        """Add one map or a batch ``(frames, *grid.shape)``; IntensityMaps accepted."""
        if isinstance(values, IntensityMap):
            if values.grid != self.grid:
                raise GridMismatchError("map grid does not match the accumulator")
            values = values.values
        a = np.asarray(values, dtype=float)
        if a.shape == self.grid.shape:
            a = a[None]
        if a.shape[1:] != self.grid.shape:
            raise GridMismatchError(f"values shape {a.shape[1:]} does not match grid {self.grid.shape}")
        if self.shift is None:
            self.shift = float(a[:, self.mask].mean())
        for frame in a:
            spec = sfft.rfftn((frame - self.shift) * self.w, s=self.pad_shape, axes=self.axes)
            p = spec.real**2 + spec.imag**2
            if self.sum_spec is None:
                self.sum_spec, self.sum_power = spec, p
            else:
                self.sum_spec = self.sum_spec + spec
                self.sum_power = self.sum_power + p
            self.sum_values += float(np.sum(frame[self.mask] - self.shift))
            self.frames += 1
        return self

    def width(self) -> float:
        """FWHM in metres.

        Raises
        ------
        UndefinedWidthError
            No variance, or no half-maximum crossing within ``max_lag``.
        """
        if self.frames == 0:
            raise ValueError("no frames accumulated")
        d, npad, axes, ps = self.grid.dims, self.npad, self.axes, self.pad_shape
        delta = self.sum_values / (self.frames * self.mask.sum())
        mean = self.shift + delta
        wspec = sfft.rfftn(self.w, s=ps, axes=axes)
        wpower = wspec.real**2 + wspec.imag**2
        # sum_f |F[(f - shift - delta) w]|^2 expanded around the provisional mean
        power = (
            self.sum_power
            - 2 * delta * (self.sum_spec * np.conj(wspec)).real
            + self.frames * delta**2 * wpower
        ) / self.frames

        raw = sfft.irfftn(power, s=ps, axes=axes)
        pairs = sfft.irfftn(wpower, s=ps, axes=axes)
        c0 = raw[(0,) * d] / pairs[(0,) * d]
        if not np.isfinite(c0) or c0 <= 1e-20 * max(mean * mean, 1e-280):
            raise UndefinedWidthError("intensity has zero variance; correlation width undefined")

        lags = np.fft.fftfreq(npad, 1.0 / npad)  # integer lags in cyclic order
        keep = np.abs(lags) <= self.max_lag
        if d == 1:
            prof_r, prof_c = _radial_1d(raw, pairs, lags, keep, c0)
        else:
            prof_r, prof_c = _radial_2d(raw, pairs, lags, keep, c0)
        half = _first_crossing(prof_r, prof_c)
        if half is None:
            raise UndefinedWidthError("autocovariance never falls to half maximum within max_lag")
        if half < _REFINE_BELOW:
            fine_r, fine_c = _fine_profile(power, wpower, npad, d, min(3.0 * half + 2.0, self.max_lag), c0)
            refined = _first_crossing(fine_r, fine_c)
            if refined is not None:
                half = refined
        return 2.0 * half * self.grid.dx


def autocorrelation_width(maps: IntensityMap | Sequence[IntensityMap], roi=None, max_lag=None) -> float:
    """FWHM of the normalised intensity autocovariance, in metres.

    The autocovariance of ``I - <I>`` is accumulated over all frames (the
    mean is pooled over frames and ROI), divided by the number of sample
    pairs at each lag and normalised to 1 at zero lag.  In 2D the result is
    the azimuthal average.  For narrow patterns the band-limited interpolant
    of the autocovariance is evaluated on a lag grid 16 times finer than
    ``dx`` before locating the half-maximum.

    Raises
    ------
    UndefinedWidthError
        If the intensity has no variance.
    """
    grid, stack = _stack(maps)
    return AutocovarianceAccumulator(grid, roi, max_lag).add(stack).width()


def _radial_1d(raw, pairs, lags, keep, c0):
    r = np.abs(lags[keep])
    c = raw[keep] / pairs[keep] / c0
    order = np.argsort(r, kind="stable")
    r, c = r[order], c[order]
    ur, inv = np.unique(r, return_inverse=True)
    return ur, np.bincount(inv, weights=c) / np.bincount(inv)


def _radial_2d(raw, pairs, lags, keep, c0):
    sub = np.ix_(keep, keep)
    c = raw[sub] / pairs[sub] / c0
    lx = lags[keep]
    r = np.hypot(lx[None, :], lx[:, None])
    bins = np.rint(r).astype(int).ravel()
    ok = r.ravel() <= lx.max()
    counts = np.bincount(bins[ok])
    sums = np.bincount(bins[ok], weights=c.ravel()[ok])
    valid = counts > 0
    return np.arange(len(counts))[valid].astype(float), sums[valid] / counts[valid]


def _first_crossing(r, c):
    below = np.nonzero(c < 0.5)[0]
    if len(below) == 0 or below[0] == 0:
        return None
    j = below[0]
    r0, r1, c0, c1 = r[j - 1], r[j], c[j - 1], c[j]
    return float(r0 + (c0 - 0.5) * (r1 - r0) / (c0 - c1))


def _trig_eval(spec_half, npad, d, s):
    """Evaluate the real cyclic sequence whose rfft is ``spec_half`` at
    fractional lags ``s`` (in samples); 2D returns the ``s x s`` grid."""
    kx = np.arange(spec_half.shape[-1])
    wx = np.full(kx.shape, 2.0)
    wx[0] = 1.0
    if npad % 2 == 0:
        wx[-1] = 1.0
    ex = np.exp(2j * np.pi * np.outer(s, kx) / npad) * wx
    if d == 1:
        return (ex @ spec_half).real / npad
    ky = np.fft.fftfreq(npad, 1.0 / npad)
    ey = np.exp(2j * np.pi * np.outer(s, ky) / npad)
    return (ey @ spec_half @ ex.T).real / npad**2


def _fine_profile(power, wpower, npad, d, rmax, c0):
    step = 1.0 / _FINE_STEPS_PER_SAMPLE
    if d == 1:
        s = np.arange(0.0, rmax + step, step)
        c = _trig_eval(power, npad, 1, s) / _trig_eval(wpower, npad, 1, s) / c0
        return s, c
    s = np.arange(-rmax, rmax + step / 2, step)
    c = _trig_eval(power, npad, 2, s) / _trig_eval(wpower, npad, 2, s) / c0
    r = np.hypot(s[None, :], s[:, None])
    bins = np.rint(r / step).astype(int).ravel()
    ok = r.ravel() <= rmax
    counts = np.bincount(bins[ok])
    sums = np.bincount(bins[ok], weights=c.ravel()[ok])
    valid = counts > 0
    return np.arange(len(counts))[valid] * step, sums[valid] / counts[valid]


def as_intensity_maps(grid: Grid, arrays: Iterable[np.ndarray]) -> list[IntensityMap]:
    return [IntensityMap(grid, a) for a in arrays]
