"""Paraxial optics: free space, thin lenses, apertures and f-f Fourier systems.

Fields are propagated with FFTs.  The same element sequence can also be
turned into an explicit impulse-response matrix ``h[x_out, x_in]`` (1D only),
which is what the quadrature evaluation of the correlation integrals uses.

The array-level helpers (``propagate_array`` and friends) act on the trailing
``dims`` axes, so a whole batch of frames goes through one FFT call.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy import fft as sfft

from .errors import GridMismatchError, GuardError
from .field import ComplexField, Grid

__all__ = [
    "FreeSpace",
    "ThinLens",
    "Aperture",
    "FourierSystem",
    "OpticalTrain",
    "ImpulseResponseMatrix",
    "AliasingWarning",
    "propagate_angular_spectrum",
    "apply_fourier_system",
    "apply_element",
    "apply_train",
    "impulse_matrix",
    "fourier_output_grid",
    "output_grid",
    "max_unaliased_extent",
    "propagate_array",
]

IMPULSE_MATRIX_LIMIT = 2**22
_EDGE_EPS = 1e-9


class AliasingWarning(UserWarning):
    """A free-space segment is long enough for the field to wrap around the grid."""


def _finite_positive(name, value):
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value}")
    return value


@dataclass(frozen=True)
class FreeSpace:
    """Free-space segment of length ``z`` (metres).

    ``z = 0`` is the identity and negative ``z`` back-propagates.
    """

    z: float

    def __post_init__(self):
        if not math.isfinite(self.z):
            raise ValueError(f"z must be finite, got {self.z}")
        object.__setattr__(self, "z", float(self.z))


@dataclass(frozen=True)
class ThinLens:
    """Thin lens of focal length ``f``, phase ``exp(-i pi r^2 / (lambda f))``."""

    f: float

    def __post_init__(self):
        object.__setattr__(self, "f", _finite_positive("f", self.f))


@dataclass(frozen=True)
class Aperture:
    """Binary stop of diameter ``D``.

    ``shape="circle"`` is a disk in 2D; ``"slit"`` bounds only ``|x|``.  In 1D
    both shapes are the interval ``|x| <= D / 2``.  Edges are inclusive.
    """

    D: float
    shape: str = "circle"

    def __post_init__(self):
        object.__setattr__(self, "D", _finite_positive("D", self.D))
        if self.shape not in ("circle", "slit"):
            raise ValueError(f"aperture shape must be 'circle' or 'slit', got {self.shape!r}")

    def mask(self, grid: Grid) -> np.ndarray:
        return _aperture_mask(self.D, self.shape, grid)


@lru_cache(maxsize=16)
def _aperture_mask(D: float, shape: str, grid: Grid) -> np.ndarray:
    if shape == "circle" or grid.dims == 1:
        r = grid.radius()
    else:
        r = np.abs(grid.coordinates()[0])
    m = r <= D / 2 * (1 + _EDGE_EPS)
    m.flags.writeable = False
    return m


@dataclass(frozen=True)
class FourierSystem:
    """Ideal f-f lens system mapping the input plane onto its Fourier plane."""

    f: float

    def __post_init__(self):
        object.__setattr__(self, "f", _finite_positive("f", self.f))


# Objects (see ``ghostsim.objects``) are elements too; they are recognised by
# their ``grid`` attribute and ``transmission()`` method.
Element = Union[FreeSpace, ThinLens, Aperture, FourierSystem, object]


def _is_object(e) -> bool:
    return hasattr(e, "transmission") and hasattr(e, "grid")


@dataclass(frozen=True)
class OpticalTrain:
    """Non-empty ordered sequence of elements, applied left to right."""

    elements: tuple

    def __post_init__(self):
        els = tuple(self.elements)
        if not els:
            raise ValueError("an optical train needs at least one element")
        for e in els:
            if not (isinstance(e, (FreeSpace, ThinLens, Aperture, FourierSystem)) or _is_object(e)):
                raise TypeError(f"not an optical element: {e!r}")
        object.__setattr__(self, "elements", els)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def objects(self) -> list:
        return [e for e in self.elements if _is_object(e)]


@dataclass(frozen=True, eq=False)
class ImpulseResponseMatrix:
    """Discretised impulse response ``entries[x_out, x_in]``.

    The input quadrature weight is folded in, so ``entries @ samples`` is the
    output field directly.
    """

    in_grid: Grid
    out_grid: Grid
    entries: np.ndarray

    def __post_init__(self):
        if self.in_grid.dims != 1 or self.out_grid.dims != 1:
            raise GridMismatchError("impulse matrices are defined on 1D grids only")
        h = np.array(self.entries, dtype=np.complex128)
        if h.shape != (self.out_grid.n, self.in_grid.n):
            raise GridMismatchError(f"entries shape {h.shape} does not match grids")
        if not np.all(np.isfinite(h)):
            raise ValueError("impulse matrix has non-finite entries")
        h.flags.writeable = False
        object.__setattr__(self, "entries", h)

    def apply(self, samples: np.ndarray) -> np.ndarray:
        return np.asarray(samples) @ self.entries.T


# ---------------------------------------------------------------------------
# array-level kernels


def _axes(dims):
    return tuple(range(-dims, 0))


@lru_cache(maxsize=32)
def _transfer(n: int, dx: float, dims: int, wavelength: float, z: float) -> np.ndarray:
    """Angular-spectrum transfer function in unshifted FFT order."""
    fr = np.fft.fftfreq(n, dx)
    f2 = fr**2 if dims == 1 else fr[None, :] ** 2 + fr[:, None] ** 2
    arg = 1.0 / wavelength**2 - f2
    kz = np.sqrt(np.abs(arg))
    # Propagating band: pure phase.  Evanescent waves decay for either sign of z.
    H = np.where(arg >= 0, np.exp(2j * np.pi * z * kz), np.exp(-2 * np.pi * abs(z) * kz))
    H.flags.writeable = False
    return H


def _angular_spectrum(samples, grid: Grid, wavelength, z):
    if z == 0:
        return np.array(samples, dtype=np.complex128)
    ax = _axes(grid.dims)
    H = _transfer(grid.n, grid.dx, grid.dims, wavelength, z)
    return sfft.ifftn(sfft.fftn(samples, axes=ax) * H, axes=ax)


def fourier_output_grid(grid: Grid, wavelength: float, f: float) -> Grid:
    """Output grid of an f-f system, pitch ``lambda f / (n dx)``."""
    return grid.with_dx(wavelength * f / (grid.n * grid.dx))


def _fourier(samples, grid: Grid, wavelength, f):
    out = fourier_output_grid(grid, wavelength, f)
    ax = _axes(grid.dims)
    scale = math.sqrt(grid.dx / out.dx) ** grid.dims
    spec = sfft.fftshift(sfft.fftn(sfft.ifftshift(samples, axes=ax), axes=ax, norm="ortho"), axes=ax)
    return spec * scale, out


def _lens_phase(grid: Grid, wavelength, f):
    return np.exp(-1j * np.pi * grid.radius() ** 2 / (wavelength * f))


def _check_object_grid(e, grid: Grid):
    if e.grid != grid:
        raise GridMismatchError(f"object grid {e.grid} does not match field grid {grid}")


def propagate_array(samples, grid: Grid, wavelength: float, train: OpticalTrain | Sequence):
    """Push a batch of fields (trailing axes = ``grid.shape``) through ``train``.

    Returns ``(samples_out, grid_out)``.  No aliasing diagnostics are run.
    """
    elements = train.elements if isinstance(train, OpticalTrain) else tuple(train)
    a = np.asarray(samples, dtype=np.complex128)
    if a.shape[a.ndim - grid.dims:] != grid.shape:
        raise GridMismatchError(f"array shape {a.shape} does not end in grid shape {grid.shape}")
    for e in elements:
        if isinstance(e, FreeSpace):
            a = _angular_spectrum(a, grid, wavelength, e.z)
        elif isinstance(e, ThinLens):
            a = a * _lens_phase(grid, wavelength, e.f)
        elif isinstance(e, Aperture):
            a = a * e.mask(grid)
        elif isinstance(e, FourierSystem):
            a, grid = _fourier(a, grid, wavelength, e.f)
        elif _is_object(e):
            _check_object_grid(e, grid)
            a = a * e.transmission()
        else:
            raise TypeError(f"not an optical element: {e!r}")
    return a, grid


def output_grid(train: OpticalTrain, grid: Grid, wavelength: float) -> Grid:
    for e in train:
        if isinstance(e, FourierSystem):
            grid = fourier_output_grid(grid, wavelength, e.f)
    return grid


# ---------------------------------------------------------------------------
# aliasing diagnostics


def _support_extent(samples, grid: Grid, rel=1e-10) -> float:
    p = np.abs(samples) ** 2
    if grid.dims == 2:
        p = np.maximum(p.max(axis=0), p.max(axis=1))
    idx = np.nonzero(p > rel * p.max())[0] if p.max() > 0 else []
    if len(idx) == 0:
        return 0.0
    return (idx[-1] - idx[0] + 1) * grid.dx


def _max_frequency(samples, grid: Grid, rel=1e-10) -> float:
    ax = _axes(grid.dims)
    s = np.abs(sfft.fftn(samples, axes=ax)) ** 2
    if s.max() == 0:
        return 0.0
    fr = np.abs(np.fft.fftfreq(grid.n, grid.dx))
    if grid.dims == 2:
        s = np.maximum(s.max(axis=0), s.max(axis=1))
    return float(fr[s > rel * s.max()].max())


def max_unaliased_extent(grid: Grid, wavelength: float, z: float, max_frequency: float | None = None) -> float:
    """Largest field extent that survives free space ``z`` without wraparound.

    A field whose spectrum reaches ``max_frequency`` spreads by
    ``|z| tan(theta)`` on each side, with ``sin(theta) = lambda f_max``; the
    periodic window of width ``n dx`` must contain the spread field.
    ``max_frequency`` defaults to the grid's Nyquist frequency.
    """
    if max_frequency is None:
        max_frequency = 1.0 / (2 * grid.dx)
    s = min(wavelength * max_frequency, 1.0)
    spread = math.inf if s >= 1.0 else abs(z) * s / math.sqrt(1 - s * s)
    return max(grid.extent - 2 * spread, 0.0)


def _warn_aliasing(samples, grid: Grid, wavelength, z):
    if z == 0:
        return
    allowed = max_unaliased_extent(grid, wavelength, z, _max_frequency(samples, grid))
    width = _support_extent(samples, grid)
    if width > allowed:
        warnings.warn(
            f"free-space segment z={z:g} m: field extent {width:.3g} m exceeds the "
            f"{allowed:.3g} m that propagates without wraparound",
            AliasingWarning,
            stacklevel=3,
        )


# ---------------------------------------------------------------------------
# field-level operations


def _check_finite(f: ComplexField):
    if not np.all(np.isfinite(f.samples)):
        raise ValueError("field contains NaN or infinite samples")


def propagate_angular_spectrum(f: ComplexField, z: float, check_aliasing: bool = True) -> ComplexField:
    """Exact scalar angular-spectrum propagation over ``z`` metres.

    Unitary on the propagating band.  ``z`` may be negative.
    """
    _check_finite(f)
    z = float(z)
    if not math.isfinite(z):
        raise ValueError(f"z must be finite, got {z}")
    if check_aliasing:
        _warn_aliasing(f.samples, f.grid, f.wavelength, z)
    return f.replace_samples(_angular_spectrum(f.samples, f.grid, f.wavelength, z))


def apply_fourier_system(f: ComplexField, focal: float) -> ComplexField:
    """Optical Fourier transform by an f-f system of focal length ``focal``.

    ``E_out(u) = c * sum_x E(x) exp(-2 pi i u x / (lambda f))`` on a grid of
    pitch ``lambda f / (n dx)``; ``c`` is the real constant that conserves
    total power.
    """
    _check_finite(f)
    focal = _finite_positive("focal", focal)
    s, out = _fourier(f.samples, f.grid, f.wavelength, focal)
    return f.replace_samples(s, out)


def apply_element(f: ComplexField, e) -> ComplexField:
    _check_finite(f)
    if isinstance(e, FreeSpace):
        return propagate_angular_spectrum(f, e.z)
    if isinstance(e, FourierSystem):
        return apply_fourier_system(f, e.f)
    s, g = propagate_array(f.samples, f.grid, f.wavelength, (e,))
    return f.replace_samples(s, g)


def apply_train(f: ComplexField, t: OpticalTrain) -> ComplexField:
    """Left fold of :func:`apply_element` over the train."""
    for e in t:
        f = apply_element(f, e)
    return f


def impulse_matrix(t: OpticalTrain, in_grid: Grid, out_grid: Grid | None, wavelength: float) -> ImpulseResponseMatrix:
    """Explicit 1D impulse response of a train.

    Column ``j`` is the train's response to the discrete delta at input
    sample ``j`` (``1/dx`` high, so unit area) times the quadrature weight
    ``dx``; the two factors cancel, so ``h @ E`` reproduces ``apply_train``.

    Raises
    ------
    GuardError
        If ``n_in * n_out`` exceeds 2**22 entries.
    GridMismatchError
        If ``out_grid`` is not where the train actually lands.
    """
    if in_grid.dims != 1:
        raise GridMismatchError("impulse matrices are defined on 1D grids only")
    actual = output_grid(t, in_grid, wavelength)
    if out_grid is None:
        out_grid = actual
    if in_grid.n * out_grid.n > IMPULSE_MATRIX_LIMIT:
        raise GuardError(f"impulse matrix {out_grid.n}x{in_grid.n} exceeds the {IMPULSE_MATRIX_LIMIT}-entry limit")
    if out_grid.n != actual.n or not math.isclose(out_grid.dx, actual.dx, rel_tol=1e-12):
        raise GridMismatchError(f"train maps {in_grid} onto {actual}, not {out_grid}")
    cols, _ = propagate_array(np.eye(in_grid.n, dtype=np.complex128), in_grid, wavelength, t)
    return ImpulseResponseMatrix(in_grid, out_grid, cols.T)
