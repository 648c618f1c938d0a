"""Pure-phase and amplitude test objects, and the diaphragm.

Objects are defined by a small descriptor and rasterised onto a grid.  In 2D
they are extruded along y (slits are infinitely tall), so the diffraction
happens along x only.  Edges are inclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import GridMismatchError, GuardError
from .field import Grid
from .propagation import Aperture

__all__ = [
    "PhaseStep",
    "PhaseGrating",
    "PhaseDoubleSlit",
    "CustomPhase",
    "DoubleSlit",
    "SingleSlit",
    "CustomAmplitude",
    "PhaseObject",
    "AmplitudeObject",
    "Diaphragm",
    "make_phase_object",
    "make_amplitude_object",
    "make_object",
    "transmission",
    "MIN_FEATURE_SAMPLES",
]

MIN_FEATURE_SAMPLES = 8
_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class PhaseStep:
    """Phase ``phi`` for ``x >= 0`` (up to ``x < width`` if ``width`` is given)."""

    phi: float = math.pi
    width: Optional[float] = None

    def extent(self):
        return self.width

    def feature(self):
        return self.width

    def profile(self, x):
        inside = x >= 0
        if self.width is not None:
            inside &= x < self.width
        return np.where(inside, self.phi, 0.0)


@dataclass(frozen=True)
class PhaseGrating:
    """Binary grating: phase ``phi`` on the first half of each period, within ``|x| <= width/2``."""

    phi: float = math.pi
    period: float = 100e-6
    width: float = 690e-6

    def extent(self):
        return self.width

    def feature(self):
        return self.period / 2

    def profile(self, x):
        frac = np.mod(x / self.period, 1.0)
        inside = np.abs(x) <= self.width / 2 * (1 + _EDGE_EPS)
        return np.where(inside & (frac < 0.5), self.phi, 0.0)


def _two_slits(x, a, d):
    h = a / 2 * (1 + _EDGE_EPS)
    return (np.abs(x - d / 2) <= h) | (np.abs(x + d / 2) <= h)


@dataclass(frozen=True)
class PhaseDoubleSlit:
    """Two slits of width ``slit_width`` carrying phase ``phi``.

    ``separation`` is centre to centre, so the total extent is
    ``separation + slit_width`` (690 um with the defaults).
    """

    phi: float = math.pi
    slit_width: float = 160e-6
    separation: float = 530e-6

    def __post_init__(self):
        if self.separation <= self.slit_width:
            raise ValueError("slits overlap: separation must exceed slit_width")

    def extent(self):
        return self.separation + self.slit_width

    def feature(self):
        return min(self.slit_width, self.separation - self.slit_width)

    def profile(self, x):
        return np.where(_two_slits(x, self.slit_width, self.separation), self.phi, 0.0)


@dataclass(frozen=True, eq=False)
class CustomPhase:
    """Explicit phase map (radians), already sampled on the target grid."""

    phase_map: np.ndarray

    def extent(self):
        return None

    def feature(self):
        return None


@dataclass(frozen=True)
class DoubleSlit:
    """Opaque screen with two clear slits of width ``a``, centres ``d`` apart."""

    a: float = 160e-6
    d: float = 530e-6

    def __post_init__(self):
        if self.d <= self.a:
            raise ValueError("slits overlap: d must exceed a")

    def extent(self):
        return self.d + self.a

    def feature(self):
        return min(self.a, self.d - self.a)

    def profile(self, x):
        return _two_slits(x, self.a, self.d).astype(float)


@dataclass(frozen=True)
class SingleSlit:
    a: float = 160e-6

    def extent(self):
        return self.a

    def feature(self):
        return self.a

    def profile(self, x):
        return (np.abs(x) <= self.a / 2 * (1 + _EDGE_EPS)).astype(float)


@dataclass(frozen=True, eq=False)
class CustomAmplitude:
    """Explicit amplitude transmission in [0, 1] sampled on the target grid."""

    transmission_map: np.ndarray

    def extent(self):
        return None

    def feature(self):
        return None


PhaseDescriptor = Union[PhaseStep, PhaseGrating, PhaseDoubleSlit, CustomPhase]
AmplitudeDescriptor = Union[DoubleSlit, SingleSlit, CustomAmplitude]


def _readonly(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PhaseObject:
    """Unit-modulus object ``t = exp(i * phase_map)``."""

    grid: Grid
    phase_map: np.ndarray
    descriptor: object = None

    def __post_init__(self):
        p = _readonly(self.phase_map)
        if p.shape != self.grid.shape:
            raise GridMismatchError(f"phase map shape {p.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("phase map must be finite")
        object.__setattr__(self, "phase_map", p)

    def transmission(self) -> np.ndarray:
        return np.exp(1j * self.phase_map)


@dataclass(frozen=True, eq=False)
class AmplitudeObject:
    """Real transmission ``0 <= t <= 1``."""

    grid: Grid
    transmission_map: np.ndarray
    descriptor: object = None

    def __post_init__(self):
        t = _readonly(self.transmission_map)
        if t.shape != self.grid.shape:
            raise GridMismatchError(f"transmission shape {t.shape} does not match grid {self.grid.shape}")
        if not np.all((t >= 0) & (t <= 1)):
            raise ValueError("amplitude transmission must lie in [0, 1]")
        object.__setattr__(self, "transmission_map", t)

    def transmission(self) -> np.ndarray:
        return self.transmission_map.astype(np.complex128)


class Diaphragm(Aperture):
    """The stop in front of the object; an :class:`Aperture` element."""


def transmission(obj) -> np.ndarray:
    """Complex transmission of a phase or amplitude object."""
    return obj.transmission()


def _check_geometry(desc, grid: Grid, D):
    extent = desc.extent()
    if D is not None and extent is not None and extent > D * (1 + _EDGE_EPS):
        raise GuardError(f"object extent {extent:.4g} m exceeds the diaphragm diameter {D:.4g} m")
    feature = desc.feature()
    if feature is not None and feature < MIN_FEATURE_SAMPLES * grid.dx * (1 - _EDGE_EPS):
        raise GuardError(
            f"smallest object feature {feature:.4g} m spans fewer than {MIN_FEATURE_SAMPLES} samples of {grid.dx:.4g} m"
        )


def _raster(desc, grid: Grid):
    x = grid.axis()
    row = desc.profile(x)
    if grid.dims == 1:
        return row
    return np.broadcast_to(row, grid.shape).copy()


def _custom(arr, grid):
    a = np.asarray(arr, dtype=float)
    if a.shape == (grid.n,) and grid.dims == 2:
        a = np.broadcast_to(a, grid.shape).copy()
    if a.shape != grid.shape:
        raise GridMismatchError(f"custom map shape {a.shape} does not match grid {grid.shape}")
    return a


def make_phase_object(descriptor: PhaseDescriptor, grid: Grid, D: float | None = None) -> PhaseObject:
    """Rasterise a phase descriptor.

    Parameters
    ----------
    descriptor : PhaseStep, PhaseGrating, PhaseDoubleSlit or CustomPhase
    grid : Grid
    D : float, optional
        Diaphragm diameter; the object must fit inside it.

    Raises
    ------
    GuardError
        Object wider than ``D`` or a feature narrower than 8 samples.
    """
    if isinstance(descriptor, CustomPhase):
        return PhaseObject(grid, _custom(descriptor.phase_map, grid), descriptor)
    if not isinstance(descriptor, (PhaseStep, PhaseGrating, PhaseDoubleSlit)):
        raise TypeError(f"not a phase descriptor: {descriptor!r}")
    _check_geometry(descriptor, grid, D)
    return PhaseObject(grid, _raster(descriptor, grid), descriptor)


def make_amplitude_object(descriptor: AmplitudeDescriptor, grid: Grid, D: float | None = None) -> AmplitudeObject:
    """Rasterise an amplitude descriptor; same guards as :func:`make_phase_object`."""
    if isinstance(descriptor, CustomAmplitude):
        return AmplitudeObject(grid, _custom(descriptor.transmission_map, grid), descriptor)
    if not isinstance(descriptor, (DoubleSlit, SingleSlit)):
        raise TypeError(f"not an amplitude descriptor: {descriptor!r}")
    _check_geometry(descriptor, grid, D)
    return AmplitudeObject(grid, _raster(descriptor, grid), descriptor)


def make_object(descriptor, grid: Grid, D: float | None = None):
    if isinstance(descriptor, (PhaseStep, PhaseGrating, PhaseDoubleSlit, CustomPhase)):
        return make_phase_object(descriptor, grid, D)
    return make_amplitude_object(descriptor, grid, D)
