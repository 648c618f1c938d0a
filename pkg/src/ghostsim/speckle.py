"""Pseudo-thermal speckle source.

Two generators produce circular complex Gaussian fields at the diaphragm
plane:

``physical``
    i.i.d. complex Gaussian samples on a disk (2D) or interval (1D) of
    diameter ``D0`` are propagated a distance ``z`` with the angular spectrum
    method.  The coherence length comes out of the propagation (Van
    Cittert-Zernike), it is not imposed.
``spectral``
    The field is synthesised directly at the diaphragm as a random
    superposition of plane waves whose spatial frequencies fill the band
    ``|f| <= 1/(2 dx_s)``, with ``dx_s = lambda z / D0`` unless a target is
    given.  This is the far-field (Fraunhofer) image of the same source and
    is much cheaper.

Both give ``<I> = 1`` inside the grid.  A ``plane_wave`` method returns the
unit field, which is the laser reference.

Every frame draws from its own counter-based stream derived from
``(seed, frame_index)``, so frames are reproducible one by one and
independent of the order or the worker they are generated on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import GuardError
from .field import ComplexField, Grid

__all__ = [
    "SpeckleSourceConfig",
    "SpeckleFrame",
    "expected_speckle_size",
    "expected_fwhm",
    "speckle_count",
    "generate_speckle_frame",
    "generate_speckle_batch",
    "beamsplit",
    "frame_rng",
    "coherence_kernel",
    "generator_coherence",
    "coherence_blur",
    "DISK_FWHM_FACTOR",
    "SLIT_FWHM_FACTOR",
    "GAUSSIAN_FWHM_FACTOR",
    "DEFAULT_WAVELENGTH",
    "DEFAULT_Z",
    "DEFAULT_D0",
]

DEFAULT_WAVELENGTH = 532e-9
DEFAULT_Z = 0.395
DEFAULT_D0 = 10e-3

# FWHM of the intensity autocovariance in units of lambda z / D0, i.e. twice
# the lag r (same units) at which it falls to one half:
#   disk source:  |2 J1(pi r)/(pi r)|^2 = 1/2  at  r = 0.514496984981094
#   slit source:  sinc(r)^2 = 1/2              at  r = 0.44294647068945237
#   Gaussian kernel g(s) = exp(-pi s^2 / (2 dx^2)): |g|^2 = 1/2 at r = sqrt(ln2 / pi)
# demos/calibrate_vcz.py re-derives the first two by root finding and checks
# them against generated speckle.
DISK_FWHM_FACTOR = 1.028993969962188
SLIT_FWHM_FACTOR = 0.8858929413789047
GAUSSIAN_FWHM_FACTOR = 2.0 * math.sqrt(math.log(2.0) / math.pi)

# Grid requirements.  The coherence length must cover two samples (the
# synthesised band then fits inside Nyquist) and the grid must be at least
# twice the diaphragm so the correlation window does not wrap.
MIN_SAMPLES_PER_SPECKLE = 2.0
MIN_EXTENT_OVER_DIAPHRAGM = 2.0

# physical method: source grid margin and band limit (relative to the widest
# angle that can connect a source point with a grid point)
_SOURCE_MARGIN = 1.1
_BAND_MARGIN = 1.05
_PHYSICAL_MAX_SAMPLES = 2**24

# spectral method: minimum number of lattice frequencies inside the band
# radius; large speckle on a small grid uses a finer, off-grid lattice
_MIN_BAND_MODES = 16


@dataclass(frozen=True)
class SpeckleSourceConfig:
    """Source geometry and generator choice.

    Parameters
    ----------
    method : {"spectral", "physical", "plane_wave"}
    D0 : float
        Source (illuminated ground glass) diameter in metres.
    z : float
        Source to diaphragm distance in metres.
    wavelength : float
    target_dx_speckle : float, optional
        Spectral method only: coherence length to synthesise instead of
        ``lambda z / D0``.
    shape : {"uniform", "gaussian"}
        Spectral method only.  ``uniform`` is the far field of a uniform
        disk (slit in 1D); ``gaussian`` imposes the field coherence
        ``g(s) = exp(-pi s^2 / (2 dx_s^2))``.
    envelope : float, optional
        1/e^2 radius of a Gaussian intensity envelope; uniform by default.
    """

    method: str = "spectral"
    D0: float = DEFAULT_D0
    z: float = DEFAULT_Z
    wavelength: float = DEFAULT_WAVELENGTH
    target_dx_speckle: Optional[float] = None
    shape: str = "uniform"
    envelope: Optional[float] = None

    def __post_init__(self):
        if self.method not in ("spectral", "physical", "plane_wave"):
            raise ValueError(f"unknown speckle method {self.method!r}")
        if self.shape not in ("uniform", "gaussian"):
            raise ValueError(f"unknown spectral shape {self.shape!r}")
        for name in ("z", "wavelength"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")
        if self.method != "plane_wave" and not (self.D0 > 0 and math.isfinite(self.D0)):
            raise ValueError(f"D0 must be positive, got {self.D0}")
        if self.target_dx_speckle is not None:
            if self.method != "spectral":
                raise ValueError("target_dx_speckle only applies to the spectral method")
            if not self.target_dx_speckle > 0:
                raise ValueError("target_dx_speckle must be positive")
        if self.method == "physical" and self.shape != "uniform":
            raise ValueError("the physical method has a uniform disk source; shape must be 'uniform'")
        if self.envelope is not None and not self.envelope > 0:
            raise ValueError("envelope radius must be positive")

    @property
    def coherence_length(self) -> float:
        """``dx_s``: the target for the spectral method, ``lambda z / D0`` otherwise."""
        if self.method == "plane_wave":
            return math.inf
        if self.target_dx_speckle is not None:
            return float(self.target_dx_speckle)
        return expected_speckle_size(self.wavelength, self.z, self.D0)

    def with_D0(self, D0: float) -> "SpeckleSourceConfig":
        return replace(self, D0=D0)


@dataclass(frozen=True, eq=False)
class SpeckleFrame:
    field: ComplexField
    frame_index: int
    seed: int


def expected_speckle_size(wavelength: float, z: float, D0: float) -> float:
    """Coherence length ``lambda z / D0`` of light from a source of size ``D0``.

    The measured FWHM of the intensity autocovariance is this times
    :data:`DISK_FWHM_FACTOR` (2D) or :data:`SLIT_FWHM_FACTOR` (1D).
    """
    for name, v in (("wavelength", wavelength), ("z", z), ("D0", D0)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    return wavelength * z / D0


def expected_fwhm(cfg: SpeckleSourceConfig, dims: int) -> float:
    """Expected autocovariance FWHM for ``cfg`` on a grid of ``dims`` dimensions."""
    dxs = cfg.coherence_length
    if cfg.method == "spectral" and cfg.shape == "gaussian":
        return GAUSSIAN_FWHM_FACTOR * dxs
    return (DISK_FWHM_FACTOR if dims == 2 else SLIT_FWHM_FACTOR) * dxs


def speckle_count(D: float, dx_speckle: float) -> float:
    """Number of speckles across a diaphragm, ``(D / dx_speckle)**2``."""
    if not (D > 0 and dx_speckle > 0):
        raise ValueError("D and dx_speckle must be positive")
    return (D / dx_speckle) ** 2


def beamsplit(f: ComplexField) -> tuple[ComplexField, ComplexField]:
    """50/50 beam splitter: two identical copies carrying half the power each."""
    half = f.samples / math.sqrt(2.0)
    return f.replace_samples(half), f.replace_samples(half)


def frame_rng(seed: int, frame_index: int) -> np.random.Generator:
    """Counter-based generator for one frame, a pure function of its arguments."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(frame_index),))
    return np.random.Generator(np.random.Philox(ss))


def _cn(rng, shape, var):
    """Circular complex normal samples with variance ``var`` (broadcast)."""
    z = rng.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * np.sqrt(np.asarray(var) / 2.0)


def coherence_kernel(cfg: SpeckleSourceConfig, s) -> np.ndarray:
    """Field coherence ``g(s)`` of the spectral generator along one axis.

    For the uniform shape this is the continuum (unit-band) limit, a sinc
    along one axis of a 1D source.
    """
    s = np.asarray(s, dtype=float)
    dxs = cfg.coherence_length
    if cfg.shape == "gaussian":
        return np.exp(-np.pi * s**2 / (2 * dxs**2))
    return np.sinc(s / dxs)


# ---------------------------------------------------------------------------
# guards


def _check_grid(cfg: SpeckleSourceConfig, grid: Grid, D: float | None):
    if cfg.method == "plane_wave":
        return
    dxs = cfg.coherence_length
    if dxs < MIN_SAMPLES_PER_SPECKLE * grid.dx * (1 - 1e-12):
        raise GuardError(
            f"speckle size {dxs:.4g} m is under {MIN_SAMPLES_PER_SPECKLE:g} samples of {grid.dx:.4g} m; refine the grid"
        )
    if D is not None and grid.extent < MIN_EXTENT_OVER_DIAPHRAGM * D * (1 - 1e-12):
        raise GuardError(
            f"grid extent {grid.extent:.4g} m is under {MIN_EXTENT_OVER_DIAPHRAGM:g}x the diaphragm {D:.4g} m"
        )


# ---------------------------------------------------------------------------
# spectral generator


@dataclass(frozen=True)
class _SpectralPlan:
    dims: int
    n: int
    fft: bool  # True: modes on the FFT lattice, synthesised with ifft
    weights: np.ndarray  # per-mode variance, sums to 1 (FFT order if fft)
    basis: Optional[np.ndarray]  # (n, modes) plane-wave matrix on the lattice path
    freqs: np.ndarray  # mode frequencies along one axis (FFT order if fft)


def _spectral_weights_1d(cfg, freqs, spacing):
    dxs = cfg.coherence_length
    if cfg.shape == "uniform":
        return (np.abs(freqs) <= 1.0 / (2 * dxs) * (1 + 1e-12)).astype(float)
    return np.exp(-2 * np.pi * dxs**2 * freqs**2) * spacing


@lru_cache(maxsize=16)
def _spectral_plan(cfg: SpeckleSourceConfig, grid: Grid) -> _SpectralPlan:
    n, d, L = grid.n, grid.dims, grid.extent
    dxs = cfg.coherence_length
    rho = 1.0 / (2 * dxs)
    m = max(1, math.ceil(_MIN_BAND_MODES / (rho * L)))
    if m == 1:
        fr = grid.frequencies()
        if cfg.shape == "gaussian":
            # exact DFT of the sampled, periodised kernel
            lag = np.fft.fftfreq(n, 1.0 / n) * grid.dx
            w1 = np.clip(np.fft.fft(coherence_kernel(cfg, lag)).real / n, 0, None)
            w = w1 if d == 1 else np.outer(w1, w1)
        elif d == 1:
            w = (np.abs(fr) <= rho * (1 + 1e-12)).astype(float)
        else:
            w = (fr[None, :] ** 2 + fr[:, None] ** 2 <= rho**2 * (1 + 1e-12)).astype(float)
        w = w / w.sum()
        w.flags.writeable = False
        return _SpectralPlan(d, n, True, w, None, fr)
    Lint = m * L
    kmax = int(math.floor(rho * Lint * (1 + 1e-12)))
    if cfg.shape == "gaussian":
        kmax = int(math.ceil(math.sqrt(8 / (2 * math.pi)) * Lint / dxs))  # weights down to exp(-8)
    fk = np.arange(-kmax, kmax + 1) / Lint
    if cfg.shape == "uniform" and d == 2:
        w = (fk[None, :] ** 2 + fk[:, None] ** 2 <= rho**2 * (1 + 1e-12)).astype(float)
    else:
        w1 = _spectral_weights_1d(cfg, fk, 1.0 / Lint)
        w = w1 if d == 1 else np.outer(w1, w1)
    w = w / w.sum()
    w.flags.writeable = False
    B = np.exp(2j * np.pi * np.outer(grid.axis(), fk))
    B.flags.writeable = False
    return _SpectralPlan(d, n, False, w, B, fk)


def _spectral_batch(cfg, grid: Grid, rngs):
    plan = _spectral_plan(cfg, grid)
    coeffs = np.stack([_cn(r, plan.weights.shape, plan.weights) for r in rngs])
    if plan.fft:
        ax = tuple(range(-grid.dims, 0))
        return sfft.ifftn(coeffs, axes=ax, norm="forward")
    B = plan.basis
    if grid.dims == 1:
        return coeffs @ B.T
    return B @ coeffs @ B.T


def generator_coherence(cfg: SpeckleSourceConfig, grid: Grid, s) -> np.ndarray:
    """Exact field coherence ``<E*(x) E(x + s)>`` of the spectral generator on ``grid``.

    1D grids only; ``s`` in metres.  This is the discrete counterpart of
    :func:`coherence_kernel` (periodic on the synthesis lattice) and is what
    the quadrature oracle must use to match Monte Carlo to the last digit.
    """
    if grid.dims != 1:
        raise ValueError("generator_coherence is defined on 1D grids")
    s = np.asarray(s, dtype=float)
    if cfg.method == "plane_wave":
        return np.ones(s.shape, dtype=np.complex128)
    if cfg.method != "spectral":
        raise ValueError("exact coherence is available for the spectral method only")
    plan = _spectral_plan(cfg, grid)
    return np.exp(2j * np.pi * np.multiply.outer(s, plan.freqs)) @ plan.weights


def coherence_blur(u, cfg: SpeckleSourceConfig, grid: Grid) -> np.ndarray:
    """``sum_a u(a) g(b - a)``: convolve ``u`` with the generator coherence.

    Uses the spectral synthesis of ``cfg`` (a physical-method config is
    replaced by its spectral equivalent, which has the same coherence in the
    far-field limit).  The convolution is exact for the discrete generator.
    """
    if cfg.method == "plane_wave":
        return np.full(grid.shape, np.sum(u), dtype=np.complex128)
    if cfg.method == "physical":
        cfg = replace(cfg, method="spectral")
    u = np.asarray(u, dtype=np.complex128)
    plan = _spectral_plan(cfg, grid)
    ax = tuple(range(-grid.dims, 0))
    if plan.fft:
        # modes sit on the FFT lattice, so the convolution is a product there
        spec = sfft.fftn(u, axes=ax) * plan.weights
        return sfft.ifftn(spec, axes=ax, norm="forward")
    B = plan.basis
    if grid.dims == 1:
        return B @ (plan.weights * (B.conj().T @ u))
    return B @ (plan.weights * (B.conj().T @ u @ B.conj())) @ B.T


# ---------------------------------------------------------------------------
# physical generator


@dataclass(frozen=True)
class _PhysicalPlan:
    source_grid: Grid
    source_mask: np.ndarray
    transfer: np.ndarray  # band-limited angular-spectrum transfer function
    crop: tuple
    norm: np.ndarray  # 1 / sqrt(<I>) on the output grid


def _even_fast_len(n):
    n = sfft.next_fast_len(int(n))
    while n % 2:
        n = sfft.next_fast_len(n + 1)
    return n


@lru_cache(maxsize=8)
def _physical_plan(cfg: SpeckleSourceConfig, grid: Grid) -> _PhysicalPlan:
    d, dx = grid.dims, grid.dx
    span = cfg.D0 + grid.extent
    ns = max(_even_fast_len(math.ceil(_SOURCE_MARGIN * span / dx)), grid.n)
    if ns**d > _PHYSICAL_MAX_SAMPLES:
        raise GuardError(f"physical source grid {ns}^{d} exceeds {_PHYSICAL_MAX_SAMPLES} samples; use the spectral method")
    fmax = _BAND_MARGIN * span / (2 * cfg.wavelength * cfg.z)
    if fmax > 1.0 / (2 * dx):
        raise GuardError(
            f"grid pitch {dx:.4g} m cannot carry the {fmax:.4g} 1/m band linking source and grid; "
            "refine dx or use the spectral method"
        )
    sgrid = Grid(ns, dx, d)
    mask = sgrid.radius() <= cfg.D0 / 2 * (1 + 1e-12)
    if not mask.any():
        raise GuardError(f"source diameter {cfg.D0:.4g} m is below the grid pitch")
    fr = sgrid.frequencies()
    f2 = fr**2 if d == 1 else fr[None, :] ** 2 + fr[:, None] ** 2
    kz = np.sqrt(np.maximum(1.0 / cfg.wavelength**2 - f2, 0.0))
    H = np.where(f2 <= fmax**2, np.exp(2j * np.pi * cfg.z * kz), 0.0)
    lo = ns // 2 - grid.n // 2
    crop = (slice(lo, lo + grid.n),) * d
    # <I(x)> = sum over source samples of |K(x - s)|^2, with K the impulse
    # response of the band-limited propagator
    ax = tuple(range(-d, 0))
    k2 = np.abs(sfft.ifftn(H, axes=ax)) ** 2
    mean = sfft.ifftn(sfft.fftn(k2, axes=ax) * sfft.fftn(sfft.ifftshift(mask.astype(float)), axes=ax), axes=ax).real
    mean = sfft.fftshift(mean)[crop]
    norm = 1.0 / np.sqrt(mean)
    for a in (mask, H, norm):
        a.flags.writeable = False
    return _PhysicalPlan(sgrid, mask, H, crop, norm)


def _physical_batch(cfg, grid: Grid, rngs):
    plan = _physical_plan(cfg, grid)
    sg = plan.source_grid
    ax = tuple(range(-grid.dims, 0))
    out = np.empty((len(rngs),) + grid.shape, dtype=np.complex128)
    for i, r in enumerate(rngs):
        src = np.zeros(sg.shape, dtype=np.complex128)
        src[plan.source_mask] = _cn(r, (int(plan.source_mask.sum()),), 1.0)
        e = sfft.ifftn(sfft.fftn(sfft.ifftshift(src), axes=ax) * plan.transfer, axes=ax)
        out[i] = sfft.fftshift(e)[plan.crop] * plan.norm
    return out


# ---------------------------------------------------------------------------
# public generators


def _envelope(cfg, grid):
    if cfg.envelope is None:
        return None
    return np.exp(-grid.radius() ** 2 / cfg.envelope**2)


def generate_speckle_batch(
    cfg: SpeckleSourceConfig, grid: Grid, seed: int, frame_indices: Sequence[int], D: float | None = None
) -> np.ndarray:
    """Samples of several frames, shape ``(len(frame_indices),) + grid.shape``.

    Frame ``k`` of the batch is bit-identical to
    ``generate_speckle_frame(cfg, grid, seed, frame_indices[k]).field.samples``.

    Raises
    ------
    GuardError
        Speckle narrower than two samples, grid narrower than twice ``D``, or
        (physical method) a source grid that is too large or too coarse.
    """
    _check_grid(cfg, grid, D)
    idx = [int(i) for i in frame_indices]
    if cfg.method == "plane_wave":
        out = np.ones((len(idx),) + grid.shape, dtype=np.complex128)
    else:
        rngs = [frame_rng(seed, i) for i in idx]
        if cfg.method == "spectral":
            out = _spectral_batch(cfg, grid, rngs)
        else:
            out = _physical_batch(cfg, grid, rngs)
    env = _envelope(cfg, grid)
    if env is not None:
        out = out * env
    return out


def generate_speckle_frame(
    cfg: SpeckleSourceConfig, grid: Grid, seed: int, frame_index: int, D: float | None = None
) -> SpeckleFrame:
    """One speckle realisation at the diaphragm plane.

    The field is circular complex Gaussian with ``<|E|^2> = 1`` and, for the
    default uniform source, an intensity autocovariance FWHM of
    ``expected_fwhm(cfg, grid.dims)``.  ``(cfg, grid, seed, frame_index)``
    determine the samples bit for bit.
    """
    s = generate_speckle_batch(cfg, grid, seed, [frame_index], D)[0]
    return SpeckleFrame(ComplexField(grid, s, cfg.wavelength), int(frame_index), int(seed))
