"""Intensity-fluctuation correlation: Monte Carlo estimate, quadrature and oracles.

Conventions
-----------
``Gamma[a, b] = <E*(a) E(b)>`` at the object plane.  With impulse matrices
``h1``, ``h2`` (quadrature weight included) the classical correlation is

    G_cl = | conj(h1) @ Gamma @ h2.T |**2

and the entangled one drops the conjugate on ``h1``.  For circular Gaussian
fields the Monte Carlo estimate ``<I1 I2> - <I1><I2>`` converges to
``|<E1* E2>|**2`` which is exactly ``G_cl`` (Gaussian moment theorem).

The accumulator stores the outer product only for selected *probe* samples of
each arm.  In 1D the probes default to every sample (full matrix); for 2D
maps pass the flat indices of the line you want, e.g. the x axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import GridMismatchError, GuardError, InsufficientStatisticsError
from .field import Grid, IntensityMap
from .propagation import IMPULSE_MATRIX_LIMIT, ImpulseResponseMatrix

__all__ = [
    "CorrelationAccumulator",
    "CorrelationMap",
    "FieldCrossAccumulator",
    "FieldCorrelationModel",
    "FringeFit",
    "accumulate",
    "merge",
    "finalize",
    "jackknife_se",
    "analytic_g_classical",
    "analytic_g_entangled",
    "gaussian_moment_oracle",
    "cut",
    "fringe_visibility",
    "normalized_rms",
    "rank_ratio",
    "cosine_similarity",
    "axis_probe",
]


def axis_probe(grid: Grid) -> np.ndarray:
    """Flat indices of the samples on the x axis (all samples in 1D)."""
    if grid.dims == 1:
        return np.arange(grid.n)
    return grid.center_index * grid.n + np.arange(grid.n)


def _line_grid(grid: Grid) -> Grid:
    return Grid(grid.n, grid.dx, 1)


def _as_batch(I, shape):
    if isinstance(I, IntensityMap):
        I = I.values
    a = np.asarray(I, dtype=np.float64)
    if a.shape == shape:
        a = a[None]
    if a.shape[1:] != shape:
        raise GridMismatchError(f"intensity shape {a.shape[1:]} does not match accumulator shape {shape}")
    return a.reshape(a.shape[0], -1)


@dataclass(eq=False)
class CorrelationAccumulator:
    """Running sums for ``G = <I1 I2> - <I1><I2>``.

    Parameters
    ----------
    grid1, grid2 : Grid
        Detector grids of the two arms.
    probe1, probe2 : int arrays, optional
        Flat sample indices whose cross products are accumulated; all samples
        by default, which is only sensible in 1D.
    diagonal : bool
        Also accumulate ``sum(I1 * I2)`` pixel by pixel (same grid shape).
    """

    grid1: Grid
    grid2: Grid
    probe1: Optional[np.ndarray] = None
    probe2: Optional[np.ndarray] = None
    diagonal: bool = False
    frames: int = 0
    sum_I1: np.ndarray = dc_field(default=None, repr=False)
    sum_I2: np.ndarray = dc_field(default=None, repr=False)
    sum_I1I2: np.ndarray = dc_field(default=None, repr=False)
    sum_diag: Optional[np.ndarray] = dc_field(default=None, repr=False)

    def __post_init__(self):
        self.probe1 = np.arange(self.grid1.size) if self.probe1 is None else np.asarray(self.probe1, dtype=np.intp)
        self.probe2 = np.arange(self.grid2.size) if self.probe2 is None else np.asarray(self.probe2, dtype=np.intp)
        for p, g in ((self.probe1, self.grid1), (self.probe2, self.grid2)):
            if p.ndim != 1 or len(p) == 0 or p.min() < 0 or p.max() >= g.size:
                raise IndexError("probe indices out of range")
        if len(self.probe1) * len(self.probe2) > IMPULSE_MATRIX_LIMIT:
            raise GuardError("correlation matrix too large; select probe samples")
        if self.diagonal and self.grid1.shape != self.grid2.shape:
            raise GridMismatchError("diagonal accumulation needs equal grid shapes")
        if self.sum_I1 is None:
            self.sum_I1 = np.zeros(self.grid1.size)
            self.sum_I2 = np.zeros(self.grid2.size)
            self.sum_I1I2 = np.zeros((len(self.probe1), len(self.probe2)))
            self.sum_diag = np.zeros(self.grid1.size) if self.diagonal else None

    def empty_like(self) -> "CorrelationAccumulator":
        return CorrelationAccumulator(self.grid1, self.grid2, self.probe1, self.probe2, self.diagonal)

    def _compatible(self, other):
        return (
            self.grid1 == other.grid1
            and self.grid2 == other.grid2
            and np.array_equal(self.probe1, other.probe1)
            and np.array_equal(self.probe2, other.probe2)
            and self.diagonal == other.diagonal
        )

    def accumulate(self, I1, I2) -> "CorrelationAccumulator":
        """Add one frame or a batch ``(frames, *shape)`` of frames, in place."""
        a = _as_batch(I1, self.grid1.shape)
        b = _as_batch(I2, self.grid2.shape)
        if a.shape[0] != b.shape[0]:
            raise ValueError("arm 1 and arm 2 batches differ in length")
        # per-batch partial sums are added to the totals (pairwise-style
        # summation keeps the error independent of the frame count)
        self.sum_I1 += a.sum(axis=0)
        self.sum_I2 += b.sum(axis=0)
        self.sum_I1I2 += a[:, self.probe1].T @ b[:, self.probe2]
        if self.diagonal:
            self.sum_diag += np.einsum("ij,ij->j", a, b)
        self.frames += a.shape[0]
        return self

    def merge(self, other: "CorrelationAccumulator") -> "CorrelationAccumulator":
        """New accumulator holding the frames of both operands."""
        if not self._compatible(other):
            raise GridMismatchError("cannot merge accumulators with different grids or probes")
        out = self.empty_like()
        out.frames = self.frames + other.frames
        out.sum_I1 = self.sum_I1 + other.sum_I1
        out.sum_I2 = self.sum_I2 + other.sum_I2
        out.sum_I1I2 = self.sum_I1I2 + other.sum_I1I2
        if self.diagonal:
            out.sum_diag = self.sum_diag + other.sum_diag
        return out

    def finalize(self) -> "CorrelationMap":
        """``G = sum_I1I2 / N - mean1 mean2^T`` on the probe samples."""
        if self.frames < 2:
            raise InsufficientStatisticsError(f"need at least 2 frames for a correlation, have {self.frames}")
        N = self.frames
        m1 = self.sum_I1 / N
        m2 = self.sum_I2 / N
        G = self.sum_I1I2 / N - np.outer(m1[self.probe1], m2[self.probe2])
        diag = None
        if self.diagonal:
            diag = (self.sum_diag / N - m1 * m2).reshape(self.grid1.shape)
        return CorrelationMap(
            G,
            self._probe_grid(self.grid1, self.probe1),
            self._probe_grid(self.grid2, self.probe2),
            N,
            mean1=m1.reshape(self.grid1.shape),
            mean2=m2.reshape(self.grid2.shape),
            diagonal=diag,
        )

    @staticmethod
    def _probe_grid(grid, probe):
        if grid.dims == 1 and len(probe) == grid.n:
            return grid
        if grid.dims == 2 and np.array_equal(probe, axis_probe(grid)):
            return _line_grid(grid)
        return None


@dataclass(frozen=True, eq=False)
class CorrelationMap:
    """Correlation ``G[i1, i2]`` between probe samples of the two arms.

    ``x1_grid``/``x2_grid`` are 1D grids when the probes are a full line,
    otherwise None.  ``mean1``/``mean2`` are the full mean intensity maps
    (Monte Carlo only) and ``diagonal`` is ``G(x, x)`` over the whole frame
    when requested.
    """

    G: np.ndarray
    x1_grid: Optional[Grid]
    x2_grid: Optional[Grid]
    frames_used: int
    mean1: Optional[np.ndarray] = None
    mean2: Optional[np.ndarray] = None
    diagonal: Optional[np.ndarray] = None

    def peak_normalized(self) -> np.ndarray:
        peak = np.max(np.abs(self.G))
        return self.G / peak if peak > 0 else np.array(self.G)


def accumulate(acc: CorrelationAccumulator, I1, I2) -> CorrelationAccumulator:
    return acc.accumulate(I1, I2)


def merge(a: CorrelationAccumulator, b: CorrelationAccumulator) -> CorrelationAccumulator:
    return a.merge(b)


def finalize(acc: CorrelationAccumulator) -> CorrelationMap:
    return acc.finalize()


def _merge_all(accs):
    out = accs[0].empty_like()
    for a in accs:
        out = out.merge(a)
    return out


def jackknife_se(
    blocks: Sequence, transform: Callable[[np.ndarray], np.ndarray] | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Delete-one-block jackknife of ``G`` (or ``transform(G)``).

    Parameters
    ----------
    blocks : sequence of CorrelationAccumulator or FieldCrossAccumulator
        Accumulators over disjoint, contiguous frame blocks.
    transform : callable, optional
        Applied to each ``G`` before averaging, e.g. peak normalisation.

    Returns
    -------
    estimate, se : ndarray
        The full-sample estimate and its standard error.
    """
    B = len(blocks)
    if B < 2:
        raise InsufficientStatisticsError("jackknife needs at least two blocks")
    transform = transform or (lambda g: g)
    total = _merge_all(blocks)
    full = transform(total.finalize().G)
    loo = []
    for b in range(B):
        rest = _merge_all([blk for i, blk in enumerate(blocks) if i != b])
        loo.append(transform(rest.finalize().G))
    loo = np.stack(loo)
    se = np.sqrt((B - 1) / B * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))
    return full, se


# ---------------------------------------------------------------------------
# field correlation models and quadrature


def _gaussian_delta(s, sigma):
    return np.exp(-(s**2) / (2 * sigma**2)) / (math.sqrt(2 * math.pi) * sigma)


@dataclass(frozen=True, eq=False)
class FieldCorrelationModel:
    """Object-plane field correlation ``Gamma[a, b]`` on a 1D grid.

    classical: ``Gamma = conj(A(a)) A(b) g(b - a)``, with ``g`` a Gaussian of
    width ``dx_n`` (``exp(-pi s^2 / (2 dx_n^2))``) or any callable.
    entangled: ``Gamma = A(a) delta_sigma(a - b)``, a unit-area Gaussian of
    standard deviation ``sigma`` standing in for the two-photon delta.

    ``scale`` multiplies the whole kernel (0.5 for one beam-splitter port).
    """

    kind: str
    grid: Grid
    envelope: np.ndarray
    kernel: Optional[Callable] = None
    dx_n: Optional[float] = None
    sigma: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("classical", "entangled"):
            raise ValueError(f"kind must be 'classical' or 'entangled', got {self.kind!r}")
        if self.grid.dims != 1:
            raise GridMismatchError("field correlation models are 1D")
        A = np.asarray(self.envelope, dtype=np.complex128)
        if A.shape != self.grid.shape:
            raise GridMismatchError("envelope does not match grid")
        object.__setattr__(self, "envelope", A)
        if self.kind == "classical" and self.kernel is None and not (self.dx_n and self.dx_n > 0):
            raise ValueError("classical model needs dx_n or a kernel")
        if self.kind == "entangled" and self.sigma is None:
            object.__setattr__(self, "sigma", self.grid.dx)

    @classmethod
    def classical(cls, grid, envelope, dx_n=None, kernel=None, scale=1.0):
        return cls("classical", grid, envelope, kernel=kernel, dx_n=dx_n, scale=scale)

    @classmethod
    def entangled(cls, grid, envelope, sigma=None, scale=1.0):
        return cls("entangled", grid, envelope, sigma=sigma, scale=scale)

    def g(self, s):
        if self.kernel is not None:
            return np.asarray(self.kernel(s))
        return np.exp(-np.pi * np.asarray(s) ** 2 / (2 * self.dx_n**2))

    def matrix(self) -> np.ndarray:
        x = self.grid.axis()
        s = x[None, :] - x[:, None]  # b - a
        A = self.envelope
        if self.kind == "classical":
            return self.scale * np.conj(A)[:, None] * A[None, :] * self.g(s)
        return self.scale * A[:, None] * _gaussian_delta(s, self.sigma)


def _check_pair(model, h1, h2):
    if h1.in_grid != model.grid or h2.in_grid != model.grid:
        raise GridMismatchError("impulse matrices must start on the model grid")
    n = model.grid.n
    if n * n > IMPULSE_MATRIX_LIMIT or h1.out_grid.n * h2.out_grid.n > IMPULSE_MATRIX_LIMIT:
        raise GuardError("quadrature exceeds the matrix size limit")


def _quadrature(M, h1, h2, normalize):
    G = np.abs(M) ** 2
    cm = CorrelationMap(G, h1.out_grid, h2.out_grid, 0)
    if normalize:
        cm = CorrelationMap(cm.peak_normalized(), h1.out_grid, h2.out_grid, 0)
    return cm


def analytic_g_classical(
    model: FieldCorrelationModel, h1: ImpulseResponseMatrix, h2: ImpulseResponseMatrix, normalize: bool = True
) -> CorrelationMap:
    """``|sum h1*(x1, a) h2(x2, b) Gamma(a, b)|^2``, peak-normalised by default."""
    _check_pair(model, h1, h2)
    M = np.conj(h1.entries) @ model.matrix() @ h2.entries.T
    return _quadrature(M, h1, h2, normalize)


def analytic_g_entangled(
    model: FieldCorrelationModel, h1: ImpulseResponseMatrix, h2: ImpulseResponseMatrix, normalize: bool = True
) -> CorrelationMap:
    """``|sum h1(x1, a) h2(x2, b) Gamma(a, b)|^2``, peak-normalised by default."""
    _check_pair(model, h1, h2)
    M = h1.entries @ model.matrix() @ h2.entries.T
    return _quadrature(M, h1, h2, normalize)


# ---------------------------------------------------------------------------
# Gaussian moment oracle


@dataclass(eq=False)
class FieldCrossAccumulator:
    """Running ``sum conj(E1)^T E2`` over frames (for the moment oracle)."""

    n1: int
    n2: int
    frames: int = 0
    sum_cross: np.ndarray = dc_field(default=None, repr=False)

    def __post_init__(self):
        if self.sum_cross is None:
            self.sum_cross = np.zeros((self.n1, self.n2), dtype=np.complex128)

    def empty_like(self):
        return FieldCrossAccumulator(self.n1, self.n2)

    def accumulate(self, E1, E2):
        a = np.atleast_2d(np.asarray(E1, dtype=np.complex128))
        b = np.atleast_2d(np.asarray(E2, dtype=np.complex128))
        if a.shape[1] != self.n1 or b.shape[1] != self.n2 or a.shape[0] != b.shape[0]:
            raise GridMismatchError("field batch shapes do not match the accumulator")
        self.sum_cross += np.conj(a).T @ b
        self.frames += a.shape[0]
        return self

    def merge(self, other):
        if (self.n1, self.n2) != (other.n1, other.n2):
            raise GridMismatchError("cannot merge cross accumulators of different sizes")
        out = self.empty_like()
        out.frames = self.frames + other.frames
        out.sum_cross = self.sum_cross + other.sum_cross
        return out

    def finalize(self) -> CorrelationMap:
        if self.frames < 2:
            raise InsufficientStatisticsError(f"need at least 2 frames, have {self.frames}")
        C = self.sum_cross / self.frames
        return CorrelationMap(np.abs(C) ** 2, None, None, self.frames)


def gaussian_moment_oracle(E1, E2, normalize: bool = True) -> CorrelationMap:
    """``|<E1*(x1) E2(x2)>|^2`` from field frames ``(frames, n)``.

    Accepts sequences of ComplexField or 2D arrays.
    """
    def rows(E):
        if isinstance(E, np.ndarray):
            return E
        return np.stack([getattr(e, "samples", e) for e in E])

    a, b = rows(E1), rows(E2)
    acc = FieldCrossAccumulator(a.shape[-1], b.shape[-1]).accumulate(a, b)
    cm = acc.finalize()
    if normalize:
        cm = CorrelationMap(cm.peak_normalized(), None, None, cm.frames_used)
    return cm


# ---------------------------------------------------------------------------
# profiles and metrics


def cut(map: CorrelationMap, axis, fixed_index: int) -> np.ndarray:
    """Row or column of ``G``.

    ``axis="x2"`` scans the arm-2 detector with ``x1`` fixed (a row);
    ``axis="x1"`` scans arm 1 with ``x2`` fixed.
    """
    G = map.G
    if axis in ("x2", 1):
        if not 0 <= fixed_index < G.shape[0]:
            raise IndexError(f"x1 index {fixed_index} out of range")
        return np.array(G[fixed_index, :])
    if axis in ("x1", 0):
        if not 0 <= fixed_index < G.shape[1]:
            raise IndexError(f"x2 index {fixed_index} out of range")
        return np.array(G[:, fixed_index])
    raise ValueError(f"axis must be 'x1' or 'x2', got {axis!r}")


class FringeFit(NamedTuple):
    visibility: float
    period: float
    found: bool
    raw: float


_SCAN = np.linspace(0.85, 1.15, 121)
_ITERATIONS = 30


def fringe_visibility(
    profile,
    expected_period: float,
    x=None,
    exclude: float = 0.0,
    center: float = 0.0,
    periods: float = 3.0,
    degree: int = 4,
) -> FringeFit:
    """Visibility of cosine fringes riding on a slowly varying envelope.

    The profile inside ``|x - center| <= periods * expected_period`` (minus
    ``|x - center| < exclude``, e.g. a zero-order spike) is fitted by

        m(x) * (1 + c cos(2 pi f x) + s sin(2 pi f x))

    with ``m`` a polynomial of ``degree``.  ``V = hypot(c, s)`` is exactly
    ``(max - min) / (max + min)`` of the envelope-normalised fringes.  The
    fringe frequency is the least-squares optimum on a scan of +-15% around
    ``1 / expected_period``.

    Returns
    -------
    FringeFit
        ``found`` is False for a flat profile or when the optimum sits on the
        edge of the scan (no fringe near the expected period); visibility is
        then reported as 0.  ``raw`` is the fitted modulation regardless.
    """
    p = np.asarray(profile, dtype=float)
    if p.ndim != 1:
        raise ValueError("profile must be 1D")
    if not np.all(np.isfinite(p)):
        raise ValueError("profile must be finite")
    xs = np.arange(len(p), dtype=float) - len(p) // 2 if x is None else np.asarray(x, dtype=float)
    if xs.shape != p.shape:
        raise ValueError("x and profile differ in length")
    if not expected_period > 0:
        raise ValueError("expected_period must be positive")
    half = periods * expected_period
    r = np.abs(xs - center)
    sel = (r <= half) & (r >= exclude)
    covered = (min(xs.max(), center + half) - max(xs.min(), center - half)) / expected_period
    if covered < 3.0 - 1e-9 or sel.sum() < 4 * (degree + 3):
        raise ValueError("fringe window must span at least 3 periods")
    xx = xs[sel] - center
    pp = p[sel]
    if np.ptp(pp) <= 1e-12 * max(np.abs(pp).max(), 1e-300):
        return FringeFit(0.0, float(expected_period), False, 0.0)
    B = np.stack([(xx / half) ** j for j in range(degree + 1)], axis=1)

    # alternating least squares, all scan frequencies at once
    ph = 2 * np.pi * np.outer(_SCAN / expected_period, xx)
    c, s = np.cos(ph), np.sin(ph)
    cs = np.zeros((len(_SCAN), 2))
    nb = degree + 1
    BB = (B[:, :, None] * B[:, None, :]).reshape(len(xx), nb * nb)
    ridge = 1e-12 * np.eye(nb)
    for _ in range(_ITERATIONS):
        mod = 1 + cs[:, :1] * c + cs[:, 1:] * s
        lhs = ((mod * mod) @ BB).reshape(-1, nb, nb) + ridge
        rhs = (mod * pp) @ B
        m = np.linalg.solve(lhs, rhs[..., None])[..., 0] @ B.T
        mc, ms = m * c, m * s
        r = pp - m
        a11 = np.einsum("fp,fp->f", mc, mc)
        a12 = np.einsum("fp,fp->f", mc, ms)
        a22 = np.einsum("fp,fp->f", ms, ms)
        b1 = np.einsum("fp,fp->f", mc, r)
        b2 = np.einsum("fp,fp->f", ms, r)
        det = a11 * a22 - a12 * a12
        det = np.where(np.abs(det) > 0, det, np.inf)
        cs = np.stack([(a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det], axis=1)
    resid = np.sum((m * (1 + cs[:, :1] * c + cs[:, 1:] * s) - pp) ** 2, axis=1)
    k = int(np.argmin(resid))
    best = (resid[k], float(np.hypot(*cs[k])), k)
    _, v, k = best
    v = min(max(v, 0.0), 1.0)
    period = float(expected_period / _SCAN[k])
    found = 0 < k < len(_SCAN) - 1
    return FringeFit(v if found else 0.0, period, found, v)


def normalized_rms(a, b, mask=None) -> float:
    """RMS difference of two profiles after scaling each to unit maximum.

    ``mask`` restricts both the normalisation and the comparison.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("profiles differ in shape")
    if mask is not None:
        a, b = a[mask], b[mask]
    if a.size == 0:
        raise ValueError("empty comparison window")
    ma, mb = np.max(a), np.max(b)
    if ma <= 0 or mb <= 0:
        raise ValueError("profiles must have a positive maximum")
    return float(np.sqrt(np.mean((a / ma - b / mb) ** 2)))


def rank_ratio(G) -> float:
    """Second over first singular value."""
    s = np.linalg.svd(np.asarray(G), compute_uv=False)
    if s[0] == 0:
        return 0.0
    return float(s[1] / s[0]) if len(s) > 1 else 0.0


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(u @ v / (nu * nv))
