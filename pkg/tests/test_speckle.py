import math

import numpy as np
import pytest

from ghostsim import (
    ComplexField,
    FourierSystem,
    FreeSpace,
    Grid,
    GuardError,
    IntensityMap,
    OpticalTrain,
    SpeckleSourceConfig,
    apply_train,
    autocorrelation_width,
    expected_speckle_size,
    generate_speckle_batch,
    generate_speckle_frame,
    intensity,
    speckle_contrast,
    speckle_count,
    total_power,
)
from ghostsim.field import AutocovarianceAccumulator
from ghostsim.speckle import (
    DEFAULT_WAVELENGTH,
    DEFAULT_Z,
    DISK_FWHM_FACTOR,
    SLIT_FWHM_FACTOR,
    beamsplit,
    coherence_kernel,
    expected_fwhm,
    generator_coherence,
)


# --- bookkeeping ---------------------------------------------------------------


def test_expected_size_at_headline_source_sizes():
    # 10 mm source: about 21 um; 0.1 mm source: about 2.1 mm
    assert expected_speckle_size(DEFAULT_WAVELENGTH, DEFAULT_Z, 10e-3) == pytest.approx(21e-6, rel=0.01)
    assert expected_speckle_size(DEFAULT_WAVELENGTH, DEFAULT_Z, 0.1e-3) == pytest.approx(2.1e-3, rel=0.01)


def test_expected_size_inverse_in_source_size():
    a = expected_speckle_size(532e-9, 0.395, 2e-3)
    assert expected_speckle_size(532e-9, 0.395, 4e-3) == a / 2


def test_expected_size_rejects_nonpositive():
    with pytest.raises(ValueError):
        expected_speckle_size(532e-9, 0.0, 1e-3)


def test_speckle_count_examples():
    assert speckle_count(3e-3, 21e-6) == pytest.approx(2.0e4, rel=0.03)
    assert speckle_count(3e-3, 2.1e-3) == pytest.approx(2.0, rel=0.03)
    assert speckle_count(1e-3, 1e-3) == 1.0


def test_fwhm_factors_are_half_maximum_points():
    from scipy.special import j1

    # the factors are full widths; the half maximum sits at half of them
    r = DISK_FWHM_FACTOR / 2
    assert (2 * j1(math.pi * r) / (math.pi * r)) ** 2 == pytest.approx(0.5, abs=1e-12)
    assert np.sinc(SLIT_FWHM_FACTOR / 2) ** 2 == pytest.approx(0.5, abs=1e-12)


# --- configuration ----------------------------------------------------------------


@pytest.mark.parametrize(
    "kw",
    [
        dict(method="laser"),
        dict(D0=0.0),
        dict(z=-1.0),
        dict(wavelength=0.0),
        dict(method="physical", target_dx_speckle=1e-6),
        dict(method="physical", shape="gaussian"),
        dict(shape="square"),
        dict(envelope=-1.0),
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SpeckleSourceConfig(**kw)


def test_guards():
    cfg = SpeckleSourceConfig(target_dx_speckle=3e-6)
    with pytest.raises(GuardError):
        generate_speckle_frame(cfg, Grid(64, 2e-6), 0, 0)  # 1.5 samples per speckle
    with pytest.raises(GuardError):
        generate_speckle_frame(cfg, Grid(64, 1e-6), 0, 0, D=40e-6)  # grid < 2 D
    generate_speckle_frame(cfg, Grid(64, 1e-6), 0, 0, D=32e-6)


# --- generated statistics -------------------------------------------------------------


def test_frames_are_deterministic_and_order_independent():
    g = Grid(128, 1e-6, 2)
    cfg = SpeckleSourceConfig(target_dx_speckle=5e-6)
    batch = generate_speckle_batch(cfg, g, 42, [3, 1, 2])
    one = generate_speckle_frame(cfg, g, 42, 1).field.samples
    assert np.array_equal(batch[1], one)
    assert not np.array_equal(batch[0], batch[1])
    assert not np.array_equal(one, generate_speckle_frame(cfg, g, 43, 1).field.samples)


@pytest.mark.parametrize("method", ["spectral", "physical"])
def test_contrast_is_unity(method):
    g = Grid(2048, 3e-6)
    cfg = SpeckleSourceConfig(method=method, D0=10e-3)
    frames = generate_speckle_batch(cfg, g, 1, range(50))
    maps = [IntensityMap(g, np.abs(e) ** 2) for e in frames]
    assert speckle_contrast(maps) == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("dims, factor", [(1, SLIT_FWHM_FACTOR), (2, DISK_FWHM_FACTOR)])
def test_width_matches_expected_fwhm(dims, factor):
    n = 4096 if dims == 1 else 256
    g = Grid(n, 3e-6, dims)
    cfg = SpeckleSourceConfig(D0=10e-3)
    frames = generate_speckle_batch(cfg, g, 2, range(100 if dims == 1 else 10))
    w = autocorrelation_width([IntensityMap(g, np.abs(e) ** 2) for e in frames])
    assert expected_fwhm(cfg, dims) == pytest.approx(factor * cfg.coherence_length)
    assert w == pytest.approx(expected_fwhm(cfg, dims), rel=0.10)


def _measured(cfg, grid, frames, seed=3):
    acc = AutocovarianceAccumulator(grid)
    vals = []
    for s in range(0, frames, 50):
        E = generate_speckle_batch(cfg, grid, seed, range(s, min(s + 50, frames)))
        acc.add(np.abs(E) ** 2)
        vals.append(np.abs(E).ravel() ** 2)
    v = np.concatenate(vals)
    return acc.width(), v.std() / v.mean()


def test_physical_and_spectral_agree():
    g = Grid(2048, 3e-6)
    ws, cs = _measured(SpeckleSourceConfig(method="spectral", D0=10e-3), g, 200)
    wp, cp = _measured(SpeckleSourceConfig(method="physical", D0=10e-3), g, 200)
    assert wp == pytest.approx(ws, rel=0.10)
    assert 0.95 <= cs <= 1.05 and 0.95 <= cp <= 1.05


@pytest.mark.parametrize("method", ["spectral", "physical"])
def test_van_cittert_zernike_scaling_1d(method):
    # 1D: size x D0 stays put while the source shrinks a hundredfold
    g = Grid(16384, 3e-6)
    products = []
    for D0 in (10e-3, 1e-3, 0.1e-3):
        frames = 100 if D0 > 0.5e-3 else 300
        w, _ = _measured(SpeckleSourceConfig(method=method, D0=D0), g, frames)
        products.append(w * D0)
    products = np.array(products)
    assert products.max() / products.min() <= 1.15


@pytest.mark.parametrize("method", ["spectral", "physical"])
def test_mean_intensity_is_flat_across_diaphragm(method):
    g = Grid(2048, 3e-6)
    D = 3e-3
    frames = generate_speckle_batch(SpeckleSourceConfig(method=method, D0=10e-3), g, 4, range(400), D=D)
    mean = (np.abs(frames) ** 2).mean(axis=0)
    inside = mean[np.abs(g.axis()) <= D / 2]
    # ten bins, each many speckles wide
    bins = np.array([b.mean() for b in np.array_split(inside, 10)])
    assert bins.max() / bins.min() - 1 < 0.10


def test_generator_coherence_matches_kernel_in_continuum_limit():
    g = Grid(4096, 1e-6)
    cfg = SpeckleSourceConfig(target_dx_speckle=10e-6, shape="gaussian")
    s = np.linspace(0, 30e-6, 31)
    assert np.allclose(generator_coherence(cfg, g, s).real, coherence_kernel(cfg, s), atol=1e-6)


def test_generator_coherence_matches_monte_carlo():
    g = Grid(256, 1e-6)
    cfg = SpeckleSourceConfig(target_dx_speckle=6e-6)
    E = generate_speckle_batch(cfg, g, 5, range(4000))
    lags = np.arange(0, 12)
    est = np.array([np.mean(np.conj(E) * np.roll(E, -k, axis=1)) for k in lags])
    exact = generator_coherence(cfg, g, lags * g.dx)
    assert np.max(np.abs(est - exact)) < 0.01


def test_envelope_shapes_mean_intensity():
    g = Grid(512, 2e-6)
    cfg = SpeckleSourceConfig(target_dx_speckle=6e-6, envelope=200e-6)
    E = generate_speckle_batch(cfg, g, 6, range(2000))
    mean = (np.abs(E) ** 2).mean(axis=0)
    r = g.axis()
    expected = np.exp(-2 * r**2 / 200e-6**2)
    assert np.max(np.abs(mean - expected)) < 0.15


def test_plane_wave_is_unit_field():
    g = Grid(32, 1e-6, 2)
    E = generate_speckle_frame(SpeckleSourceConfig(method="plane_wave"), g, 0, 0).field.samples
    assert np.array_equal(E, np.ones(g.shape))


# --- beam splitter ------------------------------------------------------------------


def _field(seed=0):
    g = Grid(256, 2e-6)
    return generate_speckle_frame(SpeckleSourceConfig(target_dx_speckle=8e-6), g, seed, 0).field


def test_beamsplit_halves_power():
    f = _field()
    a, b = beamsplit(f)
    p = total_power(intensity(f))
    assert total_power(intensity(a)) == pytest.approx(p / 2, rel=1e-14)
    assert total_power(intensity(b)) == pytest.approx(p / 2, rel=1e-14)


def test_beamsplit_copies_are_identical():
    a, b = beamsplit(_field(1))
    assert np.array_equal(intensity(a).values, intensity(b).values)


def test_beamsplit_of_zero_field():
    g = Grid(8, 1e-6)
    a, b = beamsplit(ComplexField(g, np.zeros(8), 532e-9))
    assert not a.samples.any() and not b.samples.any()


@pytest.mark.filterwarnings("ignore::ghostsim.propagation.AliasingWarning")
def test_split_beams_stay_correlated_after_identical_trains():
    train = OpticalTrain((FreeSpace(1e-4), FourierSystem(0.2)))
    a, b = beamsplit(_field(2))
    A, B = apply_train(a, train).samples, apply_train(b, train).samples
    rho = np.abs(np.vdot(A, B)) / np.sqrt(np.vdot(A, A).real * np.vdot(B, B).real)
    assert rho == pytest.approx(1.0, abs=1e-14)
    assert np.array_equal(A, B)
