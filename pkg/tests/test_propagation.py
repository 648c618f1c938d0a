import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ghostsim import (
    Aperture,
    ComplexField,
    FourierSystem,
    FreeSpace,
    Grid,
    GuardError,
    OpticalTrain,
    PhaseStep,
    ThinLens,
    apply_train,
    impulse_matrix,
    intensity,
    make_object,
    propagate_angular_spectrum,
    total_power,
)
from ghostsim.errors import GridMismatchError
from ghostsim.propagation import (
    AliasingWarning,
    apply_element,
    apply_fourier_system,
    fourier_output_grid,
    max_unaliased_extent,
)

WL = 532e-9


def _random_field(grid, seed, band=0.25):
    """Smooth random field: white noise low-passed to ``band`` of Nyquist."""
    rng = np.random.default_rng(seed)
    s = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    spec = np.fft.fftn(s)
    f = np.abs(np.fft.fftfreq(grid.n))
    keep = f <= band / 2
    mask = keep if grid.dims == 1 else keep[None, :] & keep[:, None]
    return ComplexField(grid, np.fft.ifftn(spec * mask), WL)


def _gaussian(grid, w, wl=WL):
    r = grid.radius()
    return ComplexField(grid, np.exp(-(r**2) / w**2), wl)


def _rel_rms(a, b):
    return float(np.sqrt(np.mean(np.abs(a - b) ** 2) / np.mean(np.abs(b) ** 2)))


# --- angular spectrum -------------------------------------------------------


def test_zero_distance_is_identity():
    f = _random_field(Grid(128, 1e-6), 0)
    assert np.array_equal(propagate_angular_spectrum(f, 0.0).samples, f.samples)


@pytest.mark.parametrize("dims", [1, 2])
def test_forward_then_backward_restores_field(dims):
    f = _random_field(Grid(128, 2e-6, dims), 1)
    out = propagate_angular_spectrum(propagate_angular_spectrum(f, 3e-3, False), -3e-3, False)
    assert _rel_rms(out.samples, f.samples) <= 1e-10


@pytest.mark.parametrize("dims", [1, 2])
def test_angular_spectrum_conserves_power(dims):
    f = _random_field(Grid(128, 2e-6, dims), 2)
    out = propagate_angular_spectrum(f, 1e-3, False)
    p0 = total_power(intensity(f))
    assert abs(total_power(intensity(out)) - p0) / p0 <= 1e-10


def test_gaussian_beam_width():
    w0 = 50e-6
    g = Grid(4096, 2e-6, 1)
    z = 30e-3
    out = propagate_angular_spectrum(_gaussian(g, w0), z)
    I = intensity(out).values
    x = g.axis()
    # I ~ exp(-2 x^2 / w^2) has second moment w^2 / 4
    w = 2 * math.sqrt(np.sum(I * x**2) / np.sum(I))
    expected = w0 * math.sqrt(1 + (WL * z / (math.pi * w0**2)) ** 2)
    assert w == pytest.approx(expected, rel=0.01)


def test_nan_input_rejected():
    s = np.zeros(8, complex)
    s[3] = np.nan
    with pytest.raises(ValueError):
        propagate_angular_spectrum(ComplexField(Grid(8, 1e-6), s, WL), 1e-3)


def test_aliasing_warning():
    g = Grid(256, 1e-6)
    point = np.zeros(256, complex)
    point[128] = 1
    with pytest.warns(AliasingWarning):
        propagate_angular_spectrum(ComplexField(g, point, WL), 10e-3)
    # a wide smooth beam over a short distance is fine
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        propagate_angular_spectrum(_gaussian(g, 20e-6), 1e-4)


def test_max_unaliased_extent_shrinks_with_distance():
    g = Grid(256, 1e-6)
    assert max_unaliased_extent(g, WL, 0.0) == g.extent
    assert max_unaliased_extent(g, WL, 1e-4) > max_unaliased_extent(g, WL, 1e-3) >= 0.0


# --- Fourier system -----------------------------------------------------------


def test_fourier_output_pitch():
    g = Grid(256, 4e-6)
    out = fourier_output_grid(g, WL, 0.2)
    assert out.dx == pytest.approx(WL * 0.2 / (256 * 4e-6))


def test_single_slit_first_zero():
    g = Grid(1024, 2e-6)
    f = 0.2
    # 64 samples wide, so lambda f / a lands exactly on output sample 1024 / 64
    x = g.axis()
    a = 64 * g.dx
    t = ((x >= -a / 2) & (x < a / 2)).astype(complex)
    out = apply_fourier_system(ComplexField(g, t, WL), f)
    I = intensity(out).values
    u = out.grid.axis()
    first_zero = WL * f / a
    right = (u > 0) & (u < 1.5 * first_zero)
    i_min = np.nonzero(right)[0][np.argmin(I[right])]
    assert u[i_min] == pytest.approx(first_zero, rel=1e-9)
    assert I[i_min] <= 1e-20 * I.max()
    # sinc^2 shape in between
    inner = (u > 0) & (u < first_zero)
    assert np.all(np.diff(I[inner]) < 0)


def test_gaussian_self_transform():
    g = Grid(512, 2e-6)
    f = 0.05
    w0 = 40e-6
    out = apply_fourier_system(_gaussian(g, w0), f)
    w_out = WL * f / (math.pi * w0)
    ref = np.exp(-(out.grid.axis() ** 2) / w_out**2)
    a = np.abs(out.samples)
    assert np.sqrt(np.mean((a / a.max() - ref) ** 2)) <= 0.01


@pytest.mark.parametrize("dims", [1, 2])
def test_double_fourier_inverts_coordinates(dims):
    g = Grid(64, 4e-6, dims)
    # choose the focal length that maps the grid onto itself
    focal = g.n * g.dx**2 / WL
    assert fourier_output_grid(g, WL, focal).dx == pytest.approx(g.dx)
    field = _random_field(g, 3)
    twice = apply_fourier_system(apply_fourier_system(field, focal), focal)
    idx = g.reflect_index(np.arange(g.n))
    expected = field.samples[idx] if dims == 1 else field.samples[np.ix_(idx, idx)]
    # an f-f system also flips the sign convention: E -> E(-x) up to a global phase
    ratio = np.vdot(expected, twice.samples) / np.vdot(expected, expected)
    assert abs(abs(ratio) - 1) < 1e-8
    assert _rel_rms(twice.samples, ratio * expected) < 1e-8


def test_fourier_conserves_power():
    f = _random_field(Grid(128, 3e-6, 2), 4)
    out = apply_fourier_system(f, 0.2)
    assert total_power(intensity(out)) == pytest.approx(total_power(intensity(f)), rel=1e-8)


# --- elements and trains --------------------------------------------------------


def test_large_aperture_is_identity():
    f = _random_field(Grid(64, 1e-6), 5)
    out = apply_element(f, Aperture(1.0))
    assert np.array_equal(out.samples, f.samples)


def test_uniform_phase_object():
    g = Grid(64, 1e-6)
    f = _random_field(g, 6)
    phi = 0.7
    obj = make_object(PhaseStep(phi=phi, width=None), g)
    # a step starting at the left edge of the grid covers every sample
    obj = type(obj)(g, np.full(g.shape, phi))
    out = apply_element(f, obj)
    assert np.allclose(out.samples, f.samples * np.exp(1j * phi), rtol=0, atol=1e-15)
    assert np.allclose(intensity(out).values, intensity(f).values, rtol=1e-12)


def test_point_source_collimated_by_lens():
    # low numerical aperture so the paraxial lens phase matches the exact
    # spherical wave from the angular spectrum
    w0, f = 100e-6, 80.0
    g = Grid(16384, 30e-6)
    src = _gaussian(g, w0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        out = apply_train(src, OpticalTrain((FreeSpace(f), ThinLens(f))))
    central = np.abs(g.axis()) <= g.extent / 4
    phase = np.unwrap(np.angle(out.samples[central]))
    assert phase.std() < 1e-3


def test_single_zero_free_space_train_is_identity():
    f = _random_field(Grid(64, 1e-6), 7)
    assert np.array_equal(apply_train(f, OpticalTrain((FreeSpace(0.0),))).samples, f.samples)


def test_object_then_fourier_is_object_diffraction():
    g = Grid(256, 4e-6)
    obj = make_object(PhaseStep(phi=math.pi, width=200e-6), g)
    plane = ComplexField(g, np.ones(g.n), WL)
    out = apply_train(plane, OpticalTrain((obj, FourierSystem(0.2))))
    ref = apply_fourier_system(ComplexField(g, obj.transmission(), WL), 0.2)
    assert np.allclose(out.samples, ref.samples, rtol=0, atol=1e-13)


@pytest.mark.filterwarnings("ignore::ghostsim.propagation.AliasingWarning")
def test_free_space_semigroup():
    f = _random_field(Grid(128, 2e-6), 8, band=0.05)
    a = apply_train(f, OpticalTrain((FreeSpace(1e-3), FreeSpace(2e-3))))
    b = apply_train(f, OpticalTrain((FreeSpace(3e-3),)))
    assert _rel_rms(a.samples, b.samples) <= 1e-10


def test_empty_train_rejected():
    with pytest.raises(ValueError):
        OpticalTrain(())
    with pytest.raises(TypeError):
        OpticalTrain(("lens",))


@pytest.mark.parametrize("bad", [lambda: ThinLens(0.0), lambda: Aperture(-1.0), lambda: FourierSystem(0.0)])
def test_element_parameters_must_be_positive(bad):
    with pytest.raises(ValueError):
        bad()


def test_object_grid_mismatch():
    g = Grid(64, 1e-6)
    obj = make_object(PhaseStep(), Grid(32, 1e-6))
    with pytest.raises(GridMismatchError):
        apply_element(_random_field(g, 9), obj)


@settings(max_examples=20, deadline=None)
@given(
    st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
    st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
    st.integers(0, 2**16),
)
def test_train_is_linear(alpha, beta, seed):
    g = Grid(64, 2e-6)
    obj = make_object(PhaseStep(phi=1.0, width=40e-6), g)
    train = OpticalTrain((FreeSpace(1e-4), Aperture(80e-6), obj, ThinLens(0.1), FourierSystem(0.2)))
    f1, f2 = _random_field(g, seed), _random_field(g, seed + 1)
    combo = ComplexField(g, alpha * f1.samples + beta * f2.samples, WL)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AliasingWarning)
        lhs = apply_train(combo, train).samples
        rhs = alpha * apply_train(f1, train).samples + beta * apply_train(f2, train).samples
    scale = max(np.abs(rhs).max(), 1e-300)
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * scale + 1e-300


# --- impulse matrices -----------------------------------------------------------


def test_impulse_matrix_of_zero_free_space_is_identity():
    g = Grid(32, 1e-6)
    h = impulse_matrix(OpticalTrain((FreeSpace(0.0),)), g, g, WL)
    assert np.allclose(h.entries, np.eye(32), rtol=0, atol=1e-15)


def test_impulse_matrix_reproduces_train():
    g = Grid(128, 4e-6)
    obj = make_object(PhaseStep(phi=2.0, width=100e-6), g)
    train = OpticalTrain((Aperture(400e-6), obj, FourierSystem(0.2)))
    h = impulse_matrix(train, g, None, WL)
    for seed in range(10):
        f = _random_field(g, 100 + seed, band=1.0)
        assert _rel_rms(h.apply(f.samples), apply_train(f, train).samples) <= 1e-8


def test_fourier_impulse_matrix_is_unitary():
    g = Grid(64, 4e-6)
    h = impulse_matrix(OpticalTrain((FourierSystem(0.2),)), g, None, WL)
    # unitary up to the ratio of output to input pitch
    M = h.entries.conj().T @ h.entries * (h.out_grid.dx / h.in_grid.dx)
    assert np.allclose(M, np.eye(64), rtol=0, atol=1e-8)


def test_fourier_kernel_conjugation():
    g = Grid(64, 4e-6)
    h = impulse_matrix(OpticalTrain((FourierSystem(0.2),)), g, None, WL)
    refl = h.out_grid.reflect_index(np.arange(64))
    # identical up to rounding of the exponentials
    assert np.max(np.abs(h.entries[refl] - np.conj(h.entries))) <= 1e-15 * np.abs(h.entries).max()


def test_impulse_matrix_guards():
    big = Grid(4096, 1e-6)
    with pytest.raises(GuardError):
        impulse_matrix(OpticalTrain((FreeSpace(0.0),)), big, big, WL)
    g = Grid(32, 1e-6)
    with pytest.raises(GridMismatchError):
        impulse_matrix(OpticalTrain((FourierSystem(0.2),)), g, g, WL)
    with pytest.raises(GridMismatchError):
        impulse_matrix(OpticalTrain((FreeSpace(0.0),)), Grid(32, 1e-6, 2), None, WL)
