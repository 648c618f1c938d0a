"""Monte Carlo scalar wave optics for ghost diffraction with pseudo-thermal speckle.

The package is organised bottom-up:

``field``        grids, complex fields, intensity statistics
``propagation``  free space, lenses, apertures, Fourier systems, impulse matrices
``objects``      phase and amplitude test objects, the diaphragm
``speckle``      speckle generators and coherence bookkeeping
``correlation``  intensity-fluctuation correlations, analytic models, estimators
``experiments``  end-to-end scenarios and their assertions
``scenario``     scenario files; ``cli`` is the ``ghostsim`` command
"""

from importlib import metadata as _metadata

from .correlation import (
    CorrelationAccumulator,
    CorrelationMap,
    FieldCorrelationModel,
    analytic_g_classical,
    analytic_g_entangled,
    cut,
    fringe_visibility,
    gaussian_moment_oracle,
)
from .errors import (
    ConfigError,
    GhostSimError,
    GridMismatchError,
    GuardError,
    InsufficientStatisticsError,
    UndefinedWidthError,
)
from .experiments import (
    ScenarioConfig,
    ScenarioReport,
    run_coherence_transition,
    run_coherent_limit_gi_failure,
    run_ghost_diffraction,
    run_oracle_suite,
    run_scenario,
)
from .field import ComplexField, Grid, IntensityMap, autocorrelation_width, intensity, speckle_contrast, total_power
from .objects import (
    Diaphragm,
    DoubleSlit,
    PhaseDoubleSlit,
    PhaseGrating,
    PhaseStep,
    SingleSlit,
    make_object,
)
from .propagation import (
    Aperture,
    FourierSystem,
    FreeSpace,
    OpticalTrain,
    ThinLens,
    apply_train,
    impulse_matrix,
    propagate_angular_spectrum,
)
from .speckle import (
    SpeckleSourceConfig,
    expected_speckle_size,
    generate_speckle_batch,
    generate_speckle_frame,
    speckle_count,
)

try:
    __version__ = _metadata.version("artifact")
except _metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

__all__ = [
    "Aperture",
    "ComplexField",
    "ConfigError",
    "CorrelationAccumulator",
    "CorrelationMap",
    "Diaphragm",
    "DoubleSlit",
    "FieldCorrelationModel",
    "FourierSystem",
    "FreeSpace",
    "GhostSimError",
    "Grid",
    "GridMismatchError",
    "GuardError",
    "InsufficientStatisticsError",
    "IntensityMap",
    "OpticalTrain",
    "PhaseDoubleSlit",
    "PhaseGrating",
    "PhaseStep",
    "ScenarioConfig",
    "ScenarioReport",
    "SingleSlit",
    "SpeckleSourceConfig",
    "ThinLens",
    "UndefinedWidthError",
    "analytic_g_classical",
    "analytic_g_entangled",
    "apply_train",
    "autocorrelation_width",
    "cut",
    "expected_speckle_size",
    "fringe_visibility",
    "gaussian_moment_oracle",
    "generate_speckle_batch",
    "generate_speckle_frame",
    "impulse_matrix",
    "intensity",
    "make_object",
    "propagate_angular_spectrum",
    "run_coherence_transition",
    "run_coherent_limit_gi_failure",
    "run_ghost_diffraction",
    "run_oracle_suite",
    "run_scenario",
    "speckle_contrast",
    "speckle_count",
    "total_power",
]
