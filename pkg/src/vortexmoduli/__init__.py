"""Numerical laboratory for gauge vortices on a conformal two-sphere.

Constructs self-dual vortices at any point of the moduli space, measures the
normalized L2 metric against the Fubini-Study submersion metric, and compares
Laplace spectra on the one-vortex moduli sphere, for an arbitrary conformal
metric on the domain.
"""

from .bundle import (
    Divisor,
    HermitianStructure,
    Section,
    constant_curvature_weight,
    evaluate_norm,
    gram_matrix,
    pair_field,
    section_from_divisor,
    section_inner,
    sup_norm_alpha,
)
from .config import ExperimentConfig, divisors_from_config
from .errors import (
    ConfigError,
    ConvergenceError,
    DegenerateDirectionError,
    GridMismatchError,
    PreconditionError,
    SolvabilityError,
    VortexModuliError,
)
from .experiments import (
    ConvergenceFit,
    Laboratory,
    fit_convergence_order,
    run_case_matrix,
    run_laxmilgram_suite,
    run_spectrum,
    run_sweep,
)
from .geometry import (
    SurfaceMetric,
    first_eigenvalue,
    integrate,
    laplace_beltrami,
    norms,
    solve_helmholtz,
    solve_poisson,
)
from .moduli import (
    LinearizedResponse,
    MetricSample,
    TangentFrame,
    assemble_metric,
    fs_metric_coeff,
    horizontal_basis,
    horizontal_lift,
    lax_milgram_check,
    solve_linearized,
)
from .sphere import GridFunction, SphereGrid
from .spectral import (
    ModuliMetricField,
    SpectrumReport,
    fs_spectrum,
    laplace_spectrum,
    moduli_metric_field,
    ratio_bounds,
)
from .vortex import (
    VortexSolution,
    pseudo_vortex_deviation,
    reconstruct_fields,
    solve_vortex,
    vortex_energy,
)

__version__ = "0.1.0"
