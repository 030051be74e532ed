"""Numerical laboratory for weighted Laplacians on collapsing
Gibbons-Hawking model ends."""

from .assembly import (
    ModeOperator,
    RadialOperator,
    adjoint_defect,
    adjoint_weight,
    apply_dirichlet,
    assemble_base_reduction,
    assemble_mode_operator,
    assemble_radial_operator,
    four_dim_apply,
    monopole_angular_eigenvalues,
    separated_radial_block,
)
from .config import Config, parse_config
from .errors import (
    BandError,
    ConfigError,
    DomainError,
    GhlabError,
    OperatorStateError,
    SingularGaugeError,
    SingularOperatorError,
)
from .experiments import (
    SweepRecord,
    default_delta_grid,
    run_adjoint_check,
    run_epsilon_uniformity,
    run_geometry_check,
    run_harmonic_convergence,
    run_indicial_scan,
    run_kernel_census,
    run_poincare_sweep,
    run_splitting_commutator,
    sigma_min_separated,
)
from .geometry import (
    BasePoint,
    EndKind,
    GeometryScalars,
    MetricBlocks,
    ModelEnd,
    analytic_harmonics,
    bogomolny_residual,
    bundle_connection_coefficient,
    connection_covector,
    ellipticity_bounds,
    geometry_scalars,
    metric_blocks,
    volume_tilde,
)
from .linalg import (
    SolveReport,
    SpectralReport,
    apriori_sigma_min,
    kernel_basis,
    kernel_census,
    load_coo,
    smallest_singular_value,
    smallest_singular_values,
    solve,
)
from .spaces import (
    ChartGrid,
    GridFunction,
    TwistDescriptor,
    mode_extract,
    poincare_check,
    project_invariant,
    project_oscillatory,
    random_band_limited,
    weighted_norm,
)

__version__ = "0.1.0"
