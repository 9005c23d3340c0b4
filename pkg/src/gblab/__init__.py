"""gblab: a numerical laboratory for the good Boussinesq / quadratic
Schrodinger reduction on periodic lattices."""

from .lattice import (
    FrequencyLattice,
    LatticeError,
    SpacetimeSpectrum,
    SpectralField,
    Trajectory,
    dump_spectrum,
    field_from_modes,
    forward_transform,
    inverse_transform,
    load_field,
    load_spacetime,
    load_spectrum,
    make_lattice,
    make_tau_grid,
    time_transform,
    x_grid,
    zero_field,
)
from .reduction import GBState, gb_to_qnls, omega_sq, qnls_to_gb, rescale_data
from .norms import (
    NormSpec,
    RegionPredicate,
    besov_norm,
    difference_norm,
    dyadic_shells,
    h_norm,
    project,
    ws_norm,
    xsb_norm,
    ys_norm,
)
from .solver import (
    InternalConsistencyError,
    PicardDivergenceError,
    SolverConfig,
    a2_iterate,
    bump_psi,
    duhamel,
    free_evolve,
    nonlinearity,
    picard_solve,
    reference_solve,
)
from .resonance import (
    CountingCase,
    ResonancePoint,
    SweepSampler,
    cell_measure,
    l4_identity_check,
    resonance_fn,
    sup_sweep,
)
from .bilinear_probe import (
    bilinear_image,
    bilinear_image_in_region,
    l4_ratio,
    ratio_probe,
    region_classify,
    slope_sweep,
)
from .illposedness import (
    InflationConfig,
    InflationError,
    InflationReport,
    a2_lower_bound,
    check_cond_n,
    inflation_sweep,
    make_phi,
    scan_cond_n,
)

__version__ = "0.1.0"
