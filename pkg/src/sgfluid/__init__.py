"""Finite-difference and spectral-Galerkin laboratory for 2D stochastic second-grade fluids on the unit square."""

from .grid import (
    Grid,
    ScalarField,
    VectorField,
    biharmonic,
    clamp,
    curl2d,
    divergence,
    grad,
    l2_inner,
    laplacian,
    make_grid,
    perp_grad,
    read_snapshot,
    vector_laplacian,
    write_snapshot,
)
from .stokes import (
    SolveError,
    StokesEigenbasis,
    WEigenbasis,
    cached_stokes_basis,
    elliptic_K,
    grad_norm,
    leray_project,
    norm_H,
    norm_H3s,
    norm_star,
    norm_V,
    norm_W,
    resolvent_solve,
    resolvent_stream,
    stokes_apply,
    stokes_eigensolve,
    w_basis,
)
from .operators import (
    CorrectorField,
    G_k,
    NoiseModel,
    b_hat_pairing,
    build_noise_model,
    curl_v,
    ito_corrector_F,
    kato_corrector,
    trilinear_b,
)
from .galerkin import (
    BrownianPath,
    GalerkinState,
    GalerkinSystem,
    SimConfig,
    Trajectory,
    galerkin_diffusion,
    galerkin_drift,
    galerkin_remainder,
    project_initial,
    simulate_path,
    step_em_ito,
    step_midpoint_strat,
)
from .euler import (
    EulerTrajectory,
    central_vortex,
    make_initial_family,
    solve_euler,
    verify_initial_scalings,
    vortex_pair,
)
from .additive import (
    AdditiveNoiseModel,
    VorticitySolver,
    check_equivalence,
    check_vorticity_energy_law,
    h3_from_vorticity,
    initial_vorticity,
    simulate_velocity_additive,
    simulate_vorticity_additive,
)
from .results import ResultTable, RunManifest

__version__ = "0.1.0"
