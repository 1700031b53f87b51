//! Adiabatic error analysis for driven quantum systems.
//!
//! The propagator of a Hamiltonian moving along a parameter path, either
//! continuously or through instantaneous pulses, is split as
//! `U = U_Dyn U_Geo U_Err`: a dynamical phase factor, a geometric factor, and
//! a residual error factor that collects every transition between level
//! groups. The size of the error factor is measured by its average deviation
//! from the identity over pure input states.
//!
//! ```
//! use adiascope::{cp_scenario, run_point, CpScenario, RunSettings};
//!
//! let scenario = cp_scenario(&CpScenario::new(std::f64::consts::FRAC_PI_2, 4)).unwrap();
//! let (decomposition, delta) = run_point(&scenario, &RunSettings::default()).unwrap();
//! assert!(decomposition.reconstruction_residual < 1e-8);
//! assert!(delta.value < 1e-10);
//! ```

// Negated comparisons such as `!(x > 0.0)` deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decomposition;
pub mod error;
pub mod experiments;
pub mod hamiltonian;
pub mod linalg;
pub mod metrics;
pub mod numerics;
pub mod propagator;

pub use decomposition::{
    decompose, h_err_operator, h_g2_operator, modulation_trace, u_dyn, u_err_direct,
    u_err_extracted, u_g1, u_g2, u_geo, DecompositionSettings, EvolutionDecomposition,
    ModulationSample, ModulationTrace,
};
pub use error::{Error, Result};
pub use experiments::{
    build_cp, build_drive, cp_positions, cp_scenario, drive_scenario, gamma_objective, run_point,
    solve_gamma, sweep_cp, sweep_drive, CpScenario, DriveKind, DriveScenario, GammaSolution,
    PulseRotation, RunSettings, SweepResult, SweepRow, DEFAULT_GAMMA,
};
pub use hamiltonian::{
    analytic_spin_frame, frame_at, spectral_frame_at, FnPath, FrameField, HamiltonianModel,
    ParameterPath, PolylinePath, SpectralFrame, SpinHalfFieldModel,
};
pub use linalg::{
    distance, eig_hermitian, eigenphases, expm_skew, ComplexMatrix, Eigen, HermitianMatrix,
    UnitaryMatrix, C64,
};
pub use metrics::{
    adiabaticity_report, delta_u_err, AdiabaticityReport, DeltaEstimate, QuadratureSpec,
    DEFAULT_SEED,
};
pub use propagator::{
    dyn_phase_condition_check, propagate_continuous, propagate_pulses, EvolutionResult,
    IntegratorSettings, PhaseConditionReport, Pulse, PulseSequence, Scenario,
};
