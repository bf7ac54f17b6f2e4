//! Bell tests for a single photon split over `N` modes, measured by
//! displacement followed by click detection, when the parties share no
//! phase reference.
//!
//! The crate is `no_std` (it needs `alloc`). IO, file formats and the
//! command-line front end live in the `photon-bell` crate.
//!
//! * [`fock`]: states and observables on the vacuum + one-photon subspace.
//! * [`wwzb`]: the N-party full-correlation Bell functional and the
//!   two-qubit CHSH criterion.
//! * [`phase_noise`]: wrapped-Gaussian frame offsets and phase averaging.
//! * [`experiments`]: measurement strategies and the resulting Bell values.
//! * [`optimize`]: maximal violations, threshold efficiencies and the
//!   certain-violation frontier.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod experiments;
pub mod fock;
pub mod optimize;
pub mod phase_noise;
pub mod simplex;
pub mod wwzb;

pub use error::{Error, Result};
pub use experiments::{
    averaged_table, bell_value_averaged, bell_value_fast, bell_value_static,
    best_pair_bell_value, symbolic_correlator, symbolic_correlators, violation_distribution,
    violation_samples, worst_case_over_grid, Amplitudes, MeasurementStrategy, SettingChoice,
    SymbolicCorrelatorTable, ViolationHistogram, ViolationSpec,
};
pub use fock::{
    correlator, correlator_bruteforce, displacement_observable, projective_observable,
    DisplacementSetting, ModeObservable, SubspaceState, C64,
};
pub use optimize::{
    certainty_frontier, maximize_bell, optimal_amplitudes_at_zero, threshold_efficiency,
    FrontierOptions, FrontierPoint, OptimizationSpec, OptimumReport, PhaseMode, SearchSpace,
    ThresholdReport,
};
pub use phase_noise::{
    average_polynomial, derive_seed, sample_offsets, wrapped_gaussian_pdf, PhaseModel,
    PhasePolynomial,
};
pub use wwzb::{chsh_horodecki, wwzb_value, wwzb_value_naive, BellResult, CorrelatorTable};
