//! Simulation and verification toolkit for full network nonlocality in the
//! three-node bilocal chain.
//!
//! - [`linalg`]: dense complex matrices and a Hermitian eigensolver.
//! - [`network`]: noisy sources, wave-plate observables, Bob's partial
//!   Bell-state measurement and the Born-rule distribution.
//! - [`witness`]: correlators and the two FNN witnesses.
//! - [`bounds`]: classical-bound certification over deterministic, hybrid
//!   and bilocal model families.
//! - [`mc`]: finite-count sampling, estimation and bootstrap errors.
//! - [`sweep`]: one-parameter noise scans and violation thresholds.

// Index loops mirror the tensor notation in the numerics.
#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod error;
pub mod linalg;
pub mod mc;
pub mod network;
pub mod numfmt;
pub mod rng;
pub mod sweep;
pub mod table;
pub mod witness;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, Cplx};
pub use mc::{
    bootstrap_witness, estimate_table, sample_counts, CountsTable, McConfig, WitnessEstimate,
};
pub use network::{
    build_scenario, compute_correlations, hwp_observable, noisy_source, partial_bsm_povm, singlet,
    DensityMatrix, DichotomicObservable, NoiseConfig, NoiseKind, Povm, Scenario,
};
pub use sweep::{run_sweep, SweepAxis, SweepResult, SweepRow};
pub use table::CorrelationTable;
pub use witness::{evaluate, r_cns, r_nsc, Witness, WitnessReport, CLASSICAL_BOUND};
