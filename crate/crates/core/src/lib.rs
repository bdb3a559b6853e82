//! Coherent-probe tomography of Gaussian quantum processes.
//!
//! An unknown N-mode Gaussian device acts on quadrature means as `r -> S r` with
//! `S` a 2N×2N symplectic matrix. Probing one input mode at a time with a coherent
//! state of known amplitude and phase, and reading the output quadrature means with
//! homodyne or heterodyne detection, yields every column of `S` directly. Uniform
//! loss only rescales the estimate by `sqrt(eta)`, which is recovered from the
//! determinant because `det S = 1`.
//!
//! Modules:
//! - [`phase_space`]: conventions, states, symplectic algebra, loss, error metric
//! - [`randgen`]: seeded Haar unitaries and random symplectic matrices
//! - [`device`]: simulated devices and finite-shot quadrature measurement
//! - [`tomography`]: reconstruction, loss recovery, phase-error and non-Gaussianity probes
//! - [`experiments`]: scripted scaling studies aggregated into CSV records
//! - [`formats`]: JSON documents shared with the command-line tool
//!
//! Quadratures are ordered `(X_1..X_N, P_1..P_N)` and the vacuum covariance is the
//! identity. Mode indices in this API are zero-based.

// `!(x > 0.0)` style guards are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod device;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod phase_space;
pub mod randgen;
pub mod tomography;

pub use device::{
    cubic_phase_mean_map, evolve, measure, sample_outcomes, CountingDevice, DeviceModel,
    MeasurementConfig, ProbeSpec, QuadratureOutcomes, QuadratureSampleMeans, Scheme, Shots,
};
pub use error::{Error, Result};
pub use phase_space::{
    apply_symplectic, apply_uniform_loss, coherent_probe_state, embed_unitary, extract_unitary,
    is_symplectic, scaled_frobenius, scaled_frobenius_complex, symplectic_form, vacuum_state,
    GaussianState, ModeCount, SymplecticMatrix, Transmissivity, UnitaryMatrix,
};
pub use randgen::{derive_seed, haar_unitary, random_symplectic, RngSeed, SqueezeSpec};
pub use tomography::{
    detect_non_gaussian, estimate_eta, reconstruct_element_with_phase_error,
    reconstruct_symplectic, reconstruct_unitary, DetectionOutcome, ProbeableDevice,
    ReconstructionResult, UnitaryReconstruction,
};

pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
