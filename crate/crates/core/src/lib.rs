//! Discrete-time quantum walk on a circle in phase space.
//!
//! The walker is the coherent state of a truncated resonator, the coin a
//! qubit. Two dynamics are compared step by step: the standard walk
//! (coin rotation followed by a coin-conditioned phase-space rotation) and
//! the continuous evolution of the joint Hamiltonian
//! `H/ħ = ½ω σx − g a†a σz` sampled every `τ`. The [`optimizer`] tunes the
//! dimensionless frequencies `gτ`, `ωτ` so the continuous evolution tracks
//! the walk as closely as possible in Hellinger distance.
//!
//! Compound states are stored coin-major (coin ⊗ walker), walker amplitudes
//! in the number basis.

pub mod error;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod phase_space;
pub mod walk;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector, Spectrum};
pub use metrics::StepWindow;
pub use metrics::{hellinger, negativity, negativity_pure, FitModel, GrowthFit, TrajectoryReport};
pub use optimizer::{c_ratio, optimize, Objective, OptimizationResult};
pub use phase_space::{
    circular_stats, coherent_state, peak_separation, phase_distribution, PhaseDistribution,
    WalkConfig,
};
pub use walk::{run_trajectory, Dynamics, JointDensity, JointState, StepOperators, Trajectory};
