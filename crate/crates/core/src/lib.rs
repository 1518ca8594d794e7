//! Simulation and analysis of a three-qubit modulator–charger–battery
//! system in which repeated unitary pulses on the modulator switch the
//! charger–battery energy exchange on and off.
//!
//! Tensor ordering is fixed as modulator ⊗ charger ⊗ battery throughout.

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod model;
pub mod qcore;

pub use analysis::{FitResult, ScanResult, TauGrid};
pub use engine::{EnergyTimeSeries, Phase, PhaseKind, PulseSchedule, Sampling};
pub use model::{ModelParams, Qubit};
pub use qcore::{ComplexMatrix, EigenDecomposition, StateVector, C64};
