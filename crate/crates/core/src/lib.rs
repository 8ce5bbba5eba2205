//! Bohmian trajectories of the 2-D harmonic oscillator: wavefunction models,
//! critical points of the flow (N, X and Y points), trajectory integration with
//! deviation vectors, chaos diagnostics and ensemble statistics.

pub mod chaos;
pub mod config;
pub mod critical;
pub mod ensemble;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod output;
pub mod periodicity;
pub mod trajectory;

pub use error::{Error, Result};
pub use linalg::Mat2;
pub use model::{
    make_two_qubit, ComplexAmplitude, OscillatorFrequencies, SingleNodeModel, TwoQubitModel,
    VelocitySample, WavefunctionModel,
};
