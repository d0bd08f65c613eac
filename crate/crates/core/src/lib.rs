//! Numerical simulation of one- and two-photon Fock states from a quantum-dot
//! source: Hong-Ou-Mandel interference at an unbalanced Mach-Zehnder
//! interferometer, slow-light propagation through hot cesium vapor, heralded
//! TCSPC traces, and a Monte Carlo event-stream engine that rebuilds the same
//! histograms from simulated detector clicks.

pub mod cli;
pub mod constants;
pub mod correlation;
pub mod error;
pub mod faddeeva;
mod fourier;
pub mod montecarlo;
pub mod vapor;
pub mod wavepacket;

pub use error::{Error, Result};
pub use vapor::{AtomicLine, LineData, OpticalResponse, VaporCell};
pub use wavepacket::{FrequencyGrid, PhotonWavepacket, TimeTrace};
