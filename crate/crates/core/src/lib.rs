//! Qudit-chain Floquet simulation and analysis.
//!
//! A period of the drive is `U_F(ε) = K_m(ε) e^{-iH_z}`: a diagonal layer of
//! disordered fields and nearest-neighbour Ising couplings followed by a
//! site-factorized kick that cyclically permutes on-site levels. The crate
//! provides
//!
//! * a dense mixed-radix state vector with single-site gate application
//!   ([`state`]),
//! * disorder sampling and the diagonal phase layer ([`disorder`]),
//! * global and embedded kick compilation with a multiplicative angle-error
//!   model ([`kick`]),
//! * stroboscopic evolution and seeded disorder ensembles ([`floquet`]),
//! * observables, periodograms and peak metrics ([`observables`],
//!   [`spectral`]),
//! * eigenphase statistics of the dense Floquet operator ([`levels`]),
//! * time-charge grading and neutral-generator identities ([`normal_form`]),
//! * exact qubit reference models ([`baselines`]).

pub mod baselines;
pub mod disorder;
mod error;
pub mod floquet;
pub mod kick;
pub mod levels;
pub mod linalg;
pub mod normal_form;
pub mod observables;
mod par;
pub mod partition;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use disorder::{DisorderRealization, StaticLayerParams};
pub use floquet::{FloquetCircuit, FloquetProtocol, TimeSeries};
pub use kick::{Carrier, CompiledKick, KickKind, KickSpec};
pub use partition::LevelPartition;
pub use spectral::{PeakMetrics, Spectrum};
pub use state::{ChainShape, QuditState, SiteOperator};
