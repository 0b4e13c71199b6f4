//! Slow-loop iterative learning control of fast, chaotic dynamics.
//!
//! The controller tunes the quasi-static input parameters of a fast plant
//! (the Lorenz system) so that a fingerprint of its measured trajectory — a
//! binned time-lagged phase portrait — matches a reference fingerprint. The
//! mismatch between fingerprints is scored with an exact Earth Mover's
//! Distance and minimized run-to-run by Gaussian-process regression with an
//! expected-improvement acquisition rule.
//!
//! Module map:
//! - [`plant`]: the Lorenz system and its integration protocol
//! - [`embedding`]: time-lagged phase portraits and histogram fingerprints
//! - [`transport`]: exact Earth Mover's Distance between fingerprints
//! - [`surrogate`]: Gaussian-process model and acquisition search
//! - [`controller`]: the closed tuning loop, Monte Carlo confidence floor,
//!   and parameter sweeps
//! - [`signal`]: Welch spectra, Hilbert phase, and lag selection by shadow
//!   manifold interpolation

pub mod controller;
pub mod embedding;
pub mod plant;
pub mod seeds;
pub mod signal;
pub mod surrogate;
pub mod transport;

pub use controller::{
    CampaignConfig, CampaignResult, ConfidenceFloor, IterationRecord, Reference, SuggestionSource,
};
pub use embedding::{BinnedPdf, DelayVectorSet, GridSpec};
pub use plant::{LorenzPlant, Plant, PlantRunSpec, State, SystemParams, Trajectory};
pub use surrogate::{GpConfig, GpModel, Observation, ParamSpace};
pub use transport::{TransportMove, TransportPlan};
