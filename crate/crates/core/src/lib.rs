//! Event-triggered pinning synchronization of networks whose coupling graph
//! and pinned set switch according to a continuous-time Markov chain.
//!
//! The crate covers graph modes and the switching chain ([`topology`],
//! [`markov`]), node dynamics ([`dynamics`]), the mode-wise stability
//! certificate ([`stability`]), trajectory bounds for discrete monitoring
//! ([`bounds`]), the four triggering rules ([`rules`]) and the closed-loop
//! simulator ([`engine`]).

pub mod bounds;
pub mod config;
pub mod dynamics;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod markov;
pub mod output;
pub mod rules;
pub mod stability;
pub mod topology;

pub use config::{load_config, parse_config, LoadedConfig, RunManifest};
pub use engine::{run_ensemble, run_trial, EnsembleSummary, SimConfig, Simulation, TrialResult};
pub use error::{Error, Result};
pub use rules::Rule;
