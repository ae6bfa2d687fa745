//! KLD-based waveform design for shared-antenna MIMO ISAC systems.
//!
//! A base station with N antennas serves K downlink users and illuminates up
//! to T radar targets over L-snapshot frames. The library provides the
//! baseline ZF + identity-covariance operation, three KLD-maximising waveform
//! optimizers (projected gradient with penalty, barrier interior point, ADMM)
//! and a Monte Carlo evaluation pipeline producing detection probability,
//! BER, KLD and MSE curves.

pub mod cli;
pub mod comm;
pub mod gradients;
pub mod harness;
pub mod linalg;
pub mod optimizers;
pub mod radar;
pub mod report;
pub mod rng;
pub mod scenario;

pub use report::{evaluate_kld, KldReport};
pub use scenario::{validate_config, ScenarioConfig};
