//! Simulation and optimization of IRS-assisted NOMA visible light links.
//!
//! The crate models Lambertian line-of-sight and IRS-reflected channel
//! gains under random device orientation and human blockage, evaluates the
//! first-decoding-user BER union bound of a power-domain NOMA downlink, and
//! jointly optimizes decoding order, power allocation and reflection
//! coefficients with an adaptive-restart genetic algorithm. A Monte Carlo
//! simulator with a real SIC chain validates the bound.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod montecarlo;
pub mod noma;
pub mod optimizer;
pub mod rng;

pub use channel::{ChannelState, Scenario};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, Strategy, SweepAxis, Table, Variant};
pub use geometry::{Angle, BlockageModel, Orientation, OrientationModel, Vec3};
pub use montecarlo::{McConfig, McResult};
pub use noma::{NomaDesign, ObjectiveReport, Violation};
pub use optimizer::{Chromosome, EsConfig, GaConfig, GaRun};
