//! Joint optimization of decoding order, power allocation and IRS
//! reflection coefficients.

pub mod chromosome;
pub mod exhaustive;
pub mod ga;

pub use chromosome::{decode, encode, repair, Chromosome, POWER_GAP};
pub use exhaustive::{
    exhaustive_search, exhaustive_search_with, search_space, EsConfig, EsResult, SearchSpace,
};
pub use ga::{ga_optimize, trace_rows, GaConfig, GaRun};
