use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator and optimizer.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of a physical formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A design violates one or more of the NOMA/IRS constraints.
    #[error("constraint violation: {}", format_violations(.0))]
    Constraint(Vec<crate::noma::Violation>),

    /// Exhaustive search refused because the grid is larger than the cap.
    #[error(
        "search space too large: 10^{log10_grid_points:.3} grid points exceed the cap of {cap} \
         (nominal K!*10^(2K+N) = 10^{log10_nominal:.3})"
    )]
    SearchSpaceTooLarge {
        log10_grid_points: f64,
        log10_nominal: f64,
        cap: u64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config file not found: {}", .0.display())]
    ConfigNotFound(PathBuf),

    #[error("failed to parse config {}: {message}", .path.display())]
    ConfigParse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_violations(v: &[crate::noma::Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
