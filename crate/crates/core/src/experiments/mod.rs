//! Configuration loading, sweep orchestration and CSV output.

pub mod config;
pub mod sweeps;
pub mod table;

pub use config::{
    default_scenario, load_config, parse_config, ExperimentConfig, Strategy, SweepAxis, Variant,
};
pub use sweeps::{
    convergence_runs, realization, run_ber_vs_elements, run_ber_vs_snr, run_convergence,
    run_validate_bound, snr_at_ber, strategy_design, weakest_first_order,
};
pub use table::Table;
