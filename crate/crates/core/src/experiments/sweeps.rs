//! Experiment runners. Each sweep point is an independent job on the
//! current rayon pool; tables are assembled in sweep order.

use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Strategy, SweepAxis, Variant};
use super::table::{fmt_flag, fmt_key, fmt_value, Table};
use crate::channel::{ChannelState, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{sample_azimuth, sample_polar_angle, Orientation};
use crate::montecarlo::{simulate_ber_on, McConfig};
use crate::noma::{union_bound_ber, NomaDesign};
use crate::optimizer::{exhaustive_search_with, ga_optimize, GaConfig, GaRun};
use crate::rng::stream;

const TAG_GA: u64 = 11;
const TAG_MC: u64 = 12;
const TAG_REALIZATION: u64 = 13;

fn derived_seed(seed: u64, path: &[u64]) -> u64 {
    stream(seed, path).random()
}

/// Decoding order for FPA baselines: weakest combined gain first, so the
/// weakest user receives the most power.
pub fn weakest_first_order(state: &ChannelState, rho: &[f64]) -> Result<Vec<usize>> {
    let q = state.combined_gains(rho)?;
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| q[a].total_cmp(&q[b]));
    Ok(order)
}

/// Design chosen by `strategy` on one channel realization. `ga_seed` seeds
/// the GA when it is used.
pub fn strategy_design(
    strategy: Strategy,
    config: &ExperimentConfig,
    scenario: &Scenario,
    state: &ChannelState,
    ga_seed: u64,
) -> Result<NomaDesign> {
    let n = scenario.num_elements();
    match strategy {
        Strategy::NoIrsFpa | Strategy::FixedIrsFpa => {
            let level = if strategy == Strategy::NoIrsFpa {
                0.0
            } else {
                1.0
            };
            let rho = vec![level; n];
            let order = weakest_first_order(state, &rho)?;
            NomaDesign::fpa(order, config.fpa_alpha, rho)
        }
        Strategy::GaJoint => {
            let ga = GaConfig {
                rng_seed: ga_seed,
                ..config.ga.clone()
            };
            Ok(ga_optimize(scenario, state, &ga)?.best_design)
        }
        Strategy::EsOracle => Ok(exhaustive_search_with(scenario, state, &config.es)?.design),
    }
}

fn snr_list(config: &ExperimentConfig) -> Result<&[f64]> {
    match &config.sweep {
        SweepAxis::TransmitSnrDb(v) => Ok(v),
        SweepAxis::NumElements(_) => Err(Error::InvalidConfig(
            "this experiment needs sweep.transmit_snr_db".into(),
        )),
    }
}

/// First-user BER versus transmit SNR: one row per (snr, strategy, method).
pub fn run_ber_vs_snr(config: &ExperimentConfig) -> Result<Table> {
    let snrs = snr_list(config)?;
    let per_point: Vec<Vec<Vec<String>>> = snrs
        .par_iter()
        .enumerate()
        .map(|(i, &snr)| {
            let scenario = config.scenario.clone().with_transmit_snr_db(snr);
            let state = ChannelState::from_scenario(&scenario)?;
            let mut rows = Vec::new();
            for &strategy in &config.strategies {
                let ga_seed = derived_seed(config.seed, &[TAG_GA, i as u64]);
                let design = strategy_design(strategy, config, &scenario, &state, ga_seed)?;
                let bound = union_bound_ber(&design, &state, &scenario)?;
                rows.push(vec![
                    fmt_key(snr),
                    strategy.name().to_string(),
                    "bound".to_string(),
                    fmt_value(bound.union_bound_ber_first_user),
                    fmt_value(0.0),
                    fmt_flag(false),
                ]);
                if config.mc_enabled {
                    let mc = McConfig {
                        rng_seed: derived_seed(config.seed, &[TAG_MC, i as u64]),
                        transmit_snr_db: None,
                        ..config.mc.clone()
                    };
                    let r = simulate_ber_on(&scenario, &state, &design, &mc)?;
                    let u = design.first_user();
                    rows.push(vec![
                        fmt_key(snr),
                        strategy.name().to_string(),
                        "mc".to_string(),
                        fmt_value(r.per_user_ber[u]),
                        fmt_value(r.confidence_halfwidth_95[u]),
                        fmt_flag(r.censored[u]),
                    ]);
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "snr_db",
        "strategy",
        "method",
        "ber",
        "ci_halfwidth",
        "censored",
    ]);
    per_point.into_iter().flatten().for_each(|r| table.push(r));
    Ok(table)
}

/// Orientation and blockage draw for realization `r`, shared by every
/// strategy and element count.
pub fn realization(
    scenario: &Scenario,
    variant: Variant,
    seed: u64,
    r: usize,
) -> Result<ChannelState> {
    let mut rng = stream(seed, &[TAG_REALIZATION, r as u64]);
    let k = scenario.num_users();
    let mut orientations = Vec::with_capacity(k);
    for u in 0..k {
        let theta = sample_polar_angle(&scenario.orientation_model, &mut rng);
        let omega = sample_azimuth(&mut rng);
        let omega = scenario.ue_fixed_azimuth[u].unwrap_or(omega);
        orientations.push(Orientation::new(theta, omega)?);
    }
    let blocked = vec![variant == Variant::Blocked; k];
    ChannelState::realize(scenario, &orientations, &blocked)
}

/// Mean first-user bound over random realizations per element count.
pub fn run_ber_vs_elements(config: &ExperimentConfig) -> Result<Table> {
    let counts = match &config.sweep {
        SweepAxis::NumElements(v) => v.clone(),
        SweepAxis::TransmitSnrDb(_) => {
            return Err(Error::InvalidConfig(
                "ber-vs-elements needs sweep.num_elements".into(),
            ))
        }
    };
    let r_count = config.realizations;
    let jobs: Vec<(usize, usize)> = (0..counts.len())
        .flat_map(|i| (0..r_count).map(move |r| (i, r)))
        .collect();
    let base = config
        .scenario
        .clone()
        .with_transmit_snr_db(config.operating_snr_db);
    let results: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let scenario = base.clone().with_irs_elements(counts[i]);
            let state = realization(&scenario, config.variant, config.seed, r)?;
            let ga_seed = derived_seed(config.seed, &[TAG_GA, i as u64, r as u64]);
            config
                .strategies
                .iter()
                .map(|&s| {
                    let d = strategy_design(s, config, &scenario, &state, ga_seed)?;
                    Ok(union_bound_ber(&d, &state, &scenario)?.union_bound_ber_first_user)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new(&["n_elements", "strategy", "variant", "mean_ber"]);
    for (i, &n) in counts.iter().enumerate() {
        for (j, s) in config.strategies.iter().enumerate() {
            let sum: f64 = (0..r_count).map(|r| results[i * r_count + r][j]).sum();
            table.push(vec![
                n.to_string(),
                s.name().to_string(),
                config.variant.name().to_string(),
                fmt_value(sum / r_count as f64),
            ]);
        }
    }
    Ok(table)
}

/// Adaptive-restart GA and the budget-matched single-round GA on the
/// static channel at the operating SNR.
pub fn convergence_runs(config: &ExperimentConfig) -> Result<(GaRun, GaRun)> {
    if !config.strategies.contains(&Strategy::GaJoint) {
        return Err(Error::InvalidConfig(
            "convergence needs the ga_joint strategy".into(),
        ));
    }
    let scenario = config
        .scenario
        .clone()
        .with_transmit_snr_db(config.operating_snr_db);
    let state = ChannelState::from_scenario(&scenario)?;
    let adaptive = GaConfig {
        rng_seed: config.seed,
        ..config.ga.clone()
    };
    let plain = adaptive.budget_matched_plain();
    let (a, p) = rayon::join(
        || ga_optimize(&scenario, &state, &adaptive),
        || ga_optimize(&scenario, &state, &plain),
    );
    Ok((a?, p?))
}

pub fn run_convergence(config: &ExperimentConfig) -> Result<Table> {
    let (adaptive, plain) = convergence_runs(config)?;
    let mut table = Table::new(&["variant", "generation", "best_fitness", "restart_flag"]);
    for (name, run) in [("adaptive", &adaptive), ("plain", &plain)] {
        for (g, f, restart) in crate::optimizer::trace_rows(run) {
            table.push(vec![
                name.to_string(),
                g.to_string(),
                fmt_value(f),
                fmt_flag(restart),
            ]);
        }
    }
    Ok(table)
}

/// Monte Carlo BER of every user next to the analytic bound, per SNR and
/// strategy.
pub fn run_validate_bound(config: &ExperimentConfig) -> Result<Table> {
    let snrs = snr_list(config)?;
    let per_point: Vec<Vec<Vec<String>>> = snrs
        .par_iter()
        .enumerate()
        .map(|(i, &snr)| {
            let scenario = config.scenario.clone().with_transmit_snr_db(snr);
            let state = ChannelState::from_scenario(&scenario)?;
            let mut rows = Vec::new();
            for &strategy in &config.strategies {
                let ga_seed = derived_seed(config.seed, &[TAG_GA, i as u64]);
                let design = strategy_design(strategy, config, &scenario, &state, ga_seed)?;
                let bound = union_bound_ber(&design, &state, &scenario)?;
                let mc = McConfig {
                    rng_seed: derived_seed(config.seed, &[TAG_MC, i as u64]),
                    transmit_snr_db: None,
                    ..config.mc.clone()
                };
                let r = simulate_ber_on(&scenario, &state, &design, &mc)?;
                for u in 0..scenario.num_users() {
                    rows.push(vec![
                        fmt_key(snr),
                        strategy.name().to_string(),
                        u.to_string(),
                        fmt_flag(u == design.first_user()),
                        fmt_value(r.per_user_ber[u]),
                        fmt_value(r.per_user_ser[u]),
                        fmt_value(r.confidence_halfwidth_95[u]),
                        fmt_flag(r.censored[u]),
                        fmt_value(bound.per_user_bounds[u]),
                    ]);
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&[
        "snr_db",
        "strategy",
        "user",
        "first_decoded",
        "ber",
        "ser",
        "ci_halfwidth",
        "censored",
        "union_bound",
    ]);
    per_point.into_iter().flatten().for_each(|r| table.push(r));
    Ok(table)
}

/// SNR at which a decreasing BER curve first reaches `target`, by linear
/// interpolation of `log10 BER` between sweep points.
pub fn snr_at_ber(points: &[(f64, f64)], target: f64) -> Option<f64> {
    let lt = target.log10();
    if let Some(&(s, b)) = points.first() {
        if b <= target {
            return Some(s);
        }
    }
    points.windows(2).find_map(|w| {
        let ((s0, b0), (s1, b1)) = (w[0], w[1]);
        if b0 > target && b1 <= target {
            let (l0, l1) = (b0.log10(), b1.max(1e-300).log10());
            Some(s0 + (s1 - s0) * (l0 - lt) / (l0 - l1))
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::parse_config;
    use std::path::Path;

    fn cfg(text: &str) -> ExperimentConfig {
        parse_config(text, Path::new("t.toml")).unwrap()
    }

    const SMALL_GA: &str = "[ga]\npopulation_size = 20\ngenerations = 5\nrestart_rounds = 2\n";

    #[test]
    fn snr_interpolation() {
        let pts = [(100.0, 0.1), (110.0, 0.001), (120.0, 1e-5)];
        assert!((snr_at_ber(&pts, 1e-2).unwrap() - 105.0).abs() < 1e-12);
        assert_eq!(snr_at_ber(&pts, 0.5), Some(100.0));
        assert_eq!(snr_at_ber(&pts, 1e-9), None);
    }

    #[test]
    fn fixed_irs_helps_while_noise_limited() {
        let c = cfg("[experiment]\nstrategies = [\"no_irs_fpa\", \"fixed_irs_fpa\"]\n");
        let t = run_ber_vs_snr(&c).unwrap();
        assert_eq!(t.rows.len(), 2 * 9);
        // Past the interference floor the extra gain can shift the power
        // ratios either way, so only the low-SNR points are compared.
        for pair in t.rows.chunks(2).take(4) {
            assert_eq!(pair[0][1], "no_irs_fpa");
            assert_eq!(pair[1][1], "fixed_irs_fpa");
            let no: f64 = pair[0][3].parse().unwrap();
            let fixed: f64 = pair[1][3].parse().unwrap();
            assert!(fixed <= no, "{pair:?}");
        }
    }

    #[test]
    fn dark_no_irs_bound_is_one_half() {
        let c = cfg(
            "[experiment]\nstrategies = [\"no_irs_fpa\"]\nrealizations = 3\nvariant = \"blocked\"\n\
             [sweep]\nnum_elements = [0]\n[noma]\nmodulation_order = 2\n",
        );
        let t = run_ber_vs_elements(&c).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0][3].parse::<f64>().unwrap(), 0.5);
    }

    #[test]
    fn elements_sweep_layout() {
        let c = cfg(&format!(
            "[experiment]\nstrategies = [\"fixed_irs_fpa\", \"ga_joint\"]\nrealizations = 2\n\
             [sweep]\nnum_elements = [0, 4]\n{SMALL_GA}"
        ));
        let t = run_ber_vs_elements(&c).unwrap();
        let keys: Vec<(&str, &str)> = t
            .rows
            .iter()
            .map(|r| (r[0].as_str(), r[1].as_str()))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("0", "fixed_irs_fpa"),
                ("0", "ga_joint"),
                ("4", "fixed_irs_fpa"),
                ("4", "ga_joint")
            ]
        );
    }

    #[test]
    fn convergence_layout() {
        let c = cfg(SMALL_GA);
        let t = run_convergence(&c).unwrap();
        let adaptive = t.rows.iter().filter(|r| r[0] == "adaptive").count();
        let plain = t.rows.iter().filter(|r| r[0] == "plain").count();
        assert_eq!(adaptive, 12);
        assert_eq!(plain, 12);
        let flags: Vec<&str> = t
            .rows
            .iter()
            .filter(|r| r[3] == "1")
            .map(|r| r[1].as_str())
            .collect();
        assert_eq!(flags, vec!["6"]);
    }

    #[test]
    fn validate_bound_layout() {
        let c = cfg(
            "[experiment]\nstrategies = [\"fixed_irs_fpa\"]\n[sweep]\ntransmit_snr_db = [110.0, 120.0]\n\
             [mc]\nnum_symbols = 2000\n",
        );
        let t = run_validate_bound(&c).unwrap();
        assert_eq!(t.rows.len(), 2 * 3);
        assert_eq!(t.rows.iter().filter(|r| r[3] == "1").count(), 2);
    }

    #[test]
    fn wrong_axis_is_rejected() {
        let c = cfg("[sweep]\nnum_elements = [1, 2]\n");
        assert!(matches!(run_ber_vs_snr(&c), Err(Error::InvalidConfig(_))));
        let c = cfg("");
        assert!(matches!(
            run_ber_vs_elements(&c),
            Err(Error::InvalidConfig(_))
        ));
    }
}
