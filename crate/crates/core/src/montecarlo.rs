//! Symbol-level simulation of superposed transmission with a real
//! detect-and-subtract SIC chain.
//!
//! Symbols are processed in blocks of [`BLOCK_SYMBOLS`]; each block draws
//! from its own stream keyed by `(seed, block)`, so counts are identical for
//! any number of worker threads. When resampling is enabled, orientation and
//! blockage are redrawn once per block.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::channel::{combined_gain_unchecked, ChannelState, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{sample_azimuth, sample_blockage, sample_polar_angle, Orientation};
use crate::noma::{check_constraints, Constellation, NomaDesign};
use crate::rng::{stream, Stream};

pub const BLOCK_SYMBOLS: u64 = 1000;

/// Points with fewer errors than this are reported as censored.
pub const MIN_ERRORS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub num_symbols: u64,
    pub rng_seed: u64,
    pub resample_orientation: bool,
    pub resample_blockage: bool,
    /// Overrides the scenario noise when set.
    pub transmit_snr_db: Option<f64>,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            num_symbols: 1_000_000,
            rng_seed: 0,
            resample_orientation: false,
            resample_blockage: false,
            transmit_snr_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub per_user_ber: Vec<f64>,
    pub per_user_ser: Vec<f64>,
    pub symbols_simulated: u64,
    /// 95% half-width of each user's BER estimate.
    pub confidence_halfwidth_95: Vec<f64>,
    pub bit_errors: Vec<u64>,
    pub symbol_errors: Vec<u64>,
    pub censored: Vec<bool>,
}

/// 95% confidence half-width of an error-rate estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confidence {
    pub half_width: f64,
    /// Exact binomial (Clopper-Pearson or rule of three) rather than the
    /// normal approximation.
    pub exact: bool,
    /// The interval spans at least half of `[0, 1]`.
    pub degenerate: bool,
}

pub fn estimate_confidence(errors: u64, trials: u64) -> Result<Confidence> {
    if trials == 0 || errors > trials {
        return Err(Error::Domain(format!(
            "need 0 <= errors <= trials and trials >= 1, got {errors}/{trials}"
        )));
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let (half_width, exact, width) = if errors == 0 {
        let upper = 1.0 - 0.05f64.powf(1.0 / n);
        (upper, true, upper)
    } else if errors < MIN_ERRORS || trials - errors < MIN_ERRORS {
        let (lo, hi) = clopper_pearson(errors, trials);
        ((hi - p).max(p - lo), true, hi - lo)
    } else {
        let h = 1.96 * (p * (1.0 - p) / n).sqrt();
        (h, false, 2.0 * h)
    };
    Ok(Confidence {
        half_width,
        exact,
        degenerate: width >= 0.5,
    })
}

/// Two-sided 95% Clopper-Pearson interval.
fn clopper_pearson(errors: u64, trials: u64) -> (f64, f64) {
    let (x, n) = (errors as f64, trials as f64);
    // P(Bin(n, p) >= x) = I_p(x, n - x + 1), increasing in p.
    let lower = if errors == 0 {
        0.0
    } else {
        bisect(|p| beta_reg(x, n - x + 1.0, p) - 0.025)
    };
    // P(Bin(n, p) <= x) = 1 - I_p(x + 1, n - x), decreasing in p.
    let upper = if errors == trials {
        1.0
    } else {
        bisect(|p| 0.025 - (1.0 - beta_reg(x + 1.0, n - x, p)))
    };
    (lower, upper)
}

/// Root of an increasing function on `[0, 1]`.
fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Default)]
struct Counts {
    bits: Vec<u64>,
    symbols: Vec<u64>,
}

impl Counts {
    fn zeros(k: usize) -> Self {
        Self {
            bits: vec![0; k],
            symbols: vec![0; k],
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.bits.iter_mut().zip(other.bits) {
            *a += b;
        }
        for (a, b) in self.symbols.iter_mut().zip(other.symbols) {
            *a += b;
        }
        self
    }
}

/// Simulates `design` on the scenario's static channel, or on per-block
/// realizations when resampling is enabled.
pub fn simulate_ber(scenario: &Scenario, design: &NomaDesign, mc: &McConfig) -> Result<McResult> {
    let scenario = match mc.transmit_snr_db {
        Some(db) => scenario.clone().with_transmit_snr_db(db),
        None => scenario.clone(),
    };
    scenario.validate()?;
    let fixed = if mc.resample_orientation || mc.resample_blockage {
        None
    } else {
        Some(ChannelState::from_scenario(&scenario)?)
    };
    run(&scenario, fixed.as_ref(), design, mc)
}

/// Simulates `design` on an explicit channel realization.
pub fn simulate_ber_on(
    scenario: &Scenario,
    state: &ChannelState,
    design: &NomaDesign,
    mc: &McConfig,
) -> Result<McResult> {
    let scenario = match mc.transmit_snr_db {
        Some(db) => scenario.clone().with_transmit_snr_db(db),
        None => scenario.clone(),
    };
    run(&scenario, Some(state), design, mc)
}

fn run(
    scenario: &Scenario,
    fixed: Option<&ChannelState>,
    design: &NomaDesign,
    mc: &McConfig,
) -> Result<McResult> {
    let violations = check_constraints(design);
    if !violations.is_empty() {
        return Err(Error::Constraint(violations));
    }
    if mc.num_symbols == 0 {
        return Err(Error::InvalidConfig("num_symbols must be >= 1".into()));
    }
    let k = design.num_users();
    if k != scenario.num_users() || design.rho.len() != scenario.num_elements() {
        return Err(Error::Domain(format!(
            "design ({k} users, {} elements) does not match scenario ({}, {})",
            design.rho.len(),
            scenario.num_users(),
            scenario.num_elements()
        )));
    }
    if let Some(st) = fixed {
        if st.num_users() != k || st.num_elements() != design.rho.len() {
            return Err(Error::Domain("channel state does not match design".into()));
        }
    }
    let constellation = Constellation::unipolar_pam(scenario.modulation_order)?;
    let blocks = mc.num_symbols.div_ceil(BLOCK_SYMBOLS);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK_SYMBOLS.min(mc.num_symbols - b * BLOCK_SYMBOLS);
            let mut rng = stream(mc.rng_seed, &[b]);
            let realized;
            let state = match fixed {
                Some(s) => s,
                None => {
                    realized = realize_block(scenario, mc, &mut rng)?;
                    &realized
                }
            };
            let gains: Vec<f64> = (0..k)
                .map(|u| combined_gain_unchecked(state, &design.rho, u))
                .collect();
            Ok::<_, Error>(simulate_block(
                &constellation,
                design,
                &gains,
                &scenario.noise_std,
                len,
                &mut rng,
            ))
        })
        .try_reduce(|| Counts::zeros(k), |a, b| Ok(a.merge(b)))?;

    let bits_per_symbol = constellation.bits_per_symbol() as u64;
    let n = mc.num_symbols;
    let mut halfwidths = Vec::with_capacity(k);
    for &e in &counts.bits {
        halfwidths.push(estimate_confidence(e, n * bits_per_symbol)?.half_width);
    }
    Ok(McResult {
        per_user_ber: counts
            .bits
            .iter()
            .map(|&e| e as f64 / (n * bits_per_symbol) as f64)
            .collect(),
        per_user_ser: counts
            .symbols
            .iter()
            .map(|&e| e as f64 / n as f64)
            .collect(),
        symbols_simulated: n,
        confidence_halfwidth_95: halfwidths,
        censored: counts.bits.iter().map(|&e| e < MIN_ERRORS).collect(),
        bit_errors: counts.bits,
        symbol_errors: counts.symbols,
    })
}

/// Draws orientations and blockage for one block. Draw order is fixed:
/// per user θ, ω, then blockage, whether or not each is used.
fn realize_block(scenario: &Scenario, mc: &McConfig, rng: &mut Stream) -> Result<ChannelState> {
    let k = scenario.num_users();
    let mut orientations = scenario.ue_orientations.clone();
    let mut blocked = vec![false; k];
    for u in 0..k {
        let theta = sample_polar_angle(&scenario.orientation_model, rng);
        let omega = sample_azimuth(rng);
        let r = scenario.ue_positions[u].horizontal_distance(scenario.led_position);
        let b = sample_blockage(&scenario.blockage_model, r, rng)?;
        if mc.resample_orientation {
            let omega = scenario.ue_fixed_azimuth[u].unwrap_or(omega);
            orientations[u] = Orientation::new(theta, omega)?;
        }
        if mc.resample_blockage {
            blocked[u] = b;
        }
    }
    ChannelState::realize(scenario, &orientations, &blocked)
}

fn simulate_block(
    constellation: &Constellation,
    design: &NomaDesign,
    gains: &[f64],
    noise_std: &[f64],
    len: u64,
    rng: &mut Stream,
) -> Counts {
    let k = design.num_users();
    let m = constellation.order();
    let levels = constellation.levels();
    let positions = design.positions();
    let mut counts = Counts::zeros(k);
    let mut sent = vec![0usize; k];
    for _ in 0..len {
        for s in sent.iter_mut() {
            *s = rng.random_range(0..m);
        }
        let signal: f64 = (0..k).map(|u| design.power[u] * levels[sent[u]]).sum();
        for user in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            let q = gains[user];
            let mut residual = q * signal + noise_std[user] * z;
            for &j in &design.decoding_order[..=positions[user]] {
                let scale = q * design.power[j];
                let est = constellation.detect(residual, scale);
                if j == user {
                    if est != sent[user] {
                        counts.symbols[user] += 1;
                        counts.bits[user] += constellation.bit_errors(sent[user], est) as u64;
                    }
                } else {
                    residual -= scale * levels[est];
                }
            }
        }
    }
    counts
}

/// CSV rows `(user, ber, ser, ci_halfwidth, censored)` for one result.
pub fn result_rows(result: &McResult) -> Vec<(usize, f64, f64, f64, bool)> {
    (0..result.per_user_ber.len())
        .map(|u| {
            (
                u,
                result.per_user_ber[u],
                result.per_user_ser[u],
                result.confidence_halfwidth_95[u],
                result.censored[u],
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::default_scenario;
    use crate::noma::{q_function, union_bound_ber};

    fn single_user(order: u32) -> Scenario {
        let mut s = default_scenario().with_irs_elements(0);
        s.ue_positions.truncate(1);
        s.ue_orientations.truncate(1);
        s.ue_fixed_azimuth.truncate(1);
        s.noise_std.truncate(1);
        s.modulation_order = order;
        s
    }

    #[test]
    fn confidence_examples() {
        let c = estimate_confidence(5000, 10_000).unwrap();
        assert!((c.half_width - 0.0098).abs() < 1e-6);
        assert!(!c.exact && !c.degenerate);

        let z = estimate_confidence(0, 1000).unwrap();
        assert!(z.exact);
        assert!((z.half_width - 3.0 / 1000.0).abs() < 1e-4);

        let one = estimate_confidence(0, 1).unwrap();
        assert!(one.degenerate);
        assert!(estimate_confidence(1, 1).unwrap().degenerate);
        assert!(estimate_confidence(0, 0).is_err());
    }

    #[test]
    fn clopper_pearson_reference() {
        // scipy.stats.beta.ppf references for x=3, n=100.
        let (lo, hi) = clopper_pearson(3, 100);
        assert!((lo - 0.006229971538306395).abs() < 1e-9, "{lo}");
        assert!((hi - 0.08517605297428002).abs() < 1e-9, "{hi}");
    }

    #[test]
    fn halfwidth_shrinks_with_trials() {
        let a = estimate_confidence(1000, 100_000).unwrap().half_width;
        let b = estimate_confidence(2000, 200_000).unwrap().half_width;
        assert!((a / b - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn noiseless_is_error_free() {
        let s = default_scenario();
        let mut quiet = s.clone();
        quiet.noise_std.iter_mut().for_each(|x| *x = 1e-15);
        let d = NomaDesign::fpa(vec![0, 1, 2], 0.3, vec![1.0; s.num_elements()]).unwrap();
        let mut m2 = quiet.clone();
        m2.modulation_order = 2;
        let r = simulate_ber(
            &m2,
            &d,
            &McConfig {
                num_symbols: 20_000,
                ..McConfig::default()
            },
        )
        .unwrap();
        assert!(r.bit_errors.iter().all(|&e| e == 0), "{:?}", r.bit_errors);
        assert!(r.censored.iter().all(|&c| c));
    }

    #[test]
    fn single_user_matches_closed_form() {
        let s = single_user(2);
        let d = NomaDesign {
            decoding_order: vec![0],
            power: vec![1.0],
            rho: vec![],
        };
        let q = ChannelState::from_scenario(&s).unwrap().h_los[0];
        for ber_target in [0.2, 0.05, 0.01] {
            // Pick σ so that Q(q·√2/(2σ)) hits the target.
            let arg = [
                (0.2, 0.8416212335729142),
                (0.05, 1.6448536269514729),
                (0.01, 2.3263478740408408),
            ]
            .iter()
            .find(|(p, _)| *p == ber_target)
            .unwrap()
            .1;
            let mut s2 = s.clone();
            s2.noise_std = vec![q * 2f64.sqrt() / (2.0 * arg)];
            let r = simulate_ber(
                &s2,
                &d,
                &McConfig {
                    num_symbols: 200_000,
                    rng_seed: 11,
                    ..McConfig::default()
                },
            )
            .unwrap();
            let exact = q_function(arg);
            assert!((exact - ber_target).abs() < 1e-12);
            assert!(
                (r.per_user_ber[0] - exact).abs() <= 3.0 * r.confidence_halfwidth_95[0],
                "{} vs {exact}",
                r.per_user_ber[0]
            );
        }
    }

    #[test]
    fn deterministic_across_threads() {
        let s = default_scenario()
            .with_irs_elements(9)
            .with_transmit_snr_db(115.0);
        let d = NomaDesign::fpa(vec![2, 0, 1], 0.3, vec![0.5; 9]).unwrap();
        let mc = McConfig {
            num_symbols: 10_500,
            rng_seed: 3,
            resample_orientation: true,
            resample_blockage: true,
            transmit_snr_db: None,
        };
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(6)
            .build()
            .unwrap();
        let a = one.install(|| simulate_ber(&s, &d, &mc).unwrap());
        let b = many.install(|| simulate_ber(&s, &d, &mc).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.symbols_simulated, 10_500);
    }

    #[test]
    fn bound_dominates_simulation_on_default_scenario() {
        let s = default_scenario();
        let st = ChannelState::from_scenario(&s).unwrap();
        let q = st.combined_gains(&vec![1.0; s.num_elements()]).unwrap();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| q[a].total_cmp(&q[b]));
        let d = NomaDesign::fpa(order, 0.3, vec![1.0; s.num_elements()]).unwrap();
        for snr in [110.0, 120.0, 130.0] {
            let s2 = s.clone().with_transmit_snr_db(snr);
            let bound = union_bound_ber(&d, &st, &s2).unwrap();
            let r = simulate_ber(
                &s2,
                &d,
                &McConfig {
                    num_symbols: 100_000,
                    ..McConfig::default()
                },
            )
            .unwrap();
            let u = d.first_user();
            assert!(
                r.per_user_ber[u]
                    <= bound.union_bound_ber_first_user + r.confidence_halfwidth_95[u],
                "snr {snr}: mc {} bound {}",
                r.per_user_ber[u],
                bound.union_bound_ber_first_user
            );
        }
    }

    #[test]
    fn rejects_infeasible_design() {
        let s = single_user(2);
        let d = NomaDesign {
            decoding_order: vec![0],
            power: vec![0.5],
            rho: vec![],
        };
        assert!(matches!(
            simulate_ber(&s, &d, &McConfig::default()),
            Err(Error::Constraint(_))
        ));
    }
}
