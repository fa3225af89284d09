//! Grid search over every decoding order, power split and ρ vector.
//!
//! Power fractions `p_k = P_k²` live on a grid of step `power_step`, sum to
//! one and decrease strictly along the decoding order. Each ρ takes the
//! values `0, rho_step, …, 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelState, Scenario};
use crate::error::{Error, Result};
use crate::noma::{FirstUserObjective, NomaDesign};

pub const DEFAULT_MAX_EVALUATIONS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EsConfig {
    pub power_step: f64,
    pub rho_step: f64,
    pub max_evaluations: u64,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            power_step: 0.05,
            rho_step: 0.25,
            max_evaluations: DEFAULT_MAX_EVALUATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsResult {
    pub design: NomaDesign,
    pub fitness: f64,
    pub evaluations: u64,
}

/// Size of the grid actually enumerated and of the nominal
/// `K!·10^(2K+N)` space, both as base-10 logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchSpace {
    pub log10_grid_points: f64,
    pub log10_nominal: f64,
}

fn grid_count(step: f64, name: &str) -> Result<usize> {
    let t = (1.0 / step).round();
    if !(step > 0.0 && step <= 1.0) || (t * step - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "{name} {step} must be in (0, 1] and divide 1 evenly"
        )));
    }
    Ok(t as usize)
}

fn log10_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).log10()).sum()
}

/// Number of strictly decreasing sequences of `parts` positive integers
/// summing to `total`, as a float (it can be astronomically large).
fn count_decreasing(parts: usize, total: usize) -> f64 {
    // c[j][s]: sequences of j parts summing to s with every part < bound,
    // built by adding parts in increasing order of value.
    let mut c = vec![vec![0.0f64; total + 1]; parts + 1];
    c[0][0] = 1.0;
    for value in 1..=total {
        for j in (1..=parts).rev() {
            for s in (value..=total).rev() {
                c[j][s] += c[j - 1][s - value];
            }
        }
    }
    c[parts][total]
}

pub fn search_space(
    num_users: usize,
    num_elements: usize,
    power_step: f64,
    rho_step: f64,
) -> Result<SearchSpace> {
    let t = grid_count(power_step, "power_step")?;
    let levels = grid_count(rho_step, "rho_step")? + 1;
    let log10_grid_points = log10_factorial(num_users)
        + count_decreasing(num_users, t).log10()
        + num_elements as f64 * (levels as f64).log10();
    let log10_nominal = log10_factorial(num_users) + (2 * num_users + num_elements) as f64;
    Ok(SearchSpace {
        log10_grid_points,
        log10_nominal,
    })
}

fn decreasing_compositions(parts: usize, total: usize) -> Vec<Vec<usize>> {
    fn go(
        parts: usize,
        total: usize,
        below: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if parts == 0 {
            if total == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        // Remaining parts are distinct and < v, so they sum to at most
        // (v-1)+(v-2)+…; prune hopeless prefixes.
        for v in (1..below.min(total + 1)).rev() {
            let (p, v64) = (parts as i64, v as i64);
            let max_rest = (p - 1) * (2 * v64 - p) / 2;
            if v64 + max_rest < total as i64 {
                break;
            }
            prefix.push(v);
            go(parts - 1, total - v, v, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(parts, total, total + 1, &mut Vec::new(), &mut out);
    out
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(rest: &mut Vec<usize>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let u = rest.remove(i);
            prefix.push(u);
            go(rest, prefix, out);
            prefix.pop();
            rest.insert(i, u);
        }
    }
    let mut out = Vec::new();
    go(&mut (0..k).collect(), &mut Vec::new(), &mut out);
    out
}

/// Global grid optimum of the first-user bound.
pub fn exhaustive_search(
    scenario: &Scenario,
    state: &ChannelState,
    power_step: f64,
    rho_step: f64,
) -> Result<NomaDesign> {
    let config = EsConfig {
        power_step,
        rho_step,
        ..EsConfig::default()
    };
    Ok(exhaustive_search_with(scenario, state, &config)?.design)
}

pub fn exhaustive_search_with(
    scenario: &Scenario,
    state: &ChannelState,
    config: &EsConfig,
) -> Result<EsResult> {
    let k = scenario.num_users();
    let n = scenario.num_elements();
    if state.num_users() != k || state.num_elements() != n {
        return Err(Error::Domain(format!(
            "channel is {}x{}, scenario {k}x{n}",
            state.num_users(),
            state.num_elements()
        )));
    }
    let space = search_space(k, n, config.power_step, config.rho_step)?;
    if space.log10_grid_points > (config.max_evaluations as f64).log10() {
        return Err(Error::SearchSpaceTooLarge {
            log10_grid_points: space.log10_grid_points,
            log10_nominal: space.log10_nominal,
            cap: config.max_evaluations,
        });
    }
    let t = grid_count(config.power_step, "power_step")?;
    let levels = grid_count(config.rho_step, "rho_step")?;
    let splits = decreasing_compositions(k, t);
    if splits.is_empty() {
        return Err(Error::Domain(format!(
            "no strictly decreasing power split of {k} users at step {}",
            config.power_step
        )));
    }
    let objective = FirstUserObjective::new(scenario, state)?;
    let rho_points = (levels + 1).pow(n as u32);
    let outer: Vec<(Vec<usize>, &Vec<usize>)> = permutations(k)
        .into_iter()
        .flat_map(|o| splits.iter().map(move |s| (o.clone(), s)))
        .collect();

    // Each outer job scans the full ρ grid; ties resolve to the earliest
    // enumeration index so the answer does not depend on scheduling.
    let best = outer
        .par_iter()
        .enumerate()
        .map(|(job, (order, split))| {
            let mut power = vec![0.0; k];
            for (pos, &user) in order.iter().enumerate() {
                power[user] = (split[pos] as f64 / t as f64).sqrt();
            }
            let mut design = NomaDesign {
                decoding_order: order.clone(),
                power,
                rho: vec![0.0; n],
            };
            let mut digits = vec![0usize; n];
            let mut local: Option<(f64, usize, NomaDesign)> = None;
            for idx in 0..rho_points {
                for (r, &d) in design.rho.iter_mut().zip(&digits) {
                    *r = d as f64 / levels as f64;
                }
                let f = objective.evaluate(&design);
                if local.as_ref().is_none_or(|(bf, _, _)| f < *bf) {
                    local = Some((f, job * rho_points + idx, design.clone()));
                }
                for d in digits.iter_mut() {
                    *d += 1;
                    if *d <= levels {
                        break;
                    }
                    *d = 0;
                }
            }
            local.expect("rho grid has at least one point")
        })
        .reduce_with(|a, b| match a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) {
            std::cmp::Ordering::Greater => b,
            _ => a,
        })
        .expect("at least one order and split");
    Ok(EsResult {
        design: best.2,
        fitness: best.0,
        evaluations: (outer.len() * rho_points) as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::default_scenario;
    use crate::noma::{check_constraints, union_bound_ber};

    fn reduced(k: usize, n: usize) -> (Scenario, ChannelState) {
        let mut s = default_scenario().with_irs_elements(n);
        s.ue_positions.truncate(k);
        s.ue_orientations.truncate(k);
        s.ue_fixed_azimuth.truncate(k);
        s.noise_std.truncate(k);
        let st = ChannelState::from_scenario(&s).unwrap();
        (s, st)
    }

    #[test]
    fn composition_counts() {
        assert_eq!(decreasing_compositions(2, 20).len(), 9);
        assert_eq!(count_decreasing(2, 20), 9.0);
        for (k, t) in [(1, 5), (3, 20), (3, 100), (4, 30), (5, 10), (5, 14)] {
            let list = decreasing_compositions(k, t);
            assert_eq!(list.len() as f64, count_decreasing(k, t), "k={k} t={t}");
            for c in &list {
                assert_eq!(c.iter().sum::<usize>(), t);
                assert!(c.windows(2).all(|w| w[0] > w[1]));
            }
        }
        assert!(decreasing_compositions(5, 14).is_empty());
    }

    #[test]
    fn single_user_single_element_picks_full_reflection() {
        let (s, st) = reduced(1, 1);
        assert!(st.h_ref[0][0] > 0.0);
        let r = exhaustive_search_with(
            &s,
            &st,
            &EsConfig {
                power_step: 1.0,
                rho_step: 0.5,
                ..EsConfig::default()
            },
        )
        .unwrap();
        assert_eq!(r.evaluations, 3);
        assert_eq!(r.design.rho, vec![1.0]);
        assert_eq!(r.design.power, vec![1.0]);
    }

    #[test]
    fn two_users_without_irs_matches_direct_scan() {
        let (s, st) = reduced(2, 0);
        let d = exhaustive_search(&s, &st, 0.01, 0.5).unwrap();
        assert!(check_constraints(&d).is_empty());
        let mut best = f64::INFINITY;
        for order in [[0, 1], [1, 0]] {
            for a in 51..100 {
                let mut power = vec![0.0; 2];
                power[order[0]] = (a as f64 / 100.0).sqrt();
                power[order[1]] = ((100 - a) as f64 / 100.0).sqrt();
                let cand = NomaDesign {
                    decoding_order: order.to_vec(),
                    power,
                    rho: vec![],
                };
                let f = union_bound_ber(&cand, &st, &s)
                    .unwrap()
                    .union_bound_ber_first_user;
                best = best.min(f);
            }
        }
        let got = union_bound_ber(&d, &st, &s)
            .unwrap()
            .union_bound_ber_first_user;
        assert_eq!(got, best);
    }

    #[test]
    fn acceptance_grid_size() {
        let (s, st) = reduced(2, 2);
        let r = exhaustive_search_with(&s, &st, &EsConfig::default()).unwrap();
        assert_eq!(r.evaluations, 2 * 9 * 25);
        let f = union_bound_ber(&r.design, &st, &s)
            .unwrap()
            .union_bound_ber_first_user;
        assert_eq!(f, r.fitness);
    }

    #[test]
    fn full_scale_search_is_refused() {
        let s = default_scenario();
        let st = ChannelState::from_scenario(&s).unwrap();
        match exhaustive_search(&s, &st, 0.01, 0.1) {
            Err(Error::SearchSpaceTooLarge {
                log10_nominal,
                log10_grid_points,
                cap,
            }) => {
                assert!((log10_nominal - (6f64.log10() + 106.0)).abs() < 1e-12);
                assert!(log10_grid_points > 100.0);
                assert_eq!(cap, DEFAULT_MAX_EVALUATIONS);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn bad_steps_are_rejected() {
        let (s, st) = reduced(2, 1);
        assert!(matches!(
            exhaustive_search(&s, &st, 0.3, 0.5),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            exhaustive_search(&s, &st, 0.05, 0.0),
            Err(Error::Domain(_))
        ));
    }
}
