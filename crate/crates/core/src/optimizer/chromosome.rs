use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::noma::{check_constraints, NomaDesign};

/// Minimum spacing between consecutive ordered powers after repair, so the
/// strict SIC ordering has a numeric witness.
pub const POWER_GAP: f64 = 1e-6;

/// GA encoding `[π₁…π_K, P₁…P_K, ρ₁…ρ_N]`: 2K + N genes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chromosome {
    pub order_genes: Vec<usize>,
    /// Power gene per user (indexed by user, not by decoding position).
    pub power_genes: Vec<f64>,
    pub rho_genes: Vec<f64>,
}

impl Chromosome {
    pub fn random<R: Rng + ?Sized>(num_users: usize, num_elements: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..num_users).collect();
        order.shuffle(rng);
        Self {
            order_genes: order,
            power_genes: (0..num_users).map(|_| rng.random::<f64>()).collect(),
            rho_genes: (0..num_elements).map(|_| rng.random::<f64>()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.order_genes.len() + self.power_genes.len() + self.rho_genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn encode(design: &NomaDesign) -> Chromosome {
    Chromosome {
        order_genes: design.decoding_order.clone(),
        power_genes: design.power.clone(),
        rho_genes: design.rho.clone(),
    }
}

/// Decodes a chromosome into a feasible design (repairing it first).
pub fn decode(chromosome: &Chromosome) -> NomaDesign {
    let c = repair(chromosome);
    NomaDesign {
        decoding_order: c.order_genes,
        power: c.power_genes,
        rho: c.rho_genes,
    }
}

/// Maps any chromosome onto the feasible set.
///
/// - order genes become a permutation (first occurrences kept, missing users
///   appended in ascending order);
/// - reflection genes are clamped to `[0, 1]` (NaN becomes 0);
/// - power magnitudes are sorted descending along the decoding order,
///   spaced by at least [`POWER_GAP`] and scaled to `Σ P² = 1`.
///
/// Feasible power genes are left untouched, which makes repair idempotent.
pub fn repair(chromosome: &Chromosome) -> Chromosome {
    let k = chromosome.power_genes.len();
    let order = repair_order(&chromosome.order_genes, k);
    let rho = chromosome
        .rho_genes
        .iter()
        .map(|&r| if r.is_nan() { 0.0 } else { r.clamp(0.0, 1.0) })
        .collect();
    let trial = NomaDesign {
        decoding_order: order,
        power: chromosome.power_genes.clone(),
        rho: Vec::new(),
    };
    let power = if k > 0 && check_constraints(&trial).is_empty() {
        trial.power
    } else {
        repair_power(&trial.decoding_order, &chromosome.power_genes)
    };
    Chromosome {
        order_genes: trial.decoding_order,
        power_genes: power,
        rho_genes: rho,
    }
}

fn repair_order(genes: &[usize], k: usize) -> Vec<usize> {
    let mut seen = vec![false; k];
    let mut order: Vec<usize> = genes
        .iter()
        .copied()
        .filter(|&u| u < k && !std::mem::replace(&mut seen[u], true))
        .collect();
    order.extend((0..k).filter(|&u| !seen[u]));
    order
}

fn repair_power(order: &[usize], genes: &[f64]) -> Vec<f64> {
    let k = genes.len();
    let mut mags: Vec<f64> = genes
        .iter()
        .map(|p| if p.is_finite() { p.abs() } else { 0.0 })
        .collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    if mags.iter().all(|&m| m == 0.0) {
        mags = (0..k).map(|i| (k - i) as f64).collect();
    }
    normalize(&mut mags);
    // Enforce twice the gap so the final rescale cannot shrink it below
    // POWER_GAP.
    let gap = 2.0 * POWER_GAP;
    let mut floor = 0.0;
    for m in mags.iter_mut().rev() {
        *m = m.max(floor + gap);
        floor = *m;
    }
    normalize(&mut mags);
    let mut power = vec![0.0; k];
    for (pos, &user) in order.iter().enumerate() {
        power[user] = mags[pos];
    }
    power
}

/// Scales a non-zero vector to unit norm, without underflow on tiny entries.
fn normalize(v: &mut [f64]) {
    let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    v.iter_mut().for_each(|x| *x /= max);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noma::check_constraints;
    use crate::rng::stream;

    #[test]
    fn valid_chromosome_is_unchanged() {
        let d = NomaDesign::fpa(vec![2, 0, 1], 0.3, vec![0.1, 0.9, 1.0, 0.0]).unwrap();
        let c = encode(&d);
        assert_eq!(repair(&c), c);
        assert_eq!(decode(&c), d);
    }

    #[test]
    fn rho_is_clamped() {
        let c = Chromosome {
            order_genes: vec![0],
            power_genes: vec![1.0],
            rho_genes: vec![1.3, -0.2, f64::NAN],
        };
        assert_eq!(repair(&c).rho_genes, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn powers_are_sorted_and_normalized() {
        let c = Chromosome {
            order_genes: vec![0, 1, 2],
            power_genes: vec![0.2, 0.9, 0.5],
            rho_genes: vec![],
        };
        let r = repair(&c);
        // [0.9, 0.5, 0.2] / sqrt(1.1)
        for (got, want) in r.power_genes.iter().zip([0.858116, 0.476731, 0.190693]) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn powers_follow_decoding_order() {
        let c = Chromosome {
            order_genes: vec![2, 0, 1],
            power_genes: vec![0.2, 0.9, 0.5],
            rho_genes: vec![],
        };
        let d = decode(&c);
        assert!(d.power[2] > d.power[0] && d.power[0] > d.power[1]);
        assert!(check_constraints(&d).is_empty());
    }

    #[test]
    fn degenerate_genes_are_repaired() {
        let c = Chromosome {
            order_genes: vec![1, 1, 7],
            power_genes: vec![0.0, f64::NAN, 0.0],
            rho_genes: vec![0.5],
        };
        let r = repair(&c);
        assert_eq!(r.order_genes, vec![1, 0, 2]);
        let d = decode(&c);
        assert!(
            check_constraints(&d).is_empty(),
            "{:?}",
            check_constraints(&d)
        );

        let tied = Chromosome {
            order_genes: vec![0, 1, 2],
            power_genes: vec![0.5, 0.5, 0.5],
            rho_genes: vec![],
        };
        let d = decode(&tied);
        assert!(check_constraints(&d).is_empty());
        assert!(d.power[0] - d.power[1] >= POWER_GAP);
    }

    #[test]
    fn single_user_gets_full_power() {
        let c = Chromosome {
            order_genes: vec![0],
            power_genes: vec![0.123],
            rho_genes: vec![],
        };
        assert_eq!(decode(&c).power, vec![1.0]);
    }

    #[test]
    fn random_chromosome_shape() {
        let mut rng = stream(3, &[]);
        let c = Chromosome::random(3, 4, &mut rng);
        assert_eq!(c.len(), 2 * 3 + 4);
        let mut o = c.order_genes.clone();
        o.sort();
        assert_eq!(o, vec![0, 1, 2]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn any_chromosome() -> impl Strategy<Value = Chromosome> {
            (1usize..6, 0usize..8).prop_flat_map(|(k, n)| {
                (
                    prop::collection::vec(0usize..k + 2, k),
                    prop::collection::vec(
                        prop_oneof![
                            -2.0f64..2.0,
                            Just(0.0),
                            Just(f64::NAN),
                            Just(1e-300),
                            Just(f64::INFINITY)
                        ],
                        k,
                    ),
                    prop::collection::vec(-1.0f64..2.0, n),
                )
                    .prop_map(|(o, p, r)| Chromosome {
                        order_genes: o,
                        power_genes: p,
                        rho_genes: r,
                    })
            })
        }

        proptest! {
            #[test]
            fn repair_is_feasible_and_idempotent(c in any_chromosome()) {
                let once = repair(&c);
                let d = decode(&c);
                prop_assert!(check_constraints(&d).is_empty(), "{:?}", check_constraints(&d));
                prop_assert_eq!(repair(&once), once);
            }

            #[test]
            fn encode_decode_round_trip(c in any_chromosome()) {
                let d = decode(&c);
                prop_assert_eq!(decode(&encode(&d)), d);
            }
        }
    }
}
