//! Power-domain NOMA: superposition, SIC interference bookkeeping, pairwise
//! error probabilities and the first-decoding-user BER union bound.
//!
//! Symbols are unipolar M-PAM intensity levels with unit average power.
//! The union bound for the user in the first decoding order sums the
//! pairwise error probability of every ordered `(x, x̂)` pair and averages
//! it over all symbol tuples of the interfering users, so the objective is a
//! scalar that depends only on the design and the channel.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{combined_gain_unchecked, ChannelState, Scenario};
use crate::error::{Error, Result};

/// Tolerance on `Σ P_k² = 1`.
pub const POWER_SUM_TOL: f64 = 1e-9;

/// Gaussian tail probability `Q(x) = ½ erfc(x / √2)`.
pub fn q_function(x: f64) -> f64 {
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_SQRT_PI};
    // Low part of 1/√2 beyond f64 precision.
    const FRAC_1_SQRT_2_LO: f64 = -4.833646656726457e-17;
    if !x.is_finite() {
        return 0.5 * libm::erfc(x);
    }
    // The rounding of x/√2 alone costs about x²·ε of relative accuracy in
    // the tail, so correct erfc to first order in that rounding error.
    let z = x * FRAC_1_SQRT_2;
    let dz = x.mul_add(FRAC_1_SQRT_2, -z) + x * FRAC_1_SQRT_2_LO;
    0.5 * (libm::erfc(z) - dz * FRAC_2_SQRT_PI * (-z * z).exp())
}

/// Unipolar PAM constellation with unit average symbol power.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    levels: Vec<f64>,
    bits: u32,
}

impl Constellation {
    /// Levels `c·{0, 1, …, M−1}` with `c` chosen so that the mean of the
    /// squared levels is one. `M` must be a power of two.
    pub fn unipolar_pam(order: u32) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::Domain(format!(
                "modulation order {order} must be a power of two >= 2"
            )));
        }
        let m = order as f64;
        let step = (6.0 / ((m - 1.0) * (2.0 * m - 1.0))).sqrt();
        Ok(Self {
            levels: (0..order).map(|i| step * i as f64).collect(),
            bits: order.trailing_zeros(),
        })
    }

    pub fn order(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    /// Gray label of the symbol with level index `i`.
    pub fn gray_label(&self, i: usize) -> u32 {
        let i = i as u32;
        i ^ (i >> 1)
    }

    /// Number of differing bits between the labels of two level indices.
    pub fn bit_errors(&self, sent: usize, detected: usize) -> u32 {
        (self.gray_label(sent) ^ self.gray_label(detected)).count_ones()
    }

    /// Index of the level nearest to `y / scale`.
    pub fn detect(&self, y: f64, scale: f64) -> usize {
        if !(scale > 0.0) {
            return 0;
        }
        let step = self.levels[1];
        let idx = (y / (scale * step)).round();
        idx.clamp(0.0, (self.levels.len() - 1) as f64) as usize
    }
}

/// Decision variable of the joint optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NomaDesign {
    /// `decoding_order[i]` is the user decoded at position `i`; position 0
    /// is the first decoding order (highest power).
    pub decoding_order: Vec<usize>,
    /// Amplitude coefficient `P_k` indexed by user.
    pub power: Vec<f64>,
    /// Reflection coefficient `ρ_n` indexed by element.
    pub rho: Vec<f64>,
}

impl NomaDesign {
    /// Fixed power allocation along `order` with every element at `rho`.
    pub fn fpa(order: Vec<usize>, alpha: f64, rho: Vec<f64>) -> Result<Self> {
        let ordered = fpa_power_allocation(order.len(), alpha)?;
        let mut power = vec![0.0; order.len()];
        for (pos, &user) in order.iter().enumerate() {
            if user >= power.len() {
                return Err(Error::Domain(format!("user {user} out of range in order")));
            }
            power[user] = ordered[pos];
        }
        Ok(Self {
            decoding_order: order,
            power,
            rho,
        })
    }

    pub fn num_users(&self) -> usize {
        self.power.len()
    }

    pub fn first_user(&self) -> usize {
        self.decoding_order[0]
    }

    /// Decoding position of every user.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.decoding_order.len()];
        for (i, &u) in self.decoding_order.iter().enumerate() {
            pos[u] = i;
        }
        pos
    }
}

/// A violated constraint of the joint design problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// The decoding order is not a permutation of the users.
    InvalidOrder(Vec<usize>),
    /// Power vector length differs from the number of users in the order.
    PowerLength { expected: usize, got: usize },
    /// A power coefficient outside `(0, 1]`.
    PowerRange { user: usize, value: f64 },
    /// Earlier-decoded user does not get strictly more power.
    PowerOrdering {
        earlier: usize,
        later: usize,
        earlier_power: f64,
        later_power: f64,
    },
    /// `Σ P_k²` differs from one.
    PowerSum { sum_of_squares: f64 },
    /// A reflection coefficient outside `[0, 1]`.
    ReflectionRange { element: usize, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidOrder(o) => write!(f, "decoding order {o:?} is not a permutation"),
            Violation::PowerLength { expected, got } => {
                write!(f, "expected {expected} power coefficients, got {got}")
            }
            Violation::PowerRange { user, value } => {
                write!(f, "power of user {user} is {value}, outside (0, 1]")
            }
            Violation::PowerOrdering {
                earlier,
                later,
                earlier_power,
                later_power,
            } => write!(
                f,
                "SIC power ordering: user {earlier} ({earlier_power}) is decoded before user \
                 {later} ({later_power}) but does not have strictly more power"
            ),
            Violation::PowerSum { sum_of_squares } => {
                write!(f, "total power: sum of P_k^2 is {sum_of_squares}, not 1")
            }
            Violation::ReflectionRange { element, value } => {
                write!(
                    f,
                    "reflection coefficient of element {element} is {value}, outside [0, 1]"
                )
            }
        }
    }
}

/// All constraint violations of `design`; empty iff feasible.
pub fn check_constraints(design: &NomaDesign) -> Vec<Violation> {
    let mut out = Vec::new();
    let k = design.decoding_order.len();
    let mut seen = vec![false; k];
    let is_perm = design
        .decoding_order
        .iter()
        .all(|&u| u < k && !std::mem::replace(&mut seen[u], true));
    if !is_perm || k == 0 {
        out.push(Violation::InvalidOrder(design.decoding_order.clone()));
    }
    if design.power.len() != k {
        out.push(Violation::PowerLength {
            expected: k,
            got: design.power.len(),
        });
    }
    for (user, &value) in design.power.iter().enumerate() {
        if !(value > 0.0 && value <= 1.0) {
            out.push(Violation::PowerRange { user, value });
        }
    }
    let sum_sq: f64 = design.power.iter().map(|p| p * p).sum();
    if !((sum_sq - 1.0).abs() <= POWER_SUM_TOL) {
        out.push(Violation::PowerSum {
            sum_of_squares: sum_sq,
        });
    }
    if is_perm && design.power.len() == k {
        for w in design.decoding_order.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(design.power[a] > design.power[b]) {
                out.push(Violation::PowerOrdering {
                    earlier: a,
                    later: b,
                    earlier_power: design.power[a],
                    later_power: design.power[b],
                });
            }
        }
    }
    for (element, &value) in design.rho.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            out.push(Violation::ReflectionRange { element, value });
        }
    }
    out
}

/// Geometric powers `P_{π_i} = α P_{π_{i−1}}` along decoding positions,
/// normalized to `Σ P² = 1`.
pub fn fpa_power_allocation(num_users: usize, alpha: f64) -> Result<Vec<f64>> {
    if num_users == 0 {
        return Err(Error::Domain("FPA needs at least one user".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "FPA coefficient {alpha} outside (0, 1)"
        )));
    }
    let raw: Vec<f64> = (0..num_users).map(|i| alpha.powi(i as i32)).collect();
    let norm = raw.iter().map(|p| p * p).sum::<f64>().sqrt();
    Ok(raw.into_iter().map(|p| p / norm).collect())
}

/// Interference `X_k` seen by `user` after SIC: residuals of every
/// earlier-decoded user plus the full signal of every later-decoded user.
///
/// `symbols` and `estimates` are indexed by user; estimates of users not
/// decoded before `user` are ignored.
pub fn sic_interference(
    design: &NomaDesign,
    user: usize,
    symbols: &[f64],
    estimates: &[f64],
) -> f64 {
    let pos = design.positions();
    let me = pos[user];
    (0..design.num_users())
        .filter(|&j| j != user)
        .map(|j| {
            if pos[j] < me {
                design.power[j] * (symbols[j] - estimates[j])
            } else {
                design.power[j] * symbols[j]
            }
        })
        .sum()
}

/// Probability that minimum-distance detection of the own symbol picks
/// `x̂ = x − Δ` instead of `x`, given combined gain `q`, noise `σ`, own
/// power `P` and interference `X`:
/// `Q( q/(2σ) · sgn(Δ) · (PΔ + 2X) )`.
///
/// For `Δ > 0` this is the textbook conditional PEP; the sign factor makes
/// the expression exact for `Δ < 0` as well.
pub fn pairwise_error_probability(
    q: f64,
    sigma: f64,
    power: f64,
    delta: f64,
    interference: f64,
) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("noise std {sigma} must be positive")));
    }
    if !(power > 0.0) {
        return Err(Error::Domain(format!("power {power} must be positive")));
    }
    if delta == 0.0 {
        return Err(Error::Domain("a pairwise error needs x ≠ x̂".into()));
    }
    Ok(pep_unchecked(q / (2.0 * sigma), power, delta, interference))
}

#[inline]
fn pep_unchecked(half_snr_amp: f64, power: f64, delta: f64, interference: f64) -> f64 {
    q_function(half_snr_amp * delta.signum() * (power * delta + 2.0 * interference))
}

/// Union bound of the first-decoding-order user and per-user diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub union_bound_ber_first_user: f64,
    /// Bound of every user (indexed by user) assuming perfect SIC of the
    /// users decoded before it.
    pub per_user_bounds: Vec<f64>,
    /// Number of `(x, x̂, interferer tuple)` PEP terms in the first-user sum.
    pub evaluations_tau: u64,
}

/// BER union bound for a user at decoding position `position`, with all
/// earlier users perfectly cancelled and all later users interfering.
///
/// Averages over the `M` transmitted symbols and the `M^(later users)`
/// interfering tuples; the SER bound is divided by `log₂ M`.
fn position_bound(
    constellation: &Constellation,
    design: &NomaDesign,
    position: usize,
    q: f64,
    sigma: f64,
) -> (f64, u64) {
    let user = design.decoding_order[position];
    let later: Vec<f64> = design.decoding_order[position + 1..]
        .iter()
        .map(|&u| design.power[u])
        .collect();
    let interference = interference_values(constellation.levels(), &later);
    let levels = constellation.levels();
    let s = q / (2.0 * sigma);
    let p = design.power[user];
    let mut sum = 0.0;
    for &x in &interference {
        for &sent in levels {
            for &alt in levels {
                if alt != sent {
                    sum += pep_unchecked(s, p, sent - alt, x);
                }
            }
        }
    }
    let m = levels.len() as u64;
    let tuples = interference.len() as u64;
    let ser = sum / (m * tuples) as f64;
    let ber = ser / constellation.bits_per_symbol() as f64;
    (ber.clamp(0.0, 1.0), m * (m - 1) * tuples)
}

/// Every value of `Σ_i P_i x_i` over all symbol tuples, in lexicographic
/// tuple order.
fn interference_values(levels: &[f64], powers: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0];
    for &p in powers {
        acc = acc
            .iter()
            .flat_map(|&a| levels.iter().map(move |&x| a + p * x))
            .collect();
    }
    acc
}

/// Evaluates the joint objective for `design` on `state`.
pub fn union_bound_ber(
    design: &NomaDesign,
    state: &ChannelState,
    scenario: &Scenario,
) -> Result<ObjectiveReport> {
    let violations = check_constraints(design);
    if !violations.is_empty() {
        return Err(Error::Constraint(violations));
    }
    let k = design.num_users();
    if k != state.num_users() || k != scenario.num_users() {
        return Err(Error::Domain(format!(
            "design has {k} users, channel {} and scenario {}",
            state.num_users(),
            scenario.num_users()
        )));
    }
    if design.rho.len() != state.num_elements() {
        return Err(Error::Domain(format!(
            "design has {} reflection coefficients for {} elements",
            design.rho.len(),
            state.num_elements()
        )));
    }
    let constellation = Constellation::unipolar_pam(scenario.modulation_order)?;
    let mut per_user = vec![0.0; k];
    let mut tau = 0;
    for position in 0..k {
        let user = design.decoding_order[position];
        let q = combined_gain_unchecked(state, &design.rho, user);
        let (b, t) = position_bound(
            &constellation,
            design,
            position,
            q,
            scenario.noise_std[user],
        );
        per_user[user] = b;
        if position == 0 {
            tau = t;
        }
    }
    Ok(ObjectiveReport {
        union_bound_ber_first_user: per_user[design.first_user()],
        per_user_bounds: per_user,
        evaluations_tau: tau,
    })
}

/// Precomputed evaluator of the first-user bound for hot optimizer loops.
/// The caller guarantees feasibility of the designs it passes in.
#[derive(Debug, Clone)]
pub struct FirstUserObjective<'a> {
    state: &'a ChannelState,
    noise_std: &'a [f64],
    constellation: Constellation,
}

impl<'a> FirstUserObjective<'a> {
    pub fn new(scenario: &'a Scenario, state: &'a ChannelState) -> Result<Self> {
        if state.num_users() != scenario.num_users() {
            return Err(Error::Domain(format!(
                "channel has {} users, scenario {}",
                state.num_users(),
                scenario.num_users()
            )));
        }
        Ok(Self {
            state,
            noise_std: &scenario.noise_std,
            constellation: Constellation::unipolar_pam(scenario.modulation_order)?,
        })
    }

    pub fn evaluate(&self, design: &NomaDesign) -> f64 {
        let user = design.first_user();
        let q = combined_gain_unchecked(self.state, &design.rho, user);
        position_bound(&self.constellation, design, 0, q, self.noise_std[user]).0
    }
}
