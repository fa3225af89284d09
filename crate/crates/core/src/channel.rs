//! Lambertian LoS and IRS-cascaded channel gains.
//!
//! A [`Scenario`] is the immutable world description (room, LED, IRS
//! elements, users, receiver optics, noise). A [`ChannelState`] is one
//! realization of the per-user LoS gains and the user×element matrix of
//! reflected gains under a given set of device orientations and blockage
//! flags. Reflection coefficients are applied later by [`combined_gain`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    cos_angle_between, pd_normal, Angle, BlockageModel, Orientation, OrientationModel, Vec3,
};
use crate::noma::Violation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Room extent `(x, y, z)` in meters; the origin is a floor corner.
    pub room_dims: Vec3,
    pub led_position: Vec3,
    pub led_normal: Vec3,
    /// LED half-intensity angle `Φ_½`.
    pub half_intensity_angle: Angle,
    /// Photodiode area `A`, m².
    pub pd_area: f64,
    /// Receiver field of view `Ψ_c`.
    pub fov: Angle,
    /// Concentrator refractive index `ς`.
    pub refractive_index: f64,
    /// Optical filter gain `G_f`.
    pub filter_gain: f64,
    pub irs_positions: Vec<Vec3>,
    pub irs_normals: Vec<Vec3>,
    pub ue_positions: Vec<Vec3>,
    /// Orientation used for deterministic (non-resampled) evaluations.
    pub ue_orientations: Vec<Orientation>,
    /// Per-user azimuth override (radians) applied when orientations are
    /// resampled; `None` draws the azimuth uniformly.
    pub ue_fixed_azimuth: Vec<Option<f64>>,
    /// Per-user noise standard deviation `σ_k`.
    pub noise_std: Vec<f64>,
    pub orientation_model: OrientationModel,
    pub blockage_model: BlockageModel,
    /// Unipolar PAM order `M` shared by all users.
    pub modulation_order: u32,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn num_elements(&self) -> usize {
        self.irs_positions.len()
    }

    /// Lambertian order of the LED.
    pub fn lambertian_order(&self) -> f64 {
        // Validated scenarios always have an in-range half angle.
        lambertian_order(self.half_intensity_angle).unwrap_or(f64::NAN)
    }

    /// Sets every user's noise so that the transmit SNR `10·log10(1/σ²)`
    /// equals `snr_db` (unit total transmit power).
    pub fn set_transmit_snr_db(&mut self, snr_db: f64) {
        let sigma = snr_db_to_noise_std(snr_db);
        self.noise_std = vec![sigma; self.num_users()];
    }

    pub fn with_transmit_snr_db(mut self, snr_db: f64) -> Self {
        self.set_transmit_snr_db(snr_db);
        self
    }

    /// Replaces the IRS with `n` elements from [`wall_irs_layout`].
    pub fn with_irs_elements(mut self, n: usize) -> Self {
        let (p, nrm) = wall_irs_layout(n, self.room_dims);
        self.irs_positions = p;
        self.irs_normals = nrm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let phi = self.half_intensity_angle.degrees();
        if !(phi > 0.0 && phi < 90.0) {
            return bad(format!("half-intensity angle {phi}° must lie in (0°, 90°)"));
        }
        let fov = self.fov.degrees();
        if !(fov > 0.0 && fov <= 90.0) {
            return bad(format!("field of view {fov}° must lie in (0°, 90°]"));
        }
        if !(self.pd_area > 0.0) {
            return bad(format!("PD area {} must be positive", self.pd_area));
        }
        if !(self.refractive_index >= 1.0) {
            return bad(format!(
                "refractive index {} must be >= 1",
                self.refractive_index
            ));
        }
        if !(self.filter_gain > 0.0) {
            return bad(format!("filter gain {} must be positive", self.filter_gain));
        }
        let d = self.room_dims;
        if !(d.x > 0.0 && d.y > 0.0 && d.z > 0.0) {
            return bad(format!("room dimensions {d:?} must be positive"));
        }
        let inside = |p: Vec3| {
            p.is_finite()
                && (0.0..=d.x).contains(&p.x)
                && (0.0..=d.y).contains(&p.y)
                && (0.0..=d.z).contains(&p.z)
        };
        if !inside(self.led_position) {
            return bad(format!("LED {:?} outside the room", self.led_position));
        }
        if self.led_position.z != d.z {
            return bad(format!(
                "LED height {} must equal the ceiling height {}",
                self.led_position.z, d.z
            ));
        }
        if self.led_normal.normalized().is_none() {
            return bad("LED normal has zero length".into());
        }
        if self.num_users() == 0 {
            return bad("at least one user is required".into());
        }
        let k = self.num_users();
        if self.ue_orientations.len() != k
            || self.noise_std.len() != k
            || self.ue_fixed_azimuth.len() != k
        {
            return bad(format!(
                "per-user lists disagree: {} positions, {} orientations, {} noise values, {} azimuth overrides",
                k,
                self.ue_orientations.len(),
                self.noise_std.len(),
                self.ue_fixed_azimuth.len()
            ));
        }
        if self.irs_normals.len() != self.irs_positions.len() {
            return bad(format!(
                "{} IRS positions but {} normals",
                self.irs_positions.len(),
                self.irs_normals.len()
            ));
        }
        for (i, p) in self.ue_positions.iter().enumerate() {
            if !inside(*p) {
                return bad(format!("UE {i} at {p:?} outside the room"));
            }
        }
        for (i, (p, n)) in self.irs_positions.iter().zip(&self.irs_normals).enumerate() {
            if !inside(*p) {
                return bad(format!("IRS element {i} at {p:?} outside the room"));
            }
            if n.normalized().is_none() {
                return bad(format!("IRS element {i} has a zero normal"));
            }
        }
        if let Some(s) = self
            .noise_std
            .iter()
            .find(|s| !(**s > 0.0 && s.is_finite()))
        {
            return bad(format!("noise standard deviation {s} must be positive"));
        }
        if self.modulation_order < 2 || !self.modulation_order.is_power_of_two() {
            return bad(format!(
                "modulation order {} must be a power of two >= 2",
                self.modulation_order
            ));
        }
        self.blockage_model
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

pub fn snr_db_to_noise_std(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 20.0)
}

/// Element layout used when a config does not list IRS positions: a
/// near-square grid on the `x = 0` wall, 0.1 m pitch, centered at
/// `(y, z) = (room_y / 2, 1.5 m)`, normals pointing into the room.
/// One hundred elements give a 10×10 grid covering heights 1.0–2.0 m.
pub fn wall_irs_layout(n: usize, room_dims: Vec3) -> (Vec<Vec3>, Vec<Vec3>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    const PITCH: f64 = 0.1;
    const CENTER_Z: f64 = 1.5;
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let y0 = room_dims.y / 2.0 - PITCH * (cols as f64 - 1.0) / 2.0;
    let z0 = CENTER_Z - PITCH * (rows as f64 - 1.0) / 2.0;
    let positions = (0..n)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            Vec3::new(0.0, y0 + PITCH * c as f64, z0 + PITCH * r as f64)
        })
        .collect();
    (positions, vec![Vec3::new(1.0, 0.0, 0.0); n])
}

/// Per-user link snapshot. Gains are dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub h_los: Vec<f64>,
    /// `h_ref[k][n]`: gain from the LED to user `k` via element `n`.
    pub h_ref: Vec<Vec<f64>>,
    pub los_blocked: Vec<bool>,
}

impl ChannelState {
    /// Channel under the scenario's own orientations with no blockage.
    pub fn from_scenario(scenario: &Scenario) -> Result<Self> {
        let k = scenario.num_users();
        Self::realize(scenario, &scenario.ue_orientations, &vec![false; k])
    }

    /// Channel under explicit orientations and blockage flags.
    pub fn realize(
        scenario: &Scenario,
        orientations: &[Orientation],
        blocked: &[bool],
    ) -> Result<Self> {
        let k = scenario.num_users();
        if orientations.len() != k || blocked.len() != k {
            return Err(Error::Domain(format!(
                "expected {k} orientations and blockage flags, got {} and {}",
                orientations.len(),
                blocked.len()
            )));
        }
        let optics = Optics::of(scenario)?;
        let mut h_los = Vec::with_capacity(k);
        let mut h_ref = Vec::with_capacity(k);
        for user in 0..k {
            let pd = pd_normal(orientations[user]);
            let pos = scenario.ue_positions[user];
            h_los.push(if blocked[user] {
                0.0
            } else {
                optics.los(scenario, pos, pd)?
            });
            let row = (0..scenario.num_elements())
                .map(|n| optics.reflected(scenario, pos, pd, n))
                .collect::<Result<Vec<_>>>()?;
            h_ref.push(row);
        }
        Ok(Self {
            h_los,
            h_ref,
            los_blocked: blocked.to_vec(),
        })
    }

    pub fn num_users(&self) -> usize {
        self.h_los.len()
    }

    pub fn num_elements(&self) -> usize {
        self.h_ref.first().map_or(0, Vec::len)
    }

    /// True when no user receives any light, whatever the reflection
    /// coefficients.
    pub fn is_dark(&self) -> bool {
        self.h_los.iter().all(|&h| h == 0.0) && self.h_ref.iter().flatten().all(|&h| h == 0.0)
    }

    /// Combined gains `q_k` for every user.
    pub fn combined_gains(&self, rho: &[f64]) -> Result<Vec<f64>> {
        (0..self.num_users())
            .map(|k| combined_gain(self, rho, k))
            .collect()
    }
}

/// Lambertian order `m = −1 / log₂(cos Φ_½)`.
pub fn lambertian_order(phi_half: Angle) -> Result<f64> {
    let deg = phi_half.degrees();
    if !(deg > 0.0 && deg < 90.0) {
        return Err(Error::Domain(format!(
            "half-intensity angle {deg}° outside (0°, 90°)"
        )));
    }
    Ok(-1.0 / phi_half.cos().log2())
}

/// Optical concentrator gain: `ς² / sin²Ψ_c` inside the field of view,
/// zero outside.
pub fn concentrator_gain(varsigma: f64, psi: Angle, psi_c: Angle) -> f64 {
    if psi.degrees() >= 0.0 && psi.degrees() <= psi_c.degrees() {
        let s = psi_c.sin();
        varsigma * varsigma / (s * s)
    } else {
        0.0
    }
}

/// Quantities shared by every link of a scenario.
struct Optics {
    m: f64,
    /// `A (m+1) / 2π · G_f · G_c`, the distance-free part of the link gain.
    aperture: f64,
    cos_fov: f64,
    led_normal: Vec3,
}

impl Optics {
    fn of(s: &Scenario) -> Result<Self> {
        let m = lambertian_order(s.half_intensity_angle)?;
        let gc = concentrator_gain(s.refractive_index, Angle::from_degrees(0.0), s.fov);
        Ok(Self {
            m,
            aperture: s.pd_area * (m + 1.0) / (2.0 * std::f64::consts::PI) * s.filter_gain * gc,
            cos_fov: s.fov.cos(),
            led_normal: s.led_normal,
        })
    }

    /// `V cosᵐφ cosψ` for a path of total length `dist`; zero outside the
    /// FoV or when either end faces away.
    fn gain(&self, dist: f64, cos_phi: f64, cos_psi: f64) -> f64 {
        if cos_phi < 0.0 || cos_psi < 0.0 || cos_psi < self.cos_fov {
            return 0.0;
        }
        self.aperture / (dist * dist) * cos_phi.powf(self.m) * cos_psi
    }

    fn los(&self, s: &Scenario, ue: Vec3, pd: Vec3) -> Result<f64> {
        let d = ue - s.led_position;
        if d.norm() == 0.0 {
            return Err(Error::Domain("UE coincides with the LED".into()));
        }
        let cos_phi = cos_angle_between(d, self.led_normal)?;
        let cos_psi = cos_angle_between(-d, pd)?;
        Ok(self.gain(d.norm(), cos_phi, cos_psi))
    }

    fn reflected(&self, s: &Scenario, ue: Vec3, pd: Vec3, n: usize) -> Result<f64> {
        let elem = s.irs_positions[n];
        let led_to_elem = elem - s.led_position;
        let ue_to_elem = elem - ue;
        if led_to_elem.norm() == 0.0 || ue_to_elem.norm() == 0.0 {
            return Err(Error::Domain(format!(
                "IRS element {n} coincides with the LED or a UE"
            )));
        }
        // The element only reflects into the half-space its normal faces.
        let en = s.irs_normals[n];
        if cos_angle_between(-led_to_elem, en)? < 0.0 || cos_angle_between(-ue_to_elem, en)? < 0.0 {
            return Ok(0.0);
        }
        let cos_phi = cos_angle_between(led_to_elem, self.led_normal)?;
        let cos_psi = cos_angle_between(ue_to_elem, pd)?;
        Ok(self.gain(led_to_elem.norm() + ue_to_elem.norm(), cos_phi, cos_psi))
    }
}

/// LoS gain of `user` under the scenario's own orientation.
pub fn los_gain(scenario: &Scenario, user: usize, blocked: bool) -> Result<f64> {
    check_user(scenario, user)?;
    if blocked {
        return Ok(0.0);
    }
    let optics = Optics::of(scenario)?;
    let pd = pd_normal(scenario.ue_orientations[user]);
    optics.los(scenario, scenario.ue_positions[user], pd)
}

/// Cascaded LED → element → user gain under the scenario's own orientation.
pub fn reflected_gain(scenario: &Scenario, user: usize, element: usize) -> Result<f64> {
    check_user(scenario, user)?;
    if element >= scenario.num_elements() {
        return Err(Error::Domain(format!(
            "element index {element} out of range (N = {})",
            scenario.num_elements()
        )));
    }
    let optics = Optics::of(scenario)?;
    let pd = pd_normal(scenario.ue_orientations[user]);
    optics.reflected(scenario, scenario.ue_positions[user], pd, element)
}

fn check_user(scenario: &Scenario, user: usize) -> Result<()> {
    if user >= scenario.num_users() {
        return Err(Error::Domain(format!(
            "user index {user} out of range (K = {})",
            scenario.num_users()
        )));
    }
    Ok(())
}

/// `q_k = h_los[k] + Σ_n ρ_n h_ref[k][n]`.
pub fn combined_gain(state: &ChannelState, rho: &[f64], user: usize) -> Result<f64> {
    if rho.len() != state.num_elements() {
        return Err(Error::Domain(format!(
            "{} reflection coefficients for {} elements",
            rho.len(),
            state.num_elements()
        )));
    }
    let bad: Vec<Violation> = rho
        .iter()
        .enumerate()
        .filter(|(_, r)| !(0.0..=1.0).contains(*r))
        .map(|(element, &value)| Violation::ReflectionRange { element, value })
        .collect();
    if !bad.is_empty() {
        return Err(Error::Constraint(bad));
    }
    Ok(combined_gain_unchecked(state, rho, user))
}

/// [`combined_gain`] without argument validation, for hot loops.
pub(crate) fn combined_gain_unchecked(state: &ChannelState, rho: &[f64], user: usize) -> f64 {
    state.h_los[user]
        + state.h_ref[user]
            .iter()
            .zip(rho)
            .map(|(h, r)| h * r)
            .sum::<f64>()
}
