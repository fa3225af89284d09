//! 3D vectors, irradiance/incidence cosines, device orientation and
//! LoS blockage statistics.
//!
//! Orientation follows the spherical convention used throughout the crate:
//! the photodiode normal is `[sin θ cos ω, sin θ sin ω, cos θ]`, so `θ = 0`
//! points straight up at the ceiling. The polar angle is Laplace distributed
//! and blockers form a Poisson point process of cylinders, which gives the
//! closed-form LoS blockage probability in [`blockage_probability`].

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const UP: Vec3 = Vec3::new(0.0, 0.0, 1.0);
    pub const DOWN: Vec3 = Vec3::new(0.0, 0.0, -1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction, or `None` for a zero-length
    /// (or non-finite) vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    /// Horizontal (xy-plane) distance between two points.
    pub fn horizontal_distance(self, other: Vec3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Cosine of an angle given in degrees.
///
/// Returns exact results at the angles where the cosine is rational
/// (multiples of 60° and 90°), so that e.g. a 60° half-intensity angle yields
/// a Lambertian order of exactly 1.
pub fn cos_deg(deg: f64) -> f64 {
    let r = deg.rem_euclid(360.0);
    if r == 0.0 {
        1.0
    } else if r == 60.0 || r == 300.0 {
        0.5
    } else if r == 90.0 || r == 270.0 {
        0.0
    } else if r == 120.0 || r == 240.0 {
        -0.5
    } else if r == 180.0 {
        -1.0
    } else {
        r.to_radians().cos()
    }
}

/// Sine of an angle given in degrees, exact where [`cos_deg`] is exact.
pub fn sin_deg(deg: f64) -> f64 {
    cos_deg(90.0 - deg)
}

/// A plane angle. Stored in degrees so configured values such as 60° keep
/// exact trigonometric values.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub const fn from_degrees(deg: f64) -> Self {
        Angle(deg)
    }

    pub fn from_radians(rad: f64) -> Self {
        Angle(rad.to_degrees())
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }

    pub fn cos(self) -> f64 {
        cos_deg(self.0)
    }

    pub fn sin(self) -> f64 {
        sin_deg(self.0)
    }
}

/// Cosine of the angle between `direction` and `normal`.
///
/// The normal is normalized internally. The sign is preserved: a negative
/// value means the direction points away from the surface the normal
/// belongs to.
pub fn cos_angle_between(direction: Vec3, normal: Vec3) -> Result<f64> {
    let d = direction
        .normalized()
        .ok_or_else(|| Error::Domain(format!("zero-norm direction vector {direction:?}")))?;
    let n = normal
        .normalized()
        .ok_or_else(|| Error::Domain(format!("zero-norm normal vector {normal:?}")))?;
    Ok(d.dot(n).clamp(-1.0, 1.0))
}

/// Spherical orientation of a photodiode normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    /// Polar angle from the +z axis, radians in `[0, π]`.
    pub polar_theta: f64,
    /// Azimuth from the +x axis in the xy-plane, radians in `[0, 2π)`.
    pub azimuth_omega: f64,
}

impl Orientation {
    pub const FACING_UP: Orientation = Orientation {
        polar_theta: 0.0,
        azimuth_omega: 0.0,
    };

    pub fn new(polar_theta: f64, azimuth_omega: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&polar_theta) {
            return Err(Error::Domain(format!(
                "polar angle {polar_theta} rad outside [0, π]"
            )));
        }
        if !azimuth_omega.is_finite() {
            return Err(Error::Domain("non-finite azimuth".into()));
        }
        Ok(Self {
            polar_theta,
            azimuth_omega: azimuth_omega.rem_euclid(TAU),
        })
    }

    pub fn from_degrees(polar_deg: f64, azimuth_deg: f64) -> Result<Self> {
        Self::new(polar_deg.to_radians(), azimuth_deg.to_radians())
    }
}

/// Photodiode normal vector for a given orientation.
pub fn pd_normal(orientation: Orientation) -> Vec3 {
    let (st, ct) = orientation.polar_theta.sin_cos();
    let (sw, cw) = orientation.azimuth_omega.sin_cos();
    Vec3::new(st * cw, st * sw, ct)
}

/// Laplace model for the device polar angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationModel {
    pub mean_theta: f64,
    pub scale_b_theta: f64,
    pub std_theta: f64,
}

impl OrientationModel {
    /// Builds the model from a mean and standard deviation (radians).
    /// The Laplace scale is `std / √2` since its variance is `2b²`.
    pub fn from_mean_std(mean_theta: f64, std_theta: f64) -> Result<Self> {
        if !(std_theta > 0.0) || !mean_theta.is_finite() {
            return Err(Error::Domain(format!(
                "orientation model needs finite mean and std > 0, got mean={mean_theta}, std={std_theta}"
            )));
        }
        Ok(Self {
            mean_theta,
            scale_b_theta: std_theta / SQRT_2,
            std_theta,
        })
    }

    pub fn from_degrees(mean_deg: f64, std_deg: f64) -> Result<Self> {
        Self::from_mean_std(mean_deg.to_radians(), std_deg.to_radians())
    }
}

/// Draws a polar angle from `Laplace(μ_θ, b_θ)` by inverse-CDF sampling,
/// clamped to `[0, π/2]`.
pub fn sample_polar_angle<R: Rng + ?Sized>(model: &OrientationModel, rng: &mut R) -> f64 {
    let v: f64 = rng.random::<f64>() - 0.5;
    let offset = -model.scale_b_theta * v.signum() * (1.0 - 2.0 * v.abs()).ln();
    (model.mean_theta + offset).clamp(0.0, FRAC_PI_2)
}

/// Uniform azimuth on `[0, 2π)`.
pub fn sample_azimuth<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>() * TAU
}

/// Cylinder blockers distributed as a Poisson point process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockageModel {
    /// Blocker radius `l_b`, meters.
    pub blocker_radius: f64,
    /// Blocker height `h_b`, meters.
    pub blocker_height: f64,
    /// Blocker density `κ_b`, blockers per m².
    pub blocker_density: f64,
    /// UE height `h_UE`, meters.
    pub ue_height: f64,
    /// LED height `h_v`, meters.
    pub led_height: f64,
}

impl BlockageModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.ue_height < self.led_height) {
            return Err(Error::Domain(format!(
                "LED height {} must exceed UE height {}",
                self.led_height, self.ue_height
            )));
        }
        if !(self.ue_height > 0.0
            && self.ue_height < self.blocker_height
            && self.blocker_height <= self.led_height)
        {
            return Err(Error::Domain(format!(
                "blockage heights must satisfy 0 < h_UE ({}) < h_b ({}) <= h_v ({})",
                self.ue_height, self.blocker_height, self.led_height
            )));
        }
        if !(self.blocker_radius > 0.0) || !(self.blocker_density >= 0.0) {
            return Err(Error::Domain(format!(
                "blocker radius must be > 0 and density >= 0, got l_b={}, κ_b={}",
                self.blocker_radius, self.blocker_density
            )));
        }
        Ok(())
    }

    /// Rate `c₀` of the exponential blockage law, per meter.
    pub fn blockage_rate(&self) -> f64 {
        2.0 * self.blocker_radius * self.blocker_density * (self.blocker_height - self.ue_height)
            / (self.led_height - self.ue_height)
    }
}

/// Average LoS blockage probability `1 − exp(−c₀ r_UE)` at horizontal
/// LED–UE distance `r_ue`.
pub fn blockage_probability(model: &BlockageModel, r_ue: f64) -> Result<f64> {
    if model.led_height <= model.ue_height {
        return Err(Error::Domain(format!(
            "LED height {} must exceed UE height {}",
            model.led_height, model.ue_height
        )));
    }
    if !(r_ue >= 0.0) {
        return Err(Error::Domain(format!(
            "negative horizontal distance {r_ue}"
        )));
    }
    Ok(-(-model.blockage_rate() * r_ue).exp_m1())
}

/// Bernoulli draw of the LoS state; `true` means blocked.
pub fn sample_blockage<R: Rng + ?Sized>(
    model: &BlockageModel,
    r_ue: f64,
    rng: &mut R,
) -> Result<bool> {
    let p = blockage_probability(model, r_ue)?;
    // Always consume one draw so the stream position does not depend on p.
    let u: f64 = rng.random();
    Ok(u < p)
}
