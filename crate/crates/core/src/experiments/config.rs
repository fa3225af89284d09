//! TOML experiment configuration.
//!
//! Every table is optional; omitted keys take the built-in defaults. Unknown
//! keys are rejected with the offending name.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{snr_db_to_noise_std, wall_irs_layout, Scenario};
use crate::error::{Error, Result};
use crate::geometry::{Angle, BlockageModel, Orientation, OrientationModel, Vec3};
use crate::montecarlo::McConfig;
use crate::optimizer::{EsConfig, GaConfig};

/// Operating point used when a run does not sweep the SNR.
pub const DEFAULT_OPERATING_SNR_DB: f64 = 120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    NoIrsFpa,
    FixedIrsFpa,
    GaJoint,
    EsOracle,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::NoIrsFpa => "no_irs_fpa",
            Strategy::FixedIrsFpa => "fixed_irs_fpa",
            Strategy::GaJoint => "ga_joint",
            Strategy::EsOracle => "es_oracle",
        }
    }
}

/// Channel randomization for element sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Random device orientation, LoS available.
    Orientation,
    /// Random device orientation, LoS blocked for every user.
    Blocked,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Orientation => "orientation",
            Variant::Blocked => "blocked",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    TransmitSnrDb(Vec<f64>),
    NumElements(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub sweep: SweepAxis,
    pub strategies: Vec<Strategy>,
    /// FPA ratio `α` between consecutive ordered users.
    pub fpa_alpha: f64,
    /// Transmit SNR for runs that do not sweep it.
    pub operating_snr_db: f64,
    pub ga: GaConfig,
    pub es: EsConfig,
    pub mc: McConfig,
    pub mc_enabled: bool,
    pub realizations: usize,
    pub variant: Variant,
    /// Root seed; GA and Monte Carlo streams are derived from it.
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        RawConfig::default()
            .build()
            .expect("built-in defaults are valid")
    }
}

impl ExperimentConfig {
    /// Replaces the root seed and the seeds derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.ga.rng_seed = seed;
        self.mc.rng_seed = seed;
        self
    }
}

/// The built-in scenario: 5×5×3 m room, ceiling LED, 100-element wall IRS,
/// three users at desk height, operating at the default transmit SNR.
pub fn default_scenario() -> Scenario {
    ExperimentConfig::default().scenario
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawConfig {
    experiment: RawExperiment,
    room: RawRoom,
    led: RawLed,
    receiver: RawReceiver,
    orientation: RawOrientation,
    blockage: RawBlockage,
    irs: RawIrs,
    users: Vec<RawUser>,
    noma: RawNoma,
    noise: RawNoise,
    sweep: RawSweep,
    ga: RawGa,
    es: EsConfig,
    mc: RawMc,
}

impl Default for RawConfig {
    fn default() -> Self {
        Self {
            experiment: RawExperiment::default(),
            room: RawRoom::default(),
            led: RawLed::default(),
            receiver: RawReceiver::default(),
            orientation: RawOrientation::default(),
            blockage: RawBlockage::default(),
            irs: RawIrs::default(),
            users: default_users(),
            noma: RawNoma::default(),
            noise: RawNoise::default(),
            sweep: RawSweep::default(),
            ga: RawGa::default(),
            es: EsConfig::default(),
            mc: RawMc::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawExperiment {
    seed: u64,
    output: Option<PathBuf>,
    strategies: Vec<Strategy>,
    realizations: usize,
    variant: Variant,
}

impl Default for RawExperiment {
    fn default() -> Self {
        Self {
            seed: 1,
            output: None,
            strategies: vec![Strategy::NoIrsFpa, Strategy::FixedIrsFpa, Strategy::GaJoint],
            realizations: 100,
            variant: Variant::Blocked,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRoom {
    dims: [f64; 3],
}

impl Default for RawRoom {
    fn default() -> Self {
        Self {
            dims: [5.0, 5.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawLed {
    position: [f64; 3],
    normal: [f64; 3],
    half_intensity_angle_deg: f64,
}

impl Default for RawLed {
    fn default() -> Self {
        Self {
            position: [2.5, 2.5, 3.0],
            normal: [0.0, 0.0, -1.0],
            half_intensity_angle_deg: 60.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawReceiver {
    pd_area_cm2: f64,
    fov_deg: f64,
    refractive_index: f64,
    filter_gain: f64,
}

impl Default for RawReceiver {
    fn default() -> Self {
        Self {
            pd_area_cm2: 1.0,
            fov_deg: 85.0,
            refractive_index: 1.5,
            filter_gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawOrientation {
    polar_mean_deg: f64,
    polar_std_deg: f64,
}

impl Default for RawOrientation {
    fn default() -> Self {
        Self {
            polar_mean_deg: 41.39,
            polar_std_deg: 7.68,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawBlockage {
    blocker_radius: f64,
    blocker_height: f64,
    blocker_density: f64,
    ue_height: f64,
}

impl Default for RawBlockage {
    fn default() -> Self {
        Self {
            blocker_radius: 0.15,
            blocker_height: 1.75,
            blocker_density: 0.2,
            ue_height: 0.85,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawIrs {
    num_elements: Option<usize>,
    positions: Option<Vec<[f64; 3]>>,
    normals: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUser {
    position: [f64; 3],
    polar_deg: Option<f64>,
    azimuth_deg: Option<f64>,
    /// Keep the azimuth fixed when orientations are resampled.
    #[serde(default)]
    fixed_azimuth: bool,
}

fn default_users() -> Vec<RawUser> {
    [
        ([3.0, 1.5, 0.85], 90.0),
        ([3.5, 3.0, 0.85], 90.0),
        ([0.4, 2.5, 0.85], 0.0),
    ]
    .into_iter()
    .map(|(position, az)| RawUser {
        position,
        polar_deg: None,
        azimuth_deg: Some(az),
        fixed_azimuth: false,
    })
    .collect()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawNoma {
    modulation_order: u32,
    fpa_alpha: f64,
}

impl Default for RawNoma {
    fn default() -> Self {
        Self {
            modulation_order: 4,
            fpa_alpha: 0.3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawNoise {
    transmit_snr_db: f64,
    /// Explicit per-user noise standard deviations; overrides the SNR.
    noise_std: Option<Vec<f64>>,
}

impl Default for RawNoise {
    fn default() -> Self {
        Self {
            transmit_snr_db: DEFAULT_OPERATING_SNR_DB,
            noise_std: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSweep {
    transmit_snr_db: Option<Vec<f64>>,
    num_elements: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawGa {
    population_size: usize,
    generations: usize,
    max_time_s: f64,
    crossover_prob: f64,
    mutation_prob: f64,
    elite_count: Option<usize>,
    restart_rounds: usize,
    mutation_scale: f64,
}

impl Default for RawGa {
    fn default() -> Self {
        let d = GaConfig::default();
        Self {
            population_size: d.population_size,
            generations: d.generations,
            max_time_s: d.max_time_s,
            crossover_prob: d.crossover_prob,
            mutation_prob: d.mutation_prob,
            elite_count: None,
            restart_rounds: d.restart_rounds,
            mutation_scale: d.mutation_scale,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawMc {
    enabled: bool,
    num_symbols: u64,
    resample_orientation: bool,
    resample_blockage: bool,
}

impl Default for RawMc {
    fn default() -> Self {
        Self {
            enabled: false,
            num_symbols: 1_000_000,
            resample_orientation: false,
            resample_blockage: false,
        }
    }
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

fn strictly_increasing<T: PartialOrd>(v: &[T]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl RawConfig {
    fn build(self) -> Result<ExperimentConfig> {
        let room = v3(self.room.dims);
        let orientation_model = OrientationModel::from_degrees(
            self.orientation.polar_mean_deg,
            self.orientation.polar_std_deg,
        )
        .map_err(|e| invalid(e.to_string()))?;

        let (irs_positions, irs_normals) = match (self.irs.positions, self.irs.normals) {
            (Some(p), Some(n)) => {
                if self.irs.num_elements.is_some_and(|k| k != p.len()) {
                    return Err(invalid(format!(
                        "irs.num_elements disagrees with the {} listed positions",
                        p.len()
                    )));
                }
                (
                    p.into_iter().map(v3).collect(),
                    n.into_iter().map(v3).collect(),
                )
            }
            (None, None) => wall_irs_layout(self.irs.num_elements.unwrap_or(100), room),
            _ => {
                return Err(invalid(
                    "irs.positions and irs.normals must be given together",
                ))
            }
        };

        if self.users.is_empty() {
            return Err(invalid("at least one [[users]] entry is required"));
        }
        let mut ue_positions = Vec::new();
        let mut ue_orientations = Vec::new();
        let mut ue_fixed_azimuth = Vec::new();
        for (i, u) in self.users.iter().enumerate() {
            let polar = u.polar_deg.unwrap_or(self.orientation.polar_mean_deg);
            let azimuth = u.azimuth_deg.unwrap_or(0.0);
            let o = Orientation::from_degrees(polar, azimuth)
                .map_err(|e| invalid(format!("users[{i}]: {e}")))?;
            ue_positions.push(v3(u.position));
            ue_orientations.push(o);
            ue_fixed_azimuth.push(u.fixed_azimuth.then_some(o.azimuth_omega));
        }
        let k = ue_positions.len();
        let noise_std = match self.noise.noise_std {
            Some(v) => v,
            None => vec![snr_db_to_noise_std(self.noise.transmit_snr_db); k],
        };

        let led_position = v3(self.led.position);
        let scenario = Scenario {
            room_dims: room,
            led_position,
            led_normal: v3(self.led.normal),
            half_intensity_angle: Angle::from_degrees(self.led.half_intensity_angle_deg),
            pd_area: self.receiver.pd_area_cm2 * 1e-4,
            fov: Angle::from_degrees(self.receiver.fov_deg),
            refractive_index: self.receiver.refractive_index,
            filter_gain: self.receiver.filter_gain,
            irs_positions,
            irs_normals,
            ue_positions,
            ue_orientations,
            ue_fixed_azimuth,
            noise_std,
            orientation_model,
            blockage_model: BlockageModel {
                blocker_radius: self.blockage.blocker_radius,
                blocker_height: self.blockage.blocker_height,
                blocker_density: self.blockage.blocker_density,
                ue_height: self.blockage.ue_height,
                led_height: led_position.z,
            },
            modulation_order: self.noma.modulation_order,
        };
        scenario.validate()?;

        let sweep = match (self.sweep.transmit_snr_db, self.sweep.num_elements) {
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "sweep: give either transmit_snr_db or num_elements, not both",
                ))
            }
            (Some(s), None) => {
                if s.is_empty() || !strictly_increasing(&s) || s.iter().any(|x| !x.is_finite()) {
                    return Err(invalid(
                        "sweep.transmit_snr_db must be non-empty and strictly increasing",
                    ));
                }
                SweepAxis::TransmitSnrDb(s)
            }
            (None, Some(n)) => {
                if n.is_empty() || !strictly_increasing(&n) {
                    return Err(invalid(
                        "sweep.num_elements must be non-empty and strictly increasing",
                    ));
                }
                SweepAxis::NumElements(n)
            }
            (None, None) => {
                SweepAxis::TransmitSnrDb((0..=8).map(|i| 100.0 + 5.0 * i as f64).collect())
            }
        };

        let mut strategies = self.experiment.strategies;
        if strategies.is_empty() {
            return Err(invalid(
                "experiment.strategies must list at least one strategy",
            ));
        }
        strategies.sort();
        strategies.dedup();

        let alpha = self.noma.fpa_alpha;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!(
                "noma.fpa_alpha {alpha} must lie in (0, 1)"
            )));
        }
        if self.experiment.realizations == 0 {
            return Err(invalid("experiment.realizations must be >= 1"));
        }

        let g = self.ga;
        let ga = GaConfig {
            population_size: g.population_size,
            generations: g.generations,
            max_time_s: g.max_time_s,
            crossover_prob: g.crossover_prob,
            mutation_prob: g.mutation_prob,
            elite_count: g.elite_count.unwrap_or((g.population_size / 10).max(1)),
            restart_rounds: g.restart_rounds,
            rng_seed: self.experiment.seed,
            mutation_scale: g.mutation_scale,
        };
        ga.validate()?;
        if self.mc.num_symbols == 0 {
            return Err(invalid("mc.num_symbols must be >= 1"));
        }
        // Checks that the ES steps are usable; the cap is applied at run time.
        crate::optimizer::search_space(k, 0, self.es.power_step, self.es.rho_step)
            .map_err(|e| invalid(format!("es: {e}")))?;

        Ok(ExperimentConfig {
            scenario,
            sweep,
            strategies,
            fpa_alpha: alpha,
            operating_snr_db: self.noise.transmit_snr_db,
            ga,
            es: self.es,
            mc: McConfig {
                num_symbols: self.mc.num_symbols,
                rng_seed: self.experiment.seed,
                resample_orientation: self.mc.resample_orientation,
                resample_blockage: self.mc.resample_blockage,
                transmit_snr_db: None,
            },
            mc_enabled: self.mc.enabled,
            realizations: self.experiment.realizations,
            variant: self.experiment.variant,
            seed: self.experiment.seed,
            output_path: self.experiment.output,
        })
    }
}

/// Parses a configuration from TOML text. `origin` names the source in
/// diagnostics.
pub fn parse_config(text: &str, origin: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::ConfigParse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    raw.build()
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::ConfigNotFound(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        parse_config(text, Path::new("test.toml"))
    }

    #[test]
    fn defaults_are_valid() {
        let c = ExperimentConfig::default();
        let s = &c.scenario;
        s.validate().unwrap();
        assert_eq!(s.num_users(), 3);
        assert_eq!(s.num_elements(), 100);
        assert_eq!(c.ga.elite_count, 10);
        assert_eq!(c.realizations, 100);
        assert_eq!(
            c.sweep,
            SweepAxis::TransmitSnrDb(vec![100., 105., 110., 115., 120., 125., 130., 135., 140.])
        );
    }

    #[test]
    fn minimal_config_takes_table_defaults() {
        let c = parse(
            r#"
            [[users]]
            position = [1.0, 1.0, 0.85]
            [[users]]
            position = [4.0, 1.0, 0.85]
            [[users]]
            position = [2.5, 4.0, 0.85]
            "#,
        )
        .unwrap();
        let s = &c.scenario;
        assert_eq!(s.num_users(), 3);
        assert_eq!(s.half_intensity_angle.degrees(), 60.0);
        assert_eq!(s.fov.degrees(), 85.0);
        assert!((s.pd_area - 1e-4).abs() < 1e-18);
        assert_eq!(s.refractive_index, 1.5);
        assert_eq!(c.fpa_alpha, 0.3);
        assert_eq!(s.lambertian_order(), 1.0);
        assert!((s.ue_orientations[0].polar_theta.to_degrees() - 41.39).abs() < 1e-12);
    }

    #[test]
    fn es_resolution_passes_through() {
        let c = parse("[es]\npower_step = 0.1\nrho_step = 0.5\n").unwrap();
        assert_eq!(c.es.power_step, 0.1);
        assert_eq!(c.es.rho_step, 0.5);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("[receiver]\nfov_degrees = 80\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse { .. }));
        assert!(err.to_string().contains("fov_degrees"), "{err}");
    }

    #[test]
    fn malformed_number_names_line_and_key() {
        let err = parse("[noise]\n\ntransmit_snr_db = 12x0\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::ConfigParse { .. }));
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("transmit_snr_db"), "{msg}");
    }

    #[test]
    fn invariant_violations_are_distinct() {
        for text in [
            "[sweep]\ntransmit_snr_db = [110.0, 100.0]\n",
            "[sweep]\nnum_elements = []\n",
            "[experiment]\nstrategies = []\n",
            "[led]\nhalf_intensity_angle_deg = 95.0\n",
            "[ga]\nelite_count = 100\n",
            "[es]\npower_step = 0.3\n",
        ] {
            let err = parse(text).unwrap_err();
            assert!(matches!(err, Error::InvalidConfig(_)), "{text}: {err}");
        }
        let missing = load_config(Path::new("/nonexistent/dir/cfg.toml")).unwrap_err();
        assert!(matches!(missing, Error::ConfigNotFound(_)));
    }

    #[test]
    fn explicit_irs_and_noise() {
        let c = parse(
            r#"
            [irs]
            positions = [[0.0, 2.5, 1.5], [0.0, 2.6, 1.5]]
            normals = [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
            [noise]
            noise_std = [1e-6, 2e-6, 3e-6]
            "#,
        )
        .unwrap();
        assert_eq!(c.scenario.num_elements(), 2);
        assert_eq!(c.scenario.noise_std, vec![1e-6, 2e-6, 3e-6]);
    }

    #[test]
    fn strategies_are_deduplicated_and_ordered() {
        let c = parse("[experiment]\nstrategies = [\"ga_joint\", \"no_irs_fpa\", \"ga_joint\"]\n")
            .unwrap();
        assert_eq!(c.strategies, vec![Strategy::NoIrsFpa, Strategy::GaJoint]);
    }
}
