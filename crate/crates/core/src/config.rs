//! Pipeline configuration tree.
//!
//! The document is a JSON object with the sections `raw`, `mapping`,
//! `general`, `mcra`, `ssl`, `sst` and `sss`. The first three are mandatory;
//! the others fall back to defaults. Unknown keys are rejected everywhere.
//! See `docs/config.md` for the full key schema.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

/// Maximum distance (meters) from the best-fit plane for an array to count
/// as planar.
pub const EPS_PLANE: f64 = 1e-4;

const ORIENTATION_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("missing mandatory section `{0}`")]
    MissingSection(&'static str),
    #[error("invalid document: {0}")]
    Schema(String),
    #[error("`{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub raw: RawInputConfig,
    pub mapping: Vec<usize>,
    pub general: GeneralConfig,
    #[serde(default)]
    pub mcra: McraConfig,
    #[serde(default)]
    pub ssl: SslConfig,
    #[serde(default)]
    pub sst: SstConfig,
    #[serde(default)]
    pub sss: SssConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInputConfig {
    pub sample_rate_hz: u32,
    pub bits_per_sample: u32,
    pub n_channels: usize,
    pub hop_size_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralConfig {
    pub frame_size_samples: usize,
    pub hop_size_samples: usize,
    pub fs_processing_hz: u32,
    pub speed_of_sound_mps: f64,
    #[serde(default)]
    pub speed_of_sound_uncertainty_mps: f64,
    pub mics: Vec<MicSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MicSpec {
    pub position_m: [f64; 3],
    pub orientation: [f64; 3],
    /// Field of view in degrees. 360 means omnidirectional.
    pub fov_deg: f64,
    /// Optional position uncertainty, widens the TDOA search windows.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub sigma_pos_m: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl MicSpec {
    pub fn omni(position_m: [f64; 3]) -> Self {
        Self {
            position_m,
            orientation: [0.0, 0.0, 1.0],
            fov_deg: 360.0,
            sigma_pos_m: 0.0,
        }
    }

    pub fn directional(position_m: [f64; 3], orientation: [f64; 3], fov_deg: f64) -> Self {
        let o = Vec3::from(orientation).normalize();
        Self {
            position_m,
            orientation: [o.x, o.y, o.z],
            fov_deg,
            sigma_pos_m: 0.0,
        }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::from(self.position_m)
    }

    pub fn orientation(&self) -> Vec3 {
        Vec3::from(self.orientation)
    }

    pub fn is_omni(&self) -> bool {
        self.fov_deg >= 360.0
    }

    /// Closed-cone visibility: the angle between the orientation and `dir`
    /// is at most half the field of view.
    pub fn sees(&self, dir: &Vec3) -> bool {
        if self.is_omni() {
            return true;
        }
        let cos_half = (self.fov_deg.to_radians() / 2.0).cos();
        self.orientation().dot(dir) >= cos_half - 1e-12
    }

    /// Open-cone visibility with a small margin; grazing directions do not
    /// count.
    pub fn sees_strictly(&self, dir: &Vec3) -> bool {
        if self.is_omni() {
            return true;
        }
        let cos_half = (self.fov_deg.to_radians() / 2.0).cos();
        self.orientation().dot(dir) > cos_half + 1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McraConfig {
    /// Recursive smoothing of the local power spectrum.
    pub alpha_s: f64,
    /// Smoothing of the speech-presence probability.
    pub alpha_p: f64,
    /// Noise update forgetting factor.
    pub alpha_d: f64,
    /// Minimum search window, in frames.
    #[serde(rename = "L_window")]
    pub l_window: usize,
    /// Ratio threshold on power over minimum for speech presence.
    pub delta: f64,
}

impl Default for McraConfig {
    fn default() -> Self {
        Self {
            alpha_s: 0.8,
            alpha_p: 0.2,
            alpha_d: 0.95,
            l_window: 125,
            delta: 5.0,
        }
    }
}

/// `true`, `false` or `"auto"` in the document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HalfSphere {
    Fixed(bool),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoTag {
    #[serde(rename = "auto")]
    Auto,
}

impl HalfSphere {
    pub const AUTO: HalfSphere = HalfSphere::Auto(AutoTag::Auto);

    pub fn resolved(&self) -> Option<bool> {
        match self {
            HalfSphere::Fixed(b) => Some(*b),
            HalfSphere::Auto(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SslConfig {
    pub n_potential_doas: usize,
    pub interpolation_rate: usize,
    pub coarse_level: u32,
    pub fine_level: u32,
    pub scan_half_sphere: HalfSphere,
    /// Weight GCC-PHAT bins by the noise-estimate SNR.
    pub snr_weighting: bool,
    /// Coarse-to-fine search; `false` scans every fine point.
    pub hierarchical: bool,
    /// Directivity pair pruning; `false` keeps every pair.
    pub prune_pairs: bool,
}

impl Default for SslConfig {
    fn default() -> Self {
        Self {
            n_potential_doas: 4,
            interpolation_rate: 1,
            coarse_level: 2,
            fine_level: 4,
            scan_half_sphere: HalfSphere::AUTO,
            snr_weighting: true,
            hierarchical: true,
            prune_pairs: true,
        }
    }
}

/// Gaussian mixture over SRP power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmConfig {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SstConfig {
    pub enabled: bool,
    /// Position process noise, per sqrt-second.
    pub sigma_pos: f64,
    /// Velocity process noise, per sqrt-second.
    pub sigma_vel: f64,
    /// Observation noise standard deviation (unit-sphere units).
    pub sigma_obs: f64,
    pub init_sigma_pos: f64,
    pub init_sigma_vel: f64,
    pub gmm_active: GmmConfig,
    pub gmm_diffuse: GmmConfig,
    pub p_false: f64,
    pub p_new: f64,
    /// Hypotheses with a lower posterior are treated as false detections.
    pub assign_floor: f64,
    pub n_confirm: u32,
    pub n_forget: u32,
    /// Provisional tracks are dropped after this many frames without support.
    pub n_provisional_forget: u32,
    pub max_tracks: usize,
    /// Forgetting factor of the activity smoother.
    pub activity_forgetting: f64,
}

impl Default for SstConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            sigma_pos: 0.02,
            sigma_vel: 0.05,
            sigma_obs: 0.05,
            init_sigma_pos: 0.05,
            init_sigma_vel: 0.5,
            // fitted on open-cube harness scenes (one and two sources) at 10 dB SNR
            gmm_active: GmmConfig {
                weights: vec![0.19, 0.81],
                means: vec![0.108, 0.228],
                variances: vec![0.0051, 0.000625],
            },
            gmm_diffuse: GmmConfig {
                weights: vec![0.56, 0.44],
                means: vec![0.002, 0.0458],
                variances: vec![8.2e-7, 0.00048],
            },
            p_false: 0.1,
            p_new: 0.1,
            assign_floor: 0.2,
            n_confirm: 7,
            n_forget: 50,
            n_provisional_forget: 5,
            max_tracks: 4,
            activity_forgetting: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationMethod {
    DelayAndSum,
    Gss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PostfilterConfig {
    pub enabled: bool,
    /// Leakage factor applied to competing outputs.
    pub eta: f64,
    pub g_min_db: f64,
    /// Decision-directed smoothing of the a-priori SNR.
    pub alpha_dd: f64,
    /// Smoothing of the competing output powers.
    pub alpha_leak: f64,
}

impl Default for PostfilterConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            eta: 0.25,
            g_min_db: -20.0,
            alpha_dd: 0.9,
            alpha_leak: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputFormat {
    pub bits_per_sample: u32,
}

impl Default for OutputFormat {
    fn default() -> Self {
        Self { bits_per_sample: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SssConfig {
    pub enabled: bool,
    pub method: SeparationMethod,
    pub gss_step_size: f64,
    pub gss_constraint_weight: f64,
    /// Restrict delay-and-sum to microphones facing the target.
    pub use_subarray: bool,
    pub postfilter: PostfilterConfig,
    pub output: OutputFormat,
    /// Fixed target directions. When non-empty, tracking is bypassed.
    pub fixed_targets: Vec<[f64; 3]>,
}

impl Default for SssConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            method: SeparationMethod::DelayAndSum,
            gss_step_size: 0.01,
            gss_constraint_weight: 0.5,
            use_subarray: true,
            postfilter: PostfilterConfig::default(),
            output: OutputFormat::default(),
            fixed_targets: Vec::new(),
        }
    }
}

const SECTIONS: [&str; 7] = ["raw", "mapping", "general", "mcra", "ssl", "sst", "sss"];
const MANDATORY: [&str; 3] = ["raw", "mapping", "general"];

/// Parse and validate a configuration document.
///
/// `scan_half_sphere: "auto"` is resolved against the microphone geometry,
/// so the returned tree never holds `auto`.
pub fn parse_config(text: &str) -> Result<PipelineConfig, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| ConfigError::Schema("top level must be an object".into()))?;
    for key in obj.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            return Err(ConfigError::Schema(format!("unknown section `{key}`")));
        }
    }
    for section in MANDATORY {
        if !obj.contains_key(section) {
            return Err(ConfigError::MissingSection(section));
        }
    }
    let mut cfg: PipelineConfig =
        serde_json::from_value(value).map_err(|e| ConfigError::Schema(e.to_string()))?;
    cfg.validate()?;
    if cfg.ssl.scan_half_sphere.resolved().is_none() {
        cfg.ssl.scan_half_sphere = HalfSphere::Fixed(detect_planarity(&cfg.general.mics));
    }
    Ok(cfg)
}

pub fn serialize_config(cfg: &PipelineConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config tree is always serializable")
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let raw = &self.raw;
        if raw.sample_rate_hz == 0 {
            return Err(invalid("raw.sample_rate_hz", "must be positive"));
        }
        if ![8, 16, 24, 32].contains(&raw.bits_per_sample) {
            return Err(invalid("raw.bits_per_sample", "must be one of 8, 16, 24, 32"));
        }
        if raw.n_channels == 0 {
            return Err(invalid("raw.n_channels", "must be positive"));
        }
        if raw.hop_size_samples == 0 {
            return Err(invalid("raw.hop_size_samples", "must be positive"));
        }

        if self.mapping.is_empty() {
            return Err(invalid("mapping", "must select at least one channel"));
        }
        for (i, &ch) in self.mapping.iter().enumerate() {
            if ch >= raw.n_channels {
                return Err(invalid(
                    format!("mapping[{i}]"),
                    format!("channel {ch} out of range for {} input channels", raw.n_channels),
                ));
            }
            if self.mapping[..i].contains(&ch) {
                return Err(invalid(format!("mapping[{i}]"), format!("channel {ch} repeated")));
            }
        }

        let g = &self.general;
        if g.frame_size_samples < 4 || !g.frame_size_samples.is_power_of_two() {
            return Err(invalid("general.frame_size_samples", "must be a power of two ≥ 4"));
        }
        if g.hop_size_samples == 0 || g.hop_size_samples > g.frame_size_samples {
            return Err(invalid(
                "general.hop_size_samples",
                "must be positive and at most frame_size_samples",
            ));
        }
        if g.fs_processing_hz == 0 {
            return Err(invalid("general.fs_processing_hz", "must be positive"));
        }
        if !(g.speed_of_sound_mps.is_finite() && g.speed_of_sound_mps > 0.0) {
            return Err(invalid("general.speed_of_sound_mps", "must be positive"));
        }
        if !(g.speed_of_sound_uncertainty_mps >= 0.0
            && g.speed_of_sound_uncertainty_mps < g.speed_of_sound_mps)
        {
            return Err(invalid(
                "general.speed_of_sound_uncertainty_mps",
                "must be non-negative and below the speed of sound",
            ));
        }
        if g.mics.len() != self.mapping.len() {
            return Err(invalid(
                "general.mics",
                format!("{} mics but mapping selects {} channels", g.mics.len(), self.mapping.len()),
            ));
        }
        for (i, mic) in g.mics.iter().enumerate() {
            if mic.position_m.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("general.mics[{i}].position_m"), "must be finite"));
            }
            let norm = mic.orientation().norm();
            if !((norm - 1.0).abs() <= ORIENTATION_TOL) {
                return Err(invalid(
                    format!("general.mics[{i}].orientation"),
                    format!("must have unit norm, got {norm}"),
                ));
            }
            if !(mic.fov_deg > 0.0 && mic.fov_deg <= 360.0) {
                return Err(invalid(format!("general.mics[{i}].fov_deg"), "must be in (0, 360]"));
            }
            if !(mic.sigma_pos_m >= 0.0 && mic.sigma_pos_m.is_finite()) {
                return Err(invalid(format!("general.mics[{i}].sigma_pos_m"), "must be non-negative"));
            }
        }

        let m = &self.mcra;
        for (name, v) in [("mcra.alpha_s", m.alpha_s), ("mcra.alpha_p", m.alpha_p), ("mcra.alpha_d", m.alpha_d)] {
            check_open_unit(name, v)?;
        }
        if m.l_window == 0 {
            return Err(invalid("mcra.L_window", "must be positive"));
        }
        if !(m.delta > 0.0 && m.delta.is_finite()) {
            return Err(invalid("mcra.delta", "must be positive"));
        }

        let s = &self.ssl;
        if s.n_potential_doas == 0 {
            return Err(invalid("ssl.n_potential_doas", "must be positive"));
        }
        if s.interpolation_rate == 0 {
            return Err(invalid("ssl.interpolation_rate", "must be positive"));
        }
        if s.fine_level > 6 {
            return Err(invalid("ssl.fine_level", "must be at most 6"));
        }
        if s.fine_level <= s.coarse_level {
            return Err(invalid("ssl.fine_level", "must be greater than ssl.coarse_level"));
        }

        let t = &self.sst;
        for (name, v) in [
            ("sst.sigma_pos", t.sigma_pos),
            ("sst.sigma_vel", t.sigma_vel),
            ("sst.init_sigma_pos", t.init_sigma_pos),
            ("sst.init_sigma_vel", t.init_sigma_vel),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be non-negative"));
            }
        }
        if !(t.sigma_obs > 0.0 && t.sigma_obs.is_finite()) {
            return Err(invalid("sst.sigma_obs", "must be positive"));
        }
        check_gmm("sst.gmm_active", &t.gmm_active)?;
        check_gmm("sst.gmm_diffuse", &t.gmm_diffuse)?;
        check_open_unit("sst.p_false", t.p_false)?;
        check_open_unit("sst.p_new", t.p_new)?;
        if t.p_false + t.p_new >= 1.0 {
            return Err(invalid("sst.p_new", "p_false + p_new must be below 1"));
        }
        check_open_unit("sst.assign_floor", t.assign_floor)?;
        check_open_unit("sst.activity_forgetting", t.activity_forgetting)?;
        if t.n_confirm == 0 {
            return Err(invalid("sst.n_confirm", "must be positive"));
        }
        if t.max_tracks == 0 {
            return Err(invalid("sst.max_tracks", "must be positive"));
        }

        let p = &self.sss;
        if !(p.gss_step_size >= 0.0 && p.gss_step_size.is_finite()) {
            return Err(invalid("sss.gss_step_size", "must be non-negative"));
        }
        if !(p.gss_constraint_weight >= 0.0 && p.gss_constraint_weight.is_finite()) {
            return Err(invalid("sss.gss_constraint_weight", "must be non-negative"));
        }
        let pf = &p.postfilter;
        if !(pf.eta >= 0.0 && pf.eta.is_finite()) {
            return Err(invalid("sss.postfilter.eta", "must be non-negative"));
        }
        if !(pf.g_min_db <= 0.0 && pf.g_min_db.is_finite()) {
            return Err(invalid("sss.postfilter.g_min_db", "must be ≤ 0 dB"));
        }
        check_open_unit("sss.postfilter.alpha_dd", pf.alpha_dd)?;
        check_open_unit("sss.postfilter.alpha_leak", pf.alpha_leak)?;
        if ![8, 16, 24, 32].contains(&p.output.bits_per_sample) {
            return Err(invalid("sss.output.bits_per_sample", "must be one of 8, 16, 24, 32"));
        }
        for (i, d) in p.fixed_targets.iter().enumerate() {
            let n = Vec3::from(*d).norm();
            if !((n - 1.0).abs() <= ORIENTATION_TOL) {
                return Err(invalid(format!("sss.fixed_targets[{i}]"), "must be a unit vector"));
            }
        }
        Ok(())
    }

    /// Defaults around a microphone list: 16-bit input at `fs_hz` with an
    /// identity channel mapping, c = 343 m/s. Half-sphere scanning is
    /// resolved against the geometry, as [`parse_config`] does.
    pub fn new(mics: Vec<MicSpec>, fs_hz: u32, frame_size: usize, hop: usize) -> Self {
        let ssl = SslConfig {
            scan_half_sphere: HalfSphere::Fixed(detect_planarity(&mics)),
            ..SslConfig::default()
        };
        Self {
            raw: RawInputConfig {
                sample_rate_hz: fs_hz,
                bits_per_sample: 16,
                n_channels: mics.len(),
                hop_size_samples: hop,
            },
            mapping: (0..mics.len()).collect(),
            general: GeneralConfig {
                frame_size_samples: frame_size,
                hop_size_samples: hop,
                fs_processing_hz: fs_hz,
                speed_of_sound_mps: 343.0,
                speed_of_sound_uncertainty_mps: 0.0,
                mics,
            },
            mcra: McraConfig::default(),
            ssl,
            sst: SstConfig::default(),
            sss: SssConfig::default(),
        }
    }

    /// Half-sphere scanning after resolving `auto` against the geometry.
    pub fn half_sphere(&self) -> bool {
        self.ssl
            .scan_half_sphere
            .resolved()
            .unwrap_or_else(|| detect_planarity(&self.general.mics))
    }

    pub fn hop_duration_s(&self) -> f64 {
        self.general.hop_size_samples as f64 / self.general.fs_processing_hz as f64
    }
}

fn check_open_unit(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in (0, 1), got {v}")))
    }
}

fn check_gmm(name: &str, g: &GmmConfig) -> Result<(), ConfigError> {
    if g.weights.is_empty() {
        return Err(invalid(format!("{name}.weights"), "must be non-empty"));
    }
    if g.means.len() != g.weights.len() || g.variances.len() != g.weights.len() {
        return Err(invalid(name, "weights, means and variances must have equal length"));
    }
    if g.weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(invalid(format!("{name}.weights"), "must be non-negative"));
    }
    let sum: f64 = g.weights.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(invalid(format!("{name}.weights"), format!("must sum to 1, got {sum}")));
    }
    if g.variances.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(invalid(format!("{name}.variances"), "must be positive"));
    }
    Ok(())
}

/// Best-fit plane through the microphone positions, as (centroid, unit
/// normal, max absolute residual).
pub fn fit_plane(mics: &[MicSpec]) -> (Vec3, Vec3, f64) {
    let n = mics.len().max(1) as f64;
    let centroid = mics.iter().map(MicSpec::position).sum::<Vec3>() / n;
    let mut scatter = Matrix3::zeros();
    for m in mics {
        let d = m.position() - centroid;
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    let mut normal: Vec3 = eig.eigenvectors.column(imin).into_owned().normalize();
    // orient the normal so that the half sphere is the "upper" one
    let lead = if normal.z.abs() > 1e-9 {
        normal.z
    } else if normal.y.abs() > 1e-9 {
        normal.y
    } else {
        normal.x
    };
    if lead < 0.0 {
        normal = -normal;
    }
    let residual = mics
        .iter()
        .map(|m| (m.position() - centroid).dot(&normal).abs())
        .fold(0.0, f64::max);
    (centroid, normal, residual)
}

/// Whether all microphones lie within [`EPS_PLANE`] of a common plane.
/// Fewer than three microphones are trivially planar.
pub fn detect_planarity(mics: &[MicSpec]) -> bool {
    detect_planarity_with(mics, EPS_PLANE)
}

pub fn detect_planarity_with(mics: &[MicSpec], eps_plane: f64) -> bool {
    if mics.len() < 3 {
        return true;
    }
    fit_plane(mics).2 <= eps_plane
}
