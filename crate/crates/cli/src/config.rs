//! Run configuration. Every frequency is given in Hz here and converted to
//! rad/s once, when the core types are built. Spectral densities stay in the
//! core convention: two-sided `S_φ`, rad²·s.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinlock::motion::{default_cutoff, CoherentStateSpec, MotionalMode};
use spinlock::noise::{
    ModulationSpec, ParametricPsd, Peak, PowerLaw, PsdModel, TabulatedPsd, Tone,
};
use spinlock::spectroscopy::{
    decay_time_grid, Amplitude, FitChoice, ProtocolConfig, SidebandChannel, Transition,
};

use crate::error::CliError;

fn hz(f: f64) -> f64 {
    2.0 * PI * f
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tones: Vec<ToneConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesize: Option<SynthesizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demo: Option<DemoConfig>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Flat floor, rad²·s.
    #[serde(default)]
    pub white: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_law: Option<PowerLawConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub peaks: Vec<PeakConfig>,
    /// CSV with columns `omega_rad_s, S_rad2_s`, added to the parametric part.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerLawConfig {
    /// `S_φ` at the reference frequency, rad²·s.
    pub amplitude: f64,
    pub exponent: f64,
    pub reference_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_hz: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakConfig {
    pub center_hz: f64,
    pub height: f64,
    pub width_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToneConfig {
    pub frequency_hz: f64,
    pub beta: f64,
    #[serde(default)]
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeConfig {
    pub duration_s: f64,
    pub dt_s: f64,
    #[serde(default = "default_trajectories")]
    pub trajectories: usize,
    /// Write the sampled trajectories, not just the estimated spectrum.
    #[serde(default = "yes")]
    pub write_trajectories: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Largest Fock number in the coupling table.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Upper end of the n̄ scan for the optimum and the coupling curve.
    #[serde(default = "default_nbar_max")]
    pub nbar_max: f64,
    #[serde(default = "default_curve_points")]
    pub curve_points: usize,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self {
            eta: default_eta(),
            n_max: default_n_max(),
            nbar_max: default_nbar_max(),
            curve_points: default_curve_points(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiRange {
    pub min_hz: f64,
    pub max_hz: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default)]
    pub transition: Transition,
    /// Explicit Rabi frequencies. Exclusive with `rabi_range`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rabi_hz: Vec<f64>,
    /// Log-spaced Rabi frequencies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_range: Option<RabiRange>,
    /// Shared locking times. When empty, each Ω gets its own grid reaching
    /// the decay exponent `exponent_max` predicted by the noise model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub times_s: Vec<f64>,
    #[serde(default = "default_exponent_max")]
    pub exponent_max: f64,
    #[serde(default = "default_time_points")]
    pub time_points: usize,
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_scan_trajectories")]
    pub trajectories: usize,
    #[serde(default = "default_dt_factor")]
    pub dt_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sideband: Option<SidebandConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidebandConfig {
    pub eta: f64,
    pub trap_hz: f64,
    pub nbar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_cutoff: Option<usize>,
    /// Trap-frequency noise expressed as phase noise.
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tones: Vec<ToneConfig>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Exponential,
    DampedCosine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Scan CSV to fit. Without it the `[scan]` section is simulated first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default = "default_fit_model")]
    pub model: FitModel,
    /// Fix the initial contrast to this value; omit with `free_amplitude`.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub free_amplitude: bool,
    /// Detection floor Γ, s⁻¹.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_gamma: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoConfig {
    /// Trajectories per ensemble in the simulated panels.
    #[serde(default = "default_demo_trajectories")]
    pub trajectories: usize,
    #[serde(default = "default_shots")]
    pub shots: u64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            trajectories: default_demo_trajectories(),
            shots: default_shots(),
        }
    }
}

fn yes() -> bool {
    true
}
fn default_trajectories() -> usize {
    16
}
fn default_eta() -> f64 {
    0.038
}
fn default_n_max() -> usize {
    2000
}
fn default_nbar_max() -> f64 {
    5000.0
}
fn default_curve_points() -> usize {
    200
}
fn default_exponent_max() -> f64 {
    2.0
}
fn default_time_points() -> usize {
    24
}
fn default_shots() -> u64 {
    150
}
fn default_scan_trajectories() -> usize {
    200
}
fn default_dt_factor() -> f64 {
    0.05
}
fn default_fit_model() -> FitModel {
    FitModel::Exponential
}
fn default_amplitude() -> f64 {
    1.0
}
fn default_demo_trajectories() -> usize {
    300
}

fn bad(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be finite and > 0 (got {v})")))
    }
}

impl RunConfig {
    /// Parses a TOML file. Relative paths inside it are resolved against the
    /// file's directory so the echoed config is location independent.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                let joined = base.join(&*p);
                *p = std::fs::canonicalize(&joined).unwrap_or(joined);
            }
        };
        if let Some(t) = cfg.noise.table.as_mut() {
            resolve(t);
        }
        if let Some(t) = cfg
            .scan
            .as_mut()
            .and_then(|s| s.sideband.as_mut())
            .and_then(|s| s.noise.table.as_mut())
        {
            resolve(t);
        }
        if let Some(p) = cfg.spectrum.as_mut().and_then(|s| s.input.as_mut()) {
            resolve(p);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

impl NoiseConfig {
    pub fn model(&self, field: &str) -> Result<PsdModel, CliError> {
        let background = match &self.power_law {
            None => None,
            Some(p) => {
                positive(&format!("{field}.power_law.reference_hz"), p.reference_hz)?;
                Some(PowerLaw {
                    amplitude: p.amplitude,
                    exponent: p.exponent,
                    reference: hz(p.reference_hz),
                    band: p.band_hz.map(|[lo, hi]| (hz(lo), hz(hi))),
                })
            }
        };
        let parametric = PsdModel::Parametric(ParametricPsd {
            background,
            white_floor: self.white,
            peaks: self
                .peaks
                .iter()
                .map(|p| Peak {
                    center: hz(p.center_hz),
                    height: p.height,
                    width: hz(p.width_hz),
                })
                .collect(),
        });
        let model = match &self.table {
            None => parametric,
            Some(path) => {
                let file = std::fs::File::open(path).map_err(|e| {
                    bad(
                        &format!("{field}.table"),
                        format!("{}: {e}", path.display()),
                    )
                })?;
                let table = TabulatedPsd::read_csv(file).map_err(|e| {
                    bad(
                        &format!("{field}.table"),
                        format!("{}: {e}", path.display()),
                    )
                })?;
                if parametric.is_zero() {
                    PsdModel::Tabulated(table)
                } else {
                    PsdModel::sum(vec![parametric, PsdModel::Tabulated(table)])
                }
            }
        };
        model.validate().map_err(|e| bad(field, e))?;
        Ok(model)
    }
}

pub fn modulation(tones: &[ToneConfig], field: &str) -> Result<ModulationSpec, CliError> {
    let spec = ModulationSpec {
        tones: tones
            .iter()
            .map(|t| Tone {
                omega: hz(t.frequency_hz),
                beta: t.beta,
                delta: t.delta,
            })
            .collect(),
    };
    spec.validate().map_err(|e| bad(field, e))?;
    Ok(spec)
}

impl SynthesizeConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        positive("synthesize.duration_s", self.duration_s)?;
        positive("synthesize.dt_s", self.dt_s)?;
        if self.trajectories == 0 {
            return Err(bad("synthesize.trajectories", "must be ≥ 1"));
        }
        if self.dt_s >= self.duration_s {
            return Err(bad("synthesize.dt_s", "must be shorter than duration_s"));
        }
        Ok(())
    }
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.eta > 0.0 && self.eta < 0.5) {
            return Err(bad(
                "coupling.eta",
                format!("must lie in (0, 0.5) (got {})", self.eta),
            ));
        }
        if !(self.nbar_max > 1.0 && self.nbar_max.is_finite()) {
            return Err(bad("coupling.nbar_max", "must be finite and > 1"));
        }
        if self.curve_points < 2 {
            return Err(bad("coupling.curve_points", "must be ≥ 2"));
        }
        Ok(())
    }
}

impl ScanConfig {
    fn rabi(&self) -> Result<Vec<f64>, CliError> {
        let f: Vec<f64> = match (&self.rabi_range, self.rabi_hz.is_empty()) {
            (Some(_), false) => {
                return Err(bad("scan", "give either rabi_hz or rabi_range, not both"))
            }
            (None, true) => return Err(bad("scan", "needs rabi_hz or rabi_range")),
            (None, false) => self.rabi_hz.clone(),
            (Some(r), true) => {
                positive("scan.rabi_range.min_hz", r.min_hz)?;
                if !(r.max_hz > r.min_hz) || r.points < 2 {
                    return Err(bad(
                        "scan.rabi_range",
                        "needs max_hz > min_hz and points ≥ 2",
                    ));
                }
                (0..r.points)
                    .map(|k| {
                        r.min_hz * (r.max_hz / r.min_hz).powf(k as f64 / (r.points - 1) as f64)
                    })
                    .collect()
            }
        };
        for &v in &f {
            positive("scan.rabi_hz", v)?;
        }
        Ok(f.into_iter().map(hz).collect())
    }

    /// Resolves to a protocol configuration with frequencies in rad/s.
    pub fn protocol(&self, run: &RunConfig) -> Result<ProtocolConfig, CliError> {
        let rabi = self.rabi()?;
        let noise = run.noise.model("noise")?;
        let tones = modulation(&run.tones, "tones")?;
        let sideband = match &self.sideband {
            None => None,
            Some(sb) => {
                let motional_noise = sb.noise.model("scan.sideband.noise")?;
                Some(SidebandChannel {
                    mode: MotionalMode {
                        nu: hz(sb.trap_hz),
                        eta: sb.eta,
                        fock_cutoff: sb
                            .fock_cutoff
                            .unwrap_or_else(|| default_cutoff(sb.nbar.max(0.0))),
                    },
                    state: CoherentStateSpec { nbar: sb.nbar },
                    motional_noise,
                    motional_modulation: modulation(&sb.tones, "scan.sideband.tones")?,
                })
            }
        };
        let times = if self.times_s.is_empty() {
            if !(self.exponent_max > 0.0) || self.time_points == 0 {
                return Err(bad("scan", "exponent_max must be > 0 and time_points ≥ 1"));
            }
            let effective = match (self.transition, &sideband) {
                (Transition::BlueSideband, Some(sb)) => {
                    let scale = spinlock::motion::average_sideband_rabi(sb.mode.eta, sb.state.nbar);
                    Some((
                        scale,
                        PsdModel::sum(vec![noise.clone(), sb.motional_noise.clone()]),
                    ))
                }
                _ => None,
            };
            rabi.iter()
                .map(|&w00| {
                    let (w, model) = match &effective {
                        Some((scale, m)) => (w00 * scale, m),
                        None => (w00, &noise),
                    };
                    let rate = 0.5 * w * w * model.evaluate(w).map_err(|e| bad("noise", e))?;
                    if !(rate > 0.0) {
                        return Err(bad(
                            "scan.times_s",
                            format!(
                                "noise vanishes at Ω = 2π·{:.1} Hz; give explicit times",
                                w / (2.0 * PI)
                            ),
                        ));
                    }
                    Ok(decay_time_grid(rate, self.exponent_max, self.time_points))
                })
                .collect::<Result<Vec<_>, _>>()?
        } else {
            if self.times_s.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                return Err(bad("scan.times_s", "times must be finite and ≥ 0"));
            }
            vec![self.times_s.clone(); rabi.len()]
        };
        let cfg = ProtocolConfig {
            transition: self.transition,
            rabi,
            times,
            shots: self.shots,
            n_traj: self.trajectories,
            sideband,
            noise,
            modulation: tones,
            master_seed: run.seed,
            dt_factor: self.dt_factor,
        };
        cfg.validate().map_err(|e| bad("scan", e))?;
        Ok(cfg)
    }
}

impl SpectrumConfig {
    pub fn choice(&self) -> FitChoice {
        match self.model {
            FitModel::Exponential => FitChoice::Exponential,
            FitModel::DampedCosine => FitChoice::DampedCosine,
        }
    }

    pub fn amplitude(&self) -> Amplitude {
        if self.free_amplitude {
            Amplitude::Free
        } else {
            Amplitude::Fixed(self.amplitude)
        }
    }
}
