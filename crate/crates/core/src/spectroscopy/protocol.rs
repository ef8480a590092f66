//! Simulated locking scans: ideal π/2 preparation, locking drive, ideal
//! analysis pulse and binomial projection noise.

use std::io::{Read, Write};

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::fit::{fit_damped_cosine, fit_exponential, Amplitude, DampedCosineOptions, DecayFit};
use super::spectrum::{weak_noise_check, MAX_EXPONENT, MAX_RMS_PHASE};
use super::Flags;
use crate::dynamics::{ensemble_average, DriveConfig};
use crate::error::{Error, Result};
use crate::motion::{CoherentStateSpec, MotionalMode, SidebandCouplings};
use crate::noise::{derive_seed, ModulationSpec, PsdModel};

/// Spread of relative sideband couplings above which a warning is raised.
pub const SPREAD_LIMIT: f64 = 1e-3;

// Keeps the shot-noise streams apart from the trajectory streams.
const SHOT_STREAM: u64 = 0x5348_4f54_5354_524d;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    #[default]
    Carrier,
    BlueSideband,
}

/// Motional state and the noise that only the sideband transition sees.
#[derive(Debug, Clone, PartialEq)]
pub struct SidebandChannel {
    pub mode: MotionalMode,
    pub state: CoherentStateSpec,
    /// Oscillator frequency noise expressed as phase noise, added to the
    /// carrier noise.
    pub motional_noise: PsdModel,
    pub motional_modulation: ModulationSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub transition: Transition,
    /// Locking Rabi frequencies, rad/s. On the sideband these are carrier
    /// ground-state values `Ω₀,₀`, rescaled by the averaged coupling.
    pub rabi: Vec<f64>,
    /// Locking durations for each entry of `rabi`, s.
    pub times: Vec<Vec<f64>>,
    pub shots: u64,
    pub n_traj: usize,
    pub sideband: Option<SidebandChannel>,
    pub noise: PsdModel,
    pub modulation: ModulationSpec,
    pub master_seed: u64,
    /// Integration step in units of `1/Ω`.
    pub dt_factor: f64,
}

impl ProtocolConfig {
    pub fn carrier(rabi: Vec<f64>, times: Vec<Vec<f64>>, noise: PsdModel) -> Self {
        Self {
            transition: Transition::Carrier,
            rabi,
            times,
            shots: 150,
            n_traj: 200,
            sideband: None,
            noise,
            modulation: ModulationSpec::none(),
            master_seed: 0,
            dt_factor: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rabi.is_empty() {
            return Err(Error::input("scan needs at least one Rabi frequency"));
        }
        if self.rabi.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::input("Rabi frequencies must be finite and > 0"));
        }
        if self.rabi.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::input("Rabi frequencies must be strictly increasing"));
        }
        if self.times.len() != self.rabi.len() {
            return Err(Error::input(format!(
                "need one time grid per Rabi frequency ({} grids for {} frequencies)",
                self.times.len(),
                self.rabi.len()
            )));
        }
        if self.times.iter().any(|g| g.is_empty()) {
            return Err(Error::input("time grids must be non-empty"));
        }
        if self.shots == 0 {
            return Err(Error::input("shots must be ≥ 1"));
        }
        if self.n_traj == 0 {
            return Err(Error::input("n_traj must be ≥ 1"));
        }
        if !(self.dt_factor > 0.0 && self.dt_factor < 0.1) {
            return Err(Error::input("dt_factor must lie in (0, 0.1)"));
        }
        self.noise.validate()?;
        self.modulation.validate()?;
        match (self.transition, &self.sideband) {
            (Transition::BlueSideband, None) => {
                return Err(Error::input(
                    "blue-sideband scan needs a motional configuration",
                ))
            }
            (_, Some(sb)) => {
                sb.mode.validate()?;
                if !(sb.state.nbar >= 0.0 && sb.state.nbar.is_finite()) {
                    return Err(Error::input("n̄ must be finite and ≥ 0"));
                }
                sb.motional_noise.validate()?;
                sb.motional_modulation.validate()?;
            }
            _ => {}
        }
        Ok(())
    }
}

/// `n` evenly spaced times up to the point where the decay exponent
/// `rate·t` reaches `exponent_max` (zero excluded).
pub fn decay_time_grid(rate: f64, exponent_max: f64, n: usize) -> Vec<f64> {
    let t_max = exponent_max / rate;
    (1..=n).map(|i| t_max * i as f64 / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    /// Effective locking Rabi frequency, rad/s.
    pub omega: f64,
    pub t: f64,
    pub sx_mean: f64,
    pub sx_stderr: f64,
    pub shots: u64,
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanDataset {
    pub rows: Vec<ScanRow>,
    pub warnings: Vec<String>,
}

/// Runs the protocol at every configured Ω. Points outside the weak-noise
/// regime are flagged, not rejected.
pub fn simulate_protocol(config: &ProtocolConfig) -> Result<ScanDataset> {
    config.validate()?;
    let mut out = ScanDataset::default();
    let (scale, noise, modulation, spread_flag) = match (config.transition, &config.sideband) {
        (Transition::BlueSideband, Some(sb)) => {
            let (mean, spread) = SidebandCouplings::new(sb.mode.eta).moments(sb.state.nbar);
            if spread > SPREAD_LIMIT {
                out.warnings.push(format!(
                    "sideband Rabi-frequency spread {spread:.3e} exceeds {SPREAD_LIMIT:.0e} and is neglected"
                ));
            }
            let mut tones = config.modulation.clone();
            tones
                .tones
                .extend(sb.motional_modulation.tones.iter().copied());
            (
                mean,
                PsdModel::sum(vec![config.noise.clone(), sb.motional_noise.clone()]),
                tones,
                spread > SPREAD_LIMIT,
            )
        }
        _ => (1.0, config.noise.clone(), config.modulation.clone(), false),
    };
    for (i, (&w00, times)) in config.rabi.iter().zip(&config.times).enumerate() {
        let rabi = w00 * scale;
        let drive = DriveConfig::new(rabi).with_dt(config.dt_factor / rabi);
        let rec = ensemble_average(
            &drive,
            &noise,
            &modulation,
            config.n_traj,
            derive_seed(config.master_seed, i as u64),
            times,
        )?;
        let t_max = times.iter().cloned().fold(0.0, f64::max);
        let weak = weak_noise_check(rabi, &noise, t_max.max(f64::MIN_POSITIVE))?;
        let s_at = noise.evaluate(rabi)?;
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(config.master_seed ^ SHOT_STREAM, i as u64));
        for (j, &t) in times.iter().enumerate() {
            let p = (0.5 * (1.0 + rec.sx[j])).clamp(0.0, 1.0);
            let k = Binomial::new(config.shots, p)
                .map_err(|e| Error::input(format!("binomial sampling: {e}")))?
                .sample(&mut rng);
            let n = config.shots as f64;
            let p_hat = k as f64 / n;
            let se_p = if k == 0 || k == config.shots {
                // Wilson half-width at z = 1.
                0.5 / (n + 1.0)
            } else {
                (p_hat * (1.0 - p_hat) / n).sqrt()
            };
            let se_ens = rec.stderr.as_ref().map_or(0.0, |s| s[0][j]);
            let exponent = 0.5 * rabi * rabi * s_at * t;
            out.rows.push(ScanRow {
                omega: rabi,
                t,
                sx_mean: 2.0 * p_hat - 1.0,
                sx_stderr: (4.0 * se_p * se_p + se_ens * se_ens).sqrt(),
                shots: config.shots,
                flags: Flags {
                    weak_noise: weak.rms_phase > MAX_RMS_PHASE || exponent > MAX_EXPONENT,
                    spread: spread_flag,
                    ..Default::default()
                },
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct RawRow {
    #[serde(rename = "Omega_rad_s")]
    omega: f64,
    t_s: f64,
    sx_mean: f64,
    sx_stderr: f64,
    shots: u64,
    flags: String,
}

/// CSV with columns `Omega_rad_s, t_s, sx_mean, sx_stderr, shots, flags`.
pub fn write_scan_csv<W: Write>(data: &ScanDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "Omega_rad_s",
        "t_s",
        "sx_mean",
        "sx_stderr",
        "shots",
        "flags",
    ])?;
    for r in &data.rows {
        w.write_record([
            format!("{:.12e}", r.omega),
            format!("{:.12e}", r.t),
            format!("{:.12e}", r.sx_mean),
            format!("{:.12e}", r.sx_stderr),
            r.shots.to_string(),
            r.flags.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scan_csv<R: Read>(input: R) -> Result<ScanDataset> {
    let mut rd = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for rec in rd.deserialize() {
        let r: RawRow = rec?;
        rows.push(ScanRow {
            omega: r.omega,
            t: r.t_s,
            sx_mean: r.sx_mean,
            sx_stderr: r.sx_stderr,
            shots: r.shots,
            flags: r.flags.parse()?,
        });
    }
    if rows.is_empty() {
        return Err(Error::input("scan file contains no rows"));
    }
    Ok(ScanDataset {
        rows,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitChoice {
    #[default]
    Exponential,
    DampedCosine,
}

/// Fit outcome for one Ω. `fit` is `None` when the fit failed; `error`
/// then holds the reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanFit {
    pub omega: f64,
    pub fit: Option<DecayFit>,
    pub error: Option<String>,
    /// Union of the flags of the points that went into the fit.
    pub flags: Flags,
}

/// Fits every Ω of a scan separately (rows grouped by consecutive Ω).
pub fn fit_scan(data: &ScanDataset, choice: FitChoice, amplitude: Amplitude) -> Vec<ScanFit> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < data.rows.len() {
        let omega = data.rows[start].omega;
        let end = start
            + data.rows[start..]
                .iter()
                .take_while(|r| r.omega == omega)
                .count();
        let group = &data.rows[start..end];
        let t: Vec<f64> = group.iter().map(|r| r.t).collect();
        let y: Vec<f64> = group.iter().map(|r| r.sx_mean).collect();
        let e: Vec<f64> = group.iter().map(|r| r.sx_stderr).collect();
        let flags = group.iter().fold(Flags::default(), |a, r| a.union(r.flags));
        let res = match choice {
            FitChoice::Exponential => fit_exponential(&t, &y, &e, amplitude),
            FitChoice::DampedCosine => {
                let opts = DampedCosineOptions {
                    amplitude,
                    ..Default::default()
                };
                fit_damped_cosine(&t, &y, &e, omega, &opts)
            }
        };
        out.push(match res {
            Ok(f) => ScanFit {
                omega,
                flags: Flags {
                    fallback: f.fallback,
                    ..flags
                },
                fit: Some(f),
                error: None,
            },
            Err(e) => ScanFit {
                omega,
                fit: None,
                error: Some(e.to_string()),
                flags,
            },
        });
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn base(noise: PsdModel) -> ProtocolConfig {
        let w = 2.0 * PI * 1000.0;
        ProtocolConfig {
            n_traj: 16,
            ..ProtocolConfig::carrier(vec![w], vec![decay_time_grid(100.0, 2.0, 6)], noise)
        }
    }

    #[test]
    fn noiseless_stays_locked() {
        let d = simulate_protocol(&base(PsdModel::zero())).unwrap();
        for r in &d.rows {
            assert_eq!(r.sx_mean, 1.0);
            assert!((r.sx_stderr - 1.0 / 151.0).abs() < 1e-15);
            assert!(!r.flags.any());
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = base(PsdModel::zero());
        c.shots = 0;
        assert!(simulate_protocol(&c).is_err());
        let mut c = base(PsdModel::zero());
        c.rabi = vec![2.0, 1.0];
        c.times = vec![vec![0.1], vec![0.1]];
        assert!(simulate_protocol(&c).is_err());
        let mut c = base(PsdModel::zero());
        c.transition = Transition::BlueSideband;
        assert!(simulate_protocol(&c).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let w = 2.0 * PI * 1000.0;
        let s = 2.0 * 100.0 / (w * w);
        let d = simulate_protocol(&base(PsdModel::white(s))).unwrap();
        let mut buf = Vec::new();
        write_scan_csv(&d, &mut buf).unwrap();
        let back = read_scan_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows.len(), d.rows.len());
        for (a, b) in back.rows.iter().zip(&d.rows) {
            assert!((a.sx_mean - b.sx_mean).abs() < 1e-11);
            assert_eq!(a.flags, b.flags);
        }
        assert!(
            read_scan_csv("Omega_rad_s,t_s,sx_mean,sx_stderr,shots,flags\n".as_bytes()).is_err()
        );
    }

    #[test]
    fn strong_exponent_flags_rows() {
        let w = 2.0 * PI * 1000.0;
        let s = 2.0 * 100.0 / (w * w);
        let mut c = base(PsdModel::white(s));
        c.times = vec![vec![0.01, 0.06]];
        let d = simulate_protocol(&c).unwrap();
        assert!(!d.rows[0].flags.weak_noise);
        assert!(d.rows[1].flags.weak_noise);
    }
}
