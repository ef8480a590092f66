//! Spectrum reconstruction from fitted decay rates.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::protocol::ScanFit;
use super::Flags;
use crate::error::{Error, Result};
use crate::noise::PsdModel;
use crate::quad::integrate;

/// Lowest resolvable frequency-noise density, set by the upper-state decay
/// rate: `S_ν,lim = Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionFloor {
    /// s⁻¹
    pub gamma: f64,
}

impl DetectionFloor {
    pub fn s_nu_lim(&self) -> f64 {
        self.gamma
    }

    pub fn flags(&self, s_nu: f64) -> bool {
        s_nu <= self.gamma
    }
}

/// Peak frequency deviation `Δν = βΩ/2π` (Hz) of `φ = β cos Ωt`.
pub fn frequency_modulation_depth(beta: f64, rabi: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::input(format!(
            "modulation index must be ≥ 0 (got {beta})"
        )));
    }
    Ok(beta * rabi / (2.0 * PI))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    /// rad/s
    pub omega: f64,
    pub rate: f64,
    pub rate_err: f64,
    /// rad²·s
    pub s_phi: f64,
    pub s_phi_err: f64,
    /// s⁻¹
    pub s_nu: f64,
    pub s_nu_err: f64,
    pub beta: Option<f64>,
    /// Hz
    pub delta_nu: Option<f64>,
    pub delta_nu_err: Option<f64>,
    pub flags: Flags,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SpectrumEstimate {
    pub rows: Vec<SpectrumRow>,
    /// Ω values whose fit failed and were left out.
    pub skipped: Vec<f64>,
}

impl SpectrumEstimate {
    /// Least-squares slope of `ln S_ν` against `ln Ω` over rows with
    /// `S_ν > 0` and `lo ≤ Ω ≤ hi`.
    pub fn log_log_slope(&self, lo: f64, hi: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.s_nu > 0.0 && r.omega >= lo && r.omega <= hi)
            .map(|r| (r.omega.ln(), r.s_nu.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }
}

/// Inverts `rate = ½Ω²S_φ(Ω)` row by row: `S_ν = 2·rate`, `S_φ = S_ν/Ω²`.
/// Rows with a resolved tone also carry `Δν`. Failed fits are skipped.
pub fn reconstruct_spectrum(fits: &[ScanFit], floor: Option<DetectionFloor>) -> SpectrumEstimate {
    let mut est = SpectrumEstimate::default();
    for f in fits {
        let Some(fit) = &f.fit else {
            est.skipped.push(f.omega);
            continue;
        };
        let w2 = f.omega * f.omega;
        let s_nu = 2.0 * fit.rate;
        let s_nu_err = 2.0 * fit.rate_err;
        let coherent = fit.beta.filter(|_| !fit.fallback);
        let mut flags = f.flags;
        flags.fallback |= fit.fallback;
        flags.floor = floor.is_some_and(|fl| fl.flags(s_nu));
        est.rows.push(SpectrumRow {
            omega: f.omega,
            rate: fit.rate,
            rate_err: fit.rate_err,
            s_phi: s_nu / w2,
            s_phi_err: s_nu_err / w2,
            s_nu,
            s_nu_err,
            beta: coherent,
            delta_nu: coherent.map(|b| b * f.omega / (2.0 * PI)),
            delta_nu_err: coherent.and(fit.beta_err).map(|e| e * f.omega / (2.0 * PI)),
            flags,
        });
    }
    est
}

/// CSV with columns `Omega_rad_s, S_phi, S_nu, S_nu_err, delta_nu_Hz, flags`;
/// `delta_nu_Hz` is empty for rows without a resolved tone.
pub fn write_spectrum_csv<W: Write>(est: &SpectrumEstimate, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "Omega_rad_s",
        "S_phi",
        "S_nu",
        "S_nu_err",
        "delta_nu_Hz",
        "flags",
    ])?;
    for r in &est.rows {
        w.write_record([
            format!("{:.12e}", r.omega),
            format!("{:.12e}", r.s_phi),
            format!("{:.12e}", r.s_nu),
            format!("{:.12e}", r.s_nu_err),
            r.delta_nu.map_or(String::new(), |d| format!("{d:.12e}")),
            r.flags.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeakNoiseReport {
    /// rms phase over the locking band `[2π/t_max, 2Ω]`, rad.
    pub rms_phase: f64,
    /// `½Ω²S_φ(Ω)·t_max`.
    pub exponent: f64,
    pub pass: bool,
}

pub const MAX_RMS_PHASE: f64 = 0.3;
pub const MAX_EXPONENT: f64 = 5.0;

/// Weak-noise diagnostics for locking at `rabi` up to `t_max`. Fails when
/// the rms phase exceeds 0.3 rad or the decay exponent exceeds 5.
pub fn weak_noise_check(rabi: f64, model: &PsdModel, t_max: f64) -> Result<WeakNoiseReport> {
    if !(rabi > 0.0 && t_max > 0.0) {
        return Err(Error::input("weak-noise check needs Ω > 0 and t_max > 0"));
    }
    let exponent = 0.5 * rabi * rabi * model.evaluate(rabi)? * t_max;
    let lo = 2.0 * PI / t_max;
    // Components well above Ω are averaged away by the drive.
    let hi = 2.0 * rabi;
    let mut variance = 0.0;
    if !model.is_zero() && hi > lo {
        let decades = (hi / lo).log10();
        let n = ((8.0 * decades).ceil() as usize).max(1);
        let mut edges: Vec<f64> = (0..=n)
            .map(|k| lo * (hi / lo).powf(k as f64 / n as f64))
            .collect();
        for (c, width) in model.features() {
            edges.extend(
                [c - width, c, c + width]
                    .into_iter()
                    .filter(|&x| x > lo && x < hi),
            );
        }
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let mut err = None;
        for p in edges.windows(2) {
            match integrate(
                |w| [model.evaluate(w).unwrap_or(f64::NAN)],
                p[0],
                p[1],
                0.0,
                1e-8,
            ) {
                Ok((v, _)) if v[0].is_finite() => variance += v[0],
                Ok(_) => err = Some(Error::SingularPsd { omega: p[0] }),
                Err(e) => err = Some(e),
            }
        }
        if let Some(e) = err {
            return Err(e);
        }
        variance /= PI;
    }
    let rms_phase = variance.sqrt();
    Ok(WeakNoiseReport {
        rms_phase,
        exponent,
        pass: rms_phase <= MAX_RMS_PHASE && exponent <= MAX_EXPONENT,
    })
}
