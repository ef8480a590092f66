use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One coherent phase-modulation tone `β cos(ωt + δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    /// rad/s
    pub omega: f64,
    /// Modulation index, rad.
    pub beta: f64,
    /// Phase offset, rad.
    #[serde(default)]
    pub delta: f64,
}

/// Sum of coherent tones. An empty list means no modulation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModulationSpec {
    #[serde(default)]
    pub tones: Vec<Tone>,
}

impl ModulationSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn single(omega: f64, beta: f64, delta: f64) -> Self {
        Self {
            tones: vec![Tone { omega, beta, delta }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tones.iter().all(|t| t.beta == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for t in &self.tones {
            if !(t.omega > 0.0 && t.omega.is_finite()) {
                return Err(Error::input(format!(
                    "tone frequency must be > 0 (got {})",
                    t.omega
                )));
            }
            if !(t.beta >= 0.0 && t.beta.is_finite()) {
                return Err(Error::input(format!(
                    "modulation index must be ≥ 0 (got {})",
                    t.beta
                )));
            }
            if !t.delta.is_finite() {
                return Err(Error::input("tone phase offset must be finite"));
            }
        }
        Ok(())
    }

    /// `φ(t) = Σ_k β_k cos(ω_k t + δ_k)`.
    pub fn sample(&self, t: f64) -> f64 {
        self.tones
            .iter()
            .map(|k| k.beta * (k.omega * t + k.delta).cos())
            .sum()
    }

    pub fn max_amplitude(&self) -> f64 {
        self.tones.iter().map(|k| k.beta).sum()
    }
}

/// Free-function form of [`ModulationSpec::sample`].
pub fn sample_modulation(spec: &ModulationSpec, t: f64) -> f64 {
    spec.sample(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn empty_is_zero() {
        assert_eq!(sample_modulation(&ModulationSpec::none(), 0.37), 0.0);
    }

    #[test]
    fn cosine_at_origin() {
        let m = ModulationSpec::single(2.0 * PI * 5000.0, 0.2, 0.0);
        assert_eq!(m.sample(0.0), 0.2);
    }

    #[test]
    fn quarter_period_crossing() {
        let w = 2.0 * PI * 5000.0;
        let delta = 1.48;
        let m = ModulationSpec::single(w, 0.2, delta);
        let t = (PI / 2.0 - delta) / w;
        assert!(m.sample(t).abs() < 1e-15);
        assert!(m.sample(t - 1e-6) > 0.0 && m.sample(t + 1e-6) < 0.0);
    }

    #[test]
    fn rejects_bad_tones() {
        assert!(ModulationSpec::single(0.0, 0.1, 0.0).validate().is_err());
        assert!(ModulationSpec::single(1.0, -0.1, 0.0).validate().is_err());
    }
}
