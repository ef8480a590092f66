//! The locking protocol end to end: simulated scans over Ω, decay fits and
//! spectrum reconstruction.

pub mod fit;
pub mod protocol;
pub mod spectrum;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use fit::{
    fit_coherent_phase, fit_damped_cosine, fit_exponential, Amplitude, DampedCosineOptions,
    DecayFit, DecayModel, PhaseFit,
};
pub use protocol::{
    decay_time_grid, fit_scan, read_scan_csv, simulate_protocol, write_scan_csv, FitChoice,
    ProtocolConfig, ScanDataset, ScanFit, ScanRow, SidebandChannel, Transition,
};
pub use spectrum::{
    frequency_modulation_depth, reconstruct_spectrum, weak_noise_check, write_spectrum_csv,
    DetectionFloor, SpectrumEstimate, SpectrumRow, WeakNoiseReport,
};

/// Validity flags carried by scan points and spectrum rows.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// Outside the weak-noise regime.
    pub weak_noise: bool,
    /// At or below the detection floor.
    pub floor: bool,
    /// Damped-cosine fit fell back to a pure exponential.
    pub fallback: bool,
    /// Sideband Rabi-frequency spread above 1e-3.
    pub spread: bool,
}

const FLAG_NAMES: [&str; 4] = ["weak_noise", "floor", "fallback", "spread"];

impl Flags {
    fn bits(&self) -> [bool; 4] {
        [self.weak_noise, self.floor, self.fallback, self.spread]
    }

    pub fn any(&self) -> bool {
        self.bits().iter().any(|&b| b)
    }

    pub fn union(self, o: Flags) -> Flags {
        Flags {
            weak_noise: self.weak_noise || o.weak_noise,
            floor: self.floor || o.floor,
            fallback: self.fallback || o.fallback,
            spread: self.spread || o.spread,
        }
    }
}

/// `;`-separated flag names, empty when none is set.
impl fmt::Display for Flags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self
            .bits()
            .iter()
            .zip(FLAG_NAMES)
            .filter(|(b, _)| **b)
            .map(|(_, n)| n)
            .collect();
        f.write_str(&names.join(";"))
    }
}

impl FromStr for Flags {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        let mut f = Flags::default();
        for name in s.split(';').map(str::trim).filter(|n| !n.is_empty()) {
            match name {
                "weak_noise" => f.weak_noise = true,
                "floor" => f.floor = true,
                "fallback" => f.fallback = true,
                "spread" => f.spread = true,
                other => return Err(crate::Error::input(format!("unknown flag '{other}'"))),
            }
        }
        Ok(f)
    }
}
