//! Phase-noise power spectral densities.
//!
//! All densities are two-sided and take an angular-frequency argument:
//! the variance of the process is `(1/2π) ∫_{-∞}^{∞} S(ω) dω` and the
//! autocorrelation is its inverse Fourier transform. A one-sided density
//! in the same units is `2·S(ω)` on `ω ≥ 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power-law segment `amplitude · |ω/reference|^exponent`.
///
/// When `band` is set, `|ω|` is clamped into it before evaluation, so the
/// segment flattens outside the band instead of diverging at `ω → 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    /// Value at the reference frequency, rad²·s.
    pub amplitude: f64,
    pub exponent: f64,
    /// rad/s
    pub reference: f64,
    /// Optional `(lo, hi)` clamp in rad/s.
    #[serde(default)]
    pub band: Option<(f64, f64)>,
}

/// Lorentzian peak centred at `±center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// rad/s
    pub center: f64,
    /// Peak value, rad²·s.
    pub height: f64,
    /// Full width at half maximum, rad/s.
    pub width: f64,
}

impl Peak {
    fn eval(&self, w_abs: f64) -> f64 {
        let x = (w_abs - self.center) / (0.5 * self.width);
        self.height / (1.0 + x * x)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParametricPsd {
    #[serde(default)]
    pub background: Option<PowerLaw>,
    /// Flat contribution, rad²·s.
    #[serde(default)]
    pub white_floor: f64,
    #[serde(default)]
    pub peaks: Vec<Peak>,
}

/// Tabulated density on a strictly increasing grid of non-negative
/// frequencies, interpolated log-log between points.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPsd {
    omega: Vec<f64>,
    value: Vec<f64>,
}

/// Result of evaluating a tabulated density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub value: f64,
    /// `|ω|` fell outside the table and the nearest end value was used.
    pub extrapolated: bool,
}

impl TabulatedPsd {
    pub fn new(omega: Vec<f64>, value: Vec<f64>) -> Result<Self> {
        if omega.is_empty() || omega.len() != value.len() {
            return Err(Error::input(format!(
                "tabulated PSD needs equal, non-empty columns (got {} and {})",
                omega.len(),
                value.len()
            )));
        }
        if omega.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::input(
                "tabulated PSD frequencies must be finite and ≥ 0",
            ));
        }
        if omega.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::input(
                "tabulated PSD frequencies must be strictly increasing",
            ));
        }
        if value.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::input("tabulated PSD values must be finite and ≥ 0"));
        }
        Ok(Self { omega, value })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn lookup(&self, omega: f64) -> Lookup {
        let w = omega.abs();
        let n = self.omega.len();
        if w <= self.omega[0] {
            return Lookup {
                value: self.value[0],
                extrapolated: w < self.omega[0],
            };
        }
        if w >= self.omega[n - 1] {
            return Lookup {
                value: self.value[n - 1],
                extrapolated: w > self.omega[n - 1],
            };
        }
        let hi = self.omega.partition_point(|&x| x <= w);
        let lo = hi - 1;
        let (w0, w1) = (self.omega[lo], self.omega[hi]);
        let (s0, s1) = (self.value[lo], self.value[hi]);
        let value = if w0 > 0.0 && s0 > 0.0 && s1 > 0.0 {
            let f = (w / w0).ln() / (w1 / w0).ln();
            (s0.ln() + f * (s1.ln() - s0.ln())).exp()
        } else {
            // log-log is undefined through zeros; fall back to linear.
            s0 + (w - w0) / (w1 - w0) * (s1 - s0)
        };
        Lookup {
            value,
            extrapolated: false,
        }
    }

    /// Two-column CSV `omega_rad_s, S_rad2_s` with a header row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["omega_rad_s", "S_rad2_s"])?;
        for (o, s) in self.omega.iter().zip(&self.value) {
            w.write_record([format!("{o:.12e}"), format!("{s:.12e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the two-column layout written by [`TabulatedPsd::write_csv`].
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let (mut omega, mut value) = (Vec::new(), Vec::new());
        for rec in rd.deserialize() {
            let (o, s): (f64, f64) = rec?;
            omega.push(o);
            value.push(s);
        }
        Self::new(omega, value)
    }

    /// Two-sided integral `(1/2π) ∫ S dω` by trapezoids over the table.
    pub fn variance(&self) -> f64 {
        let one_sided: f64 = self
            .omega
            .windows(2)
            .zip(self.value.windows(2))
            .map(|(w, s)| 0.5 * (s[0] + s[1]) * (w[1] - w[0]))
            .sum();
        one_sided / std::f64::consts::PI
    }
}

/// Two-sided phase-noise spectrum `S_φ(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PsdModel {
    Parametric(ParametricPsd),
    Tabulated(TabulatedPsd),
    /// Independent processes add their spectra.
    Sum(Vec<PsdModel>),
}

impl Default for PsdModel {
    fn default() -> Self {
        PsdModel::zero()
    }
}

impl PsdModel {
    pub fn zero() -> Self {
        PsdModel::Parametric(ParametricPsd::default())
    }

    pub fn white(floor: f64) -> Self {
        PsdModel::Parametric(ParametricPsd {
            white_floor: floor,
            ..Default::default()
        })
    }

    /// Spectrum of the sum of independent processes.
    pub fn sum(parts: Vec<PsdModel>) -> Self {
        PsdModel::Sum(parts)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PsdModel::Parametric(p) => {
                if !(p.white_floor.is_finite() && p.white_floor >= 0.0) {
                    return Err(Error::input("white_floor must be finite and ≥ 0"));
                }
                if let Some(b) = &p.background {
                    if !(b.amplitude.is_finite() && b.amplitude >= 0.0) {
                        return Err(Error::input("background amplitude must be finite and ≥ 0"));
                    }
                    if !b.exponent.is_finite() {
                        return Err(Error::input("background exponent must be finite"));
                    }
                    if !(b.reference.is_finite() && b.reference > 0.0) {
                        return Err(Error::input("background reference frequency must be > 0"));
                    }
                    if let Some((lo, hi)) = b.band {
                        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                            return Err(Error::input("background band must satisfy 0 < lo < hi"));
                        }
                    }
                }
                for pk in &p.peaks {
                    if !(pk.height >= 0.0 && pk.width > 0.0 && pk.center >= 0.0)
                        || !(pk.height.is_finite() && pk.width.is_finite() && pk.center.is_finite())
                    {
                        return Err(Error::input(
                            "peaks need center ≥ 0, height ≥ 0 and width > 0",
                        ));
                    }
                }
                Ok(())
            }
            // Constructor already enforces the table invariants.
            PsdModel::Tabulated(_) => Ok(()),
            PsdModel::Sum(parts) => parts.iter().try_for_each(PsdModel::validate),
        }
    }

    /// True when the spectrum vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self {
            PsdModel::Parametric(p) => {
                p.white_floor == 0.0
                    && p.background.as_ref().is_none_or(|b| b.amplitude == 0.0)
                    && p.peaks.iter().all(|pk| pk.height == 0.0)
            }
            PsdModel::Tabulated(t) => t.values().iter().all(|&s| s == 0.0),
            PsdModel::Sum(parts) => parts.iter().all(PsdModel::is_zero),
        }
    }

    /// `S_φ(ω)` in rad²·s. Even in `ω` by construction.
    pub fn evaluate(&self, omega: f64) -> Result<f64> {
        if !omega.is_finite() {
            return Err(Error::input(format!("cannot evaluate PSD at ω = {omega}")));
        }
        let w = omega.abs();
        match self {
            PsdModel::Parametric(p) => {
                let mut s = p.white_floor;
                if let Some(b) = &p.background {
                    if b.amplitude != 0.0 {
                        let w_eff = match b.band {
                            Some((lo, hi)) => w.clamp(lo, hi),
                            None => w,
                        };
                        if w_eff == 0.0 && b.exponent < 0.0 {
                            return Err(Error::SingularPsd { omega });
                        }
                        s += b.amplitude * (w_eff / b.reference).powf(b.exponent);
                    }
                }
                s += p.peaks.iter().map(|pk| pk.eval(w)).sum::<f64>();
                Ok(s)
            }
            PsdModel::Tabulated(t) => Ok(t.lookup(w).value),
            PsdModel::Sum(parts) => parts.iter().map(|p| p.evaluate(omega)).sum(),
        }
    }

    /// Frequencies where the density has structure worth resolving
    /// (peak centres and widths), used to place quadrature breakpoints.
    pub(crate) fn features(&self) -> Vec<(f64, f64)> {
        match self {
            PsdModel::Parametric(p) => p.peaks.iter().map(|pk| (pk.center, pk.width)).collect(),
            PsdModel::Tabulated(_) => Vec::new(),
            PsdModel::Sum(parts) => parts.iter().flat_map(PsdModel::features).collect(),
        }
    }
}

/// Which way to convert between phase and frequency noise densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conversion {
    PhaseToFrequency,
    FrequencyToPhase,
}

/// `S_ν(ω) = ω² S_φ(ω)` and its inverse.
pub fn convert_psd(value: f64, omega: f64, direction: Conversion) -> Result<f64> {
    match direction {
        Conversion::PhaseToFrequency => Ok(omega * omega * value),
        Conversion::FrequencyToPhase => {
            if omega == 0.0 {
                return Err(Error::Domain(
                    "frequency-to-phase conversion is undefined at ω = 0".into(),
                ));
            }
            Ok(value / (omega * omega))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn power_law(exponent: f64, band: Option<(f64, f64)>) -> PsdModel {
        PsdModel::Parametric(ParametricPsd {
            background: Some(PowerLaw {
                amplitude: 2.0e-6,
                exponent,
                reference: 1000.0,
                band,
            }),
            ..Default::default()
        })
    }

    #[test]
    fn flat_spectrum() {
        let m = PsdModel::white(1e-9);
        assert_eq!(m.evaluate(2.0 * PI * 1000.0).unwrap(), 1e-9);
    }

    #[test]
    fn power_law_arithmetic() {
        let m = power_law(-1.5, None);
        let s = m.evaluate(4000.0).unwrap();
        assert!((s - 2.0e-6 / 8.0).abs() < 1e-20);
    }

    #[test]
    fn singular_at_dc() {
        let m = power_law(-1.5, None);
        assert!(matches!(m.evaluate(0.0), Err(Error::SingularPsd { .. })));
        let clamped = power_law(-1.5, Some((100.0, 1e5)));
        let s0 = clamped.evaluate(0.0).unwrap();
        assert_eq!(s0, clamped.evaluate(100.0).unwrap());
    }

    #[test]
    fn lorentzian_half_width() {
        let m = PsdModel::Parametric(ParametricPsd {
            peaks: vec![Peak {
                center: 5000.0,
                height: 4.0,
                width: 100.0,
            }],
            ..Default::default()
        });
        assert_eq!(m.evaluate(5000.0).unwrap(), 4.0);
        assert!((m.evaluate(5050.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((m.evaluate(-4950.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn conversion_examples() {
        let w = 2.0 * PI * 1000.0;
        let s_nu = convert_psd(1e-9, w, Conversion::PhaseToFrequency).unwrap();
        assert!((s_nu - 3.947_841_760_435_743e-2).abs() < 1e-15);
        assert!(convert_psd(1.0, 0.0, Conversion::FrequencyToPhase).is_err());
        let floor = convert_psd(0.9, w, Conversion::FrequencyToPhase).unwrap();
        assert!((floor - 0.9 / (w * w)).abs() < 1e-24);
    }

    #[test]
    fn sums_add() {
        let m = PsdModel::sum(vec![PsdModel::white(1e-9), power_law(-1.5, None)]);
        assert!((m.evaluate(4000.0).unwrap() - (1e-9 + 2.5e-7)).abs() < 1e-20);
        assert!(PsdModel::sum(vec![PsdModel::zero(), PsdModel::zero()]).is_zero());
        assert!(matches!(m.evaluate(0.0), Err(Error::SingularPsd { .. })));
    }

    #[test]
    fn tabulated_interpolation() {
        let t = TabulatedPsd::new(vec![10.0, 100.0, 1000.0], vec![1.0, 1e-2, 1e-4]).unwrap();
        let mid = t.lookup(31.622_776_601_683_793);
        assert!((mid.value - 0.1).abs() < 1e-12);
        assert!(!mid.extrapolated);
        let lo = t.lookup(1.0);
        assert_eq!(lo.value, 1.0);
        assert!(lo.extrapolated);
        assert!(t.lookup(5000.0).extrapolated);
        assert!(TabulatedPsd::new(vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(TabulatedPsd::new(vec![1.0, 2.0], vec![1.0, -1.0]).is_err());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(TabulatedPsd::read_csv(buf.as_slice()).unwrap(), t);
        assert!(TabulatedPsd::read_csv("omega_rad_s,S_rad2_s\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn evaluate_is_even(w in -1e6f64..1e6, floor in 0.0f64..1e-6, h in 0.0f64..1e-6,
                            c in 0.0f64..1e5, width in 1.0f64..1e4, e in -3.0f64..1.0) {
            let m = PsdModel::Parametric(ParametricPsd {
                background: Some(PowerLaw { amplitude: 1e-8, exponent: e, reference: 1e3,
                                            band: Some((1.0, 1e5)) }),
                white_floor: floor,
                peaks: vec![Peak { center: c, height: h, width }],
            });
            prop_assert_eq!(m.evaluate(w).unwrap(), m.evaluate(-w).unwrap());
            prop_assert!(m.evaluate(w).unwrap() >= 0.0);
        }

        #[test]
        fn conversion_round_trip(s in 1e-15f64..1.0, w in 1e-3f64..1e7) {
            let nu = convert_psd(s, w, Conversion::PhaseToFrequency).unwrap();
            let back = convert_psd(nu, w, Conversion::FrequencyToPhase).unwrap();
            prop_assert!((back - s).abs() <= 4.0 * f64::EPSILON * s);
        }
    }
}
