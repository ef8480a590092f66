//! Periodogram and autocovariance estimators for sampled trajectories.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::psd::TabulatedPsd;
use super::synth::NoiseTrajectory;
use crate::error::{Error, Result};

/// Averaged periodogram of mean-removed trajectories, as a two-sided density
/// on `ω_k = 2πk/(N·dt)`, `k = 0..=N/2`.
///
/// Parseval holds exactly: `Σ_{all k} S_k·Δω/2π` equals the biased sample
/// variance averaged over the trajectories.
pub fn estimate_psd(trajectories: &[NoiseTrajectory]) -> Result<TabulatedPsd> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::input("estimate_psd needs at least one trajectory"))?;
    let (n, dt) = (first.len(), first.dt);
    if n < 2 {
        return Err(Error::input("trajectories need at least two samples"));
    }
    if trajectories.iter().any(|t| t.len() != n || t.dt != dt) {
        return Err(Error::input("all trajectories must share dt and length"));
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    let half = n / 2;
    let mut acc = vec![0.0; half + 1];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for tr in trajectories {
        let mean = tr.mean();
        for (b, &x) in buf.iter_mut().zip(&tr.samples) {
            *b = Complex64::new(x - mean, 0.0);
        }
        fft.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
    }
    let norm = dt / (n as f64 * trajectories.len() as f64);
    let d_omega = 2.0 * PI / (n as f64 * dt);
    let omega = (0..=half).map(|k| k as f64 * d_omega).collect();
    TabulatedPsd::new(omega, acc.into_iter().map(|a| a * norm).collect())
}

/// Two-sided sum `Σ_k S_k Δω/2π` over the full FFT grid of an estimate from
/// [`estimate_psd`] made on `n` samples.
pub fn periodogram_power(estimate: &TabulatedPsd, n: usize) -> f64 {
    let s = estimate.values();
    let d_omega = estimate.omega()[1] - estimate.omega()[0];
    let mut total = s[0];
    for (k, &v) in s.iter().enumerate().skip(1) {
        let mirrored = n % 2 == 0 && k == n / 2;
        total += if mirrored { v } else { 2.0 * v };
    }
    total * d_omega / (2.0 * PI)
}

/// Autocovariance `C_φ(τ)` at non-negative lags; `C(-τ) = C(τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTable {
    /// s
    pub lags: Vec<f64>,
    /// rad²
    pub values: Vec<f64>,
}

impl CorrelationTable {
    pub fn dt(&self) -> f64 {
        self.lags.get(1).copied().unwrap_or(0.0)
    }

    /// Value at `|τ|` rounded to the nearest tabulated lag.
    pub fn at(&self, tau: f64) -> Option<f64> {
        let dt = self.dt();
        if dt == 0.0 {
            return self.values.first().copied();
        }
        self.values.get((tau.abs() / dt).round() as usize).copied()
    }

    /// Discrete Wiener–Khinchin transform `dt·Σ_m C(m·dt) e^{-iωm·dt}` over
    /// the tabulated lags (both signs).
    pub fn spectrum(&self, omega: f64) -> f64 {
        let dt = self.dt();
        let tail: f64 = self
            .values
            .iter()
            .enumerate()
            .skip(1)
            .map(|(m, c)| c * (omega * m as f64 * dt).cos())
            .sum();
        dt * (self.values[0] + 2.0 * tail)
    }
}

/// Biased sample autocovariance up to `max_lag`.
pub fn autocorrelation(trajectory: &NoiseTrajectory, max_lag: f64) -> Result<CorrelationTable> {
    let n = trajectory.len();
    let dt = trajectory.dt;
    let duration = n as f64 * dt;
    if !(max_lag >= 0.0 && max_lag < 0.5 * duration) {
        return Err(Error::input(format!(
            "max_lag {max_lag} s must be below half the trajectory duration {duration} s"
        )));
    }
    let lags = (max_lag / dt + 1e-9).floor() as usize;
    let mean = trajectory.mean();
    // Zero-padding to 2N turns the circular correlation into a linear one.
    let m = 2 * n;
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = trajectory
        .samples
        .iter()
        .map(|&x| Complex64::new(x - mean, 0.0))
        .chain(std::iter::repeat_n(Complex64::new(0.0, 0.0), m - n))
        .collect();
    planner.plan_fft_forward(m).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex64::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    let scale = 1.0 / (m as f64 * n as f64);
    Ok(CorrelationTable {
        lags: (0..=lags).map(|k| k as f64 * dt).collect(),
        values: buf[..=lags].iter().map(|z| z.re * scale).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::psd::PsdModel;
    use crate::noise::synth::{derive_seed, synthesize_trajectory};

    fn biased_variance(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
    }

    #[test]
    fn zero_trajectories() {
        let tr = NoiseTrajectory::zeros(1e-3, 64);
        let est = estimate_psd(&[tr.clone(), tr.clone()]).unwrap();
        assert!(est.values().iter().all(|&s| s == 0.0));
        let c = autocorrelation(&tr, 0.01).unwrap();
        assert!(c.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_grids_rejected() {
        let a = NoiseTrajectory::zeros(1e-3, 64);
        let b = NoiseTrajectory::zeros(1e-3, 32);
        let c = NoiseTrajectory::zeros(2e-3, 64);
        assert!(estimate_psd(&[a.clone(), b]).is_err());
        assert!(estimate_psd(&[a, c]).is_err());
        assert!(estimate_psd(&[]).is_err());
    }

    #[test]
    fn parseval_consistency() {
        let m = PsdModel::white(3e-7);
        let trs: Vec<_> = (0..3)
            .map(|i| synthesize_trajectory(&m, 0.05, 1e-5, derive_seed(5, i)).unwrap())
            .collect();
        let est = estimate_psd(&trs).unwrap();
        let var = trs.iter().map(|t| biased_variance(&t.samples)).sum::<f64>() / 3.0;
        let power = periodogram_power(&est, trs[0].len());
        assert!((power - var).abs() < 1e-6 * var);
    }

    #[test]
    fn autocovariance_zero_lag_is_variance() {
        let tr = synthesize_trajectory(&PsdModel::white(1e-6), 0.01, 1e-5, 9).unwrap();
        let c = autocorrelation(&tr, 1e-3).unwrap();
        assert!((c.values[0] - biased_variance(&tr.samples)).abs() < 1e-12 * c.values[0]);
        assert_eq!(c.lags.len(), 101);
        assert!(c.values.iter().all(|v| v.abs() <= c.values[0]));
        assert!(autocorrelation(&tr, 0.006).is_err());
    }

    #[test]
    fn autocovariance_matches_direct_sum() {
        let tr = synthesize_trajectory(&PsdModel::white(1e-6), 0.002, 1e-5, 4).unwrap();
        let c = autocorrelation(&tr, 2e-4).unwrap();
        let n = tr.len();
        let mean = tr.mean();
        for (k, &v) in c.values.iter().enumerate() {
            let direct: f64 = (0..n - k)
                .map(|i| (tr.samples[i] - mean) * (tr.samples[i + k] - mean))
                .sum::<f64>()
                / n as f64;
            assert!((v - direct).abs() < 1e-12 * c.values[0]);
        }
    }

    #[test]
    fn random_phase_tone_autocovariance() {
        // C(τ) of β cos(ωt + θ) with uniform θ is (β²/2) cos(ωτ).
        let (beta, w, dt) = (0.3, 2.0 * PI * 100.0, 1e-4);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|k| beta * (w * k as f64 * dt + 0.7).cos())
            .collect();
        let tr = NoiseTrajectory {
            dt,
            samples,
            seed: 0,
        };
        let c = autocorrelation(&tr, 0.02).unwrap();
        for (tau, v) in c.lags.iter().zip(&c.values) {
            let expect = 0.5 * beta * beta * (w * tau).cos();
            // Biased estimator shrinks by (1 - τ/T); T = 10 s here.
            assert!((v - expect * (1.0 - tau / 10.0)).abs() < 2e-4, "τ = {tau}");
        }
    }

    #[test]
    fn white_noise_decorrelates() {
        let tr = synthesize_trajectory(&PsdModel::white(1e-6), 0.2, 1e-5, 21).unwrap();
        let c = autocorrelation(&tr, 5e-4).unwrap();
        let bound = 3.0 / (tr.len() as f64).sqrt();
        for v in &c.values[1..] {
            assert!((v / c.values[0]).abs() < bound);
        }
    }
}
