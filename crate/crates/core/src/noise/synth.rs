//! Gaussian phase-noise trajectories with a prescribed spectrum.
//!
//! Spectral synthesis: each positive-frequency FFT bin gets an independent
//! complex Gaussian of variance `N·S(ω_k)/dt`, the negative bins are its
//! conjugate and the DC bin is zero, so the trajectory is real, zero-mean
//! and its periodogram equals `S` in expectation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};

use super::psd::PsdModel;
use crate::error::{Error, Result};

/// One realization `φ(t_k)`, `t_k = k·dt`, held constant over `[t_k, t_k + dt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrajectory {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub seed: u64,
}

impl NoiseTrajectory {
    pub fn zeros(dt: f64, len: usize) -> Self {
        Self {
            dt,
            samples: vec![0.0; len],
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// End of the last hold interval.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.dt
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Per-trajectory seed derived from a master seed and an index (SplitMix64),
/// so ensembles do not depend on evaluation order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Smallest even 5-smooth integer ≥ `n`; keeps the FFT on fast radices.
pub(crate) fn fft_len(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        if m % 2 == 0 {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

/// Precomputed bin amplitudes and FFT plan for repeated synthesis.
#[derive(Clone)]
pub struct Synthesizer {
    dt: f64,
    len: usize,
    amplitude: Vec<f64>,
    zero: bool,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Synthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Synthesizer")
            .field("dt", &self.dt)
            .field("len", &self.len)
            .finish()
    }
}

impl Synthesizer {
    pub fn new(model: &PsdModel, duration: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::input(format!("dt must be > 0 (got {dt})")));
        }
        if !(duration >= 2.0 * dt && duration.is_finite()) {
            return Err(Error::input(format!(
                "duration {duration} s must be at least two samples of dt = {dt} s"
            )));
        }
        model.validate()?;
        let len = fft_len((duration / dt).ceil() as usize + 1);
        let d_omega = 2.0 * PI / (len as f64 * dt);
        let lower_edge = d_omega;
        let nyquist = PI / dt;
        let mut amplitude = vec![0.0; len / 2 + 1];
        for (k, a) in amplitude.iter_mut().enumerate().skip(1) {
            let omega = k as f64 * d_omega;
            let edge = if omega - lower_edge < nyquist - omega {
                lower_edge
            } else {
                nyquist
            };
            let s = model.evaluate(omega).map_err(|e| Error::Synthesis {
                edge,
                reason: e.to_string(),
            })?;
            if !s.is_finite() {
                return Err(Error::Synthesis {
                    edge,
                    reason: format!("S(ω) = {s} at ω = {omega}"),
                });
            }
            *a = (s * len as f64 / dt).sqrt();
        }
        let zero = amplitude.iter().all(|&a| a == 0.0);
        let fft = FftPlanner::new().plan_fft_inverse(len);
        Ok(Self {
            dt,
            len,
            amplitude,
            zero,
            fft,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn generate(&self, seed: u64) -> NoiseTrajectory {
        let n = self.len;
        if self.zero {
            return NoiseTrajectory {
                dt: self.dt,
                samples: vec![0.0; n],
                seed,
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = vec![Complex64::new(0.0, 0.0); n];
        let half = n / 2;
        for k in 1..half {
            let g1: f64 = StandardNormal.sample(&mut rng);
            let g2: f64 = StandardNormal.sample(&mut rng);
            let z = Complex64::new(g1, g2) * (self.amplitude[k] * FRAC_1_SQRT_2);
            spec[k] = z;
            spec[n - k] = z.conj();
        }
        // n is always even here: the Nyquist bin is real.
        let g: f64 = StandardNormal.sample(&mut rng);
        spec[half] = Complex64::new(g * self.amplitude[half], 0.0);
        self.fft.process(&mut spec);
        let scale = 1.0 / n as f64;
        NoiseTrajectory {
            dt: self.dt,
            samples: spec.iter().map(|z| z.re * scale).collect(),
            seed,
        }
    }
}

/// Zero-mean Gaussian trajectory covering at least `duration` with spectrum `model`.
pub fn synthesize_trajectory(
    model: &PsdModel,
    duration: f64,
    dt: f64,
    seed: u64,
) -> Result<NoiseTrajectory> {
    Ok(Synthesizer::new(model, duration, dt)?.generate(seed))
}
