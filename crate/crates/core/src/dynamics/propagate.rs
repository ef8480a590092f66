//! Single-trajectory propagation of the locked qubit.
//!
//! The phase `φ(t)` is piecewise constant between noise samples plus any
//! coherent tones. Over each step the rotation vector is the exact integral
//! `θ = ∫ Ωφ(s) (0, cos Ωs, −sin Ωs) ds`, applied as the SU(2) rotation
//! `exp(−i θ·σ/2)`, so the state stays normalized to rounding.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::Write;

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{ModulationSpec, NoiseTrajectory};

/// Phase excursions above this break the small-phase form of the Hamiltonian.
pub const STRONG_PHASE: f64 = 0.3;

/// Reference frame of reported Bloch components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Frame co-rotating with the locking drive (the one the noise Hamiltonian lives in).
    #[default]
    Locking,
    /// Frame of the bare drive: `σ_y`, `σ_z` precess at Ω about x.
    Drive,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum InitialState {
    #[default]
    PlusX,
    /// Pure state on the Bloch sphere; normalized on use.
    Bloch(Vector3<f64>),
}

impl InitialState {
    pub(crate) fn spinor(&self) -> Result<Spinor> {
        match *self {
            InitialState::PlusX => Ok(Spinor::plus_x()),
            InitialState::Bloch(s) => Spinor::from_bloch(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveConfig {
    /// Locking Rabi frequency Ω, rad/s.
    pub rabi: f64,
    /// Maximum integration step, s. Must satisfy `dt·Ω < 0.1`.
    pub dt: f64,
    pub initial: InitialState,
    pub frame: Frame,
}

impl DriveConfig {
    pub fn new(rabi: f64) -> Self {
        Self {
            rabi,
            dt: 0.01 / rabi,
            initial: InitialState::PlusX,
            frame: Frame::Locking,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_initial(mut self, initial: InitialState) -> Self {
        self.initial = initial;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rabi > 0.0 && self.rabi.is_finite()) {
            return Err(Error::input(format!(
                "Rabi frequency must be > 0 (got {})",
                self.rabi
            )));
        }
        if !(self.dt > 0.0 && self.dt * self.rabi < 0.1) {
            return Err(Error::input(format!(
                "integration step must satisfy 0 < dt·Ω < 0.1 (dt·Ω = {})",
                self.dt * self.rabi
            )));
        }
        Ok(())
    }
}

/// Sources of the locking-phase excursion.
#[derive(Debug, Clone, Copy, Default)]
pub struct PhaseInput<'a> {
    pub noise: Option<&'a NoiseTrajectory>,
    pub modulation: Option<&'a ModulationSpec>,
}

impl<'a> PhaseInput<'a> {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn noise(noise: &'a NoiseTrajectory) -> Self {
        Self {
            noise: Some(noise),
            modulation: None,
        }
    }

    pub fn modulation(modulation: &'a ModulationSpec) -> Self {
        Self {
            noise: None,
            modulation: Some(modulation),
        }
    }

    pub fn both(
        noise: Option<&'a NoiseTrajectory>,
        modulation: Option<&'a ModulationSpec>,
    ) -> Self {
        Self { noise, modulation }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Spinor {
    pub up: Complex64,
    pub down: Complex64,
}

impl Spinor {
    pub fn plus_x() -> Self {
        let a = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self { up: a, down: a }
    }

    pub fn from_bloch(s: Vector3<f64>) -> Result<Self> {
        let norm = s.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::input("initial Bloch vector must be non-zero"));
        }
        let s = s / norm;
        let theta = s.z.clamp(-1.0, 1.0).acos();
        let phi = s.y.atan2(s.x);
        Ok(Self {
            up: Complex64::new((0.5 * theta).cos(), 0.0),
            down: Complex64::from_polar((0.5 * theta).sin(), phi),
        })
    }

    pub fn bloch(&self) -> Vector3<f64> {
        let c = self.up.conj() * self.down;
        Vector3::new(
            2.0 * c.re,
            2.0 * c.im,
            self.up.norm_sqr() - self.down.norm_sqr(),
        )
    }

    /// Applies `exp(−i (θ_y σ_y + θ_z σ_z)/2)`.
    #[inline]
    pub fn rotate_yz(&mut self, theta_y: f64, theta_z: f64) {
        let angle = theta_y.hypot(theta_z);
        let (sin_half, cos_half) = (0.5 * angle).sin_cos();
        // sin(|θ|/2)/|θ|, finite at θ → 0.
        let f = if angle > 1e-6 {
            sin_half / angle
        } else {
            0.5 - angle * angle / 48.0
        };
        let (ny, nz) = (f * theta_y, f * theta_z);
        let a = self.up;
        let b = self.down;
        self.up = Complex64::new(cos_half, -nz) * a - b * ny;
        self.down = a * ny + Complex64::new(cos_half, nz) * b;
    }
}

/// `∫_{t0}^{t1} cos(a s + b) ds` and `∫ sin(a s + b) ds`, stable as `a → 0`.
#[inline]
pub(crate) fn cos_sin_integrals(a: f64, b: f64, t0: f64, t1: f64) -> (f64, f64) {
    let h = t1 - t0;
    let x = 0.5 * a * h;
    let sinc = if x.abs() > 1e-4 {
        x.sin() / x
    } else {
        1.0 - x * x / 6.0
    };
    let (s, c) = (a * (t0 + 0.5 * h) + b).sin_cos();
    (h * c * sinc, h * s * sinc)
}

/// Expectation values `⟨σx⟩, ⟨σy⟩, ⟨σz⟩` on a time grid, optionally with
/// ensemble standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochRecord {
    pub times: Vec<f64>,
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
    pub sz: Vec<f64>,
    pub stderr: Option<[Vec<f64>; 3]>,
    /// Largest `|φ|` seen over the run (noise plus tones), rad.
    pub max_abs_phase: f64,
    pub n_traj: usize,
}

impl BlochRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn vector(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.sx[i], self.sy[i], self.sz[i])
    }

    /// Phase excursions left the small-phase regime somewhere in the run.
    pub fn strong_phase(&self) -> bool {
        self.max_abs_phase > STRONG_PHASE
    }

    /// CSV with columns `t, sx, sy, sz, se_sx, se_sy, se_sz`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "sx", "sy", "sz", "se_sx", "se_sy", "se_sz"])?;
        for i in 0..self.len() {
            let se = |k: usize| self.stderr.as_ref().map_or(0.0, |s| s[k][i]);
            w.write_record(
                [
                    self.times[i],
                    self.sx[i],
                    self.sy[i],
                    self.sz[i],
                    se(0),
                    se(1),
                    se(2),
                ]
                .iter()
                .map(|v| format!("{v:.12e}")),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::input("time grid is empty"));
    }
    if t_grid[0] < 0.0 || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::input("time grid must be finite and start at t ≥ 0"));
    }
    if t_grid.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::input("time grid must be non-decreasing"));
    }
    Ok(())
}

/// Evolves one pure state under the locking-frame Hamiltonian and records
/// the Bloch vector at every time in `t_grid`.
pub fn propagate_trajectory(
    drive: &DriveConfig,
    phase: PhaseInput<'_>,
    t_grid: &[f64],
) -> Result<BlochRecord> {
    drive.validate()?;
    validate_grid(t_grid)?;
    let t_end = *t_grid.last().unwrap();
    if let Some(noise) = phase.noise {
        if noise.is_empty() || !(noise.dt > 0.0) {
            return Err(Error::input("noise trajectory is empty"));
        }
        if noise.duration() < t_end * (1.0 - 1e-12) {
            return Err(Error::input(format!(
                "noise trajectory covers {:.6e} s but the grid ends at {:.6e} s",
                noise.duration(),
                t_end
            )));
        }
    }
    let tones = phase.modulation.map(|m| m.tones.as_slice()).unwrap_or(&[]);
    let rabi = drive.rabi;
    let mut state = drive.initial.spinor()?;

    let n = t_grid.len();
    let mut rec = BlochRecord {
        times: t_grid.to_vec(),
        sx: Vec::with_capacity(n),
        sy: Vec::with_capacity(n),
        sz: Vec::with_capacity(n),
        stderr: None,
        max_abs_phase: phase.modulation.map_or(0.0, |m| m.max_amplitude()),
        n_traj: 1,
    };

    let mut t = 0.0_f64;
    let mut k = 0usize;
    let (mut sin0, mut cos0) = (0.0_f64, 1.0_f64);
    let mut noise_peak = 0.0_f64;
    let snap = 1e-9 * drive.dt;

    for &target in t_grid {
        while t < target {
            let mut t1 = (t + drive.dt).min(target);
            let mut phi = 0.0;
            if let Some(noise) = phase.noise {
                // Hold interval k is [k·dt_n, (k+1)·dt_n).
                let mut boundary = (k + 1) as f64 * noise.dt;
                while boundary <= t + snap {
                    k += 1;
                    boundary = (k + 1) as f64 * noise.dt;
                }
                phi = noise.samples[k.min(noise.len() - 1)];
                noise_peak = noise_peak.max(phi.abs());
                t1 = t1.min(boundary);
            }
            if target - t1 < snap {
                t1 = target;
            }
            let (sin1, cos1) = (rabi * t1).sin_cos();
            // Noise part: φ constant, ∫Ω cos Ωs ds = sin Ωt1 − sin Ωt0.
            let mut theta_y = phi * (sin1 - sin0);
            let mut theta_z = phi * (cos1 - cos0);
            for tone in tones {
                // β cos(ωs+δ) cos(Ωs) and β cos(ωs+δ) sin(Ωs) via product-to-sum.
                let (cm, sm) = cos_sin_integrals(tone.omega - rabi, tone.delta, t, t1);
                let (cp, sp) = cos_sin_integrals(tone.omega + rabi, tone.delta, t, t1);
                let a = 0.5 * rabi * tone.beta;
                theta_y += a * (cm + cp);
                theta_z -= a * (sp - sm);
            }
            state.rotate_yz(theta_y, theta_z);
            t = t1;
            sin0 = sin1;
            cos0 = cos1;
        }
        let s = state.bloch();
        let (sy, sz) = match drive.frame {
            Frame::Locking => (s.y, s.z),
            Frame::Drive => {
                let (sn, cs) = (rabi * t).sin_cos();
                (cs * s.y - sn * s.z, sn * s.y + cs * s.z)
            }
        };
        rec.sx.push(s.x);
        rec.sy.push(sy);
        rec.sz.push(sz);
    }
    rec.max_abs_phase += noise_peak;
    Ok(rec)
}
