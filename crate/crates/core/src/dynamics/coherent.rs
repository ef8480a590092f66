//! Closed forms for a resonant coherent tone, alone and with white noise.
//!
//! Valid in the rotating-wave limit `β ≪ 1`; the counter-rotating part of the
//! full Hamiltonian adds wobbles of order β at 2Ω that these forms omit.

use super::propagate::{BlochRecord, STRONG_PHASE};

/// Bloch components in the drive frame under `φ = β cos(Ωt + δ)`:
/// `sx = cos Ω₁t`, `sy = sin Ω₁t sin(Ωt + δ)`, `sz = −sin Ω₁t cos(Ωt + δ)`,
/// with `Ω₁ = βΩ/2`.
pub fn coherent_evolution(rabi: f64, beta: f64, delta: f64, t_grid: &[f64]) -> BlochRecord {
    let w1 = 0.5 * beta * rabi;
    let n = t_grid.len();
    let mut rec = BlochRecord {
        times: t_grid.to_vec(),
        sx: Vec::with_capacity(n),
        sy: Vec::with_capacity(n),
        sz: Vec::with_capacity(n),
        stderr: None,
        max_abs_phase: beta,
        n_traj: 1,
    };
    for &t in t_grid {
        let (s1, c1) = (w1 * t).sin_cos();
        let (s, c) = (rabi * t + delta).sin_cos();
        rec.sx.push(c1);
        rec.sy.push(s1 * s);
        rec.sz.push(-s1 * c);
    }
    rec
}

/// True when the closed forms are outside their rotating-wave validity.
pub fn coherent_validity_warning(beta: f64) -> bool {
    beta > STRONG_PHASE
}

/// `cos(βΩt/2)·exp(−½Ω²S t)`.
pub fn combined_sigma_x(rabi: f64, beta: f64, s_at_rabi: f64, t: f64) -> f64 {
    (0.5 * beta * rabi * t).cos() * (-0.5 * rabi * rabi * s_at_rabi * t).exp()
}

/// `⟨σx⟩` from the secular Bloch equations with a resonant tone and noise
/// at Ω: the tone rotates x into the y-z plane at `Ω₁ = βΩ/2` while noise
/// relaxes x at `r = ½Ω²S` and the transverse component at `r/2`, giving
/// `e^{−3rt/4}[cos ω't − (r/4ω') sin ω't]` with `ω' = √(Ω₁² − r²/16)`.
/// Neglects the noise-induced shift about x, which vanishes for spectra
/// symmetric about Ω.
pub fn secular_sigma_x(rabi: f64, beta: f64, s_at_rabi: f64, t: f64) -> f64 {
    let w1 = 0.5 * beta * rabi;
    let r = 0.5 * rabi * rabi * s_at_rabi;
    let d = w1 * w1 - r * r / 16.0;
    let env = (-0.75 * r * t).exp();
    if d > 0.0 {
        let wp = d.sqrt();
        env * ((wp * t).cos() - r / (4.0 * wp) * (wp * t).sin())
    } else if d < 0.0 {
        let k = (-d).sqrt();
        env * ((k * t).cosh() - r / (4.0 * k) * (k * t).sinh())
    } else {
        env * (1.0 - 0.25 * r * t)
    }
}
