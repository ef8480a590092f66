//! Second-cumulant (Gaussian) average of the noisy Liouvillian.
//!
//! With `L(t) = −i(Ω/2)φ(t)[c(t)K_c + s(t)K_s]` the ensemble-averaged
//! propagator is `Φ(t) ≈ exp(E)`, where
//! `E = ∫₀ᵗdt₁∫₀^{t₁}dt₂ ⟨L(t₁)L(t₂)⟩ = −(Ω²/4) Σ_{ab} J_ab K_a K_b`
//! and `J_ab = ∫∫ C(t₁−t₂) a(t₁) b(t₂)`. Substituting `u = t₁ − t₂` and
//! `C(u) = (1/π)∫₀^∞ S(ω) cos ωu dω` turns each `J_ab` into a single
//! frequency integral against an elementary kernel.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector3};
use num_complex::Complex64;

use super::hamiltonian::{cos_block, sin_block, VectorizedDensity};
use crate::error::{Error, Result};
use crate::noise::PsdModel;
use crate::quad::integrate;

/// Generator of the long-time decay: `Φ = exp(−χ₂ M)`.
pub fn decay_generator() -> Matrix4<f64> {
    Matrix4::new(
        1.0, 0.0, 0.0, -1.0, //
        0.0, 3.0, 1.0, 0.0, //
        0.0, 1.0, 3.0, 0.0, //
        -1.0, 0.0, 0.0, 1.0,
    )
}

/// Long-time decay operator and its exponent `χ₂ = Ω² S t / 8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayOperator {
    pub phi: Matrix4<f64>,
    pub chi2: f64,
}

impl DecayOperator {
    pub fn apply(&self, rho: &VectorizedDensity) -> VectorizedDensity {
        let v = self.phi.map(|x| Complex64::new(x, 0.0)) * rho.as_vector();
        VectorizedDensity::from_vector(&v)
    }

    pub fn apply_bloch(&self, s: Vector3<f64>) -> Vector3<f64> {
        self.apply(&VectorizedDensity::from_bloch(s)).bloch()
    }
}

/// `exp(−χ₂ M)` in closed form, `χ₂ = Ω² S(Ω) t / 8`.
pub fn analytic_decay_operator(rabi: f64, s_at_rabi: f64, t: f64) -> Result<DecayOperator> {
    if !(s_at_rabi >= 0.0 && t >= 0.0) || !(s_at_rabi.is_finite() && t.is_finite()) {
        return Err(Error::input(
            "analytic decay operator needs S ≥ 0 and t ≥ 0",
        ));
    }
    let chi2 = rabi * rabi * s_at_rabi * t / 8.0;
    let e2 = (-2.0 * chi2).exp();
    let e4 = (-4.0 * chi2).exp();
    let (p, m) = (0.5 * (1.0 + e2), 0.5 * (1.0 - e2));
    let (q, r) = (0.5 * (e2 + e4), 0.5 * (e4 - e2));
    let phi = Matrix4::new(
        p, 0.0, 0.0, m, //
        0.0, q, r, 0.0, //
        0.0, r, q, 0.0, //
        m, 0.0, 0.0, p,
    );
    Ok(DecayOperator { phi, chi2 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantOptions {
    /// Integrate `S` only over `[lo, hi]` (rad/s) and treat it as zero
    /// outside; matches a sampled trajectory's representable band.
    pub band: Option<(f64, f64)>,
    /// Upper cutoff as a multiple of Ω when no band is set; the tail above
    /// it is added analytically.
    pub cutoff_factor: f64,
    pub rel_tol: f64,
}

impl Default for CumulantOptions {
    fn default() -> Self {
        Self {
            band: None,
            cutoff_factor: 100.0,
            rel_tol: 1e-8,
        }
    }
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `∫₀ᵗ (t−u) cos(au) du`.
#[inline]
fn ramp_cos(a: f64, t: f64) -> f64 {
    let s = sinc(0.5 * a * t);
    0.5 * t * t * s * s
}

/// `∫₀ᵗ (t−u) sin(au) du`, odd in `a`.
#[inline]
fn ramp_sin(a: f64, t: f64) -> f64 {
    let x = a * t;
    if x.abs() < 1e-3 {
        a * t.powi(3) / 6.0 * (1.0 - x * x / 20.0)
    } else {
        (x - x.sin()) / (a * a)
    }
}

/// The four frequency kernels `(k_p, k_u, k_v, k_q)` at `ω`.
fn kernels(rabi: f64, t: f64, w: f64) -> [f64; 4] {
    let (dm, dp) = (rabi - w, rabi + w);
    let (hm, hp) = (0.5 * dm * t, 0.5 * dp * t);
    let (sm, sp) = (t * sinc(hm), t * sinc(hp));
    let a = 2.0 * rabi * t;
    let kp = 0.5 * (ramp_cos(w - rabi, t) + ramp_cos(w + rabi, t));
    let kq = 0.5 * (ramp_sin(dp, t) + ramp_sin(dm, t));
    let inv = 1.0 / (4.0 * rabi);
    let ku = inv * ((a - hm).sin() * sm + (a - hp).sin() * sp - hp.sin() * sp - hm.sin() * sm);
    let kv = inv * (hm.cos() * sm + hp.cos() * sp - (a - hm).cos() * sm - (a - hp).cos() * sp);
    [kp, ku, kv, kq]
}

/// `E(t)` for the spectrum `model`, as a complex 4×4 matrix such that
/// `Φ(t) ≈ exp(E)`.
pub fn second_cumulant_integral(
    rabi: f64,
    model: &PsdModel,
    t: f64,
    opts: &CumulantOptions,
) -> Result<Matrix4<Complex64>> {
    if !(rabi > 0.0 && rabi.is_finite()) {
        return Err(Error::input("Rabi frequency must be > 0"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::input("cumulant time must be > 0"));
    }
    model.validate()?;
    if model.is_zero() {
        return Ok(Matrix4::zeros());
    }
    let [sp, u, v, sq] = spectral_moments(rabi, model, t, opts)?;
    let j_cc = 0.5 * (sp + u);
    let j_ss = 0.5 * (sp - u);
    let j_cs = 0.5 * (v - sq);
    let j_sc = 0.5 * (v + sq);
    let (kc, ks) = (cos_block(), sin_block());
    let c = |x: f64| Complex64::new(x, 0.0);
    let sum = kc * kc * c(j_cc) + kc * ks * c(j_cs) + ks * kc * c(j_sc) + ks * ks * c(j_ss);
    Ok(sum * c(-0.25 * rabi * rabi))
}

/// `exp(E)` applied to a Bloch vector.
pub fn cumulant_bloch(exponent: &Matrix4<Complex64>, s: Vector3<f64>) -> Vector3<f64> {
    let v = exponent.exp() * VectorizedDensity::from_bloch(s).as_vector();
    VectorizedDensity::from_vector(&v).bloch()
}

/// `(1/π)∫ S(ω) k(ω) dω` for the four kernels.
fn spectral_moments(
    rabi: f64,
    model: &PsdModel,
    t: f64,
    opts: &CumulantOptions,
) -> Result<[f64; 4]> {
    let (lo, hi) = match opts.band {
        Some((lo, hi)) if lo >= 0.0 && hi > lo => (lo, hi),
        Some(_) => return Err(Error::input("cumulant band must satisfy 0 ≤ lo < hi")),
        None => (0.0, opts.cutoff_factor * rabi),
    };
    // Evaluation errors (e.g. a singular power law at ω = 0) surface here.
    model.evaluate(lo.max(1e-300))?;
    let mut eval_err = None;
    let mut f = |w: f64| {
        let s = match model.evaluate(w) {
            Ok(s) => s,
            Err(e) => {
                eval_err.get_or_insert(e);
                0.0
            }
        };
        let k = kernels(rabi, t, w);
        [s * k[0], s * k[1], s * k[2], s * k[3]]
    };

    let mut breaks = vec![lo, hi, rabi];
    for (c, width) in model.features() {
        for m in [0.0, 0.5, 2.0, 8.0, 32.0] {
            breaks.push(c - m * width);
            breaks.push(c + m * width);
        }
    }
    let panel = (8.0 * PI / t).min(0.25 * rabi);
    breaks.retain(|&b| b >= lo && b <= hi && b.is_finite());
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * hi);

    let n_panels: f64 = breaks
        .windows(2)
        .map(|p| ((p[1] - p[0]) / panel).ceil())
        .sum();
    if n_panels > 5e6 {
        return Err(Error::Quadrature(format!(
            "{n_panels:.0} panels needed to resolve Ωt = {:.3e}; reduce t or the band",
            rabi * t
        )));
    }

    // Rough scale for the absolute tolerance: kernel peak t²/4 times S(Ω)/π.
    let s_ref = model.evaluate(rabi)?.max(1e-300);
    let abs_tol = opts.rel_tol * s_ref * t / PI * 1e-3;
    let mut acc = [0.0; 4];
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let n = ((b - a) / panel).ceil().max(1.0) as usize;
        let h = (b - a) / n as f64;
        for i in 0..n {
            let x0 = a + i as f64 * h;
            let x1 = if i + 1 == n { b } else { x0 + h };
            let (v, _) = integrate(&mut f, x0, x1, abs_tol / n_panels.max(1.0), opts.rel_tol)
                .map_err(|e| match e {
                    Error::Quadrature(msg) => Error::Quadrature(format!(
                        "spectral integral for Ω = {rabi:.6e}, t = {t:.6e}: {msg}"
                    )),
                    other => other,
                })?;
            for k in 0..4 {
                acc[k] += v[k];
            }
        }
    }
    if let Some(e) = eval_err {
        return Err(e);
    }
    for a in acc.iter_mut() {
        *a /= PI;
    }

    if opts.band.is_none() {
        // Tail above the cutoff, S ~ S(W)(ω/W)^k and k_p ~ 1/ω² on average.
        let s_w = model.evaluate(hi)?;
        let s_2w = model.evaluate(2.0 * hi)?;
        if s_w > 0.0 {
            let k = (s_2w / s_w).log2();
            if k >= 1.0 {
                return Err(Error::Quadrature(format!(
                    "spectrum grows as ω^{k:.2} above {hi:.3e} rad/s; the cumulant integral diverges"
                )));
            }
            let tail = s_w / (PI * hi * (1.0 - k));
            if tail > 1e-2 * acc[0].abs() {
                return Err(Error::Quadrature(format!(
                    "tail above {hi:.3e} rad/s is {:.1}% of the integral; raise the cutoff",
                    100.0 * tail / acc[0].abs()
                )));
            }
            acc[0] += tail;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::hamiltonian::liouville_superoperator;
    use crate::noise::{ParametricPsd, Peak};

    #[test]
    fn generator_spectrum_and_closed_form() {
        let m = decay_generator();
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in ev.iter().zip([0.0, 2.0, 2.0, 4.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let (w, s, t) = (2.0 * PI * 1000.0, 2e-9, 0.01);
        let op = analytic_decay_operator(w, s, t).unwrap();
        let direct = (m * -op.chi2).exp();
        assert!((direct - op.phi).amax() < 1e-12);
        // K_c² + K_s² = 2M.
        let kk = cos_block() * cos_block() + sin_block() * sin_block();
        assert!((kk.map(|z| z.re) - m * 2.0).amax() < 1e-15);
        assert!(kk.map(|z| z.im).amax() < 1e-15);
    }

    #[test]
    fn decay_operator_examples() {
        let id = analytic_decay_operator(1e4, 1e-8, 0.0).unwrap();
        assert_eq!(id.phi, Matrix4::identity());
        let (w, s, t) = (2.0 * PI * 500.0, 4e-9, 0.05);
        let op = analytic_decay_operator(w, s, t).unwrap();
        let sx = op.apply_bloch(Vector3::x()).x;
        assert!((sx - (-0.5 * w * w * s * t).exp()).abs() < 1e-14);
        // Population left in the initial basis state is (1 + e^{-2χ₂})/2.
        let down = op.apply(&VectorizedDensity::from_bloch(-Vector3::z()));
        assert!((down.0[3].re - 0.5 * (1.0 + (-2.0 * op.chi2).exp())).abs() < 1e-14);
        assert!(down.is_physical(1e-12));
        // Trace preservation on an arbitrary state.
        let r = op.apply(&VectorizedDensity::from_bloch(Vector3::new(0.2, -0.3, 0.6)));
        assert!((r.trace().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn kernels_match_time_domain() {
        // k_p(ω) = ∫₀ᵗ (t−u) cos ωu cos Ωu du, etc., by brute-force midpoint sums.
        let (rabi, t, w) = (7.0, 1.3, 4.1);
        let n = 200_000;
        let h = t / n as f64;
        let mut brute = [0.0; 4];
        for i in 0..n {
            let u = (i as f64 + 0.5) * h;
            let c = (w * u).cos();
            let p = ((2.0 * rabi * t - rabi * u).sin() - (rabi * u).sin()) / (2.0 * rabi);
            let q = ((rabi * u).cos() - (2.0 * rabi * t - rabi * u).cos()) / (2.0 * rabi);
            brute[0] += h * c * (t - u) * (rabi * u).cos();
            brute[1] += h * c * p;
            brute[2] += h * c * q;
            brute[3] += h * c * (t - u) * (rabi * u).sin();
        }
        let k = kernels(rabi, t, w);
        for i in 0..4 {
            assert!(
                (k[i] - brute[i]).abs() < 1e-8,
                "kernel {i}: {} vs {}",
                k[i],
                brute[i]
            );
        }
    }

    #[test]
    fn zero_spectrum_zero_exponent() {
        let e =
            second_cumulant_integral(1e4, &PsdModel::zero(), 0.01, &Default::default()).unwrap();
        assert_eq!(e, Matrix4::zeros());
    }

    #[test]
    fn white_noise_long_time_limit() {
        let (w, s) = (2.0 * PI * 1000.0, 1e-9);
        for &wt in &[100.0, 1000.0] {
            let t = wt / w;
            let e =
                second_cumulant_integral(w, &PsdModel::white(s), t, &Default::default()).unwrap();
            let chi2 = w * w * s * t / 8.0;
            let target = decay_generator() * -chi2;
            let rel = (e.map(|z| z.re) - target).amax() / target.amax();
            assert!(rel < 0.02, "Ωt = {wt}: relative deviation {rel}");
            assert!((e[(0, 0)].re / t + w * w * s / 8.0).abs() < 0.02 * w * w * s / 8.0);
        }
    }

    #[test]
    fn white_noise_finite_time_closed_form() {
        // J_cc = (S/2)(t/2 + sin 2Ωt / 4Ω) exactly for white noise.
        let (w, s, t) = (50.0, 1e-3, 0.77);
        let opts = CumulantOptions {
            cutoff_factor: 4000.0,
            ..Default::default()
        };
        let e = second_cumulant_integral(w, &PsdModel::white(s), t, &opts).unwrap();
        let j_cc = 0.5 * s * (0.5 * t + (2.0 * w * t).sin() / (4.0 * w));
        // E₁₁ = −(Ω²/4)·2·J_cc since (K_c²)₁₁ = 2 and the other blocks vanish there.
        assert!((e[(0, 0)].re + 0.5 * w * w * j_cc).abs() < 1e-4 * 0.5 * w * w * j_cc);
    }

    #[test]
    fn far_peak_is_filtered() {
        let w = 2.0 * PI * 1000.0;
        let t = 200.0 / w;
        let flat =
            second_cumulant_integral(w, &PsdModel::white(1e-9), t, &Default::default()).unwrap();
        let peak = PsdModel::Parametric(ParametricPsd {
            peaks: vec![Peak {
                center: 3.0 * w,
                height: 1e-9,
                width: 0.01 * w,
            }],
            ..Default::default()
        });
        let e = second_cumulant_integral(w, &peak, t, &Default::default()).unwrap();
        assert!(e.norm() < 1e-3 * flat.norm());
    }

    #[test]
    fn growing_spectrum_is_reported() {
        let m = PsdModel::Parametric(ParametricPsd {
            background: Some(crate::noise::PowerLaw {
                amplitude: 1e-9,
                exponent: 1.5,
                reference: 1.0,
                band: None,
            }),
            ..Default::default()
        });
        let r = second_cumulant_integral(100.0, &m, 2.0, &Default::default());
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }

    #[test]
    fn liouvillian_matches_commutator() {
        use crate::dynamics::hamiltonian::{pauli_y, pauli_z};
        let (w, p, t) = (3.7e3, 0.021, 1.9e-4);
        let (hy, hz) = crate::dynamics::noise_frame_hamiltonian(w, p, t);
        let h = pauli_y() * Complex64::new(hy, 0.0) + pauli_z() * Complex64::new(hz, 0.0);
        let rho = VectorizedDensity::from_bloch(Vector3::new(0.3, 0.5, -0.4));
        let m = rho.to_matrix();
        let direct = (h * m - m * h) * Complex64::new(0.0, -1.0);
        let via = liouville_superoperator(w, p, t) * rho.as_vector();
        let v = VectorizedDensity::from_vector(&via).to_matrix();
        assert!((v - direct).norm() < 1e-12 * w);
    }
}
