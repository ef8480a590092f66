//! Spin-locking Hamiltonian in the locking frame and its superoperator form.
//!
//! In the frame co-rotating with the locking drive, a phase excursion `φ`
//! produces `H/ħ = (Ω/2) φ [cos(Ωt) σ_y − sin(Ωt) σ_z]`. The density matrix is
//! vectorized row-major as `(ρ₁₁, ρ₁₂, ρ₂₁, ρ₂₂)`, so that
//! `vec(Hρ − ρH) = (H ⊗ 1 − 1 ⊗ Hᵀ) vec(ρ)`.

use nalgebra::{Matrix2, Matrix4, Vector3};
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coefficients `(h_y, h_z)` of `σ_y`, `σ_z` in rad/s (ħ = 1).
pub fn noise_frame_hamiltonian(rabi: f64, phase: f64, t: f64) -> (f64, f64) {
    let (s, c) = (rabi * t).sin_cos();
    let a = 0.5 * rabi * phase;
    (a * c, -a * s)
}

pub fn pauli_x() -> Matrix2<Complex64> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Matrix2<Complex64> {
    Matrix2::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> Matrix2<Complex64> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

/// Matrix multiplying `cos(Ωt)` inside the Liouvillian bracket.
pub(crate) fn cos_block() -> Matrix4<Complex64> {
    Matrix4::new(
        ZERO, -I, -I, ZERO, //
        I, ZERO, ZERO, -I, //
        I, ZERO, ZERO, -I, //
        ZERO, I, I, ZERO,
    )
}

/// Matrix multiplying `sin(Ωt)` inside the Liouvillian bracket.
pub(crate) fn sin_block() -> Matrix4<Complex64> {
    Matrix4::from_diagonal(&nalgebra::Vector4::new(
        ZERO,
        Complex64::new(-2.0, 0.0),
        Complex64::new(2.0, 0.0),
        ZERO,
    ))
}

/// `L(t) = (1/i)(Ω/2) φ [c(t) K_c + s(t) K_s]` acting on the vectorized density matrix.
pub fn liouville_superoperator(rabi: f64, phase: f64, t: f64) -> Matrix4<Complex64> {
    let (s, c) = (rabi * t).sin_cos();
    let prefactor = -I * (0.5 * rabi * phase);
    (cos_block() * Complex64::new(c, 0.0) + sin_block() * Complex64::new(s, 0.0)) * prefactor
}

/// Row-major vectorized 2×2 density matrix `(ρ₁₁, ρ₁₂, ρ₂₁, ρ₂₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorizedDensity(pub [Complex64; 4]);

impl VectorizedDensity {
    /// `ρ = (1 + s·σ)/2`.
    pub fn from_bloch(s: Vector3<f64>) -> Self {
        Self([
            Complex64::new(0.5 * (1.0 + s.z), 0.0),
            Complex64::new(0.5 * s.x, -0.5 * s.y),
            Complex64::new(0.5 * s.x, 0.5 * s.y),
            Complex64::new(0.5 * (1.0 - s.z), 0.0),
        ])
    }

    pub fn from_matrix(rho: &Matrix2<Complex64>) -> Self {
        Self([rho[(0, 0)], rho[(0, 1)], rho[(1, 0)], rho[(1, 1)]])
    }

    pub fn to_matrix(&self) -> Matrix2<Complex64> {
        Matrix2::new(self.0[0], self.0[1], self.0[2], self.0[3])
    }

    pub fn as_vector(&self) -> nalgebra::Vector4<Complex64> {
        nalgebra::Vector4::from_column_slice(&self.0)
    }

    pub fn from_vector(v: &nalgebra::Vector4<Complex64>) -> Self {
        Self([v[0], v[1], v[2], v[3]])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0] + self.0[3]
    }

    /// `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)`.
    pub fn bloch(&self) -> Vector3<f64> {
        let [r11, r12, r21, r22] = self.0;
        Vector3::new((r12 + r21).re, (I * (r12 - r21)).re, (r11 - r22).re)
    }

    /// Hermiticity, unit trace and populations in `[0, 1]`, within `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        let [r11, r12, r21, r22] = self.0;
        (r11.re + r22.re - 1.0).abs() <= tol
            && r11.im.abs() <= tol
            && r22.im.abs() <= tol
            && (r21 - r12.conj()).norm() <= tol
            && (-tol..=1.0 + tol).contains(&r11.re)
            && (-tol..=1.0 + tol).contains(&r22.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(
            noise_frame_hamiltonian(2.0 * PI * 1e3, 0.0, 1e-4),
            (0.0, -0.0)
        );
        let (w, p) = (2.0 * PI * 1e3, 0.01);
        assert_eq!(noise_frame_hamiltonian(w, p, 0.0), (0.5 * w * p, -0.0));
        let (hy, hz) = noise_frame_hamiltonian(w, p, 0.5 * PI / w);
        assert!(hy.abs() < 1e-12);
        assert!((hz + 0.5 * w * p).abs() < 1e-12);
    }

    #[test]
    fn zero_phase_zero_liouvillian() {
        assert_eq!(liouville_superoperator(1e4, 0.0, 0.3), Matrix4::zeros());
    }

    #[test]
    fn sin_entry_at_quarter_period() {
        let (w, p) = (2.0 * PI * 500.0, 0.02);
        let l = liouville_superoperator(w, p, 0.5 * PI / w);
        // (1/i)(Ωφ/2)(−2 sin Ωt) with sin = 1.
        let expect = Complex64::new(0.0, w * p);
        assert!((l[(1, 1)] - expect).norm() < 1e-9);
        assert!((l[(2, 2)] + expect).norm() < 1e-9);
        assert!(l[(0, 1)].norm() < 1e-9);
    }

    #[test]
    fn bloch_round_trip() {
        let s = Vector3::new(0.3, -0.4, 0.5);
        let v = VectorizedDensity::from_bloch(s);
        assert!((v.bloch() - s).norm() < 1e-15);
        assert!(v.is_physical(1e-12));
        let rho = v.to_matrix();
        let sx = (rho * pauli_x()).trace().re;
        let sy = (rho * pauli_y()).trace().re;
        let sz = (rho * pauli_z()).trace().re;
        assert!((Vector3::new(sx, sy, sz) - s).norm() < 1e-15);
    }
}
