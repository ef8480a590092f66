#![allow(dead_code)]

use num_complex::Complex64;

/// `exp(iη(a + a†))|n⟩` on the Fock window `[n−w, n+w]` by scaled Taylor steps.
pub fn displaced_fock(eta: f64, n: usize, w: usize) -> (usize, Vec<Complex64>) {
    let lo = n.saturating_sub(w);
    let dim = n + w - lo + 1;
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    v[n - lo] = Complex64::new(1.0, 0.0);
    let norm_x = 2.0 * ((n + w + 1) as f64).sqrt();
    let steps = ((eta * norm_x) / 0.25).ceil().max(1.0) as usize;
    let h = Complex64::new(0.0, eta / steps as f64);
    let apply_x = |u: &[Complex64]| -> Vec<Complex64> {
        (0..dim)
            .map(|j| {
                let k = (lo + j) as f64;
                let mut r = Complex64::new(0.0, 0.0);
                if j > 0 {
                    r += u[j - 1] * k.sqrt();
                }
                if j + 1 < dim {
                    r += u[j + 1] * (k + 1.0).sqrt();
                }
                r
            })
            .collect()
    };
    for _ in 0..steps {
        let mut term = v.clone();
        let mut acc = v.clone();
        for m in 1..40 {
            term = apply_x(&term)
                .into_iter()
                .map(|z| z * h / m as f64)
                .collect();
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            if term.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-20 {
                break;
            }
        }
        v = acc;
    }
    (lo, v)
}

pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
