//! Adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn rule<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> ([f64; N], f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    for i in 0..N {
        k[i] = WGK[7] * fc[i];
        g[i] = WG[3] * fc[i];
    }
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        for i in 0..N {
            let s = f1[i] + f2[i];
            k[i] += WGK[j] * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut err = 0.0_f64;
    for i in 0..N {
        k[i] *= h;
        err = err.max((k[i] - g[i] * h).abs());
    }
    (k, err)
}

/// Integral of `f` over `[a, b]` with absolute error below
/// `max(abs_tol, rel_tol·max_i |I_i|)`. Returns the value and the error estimate.
pub fn integrate<const N: usize, F: FnMut(f64) -> [f64; N]>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<([f64; N], f64)> {
    const MAX_DEPTH: u32 = 30;
    const MAX_INTERVALS: usize = 4000;
    let mut total = [0.0; N];
    let mut total_err = 0.0;
    let (whole, whole_err) = rule(&mut f, a, b);
    let scale = whole.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = abs_tol.max(rel_tol * scale);
    let mut stack = vec![(a, b, whole, whole_err, 0u32)];
    let mut accepted = 0usize;
    while let Some((lo, hi, val, err, depth)) = stack.pop() {
        let width_share = (hi - lo) / (b - a);
        if err <= tol * width_share || err < 1e-15 * val.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        {
            for i in 0..N {
                total[i] += val[i];
            }
            total_err += err;
            accepted += 1;
            continue;
        }
        if depth >= MAX_DEPTH || accepted + stack.len() > MAX_INTERVALS {
            return Err(Error::Quadrature(format!(
                "[{lo:.6e}, {hi:.6e}] still has error {err:.3e} (tolerance {:.3e}) after {depth} bisections",
                tol * width_share
            )));
        }
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = rule(&mut f, lo, mid);
        let (v2, e2) = rule(&mut f, mid, hi);
        stack.push((lo, mid, v1, e1, depth + 1));
        stack.push((mid, hi, v2, e2, depth + 1));
    }
    Ok((total, total_err))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let (v, _) = integrate(|x| [x.powi(5) - 2.0 * x, 1.0], 0.0, 2.0, 0.0, 1e-14).unwrap();
        assert!((v[0] - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
        assert!((v[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn oscillatory_and_peaked() {
        let (v, _) = integrate(|x| [(50.0 * x).cos()], 0.0, 3.0, 1e-13, 1e-12).unwrap();
        assert!((v[0] - (150.0_f64).sin() / 50.0).abs() < 1e-11);
        let w = 1e-3;
        let (v, _) = integrate(|x| [w / (x * x + w * w)], -1.0, 1.0, 0.0, 1e-10).unwrap();
        assert!((v[0] - 2.0 * (1.0 / w).atan()).abs() < 1e-8);
    }

    #[test]
    fn singular_integrand_reports() {
        let r = integrate(|x: f64| [1.0 / x], 0.0, 1.0, 0.0, 1e-10);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }
}
