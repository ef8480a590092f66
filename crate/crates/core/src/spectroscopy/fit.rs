//! Weighted least-squares fits of locking decays.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{storage::Owned, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model value and parameter gradient at one time.
type Model<'a> = dyn Fn(&[f64], f64, &mut [f64]) -> f64 + 'a;

struct Problem<'a> {
    t: &'a [f64],
    y: &'a [f64],
    inv_err: Vec<f64>,
    p: DVector<f64>,
    model: &'a Model<'a>,
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.p.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.p.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let mut g = vec![0.0; self.p.len()];
        let r = DVector::from_iterator(
            self.t.len(),
            (0..self.t.len()).map(|i| {
                ((self.model)(self.p.as_slice(), self.t[i], &mut g) - self.y[i]) * self.inv_err[i]
            }),
        );
        r.iter().all(|v| v.is_finite()).then_some(r)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let n = self.p.len();
        let mut j = DMatrix::zeros(self.t.len(), n);
        let mut g = vec![0.0; n];
        for i in 0..self.t.len() {
            (self.model)(self.p.as_slice(), self.t[i], &mut g);
            for k in 0..n {
                j[(i, k)] = g[k] * self.inv_err[i];
            }
        }
        j.iter().all(|v| v.is_finite()).then_some(j)
    }
}

struct Solution {
    params: Vec<f64>,
    errors: Vec<f64>,
    chi2: f64,
}

fn solve(t: &[f64], y: &[f64], err: &[f64], model: &Model<'_>, start: &[f64]) -> Result<Solution> {
    let problem = Problem {
        t,
        y,
        inv_err: err.iter().map(|e| 1.0 / e).collect(),
        p: DVector::from_column_slice(start),
        model,
    };
    let (problem, report) = LevenbergMarquardt::new()
        .with_patience(400)
        .minimize(problem);
    if !report.termination.was_successful() {
        return Err(Error::Fit(format!(
            "least squares did not converge: {:?}",
            report.termination
        )));
    }
    let r = problem
        .residuals()
        .ok_or_else(|| Error::Fit("non-finite residuals".into()))?;
    let j = problem
        .jacobian()
        .ok_or_else(|| Error::Fit("non-finite Jacobian".into()))?;
    let n = start.len();
    let jtj = j.transpose() * &j;
    let errors = match jtj.clone().try_inverse() {
        Some(cov) => (0..n).map(|k| cov[(k, k)].max(0.0).sqrt()).collect(),
        // Parameter the data do not constrain (e.g. β at exactly zero).
        None => vec![f64::INFINITY; n],
    };
    Ok(Solution {
        params: problem.p.iter().copied().collect(),
        errors,
        chi2: r.norm_squared(),
    })
}

fn check_data(t: &[f64], y: &[f64], err: &[f64], min_points: usize) -> Result<()> {
    if t.len() != y.len() || t.len() != err.len() {
        return Err(Error::input("t, y and error arrays must have equal length"));
    }
    if t.len() < min_points {
        return Err(Error::input(format!(
            "fit needs at least {min_points} points (got {})",
            t.len()
        )));
    }
    if err.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::input("all y errors must be finite and > 0"));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::input("t and y must be finite"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayModel {
    Exponential,
    DampedCosine,
}

/// Amplitude `A` of `A·f(t)`: held fixed or fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Amplitude {
    Fixed(f64),
    Free,
}

impl Default for Amplitude {
    fn default() -> Self {
        Amplitude::Fixed(1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub model: DecayModel,
    /// s⁻¹
    pub rate: f64,
    pub rate_err: f64,
    pub amplitude: f64,
    /// Zero when the amplitude was held fixed.
    pub amplitude_err: f64,
    /// Modulation index (damped cosine only), rad.
    pub beta: Option<f64>,
    pub beta_err: Option<f64>,
    /// Largest β deviation among starts ending within Δχ² < 1 of the best.
    pub beta_sensitivity: Option<f64>,
    pub chi2: f64,
    pub dof: usize,
    /// Requested a damped cosine but β was not distinguishable from zero.
    pub fallback: bool,
}

impl DecayFit {
    pub fn reduced_chi2(&self) -> f64 {
        if self.dof == 0 {
            f64::NAN
        } else {
            self.chi2 / self.dof as f64
        }
    }
}

/// Weighted fit of `y = A·e^{−rt}`.
pub fn fit_exponential(
    t: &[f64],
    y: &[f64],
    err: &[f64],
    amplitude: Amplitude,
) -> Result<DecayFit> {
    damped(t, y, err, 1.0, amplitude, Some(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampedCosineOptions {
    pub amplitude: Amplitude,
    /// Hold β at this value instead of fitting it.
    pub fixed_beta: Option<f64>,
    /// Number of β starting points.
    pub starts: usize,
    /// Minimum χ² improvement over the exponential for β to count as resolved.
    pub min_delta_chi2: f64,
}

impl Default for DampedCosineOptions {
    fn default() -> Self {
        Self {
            amplitude: Amplitude::Fixed(1.0),
            fixed_beta: None,
            starts: 24,
            min_delta_chi2: 25.0,
        }
    }
}

/// Weighted fit of `y = A·cos(βΩt/2)·e^{−rt}` with multi-start over β.
///
/// If β is not resolved (below three standard errors, or the χ² gain over
/// a pure exponential is under `min_delta_chi2`) the exponential fit is
/// returned with `fallback = true`.
pub fn fit_damped_cosine(
    t: &[f64],
    y: &[f64],
    err: &[f64],
    rabi: f64,
    opts: &DampedCosineOptions,
) -> Result<DecayFit> {
    if !(rabi > 0.0 && rabi.is_finite()) {
        return Err(Error::input("Rabi frequency must be > 0"));
    }
    if let Some(b) = opts.fixed_beta {
        let mut fit = damped(t, y, err, rabi, opts.amplitude, Some(b))?;
        if b != 0.0 {
            fit.model = DecayModel::DampedCosine;
            fit.beta = Some(b.abs());
            fit.beta_err = Some(0.0);
        }
        return Ok(fit);
    }
    check_data(t, y, err, 6)?;
    let exp_fit = damped(t, y, err, rabi, opts.amplitude, Some(0.0))?;
    let t_max = t.iter().cloned().fold(0.0, f64::max);
    let mut all: Vec<DecayFit> = Vec::new();
    for k in 0..opts.starts.max(1) {
        // Starts spread the number of oscillations over the window from ~0.05 to ~12.
        let cycles = 0.05 * (240.0f64).powf(k as f64 / (opts.starts.max(2) - 1) as f64);
        let beta0 = 4.0 * std::f64::consts::PI * cycles / (rabi * t_max);
        let Ok(fit) = damped_from(t, y, err, rabi, opts.amplitude, beta0, exp_fit.rate) else {
            continue;
        };
        all.push(fit);
    }
    let Some(mut best) = all.iter().min_by(|a, b| a.chi2.total_cmp(&b.chi2)).cloned() else {
        return Err(Error::Fit("no damped-cosine start converged".into()));
    };
    let b0 = best.beta.unwrap_or(0.0);
    best.beta_sensitivity = Some(
        all.iter()
            .filter(|f| f.chi2 < best.chi2 + 1.0)
            .map(|f| (f.beta.unwrap_or(0.0) - b0).abs())
            .fold(0.0, f64::max),
    );
    let beta = best.beta.unwrap_or(0.0);
    let beta_err = best.beta_err.unwrap_or(f64::INFINITY);
    let resolved = beta > 3.0 * beta_err && exp_fit.chi2 - best.chi2 >= opts.min_delta_chi2;
    if resolved {
        Ok(best)
    } else {
        Ok(DecayFit {
            fallback: true,
            ..exp_fit
        })
    }
}

fn damped_from(
    t: &[f64],
    y: &[f64],
    err: &[f64],
    rabi: f64,
    amplitude: Amplitude,
    beta0: f64,
    rate0: f64,
) -> Result<DecayFit> {
    let h = 0.5 * rabi;
    let (model, start): (Box<Model<'_>>, Vec<f64>) = match amplitude {
        Amplitude::Fixed(a) => (
            Box::new(move |p: &[f64], t: f64, g: &mut [f64]| {
                let (e, (s, c)) = ((-p[0] * t).exp(), (h * p[1] * t).sin_cos());
                g[0] = -t * a * c * e;
                g[1] = -h * t * a * s * e;
                a * c * e
            }),
            vec![rate0, beta0],
        ),
        Amplitude::Free => (
            Box::new(move |p: &[f64], t: f64, g: &mut [f64]| {
                let (e, (s, c)) = ((-p[1] * t).exp(), (h * p[2] * t).sin_cos());
                g[0] = c * e;
                g[1] = -t * p[0] * c * e;
                g[2] = -h * t * p[0] * s * e;
                p[0] * c * e
            }),
            vec![y[0].abs().max(0.1), rate0, beta0],
        ),
    };
    let sol = solve(t, y, err, model.as_ref(), &start)?;
    let (ia, ir, ib) = match amplitude {
        Amplitude::Fixed(_) => (None, 0, 1),
        Amplitude::Free => (Some(0), 1, 2),
    };
    Ok(DecayFit {
        model: DecayModel::DampedCosine,
        rate: sol.params[ir].max(0.0),
        rate_err: sol.errors[ir],
        amplitude: ia.map_or_else(|| fixed(amplitude), |i| sol.params[i]),
        amplitude_err: ia.map_or(0.0, |i| sol.errors[i]),
        // cos is even in β; report the magnitude.
        beta: Some(sol.params[ib].abs()),
        beta_err: Some(sol.errors[ib]),
        beta_sensitivity: None,
        chi2: sol.chi2,
        dof: t.len().saturating_sub(start.len()),
        fallback: false,
    })
}

fn fixed(a: Amplitude) -> f64 {
    match a {
        Amplitude::Fixed(v) => v,
        Amplitude::Free => f64::NAN,
    }
}

/// Exponential fit, or damped cosine with β held fixed.
fn damped(
    t: &[f64],
    y: &[f64],
    err: &[f64],
    rabi: f64,
    amplitude: Amplitude,
    beta: Option<f64>,
) -> Result<DecayFit> {
    check_data(t, y, err, 3)?;
    let w = 0.5 * rabi * beta.unwrap_or(0.0);
    // Start the rate from a log-linear estimate on the positive points.
    let rate0 = {
        let pts: Vec<(f64, f64)> = t
            .iter()
            .zip(y)
            .filter(|(_, &v)| v > 0.05)
            .map(|(&t, &v)| (t, v.ln()))
            .collect();
        let n = pts.len() as f64;
        if pts.len() >= 2 {
            let (st, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
            let (mt, my) = (st / n, sy / n);
            let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| {
                (a.0 + (p.0 - mt) * (p.1 - my), a.1 + (p.0 - mt).powi(2))
            });
            if den > 0.0 {
                (-num / den).max(0.0)
            } else {
                0.0
            }
        } else {
            1.0 / t.iter().cloned().fold(0.0, f64::max).max(1e-300)
        }
    };
    let (model, start): (Box<Model<'_>>, Vec<f64>) = match amplitude {
        Amplitude::Fixed(a) => (
            Box::new(move |p: &[f64], t: f64, g: &mut [f64]| {
                let v = a * (w * t).cos() * (-p[0] * t).exp();
                g[0] = -t * v;
                v
            }),
            vec![rate0],
        ),
        Amplitude::Free => (
            Box::new(move |p: &[f64], t: f64, g: &mut [f64]| {
                let f = (w * t).cos() * (-p[1] * t).exp();
                g[0] = f;
                g[1] = -t * p[0] * f;
                p[0] * f
            }),
            vec![y[0].abs().max(0.1), rate0],
        ),
    };
    let sol = solve(t, y, err, model.as_ref(), &start)?;
    let (ia, ir) = match amplitude {
        Amplitude::Fixed(_) => (None, 0),
        Amplitude::Free => (Some(0), 1),
    };
    Ok(DecayFit {
        model: DecayModel::Exponential,
        rate: sol.params[ir].max(0.0),
        rate_err: sol.errors[ir],
        amplitude: ia.map_or_else(|| fixed(amplitude), |i| sol.params[i]),
        amplitude_err: ia.map_or(0.0, |i| sol.errors[i]),
        beta: None,
        beta_err: None,
        beta_sensitivity: None,
        chi2: sol.chi2,
        dof: t.len().saturating_sub(start.len()),
        fallback: false,
    })
}

/// Modulation index and phase offset of a resonant tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseFit {
    pub beta: f64,
    pub beta_err: f64,
    /// Wrapped to `(−π, π]`, rad.
    pub delta: f64,
    pub delta_err: f64,
    pub chi2: f64,
}

/// Joint fit of drive-frame `(sx, sy, sz)` records to the resonant-tone
/// closed forms over `(β, δ)`, all points weighted by `err`.
pub fn fit_coherent_phase(rabi: f64, t: &[f64], bloch: [&[f64]; 3], err: f64) -> Result<PhaseFit> {
    let n = t.len();
    if bloch.iter().any(|c| c.len() != n) || n < 4 {
        return Err(Error::input(
            "need at least four points with all three components",
        ));
    }
    if !(err > 0.0) {
        return Err(Error::input("error must be > 0"));
    }
    // Stack the three components; the model receives the stacked index.
    let idx: Vec<f64> = (0..3 * n).map(|i| i as f64).collect();
    let yy: Vec<f64> = (0..3 * n).map(|i| bloch[i / n][i % n]).collect();
    let ee = vec![err; 3 * n];
    let h = 0.5 * rabi;
    let model = move |p: &[f64], i: f64, g: &mut [f64]| -> f64 {
        let i = i as usize;
        let t = t[i % n];
        let (s1, c1) = (h * p[0] * t).sin_cos();
        let (s, c) = (rabi * t + p[1]).sin_cos();
        match i / n {
            0 => {
                g[0] = -h * t * s1;
                g[1] = 0.0;
                c1
            }
            1 => {
                g[0] = h * t * c1 * s;
                g[1] = s1 * c;
                s1 * s
            }
            _ => {
                g[0] = -h * t * c1 * c;
                g[1] = s1 * s;
                -s1 * c
            }
        }
    };
    // β from the first zero crossing of sx, δ from a coarse scan.
    let t_max = t.iter().cloned().fold(0.0, f64::max);
    let mut best: Option<Solution> = None;
    for kb in 1..=8 {
        let beta0 = kb as f64 * std::f64::consts::PI / (h * t_max) / 2.0;
        for kd in 0..8 {
            let delta0 = -std::f64::consts::PI + kd as f64 * std::f64::consts::PI / 4.0;
            if let Ok(sol) = solve(&idx, &yy, &ee, &model, &[beta0, delta0]) {
                if best.as_ref().is_none_or(|b| sol.chi2 < b.chi2) {
                    best = Some(sol);
                }
            }
        }
    }
    let sol = best.ok_or_else(|| Error::Fit("no phase-fit start converged".into()))?;
    let delta = (sol.params[1] + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
        - std::f64::consts::PI;
    Ok(PhaseFit {
        beta: sol.params[0].abs(),
        beta_err: sol.errors[0],
        delta,
        delta_err: sol.errors[1],
        chi2: sol.chi2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{coherent_evolution, combined_sigma_x};
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| t_max * (i + 1) as f64 / n as f64).collect()
    }

    #[test]
    fn noiseless_exponential_exact() {
        let t = grid(0.05, 20);
        let y: Vec<f64> = t.iter().map(|&t| (-37.0 * t).exp()).collect();
        let e = vec![0.01; 20];
        let f = fit_exponential(&t, &y, &e, Amplitude::Fixed(1.0)).unwrap();
        assert!((f.rate - 37.0).abs() < 1e-9 * 37.0);
        let f = fit_exponential(&t, &y, &e, Amplitude::Free).unwrap();
        assert!((f.rate - 37.0).abs() < 1e-9 * 37.0);
        assert!((f.amplitude - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_exponential_within_three_sigma() {
        let t = grid(0.05, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let y: Vec<f64> = t
            .iter()
            .map(|&t| (-40.0 * t).exp() + noise.sample(&mut rng))
            .collect();
        let f = fit_exponential(&t, &y, &[0.01; 20], Amplitude::Fixed(1.0)).unwrap();
        assert!(
            (f.rate - 40.0).abs() < 3.0 * f.rate_err,
            "{} ± {}",
            f.rate,
            f.rate_err
        );
    }

    #[test]
    fn constant_gives_zero_rate() {
        let t = grid(0.01, 10);
        let f = fit_exponential(&t, &[1.0; 10], &[0.02; 10], Amplitude::Fixed(1.0)).unwrap();
        assert!(f.rate.abs() < 1e-12);
        assert!(f.rate_err > 0.0 && f.rate_err.is_finite());
    }

    #[test]
    fn bad_inputs() {
        assert!(fit_exponential(&[0.0, 1.0], &[1.0, 0.5], &[0.1, 0.1], Amplitude::Free).is_err());
        assert!(fit_exponential(
            &[0.0, 1.0, 2.0],
            &[1.0, 0.5, 0.2],
            &[0.1, 0.0, 0.1],
            Amplitude::Free
        )
        .is_err());
    }

    #[test]
    fn damped_cosine_round_trip() {
        let w = 2.0 * std::f64::consts::PI * 1000.0;
        let t = grid(0.1, 60);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let y: Vec<f64> = t
            .iter()
            .map(|&t| combined_sigma_x(w, 0.05, 40.0 / (w * w), t) + noise.sample(&mut rng))
            .collect();
        let f = fit_damped_cosine(&t, &y, &vec![0.02; 60], w, &Default::default()).unwrap();
        assert!(!f.fallback);
        assert!((f.beta.unwrap() / 0.05 - 1.0).abs() < 0.05);
        assert!((f.rate / 20.0 - 1.0).abs() < 0.1);
    }

    #[test]
    fn zero_beta_falls_back() {
        let w = 2.0 * std::f64::consts::PI * 1000.0;
        let t = grid(0.1, 30);
        let y: Vec<f64> = t.iter().map(|&t| (-20.0 * t).exp()).collect();
        let e = vec![0.02; 30];
        let f = fit_damped_cosine(&t, &y, &e, w, &Default::default()).unwrap();
        let g = fit_exponential(&t, &y, &e, Amplitude::Fixed(1.0)).unwrap();
        assert!(f.fallback);
        assert_eq!(f.model, DecayModel::Exponential);
        assert_eq!(f.rate, g.rate);
        let forced = DampedCosineOptions {
            fixed_beta: Some(0.0),
            ..Default::default()
        };
        assert_eq!(
            fit_damped_cosine(&t, &y, &e, w, &forced).unwrap().rate,
            g.rate
        );
    }

    #[test]
    fn phase_fit_on_closed_form() {
        let w = 2.0 * std::f64::consts::PI * 5000.0;
        let t = grid(2e-3, 200);
        let rec = coherent_evolution(w, 0.2, 1.48, &t);
        let f = fit_coherent_phase(w, &t, [&rec.sx, &rec.sy, &rec.sz], 0.05).unwrap();
        assert!((f.delta - 1.48).abs() < 1e-6);
        assert!((f.beta - 0.2).abs() < 1e-6);
    }
}
