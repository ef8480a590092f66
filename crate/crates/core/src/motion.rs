//! Trapped-ion motional couplings for coherent states.
//!
//! The carrier and blue-sideband Rabi frequencies of Fock state `n` are
//! `Ω₀·|⟨n+s| e^{iη(a+a†)} |n⟩|` with
//! `|⟨n+s|e^{iη(a+a†)}|n⟩| = e^{−η²/2} η^s √(n!/(n+s)!) |L_n^{(s)}(η²)|`.
//! Everything user-facing is reported relative to the ground-state carrier
//! `Ω₀,₀ = Ω₀ e^{−η²/2}`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Largest tail mass tolerated beyond a Fock cutoff.
pub const TAIL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionalMode {
    /// Mode frequency, rad/s.
    pub nu: f64,
    /// Lamb-Dicke parameter.
    pub eta: f64,
    pub fock_cutoff: usize,
}

impl MotionalMode {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::input(format!(
                "Lamb-Dicke parameter must lie in (0, 1) (got {})",
                self.eta
            )));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::input("mode frequency must be > 0"));
        }
        Ok(())
    }
}

/// Coherent state `|α⟩` with `n̄ = |α|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentStateSpec {
    pub nbar: f64,
}

impl CoherentStateSpec {
    pub fn from_amplitude(alpha: f64) -> Self {
        Self {
            nbar: alpha * alpha,
        }
    }
}

/// `L_n^{(α)}(x)` by the three-term recurrence.
///
/// The recurrence runs in double-double arithmetic: in plain f64 its
/// rounding error accumulates to ~1e-12 absolute by n ~ 10³, which ruins
/// relative accuracy near the polynomial's zeros.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut prev = Dd::from(1.0);
    let mut cur = Dd::from(1.0).add_f(alpha).add_f(-x);
    for k in 1..n {
        let k = k as f64;
        let a = Dd::from(2.0 * k + 1.0).add_f(alpha).add_f(-x);
        let b = Dd::from(k).add_f(alpha);
        let next = a.mul(cur).sub(b.mul(prev)).div_f(k + 1.0);
        prev = cur;
        cur = next;
    }
    cur.hi + cur.lo
}

/// Unevaluated sum `hi + lo` carrying about 32 significant digits.
#[derive(Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }
}

impl Dd {
    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn renorm(hi: f64, lo: f64) -> Dd {
        let s = hi + lo;
        Dd {
            hi: s,
            lo: lo - (s - hi),
        }
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        Dd::renorm(s.hi, s.lo + self.lo + o.lo)
    }

    fn add_f(self, v: f64) -> Dd {
        self.add(Dd::from(v))
    }

    fn sub(self, o: Dd) -> Dd {
        self.add(Dd {
            hi: -o.hi,
            lo: -o.lo,
        })
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::renorm(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    fn div_f(self, v: f64) -> Dd {
        let q = self.hi / v;
        // Remainder of self − q·v, computed exactly for the leading part.
        let p = q * v;
        let e = q.mul_add(v, -p);
        let r = (self.hi - p - e + self.lo) / v;
        Dd::renorm(q, r)
    }
}

/// `|⟨n+s| exp(iη(a + a†)) |n⟩|`, relative to the bare Rabi frequency.
pub fn fock_matrix_element(eta: f64, n: usize, s: usize) -> f64 {
    let x = eta * eta;
    let log_pref = -0.5 * x
        + s as f64 * eta.ln()
        + 0.5 * (ln_gamma(n as f64 + 1.0) - ln_gamma((n + s) as f64 + 1.0));
    let pref = if s == 0 {
        (-0.5 * x).exp()
    } else {
        log_pref.exp()
    };
    (pref * laguerre(n, s as f64, x)).abs()
}

/// Fock indices carrying all but a negligible part of a Poisson(n̄) weight.
fn poisson_window(nbar: f64) -> (usize, usize) {
    let sigma = nbar.sqrt();
    let lo = (nbar - 12.0 * sigma - 20.0).floor().max(0.0) as usize;
    let hi = (nbar + 12.0 * sigma + 40.0).ceil() as usize;
    (lo, hi)
}

#[inline]
fn poisson_pmf(nbar: f64, n: usize) -> f64 {
    if nbar == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let n = n as f64;
    (-nbar + n * nbar.ln() - ln_gamma(n + 1.0)).exp()
}

/// Smallest cutoff whose Poisson tail is below [`TAIL_TOLERANCE`].
pub fn default_cutoff(nbar: f64) -> usize {
    poisson_window(nbar).1
}

/// `p_n = e^{−n̄} n̄ⁿ / n!` for `n = 0..=cutoff`.
pub fn coherent_fock_distribution(spec: &CoherentStateSpec, cutoff: usize) -> Result<Vec<f64>> {
    let nbar = spec.nbar;
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::input(format!(
            "mean phonon number must be ≥ 0 (got {nbar})"
        )));
    }
    let p: Vec<f64> = (0..=cutoff).map(|n| poisson_pmf(nbar, n)).collect();
    // Sum the tail directly; 1 − Σp loses the digits that matter here.
    let mut tail = 0.0;
    let mut n = cutoff + 1;
    loop {
        let term = poisson_pmf(nbar, n);
        tail += term;
        if (n as f64 > nbar && term < 1e-30 * tail.max(1e-300)) || term == 0.0 && n as f64 > nbar {
            break;
        }
        n += 1;
    }
    if tail > TAIL_TOLERANCE {
        return Err(Error::Cutoff { cutoff, tail });
    }
    Ok(p)
}

/// Blue-sideband couplings relative to `Ω₀,₀`, cached up to a growing `n`.
#[derive(Debug, Clone)]
pub struct SidebandCouplings {
    eta: f64,
    values: Vec<f64>,
}

impl SidebandCouplings {
    pub fn new(eta: f64) -> Self {
        Self {
            eta,
            values: Vec::new(),
        }
    }

    fn ensure(&mut self, n_max: usize) {
        if self.values.len() > n_max {
            return;
        }
        let x = self.eta * self.eta;
        // Continue the L_n^{(1)} recurrence from where the cache stopped.
        let start = self.values.len();
        self.values.reserve(n_max + 1 - start);
        let (mut prev, mut cur) = (Dd::from(1.0), Dd::from(2.0).add_f(-x));
        let mut k = 0usize;
        let rel = self.eta; // η e^{−η²/2} / e^{−η²/2}
        while k <= n_max {
            let l = if k == 0 { prev } else { cur };
            if k >= start {
                self.values
                    .push((rel * (l.hi + l.lo) / ((k + 1) as f64).sqrt()).abs());
            }
            if k >= 1 {
                let kf = k as f64;
                let a = Dd::from(2.0 * kf + 2.0).add_f(-x);
                let next = a.mul(cur).sub(Dd::from(kf + 1.0).mul(prev)).div_f(kf + 1.0);
                prev = cur;
                cur = next;
            }
            k += 1;
        }
    }

    /// `Ω_{n,n+1}/Ω₀,₀`.
    pub fn at(&mut self, n: usize) -> f64 {
        self.ensure(n);
        self.values[n]
    }

    /// Poisson mean and standard deviation of the relative coupling.
    pub fn moments(&mut self, nbar: f64) -> (f64, f64) {
        let (lo, hi) = poisson_window(nbar);
        self.ensure(hi);
        let mut norm = 0.0;
        let mut mean = 0.0;
        for n in lo..=hi {
            let p = poisson_pmf(nbar, n);
            norm += p;
            mean += p * self.values[n];
        }
        mean /= norm;
        let mut var = 0.0;
        for n in lo..=hi {
            let d = self.values[n] - mean;
            var += poisson_pmf(nbar, n) * d * d;
        }
        (mean, (var / norm).sqrt())
    }
}

/// `Ω̄_BSB(n̄)/Ω₀,₀ = Σ pₙ Ω_{n,n+1}/Ω₀,₀`.
pub fn average_sideband_rabi(eta: f64, nbar: f64) -> f64 {
    SidebandCouplings::new(eta).moments(nbar).0
}

/// Poisson standard deviation of the relative sideband couplings.
pub fn rabi_spread(eta: f64, nbar: f64) -> f64 {
    SidebandCouplings::new(eta).moments(nbar).1
}

/// `n̄` maximizing [`average_sideband_rabi`] over `[1, 10/η²]`.
pub fn optimal_displacement(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::input(format!(
            "optimal displacement needs 0 < η < 0.5 (got {eta})"
        )));
    }
    optimal_displacement_in(eta, 1.0, 10.0 / (eta * eta))
}

/// Maximizer of the average sideband coupling over `[lo, hi]`.
///
/// The coupling oscillates beyond its first maximum, so a coarse scan in
/// `√n̄` picks the global peak before golden-section refinement. A maximum
/// on the range boundary is reported as a search error.
pub fn optimal_displacement_in(eta: f64, lo: f64, hi: f64) -> Result<f64> {
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::input("search range must satisfy 0 ≤ lo < hi"));
    }
    let mut c = SidebandCouplings::new(eta);
    let mut f = |nbar: f64| c.moments(nbar).0;
    let m = 400;
    let (a, b) = (lo.sqrt(), hi.sqrt());
    let grid: Vec<f64> = (0..=m)
        .map(|i| (a + (b - a) * i as f64 / m as f64).powi(2))
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let best = (0..=m).fold(0, |bi, i| if vals[i] > vals[bi] { i } else { bi });
    if best == 0 || best == m {
        return Err(Error::Search { lo, hi });
    }
    let (mut x0, mut x1) = (grid[best - 1], grid[best + 1]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut xa = x1 - g * (x1 - x0);
    let mut xb = x0 + g * (x1 - x0);
    let (mut fa, mut fb) = (f(xa), f(xb));
    while x1 - x0 > 0.25 {
        if fa < fb {
            x0 = xa;
            xa = xb;
            fa = fb;
            xb = x0 + g * (x1 - x0);
            fb = f(xb);
        } else {
            x1 = xb;
            xb = xa;
            fb = fa;
            xa = x1 - g * (x1 - x0);
            fa = f(xa);
        }
    }
    Ok(0.5 * (x0 + x1))
}

/// `p↑ = sin²(Ω̄_BSB t_p / 2)` with `Ω̄_BSB = Ω₀,₀·average_sideband_rabi(η, n̄)`.
pub fn sideband_excitation_probability(eta: f64, nbar: f64, omega00: f64, t_p: f64) -> f64 {
    let w = omega00 * average_sideband_rabi(eta, nbar);
    (0.5 * w * t_p).sin().powi(2)
}

/// Least-squares `Ω̄_BSB` from excitation probabilities `p↑(t_p)`.
///
/// Searches `[π/(20 t_max), 40π/t_max]`; the first local minimum of the
/// squared residual in frequency order is refined by golden section.
pub fn recover_sideband_rabi(t_p: &[f64], p_up: &[f64]) -> Result<f64> {
    if t_p.len() != p_up.len() || t_p.len() < 3 {
        return Err(Error::input(
            "need at least three (t_p, p) pairs of equal length",
        ));
    }
    let t_max = t_p.iter().cloned().fold(0.0, f64::max);
    if t_max <= 0.0 {
        return Err(Error::input(
            "pulse durations must include a positive value",
        ));
    }
    let sse = |w: f64| -> f64 {
        t_p.iter()
            .zip(p_up)
            .map(|(&t, &p)| {
                let r = (0.5 * w * t).sin().powi(2) - p;
                r * r
            })
            .sum()
    };
    let (w_lo, w_hi) = (
        std::f64::consts::PI / (20.0 * t_max),
        40.0 * std::f64::consts::PI / t_max,
    );
    let m = 4000;
    let ws: Vec<f64> = (0..=m)
        .map(|i| w_lo + (w_hi - w_lo) * i as f64 / m as f64)
        .collect();
    let vals: Vec<f64> = ws.iter().map(|&w| sse(w)).collect();
    let best = (1..m).fold(1, |bi, i| if vals[i] < vals[bi] { i } else { bi });
    let (mut a, mut b) = (ws[best - 1], ws[best + 1]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let xa = b - g * (b - a);
        let xb = a + g * (b - a);
        if sse(xa) < sse(xb) {
            b = xb;
        } else {
            a = xa;
        }
    }
    Ok(0.5 * (a + b))
}

/// Per-n couplings relative to `Ω₀,₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingTable {
    pub eta: f64,
    /// Bare ground-state carrier element `e^{−η²/2}` used as the normalizer.
    pub ground_carrier: f64,
    pub n: Vec<usize>,
    pub carrier: Vec<f64>,
    pub blue_sideband: Vec<f64>,
}

impl CouplingTable {
    pub fn new(eta: f64, n_max: usize) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::input(format!(
                "Lamb-Dicke parameter must lie in (0, 1) (got {eta})"
            )));
        }
        let g = (-0.5 * eta * eta).exp();
        let mut bsb = SidebandCouplings::new(eta);
        let n: Vec<usize> = (0..=n_max).collect();
        let carrier = n
            .iter()
            .map(|&k| fock_matrix_element(eta, k, 0) / g)
            .collect();
        let blue_sideband = n.iter().map(|&k| bsb.at(k)).collect();
        Ok(Self {
            eta,
            ground_carrier: g,
            n,
            carrier,
            blue_sideband,
        })
    }

    /// CSV with columns `n, carrier, blue_sideband`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "carrier", "blue_sideband"])?;
        for i in 0..self.n.len() {
            w.write_record([
                self.n[i].to_string(),
                format!("{:.12e}", self.carrier[i]),
                format!("{:.12e}", self.blue_sideband[i]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Optimum summary: `n̄*`, the coupling there and its Poisson spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub eta: f64,
    pub nbar_star: f64,
    pub coupling: f64,
    pub spread: f64,
}

pub fn optimum_report(eta: f64) -> Result<OptimumReport> {
    let nbar_star = optimal_displacement(eta)?;
    let (coupling, spread) = SidebandCouplings::new(eta).moments(nbar_star);
    Ok(OptimumReport {
        eta,
        nbar_star,
        coupling,
        spread,
    })
}
