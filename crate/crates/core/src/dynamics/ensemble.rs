//! Monte Carlo averages over independently seeded noise realizations.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::propagate::{propagate_trajectory, validate_grid, BlochRecord, DriveConfig, PhaseInput};
use crate::error::{Error, Result};
use crate::noise::{derive_seed, ModulationSpec, PsdModel, Synthesizer};

/// Trajectories per reduction chunk. Chunks are merged in index order, so the
/// result does not depend on how they were scheduled.
const CHUNK: usize = 32;

/// Running mean and sum of squared deviations per time point and component.
#[derive(Debug, Clone)]
struct Moments {
    n: f64,
    mean: [Vec<f64>; 3],
    m2: [Vec<f64>; 3],
    max_abs_phase: f64,
}

impl Moments {
    fn new(len: usize) -> Self {
        let z = || vec![0.0; len];
        Self {
            n: 0.0,
            mean: [z(), z(), z()],
            m2: [z(), z(), z()],
            max_abs_phase: 0.0,
        }
    }

    fn push(&mut self, rec: &BlochRecord) {
        self.n += 1.0;
        let comps = [&rec.sx, &rec.sy, &rec.sz];
        for (k, comp) in comps.into_iter().enumerate() {
            for (i, &x) in comp.iter().enumerate() {
                let d = x - self.mean[k][i];
                self.mean[k][i] += d / self.n;
                self.m2[k][i] += d * (x - self.mean[k][i]);
            }
        }
        self.max_abs_phase = self.max_abs_phase.max(rec.max_abs_phase);
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0.0 {
            return;
        }
        let n = self.n + other.n;
        for k in 0..3 {
            for i in 0..self.mean[k].len() {
                let d = other.mean[k][i] - self.mean[k][i];
                self.mean[k][i] += d * other.n / n;
                self.m2[k][i] += other.m2[k][i] + d * d * self.n * other.n / n;
            }
        }
        self.n = n;
        self.max_abs_phase = self.max_abs_phase.max(other.max_abs_phase);
    }
}

/// Pointwise mean and standard error of the Bloch components over `n_traj`
/// trajectories, each with its own noise realization seeded by
/// `derive_seed(master_seed, index)`. Noise is sampled at the drive step.
pub fn ensemble_average(
    drive: &DriveConfig,
    model: &PsdModel,
    modulation: &ModulationSpec,
    n_traj: usize,
    master_seed: u64,
    t_grid: &[f64],
) -> Result<BlochRecord> {
    if n_traj == 0 {
        return Err(Error::input("n_traj must be ≥ 1"));
    }
    drive.validate()?;
    validate_grid(t_grid)?;
    modulation.validate()?;
    let t_end = *t_grid.last().unwrap();
    let noisy = !model.is_zero();
    let synth = if noisy {
        Some(Synthesizer::new(
            model,
            t_end.max(2.0 * drive.dt),
            drive.dt,
        )?)
    } else {
        None
    };
    let tones = (!modulation.is_empty()).then_some(modulation);

    let run_chunk = |c: usize| -> Result<Moments> {
        let mut m = Moments::new(t_grid.len());
        for i in c * CHUNK..((c + 1) * CHUNK).min(n_traj) {
            let noise = synth
                .as_ref()
                .map(|s| s.generate(derive_seed(master_seed, i as u64)));
            let rec = propagate_trajectory(drive, PhaseInput::both(noise.as_ref(), tones), t_grid)?;
            m.push(&rec);
        }
        Ok(m)
    };

    let chunks = n_traj.div_ceil(CHUNK);
    // Without noise every trajectory is identical.
    let chunks_needed = if noisy { chunks } else { 1 };
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<Moments>> = (0..chunks_needed).into_par_iter().map(run_chunk).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<Moments>> = (0..chunks_needed).map(run_chunk).collect();

    let mut total = Moments::new(t_grid.len());
    for p in parts {
        total.merge(&p?);
    }
    if !noisy {
        // Scale the single deterministic run up to n_traj copies (zero spread).
        total.n = n_traj as f64;
        for k in 0..3 {
            total.m2[k].iter_mut().for_each(|v| *v = 0.0);
        }
    }

    let n = total.n;
    let se = |k: usize| -> Vec<f64> {
        if n < 2.0 {
            return vec![0.0; t_grid.len()];
        }
        total.m2[k]
            .iter()
            .map(|m2| (m2.max(0.0) / (n - 1.0) / n).sqrt())
            .collect()
    };
    let stderr = [se(0), se(1), se(2)];
    let [sx, sy, sz] = total.mean;
    Ok(BlochRecord {
        times: t_grid.to_vec(),
        sx,
        sy,
        sz,
        stderr: Some(stderr),
        max_abs_phase: total.max_abs_phase,
        n_traj,
    })
}
