//! Browser bindings: sideband coupling curves, locking decay laws and
//! coherent Bloch evolution. Every function returns a flat `Float64Array`
//! with one row of columns per sample.

use std::f64::consts::PI;

use spinlock::dynamics::{
    combined_sigma_x, propagate_trajectory, secular_sigma_x, DriveConfig, Frame, PhaseInput,
};
use spinlock::motion::{optimal_displacement_in, SidebandCouplings};
use spinlock::noise::ModulationSpec;
use wasm_bindgen::prelude::*;

fn check(cond: bool, msg: &str) -> Result<(), JsError> {
    if cond {
        Ok(())
    } else {
        Err(JsError::new(msg))
    }
}

/// Rows `[n̄, mean relative coupling, spread]` for `n̄` in `(0, nbar_max]`.
#[wasm_bindgen]
pub fn coupling_curve(eta: f64, nbar_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    check(eta > 0.0 && eta < 0.5, "η must lie in (0, 0.5)")?;
    check(
        nbar_max > 0.0 && nbar_max <= 2e5,
        "n̄ range must lie in (0, 2e5]",
    )?;
    check((2..=5000).contains(&points), "points must lie in [2, 5000]")?;
    let mut c = SidebandCouplings::new(eta);
    let mut out = Vec::with_capacity(3 * points);
    for i in 1..=points {
        let nbar = nbar_max * i as f64 / points as f64;
        let (mean, spread) = c.moments(nbar);
        out.extend([nbar, mean, spread]);
    }
    Ok(out)
}

/// `n̄` maximizing the mean sideband coupling in `[1, nbar_max]`, or NaN
/// when the maximum sits on the range edge.
#[wasm_bindgen]
pub fn optimal_nbar(eta: f64, nbar_max: f64) -> Result<f64, JsError> {
    check(eta > 0.0 && eta < 0.5, "η must lie in (0, 0.5)")?;
    match optimal_displacement_in(eta, 1.0, nbar_max) {
        Ok(n) => Ok(n),
        Err(spinlock::Error::Search { .. }) => Ok(f64::NAN),
        Err(e) => Err(JsError::new(&e.to_string())),
    }
}

/// Rows `[t, pure decay, product law, secular law]` of ⟨σx⟩ for a lock at
/// `rabi_hz` with flat `S_φ` (rad²·s) and a resonant tone of index `beta`.
#[wasm_bindgen]
pub fn locking_decay(
    rabi_hz: f64,
    s_phi: f64,
    beta: f64,
    t_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    check(
        rabi_hz > 0.0 && s_phi >= 0.0 && beta >= 0.0,
        "need Ω > 0, S ≥ 0, β ≥ 0",
    )?;
    check(
        t_max > 0.0 && (2..=20000).contains(&points),
        "need t_max > 0 and 2–20000 points",
    )?;
    let w = 2.0 * PI * rabi_hz;
    let mut out = Vec::with_capacity(4 * points);
    for i in 0..points {
        let t = t_max * i as f64 / (points - 1) as f64;
        out.extend([
            t,
            (-0.5 * w * w * s_phi * t).exp(),
            combined_sigma_x(w, beta, s_phi, t),
            secular_sigma_x(w, beta, s_phi, t),
        ]);
    }
    Ok(out)
}

/// Rows `[t, sx, sy, sz]` from full propagation in the drive frame under
/// `φ = β cos(Ωt + δ)`.
#[wasm_bindgen]
pub fn bloch_evolution(
    rabi_hz: f64,
    beta: f64,
    delta: f64,
    t_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    check(
        rabi_hz > 0.0 && beta >= 0.0 && delta.is_finite(),
        "need Ω > 0, β ≥ 0",
    )?;
    check(
        t_max > 0.0 && (2..=20000).contains(&points),
        "need t_max > 0 and 2–20000 points",
    )?;
    let w = 2.0 * PI * rabi_hz;
    // Keep the browser responsive: cap the number of integration steps.
    check(
        w * t_max / 0.05 <= 2e7,
        "too many integration steps; shorten t_max",
    )?;
    let t: Vec<f64> = (0..points)
        .map(|i| t_max * i as f64 / (points - 1) as f64)
        .collect();
    let tone = ModulationSpec::single(w, beta, delta);
    let rec = propagate_trajectory(
        &DriveConfig::new(w).with_frame(Frame::Drive),
        PhaseInput::modulation(&tone),
        &t,
    )
    .map_err(|e| JsError::new(&e.to_string()))?;
    let mut out = Vec::with_capacity(4 * points);
    for (i, &ti) in t.iter().enumerate() {
        out.extend([ti, rec.sx[i], rec.sy[i], rec.sz[i]]);
    }
    Ok(out)
}
