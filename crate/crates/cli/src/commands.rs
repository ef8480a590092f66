use std::f64::consts::PI;
use std::fs::File;

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Binomial, Distribution};
use serde_json::{json, Value};
use spinlock::dynamics::{
    coherent_evolution, ensemble_average, propagate_trajectory, DriveConfig, Frame, PhaseInput,
};
use spinlock::motion::{optimal_displacement_in, CouplingTable, SidebandCouplings};
use spinlock::noise::{derive_seed, estimate_psd, ModulationSpec, PsdModel, Synthesizer};
use spinlock::spectroscopy::{
    decay_time_grid, fit_coherent_phase, fit_scan, read_scan_csv, reconstruct_spectrum,
    simulate_protocol, write_scan_csv, write_spectrum_csv, Amplitude, DetectionFloor, FitChoice,
    ProtocolConfig, ScanDataset, ScanFit, SpectrumEstimate,
};

use crate::config::{modulation, CouplingConfig, DemoConfig, RunConfig};
use crate::error::CliError;
use crate::output::Staged;

fn missing(section: &str) -> CliError {
    CliError::Config(format!("config has no [{section}] section"))
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> spinlock::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn table<const N: usize>(
    header: [&str; N],
    rows: impl IntoIterator<Item = [String; N]>,
) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn synthesize(cfg: &RunConfig, out: &mut Staged) -> Result<(), CliError> {
    let s = cfg
        .synthesize
        .as_ref()
        .ok_or_else(|| missing("synthesize"))?;
    s.validate()?;
    let model = cfg.noise.model("noise")?;
    let tones = modulation(&cfg.tones, "tones")?;
    let synth = Synthesizer::new(&model, s.duration_s, s.dt_s)?;
    let mut trajectories: Vec<_> = (0..s.trajectories)
        .map(|i| synth.generate(derive_seed(cfg.seed, i as u64)))
        .collect();
    if !tones.is_empty() {
        for tr in &mut trajectories {
            for (k, x) in tr.samples.iter_mut().enumerate() {
                *x += tones.sample(k as f64 * tr.dt);
            }
        }
    }
    let estimate = estimate_psd(&trajectories)?;
    if s.write_trajectories {
        let rows = trajectories.iter().enumerate().flat_map(|(i, tr)| {
            tr.samples
                .iter()
                .enumerate()
                .map(move |(k, x)| [i.to_string(), (k as f64 * tr.dt).to_string(), x.to_string()])
        });
        out.add(
            "trajectories.csv",
            table(["trajectory", "t_s", "phi_rad"], rows)?,
        );
    }
    out.add("psd_estimate.csv", csv_bytes(|b| estimate.write_csv(b))?);
    println!(
        "synthesized {} trajectories of {} samples; estimated variance {:.4e} rad² (model {:.4e})",
        trajectories.len(),
        synth.len(),
        estimate.variance(),
        model_variance(&model, s.dt_s)
    );
    Ok(())
}

// Variance of the band-limited model over the representable band [0, π/dt].
fn model_variance(model: &PsdModel, dt: f64) -> f64 {
    let n = 4000;
    let hi = PI / dt;
    let h = hi / n as f64;
    let f = |i: usize| model.evaluate(i as f64 * h).unwrap_or(0.0);
    let sum: f64 = (1..n).map(f).sum::<f64>() + 0.5 * (f(0) + f(n));
    sum * h / PI
}

fn coupling_outputs(c: &CouplingConfig, prefix: &str, out: &mut Staged) -> Result<Value, CliError> {
    c.validate()?;
    let tab = CouplingTable::new(c.eta, c.n_max)?;
    out.add(
        &format!("{prefix}coupling_table.csv"),
        csv_bytes(|b| tab.write_csv(b))?,
    );

    let mut couplings = SidebandCouplings::new(c.eta);
    let rows: Vec<[String; 3]> = (1..=c.curve_points)
        .map(|i| {
            let nbar = c.nbar_max * i as f64 / c.curve_points as f64;
            let (mean, spread) = couplings.moments(nbar);
            [
                nbar.to_string(),
                format!("{mean:.12e}"),
                format!("{spread:.12e}"),
            ]
        })
        .collect();
    out.add(
        &format!("{prefix}coupling_curve.csv"),
        table(["nbar", "mean_coupling", "spread"], rows)?,
    );

    let optimum = match optimal_displacement_in(c.eta, 1.0, c.nbar_max) {
        Ok(nbar) => {
            let (coupling, spread) = couplings.moments(nbar);
            json!({ "eta": c.eta, "nbar_star": nbar, "coupling": coupling, "spread": spread,
                    "scan": [1.0, c.nbar_max], "at_edge": false })
        }
        Err(spinlock::Error::Search { lo, hi }) => {
            out.warn(format!(
                "no interior maximum for η = {} in n̄ ∈ [{lo}, {hi}]; the optimum lies beyond the scan range (raise coupling.nbar_max)",
                c.eta
            ));
            json!({ "eta": c.eta, "nbar_star": null, "scan": [lo, hi], "at_edge": true })
        }
        Err(e) => return Err(e.into()),
    };
    Ok(optimum)
}

pub fn coupling(cfg: &RunConfig, out: &mut Staged) -> Result<(), CliError> {
    let c = cfg.coupling.clone().unwrap_or_default();
    let optimum = coupling_outputs(&c, "", out)?;
    println!("{}", serde_json::to_string(&optimum).expect("json"));
    out.add_json("optimum.json", &optimum);
    Ok(())
}

fn run_scan(
    protocol: &ProtocolConfig,
    out: &mut Staged,
    name: &str,
) -> Result<ScanDataset, CliError> {
    let data = simulate_protocol(protocol)?;
    for w in &data.warnings {
        out.warn(w.clone());
    }
    let weak = data.rows.iter().filter(|r| r.flags.weak_noise).count();
    if weak > 0 {
        out.warn(format!(
            "{weak} scan points lie outside the weak-noise regime and are flagged"
        ));
    }
    out.add(name, csv_bytes(|b| write_scan_csv(&data, b))?);
    Ok(data)
}

pub fn scan(cfg: &RunConfig, out: &mut Staged) -> Result<(), CliError> {
    let s = cfg.scan.as_ref().ok_or_else(|| missing("scan"))?;
    let protocol = s.protocol(cfg)?;
    let data = run_scan(&protocol, out, "scan.csv")?;
    println!(
        "simulated {} points at {} Rabi frequencies",
        data.rows.len(),
        protocol.rabi.len()
    );
    Ok(())
}

fn fit_report(fits: &[ScanFit], est: &SpectrumEstimate) -> Value {
    let rows: Vec<Value> = fits
        .iter()
        .map(|f| {
            let row = est.rows.iter().find(|r| r.omega == f.omega);
            json!({
                "Omega_rad_s": f.omega,
                "fit": f.fit,
                "reduced_chi2": f.fit.as_ref().map(|d| d.reduced_chi2()),
                "error": f.error,
                "S_nu": row.map(|r| r.s_nu),
                "S_phi": row.map(|r| r.s_phi),
                "delta_nu_Hz": row.and_then(|r| r.delta_nu),
                "flags": row.map_or(f.flags, |r| r.flags).to_string(),
            })
        })
        .collect();
    let peaks: Vec<Value> = est
        .rows
        .iter()
        .filter(|r| r.delta_nu.is_some())
        .map(|r| {
            json!({ "Omega_rad_s": r.omega, "beta": r.beta, "delta_nu_Hz": r.delta_nu,
                         "delta_nu_err_Hz": r.delta_nu_err, "S_nu": r.s_nu, "S_phi": r.s_phi })
        })
        .collect();
    json!({ "rows": rows, "peaks": peaks, "skipped_Omega_rad_s": est.skipped })
}

fn fit_and_reconstruct(
    data: &ScanDataset,
    choice: FitChoice,
    amplitude: Amplitude,
    floor: Option<DetectionFloor>,
    out: &mut Staged,
) -> Result<(Vec<ScanFit>, SpectrumEstimate), CliError> {
    if data.rows.is_empty() {
        return Err(CliError::Config("scan has no rows".into()));
    }
    let fits = fit_scan(data, choice, amplitude);
    for f in fits.iter().filter(|f| f.fit.is_none()) {
        out.warn(format!(
            "fit failed at Ω = {:.4e} rad/s: {}",
            f.omega,
            f.error.as_deref().unwrap_or("unknown")
        ));
    }
    if fits.iter().all(|f| f.fit.is_none()) {
        return Err(CliError::Numerical("no decay fit converged".into()));
    }
    let est = reconstruct_spectrum(&fits, floor);
    Ok((fits, est))
}

pub fn spectrum(cfg: &RunConfig, out: &mut Staged) -> Result<(), CliError> {
    let sp = cfg.spectrum.as_ref().ok_or_else(|| missing("spectrum"))?;
    if let Some(g) = sp.floor_gamma {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(CliError::Config(format!(
                "spectrum.floor_gamma: must be ≥ 0 (got {g})"
            )));
        }
    }
    let data = match &sp.input {
        Some(path) => {
            let file = File::open(path).map_err(|e| {
                CliError::Config(format!("spectrum.input: {}: {e}", path.display()))
            })?;
            read_scan_csv(file)
                .map_err(|e| CliError::Config(format!("spectrum.input: {}: {e}", path.display())))?
        }
        None => {
            let s = cfg.scan.as_ref().ok_or_else(|| {
                CliError::Config("[spectrum] needs either `input` or a [scan] section".into())
            })?;
            run_scan(&s.protocol(cfg)?, out, "scan.csv")?
        }
    };
    let floor = sp.floor_gamma.map(|gamma| DetectionFloor { gamma });
    let (fits, est) = fit_and_reconstruct(&data, sp.choice(), sp.amplitude(), floor, out)?;
    out.add("spectrum.csv", csv_bytes(|b| write_spectrum_csv(&est, b))?);
    out.add_json("fit_report.json", &fit_report(&fits, &est));
    println!(
        "reconstructed {} spectrum rows ({} skipped, {} at the floor)",
        est.rows.len(),
        est.skipped.len(),
        est.rows.iter().filter(|r| r.flags.floor).count()
    );
    Ok(())
}

/// Figure-ready synthetic data: decays at three noise levels, sideband
/// couplings, a tone-plus-floor spectrum scan and coherent Bloch evolution.
pub fn demo_figures(cfg: &RunConfig, out: &mut Staged) -> Result<(), CliError> {
    let demo = cfg.demo.clone().unwrap_or_default();
    if demo.trajectories == 0 || demo.shots == 0 {
        return Err(CliError::Config(
            "demo: trajectories and shots must be ≥ 1".into(),
        ));
    }
    let mut report = serde_json::Map::new();
    report.insert("fig1d".into(), fig1d(cfg.seed, &demo, out)?);
    let c = CouplingConfig {
        nbar_max: 2000.0,
        ..CouplingConfig::default()
    };
    report.insert("fig2_optimum".into(), coupling_outputs(&c, "fig2_", out)?);
    report.insert("fig3".into(), fig3(cfg.seed, &demo, out)?);
    report.insert("fig4b".into(), fig4b(cfg.seed, &demo, out)?);
    out.add_json("demo_report.json", &report);
    Ok(())
}

fn fig1d(seed: u64, demo: &DemoConfig, out: &mut Staged) -> Result<Value, CliError> {
    let w = 2.0 * PI * 1000.0;
    let t: Vec<f64> = (1..=40)
        .map(|i| i as f64 * 3.0 / (0.01 * w) / 40.0)
        .collect();
    let mut rows = Vec::new();
    let mut levels = Vec::new();
    for (i, r) in [0.005, 0.01, 0.02].into_iter().enumerate() {
        let s = 2.0 * r * w / (w * w);
        let rec = ensemble_average(
            &DriveConfig::new(w),
            &PsdModel::white(s),
            &ModulationSpec::none(),
            demo.trajectories,
            derive_seed(seed, i as u64),
            &t,
        )?;
        let se = rec
            .stderr
            .as_ref()
            .map(|e| e[0].clone())
            .unwrap_or_else(|| vec![0.0; t.len()]);
        for (k, &tk) in t.iter().enumerate() {
            rows.push([
                format!("{s:e}"),
                w.to_string(),
                tk.to_string(),
                format!("{:.10}", (-0.5 * w * w * s * tk).exp()),
                format!("{:.10}", rec.sx[k]),
                format!("{:.3e}", se[k]),
            ]);
        }
        levels.push(json!({ "S_phi": s, "rate": 0.5 * w * w * s }));
    }
    out.add(
        "fig1d_decays.csv",
        table(
            [
                "S_phi",
                "Omega_rad_s",
                "t_s",
                "sx_model",
                "sx_mc",
                "sx_mc_stderr",
            ],
            rows,
        )?,
    );
    Ok(json!({ "Omega_rad_s": w, "levels": levels }))
}

fn fig3(seed: u64, demo: &DemoConfig, out: &mut Staged) -> Result<Value, CliError> {
    let (lo, hi) = (2.0 * PI * 500.0, 2.0 * PI * 5000.0);
    let rabi: Vec<f64> = (0..8)
        .map(|k| lo * (hi / lo).powf(k as f64 / 7.0))
        .collect();
    let w_t = rabi[4];
    let r_t = 0.01 * w_t;
    let s = 2.0 * r_t / (w_t * w_t);
    let beta = 2.0 * PI * 1.5 * r_t / w_t;
    let times = rabi
        .iter()
        .map(|&w| decay_time_grid(0.5 * w * w * s, 2.0, 40))
        .collect();
    let protocol = ProtocolConfig {
        n_traj: demo.trajectories,
        shots: demo.shots,
        master_seed: derive_seed(seed, 3),
        modulation: ModulationSpec::single(w_t, beta, 0.3),
        ..ProtocolConfig::carrier(rabi, times, PsdModel::white(s))
    };
    let data = run_scan(&protocol, out, "fig3a_scan.csv")?;
    let floor = Some(DetectionFloor { gamma: 0.9 });
    let (fits, est) = fit_and_reconstruct(
        &data,
        FitChoice::DampedCosine,
        Amplitude::Fixed(1.0),
        floor,
        out,
    )?;
    out.add(
        "fig3b_spectrum.csv",
        csv_bytes(|b| write_spectrum_csv(&est, b))?,
    );
    let peaks = est.rows.iter().filter(|r| r.delta_nu.is_some()).map(|r| {
        [
            r.omega.to_string(),
            format!("{:e}", r.beta.unwrap_or(0.0)),
            format!("{:.4}", r.delta_nu.unwrap_or(0.0)),
            format!("{:e}", r.s_nu),
            format!("{:e}", r.s_phi),
        ]
    });
    out.add(
        "fig3c_peaks.csv",
        table(
            ["Omega_rad_s", "beta", "delta_nu_Hz", "S_nu", "S_phi"],
            peaks,
        )?,
    );
    Ok(json!({
        "tone_Omega_rad_s": w_t,
        "injected_beta": beta,
        "expected_delta_nu_Hz": beta * w_t / (2.0 * PI),
        "S_phi": s,
        "fits": fit_report(&fits, &est),
    }))
}

fn fig4b(seed: u64, demo: &DemoConfig, out: &mut Staged) -> Result<Value, CliError> {
    let (w, beta, delta) = (2.0 * PI * 5000.0, 0.2, 1.48);
    let t: Vec<f64> = (1..=200).map(|i| i as f64 * 2e-3 / 200.0).collect();
    let tone = ModulationSpec::single(w, beta, delta);
    let rec = propagate_trajectory(
        &DriveConfig::new(w).with_frame(Frame::Drive),
        PhaseInput::modulation(&tone),
        &t,
    )?;
    let model = coherent_evolution(w, beta, delta, &t);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 4));
    let n = demo.shots as f64;
    let mut measured = [vec![], vec![], vec![]];
    for (k, comp) in [&rec.sx, &rec.sy, &rec.sz].into_iter().enumerate() {
        for &v in comp.iter() {
            let p = (0.5 * (1.0 + v)).clamp(0.0, 1.0);
            let hits = Binomial::new(demo.shots, p)
                .map_err(|e| CliError::Numerical(e.to_string()))?
                .sample(&mut rng);
            measured[k].push(2.0 * hits as f64 / n - 1.0);
        }
    }
    let err = 1.0 / n.sqrt();
    let fit = fit_coherent_phase(w, &t, [&measured[0], &measured[1], &measured[2]], err)?;
    let rows = (0..t.len()).map(|i| {
        [
            t[i].to_string(),
            format!("{:.6}", measured[0][i]),
            format!("{:.6}", measured[1][i]),
            format!("{:.6}", measured[2][i]),
            format!("{:.6}", model.sx[i]),
            format!("{:.6}", model.sy[i]),
            format!("{:.6}", model.sz[i]),
        ]
    });
    out.add(
        "fig4b_bloch.csv",
        table(
            ["t_s", "sx", "sy", "sz", "sx_model", "sy_model", "sz_model"],
            rows,
        )?,
    );
    Ok(json!({ "Omega_rad_s": w, "beta": beta, "delta": delta, "shots": demo.shots, "fit": fit }))
}
