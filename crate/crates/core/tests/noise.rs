use std::f64::consts::PI;

use spinlock::noise::*;

fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn ensemble(
    model: &PsdModel,
    duration: f64,
    dt: f64,
    n: usize,
    master: u64,
) -> Vec<NoiseTrajectory> {
    let synth = Synthesizer::new(model, duration, dt).unwrap();
    (0..n)
        .map(|i| synth.generate(derive_seed(master, i as u64)))
        .collect()
}

#[test]
fn white_variance_matches_band_integral() {
    let (s0, dt) = (2e-7, 1e-4);
    let trs = ensemble(&PsdModel::white(s0), 0.05, dt, 200, 1);
    let n = trs[0].len();
    // DC is removed, so the representable band is [Δω, π/dt] on both sides.
    let d_omega = 2.0 * PI / (n as f64 * dt);
    let expected = s0 * (PI / dt - 0.5 * d_omega) / PI;
    let vars: Vec<f64> = trs
        .iter()
        .map(|t| t.samples.iter().map(|x| x * x).sum::<f64>() / n as f64)
        .collect();
    let (m, se) = mean_se(&vars);
    assert!((m - expected).abs() < 3.0 * se, "{m} vs {expected} ± {se}");
}

#[test]
fn white_estimate_is_flat() {
    let s0 = 1e-6;
    let trs = ensemble(&PsdModel::white(s0), 6.3e-3, 1e-4, 2000, 2);
    let est = estimate_psd(&trs).unwrap();
    for (w, s) in est.omega().iter().zip(est.values()).skip(1) {
        assert!((s / s0 - 1.0).abs() < 0.1, "bin {w}: {s}");
    }
    let n = trs[0].len();
    let var: f64 = trs
        .iter()
        .map(|t| {
            let m = t.mean();
            t.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64
        })
        .sum::<f64>()
        / trs.len() as f64;
    assert!((periodogram_power(&est, n) / var - 1.0).abs() < 1e-6);
}

#[test]
fn power_law_slope_round_trip() {
    let model = PsdModel::Parametric(ParametricPsd {
        background: Some(PowerLaw {
            amplitude: 1e-6,
            exponent: -1.5,
            reference: 2.0 * PI * 1000.0,
            band: None,
        }),
        ..Default::default()
    });
    let trs = ensemble(&model, 0.05, 2e-5, 200, 3);
    let est = estimate_psd(&trs).unwrap();
    let (lo, hi) = (2.0 * PI * 200.0, 2.0 * PI * 5000.0);
    let pts: Vec<(f64, f64)> = est
        .omega()
        .iter()
        .zip(est.values())
        .filter(|(w, _)| **w >= lo && **w <= hi)
        .map(|(w, s)| (w.ln(), s.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 1.5).abs() < 0.1, "slope {slope}");
}

#[test]
fn wiener_khinchin_round_trip() {
    // Broad Lorentzian on a white floor: short correlation time, smooth spectrum.
    let model = PsdModel::Parametric(ParametricPsd {
        white_floor: 1e-8,
        peaks: vec![Peak {
            center: 2.0 * PI * 2000.0,
            height: 5e-8,
            width: 2.0 * PI * 1500.0,
        }],
        ..Default::default()
    });
    let dt = 2e-5;
    let trs = ensemble(&model, 0.04, dt, 300, 4);
    let tables: Vec<CorrelationTable> = trs
        .iter()
        .map(|t| autocorrelation(t, 0.01).unwrap())
        .collect();
    for t in &tables {
        assert!(t.values.iter().all(|c| c.abs() <= t.values[0]));
    }
    for f in [0.0, 500.0, 1500.0, 2000.0, 3000.0, 8000.0] {
        let w = 2.0 * PI * f;
        let per: Vec<f64> = tables.iter().map(|t| t.spectrum(w)).collect();
        let (m, se) = mean_se(&per);
        let target = model.evaluate(w).unwrap();
        // The zero-mean constraint removes the DC bin.
        if f == 0.0 {
            continue;
        }
        assert!(
            (m - target).abs() < 3.0 * se,
            "{f} Hz: {m:e} vs {target:e} ± {se:e}"
        );
    }
}

#[test]
fn tone_autocovariance() {
    let (beta, w) = (0.1, 2.0 * PI * 1000.0);
    let model = PsdModel::Parametric(ParametricPsd {
        peaks: vec![Peak {
            center: w,
            height: beta * beta * 1e3,
            width: 2.0 / 1e3,
        }],
        ..Default::default()
    });
    let tr = synthesize_trajectory(&model, 0.5, 1e-5, 9).unwrap();
    let c = autocorrelation(&tr, 2e-3).unwrap();
    let amp2 = 2.0 * c.values[0];
    for tau in [0.0, 1.25e-4, 2.5e-4, 1e-3] {
        let expected = 0.5 * amp2 * (w * tau).cos();
        assert!(
            (c.at(tau).unwrap() - expected).abs() < 0.02 * amp2,
            "τ = {tau}"
        );
    }
    let zero = autocorrelation(&NoiseTrajectory::zeros(1e-3, 100), 0.01).unwrap();
    assert!(zero.values.iter().all(|&v| v == 0.0));
}

#[test]
fn synthesis_is_deterministic_across_entry_points() {
    let m = PsdModel::white(1e-9);
    let a = Synthesizer::new(&m, 0.01, 1e-5).unwrap().generate(77);
    let b = synthesize_trajectory(&m, 0.01, 1e-5, 77).unwrap();
    assert_eq!(
        a.samples.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
        b.samples.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn tabulated_is_even_and_round_trips() {
    let t = TabulatedPsd::new(vec![0.0, 10.0, 1e3, 1e5], vec![1e-6, 1e-6, 1e-9, 1e-12]).unwrap();
    let m = PsdModel::Tabulated(t.clone());
    for w in [0.0, 3.0, 500.0, 7e4, 1e6] {
        assert_eq!(m.evaluate(w).unwrap(), m.evaluate(-w).unwrap());
    }
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    assert_eq!(TabulatedPsd::read_csv(buf.as_slice()).unwrap(), t);
    for w in [1.0, 100.0, 2e4] {
        let s = m.evaluate(w).unwrap();
        let round = convert_psd(
            convert_psd(s, w, Conversion::PhaseToFrequency).unwrap(),
            w,
            Conversion::FrequencyToPhase,
        )
        .unwrap();
        assert!((round / s - 1.0).abs() < 1e-15);
    }
}
