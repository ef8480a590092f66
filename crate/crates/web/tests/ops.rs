use spinlock_web::{bloch_evolution, coupling_curve, locking_decay, optimal_nbar};

#[test]
fn coupling_curve_peaks_at_the_optimum() {
    let rows = coupling_curve(0.038, 2000.0, 100).unwrap();
    assert_eq!(rows.len(), 300);
    let best = rows.chunks(3).max_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
    let opt = optimal_nbar(0.038, 2000.0).unwrap();
    assert!((best[0] - opt).abs() <= 20.0, "{} vs {opt}", best[0]);
    assert!(optimal_nbar(1e-3, 2000.0).unwrap().is_nan());
}

#[test]
fn decay_laws_coincide_without_a_tone() {
    let rows = locking_decay(1000.0, 1e-7, 0.0, 0.5, 50).unwrap();
    assert_eq!(&rows[..4], &[0.0, 1.0, 1.0, 1.0]);
    for r in rows.chunks(4) {
        assert!((r[1] - r[2]).abs() < 1e-15);
        assert!((r[1] - r[3]).abs() < 1e-12);
    }
}

#[test]
fn bloch_evolution_stays_on_the_sphere() {
    let rows = bloch_evolution(5000.0, 0.2, 1.48, 2e-3, 400).unwrap();
    for r in rows.chunks(4) {
        let n = (r[1] * r[1] + r[2] * r[2] + r[3] * r[3]).sqrt();
        assert!((n - 1.0).abs() < 1e-9);
    }
    assert!((rows[1] - 1.0).abs() < 1e-12, "{}", rows[1]);
}
