use std::f64::consts::{PI, TAU};

use catsim_core::dynamics::{cat_probability, ForceParams};
use catsim_core::harness::{run_scan, ScanKind, ScanSpec};
use catsim_core::noise::{sample_drift, BeamSetup, DriftProcess, Geometry};

#[test]
fn random_walk_increment_variance() {
    let diffusion = 3.0;
    let dt = 1e-3;
    let times: Vec<f64> = (0..=10_000).map(|i| i as f64 * dt).collect();
    let x = sample_drift(&DriftProcess::RandomWalk { diffusion, seed: 17 }, &times).unwrap();
    let inc: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = inc.iter().sum::<f64>() / inc.len() as f64;
    let var = inc.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (inc.len() - 1) as f64;
    assert!((var / (diffusion * dt) - 1.0).abs() < 0.05, "variance ratio {}", var / (diffusion * dt));
}

#[test]
fn shot_noise_scales_as_inverse_sqrt() {
    let f = ForceParams::from_lab_units(2.2, -5.46, 0.0).unwrap();
    let mut sds = Vec::new();
    for shots in [100u64, 400, 1600] {
        let mut est = Vec::new();
        for rep in 0..200 {
            let mut s = ScanSpec::new(ScanKind::TimeScan, 60e-6, 61e-6, 2, f);
            s.nbar = 2.0;
            s.smoothing_window = 1;
            s.shots = shots;
            s.seed = rep;
            est.push(run_scan(&s).unwrap().estimate[0]);
        }
        let m = est.iter().sum::<f64>() / est.len() as f64;
        sds.push((est.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt());
    }
    for k in 1..3 {
        let ratio = sds[k - 1] / sds[k];
        assert!((ratio / 2.0 - 1.0).abs() < 0.1, "sd ratio {ratio} ({sds:?})");
    }
}

#[test]
fn time_scan_minima_touch_zero_at_revivals() {
    let f = ForceParams::from_lab_units(2.0, 5.0, 0.0).unwrap();
    let period = TAU / f.delta;
    let mut s = ScanSpec::new(ScanKind::TimeScan, 0.0, 3.0 * period, 61, f);
    s.shots = 0;
    let r = run_scan(&s).unwrap();
    for i in [0, 20, 40, 60] {
        assert!(r.estimate[i] < 1e-12, "point {i}: {}", r.estimate[i]);
    }
    assert!(r.estimate[10] > 0.1);
}

#[test]
fn counter_propagating_phase_scan_washes_out() {
    let f = ForceParams::from_lab_units(2.0, 5.0, 90.0).unwrap();
    let mut s = ScanSpec::new(ScanKind::PhaseScan, 0.0, TAU, 9, f);
    s.setup = BeamSetup::new(Geometry::CounterPropagating, DriftProcess::RandomWalk { diffusion: 200.0, seed: 0 });
    s.nbar = 1.0;
    s.cutoff = Some(40);
    s.tail_tol = 1e-6;
    s.seed = 11;
    let r = run_scan(&s).unwrap();
    let pcat = cat_probability(&f, 1.0, 0.0, f.duration).unwrap();
    let mean = r.estimate.iter().sum::<f64>() / r.len() as f64;
    let sigma = (0.25 / (s.shots as f64 * r.len() as f64)).sqrt();
    assert!((mean - pcat / 2.0).abs() < 3.0 * sigma, "mean {mean} vs {}", pcat / 2.0);
}

#[test]
fn copropagating_phase_scan_keeps_fringes_under_drift() {
    let f = ForceParams::from_lab_units(2.0, 5.0, 90.0).unwrap();
    let mut contrasts = Vec::new();
    for drift in [
        DriftProcess::Constant { offset: 0.0 },
        DriftProcess::Constant { offset: 1.3 },
        DriftProcess::Sinusoid { amplitude: 2.0 * PI, frequency: 1.0, phase: 0.0 },
    ] {
        let mut s = ScanSpec::new(ScanKind::PhaseScan, 0.0, PI, 17, f);
        s.setup = BeamSetup::new(Geometry::CoPropagating, drift);
        s.shots = 0;
        s.cutoff = Some(16);
        let r = run_scan(&s).unwrap();
        let max = r.model.iter().cloned().fold(f64::MIN, f64::max);
        let min = r.model.iter().cloned().fold(f64::MAX, f64::min);
        contrasts.push(max - min);
    }
    for c in &contrasts[1..] {
        assert!((c - contrasts[0]).abs() < 1e-8, "{contrasts:?}");
    }
}
