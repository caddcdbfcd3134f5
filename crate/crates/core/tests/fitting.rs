use std::f64::consts::TAU;

use catsim_core::dynamics::ForceParams;
use catsim_core::fitter::{fit, residuals, two_stage_fit, FitData, FitSpec, ModelKind, Param};
use catsim_core::harness::{run_scan, ScanKind, ScanSpec};

const KHZ: f64 = TAU * 1e3;

fn time_scan(shots: u64, seed: u64) -> ScanSpec {
    let f = ForceParams::from_lab_units(2.2, -5.46, 0.0).unwrap();
    let mut s = ScanSpec::new(ScanKind::TimeScan, 0.0, 450e-6, 46, f);
    s.nbar = 8.1;
    s.shots = shots;
    s.seed = seed;
    s
}

fn detuning_scan(nbar: f64, nbar_dot: f64) -> ScanSpec {
    let f = ForceParams::from_lab_units(1.62, 1.0, 500.0).unwrap();
    let mut s = ScanSpec::new(ScanKind::DetuningScan, -6.05 * KHZ, 5.95 * KHZ, 61, f);
    s.nbar = nbar;
    s.nbar_dot = nbar_dot;
    s.shots = 0;
    s
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn time_spec(delta0: f64, nbar0: f64) -> FitSpec {
    FitSpec::new(ModelKind::TimeScan)
        .fixed(Param::OmegaSbKhz, 2.2)
        .fixed(Param::NbarDotPerMs, 0.0)
        .free(Param::DeltaKhz, delta0)
        .free(Param::Nbar, nbar0)
}

#[test]
fn noiseless_time_scan_round_trip() {
    let data = FitData::from_result(&run_scan(&time_scan(0, 1)).unwrap()).unwrap();
    for (d, n) in [(1.2, 0.8), (0.8, 1.2), (1.1, 1.1)] {
        let r = fit(&data, &time_spec(-5.46 * d, 8.1 * n)).unwrap();
        assert!(r.converged);
        assert!(rel(r.values[&Param::DeltaKhz], -5.46) < 1e-3, "{:?}", r.values);
        assert!(rel(r.values[&Param::Nbar], 8.1) < 1e-3, "{:?}", r.values);
    }
}

#[test]
fn noiseless_detuning_scan_round_trip() {
    let data = FitData::from_result(&run_scan(&detuning_scan(0.05, 440.0)).unwrap()).unwrap();
    for (o, h) in [(1.2, 0.8), (0.8, 1.2)] {
        let spec = FitSpec::new(ModelKind::DetuningScan)
            .fixed(Param::Nbar, 0.05)
            .fixed(Param::TauUs, 500.0)
            .free(Param::OmegaSbKhz, 1.62 * o)
            .free(Param::NbarDotPerMs, 0.44 * h);
        let r = fit(&data, &spec).unwrap();
        assert!(rel(r.values[&Param::OmegaSbKhz], 1.62) < 1e-3, "{:?}", r.values);
        assert!(rel(r.values[&Param::NbarDotPerMs], 0.44) < 1e-3, "{:?}", r.values);
    }
}

#[test]
fn noiseless_phase_scan_round_trip() {
    let f = ForceParams::from_lab_units(2.0, 5.0, 90.0).unwrap().with_phases(0.6, 0.0);
    let mut s = ScanSpec::new(ScanKind::PhaseScan, 0.0, TAU, 33, f);
    s.shots = 0;
    s.nbar = 0.5;
    s.cutoff = Some(24);
    let result = run_scan(&s).unwrap();
    let data = FitData::from_result(&result).unwrap();
    let pcat = catsim_core::dynamics::cat_probability(&f, 0.5, 0.0, f.duration).unwrap();
    let spec = FitSpec::new(ModelKind::PhaseScan)
        .free(Param::Amplitude, pcat * 0.8)
        .free(Param::PhiSRad, 0.6 * 1.2)
        .free(Param::Offset, 0.01);
    let r = fit(&data, &spec).unwrap();
    assert!(rel(r.values[&Param::Amplitude], pcat) < 1e-3, "{:?}", r.values);
    assert!(rel(r.values[&Param::PhiSRad], 0.6) < 1e-3, "{:?}", r.values);
    assert!(r.values[&Param::Offset].abs() < 1e-6);
}

#[test]
fn nuisance_parameters_are_recovered() {
    let mut s = detuning_scan(0.05, 440.0);
    s.nuisance.peak_drift = -0.04;
    s.nuisance.contrast_drift = -0.1;
    s.nuisance.detuning_drift = 0.2 * KHZ;
    let data = FitData::from_result(&run_scan(&s).unwrap()).unwrap();
    let spec = FitSpec::new(ModelKind::DetuningScan)
        .fixed(Param::Nbar, 0.05)
        .fixed(Param::TauUs, 500.0)
        .free(Param::OmegaSbKhz, 1.5)
        .free(Param::NbarDotPerMs, 0.5)
        .free(Param::PeakDrift, 0.0)
        .free(Param::ContrastDrift, 0.0)
        .free(Param::DeltaDriftKhz, 0.1);
    let r = fit(&data, &spec).unwrap();
    assert!(rel(r.values[&Param::OmegaSbKhz], 1.62) < 1e-3, "{:?}", r.values);
    assert!((r.values[&Param::ContrastDrift] + 0.1).abs() < 1e-4, "{:?}", r.values);
    assert!((r.values[&Param::DeltaDriftKhz] - 0.2).abs() < 1e-3, "{:?}", r.values);
}

#[test]
fn fit_ignores_point_order() {
    let result = run_scan(&time_scan(100, 3)).unwrap();
    let data = FitData::from_result(&result).unwrap();
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.reverse();
    idx.rotate_left(7);
    let shuffled = FitData::new(
        idx.iter().map(|&i| data.x[i]).collect(),
        idx.iter().map(|&i| data.y[i]).collect(),
        idx.iter().map(|&i| data.u[i]).collect(),
    )
    .unwrap();
    let spec = time_spec(-5.0, 7.0);
    let a = fit(&data, &spec).unwrap();
    let b = fit(&shuffled, &spec).unwrap();
    for p in [Param::DeltaKhz, Param::Nbar] {
        assert!(rel(a.values[&p], b.values[&p]) < 1e-6, "{p:?}: {} vs {}", a.values[&p], b.values[&p]);
    }
}

#[test]
fn residual_norm_is_the_minimised_quantity() {
    let data = FitData::from_result(&run_scan(&time_scan(100, 8)).unwrap()).unwrap();
    let r = fit(&data, &time_spec(-5.2, 7.5)).unwrap();
    let res = residuals(&data, ModelKind::TimeScan, &r.values).unwrap();
    let norm = res.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!((norm - r.residual_norm).abs() < 1e-12);
    // nudging any free parameter cannot lower it
    for p in [Param::DeltaKhz, Param::Nbar] {
        for s in [0.999, 1.001] {
            let mut v = r.values.clone();
            *v.get_mut(&p).unwrap() *= s;
            let n2 = residuals(&data, ModelKind::TimeScan, &v).unwrap().iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(n2 >= norm - 1e-12);
        }
    }
}

#[test]
fn uncertainty_tracks_monte_carlo_spread() {
    let trials = 50;
    let mut deltas = Vec::new();
    let mut sigmas = Vec::new();
    for seed in 0..trials {
        let data = FitData::from_result(&run_scan(&time_scan(100, 1000 + seed)).unwrap()).unwrap();
        let r = fit(&data, &time_spec(-5.46 * 1.05, 8.1 * 0.95)).unwrap();
        deltas.push(r.values[&Param::DeltaKhz]);
        sigmas.push(r.uncertainties.expect("uncertainties")[&Param::DeltaKhz]);
    }
    let mean = deltas.iter().sum::<f64>() / trials as f64;
    let spread = (deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
    let reported = sigmas.iter().sum::<f64>() / trials as f64;
    let ratio = reported / spread;
    assert!((0.5..=2.0).contains(&ratio), "reported {reported} vs spread {spread}");
}

#[test]
fn two_stage_recipe() {
    let cold = FitData::from_result(&run_scan(&detuning_scan(0.05, 440.0)).unwrap()).unwrap();
    let hot = FitData::from_result(&run_scan(&detuning_scan(5.6, 620.0)).unwrap()).unwrap();
    let cold_spec = FitSpec::new(ModelKind::DetuningScan)
        .fixed(Param::Nbar, 0.05)
        .fixed(Param::TauUs, 500.0)
        .free(Param::OmegaSbKhz, 1.4)
        .free(Param::NbarDotPerMs, 0.5);
    let hot_spec = FitSpec::new(ModelKind::DetuningScan)
        .fixed(Param::TauUs, 500.0)
        .fixed(Param::OmegaSbKhz, 0.0)
        .free(Param::Nbar, 5.0)
        .free(Param::NbarDotPerMs, 0.5);
    let (a, b) = two_stage_fit(&cold, &cold_spec, &hot, &hot_spec).unwrap();
    assert!(rel(a.values[&Param::OmegaSbKhz], 1.62) < 1e-3);
    assert_eq!(b.values[&Param::OmegaSbKhz], a.values[&Param::OmegaSbKhz]);
    assert!(rel(b.values[&Param::Nbar], 5.6) < 1e-3, "{:?}", b.values);
    assert!(rel(b.values[&Param::NbarDotPerMs], 0.62) < 1e-3, "{:?}", b.values);
}
